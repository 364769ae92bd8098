//! Evaluation environments and TRP layout generators.
//!
//! A [`ScenarioSpec`] describes the hall (footprint, mount heights, clutter
//! statistics). A [`Deployment`] is an ordered, validated set of TRPs inside
//! one scenario. The generators build the standard ceiling grid, the
//! wall-mounted edge layout and the mixed layout; [`densify`] appends TRPs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::Point3;

/// Minimum number of TRPs that can produce a DL-TDOA fix (three independent
/// differences for three unknowns).
pub const MIN_TRPS_FOR_FIX: usize = 4;

/// Inter-site distance of the 3GPP reference grids.
pub const REFERENCE_ISD_M: f64 = 20.0;

const CONTAINMENT_TOL_M: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("a DL-TDOA fix needs at least {MIN_TRPS_FOR_FIX} TRPs, got {0}")]
    TooFewTrps(usize),
    #[error("{n_trps} TRPs cannot be arranged as a grid in a {x_len} m x {y_len} m hall: {reason}")]
    GridNotFactorable {
        n_trps: usize,
        x_len: f64,
        y_len: f64,
        reason: String,
    },
    #[error("TRP position ({x}, {y}, {z}) lies outside the hall")]
    OutsideHall { x: f64, y: f64, z: f64 },
    #[error("TRP position ({x}, {y}, {z}) duplicates an existing TRP")]
    DuplicatePosition { x: f64, y: f64, z: f64 },
    #[error("TRP ids must be 0..{expected}, found id {found} at index {index}")]
    NonDenseIds {
        expected: usize,
        found: usize,
        index: usize,
    },
}

/// The 3GPP indoor scenario variants covered by the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioFamily {
    #[serde(rename = "IOO")]
    Ioo,
    #[serde(rename = "InF-SH")]
    InfSh,
    #[serde(rename = "InF-DH")]
    InfDh,
}

impl ScenarioFamily {
    pub const ALL: [ScenarioFamily; 3] = [Self::Ioo, Self::InfSh, Self::InfDh];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ioo => "IOO",
            Self::InfSh => "InF-SH",
            Self::InfDh => "InF-DH",
        }
    }

    pub fn is_factory(self) -> bool {
        matches!(self, Self::InfSh | Self::InfDh)
    }
}

impl fmt::Display for ScenarioFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioFamily {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "ioo" => Ok(Self::Ioo),
            "inf-sh" => Ok(Self::InfSh),
            "inf-dh" => Ok(Self::InfDh),
            other => Err(ScenarioError::InvalidScenario(format!(
                "unknown scenario family {other:?} (expected IOO, InF-SH or InF-DH)"
            ))),
        }
    }
}

/// PRS numerology of the simulated carrier. Carried as metadata only: the
/// statistical channel model does not depend on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrierMetadata {
    pub carrier_frequency_hz: f64,
    pub subcarrier_spacing_hz: f64,
    pub n_subcarriers: u32,
    pub prs_bandwidth_hz: f64,
}

impl Default for CarrierMetadata {
    fn default() -> Self {
        Self {
            carrier_frequency_hz: 2.0e9,
            subcarrier_spacing_hz: 30.0e3,
            n_subcarriers: 4096,
            prs_bandwidth_hz: 100.0e6,
        }
    }
}

/// Hall geometry and clutter statistics. All lengths in meters; the hall
/// occupies `[0, x_len] x [0, y_len] x [0, ceiling_height]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub family: ScenarioFamily,
    pub x_len: f64,
    pub y_len: f64,
    pub ceiling_height: f64,
    pub trp_mount_height: f64,
    pub ue_height: f64,
    /// Fraction of the floor covered by clutter, `r`.
    pub clutter_density: f64,
    /// Typical clutter size `d_clutter`.
    pub clutter_size: f64,
    /// Effective clutter height `h_c`.
    pub clutter_height: f64,
    #[serde(default)]
    pub carrier: CarrierMetadata,
}

impl ScenarioSpec {
    /// The 3GPP preset for `family`.
    pub fn preset(family: ScenarioFamily) -> Self {
        let carrier = CarrierMetadata::default();
        match family {
            ScenarioFamily::Ioo => Self {
                family,
                x_len: 120.0,
                y_len: 50.0,
                ceiling_height: 3.0,
                trp_mount_height: 3.0,
                ue_height: 1.5,
                clutter_density: 0.0,
                clutter_size: 0.0,
                clutter_height: 0.0,
                carrier,
            },
            ScenarioFamily::InfSh | ScenarioFamily::InfDh => {
                let (r, d) = if family == ScenarioFamily::InfSh {
                    (0.2, 10.0)
                } else {
                    (0.6, 2.0)
                };
                Self {
                    family,
                    x_len: 120.0,
                    y_len: 60.0,
                    ceiling_height: 10.0,
                    trp_mount_height: 8.0,
                    ue_height: 1.5,
                    clutter_density: r,
                    clutter_size: d,
                    clutter_height: 6.0,
                    carrier,
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |msg: String| Err(ScenarioError::InvalidScenario(msg));
        let finite = [
            self.x_len,
            self.y_len,
            self.ceiling_height,
            self.trp_mount_height,
            self.ue_height,
            self.clutter_density,
            self.clutter_size,
            self.clutter_height,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("all dimensions must be finite".into());
        }
        if self.x_len <= 0.0 || self.y_len <= 0.0 {
            return bad(format!(
                "hall footprint must be positive, got {} x {}",
                self.x_len, self.y_len
            ));
        }
        if !(0.0 < self.ue_height
            && self.ue_height < self.trp_mount_height
            && self.trp_mount_height <= self.ceiling_height)
        {
            return bad(format!(
                "heights must satisfy 0 < ue_height ({}) < trp_mount_height ({}) <= ceiling_height ({})",
                self.ue_height, self.trp_mount_height, self.ceiling_height
            ));
        }
        if !(0.0..1.0).contains(&self.clutter_density) {
            return bad(format!(
                "clutter_density must lie in [0, 1), got {}",
                self.clutter_density
            ));
        }
        if self.clutter_height < 0.0 || self.clutter_height > self.ceiling_height {
            return bad(format!(
                "clutter_height {} must lie in [0, ceiling_height {}]",
                self.clutter_height, self.ceiling_height
            ));
        }
        match self.family {
            ScenarioFamily::InfDh if self.clutter_density < 0.4 => {
                return bad(format!(
                    "InF-DH requires clutter_density >= 0.4, got {}",
                    self.clutter_density
                ));
            }
            ScenarioFamily::InfSh if self.clutter_density >= 0.4 => {
                return bad(format!(
                    "InF-SH requires clutter_density < 0.4, got {}",
                    self.clutter_density
                ));
            }
            _ => {}
        }
        if self.family.is_factory() {
            if self.clutter_size <= 0.0 {
                return bad("factory scenarios need a positive clutter_size".into());
            }
            if self.clutter_density <= 0.0 {
                return bad("factory scenarios need a positive clutter_density".into());
            }
            if self.family == ScenarioFamily::InfSh && self.clutter_height <= self.ue_height {
                return bad(format!(
                    "InF-SH needs clutter_height ({}) above ue_height ({})",
                    self.clutter_height, self.ue_height
                ));
            }
        }
        Ok(())
    }

    /// Whether `p` lies inside the hall (closed box, 1e-9 m tolerance).
    pub fn contains(&self, p: &Point3) -> bool {
        let t = CONTAINMENT_TOL_M;
        p.iter().all(|v| v.is_finite())
            && p.x >= -t
            && p.x <= self.x_len + t
            && p.y >= -t
            && p.y <= self.y_len + t
            && p.z >= -t
            && p.z <= self.ceiling_height + t
    }

    pub fn center(&self) -> Point3 {
        Point3::new(self.x_len / 2.0, self.y_len / 2.0, self.ue_height)
    }
}

/// Free function form of [`ScenarioSpec::preset`].
pub fn preset_scenario(family: ScenarioFamily) -> ScenarioSpec {
    ScenarioSpec::preset(family)
}

/// A transmission and reception point at a known position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "TrpRecord", into = "TrpRecord")]
pub struct Trp {
    pub id: usize,
    pub position: Point3,
}

#[derive(Serialize, Deserialize)]
struct TrpRecord {
    id: usize,
    x: f64,
    y: f64,
    z: f64,
}

impl From<TrpRecord> for Trp {
    fn from(r: TrpRecord) -> Self {
        Trp {
            id: r.id,
            position: Point3::new(r.x, r.y, r.z),
        }
    }
}

impl From<Trp> for TrpRecord {
    fn from(t: Trp) -> Self {
        TrpRecord {
            id: t.id,
            x: t.position.x,
            y: t.position.y,
            z: t.position.z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayoutTag {
    Standard,
    Edge,
    Mixed,
    Custom,
}

impl LayoutTag {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Standard => "standard",
            Self::Edge => "edge",
            Self::Mixed => "mixed",
            Self::Custom => "custom",
        }
    }
}

impl fmt::Display for LayoutTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LayoutTag {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "standard" => Ok(Self::Standard),
            "edge" => Ok(Self::Edge),
            "mixed" => Ok(Self::Mixed),
            "custom" => Ok(Self::Custom),
            other => Err(ScenarioError::InvalidScenario(format!(
                "unknown layout {other:?} (expected standard, edge, mixed or custom)"
            ))),
        }
    }
}

/// A validated TRP layout inside a scenario.
///
/// Invariants, checked on every construction path (including
/// deserialization): ids are `0..N`, `N >= 4`, every TRP is inside the hall
/// and no two TRPs share coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DeploymentDoc", into = "DeploymentDoc")]
pub struct Deployment {
    scenario: ScenarioSpec,
    trps: Vec<Trp>,
    layout: LayoutTag,
}

#[derive(Serialize, Deserialize)]
struct DeploymentDoc {
    scenario: ScenarioSpec,
    trps: Vec<Trp>,
    layout: LayoutTag,
}

impl TryFrom<DeploymentDoc> for Deployment {
    type Error = ScenarioError;

    fn try_from(doc: DeploymentDoc) -> Result<Self, Self::Error> {
        Deployment::from_trps(doc.scenario, doc.trps, doc.layout)
    }
}

impl From<Deployment> for DeploymentDoc {
    fn from(d: Deployment) -> Self {
        DeploymentDoc {
            scenario: d.scenario,
            trps: d.trps,
            layout: d.layout,
        }
    }
}

impl Deployment {
    /// Builds a deployment from positions, assigning ids in order.
    pub fn new(
        scenario: ScenarioSpec,
        positions: impl IntoIterator<Item = Point3>,
        layout: LayoutTag,
    ) -> Result<Self, ScenarioError> {
        let trps = positions
            .into_iter()
            .enumerate()
            .map(|(id, position)| Trp { id, position })
            .collect();
        Self::from_trps(scenario, trps, layout)
    }

    pub fn from_trps(scenario: ScenarioSpec, trps: Vec<Trp>, layout: LayoutTag) -> Result<Self, ScenarioError> {
        scenario.validate()?;
        if trps.len() < MIN_TRPS_FOR_FIX {
            return Err(ScenarioError::TooFewTrps(trps.len()));
        }
        for (index, trp) in trps.iter().enumerate() {
            if trp.id != index {
                return Err(ScenarioError::NonDenseIds {
                    expected: trps.len(),
                    found: trp.id,
                    index,
                });
            }
            check_inside(&scenario, &trp.position)?;
            if trps[..index].iter().any(|o| o.position == trp.position) {
                let p = trp.position;
                return Err(ScenarioError::DuplicatePosition { x: p.x, y: p.y, z: p.z });
            }
        }
        Ok(Self { scenario, trps, layout })
    }

    pub fn scenario(&self) -> &ScenarioSpec {
        &self.scenario
    }

    pub fn trps(&self) -> &[Trp] {
        &self.trps
    }

    pub fn layout(&self) -> LayoutTag {
        self.layout
    }

    pub fn len(&self) -> usize {
        self.trps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trps.is_empty()
    }

    pub fn position(&self, id: usize) -> Point3 {
        self.trps[id].position
    }

    pub fn positions(&self) -> impl Iterator<Item = Point3> + '_ {
        self.trps.iter().map(|t| t.position)
    }

    /// Id of the TRP closest to `p` (3D distance), lowest id on ties.
    pub fn nearest_trp(&self, p: &Point3) -> usize {
        self.nearest_among(p, |_| true)
            .expect("deployment holds at least four TRPs")
    }

    /// Id of the closest TRP for which `keep(id)` holds, lowest id on ties.
    pub fn nearest_among(&self, p: &Point3, keep: impl Fn(usize) -> bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for trp in self.trps.iter().filter(|t| keep(t.id)) {
            let d = (trp.position - p).norm();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((trp.id, d));
            }
        }
        best.map(|(id, _)| id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("deployment serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

fn check_inside(scenario: &ScenarioSpec, p: &Point3) -> Result<(), ScenarioError> {
    if scenario.contains(p) {
        Ok(())
    } else {
        Err(ScenarioError::OutsideHall { x: p.x, y: p.y, z: p.z })
    }
}

/// Picks `rows x cols = n` with both factors at least 2 and the column/row
/// ratio closest (in log scale) to the hall aspect ratio. Rows run along y.
fn grid_shape(n: usize, x_len: f64, y_len: f64) -> Option<(usize, usize)> {
    let target = (x_len / y_len).ln();
    (2..=n / 2)
        .filter(|rows| n.is_multiple_of(*rows) && n / rows >= 2)
        .map(|rows| (rows, n / rows))
        .min_by(|a, b| {
            let ea = ((a.1 as f64 / a.0 as f64).ln() - target).abs();
            let eb = ((b.1 as f64 / b.0 as f64).ln() - target).abs();
            ea.total_cmp(&eb)
        })
}

/// Ceiling grid at `trp_mount_height`.
///
/// The spacing is isotropic: `min(x_len / cols, y_len / rows)`, with the grid
/// centered in the hall. For the 3GPP counts (12 in IOO, 18 in InF) this gives
/// exactly the 20 m inter-site distance; for other counts the binding axis
/// keeps a margin of half the spacing.
pub fn make_standard_deployment(scenario: &ScenarioSpec, n_trps: usize) -> Result<Deployment, ScenarioError> {
    scenario.validate()?;
    if n_trps < MIN_TRPS_FOR_FIX {
        return Err(ScenarioError::TooFewTrps(n_trps));
    }
    let (rows, cols) =
        grid_shape(n_trps, scenario.x_len, scenario.y_len).ok_or_else(|| ScenarioError::GridNotFactorable {
            n_trps,
            x_len: scenario.x_len,
            y_len: scenario.y_len,
            reason: "the count has no factorization with at least 2 rows and 2 columns".into(),
        })?;
    let spacing = (scenario.x_len / cols as f64).min(scenario.y_len / rows as f64);
    let x0 = (scenario.x_len - spacing * (cols - 1) as f64) / 2.0;
    let y0 = (scenario.y_len - spacing * (rows - 1) as f64) / 2.0;
    let z = scenario.trp_mount_height;
    let positions = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| Point3::new(x0 + spacing * c as f64, y0 + spacing * r as f64, z)));
    Deployment::new(*scenario, positions, LayoutTag::Standard)
}

/// Number of TRPs strictly inside the (bottom, right, top, left) walls when
/// `n` TRPs are spread over them.
///
/// Opposite walls get equal counts; the split between long and short wall
/// pairs follows wall length. An odd leftover goes to the bottom wall.
fn edge_allocation(n: usize, x_len: f64, y_len: f64) -> [usize; 4] {
    let pairs = n / 2;
    let horizontal = ((pairs as f64) * x_len / (x_len + y_len)).round() as usize;
    let horizontal = horizontal.min(pairs);
    let vertical = pairs - horizontal;
    [horizontal + n % 2, vertical, horizontal, vertical]
}

/// Wall-mounted layout: every TRP on the boundary rectangle at
/// `trp_mount_height`.
///
/// The four corners are always occupied. The remaining `n - 4` TRPs are split
/// over the walls by length (see [`edge_allocation`]) and spaced evenly
/// between the corners, so IOO with 12 TRPs has 30 m spacing on the long walls
/// and 25 m on the short ones.
pub fn make_edge_deployment(scenario: &ScenarioSpec, n_trps: usize) -> Result<Deployment, ScenarioError> {
    scenario.validate()?;
    if n_trps < MIN_TRPS_FOR_FIX {
        return Err(ScenarioError::TooFewTrps(n_trps));
    }
    let (w, h, z) = (scenario.x_len, scenario.y_len, scenario.trp_mount_height);
    let [bottom, right, top, left] = edge_allocation(n_trps - 4, w, h);
    let along = |k: usize, len: f64| (1..=k).map(move |i| i as f64 * len / (k + 1) as f64);
    let positions: Vec<Point3> = std::iter::once(Point3::new(0.0, 0.0, z))
        .chain(along(bottom, w).map(|x| Point3::new(x, 0.0, z)))
        .chain(std::iter::once(Point3::new(w, 0.0, z)))
        .chain(along(right, h).map(|y| Point3::new(w, y, z)))
        .chain(std::iter::once(Point3::new(w, h, z)))
        .chain(along(top, w).map(|x| Point3::new(w - x, h, z)))
        .chain(std::iter::once(Point3::new(0.0, h, z)))
        .chain(along(left, h).map(|y| Point3::new(0.0, h - y, z)))
        .collect();
    Deployment::new(*scenario, positions, LayoutTag::Edge)
}

/// Twelve-TRP mixed layout: four corners, two TRPs on each long wall at
/// thirds of its length, and four ceiling TRPs around the hall center.
///
/// The interior offsets from the center are (±20, ±10) m in IOO and
/// (±30, ±15) m in the factory scenarios.
pub fn make_mixed_deployment(scenario: &ScenarioSpec) -> Result<Deployment, ScenarioError> {
    scenario.validate()?;
    let (w, h, z) = (scenario.x_len, scenario.y_len, scenario.trp_mount_height);
    let (dx, dy) = match scenario.family {
        ScenarioFamily::Ioo => (20.0, 10.0),
        ScenarioFamily::InfSh | ScenarioFamily::InfDh => (30.0, 15.0),
    };
    let (cx, cy) = (w / 2.0, h / 2.0);
    let mut positions = vec![
        Point3::new(0.0, 0.0, z),
        Point3::new(w, 0.0, z),
        Point3::new(w, h, z),
        Point3::new(0.0, h, z),
        Point3::new(w / 3.0, 0.0, z),
        Point3::new(2.0 * w / 3.0, 0.0, z),
        Point3::new(2.0 * w / 3.0, h, z),
        Point3::new(w / 3.0, h, z),
    ];
    for (sx, sy) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
        let p = Point3::new(cx + sx * dx, cy + sy * dy, z);
        positions.push(p);
    }
    Deployment::new(*scenario, positions, LayoutTag::Mixed)
}

/// Appends TRPs at `new_positions`, returning a new `custom` deployment.
pub fn densify(deployment: &Deployment, new_positions: &[Point3]) -> Result<Deployment, ScenarioError> {
    if new_positions.is_empty() {
        return Ok(deployment.clone());
    }
    let mut positions: Vec<Point3> = deployment.positions().collect();
    positions.extend_from_slice(new_positions);
    Deployment::new(deployment.scenario, positions, LayoutTag::Custom)
}

/// Builds a named layout of `n_trps` (ignored for `mixed`, which is always 12).
pub fn make_layout(scenario: &ScenarioSpec, layout: LayoutTag, n_trps: usize) -> Result<Deployment, ScenarioError> {
    match layout {
        LayoutTag::Standard => make_standard_deployment(scenario, n_trps),
        LayoutTag::Edge => make_edge_deployment(scenario, n_trps),
        LayoutTag::Mixed => make_mixed_deployment(scenario),
        LayoutTag::Custom => Err(ScenarioError::InvalidScenario(
            "custom layouts need explicit TRP positions".into(),
        )),
    }
}
