use trpplan::campaign::{los_histogram, percentile, run_campaign, worst_ue_locations, CampaignConfig, MeasurementMode};
use trpplan::channel::NoiseModel;
use trpplan::config::{preset_catalog, RunConfig};
use trpplan::scenario::{make_layout, LayoutTag, ScenarioFamily, ScenarioSpec};

fn config(family: ScenarioFamily, layout: LayoutTag, n_drops: usize, seed: u64) -> CampaignConfig {
    let s = ScenarioSpec::preset(family);
    CampaignConfig::new(
        make_layout(&s, layout, 12).unwrap(),
        NoiseModel::default(),
        n_drops,
        seed,
    )
}

#[test]
fn noiseless_all_los_is_exact_everywhere() {
    for preset in preset_catalog() {
        let mut c = CampaignConfig::new(
            preset.deployment,
            NoiseModel {
                sigma_toa_m: 1e-12,
                ..NoiseModel::default()
            },
            300,
            5,
        );
        c.force_all_los = true;
        let r = run_campaign(&c).unwrap();
        assert!(r.summary.percentiles.unwrap().p95 < 1e-3, "{}", preset.name);
        assert_eq!(los_histogram(&r)[12], 300);
    }
}

#[test]
fn all_trp_mode_is_always_available() {
    for family in ScenarioFamily::ALL {
        let r = run_campaign(&config(family, LayoutTag::Edge, 400, 11)).unwrap();
        assert_eq!(r.summary.availability_fraction, 1.0);
        assert_eq!(r.summary.cdf.len(), 400);
        assert!(r.summary.cdf.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn los_only_excludes_short_drops_from_the_cdf() {
    let mut c = config(ScenarioFamily::InfSh, LayoutTag::Edge, 500, 3);
    c.measurement_mode = MeasurementMode::LosOnly;
    let r = run_campaign(&c).unwrap();
    let usable = r.drops.iter().filter(|d| d.n_los_links >= 4).count();
    assert_eq!(r.summary.cdf.len(), usable);
    assert!(r.drops.iter().all(|d| d.available == (d.n_los_links >= 4)));
    assert_eq!(r.summary.availability_fraction, usable as f64 / 500.0);
}

#[test]
fn worst_ues_clear_the_complementary_percentile() {
    let r = run_campaign(&config(ScenarioFamily::Ioo, LayoutTag::Standard, 1000, 2)).unwrap();
    let worst = worst_ue_locations(&r, 0.1).unwrap();
    assert_eq!(worst.len(), 100);
    let threshold = percentile(&r, 0.9).unwrap();
    for p in &worst {
        let d = r.drops.iter().find(|d| d.true_position == *p).unwrap();
        assert!(d.horizontal_error.unwrap() >= threshold);
    }
}

#[test]
fn percentiles_are_ordered() {
    let r = run_campaign(&config(ScenarioFamily::InfDh, LayoutTag::Mixed, 800, 4)).unwrap();
    let p = r.summary.percentiles.unwrap();
    assert!(p.p80 <= p.p90 && p.p90 <= p.p95);
    let qs: Vec<f64> = (0..=20).map(|i| percentile(&r, i as f64 / 20.0).unwrap()).collect();
    assert!(qs.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn campaign_json_round_trips() {
    let c = config(ScenarioFamily::Ioo, LayoutTag::Mixed, 20, 8);
    let back: CampaignConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
    assert_eq!(back, c);
    let r = run_campaign(&c).unwrap();
    let text = serde_json::to_string(&r).unwrap();
    assert_eq!(
        serde_json::to_string(&serde_json::from_str::<trpplan::CampaignResult>(&text).unwrap()).unwrap(),
        text
    );
}

#[test]
fn run_config_drives_a_campaign() {
    let cfg = RunConfig::parse(
        r#"{"schema_version":1,"scenario":{"preset":"InF-SH"},
            "deployments":[{"layout":"edge"}],
            "noise":{"sigma_toa_m":0.2,"seed":3},
            "campaign":{"n_drops":50,"ue_height_m":2.0}}"#,
    )
    .unwrap();
    let d = cfg.deployments().unwrap().remove(0).deployment;
    let c = cfg.campaign_config(d);
    assert_eq!((c.seed, c.n_drops, c.ue_height), (3, 50, 2.0));
    let r = run_campaign(&c).unwrap();
    assert!(r.drops.iter().all(|d| d.true_position.z == 2.0));
}

/// All-TRP and LOS-only IOO p90 within 25 % of each other.
#[test]
#[ignore = "does not hold under the exponential NLOS bias model; roughly 40 % of office links are NLOS"]
fn office_measurement_modes_agree_at_p90() {
    for layout in [LayoutTag::Standard, LayoutTag::Edge] {
        let all = run_campaign(&config(ScenarioFamily::Ioo, layout, 10_000, 1)).unwrap();
        let mut c = config(ScenarioFamily::Ioo, layout, 10_000, 1);
        c.measurement_mode = MeasurementMode::LosOnly;
        let los = run_campaign(&c).unwrap();
        let (a, b) = (percentile(&all, 0.9).unwrap(), percentile(&los, 0.9).unwrap());
        assert!((a - b).abs() / a.max(b) < 0.25, "{layout:?}: all {a} los-only {b}");
    }
}
