//! The benchmark inputs must stay valid, or `cargo bench` panics mid-run.

use isac_aoi::bound::optimize_theta;
use isac_aoi::params::load_params;
use isac_aoi::sim::{SimConfig, Simulator};
use isac_aoi::{GainMode, ServiceModel};

const CONFIG: &str = "tau = 1e5\nd = 100\nalpha = 0.3\nzeta_ms = 6";

#[test]
fn analytic_inputs_evaluate() {
    let p = load_params(CONFIG).unwrap();
    let model = ServiceModel::from_params(&p).unwrap();
    assert!(model.mgf(1000.0).unwrap().is_finite());
    assert_eq!(model.mgf(0.0).unwrap(), 1.0);
    assert!(optimize_theta(&p, 0.3).stable);
    let q = load_params(&format!("{CONFIG}\nzeta_ms = 4")).unwrap();
    assert_eq!(q.paoi_threshold, 4e-3);
}

#[test]
fn simulation_input_runs() {
    let p = load_params("tau = 1e5\nd = 100\nalpha = 0.3").unwrap();
    let sim = Simulator::from_params(&p).unwrap();
    let cfg = SimConfig { n_packets: 10_000, seed: 1, gain_mode: GainMode::PerPacket, keep_trace: false };
    assert!(sim.run(&cfg).unwrap().stats.paoi_samples.len() > 9_000);
}
