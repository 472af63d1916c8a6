//! Produce the demo measurement set: simulate the demo building under one
//! ground-motion realization and write noisy story-acceleration records
//! next to the other demo fixtures.
//!
//! Usage: cargo run -p seismon --example synthetic_records [seed]

use std::fs;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use seismon::ground_motion::{generate_realization, GroundMotionSpec};
use seismon::model::BuildingModel;
use seismon::newmark::{simulate_response, NewmarkConfig};
use seismon::observer::SensorLayout;
use seismon::record::{Record, Units};

fn main() {
    let seed: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("seed must be an integer"))
        .unwrap_or(42);

    let demo = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/demo");
    let model: BuildingModel =
        serde_json::from_str(&fs::read_to_string(demo.join("model.json")).unwrap()).unwrap();
    let spec: GroundMotionSpec =
        serde_json::from_str(&fs::read_to_string(demo.join("gm_spec.json")).unwrap()).unwrap();
    let layout: SensorLayout =
        serde_json::from_str(&fs::read_to_string(demo.join("layout.json")).unwrap()).unwrap();

    let ground = generate_realization(&spec, seed).unwrap();
    let truth = simulate_response(
        &model,
        &ground.samples,
        ground.dt,
        &NewmarkConfig::default(),
    )
    .unwrap();

    let out = demo.join("records");
    fs::create_dir_all(&out).unwrap();
    ground.write_csv(out.join("ground.csv")).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for &dof in &layout.measured_dofs {
        let clean: Vec<f64> = truth.qddot.iter().map(|a| a[dof - 1]).collect();
        let rms = (clean.iter().map(|x| x * x).sum::<f64>() / clean.len() as f64).sqrt();
        let sigma = spec.noise_rms_ratio * rms;
        let noisy: Vec<f64> = clean
            .iter()
            .map(|x| x + sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let rec = Record::new(ground.dt, Units::Acceleration, format!("story{dof}"), noisy);
        rec.write_csv(out.join(format!("story{dof}.csv"))).unwrap();
    }

    let peaks: Vec<String> = truth
        .peak_drifts()
        .iter()
        .map(|v| format!("{v:.4}"))
        .collect();
    println!(
        "wrote ground.csv and {} story records to {}",
        layout.measured_dofs.len(),
        out.display()
    );
    println!("true peak drifts (m): [{}]", peaks.join(", "));
}
