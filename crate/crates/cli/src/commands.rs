//! Implementations behind each subcommand: load inputs, call the library,
//! write outputs plus the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use serde_json::json;

use seismon::filter::{accel_to_velocity, FilterSpec};
use seismon::ground_motion::{
    calibrate_g0, generate_realization, CalibrationConfig, GroundMotionSpec,
};
use seismon::model::BuildingModel;
use seismon::newmark::NewmarkConfig;
use seismon::observer::{
    estimation_covariance, optimize_gain, run_nmbo, FeedbackGain, FreqGrid, Objective,
    OptimizerConfig, ProcessNoise, SensorLayout,
};
use seismon::performance::{
    assemble_report, density_table, estimate_drifts, report_from_exceedance, DriftEstimate,
    ExceedanceProbs, PerformanceThresholds,
};
use seismon::placement::{place_exhaustive, place_greedy, PlacementProblem, Sigma2Max};
use seismon::record::Record;
use seismon::{Error, Result};

use crate::manifest::Manifest;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::validation(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        msg: e.to_string(),
    })
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn ensure_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Parse `<value><unit>` where unit is `m2`, `m^2`, or `ratio`.
pub fn parse_sigma2_max(s: &str) -> Result<Sigma2Max> {
    let (num, unit) = if let Some(v) = s.strip_suffix("m^2") {
        (v, "m2")
    } else if let Some(v) = s.strip_suffix("m2") {
        (v, "m2")
    } else if let Some(v) = s.strip_suffix("ratio") {
        (v, "ratio")
    } else {
        return Err(Error::validation(format!(
            "sigma2-max '{s}' must end in m2, m^2, or ratio"
        )));
    };
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::validation(format!("sigma2-max value '{num}' is not a number")))?;
    if !value.is_finite() || value <= 0.0 {
        return Err(Error::validation("sigma2-max must be positive"));
    }
    Ok(match unit {
        "m2" => Sigma2Max::M2(value),
        _ => Sigma2Max::Ratio(value),
    })
}

pub struct GenerateGm {
    pub gm_spec: PathBuf,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn generate_gm(args: &GenerateGm) -> Result<()> {
    ensure_out(&args.out)?;
    let spec: GroundMotionSpec = read_json(&args.gm_spec)?;
    let rec = generate_realization(&spec, args.seed)?;
    info!("generated {} samples at dt = {} s", rec.len(), rec.dt);

    let rec_path = args.out.join("ground.csv");
    rec.write_csv(&rec_path)?;

    let mut man = Manifest::new("generate-gm", json!({ "seed": args.seed, "gm_spec": spec }));
    man.add_input(&args.gm_spec)?;
    man.add_output(&rec_path)?;
    man.write(&args.out)?;
    Ok(())
}

pub struct CalibrateGm {
    pub gm_spec: PathBuf,
    pub record: PathBuf,
    pub target_coverage: Option<f64>,
    pub ensemble: Option<usize>,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn calibrate_gm(args: &CalibrateGm) -> Result<()> {
    ensure_out(&args.out)?;
    let mut spec: GroundMotionSpec = read_json(&args.gm_spec)?;
    let measured = Record::read_csv(&args.record)?;

    let mut cfg = CalibrationConfig {
        seed: args.seed,
        ..CalibrationConfig::default()
    };
    if let Some(t) = args.target_coverage {
        cfg.coverage_target = t;
    }
    if let Some(n) = args.ensemble {
        cfg.ensemble_size = n;
    }
    let cal = calibrate_g0(&measured, &spec, &cfg)?;
    info!(
        "calibrated g0 = {:.6e} at coverage {:.3}",
        cal.g0, cal.coverage
    );

    spec.g0 = cal.g0;
    let cal_path = args.out.join("calibration.json");
    write_json(&cal, &cal_path)?;
    let spec_path = args.out.join("gm_spec_calibrated.json");
    write_json(&spec, &spec_path)?;

    let mut man = Manifest::new(
        "calibrate-gm",
        json!({
            "seed": args.seed,
            "coverage_target": cfg.coverage_target,
            "ensemble_size": cfg.ensemble_size,
        }),
    );
    man.add_input(&args.gm_spec)?;
    man.add_input(&args.record)?;
    man.add_output(&cal_path)?;
    man.add_output(&spec_path)?;
    man.write(&args.out)?;
    Ok(())
}

pub struct Place {
    pub problem: PathBuf,
    pub greedy: bool,
    pub objective: Option<Objective>,
    pub sigma2_max: Option<Sigma2Max>,
    pub out: PathBuf,
}

pub fn place(args: &Place) -> Result<()> {
    ensure_out(&args.out)?;
    let mut problem: PlacementProblem = read_json(&args.problem)?;
    if let Some(obj) = args.objective {
        problem.optimizer.objective = obj;
    }
    if let Some(s) = &args.sigma2_max {
        problem.sigma2_max = *s;
    }

    let result = if args.greedy {
        place_greedy(&problem)?
    } else {
        place_exhaustive(&problem)?
    };
    info!(
        "selected stories {:?}, objective {:.6e}",
        result.layout.measured_dofs, result.objective_value
    );

    let res_path = args.out.join("placement.json");
    write_json(&result, &res_path)?;

    let mut man = Manifest::new(
        "place",
        json!({
            "method": if args.greedy { "greedy" } else { "exhaustive" },
            "objective": problem.optimizer.objective,
            "sigma2_max": problem.sigma2_max,
        }),
    );
    man.add_input(&args.problem)?;
    man.add_output(&res_path)?;
    man.write(&args.out)?;
    Ok(())
}

pub struct OptimizeGain {
    pub model: PathBuf,
    pub layout: PathBuf,
    pub gm_spec: PathBuf,
    pub phi_vv: f64,
    pub objective: Option<Objective>,
    pub out: PathBuf,
}

pub fn optimize_gain_cmd(args: &OptimizeGain) -> Result<()> {
    ensure_out(&args.out)?;
    let model: BuildingModel = read_json(&args.model)?;
    let layout: SensorLayout = read_json(&args.layout)?;
    let spec: GroundMotionSpec = read_json(&args.gm_spec)?;

    let mut cfg = OptimizerConfig::default();
    if let Some(obj) = args.objective {
        cfg.objective = obj;
    }
    let process = ProcessNoise::KanaiTajimi { spec };
    let result = optimize_gain(&model, &layout, &process, args.phi_vv, &cfg)?;
    info!(
        "gains {:?} N*s/m, objective {:.6e}, converged = {}",
        result.gain.e_diag, result.objective_value, result.converged
    );

    // gain.json stays directly consumable by reconstruct/report
    let gain_path = args.out.join("gain.json");
    write_json(&result.gain, &gain_path)?;
    let result_path = args.out.join("optimization.json");
    write_json(&result, &result_path)?;

    let mut man = Manifest::new(
        "optimize-gain",
        json!({
            "phi_vv": args.phi_vv,
            "objective": cfg.objective,
        }),
    );
    man.add_input(&args.model)?;
    man.add_input(&args.layout)?;
    man.add_input(&args.gm_spec)?;
    man.add_output(&gain_path)?;
    man.add_output(&result_path)?;
    man.write(&args.out)?;
    Ok(())
}

pub struct Reconstruct {
    pub model: PathBuf,
    pub layout: PathBuf,
    pub gain: PathBuf,
    pub records: String,
    pub gm_spec: Option<PathBuf>,
    pub phi_vv: Option<f64>,
    pub filter: FilterSpec,
    pub out: PathBuf,
}

/// Shared by `reconstruct` and `report`: ingest acceleration records,
/// integrate to velocities, run the observer, optionally attach the
/// design-stage covariance.
fn reconstruct_inner(
    args: &Reconstruct,
    man: &mut Manifest,
) -> Result<(BuildingModel, seismon::observer::ObserverSolution)> {
    let model: BuildingModel = read_json(&args.model)?;
    let layout: SensorLayout = read_json(&args.layout)?;
    let gain: FeedbackGain = read_json(&args.gain)?;
    man.add_input(&args.model)?;
    man.add_input(&args.layout)?;
    man.add_input(&args.gain)?;

    let mut paths: Vec<PathBuf> = glob::glob(&args.records)
        .map_err(|e| Error::validation(format!("bad records glob '{}': {e}", args.records)))?
        .filter_map(|p| p.ok())
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::validation(format!(
            "no record files match '{}'",
            args.records
        )));
    }

    let mut by_story: Vec<(usize, Record)> = Vec::with_capacity(paths.len());
    for p in &paths {
        let rec = Record::read_csv(p)?;
        let story = rec.story_index().ok_or_else(|| {
            Error::validation(format!(
                "record {} channel '{}' does not name a story",
                p.display(),
                rec.channel
            ))
        })?;
        if by_story.iter().any(|(s, _)| *s == story) {
            return Err(Error::validation(format!("story {story} appears twice")));
        }
        man.add_input(p)?;
        by_story.push((story, rec));
    }

    // one velocity record per measured story, in layout order
    let mut measurements = Vec::with_capacity(layout.m());
    for &dof in &layout.measured_dofs {
        let rec = by_story
            .iter()
            .find(|(s, _)| *s == dof)
            .map(|(_, r)| r)
            .ok_or_else(|| Error::validation(format!("no record for measured story {dof}")))?;
        measurements.push(accel_to_velocity(rec, &args.filter)?);
    }

    let mut sol = run_nmbo(
        &model,
        &gain,
        &layout,
        &measurements,
        &NewmarkConfig::default(),
    )?;

    if let (Some(spec_path), Some(phi_vv)) = (&args.gm_spec, args.phi_vv) {
        let spec: GroundMotionSpec = read_json(spec_path)?;
        man.add_input(spec_path)?;
        let process = ProcessNoise::KanaiTajimi { spec };
        let cov = estimation_covariance(
            &model,
            &layout,
            &gain,
            &process,
            phi_vv,
            &FreqGrid::default(),
        )?;
        sol.covariance = Some(cov);
    }
    Ok((model, sol))
}

fn write_response_csv(sol: &seismon::observer::ObserverSolution, path: &Path) -> Result<()> {
    let hist = &sol.q_hat;
    let n = hist.n_stories();
    let mut text = String::new();
    text.push_str("# t (s), displacement per story (m), velocity per story (m/s)\n");
    text.push('t');
    for k in 1..=n {
        text.push_str(&format!(",q{k}"));
    }
    for k in 1..=n {
        text.push_str(&format!(",v{k}"));
    }
    text.push('\n');
    for (i, (q, v)) in hist.q.iter().zip(&hist.qdot).enumerate() {
        text.push_str(&format!("{:.6}", i as f64 * hist.dt));
        for x in q.iter() {
            text.push_str(&format!(",{x:.16e}"));
        }
        for x in v.iter() {
            text.push_str(&format!(",{x:.16e}"));
        }
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn reconstruct(args: &Reconstruct) -> Result<()> {
    ensure_out(&args.out)?;
    let mut man = Manifest::new(
        "reconstruct",
        json!({
            "records": args.records,
            "filter": args.filter,
            "phi_vv": args.phi_vv,
        }),
    );
    let (model, sol) = reconstruct_inner(args, &mut man)?;

    let resp_path = args.out.join("response.csv");
    write_response_csv(&sol, &resp_path)?;
    man.add_output(&resp_path)?;

    if sol.covariance.is_some() {
        let drifts = estimate_drifts(&sol, &model)?;
        let drift_path = args.out.join("drifts.json");
        write_json(&drifts, &drift_path)?;
        man.add_output(&drift_path)?;
    } else {
        let peaks = sol.q_hat.peak_drifts();
        let peaks_path = args.out.join("peak_drifts.json");
        write_json(&json!({ "peak_drift_m": peaks }), &peaks_path)?;
        man.add_output(&peaks_path)?;
    }

    man.write(&args.out)?;
    Ok(())
}

pub struct Classify {
    pub drifts: Option<PathBuf>,
    pub story_exceedance: Option<PathBuf>,
    pub thresholds: Option<PathBuf>,
    pub truncate_at_zero: bool,
    pub out: PathBuf,
}

fn load_thresholds(path: &Option<PathBuf>) -> Result<PerformanceThresholds> {
    match path {
        Some(p) => read_json(p),
        None => Ok(PerformanceThresholds::default()),
    }
}

fn write_density_csv(est: &DriftEstimate, path: &Path) -> Result<()> {
    let table = density_table(est, 501)?;
    let (grid, pdf, cdf) = (&table.grid, &table.pdf, &table.cdf);
    let n = est.n_stories();
    let mut text = String::new();
    text.push_str("# drift ratio grid with per-story gaussian density and distribution\n");
    text.push_str("drift");
    for k in 1..=n {
        text.push_str(&format!(",pdf{k},cdf{k}"));
    }
    text.push('\n');
    for (i, x) in grid.iter().enumerate() {
        text.push_str(&format!("{x:.10e}"));
        for k in 0..n {
            text.push_str(&format!(",{:.10e},{:.10e}", pdf[k][i], cdf[k][i]));
        }
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn classify(args: &Classify) -> Result<()> {
    ensure_out(&args.out)?;
    let thresholds = load_thresholds(&args.thresholds)?;
    let mut man = Manifest::new(
        "classify",
        json!({ "truncate_at_zero": args.truncate_at_zero }),
    );
    if let Some(p) = &args.thresholds {
        man.add_input(p)?;
    }

    let report = match (&args.drifts, &args.story_exceedance) {
        (Some(drift_path), None) => {
            let est: DriftEstimate = read_json(drift_path)?;
            man.add_input(drift_path)?;
            if args.truncate_at_zero {
                let mut rows = Vec::with_capacity(est.n_stories());
                for k in 1..=est.n_stories() {
                    rows.push(seismon::performance::story_exceedance_with(
                        &est,
                        &thresholds,
                        k,
                        true,
                    )?);
                }
                report_from_exceedance(&rows, &thresholds, "drift file (tail truncated at zero)")?
            } else {
                assemble_report(&est, &thresholds, "drift file")?
            }
        }
        (None, Some(exc_path)) => {
            let rows: Vec<ExceedanceProbs> = read_json(exc_path)?;
            man.add_input(exc_path)?;
            report_from_exceedance(&rows, &thresholds, "injected exceedance fixture")?
        }
        _ => {
            return Err(Error::validation(
                "classify needs exactly one of --drifts or --story-exceedance",
            ))
        }
    };
    info!("building classified {}", report.classification);

    let rep_path = args.out.join("report.json");
    write_json(&report, &rep_path)?;
    man.add_output(&rep_path)?;

    if let Some(drift_path) = &args.drifts {
        let est: DriftEstimate = read_json(drift_path)?;
        let dens_path = args.out.join("drift_density.csv");
        write_density_csv(&est, &dens_path)?;
        man.add_output(&dens_path)?;
    }

    man.write(&args.out)?;
    Ok(())
}

pub struct Report {
    pub reconstruct: Reconstruct,
    pub thresholds: Option<PathBuf>,
}

pub fn report(args: &Report) -> Result<()> {
    let out = &args.reconstruct.out;
    ensure_out(out)?;
    if args.reconstruct.gm_spec.is_none() || args.reconstruct.phi_vv.is_none() {
        return Err(Error::validation(
            "report needs --gm-spec and --phi-vv for the drift uncertainty",
        ));
    }
    let thresholds = load_thresholds(&args.thresholds)?;
    let mut man = Manifest::new(
        "report",
        json!({
            "records": args.reconstruct.records,
            "filter": args.reconstruct.filter,
            "phi_vv": args.reconstruct.phi_vv,
        }),
    );
    if let Some(p) = &args.thresholds {
        man.add_input(p)?;
    }

    let (model, sol) = reconstruct_inner(&args.reconstruct, &mut man)?;

    let resp_path = out.join("response.csv");
    write_response_csv(&sol, &resp_path)?;
    man.add_output(&resp_path)?;

    let drifts = estimate_drifts(&sol, &model)?;
    let drift_path = out.join("drifts.json");
    write_json(&drifts, &drift_path)?;
    man.add_output(&drift_path)?;

    let perf = assemble_report(
        &drifts,
        &thresholds,
        "design-stage linearized covariance over the ground-filter spectrum",
    )?;
    info!("building classified {}", perf.classification);
    let rep_path = out.join("report.json");
    write_json(&perf, &rep_path)?;
    man.add_output(&rep_path)?;

    let dens_path = out.join("drift_density.csv");
    write_density_csv(&drifts, &dens_path)?;
    man.add_output(&dens_path)?;

    man.write(out)?;
    Ok(())
}
