//! Model-based observer for sparse velocity measurements: the monitored
//! building augmented with grounded dampers at the measured stories, driven
//! by damper forces proportional to the measured velocities.
//!
//! The module covers the three design-stage analyses built on the
//! initial-stiffness linearization: the estimation-error spectral density,
//! its integral (the error covariance), and the choice of damper gains that
//! minimizes a trace of that covariance. It also runs the observer itself
//! on measurement records with the shared Newmark machinery.

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};
use crate::ground_motion::{kanai_tajimi_psd, GroundMotionSpec};
use crate::model::{self, BuildingModel, ResponseHistory};
use crate::nelder_mead::{NelderMead, SimplexResult};
use crate::newmark::{self, NewmarkConfig};
use crate::record::{Record, Units};

/// Measured stories, 1-based and strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorLayout {
    pub measured_dofs: Vec<usize>,
}

impl SensorLayout {
    pub fn new(mut dofs: Vec<usize>) -> Self {
        dofs.sort_unstable();
        SensorLayout {
            measured_dofs: dofs,
        }
    }

    pub fn m(&self) -> usize {
        self.measured_dofs.len()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.measured_dofs.is_empty() {
            return Err(Error::validation("layout must measure at least one story"));
        }
        let mut seen = vec![false; n + 1];
        for &d in &self.measured_dofs {
            if d == 0 || d > n {
                return Err(Error::validation(format!(
                    "measured story {d} out of range 1..={n}"
                )));
            }
            if seen[d] {
                return Err(Error::validation(format!("story {d} measured twice")));
            }
            seen[d] = true;
        }
        Ok(())
    }

    /// Boolean selection matrix mapping DOFs to measurements (m x n).
    pub fn c2(&self, n: usize) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(self.m(), n);
        for (row, &dof) in self.measured_dofs.iter().enumerate() {
            c[(row, dof - 1)] = 1.0;
        }
        c
    }
}

/// Diagonal damper gains (N*s/m), one per measured story.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackGain {
    pub e_diag: Vec<f64>,
}

impl FeedbackGain {
    pub fn uniform(m: usize, value: f64) -> Self {
        FeedbackGain {
            e_diag: vec![value; m],
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if self.e_diag.len() != m {
            return Err(Error::validation(format!(
                "gain has {} entries for {} measured stories",
                self.e_diag.len(),
                m
            )));
        }
        if !self.e_diag.iter().all(|e| positive(*e)) {
            return Err(Error::validation(
                "damper gains must be positive and finite",
            ));
        }
        Ok(())
    }
}

/// Process-noise spectral density (two-sided, integrates directly to
/// variance over rad/s).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessNoise {
    /// Flat density.
    White { level: f64 },
    /// Ground-filter spectrum. The synthesis spectrum is one-sided, so its
    /// two-sided equivalent used here is half the synthesis value.
    KanaiTajimi { spec: GroundMotionSpec },
}

impl ProcessNoise {
    pub fn density(&self, omega: f64) -> f64 {
        match self {
            ProcessNoise::White { level } => *level,
            ProcessNoise::KanaiTajimi { spec } => 0.5 * kanai_tajimi_psd(omega, spec),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ProcessNoise::White { level } => {
                if *level < 0.0 || !level.is_finite() {
                    return Err(Error::validation("white noise level must be non-negative"));
                }
            }
            ProcessNoise::KanaiTajimi { spec } => spec.validate()?,
        }
        Ok(())
    }
}

/// Frequency grid for covariance integration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FreqGrid {
    /// Points on [0, omega_max].
    #[serde(default = "default_grid_points")]
    pub n_points: usize,
    /// Upper integration limit (rad/s); default five times the highest
    /// natural frequency.
    #[serde(default)]
    pub omega_max: Option<f64>,
}

fn default_grid_points() -> usize {
    2048
}

impl Default for FreqGrid {
    fn default() -> Self {
        FreqGrid {
            n_points: default_grid_points(),
            omega_max: None,
        }
    }
}

/// Estimation-error covariance and its integration metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorCovariance {
    /// Displacement-error covariance (m^2), row-major.
    pub p: Vec<Vec<f64>>,
    /// Drift-error variances per story (m^2).
    pub p_isd: Vec<f64>,
    pub omega_max: f64,
    pub grid_points: usize,
    /// Relative trace change when the grid was doubled.
    pub refinement_change: f64,
    /// Set when the refinement changed the trace by more than 1%.
    pub accuracy_warning: bool,
    /// Most negative eigenvalue that was clipped to zero, if any.
    pub clipped_eigenvalue: Option<f64>,
}

impl ErrorCovariance {
    pub fn p_matrix(&self) -> DMatrix<f64> {
        let n = self.p.len();
        DMatrix::from_fn(n, n, |i, j| self.p[i][j])
    }

    pub fn trace_p(&self) -> f64 {
        (0..self.p.len()).map(|i| self.p[i][i]).sum()
    }

    pub fn trace_p_isd(&self) -> f64 {
        self.p_isd.iter().sum()
    }

    /// Drift-ratio variances: each story's drift variance over its squared
    /// height.
    pub fn normalized_isd(&self, story_height: &[f64]) -> Vec<f64> {
        self.p_isd
            .iter()
            .zip(story_height)
            .map(|(v, h)| v / (h * h))
            .collect()
    }
}

/// Drift-error variances from a displacement covariance: story 1 is the
/// first diagonal entry, story k combines the adjacent pair.
pub fn isd_variances(p: &DMatrix<f64>) -> Vec<f64> {
    let n = p.nrows();
    (0..n)
        .map(|k| {
            if k == 0 {
                p[(0, 0)]
            } else {
                p[(k, k)] + p[(k - 1, k - 1)] - 2.0 * p[(k, k - 1)]
            }
        })
        .collect()
}

/// Observer output: the state estimate and what produced it.
#[derive(Debug, Clone)]
pub struct ObserverSolution {
    pub q_hat: ResponseHistory,
    pub gain: FeedbackGain,
    pub layout: SensorLayout,
    /// Design-stage covariance when noise densities were supplied.
    pub covariance: Option<ErrorCovariance>,
}

/// Process noise enters as uncertain base excitation: `-M * b1`.
pub fn default_b2(model: &BuildingModel) -> Result<DVector<f64>> {
    let asm = model::assemble_matrices(model)?;
    Ok(-(&asm.mass * model.influence()))
}

/// Observer damping operator: the structural damping plus a grounded damper
/// of size `E_j` at each measured story. Mass and stiffness are untouched.
pub fn observer_damping(
    damping: &DMatrix<f64>,
    layout: &SensorLayout,
    gain: &FeedbackGain,
) -> DMatrix<f64> {
    let mut c = damping.clone();
    for (j, &dof) in layout.measured_dofs.iter().enumerate() {
        c[(dof - 1, dof - 1)] += gain.e_diag[j];
    }
    c
}

/// Estimation-error spectral density at one frequency.
///
/// `phi_ww` and `phi_vv` are the (two-sided) noise densities evaluated at
/// `omega`; `b2` is the process-noise input pattern. The result is Hermitian
/// positive semidefinite by construction.
#[allow(clippy::too_many_arguments)]
pub fn error_psd(
    omega: f64,
    mass: &DMatrix<f64>,
    damping: &DMatrix<f64>,
    stiffness: &DMatrix<f64>,
    layout: &SensorLayout,
    gain: &FeedbackGain,
    phi_ww: f64,
    phi_vv: f64,
    b2: &DVector<f64>,
) -> Result<DMatrix<Complex<f64>>> {
    let n = mass.nrows();
    let c_obs = observer_damping(damping, layout, gain);

    let mut a = DMatrix::<Complex<f64>>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = Complex::new(
                stiffness[(i, j)] - omega * omega * mass[(i, j)],
                omega * c_obs[(i, j)],
            );
        }
    }
    let lu = a.lu();

    // x = H_o b2
    let b2c = DMatrix::<Complex<f64>>::from_fn(n, 1, |i, _| Complex::new(b2[i], 0.0));
    let x = lu.solve(&b2c).ok_or_else(|| {
        Error::Singular(format!(
            "observer dynamic stiffness singular at omega = {omega}"
        ))
    })?;

    // y = H_o c2' E (one column per measurement)
    let m = layout.m();
    let mut rhs = DMatrix::<Complex<f64>>::zeros(n, m);
    for (j, &dof) in layout.measured_dofs.iter().enumerate() {
        rhs[(dof - 1, j)] = Complex::new(gain.e_diag[j], 0.0);
    }
    let y = lu.solve(&rhs).ok_or_else(|| {
        Error::Singular(format!(
            "observer dynamic stiffness singular at omega = {omega}"
        ))
    })?;

    let mut phi = DMatrix::<Complex<f64>>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut v = x[(i, 0)] * x[(j, 0)].conj() * phi_ww;
            for k in 0..m {
                v += y[(i, k)] * y[(j, k)].conj() * phi_vv;
            }
            phi[(i, j)] = v;
        }
    }
    Ok(phi)
}

/// Raw single-pass trapezoidal integral of the error density over
/// `(-omega_max, omega_max)`, using evenness: twice the real part over the
/// positive half-line.
#[allow(clippy::too_many_arguments)]
fn integrate_covariance(
    mass: &DMatrix<f64>,
    damping: &DMatrix<f64>,
    stiffness: &DMatrix<f64>,
    layout: &SensorLayout,
    gain: &FeedbackGain,
    process: &ProcessNoise,
    phi_vv: f64,
    b2: &DVector<f64>,
    n_points: usize,
    omega_max: f64,
) -> Result<DMatrix<f64>> {
    let n = mass.nrows();
    let dw = omega_max / (n_points - 1) as f64;
    let mut p = DMatrix::<f64>::zeros(n, n);
    for i in 0..n_points {
        let omega = i as f64 * dw;
        let phi = error_psd(
            omega,
            mass,
            damping,
            stiffness,
            layout,
            gain,
            process.density(omega),
            phi_vv,
            b2,
        )?;
        let weight = if i == 0 || i == n_points - 1 {
            0.5
        } else {
            1.0
        };
        for r in 0..n {
            for c in 0..n {
                p[(r, c)] += 2.0 * weight * phi[(r, c)].re * dw;
            }
        }
    }
    Ok(p)
}

/// Integrate the error density to the displacement-error covariance and the
/// per-story drift-error variances.
///
/// The integral runs over `[0, omega_max]` doubled by evenness; a second
/// pass on a doubled grid both refines the result and flags it when the
/// trace moved by more than 1%.
pub fn estimation_covariance(
    model: &BuildingModel,
    layout: &SensorLayout,
    gain: &FeedbackGain,
    process: &ProcessNoise,
    phi_vv: f64,
    grid: &FreqGrid,
) -> Result<ErrorCovariance> {
    let asm = model::assemble_matrices(model)?;
    layout.validate(model.n())?;
    gain.validate(layout.m())?;
    process.validate()?;
    if phi_vv < 0.0 || !phi_vv.is_finite() {
        return Err(Error::validation(
            "measurement noise density must be non-negative",
        ));
    }
    if grid.n_points < 16 {
        return Err(Error::validation("frequency grid needs at least 16 points"));
    }
    let omegas = model::natural_frequencies_of(&asm.mass, &asm.stiffness)?;
    let omega_max = grid
        .omega_max
        .unwrap_or_else(|| 5.0 * omegas.last().copied().unwrap_or(1.0));
    if !positive(omega_max) {
        return Err(Error::validation("omega_max must be positive"));
    }
    let b2 = default_b2(model)?;

    let coarse = integrate_covariance(
        &asm.mass,
        &asm.damping,
        &asm.stiffness,
        layout,
        gain,
        process,
        phi_vv,
        &b2,
        grid.n_points,
        omega_max,
    )?;
    let fine = integrate_covariance(
        &asm.mass,
        &asm.damping,
        &asm.stiffness,
        layout,
        gain,
        process,
        phi_vv,
        &b2,
        2 * grid.n_points,
        omega_max,
    )?;

    let tr_fine = fine.trace();
    let refinement_change = if tr_fine.abs() > 0.0 {
        (fine.trace() - coarse.trace()).abs() / tr_fine.abs()
    } else {
        0.0
    };

    // symmetrize and clip roundoff-negative eigenvalues
    let mut p = (&fine + fine.transpose()) * 0.5;
    let eig = p.clone().symmetric_eigen();
    let lam_max = eig.eigenvalues.amax();
    let lam_min = eig.eigenvalues.min();
    let mut clipped = None;
    if lam_min < 0.0 {
        if lam_min < -1e-10 * lam_max.max(1e-300) {
            return Err(Error::Singular(format!(
                "covariance integral is indefinite (min eigenvalue {lam_min:.3e})"
            )));
        }
        clipped = Some(lam_min);
        let clamped = DVector::from_iterator(
            eig.eigenvalues.len(),
            eig.eigenvalues.iter().map(|l| l.max(0.0)),
        );
        p = &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
        p = (&p + p.transpose()) * 0.5;
    }

    let n = model.n();
    let p_rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| p[(i, j)]).collect())
        .collect();
    Ok(ErrorCovariance {
        p_isd: isd_variances(&p),
        p: p_rows,
        omega_max,
        grid_points: grid.n_points,
        refinement_change,
        accuracy_warning: refinement_change > 0.01,
        clipped_eigenvalue: clipped,
    })
}

/// What the gain optimization minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Trace of the displacement-error covariance.
    TraceP,
    /// Sum of the drift-error variances.
    TracePIsd,
}

/// Gain-search configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub objective: Objective,
    pub max_iters: usize,
    /// Relative objective-change tolerance.
    pub tol: f64,
    /// Grid used for objective evaluations (single pass, no refinement).
    pub grid: FreqGrid,
    /// Damper search box (N*s/m).
    pub bounds: (f64, f64),
    /// Initial simplex corner values (N*s/m).
    pub init: (f64, f64),
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            objective: Objective::TraceP,
            max_iters: 500,
            tol: 1e-4,
            grid: FreqGrid::default(),
            bounds: (1.0, 1e9),
            init: (1e2, 1e6),
        }
    }
}

/// Optimization outcome; `converged` is false when the iteration cap was
/// reached before the objective spread fell under tolerance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GainResult {
    pub gain: FeedbackGain,
    pub objective_value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Choose the diagonal damper gains minimizing the covariance trace, by a
/// simplex search over log10 damper values (positivity comes free).
pub fn optimize_gain(
    model: &BuildingModel,
    layout: &SensorLayout,
    process: &ProcessNoise,
    phi_vv: f64,
    cfg: &OptimizerConfig,
) -> Result<GainResult> {
    let asm = model::assemble_matrices(model)?;
    layout.validate(model.n())?;
    process.validate()?;
    let m = layout.m();
    let omegas = model::natural_frequencies_of(&asm.mass, &asm.stiffness)?;
    let omega_max = cfg
        .grid
        .omega_max
        .unwrap_or_else(|| 5.0 * omegas.last().copied().unwrap_or(1.0));
    let b2 = default_b2(model)?;

    let objective = |log_e: &[f64]| -> Result<f64> {
        let gain = FeedbackGain {
            e_diag: log_e.iter().map(|x| 10f64.powf(*x)).collect(),
        };
        let p = integrate_covariance(
            &asm.mass,
            &asm.damping,
            &asm.stiffness,
            layout,
            &gain,
            process,
            phi_vv,
            &b2,
            cfg.grid.n_points,
            omega_max,
        )?;
        Ok(match cfg.objective {
            Objective::TraceP => p.trace(),
            Objective::TracePIsd => isd_variances(&p).iter().sum(),
        })
    };

    let lo = vec![cfg.bounds.0.log10(); m];
    let hi = vec![cfg.bounds.1.log10(); m];
    let lo_base = cfg.init.0.log10();
    let hi_base = cfg.init.1.log10();

    let f0 = objective(&vec![lo_base; m])?;
    if !f0.is_finite() {
        return Err(Error::OptimizerInit(format!(
            "objective is non-finite ({f0}) at the initial simplex"
        )));
    }

    // restarts guard against simplex collapse; half a decade in gain space
    let nm = NelderMead {
        max_iters: cfg.max_iters,
        tol: cfg.tol,
        restarts: 3,
        restart_step: 0.5,
    };

    // the objective is flat for decades wherever a channel gain is far below
    // the structural damping scale, and a simplex seeded entirely inside that
    // plateau can collapse on it: start low, mid, and high and keep the best
    let step = (0.5 * (hi_base - lo_base)).max(1.0);
    let mut res: Option<SimplexResult> = None;
    let mut total_iters = 0;
    for base in [lo_base, 0.5 * (lo_base + hi_base), hi_base] {
        let mut simplex = vec![vec![base.clamp(lo[0], hi[0]); m]];
        for i in 0..m {
            let mut v = simplex[0].clone();
            v[i] = if hi[i] - v[i] >= step {
                v[i] + step
            } else {
                v[i] - step
            };
            simplex.push(v);
        }
        let run = nm.minimize(|x| objective(x).unwrap_or(f64::INFINITY), simplex, &lo, &hi);
        total_iters += run.iterations;
        if res.as_ref().is_none_or(|best| run.value < best.value) {
            res = Some(run);
        }
    }
    let mut res = res.expect("at least one simplex start");
    res.iterations = total_iters;

    Ok(GainResult {
        gain: FeedbackGain {
            e_diag: res.x.iter().map(|x| 10f64.powf(*x)).collect(),
        },
        objective_value: res.value,
        iterations: res.iterations,
        converged: res.converged,
    })
}

/// Run the observer on measured story velocities.
///
/// `measurements[j]` must carry the velocity of `layout.measured_dofs[j]`;
/// all records must share dt and length. The observer is the model with the
/// augmented damping operator, forced by `E_j * ydot_j` at each measured
/// story, started from rest.
pub fn run_nmbo(
    model: &BuildingModel,
    gain: &FeedbackGain,
    layout: &SensorLayout,
    measurements: &[Record],
    integrator: &NewmarkConfig,
) -> Result<ObserverSolution> {
    layout.validate(model.n())?;
    gain.validate(layout.m())?;
    if measurements.len() != layout.m() {
        return Err(Error::validation(format!(
            "{} measurement records for {} measured stories",
            measurements.len(),
            layout.m()
        )));
    }
    let dt = measurements[0].dt;
    let len = measurements[0].len();
    if len == 0 {
        return Err(Error::validation("measurement records are empty"));
    }
    for rec in measurements {
        rec.expect_units(Units::Velocity, "observer input")?;
        if (rec.dt - dt).abs() > 1e-12 * dt {
            return Err(Error::validation(format!(
                "measurement dt mismatch: {} vs {}",
                rec.dt, dt
            )));
        }
        if rec.len() != len {
            return Err(Error::validation("measurement records differ in length"));
        }
    }

    let asm = model::assemble_matrices(model)?;
    let c_obs = observer_damping(&asm.damping, layout, gain);

    let n = model.n();
    let forces: Vec<DVector<f64>> = (0..len)
        .map(|t| {
            let mut f = DVector::zeros(n);
            for (j, &dof) in layout.measured_dofs.iter().enumerate() {
                f[dof - 1] = gain.e_diag[j] * measurements[j].samples[t];
            }
            f
        })
        .collect();

    let q_hat = newmark::integrate(model, &c_obs, &forces, dt, integrator)?;
    Ok(ObserverSolution {
        q_hat,
        gain: gain.clone(),
        layout: layout.clone(),
        covariance: None,
    })
}
