//! n-story shear-building model: matrix assembly, story-level hysteretic
//! restoring forces, and the response container produced by the simulator.
//!
//! The building is idealized as a chain of lumped floor masses connected by
//! lateral story springs, so the initial stiffness matrix is tridiagonal.
//! Each story carries its own hysteresis law; the bilinear law uses the
//! kinematic rule (elastic branch `k`, yield branch `r*k`, unloading `k`).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Damping specification for the assembled model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DampingSpec {
    /// Rayleigh damping `C = a0*M + a1*K0`, anchored at two distinct modes
    /// (1-based indices) with the given damping ratios.
    Rayleigh {
        modes: (usize, usize),
        ratios: (f64, f64),
    },
    /// Mass-proportional damping achieving ratio `xi` at the first mode.
    MassProportional { xi: f64 },
    /// Explicit symmetric positive semidefinite damping matrix (N*s/m).
    Explicit { matrix: Vec<Vec<f64>> },
}

impl DampingSpec {
    /// Default damping when a model does not specify any: 2% Rayleigh
    /// anchored at modes 1 and 3 (or what the story count allows).
    pub fn default_for(n: usize) -> Self {
        match n {
            1 => DampingSpec::MassProportional { xi: 0.02 },
            2 => DampingSpec::Rayleigh {
                modes: (1, 2),
                ratios: (0.02, 0.02),
            },
            _ => DampingSpec::Rayleigh {
                modes: (1, 3),
                ratios: (0.02, 0.02),
            },
        }
    }
}

/// Story-level hysteresis law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HysteresisLaw {
    Linear,
    /// Kinematic bilinear: yields at `yield_drift` (m), post-yield tangent
    /// `post_yield_ratio * k`, unloading at the initial stiffness.
    Bilinear {
        yield_drift: f64,
        post_yield_ratio: f64,
    },
}

/// Lumped-mass shear building. All quantities SI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BuildingModel {
    /// Floor masses (kg), story 1 first.
    pub story_mass: Vec<f64>,
    /// Initial elastic story shear stiffnesses (N/m).
    pub story_stiffness: Vec<f64>,
    /// Story heights (m).
    pub story_height: Vec<f64>,
    /// Damping specification; defaults to 2% Rayleigh at modes 1 and 3.
    #[serde(default)]
    pub damping: Option<DampingSpec>,
    /// Per-story hysteresis laws; empty means all stories linear.
    #[serde(default)]
    pub hysteresis: Vec<HysteresisLaw>,
    /// Ground-acceleration influence pattern; defaults to all ones.
    #[serde(default)]
    pub influence_b1: Option<Vec<f64>>,
}

impl BuildingModel {
    /// All-linear model with default damping.
    pub fn linear(mass: Vec<f64>, stiffness: Vec<f64>, height: Vec<f64>) -> Self {
        BuildingModel {
            story_mass: mass,
            story_stiffness: stiffness,
            story_height: height,
            damping: None,
            hysteresis: Vec::new(),
            influence_b1: None,
        }
    }

    /// Number of stories (geometric DOFs).
    pub fn n(&self) -> usize {
        self.story_mass.len()
    }

    /// Resolved per-story law (empty `hysteresis` means linear everywhere).
    pub fn law(&self, story: usize) -> HysteresisLaw {
        if self.hysteresis.is_empty() {
            HysteresisLaw::Linear
        } else {
            self.hysteresis[story]
        }
    }

    pub fn is_linear(&self) -> bool {
        self.hysteresis.is_empty() || self.hysteresis.iter().all(|l| *l == HysteresisLaw::Linear)
    }

    /// Ground-acceleration influence vector b1.
    pub fn influence(&self) -> DVector<f64> {
        match &self.influence_b1 {
            Some(v) => DVector::from_column_slice(v),
            None => DVector::from_element(self.n(), 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::validation("model must have at least one story"));
        }
        if self.story_stiffness.len() != n || self.story_height.len() != n {
            return Err(Error::validation(format!(
                "mass/stiffness/height lengths disagree: {}/{}/{}",
                n,
                self.story_stiffness.len(),
                self.story_height.len()
            )));
        }
        if let Some(m) = self
            .story_mass
            .iter()
            .find(|m| **m <= 0.0 || !m.is_finite())
        {
            return Err(Error::validation(format!("non-positive story mass {m}")));
        }
        if let Some(k) = self
            .story_stiffness
            .iter()
            .find(|k| **k <= 0.0 || !k.is_finite())
        {
            return Err(Error::validation(format!(
                "non-positive story stiffness {k}"
            )));
        }
        if let Some(h) = self
            .story_height
            .iter()
            .find(|h| **h <= 0.0 || !h.is_finite())
        {
            return Err(Error::validation(format!("non-positive story height {h}")));
        }
        if !self.hysteresis.is_empty() && self.hysteresis.len() != n {
            return Err(Error::validation(format!(
                "hysteresis laws ({}) must match story count ({n})",
                self.hysteresis.len()
            )));
        }
        for (k, law) in self.hysteresis.iter().enumerate() {
            if let HysteresisLaw::Bilinear {
                yield_drift,
                post_yield_ratio,
            } = law
            {
                if *yield_drift <= 0.0 || !yield_drift.is_finite() {
                    return Err(Error::validation(format!(
                        "story {}: yield_drift must be positive",
                        k + 1
                    )));
                }
                if !(0.0..1.0).contains(post_yield_ratio) {
                    return Err(Error::validation(format!(
                        "story {}: post_yield_ratio must lie in [0, 1)",
                        k + 1
                    )));
                }
            }
        }
        if let Some(b1) = &self.influence_b1 {
            if b1.len() != n {
                return Err(Error::validation(
                    "influence_b1 length must equal story count",
                ));
            }
        }
        if let Some(DampingSpec::Rayleigh { modes, ratios }) = &self.damping {
            if modes.0 == 0 || modes.1 == 0 || modes.0 > n || modes.1 > n {
                return Err(Error::validation(format!(
                    "rayleigh anchor modes {:?} out of range 1..={n}",
                    modes
                )));
            }
            if modes.0 == modes.1 {
                return Err(Error::validation(
                    "rayleigh anchor modes must be distinct (equal anchor frequencies)",
                ));
            }
            if ratios.0 < 0.0 || ratios.1 < 0.0 {
                return Err(Error::validation(
                    "rayleigh damping ratios must be non-negative",
                ));
            }
        }
        if let Some(DampingSpec::Explicit { matrix }) = &self.damping {
            if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
                return Err(Error::validation("explicit damping matrix must be n x n"));
            }
            for (i, row) in matrix.iter().enumerate() {
                for j in (i + 1)..n {
                    if (row[j] - matrix[j][i]).abs()
                        > 1e-9 * (1.0 + row[j].abs().max(matrix[j][i].abs()))
                    {
                        return Err(Error::validation(
                            "explicit damping matrix must be symmetric",
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Assembled system matrices `(M, C_xi, K0)`.
pub struct AssembledMatrices {
    pub mass: DMatrix<f64>,
    pub damping: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
}

/// Assemble the diagonal mass matrix, the tridiagonal initial stiffness
/// matrix, and the damping matrix resolved from the damping spec.
pub fn assemble_matrices(model: &BuildingModel) -> Result<AssembledMatrices> {
    model.validate()?;
    let n = model.n();
    let mass = DMatrix::from_diagonal(&DVector::from_column_slice(&model.story_mass));
    let stiffness = stiffness_from_stories(&model.story_stiffness);

    let spec = model
        .damping
        .clone()
        .unwrap_or_else(|| DampingSpec::default_for(n));
    let damping = match spec {
        DampingSpec::Rayleigh { modes, ratios } => {
            let omegas = natural_frequencies_of(&mass, &stiffness)?;
            let (wi, wj) = (omegas[modes.0 - 1], omegas[modes.1 - 1]);
            let (a0, a1) = rayleigh_coefficients(wi, wj, ratios.0, ratios.1)?;
            &mass * a0 + &stiffness * a1
        }
        DampingSpec::MassProportional { xi } => {
            let omegas = natural_frequencies_of(&mass, &stiffness)?;
            &mass * (2.0 * xi * omegas[0])
        }
        DampingSpec::Explicit { matrix } => {
            let mut c = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    c[(i, j)] = matrix[i][j];
                }
            }
            // symmetry was validated; reject negative modes of the matrix
            let eig = c.clone().symmetric_eigen();
            let scale = eig.eigenvalues.amax().max(1.0);
            if eig.eigenvalues.iter().any(|l| *l < -1e-9 * scale) {
                return Err(Error::validation(
                    "explicit damping matrix must be positive semidefinite",
                ));
            }
            c
        }
    };

    Ok(AssembledMatrices {
        mass,
        damping,
        stiffness,
    })
}

/// Tridiagonal shear-building stiffness from story stiffnesses.
pub fn stiffness_from_stories(story_stiffness: &[f64]) -> DMatrix<f64> {
    let n = story_stiffness.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] += story_stiffness[i];
        if i + 1 < n {
            k[(i, i)] += story_stiffness[i + 1];
            k[(i, i + 1)] -= story_stiffness[i + 1];
            k[(i + 1, i)] -= story_stiffness[i + 1];
        }
    }
    k
}

/// Rayleigh coefficients `(a0, a1)` from two anchor frequencies and ratios.
pub fn rayleigh_coefficients(wi: f64, wj: f64, xi_i: f64, xi_j: f64) -> Result<(f64, f64)> {
    let rel = (wi - wj).abs() / wi.max(wj);
    if rel < 1e-9 {
        return Err(Error::validation(
            "rayleigh anchor frequencies are equal; coefficient system is singular",
        ));
    }
    // solve [1/wi wi; 1/wj wj] [a0 a1]' = 2 [xi_i xi_j]'
    let det = wj / wi - wi / wj;
    let a0 = 2.0 * (xi_i * wj - xi_j * wi) / det;
    let a1 = 2.0 * (xi_j / wi - xi_i / wj) / det;
    Ok((a0, a1))
}

/// Undamped natural frequencies (rad/s, ascending) of the assembled model.
pub fn natural_frequencies(model: &BuildingModel) -> Result<Vec<f64>> {
    let asm = assemble_matrices(model)?;
    natural_frequencies_of(&asm.mass, &asm.stiffness)
}

/// Natural frequencies from explicit `(M, K)`; M must be diagonal positive.
pub fn natural_frequencies_of(mass: &DMatrix<f64>, stiffness: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = mass.nrows();
    let mut inv_sqrt_m = DMatrix::zeros(n, n);
    for i in 0..n {
        let m = mass[(i, i)];
        if m <= 0.0 {
            return Err(Error::validation("mass matrix must be positive definite"));
        }
        inv_sqrt_m[(i, i)] = 1.0 / m.sqrt();
    }
    let b = &inv_sqrt_m * stiffness * &inv_sqrt_m;
    let sym = b.symmetric_eigen();
    let mut omegas: Vec<f64> = sym.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
    omegas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(omegas)
}

/// Per-story evaluation of the hysteretic shear for a trial drift, given the
/// committed plastic drift `z`. Returns `(shear, z_new, tangent)`.
pub(crate) fn story_shear(
    law: HysteresisLaw,
    stiffness: f64,
    drift: f64,
    z_plastic: f64,
) -> (f64, f64, f64) {
    match law {
        HysteresisLaw::Linear => (stiffness * drift, z_plastic, stiffness),
        HysteresisLaw::Bilinear {
            yield_drift,
            post_yield_ratio,
        } => {
            let k = stiffness;
            let r = post_yield_ratio;
            // hardening modulus giving post-yield tangent r*k
            let h = if r == 0.0 { 0.0 } else { r * k / (1.0 - r) };
            let fy = k * yield_drift;
            let trial = k * (drift - z_plastic);
            let xi = trial - h * z_plastic;
            if xi.abs() <= fy {
                (trial, z_plastic, k)
            } else {
                let dgamma = (xi.abs() - fy) / (k + h);
                let sgn = xi.signum();
                let z_new = z_plastic + dgamma * sgn;
                (trial - k * dgamma * sgn, z_new, r * k)
            }
        }
    }
}

/// Resultant global restoring forces for a trial drift state.
///
/// `drift[k]` is the inter-story drift of story `k+1` in meters, `z` the
/// committed plastic drifts. Rate-independent laws ignore `drift_rate`.
/// Returns the force at each DOF plus the updated hysteresis state.
pub fn restoring_force(
    model: &BuildingModel,
    drift: &[f64],
    drift_rate: &[f64],
    z: &[f64],
) -> (DVector<f64>, Vec<f64>) {
    let _ = drift_rate;
    let n = model.n();
    debug_assert_eq!(drift.len(), n);
    debug_assert_eq!(z.len(), n);
    let mut shear = vec![0.0; n];
    let mut z_new = vec![0.0; n];
    for k in 0..n {
        let (s, zp, _) = story_shear(model.law(k), model.story_stiffness[k], drift[k], z[k]);
        shear[k] = s;
        z_new[k] = zp;
    }
    let mut f = DVector::zeros(n);
    for i in 0..n {
        f[i] = shear[i] - if i + 1 < n { shear[i + 1] } else { 0.0 };
    }
    (f, z_new)
}

/// Drifts `q_k - q_{k-1}` (with `q_0 = 0`) from a displacement vector.
pub fn drifts_from_displacements(q: &DVector<f64>) -> Vec<f64> {
    let n = q.len();
    (0..n)
        .map(|k| if k == 0 { q[0] } else { q[k] - q[k - 1] })
        .collect()
}

/// Time history of the simulated or reconstructed response.
#[derive(Debug, Clone)]
pub struct ResponseHistory {
    /// Sample interval (s).
    pub dt: f64,
    /// Relative displacements per step (m).
    pub q: Vec<DVector<f64>>,
    /// Relative velocities per step (m/s).
    pub qdot: Vec<DVector<f64>>,
    /// Relative accelerations per step (m/s^2).
    pub qddot: Vec<DVector<f64>>,
    /// Committed plastic drifts per step (m); zero for linear stories.
    pub z: Vec<Vec<f64>>,
}

impl ResponseHistory {
    pub fn n_steps(&self) -> usize {
        self.q.len()
    }

    pub fn n_stories(&self) -> usize {
        self.q.first().map(|v| v.len()).unwrap_or(0)
    }

    /// Displacement series of one story (0-based).
    pub fn story_displacement(&self, k: usize) -> Vec<f64> {
        self.q.iter().map(|v| v[k]).collect()
    }

    /// Velocity series of one story (0-based).
    pub fn story_velocity(&self, k: usize) -> Vec<f64> {
        self.qdot.iter().map(|v| v[k]).collect()
    }

    /// Peak absolute inter-story drift per story (m).
    pub fn peak_drifts(&self) -> Vec<f64> {
        let n = self.n_stories();
        let mut peak: Vec<f64> = vec![0.0; n];
        for q in &self.q {
            for (k, p) in peak.iter_mut().enumerate() {
                let d = if k == 0 { q[0] } else { q[k] - q[k - 1] };
                *p = (*p).max(d.abs());
            }
        }
        peak
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::PI;

    fn uniform3() -> BuildingModel {
        BuildingModel::linear(
            vec![1000.0, 1000.0, 1000.0],
            vec![2.0e6, 2.0e6, 2.0e6],
            vec![3.0, 3.0, 3.0],
        )
    }

    #[test]
    fn sdof_natural_frequency_is_one_hz() {
        let model = BuildingModel::linear(vec![1.0], vec![4.0 * PI * PI], vec![3.0]);
        let omegas = natural_frequencies(&model).unwrap();
        assert_relative_eq!(omegas[0] / (2.0 * PI), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn two_story_stiffness_assembly() {
        let k = stiffness_from_stories(&[2.0, 1.0]);
        assert_eq!(k[(0, 0)], 3.0);
        assert_eq!(k[(0, 1)], -1.0);
        assert_eq!(k[(1, 0)], -1.0);
        assert_eq!(k[(1, 1)], 1.0);
    }

    #[test]
    fn rayleigh_mid_mode_ratio_matches_modal_projection() {
        // anchors at modes 1 and 3 with 2%; oracle recomputes modal ratios
        // by projecting the assembled C onto the mass-normalized modes.
        let model = uniform3();
        let asm = assemble_matrices(&model).unwrap();
        let omegas = natural_frequencies_of(&asm.mass, &asm.stiffness).unwrap();
        let (a0, a1) = rayleigh_coefficients(omegas[0], omegas[2], 0.02, 0.02).unwrap();

        let n = 3;
        let mut inv_sqrt_m = DMatrix::zeros(n, n);
        for i in 0..n {
            inv_sqrt_m[(i, i)] = 1.0 / asm.mass[(i, i)].sqrt();
        }
        let b = &inv_sqrt_m * &asm.stiffness * &inv_sqrt_m;
        let eig = b.symmetric_eigen();
        let mut pairs: Vec<(f64, DVector<f64>)> = (0..n)
            .map(|i| {
                (
                    eig.eigenvalues[i].max(0.0).sqrt(),
                    inv_sqrt_m.clone() * eig.eigenvectors.column(i).into_owned(),
                )
            })
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

        for (mode, (w, phi)) in pairs.iter().enumerate() {
            let num = (phi.transpose() * &asm.damping * phi)[(0, 0)];
            let den = (phi.transpose() * &asm.mass * phi)[(0, 0)];
            let xi_modal = num / (2.0 * w * den);
            let xi_formula = 0.5 * (a0 / w + a1 * w);
            assert_relative_eq!(xi_modal, xi_formula, max_relative = 1e-10);
            if mode == 0 || mode == 2 {
                assert_relative_eq!(xi_modal, 0.02, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn linear_restoring_force_is_hooke() {
        let model = BuildingModel::linear(vec![1.0], vec![1000.0], vec![3.0]);
        let (f, z) = restoring_force(&model, &[0.01], &[0.0], &[0.0]);
        assert_abs_diff_eq!(f[0], 10.0, epsilon = 1e-12);
        assert_eq!(z[0], 0.0);
    }

    #[test]
    fn bilinear_monotonic_past_yield() {
        let k = 5.0e5;
        let mut model = BuildingModel::linear(vec![1.0], vec![k], vec![3.0]);
        model.hysteresis = vec![HysteresisLaw::Bilinear {
            yield_drift: 0.01,
            post_yield_ratio: 0.1,
        }];
        let (f, _) = restoring_force(&model, &[0.02], &[0.0], &[0.0]);
        assert_relative_eq!(f[0], 0.011 * k, max_relative = 1e-12);
    }

    #[test]
    fn bilinear_loop_area_matches_parallelogram() {
        // cycle to +-2*dy; the stabilized kinematic loop is a parallelogram
        // of area 4*k*dy*(x - dy)*(1 - r).
        let k = 1.0e4;
        let dy = 0.01;
        let r = 0.15;
        let x = 2.0 * dy;
        let law = HysteresisLaw::Bilinear {
            yield_drift: dy,
            post_yield_ratio: r,
        };

        let steps = 20_000usize;
        let path = |cycle_pos: f64| -> f64 {
            // triangle wave x -> -x -> x
            if cycle_pos < 0.5 {
                x - 4.0 * x * cycle_pos
            } else {
                -x + 4.0 * x * (cycle_pos - 0.5)
            }
        };

        // first run 0 -> x, then two full cycles; integrate the last one
        let mut z = 0.0;
        let mut prev_d = 0.0;
        let mut prev_f = 0.0;
        for i in 1..=steps {
            let d = x * i as f64 / steps as f64;
            let (f, zn, _) = story_shear(law, k, d, z);
            z = zn;
            prev_d = d;
            prev_f = f;
        }
        let mut area = 0.0;
        for cycle in 0..2 {
            area = 0.0;
            for i in 1..=steps {
                let d = path(i as f64 / steps as f64);
                let (f, zn, _) = story_shear(law, k, d, z);
                z = zn;
                area += 0.5 * (f + prev_f) * (d - prev_d);
                prev_d = d;
                prev_f = f;
            }
            let _ = cycle;
        }
        let expected = 4.0 * k * dy * (x - dy) * (1.0 - r);
        assert_relative_eq!(area, expected, max_relative = 1e-3);
    }

    #[test]
    fn bilinear_first_excursion_residual_drift() {
        let k = 2.0e3;
        let dy = 0.01;
        let r = 0.2;
        let law = HysteresisLaw::Bilinear {
            yield_drift: dy,
            post_yield_ratio: r,
        };
        let x = 3.0 * dy;
        let (fx, z, _) = story_shear(law, k, x, 0.0);
        // elastic unload to zero force
        let residual = x - fx / k;
        assert_relative_eq!(residual, (x - dy) * (1.0 - r), max_relative = 1e-12);
        let (f0, _, _) = story_shear(law, k, residual, z);
        assert_abs_diff_eq!(f0, 0.0, epsilon = 1e-9 * k * dy);
    }

    #[test]
    fn validation_rejects_bad_models() {
        let mut m = uniform3();
        m.story_mass[1] = -5.0;
        assert!(matches!(m.validate(), Err(Error::Validation(_))));

        let mut m = uniform3();
        m.damping = Some(DampingSpec::Rayleigh {
            modes: (2, 2),
            ratios: (0.02, 0.02),
        });
        assert!(matches!(m.validate(), Err(Error::Validation(_))));

        let mut m = uniform3();
        m.hysteresis = vec![
            HysteresisLaw::Bilinear {
                yield_drift: 0.01,
                post_yield_ratio: 1.0,
            };
            3
        ];
        assert!(m.validate().is_err());
    }

    #[test]
    fn mass_matrix_is_diagonal_and_spd() {
        let asm = assemble_matrices(&uniform3()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    assert!(asm.mass[(i, j)] > 0.0);
                } else {
                    assert_eq!(asm.mass[(i, j)], 0.0);
                }
            }
        }
        // damping PSD for the default Rayleigh spec
        let eig = asm.damping.clone().symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|l| *l > -1e-9));
    }
}
