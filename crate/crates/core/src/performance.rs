//! Drift statistics and probabilistic performance classification.
//!
//! Each story's peak drift ratio is modeled as a Gaussian whose mean comes
//! from the reconstructed response and whose standard deviation comes from
//! the design-stage drift-error variance. Exceedance probabilities against
//! the IO/LS/CP thresholds are banded into four class probabilities, then
//! aggregated across stories under independence.
//!
//! Class probabilities use the band form `p[IO] = 1 - p(>=IO)`,
//! `p[LS] = p(>=IO) - p(>=LS)`, `p[CP] = p(>=LS) - p(>=CP)`,
//! `p[C] = p(>=CP)`, which is the only ordering that keeps every band
//! non-negative when exceedance decreases with severity.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::BuildingModel;
use crate::observer::ObserverSolution;

/// Per-story peak drift-ratio estimate: mean and standard deviation, both
/// dimensionless.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriftEstimate {
    pub mean_isd: Vec<f64>,
    pub sigma_isd: Vec<f64>,
}

impl DriftEstimate {
    pub fn validate(&self) -> Result<()> {
        if self.mean_isd.len() != self.sigma_isd.len() || self.mean_isd.is_empty() {
            return Err(Error::validation(
                "drift estimate must pair means with sigmas",
            ));
        }
        if self
            .mean_isd
            .iter()
            .chain(self.sigma_isd.iter())
            .any(|v| *v < 0.0 || !v.is_finite())
        {
            return Err(Error::validation(
                "drift means and sigmas must be non-negative",
            ));
        }
        Ok(())
    }

    pub fn n_stories(&self) -> usize {
        self.mean_isd.len()
    }
}

/// Drift-ratio limits separating IO/LS/CP/C, with their source label.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerformanceThresholds {
    pub io: f64,
    pub ls: f64,
    pub cp: f64,
    /// Where the numbers come from; reports carry it verbatim.
    pub provenance: String,
}

impl Default for PerformanceThresholds {
    /// Transient drift limits in the style of FEMA 356 for concrete moment
    /// frames: 1%, 2%, 4%.
    fn default() -> Self {
        PerformanceThresholds {
            io: 0.01,
            ls: 0.02,
            cp: 0.04,
            provenance: "FEMA-356-style transient drift limits (concrete moment frame)".into(),
        }
    }
}

impl PerformanceThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.io > 0.0 && self.io < self.ls && self.ls < self.cp) {
            return Err(Error::validation(format!(
                "thresholds must satisfy 0 < io < ls < cp, got ({}, {}, {})",
                self.io, self.ls, self.cp
            )));
        }
        Ok(())
    }
}

/// Probabilities of drift reaching at least each threshold.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ExceedanceProbs {
    pub io: f64,
    pub ls: f64,
    pub cp: f64,
}

impl ExceedanceProbs {
    pub fn validate(&self) -> Result<()> {
        for p in [self.io, self.ls, self.cp] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::validation(format!("probability {p} outside [0, 1]")));
            }
        }
        if self.ls > self.io + 1e-12 || self.cp > self.ls + 1e-12 {
            return Err(Error::validation(format!(
                "exceedance must be non-increasing IO>=LS>=CP, got ({}, {}, {})",
                self.io, self.ls, self.cp
            )));
        }
        Ok(())
    }
}

/// Probabilities of landing in each performance class; sums to exactly 1.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClassProbs {
    pub io: f64,
    pub ls: f64,
    pub cp: f64,
    pub c: f64,
}

impl ClassProbs {
    /// Left-to-right sum; the constructor nudges the largest entry so this
    /// is exactly one.
    pub fn sum(&self) -> f64 {
        self.io + self.ls + self.cp + self.c
    }

    fn from_bands(io: f64, ls: f64, cp: f64, c: f64) -> ClassProbs {
        let mut v = [io.max(0.0), ls.max(0.0), cp.max(0.0), c.max(0.0)];
        let sum = |v: &[f64; 4]| ((v[0] + v[1]) + v[2]) + v[3];
        // repair float telescoping error (a few ulp at most): nudge one
        // entry and scan its neighbors until the left-to-right sum is
        // exactly one
        if sum(&v) != 1.0 {
            'knobs: for i in 0..4 {
                let orig = v[i];
                let base = orig + (1.0 - sum(&v));
                let mut cand = [base; 5];
                cand[1] = base.next_up();
                cand[2] = base.next_up().next_up();
                cand[3] = base.next_down();
                cand[4] = base.next_down().next_down();
                for x in cand {
                    if x >= 0.0 {
                        v[i] = x;
                        if sum(&v) == 1.0 {
                            break 'knobs;
                        }
                    }
                }
                v[i] = orig;
            }
        }
        ClassProbs {
            io: v[0],
            ls: v[1],
            cp: v[2],
            c: v[3],
        }
    }
}

/// Performance levels, least to most severe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Level {
    IO,
    LS,
    CP,
    C,
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Level::IO => "IO",
            Level::LS => "LS",
            Level::CP => "CP",
            Level::C => "C",
        };
        write!(f, "{s}")
    }
}

/// One story's block of the report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoryPerformance {
    /// 1-based story number.
    pub story: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_isd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_isd: Option<f64>,
    pub p_exceed: ExceedanceProbs,
    pub p_class: ClassProbs,
}

/// The full classification report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub stories: Vec<StoryPerformance>,
    pub building_exceed: ExceedanceProbs,
    pub building_class: ClassProbs,
    pub classification: Level,
    pub thresholds: PerformanceThresholds,
    /// Where the uncertainty came from (e.g. design-stage linearized
    /// covariance).
    pub covariance_provenance: String,
}

/// Peak drift-ratio means from the estimated response, paired with sigmas
/// from the solution's covariance.
///
/// The ground anchors story 1, so its drift is the first displacement
/// directly. The solution must carry a covariance; drift-error variances
/// are divided by squared story heights to share the mean's units.
pub fn estimate_drifts(
    solution: &ObserverSolution,
    model: &BuildingModel,
) -> Result<DriftEstimate> {
    model.validate()?;
    let n = model.n();
    if solution.q_hat.n_steps() == 0 {
        return Err(Error::validation("observer history is empty"));
    }
    if solution.q_hat.n_stories() != n {
        return Err(Error::validation(format!(
            "history has {} stories, model has {n}",
            solution.q_hat.n_stories()
        )));
    }
    let cov = solution.covariance.as_ref().ok_or_else(|| {
        Error::validation("solution carries no covariance; run the error analysis first")
    })?;

    let peaks = solution.q_hat.peak_drifts();
    let mean_isd: Vec<f64> = peaks
        .iter()
        .zip(&model.story_height)
        .map(|(d, h)| d / h)
        .collect();
    let sigma_isd: Vec<f64> = cov
        .p_isd
        .iter()
        .zip(&model.story_height)
        .map(|(v, h)| v.max(0.0).sqrt() / h)
        .collect();
    Ok(DriftEstimate {
        mean_isd,
        sigma_isd,
    })
}

fn gaussian_exceed(mean: f64, sigma: f64, threshold: f64, truncate_at_zero: bool) -> f64 {
    if sigma == 0.0 {
        return if mean >= threshold { 1.0 } else { 0.0 };
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let tail = 1.0 - normal.cdf((threshold - mean) / sigma);
    if truncate_at_zero {
        let mass = 1.0 - normal.cdf((0.0 - mean) / sigma);
        if mass > 0.0 {
            (tail / mass).min(1.0)
        } else {
            0.0
        }
    } else {
        tail
    }
}

/// Exceedance probabilities of one story under the untruncated Gaussian.
pub fn story_exceedance(
    est: &DriftEstimate,
    thresholds: &PerformanceThresholds,
    story: usize,
) -> Result<ExceedanceProbs> {
    story_exceedance_with(est, thresholds, story, false)
}

/// As [`story_exceedance`], optionally renormalizing the Gaussian to
/// non-negative drifts.
pub fn story_exceedance_with(
    est: &DriftEstimate,
    thresholds: &PerformanceThresholds,
    story: usize,
    truncate_at_zero: bool,
) -> Result<ExceedanceProbs> {
    est.validate()?;
    thresholds.validate()?;
    if story == 0 || story > est.n_stories() {
        return Err(Error::validation(format!(
            "story {story} out of range 1..={}",
            est.n_stories()
        )));
    }
    let mean = est.mean_isd[story - 1];
    let sigma = est.sigma_isd[story - 1];
    Ok(ExceedanceProbs {
        io: gaussian_exceed(mean, sigma, thresholds.io, truncate_at_zero),
        ls: gaussian_exceed(mean, sigma, thresholds.ls, truncate_at_zero),
        cp: gaussian_exceed(mean, sigma, thresholds.cp, truncate_at_zero),
    })
}

/// Band the exceedance probabilities into the four class probabilities.
pub fn story_class_probs(p_exceed: &ExceedanceProbs) -> Result<ClassProbs> {
    p_exceed.validate()?;
    Ok(ClassProbs::from_bands(
        1.0 - p_exceed.io,
        p_exceed.io - p_exceed.ls,
        p_exceed.ls - p_exceed.cp,
        p_exceed.cp,
    ))
}

/// Building exceedance under independent stories: the complement of no
/// story exceeding.
pub fn building_exceedance(stories: &[ExceedanceProbs]) -> Result<ExceedanceProbs> {
    if stories.is_empty() {
        return Err(Error::validation("no story probabilities"));
    }
    let mut none = [1.0f64; 3];
    for s in stories {
        s.validate()?;
        none[0] *= 1.0 - s.io;
        none[1] *= 1.0 - s.ls;
        none[2] *= 1.0 - s.cp;
    }
    Ok(ExceedanceProbs {
        io: 1.0 - none[0],
        ls: 1.0 - none[1],
        cp: 1.0 - none[2],
    })
}

/// Class probabilities at the building level.
pub fn building_class_probs(building_exceed: &ExceedanceProbs) -> Result<ClassProbs> {
    story_class_probs(building_exceed)
}

/// Assigned level: the most probable class, ties broken toward the more
/// severe level.
pub fn classify(class: &ClassProbs) -> Level {
    let ordered = [
        (Level::C, class.c),
        (Level::CP, class.cp),
        (Level::LS, class.ls),
        (Level::IO, class.io),
    ];
    let mut best = ordered[0];
    for cand in &ordered[1..] {
        if cand.1 > best.1 {
            best = *cand;
        }
    }
    best.0
}

/// Full report from drift estimates.
pub fn assemble_report(
    drifts: &DriftEstimate,
    thresholds: &PerformanceThresholds,
    covariance_provenance: impl Into<String>,
) -> Result<PerformanceReport> {
    drifts.validate()?;
    thresholds.validate()?;
    let n = drifts.n_stories();
    let mut stories = Vec::with_capacity(n);
    let mut exceeds = Vec::with_capacity(n);
    for k in 1..=n {
        let p_exceed = story_exceedance(drifts, thresholds, k)?;
        let p_class = story_class_probs(&p_exceed)?;
        exceeds.push(p_exceed);
        stories.push(StoryPerformance {
            story: k,
            mean_isd: Some(drifts.mean_isd[k - 1]),
            sigma_isd: Some(drifts.sigma_isd[k - 1]),
            p_exceed,
            p_class,
        });
    }
    let building_exceed = building_exceedance(&exceeds)?;
    let building_class = building_class_probs(&building_exceed)?;
    Ok(PerformanceReport {
        stories,
        building_exceed,
        building_class,
        classification: classify(&building_class),
        thresholds: thresholds.clone(),
        covariance_provenance: covariance_provenance.into(),
    })
}

/// Report built from externally supplied story exceedance probabilities
/// (no drift statistics attached).
pub fn report_from_exceedance(
    story_exceed: &[ExceedanceProbs],
    thresholds: &PerformanceThresholds,
    covariance_provenance: impl Into<String>,
) -> Result<PerformanceReport> {
    thresholds.validate()?;
    if story_exceed.is_empty() {
        return Err(Error::validation("no story probabilities"));
    }
    let mut stories = Vec::with_capacity(story_exceed.len());
    for (idx, p_exceed) in story_exceed.iter().enumerate() {
        let p_class = story_class_probs(p_exceed)?;
        stories.push(StoryPerformance {
            story: idx + 1,
            mean_isd: None,
            sigma_isd: None,
            p_exceed: *p_exceed,
            p_class,
        });
    }
    let building_exceed = building_exceedance(story_exceed)?;
    let building_class = building_class_probs(&building_exceed)?;
    Ok(PerformanceReport {
        stories,
        building_exceed,
        building_class,
        classification: classify(&building_class),
        thresholds: thresholds.clone(),
        covariance_provenance: covariance_provenance.into(),
    })
}

/// Plot-ready Gaussian density and distribution values per story over a
/// common drift-ratio grid.
#[derive(Debug, Clone)]
pub struct DensityTable {
    /// Drift-ratio grid from 0 to the largest mean + 4 sigma.
    pub grid: Vec<f64>,
    /// Per-story density values over the grid.
    pub pdf: Vec<Vec<f64>>,
    /// Per-story distribution values over the grid.
    pub cdf: Vec<Vec<f64>>,
}

pub fn density_table(est: &DriftEstimate, points: usize) -> Result<DensityTable> {
    est.validate()?;
    if points < 2 {
        return Err(Error::validation("density table needs at least 2 points"));
    }
    let hi = est
        .mean_isd
        .iter()
        .zip(&est.sigma_isd)
        .map(|(m, s)| m + 4.0 * s)
        .fold(0.0f64, f64::max)
        .max(1e-6);
    let grid: Vec<f64> = (0..points)
        .map(|i| hi * i as f64 / (points - 1) as f64)
        .collect();
    let n = est.n_stories();
    let mut pdf = vec![vec![0.0; points]; n];
    let mut cdf = vec![vec![0.0; points]; n];
    for k in 0..n {
        let (m, s) = (est.mean_isd[k], est.sigma_isd[k]);
        if s == 0.0 {
            for (i, x) in grid.iter().enumerate() {
                cdf[k][i] = if *x >= m { 1.0 } else { 0.0 };
            }
            continue;
        }
        let normal = Normal::new(m, s).map_err(|_| Error::validation("bad gaussian"))?;
        for (i, x) in grid.iter().enumerate() {
            use statrs::distribution::Continuous;
            pdf[k][i] = normal.pdf(*x);
            cdf[k][i] = normal.cdf(*x);
        }
    }
    Ok(DensityTable { grid, pdf, cdf })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn exceed(io: f64, ls: f64, cp: f64) -> ExceedanceProbs {
        ExceedanceProbs { io, ls, cp }
    }

    #[test]
    fn gaussian_exceedance_fixed_points() {
        let est = DriftEstimate {
            mean_isd: vec![0.02],
            sigma_isd: vec![0.005],
        };
        let th = PerformanceThresholds::default();
        let p = story_exceedance(&est, &th, 1).unwrap();
        // mean equals the LS threshold
        assert_abs_diff_eq!(p.ls, 0.5, epsilon = 1e-12);
        // CP threshold sits 4 sigma above the mean
        assert_abs_diff_eq!(p.cp, 3.1671e-5, epsilon = 1e-8);

        // mean two sigma above the threshold
        let est = DriftEstimate {
            mean_isd: vec![0.02],
            sigma_isd: vec![0.005],
        };
        let th2 = PerformanceThresholds {
            io: 0.01,
            ls: 0.015,
            cp: 0.03,
            provenance: "test".into(),
        };
        let p = story_exceedance(&est, &th2, 1).unwrap();
        assert_abs_diff_eq!(p.io, 0.97725, epsilon = 1e-5);
    }

    #[test]
    fn zero_sigma_is_a_step() {
        let th = PerformanceThresholds::default();
        let est = DriftEstimate {
            mean_isd: vec![0.005, 0.03],
            sigma_isd: vec![0.0, 0.0],
        };
        let p1 = story_exceedance(&est, &th, 1).unwrap();
        assert_eq!((p1.io, p1.ls, p1.cp), (0.0, 0.0, 0.0));
        let p2 = story_exceedance(&est, &th, 2).unwrap();
        assert_eq!((p2.io, p2.ls, p2.cp), (1.0, 1.0, 0.0));
    }

    #[test]
    fn exceedance_strictly_decreases_in_threshold() {
        let est = DriftEstimate {
            mean_isd: vec![0.015],
            sigma_isd: vec![0.004],
        };
        let th = PerformanceThresholds::default();
        let p = story_exceedance(&est, &th, 1).unwrap();
        assert!(p.io > p.ls && p.ls > p.cp);
    }

    #[test]
    fn truncation_renormalizes_the_tail() {
        // mean 0: half the untruncated mass is negative
        let p_plain = gaussian_exceed(0.0, 0.01, 0.02, false);
        let p_trunc = gaussian_exceed(0.0, 0.01, 0.02, true);
        assert_relative_eq!(p_trunc, 2.0 * p_plain, max_relative = 1e-10);
    }

    #[test]
    fn class_bands_telescope() {
        let p = exceed(1.0, 0.66, 0.01);
        let c = story_class_probs(&p).unwrap();
        assert_abs_diff_eq!(c.io, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.ls, 0.34, epsilon = 1e-12);
        assert_abs_diff_eq!(c.cp, 0.65, epsilon = 1e-12);
        assert_abs_diff_eq!(c.c, 0.01, epsilon = 1e-15);
        assert_eq!(c.sum(), 1.0);

        assert!(story_class_probs(&exceed(0.2, 0.5, 0.1)).is_err());
        let zero = story_class_probs(&exceed(0.0, 0.0, 0.0)).unwrap();
        assert_eq!((zero.io, zero.ls, zero.cp, zero.c), (1.0, 0.0, 0.0, 0.0));
        let all = story_class_probs(&exceed(1.0, 1.0, 1.0)).unwrap();
        assert_eq!((all.io, all.ls, all.cp, all.c), (0.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn class_sum_is_exactly_one_across_odd_floats() {
        let cases = [
            (0.1, 0.05, 0.025),
            (0.7499999999999999, 0.3, 0.1),
            (1.0, 0.3, 0.1),
            (1.0, 1.0, 0.9999999999999999),
            (0.333333333333333, 0.111111111111111, 0.037037037037037),
        ];
        for (io, ls, cp) in cases {
            let c = story_class_probs(&exceed(io, ls, cp)).unwrap();
            assert_eq!(c.sum(), 1.0, "sum drifted for ({io}, {ls}, {cp})");
            assert!(c.io >= 0.0 && c.ls >= 0.0 && c.cp >= 0.0 && c.c >= 0.0);
        }
    }

    #[test]
    fn building_aggregation_matches_hand_product() {
        let rows = [
            exceed(0.99, 0.33, 0.0),
            exceed(1.0, 0.13, 0.0),
            exceed(1.0, 0.66, 0.01),
            exceed(1.0, 0.04, 0.0),
            exceed(0.56, 0.0, 0.0),
            exceed(0.43, 0.0, 0.0),
            exceed(0.01, 0.0, 0.0),
        ];
        let b = building_exceedance(&rows).unwrap();
        let expected_ls = 1.0 - 0.67 * 0.87 * 0.34 * 0.96;
        assert_relative_eq!(b.ls, expected_ls, max_relative = 1e-12);
        assert_abs_diff_eq!(b.ls, 0.81, epsilon = 0.01);
        assert_abs_diff_eq!(b.cp, 0.01, epsilon = 1e-12);
        // union bound direction: building >= every story, per level
        for r in &rows {
            assert!(b.io >= r.io - 1e-15);
            assert!(b.ls >= r.ls - 1e-15);
            assert!(b.cp >= r.cp - 1e-15);
        }
    }

    #[test]
    fn all_quiet_stories_give_certain_io() {
        let rows = vec![exceed(0.0, 0.0, 0.0); 4];
        let b = building_exceedance(&rows).unwrap();
        assert_eq!((b.io, b.ls, b.cp), (0.0, 0.0, 0.0));
        let c = building_class_probs(&b).unwrap();
        assert_eq!((c.io, c.ls, c.cp, c.c), (1.0, 0.0, 0.0, 0.0));
        assert_eq!(classify(&c), Level::IO);
    }

    #[test]
    fn severe_tie_break() {
        let c = ClassProbs {
            io: 0.5,
            ls: 0.5,
            cp: 0.0,
            c: 0.0,
        };
        assert_eq!(classify(&c), Level::LS);
        let c = ClassProbs {
            io: 0.0,
            ls: 0.19,
            cp: 0.8,
            c: 0.01,
        };
        assert_eq!(classify(&c), Level::CP);
        let c = ClassProbs {
            io: 0.25,
            ls: 0.25,
            cp: 0.25,
            c: 0.25,
        };
        assert_eq!(classify(&c), Level::C);
    }

    #[test]
    fn drift_means_from_history() {
        use crate::model::ResponseHistory;
        use crate::observer::{ErrorCovariance, FeedbackGain, SensorLayout};
        use nalgebra::DVector;

        let model = BuildingModel::linear(vec![1.0, 1.0], vec![100.0, 80.0], vec![4.0, 3.0]);
        // story 2 peak drift 0.06 m over 3 m; story 1 peak 0.02 m over 4 m
        let q = vec![
            DVector::from_vec(vec![0.0, 0.0]),
            DVector::from_vec(vec![0.02, 0.05]),
            DVector::from_vec(vec![0.01, 0.07]),
        ];
        let zeros: Vec<DVector<f64>> = q.iter().map(|_| DVector::zeros(2)).collect();
        let hist = ResponseHistory {
            dt: 0.01,
            q,
            qdot: zeros.clone(),
            qddot: zeros,
            z: vec![vec![0.0; 2]; 3],
        };
        let cov = ErrorCovariance {
            p: vec![vec![1e-6, 0.0], vec![0.0, 4e-6]],
            p_isd: vec![1e-6, 9e-6],
            omega_max: 100.0,
            grid_points: 64,
            refinement_change: 0.0,
            accuracy_warning: false,
            clipped_eigenvalue: None,
        };
        let sol = crate::observer::ObserverSolution {
            q_hat: hist,
            gain: FeedbackGain::uniform(1, 1.0),
            layout: SensorLayout::new(vec![1]),
            covariance: Some(cov),
        };
        let est = estimate_drifts(&sol, &model).unwrap();
        assert_abs_diff_eq!(est.mean_isd[0], 0.02 / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(est.mean_isd[1], 0.06 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(est.sigma_isd[0], 1e-3 / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(est.sigma_isd[1], 3e-3 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_history_means_zero_drifts() {
        use crate::model::ResponseHistory;
        use crate::observer::{ErrorCovariance, FeedbackGain, SensorLayout};
        use nalgebra::DVector;

        let model = BuildingModel::linear(vec![1.0], vec![100.0], vec![3.0]);
        let hist = ResponseHistory {
            dt: 0.01,
            q: vec![DVector::zeros(1); 5],
            qdot: vec![DVector::zeros(1); 5],
            qddot: vec![DVector::zeros(1); 5],
            z: vec![vec![0.0]; 5],
        };
        let sol = crate::observer::ObserverSolution {
            q_hat: hist,
            gain: FeedbackGain::uniform(1, 1.0),
            layout: SensorLayout::new(vec![1]),
            covariance: Some(ErrorCovariance {
                p: vec![vec![0.0]],
                p_isd: vec![0.0],
                omega_max: 1.0,
                grid_points: 64,
                refinement_change: 0.0,
                accuracy_warning: false,
                clipped_eigenvalue: None,
            }),
        };
        let est = estimate_drifts(&sol, &model).unwrap();
        assert_eq!(est.mean_isd, vec![0.0]);
    }

    #[test]
    fn report_reproduces_building_tables() {
        let rows = [
            exceed(0.99, 0.33, 0.0),
            exceed(1.0, 0.13, 0.0),
            exceed(1.0, 0.66, 0.01),
            exceed(1.0, 0.04, 0.0),
            exceed(0.56, 0.0, 0.0),
            exceed(0.43, 0.0, 0.0),
            exceed(0.01, 0.0, 0.0),
        ];
        let report =
            report_from_exceedance(&rows, &PerformanceThresholds::default(), "injected").unwrap();
        assert_abs_diff_eq!(report.building_exceed.ls, 0.81, epsilon = 0.01);
        assert_abs_diff_eq!(report.building_class.cp, 0.80, epsilon = 0.01);
        assert_abs_diff_eq!(report.building_class.c, 0.01, epsilon = 0.005);
        assert_eq!(report.classification, Level::CP);
        for s in &report.stories {
            assert_eq!(s.p_class.sum(), 1.0);
        }
        assert_eq!(report.building_class.sum(), 1.0);
    }

    #[test]
    fn density_table_is_consistent_with_cdf() {
        let est = DriftEstimate {
            mean_isd: vec![0.01, 0.02],
            sigma_isd: vec![0.002, 0.004],
        };
        let DensityTable { grid, pdf, cdf } = density_table(&est, 401).unwrap();
        assert_eq!(grid.len(), 401);
        // trapezoid integral of the pdf approximates the cdf increment
        for k in 0..2 {
            let mut integral = 0.0;
            for i in 1..grid.len() {
                integral += 0.5 * (pdf[k][i] + pdf[k][i - 1]) * (grid[i] - grid[i - 1]);
            }
            let expected = cdf[k][grid.len() - 1] - cdf[k][0];
            assert_relative_eq!(integral, expected, max_relative = 1e-3);
        }
    }

    #[test]
    fn bad_thresholds_are_rejected() {
        let th = PerformanceThresholds {
            io: 0.02,
            ls: 0.02,
            cp: 0.04,
            provenance: "x".into(),
        };
        assert!(th.validate().is_err());
    }
}
