//! Sensor placement: choose which stories to instrument so that the
//! optimized estimation-error objective is minimal while every story's
//! drift-error variance stays below an allowable bound.
//!
//! Gain optimization is nested inside the subset search: every candidate
//! layout gets its own optimized damper gains before being scored. Results
//! are cached by layout, and the full evaluation list is kept for audit.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BuildingModel;
use crate::observer::{
    estimation_covariance, optimize_gain, FeedbackGain, Objective, OptimizerConfig, ProcessNoise,
    SensorLayout,
};

/// Maximum allowable drift-error variance, in explicit units: absolute
/// drift variance (m^2) or height-normalized drift-ratio variance.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "units", content = "value", rename_all = "snake_case")]
pub enum Sigma2Max {
    M2(f64),
    Ratio(f64),
}

impl Sigma2Max {
    pub fn value(&self) -> f64 {
        match self {
            Sigma2Max::M2(v) | Sigma2Max::Ratio(v) => *v,
        }
    }
}

/// A placement task: model, eligible stories, budget, constraint, and the
/// design-stage noise densities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlacementProblem {
    pub model: BuildingModel,
    /// Stories eligible for a sensor (1-based).
    pub candidate_dofs: Vec<usize>,
    /// Sensor budget.
    pub m: usize,
    pub sigma2_max: Sigma2Max,
    pub process_noise: ProcessNoise,
    /// Flat measurement-noise density.
    pub phi_vv: f64,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

impl PlacementProblem {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let n = self.model.n();
        if self.candidate_dofs.is_empty() {
            return Err(Error::validation("no candidate stories"));
        }
        let mut sorted = self.candidate_dofs.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.candidate_dofs.len() {
            return Err(Error::validation("candidate stories must be unique"));
        }
        if sorted[0] == 0 || *sorted.last().unwrap() > n {
            return Err(Error::validation(format!(
                "candidate stories must lie in 1..={n}"
            )));
        }
        if self.m == 0 || self.m > self.candidate_dofs.len() {
            return Err(Error::validation(format!(
                "budget m = {} must lie in 1..={}",
                self.m,
                self.candidate_dofs.len()
            )));
        }
        // an infinite cap is allowed and turns the constraint off
        let cap = self.sigma2_max.value();
        if cap.is_nan() || cap <= 0.0 {
            return Err(Error::validation("sigma2_max must be positive"));
        }
        self.process_noise.validate()?;
        if self.phi_vv < 0.0 || !self.phi_vv.is_finite() {
            return Err(Error::validation("phi_vv must be non-negative"));
        }
        Ok(())
    }

    fn sorted_candidates(&self) -> Vec<usize> {
        let mut c = self.candidate_dofs.clone();
        c.sort_unstable();
        c
    }
}

/// Score of one evaluated layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayoutEvaluation {
    pub measured_dofs: Vec<usize>,
    /// Value of the configured objective (trace of P or of the drift
    /// variances), m^2.
    pub objective_value: f64,
    /// Trace of the displacement-error covariance (m^2).
    pub trace_p: f64,
    /// Largest per-story drift-error variance, in the units of sigma2_max.
    pub max_isd_var: f64,
    pub feasible: bool,
    pub gain: FeedbackGain,
}

/// Search outcome. `audit` lists every evaluated layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlacementResult {
    pub layout: SensorLayout,
    pub gain: FeedbackGain,
    pub objective_value: f64,
    pub trace_p: f64,
    pub max_isd_var: f64,
    pub feasible: bool,
    pub evaluated_count: usize,
    /// Objective after each greedy addition; absent for exhaustive search.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective_path: Option<Vec<f64>>,
    pub audit: Vec<LayoutEvaluation>,
}

/// Default cap on exhaustively enumerated subsets.
pub const ENUMERATION_CAP: u128 = 10_000;

/// Optimize the gain for one layout and score it against the constraint.
pub fn evaluate_layout(
    problem: &PlacementProblem,
    layout: &SensorLayout,
) -> Result<LayoutEvaluation> {
    problem.validate()?;
    layout.validate(problem.model.n())?;
    for dof in &layout.measured_dofs {
        if !problem.candidate_dofs.contains(dof) {
            return Err(Error::validation(format!(
                "story {dof} is not a placement candidate"
            )));
        }
    }
    evaluate_uncached(problem, layout)
}

fn evaluate_uncached(
    problem: &PlacementProblem,
    layout: &SensorLayout,
) -> Result<LayoutEvaluation> {
    let gain_res = optimize_gain(
        &problem.model,
        layout,
        &problem.process_noise,
        problem.phi_vv,
        &problem.optimizer,
    )?;
    let cov = estimation_covariance(
        &problem.model,
        layout,
        &gain_res.gain,
        &problem.process_noise,
        problem.phi_vv,
        &problem.optimizer.grid,
    )?;
    let isd = match problem.sigma2_max {
        Sigma2Max::M2(_) => cov.p_isd.clone(),
        Sigma2Max::Ratio(_) => cov.normalized_isd(&problem.model.story_height),
    };
    let max_isd_var = isd.iter().copied().fold(0.0f64, f64::max);
    let objective_value = match problem.optimizer.objective {
        Objective::TraceP => cov.trace_p(),
        Objective::TracePIsd => cov.trace_p_isd(),
    };
    Ok(LayoutEvaluation {
        measured_dofs: layout.measured_dofs.clone(),
        objective_value,
        trace_p: cov.trace_p(),
        max_isd_var,
        feasible: max_isd_var < problem.sigma2_max.value(),
        gain: gain_res.gain,
    })
}

fn evaluate_cached<'a>(
    problem: &PlacementProblem,
    layout: &SensorLayout,
    cache: &'a mut BTreeMap<Vec<usize>, LayoutEvaluation>,
) -> Result<&'a LayoutEvaluation> {
    if !cache.contains_key(&layout.measured_dofs) {
        let eval = evaluate_uncached(problem, layout)?;
        cache.insert(layout.measured_dofs.clone(), eval);
    }
    Ok(&cache[&layout.measured_dofs])
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i + 1) as u128;
    }
    acc
}

/// Lexicographic size-m subsets of the (sorted) candidate list.
fn for_each_subset(
    candidates: &[usize],
    m: usize,
    mut visit: impl FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    let c = candidates.len();
    let mut idx: Vec<usize> = (0..m).collect();
    loop {
        let subset: Vec<usize> = idx.iter().map(|i| candidates[*i]).collect();
        visit(&subset)?;
        // advance the rightmost index that can still move
        let mut pos = m;
        while pos > 0 {
            pos -= 1;
            if idx[pos] != pos + c - m {
                idx[pos] += 1;
                for j in pos + 1..m {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
            if pos == 0 {
                return Ok(());
            }
        }
    }
}

/// Rank layouts: feasible first, then objective, then lexicographic subset.
fn better(a: &LayoutEvaluation, b: &LayoutEvaluation) -> bool {
    match (a.feasible, b.feasible) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => a.objective_value < b.objective_value,
        // neither feasible: smaller constraint violation wins
        (false, false) => a.max_isd_var < b.max_isd_var,
    }
}

/// Evaluate every size-m subset of the candidates and return the best.
///
/// Fails with an enumeration-cap error when the subset count exceeds
/// `ENUMERATION_CAP`; the greedy search has no such limit. When no subset
/// meets the constraint the least-violating one is returned with
/// `feasible = false`.
pub fn place_exhaustive(problem: &PlacementProblem) -> Result<PlacementResult> {
    problem.validate()?;
    let candidates = problem.sorted_candidates();
    let count = binomial(candidates.len(), problem.m);
    if count > ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            subsets: count,
            cap: ENUMERATION_CAP,
        });
    }

    let mut audit: Vec<LayoutEvaluation> = Vec::with_capacity(count as usize);
    let mut best: Option<usize> = None;
    for_each_subset(&candidates, problem.m, |subset| {
        let layout = SensorLayout::new(subset.to_vec());
        let eval = evaluate_uncached(problem, &layout)?;
        let replace = match best {
            None => true,
            Some(b) => better(&eval, &audit[b]),
        };
        audit.push(eval);
        if replace {
            best = Some(audit.len() - 1);
        }
        Ok(())
    })?;

    let winner = audit[best.expect("at least one subset")].clone();
    Ok(PlacementResult {
        layout: SensorLayout::new(winner.measured_dofs.clone()),
        gain: winner.gain.clone(),
        objective_value: winner.objective_value,
        trace_p: winner.trace_p,
        max_isd_var: winner.max_isd_var,
        feasible: winner.feasible,
        evaluated_count: audit.len(),
        objective_path: None,
        audit,
    })
}

/// Greedy forward selection: grow the layout one sensor at a time, always
/// adding the candidate that minimizes the optimized objective.
pub fn place_greedy(problem: &PlacementProblem) -> Result<PlacementResult> {
    problem.validate()?;
    let candidates = problem.sorted_candidates();
    let mut cache: BTreeMap<Vec<usize>, LayoutEvaluation> = BTreeMap::new();
    let mut chosen: Vec<usize> = Vec::with_capacity(problem.m);
    let mut path = Vec::with_capacity(problem.m);

    for _ in 0..problem.m {
        let mut step_best: Option<(usize, f64)> = None;
        for &cand in &candidates {
            if chosen.contains(&cand) {
                continue;
            }
            let mut trial = chosen.clone();
            trial.push(cand);
            let layout = SensorLayout::new(trial);
            let eval = evaluate_cached(problem, &layout, &mut cache)?;
            let val = eval.objective_value;
            let take = match step_best {
                None => true,
                Some((_, best_val)) => val < best_val,
            };
            if take {
                step_best = Some((cand, val));
            }
        }
        let (winner, val) = step_best.expect("candidates remain below budget");
        chosen.push(winner);
        chosen.sort_unstable();
        path.push(val);
    }

    let layout = SensorLayout::new(chosen);
    let final_eval = evaluate_cached(problem, &layout, &mut cache)?.clone();
    let audit: Vec<LayoutEvaluation> = cache.into_values().collect();
    Ok(PlacementResult {
        layout,
        gain: final_eval.gain.clone(),
        objective_value: final_eval.objective_value,
        trace_p: final_eval.trace_p,
        max_isd_var: final_eval.max_isd_var,
        feasible: final_eval.feasible,
        evaluated_count: audit.len(),
        objective_path: Some(path),
        audit,
    })
}
