//! Small box-constrained Nelder-Mead simplex minimizer.
//!
//! Candidates are projected onto the box before evaluation, which keeps the
//! search inside the feasible region without penalty tuning. Non-finite
//! objective values are treated as infinitely bad so the simplex contracts
//! away from them. In more than two dimensions the simplex can collapse onto
//! a subspace and stall early, so after each convergence the search restarts
//! from a fresh simplex around the incumbent until a restart stops improving
//! or the budget runs out.

#[derive(Debug, Clone)]
pub(crate) struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) struct NelderMead {
    pub max_iters: usize,
    /// Relative spread of simplex objective values at which to stop.
    pub tol: f64,
    /// Fresh simplexes rebuilt around the incumbent after convergence.
    pub restarts: usize,
    /// Edge length of a restarted simplex.
    pub restart_step: f64,
}

impl NelderMead {
    pub fn minimize(
        &self,
        mut f: impl FnMut(&[f64]) -> f64,
        initial_simplex: Vec<Vec<f64>>,
        lo: &[f64],
        hi: &[f64],
    ) -> SimplexResult {
        let dim = lo.len();
        assert_eq!(
            initial_simplex.len(),
            dim + 1,
            "simplex needs dim+1 vertices"
        );

        let mut best = self.run_simplex(&mut f, initial_simplex, lo, hi, self.max_iters);
        for _ in 0..self.restarts {
            let budget = self.max_iters.saturating_sub(best.iterations);
            if !best.converged || budget == 0 {
                break;
            }
            // vertex i steps along coordinate i, away from the nearer bound
            let mut simplex = vec![best.x.clone()];
            for i in 0..dim {
                let mut v = best.x.clone();
                v[i] = if hi[i] - v[i] >= self.restart_step {
                    v[i] + self.restart_step
                } else {
                    v[i] - self.restart_step
                };
                simplex.push(v);
            }
            let again = self.run_simplex(&mut f, simplex, lo, hi, budget);
            let improved = again.value < best.value - self.tol * best.value.abs().max(1e-30);
            let total = best.iterations + again.iterations;
            if again.value < best.value {
                best = again;
            }
            best.iterations = total;
            if !improved {
                break;
            }
        }
        best
    }

    fn run_simplex(
        &self,
        f: &mut impl FnMut(&[f64]) -> f64,
        initial_simplex: Vec<Vec<f64>>,
        lo: &[f64],
        hi: &[f64],
        budget: usize,
    ) -> SimplexResult {
        let dim = lo.len();

        let clamp = |x: &mut Vec<f64>| {
            for (i, v) in x.iter_mut().enumerate() {
                *v = v.clamp(lo[i], hi[i]);
            }
        };
        let eval = |f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64]| -> f64 {
            let v = f(x);
            if v.is_finite() {
                v
            } else {
                f64::INFINITY
            }
        };

        let mut verts: Vec<Vec<f64>> = initial_simplex;
        for v in verts.iter_mut() {
            clamp(v);
        }
        let mut vals: Vec<f64> = verts.iter().map(|v| eval(f, v)).collect();

        let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
        let mut iterations = 0;
        let mut converged = false;

        for _ in 0..budget {
            iterations += 1;
            // sort ascending by value
            let mut order: Vec<usize> = (0..=dim).collect();
            order.sort_by(|a, b| vals[*a].partial_cmp(&vals[*b]).unwrap());
            let reorder_v: Vec<Vec<f64>> = order.iter().map(|i| verts[*i].clone()).collect();
            let reorder_f: Vec<f64> = order.iter().map(|i| vals[*i]).collect();
            verts = reorder_v;
            vals = reorder_f;

            // stop on either a collapsed value spread or a collapsed simplex;
            // the latter covers objectives whose minimum sits at zero
            let spread = vals[dim] - vals[0];
            let diam = verts[1..]
                .iter()
                .map(|v| {
                    v.iter()
                        .zip(&verts[0])
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0f64, f64::max)
                })
                .fold(0.0f64, f64::max);
            let xscale = verts[0].iter().fold(1.0f64, |m, v| m.max(v.abs()));
            if (spread.is_finite() && spread <= self.tol * vals[0].abs().max(1e-30))
                || diam <= self.tol * xscale
            {
                converged = true;
                break;
            }

            let mut centroid = vec![0.0; dim];
            for v in verts.iter().take(dim) {
                for (c, x) in centroid.iter_mut().zip(v) {
                    *c += x / dim as f64;
                }
            }

            let blend = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
                a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
            };

            // reflect the worst vertex through the centroid
            let mut xr = blend(&centroid, &verts[dim], -alpha);
            clamp(&mut xr);
            let fr = eval(f, &xr);

            if fr < vals[0] {
                let mut xe = blend(&centroid, &xr, gamma);
                clamp(&mut xe);
                let fe = eval(f, &xe);
                if fe < fr {
                    verts[dim] = xe;
                    vals[dim] = fe;
                } else {
                    verts[dim] = xr;
                    vals[dim] = fr;
                }
                continue;
            }
            if fr < vals[dim - 1] {
                verts[dim] = xr;
                vals[dim] = fr;
                continue;
            }

            let (mut xc, towards) = if fr < vals[dim] {
                (blend(&centroid, &xr, rho), fr)
            } else {
                (blend(&centroid, &verts[dim], rho), vals[dim])
            };
            clamp(&mut xc);
            let fc = eval(f, &xc);
            if fc <= towards {
                verts[dim] = xc;
                vals[dim] = fc;
                continue;
            }

            // shrink toward the best vertex
            for i in 1..=dim {
                let mut xs = blend(&verts[0].clone(), &verts[i], sigma);
                clamp(&mut xs);
                vals[i] = eval(f, &xs);
                verts[i] = xs;
            }
        }

        let mut best = 0;
        for i in 1..=dim {
            if vals[i] < vals[best] {
                best = i;
            }
        }
        SimplexResult {
            x: verts[best].clone(),
            value: vals[best],
            iterations,
            converged,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn simplex_around(x0: &[f64], step: f64) -> Vec<Vec<f64>> {
        let mut s = vec![x0.to_vec()];
        for i in 0..x0.len() {
            let mut v = x0.to_vec();
            v[i] += step;
            s.push(v);
        }
        s
    }

    fn nm(max_iters: usize, tol: f64) -> NelderMead {
        NelderMead {
            max_iters,
            tol,
            restarts: 2,
            restart_step: 0.5,
        }
    }

    #[test]
    fn finds_quadratic_minimum() {
        let target = [1.5, -2.0, 0.25];
        let res = nm(500, 1e-8).minimize(
            |x| {
                x.iter()
                    .zip(&target)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
            },
            simplex_around(&[0.0, 0.0, 0.0], 1.0),
            &[-10.0, -10.0, -10.0],
            &[10.0, 10.0, 10.0],
        );
        assert!(res.converged);
        for (a, b) in res.x.iter().zip(&target) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-4);
        }
    }

    #[test]
    fn respects_box_bounds() {
        // unconstrained minimum at -3, box floor at 0
        let res = nm(300, 1e-12).minimize(
            |x| (x[0] + 3.0).powi(2),
            vec![vec![2.0], vec![5.0]],
            &[0.0],
            &[10.0],
        );
        assert!(res.x[0] >= 0.0);
        assert_abs_diff_eq!(res.x[0], 0.0, epsilon = 1e-6);
    }

    #[test]
    fn iteration_cap_reports_nonconvergence() {
        let res = nm(3, 1e-16).minimize(
            |x| x.iter().map(|v| v * v).sum::<f64>(),
            simplex_around(&[5.0, 5.0], 1.0),
            &[-10.0, -10.0],
            &[10.0, 10.0],
        );
        assert!(!res.converged);
        assert_eq!(res.iterations, 3);
    }

    #[test]
    fn survives_non_finite_regions() {
        let res = nm(400, 1e-10).minimize(
            |x| {
                if x[0] < 0.5 {
                    f64::NAN
                } else {
                    (x[0] - 2.0).powi(2)
                }
            },
            vec![vec![1.0], vec![6.0]],
            &[0.0],
            &[10.0],
        );
        assert_abs_diff_eq!(res.x[0], 2.0, epsilon = 1e-4);
    }

    #[test]
    fn restart_escapes_degenerate_simplex() {
        // a valley at x1 = 4 with curvature only along x0 near the start:
        // the first pass stalls along x1, the restart pulls it in
        let valley = |x: &[f64]| (x[0] - 1.0).powi(2) + 0.01 * (x[1] - 4.0).powi(2);
        let degenerate = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 1e-9]];
        let res = nm(2000, 1e-10).minimize(valley, degenerate, &[-10.0, -10.0], &[10.0, 10.0]);
        assert_abs_diff_eq!(res.x[0], 1.0, epsilon = 1e-3);
        assert_abs_diff_eq!(res.x[1], 4.0, epsilon = 1e-2);
    }
}
