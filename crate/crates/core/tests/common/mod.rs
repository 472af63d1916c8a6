//! Shared fixtures and independent oracles for the acceptance suite.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

use seismon::model::{BuildingModel, DampingSpec};
use seismon::observer::{FeedbackGain, SensorLayout};

/// Print one PASS/FAIL line and gate the test on it.
pub fn check(name: &str, pass: bool, detail: &str) {
    if pass {
        println!("PASS {name}: {detail}");
    } else {
        println!("FAIL {name}: {detail}");
        panic!("{name}: {detail}");
    }
}

pub fn three_story_linear() -> BuildingModel {
    let mut m = BuildingModel::linear(
        vec![1.0e5, 1.0e5, 1.0e5],
        vec![8.0e7, 7.0e7, 6.0e7],
        vec![3.0, 3.0, 3.0],
    );
    m.damping = Some(DampingSpec::Rayleigh {
        modes: (1, 2),
        ratios: (0.05, 0.05),
    });
    m
}

/// Steady-state displacement-error covariance of the observer error
/// dynamics driven by white process and measurement noise, solved through
/// the Kronecker form of the Lyapunov equation. Densities are two-sided in
/// rad/s, so a density `phi` enters as delta-correlation intensity
/// `2*pi*phi`.
#[allow(clippy::too_many_arguments)]
pub fn lyapunov_displacement_cov(
    mass: &DMatrix<f64>,
    c_obs: &DMatrix<f64>,
    stiffness: &DMatrix<f64>,
    b2: &DVector<f64>,
    layout: &SensorLayout,
    gain: &FeedbackGain,
    phi_ww: f64,
    phi_vv: f64,
) -> DMatrix<f64> {
    let n = mass.nrows();
    let m_inv = mass.clone().try_inverse().unwrap();
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        a[(i, n + i)] = 1.0;
    }
    let mk = &m_inv * stiffness;
    let mc = &m_inv * c_obs;
    for i in 0..n {
        for j in 0..n {
            a[(n + i, j)] = -mk[(i, j)];
            a[(n + i, n + j)] = -mc[(i, j)];
        }
    }

    let bw = &m_inv * b2;
    let mut q: DMatrix<f64> = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            q[(n + i, n + j)] += 2.0 * PI * phi_ww * bw[i] * bw[j];
        }
    }
    for (col, &dof) in layout.measured_dofs.iter().enumerate() {
        let mut bv = DVector::zeros(n);
        bv[dof - 1] = gain.e_diag[col];
        let bv = &m_inv * bv;
        for i in 0..n {
            for j in 0..n {
                q[(n + i, n + j)] += 2.0 * PI * phi_vv * bv[i] * bv[j];
            }
        }
    }

    let dim = 2 * n;
    let eye = DMatrix::<f64>::identity(dim, dim);
    let lhs = eye.kronecker(&a) + a.kronecker(&eye);
    let mut rhs = DVector::zeros(dim * dim);
    for c in 0..dim {
        for r in 0..dim {
            rhs[c * dim + r] = -q[(r, c)];
        }
    }
    let sol = lhs.lu().solve(&rhs).unwrap();
    DMatrix::from_fn(n, n, |i, j| sol[j * dim + i])
}
