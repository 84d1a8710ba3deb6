// SPDX-License-Identifier: Apache-2.0

//! Closed-form inversion of the ideal forward map and first-order uncertainty.
//!
//! The estimate is `theta_hat = F0^{-1}(p_hat)`. Its statistical spread is the
//! Delta-method covariance `J diag(p(1-p)) J^T / n`, with `J` the Jacobian of
//! the inverse map; the systematic shift caused by finite pulses is bounded by
//! the box computed in [`bias`]. The two combine into the region
//! `theta_hat + ellipsoid / sqrt(n) + box / u_max`.

pub mod bias;
mod region;

pub use bias::{bias_box, bias_box_delta, bias_constants, forward_jacobian, BiasConstants};
pub use region::{Marginal2d, EstimateReport, REPORT_VERSION};

use std::f64::consts::PI;

use nalgebra::{Matrix4, SymmetricEigen};

use crate::bloch::Parameters;
use crate::design::ProtocolTimes;
use crate::error::{Error, Result};
use crate::forward::{virtual_observables, ObservableVector};
use crate::measurement::EmpiricalFrequencies;

/// Slack before an out-of-range `arccos` argument becomes an error.
pub const ARCCOS_TOL: f64 = 1e-9;
/// Largest accepted covariance condition number.
pub const MAX_CONDITION: f64 = 1e14;

fn checked_acos(x: f64, what: &str) -> Result<f64> {
    if !(x.abs() <= 1.0 + ARCCOS_TOL) {
        return Err(Error::Domain(format!("{what}: arccos argument {x} outside [-1, 1]")));
    }
    Ok(x.clamp(-1.0, 1.0).acos())
}

/// Inverts the ideal forward map at the clamped frequencies.
pub fn invert_ideal(p_hat: &EmpiricalFrequencies, times: &ProtocolTimes) -> Result<Parameters> {
    invert_observables(&p_hat.p_hat, times)
}

/// Inverts the ideal forward map. The result is not forced into the positive
/// orthant: noisy data can produce e.g. a negative dephasing estimate.
pub fn invert_observables(p: &ObservableVector, times: &ProtocolTimes) -> Result<Parameters> {
    for (j, pj) in p.0.iter().enumerate() {
        if !(*pj > 0.0 && *pj < 1.0) {
            return Err(Error::Domain(format!("p{} = {pj} outside (0, 1)", j + 1)));
        }
    }
    let gamma1 = -p.p1().ln() / times.t1;
    let kappa = checked_acos(2.0 * p.p2() - 1.0, "p2")? / times.tau2;

    let q = virtual_observables(p, times)?;
    let decay = q.transverse_decay();
    if !(decay > 0.0) {
        return Err(Error::Domain(format!("observables p3, p4 give 2 q3^2 - q4 = {decay} <= 0")));
    }
    let gamma2 = -(decay / p.p1().powf(times.t3 / times.t1)).ln() / (4.0 * times.t3);

    let a = checked_acos(q.q3 / decay.sqrt(), "q3 / sqrt(2 q3^2 - q4)")?;
    // branch k: phase in (k pi, (k+1) pi); solutions of cos(phase) = cos(a) are +-a + 2 pi m
    let k = times.k as f64;
    let phase = if times.k.is_multiple_of(2) { k * PI + a } else { (k + 1.0) * PI - a };
    Ok(Parameters { gamma1, kappa, gamma2, omega: phase / times.t3 })
}

/// Central-difference Jacobian of the inverse map; rows `(gamma1, kappa, gamma2, omega)`,
/// columns `(p1, .., p4)`.
pub fn jacobian_inverse_map(p_hat: &EmpiricalFrequencies, times: &ProtocolTimes) -> Result<Matrix4<f64>> {
    jacobian_inverse_at(&p_hat.p_hat, times)
}

pub fn jacobian_inverse_at(p: &ObservableVector, times: &ProtocolTimes) -> Result<Matrix4<f64>> {
    let mut jac = Matrix4::zeros();
    for j in 0..4 {
        let h = (1e-6 * p.0[j]).max(1e-6);
        let mut up = *p;
        let mut down = *p;
        up.0[j] += h;
        down.0[j] -= h;
        let hi = invert_observables(&up, times)?.to_array();
        let lo = invert_observables(&down, times)?.to_array();
        for i in 0..4 {
            jac[(i, j)] = (hi[i] - lo[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Delta-method covariance of `sqrt(n) (theta_hat - theta)`.
pub fn covariance(p_hat: &EmpiricalFrequencies, times: &ProtocolTimes) -> Result<Matrix4<f64>> {
    covariance_at(&p_hat.p_hat, times)
}

pub fn covariance_at(p: &ObservableVector, times: &ProtocolTimes) -> Result<Matrix4<f64>> {
    let jac = jacobian_inverse_at(p, times)?;
    let d = Matrix4::from_diagonal(&p.0.map(|pj| pj * (1.0 - pj)).into());
    let s = jac * d * jac.transpose();
    Ok(0.5 * (s + s.transpose()))
}

/// CDF of the chi-squared law with four degrees of freedom.
pub fn chi2_cdf_4dof(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    1.0 - (-0.5 * x).exp() * (1.0 + 0.5 * x)
}

/// Quantile of the four-dof chi-squared law, by bisection on its closed-form CDF.
pub fn chi2_quantile_4dof(prob: f64) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::InvalidArgument(format!("probability {prob} must lie in (0, 1)")));
    }
    let mut hi = 1.0;
    while chi2_cdf_4dof(hi) < prob {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-12 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if chi2_cdf_4dof(mid) < prob {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `{delta : delta^T sigma^{-1} delta <= radius2}` with `radius2 = chi2 / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceEllipsoid {
    pub sigma: Matrix4<f64>,
    pub precision: Matrix4<f64>,
    pub chi2: f64,
    pub radius2: f64,
}

impl ConfidenceEllipsoid {
    pub fn contains(&self, delta: &[f64; 4]) -> bool {
        self.mahalanobis2(delta) <= self.radius2
    }

    pub fn mahalanobis2(&self, delta: &[f64; 4]) -> f64 {
        let d = nalgebra::Vector4::from(*delta);
        (d.transpose() * self.precision * d)[(0, 0)]
    }

    /// Half-extent of the ellipsoid along coordinate `i`.
    pub fn half_extent(&self, i: usize) -> f64 {
        (self.radius2 * self.sigma[(i, i)]).sqrt()
    }
}

/// Ellipsoid for risk `alpha` at `n` shots per observable.
pub fn confidence_ellipsoid(sigma_hat: &Matrix4<f64>, alpha: f64, n: u64) -> Result<ConfidenceEllipsoid> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("shot count n must be >= 1".into()));
    }
    let eig = SymmetricEigen::new(*sigma_hat).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(cond < MAX_CONDITION) {
        return Err(Error::SingularCovariance(cond));
    }
    let precision = sigma_hat.try_inverse().ok_or(Error::SingularCovariance(cond))?;
    let chi2 = chi2_quantile_4dof(1.0 - alpha)?;
    Ok(ConfidenceEllipsoid {
        sigma: *sigma_hat,
        precision: 0.5 * (precision + precision.transpose()),
        chi2,
        radius2: chi2 / n as f64,
    })
}

/// Smallest `(d - delta)^T P (d - delta)` over `|delta_i| <= half_widths[i]`.
///
/// Exact: the minimiser of a strictly convex quadratic over a box sits in
/// the relative interior of one face, where it is the unconstrained minimiser
/// on that face's affine hull. All 3^4 faces are tried.
pub fn box_quadratic_min(precision: &Matrix4<f64>, d: &[f64; 4], half_widths: &[f64; 4]) -> f64 {
    let mut best = f64::INFINITY;
    for code in 0..81usize {
        // 0 = free, 1 = at -w, 2 = at +w
        let mut state = [0u8; 4];
        let mut c = code;
        for s in state.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        let free: Vec<usize> = (0..4).filter(|&i| state[i] == 0).collect();
        let mut delta = [0.0; 4];
        for i in 0..4 {
            delta[i] = match state[i] {
                1 => -half_widths[i],
                2 => half_widths[i],
                _ => 0.0,
            };
        }
        if !free.is_empty() {
            // P_FF (delta_F - d_F) = -P_FX (delta_X - d_X)
            let m = free.len();
            let pff = nalgebra::DMatrix::from_fn(m, m, |a, b| precision[(free[a], free[b])]);
            let rhs = nalgebra::DVector::from_fn(m, |a, _| {
                -(0..4)
                    .filter(|x| state[*x] != 0)
                    .map(|x| precision[(free[a], x)] * (delta[x] - d[x]))
                    .sum::<f64>()
            });
            let Some(sol) = pff.lu().solve(&rhs) else { continue };
            let mut feasible = true;
            for (a, &i) in free.iter().enumerate() {
                let v = d[i] + sol[a];
                if v.abs() > half_widths[i] * (1.0 + 1e-12) {
                    feasible = false;
                    break;
                }
                delta[i] = v;
            }
            if !feasible {
                continue;
            }
        }
        let r = nalgebra::Vector4::from_fn(|i, _| d[i] - delta[i]);
        best = best.min((r.transpose() * precision * r)[(0, 0)]);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::forward_ideal;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn theta() -> Parameters {
        Parameters::new(0.002, 0.015, 0.003, 2.0).unwrap()
    }

    fn times() -> ProtocolTimes {
        ProtocolTimes { t1: 530.0, tau2: 0.8 * PI / 0.04, t3: PI / 5.0, beta: 0.2, k: 0 }
    }

    fn freq(p: [f64; 4]) -> EmpiricalFrequencies {
        EmpiricalFrequencies { p_hat: ObservableVector(p), n: 1_000_000 }
    }

    #[test]
    fn inversion_of_rounded_observables() {
        let est = invert_ideal(&freq([0.34646, 0.79390, 0.77285, 0.40914]), &times()).unwrap();
        let want = theta().to_array();
        for (g, w) in est.to_array().iter().zip(want) {
            assert!((g - w).abs() < 1e-4, "{g} vs {w}");
        }
        let exact = invert_observables(&forward_ideal(&theta(), &times()), &times()).unwrap();
        for (g, w) in exact.to_array().iter().zip(want) {
            assert!((g - w).abs() < 1e-12 * w.abs().max(1.0));
        }
    }

    #[test]
    fn inversion_trivial_cases() {
        let t = ProtocolTimes { t1: 1.0, ..times() };
        let p = forward_ideal(&theta(), &t);
        assert_abs_diff_eq!(invert_observables(&p, &t).unwrap().gamma1, 0.002, epsilon = 1e-15);
        // p2 = 1/2 makes the transverse extraction singular, but kappa alone is arccos(0) / tau2
        assert_abs_diff_eq!(
            checked_acos(2.0 * 0.5 - 1.0, "p2").unwrap() / t.tau2,
            PI / (2.0 * t.tau2),
            epsilon = 1e-15
        );
        assert!(matches!(invert_observables(&ObservableVector([0.3, 0.5, 0.5, 0.5]), &t), Err(Error::DegenerateObservable(_))));
        assert!(invert_observables(&ObservableVector([0.0, 0.7, 0.5, 0.5]), &t).is_err());
    }

    #[test]
    fn inversion_domain_errors() {
        // q3 = 0, q4 = 0.5 -> 2 q3^2 - q4 < 0
        let t = times();
        let p1 = 0.35f64;
        let p2 = 0.8;
        let d = 2.0 * p2 * (1.0 - p2);
        let e3 = p1.powf(t.t3 / t.t1);
        let e6 = p1.powf(2.0 * t.t3 / t.t1);
        let p3 = 1.0 - p2 - p2 * (1.0 - 2.0 * p2) * e3;
        let p4 = 0.5 * d + 1.0 - p2 - p2 * (1.0 - 2.0 * p2) * e6;
        let err = invert_observables(&ObservableVector([p1, p2, p3, p4]), &t).unwrap_err();
        assert!(matches!(err, Error::Domain(ref m) if m.contains("p3, p4")));
        // q3 = 0.9, q4 = 0.9 -> ratio 0.9 / sqrt(0.72) > 1
        let p3 = 0.9 * d + 1.0 - p2 - p2 * (1.0 - 2.0 * p2) * e3;
        let p4 = 0.9 * d + 1.0 - p2 - p2 * (1.0 - 2.0 * p2) * e6;
        let err = invert_observables(&ObservableVector([p1, p2, p3, p4]), &t).unwrap_err();
        assert!(matches!(err, Error::Domain(ref m) if m.contains("arccos")));
    }

    #[test]
    fn higher_branches_invert() {
        let t = ProtocolTimes { t3: 7.0 * PI / 20.0, k: 3, ..times() };
        for omega in [9.2, 10.0, 10.9] {
            let th = Parameters { omega, ..theta() };
            let est = invert_observables(&forward_ideal(&th, &t), &t).unwrap();
            assert_abs_diff_eq!(est.omega, omega, epsilon = 1e-10);
        }
        let t1 = ProtocolTimes { t3: 0.3 * PI, k: 1, ..times() };
        for omega in [4.0, 5.0, 6.0] {
            let th = Parameters { omega, ..theta() };
            let est = invert_observables(&forward_ideal(&th, &t1), &t1).unwrap();
            assert_abs_diff_eq!(est.omega, omega, epsilon = 1e-10);
        }
        let t2 = ProtocolTimes { t3: 5.0 * PI / 20.0, k: 2, ..times() };
        for omega in [8.5, 10.0, 11.5] {
            let th = Parameters { omega, ..theta() };
            let est = invert_observables(&forward_ideal(&th, &t2), &t2).unwrap();
            assert_abs_diff_eq!(est.omega, omega, epsilon = 1e-10);
        }
    }

    #[test]
    fn analytic_jacobian_entries() {
        let f = freq([0.34646, 0.79390, 0.77285, 0.40914]);
        let j = jacobian_inverse_map(&f, &times()).unwrap();
        let kappa = invert_ideal(&f, &times()).unwrap().kappa;
        assert_abs_diff_eq!(j[(0, 0)], -1.0 / (530.0 * 0.34646), epsilon = 1e-7);
        assert_abs_diff_eq!(j[(0, 0)], -5.446e-3, epsilon = 1e-6);
        let want = -2.0 / (times().tau2 * (kappa * times().tau2).sin());
        assert_abs_diff_eq!(j[(1, 1)], want, epsilon = 1e-7);
        assert_abs_diff_eq!(j[(1, 1)], -3.9346e-2, epsilon = 1e-5);
        for c in 1..4 {
            assert_eq!(j[(0, c)], 0.0);
        }
        for c in [0, 2, 3] {
            assert_eq!(j[(1, c)], 0.0);
        }
    }

    #[test]
    fn covariance_closed_form_entries() {
        let f = freq([0.34646, 0.79390, 0.77285, 0.40914]);
        let s = covariance(&f, &times()).unwrap();
        assert_abs_diff_eq!(s[(0, 0)], 0.65354 / (530.0f64.powi(2) * 0.34646), epsilon = 1e-10);
        assert_abs_diff_eq!(s[(0, 0)], 6.716e-6, epsilon = 2e-9);
        // 4 p2 (1 - p2) = sin^2(kappa tau2) on exact data
        let exact = covariance_at(&forward_ideal(&theta(), &times()), &times()).unwrap();
        assert_abs_diff_eq!(exact[(1, 1)], 1.0 / times().tau2.powi(2), epsilon = 1e-10);
        assert_abs_diff_eq!(exact[(0, 0)], ((0.002f64 * 530.0).exp() - 1.0) / 530.0f64.powi(2), epsilon = 1e-12);
        assert!(SymmetricEigen::new(s).eigenvalues.min() >= -1e-12);
        assert_eq!(s, s.transpose());
    }

    #[test]
    fn chi2_quantiles() {
        let q99 = chi2_quantile_4dof(0.99).unwrap();
        assert_abs_diff_eq!(q99, 13.2767, epsilon = 1e-3);
        assert!((chi2_cdf_4dof(q99) - 0.99).abs() < 1e-8);
        let q95 = chi2_quantile_4dof(0.95).unwrap();
        assert_abs_diff_eq!(q95, 9.4877, epsilon = 1e-3);
        assert!(chi2_quantile_4dof(1e-12).unwrap() < 1e-4);
        assert!(chi2_quantile_4dof(1.0).is_err());
        assert!(chi2_quantile_4dof(0.0).is_err());
    }

    #[test]
    fn ellipsoid_scaling() {
        let e = confidence_ellipsoid(&Matrix4::identity(), 0.01, 1).unwrap();
        assert_abs_diff_eq!(e.radius2, 13.2767, epsilon = 1e-3);
        let e4 = confidence_ellipsoid(&Matrix4::identity(), 0.01, 4).unwrap();
        assert_abs_diff_eq!(e4.half_extent(2), 0.5 * e.half_extent(2), epsilon = 1e-14);
        let diag = Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, 4.0, 9.0, 16.0));
        let ed = confidence_ellipsoid(&diag, 0.01, 100).unwrap();
        assert_abs_diff_eq!(ed.half_extent(3), (e.chi2 * 16.0 / 100.0).sqrt(), epsilon = 1e-14);
        assert!(ed.contains(&[0.0, 0.0, 0.0, ed.half_extent(3) * 0.999]));
        assert!(!ed.contains(&[0.0, 0.0, 0.0, ed.half_extent(3) * 1.001]));
        let singular = Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, 1.0, 1.0, 0.0));
        assert!(matches!(confidence_ellipsoid(&singular, 0.01, 1), Err(Error::SingularCovariance(_))));
    }

    fn brute_box_min(p: &Matrix4<f64>, d: &[f64; 4], w: &[f64; 4]) -> f64 {
        let steps = 24;
        let mut best = f64::INFINITY;
        let grid = |i: usize, k: usize| -w[i] + 2.0 * w[i] * k as f64 / steps as f64;
        for a in 0..=steps {
            for b in 0..=steps {
                for c in 0..=steps {
                    for e in 0..=steps {
                        let r = nalgebra::Vector4::new(d[0] - grid(0, a), d[1] - grid(1, b), d[2] - grid(2, c), d[3] - grid(3, e));
                        best = best.min((r.transpose() * p * r)[(0, 0)]);
                    }
                }
            }
        }
        best
    }

    #[test]
    fn box_min_against_grid() {
        #[rustfmt::skip]
        let a = Matrix4::new(
            2.0, 0.3, -0.4, 0.1,
            0.3, 1.5, 0.2, -0.3,
            -0.4, 0.2, 1.0, 0.25,
            0.1, -0.3, 0.25, 0.8,
        );
        let p = a * a.transpose();
        let d = [0.7, -1.2, 0.4, 2.0];
        let w = [0.0, 0.5, 0.3, 0.6];
        let exact = box_quadratic_min(&p, &d, &w);
        let brute = brute_box_min(&p, &d, &w);
        assert!(exact <= brute + 1e-12);
        assert!(brute - exact < 5e-3 * brute.max(1.0));
        assert_eq!(box_quadratic_min(&p, &[0.0, 0.1, -0.2, 0.3], &[0.0, 0.5, 0.3, 0.6]), 0.0);
        let plain = box_quadratic_min(&p, &d, &[0.0; 4]);
        let r = nalgebra::Vector4::from(d);
        assert_abs_diff_eq!(plain, (r.transpose() * p * r)[(0, 0)], epsilon = 1e-12);
    }

    fn theta_strategy() -> impl Strategy<Value = Parameters> {
        (0.001..0.003f64, 0.01..0.04f64, 0.002..0.005f64, 1.0..4.0f64)
            .prop_map(|(a, b, c, d)| Parameters::from_array([a, b, c, d]))
    }

    proptest! {
        #[test]
        fn round_trip(th in theta_strategy()) {
            let est = invert_observables(&forward_ideal(&th, &times()), &times()).unwrap();
            for (g, w) in est.to_array().iter().zip(th.to_array()) {
                prop_assert!((g - w).abs() <= 1e-10 * w.abs());
            }
        }

        #[test]
        fn inverse_jacobian_inverts_forward_jacobian(th in theta_strategy()) {
            let fwd = forward_jacobian(&th, &times());
            let inv = jacobian_inverse_at(&forward_ideal(&th, &times()), &times()).unwrap();
            let prod = inv * fwd;
            prop_assert!((prod - Matrix4::identity()).amax() < 1e-5, "{prod}");
        }
    }
}
