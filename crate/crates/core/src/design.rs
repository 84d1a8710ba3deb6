// SPDX-License-Identifier: Apache-2.0

//! Experiment design: the relaxation, pulse and probe durations derived from
//! the a-priori parameter box, plus the checks that keep the ideal forward map
//! globally invertible on that box.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bloch::Parameters;
use crate::error::{Error, Result};

/// Grid resolution used by [`validate_times`] for the transverse Jacobian sign.
pub const DIAGNOSTIC_GRID: usize = 5;

/// A-priori box `lower < theta < upper`, componentwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterBox {
    pub lower: Parameters,
    pub upper: Parameters,
}

impl ParameterBox {
    pub fn new(lower: Parameters, upper: Parameters) -> Result<Self> {
        let b = ParameterBox { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        self.lower.validate().map_err(|e| Error::InvalidBox(e.to_string()))?;
        self.upper.validate().map_err(|e| Error::InvalidBox(e.to_string()))?;
        for ((name, lo), hi) in Parameters::NAMES.iter().zip(self.lower.to_array()).zip(self.upper.to_array()) {
            if !(lo < hi) {
                return Err(Error::InvalidBox(format!("{name}: lower {lo} must be < upper {hi}")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, theta: &Parameters) -> bool {
        let (lo, hi, v) = (self.lower.to_array(), self.upper.to_array(), theta.to_array());
        (0..4).all(|i| lo[i] <= v[i] && v[i] <= hi[i])
    }

    /// Tensor grid with `points` nodes per axis, endpoints included.
    /// A single point per axis yields the box centre.
    pub fn grid(&self, points: usize) -> Vec<Parameters> {
        let (lo, hi) = (self.lower.to_array(), self.upper.to_array());
        let axis = |i: usize| -> Vec<f64> {
            if points <= 1 {
                return vec![0.5 * (lo[i] + hi[i])];
            }
            (0..points)
                .map(|j| lo[i] + (hi[i] - lo[i]) * j as f64 / (points - 1) as f64)
                .collect()
        };
        let axes: Vec<Vec<f64>> = (0..4).map(axis).collect();
        let mut out = Vec::with_capacity(axes.iter().map(Vec::len).product());
        for &a in &axes[0] {
            for &b in &axes[1] {
                for &c in &axes[2] {
                    for &d in &axes[3] {
                        out.push(Parameters::from_array([a, b, c, d]));
                    }
                }
            }
        }
        out
    }
}

/// Durations of the four-observable protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolTimes {
    /// Free relaxation time for `p1`.
    pub t1: f64,
    /// Scaled pulse duration; the physical pulse lasts `tau2 / u_max`.
    pub tau2: f64,
    /// Relaxation between pulse and anti-pulse for `p3` (doubled for `p4`).
    pub t3: f64,
    pub beta: f64,
    /// Branch index: `omega * t3` is meant to lie in `(k pi, (k + 1) pi)`.
    #[serde(default)]
    pub k: u32,
}

impl ProtocolTimes {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("t1", self.t1), ("tau2", self.tau2), ("t3", self.t3)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} = {v} must be > 0")));
            }
        }
        check_beta(self.beta)
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidArgument(format!("beta = {beta} must lie in (0, 1)")));
    }
    Ok(())
}

/// `x` with `e^x (2 - x) = 2`, `x > 0`.
pub fn t1_root() -> f64 {
    let g = |x: f64| x.exp() * (2.0 - x) - 2.0;
    // g > 0 on (0, x*), g < 0 on (x*, 2]; g(1) = e - 2 > 0.
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Relaxation time minimising the worst-case variance of the `gamma1` estimate
/// over `gamma1 <= gamma1_upper`.
pub fn solve_t1(gamma1_upper: f64) -> Result<f64> {
    if !(gamma1_upper > 0.0 && gamma1_upper.is_finite()) {
        return Err(Error::InvalidArgument(format!("gamma1 upper bound {gamma1_upper} must be > 0")));
    }
    Ok(t1_root() / gamma1_upper)
}

/// `(1 - beta) pi / kappa_upper`.
pub fn choose_tau2(kappa_upper: f64, beta: f64) -> Result<f64> {
    if !(kappa_upper > 0.0 && kappa_upper.is_finite()) {
        return Err(Error::InvalidArgument(format!("kappa upper bound {kappa_upper} must be > 0")));
    }
    check_beta(beta)?;
    Ok((1.0 - beta) * PI / kappa_upper)
}

/// Probe time centring `[omega_lower t3, omega_upper t3]` inside `(k pi, (k+1) pi)`.
pub fn choose_t3(omega_lower: f64, omega_upper: f64, k: u32) -> Result<f64> {
    if !(omega_lower > 0.0 && omega_lower < omega_upper && omega_upper.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < omega_lower < omega_upper, got [{omega_lower}, {omega_upper}]"
        )));
    }
    let t3 = (2 * k + 1) as f64 * PI / (omega_lower + omega_upper);
    if k > 0 {
        let (lo, hi) = (omega_lower * t3, omega_upper * t3);
        if !branch_contains(lo, hi, k) {
            return Err(Error::InfeasibleBranch { k, lo, hi });
        }
    }
    Ok(t3)
}

fn branch_contains(lo: f64, hi: f64, k: u32) -> bool {
    lo > k as f64 * PI && hi < (k + 1) as f64 * PI
}

/// Smallest shot count keeping `p2` at least `m` standard deviations away
/// from 0 and 1 over the whole `kappa` range.
pub fn min_shots(m: f64, beta: f64, kappa_ratio: f64) -> Result<u64> {
    if !(m > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma margin m = {m} must be > 0")));
    }
    check_beta(beta)?;
    if !(kappa_ratio > 0.0 && kappa_ratio < 1.0) {
        return Err(Error::InvalidArgument(format!("kappa ratio {kappa_ratio} must lie in (0, 1)")));
    }
    let gap = 1.0 - ((1.0 - beta) * (1.0 - kappa_ratio) * PI / 2.0).sin();
    Ok((m * m / (gap * gap)).ceil() as u64)
}

/// All design times for a box.
pub fn design_times(bx: &ParameterBox, beta: f64, k: u32) -> Result<ProtocolTimes> {
    bx.validate()?;
    Ok(ProtocolTimes {
        t1: solve_t1(bx.upper.gamma1)?,
        tau2: choose_tau2(bx.upper.kappa, beta)?,
        t3: choose_t3(bx.lower.omega, bx.upper.omega, k)?,
        beta,
        k,
    })
}

/// Determinant of the Jacobian of `(omega, gamma2) -> (q3, q4)`, where
/// `q3 = E cos(omega t3)`, `q4 = E^2 cos(2 omega t3)`, `E = exp(-(gamma1 + 4 gamma2) t3 / 2)`.
/// Built from the four partial derivatives, not from the simplified product.
pub fn transverse_jacobian_det(theta: &Parameters, t3: f64) -> f64 {
    let e = (-theta.transverse_rate() * t3).exp();
    let (s1, c1) = (theta.omega * t3).sin_cos();
    let (s2, c2) = (2.0 * theta.omega * t3).sin_cos();
    let q3 = e * c1;
    let q4 = e * e * c2;
    let dq3_dw = -t3 * e * s1;
    let dq3_dg = -2.0 * t3 * q3;
    let dq4_dw = -2.0 * t3 * e * e * s2;
    let dq4_dg = -4.0 * t3 * q4;
    dq3_dw * dq4_dg - dq3_dg * dq4_dw
}

/// Outcome of [`validate_times`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeDiagnostics {
    /// `kappa_upper * tau2 < pi`.
    pub pulse_angle_ok: bool,
    pub max_pulse_angle: f64,
    /// `[omega_lower t3, omega_upper t3]` strictly inside `(k pi, (k+1) pi)`.
    pub omega_branch_ok: bool,
    pub omega_phase_range: (f64, f64),
    /// Transverse Jacobian determinant keeps one sign over the grid.
    pub jacobian_sign_ok: bool,
    pub jacobian_det_range: (f64, f64),
}

impl TimeDiagnostics {
    pub fn all_pass(&self) -> bool {
        self.pulse_angle_ok && self.omega_branch_ok && self.jacobian_sign_ok
    }

    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.pulse_angle_ok {
            out.push("kappa_upper * tau2 >= pi");
        }
        if !self.omega_branch_ok {
            out.push("omega * t3 range leaves its branch");
        }
        if !self.jacobian_sign_ok {
            out.push("transverse Jacobian changes sign");
        }
        out
    }
}

/// Sufficient conditions for the ideal forward map to be a diffeomorphism on the box.
pub fn validate_times(bx: &ParameterBox, times: &ProtocolTimes) -> TimeDiagnostics {
    let max_pulse_angle = bx.upper.kappa * times.tau2;
    let (lo, hi) = (bx.lower.omega * times.t3, bx.upper.omega * times.t3);
    let (mut dmin, mut dmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for theta in bx.grid(DIAGNOSTIC_GRID) {
        let d = transverse_jacobian_det(&theta, times.t3);
        dmin = dmin.min(d);
        dmax = dmax.max(d);
    }
    TimeDiagnostics {
        pulse_angle_ok: max_pulse_angle < PI,
        max_pulse_angle,
        omega_branch_ok: branch_contains(lo, hi, times.k),
        omega_phase_range: (lo, hi),
        jacobian_sign_ok: (dmin < 0.0 && dmax < 0.0) || (dmin > 0.0 && dmax > 0.0),
        jacobian_det_range: (dmin, dmax),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    pub(crate) fn nominal_box() -> ParameterBox {
        ParameterBox::new(
            Parameters::new(0.001, 0.01, 0.002, 1.0).unwrap(),
            Parameters::new(0.003, 0.04, 0.005, 4.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn t1_root_residual() {
        let x = t1_root();
        assert!((x.exp() * (2.0 - x) - 2.0).abs() < 1e-10);
        assert_abs_diff_eq!(x, 1.5936, epsilon = 1e-4);
        assert_abs_diff_eq!(solve_t1(1.0).unwrap(), x, epsilon = 1e-15);
        let t1 = solve_t1(0.003).unwrap();
        assert!((531.1..531.3).contains(&t1), "t1 = {t1}");
        for c in [0.1, 2.0, 37.0] {
            assert_abs_diff_eq!(solve_t1(c * 0.003).unwrap(), t1 / c, epsilon = 1e-9 * t1);
        }
        assert!(solve_t1(0.0).is_err());
    }

    #[test]
    fn tau2_rule() {
        assert_abs_diff_eq!(choose_tau2(0.04, 0.2).unwrap(), 62.83185, epsilon = 1e-4);
        assert_abs_diff_eq!(choose_tau2(PI, 1e-12).unwrap(), 1.0, epsilon = 1e-9);
        assert!(choose_tau2(0.04, 0.0).is_err());
        assert!(choose_tau2(0.04, 1.0).is_err());
    }

    #[test]
    fn t3_rule() {
        assert_abs_diff_eq!(choose_t3(1.0, 4.0, 0).unwrap(), PI / 5.0, epsilon = 1e-15);
        assert!(matches!(choose_t3(1.0, 4.0, 1), Err(Error::InfeasibleBranch { k: 1, .. })));
        let t3 = choose_t3(9.0, 11.0, 3).unwrap();
        assert_abs_diff_eq!(t3, 7.0 * PI / 20.0, epsilon = 1e-15);
        assert!(9.0 * t3 > 3.0 * PI && 11.0 * t3 < 4.0 * PI);
        assert!(choose_t3(4.0, 1.0, 0).is_err());
    }

    #[test]
    fn shot_bound() {
        let n = min_shots(5.0, 0.1, 0.1).unwrap();
        assert!((12_700..12_900).contains(&n), "n = {n}");
        // 25 / (1 - sin(0.8 * 0.75 * pi / 2))^2
        let n2 = min_shots(5.0, 0.2, 0.25).unwrap();
        let direct = 25.0 / (1.0 - (0.6 * PI / 2.0).sin()).powi(2);
        assert_eq!(n2, direct.ceil() as u64);
        assert!(n2 > 25);
        assert_eq!(min_shots(5.0, 0.2, 1.0 - 1e-12).unwrap(), 26);
        assert!(min_shots(5.0, 0.2, 1.0).is_err());
    }

    #[test]
    fn nominal_design_validates() {
        let bx = nominal_box();
        let times = design_times(&bx, 0.2, 0).unwrap();
        let diag = validate_times(&bx, &times);
        assert!(diag.all_pass(), "{diag:?}");
        assert!(diag.jacobian_det_range.1 < 0.0);

        let bad_pulse = ProtocolTimes { tau2: 2.0 * PI / 0.04, ..times };
        let d = validate_times(&bx, &bad_pulse);
        assert!(!d.pulse_angle_ok && d.omega_branch_ok);

        let bad_probe = ProtocolTimes { t3: PI / 1.0, ..times };
        assert!(!validate_times(&bx, &bad_probe).omega_branch_ok);
    }

    #[test]
    fn det_matches_closed_expression() {
        let bx = nominal_box();
        let t3 = PI / 5.0;
        for theta in bx.grid(4) {
            let closed = -4.0 * t3 * t3 * (-3.0 * theta.transverse_rate() * t3).exp() * (theta.omega * t3).sin();
            assert_abs_diff_eq!(transverse_jacobian_det(&theta, t3), closed, epsilon = 1e-12);
        }
    }

    #[test]
    fn grid_shape() {
        let g = nominal_box().grid(5);
        assert_eq!(g.len(), 625);
        assert_eq!(g[0], nominal_box().lower);
        assert_eq!(g[624], nominal_box().upper);
        assert_eq!(nominal_box().grid(1).len(), 1);
    }

    #[test]
    fn box_validation() {
        let p = Parameters::new(1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(ParameterBox::new(p, p).is_err());
    }

    proptest! {
        #[test]
        fn design_respects_invariants(g in 1e-4..1.0f64, gw in 1.01..10.0f64,
                                      k in 1e-3..1.0f64, kw in 1.01..10.0f64,
                                      w in 0.1..10.0f64, ww in 1.01..10.0f64,
                                      beta in 0.01..0.99f64) {
            let bx = ParameterBox::new(
                Parameters::new(g, k, g, w).unwrap(),
                Parameters::new(g * gw, k * kw, g * gw, w * ww).unwrap(),
            ).unwrap();
            let times = design_times(&bx, beta, 0).unwrap();
            prop_assert!(times.t1 > 0.0 && times.tau2 > 0.0 && times.t3 > 0.0);
            prop_assert!(bx.upper.kappa * times.tau2 < PI);
            prop_assert!(bx.lower.omega * times.t3 > 0.0 && bx.upper.omega * times.t3 < PI);
            prop_assert!(validate_times(&bx, &times).all_pass());
        }
    }
}
