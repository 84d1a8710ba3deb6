// SPDX-License-Identifier: Apache-2.0

//! Forward maps from parameters to the four measured probabilities.
//!
//! Every sequence starts in the excited state:
//!
//! * `p1`: free relaxation for `t1`;
//! * `p2`: one saturated pulse;
//! * `p3`, `p4`: pulse, relaxation for `t3` (resp. `2 t3`), opposite pulse.
//!
//! [`forward_finite`] propagates the exact dynamics with amplitude `u_max`;
//! [`forward_ideal`] is the closed form of the `u_max -> infinity` limit.

use serde::{Deserialize, Serialize};

use crate::bloch::{readout_probability, segment_flow, BlochVector, Parameters};
use crate::design::ProtocolTimes;
use crate::error::{Error, Result};

/// Distance from the singular values `{0, 1/2, 1}` below which `p2` is rejected.
pub const P2_DEGENERACY_TOL: f64 = 1e-9;

/// Probabilities `(p1, p2, p3, p4)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableVector(pub [f64; 4]);

impl ObservableVector {
    pub fn p1(&self) -> f64 {
        self.0[0]
    }
    pub fn p2(&self) -> f64 {
        self.0[1]
    }
    pub fn p3(&self) -> f64 {
        self.0[2]
    }
    pub fn p4(&self) -> f64 {
        self.0[3]
    }

    pub fn max_abs_diff(&self, other: &ObservableVector) -> f64 {
        self.0.iter().zip(other.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// `q3 = E cos(omega t3)`, `q4 = E^2 cos(2 omega t3)` with `E = exp(-(gamma1 + 4 gamma2) t3 / 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VirtualObservables {
    pub q3: f64,
    pub q4: f64,
}

impl VirtualObservables {
    /// `2 q3^2 - q4`, equal to `exp(-(gamma1 + 4 gamma2) t3)` on exact data.
    pub fn transverse_decay(&self) -> f64 {
        2.0 * self.q3 * self.q3 - self.q4
    }
}

/// Exact observables under pulses of amplitude `u_max`.
pub fn forward_finite(theta: &Parameters, times: &ProtocolTimes, u_max: f64) -> Result<ObservableVector> {
    if !(u_max > 0.0 && u_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("u_max = {u_max} must be > 0")));
    }
    times.validate()?;
    let dt = times.tau2 / u_max;
    let plus = segment_flow(theta, u_max, dt)?;
    let minus = segment_flow(theta, -u_max, dt)?;
    let relax1 = segment_flow(theta, 0.0, times.t1)?;
    let relax3 = segment_flow(theta, 0.0, times.t3)?;
    let relax6 = segment_flow(theta, 0.0, 2.0 * times.t3)?;

    let v0 = BlochVector::EXCITED;
    let after_plus = plus.apply(&v0);
    let echo = |relax: &crate::bloch::AffineFlow| minus.apply(&relax.apply(&after_plus));
    Ok(ObservableVector([
        readout_probability(&relax1.apply(&v0))?,
        readout_probability(&after_plus)?,
        readout_probability(&echo(&relax3))?,
        readout_probability(&echo(&relax6))?,
    ]))
}

/// Closed-form observables in the ideal-pulse limit.
pub fn forward_ideal(theta: &Parameters, times: &ProtocolTimes) -> ObservableVector {
    let c = (theta.kappa * times.tau2).cos();
    ObservableVector([
        (-theta.gamma1 * times.t1).exp(),
        0.5 * (1.0 + c),
        echo_probability(theta, c, times.t3),
        echo_probability(theta, c, 2.0 * times.t3),
    ])
}

/// Excited-state probability after ideal pulse, relaxation for `t`, ideal anti-pulse:
/// `(1 - c (1 - e) + e c^2 + s^2 E cos(omega t)) / 2` with `c = cos(kappa tau2)`,
/// `e = exp(-gamma1 t)`, `E = exp(-(gamma1 + 4 gamma2) t / 2)`.
pub fn pulse_relax_pulse_prob(theta: &Parameters, tau2: f64, t: f64) -> Result<f64> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeDuration(t));
    }
    Ok(echo_probability(theta, (theta.kappa * tau2).cos(), t))
}

fn echo_probability(theta: &Parameters, c: f64, t: f64) -> f64 {
    let e = (-theta.gamma1 * t).exp();
    let big_e = (-theta.transverse_rate() * t).exp();
    let s2 = 1.0 - c * c;
    0.5 * (1.0 - c * (1.0 - e) + e * c * c + s2 * big_e * (theta.omega * t).cos())
}

/// Extracts `(q3, q4)` from the four probabilities.
pub fn virtual_observables(p: &ObservableVector, times: &ProtocolTimes) -> Result<VirtualObservables> {
    let p2 = p.p2();
    if [0.0, 0.5, 1.0].iter().any(|s| (p2 - s).abs() < P2_DEGENERACY_TOL) || !p2.is_finite() {
        return Err(Error::DegenerateObservable(p2));
    }
    if !(p.p1() > 0.0) {
        return Err(Error::Domain(format!("p1 = {} must be > 0", p.p1())));
    }
    let denom = 2.0 * p2 * (1.0 - p2);
    let lift = |pj: f64, ratio: f64| (pj + p2 - 1.0 + p2 * (1.0 - 2.0 * p2) * p.p1().powf(ratio)) / denom;
    Ok(VirtualObservables {
        q3: lift(p.p3(), times.t3 / times.t1),
        q4: lift(p.p4(), 2.0 * times.t3 / times.t1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::{ideal_pulse, relax_closed_form, PulseSign};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn theta() -> Parameters {
        Parameters::new(0.002, 0.015, 0.003, 2.0).unwrap()
    }

    fn times() -> ProtocolTimes {
        ProtocolTimes { t1: 530.0, tau2: 0.8 * PI / 0.04, t3: PI / 5.0, beta: 0.2, k: 0 }
    }

    fn composed(theta: &Parameters, tau2: f64, t: f64) -> f64 {
        let a = theta.kappa * tau2;
        let v = ideal_pulse(&BlochVector::EXCITED, PulseSign::Plus, a);
        let v = relax_closed_form(&v, t, theta).unwrap();
        let v = ideal_pulse(&v, PulseSign::Minus, a);
        readout_probability(&v).unwrap()
    }

    #[test]
    fn ideal_nominal_values() {
        let p = forward_ideal(&theta(), &times());
        let want = [0.34646, 0.79390, 0.77285, 0.40914];
        for (got, want) in p.0.iter().zip(want) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-5);
        }
        assert_abs_diff_eq!(p.p1(), (-1.06f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn ideal_limits() {
        let slow = Parameters { gamma1: 1e-300, ..theta() };
        assert_abs_diff_eq!(forward_ideal(&slow, &times()).p1(), 1.0, epsilon = 1e-12);
        let quarter = ProtocolTimes { tau2: PI / 2.0 / 0.015, ..times() };
        assert_abs_diff_eq!(forward_ideal(&theta(), &quarter).p2(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn echo_probability_checks() {
        let tau2 = times().tau2;
        assert_abs_diff_eq!(pulse_relax_pulse_prob(&theta(), tau2, 0.0).unwrap(), 1.0, epsilon = 1e-15);
        let p = pulse_relax_pulse_prob(&theta(), tau2, PI / 5.0).unwrap();
        assert_abs_diff_eq!(p, 0.77285, epsilon = 1e-5);
        assert_abs_diff_eq!(p, composed(&theta(), tau2, PI / 5.0), epsilon = 1e-12);
        let c = (theta().kappa * tau2).cos();
        let late = pulse_relax_pulse_prob(&theta(), tau2, 1e5).unwrap();
        assert_abs_diff_eq!(late, 0.5 * (1.0 - c), epsilon = 1e-12);
        assert!(pulse_relax_pulse_prob(&theta(), tau2, -1.0).is_err());
    }

    /// The closed form with `cos^2(kappa tau2)` not multiplied by `exp(-gamma1 t)`
    /// disagrees with composing the ideal pulses and the relaxation.
    #[test]
    fn undamped_square_term_is_inconsistent() {
        let th = theta();
        let tau2 = times().tau2;
        let t = 300.0;
        let c = (th.kappa * tau2).cos();
        let big_e = (-th.transverse_rate() * t).exp();
        let undamped = 0.5 * (1.0 - c * (1.0 - (-th.gamma1 * t).exp() - c) + (1.0 - c * c) * big_e * (th.omega * t).cos());
        let truth = composed(&th, tau2, t);
        assert!((undamped - truth).abs() > 1e-2);
        assert_abs_diff_eq!(pulse_relax_pulse_prob(&th, tau2, t).unwrap(), truth, epsilon = 1e-12);
        // both agree at t = 0
        let undamped0 = 0.5 * (1.0 - c * (-c) + (1.0 - c * c));
        assert_abs_diff_eq!(undamped0, composed(&th, tau2, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn finite_pulses_close_to_ideal() {
        let ideal = forward_ideal(&theta(), &times());
        let real = forward_finite(&theta(), &times(), 1e5).unwrap();
        assert_abs_diff_eq!(real.p1(), ideal.p1(), epsilon = 1e-12);
        let bound = [0.0, 6.29e-4, 1.26e-3, 1.26e-3];
        for j in 1..4 {
            assert!((real.0[j] - ideal.0[j]).abs() <= bound[j]);
        }
        assert!(forward_finite(&theta(), &times(), 0.0).is_err());
    }

    #[test]
    fn finite_deviation_is_first_order() {
        let ideal = forward_ideal(&theta(), &times());
        let dev = |u: f64| forward_finite(&theta(), &times(), u).unwrap().max_abs_diff(&ideal);
        let slope = (dev(1e5) / dev(1e4)).log10() / (1e4f64 / 1e5).log10();
        assert!((0.8..1.2).contains(&slope), "slope = {slope}");
        let ratio = dev(2e5) / dev(1e5);
        assert!((0.4..0.6).contains(&ratio), "ratio = {ratio}");
    }

    #[test]
    fn virtual_observables_values() {
        let p = ObservableVector([0.34646, 0.79390, 0.77285, 0.40914]);
        let q = virtual_observables(&p, &times()).unwrap();
        let e = (-theta().transverse_rate() * PI / 5.0).exp();
        assert_abs_diff_eq!(q.q3, e * (2.0 * PI / 5.0).cos(), epsilon = 1e-3);
        assert_abs_diff_eq!(q.q4, e * e * (4.0 * PI / 5.0).cos(), epsilon = 1e-3);

        let exact = forward_ideal(&theta(), &times());
        let q = virtual_observables(&exact, &times()).unwrap();
        assert_abs_diff_eq!(q.q3, e * (2.0 * PI / 5.0).cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(q.q4, e * e * (4.0 * PI / 5.0).cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(q.transverse_decay(), e * e, epsilon = 1e-12);

        let half = ObservableVector([0.3, 0.5, 0.4, 0.4]);
        assert!(matches!(virtual_observables(&half, &times()), Err(Error::DegenerateObservable(_))));
        let one = ObservableVector([0.3, 1.0, 0.4, 0.4]);
        assert!(virtual_observables(&one, &times()).is_err());
    }
}
