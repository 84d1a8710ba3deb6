// SPDX-License-Identifier: Apache-2.0

//! Bloch-vector dynamics of a controlled open qubit.
//!
//! The state `v = (x, y, z)` evolves as `dv/dt = A_u v + b` with
//!
//! ```text
//!       | -g1/2 - 2 g2   -omega          0        |          |  0 |
//! A_u = |  omega         -g1/2 - 2 g2   -kappa u  |,   b =   |  0 |
//!       |  0              kappa u       -g1       |          | g1 |
//! ```
//!
//! For piecewise-constant controls every segment is an affine map, so
//! propagation exponentiates the augmented generator `[[A_u, b], [0, 0]]`
//! instead of stepping an ODE integrator.

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on `|v| <= 1` and `|z| <= 1`.
pub const BALL_TOL: f64 = 1e-9;

/// Physical parameters, ordered `(gamma1, kappa, gamma2, omega)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    /// Relaxation rate.
    pub gamma1: f64,
    /// Control coupling.
    pub kappa: f64,
    /// Dephasing rate.
    pub gamma2: f64,
    /// Intrinsic (Larmor) frequency.
    pub omega: f64,
}

impl Parameters {
    pub const NAMES: [&'static str; 4] = ["gamma1", "kappa", "gamma2", "omega"];

    /// Validated constructor: every field must be finite and strictly positive.
    pub fn new(gamma1: f64, kappa: f64, gamma2: f64, omega: f64) -> Result<Self> {
        let p = Parameters { gamma1, kappa, gamma2, omega };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in Self::NAMES.iter().zip(self.to_array()) {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameters(format!("{name} = {v} must be > 0")));
            }
        }
        Ok(())
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.gamma1, self.kappa, self.gamma2, self.omega]
    }

    /// Unchecked conversion; estimates may legitimately leave the positive orthant.
    pub fn from_array(a: [f64; 4]) -> Self {
        Parameters { gamma1: a[0], kappa: a[1], gamma2: a[2], omega: a[3] }
    }

    /// Transverse decay rate `(gamma1 + 4 gamma2) / 2`.
    pub fn transverse_rate(&self) -> f64 {
        0.5 * (self.gamma1 + 4.0 * self.gamma2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    /// Ground state, the north pole.
    pub const GROUND: BlochVector = BlochVector { x: 0.0, y: 0.0, z: 1.0 };
    /// Excited state, the south pole. Every protocol sequence starts here.
    pub const EXCITED: BlochVector = BlochVector { x: 0.0, y: 0.0, z: -1.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        BlochVector { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        self.as_vector().norm()
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn max_abs_diff(&self, other: &BlochVector) -> f64 {
        (self.as_vector() - other.as_vector()).amax()
    }
}

impl From<Vector3<f64>> for BlochVector {
    fn from(v: Vector3<f64>) -> Self {
        BlochVector { x: v[0], y: v[1], z: v[2] }
    }
}

/// Control amplitude together with its saturation bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlSpec {
    pub u: f64,
    pub u_max: f64,
}

impl ControlSpec {
    pub fn new(u: f64, u_max: f64) -> Result<Self> {
        if !(u_max > 0.0 && u_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("u_max = {u_max} must be > 0")));
        }
        if u.abs() > u_max {
            return Err(Error::InvalidArgument(format!("|u| = {} exceeds u_max = {u_max}", u.abs())));
        }
        Ok(ControlSpec { u, u_max })
    }

    pub fn saturated(sign: PulseSign, u_max: f64) -> Result<Self> {
        Self::new(sign.value() * u_max, u_max)
    }

    /// Perturbation parameter `1 / u_max`.
    pub fn epsilon(&self) -> f64 {
        1.0 / self.u_max
    }
}

/// Direction of a saturated pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseSign {
    Plus,
    Minus,
}

impl PulseSign {
    pub fn value(self) -> f64 {
        match self {
            PulseSign::Plus => 1.0,
            PulseSign::Minus => -1.0,
        }
    }
}

/// Returns `(A_u, b)`.
pub fn generator(theta: &Parameters, u: f64) -> (Matrix3<f64>, Vector3<f64>) {
    let d = -0.5 * theta.gamma1 - 2.0 * theta.gamma2;
    let ku = theta.kappa * u;
    #[rustfmt::skip]
    let a = Matrix3::new(
        d,           -theta.omega, 0.0,
        theta.omega, d,            -ku,
        0.0,         ku,           -theta.gamma1,
    );
    (a, Vector3::new(0.0, 0.0, theta.gamma1))
}

/// Affine flow `v -> M v + c` of one constant-control segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineFlow {
    pub linear: Matrix3<f64>,
    pub offset: Vector3<f64>,
}

impl AffineFlow {
    pub fn apply(&self, v: &BlochVector) -> BlochVector {
        (self.linear * v.as_vector() + self.offset).into()
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &AffineFlow) -> AffineFlow {
        AffineFlow {
            linear: self.linear * first.linear,
            offset: self.linear * first.offset + self.offset,
        }
    }
}

/// Flow of a constant control `u` held for time `t`, from `exp([[A_u t, b t], [0, 0]])`.
pub fn segment_flow(theta: &Parameters, u: f64, t: f64) -> Result<AffineFlow> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeDuration(t));
    }
    let (a, b) = generator(theta, u);
    let mut aug = Matrix4::<f64>::zeros();
    aug.fixed_view_mut::<3, 3>(0, 0).copy_from(&(a * t));
    aug.fixed_view_mut::<3, 1>(0, 3).copy_from(&(b * t));
    let e = aug.exp();
    Ok(AffineFlow {
        linear: e.fixed_view::<3, 3>(0, 0).into_owned(),
        offset: e.fixed_view::<3, 1>(0, 3).into_owned(),
    })
}

/// State after holding control `u` for time `t`, starting from `v0`.
pub fn propagate(v0: &BlochVector, u: f64, t: f64, theta: &Parameters) -> Result<BlochVector> {
    Ok(segment_flow(theta, u, t)?.apply(v0))
}

/// Free relaxation using the explicit `exp(A_0 t)`: a damped rotation of the
/// transverse plane and exponential return of `z` to the north pole.
pub fn relax_closed_form(v0: &BlochVector, t: f64, theta: &Parameters) -> Result<BlochVector> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeDuration(t));
    }
    let damp = (-theta.transverse_rate() * t).exp();
    let (s, c) = (theta.omega * t).sin_cos();
    let ez = (-theta.gamma1 * t).exp();
    Ok(BlochVector {
        x: damp * (c * v0.x - s * v0.y),
        y: damp * (s * v0.x + c * v0.y),
        z: ez * v0.z + (1.0 - ez),
    })
}

/// Saturated pulse `u = sign * u_max` applied for physical time `tau / u_max`.
pub fn pulse(
    v0: &BlochVector,
    sign: PulseSign,
    tau: f64,
    u_max: f64,
    theta: &Parameters,
) -> Result<BlochVector> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("pulse duration tau = {tau} must be > 0")));
    }
    let ctrl = ControlSpec::saturated(sign, u_max)?;
    propagate(v0, ctrl.u, tau * ctrl.epsilon(), theta)
}

/// Infinite-amplitude limit of [`pulse`]: rotation about x by `sign * angle`.
/// Positive angles take `(0, 0, -1)` to `(0, sin a, -cos a)`.
pub fn ideal_pulse(v0: &BlochVector, sign: PulseSign, angle: f64) -> BlochVector {
    let (s, c) = (sign.value() * angle).sin_cos();
    BlochVector {
        x: v0.x,
        y: c * v0.y - s * v0.z,
        z: s * v0.y + c * v0.z,
    }
}

/// Probability of the excited outcome, `(1 - z) / 2`.
pub fn readout_probability(v: &BlochVector) -> Result<f64> {
    if !(v.z.abs() <= 1.0 + BALL_TOL) {
        return Err(Error::OutsideBall(v.z));
    }
    Ok(0.5 * (1.0 - v.z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn nominal() -> Parameters {
        Parameters::new(0.002, 0.015, 0.003, 2.0).unwrap()
    }

    #[test]
    fn generator_entries() {
        let (a0, b) = generator(&nominal(), 0.0);
        #[rustfmt::skip]
        let want = Matrix3::new(
            -0.007, -2.0,   0.0,
             2.0,   -0.007, 0.0,
             0.0,    0.0,  -0.002,
        );
        assert_abs_diff_eq!(a0, want, epsilon = 1e-15);
        assert_eq!(b, Vector3::new(0.0, 0.0, 0.002));
        assert_eq!(a0[(1, 2)], 0.0);
        assert_eq!(a0[(2, 1)], 0.0);

        let (a1, _) = generator(&nominal(), 1.0);
        assert_abs_diff_eq!(a1[(1, 2)], -0.015, epsilon = 1e-15);
        assert_abs_diff_eq!(a1[(2, 1)], 0.015, epsilon = 1e-15);
    }

    #[test]
    fn ground_state_is_at_rest() {
        for t in [0.0, 1.0, 530.0, 1e4] {
            let v = propagate(&BlochVector::GROUND, 0.0, t, &nominal()).unwrap();
            assert_abs_diff_eq!(v.as_vector(), Vector3::new(0.0, 0.0, 1.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn excited_state_relaxes_along_z() {
        let v = propagate(&BlochVector::EXCITED, 0.0, 530.0, &nominal()).unwrap();
        let want_z = 1.0 - 2.0 * (-1.06f64).exp();
        assert_abs_diff_eq!(v.z, want_z, epsilon = 1e-12);
        assert_abs_diff_eq!(v.z, 0.30707, epsilon = 5e-5);
        assert_eq!((v.x, v.y), (0.0, 0.0));
    }

    #[test]
    fn zero_time_is_identity() {
        let v0 = BlochVector::new(0.3, -0.2, 0.5);
        let v = propagate(&v0, 3.0, 0.0, &nominal()).unwrap();
        assert_abs_diff_eq!(v.as_vector(), v0.as_vector(), epsilon = 1e-15);
        assert!(matches!(propagate(&v0, 0.0, -1.0, &nominal()), Err(Error::NegativeDuration(_))));
        assert!(relax_closed_form(&v0, -1.0, &nominal()).is_err());
    }

    #[test]
    fn closed_form_relaxation_values() {
        let t = std::f64::consts::PI / 5.0;
        let v = relax_closed_form(&BlochVector::new(1.0, 0.0, 0.0), t, &nominal()).unwrap();
        let damp = (-0.007 * t).exp();
        assert_abs_diff_eq!(v.x, damp * (2.0 * t).cos(), epsilon = 1e-14);
        assert_abs_diff_eq!(v.y, damp * (2.0 * t).sin(), epsilon = 1e-14);
        // Frozen from the same expression: 0.30766 / 0.94688, with the drift
        // lifting z off zero by 1 - exp(-gamma1 t).
        assert_abs_diff_eq!(v.x, 0.307661, epsilon = 1e-6);
        assert_abs_diff_eq!(v.y, 0.946883, epsilon = 1e-6);
        assert_abs_diff_eq!(v.z, 1.0 - (-0.002 * t).exp(), epsilon = 1e-15);

        let far = relax_closed_form(&BlochVector::EXCITED, 1e5, &nominal()).unwrap();
        assert_abs_diff_eq!(far.z, 1.0, epsilon = 1e-12);

        let polar = relax_closed_form(&BlochVector::new(0.0, 0.0, 0.4), 17.0, &nominal()).unwrap();
        assert_eq!((polar.x, polar.y), (0.0, 0.0));
    }

    #[test]
    fn ideal_pulse_rotations() {
        let v = ideal_pulse(&BlochVector::EXCITED, PulseSign::Plus, 0.94248);
        assert_abs_diff_eq!(v.y, 0.80902, epsilon = 1e-5);
        assert_abs_diff_eq!(v.z, -0.58779, epsilon = 1e-5);
        let flip = ideal_pulse(&BlochVector::EXCITED, PulseSign::Plus, std::f64::consts::PI);
        assert_abs_diff_eq!(flip.as_vector(), Vector3::new(0.0, 0.0, 1.0), epsilon = 1e-15);
        let v0 = BlochVector::new(0.1, 0.2, 0.3);
        assert_eq!(ideal_pulse(&v0, PulseSign::Minus, 0.0), v0);
        let back = ideal_pulse(&ideal_pulse(&v0, PulseSign::Plus, 1.1), PulseSign::Minus, 1.1);
        assert_abs_diff_eq!(back.as_vector(), v0.as_vector(), epsilon = 1e-15);
    }

    #[test]
    fn finite_pulse_near_ideal() {
        let theta = nominal();
        let tau2 = 0.8 * std::f64::consts::PI / 0.04;
        let real = pulse(&BlochVector::EXCITED, PulseSign::Plus, tau2, 1e5, &theta).unwrap();
        let ideal = ideal_pulse(&BlochVector::EXCITED, PulseSign::Plus, theta.kappa * tau2);
        // 2 eps C(theta) with C = (tau2/2)(mu + gamma1) = 62.894
        assert!(real.max_abs_diff(&ideal) <= 2.0 * 1e-5 * 62.894);
        assert!(pulse(&BlochVector::EXCITED, PulseSign::Plus, 0.0, 1e5, &theta).is_err());
        assert!(pulse(&BlochVector::EXCITED, PulseSign::Plus, 1.0, 0.0, &theta).is_err());
    }

    #[test]
    fn readout() {
        assert_eq!(readout_probability(&BlochVector::GROUND).unwrap(), 0.0);
        assert_eq!(readout_probability(&BlochVector::EXCITED).unwrap(), 1.0);
        let p = readout_probability(&BlochVector::new(0.0, 0.0, 0.30707)).unwrap();
        assert_abs_diff_eq!(p, 0.346465, epsilon = 1e-9);
        assert!(readout_probability(&BlochVector::new(0.0, 0.0, 1.0 + 1e-6)).is_err());
        assert!(readout_probability(&BlochVector::new(0.0, 0.0, 1.0 + 1e-10)).is_ok());
    }

    #[test]
    fn control_spec_bounds() {
        assert!(ControlSpec::new(2.0, 1.0).is_err());
        assert!(ControlSpec::new(0.5, -1.0).is_err());
        assert_eq!(ControlSpec::new(-1.0, 4.0).unwrap().epsilon(), 0.25);
    }

    #[test]
    fn parameters_validation() {
        assert!(Parameters::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(Parameters::new(1.0, f64::NAN, 1.0, 1.0).is_err());
        let p = Parameters::from_array([1.0, 2.0, 3.0, 4.0]);
        assert_eq!(p.to_array(), [1.0, 2.0, 3.0, 4.0]);
    }

    fn theta_strategy() -> impl Strategy<Value = Parameters> {
        (0.001..0.003f64, 0.01..0.04f64, 0.002..0.005f64, 1.0..4.0f64)
            .prop_map(|(a, b, c, d)| Parameters::from_array([a, b, c, d]))
    }

    fn ball_strategy() -> impl Strategy<Value = BlochVector> {
        (0.0..1.0f64, 0.0..std::f64::consts::PI, 0.0..std::f64::consts::TAU).prop_map(|(r, th, ph)| {
            BlochVector::new(r * th.sin() * ph.cos(), r * th.sin() * ph.sin(), r * th.cos())
        })
    }

    proptest! {
        #[test]
        fn propagation_is_contractive(v in ball_strategy(), u in -1e3..1e3f64, t in 0.0..200.0f64, theta in theta_strategy()) {
            let w = propagate(&v, u, t, &theta).unwrap();
            prop_assert!(w.norm() <= 1.0 + BALL_TOL);
        }

        #[test]
        fn semigroup(v in ball_strategy(), u in -10.0..10.0f64, t1 in 0.0..50.0f64, t2 in 0.0..50.0f64, theta in theta_strategy()) {
            let once = propagate(&v, u, t1 + t2, &theta).unwrap();
            let twice = propagate(&propagate(&v, u, t1, &theta).unwrap(), u, t2, &theta).unwrap();
            prop_assert!(once.max_abs_diff(&twice) < 1e-10);
        }

        #[test]
        fn ideal_pulse_limit_bound(sign in prop_oneof![Just(PulseSign::Plus), Just(PulseSign::Minus)],
                                   tau in 1.0..300.0f64, u_max in 1e2..1e6f64, theta in theta_strategy()) {
            let real = pulse(&BlochVector::EXCITED, sign, tau, u_max, &theta).unwrap();
            let ideal = ideal_pulse(&BlochVector::EXCITED, sign, theta.kappa * tau);
            let mu = theta.gamma1.max(((0.5 * theta.gamma1 + theta.gamma2).powi(2) + theta.omega.powi(2)).sqrt());
            let bound = 2.0 * (tau / 2.0) * (mu + theta.gamma1) / u_max;
            prop_assert!((real.as_vector() - ideal.as_vector()).norm() <= bound);
        }
    }
}
