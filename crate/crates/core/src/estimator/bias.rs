// SPDX-License-Identifier: Apache-2.0

//! Finite-pulse bias.
//!
//! The finite-amplitude observables satisfy
//! `|F_eps - F_0| <= eps * (0, C, C'(t3), C'(2 t3))` componentwise, where
//!
//! ```text
//! lambda = min(g1, (g1 + 4 g2) / 2)
//! mu     = max(g1, sqrt((g1/2 + g2)^2 + omega^2))
//! C      = (tau2 / 2) (mu + g1)
//! C'(t)  = C + (tau2 / 2) mu (2 exp(-lambda t) - exp(-g1 t))
//! ```
//!
//! Mapping that observable box through `(Jac F_0)^{-1}` and taking the
//! supremum over the parameter box gives the parameter-space bias box.

use nalgebra::Matrix4;
use serde::Serialize;

use crate::bloch::Parameters;
use crate::design::{ParameterBox, ProtocolTimes};
use crate::error::{Error, Result};
use crate::forward::forward_ideal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasConstants {
    pub lambda: f64,
    pub mu: f64,
    /// Bound on the `p2` deviation per unit `eps`.
    pub c: f64,
    /// Bound on the `p3` deviation per unit `eps`.
    pub c_t3: f64,
    /// Bound on the `p4` deviation per unit `eps`.
    pub c_2t3: f64,
}

impl BiasConstants {
    /// Observable-space half-widths per unit `eps`.
    pub fn observable_half_widths(&self) -> [f64; 4] {
        [0.0, self.c, self.c_t3, self.c_2t3]
    }
}

pub fn bias_constants(theta: &Parameters, times: &ProtocolTimes) -> BiasConstants {
    let g1 = theta.gamma1;
    let lambda = g1.min(theta.transverse_rate());
    let mu = g1.max(((0.5 * g1 + theta.gamma2).powi(2) + theta.omega.powi(2)).sqrt());
    let half = 0.5 * times.tau2;
    let c = half * (mu + g1);
    let c_prime = |t: f64| c + half * mu * (2.0 * (-lambda * t).exp() - (-g1 * t).exp());
    BiasConstants { lambda, mu, c, c_t3: c_prime(times.t3), c_2t3: c_prime(2.0 * times.t3) }
}

/// Central-difference Jacobian of the ideal forward map in `theta`
/// (relative step `1e-6`); rows are observables, columns parameters.
pub fn forward_jacobian(theta: &Parameters, times: &ProtocolTimes) -> Matrix4<f64> {
    let base = theta.to_array();
    let mut jac = Matrix4::zeros();
    for j in 0..4 {
        let h = 1e-6 * base[j].abs().max(f64::MIN_POSITIVE);
        let mut up = base;
        let mut down = base;
        up[j] += h;
        down[j] -= h;
        let hi = forward_ideal(&Parameters::from_array(up), times).0;
        let lo = forward_ideal(&Parameters::from_array(down), times).0;
        for i in 0..4 {
            jac[(i, j)] = (hi[i] - lo[i]) / (2.0 * h);
        }
    }
    jac
}

/// `sum_j |(Jac F_0(theta))^{-1}_{ij}| * halfwidth_j` at one parameter point, per unit `eps`.
pub fn bias_half_widths_at(theta: &Parameters, times: &ProtocolTimes) -> Result<[f64; 4]> {
    let jac = forward_jacobian(theta, times);
    let sv = jac.singular_values();
    if !(sv.min() > 1e-10 * sv.max()) {
        return Err(Error::SingularJacobian(theta.to_array()));
    }
    let inv = jac.try_inverse().ok_or(Error::SingularJacobian(theta.to_array()))?;
    let hw = bias_constants(theta, times).observable_half_widths();
    let mut out = [0.0; 4];
    for (i, o) in out.iter_mut().enumerate().skip(1) {
        *o = (0..4).map(|j| inv[(i, j)].abs() * hw[j]).sum();
    }
    // p1 is untouched by the pulses, so the gamma1 half-width is exactly 0
    out[0] = 0.0;
    Ok(out)
}

/// Per-unit-`eps` bias box: the supremum of [`bias_half_widths_at`] over the given points.
pub fn bias_box_delta_over(points: &[Parameters], times: &ProtocolTimes) -> Result<[f64; 4]> {
    let mut delta = [0.0f64; 4];
    for theta in points {
        let w = bias_half_widths_at(theta, times)?;
        for i in 0..4 {
            delta[i] = delta[i].max(w[i]);
        }
    }
    Ok(delta)
}

/// Per-unit-`eps` bias box over a `grid_points`-per-axis grid of the box.
pub fn bias_box_delta(bx: &ParameterBox, times: &ProtocolTimes, grid_points: usize) -> Result<[f64; 4]> {
    bias_box_delta_over(&bx.grid(grid_points), times)
}

/// Half-widths of the bias box at amplitude `u_max`.
pub fn bias_box(bx: &ParameterBox, times: &ProtocolTimes, u_max: f64, grid_points: usize) -> Result<[f64; 4]> {
    if !(u_max > 0.0) {
        return Err(Error::InvalidArgument(format!("u_max = {u_max} must be > 0")));
    }
    Ok(bias_box_delta(bx, times, grid_points)?.map(|d| d / u_max))
}
