// SPDX-License-Identifier: Apache-2.0

use nalgebra::{Matrix2, Matrix4};
use serde::{Deserialize, Serialize};

use super::{box_quadratic_min, confidence_ellipsoid, covariance, invert_ideal, ConfidenceEllipsoid};
use crate::bloch::Parameters;
use crate::design::ProtocolTimes;
use crate::error::{Error, Result};
use crate::measurement::EmpiricalFrequencies;

pub const REPORT_VERSION: &str = concat!("qubit-ident/", env!("CARGO_PKG_VERSION"));

/// Point estimate with its statistical ellipsoid and finite-pulse bias box.
///
/// The region is `theta_hat + {d : d^T sigma_hat^{-1} d <= chi2 / n} + [-bias_box, bias_box]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub version: String,
    pub theta_hat: Parameters,
    /// Covariance of `sqrt(n) (theta_hat - theta)`, row-major.
    pub sigma_hat: Vec<f64>,
    pub n: u64,
    pub alpha: f64,
    pub chi2_threshold: f64,
    /// `chi2_threshold / n`.
    pub radius2: f64,
    /// `None` for ideal pulses.
    pub u_max: Option<f64>,
    /// Half-widths, already scaled by `1 / u_max`.
    pub bias_box: [f64; 4],
    pub times: ProtocolTimes,
    pub p_hat: [f64; 4],
}

impl EstimateReport {
    /// Builds the report from frequencies; `bias_delta` is the per-unit-`eps`
    /// bias box (see [`super::bias_box_delta`]).
    pub fn assemble(
        p_hat: &EmpiricalFrequencies,
        times: &ProtocolTimes,
        bias_delta: &[f64; 4],
        u_max: Option<f64>,
        alpha: f64,
    ) -> Result<Self> {
        if let Some(u) = u_max {
            if !(u > 0.0 && u.is_finite()) {
                return Err(Error::InvalidArgument(format!("u_max = {u} must be > 0")));
            }
        }
        let theta_hat = invert_ideal(p_hat, times)?;
        let sigma = covariance(p_hat, times)?;
        let ell = confidence_ellipsoid(&sigma, alpha, p_hat.n)?;
        let bias_box = match u_max {
            Some(u) => bias_delta.map(|d| d / u),
            None => [0.0; 4],
        };
        Ok(EstimateReport {
            version: REPORT_VERSION.to_string(),
            theta_hat,
            sigma_hat: sigma.transpose().iter().copied().collect(),
            n: p_hat.n,
            alpha,
            chi2_threshold: ell.chi2,
            radius2: ell.radius2,
            u_max,
            bias_box,
            times: *times,
            p_hat: p_hat.p_hat.0,
        })
    }

    pub fn sigma(&self) -> Matrix4<f64> {
        Matrix4::from_row_slice(&self.sigma_hat)
    }

    pub fn ellipsoid(&self) -> Result<ConfidenceEllipsoid> {
        confidence_ellipsoid(&self.sigma(), self.alpha, self.n)
    }

    /// Whether `theta` lies in the ellipsoid alone, ignoring the bias box.
    pub fn ellipsoid_contains(&self, theta: &Parameters) -> Result<bool> {
        let d = self.offset(theta);
        Ok(self.ellipsoid()?.contains(&d))
    }

    /// Minkowski-sum membership: some `delta` in the bias box puts
    /// `theta - theta_hat - delta` inside the ellipsoid.
    pub fn contains(&self, theta: &Parameters) -> Result<bool> {
        let ell = self.ellipsoid()?;
        Ok(box_quadratic_min(&ell.precision, &self.offset(theta), &self.bias_box) <= ell.radius2)
    }

    fn offset(&self, theta: &Parameters) -> [f64; 4] {
        let (a, b) = (theta.to_array(), self.theta_hat.to_array());
        [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
    }

    /// Projection of the region onto parameters `(i, j)`.
    pub fn marginal(&self, i: usize, j: usize) -> Marginal2d {
        let s = self.sigma();
        let c = self.theta_hat.to_array();
        Marginal2d {
            axes: (i, j),
            center: [c[i], c[j]],
            cov: Matrix2::new(s[(i, i)], s[(i, j)], s[(j, i)], s[(j, j)]),
            radius2: self.radius2,
            half_widths: [self.bias_box[i], self.bias_box[j]],
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Two-dimensional shadow of a confidence region: the projected ellipse
/// (the `2x2` block of the covariance, i.e. the inverse of the Schur
/// complement of the precision matrix) plus the bias rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal2d {
    pub axes: (usize, usize),
    pub center: [f64; 2],
    pub cov: Matrix2<f64>,
    pub radius2: f64,
    pub half_widths: [f64; 2],
}

impl Marginal2d {
    /// Support function `max_{x in region} <u, x>`.
    pub fn support(&self, u: [f64; 2]) -> f64 {
        let q = self.cov[(0, 0)] * u[0] * u[0] + 2.0 * self.cov[(0, 1)] * u[0] * u[1] + self.cov[(1, 1)] * u[1] * u[1];
        self.center[0] * u[0]
            + self.center[1] * u[1]
            + (self.radius2 * q.max(0.0)).sqrt()
            + u[0].abs() * self.half_widths[0]
            + u[1].abs() * self.half_widths[1]
    }

    /// Boundary points indexed by outward normal angle, `points` samples.
    pub fn boundary(&self, points: usize) -> Vec<[f64; 2]> {
        (0..points)
            .map(|k| {
                let phi = std::f64::consts::TAU * k as f64 / points as f64;
                let u = [phi.cos(), phi.sin()];
                let su = [
                    self.cov[(0, 0)] * u[0] + self.cov[(0, 1)] * u[1],
                    self.cov[(1, 0)] * u[0] + self.cov[(1, 1)] * u[1],
                ];
                let q = (u[0] * su[0] + u[1] * su[1]).max(0.0);
                let scale = if q > 0.0 { (self.radius2 / q).sqrt() } else { 0.0 };
                [
                    self.center[0] + scale * su[0] + u[0].signum() * self.half_widths[0],
                    self.center[1] + scale * su[1] + u[1].signum() * self.half_widths[1],
                ]
            })
            .collect()
    }

    /// `min_u (h_self(u) - h_inner(u))` over `directions` unit normals, normalised by
    /// the width of `self` along each normal. Non-negative iff `inner` fits inside
    /// `self` along every sampled direction.
    pub fn containment_margin(&self, inner: &Marginal2d, directions: usize) -> f64 {
        (0..directions)
            .map(|k| {
                let phi = std::f64::consts::TAU * k as f64 / directions as f64;
                let u = [phi.cos(), phi.sin()];
                let v = [-u[0], -u[1]];
                let width = self.support(u) + self.support(v);
                (self.support(u) - inner.support(u)) / width
            })
            .fold(f64::INFINITY, f64::min)
    }
}
