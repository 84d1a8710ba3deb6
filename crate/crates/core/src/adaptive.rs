// SPDX-License-Identifier: Apache-2.0

//! Branch disambiguation when the a-priori interval for `kappa` or `omega`
//! admits several solutions of `cos(zeta t) = c`.
//!
//! Every branch combination from the base protocol becomes a candidate
//! parameter vector. Further rounds repeat the protocol at randomly rescaled
//! `(tau2, t3)` and discard candidates whose ideal observables disagree with
//! any round's frequencies by more than `epsilon0` in the sup-norm.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::bloch::Parameters;
use crate::design::{ParameterBox, ProtocolTimes};
use crate::error::{Error, Result};
use crate::forward::{forward_ideal, virtual_observables, ObservableVector};
use crate::measurement::{empirical_frequencies, MeasurementSource};

/// Floor on `|sin(zeta t)|` when turning an observable tolerance into a frequency tolerance.
pub const SIN_FLOOR: f64 = 1e-2;

/// All solutions of `cos(zeta * source_time) = cos_value` inside an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    /// Ascending.
    pub values: Vec<f64>,
    pub source_time: f64,
    pub cos_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    /// Sup-norm tolerance on observable mismatch.
    pub epsilon0: f64,
    /// Rounds including the base one.
    pub max_rounds: usize,
    pub seed: u64,
    /// Search interval for `omega`; `kappa` uses the box interval.
    pub search_interval: (f64, f64),
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon0 >= 0.0 && self.epsilon0.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon0 = {} must be >= 0", self.epsilon0)));
        }
        if self.max_rounds == 0 {
            return Err(Error::InvalidArgument("max_rounds must be >= 1".into()));
        }
        let (lo, hi) = self.search_interval;
        if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::InvalidArgument(format!("search interval [{lo}, {hi}] is empty or negative")));
        }
        Ok(())
    }
}

/// Lists `(+-arccos(cos_value) + 2 pi k) / t` inside `[lo, hi]`.
pub fn enumerate_candidates(cos_value: f64, t: f64, interval: (f64, f64)) -> Result<CandidateSet> {
    let (lo, hi) = interval;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time {t} must be > 0")));
    }
    if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidArgument(format!("interval [{lo}, {hi}] is empty")));
    }
    if !(cos_value.abs() <= 1.0 + 1e-9) {
        return Err(Error::Domain(format!("cosine value {cos_value} outside [-1, 1]")));
    }
    let c = cos_value.clamp(-1.0, 1.0);
    let a = c.acos();
    let k_lo = ((lo * t - a) / TAU).floor() as i64 - 1;
    let k_hi = ((hi * t + a) / TAU).ceil() as i64 + 1;
    let mut values = Vec::new();
    for k in k_lo..=k_hi {
        for phase in [k as f64 * TAU - a, k as f64 * TAU + a] {
            let z = phase / t;
            if lo <= z && z <= hi {
                values.push(z);
            }
        }
    }
    values.sort_by(f64::total_cmp);
    let merge = 1e-12 * (hi - lo);
    values.dedup_by(|b, a| (*b - *a).abs() <= merge);
    Ok(CandidateSet { values, source_time: t, cos_value: c })
}

/// Members of `a` within `tol` of some member of `b`.
pub fn cross_filter(a: &CandidateSet, b: &CandidateSet, tol: f64) -> Vec<f64> {
    a.values
        .iter()
        .copied()
        .filter(|z| b.values.iter().any(|w| (z - w).abs() <= tol))
        .collect()
}

/// Frequency tolerance matching an observable tolerance `epsilon0` on a
/// transverse observable with lever arm `2 p2 (1 - p2)`.
pub fn default_cross_tol(epsilon0: f64, p2: f64, zeta: f64, t: f64) -> f64 {
    let lever = 2.0 * p2 * (1.0 - p2);
    epsilon0 / lever / (t * (zeta * t).sin().abs().max(SIN_FLOOR))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundDiagnostics {
    pub round: usize,
    pub times: ProtocolTimes,
    pub p_hat: [f64; 4],
    pub kappa_candidates: Option<CandidateSet>,
    pub omega_candidates: Option<CandidateSet>,
    /// Surviving `omega` values corroborated by this round's own branch set.
    pub omega_corroborated: Vec<f64>,
    /// Set when this round's times coincide with an earlier round's.
    pub repeated_times: bool,
    pub survivors_before: usize,
    pub survivors_after: usize,
    /// Smallest cumulative mismatch among the candidates entering the round.
    pub best_mismatch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveOutcome {
    pub survivors: Vec<Parameters>,
    /// Cumulative sup-norm mismatch of each survivor.
    pub mismatches: Vec<f64>,
    pub rounds: Vec<RoundDiagnostics>,
    pub ambiguous: bool,
}

struct Round {
    times: ProtocolTimes,
    p_hat: ObservableVector,
}

fn mismatch(theta: &Parameters, rounds: &[Round]) -> f64 {
    rounds
        .iter()
        .map(|r| forward_ideal(theta, &r.times).max_abs_diff(&r.p_hat))
        .fold(0.0, f64::max)
}

fn kappa_set(p: &ObservableVector, times: &ProtocolTimes, bx: &ParameterBox) -> Result<CandidateSet> {
    enumerate_candidates(2.0 * p.p2() - 1.0, times.tau2, (bx.lower.kappa, bx.upper.kappa))
}

/// `(gamma2, omega candidates)` from one round's frequencies.
fn transverse_set(p: &ObservableVector, times: &ProtocolTimes, interval: (f64, f64)) -> Result<(f64, CandidateSet)> {
    let q = virtual_observables(p, times)?;
    let decay = q.transverse_decay();
    if !(decay > 0.0) {
        return Err(Error::Domain(format!("observables p3, p4 give 2 q3^2 - q4 = {decay} <= 0")));
    }
    let gamma2 = -(decay / p.p1().powf(times.t3 / times.t1)).ln() / (4.0 * times.t3);
    Ok((gamma2, enumerate_candidates(q.q3 / decay.sqrt(), times.t3, interval)?))
}

/// Runs the base protocol and up to `max_rounds - 1` randomised repeats, all
/// with `n` shots per observable, and keeps the branch combinations consistent
/// with every round. More than one survivor sets `ambiguous`.
pub fn adaptive_identify<S: MeasurementSource + ?Sized>(
    source: &mut S,
    bx: &ParameterBox,
    base: &ProtocolTimes,
    n: u64,
    config: &AdaptiveConfig,
) -> Result<AdaptiveOutcome> {
    config.validate()?;
    bx.validate()?;
    base.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut rounds: Vec<Round> = Vec::new();
    let mut diagnostics = Vec::new();
    let mut survivors: Vec<Parameters> = Vec::new();

    for r in 0..config.max_rounds {
        let times = if r == 0 {
            *base
        } else {
            let tau2 = base.tau2 * rng.random_range(0.5..=1.5);
            let t3 = base.t3 * rng.random_range(0.5..=1.5);
            ProtocolTimes { tau2, t3, ..*base }
        };
        let p_hat = empirical_frequencies(&source.measure(&times, n)?).p_hat;
        let repeated_times = rounds.iter().any(|o| o.times.tau2 == times.tau2 && o.times.t3 == times.t3);

        if r == 0 {
            let gamma1 = -p_hat.p1().ln() / times.t1;
            let kappas = kappa_set(&p_hat, &times, bx)?;
            let (gamma2, omegas) = transverse_set(&p_hat, &times, config.search_interval)?;
            for &kappa in &kappas.values {
                for &omega in &omegas.values {
                    survivors.push(Parameters { gamma1, kappa, gamma2, omega });
                }
            }
        }
        let kappa_candidates = kappa_set(&p_hat, &times, bx);
        let transverse = transverse_set(&p_hat, &times, config.search_interval);

        rounds.push(Round { times, p_hat });
        let scored: Vec<(Parameters, f64)> = survivors.iter().map(|th| (*th, mismatch(th, &rounds))).collect();
        let best_mismatch = scored.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        let before = survivors.len();
        survivors = scored.iter().filter(|s| s.1 <= config.epsilon0).map(|s| s.0).collect();

        let omega_candidates = transverse.ok().map(|t| t.1);
        let omega_corroborated = match &omega_candidates {
            Some(set) => survivors
                .iter()
                .map(|th| th.omega)
                .filter(|&w| {
                    let tol = default_cross_tol(config.epsilon0, p_hat.p2(), w, times.t3);
                    set.values.iter().any(|z| (z - w).abs() <= tol)
                })
                .collect(),
            None => Vec::new(),
        };
        diagnostics.push(RoundDiagnostics {
            round: r,
            times,
            p_hat: p_hat.0,
            kappa_candidates: kappa_candidates.ok(),
            omega_candidates,
            omega_corroborated,
            repeated_times,
            survivors_before: before,
            survivors_after: survivors.len(),
            best_mismatch,
        });

        if survivors.is_empty() {
            return Err(Error::NoSurvivor(diagnostics.iter().map(|d| d.best_mismatch).collect()));
        }
        if survivors.len() == 1 {
            break;
        }
    }

    let mismatches = survivors.iter().map(|th| mismatch(th, &rounds)).collect();
    Ok(AdaptiveOutcome { ambiguous: survivors.len() > 1, survivors, mismatches, rounds: diagnostics })
}
