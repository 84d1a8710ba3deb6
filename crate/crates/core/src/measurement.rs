// SPDX-License-Identifier: Apache-2.0

//! Shot statistics: binomial sampling of excited-state counts, empirical
//! frequencies, and the [`MeasurementSource`] abstraction over simulated or
//! recorded counts.
//!
//! Randomness comes from ChaCha20 keyed by the user seed. Each
//! `(trial, observable)` pair reads its own ChaCha stream, so draws are
//! reproducible across platforms and independent across observables.

use std::collections::VecDeque;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::bloch::Parameters;
use crate::design::ProtocolTimes;
use crate::error::{Error, Result};
use crate::forward::{forward_finite, forward_ideal, ObservableVector};

/// Excited-outcome counts for the four observables, `n` shots each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotCounts {
    pub s: [u64; 4],
    pub n: u64,
}

impl ShotCounts {
    pub fn new(s: [u64; 4], n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("shot count n must be >= 1".into()));
        }
        if let Some(bad) = s.iter().find(|&&sj| sj > n) {
            return Err(Error::InvalidArgument(format!("count {bad} exceeds n = {n}")));
        }
        Ok(ShotCounts { s, n })
    }
}

/// Clamped frequencies `s / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalFrequencies {
    pub p_hat: ObservableVector,
    pub n: u64,
}

/// RNG for one `(trial, observable)` substream.
pub fn substream(seed: u64, trial: u64, observable: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream((trial << 8) | observable as u64);
    rng
}

fn binomial_draw(n: u64, p: f64, rng: &mut ChaCha20Rng) -> Result<u64> {
    if p.is_nan() {
        return Err(Error::InvalidArgument("probability is NaN".into()));
    }
    let p = p.clamp(0.0, 1.0);
    let dist = Binomial::new(n, p).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(dist.sample(rng))
}

/// Binomial counts for trial 0 of `seed`.
pub fn sample_counts(p: &ObservableVector, n: u64, seed: u64) -> Result<ShotCounts> {
    sample_counts_trial(p, n, seed, 0)
}

/// Binomial counts on the substreams of `trial`.
pub fn sample_counts_trial(p: &ObservableVector, n: u64, seed: u64, trial: u64) -> Result<ShotCounts> {
    if n == 0 {
        return Err(Error::InvalidArgument("shot count n must be >= 1".into()));
    }
    let mut s = [0u64; 4];
    for (j, sj) in s.iter_mut().enumerate() {
        *sj = binomial_draw(n, p.0[j], &mut substream(seed, trial, j))?;
    }
    Ok(ShotCounts { s, n })
}

/// Counts under probabilities `to`, coupled to `base` drawn under `from`.
///
/// Uses the monotone binomial coupling: moving up adds
/// `Binomial(n - s, (to - from) / (1 - from))` successes, moving down keeps
/// `Binomial(s, to / from)` of them. Each marginal stays exactly binomial;
/// the coupling only makes two designs share their shot noise.
pub fn coupled_counts(
    base: &ShotCounts,
    from: &ObservableVector,
    to: &ObservableVector,
    seed: u64,
    trial: u64,
) -> Result<ShotCounts> {
    let mut s = base.s;
    for j in 0..4 {
        let (a, b) = (from.0[j].clamp(0.0, 1.0), to.0[j].clamp(0.0, 1.0));
        if a == b {
            continue;
        }
        // substream ids 4..8 stay clear of the primary draws
        let mut rng = substream(seed, trial, 4 + j);
        s[j] = if b > a {
            let q = if a >= 1.0 { 0.0 } else { (b - a) / (1.0 - a) };
            base.s[j] + binomial_draw(base.n - base.s[j], q, &mut rng)?
        } else {
            binomial_draw(base.s[j], b / a, &mut rng)?
        };
    }
    Ok(ShotCounts { s, n: base.n })
}

/// `s / n` clamped to `[1/(2n), 1 - 1/(2n)]`.
pub fn empirical_frequencies(counts: &ShotCounts) -> EmpiricalFrequencies {
    let n = counts.n as f64;
    let floor = 0.5 / n;
    let mut p = [0.0; 4];
    for (pj, &sj) in p.iter_mut().zip(&counts.s) {
        *pj = (sj as f64 / n).clamp(floor, 1.0 - floor);
    }
    EmpiricalFrequencies { p_hat: ObservableVector(p), n: counts.n }
}

/// Anything that can produce excited-outcome counts for a protocol design.
/// Counts for distinct observables must be statistically independent.
pub trait MeasurementSource {
    /// Returns `(s, n)` for observable `index` (0-based: 0 is `p1`).
    fn count(&mut self, times: &ProtocolTimes, n: u64, index: usize) -> Result<(u64, u64)>;

    fn measure(&mut self, times: &ProtocolTimes, n: u64) -> Result<ShotCounts> {
        let mut s = [0u64; 4];
        let mut shots = None;
        for (j, sj) in s.iter_mut().enumerate() {
            let (c, nj) = self.count(times, n, j)?;
            match shots {
                None => shots = Some(nj),
                Some(prev) if prev != nj => {
                    return Err(Error::Source(format!("observable {} has n = {nj}, expected {prev}", j + 1)))
                }
                _ => {}
            }
            *sj = c;
        }
        ShotCounts::new(s, shots.unwrap_or(n))
    }
}

/// How pulses are modelled when simulating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PulseModel {
    Ideal,
    Finite { u_max: f64 },
}

impl PulseModel {
    pub fn observables(&self, theta: &Parameters, times: &ProtocolTimes) -> Result<ObservableVector> {
        match *self {
            PulseModel::Ideal => Ok(forward_ideal(theta, times)),
            PulseModel::Finite { u_max } => forward_finite(theta, times, u_max),
        }
    }
}

/// Simulated measurements of a qubit with known parameters.
#[derive(Debug, Clone)]
pub struct SimulatedSource {
    pub theta: Parameters,
    pub pulses: PulseModel,
    pub seed: u64,
    calls: [u64; 4],
}

impl SimulatedSource {
    pub fn new(theta: Parameters, pulses: PulseModel, seed: u64) -> Self {
        SimulatedSource { theta, pulses, seed, calls: [0; 4] }
    }
}

impl MeasurementSource for SimulatedSource {
    fn count(&mut self, times: &ProtocolTimes, n: u64, index: usize) -> Result<(u64, u64)> {
        if index >= 4 {
            return Err(Error::Source(format!("no observable with index {index}")));
        }
        if n == 0 {
            return Err(Error::InvalidArgument("shot count n must be >= 1".into()));
        }
        let p = self.pulses.observables(&self.theta, times)?.0[index];
        let trial = self.calls[index];
        self.calls[index] += 1;
        Ok((binomial_draw(n, p, &mut substream(self.seed, trial, index))?, n))
    }
}

/// Recorded counts from a plain-text table with rows `observable_index, s, n`.
///
/// Indices are 1-based (`1` is `p1`). Blank lines, `#` comments and a
/// non-numeric header row are skipped. Repeated rows for one observable are
/// served in file order, one per request, so multi-round experiments can be
/// stored in one file. The recorded `n` takes precedence over the requested one.
#[derive(Debug, Clone, Default)]
pub struct FileSource {
    rows: [VecDeque<(u64, u64)>; 4],
}

impl FileSource {
    pub fn from_path(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut src = FileSource::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields[0].parse::<u64>().is_err() && lineno == first_content_line(text) {
                continue;
            }
            let bad = || Error::Source(format!("line {}: expected `observable_index, s, n`, got `{raw}`", lineno + 1));
            if fields.len() != 3 {
                return Err(bad());
            }
            let idx: usize = fields[0].parse().map_err(|_| bad())?;
            let s: u64 = fields[1].parse().map_err(|_| bad())?;
            let n: u64 = fields[2].parse().map_err(|_| bad())?;
            if !(1..=4).contains(&idx) || n == 0 || s > n {
                return Err(bad());
            }
            src.rows[idx - 1].push_back((s, n));
        }
        Ok(src)
    }

    pub fn remaining(&self, index: usize) -> usize {
        self.rows.get(index).map_or(0, VecDeque::len)
    }
}

fn first_content_line(text: &str) -> usize {
    text.lines()
        .position(|l| !l.split('#').next().unwrap_or("").trim().is_empty())
        .unwrap_or(0)
}

impl MeasurementSource for FileSource {
    fn count(&mut self, _times: &ProtocolTimes, _n: u64, index: usize) -> Result<(u64, u64)> {
        self.rows
            .get_mut(index)
            .and_then(VecDeque::pop_front)
            .ok_or_else(|| Error::Source(format!("no more recorded rows for observable {}", index + 1)))
    }
}
