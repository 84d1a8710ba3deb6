// SPDX-License-Identifier: Apache-2.0

//! Experiment drivers behind the command-line subcommands.
//!
//! Every driver is a pure function of an [`ExperimentConfig`]: trials draw
//! from seeded substreams and are reduced in trial order, so equal configs give
//! byte-identical output regardless of thread count.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive::{adaptive_identify, AdaptiveConfig, AdaptiveOutcome};
use crate::bloch::Parameters;
use crate::design::{design_times, min_shots, validate_times, ParameterBox, ProtocolTimes, TimeDiagnostics};
use crate::error::{Error, Result};
use crate::estimator::{bias_box_delta, covariance_at, invert_ideal, EstimateReport, Marginal2d, REPORT_VERSION};
use crate::forward::{forward_ideal, ObservableVector};
use crate::measurement::{
    coupled_counts, empirical_frequencies, sample_counts_trial, MeasurementSource, PulseModel, SimulatedSource,
};

/// Settings for the branch-disambiguation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveSection {
    pub epsilon0: f64,
    pub max_rounds: usize,
    /// Search interval for `omega`; defaults to the box interval.
    pub search_interval: Option<(f64, f64)>,
    /// Shots per observable per round; defaults to the top-level `n`.
    pub n: Option<u64>,
}

impl Default for AdaptiveSection {
    fn default() -> Self {
        AdaptiveSection { epsilon0: 5e-3, max_rounds: 5, search_interval: None, n: Some(1_000_000) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionsSection {
    /// The two amplitudes compared, larger bias first.
    pub u_max_pair: (f64, f64),
    pub boundary_points: usize,
    /// Drop the statistical ellipse and plot the bias rectangle around the
    /// noiseless estimate only.
    pub noiseless: bool,
}

impl Default for RegionsSection {
    fn default() -> Self {
        RegionsSection { u_max_pair: (1e5, 1e7), boundary_points: 256, noiseless: false }
    }
}

/// One JSON document drives every subcommand. All fields are optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub theta_true: Parameters,
    #[serde(rename = "box")]
    pub bx: ParameterBox,
    pub beta: f64,
    pub k: u32,
    /// Designed from the box when absent.
    pub times: Option<ProtocolTimes>,
    pub u_max: f64,
    /// Simulate instantaneous pulses instead of amplitude `u_max`.
    pub ideal_pulses: bool,
    /// Shots per observable.
    pub n: u64,
    pub trials: usize,
    pub alpha: f64,
    pub seed: u64,
    pub n_sweep: Option<Vec<u64>>,
    /// Grid nodes per axis for the bias-box supremum.
    pub bias_grid: usize,
    /// Standard deviations kept between `p2` and `{0, 1}` in the shot bound.
    pub sigma_margin: f64,
    pub regions: RegionsSection,
    pub adaptive: AdaptiveSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            theta_true: Parameters { gamma1: 0.002, kappa: 0.015, gamma2: 0.003, omega: 2.0 },
            bx: ParameterBox {
                lower: Parameters { gamma1: 0.001, kappa: 0.01, gamma2: 0.002, omega: 1.0 },
                upper: Parameters { gamma1: 0.003, kappa: 0.04, gamma2: 0.005, omega: 4.0 },
            },
            beta: 0.2,
            k: 0,
            times: None,
            u_max: 1e5,
            ideal_pulses: false,
            n: 500_000_000,
            trials: 100,
            alpha: 0.01,
            seed: 2024,
            n_sweep: None,
            bias_grid: 5,
            sigma_margin: 5.0,
            regions: RegionsSection::default(),
            adaptive: AdaptiveSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.bx.validate()?;
        self.theta_true.validate()?;
        if !self.bx.contains(&self.theta_true) {
            return Err(Error::Config("theta_true lies outside the box".into()));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Config(format!("beta = {} must lie in (0, 1)", self.beta)));
        }
        if let Some(t) = &self.times {
            t.validate()?;
        }
        if !(self.u_max > 0.0 && self.u_max.is_finite()) {
            return Err(Error::Config(format!("u_max = {} must be > 0", self.u_max)));
        }
        if self.n == 0 || self.trials == 0 {
            return Err(Error::Config("n and trials must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha = {} must lie in (0, 1)", self.alpha)));
        }
        if let Some(sweep) = &self.n_sweep {
            if sweep.is_empty() || sweep[0] == 0 || sweep.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config("n_sweep must be non-empty, positive and strictly ascending".into()));
            }
        }
        if self.bias_grid == 0 {
            return Err(Error::Config("bias_grid must be >= 1".into()));
        }
        let (u1, u2) = self.regions.u_max_pair;
        if !(u1 > 0.0 && u2 > 0.0) || self.regions.boundary_points < 3 {
            return Err(Error::Config("regions: amplitudes must be > 0 and boundary_points >= 3".into()));
        }
        Ok(())
    }

    pub fn resolved_times(&self) -> Result<ProtocolTimes> {
        match self.times {
            Some(t) => Ok(t),
            None => design_times(&self.bx, self.beta, self.k),
        }
    }

    fn pulses(&self, u_max: f64) -> PulseModel {
        if self.ideal_pulses {
            PulseModel::Ideal
        } else {
            PulseModel::Finite { u_max }
        }
    }

    fn bias_amplitude(&self, u_max: f64) -> Option<f64> {
        (!self.ideal_pulses).then_some(u_max)
    }

    pub fn adaptive_config(&self) -> AdaptiveConfig {
        AdaptiveConfig {
            epsilon0: self.adaptive.epsilon0,
            max_rounds: self.adaptive.max_rounds,
            seed: self.seed,
            search_interval: self.adaptive.search_interval.unwrap_or((self.bx.lower.omega, self.bx.upper.omega)),
        }
    }
}

fn version_line(command: &str, cfg: &ExperimentConfig) -> String {
    format!("# {REPORT_VERSION} {command} seed={}\n", cfg.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignReport {
    pub version: String,
    pub times: ProtocolTimes,
    pub diagnostics: TimeDiagnostics,
    pub min_shots: u64,
    pub sigma_margin: f64,
}

impl DesignReport {
    pub fn to_csv(&self, cfg: &ExperimentConfig) -> String {
        let d = &self.diagnostics;
        let mut out = version_line("design", cfg);
        out.push_str("t1,tau2,t3,beta,k,pulse_angle_ok,omega_branch_ok,jacobian_sign_ok,min_shots\n");
        let t = &self.times;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            t.t1, t.tau2, t.t3, t.beta, t.k, d.pulse_angle_ok, d.omega_branch_ok, d.jacobian_sign_ok, self.min_shots
        );
        out
    }
}

/// Design times, their diagnostics and the shot bound. Failing diagnostics
/// are reported by the caller, not raised here.
pub fn cmd_design(cfg: &ExperimentConfig) -> Result<DesignReport> {
    cfg.validate()?;
    let times = cfg.resolved_times()?;
    let ratio = cfg.bx.lower.kappa / cfg.bx.upper.kappa;
    Ok(DesignReport {
        version: REPORT_VERSION.to_string(),
        times,
        diagnostics: validate_times(&cfg.bx, &times),
        min_shots: min_shots(cfg.sigma_margin, cfg.beta, ratio)?,
        sigma_margin: cfg.sigma_margin,
    })
}

/// One simulated experiment at `theta_true`, with its full report.
pub fn cmd_run_once(cfg: &ExperimentConfig) -> Result<EstimateReport> {
    cfg.validate()?;
    let times = cfg.resolved_times()?;
    let mut source = SimulatedSource::new(cfg.theta_true, cfg.pulses(cfg.u_max), cfg.seed);
    let freq = empirical_frequencies(&source.measure(&times, cfg.n)?);
    let delta = bias_box_delta(&cfg.bx, &times, cfg.bias_grid)?;
    EstimateReport::assemble(&freq, &times, &delta, cfg.bias_amplitude(cfg.u_max), cfg.alpha)
}

/// Estimates from `trials` independent repetitions; failed inversions are kept as errors.
pub fn run_trials(cfg: &ExperimentConfig, times: &ProtocolTimes, n: u64, u_max: f64) -> Result<Vec<Result<Parameters>>> {
    let p = cfg.pulses(u_max).observables(&cfg.theta_true, times)?;
    Ok((0..cfg.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let counts = sample_counts_trial(&p, n, cfg.seed, trial)?;
            invert_ideal(&empirical_frequencies(&counts), times)
        })
        .collect())
}

/// Error statistics over successful trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialSummary {
    pub rmse: [f64; 4],
    /// Mean of `theta_hat - theta_true`.
    pub mean_error: [f64; 4],
    pub succeeded: usize,
    pub failed: usize,
}

pub fn summarize(estimates: &[Result<Parameters>], truth: &Parameters) -> TrialSummary {
    let t = truth.to_array();
    let mut sq = [0.0; 4];
    let mut sum = [0.0; 4];
    let mut ok = 0usize;
    for est in estimates.iter().flatten() {
        let e = est.to_array();
        for i in 0..4 {
            let d = e[i] - t[i];
            sq[i] += d * d;
            sum[i] += d;
        }
        ok += 1;
    }
    let m = ok.max(1) as f64;
    TrialSummary {
        rmse: sq.map(|s| (s / m).sqrt()),
        mean_error: sum.map(|s| s / m),
        succeeded: ok,
        failed: estimates.len() - ok,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RmseRow {
    pub parameter: String,
    pub true_value: f64,
    pub lower: f64,
    pub upper: f64,
    pub design_time: f64,
    pub rmse: f64,
    pub mean_error: f64,
    /// `sqrt(Sigma_ii / n)` at the noiseless observables.
    pub predicted_sd: f64,
    /// `sqrt(predicted_sd^2 + mean_error^2)`.
    pub predicted_rmse: f64,
    /// Bias-box half-width at `u_max`.
    pub bias_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RmseTable {
    pub version: String,
    pub n: u64,
    pub u_max: Option<f64>,
    pub trials: usize,
    pub failed: usize,
    pub rows: Vec<RmseRow>,
}

impl RmseTable {
    pub fn to_csv(&self, cfg: &ExperimentConfig) -> String {
        let mut out = version_line("rmse", cfg);
        out.push_str("parameter,true_value,lower,upper,design_time,rmse,mean_error,predicted_sd,predicted_rmse,bias_bound\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.parameter,
                r.true_value,
                r.lower,
                r.upper,
                r.design_time,
                r.rmse,
                r.mean_error,
                r.predicted_sd,
                r.predicted_rmse,
                r.bias_bound
            );
        }
        out
    }

    pub fn row(&self, name: &str) -> Option<&RmseRow> {
        self.rows.iter().find(|r| r.parameter == name)
    }
}

fn predicted_sd(cfg: &ExperimentConfig, times: &ProtocolTimes, n: u64) -> Result<[f64; 4]> {
    let sigma = covariance_at(&forward_ideal(&cfg.theta_true, times), times)?;
    Ok([0, 1, 2, 3].map(|i| (sigma[(i, i)] / n as f64).sqrt()))
}

fn scaled_bias(cfg: &ExperimentConfig, times: &ProtocolTimes, u_max: f64) -> Result<[f64; 4]> {
    if cfg.ideal_pulses {
        return Ok([0.0; 4]);
    }
    Ok(bias_box_delta(&cfg.bx, times, cfg.bias_grid)?.map(|d| d / u_max))
}

/// Root-mean-square error per parameter over `trials` repetitions.
pub fn cmd_rmse(cfg: &ExperimentConfig) -> Result<RmseTable> {
    cfg.validate()?;
    if cfg.trials < 2 {
        return Err(Error::Config("rmse needs trials >= 2".into()));
    }
    let times = cfg.resolved_times()?;
    let summary = summarize(&run_trials(cfg, &times, cfg.n, cfg.u_max)?, &cfg.theta_true);
    let sd = predicted_sd(cfg, &times, cfg.n)?;
    let bias = scaled_bias(cfg, &times, cfg.u_max)?;
    let (t, lo, hi) = (cfg.theta_true.to_array(), cfg.bx.lower.to_array(), cfg.bx.upper.to_array());
    let design = [times.t1, times.tau2, times.t3, times.t3];
    let rows = (0..4)
        .map(|i| RmseRow {
            parameter: Parameters::NAMES[i].to_string(),
            true_value: t[i],
            lower: lo[i],
            upper: hi[i],
            design_time: design[i],
            rmse: summary.rmse[i],
            mean_error: summary.mean_error[i],
            predicted_sd: sd[i],
            predicted_rmse: sd[i].hypot(summary.mean_error[i]),
            bias_bound: bias[i],
        })
        .collect();
    Ok(RmseTable {
        version: REPORT_VERSION.to_string(),
        n: cfg.n,
        u_max: cfg.bias_amplitude(cfg.u_max),
        trials: cfg.trials,
        failed: summary.failed,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: u64,
    pub rmse: [f64; 4],
    pub predicted_sd: [f64; 4],
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub version: String,
    pub u_max: Option<f64>,
    pub trials: usize,
    pub bias_bound: [f64; 4],
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn to_csv(&self, cfg: &ExperimentConfig) -> String {
        let mut out = version_line("convergence", cfg);
        out.push_str("n,rmse_gamma1,rmse_kappa,rmse_gamma2,rmse_omega,sd_gamma1,sd_kappa,sd_gamma2,sd_omega,failed\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.n,
                r.rmse[0],
                r.rmse[1],
                r.rmse[2],
                r.rmse[3],
                r.predicted_sd[0],
                r.predicted_sd[1],
                r.predicted_sd[2],
                r.predicted_sd[3],
                r.failed
            );
        }
        out
    }

    /// Least-squares slope of `log rmse_i` against `log n` over rows with `lo <= n <= hi`.
    pub fn slope(&self, i: usize, lo: u64, hi: u64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| lo <= r.n && r.n <= hi && r.rmse[i] > 0.0)
            .map(|r| ((r.n as f64).ln(), r.rmse[i].ln()))
            .collect();
        loglog_slope(&pts)
    }
}

/// Least-squares slope through `(x, y)` pairs; `None` with fewer than two distinct `x`.
pub fn loglog_slope(pts: &[(f64, f64)]) -> Option<f64> {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (pts.len() >= 2 && sxx > 0.0).then(|| sxy / sxx)
}

pub const DEFAULT_SWEEP: [u64; 9] = [
    10_000,
    100_000,
    1_000_000,
    10_000_000,
    100_000_000,
    1_000_000_000,
    10_000_000_000,
    100_000_000_000,
    1_000_000_000_000,
];

/// RMSE against shot count. Each `n` reuses trial indices `0..trials`.
pub fn cmd_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceTable> {
    cfg.validate()?;
    let times = cfg.resolved_times()?;
    let sweep = cfg.n_sweep.clone().unwrap_or_else(|| DEFAULT_SWEEP.to_vec());
    let mut rows = Vec::with_capacity(sweep.len());
    for &n in &sweep {
        let s = summarize(&run_trials(cfg, &times, n, cfg.u_max)?, &cfg.theta_true);
        rows.push(ConvergenceRow { n, rmse: s.rmse, predicted_sd: predicted_sd(cfg, &times, n)?, failed: s.failed });
    }
    Ok(ConvergenceTable {
        version: REPORT_VERSION.to_string(),
        u_max: cfg.bias_amplitude(cfg.u_max),
        trials: cfg.trials,
        bias_bound: scaled_bias(cfg, &times, cfg.u_max)?,
        rows,
    })
}

/// Nesting of one parameter pair between the two amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairNesting {
    pub x: String,
    pub y: String,
    /// Smallest relative support gap, outer minus inner; `>= 0` means contained.
    pub min_margin: f64,
    /// Largest relative support gap; `> 0` means the regions differ.
    pub max_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionsOutput {
    pub version: String,
    /// One report per amplitude, in `u_max_pair` order.
    pub reports: Vec<EstimateReport>,
    pub nesting: Vec<PairNesting>,
    #[serde(skip)]
    pub marginals: Vec<[Marginal2d; 2]>,
    #[serde(skip)]
    pub boundary_points: usize,
}

pub const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Directions sampled when comparing support functions.
pub const NESTING_DIRECTIONS: usize = 3600;

impl RegionsOutput {
    /// Polylines for plotting, one block per amplitude and pair.
    pub fn to_csv(&self, cfg: &ExperimentConfig) -> String {
        let mut out = version_line("regions", cfg);
        out.push_str("u_max,x_param,y_param,point,x,y\n");
        for (pair, ms) in self.marginals.iter().enumerate() {
            for (m, report) in ms.iter().zip(&self.reports) {
                let (i, j) = PAIRS[pair];
                let u = report.u_max.map_or("inf".to_string(), |u| u.to_string());
                for (k, p) in m.boundary(self.boundary_points).iter().enumerate() {
                    let _ = writeln!(out, "{u},{},{},{k},{},{}", Parameters::NAMES[i], Parameters::NAMES[j], p[0], p[1]);
                }
            }
        }
        out
    }

    pub fn all_nested(&self, tol: f64) -> bool {
        self.nesting.iter().all(|p| p.min_margin >= -tol && p.max_margin > tol)
    }
}

fn relative_gaps(outer: &Marginal2d, inner: &Marginal2d) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..NESTING_DIRECTIONS {
        let phi = std::f64::consts::TAU * k as f64 / NESTING_DIRECTIONS as f64;
        let u = [phi.cos(), phi.sin()];
        let width = outer.support(u) + outer.support([-u[0], -u[1]]);
        let gap = (outer.support(u) - inner.support(u)) / width;
        lo = lo.min(gap);
        hi = hi.max(gap);
    }
    (lo, hi)
}

/// Confidence regions at two amplitudes sharing one realisation of shot noise.
pub fn cmd_regions(cfg: &ExperimentConfig) -> Result<RegionsOutput> {
    cfg.validate()?;
    let times = cfg.resolved_times()?;
    let (ua, ub) = cfg.regions.u_max_pair;
    let pa = cfg.pulses(ua).observables(&cfg.theta_true, &times)?;
    let pb = cfg.pulses(ub).observables(&cfg.theta_true, &times)?;
    let delta = bias_box_delta(&cfg.bx, &times, cfg.bias_grid)?;

    let freqs = if cfg.regions.noiseless {
        let exact = |p: &ObservableVector| crate::measurement::EmpiricalFrequencies { p_hat: *p, n: cfg.n };
        [exact(&pa), exact(&pb)]
    } else {
        let base = sample_counts_trial(&pa, cfg.n, cfg.seed, 0)?;
        let other = coupled_counts(&base, &pa, &pb, cfg.seed, 0)?;
        [empirical_frequencies(&base), empirical_frequencies(&other)]
    };
    let reports = [
        EstimateReport::assemble(&freqs[0], &times, &delta, cfg.bias_amplitude(ua), cfg.alpha)?,
        EstimateReport::assemble(&freqs[1], &times, &delta, cfg.bias_amplitude(ub), cfg.alpha)?,
    ];

    let mut marginals = Vec::with_capacity(PAIRS.len());
    let mut nesting = Vec::with_capacity(PAIRS.len());
    for &(i, j) in &PAIRS {
        let mut ms = [reports[0].marginal(i, j), reports[1].marginal(i, j)];
        if cfg.regions.noiseless {
            for m in &mut ms {
                m.radius2 = 0.0;
            }
        }
        let (min_margin, max_margin) = relative_gaps(&ms[0], &ms[1]);
        nesting.push(PairNesting {
            x: Parameters::NAMES[i].to_string(),
            y: Parameters::NAMES[j].to_string(),
            min_margin,
            max_margin,
        });
        marginals.push(ms);
    }
    Ok(RegionsOutput {
        version: REPORT_VERSION.to_string(),
        reports: reports.to_vec(),
        nesting,
        marginals,
        boundary_points: cfg.regions.boundary_points,
    })
}

impl AdaptiveOutcome {
    pub fn to_csv(&self, cfg: &ExperimentConfig) -> String {
        let mut out = version_line("adaptive", cfg);
        out.push_str("survivor,gamma1,kappa,gamma2,omega,mismatch,ambiguous,rounds\n");
        for (k, (th, m)) in self.survivors.iter().zip(&self.mismatches).enumerate() {
            let _ = writeln!(
                out,
                "{k},{},{},{},{},{m},{},{}",
                th.gamma1,
                th.kappa,
                th.gamma2,
                th.omega,
                self.ambiguous,
                self.rounds.len()
            );
        }
        out
    }

    /// Per-round diagnostics as CSV.
    pub fn rounds_csv(&self, cfg: &ExperimentConfig) -> String {
        let mut out = version_line("adaptive-rounds", cfg);
        out.push_str("round,tau2,t3,p1,p2,p3,p4,omega_candidates,survivors_before,survivors_after,best_mismatch\n");
        for d in &self.rounds {
            let omegas = d
                .omega_candidates
                .as_ref()
                .map(|s| s.values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{omegas},{},{},{}",
                d.round,
                d.times.tau2,
                d.times.t3,
                d.p_hat[0],
                d.p_hat[1],
                d.p_hat[2],
                d.p_hat[3],
                d.survivors_before,
                d.survivors_after,
                d.best_mismatch
            );
        }
        out
    }
}

/// Branch disambiguation against the simulated source at `theta_true`.
pub fn cmd_adaptive(cfg: &ExperimentConfig) -> Result<AdaptiveOutcome> {
    cfg.validate()?;
    let times = cfg.resolved_times()?;
    let acfg = cfg.adaptive_config();
    let mut source = SimulatedSource::new(cfg.theta_true, cfg.pulses(cfg.u_max), cfg.seed);
    adaptive_identify(&mut source, &cfg.bx, &times, cfg.adaptive.n.unwrap_or(cfg.n), &acfg)
}
