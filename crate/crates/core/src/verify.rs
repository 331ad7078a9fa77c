//! Randomized property suites comparing the closed forms against the
//! all-cuts mutual-information oracle, the simulator and each other.
//!
//! Trial `i` of a run draws its network from ChaCha8 stream `i` keyed by the
//! run seed, so trials are independent of evaluation order.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::NetworkConfig;
use crate::cutset::{cutset, direct_rate, objective, parallel_channels_rate};
use crate::error::{Error, Result};
use crate::gauss_info::{aref_min_cut, CorrelationState};
use crate::montecarlo::{simulate, SimMode, SimRun};
use crate::strategies::{af_rate, mrc_rate, AfGains};

/// Bits by which the oracle and the closed form may differ.
pub const REDUCTION_TOLERANCE: f64 = 1e-6;
/// Bits by which a grid value may exceed the value at the top correlation.
pub const GRID_TIE_TOLERANCE: f64 = 1e-9;
/// Bits by which an achievable rate may exceed the bound.
pub const ORDERING_TOLERANCE: f64 = 1e-9;

/// Relay counts cycled through by the cut-reduction suite.
pub const REDUCTION_MAX_RELAYS: usize = 8;
pub const RHO_GRID_POINTS: usize = 21;
pub const RHO_SR_GRID: [f64; 4] = [0.0, 0.3, 0.6, 0.9];
pub const RHO_RR_GRID: [f64; 11] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99];
const MOMENT_BLOCKS: usize = 64;
const MOMENT_SAMPLES_PER_BLOCK: usize = 500;

/// Random-network ranges: gains log-uniform in `[1e-4, 10]`, powers uniform
/// in `[1e-3, 1]` W, noise fixed at `1e-6` W.
pub const GAIN_RANGE: (f64, f64) = (1e-4, 10.0);
pub const POWER_RANGE: (f64, f64) = (1e-3, 1.0);
pub const RANDOM_NOISE_POWER: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// All-cuts oracle at full relay correlation against the closed form.
    CutReduction,
    /// The two-relay min-cut is largest at the top of the relay correlation grid.
    FullCorrelation,
    /// Simulated second moments against their closed forms.
    Moments,
    /// The bound dominates every achievable rate.
    UpperBoundOrdering,
}

impl Suite {
    pub const ALL: [Suite; 4] = [
        Suite::CutReduction,
        Suite::FullCorrelation,
        Suite::Moments,
        Suite::UpperBoundOrdering,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::CutReduction => "cut-reduction",
            Suite::FullCorrelation => "full-correlation",
            Suite::Moments => "moments",
            Suite::UpperBoundOrdering => "upper-bound-ordering",
        }
    }

    pub fn tolerance(self) -> f64 {
        match self {
            Suite::CutReduction => REDUCTION_TOLERANCE,
            Suite::FullCorrelation => GRID_TIE_TOLERANCE,
            Suite::Moments => crate::montecarlo::PASS_SIGMAS,
            Suite::UpperBoundOrdering => ORDERING_TOLERANCE,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Suite::ALL.iter().map(|s| s.name()).collect();
                Error::config("suite", format!("unknown suite `{s}`; expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub relays: usize,
    /// Largest violation measure of the trial; compared against the suite
    /// tolerance (bits, or standard errors for the moments suite).
    pub worst_deviation: f64,
    pub pass: bool,
    /// Where the worst deviation occurred.
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub seed: u64,
    pub trials: usize,
    pub tolerance: f64,
    pub pass: bool,
    pub failures: usize,
    pub max_deviation: f64,
    pub results: Vec<TrialResult>,
}

/// A random network with `relays` relays drawn from the documented ranges.
pub fn random_config<R: Rng>(rng: &mut R, relays: usize) -> NetworkConfig {
    let (g_lo, g_hi) = (GAIN_RANGE.0.ln(), GAIN_RANGE.1.ln());
    let mut gain = || rng.random_range(g_lo..=g_hi).exp();
    let gain_sd = gain();
    let gains_sr: Vec<f64> = (0..relays).map(|_| gain()).collect();
    let gains_rd: Vec<f64> = (0..relays).map(|_| gain()).collect();
    let mut power = || rng.random_range(POWER_RANGE.0..=POWER_RANGE.1);
    let source_power = power();
    let relay_powers = (0..relays).map(|_| power()).collect();
    NetworkConfig::new(source_power, relay_powers, RANDOM_NOISE_POWER, gain_sd, gains_sr, gains_rd)
        .expect("sampled ranges are valid")
}

/// Generator for trial `trial` of a run keyed by `seed`.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// `n` evenly spaced points covering `[-1, 1]`.
pub fn rho_grid(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect()
}

pub fn run_suite(suite: Suite, seed: u64, trials: usize) -> Result<VerifyReport> {
    let results = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(suite, seed, t))
        .collect::<Result<Vec<_>>>()?;
    let failures = results.iter().filter(|r| !r.pass).count();
    let max_deviation = results.iter().map(|r| r.worst_deviation).fold(0.0, f64::max);
    Ok(VerifyReport {
        suite,
        seed,
        trials,
        tolerance: suite.tolerance(),
        pass: failures == 0,
        failures,
        max_deviation,
        results,
    })
}

fn run_trial(suite: Suite, seed: u64, trial: usize) -> Result<TrialResult> {
    let mut rng = trial_rng(seed, trial);
    match suite {
        Suite::CutReduction => {
            let relays = 1 + trial % REDUCTION_MAX_RELAYS;
            let cfg = random_config(&mut rng, relays);
            let (worst, rho) = reduction_deviation(&cfg, &rho_grid(RHO_GRID_POINTS))?;
            Ok(trial_result(trial, relays, worst, worst <= REDUCTION_TOLERANCE, format!("rho = {rho}")))
        }
        Suite::FullCorrelation => {
            let cfg = random_config(&mut rng, 2);
            let (worst, detail) = full_correlation_shortfall(&cfg)?;
            Ok(trial_result(trial, 2, worst, worst <= GRID_TIE_TOLERANCE, detail))
        }
        Suite::Moments => {
            let relays = 1 + trial % 3;
            let cfg = random_config(&mut rng, relays);
            let mode = if trial.is_multiple_of(2) {
                SimMode::Correlated {
                    rho: rng.random_range(0.0..=1.0),
                }
            } else {
                SimMode::AmplifyForward {
                    gains: AfGains::maximal(&cfg),
                }
            };
            let report = simulate(&SimRun {
                seed: rng.random(),
                num_blocks: MOMENT_BLOCKS,
                samples_per_block: MOMENT_SAMPLES_PER_BLOCK,
                config: cfg,
                mode,
            })?;
            let worst = report
                .checks
                .iter()
                .max_by(|a, b| a.z_score().abs().total_cmp(&b.z_score().abs()));
            let (dev, detail) = worst.map_or((0.0, String::new()), |c| {
                (c.z_score().abs(), c.name.clone())
            });
            Ok(trial_result(trial, relays, dev, report.all_pass(), detail))
        }
        Suite::UpperBoundOrdering => {
            let relays = 1 + trial % 4;
            let cfg = random_config(&mut rng, relays);
            let (worst, detail) = ordering_violation(&cfg)?;
            Ok(trial_result(trial, relays, worst, worst <= ORDERING_TOLERANCE, detail))
        }
    }
}

fn trial_result(trial: usize, relays: usize, worst: f64, pass: bool, detail: String) -> TrialResult {
    TrialResult {
        trial,
        relays,
        worst_deviation: worst,
        pass,
        detail,
    }
}

/// Largest `|oracle - closed form|` over `rhos` at full relay correlation,
/// and the correlation where it occurs.
pub fn reduction_deviation(cfg: &NetworkConfig, rhos: &[f64]) -> Result<(f64, f64)> {
    let mut worst = (0.0, rhos.first().copied().unwrap_or(0.0));
    for &rho in rhos {
        let corr = CorrelationState::fully_correlated(cfg.relay_count(), rho)?;
        let (oracle, _) = aref_min_cut(cfg, &corr)?;
        let dev = (oracle - objective(cfg, rho)).abs();
        if dev > worst.0 {
            worst = (dev, rho);
        }
    }
    Ok(worst)
}

/// Min-cut over the relay correlation grid for each source correlation in
/// the grid, skipping combinations that are not valid covariances. Returns
/// the largest amount by which a grid value beats the value at the top of
/// the grid.
pub fn full_correlation_shortfall(cfg: &NetworkConfig) -> Result<(f64, String)> {
    let top = *RHO_RR_GRID.last().expect("grid is non-empty");
    let mut worst = (0.0, String::new());
    for &rho_sr in &RHO_SR_GRID {
        let Some(at_top) = min_cut_at(cfg, rho_sr, top)? else {
            continue;
        };
        for &rho_rr in &RHO_RR_GRID {
            if let Some(v) = min_cut_at(cfg, rho_sr, rho_rr)? {
                if v - at_top > worst.0 {
                    worst = (v - at_top, format!("rho_sr = {rho_sr}, rho_rr = {rho_rr}"));
                }
            }
        }
    }
    Ok(worst)
}

fn min_cut_at(cfg: &NetworkConfig, rho_sr: f64, rho_rr: f64) -> Result<Option<f64>> {
    match CorrelationState::uniform(cfg.relay_count(), rho_sr, rho_rr) {
        Ok(corr) => Ok(Some(aref_min_cut(cfg, &corr)?.0)),
        Err(Error::Domain(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Largest excess of an achievable rate over the bound. AF is evaluated at
/// the maximal factors; at MAC-limited optima the parallel-channels rate is
/// included as well.
pub fn ordering_violation(cfg: &NetworkConfig) -> Result<(f64, String)> {
    let bound = cutset(cfg);
    let mut rivals = vec![
        ("direct", direct_rate(cfg)),
        ("af", af_rate(cfg, &AfGains::maximal(cfg))?),
        ("mrc", mrc_rate(cfg)),
    ];
    if bound.binding_cut.mac_active() {
        rivals.push(("parallel", parallel_channels_rate(cfg)));
    }
    let mut worst = (0.0, String::new());
    for (name, rate) in rivals {
        if rate - bound.rate > worst.0 {
            worst = (rate - bound.rate, name.to_string());
        }
    }
    Ok(worst)
}
