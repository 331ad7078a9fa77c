//! Sample-level simulation of the relay network, used to check closed-form
//! second moments against empirical estimates.
//!
//! Randomness: every `(block, node)` pair draws from its own ChaCha8 stream,
//! `stream = block * 64 + node`, keyed by the run seed. Node ids are 0 for the
//! source symbol, 1 for the shared relay innovation, 2 for the destination
//! noise and `3 + r` for the noise at relay `r`. Blocks can therefore be
//! generated in any order; the reduction runs in block order with compensated
//! sums so reports are bit-identical for identical inputs.
//!
//! Standard errors use batch means: the `n * B` samples are split into
//! `min(64, n * B)` contiguous batches, each statistic is evaluated per batch,
//! and the spread of those values gives the error of the pooled estimate.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::NetworkConfig;
use crate::error::{Error, Result};
use crate::gauss_info::{cond_cov_broadcast, conditional_covariance, var_yd};
use crate::strategies::AfGains;

/// A check passes when the estimate is within this many standard errors.
pub const PASS_SIGMAS: f64 = 4.0;
pub const MAX_BATCHES: usize = 64;
/// Relay count limited by the stream layout (three shared nodes per block).
pub const MAX_SIMULATED_RELAYS: usize = STREAMS_PER_BLOCK as usize - 3;

const STREAMS_PER_BLOCK: u64 = 64;
/// Blocks generated in parallel before each ordered reduction step.
const BLOCK_CHUNK: usize = 256;

const NODE_SOURCE: u64 = 0;
const NODE_SHARED: u64 = 1;
const NODE_DEST: u64 = 2;
const NODE_RELAY_BASE: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    /// Relays share one innovation, so all relay outputs are fully correlated
    /// with each other and have correlation `rho` with the source.
    Correlated { rho: f64 },
    /// Each relay forwards its previous block's observation scaled by `beta_r`.
    AmplifyForward { gains: AfGains },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRun {
    pub seed: u64,
    pub num_blocks: usize,
    pub samples_per_block: usize,
    pub config: NetworkConfig,
    pub mode: SimMode,
}

impl SimRun {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.num_blocks == 0 {
            return Err(Error::config("num_blocks", "must be at least 1"));
        }
        if self.samples_per_block == 0 {
            return Err(Error::config("samples_per_block", "must be at least 1"));
        }
        if self.total_samples() < 2 {
            return Err(Error::config(
                "samples_per_block",
                "need at least 2 samples in total to estimate a standard error",
            ));
        }
        if self.config.relay_count() > MAX_SIMULATED_RELAYS {
            return Err(Error::Capability {
                what: format!("{} simulated relays", self.config.relay_count()),
                limit: MAX_SIMULATED_RELAYS,
            });
        }
        match &self.mode {
            SimMode::Correlated { rho } => {
                if !rho.is_finite() || rho.abs() > 1.0 {
                    return Err(Error::config("rho", "must lie in [-1, 1]"));
                }
            }
            SimMode::AmplifyForward { gains } => gains.check(&self.config)?,
        }
        Ok(())
    }

    pub fn total_samples(&self) -> u64 {
        self.num_blocks as u64 * self.samples_per_block as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `|empirical - predicted| <= 4 sigma`.
    Equal,
    /// `empirical <= predicted + 4 sigma`.
    AtMost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub name: String,
    pub predicted: f64,
    pub empirical: f64,
    pub std_error: f64,
    pub relation: Relation,
    pub pass: bool,
}

impl MomentCheck {
    /// `(empirical - predicted) / std_error`.
    pub fn z_score(&self) -> f64 {
        (self.empirical - self.predicted) / self.std_error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub mode: String,
    pub seed: u64,
    pub num_blocks: usize,
    pub samples_per_block: usize,
    pub batches: usize,
    /// Gated comparisons; see [`MomentReport::all_pass`].
    pub checks: Vec<MomentCheck>,
    /// Comparisons reported for inspection only.
    pub observations: Vec<MomentCheck>,
}

impl MomentReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&MomentCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn observation(&self, name: &str) -> Option<&MomentCheck> {
        self.observations.iter().find(|c| c.name == name)
    }
}

pub fn simulate(run: &SimRun) -> Result<MomentReport> {
    match run.mode {
        SimMode::Correlated { .. } => simulate_correlated(run),
        SimMode::AmplifyForward { .. } => simulate_af(run),
    }
}

/// Simulates one use of the network per sample with fully correlated relays.
///
/// The sample vector is `(X_s, X_1..X_R, Y_1..Y_R, Y_d)`. Checks: source and
/// relay powers, `Var(Y_d)`, for each relay `det S((Y_d, Y_r) | X_r) / N`
/// against `(g_sd + g_sr) P_s (1 - rho^2) + N` and the same with `X_s` also
/// known against `N`, and the residual of `Y_d` given every transmitter
/// against `N`. Checks whose predicted value is exactly zero are omitted.
pub fn simulate_correlated(run: &SimRun) -> Result<MomentReport> {
    run.validate()?;
    let SimMode::Correlated { rho } = run.mode else {
        return Err(Error::config("mode", "expected the correlated mode"));
    };
    let cfg = &run.config;
    let r_count = cfg.relay_count();
    let dim = 2 * r_count + 2;
    let yd = dim - 1;
    // With a silent source the relays send the innovation alone.
    let (rho_s, rho_w) = if cfg.source_power > 0.0 {
        (rho, (1.0 - rho * rho).max(0.0).sqrt())
    } else {
        (0.0, 1.0)
    };

    let sampler = CorrelatedSampler {
        seed: run.seed,
        n: run.samples_per_block,
        ps_amp: cfg.source_power.sqrt(),
        noise_amp: cfg.noise_power.sqrt(),
        sd_amp: cfg.gain_sd.sqrt(),
        relay_amp: cfg.relay_powers.iter().map(|p| p.sqrt()).collect(),
        sr_amp: cfg.gains_sr.iter().map(|g| g.sqrt()).collect(),
        rd_amp: cfg.gains_rd.iter().map(|g| g.sqrt()).collect(),
        rho_s,
        rho_w,
    };
    let batches = accumulate(run, dim, &sampler);

    let rho_eff = if cfg.source_power > 0.0 { rho } else { 0.0 };
    let mut checks: Vec<Statistic> = Vec::new();
    checks.push(Statistic::second_moment("source_power", cfg.source_power, 0));
    for r in 0..r_count {
        let p = cfg.relay_powers[r];
        checks.push(Statistic::second_moment(format!("relay_power[{r}]"), p, 1 + r));
        checks.push(Statistic::second_moment(format!("relay_power_limit[{r}]"), p, 1 + r).at_most());
    }
    checks.push(Statistic::second_moment("var_yd", var_yd(cfg, rho_eff), yd));
    for r in (0..r_count).filter(|&r| cfg.relay_powers[r] > 0.0) {
        let pair = [yd, 1 + r_count + r];
        let noise = cfg.noise_power;
        checks.push(Statistic::new(
            format!("cond_broadcast[{r}]"),
            cond_cov_broadcast(cfg, r, rho_eff),
            move |m| conditional_covariance(m, &pair, &[1 + r]).determinant() / noise,
        ));
        checks.push(Statistic::new(
            format!("cond_broadcast_given_source[{r}]"),
            noise,
            move |m| conditional_covariance(m, &pair, &[1 + r, 0]).determinant() / noise,
        ));
    }
    let transmitters: Vec<usize> = (0..=r_count).collect();
    checks.push(Statistic::new("residual_yd", cfg.noise_power, move |m| {
        conditional_covariance(m, &[yd], &transmitters)[(0, 0)]
    }));

    Ok(finish(run, "correlated", &batches, checks, Vec::new()))
}

/// Simulates amplify-and-forward with a one-block relay delay: in block `b`
/// the destination hears the source's block-`b` symbol directly and each
/// relay's scaled observation of the block-`b - 1` symbol. The block before
/// the first is generated from its own streams, so every block is in steady
/// state.
///
/// The sample vector is `(X_s, X_1..X_R, Y_d, direct, branch_1..branch_R,
/// signal, noise)` where `signal = direct + sum branch_r` and `noise` is the
/// destination noise plus the forwarded relay noise. Checks: relay powers
/// against `beta^2 (g_sr P_s + N)` and the limit `P_r`, the noise floor
/// `(1 + sum beta^2 g_rd) N`, the direct and per-branch signal powers and
/// `Var(Y_d)`. The coherent amplitude-sum power used by the rate formula is
/// reported as an observation next to the empirical signal power.
pub fn simulate_af(run: &SimRun) -> Result<MomentReport> {
    run.validate()?;
    let SimMode::AmplifyForward { gains } = &run.mode else {
        return Err(Error::config("mode", "expected the amplify-and-forward mode"));
    };
    let cfg = &run.config;
    let r_count = cfg.relay_count();
    let dim = 2 * r_count + 5;
    let yd = 1 + r_count;
    let direct_idx = yd + 1;
    let signal_idx = direct_idx + 1 + r_count;
    let noise_idx = signal_idx + 1;
    let beta: Vec<f64> = gains.beta.iter().map(|b| b.abs()).collect();
    let sampler = AfSampler {
        seed: run.seed,
        n: run.samples_per_block,
        ps_amp: cfg.source_power.sqrt(),
        noise_amp: cfg.noise_power.sqrt(),
        sd_amp: cfg.gain_sd.sqrt(),
        sr_amp: cfg.gains_sr.iter().map(|g| g.sqrt()).collect(),
        rd_amp: cfg.gains_rd.iter().map(|g| g.sqrt()).collect(),
        beta: beta.clone(),
    };
    let batches = accumulate(run, dim, &sampler);

    let ps = cfg.source_power;
    let n0 = cfg.noise_power;
    let floor = n0 * (1.0 + (0..r_count).map(|r| beta[r] * beta[r] * cfg.gains_rd[r]).sum::<f64>());
    let branch_amp: Vec<f64> = (0..r_count)
        .map(|r| beta[r] * (cfg.gains_sr[r] * cfg.gains_rd[r]).sqrt())
        .collect();
    let branch_sum: f64 = branch_amp.iter().sum();
    let incoherent = cfg.gain_sd * ps + branch_sum * branch_sum * ps;

    let mut checks: Vec<Statistic> = Vec::new();
    checks.push(Statistic::second_moment("source_power", ps, 0));
    for (r, b) in beta.iter().enumerate() {
        let out = b * b * (cfg.gains_sr[r] * ps + n0);
        checks.push(Statistic::second_moment(format!("relay_power[{r}]"), out, 1 + r));
        checks.push(
            Statistic::second_moment(format!("relay_power_limit[{r}]"), cfg.relay_powers[r], 1 + r)
                .at_most(),
        );
    }
    checks.push(Statistic::second_moment("noise_floor", floor, noise_idx));
    checks.push(Statistic::second_moment("direct_power", cfg.gain_sd * ps, direct_idx));
    for (r, amp) in branch_amp.iter().enumerate() {
        let p = amp * amp * ps;
        checks.push(Statistic::second_moment(format!("branch_power[{r}]"), p, direct_idx + 1 + r));
    }
    checks.push(Statistic::second_moment("var_yd", incoherent + floor, yd));

    let coherent = (cfg.gain_sd.sqrt() + branch_sum).powi(2) * ps;
    let observations = vec![
        Statistic::second_moment("coherent_signal_power", coherent, signal_idx),
        Statistic::second_moment("signal_power", incoherent, signal_idx),
    ];

    Ok(finish(run, "amplify_forward", &batches, checks, observations))
}

/// Produces the sample vectors of one block.
trait BlockSampler: Sync {
    type Block;
    fn prepare(&self, block: usize) -> Self::Block;
    fn write(&self, block: &Self::Block, j: usize, v: &mut [f64]);
}

struct CorrelatedSampler {
    seed: u64,
    n: usize,
    ps_amp: f64,
    noise_amp: f64,
    sd_amp: f64,
    relay_amp: Vec<f64>,
    sr_amp: Vec<f64>,
    rd_amp: Vec<f64>,
    rho_s: f64,
    rho_w: f64,
}

impl BlockSampler for CorrelatedSampler {
    type Block = BlockDraws;

    fn prepare(&self, block: usize) -> BlockDraws {
        BlockDraws::generate(self.seed, block as u64, self.relay_amp.len(), self.n)
    }

    fn write(&self, d: &BlockDraws, j: usize, v: &mut [f64]) {
        let r_count = self.relay_amp.len();
        let s = d.source[j];
        let xs = self.ps_amp * s;
        let innovation = self.rho_s * s + self.rho_w * d.shared[j];
        v[0] = xs;
        let mut y = self.sd_amp * xs + self.noise_amp * d.dest[j];
        for r in 0..r_count {
            let xr = self.relay_amp[r] * innovation;
            v[1 + r] = xr;
            v[1 + r_count + r] = self.sr_amp[r] * xs + self.noise_amp * d.relay[r][j];
            y += self.rd_amp[r] * xr;
        }
        v[2 * r_count + 1] = y;
    }
}

struct AfSampler {
    seed: u64,
    n: usize,
    ps_amp: f64,
    noise_amp: f64,
    sd_amp: f64,
    sr_amp: Vec<f64>,
    rd_amp: Vec<f64>,
    beta: Vec<f64>,
}

impl BlockSampler for AfSampler {
    /// Draws of the previous block and of this one.
    type Block = (BlockDraws, BlockDraws);

    fn prepare(&self, block: usize) -> Self::Block {
        let r = self.beta.len();
        (
            BlockDraws::generate(self.seed, block as u64, r, self.n),
            BlockDraws::generate(self.seed, block as u64 + 1, r, self.n),
        )
    }

    fn write(&self, (prev, cur): &Self::Block, j: usize, v: &mut [f64]) {
        let r_count = self.beta.len();
        let yd = 1 + r_count;
        let xs = self.ps_amp * cur.source[j];
        let xs_prev = self.ps_amp * prev.source[j];
        let direct = self.sd_amp * xs;
        let mut signal = direct;
        let mut noise = self.noise_amp * cur.dest[j];
        v[0] = xs;
        for r in 0..r_count {
            let relay_noise = self.noise_amp * prev.relay[r][j];
            let xr = self.beta[r] * (self.sr_amp[r] * xs_prev + relay_noise);
            v[1 + r] = xr;
            let branch = self.rd_amp[r] * self.beta[r] * self.sr_amp[r] * xs_prev;
            v[yd + 2 + r] = branch;
            signal += branch;
            noise += self.rd_amp[r] * self.beta[r] * relay_noise;
        }
        v[yd] = signal + noise;
        v[yd + 1] = direct;
        v[yd + 2 + r_count] = signal;
        v[yd + 3 + r_count] = noise;
    }
}

struct BlockDraws {
    source: Vec<f64>,
    shared: Vec<f64>,
    dest: Vec<f64>,
    relay: Vec<Vec<f64>>,
}

impl BlockDraws {
    fn generate(seed: u64, block: u64, relays: usize, n: usize) -> Self {
        let draw = |node: u64| -> Vec<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(block * STREAMS_PER_BLOCK + node);
            (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
        };
        BlockDraws {
            source: draw(NODE_SOURCE),
            shared: draw(NODE_SHARED),
            dest: draw(NODE_DEST),
            relay: (0..relays as u64).map(|r| draw(NODE_RELAY_BASE + r)).collect(),
        }
    }
}

/// Packed upper triangle of `sum v v^T` over some samples.
#[derive(Clone)]
struct Moments {
    dim: usize,
    count: u64,
    sums: Vec<f64>,
}

impl Moments {
    fn new(dim: usize) -> Self {
        Moments {
            dim,
            count: 0,
            sums: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    fn add(&mut self, v: &[f64]) {
        let mut k = 0;
        for i in 0..self.dim {
            let vi = v[i];
            for &vj in &v[i..] {
                self.sums[k] += vi * vj;
                k += 1;
            }
        }
        self.count += 1;
    }

    fn second_moment_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        let c = self.count as f64;
        let mut k = 0;
        for i in 0..self.dim {
            for j in i..self.dim {
                m[(i, j)] = self.sums[k] / c;
                m[(j, i)] = m[(i, j)];
                k += 1;
            }
        }
        m
    }
}

/// Neumaier-compensated running sums of [`Moments`].
#[derive(Clone)]
struct CompensatedMoments {
    sum: Moments,
    comp: Vec<f64>,
}

impl CompensatedMoments {
    fn new(dim: usize) -> Self {
        let sum = Moments::new(dim);
        let comp = vec![0.0; sum.sums.len()];
        CompensatedMoments { sum, comp }
    }

    fn add(&mut self, part: &Moments) {
        for ((s, c), &x) in self.sum.sums.iter_mut().zip(&mut self.comp).zip(&part.sums) {
            let t = *s + x;
            if s.abs() >= x.abs() {
                *c += (*s - t) + x;
            } else {
                *c += (x - t) + *s;
            }
            *s = t;
        }
        self.sum.count += part.count;
    }

    fn total(&self) -> Moments {
        let mut m = self.sum.clone();
        for (s, c) in m.sums.iter_mut().zip(&self.comp) {
            *s += c;
        }
        m
    }
}

fn batch_count(run: &SimRun) -> usize {
    MAX_BATCHES.min(run.total_samples() as usize)
}

/// First global sample index of batch `k`.
fn batch_start(k: usize, batches: usize, total: u64) -> u64 {
    ((k as u128 * total as u128).div_ceil(batches as u128)) as u64
}

/// Per-batch moment sums over all blocks.
fn accumulate<S: BlockSampler>(run: &SimRun, dim: usize, sampler: &S) -> Vec<Moments> {
    let n = run.samples_per_block;
    let total = run.total_samples();
    let k_count = batch_count(run);
    let mut acc = vec![CompensatedMoments::new(dim); k_count];

    let block_parts = |b: usize| -> Vec<(usize, Moments)> {
        let block = sampler.prepare(b);
        let first = b as u64 * n as u64;
        let mut k = ((first as u128 * k_count as u128) / total as u128) as usize;
        let mut next = batch_start(k + 1, k_count, total);
        let mut parts = Vec::new();
        let mut current = Moments::new(dim);
        let mut v = vec![0.0; dim];
        for j in 0..n {
            let g = first + j as u64;
            while g >= next {
                if current.count > 0 {
                    parts.push((k, std::mem::replace(&mut current, Moments::new(dim))));
                }
                k += 1;
                next = batch_start(k + 1, k_count, total);
            }
            sampler.write(&block, j, &mut v);
            current.add(&v);
        }
        if current.count > 0 {
            parts.push((k, current));
        }
        parts
    };

    for chunk_start in (0..run.num_blocks).step_by(BLOCK_CHUNK) {
        let chunk_end = (chunk_start + BLOCK_CHUNK).min(run.num_blocks);
        let parts: Vec<Vec<(usize, Moments)>> =
            (chunk_start..chunk_end).into_par_iter().map(&block_parts).collect();
        for (k, m) in parts.iter().flatten() {
            acc[*k].add(m);
        }
    }
    acc.iter().map(CompensatedMoments::total).collect()
}

type StatFn = Box<dyn Fn(&DMatrix<f64>) -> f64>;

struct Statistic {
    name: String,
    predicted: f64,
    relation: Relation,
    eval: StatFn,
}

impl Statistic {
    fn new(name: impl Into<String>, predicted: f64, eval: impl Fn(&DMatrix<f64>) -> f64 + 'static) -> Self {
        Statistic {
            name: name.into(),
            predicted,
            relation: Relation::Equal,
            eval: Box::new(eval),
        }
    }

    fn second_moment(name: impl Into<String>, predicted: f64, index: usize) -> Self {
        Self::new(name, predicted, move |m| m[(index, index)])
    }

    fn at_most(mut self) -> Self {
        self.relation = Relation::AtMost;
        self
    }

    fn evaluate(&self, pooled: &DMatrix<f64>, per_batch: &[DMatrix<f64>]) -> MomentCheck {
        let empirical = (self.eval)(pooled);
        let values: Vec<f64> = per_batch.iter().map(|m| (self.eval)(m)).collect();
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
        let std_error = (var / k).sqrt();
        let margin = PASS_SIGMAS * std_error;
        let pass = match self.relation {
            Relation::Equal => (empirical - self.predicted).abs() <= margin,
            Relation::AtMost => empirical <= self.predicted + margin,
        };
        MomentCheck {
            name: self.name.clone(),
            predicted: self.predicted,
            empirical,
            std_error,
            relation: self.relation,
            pass,
        }
    }
}

fn finish(
    run: &SimRun,
    mode: &str,
    batches: &[Moments],
    checks: Vec<Statistic>,
    observations: Vec<Statistic>,
) -> MomentReport {
    let mut pooled = CompensatedMoments::new(batches[0].dim);
    for b in batches {
        pooled.add(b);
    }
    let pooled = pooled.total().second_moment_matrix();
    let per_batch: Vec<DMatrix<f64>> = batches.iter().map(Moments::second_moment_matrix).collect();
    // A quantity that is identically zero has nothing to estimate.
    let run_all = |stats: Vec<Statistic>| -> Vec<MomentCheck> {
        stats
            .iter()
            .filter(|s| s.predicted != 0.0)
            .map(|s| s.evaluate(&pooled, &per_batch))
            .collect()
    };
    MomentReport {
        mode: mode.to_string(),
        seed: run.seed,
        num_blocks: run.num_blocks,
        samples_per_block: run.samples_per_block,
        batches: batches.len(),
        checks: run_all(checks),
        observations: run_all(observations),
    }
}
