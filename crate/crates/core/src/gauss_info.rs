//! Jointly Gaussian model of every transmit and receive variable in the
//! network, conditional mutual information through log-determinants, and
//! the brute-force evaluation of every network cut.
//!
//! Variables are ordered `X_s, X_1..X_R, Y_1..Y_R, Y_d`, where `X` are
//! transmitted signals and `Y` received ones. A cut `T` groups the relays in
//! `T` with the source; its value is `I(X_s X_T ; Y_d Y_{T^c} | X_{T^c})`.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::channel::NetworkConfig;
use crate::error::{Error, Result};

/// Eigenvalues of the transmit correlation matrix may dip this far below zero.
pub const PSD_TOLERANCE: f64 = 1e-9;
/// Schur pivots at or below this fraction of their unconditioned variance,
/// and eigenvalues at or below this fraction of the block trace, are treated
/// as zero.
pub const RANK_THRESHOLD: f64 = 1e-12;
/// Largest relay count whose `2^R` cuts are enumerated.
pub const MAX_ENUMERATED_RELAYS: usize = 20;
/// Cut values closer than this (bits) are ties.
pub const CUT_TIE_TOLERANCE: f64 = 1e-9;

const PARALLEL_CUT_THRESHOLD: usize = 12;

/// Correlation coefficients between the source and each relay output, and
/// between pairs of relay outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationState {
    rho_sr: Vec<f64>,
    rho_rr: DMatrix<f64>,
}

impl CorrelationState {
    pub fn new(rho_sr: Vec<f64>, rho_rr: DMatrix<f64>) -> Result<Self> {
        let relays = rho_sr.len();
        if rho_rr.nrows() != relays || rho_rr.ncols() != relays {
            return Err(Error::Domain(format!(
                "rho_rr must be {relays}x{relays}, got {}x{}",
                rho_rr.nrows(),
                rho_rr.ncols()
            )));
        }
        let in_range = |v: f64| v.is_finite() && v.abs() <= 1.0;
        if let Some(v) = rho_sr.iter().find(|v| !in_range(**v)) {
            return Err(Error::Domain(format!("rho_sr entry {v} outside [-1, 1]")));
        }
        for i in 0..relays {
            if rho_rr[(i, i)] != 1.0 {
                return Err(Error::Domain("rho_rr must have a unit diagonal".into()));
            }
            for j in 0..i {
                if !in_range(rho_rr[(i, j)]) || rho_rr[(i, j)] != rho_rr[(j, i)] {
                    return Err(Error::Domain(format!(
                        "rho_rr[{i},{j}] must be symmetric and within [-1, 1]"
                    )));
                }
            }
        }
        let state = CorrelationState { rho_sr, rho_rr };
        let min_eig = SymmetricEigen::new(state.transmit_correlation())
            .eigenvalues
            .min();
        if min_eig < -PSD_TOLERANCE {
            return Err(Error::Domain(format!(
                "transmit correlation matrix is not positive semidefinite (eigenvalue {min_eig:e})"
            )));
        }
        Ok(state)
    }

    /// The same `rho_sr` for every relay and the same `rho_rr` for every pair.
    pub fn uniform(relays: usize, rho_sr: f64, rho_rr: f64) -> Result<Self> {
        let rr = DMatrix::from_fn(relays, relays, |i, j| if i == j { 1.0 } else { rho_rr });
        Self::new(vec![rho_sr; relays], rr)
    }

    /// Relay outputs fully correlated with each other.
    pub fn fully_correlated(relays: usize, rho_sr: f64) -> Result<Self> {
        Self::uniform(relays, rho_sr, 1.0)
    }

    pub fn relay_count(&self) -> usize {
        self.rho_sr.len()
    }

    pub fn rho_sr(&self) -> &[f64] {
        &self.rho_sr
    }

    pub fn rho_rr(&self) -> &DMatrix<f64> {
        &self.rho_rr
    }

    /// Correlation matrix of `(X_s, X_1..X_R)`.
    pub fn transmit_correlation(&self) -> DMatrix<f64> {
        let r = self.relay_count();
        DMatrix::from_fn(r + 1, r + 1, |i, j| match (i, j) {
            (0, 0) => 1.0,
            (0, k) | (k, 0) => self.rho_sr[k - 1],
            (a, b) => self.rho_rr[(a - 1, b - 1)],
        })
    }
}

/// A variable of the network model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    /// `X_s`
    SourceTx,
    /// `X_r`
    RelayTx(usize),
    /// `Y_r`
    RelayRx(usize),
    /// `Y_d`
    DestRx,
}

/// Relay subset placed on the transmit side of a cut, as a bitmask over
/// relay indices. Ordering follows the mask value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cut {
    mask: u32,
}

impl Cut {
    /// The broadcast side: no relay joins the source.
    pub const fn empty() -> Self {
        Cut { mask: 0 }
    }

    /// The multiple-access side: every relay joins the source.
    pub fn full(relays: usize) -> Self {
        assert!(relays <= MAX_ENUMERATED_RELAYS);
        Cut {
            mask: ((1u64 << relays) - 1) as u32,
        }
    }

    pub fn from_mask(mask: u32) -> Self {
        Cut { mask }
    }

    pub fn from_relays(relays: &[usize]) -> Self {
        Cut {
            mask: relays.iter().fold(0, |m, &r| m | (1 << r)),
        }
    }

    pub fn mask(self) -> u32 {
        self.mask
    }

    pub fn contains(self, relay: usize) -> bool {
        self.mask >> relay & 1 == 1
    }

    /// Relays in `T`.
    pub fn members(self, relays: usize) -> Vec<usize> {
        (0..relays).filter(|&r| self.contains(r)).collect()
    }

    /// Relays in `T^c`.
    pub fn complement(self, relays: usize) -> Vec<usize> {
        (0..relays).filter(|&r| !self.contains(r)).collect()
    }
}

/// Covariance of `(X_s, X_1..X_R, Y_1..Y_R, Y_d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointGaussian {
    covariance: DMatrix<f64>,
    relays: usize,
}

/// Assembles the joint covariance of the network from its link model
/// `Y_r = sqrt(g_sr) X_s + Z_r`, `Y_d = sqrt(g_sd) X_s + sum_r sqrt(g_rd) X_r + Z_d`
/// with independent noises of variance `N`.
pub fn build_joint(config: &NetworkConfig, corr: &CorrelationState) -> Result<JointGaussian> {
    let relays = config.relay_count();
    if corr.relay_count() != relays {
        return Err(Error::Domain(format!(
            "correlation state has {} relays, configuration has {relays}",
            corr.relay_count()
        )));
    }
    let tx = relays + 1;
    let amp: Vec<f64> = std::iter::once(config.source_power)
        .chain(config.relay_powers.iter().copied())
        .map(f64::sqrt)
        .collect();
    let rho = corr.transmit_correlation();
    let sigma_x = DMatrix::from_fn(tx, tx, |i, j| rho[(i, j)] * amp[i] * amp[j]);

    // Y = H X + Z, rows Y_1..Y_R then Y_d.
    let mut h = DMatrix::zeros(tx, tx);
    for r in 0..relays {
        h[(r, 0)] = config.gains_sr[r].sqrt();
        h[(relays, r + 1)] = config.gains_rd[r].sqrt();
    }
    h[(relays, 0)] = config.gain_sd.sqrt();

    let sigma_yx = &h * &sigma_x;
    let mut sigma_yy = &sigma_yx * h.transpose();
    for i in 0..tx {
        sigma_yy[(i, i)] += config.noise_power;
    }

    let n = 2 * tx;
    let mut covariance = DMatrix::zeros(n, n);
    covariance.view_mut((0, 0), (tx, tx)).copy_from(&sigma_x);
    covariance.view_mut((tx, 0), (tx, tx)).copy_from(&sigma_yx);
    covariance
        .view_mut((0, tx), (tx, tx))
        .copy_from(&sigma_yx.transpose());
    covariance.view_mut((tx, tx), (tx, tx)).copy_from(&sigma_yy);
    // Exact symmetry regardless of rounding in the products above.
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (covariance[(i, j)] + covariance[(j, i)]);
            covariance[(i, j)] = v;
            covariance[(j, i)] = v;
        }
    }
    Ok(JointGaussian { covariance, relays })
}

impl JointGaussian {
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn relay_count(&self) -> usize {
        self.relays
    }

    pub fn index(&self, var: Var) -> usize {
        let r = self.relays;
        match var {
            Var::SourceTx => 0,
            Var::RelayTx(i) => {
                assert!(i < r, "relay index {i} out of range");
                1 + i
            }
            Var::RelayRx(i) => {
                assert!(i < r, "relay index {i} out of range");
                r + 1 + i
            }
            Var::DestRx => 2 * r + 1,
        }
    }

    fn indices(&self, vars: &[Var]) -> Vec<usize> {
        vars.iter().map(|&v| self.index(v)).collect()
    }

    /// `I(A; B | C)` in bits.
    pub fn mutual_information(&self, a: &[Var], b: &[Var], c: &[Var]) -> Result<f64> {
        mutual_information(
            &self.covariance,
            &self.indices(a),
            &self.indices(b),
            &self.indices(c),
        )
    }

    /// Value of a single network cut in bits.
    pub fn cut_value(&self, cut: Cut) -> Result<f64> {
        let r = self.relays;
        if r < 32 && cut.mask >> r != 0 {
            return Err(Error::Domain(format!(
                "cut mask {:#b} names relays beyond {r}",
                cut.mask
            )));
        }
        let inside = cut.members(r);
        let outside = cut.complement(r);
        let a: Vec<usize> = std::iter::once(0).chain(inside.iter().map(|i| 1 + i)).collect();
        let b: Vec<usize> = std::iter::once(2 * r + 1)
            .chain(outside.iter().map(|i| r + 1 + i))
            .collect();
        let c: Vec<usize> = outside.iter().map(|i| 1 + i).collect();
        mutual_information(&self.covariance, &a, &b, &c)
    }

    /// Exhaustive minimum over all `2^R` cuts. Values within
    /// [`CUT_TIE_TOLERANCE`] of the minimum tie and the smallest mask wins.
    pub fn min_cut(&self) -> Result<(f64, Cut)> {
        let r = self.relays;
        if r > MAX_ENUMERATED_RELAYS {
            return Err(Error::Capability {
                what: format!("cut enumeration over {r} relays"),
                limit: MAX_ENUMERATED_RELAYS,
            });
        }
        let count = 1u32 << r;
        let values: Vec<f64> = if r >= PARALLEL_CUT_THRESHOLD {
            (0..count)
                .into_par_iter()
                .map(|m| self.cut_value(Cut::from_mask(m)))
                .collect::<Result<_>>()?
        } else {
            (0..count)
                .map(|m| self.cut_value(Cut::from_mask(m)))
                .collect::<Result<_>>()?
        };
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let mask = values
            .iter()
            .position(|&v| v <= min + CUT_TIE_TOLERANCE)
            .expect("at least one cut") as u32;
        Ok((min, Cut::from_mask(mask)))
    }
}

/// `Var(Y_d)` at full relay correlation with a common source-relay
/// correlation `rho`.
pub fn var_yd(config: &NetworkConfig, rho: f64) -> f64 {
    coherent_signal_power(config, rho) + config.noise_power
}

/// The signal part of `Var(Y_d)`: `(sqrt(g_sd P_s))^2 + 2 rho sqrt(g_sd P_s) A + A^2`
/// with `A = sum_r sqrt(g_rd P_r)`.
pub(crate) fn coherent_signal_power(config: &NetworkConfig, rho: f64) -> f64 {
    let direct = config.gain_sd * config.source_power;
    let relay_amplitude: f64 = config
        .gains_rd
        .iter()
        .zip(&config.relay_powers)
        .map(|(g, p)| (g * p).sqrt())
        .sum();
    (direct + relay_amplitude * (2.0 * rho * direct.sqrt() + relay_amplitude)).max(0.0)
}

/// Conditional covariance of `(Y_d, Y_r)` given `X_r`, read as the scalar
/// `(g_sd + g_sr) P_s (1 - rho^2) + N`.
pub fn cond_cov_broadcast(config: &NetworkConfig, relay: usize, rho: f64) -> f64 {
    broadcast_signal_power(config, relay, rho) + config.noise_power
}

pub(crate) fn broadcast_signal_power(config: &NetworkConfig, relay: usize, rho: f64) -> f64 {
    (config.gain_sd + config.gains_sr[relay]) * config.source_power * (1.0 - rho * rho).max(0.0)
}

/// Value of one cut for the given configuration and correlation structure.
pub fn aref_cut_value(config: &NetworkConfig, corr: &CorrelationState, cut: Cut) -> Result<f64> {
    build_joint(config, corr)?.cut_value(cut)
}

/// Minimum over all `2^R` cuts with the minimizing cut.
pub fn aref_min_cut(config: &NetworkConfig, corr: &CorrelationState) -> Result<(f64, Cut)> {
    if config.relay_count() > MAX_ENUMERATED_RELAYS {
        return Err(Error::Capability {
            what: format!("cut enumeration over {} relays", config.relay_count()),
            limit: MAX_ENUMERATED_RELAYS,
        });
    }
    build_joint(config, corr)?.min_cut()
}

/// Conditional mutual information `I(A; B | C)` in bits for a zero-mean
/// Gaussian vector with covariance `cov`:
/// `1/2 log2( det S(B|C) / det S(B|A,C) )`.
///
/// Conditioning drops directions whose Schur pivot is at most
/// [`RANK_THRESHOLD`] times the variable's unconditioned variance, which is
/// pseudo-inverse conditioning for exactly dependent variables. When either
/// conditional block of `B` is numerically singular, pseudo-determinants over
/// eigenvalues above the threshold are used; a rank drop between the two
/// blocks is reported as [`Error::NumericalDegeneracy`].
pub fn mutual_information(cov: &DMatrix<f64>, a: &[usize], b: &[usize], c: &[usize]) -> Result<f64> {
    let n = cov.nrows();
    if cov.ncols() != n {
        return Err(Error::Domain("covariance must be square".into()));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("A and B must be non-empty".into()));
    }
    let mut seen = vec![false; n];
    for &i in a.iter().chain(b).chain(c) {
        if i >= n {
            return Err(Error::Domain(format!("variable index {i} out of range")));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::Domain(format!(
                "variable {i} appears in more than one of A, B, C"
            )));
        }
    }

    // Work on B, A, C in that order, scaled to unit variance. Scaling cancels
    // in the determinant ratio.
    let order: Vec<usize> = b.iter().chain(a).chain(c).copied().collect();
    let scale: Vec<f64> = order
        .iter()
        .map(|&i| {
            let v = cov[(i, i)];
            if v > 0.0 {
                v.sqrt().recip()
            } else {
                1.0
            }
        })
        .collect();
    let m = order.len();
    let mut work = DMatrix::from_fn(m, m, |i, j| cov[(order[i], order[j])] * scale[i] * scale[j]);

    let nb = b.len();
    let na = a.len();
    let mut active = vec![true; m];
    let reference: Vec<f64> = work.diagonal().iter().copied().collect();
    condition_on(&mut work, &mut active, &reference, nb + na..m);
    let b_given_c = work.view((0, 0), (nb, nb)).into_owned();
    condition_on(&mut work, &mut active, &reference, nb..nb + na);
    let b_given_ac = work.view((0, 0), (nb, nb)).into_owned();

    let bits = log_det_ratio(&b_given_c, &b_given_ac)? / (2.0 * std::f64::consts::LN_2);
    if bits < -PSD_TOLERANCE {
        log::debug!("mutual information {bits:e} bits clamped to zero");
    }
    Ok(bits.max(0.0))
}

/// Conditional covariance `S(B|C)` of the variables `b` given `c`.
pub fn conditional_covariance(cov: &DMatrix<f64>, b: &[usize], c: &[usize]) -> DMatrix<f64> {
    let order: Vec<usize> = b.iter().chain(c).copied().collect();
    let m = order.len();
    let mut work = DMatrix::from_fn(m, m, |i, j| cov[(order[i], order[j])]);
    let mut active = vec![true; m];
    let reference: Vec<f64> = work.diagonal().iter().copied().collect();
    condition_on(&mut work, &mut active, &reference, b.len()..m);
    work.view((0, 0), (b.len(), b.len())).into_owned()
}

/// Sequential Schur complement on the pivots in `pivots`. Each pivot is
/// removed from `active`. A pivot whose residual variance is at most the rank
/// threshold times its unconditioned variance `reference[k]` carries no
/// information beyond earlier pivots and is skipped.
fn condition_on(
    work: &mut DMatrix<f64>,
    active: &mut [bool],
    reference: &[f64],
    pivots: std::ops::Range<usize>,
) {
    let m = work.nrows();
    for k in pivots {
        active[k] = false;
        let d = work[(k, k)];
        if d <= RANK_THRESHOLD * reference[k] {
            continue;
        }
        for i in (0..m).filter(|&i| active[i]) {
            let f = work[(i, k)] / d;
            if f == 0.0 {
                continue;
            }
            for j in (0..m).filter(|&j| active[j]) {
                work[(i, j)] -= f * work[(k, j)];
            }
        }
    }
}

/// `ln det(num) - ln det(den)` with pseudo-determinant fallback.
fn log_det_ratio(num: &DMatrix<f64>, den: &DMatrix<f64>) -> Result<f64> {
    let tol = RANK_THRESHOLD * num.trace();
    if let (Some(ln_num), Some(ln_den)) = (pivot_log_det(num, tol), pivot_log_det(den, tol)) {
        return Ok(ln_num - ln_den);
    }
    let eig_num = SymmetricEigen::new(num.clone()).eigenvalues;
    let eig_den = SymmetricEigen::new(den.clone()).eigenvalues;
    let rank = |e: &nalgebra::DVector<f64>| e.iter().filter(|&&v| v > tol).count();
    if rank(&eig_num) != rank(&eig_den) {
        return Err(Error::NumericalDegeneracy {
            eigenvalue: eig_den.min(),
        });
    }
    let ln_pdet = |e: &nalgebra::DVector<f64>| -> f64 {
        e.iter().filter(|&&v| v > tol).map(|v| v.ln()).sum()
    };
    Ok(ln_pdet(&eig_num) - ln_pdet(&eig_den))
}

/// Log-determinant from Cholesky pivots, or `None` if any pivot is at or
/// below `tol`.
fn pivot_log_det(m: &DMatrix<f64>, tol: f64) -> Option<f64> {
    let n = m.nrows();
    if n == 0 {
        return Some(0.0);
    }
    let mut work = m.clone();
    let mut ln_det = 0.0;
    for k in 0..n {
        let d = work[(k, k)];
        if d <= tol || !d.is_finite() {
            return None;
        }
        ln_det += d.ln();
        for i in k + 1..n {
            let f = work[(i, k)] / d;
            for j in k + 1..n {
                work[(i, j)] -= f * work[(k, j)];
            }
        }
    }
    Some(ln_det)
}
