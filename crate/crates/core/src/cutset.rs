//! AWGN cutset upper bound with fully correlated relays: the supremum over a
//! common source-relay correlation `rho` of the smaller of the weakest
//! broadcast term and the multiple-access term.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channel::NetworkConfig;
use crate::error::{Error, Result};
use crate::gauss_info::{broadcast_signal_power, coherent_signal_power};

/// Terms closer than this (bits) at the optimum are reported as a tie.
pub const TIE_TOLERANCE: f64 = 1e-9;
/// Points in the safety grid that backs up the crossing search.
pub const FALLBACK_GRID_POINTS: usize = 1001;

/// `1/2 log2(1 + snr)` bits per real channel use.
pub fn awgn_capacity(snr: f64) -> Result<f64> {
    if snr.is_nan() || snr < 0.0 {
        return Err(Error::Domain(format!("snr must be >= 0, got {snr}")));
    }
    Ok(capacity(snr))
}

/// Unchecked `C(snr)` for internally computed non-negative SNRs.
pub(crate) fn capacity(snr: f64) -> f64 {
    0.5 * snr.ln_1p() / std::f64::consts::LN_2
}

/// Rate of the direct source-destination link alone.
pub fn direct_rate(config: &NetworkConfig) -> f64 {
    capacity(config.snr().snr_sd)
}

/// `C((g_sd + g_sr) P_s (1 - rho^2) / N)`: source to destination and relay
/// `relay` given that relay's own transmission.
pub fn broadcast_term(config: &NetworkConfig, relay: usize, rho: f64) -> f64 {
    debug_assert!(rho.abs() <= 1.0);
    capacity(broadcast_signal_power(config, relay, rho) / config.noise_power)
}

/// `C((Var(Y_d) - N) / N)`: source and every relay into the destination.
pub fn mac_term(config: &NetworkConfig, rho: f64) -> f64 {
    debug_assert!(rho.abs() <= 1.0);
    capacity(coherent_signal_power(config, rho) / config.noise_power)
}

/// `C(snr_sd + sum_r snr_rd)`: independent pipes from source and relays.
pub fn parallel_channels_rate(config: &NetworkConfig) -> f64 {
    let snr = config.snr();
    capacity(snr.snr_sd + snr.snr_rd.iter().sum::<f64>())
}

fn weakest_broadcast(config: &NetworkConfig, rho: f64) -> f64 {
    (0..config.relay_count())
        .map(|r| broadcast_term(config, r, rho))
        .fold(f64::INFINITY, f64::min)
}

/// The bound's objective `min(min_r broadcast_r(rho), mac(rho))` at one `rho`.
pub fn objective(config: &NetworkConfig, rho: f64) -> f64 {
    if config.relay_count() == 0 {
        return mac_term(config, rho);
    }
    weakest_broadcast(config, rho).min(mac_term(config, rho))
}

/// Which term limits the bound at the optimum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BindingCut {
    /// Broadcast-limited. Lists every relay whose term attains the minimum.
    Broadcast { relays: Vec<usize> },
    /// Multiple-access limited.
    Mac,
    /// The weakest broadcast terms and the multiple-access term are equal.
    Tie { relays: Vec<usize> },
}

impl BindingCut {
    /// True when the multiple-access term attains the bound.
    pub fn mac_active(&self) -> bool {
        matches!(self, BindingCut::Mac | BindingCut::Tie { .. })
    }
}

fn join_relays(relays: &[usize]) -> String {
    relays
        .iter()
        .map(|r| (r + 1).to_string())
        .collect::<Vec<_>>()
        .join("+")
}

/// Compact form used in tables: `bc:1`, `bc:1+2`, `mac`, `tie:1+2`
/// (relays numbered from 1).
impl fmt::Display for BindingCut {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BindingCut::Broadcast { relays } => write!(f, "bc:{}", join_relays(relays)),
            BindingCut::Mac => write!(f, "mac"),
            BindingCut::Tie { relays } => write!(f, "tie:{}", join_relays(relays)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutsetResult {
    /// Bound value in bits per channel use.
    pub rate: f64,
    pub rho_star: f64,
    pub binding_cut: BindingCut,
    /// Broadcast term of each relay at `rho_star`.
    pub broadcast_terms: Vec<f64>,
    pub mac_term: f64,
}

/// Maximizes the bound's objective over `rho`.
///
/// Broadcast terms are even and non-increasing in `|rho|` while the
/// multiple-access term increases with `rho`, so the search runs on `[0, 1]`
/// and the optimum is either an endpoint or the crossing of the two terms.
/// The crossing is bisected down to adjacent floating-point values; a
/// 1001-point grid checks the result.
pub fn cutset(config: &NetworkConfig) -> CutsetResult {
    let relays = config.relay_count();
    if relays == 0 {
        let rate = direct_rate(config);
        return CutsetResult {
            rate,
            rho_star: 0.0,
            binding_cut: BindingCut::Mac,
            broadcast_terms: vec![],
            mac_term: rate,
        };
    }

    let gap = |rho: f64| mac_term(config, rho) - weakest_broadcast(config, rho);
    let (mut rho_star, crossing) = if gap(0.0) >= 0.0 {
        (0.0, false)
    } else if gap(1.0) <= 0.0 {
        (1.0, false)
    } else {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if gap(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let best = if objective(config, lo) >= objective(config, hi) {
            lo
        } else {
            hi
        };
        (best, true)
    };

    let mut value = objective(config, rho_star);
    let mut crossing = crossing;
    let (grid_rho, grid_value) = (0..FALLBACK_GRID_POINTS)
        .map(|i| {
            let rho = i as f64 / (FALLBACK_GRID_POINTS - 1) as f64;
            (rho, objective(config, rho))
        })
        .fold((0.0, f64::NEG_INFINITY), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        });
    if grid_value > value + 1e-12 {
        log::warn!(
            "crossing search gave {value} bits at rho = {rho_star}; grid found {grid_value} at {grid_rho}"
        );
        rho_star = grid_rho;
        value = grid_value;
        crossing = false;
    }

    let broadcast_terms: Vec<f64> = (0..relays)
        .map(|r| broadcast_term(config, r, rho_star))
        .collect();
    let mac = mac_term(config, rho_star);
    let weakest = broadcast_terms.iter().copied().fold(f64::INFINITY, f64::min);
    let limiting: Vec<usize> = (0..relays)
        .filter(|&r| broadcast_terms[r] - weakest <= TIE_TOLERANCE)
        .collect();
    let binding_cut = if crossing || (weakest - mac).abs() < TIE_TOLERANCE {
        BindingCut::Tie { relays: limiting }
    } else if weakest < mac {
        BindingCut::Broadcast { relays: limiting }
    } else {
        BindingCut::Mac
    };

    CutsetResult {
        rate: value,
        rho_star,
        binding_cut,
        broadcast_terms,
        mac_term: mac,
    }
}
