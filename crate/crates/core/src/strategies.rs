//! Achievable-rate formulas for amplify-and-forward relaying and the maximal
//! ratio combining reference.

use serde::{Deserialize, Serialize};

use crate::channel::NetworkConfig;
use crate::cutset::capacity;
use crate::error::{Error, Result};

/// Relative slack on `|beta|^2` against the power limit.
pub const GAIN_LIMIT_SLACK: f64 = 1e-12;
/// Default `(N + g_sr P_s) / P_r` above which a relay's amplification is useless.
pub const DEFAULT_USELESS_RATIO: f64 = 100.0;

/// Per-relay amplitude factors `|beta_r|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AfGains {
    pub beta: Vec<f64>,
}

impl AfGains {
    pub fn new(beta: Vec<f64>) -> Self {
        AfGains { beta }
    }

    /// The largest factors the relay power constraints allow.
    pub fn maximal(config: &NetworkConfig) -> Self {
        Self::fraction_of_maximal(config, 1.0)
    }

    /// `fraction` times the maximal factor at every relay.
    pub fn fraction_of_maximal(config: &NetworkConfig, fraction: f64) -> Self {
        AfGains {
            beta: (0..config.relay_count())
                .map(|r| fraction * af_gain_limit(config, r))
                .collect(),
        }
    }

    pub fn silent(relays: usize) -> Self {
        AfGains {
            beta: vec![0.0; relays],
        }
    }

    /// Checks length and `|beta_r|^2 <= P_r / (N + g_sr P_s)` for every relay.
    pub fn check(&self, config: &NetworkConfig) -> Result<()> {
        if self.beta.len() != config.relay_count() {
            return Err(Error::config(
                "beta",
                format!(
                    "has {} entries for {} relays",
                    self.beta.len(),
                    config.relay_count()
                ),
            ));
        }
        for (r, &b) in self.beta.iter().enumerate() {
            if !b.is_finite() {
                return Err(Error::config(format!("beta[{r}]"), "must be finite"));
            }
            let limit = gain_limit_sq(config, r);
            if b * b > limit * (1.0 + GAIN_LIMIT_SLACK) {
                return Err(Error::Constraint {
                    relay: r,
                    beta_sq: b * b,
                    limit,
                });
            }
        }
        Ok(())
    }
}

fn gain_limit_sq(config: &NetworkConfig, relay: usize) -> f64 {
    config.relay_powers[relay]
        / (config.noise_power + config.gains_sr[relay] * config.source_power)
}

/// `sqrt(P_r / (N + g_sr P_s))`, the factor that spends exactly the relay's power.
pub fn af_gain_limit(config: &NetworkConfig, relay: usize) -> f64 {
    gain_limit_sq(config, relay).sqrt()
}

/// Amplify-and-forward rate with the relay branches combined coherently:
/// `C( (sqrt(g_sd) + sum_r |b_r| sqrt(g_sr g_rd))^2 P_s / ((1 + sum_r b_r^2 g_rd) N) )`.
pub fn af_rate(config: &NetworkConfig, gains: &AfGains) -> Result<f64> {
    gains.check(config)?;
    let mut amplitude = config.gain_sd.sqrt();
    let mut noise_gain = 1.0;
    for (r, &b) in gains.beta.iter().enumerate() {
        let b = b.abs();
        amplitude += b * (config.gains_sr[r] * config.gains_rd[r]).sqrt();
        noise_gain += b * b * config.gains_rd[r];
    }
    Ok(capacity(
        amplitude * amplitude * config.source_power / (noise_gain * config.noise_power),
    ))
}

/// `C(snr_sd + sum_r snr_sr snr_rd / (snr_sr + snr_rd))`; a relay with both
/// hop SNRs zero contributes nothing.
pub fn mrc_rate(config: &NetworkConfig) -> f64 {
    let snr = config.snr();
    let combined: f64 = snr
        .snr_sr
        .iter()
        .zip(&snr.snr_rd)
        .map(|(&a, &b)| if a + b > 0.0 { a * b / (a + b) } else { 0.0 })
        .sum();
    capacity(snr.snr_sd + combined)
}

/// Side-by-side amplify-and-forward and MRC rates. The amplification of each
/// relay is the power-limited maximum, capped at `snr_sr` so that the
/// comparison condition `|beta_r| <= snr_sr` is met where possible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AfMrcComparison {
    pub beta: Vec<f64>,
    /// Whether `|beta_r| <= snr_sr` holds at the power-limited maximum.
    pub condition_holds: Vec<bool>,
    pub af_rate: f64,
    pub mrc_rate: f64,
    /// `af_rate - mrc_rate`.
    pub difference: f64,
}

impl AfMrcComparison {
    pub fn af_exceeds_mrc(&self) -> bool {
        self.difference > 0.0
    }
}

pub fn af_mrc_comparison(config: &NetworkConfig) -> AfMrcComparison {
    let snr_sr = config.snr().snr_sr;
    let limits: Vec<f64> = (0..config.relay_count())
        .map(|r| af_gain_limit(config, r))
        .collect();
    let condition_holds = limits.iter().zip(&snr_sr).map(|(b, s)| b <= s).collect();
    let beta: Vec<f64> = limits.iter().zip(&snr_sr).map(|(b, s)| b.min(*s)).collect();
    let af = af_rate(config, &AfGains::new(beta.clone()))
        .expect("factors capped at the power limit are feasible");
    let mrc = mrc_rate(config);
    AfMrcComparison {
        beta,
        condition_holds,
        af_rate: af,
        mrc_rate: mrc,
        difference: af - mrc,
    }
}

/// True when `(N + g_sr P_s) / P_r` strictly exceeds `threshold`: the relay's
/// power budget is swamped by what it would have to amplify.
pub fn useless_relay(config: &NetworkConfig, relay: usize, threshold: f64) -> bool {
    let load = config.noise_power + config.gains_sr[relay] * config.source_power;
    let power = config.relay_powers[relay];
    if power == 0.0 {
        return true;
    }
    load / power > threshold
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cutset::direct_rate;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gain_limit_examples() {
        assert_abs_diff_eq!(
            af_gain_limit(&NetworkConfig::unity(1), 0),
            0.5f64.sqrt(),
            epsilon = 1e-15
        );
        let mut cfg = NetworkConfig::unity(1);
        cfg.relay_powers[0] = 0.0;
        assert_eq!(af_gain_limit(&cfg, 0), 0.0);
        let cfg = NetworkConfig::new(1.0, vec![0.3], 0.3, 1.0, vec![0.0], vec![1.0]).unwrap();
        assert_eq!(af_gain_limit(&cfg, 0), 1.0);
    }

    #[test]
    fn af_rate_examples() {
        let unity = NetworkConfig::unity(1);
        assert_eq!(
            af_rate(&unity, &AfGains::silent(1)).unwrap(),
            direct_rate(&unity)
        );
        let rate = af_rate(&unity, &AfGains::maximal(&unity)).unwrap();
        // ((1 + 1/sqrt 2)^2 / 1.5 + 1) = 2.94281, half its log2 is 0.778597.
        let snr = (1.0 + 0.5f64.sqrt()).powi(2) / 1.5;
        assert_abs_diff_eq!(rate, 0.5 * (1.0 + snr).log2(), epsilon = 1e-15);
        assert_abs_diff_eq!(rate, 0.7785970, epsilon = 1e-7);

        let mut cfg = NetworkConfig::unity(2);
        cfg.gains_rd = vec![0.0; 2];
        let gains = AfGains::fraction_of_maximal(&cfg, 0.6);
        assert_eq!(af_rate(&cfg, &gains).unwrap(), direct_rate(&cfg));
    }

    #[test]
    fn af_rate_rejects_excess_gain() {
        let unity = NetworkConfig::unity(1);
        let err = af_rate(&unity, &AfGains::new(vec![0.8])).unwrap_err();
        assert!(matches!(err, Error::Constraint { relay: 0, .. }));
        assert!(af_rate(&unity, &AfGains::new(vec![0.1, 0.1])).is_err());
        assert!(af_rate(&unity, &AfGains::new(vec![f64::NAN])).is_err());
    }

    #[test]
    fn mrc_examples() {
        assert_abs_diff_eq!(
            mrc_rate(&NetworkConfig::unity(1)),
            0.5 * 2.5f64.log2(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(mrc_rate(&NetworkConfig::unity(1)), 0.660964, epsilon = 1e-6);
        let mut cfg = NetworkConfig::unity(3);
        cfg.gains_sr = vec![0.0; 3];
        assert_eq!(mrc_rate(&cfg), direct_rate(&cfg));
        cfg.gains_rd = vec![0.0; 3];
        assert_eq!(mrc_rate(&cfg), direct_rate(&cfg));
        let cfg = NetworkConfig::new(1.0, vec![2.0], 1.0, 0.5, vec![2.0], vec![1.0]).unwrap();
        assert_abs_diff_eq!(
            mrc_rate(&cfg),
            0.5 * (1.0 + 0.5 + 1.0f64).log2(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn comparison_examples() {
        let cmp = af_mrc_comparison(&NetworkConfig::unity(1));
        assert_eq!(cmp.condition_holds, vec![true]);
        assert_abs_diff_eq!(cmp.beta[0], 0.5f64.sqrt(), epsilon = 1e-15);
        assert!(cmp.af_exceeds_mrc());
        assert_abs_diff_eq!(cmp.difference, 0.7785970 - 0.6609640, epsilon = 2e-7);

        let mut cfg = NetworkConfig::unity(1);
        cfg.gains_sr[0] = 0.0;
        let cmp = af_mrc_comparison(&cfg);
        assert_eq!(cmp.beta, vec![0.0]);
        assert_eq!(cmp.condition_holds, vec![false]);
        assert_eq!(cmp.af_rate, direct_rate(&cfg));
        assert_eq!(cmp.mrc_rate, direct_rate(&cfg));
    }

    #[test]
    fn useless_relay_examples() {
        let cfg = NetworkConfig::new(0.1, vec![1e-6], 1e-6, 1.0, vec![1.0], vec![1.0]).unwrap();
        assert!(useless_relay(&cfg, 0, DEFAULT_USELESS_RATIO));
        assert!(!useless_relay(&NetworkConfig::unity(1), 0, DEFAULT_USELESS_RATIO));
        // (N + g_sr P_s) / P_r = 100 exactly.
        let cfg = NetworkConfig::new(1.0, vec![1.0], 50.0, 1.0, vec![50.0], vec![1.0]).unwrap();
        assert!(!useless_relay(&cfg, 0, 100.0));
        let mut cfg = NetworkConfig::unity(1);
        cfg.relay_powers[0] = 0.0;
        assert!(useless_relay(&cfg, 0, DEFAULT_USELESS_RATIO));
    }
}
