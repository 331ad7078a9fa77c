//! Rate sweeps over relay position for the two-relay line geometry: source at
//! the origin, destination at `(d_sd, 0)`, relays at `(d_sr, +d_r)` and
//! `(d_sr, -d_r)` moving together along the link.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    Geometry, NetworkConfig, Point, DEFAULT_MIN_DISTANCE, DEFAULT_PATH_LOSS_EXPONENT,
    DEFAULT_REFERENCE_DISTANCE,
};
use crate::cutset::{cutset, direct_rate, objective, parallel_channels_rate, BindingCut};
use crate::error::{Error, Result};
use crate::strategies::{af_rate, mrc_rate, AfGains};

/// Grid points closer than this fraction of a step to `stop` still count.
const GRID_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Direct,
    /// Also yields the optimal correlation and the binding cut.
    Cutset,
    Af,
    Mrc,
    Parallel,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Direct,
        Strategy::Cutset,
        Strategy::Af,
        Strategy::Mrc,
        Strategy::Parallel,
    ];
}

/// Externally measured correlation at one relay position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhoPoint {
    pub d_sr: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub d_sd: f64,
    /// Vertical offset of each relay from the source-destination line.
    pub d_r: f64,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
    pub source_power: f64,
    /// Power of every relay.
    pub relay_power: f64,
    pub noise_power: f64,
    #[serde(default = "default_relays")]
    pub relays: usize,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<Strategy>,
    /// Fraction of the maximal amplification used by every relay.
    #[serde(default = "default_af_fraction")]
    pub af_gain_fraction: f64,
    #[serde(default = "default_exponent")]
    pub path_loss_exponent: f64,
    #[serde(default = "default_reference")]
    pub reference_distance: f64,
    #[serde(default = "default_min_distance")]
    pub min_distance: f64,
    /// When present, the cutset objective is also evaluated at this
    /// correlation, linearly interpolated in `d_sr` and held at the ends.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_table: Option<Vec<RhoPoint>>,
}

fn default_relays() -> usize {
    2
}
fn default_strategies() -> Vec<Strategy> {
    Strategy::ALL.to_vec()
}
fn default_af_fraction() -> f64 {
    1.0
}
fn default_exponent() -> f64 {
    DEFAULT_PATH_LOSS_EXPONENT
}
fn default_reference() -> f64 {
    DEFAULT_REFERENCE_DISTANCE
}
fn default_min_distance() -> f64 {
    DEFAULT_MIN_DISTANCE
}

impl SweepSpec {
    /// 1 m link, relays 0.1 m off the axis, 100 mW everywhere, 1 uW noise,
    /// `d_sr` from -0.5 m to 1.5 m in 1 cm steps.
    pub fn high_snr() -> Self {
        SweepSpec {
            d_sd: 1.0,
            d_r: 0.1,
            start: -0.5,
            stop: 1.5,
            step: 0.01,
            source_power: 0.1,
            relay_power: 0.1,
            noise_power: 1e-6,
            relays: 2,
            strategies: default_strategies(),
            af_gain_fraction: 1.0,
            path_loss_exponent: DEFAULT_PATH_LOSS_EXPONENT,
            reference_distance: DEFAULT_REFERENCE_DISTANCE,
            min_distance: DEFAULT_MIN_DISTANCE,
            rho_table: None,
        }
    }

    /// 500 m link, relays 10 m off the axis, `d_sr` from -100 m to 600 m in
    /// 5 m steps, otherwise as [`SweepSpec::high_snr`].
    pub fn low_snr() -> Self {
        SweepSpec {
            d_sd: 500.0,
            d_r: 10.0,
            start: -100.0,
            stop: 600.0,
            step: 5.0,
            ..Self::high_snr()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("d_sd", self.d_sd),
            ("d_r", self.d_r),
            ("start", self.start),
            ("stop", self.stop),
            ("step", self.step),
        ];
        for (field, v) in finite {
            if !v.is_finite() {
                return Err(Error::config(field, "must be finite"));
            }
        }
        if self.step <= 0.0 {
            return Err(Error::config("step", "must be positive"));
        }
        if self.start >= self.stop {
            return Err(Error::config("start", "must be below stop"));
        }
        if !(1..=2).contains(&self.relays) {
            return Err(Error::config("relays", "must be 1 or 2"));
        }
        if !(0.0..=1.0).contains(&self.af_gain_fraction) {
            return Err(Error::config("af_gain_fraction", "must lie in [0, 1]"));
        }
        if let Some(table) = &self.rho_table {
            if table.is_empty() {
                return Err(Error::config("rho_table", "must not be empty"));
            }
            for (i, p) in table.iter().enumerate() {
                if !p.d_sr.is_finite() {
                    return Err(Error::config(format!("rho_table[{i}].d_sr"), "must be finite"));
                }
                if !(0.0..=1.0).contains(&p.rho) {
                    return Err(Error::config(format!("rho_table[{i}].rho"), "must lie in [0, 1]"));
                }
                if i > 0 && p.d_sr <= table[i - 1].d_sr {
                    return Err(Error::config("rho_table", "d_sr must be strictly increasing"));
                }
            }
        }
        self.network_at(self.start, self.relays).map(|_| ())
    }

    /// Relay positions `d_sr` of the grid, computed as `start + i * step`.
    pub fn grid(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + GRID_SLACK).floor() as usize + 1;
        (0..count).map(|i| self.start + i as f64 * self.step).collect()
    }

    pub fn wants(&self, strategy: Strategy) -> bool {
        self.strategies.contains(&strategy)
    }

    /// Geometry with `relays` relays at horizontal position `d_sr`; a single
    /// relay sits at `(d_sr, d_r)`.
    pub fn geometry_at(&self, d_sr: f64, relays: usize) -> Geometry {
        let mut positions = vec![Point(d_sr, self.d_r)];
        if relays == 2 {
            positions.push(Point(d_sr, -self.d_r));
        }
        Geometry {
            source_pos: Point(0.0, 0.0),
            dest_pos: Point(self.d_sd, 0.0),
            relay_positions: positions,
            path_loss_exponent: self.path_loss_exponent,
            reference_distance: self.reference_distance,
            min_distance: self.min_distance,
        }
    }

    pub fn network_at(&self, d_sr: f64, relays: usize) -> Result<NetworkConfig> {
        self.geometry_at(d_sr, relays).to_config(
            self.source_power,
            vec![self.relay_power; relays],
            self.noise_power,
        )
    }

    /// Interpolated user correlation at `d_sr`, if a table was given.
    pub fn user_rho(&self, d_sr: f64) -> Option<f64> {
        let table = self.rho_table.as_ref()?;
        let first = table.first()?;
        let last = table.last()?;
        if d_sr <= first.d_sr {
            return Some(first.rho);
        }
        if d_sr >= last.d_sr {
            return Some(last.rho);
        }
        let i = table.partition_point(|p| p.d_sr <= d_sr);
        let (a, b) = (table[i - 1], table[i]);
        Some(a.rho + (b.rho - a.rho) * (d_sr - a.d_sr) / (b.d_sr - a.d_sr))
    }
}

/// Rates at one relay position. Strategies that were not requested are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub d_sr: f64,
    pub direct: Option<f64>,
    pub cutset: Option<f64>,
    pub rho_star: Option<f64>,
    pub binding_cut: Option<BindingCut>,
    pub af: Option<f64>,
    pub mrc: Option<f64>,
    pub parallel: Option<f64>,
    pub rho_user: Option<f64>,
    /// Cutset objective at `rho_user`.
    pub cutset_at_rho_user: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    pub strategies: Vec<Strategy>,
    pub relays: usize,
    pub rows: Vec<RateRow>,
}

pub fn run_sweep(spec: &SweepSpec) -> Result<RateCurve> {
    spec.validate()?;
    let rows = spec
        .grid()
        .into_par_iter()
        .map(|d| evaluate_point(spec, d))
        .collect::<Result<Vec<_>>>()?;
    let strategies = Strategy::ALL
        .into_iter()
        .filter(|s| spec.wants(*s))
        .collect();
    Ok(RateCurve {
        strategies,
        relays: spec.relays,
        rows,
    })
}

fn evaluate_point(spec: &SweepSpec, d_sr: f64) -> Result<RateRow> {
    let cfg = spec.network_at(d_sr, spec.relays)?;
    let mut row = RateRow {
        d_sr,
        direct: None,
        cutset: None,
        rho_star: None,
        binding_cut: None,
        af: None,
        mrc: None,
        parallel: None,
        rho_user: None,
        cutset_at_rho_user: None,
    };
    if spec.wants(Strategy::Direct) {
        row.direct = Some(direct_rate(&cfg));
    }
    if spec.wants(Strategy::Cutset) {
        let c = cutset(&cfg);
        row.cutset = Some(c.rate);
        row.rho_star = Some(c.rho_star);
        row.binding_cut = Some(c.binding_cut);
        if let Some(rho) = spec.user_rho(d_sr) {
            row.rho_user = Some(rho);
            row.cutset_at_rho_user = Some(objective(&cfg, rho));
        }
    }
    if spec.wants(Strategy::Af) {
        let gains = AfGains::fraction_of_maximal(&cfg, spec.af_gain_fraction);
        row.af = Some(af_rate(&cfg, &gains)?);
    }
    if spec.wants(Strategy::Mrc) {
        row.mrc = Some(mrc_rate(&cfg));
    }
    if spec.wants(Strategy::Parallel) {
        row.parallel = Some(parallel_channels_rate(&cfg));
    }
    Ok(row)
}

/// Placement of the single relay in one-relay runs. The two-relay layout is
/// mirrored about the axis; the one-relay baseline keeps the upper relay.
pub const ONE_RELAY_ASSUMPTION: &str =
    "one-relay baseline: single relay at (d_sr, d_r), the upper position of the two-relay layout";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub d_sr: f64,
    /// Cutset rate for each entry of [`RelayComparison::counts`].
    pub cutset: Vec<f64>,
    /// Two-relay over one-relay cutset rate, when both counts were requested.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelayComparison {
    pub assumption: String,
    pub counts: Vec<usize>,
    pub rows: Vec<ComparisonRow>,
}

/// Cutset rate along the sweep for each relay count in `counts` (a subset of
/// `{1, 2}`), with the two-over-one ratio when both are present.
pub fn compare_relay_counts(spec: &SweepSpec, counts: &[usize]) -> Result<RelayComparison> {
    spec.validate()?;
    if counts.is_empty() {
        return Err(Error::config("relays", "at least one relay count is required"));
    }
    for (i, &c) in counts.iter().enumerate() {
        if !(1..=2).contains(&c) {
            return Err(Error::config("relays", format!("count {c} is not 1 or 2")));
        }
        if counts[..i].contains(&c) {
            return Err(Error::config("relays", format!("count {c} is repeated")));
        }
    }
    let one = counts.iter().position(|&c| c == 1);
    let two = counts.iter().position(|&c| c == 2);
    let rows = spec
        .grid()
        .into_par_iter()
        .map(|d| {
            let rates = counts
                .iter()
                .map(|&c| spec.network_at(d, c).map(|cfg| cutset(&cfg).rate))
                .collect::<Result<Vec<f64>>>()?;
            let ratio = match (one, two) {
                (Some(i), Some(j)) => Some(rates[j] / rates[i]),
                _ => None,
            };
            Ok(ComparisonRow {
                d_sr: d,
                cutset: rates,
                ratio,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RelayComparison {
        assumption: ONE_RELAY_ASSUMPTION.to_string(),
        counts: counts.to_vec(),
        rows,
    })
}
