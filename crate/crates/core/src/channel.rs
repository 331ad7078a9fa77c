//! Physical network description: node powers, receiver noise and pairwise
//! power gains, plus the planar path-loss layout that produces them.
//!
//! All gains are power (amplitude-squared) gains. A channel coefficient in
//! the signal model is the square root of the stored gain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_PATH_LOSS_EXPONENT: f64 = 2.0;
pub const DEFAULT_REFERENCE_DISTANCE: f64 = 1.0;
pub const DEFAULT_MIN_DISTANCE: f64 = 0.01;

/// Powers (W), common receiver noise (W) and link gains of a source, `R`
/// parallel relays and a destination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub source_power: f64,
    pub relay_powers: Vec<f64>,
    pub noise_power: f64,
    pub gain_sd: f64,
    pub gains_sr: Vec<f64>,
    pub gains_rd: Vec<f64>,
}

fn check_non_negative(field: &str, value: f64) -> Result<()> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::config(
            field,
            format!("must be finite and >= 0, got {value}"),
        ));
    }
    Ok(())
}

impl NetworkConfig {
    pub fn new(
        source_power: f64,
        relay_powers: Vec<f64>,
        noise_power: f64,
        gain_sd: f64,
        gains_sr: Vec<f64>,
        gains_rd: Vec<f64>,
    ) -> Result<Self> {
        let config = NetworkConfig {
            source_power,
            relay_powers,
            noise_power,
            gain_sd,
            gains_sr,
            gains_rd,
        };
        config.validate()?;
        Ok(config)
    }

    /// Every power, gain and the noise level equal to one.
    pub fn unity(relays: usize) -> Self {
        NetworkConfig {
            source_power: 1.0,
            relay_powers: vec![1.0; relays],
            noise_power: 1.0,
            gain_sd: 1.0,
            gains_sr: vec![1.0; relays],
            gains_rd: vec![1.0; relays],
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_non_negative("source_power", self.source_power)?;
        if !self.noise_power.is_finite() || self.noise_power <= 0.0 {
            return Err(Error::config(
                "noise_power",
                format!("must be finite and > 0, got {}", self.noise_power),
            ));
        }
        check_non_negative("gain_sd", self.gain_sd)?;
        let relays = self.relay_powers.len();
        for (field, values) in [
            ("relay_powers", &self.relay_powers),
            ("gains_sr", &self.gains_sr),
            ("gains_rd", &self.gains_rd),
        ] {
            if values.len() != relays {
                return Err(Error::config(
                    field,
                    format!("has {} entries but relay_powers has {relays}", values.len()),
                ));
            }
            for (r, &v) in values.iter().enumerate() {
                check_non_negative(&format!("{field}[{r}]"), v)?;
            }
        }
        Ok(())
    }

    pub fn relay_count(&self) -> usize {
        self.relay_powers.len()
    }

    /// Returns a copy with one more relay appended.
    pub fn with_relay(&self, power: f64, gain_sr: f64, gain_rd: f64) -> Result<Self> {
        let mut next = self.clone();
        next.relay_powers.push(power);
        next.gains_sr.push(gain_sr);
        next.gains_rd.push(gain_rd);
        next.validate()?;
        Ok(next)
    }

    /// Returns a copy keeping only the listed relays, in the given order.
    pub fn retain_relays(&self, keep: &[usize]) -> Self {
        NetworkConfig {
            source_power: self.source_power,
            relay_powers: keep.iter().map(|&r| self.relay_powers[r]).collect(),
            noise_power: self.noise_power,
            gain_sd: self.gain_sd,
            gains_sr: keep.iter().map(|&r| self.gains_sr[r]).collect(),
            gains_rd: keep.iter().map(|&r| self.gains_rd[r]).collect(),
        }
    }

    /// Multiplies every power and the noise level by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        NetworkConfig {
            source_power: self.source_power * factor,
            relay_powers: self.relay_powers.iter().map(|p| p * factor).collect(),
            noise_power: self.noise_power * factor,
            ..self.clone()
        }
    }

    /// Per-link linear SNRs.
    pub fn snr(&self) -> SnrTriple {
        let n = self.noise_power;
        SnrTriple {
            snr_sd: self.gain_sd * self.source_power / n,
            snr_sr: self
                .gains_sr
                .iter()
                .map(|g| g * self.source_power / n)
                .collect(),
            snr_rd: self
                .gains_rd
                .iter()
                .zip(&self.relay_powers)
                .map(|(g, p)| g * p / n)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrTriple {
    pub snr_sd: f64,
    pub snr_sr: Vec<f64>,
    pub snr_rd: Vec<f64>,
}

/// A planar position in meters, serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point(pub f64, pub f64);

impl Point {
    pub fn distance(self, other: Point) -> f64 {
        (self.0 - other.0).hypot(self.1 - other.1)
    }
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

/// Node coordinates and the power-law path loss `(max(d, d_min) / d0)^-alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub source_pos: Point,
    pub dest_pos: Point,
    #[serde(default)]
    pub relay_positions: Vec<Point>,
    #[serde(default = "default_exponent")]
    pub path_loss_exponent: f64,
    #[serde(default = "default_reference")]
    pub reference_distance: f64,
    #[serde(default = "default_min_distance")]
    pub min_distance: f64,
}

impl Geometry {
    /// A layout with the default path-loss law.
    pub fn new(source_pos: Point, dest_pos: Point, relay_positions: Vec<Point>) -> Self {
        Geometry {
            source_pos,
            dest_pos,
            relay_positions,
            path_loss_exponent: DEFAULT_PATH_LOSS_EXPONENT,
            reference_distance: DEFAULT_REFERENCE_DISTANCE,
            min_distance: DEFAULT_MIN_DISTANCE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("path_loss_exponent", self.path_loss_exponent),
            ("reference_distance", self.reference_distance),
            ("min_distance", self.min_distance),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::config(field, format!("must be > 0, got {v}")));
            }
        }
        let coords = [self.source_pos, self.dest_pos]
            .into_iter()
            .chain(self.relay_positions.iter().copied());
        for p in coords {
            if !p.0.is_finite() || !p.1.is_finite() {
                return Err(Error::config("position", "coordinates must be finite"));
            }
        }
        Ok(())
    }

    pub fn path_gain(&self, distance: f64) -> f64 {
        (distance.max(self.min_distance) / self.reference_distance).powf(-self.path_loss_exponent)
    }

    /// Derives link gains from the layout. `relay_powers` must list one
    /// power per relay position.
    pub fn to_config(
        &self,
        source_power: f64,
        relay_powers: Vec<f64>,
        noise_power: f64,
    ) -> Result<NetworkConfig> {
        self.validate()?;
        if relay_powers.len() != self.relay_positions.len() {
            return Err(Error::config(
                "relay_powers",
                format!(
                    "has {} entries but the geometry places {} relays",
                    relay_powers.len(),
                    self.relay_positions.len()
                ),
            ));
        }
        let gain = |a: Point, b: Point| self.path_gain(a.distance(b));
        NetworkConfig::new(
            source_power,
            relay_powers,
            noise_power,
            gain(self.source_pos, self.dest_pos),
            self.relay_positions
                .iter()
                .map(|&r| gain(self.source_pos, r))
                .collect(),
            self.relay_positions
                .iter()
                .map(|&r| gain(r, self.dest_pos))
                .collect(),
        )
    }
}
