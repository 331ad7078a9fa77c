//! Reading input documents and rendering results as JSON, CSV and SVG.

use std::fmt::Write as _;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::channel::{Geometry, NetworkConfig};
use crate::cutset::{cutset, direct_rate, parallel_channels_rate, BindingCut};
use crate::error::{Error, Result};
use crate::experiments::{RateCurve, RateRow, RelayComparison, Strategy, SweepSpec};
use crate::montecarlo::{MomentReport, Relation, SimMode, SimRun};
use crate::strategies::{af_rate, mrc_rate, AfGains};
use crate::verify::VerifyReport;

/// Network given by node positions instead of explicit gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryDocument {
    pub geometry: Geometry,
    pub source_power: f64,
    pub relay_powers: Vec<f64>,
    pub noise_power: f64,
}

impl GeometryDocument {
    pub fn to_config(&self) -> Result<NetworkConfig> {
        self.geometry
            .to_config(self.source_power, self.relay_powers.clone(), self.noise_power)
    }
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Deserializes `text`, reporting the position of syntax and shape errors.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(parse_error)
}

fn has_key(text: &str, key: &str) -> Result<bool> {
    let value: serde_json::Value = parse_json(text)?;
    match value {
        serde_json::Value::Object(map) => Ok(map.contains_key(key)),
        _ => Err(Error::Parse {
            line: 1,
            column: 1,
            message: "expected a JSON object".to_string(),
        }),
    }
}

/// Reads a network in either explicit-gain form or, when the document has a
/// `geometry` key, positional form. The result is validated.
pub fn parse_network(text: &str) -> Result<NetworkConfig> {
    let config = if has_key(text, "geometry")? {
        parse_json::<GeometryDocument>(text)?.to_config()?
    } else {
        parse_json::<NetworkConfig>(text)?
    };
    config.validate()?;
    Ok(config)
}

fn network_from_value(value: serde_json::Value) -> Result<NetworkConfig> {
    let text = value.to_string();
    parse_network(&text).map_err(|e| match e {
        Error::Parse { message, .. } => Error::config("network", message),
        other => other,
    })
}

pub fn parse_sweep(text: &str) -> Result<SweepSpec> {
    let spec: SweepSpec = parse_json(text)?;
    spec.validate()?;
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SimModeDocument {
    Correlated {
        rho: f64,
    },
    /// `beta` defaults to the maximal factors.
    AmplifyForward {
        #[serde(default)]
        beta: Option<Vec<f64>>,
    },
}

/// Input of the `simulate` command; the seed comes from the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimDocument {
    /// Either network form accepted by [`parse_network`].
    pub network: serde_json::Value,
    pub num_blocks: usize,
    pub samples_per_block: usize,
    pub mode: SimModeDocument,
}

pub fn parse_sim_run(text: &str, seed: u64) -> Result<SimRun> {
    let doc: SimDocument = parse_json(text)?;
    let config = network_from_value(doc.network)?;
    let mode = match doc.mode {
        SimModeDocument::Correlated { rho } => SimMode::Correlated { rho },
        SimModeDocument::AmplifyForward { beta } => SimMode::AmplifyForward {
            gains: beta.map_or_else(|| AfGains::maximal(&config), AfGains::new),
        },
    };
    let run = SimRun {
        seed,
        num_blocks: doc.num_blocks,
        samples_per_block: doc.samples_per_block,
        config,
        mode,
    };
    run.validate()?;
    Ok(run)
}

/// Every rate for one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub relays: usize,
    pub direct: f64,
    pub cutset: f64,
    pub rho_star: f64,
    pub binding_cut: BindingCut,
    pub broadcast_terms: Vec<f64>,
    pub mac_term: f64,
    /// Amplify-and-forward at the maximal factors in `af_beta`.
    pub af: f64,
    pub af_beta: Vec<f64>,
    pub mrc: f64,
    pub parallel: f64,
}

pub fn rate_summary(config: &NetworkConfig) -> Result<RateSummary> {
    config.validate()?;
    let bound = cutset(config);
    let gains = AfGains::maximal(config);
    Ok(RateSummary {
        relays: config.relay_count(),
        direct: direct_rate(config),
        cutset: bound.rate,
        rho_star: bound.rho_star,
        binding_cut: bound.binding_cut,
        broadcast_terms: bound.broadcast_terms,
        mac_term: bound.mac_term,
        af: af_rate(config, &gains)?,
        af_beta: gains.beta,
        mrc: mrc_rate(config),
        parallel: parallel_channels_rate(config),
    })
}

/// Pretty JSON. Floats are written in the shortest form that parses back to
/// the same value.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn csv_string(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w).map_err(|e| Error::Io(e.to_string()))?;
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

fn num(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn summary_to_csv(s: &RateSummary) -> Result<String> {
    csv_string(|w| {
        w.write_record([
            "relays", "direct", "cutset", "rho_star", "binding_cut", "mac_term", "af", "mrc",
            "parallel",
        ])?;
        w.write_record([
            s.relays.to_string(),
            num(s.direct),
            num(s.cutset),
            num(s.rho_star),
            s.binding_cut.to_string(),
            num(s.mac_term),
            num(s.af),
            num(s.mrc),
            num(s.parallel),
        ])
    })
}

/// Columns of a curve: `d_sr`, then for each requested strategy its columns
/// in the order direct, cutset (with `rho_star`, `binding_cut`), af, mrc,
/// parallel; `rho_user` and `cutset_at_rho_user` follow when present.
pub fn curve_columns(curve: &RateCurve) -> Vec<&'static str> {
    let mut cols = vec!["d_sr"];
    for s in Strategy::ALL {
        if !curve.strategies.contains(&s) {
            continue;
        }
        match s {
            Strategy::Direct => cols.push("direct"),
            Strategy::Cutset => cols.extend(["cutset", "rho_star", "binding_cut"]),
            Strategy::Af => cols.push("af"),
            Strategy::Mrc => cols.push("mrc"),
            Strategy::Parallel => cols.push("parallel"),
        }
    }
    if curve.rows.iter().any(|r| r.rho_user.is_some()) {
        cols.extend(["rho_user", "cutset_at_rho_user"]);
    }
    cols
}

pub fn curve_to_csv(curve: &RateCurve) -> Result<String> {
    let cols = curve_columns(curve);
    csv_string(|w| {
        w.write_record(&cols)?;
        for row in &curve.rows {
            let record = cols.iter().map(|c| match *c {
                "d_sr" => num(row.d_sr),
                "direct" => opt(row.direct),
                "cutset" => opt(row.cutset),
                "rho_star" => opt(row.rho_star),
                "binding_cut" => row.binding_cut.as_ref().map(|b| b.to_string()).unwrap_or_default(),
                "af" => opt(row.af),
                "mrc" => opt(row.mrc),
                "parallel" => opt(row.parallel),
                "rho_user" => opt(row.rho_user),
                "cutset_at_rho_user" => opt(row.cutset_at_rho_user),
                other => unreachable!("unknown column {other}"),
            });
            w.write_record(record)?;
        }
        Ok(())
    })
}

/// Comparison table preceded by a `#` line stating the one-relay placement.
pub fn comparison_to_csv(cmp: &RelayComparison) -> Result<String> {
    let body = csv_string(|w| {
        let mut header = vec!["d_sr".to_string()];
        header.extend(cmp.counts.iter().map(|c| format!("cutset_{c}_relay")));
        let with_ratio = cmp.rows.iter().any(|r| r.ratio.is_some());
        if with_ratio {
            header.push("ratio".to_string());
        }
        w.write_record(&header)?;
        for row in &cmp.rows {
            let mut record = vec![num(row.d_sr)];
            record.extend(row.cutset.iter().copied().map(num));
            if with_ratio {
                record.push(opt(row.ratio));
            }
            w.write_record(&record)?;
        }
        Ok(())
    })?;
    Ok(format!("# {}\n{body}", cmp.assumption))
}

pub fn moments_to_csv(report: &MomentReport) -> Result<String> {
    csv_string(|w| {
        w.write_record(["name", "gated", "relation", "predicted", "empirical", "std_error", "pass"])?;
        let rows = report
            .checks
            .iter()
            .map(|c| (c, true))
            .chain(report.observations.iter().map(|c| (c, false)));
        for (c, gated) in rows {
            let relation = match c.relation {
                Relation::Equal => "equal",
                Relation::AtMost => "at_most",
            };
            w.write_record([
                c.name.clone(),
                gated.to_string(),
                relation.to_string(),
                num(c.predicted),
                num(c.empirical),
                num(c.std_error),
                c.pass.to_string(),
            ])?;
        }
        Ok(())
    })
}

pub fn verify_to_csv(report: &VerifyReport) -> Result<String> {
    csv_string(|w| {
        w.write_record(["trial", "relays", "worst_deviation", "pass", "detail"])?;
        for r in &report.results {
            w.write_record([
                r.trial.to_string(),
                r.relays.to_string(),
                num(r.worst_deviation),
                r.pass.to_string(),
                r.detail.clone(),
            ])?;
        }
        Ok(())
    })
}

const SVG_WIDTH: f64 = 800.0;
const SVG_HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 60.0;
const TICKS: usize = 5;

/// Label, stroke colour and points of one plotted line.
type Series = (&'static str, &'static str, Vec<(f64, f64)>);

fn series(curve: &RateCurve) -> Vec<Series> {
    let pick = |f: fn(&RateRow) -> Option<f64>| -> Vec<(f64, f64)> {
        curve
            .rows
            .iter()
            .filter_map(|r| f(r).map(|v| (r.d_sr, v)))
            .collect()
    };
    let mut out = Vec::new();
    for s in Strategy::ALL {
        if !curve.strategies.contains(&s) {
            continue;
        }
        match s {
            Strategy::Direct => out.push(("direct", "#7f7f7f", pick(|r| r.direct))),
            Strategy::Cutset => out.push(("cutset", "#d62728", pick(|r| r.cutset))),
            Strategy::Af => out.push(("af", "#1f77b4", pick(|r| r.af))),
            Strategy::Mrc => out.push(("mrc", "#2ca02c", pick(|r| r.mrc))),
            Strategy::Parallel => out.push(("parallel", "#9467bd", pick(|r| r.parallel))),
        }
    }
    out
}

/// Standalone SVG line chart of a curve: one polyline per strategy, axes with
/// tick labels and a legend.
pub fn curve_to_svg(curve: &RateCurve) -> String {
    let lines = series(curve);
    let xs: Vec<f64> = curve.rows.iter().map(|r| r.d_sr).collect();
    let (x_min, x_max) = bounds(xs.iter().copied(), 0.0, 1.0);
    let (_, y_top) = bounds(lines.iter().flat_map(|l| l.2.iter().map(|p| p.1)), 0.0, 1.0);
    let (y_min, y_max) = (0.0, if y_top > 0.0 { y_top * 1.05 } else { 1.0 });
    let plot_w = SVG_WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = SVG_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| MARGIN_TOP + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for i in 0..=TICKS {
        let t = i as f64 / TICKS as f64;
        let x = x_min + t * (x_max - x_min);
        let y = y_min + t * (y_max - y_min);
        let bottom = MARGIN_TOP + plot_h;
        let _ = writeln!(
            svg,
            r#"<line x1="{px:.2}" y1="{bottom}" x2="{px:.2}" y2="{b2}" stroke="black"/><text x="{px:.2}" y="{ty}" text-anchor="middle">{x:.3}</text>"#,
            px = sx(x),
            b2 = bottom + 5.0,
            ty = bottom + 20.0,
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{l2}" y1="{py:.2}" x2="{MARGIN_LEFT}" y2="{py:.2}" stroke="black"/><text x="{tx}" y="{ty:.2}" text-anchor="end">{y:.3}</text>"#,
            l2 = MARGIN_LEFT - 5.0,
            py = sy(y),
            tx = MARGIN_LEFT - 8.0,
            ty = sy(y) + 4.0,
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{cx}" y="{by}" text-anchor="middle">d_sr [m]</text>"#,
        cx = MARGIN_LEFT + plot_w / 2.0,
        by = SVG_HEIGHT - 15.0,
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{cy}" text-anchor="middle" transform="rotate(-90 18 {cy})">rate [bit/s/Hz]</text>"#,
        cy = MARGIN_TOP + plot_h / 2.0,
    );
    for (i, (name, color, points)) in lines.iter().enumerate() {
        let coords: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        );
        let ly = MARGIN_TOP + 10.0 + 20.0 * i as f64;
        let lx = SVG_WIDTH - MARGIN_RIGHT + 15.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{lx2}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{tx}" y="{ty}">{name}</text>"#,
            lx2 = lx + 25.0,
            tx = lx + 32.0,
            ty = ly + 4.0,
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Range of `values`, or `(lo, hi)` when empty or flat.
fn bounds(values: impl Iterator<Item = f64>, lo: f64, hi: f64) -> (f64, f64) {
    let (min, max) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    if !min.is_finite() || !max.is_finite() {
        (lo, hi)
    } else if max > min {
        (min, max)
    } else {
        (min - 0.5, max + 0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::run_sweep;

    #[test]
    fn parses_both_network_forms() {
        let explicit = r#"{"source_power": 1, "relay_powers": [1], "noise_power": 1,
            "gain_sd": 1, "gains_sr": [1], "gains_rd": [1]}"#;
        assert_eq!(parse_network(explicit).unwrap(), NetworkConfig::unity(1));
        let positional = r#"{"geometry": {"source_pos": [0, 0], "dest_pos": [2, 0],
            "relay_positions": [[1, 0]]}, "source_power": 1, "relay_powers": [1], "noise_power": 1}"#;
        let cfg = parse_network(positional).unwrap();
        assert_eq!(cfg.gain_sd, 0.25);
        assert_eq!(cfg.gains_sr, vec![1.0]);
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = parse_network("{\n  \"source_power\": 1,\n  oops\n}").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let err = parse_network(r#"{"source_power": 1}"#).unwrap_err();
        assert!(matches!(&err, Error::Parse { message, .. } if message.contains("relay_powers")));
        let err = parse_network("[1, 2]").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn validation_names_the_field() {
        let text = r#"{"source_power": 1, "relay_powers": [], "noise_power": -1,
            "gain_sd": 1, "gains_sr": [], "gains_rd": []}"#;
        let err = parse_network(text).unwrap_err();
        assert!(matches!(&err, Error::Config { field, .. } if field == "noise_power"), "{err:?}");
    }

    #[test]
    fn summary_round_trips() {
        let summary = rate_summary(&NetworkConfig::unity(2)).unwrap();
        let back: RateSummary = parse_json(&to_json(&summary)).unwrap();
        assert_eq!(back, summary);
        let csv = summary_to_csv(&summary).unwrap();
        assert!(csv.starts_with("relays,direct,cutset,rho_star,binding_cut"));
    }

    #[test]
    fn curve_csv_header() {
        let curve = run_sweep(&SweepSpec::low_snr()).unwrap();
        let csv = curve_to_csv(&curve).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "d_sr,direct,cutset,rho_star,binding_cut,af,mrc,parallel"
        );
        assert_eq!(lines.count(), 141);
        let empty = run_sweep(&SweepSpec {
            strategies: vec![],
            ..SweepSpec::low_snr()
        })
        .unwrap();
        assert!(curve_to_csv(&empty).unwrap().starts_with("d_sr\n-100\n"));
    }

    #[test]
    fn svg_is_standalone() {
        let curve = run_sweep(&SweepSpec::low_snr()).unwrap();
        let svg = curve_to_svg(&curve);
        assert!(svg.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\""));
        assert_eq!(svg.matches("<polyline").count(), 5);
        assert!(!svg.contains("href"));
        for name in ["direct", "cutset", "af", "mrc", "parallel"] {
            assert!(svg.contains(&format!(">{name}</text>")));
        }
    }

    #[test]
    fn sim_document_defaults_to_maximal_gains() {
        let text = r#"{"network": {"source_power": 1, "relay_powers": [1], "noise_power": 1,
            "gain_sd": 1, "gains_sr": [1], "gains_rd": [1]},
            "num_blocks": 4, "samples_per_block": 8, "mode": {"kind": "amplify_forward"}}"#;
        let run = parse_sim_run(text, 3).unwrap();
        assert_eq!(run.seed, 3);
        assert_eq!(
            run.mode,
            SimMode::AmplifyForward {
                gains: AfGains::maximal(&NetworkConfig::unity(1))
            }
        );
        let bad = text.replace("\"noise_power\": 1,", "\"noise_power\": 0,");
        assert!(matches!(parse_sim_run(&bad, 0), Err(Error::Config { .. })));
    }
}
