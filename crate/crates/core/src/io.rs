//! File formats: traces (CSV / JSON lines), fad reports, sweep rows, the
//! bound-verification table, oracle rows and plot guide values.
//!
//! Reals in CSV files are written with 17 significant digits so that every
//! value re-parses to the identical `f64`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::analytics::FadReport;
use crate::error::{Error, Result};
use crate::model::{Likelihood, Model, Region, Sign};
use crate::oracle::{OracleResult, VerifyRow};
use crate::sim::TraceStep;

pub const TRACE_HEADER: [&str; 7] = [
    "t", "theta", "signal", "l_pub", "L_post", "action", "region",
];

pub const VERIFY_HEADER: [&str; 9] = [
    "alpha",
    "epsilon",
    "K",
    "M",
    "inv_eps",
    "max_cascade_len",
    "interval_low",
    "interval_high",
    "pass",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Format> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Invalid(format!(
                "unknown format {other:?} (expected csv or json)"
            ))),
        }
    }
}

/// 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_default()
}

fn parse_real(field: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("not a real number: {field:?}")))
}

fn parse_sign(field: &str) -> Result<Sign> {
    let v: i8 = field
        .trim()
        .trim_start_matches('+')
        .parse()
        .map_err(|_| Error::Parse(format!("not a binary label: {field:?}")))?;
    Sign::try_from(v)
}

pub fn write_trace_csv<W: Write>(w: W, steps: &[TraceStep]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRACE_HEADER)?;
    for s in steps {
        out.write_record([
            s.t.to_string(),
            s.theta.to_string(),
            s.signal.to_string(),
            fmt_real(s.l_pub.0),
            fmt_real(s.l_post.0),
            s.action.to_string(),
            s.region.as_str().to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: std::io::Read>(r: R) -> Result<Vec<TraceStep>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(Error::Parse(format!("unexpected trace header {header:?}")));
    }
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            let field = |i: usize| {
                rec.get(i)
                    .ok_or_else(|| Error::Parse("short trace row".into()))
            };
            Ok(TraceStep {
                t: field(0)?
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad period index {:?}", field(0))))?,
                theta: parse_sign(field(1)?)?,
                signal: parse_sign(field(2)?)?,
                l_pub: Likelihood(parse_real(field(3)?)?),
                l_post: Likelihood(parse_real(field(4)?)?),
                action: parse_sign(field(5)?)?,
                region: Region::parse(field(6)?)?,
            })
        })
        .collect()
}

/// One JSON object per line with the CSV's field names.
pub fn write_trace_jsonl<W: Write>(mut w: W, steps: &[TraceStep]) -> Result<()> {
    for s in steps {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_jsonl<R: BufRead>(r: R) -> Result<Vec<TraceStep>> {
    r.lines()
        .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()))
        .map(|line| Ok(serde_json::from_str(&line?)?))
        .collect()
}

/// Horizontal guide lines for plotting the public likelihood.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Guide {
    pub name: String,
    pub value: f64,
}

pub fn guides(model: &Model) -> Vec<Guide> {
    let c = model.c_alpha();
    vec![
        Guide {
            name: "upper_cascade".into(),
            value: c,
        },
        Guide {
            name: "zero".into(),
            value: 0.0,
        },
        Guide {
            name: "lower_cascade".into(),
            value: -c,
        },
    ]
}

pub fn write_guides<W: Write>(mut w: W, guides: &[Guide], format: Format) -> Result<()> {
    match format {
        Format::Csv => {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(["name", "value"])?;
            for g in guides {
                out.write_record([g.name.clone(), fmt_real(g.value)])?;
            }
            out.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, guides)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub const SEED_ROW_HEADER: [&str; 17] = [
    "alpha",
    "epsilon",
    "horizon",
    "seed",
    "action_changes",
    "state_changes",
    "q_a",
    "q_theta",
    "fads_emerged",
    "margin",
    "mean_gap",
    "gap_count",
    "restricted_fad_count",
    "isolated_fad_count",
    "max_cascade_len",
    "zero_hits",
    "restricted_rule",
];

/// JSON: the whole report as one object. CSV: one summary row per seed.
pub fn write_report<W: Write>(mut w: W, report: &FadReport, format: Format) -> Result<()> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, report)?;
            w.write_all(b"\n")?;
        }
        Format::Csv => {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(SEED_ROW_HEADER)?;
            for s in &report.per_seed {
                out.write_record([
                    fmt_real(report.params.alpha()),
                    fmt_real(report.params.epsilon()),
                    s.horizon.to_string(),
                    s.seed.to_string(),
                    s.action_changes.to_string(),
                    s.state_changes.to_string(),
                    fmt_real(s.q_a),
                    fmt_real(s.q_theta),
                    s.fads_emerged.to_string(),
                    fmt_real(s.margin),
                    fmt_opt(s.mean_gap),
                    s.gap_count.to_string(),
                    s.restricted_fad_count.to_string(),
                    s.isolated_fad_count.to_string(),
                    s.max_cascade_len.to_string(),
                    s.zero_hits.to_string(),
                    report.restricted_rule.as_str().to_string(),
                ])?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

pub fn read_report_json<R: std::io::Read>(r: R) -> Result<FadReport> {
    Ok(serde_json::from_reader(r)?)
}

/// One row of a parameter sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub grid_index: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub horizon: u64,
    pub seeds: usize,
    pub q_a: f64,
    pub q_theta: f64,
    pub ratio: Option<f64>,
    pub fads_emerged: bool,
    pub fads_emerged_all_seeds: bool,
    pub margin: f64,
    pub mean_gap: Option<f64>,
    #[serde(rename = "M")]
    pub m: f64,
    pub inv_eps: f64,
    pub action_changes_mean: f64,
    pub state_changes_mean: f64,
    pub restricted_fad_count: u64,
    pub max_cascade_len: u64,
}

impl SweepRow {
    pub fn from_report(grid_index: usize, r: &FadReport) -> SweepRow {
        SweepRow {
            grid_index,
            alpha: r.params.alpha(),
            epsilon: r.params.epsilon(),
            horizon: r.horizon,
            seeds: r.seeds.len(),
            q_a: r.q_a,
            q_theta: r.q_theta,
            ratio: r.ratio,
            fads_emerged: r.fads_emerged,
            fads_emerged_all_seeds: r.fads_emerged_all_seeds,
            margin: r.margin,
            mean_gap: r.mean_gap,
            m: r.fad_bound_m,
            inv_eps: 1.0 / r.params.epsilon(),
            action_changes_mean: r.action_changes_mean,
            state_changes_mean: r.state_changes_mean,
            restricted_fad_count: r.restricted_fad_count,
            max_cascade_len: r
                .per_seed
                .iter()
                .map(|s| s.max_cascade_len)
                .max()
                .unwrap_or(0),
        }
    }
}

pub const SWEEP_HEADER: [&str; 18] = [
    "grid_index",
    "alpha",
    "epsilon",
    "horizon",
    "seeds",
    "q_a",
    "q_theta",
    "ratio",
    "fads_emerged",
    "fads_emerged_all_seeds",
    "margin",
    "mean_gap",
    "M",
    "inv_eps",
    "action_changes_mean",
    "state_changes_mean",
    "restricted_fad_count",
    "max_cascade_len",
];

fn write_json_rows<W: Write, T: Serialize>(mut w: W, rows: &[T]) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, rows)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn write_sweep<W: Write>(w: W, rows: &[SweepRow], format: Format) -> Result<()> {
    if format == Format::Json {
        return write_json_rows(w, rows);
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SWEEP_HEADER)?;
    for r in rows {
        out.write_record([
            r.grid_index.to_string(),
            fmt_real(r.alpha),
            fmt_real(r.epsilon),
            r.horizon.to_string(),
            r.seeds.to_string(),
            fmt_real(r.q_a),
            fmt_real(r.q_theta),
            fmt_opt(r.ratio),
            r.fads_emerged.to_string(),
            r.fads_emerged_all_seeds.to_string(),
            fmt_real(r.margin),
            fmt_opt(r.mean_gap),
            fmt_real(r.m),
            fmt_real(r.inv_eps),
            fmt_real(r.action_changes_mean),
            fmt_real(r.state_changes_mean),
            r.restricted_fad_count.to_string(),
            r.max_cascade_len.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_verify<W: Write>(w: W, rows: &[VerifyRow], format: Format) -> Result<()> {
    if format == Format::Json {
        return write_json_rows(w, rows);
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(VERIFY_HEADER)?;
    for r in rows {
        out.write_record([
            fmt_real(r.alpha),
            fmt_real(r.epsilon),
            fmt_real(r.k),
            fmt_real(r.m),
            fmt_real(r.inv_eps),
            r.max_cascade_len.to_string(),
            fmt_real(r.interval_low),
            fmt_real(r.interval_high),
            r.pass.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_verify_csv<R: std::io::Read>(r: R) -> Result<Vec<VerifyRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().ne(VERIFY_HEADER.iter().copied()) {
        return Err(Error::Parse(format!("unexpected verify header {header:?}")));
    }
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            let f = |i: usize| rec.get(i).unwrap_or("");
            Ok(VerifyRow {
                alpha: parse_real(f(0))?,
                epsilon: parse_real(f(1))?,
                k: parse_real(f(2))?,
                m: parse_real(f(3))?,
                inv_eps: parse_real(f(4))?,
                max_cascade_len: f(5).parse().map_err(|_| Error::Parse(f(5).into()))?,
                interval_low: parse_real(f(6))?,
                interval_high: parse_real(f(7))?,
                pass: f(8).parse().map_err(|_| Error::Parse(f(8).into()))?,
            })
        })
        .collect()
}

pub const ORACLE_HEADER: [&str; 7] = [
    "alpha",
    "epsilon",
    "l0",
    "depth",
    "value_low",
    "value_high",
    "mass_unresolved",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub alpha: f64,
    pub epsilon: f64,
    #[serde(flatten)]
    pub result: OracleResult,
}

pub fn write_oracle<W: Write>(w: W, rows: &[OracleRow], format: Format) -> Result<()> {
    if format == Format::Json {
        return write_json_rows(w, rows);
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(ORACLE_HEADER.iter().copied().chain(["low_confidence"]))?;
    for r in rows {
        out.write_record([
            fmt_real(r.alpha),
            fmt_real(r.epsilon),
            fmt_real(r.result.l0),
            r.result.depth.to_string(),
            fmt_real(r.result.value_low),
            fmt_real(r.result.value_high),
            fmt_real(r.result.mass_unresolved),
            r.result.low_confidence.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::sim::{simulate, RunConfig};
    use proptest::prelude::*;

    fn trace(seed: u64, n: u64) -> Vec<TraceStep> {
        let cfg = RunConfig::new(ModelParams::new(0.8, 0.05).unwrap(), n, seed).unwrap();
        simulate(&cfg).unwrap().steps
    }

    #[test]
    fn csv_header_and_precision() {
        let steps = trace(1, 5);
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &steps).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,theta,signal,l_pub,L_post,action,region\n"));
        let row = text.lines().nth(1).unwrap();
        let l_post = row.split(',').nth(4).unwrap();
        let mantissa = l_post.split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
    }

    #[test]
    fn jsonl_uses_csv_field_names() {
        let steps = trace(2, 3);
        let mut buf = Vec::new();
        write_trace_jsonl(&mut buf, &steps).unwrap();
        let first: serde_json::Value =
            serde_json::from_str(String::from_utf8(buf).unwrap().lines().next().unwrap()).unwrap();
        for k in TRACE_HEADER {
            assert!(first.get(k).is_some(), "missing {k}");
        }
        assert!(first["theta"].is_i64());
    }

    #[test]
    fn rejects_malformed_trace() {
        assert!(read_trace_csv("a,b\n1,2\n".as_bytes()).is_err());
        let bad = "t,theta,signal,l_pub,L_post,action,region\n1,0,1,0,0,1,learning\n";
        assert!(read_trace_csv(bad.as_bytes()).is_err());
        let bad = "t,theta,signal,l_pub,L_post,action,region\n1,1,1,x,0,1,learning\n";
        assert!(read_trace_csv(bad.as_bytes()).is_err());
    }

    #[test]
    fn guide_values() {
        let g = guides(&Model::from_values(0.8, 0.05).unwrap());
        assert!((g[0].value - 1.386294).abs() < 1e-6);
        assert_eq!(g[1].value, 0.0);
        assert_eq!(g[2].value, -g[0].value);
    }

    #[test]
    fn verify_table_round_trip() {
        let rows = vec![VerifyRow {
            alpha: 0.8,
            epsilon: 0.01,
            k: 19.089_643_519_091_34,
            m: 60.655_135_997_160_44,
            inv_eps: 100.0,
            max_cascade_len: 19,
            interval_low: 12.25,
            interval_high: 1.0 / 3.0,
            pass: true,
        }];
        let mut buf = Vec::new();
        write_verify(&mut buf, &rows, Format::Csv).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with(
            "alpha,epsilon,K,M,inv_eps,max_cascade_len,interval_low,interval_high,pass\n"
        ));
        assert_eq!(read_verify_csv(buf.as_slice()).unwrap(), rows);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn trace_files_round_trip(seed in any::<u64>(), n in 1u64..300) {
            let steps = trace(seed, n.max(2));
            let mut buf = Vec::new();
            write_trace_csv(&mut buf, &steps).unwrap();
            prop_assert_eq!(read_trace_csv(buf.as_slice()).unwrap(), steps.clone());
            let mut buf = Vec::new();
            write_trace_jsonl(&mut buf, &steps).unwrap();
            prop_assert_eq!(read_trace_jsonl(buf.as_slice()).unwrap(), steps);
        }

        #[test]
        fn reals_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            prop_assert_eq!(parse_real(&fmt_real(x)).unwrap().to_bits(), x.to_bits());
        }
    }
}
