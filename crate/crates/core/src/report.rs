//! Tidy CSV outputs and plain-text table rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::calldata::{csv_io, DatasetSummary, Histogram};
use crate::error::{Error, Result};
use crate::evaluation::{EvaluationReport, Method};
use crate::stats::pretest::PretestReport;

pub const EPSILON_ACCURACY_CSV: &str = "epsilon_accuracy.csv";
pub const METHOD_COMPARISON_CSV: &str = "method_comparison.csv";
pub const K_SWEEP_CSV: &str = "k_sweep.csv";
pub const PER_EGO_CSV: &str = "per_ego.csv";
pub const EVALUATION_SUMMARY_CSV: &str = "evaluation_summary.csv";

/// Short label for a duration: `15min`, `1h`, `90s`.
pub fn duration_label(secs: i64) -> String {
    if secs % 3600 == 0 {
        format!("{}h", secs / 3600)
    } else if secs % 60 == 0 {
        format!("{}min", secs / 60)
    } else {
        format!("{secs}s")
    }
}

/// Parses `900`, `90s`, `15m`, `15min`, `1h`, `2d`.
pub fn parse_duration(s: &str) -> Result<i64> {
    let s = s.trim();
    let split = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let n: i64 = num
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad duration {s:?}")))?;
    let mult = match unit {
        "" | "s" => 1,
        "m" | "min" => 60,
        "h" => 3600,
        "d" => 86_400,
        _ => return Err(Error::InvalidConfig(format!("bad duration unit in {s:?}"))),
    };
    Ok(n * mult)
}

/// Fixed six decimals; empty when undefined (nothing was tested).
fn f6(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        String::new()
    }
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::Writer::from_writer(w)
}

fn row<W: Write, I, S>(wtr: &mut csv::Writer<W>, fields: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    wtr.write_record(fields).map_err(csv_io)
}

pub fn write_summary<W: Write>(w: W, s: &DatasetSummary, dropped: usize) -> Result<()> {
    let mut wtr = writer(w);
    row(&mut wtr, ["n_egos", "n_events", "n_pairs", "mean_calls_per_day", "dropped_outside_window"])?;
    row(
        &mut wtr,
        [
            s.n_egos.to_string(),
            s.n_events.to_string(),
            s.n_pairs.to_string(),
            f6(s.mean_calls_per_day),
            dropped.to_string(),
        ],
    )?;
    wtr.flush()?;
    Ok(())
}

pub fn write_histogram<W: Write>(w: W, h: &Histogram) -> Result<()> {
    let mut wtr = writer(w);
    row(&mut wtr, ["bin_lower", "bin_upper", "probability"])?;
    for (&bin, &mass) in &h.masses {
        row(
            &mut wtr,
            [f6(h.bin_lower(bin)), f6(h.bin_lower(bin + 1)), format!("{mass:.9}")],
        )?;
    }
    wtr.flush()?;
    Ok(())
}

/// `ego_id,alter_id,resolution,q,lags,p_value,reject`; untestable pairs
/// leave the numeric fields empty and carry `untestable` in `reject`.
pub fn write_pretest_pairs<W: Write>(w: W, report: &PretestReport) -> Result<()> {
    let mut wtr = writer(w);
    row(&mut wtr, ["ego_id", "alter_id", "resolution", "q", "lags", "p_value", "reject"])?;
    for p in &report.pairs {
        let fields = match &p.outcome {
            Ok(q) => [
                f6(q.q_statistic),
                q.lags_used.to_string(),
                format!("{:.8}", q.p_value),
                q.reject_at_5pct.to_string(),
            ],
            Err(_) => [String::new(), String::new(), String::new(), "untestable".into()],
        };
        row(
            &mut wtr,
            [p.ego_id.as_str(), p.alter_id.as_str(), p.resolution.as_str()]
                .into_iter()
                .map(str::to_string)
                .chain(fields),
        )?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_pretest_ks<W: Write>(w: W, report: &PretestReport) -> Result<()> {
    let mut wtr = writer(w);
    row(&mut wtr, ["ego_id", "n", "d", "rate", "p_value", "reject"])?;
    for k in &report.ks {
        let fields = match &k.outcome {
            Ok(r) => [
                r.n.to_string(),
                f6(r.d_statistic),
                format!("{:.8}", r.rate_estimate),
                format!("{:.8}", r.p_value),
                r.reject_at_5pct.to_string(),
            ],
            Err(_) => [String::new(), String::new(), String::new(), String::new(), "untestable".into()],
        };
        row(&mut wtr, std::iter::once(k.ego_id.clone()).chain(fields))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Aggregate fractions: pairs rejecting at 5% per resolution, and egos
/// whose exponential fit is not rejected.
pub fn write_pretest_aggregate<W: Write>(w: W, report: &PretestReport) -> Result<()> {
    let mut wtr = writer(w);
    row(&mut wtr, ["test", "resolution", "tested", "untestable", "fraction"])?;
    for s in &report.by_resolution {
        row(
            &mut wtr,
            [
                "ljung_box_reject".to_string(),
                s.resolution.as_str().to_string(),
                s.tested.to_string(),
                s.untestable.to_string(),
                f6(s.reject_fraction()),
            ],
        )?;
    }
    row(
        &mut wtr,
        [
            "ks_exponential_not_rejected".to_string(),
            String::new(),
            report.ks_tested.to_string(),
            report.ks_untestable.to_string(),
            f6(report.ks_non_reject_fraction()),
        ],
    )?;
    wtr.flush()?;
    Ok(())
}

/// Single-number prediction accuracy per threshold, at the smallest k.
pub fn write_epsilon_accuracy<W: Write>(w: W, report: &EvaluationReport) -> Result<()> {
    let k = report.ks.iter().copied().min().unwrap_or(1);
    let mut wtr = writer(w);
    row(&mut wtr, ["epsilon", "epsilon_seconds", "k", "proportion", "n_egos"])?;
    for &eps in &report.epsilons {
        row(
            &mut wtr,
            [
                duration_label(eps),
                eps.to_string(),
                k.to_string(),
                f6(report.mean_epsilon(k, eps)),
                report.per_ego.len().to_string(),
            ],
        )?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_method_comparison<W: Write>(w: W, report: &EvaluationReport) -> Result<()> {
    let mut wtr = writer(w);
    row(&mut wtr, ["method", "k", "accuracy", "n_egos"])?;
    for method in Method::ALL {
        for &k in &report.ks {
            row(
                &mut wtr,
                [
                    method.as_str().to_string(),
                    k.to_string(),
                    f6(report.mean_accuracy(method, k)),
                    report.per_ego.len().to_string(),
                ],
            )?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_k_sweep<W: Write>(w: W, report: &EvaluationReport) -> Result<()> {
    let mut wtr = writer(w);
    row(&mut wtr, ["epsilon", "epsilon_seconds", "k", "proportion", "n_egos"])?;
    for &eps in &report.epsilons {
        for &k in &report.ks {
            row(
                &mut wtr,
                [
                    duration_label(eps),
                    eps.to_string(),
                    k.to_string(),
                    f6(report.mean_epsilon(k, eps)),
                    report.per_ego.len().to_string(),
                ],
            )?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// One row per ego and k with all three methods side by side.
pub fn write_per_ego<W: Write>(w: W, report: &EvaluationReport) -> Result<()> {
    let mut wtr = writer(w);
    row(
        &mut wtr,
        [
            "ego_id",
            "k",
            "topk_rec_acc",
            "lastk_acc",
            "topk_freq_acc",
            "n_classes",
            "n_test_calls",
            "n_out_of_class",
        ],
    )?;
    for e in &report.per_ego {
        for &k in &report.ks {
            let acc = |m| f6(e.accuracy(m, k).unwrap_or(f64::NAN));
            row(
                &mut wtr,
                [
                    e.ego_id.clone(),
                    k.to_string(),
                    acc(Method::TopKRec),
                    acc(Method::LastK),
                    acc(Method::TopKFrequent),
                    e.n_classes.to_string(),
                    e.n_test_calls.to_string(),
                    e.n_out_of_class.to_string(),
                ],
            )?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_evaluation_summary<W: Write>(w: W, report: &EvaluationReport) -> Result<()> {
    let mut wtr = writer(w);
    row(&mut wtr, ["evaluated_egos", "skipped_egos", "test_calls", "out_of_class_calls"])?;
    row(
        &mut wtr,
        [
            report.per_ego.len().to_string(),
            report.skipped.len().to_string(),
            report.total_test_calls().to_string(),
            report.total_out_of_class().to_string(),
        ],
    )?;
    wtr.flush()?;
    Ok(())
}

fn read_rows<R: Read>(r: R) -> Result<Vec<BTreeMap<String, String>>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers().map_err(csv_io)?.clone();
    rdr.records()
        .map(|rec| {
            let rec = rec.map_err(csv_io)?;
            Ok(headers
                .iter()
                .zip(rec.iter())
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect())
        })
        .collect()
}

fn field<'a>(row: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    row.get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::InvalidConfig(format!("report CSV lacks column {key:?}")))
}

/// Renders the three evaluation CSVs as plain-text tables.
pub fn render_tables<R1: Read, R2: Read, R3: Read>(
    epsilon_csv: R1,
    method_csv: R2,
    k_sweep_csv: R3,
) -> Result<String> {
    let mut out = String::new();

    let eps = read_rows(epsilon_csv)?;
    out.push_str("Proportion of correctly predicted calls\n\n");
    let labels: Vec<String> = eps
        .iter()
        .map(|r| field(r, "epsilon").map(|e| format!("eps({e})")))
        .collect::<Result<_>>()?;
    let _ = writeln!(out, "| {} |", labels.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(labels.len()));
    let values: Vec<String> = eps
        .iter()
        .map(|r| field(r, "proportion").map(str::to_string))
        .collect::<Result<_>>()?;
    let _ = writeln!(out, "| {} |\n", values.join(" | "));

    let methods = read_rows(method_csv)?;
    out.push_str("Average accuracy (%) by method\n\n");
    let mut ks: Vec<usize> = Vec::new();
    let mut table: BTreeMap<String, BTreeMap<usize, f64>> = BTreeMap::new();
    for r in &methods {
        let k: usize = field(r, "k")?
            .parse()
            .map_err(|_| Error::InvalidConfig("bad k".into()))?;
        let acc: f64 = field(r, "accuracy")?
            .parse()
            .map_err(|_| Error::InvalidConfig("bad accuracy".into()))?;
        if !ks.contains(&k) {
            ks.push(k);
        }
        table.entry(field(r, "method")?.to_string()).or_default().insert(k, acc);
    }
    let _ = writeln!(
        out,
        "| method | {} |",
        ks.iter().map(|k| format!("k={k}")).collect::<Vec<_>>().join(" | ")
    );
    let _ = writeln!(out, "|---|{}", "---|".repeat(ks.len()));
    for method in Method::ALL {
        if let Some(row) = table.get(method.as_str()) {
            let cells: Vec<String> = ks
                .iter()
                .map(|k| row.get(k).map_or(String::new(), |a| format!("{:.2}", a * 100.0)))
                .collect();
            let _ = writeln!(out, "| {} | {} |", method.as_str(), cells.join(" | "));
        }
    }
    out.push('\n');

    let sweep = read_rows(k_sweep_csv)?;
    out.push_str("Proportion of correctly predicted calls by list length\n\n");
    let mut eps_cols: Vec<String> = Vec::new();
    let mut by_k: BTreeMap<usize, BTreeMap<String, String>> = BTreeMap::new();
    for r in &sweep {
        let e = field(r, "epsilon")?.to_string();
        let k: usize = field(r, "k")?
            .parse()
            .map_err(|_| Error::InvalidConfig("bad k".into()))?;
        if !eps_cols.contains(&e) {
            eps_cols.push(e.clone());
        }
        by_k.entry(k).or_default().insert(e, field(r, "proportion")?.to_string());
    }
    let _ = writeln!(
        out,
        "| k | {} |",
        eps_cols.iter().map(|e| format!("eps({e})")).collect::<Vec<_>>().join(" | ")
    );
    let _ = writeln!(out, "|---|{}", "---|".repeat(eps_cols.len()));
    for (k, cells) in &by_k {
        let vals: Vec<&str> = eps_cols
            .iter()
            .map(|e| cells.get(e).map_or("", String::as_str))
            .collect();
        let _ = writeln!(out, "| {k} | {} |", vals.join(" | "));
    }
    Ok(out)
}
