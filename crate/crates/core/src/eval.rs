//! Proof rates, cost-aligned curves, ensembles and topic tables.
//!
//! Everything here is generic over the number type so the same aggregation
//! can be run in floating point or exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::generator::Temperature;
use crate::pipeline::{AttemptRecord, CostLedger};
use crate::Scalar;

pub const CSV_HEADER: [&str; 4] = ["inference cost", "theorems proven", "ratio", "temperature"];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("run at temperature {temperature} has only {available} attempts for {theorem_id}, budget {budget} needs more")]
    InsufficientSamples { temperature: Temperature, theorem_id: String, budget: u64, available: u64 },
    #[error("no runs to evaluate")]
    NoRuns,
    #[error("budgets must be positive and strictly increasing")]
    BadBudgets,
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {reason}")]
    Csv { path: String, reason: String },
}

#[derive(Clone, PartialEq, Debug)]
pub struct CurvePoint<S> {
    pub budget: S,
    pub proven: u64,
    pub ratio: S,
    pub temperature: Temperature,
    /// Mean per-theorem cost when it differs from the aligned budget.
    pub mean_cost: Option<S>,
}

#[derive(Clone, PartialEq, Debug)]
pub struct EvalCurve<S> {
    pub label: String,
    pub points: Vec<CurvePoint<S>>,
}

#[derive(Clone, PartialEq, Debug)]
pub struct TopicRow<S> {
    pub topic: String,
    pub n_theorems: u64,
    pub proven: u64,
    pub ratio: S,
}

#[derive(Clone, PartialEq, Debug)]
pub struct TopicTable<S> {
    pub label: String,
    pub rows: Vec<TopicRow<S>>,
}

fn ratio<S: Scalar>(num: usize, den: usize) -> S {
    if den == 0 {
        S::zero()
    } else {
        S::from_counts(num as u64, den as u64)
    }
}

/// Test theorems with at least one success.
pub fn proven_set<'a>(records: impl IntoIterator<Item = &'a AttemptRecord>, test: &BTreeSet<String>) -> BTreeSet<String> {
    records
        .into_iter()
        .filter(|r| r.outcome.is_success() && test.contains(&r.theorem_id))
        .map(|r| r.theorem_id.clone())
        .collect()
}

/// Fraction of `test` with at least one success; 0 for an empty test set.
pub fn proof_rate<'a, S: Scalar>(records: impl IntoIterator<Item = &'a AttemptRecord>, test: &BTreeSet<String>) -> S {
    ratio(proven_set(records, test).len(), test.len())
}

/// Test theorems proven within the first `budget` cost units of each
/// theorem, attempts taken in (sample index, round) order.
pub fn proven_within(
    records: &[AttemptRecord],
    test: &BTreeSet<String>,
    budget: u64,
    temperature: Temperature,
) -> Result<BTreeSet<String>, EvalError> {
    let mut by_thm: BTreeMap<&str, Vec<&AttemptRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| test.contains(&r.theorem_id)) {
        by_thm.entry(&r.theorem_id).or_default().push(r);
    }
    let mut out = BTreeSet::new();
    for (id, mut rs) in by_thm {
        rs.sort_by_key(|r| (r.candidate.sample_index, r.round));
        let mut spent = 0u64;
        let mut hit = false;
        for r in &rs {
            spent += u64::from(r.cost_units);
            if spent > budget {
                break;
            }
            if r.outcome.is_success() {
                hit = true;
                break;
            }
        }
        if hit {
            out.insert(id.to_string());
        } else if spent < budget {
            return Err(EvalError::InsufficientSamples { temperature, theorem_id: id.to_string(), budget, available: spent });
        }
    }
    Ok(out)
}

fn check_budgets(budgets: &[u64]) -> Result<(), EvalError> {
    if budgets.first() == Some(&0) || budgets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EvalError::BadBudgets);
    }
    Ok(())
}

/// Best temperature per budget: proof rate within each budget, maximized over
/// the runs. Ties go to the lower temperature.
pub fn curve<S: Scalar>(
    label: &str,
    runs: &BTreeMap<Temperature, Vec<AttemptRecord>>,
    test: &BTreeSet<String>,
    budgets: &[u64],
) -> Result<EvalCurve<S>, EvalError> {
    curve_tuned(label, runs, test, runs, test, budgets)
}

/// Like [`curve`], but the temperature for each budget is chosen on
/// `tune_runs`/`tune_set` and the reported numbers come from `runs`/`test`.
pub fn curve_tuned<S: Scalar>(
    label: &str,
    tune_runs: &BTreeMap<Temperature, Vec<AttemptRecord>>,
    tune_set: &BTreeSet<String>,
    runs: &BTreeMap<Temperature, Vec<AttemptRecord>>,
    test: &BTreeSet<String>,
    budgets: &[u64],
) -> Result<EvalCurve<S>, EvalError> {
    if runs.is_empty() || tune_runs.is_empty() {
        return Err(EvalError::NoRuns);
    }
    check_budgets(budgets)?;
    let mut points = Vec::with_capacity(budgets.len());
    for &b in budgets {
        let mut best: Option<(usize, Temperature)> = None;
        for (&t, recs) in tune_runs.iter().filter(|(t, _)| runs.contains_key(t)) {
            let n = proven_within(recs, tune_set, b, t)?.len();
            if best.is_none_or(|(m, _)| n > m) {
                best = Some((n, t));
            }
        }
        let (_, t) = best.ok_or(EvalError::NoRuns)?;
        let proven = proven_within(&runs[&t], test, b, t)?.len();
        points.push(CurvePoint {
            budget: S::from_count(b),
            proven: proven as u64,
            ratio: ratio(proven, test.len()),
            temperature: t,
            mean_cost: None,
        });
    }
    Ok(EvalCurve { label: label.to_string(), points })
}

/// Single point for a run whose cost per theorem is not fixed (repair):
/// plotted at the aligned budget with the measured mean cost alongside.
pub fn aligned_point<S: Scalar>(
    records: &[AttemptRecord],
    test: &BTreeSet<String>,
    aligned_budget: u64,
    temperature: Temperature,
) -> CurvePoint<S> {
    let proven = proven_set(records, test).len();
    let ledger = CostLedger::from_records(records.iter().filter(|r| test.contains(&r.theorem_id)));
    CurvePoint {
        budget: S::from_count(aligned_budget),
        proven: proven as u64,
        ratio: ratio(proven, test.len()),
        temperature,
        mean_cost: Some(ledger.mean()),
    }
}

pub fn ensemble_union(sets: &[BTreeSet<String>]) -> BTreeSet<String> {
    sets.iter().flatten().cloned().collect()
}

/// Union of several runs' proven sets, as a summary row.
#[derive(Clone, PartialEq, Debug)]
pub struct Ensemble<S> {
    pub members: Vec<String>,
    pub proven: u64,
    pub ratio: S,
}

pub fn ensemble<S: Scalar>(members: &[(String, BTreeSet<String>)], test: &BTreeSet<String>) -> Ensemble<S> {
    let sets: Vec<BTreeSet<String>> = members.iter().map(|(_, s)| s.intersection(test).cloned().collect()).collect();
    let union = ensemble_union(&sets);
    Ensemble {
        members: members.iter().map(|(l, _)| l.clone()).collect(),
        proven: union.len() as u64,
        ratio: ratio(union.len(), test.len()),
    }
}

/// Proof rate per topic over the test set. A theorem counts once in every
/// topic it holds; theorems without topics appear in no row.
pub fn topic_breakdown<'a, S: Scalar>(
    label: &str,
    records: impl IntoIterator<Item = &'a AttemptRecord>,
    test: &BTreeSet<String>,
    topic_map: &BTreeMap<String, BTreeSet<String>>,
) -> TopicTable<S> {
    let proven = proven_set(records, test);
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for id in test {
        for topic in topic_map.get(id).into_iter().flatten() {
            let c = counts.entry(topic).or_default();
            c.0 += 1;
            c.1 += usize::from(proven.contains(id));
        }
    }
    let rows = counts
        .into_iter()
        .map(|(topic, (n, p))| TopicRow { topic: topic.to_string(), n_theorems: n as u64, proven: p as u64, ratio: ratio(p, n) })
        .collect();
    TopicTable { label: label.to_string(), rows }
}

pub fn curve_to_csv<S: Scalar>(curve: &EvalCurve<S>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory csv");
    for p in &curve.points {
        w.write_record([p.budget.to_string(), p.proven.to_string(), p.ratio.to_string(), p.temperature.to_string()])
            .expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv output is utf-8")
}

/// Parse a curve CSV written by [`curve_to_csv`]. Mean costs are not part of
/// the CSV and come back as `None`.
pub fn parse_curve_csv<S: Scalar>(label: &str, text: &str) -> Result<EvalCurve<S>, String> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| e.to_string())?;
    if header.iter().ne(CSV_HEADER) {
        return Err(format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(",")));
    }
    let mut points = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let line = i + 2;
        let field = |k: usize| rec.get(k).ok_or_else(|| format!("line {line}: missing column {}", CSV_HEADER[k]));
        let num = |k: usize| -> Result<S, String> {
            let f = field(k)?;
            f.parse::<S>().map_err(|_| format!("line {line}: bad number `{f}`"))
        };
        points.push(CurvePoint {
            budget: num(0)?,
            proven: field(1)?.parse().map_err(|_| format!("line {line}: bad count"))?,
            ratio: num(2)?,
            temperature: field(3)?.parse().map_err(|e| format!("line {line}: {e}"))?,
            mean_cost: None,
        });
    }
    Ok(EvalCurve { label: label.to_string(), points })
}

fn fmt_pct<S: Scalar>(v: S) -> String {
    format!("{:.1}%", v.to_f64().unwrap_or(f64::NAN) * 100.0)
}

fn fmt_num<S: Scalar>(v: S) -> String {
    let f = v.to_f64().unwrap_or(f64::NAN);
    if f.fract() == 0.0 {
        format!("{f:.0}")
    } else {
        format!("{f:.2}")
    }
}

/// Fixed-width summary: one row per curve at its largest budget, ensemble
/// rows, then one block per topic table.
pub fn summary_text<S: Scalar>(
    curves: &[EvalCurve<S>],
    ensembles: &[Ensemble<S>],
    tables: &[TopicTable<S>],
    test_size: usize,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "test theorems: {test_size}");
    let _ = writeln!(out);
    let w = curves.iter().map(|c| c.label.len()).chain([3]).max().unwrap_or(3);
    let _ = writeln!(out, "{:<w$}  {:>6}  {:>9}  {:>6}  {:>10}  {:>11}", "run", "budget", "mean cost", "proven", "proof rate", "temperature");
    for c in curves {
        let Some(p) = c.points.last() else {
            let _ = writeln!(out, "{:<w$}  (no points)", c.label);
            continue;
        };
        let mean = p.mean_cost.map(fmt_num).unwrap_or_else(|| fmt_num(p.budget));
        let _ = writeln!(
            out,
            "{:<w$}  {:>6}  {:>9}  {:>6}  {:>10}  {:>11}",
            c.label,
            fmt_num(p.budget),
            mean,
            p.proven,
            fmt_pct(p.ratio),
            p.temperature.to_string()
        );
    }
    for e in ensembles {
        let _ = writeln!(out);
        let _ = writeln!(out, "union of {}: {} proven, {}", e.members.join(" + "), e.proven, fmt_pct(e.ratio));
    }
    for t in tables {
        let _ = writeln!(out);
        let tw = t.rows.iter().map(|r| r.topic.len()).chain([5]).max().unwrap_or(5);
        let _ = writeln!(out, "topics ({})", t.label);
        let _ = writeln!(out, "{:<tw$}  {:>10}  {:>6}  {:>10}", "topic", "theorems", "proven", "proof rate");
        for r in &t.rows {
            let _ = writeln!(out, "{:<tw$}  {:>10}  {:>6}  {:>10}", r.topic, r.n_theorems, r.proven, fmt_pct(r.ratio));
        }
    }
    out
}

/// File name for a curve label: anything outside `[A-Za-z0-9._-]` becomes `_`.
pub fn csv_file_name(label: &str) -> String {
    let stem: String =
        label.chars().map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' }).collect();
    format!("{stem}.csv")
}

/// Write one CSV per curve plus `summary.txt` into `out_dir`.
pub fn report<S: Scalar>(
    curves: &[EvalCurve<S>],
    ensembles: &[Ensemble<S>],
    tables: &[TopicTable<S>],
    test_size: usize,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, EvalError> {
    let io = |p: &Path| {
        let path = p.display().to_string();
        move |source| EvalError::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let mut written = Vec::new();
    for c in curves {
        let path = out_dir.join(csv_file_name(&c.label));
        fs::write(&path, curve_to_csv(c)).map_err(io(&path))?;
        written.push(path);
    }
    let path = out_dir.join("summary.txt");
    fs::write(&path, summary_text(curves, ensembles, tables, test_size)).map_err(io(&path))?;
    written.push(path);
    Ok(written)
}

pub fn read_curve_csv<S: Scalar>(path: &Path, label: &str) -> Result<EvalCurve<S>, EvalError> {
    let text = fs::read_to_string(path).map_err(|source| EvalError::Io { path: path.display().to_string(), source })?;
    parse_curve_csv(label, &text).map_err(|reason| EvalError::Csv { path: path.display().to_string(), reason })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::{CheckOutcome, CheckStatus};
    use crate::generator::{CandidateProof, SamplingParams};
    use crate::Rational;

    fn rec(id: &str, idx: u32, ok: bool) -> AttemptRecord {
        AttemptRecord {
            theorem_id: id.into(),
            round: 0,
            candidate: CandidateProof { text: String::new(), theorem_id: id.into(), params: SamplingParams::default(), sample_index: idx },
            outcome: if ok { CheckOutcome::success() } else { CheckOutcome::failure(CheckStatus::Error, "Step error: x", Some(1)) },
            cost_units: 1,
            parent: None,
        }
    }

    fn set(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn proof_rate_basics() {
        let test = set(&["a", "b"]);
        assert_eq!(proof_rate::<f64>(&[], &test), 0.0);
        let all = [rec("a", 0, true), rec("b", 0, true)];
        assert_eq!(proof_rate::<f64>(&all, &test), 1.0);
        let half = [rec("a", 0, true), rec("b", 0, false), rec("z", 0, true)];
        assert_eq!(proof_rate::<Rational>(&half, &test), Rational::new(1, 2));
        assert_eq!(proof_rate::<f64>(&half, &BTreeSet::new()), 0.0);
    }

    fn run(success_at: &[(&str, Option<u32>)], n: u32) -> Vec<AttemptRecord> {
        let mut out = Vec::new();
        for (id, at) in success_at {
            for i in 0..n {
                out.push(rec(id, i, Some(i) == *at));
            }
        }
        out
    }

    #[test]
    fn tuned_temperature_moves_with_budget() {
        let test = set(&["a", "b", "c"]);
        let mut runs = BTreeMap::new();
        // greedy: a proven at once, nothing else ever
        runs.insert(Temperature::ZERO, run(&[("a", Some(0)), ("b", None), ("c", None)], 16));
        // hot: slower start, more in the end
        runs.insert(Temperature::from_millis(800), run(&[("a", Some(3)), ("b", Some(9)), ("c", Some(15))], 16));
        let c: EvalCurve<Rational> = curve("gen", &runs, &test, &[1, 2, 4, 8, 16]).unwrap();
        let temps: Vec<String> = c.points.iter().map(|p| p.temperature.to_string()).collect();
        assert_eq!(temps, ["0.0", "0.0", "0.0", "0.0", "0.8"]);
        assert_eq!(c.points[4].ratio, Rational::new(1, 1));
        assert_eq!(c.points[0].ratio, Rational::new(1, 3));
    }

    #[test]
    fn ties_prefer_lower_temperature() {
        let test = set(&["a"]);
        let mut runs = BTreeMap::new();
        runs.insert(Temperature::from_millis(400), run(&[("a", Some(0))], 2));
        runs.insert(Temperature::from_millis(200), run(&[("a", Some(1))], 2));
        let c: EvalCurve<f64> = curve("x", &runs, &test, &[1, 2]).unwrap();
        assert_eq!(c.points[0].temperature, Temperature::from_millis(400));
        assert_eq!(c.points[1].temperature, Temperature::from_millis(200));
    }

    #[test]
    fn insufficient_samples() {
        let test = set(&["a"]);
        let mut runs = BTreeMap::new();
        runs.insert(Temperature::ZERO, run(&[("a", None)], 2));
        assert!(matches!(curve::<f64>("x", &runs, &test, &[4]), Err(EvalError::InsufficientSamples { .. })));
        // a theorem proven early needs no further samples
        runs.insert(Temperature::ZERO, run(&[("a", Some(0))], 1));
        assert!(curve::<f64>("x", &runs, &test, &[4]).is_ok());
        assert!(matches!(curve::<f64>("x", &runs, &test, &[2, 2]), Err(EvalError::BadBudgets)));
    }

    #[test]
    fn topics_count_in_every_row() {
        let test = set(&["a", "b", "c"]);
        let mut topics = BTreeMap::new();
        topics.insert("a".to_string(), set(&["Logic", "Algebra"]));
        topics.insert("b".to_string(), set(&["Logic"]));
        let recs = [rec("a", 0, true), rec("b", 0, false), rec("c", 0, true)];
        let t: TopicTable<Rational> = topic_breakdown("x", &recs, &test, &topics);
        assert_eq!(t.rows.len(), 2);
        assert_eq!((t.rows[0].topic.as_str(), t.rows[0].n_theorems, t.rows[0].proven), ("Algebra", 1, 1));
        assert_eq!((t.rows[1].topic.as_str(), t.rows[1].n_theorems, t.rows[1].proven), ("Logic", 2, 1));
        assert_eq!(t.rows[1].ratio, Rational::new(1, 2));
    }

    #[test]
    fn csv_round_trip_both_scalars() {
        let c = EvalCurve {
            label: "gen".into(),
            points: vec![CurvePoint { budget: 1.0, proven: 3, ratio: 0.1, temperature: Temperature::ZERO, mean_cost: None }],
        };
        let text = curve_to_csv(&c);
        assert_eq!(text, "inference cost,theorems proven,ratio,temperature\n1,3,0.1,0.0\n");
        assert_eq!(parse_curve_csv::<f64>("gen", &text).unwrap(), c);
        let exact = EvalCurve {
            label: "gen".into(),
            points: vec![CurvePoint {
                budget: Rational::new(4, 1),
                proven: 2,
                ratio: Rational::new(2, 7),
                temperature: Temperature::from_millis(600),
                mean_cost: None,
            }],
        };
        let text = curve_to_csv(&exact);
        assert!(text.ends_with("4,2,2/7,0.6\n"));
        assert_eq!(parse_curve_csv::<Rational>("gen", &text).unwrap(), exact);
        assert!(parse_curve_csv::<f64>("gen", "a,b\n").is_err());
    }

    #[test]
    fn aligned_point_reports_mean_cost() {
        let test = set(&["a", "b"]);
        let mut recs = run(&[("a", None), ("b", Some(0))], 2);
        let mut r = rec("a", 0, true);
        r.round = 1;
        recs.push(r);
        let p: CurvePoint<Rational> = aligned_point(&recs, &test, 4, Temperature::ZERO);
        assert_eq!(p.proven, 2);
        assert_eq!(p.mean_cost, Some(Rational::new(5, 2)));
        assert_eq!(p.budget, Rational::new(4, 1));
    }
}
