//! Cross-product parameter sweeps over one or both engines, written as CSV.

use super::config::{resolve_scenario, set_path};
use super::Scenario;
use crate::error::{Error, Result};
use crate::multihop::NetworkSolution;
use crate::sim::{Estimate, SimStats};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::{Path, PathBuf};

/// Columns before and after the sweep parameter columns.
pub const CSV_HEADER_FIXED: [&str; 1] = ["scenario_id"];
const CSV_TAIL: [&str; 8] = [
    "src",
    "dst",
    "metric",
    "analytic_value",
    "sim_mean",
    "sim_ci95_half",
    "replications",
    "warnings",
];
pub const DEFAULT_MAX_POINTS: usize = 10_000;

/// Per-link metrics, in row order.
const LINK_METRICS: [&str; 6] = ["reliability", "delay_s", "power_mw", "busy_prob", "loss_prob", "end_to_end"];
/// Aggregate metrics, in row order.
const AGGREGATE_METRICS: [&str; 3] = ["reliability", "delay_s", "power_mw"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    #[default]
    Analytic,
    Simulate,
    Compare,
}

impl Engine {
    fn analytic(self) -> bool {
        matches!(self, Engine::Analytic | Engine::Compare)
    }

    fn simulate(self) -> bool {
        matches!(self, Engine::Simulate | Engine::Compare)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParam {
    /// Dotted path into the scenario document, e.g. `traffic.lambda`.
    pub path: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub engine: Engine,
    #[serde(default)]
    pub params: Vec<SweepParam>,
    #[serde(default = "max_points")]
    pub max_points: usize,
}

fn max_points() -> usize {
    DEFAULT_MAX_POINTS
}

impl SweepSpec {
    /// Reads the `sweep` table of a scenario document, if any.
    pub fn from_document(doc: &Value) -> Result<Option<Self>> {
        doc.get("sweep")
            .map(|v| {
                serde_json::from_value(v.clone()).map_err(|e| Error::Parse {
                    message: format!("sweep: {e}"),
                    line: None,
                })
            })
            .transpose()
    }
}

/// Every sweep point in row order: the first parameter varies slowest.
pub fn sweep_points(spec: &SweepSpec) -> Result<Vec<Vec<Value>>> {
    let mut total: usize = 1;
    for p in &spec.params {
        if p.values.is_empty() {
            return Err(Error::Validation(format!("sweep parameter '{}' has no values", p.path)));
        }
        total = total.saturating_mul(p.values.len());
    }
    if total > spec.max_points {
        return Err(Error::Validation(format!(
            "sweep has {total} points, above the cap of {}",
            spec.max_points
        )));
    }
    let mut points = vec![Vec::new()];
    for p in &spec.params {
        points = points
            .into_iter()
            .flat_map(|pt| {
                p.values.iter().map(move |v| {
                    let mut next = pt.clone();
                    next.push(v.clone());
                    next
                })
            })
            .collect();
    }
    Ok(points)
}

/// C-style `%.9g`.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.into();
    }
    const P: i32 = 9;
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..P).contains(&exp) {
        let m = strip_zeros(mantissa);
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        strip_zeros(&format!("{:.*}", (P - 1 - exp) as usize, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn format_value(v: &Value) -> String {
    match v {
        Value::Number(n) => n.as_f64().map(format_number).unwrap_or_else(|| n.to_string()),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

struct PointResult {
    sweep_values: Vec<String>,
    id: String,
    links: Vec<(usize, usize)>,
    analytic: Option<NetworkSolution>,
    sim: Option<SimStats>,
    warnings: Vec<String>,
}

fn run_point(doc: &Value, spec: &SweepSpec, values: &[Value]) -> PointResult {
    let mut warnings = Vec::new();
    let mut d = doc.clone();
    if let Value::Object(m) = &mut d {
        m.remove("sweep");
    }
    let mut setup = Ok(());
    for (p, v) in spec.params.iter().zip(values) {
        if let Err(e) = set_path(&mut d, &p.path, v.clone()) {
            setup = Err(e);
            break;
        }
    }
    let scenario: Result<Scenario> = setup.and_then(|_| resolve_scenario(&d));
    let id = d.get("id").and_then(Value::as_str).unwrap_or("scenario").to_string();
    let mut out = PointResult {
        sweep_values: values.iter().map(format_value).collect(),
        id,
        links: Vec::new(),
        analytic: None,
        sim: None,
        warnings: Vec::new(),
    };
    let sc = match scenario {
        Ok(sc) => sc,
        Err(e) => {
            out.warnings.push(format!("scenario {}: {e}", e.kind()));
            return out;
        }
    };
    out.id = sc.id.clone();
    out.links = sc.topology.links().iter().map(|l| (l.tx, l.rx)).collect();
    warnings.extend(sc.warnings.iter().cloned());
    if spec.engine.analytic() {
        match sc.analyze() {
            Ok(sol) => {
                warnings.extend(sol.fixed_point.warnings.iter().cloned());
                out.analytic = Some(sol);
            }
            Err(e) => warnings.push(format!("analytic {}: {e}", e.kind())),
        }
    }
    if spec.engine.simulate() {
        match sc.simulate() {
            Ok(s) => out.sim = Some(s),
            Err(e) => warnings.push(format!("simulate {}: {e}", e.kind())),
        }
    }
    out.warnings = warnings;
    out
}

fn analytic_link(sol: &NetworkSolution, l: usize, metric: &str) -> Option<f64> {
    let m = &sol.report.links[l];
    match metric {
        "reliability" => Some(m.reliability),
        "delay_s" => m.delay_s,
        "power_mw" => Some(m.power_mw),
        "busy_prob" => Some(m.alpha),
        "loss_prob" => Some(m.gamma),
        "end_to_end" => sol.report.end_to_end.iter().find(|(n, _)| *n == m.src).map(|(_, r)| *r),
        _ => None,
    }
}

fn sim_link(sim: &SimStats, l: usize, metric: &str) -> Option<Estimate> {
    let s = &sim.links[l];
    match metric {
        "reliability" => s.reliability,
        "delay_s" => s.delay_s,
        "power_mw" => s.power_mw,
        "busy_prob" => s.busy_prob,
        "loss_prob" => s.loss_prob,
        "end_to_end" => s.end_to_end,
        _ => None,
    }
}

fn analytic_aggregate(sol: &NetworkSolution, metric: &str) -> Option<f64> {
    match metric {
        "reliability" => Some(sol.report.mean_reliability),
        "delay_s" => sol.report.mean_delay_s,
        "power_mw" => Some(sol.report.mean_power_mw),
        _ => None,
    }
}

fn sim_aggregate(sim: &SimStats, metric: &str) -> Option<Estimate> {
    match metric {
        "reliability" => sim.mean_reliability,
        "delay_s" => sim.mean_delay_s,
        "power_mw" => sim.mean_power_mw,
        _ => None,
    }
}

/// Runs every point on up to `workers` threads and returns the CSV text.
/// Row order depends only on the spec, never on completion order.
pub fn sweep_csv(doc: &Value, spec: &SweepSpec, workers: usize) -> Result<String> {
    let points = sweep_points(spec)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    let results: Vec<PointResult> = pool.install(|| points.par_iter().map(|p| run_point(doc, spec, p)).collect());

    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = CSV_HEADER_FIXED
        .iter()
        .copied()
        .chain(spec.params.iter().map(|p| p.path.as_str()))
        .chain(CSV_TAIL)
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    let opt = |x: Option<f64>| x.map(format_number).unwrap_or_default();
    for r in &results {
        let warnings = r.warnings.join("; ");
        let mut row = |src: String, dst: String, metric: &str, a: Option<f64>, s: Option<Estimate>| {
            let mut rec = vec![r.id.clone()];
            rec.extend(r.sweep_values.iter().cloned());
            rec.extend([
                src,
                dst,
                metric.to_string(),
                opt(a),
                opt(s.map(|e| e.mean)),
                opt(s.and_then(|e| e.ci95_half)),
                s.map(|e| e.n.to_string()).unwrap_or_default(),
                warnings.clone(),
            ]);
            w.write_record(&rec).map_err(csv_err)
        };
        for (l, &(src, dst)) in r.links.iter().enumerate() {
            for metric in LINK_METRICS {
                let a = r.analytic.as_ref().and_then(|s| analytic_link(s, l, metric));
                let s = r.sim.as_ref().and_then(|s| sim_link(s, l, metric));
                row(src.to_string(), dst.to_string(), metric, a, s)?;
            }
        }
        for metric in AGGREGATE_METRICS {
            let a = r.analytic.as_ref().and_then(|s| analytic_aggregate(s, metric));
            let s = r.sim.as_ref().and_then(|s| sim_aggregate(s, metric));
            row(String::new(), String::new(), metric, a, s)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(format!("csv: {e}")))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Internal(format!("csv: {e}"))
}

/// Writes `<out_dir>/<id>_sweep.csv` and returns its path.
pub fn run_sweep(doc: &Value, spec: &SweepSpec, workers: usize, out_dir: &Path) -> Result<PathBuf> {
    let text = sweep_csv(doc, spec, workers)?;
    std::fs::create_dir_all(out_dir)?;
    let id = doc.get("id").and_then(Value::as_str).unwrap_or("scenario");
    let path = out_dir.join(format!("{id}_sweep.csv"));
    std::fs::write(&path, text)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_document;

    #[test]
    fn percent_g_formatting() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (0.5, "0.5"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (1.0 / 3.0, "0.333333333"),
            (-2.5e-7, "-2.5e-07"),
            (0.1 + 0.2, "0.3"),
            (999999999.6, "1e+09"),
            (1e100, "1e+100"),
        ];
        for (x, want) in cases {
            assert_eq!(format_number(x), want, "{x:e}");
        }
    }

    #[test]
    fn cross_product_order_and_cap() {
        let spec: SweepSpec = serde_json::from_value(serde_json::json!({
            "params": [{"path": "a", "values": [1, 2]}, {"path": "b", "values": ["x", "y", "z"]}]
        }))
        .unwrap();
        let pts = sweep_points(&spec).unwrap();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[1], vec![serde_json::json!(1), serde_json::json!("y")]);
        assert_eq!(pts[3], vec![serde_json::json!(2), serde_json::json!("x")]);
        let capped = SweepSpec { max_points: 5, ..spec };
        assert_eq!(sweep_points(&capped).unwrap_err().kind(), "validation");
    }

    #[test]
    fn analytic_sweep_shape() {
        let doc = parse_document(
            r#"
id = "star"
[topology]
kind = "star"
nodes = 7
[traffic]
lambda = 1
[sweep]
engine = "analytic"
[[sweep.params]]
path = "traffic.lambda"
values = [0.1, 1, 10]
"#,
        )
        .unwrap();
        let spec = SweepSpec::from_document(&doc).unwrap().unwrap();
        let csv = sweep_csv(&doc, &spec, 2).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "scenario_id,traffic.lambda,src,dst,metric,analytic_value,sim_mean,sim_ci95_half,replications,warnings"
        );
        assert_eq!(lines.len(), 1 + 3 * (7 * LINK_METRICS.len() + AGGREGATE_METRICS.len()));
        let agg: Vec<&str> = lines.iter().filter(|l| l.split(',').nth(2) == Some("")).copied().collect();
        assert_eq!(agg.len(), 9);
        for l in &lines[1..] {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f[0], "star");
            assert!(f[5].parse::<f64>().is_ok(), "{l}");
            assert_eq!(&f[6..9], ["", "", ""]);
        }
        assert_eq!(csv, sweep_csv(&doc, &spec, 1).unwrap());
    }

    #[test]
    fn failing_points_are_recorded_not_fatal() {
        let doc = parse_document(
            "[topology]\nkind = \"star\"\nnodes = 2\n[traffic]\nlambda = 1\n[sweep]\n[[sweep.params]]\npath = \"mac.m0\"\nvalues = [3, 9]\n",
        )
        .unwrap();
        let spec = SweepSpec::from_document(&doc).unwrap().unwrap();
        let csv = sweep_csv(&doc, &spec, 1).unwrap();
        let bad: Vec<&str> = csv.lines().filter(|l| l.contains("validation")).collect();
        assert_eq!(bad.len(), AGGREGATE_METRICS.len());
        assert!(csv.lines().count() > 1 + 2 * LINK_METRICS.len());
    }
}
