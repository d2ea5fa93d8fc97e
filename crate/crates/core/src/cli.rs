//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when `verify` finds a failing identity (the
//! report is still written to stdout), 2 on usage or domain errors.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::graph::{self, Family, Graph, VertexId};
use crate::heat::{self, HeatError};
use crate::operator::{self, EngineError};
use crate::report::{compare_series, IdentityReport};
use crate::series::{SeriesError, USeries, DEFAULT_ORDER};
use crate::zeta::{self, ZetaError};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "bzk", version, about = "Generalized Bartholdi zeta functions and heat kernels of graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Zeta series by one or all routes, optionally evaluated on a (u, t) grid.
    Zeta(ZetaArgs),
    /// Heat kernel on a τ grid by the Bessel series and/or the spectrum.
    Heat(HeatArgs),
    /// Euler product over primitive rooted closed paths.
    Euler(EulerArgs),
    /// Exact identity checks and route equivalence.
    Verify(VerifyArgs),
    /// Describe the built-in corpus or one graph.
    Graphs(GraphsArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyName {
    Cycle,
    Complete,
    Hypercube,
    Petersen,
    Path,
    Star,
    TreeBall,
}

#[derive(Debug, Args)]
pub struct GraphSource {
    /// Graph file: JSON `{"vertices": n, "edges": [[a, b], ...]}` or an edge list.
    #[arg(long, conflicts_with = "family")]
    pub graph: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyName>,
    /// Vertex count for cycle, complete, path and star.
    #[arg(long)]
    pub n: Option<usize>,
    /// Dimension for hypercube.
    #[arg(long)]
    pub d: Option<usize>,
    /// Tree degree for tree-ball.
    #[arg(long = "q-plus-1")]
    pub q_plus_1: Option<usize>,
    /// Ball radius for tree-ball.
    #[arg(long)]
    pub radius: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ZetaRoute {
    Log,
    Rhs,
    Spectral,
    Euler,
    All,
}

#[derive(Debug, Args)]
pub struct ZetaArgs {
    #[command(flatten)]
    pub source: GraphSource,
    #[arg(long, default_value_t = 0)]
    pub root: VertexId,
    /// Second vertex of the two-point zeta; defaults to the root.
    #[arg(long)]
    pub target: Option<VertexId>,
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    pub order: usize,
    #[arg(long, value_enum, default_value = "log")]
    pub route: ZetaRoute,
    /// Numeric t values, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub t: Vec<f64>,
    /// Numeric u values, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub u: Vec<f64>,
    #[arg(long, value_enum, default_value = "json")]
    pub out: Format,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HeatRouteArg {
    Bessel,
    Spectral,
    Both,
}

#[derive(Debug, Args)]
pub struct HeatArgs {
    #[command(flatten)]
    pub source: GraphSource,
    #[arg(long, default_value_t = 0)]
    pub root: VertexId,
    #[arg(long)]
    pub target: Option<VertexId>,
    /// `start:stop:count`, inclusive of both ends.
    #[arg(long = "tau-grid")]
    pub tau_grid: String,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub t: f64,
    #[arg(long, value_enum, default_value = "both")]
    pub route: HeatRouteArg,
    /// Tail-bound target of the Bessel series.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, value_enum, default_value = "csv")]
    pub out: Format,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EulerArgs {
    #[command(flatten)]
    pub source: GraphSource,
    #[arg(long, default_value_t = 0)]
    pub root: VertexId,
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    pub order: usize,
    #[arg(long, value_enum, default_value = "json")]
    pub out: Format,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub source: GraphSource,
    /// Check a single root instead of every vertex.
    #[arg(long)]
    pub root: Option<VertexId>,
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    pub order: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GraphsArgs {
    #[command(flatten)]
    pub source: GraphSource,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Usage or domain failure; maps to exit code 2.
#[derive(Debug)]
struct UsageError(String);

impl<E: std::fmt::Display> From<E> for UsageError {
    fn from(e: E) -> Self {
        UsageError(e.to_string())
    }
}

enum Outcome {
    Ok(String),
    Violation(String),
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    configure_threads();
    let output = match &cli.command {
        Command::Zeta(a) => a.output.clone(),
        Command::Heat(a) => a.output.clone(),
        Command::Euler(a) => a.output.clone(),
        Command::Verify(a) => a.output.clone(),
        Command::Graphs(a) => a.output.clone(),
    };
    let result = match cli.command {
        Command::Zeta(a) => run_zeta(a),
        Command::Heat(a) => run_heat(a),
        Command::Euler(a) => run_euler(a),
        Command::Verify(a) => run_verify(a),
        Command::Graphs(a) => run_graphs(a),
    };
    let (text, code) = match result {
        Ok(Outcome::Ok(text)) => (text, 0),
        Ok(Outcome::Violation(text)) => (text, 1),
        Err(UsageError(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            return 2;
        }
    };
    match output {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, &text) {
                let _ = writeln!(err, "error: cannot write {}: {e}", path.display());
                return 2;
            }
        }
        None => {
            let _ = out.write_all(text.as_bytes());
        }
    }
    code
}

/// Caps the global rayon pool at `BZK_THREADS` when set.
fn configure_threads() {
    if let Some(n) = std::env::var("BZK_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            // a second call in the same process keeps the first pool
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

impl GraphSource {
    fn is_empty(&self) -> bool {
        self.graph.is_none() && self.family.is_none()
    }

    fn load(&self) -> Result<Graph, UsageError> {
        if let Some(path) = &self.graph {
            return Ok(graph::load_graph(path)?);
        }
        let family = self
            .family
            .ok_or_else(|| UsageError("one of --graph or --family is required".into()))?;
        let need = |v: Option<usize>, flag: &str| v.ok_or_else(|| UsageError(format!("--family {family:?} needs --{flag}")));
        let family = match family {
            FamilyName::Cycle => Family::Cycle(need(self.n, "n")?),
            FamilyName::Complete => Family::Complete(need(self.n, "n")?),
            FamilyName::Path => Family::Path(need(self.n, "n")?),
            FamilyName::Star => Family::Star(need(self.n, "n")?),
            FamilyName::Hypercube => Family::Hypercube(need(self.d, "d")?),
            FamilyName::Petersen => Family::Petersen,
            FamilyName::TreeBall => Family::TreeBall {
                q_plus_1: need(self.q_plus_1, "q-plus-1")?,
                radius: need(self.radius, "radius")?,
            },
        };
        Ok(graph::generate(family)?)
    }
}

fn check_vertex(g: &Graph, v: VertexId, flag: &str) -> Result<(), UsageError> {
    if v < g.vertex_count() {
        Ok(())
    } else {
        Err(UsageError(format!("--{flag} {v} is not a vertex of {} ({} vertices)", g.name(), g.vertex_count())))
    }
}

fn check_order(order: usize) -> Result<(), UsageError> {
    if order == 0 {
        return Err(UsageError("--order must be at least 1".into()));
    }
    Ok(())
}

fn to_json(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn series_rows(csv: &mut String, route: &str, s: &USeries) {
    for (m, c) in s.coeffs().iter().enumerate() {
        let _ = writeln!(csv, "{route},{m},\"{c}\"");
    }
}

fn run_zeta(a: ZetaArgs) -> Result<Outcome, UsageError> {
    let g = a.source.load()?;
    let target = a.target.unwrap_or(a.root);
    check_vertex(&g, a.root, "root")?;
    check_vertex(&g, target, "target")?;
    check_order(a.order)?;
    if a.t.is_empty() != a.u.is_empty() {
        return Err(UsageError("--t and --u must be given together".into()));
    }
    let wants = |r: ZetaRoute| a.route == r || a.route == ZetaRoute::All;
    if a.route == ZetaRoute::Euler && target != a.root {
        return Err(UsageError("the euler route is defined for target = root only".into()));
    }
    if a.route == ZetaRoute::Spectral && a.t.is_empty() {
        return Err(UsageError("the spectral route needs --t and --u".into()));
    }

    let mut series: Vec<(&str, USeries)> = Vec::new();
    if wants(ZetaRoute::Log) {
        series.push(("log", zeta::zeta_log_series(&g, a.root, target, a.order)?));
    }
    if wants(ZetaRoute::Rhs) {
        series.push(("rhs", zeta::zeta_rhs_series(&g, a.root, target, a.order)?));
    }
    if wants(ZetaRoute::Euler) && target == a.root {
        series.push(("euler", zeta::euler_product_series(&g, a.root, a.order).map_err(|e| match e {
            ZetaError::Oracle(p) => UsageError(format!("euler route: {p}")),
            other => UsageError(other.to_string()),
        })?));
    }
    let spectral = wants(ZetaRoute::Spectral) && !a.t.is_empty() && (a.route == ZetaRoute::Spectral || g.regular_q().is_some());

    let mut grid = Vec::new();
    for &t in &a.t {
        for &u in &a.u {
            let mut point = serde_json::Map::new();
            point.insert("u".into(), json!(u));
            point.insert("t".into(), json!(t));
            for (name, s) in &series {
                point.insert((*name).into(), json!(s.evaluate(t, u)));
            }
            if spectral {
                let z = zeta::zeta_spectral(&g, a.root, target, u, t)?;
                point.insert("spectral".into(), json!(z.value));
                point.insert("spectral_tail_bound".into(), json!(z.tail_bound));
            }
            grid.push(Value::Object(point));
        }
    }

    let coincide = series.windows(2).all(|w| compare_series(&w[0].1, &w[1].1).is_none());
    match a.out {
        Format::Json => {
            let mut routes = serde_json::Map::new();
            for (name, s) in &series {
                routes.insert((*name).into(), serde_json::to_value(s).expect("serializable"));
            }
            let mut doc = json!({
                "schema": SCHEMA_VERSION,
                "command": "zeta",
                "graph": g.name(),
                "root": a.root,
                "target": target,
                "order": a.order,
                "series": routes,
                "text": series
                    .iter()
                    .map(|(n, s)| (n.to_string(), json!(s.coeffs().iter().map(|c| c.to_string()).collect::<Vec<_>>())))
                    .collect::<serde_json::Map<String, Value>>(),
            });
            if series.len() > 1 {
                doc["coincide"] = json!(coincide);
            }
            if !grid.is_empty() {
                doc["values"] = Value::Array(grid);
            }
            Ok(Outcome::Ok(to_json(&doc)))
        }
        Format::Csv => {
            let mut csv = String::new();
            if grid.is_empty() {
                csv.push_str("route,m,coefficient\n");
                for (name, s) in &series {
                    series_rows(&mut csv, name, s);
                }
            } else {
                csv.push_str("route,u,t,value\n");
                for point in &grid {
                    for (key, v) in point.as_object().expect("object") {
                        if key == "u" || key == "t" || key == "spectral_tail_bound" {
                            continue;
                        }
                        let _ = writeln!(csv, "{key},{},{},{}", point["u"], point["t"], v);
                    }
                }
            }
            Ok(Outcome::Ok(csv))
        }
    }
}

fn parse_tau_grid(spec: &str) -> Result<Vec<f64>, UsageError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || UsageError(format!("--tau-grid expects start:stop:count, got {spec:?}"));
    let [a, b, n] = parts.as_slice() else {
        return Err(bad());
    };
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n == 0 || !a.is_finite() || !b.is_finite() || a < 0.0 || b < a {
        return Err(bad());
    }
    Ok(if n == 1 {
        vec![a]
    } else {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    })
}

#[derive(Serialize)]
struct HeatRow {
    tau: f64,
    value_bessel: Option<f64>,
    value_spectral: Option<f64>,
    abs_diff: Option<f64>,
    tail_bound: Option<f64>,
}

fn run_heat(a: HeatArgs) -> Result<Outcome, UsageError> {
    let g = a.source.load()?;
    let target = a.target.unwrap_or(a.root);
    check_vertex(&g, a.root, "root")?;
    check_vertex(&g, target, "target")?;
    let taus = parse_tau_grid(&a.tau_grid)?;
    let bessel = matches!(a.route, HeatRouteArg::Bessel | HeatRouteArg::Both);
    let spectral = matches!(a.route, HeatRouteArg::Spectral | HeatRouteArg::Both);
    let rows: Vec<Result<HeatRow, HeatError>> = taus
        .par_iter()
        .map(|&tau| {
            let b = if bessel {
                Some(heat::heat_kernel_bessel(&g, a.root, target, tau, a.t, a.tol)?)
            } else {
                None
            };
            let s = if spectral {
                Some(heat::heat_kernel_spectral(&g, a.root, target, tau)?)
            } else {
                None
            };
            Ok(HeatRow {
                tau,
                value_bessel: b.as_ref().map(|v| v.value),
                value_spectral: s.as_ref().map(|v| v.value),
                abs_diff: b.as_ref().zip(s.as_ref()).map(|(b, s)| (b.value - s.value).abs()),
                tail_bound: b.as_ref().map(|v| v.tail_bound),
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    match a.out {
        Format::Csv => {
            let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
            let mut csv = String::from("tau,value_bessel,value_spectral,abs_diff,tail_bound\n");
            for r in &rows {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    r.tau,
                    opt(r.value_bessel),
                    opt(r.value_spectral),
                    opt(r.abs_diff),
                    opt(r.tail_bound)
                );
            }
            Ok(Outcome::Ok(csv))
        }
        Format::Json => Ok(Outcome::Ok(to_json(&json!({
            "schema": SCHEMA_VERSION,
            "command": "heat",
            "graph": g.name(),
            "root": a.root,
            "target": target,
            "t": a.t,
            "rows": rows,
        })))),
    }
}

fn run_euler(a: EulerArgs) -> Result<Outcome, UsageError> {
    let g = a.source.load()?;
    check_vertex(&g, a.root, "root")?;
    check_order(a.order)?;
    let s = zeta::euler_product_series(&g, a.root, a.order)?;
    match a.out {
        Format::Json => Ok(Outcome::Ok(to_json(&json!({
            "schema": SCHEMA_VERSION,
            "command": "euler",
            "graph": g.name(),
            "root": a.root,
            "order": a.order,
            "series": s,
            "text": s.coeffs().iter().map(|c| c.to_string()).collect::<Vec<_>>(),
        })))),
        Format::Csv => {
            let mut csv = String::from("route,m,coefficient\n");
            series_rows(&mut csv, "euler", &s);
            Ok(Outcome::Ok(csv))
        }
    }
}

/// Every exact check for one root: tail identities, the R generating function,
/// and route equivalence of the product formula and the Euler product.
pub fn verify_root(g: &Graph, x0: VertexId, order: usize) -> Result<Vec<IdentityReport>, VerifyError> {
    let mut reports = operator::check_fnc(g, x0, order)?;
    reports.extend(operator::check_cbc(g, x0, order)?);
    reports.push(operator::check_r_generating(g, x0, order)?);
    let log = zeta::zeta_log_series(g, x0, x0, order)?;
    let rhs = zeta::zeta_rhs_series(g, x0, x0, order)?;
    reports.push(IdentityReport::new("route/rhs=log", g.name(), Some(x0), order, compare_series(&rhs, &log)));
    let other = g.neighbors(x0).next().unwrap_or(x0);
    let log_off = zeta::zeta_log_series(g, x0, other, order)?;
    let rhs_off = zeta::zeta_rhs_series(g, x0, other, order)?;
    reports.push(IdentityReport::new(
        format!("route/rhs=log@{other}"),
        g.name(),
        Some(x0),
        order,
        compare_series(&rhs_off, &log_off),
    ));
    let euler = zeta::euler_product_series(g, x0, order)?;
    reports.push(IdentityReport::new("route/euler=log", g.name(), Some(x0), order, compare_series(&euler, &log)));
    Ok(reports)
}

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Zeta(#[from] ZetaError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

fn run_verify(a: VerifyArgs) -> Result<Outcome, UsageError> {
    let g = a.source.load()?;
    if a.order < 4 {
        return Err(UsageError("--order must be at least 4 for verify".into()));
    }
    let roots: Vec<VertexId> = match a.root {
        Some(r) => {
            check_vertex(&g, r, "root")?;
            vec![r]
        }
        None => (0..g.vertex_count()).collect(),
    };
    let mut reports = operator::check_fc(&g, a.order)?;
    let per_root: Vec<Result<Vec<IdentityReport>, VerifyError>> =
        roots.par_iter().map(|&x0| verify_root(&g, x0, a.order)).collect();
    for r in per_root {
        reports.extend(r?);
    }
    let pass = reports.iter().all(|r| r.pass);
    let text = to_json(&json!({
        "schema": SCHEMA_VERSION,
        "command": "verify",
        "graph": g.name(),
        "order": a.order,
        "pass": pass,
        "reports": reports,
    }));
    Ok(if pass { Outcome::Ok(text) } else { Outcome::Violation(text) })
}

fn describe(g: &Graph) -> Value {
    json!({
        "name": g.name(),
        "vertices": g.vertex_count(),
        "edges": g.undirected_edges().len(),
        "degrees": g.degrees(),
        "max_degree": g.max_degree(),
        "regular_q": g.regular_q(),
        "girth": g.girth(),
        "alpha_t0": operator::alpha(g, 0.0),
    })
}

fn run_graphs(a: GraphsArgs) -> Result<Outcome, UsageError> {
    let graphs = if a.source.is_empty() {
        graph::corpus().iter().map(describe).collect()
    } else {
        vec![describe(&a.source.load()?)]
    };
    Ok(Outcome::Ok(to_json(&json!({
        "schema": SCHEMA_VERSION,
        "command": "graphs",
        "graphs": graphs,
    }))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_with(std::iter::once("bzk").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn tau_grid_parsing() {
        assert_eq!(parse_tau_grid("0:5:11").unwrap().len(), 11);
        assert_eq!(parse_tau_grid("0:5:11").unwrap()[10], 5.0);
        assert_eq!(parse_tau_grid("1:1:1").unwrap(), vec![1.0]);
        assert!(parse_tau_grid("0:5").is_err());
        assert!(parse_tau_grid("5:0:3").is_err());
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(call(&["zeta"]).0, 2);
        assert_eq!(call(&["zeta", "--family", "cycle"]).0, 2);
        assert_eq!(call(&["zeta", "--family", "cycle", "--n", "4", "--root", "9"]).0, 2);
        assert_eq!(call(&["nonsense"]).0, 2);
        let (code, _, err) = call(&["zeta", "--family", "complete", "--n", "4", "--route", "spectral", "--t", "0", "--u", "0.9"]);
        assert_eq!(code, 2);
        assert!(err.contains("admissible"));
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = call(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("verify"));
    }

    #[test]
    fn graphs_lists_the_corpus() {
        let (code, out, _) = call(&["graphs"]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["schema"], 1);
        assert_eq!(v["graphs"].as_array().unwrap().len(), 9);
    }
}
