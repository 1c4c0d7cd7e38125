use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use reslab::btm::{
    annealed_experiment, build_chain, quenched_experiment, BtmSettings, Convention, TrapEnvironment,
};
use reslab::exponents as ex;
use reslab::metric::{bl_solve, MeasuredSpace};
use reslab::network::{random_network, resolvent_series, spectral, KilledSystem, NetworkMeasure, ResistanceNetwork};
use reslab::realtree::{build_coded_tree, correspondence_embedding, ghp_bound, random_excursion, CodedExcursion};
use reslab::rng::mix_seed;
use reslab::sierpinski::{sg_heat_kernel_error, sg_semigroup_error, ErrorTable};

#[derive(Parser, Debug)]
#[command(name = "reslab", version, about = "Resistance-form convergence-rate experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(untagged)]
enum Command {
    /// Print every exponent formula for the given parameters as JSON.
    Exponents(ExponentsArgs),
    /// BL^κ distance between the measure of a space file and a second measure.
    BlDist(BlDistArgs),
    /// Pairwise effective resistances of a network file.
    Resistance(NetworkArgs),
    /// Killed Green function formula against the submatrix inverse.
    GreenCheck(CheckArgs),
    /// Resolvent series against a direct solve.
    ResolventCheck(CheckArgs),
    /// Semigroup errors between consecutive gasket levels.
    SgRate(SgArgs),
    /// Heat-kernel errors between consecutive gasket levels.
    SgHkRate(SgArgs),
    /// Quenched trap-model errors, one row per (n, seed).
    BtmQuenched(BtmArgs),
    /// Trial-averaged trap-model errors.
    BtmAnnealed(BtmArgs),
    /// GHP bound and achieved embedded distance for two excursions.
    TreeBound(TreeArgs),
    /// Quick invariant checks on seeded random instances.
    Invariants(InvariantArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Exponents(_) => "exponents",
            Command::BlDist(_) => "bl-dist",
            Command::Resistance(_) => "resistance",
            Command::GreenCheck(_) => "green-check",
            Command::ResolventCheck(_) => "resolvent-check",
            Command::SgRate(_) => "sg-rate",
            Command::SgHkRate(_) => "sg-hk-rate",
            Command::BtmQuenched(_) => "btm-quenched",
            Command::BtmAnnealed(_) => "btm-annealed",
            Command::TreeBound(_) => "tree-bound",
            Command::Invariants(_) => "invariants",
        }
    }

    fn output(&self) -> &OutputArgs {
        match self {
            Command::Exponents(a) => &a.output,
            Command::BlDist(a) => &a.output,
            Command::Resistance(a) => &a.output,
            Command::GreenCheck(a) | Command::ResolventCheck(a) => &a.output,
            Command::SgRate(a) | Command::SgHkRate(a) => &a.output,
            Command::BtmQuenched(a) | Command::BtmAnnealed(a) => &a.output,
            Command::TreeBound(a) => &a.output,
            Command::Invariants(a) => &a.output,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Serialize)]
struct OutputArgs {
    /// Output format.
    #[arg(long = "out", value_enum, default_value = "csv")]
    format: Format,
    /// Write to this file instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct ExponentsArgs {
    #[arg(long, default_value_t = 1.0)]
    s0: f64,
    #[arg(long, default_value_t = 1.0)]
    s1: f64,
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    /// Trap tail exponent for the trap-model rates.
    #[arg(long, default_value_t = 3.0)]
    alpha: f64,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
struct BlDistArgs {
    /// Space file `{"points", "dist", "mass"}`; its mass is the first measure.
    #[arg(long)]
    space: PathBuf,
    /// Second measure, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    nu: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
struct NetworkArgs {
    /// Network file `{"n", "edges", "mass"}`.
    #[arg(long)]
    network: PathBuf,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
struct CheckArgs {
    /// Check this network instead of random ones.
    #[arg(long)]
    network: Option<PathBuf>,
    /// Number of random networks.
    #[arg(long, default_value_t = 50)]
    graphs: usize,
    #[arg(long, default_value_t = 12)]
    max_vertices: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum TestFunction {
    /// f(x, y) = x
    X,
    /// f(x, y) = x²
    X2,
}

#[derive(Args, Debug, Serialize)]
struct SgArgs {
    /// Level range `a..b`; errors compare level n with n + 1 for a ≤ n < b.
    #[arg(long, default_value = "2..6", value_parser = parse_range)]
    levels: (usize, usize),
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    /// Test function for the semigroup error.
    #[arg(long = "function", value_enum, default_value = "x2")]
    function: TestFunction,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
struct BtmArgs {
    #[arg(long, default_value_t = 3.0)]
    alpha: f64,
    /// Scales, comma separated.
    #[arg(long = "n", value_delimiter = ',', default_value = "100,200,400,800")]
    ns: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Independent environments (per-seed rows for `btm-quenched`, averaged
    /// for `btm-annealed`).
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value = "paper_generator")]
    convention: Convention,
    /// Radius of the window for the BL, semigroup and heat-kernel errors.
    #[arg(long, default_value_t = 1.0)]
    reach: f64,
    /// Skip the BL distance.
    #[arg(long)]
    no_bl: bool,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
struct TreeArgs {
    /// Excursion `f` as `t,f(t)` lines.
    #[arg(long)]
    f: PathBuf,
    #[arg(long)]
    g: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    #[arg(long, default_value_t = 1e-9)]
    epsilon: f64,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
struct InvariantArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Random instances per check.
    #[arg(long, default_value_t = 20)]
    count: usize,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected a..b, got `{s}`"))?;
    let a: usize = a.trim().parse().map_err(|e| format!("bad start `{a}`: {e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("bad end `{b}`: {e}"))?;
    if a >= b {
        return Err(format!("empty range {a}..{b}"));
    }
    Ok((a, b))
}

enum Failure {
    Invalid(String),
    Check(String),
}

impl From<reslab::Error> for Failure {
    fn from(e: reslab::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

type Run<T> = Result<T, Failure>;

/// The resolved run configuration, echoed at the top of every output.
#[derive(Serialize)]
struct ExperimentConfig<'a> {
    subcommand: &'a str,
    params: Value,
    format: Format,
    version: &'static str,
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

struct Report {
    csv: String,
    json: Value,
}

fn read(path: &Path) -> Run<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("cannot read {}: {e}", path.display())))
}

fn exponents(a: &ExponentsArgs) -> Run<Report> {
    let e = ex::sg_exponent_a2(a.s0, a.theta, a.kappa)?;
    let wrap = |r: reslab::Result<Value>| r.unwrap_or_else(|err| json!({ "error": err.to_string() }));
    let table: BTreeMap<&str, Value> = BTreeMap::from([
        ("E", json!(e)),
        ("sg_a2", json!(e)),
        ("sg_a3", wrap(ex::sg_exponents_a3(a.s0, a.s1, a.kappa).map(|(e1, e2)| json!({"E1": e1, "E2": e2})))),
        ("hk_a1", wrap(ex::hk_exponent_a1(a.s0, a.s1, a.kappa).map(|v| json!(v)))),
        ("hk_a2", wrap(ex::hk_exponent_a2(a.s0, a.s1, a.theta, a.kappa).map(|v| json!(v)))),
        ("hk_a3", wrap(ex::hk_exponents_a3(a.s0, a.s1, a.kappa).map(|(e1, e2)| json!({"E1": e1, "E2": e2})))),
        ("theta_cap", wrap(ex::theta_cap(a.s0, a.s1).map(|v| json!(v)))),
        ("beta", wrap(ex::beta(a.s0, a.s1).map(|v| json!(v)))),
        ("noncompact_E", wrap(ex::noncompact_exponent(a.s0, a.theta, a.kappa).map(|v| json!(v)))),
        ("sierpinski", wrap(ex::sierpinski_exponents(a.kappa).map(|s| json!(s)))),
        (
            "btm_quenched",
            wrap(ex::btm_quenched_exponents(a.alpha, a.kappa).map(|(d, s)| json!({"dist_sup": d, "sg_sup": s}))),
        ),
        ("btm_annealed_threshold", wrap(ex::btm_annealed_threshold(a.kappa).map(|v| json!(v)))),
        (
            "btm_annealed",
            wrap(ex::btm_annealed_exponents(a.alpha, a.kappa).map(|(s, h)| json!({"sg_sup": s, "hk_sup": h}))),
        ),
    ]);
    let json = json!(table);
    let mut csv = String::from("name,value\n");
    flatten("", &json, &mut csv);
    Ok(Report { csv, json })
}

fn flatten(prefix: &str, v: &Value, out: &mut String) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        Value::Number(n) => {
            let _ = writeln!(out, "{prefix},{}", num(n.as_f64().unwrap_or(f64::NAN)));
        }
        other => {
            let _ = writeln!(out, "{prefix},\"{}\"", other.to_string().replace('"', "'"));
        }
    }
}

fn bl_dist(a: &BlDistArgs) -> Run<Report> {
    let space = MeasuredSpace::from_json(&read(&a.space)?)?;
    let sol = bl_solve(&space.space, &space.mass, &a.nu, a.kappa)?;
    let mut csv = String::from("point,f\n");
    for (i, v) in sol.f.iter().enumerate() {
        let _ = writeln!(csv, "{},{}", space.space.labels()[i], num(*v));
    }
    let _ = writeln!(csv, "# value={} sup_bound={} holder_bound={}", num(sol.value), num(sol.sup_bound), num(sol.holder_bound));
    let json = json!({"value": sol.value, "f": sol.f, "sup_bound": sol.sup_bound, "holder_bound": sol.holder_bound});
    Ok(Report { csv, json })
}

fn load_network(path: &Path) -> Run<(ResistanceNetwork, NetworkMeasure)> {
    Ok(ResistanceNetwork::from_json(&read(path)?)?)
}

fn resistance(a: &NetworkArgs) -> Run<Report> {
    let (net, _) = load_network(&a.network)?;
    let n = net.n_vertices();
    let r = net.resistance_matrix();
    let mut csv = String::from("x,y,r\n");
    for x in 0..n {
        for y in 0..n {
            let _ = writeln!(csv, "{x},{y},{}", num(r[x * n + y]));
        }
    }
    let rows: Vec<&[f64]> = r.chunks(n).collect();
    Ok(Report { csv, json: json!({ "n": n, "resistance": rows }) })
}

fn networks(a: &CheckArgs) -> Run<Vec<(ResistanceNetwork, NetworkMeasure)>> {
    if let Some(path) = &a.network {
        return Ok(vec![load_network(path)?]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    (0..a.graphs).map(|_| Ok(random_network(&mut rng, a.max_vertices)?)).collect()
}

/// Nonempty proper subsets: every singleton, then every complement of one.
fn killing_sets(n: usize) -> Vec<Vec<usize>> {
    let mut sets: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();
    if n > 2 {
        sets.extend((0..n).map(|v| (0..n).filter(|&u| u != v).collect()));
    }
    sets
}

fn check_report(label: &str, errors: Vec<f64>, tol: f64) -> Run<Report> {
    let mut csv = String::from("graph,max_error\n");
    for (k, e) in errors.iter().enumerate() {
        let _ = writeln!(csv, "{k},{}", num(*e));
    }
    let worst = errors.iter().fold(0.0_f64, |m, &e| m.max(e));
    let ok = worst <= tol;
    let _ = writeln!(csv, "# {label}: max_error={} tol={} ok={ok}", num(worst), num(tol));
    let report = Report { csv, json: json!({"errors": errors, "max_error": worst, "tol": tol, "ok": ok}) };
    if ok {
        Ok(report)
    } else {
        emit_failure(&report);
        Err(Failure::Check(format!("{label}: max error {worst:e} exceeds {tol:e}")))
    }
}

fn green_check(a: &CheckArgs) -> Run<Report> {
    let mut errors = Vec::new();
    for (net, mu) in networks(a)? {
        let n = net.n_vertices();
        let mut worst = 0.0_f64;
        for set in killing_sets(n) {
            let sys = KilledSystem::new(&net, &mu, &set)?;
            let inverse = sys.potential_density_matrix(0.0)?;
            for y in 0..n {
                for z in 0..n {
                    worst = worst.max((sys.green_function(y, z)? - inverse[(y, z)]).abs());
                }
            }
        }
        errors.push(worst);
    }
    check_report("green", errors, a.tol)
}

fn resolvent_check(a: &CheckArgs) -> Run<Report> {
    let mut errors = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(a.seed, 1));
    for (net, mu) in networks(a)? {
        let n = net.n_vertices();
        let alpha = 0.5 / (net.resistance_diameter() * mu.total());
        let f: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        let mut worst = 0.0_f64;
        for x in 0..n {
            let series = resolvent_series(&net, &mu, x, alpha, &f, 1e-14)?;
            let direct = KilledSystem::new(&net, &mu, &[x])?.resolvent_direct(alpha, &f)?;
            for (s, d) in series.iter().zip(&direct) {
                worst = worst.max((s - d).abs());
            }
        }
        errors.push(worst);
    }
    check_report("resolvent", errors, a.tol)
}

fn sg_table(table: &ErrorTable) -> Report {
    let mut csv = String::from("n,err,bound,ratio\n");
    for r in &table.rows {
        let _ = writeln!(csv, "{},{},{},{}", r.n, num(r.err), num(r.bound), num(r.ratio));
    }
    let _ = writeln!(csv, "# E1={} E2={} fitted_exponent={}", num(table.e1), num(table.e2), num(table.fitted_exponent));
    Report { csv, json: json!(table) }
}

fn sg_rate(a: &SgArgs) -> Run<Report> {
    let f: &(dyn Fn(f64, f64) -> f64 + Sync) = match a.function {
        TestFunction::X => &|x, _| x,
        TestFunction::X2 => &|x, _| x * x,
    };
    Ok(sg_table(&sg_semigroup_error(a.levels.0, a.levels.1, a.t, a.kappa, f)?))
}

fn sg_hk_rate(a: &SgArgs) -> Run<Report> {
    Ok(sg_table(&sg_heat_kernel_error(a.levels.0, a.levels.1, a.t, a.kappa)?))
}

fn btm_settings(a: &BtmArgs) -> BtmSettings {
    let mut s = BtmSettings::new(a.alpha, a.t, a.ns.clone());
    s.kappa = a.kappa;
    s.convention = a.convention;
    s.reach = a.reach;
    s.with_bl = !a.no_bl;
    s
}

fn btm_quenched(a: &BtmArgs) -> Run<Report> {
    let settings = btm_settings(a);
    let seeds: Vec<u64> = if a.trials <= 1 { vec![a.seed] } else { (0..a.trials as u64).map(|i| mix_seed(a.seed, i)).collect() };
    let table = quenched_experiment(&settings, &seeds)?;
    let mut csv = String::from("n,seed,cdf_err,bl_err,hk_err\n");
    for r in &table.rows {
        let _ = writeln!(csv, "{},{},{},{},{}", r.n, r.seed, num(r.cdf_err), num(r.bl_err), num(r.hk_err));
    }
    for (seed, fit) in &table.cdf_fits {
        let _ = writeln!(csv, "# seed={seed} cdf_exponent={} band=[{}, {}]", num(fit.exponent), num(fit.lower), num(fit.upper));
    }
    Ok(Report { csv, json: json!(table) })
}

fn btm_annealed(a: &BtmArgs) -> Run<Report> {
    let settings = btm_settings(a);
    let table = annealed_experiment(&settings, a.trials.max(1), a.seed)?;
    let mut csv = String::from("n,seed,cdf_err,bl_err,hk_err\n");
    for r in &table.rows {
        let _ = writeln!(csv, "{},{},{},{},{}", r.n, a.seed, num(r.cdf_err), num(r.bl_err), num(r.hk_err));
    }
    let _ = writeln!(csv, "# trials={} sg_exponent={} hk_exponent={}", table.trials, num(table.sg_fit.exponent), num(table.hk_fit.exponent));
    Ok(Report { csv, json: json!(table) })
}

fn tree_bound(a: &TreeArgs) -> Run<Report> {
    let f = CodedExcursion::from_csv(&read(&a.f)?)?;
    let g = CodedExcursion::from_csv(&read(&a.g)?)?;
    let bound = ghp_bound(&f, &g, a.kappa)?;
    let emb = correspondence_embedding(&f, &g, a.epsilon, a.kappa)?;
    let csv = format!(
        "bound,achieved,distortion,sup_distance\n{},{},{},{}\n",
        num(bound),
        num(emb.achieved),
        num(emb.distortion),
        num(emb.sup_distance)
    );
    let json = json!({"bound": bound, "achieved": emb.achieved, "distortion": emb.distortion, "sup_distance": emb.sup_distance});
    Ok(Report { csv, json })
}

fn invariants(a: &InvariantArgs) -> Run<Report> {
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut rows: Vec<(&str, f64, f64)> = Vec::new();
    let (mut triangle, mut stoch, mut balance, mut four) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..a.count {
        let (net, mu) = random_network(&mut rng, 12)?;
        let n = net.n_vertices();
        let r = net.resistance_matrix();
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    triangle = triangle.max(r[x * n + z] - r[x * n + y] - r[y * n + z]);
                }
            }
        }
        let sp = spectral(&net, &mu)?;
        for x in 0..n {
            let row = sp.heat_kernel_row(0.5, x)?;
            let total: f64 = row.iter().zip(&mu.mass).map(|(p, m)| p * m).sum();
            stoch = stoch.max((total - 1.0).abs());
        }
        let f = random_excursion(rand::Rng::random_range(&mut rng, 2..=15), &mut rng);
        four = four.max(build_coded_tree(&f)?.four_point_defect());
    }
    for k in 0..a.count.min(5) {
        let env = TrapEnvironment::sample(3.0, 200, mix_seed(a.seed, k as u64))?;
        let chain = build_chain(&env, 50, 3.0, Convention::PaperGenerator)?;
        for x in 0..chain.len() - 1 {
            let lhs = chain.mass[x] * chain.rate(x, x + 1);
            let rhs = chain.mass[x + 1] * chain.rate(x + 1, x);
            balance = balance.max((lhs - rhs).abs() / lhs);
        }
    }
    rows.push(("resistance_triangle", triangle.max(0.0), 1e-9));
    rows.push(("heat_kernel_stochasticity", stoch, 1e-9));
    rows.push(("btm_detailed_balance", balance, 1e-12));
    rows.push(("tree_four_point", four, 1e-10));
    let mut csv = String::from("check,max_error,tol,ok\n");
    let mut bad = Vec::new();
    for &(name, e, tol) in &rows {
        let ok = e <= tol;
        if !ok {
            bad.push(name);
        }
        let _ = writeln!(csv, "{name},{},{},{ok}", num(e), num(tol));
    }
    let json = json!(rows.iter().map(|&(name, e, tol)| json!({"check": name, "max_error": e, "tol": tol, "ok": e <= tol})).collect::<Vec<_>>());
    let report = Report { csv, json };
    if bad.is_empty() {
        Ok(report)
    } else {
        emit_failure(&report);
        Err(Failure::Check(format!("invariants failed: {}", bad.join(", "))))
    }
}

fn emit_failure(report: &Report) {
    eprint!("{}", report.csv);
}

fn render(cmd: &Command, report: &Report) -> String {
    let config = ExperimentConfig {
        subcommand: cmd.name(),
        params: serde_json::to_value(cmd).unwrap_or(Value::Null),
        format: cmd.output().format,
        version: env!("CARGO_PKG_VERSION"),
    };
    match cmd.output().format {
        Format::Csv => format!("# {}\n{}", serde_json::to_string(&config).expect("config serializes"), report.csv),
        Format::Json => {
            let doc = json!({"config": config, "result": report.json});
            format!("{}\n", serde_json::to_string_pretty(&doc).expect("report serializes"))
        }
    }
}

fn dispatch(cmd: &Command) -> Run<Report> {
    match cmd {
        Command::Exponents(a) => exponents(a),
        Command::BlDist(a) => bl_dist(a),
        Command::Resistance(a) => resistance(a),
        Command::GreenCheck(a) => green_check(a),
        Command::ResolventCheck(a) => resolvent_check(a),
        Command::SgRate(a) => sg_rate(a),
        Command::SgHkRate(a) => sg_hk_rate(a),
        Command::BtmQuenched(a) => btm_quenched(a),
        Command::BtmAnnealed(a) => btm_annealed(a),
        Command::TreeBound(a) => tree_bound(a),
        Command::Invariants(a) => invariants(a),
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("RESLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v.parse().map_err(|_| format!("RESLAB_THREADS must be a positive integer, got `{v}`"))?;
    if n == 0 {
        return Err("RESLAB_THREADS must be a positive integer, got `0`".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    let cmd = &cli.command;
    match dispatch(cmd) {
        Ok(report) => {
            let text = render(cmd, &report);
            match &cmd.output().output {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, text) {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return ExitCode::from(1);
                    }
                }
                None => print!("{text}"),
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(2)
        }
    }
}
