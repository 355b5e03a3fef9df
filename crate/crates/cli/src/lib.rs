//! The `normderiv` command-line tool.
//!
//! Every run prints one document on stdout: `{"command", "replay", "result"}`.
//! Exit status is 0 on success, 2 for usage errors (bad flags, malformed
//! norm, vector, matrix or relation text, invalid parameters) and 1 for
//! domain errors such as a dimension mismatch or an s.i.p. request at a
//! non-smooth point.

pub mod render;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use normderiv::explorer::{mine_incomparability, parse_matrix, preserver_check, LinearMap};
use normderiv::geometry::{
    angle_ab, angle_homogeneity_check, angular_constant, norm_equiv_constant,
    quartic_identity_residual, smoothness_probe, strict_convexity_probe, symmetry_residual,
    symmetry_search,
};
use normderiv::normcore::audit_norm;
use normderiv::orthogonality::{
    ab_orthogonalizer, birkhoff_oracle, birkhoff_t_interval, ortho_locus,
};
use normderiv::{
    is_orthogonal, parse_norm, parse_vector, rho_pair, AlphaBeta, Error, Lambda, NormAst, Relation,
    SampleConfig, Vector,
};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(
    name = "normderiv",
    version,
    about = "Norm derivatives and orthogonality in finite-dimensional normed spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One-sided norm derivatives rho_-, rho_+ and their combinations at (u, v)
    Rho(PairCmd),
    /// Decide whether u is orthogonal to v under a relation
    Ortho(OrthoCmd),
    /// Solve rho_ab(u, s u + v) = 0 for s
    Solve(PairCmd),
    /// The interval of t with u Birkhoff-orthogonal to t u + v
    Interval(PairCmd),
    /// Trace the orthogonality locus of u on a planar unit circle
    Locus(LocusCmd),
    /// The rho_ab-angle between u and v
    Angle(AngleCmd),
    /// Probe smoothness, strict convexity or rho_ab symmetry
    Probe(ProbeCmd),
    /// Residuals of the quartic and symmetry identities at (u, v)
    Identity(PairCmd),
    /// Sampled angular and norm-equivalence constants between two norms
    Constant(ConstantCmd),
    /// Check the three orthogonality-preserver conditions for a matrix
    Preserver(PreserverCmd),
    /// Search for pairs separating two orthogonality relations
    Mine(MineCmd),
    /// Sample the norm axioms
    Audit(AuditCmd),
}

#[derive(Args, Debug)]
struct NormOpts {
    /// Norm expression, e.g. "max(l1, scale(2, l2))"
    #[arg(long)]
    norm: String,
    /// Ambient dimension; defaults to the length of --u, else 2
    #[arg(long)]
    dim: Option<usize>,
}

#[derive(Args, Debug)]
struct ParamOpts {
    /// Weight of rho_- in rho_ab
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Weight of rho_+ in rho_ab
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// Weight of rho_- in rho_lambda
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
}

#[derive(Args, Debug)]
struct SampleOpts {
    /// Seed of the ChaCha8 sample stream
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random sample budget
    #[arg(long, default_value_t = 1000)]
    samples: usize,
}

#[derive(Args, Debug)]
struct OutputOpts {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads for parallel sampling (output never depends on it)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Format {
    Json,
    Table,
    Csv,
}

#[derive(Args, Debug)]
struct PairCmd {
    #[command(flatten)]
    norm: NormOpts,
    /// Vector u as comma-separated coordinates
    #[arg(long, allow_hyphen_values = true)]
    u: String,
    /// Vector v as comma-separated coordinates
    #[arg(long, allow_hyphen_values = true)]
    v: String,
    #[command(flatten)]
    params: ParamOpts,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args, Debug)]
struct OrthoCmd {
    #[command(flatten)]
    norm: NormOpts,
    #[arg(long, allow_hyphen_values = true)]
    u: String,
    #[arg(long, allow_hyphen_values = true)]
    v: String,
    /// birkhoff, rho_plus, rho_minus, rho, rho_lambda[(l)], rho_ab[(a, b)], isosceles, pythagorean, semi
    #[arg(long)]
    relation: String,
    #[command(flatten)]
    params: ParamOpts,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args, Debug)]
struct LocusCmd {
    #[command(flatten)]
    norm: NormOpts,
    #[arg(long, allow_hyphen_values = true)]
    u: String,
    #[arg(long)]
    relation: String,
    #[command(flatten)]
    params: ParamOpts,
    #[arg(long, default_value_t = 720)]
    resolution: usize,
    /// Write every locus row as a JSON line to this file
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args, Debug)]
struct AngleCmd {
    #[command(flatten)]
    norm: NormOpts,
    #[arg(long, allow_hyphen_values = true)]
    u: String,
    #[arg(long, allow_hyphen_values = true)]
    v: String,
    #[command(flatten)]
    params: ParamOpts,
    /// Also report the homogeneity residual for the scaling (a u, b v)
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    scale: Option<Vec<f64>>,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum ProbeKind {
    Smooth,
    Convex,
    Symmetry,
}

#[derive(Args, Debug)]
struct ProbeCmd {
    #[command(flatten)]
    norm: NormOpts,
    /// Probes to run; all when omitted (symmetry needs --alpha and --beta)
    #[arg(long, value_enum)]
    kind: Vec<ProbeKind>,
    #[command(flatten)]
    params: ParamOpts,
    #[command(flatten)]
    sampling: SampleOpts,
    /// Write each probe report as a JSON line to this file
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum ConstantKind {
    Angular,
    Equivalence,
}

#[derive(Args, Debug)]
struct ConstantCmd {
    #[command(flatten)]
    norm: NormOpts,
    #[arg(long)]
    norm2: String,
    /// Constants to estimate; both when omitted
    #[arg(long, value_enum)]
    kind: Vec<ConstantKind>,
    #[command(flatten)]
    params: ParamOpts,
    #[command(flatten)]
    sampling: SampleOpts,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args, Debug)]
struct PreserverCmd {
    /// Domain norm
    #[command(flatten)]
    norm: NormOpts,
    /// Codomain norm; defaults to --norm
    #[arg(long)]
    norm2: Option<String>,
    /// Matrix rows separated by ';', entries by ','
    #[arg(long, allow_hyphen_values = true)]
    matrix: String,
    #[command(flatten)]
    params: ParamOpts,
    #[command(flatten)]
    sampling: SampleOpts,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args, Debug)]
struct MineCmd {
    #[command(flatten)]
    norm: NormOpts,
    #[arg(long)]
    relation: String,
    #[arg(long)]
    relation2: String,
    #[command(flatten)]
    params: ParamOpts,
    #[command(flatten)]
    sampling: SampleOpts,
    #[arg(long, default_value_t = 720)]
    resolution: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args, Debug)]
struct AuditCmd {
    #[command(flatten)]
    norm: NormOpts,
    #[command(flatten)]
    sampling: SampleOpts,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[command(flatten)]
    output: OutputOpts,
}

/// A failed run: the message and its exit status.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse(_) | Error::InvalidParameter(_) => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn positioned(what: &str, text: &str, e: normderiv::ParseError) -> Failure {
    usage(format!("invalid {what} '{text}': {e}"))
}

fn vector(flag: &str, text: &str) -> Outcome<Vector> {
    parse_vector(text).map_err(|e| positioned(&format!("--{flag}"), text, e))
}

fn norm_with_dim(text: &str, dim: usize) -> Outcome<NormAst> {
    parse_norm(text, dim).map_err(|e| positioned("--norm", text, e))
}

fn norm(opts: &NormOpts, u: Option<&Vector>) -> Outcome<NormAst> {
    let dim = opts.dim.or(u.map(Vector::len)).unwrap_or(2);
    norm_with_dim(&opts.norm, dim)
}

impl ParamOpts {
    fn ab(&self) -> Outcome<Option<AlphaBeta>> {
        match (self.alpha, self.beta) {
            (None, None) => Ok(None),
            (Some(a), Some(b)) => Ok(Some(AlphaBeta::new(a, b)?)),
            _ => Err(usage("--alpha and --beta must be given together")),
        }
    }

    fn require_ab(&self) -> Outcome<AlphaBeta> {
        self.ab()?
            .ok_or_else(|| usage("this command needs --alpha and --beta"))
    }

    fn lambda(&self) -> Outcome<Option<Lambda>> {
        Ok(self.lambda.map(Lambda::new).transpose()?)
    }

    fn relation(&self, text: &str) -> Outcome<Relation> {
        Relation::parse(text, self.ab()?, self.lambda()?)
            .map_err(|e| positioned("relation", text, e))
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

fn write_jsonl<T: Serialize>(path: &PathBuf, rows: &[T]) -> Outcome<()> {
    let fail = |e: io::Error| Failure {
        code: 1,
        message: format!("cannot write {}: {e}", path.display()),
    };
    let mut w = BufWriter::new(File::create(path).map_err(fail)?);
    for row in rows {
        writeln!(w, "{}", render::json(&to_value(row))).map_err(fail)?;
    }
    w.flush().map_err(fail)
}

fn sampling(s: &SampleOpts) -> SampleConfig {
    SampleConfig::new(s.seed, s.samples)
}

fn rho_cmd(c: &PairCmd) -> Outcome<Value> {
    let u = vector("u", &c.u)?;
    let v = vector("v", &c.v)?;
    let ast = norm(&c.norm, Some(&u))?;
    let (m, p) = rho_pair(&ast, &u, &v)?;
    let mut out = json!({
        "norm": ast.to_string(),
        "u": u, "v": v,
        "norm_u": ast.norm(&u), "norm_v": ast.norm(&v),
        "rho_minus": m, "rho_plus": p, "rho": 0.5 * (m + p),
        "smooth": m == p,
    });
    if let Some(ab) = c.params.ab()? {
        out["alpha"] = json!(ab.alpha());
        out["beta"] = json!(ab.beta());
        out["rho_ab"] = json!(ab.combine(m, p));
    }
    if let Some(l) = c.params.lambda()? {
        out["lambda"] = json!(l.value());
        out["rho_lambda"] = json!(l.combine(m, p));
    }
    Ok(out)
}

fn ortho_cmd(c: &OrthoCmd) -> Outcome<Value> {
    let u = vector("u", &c.u)?;
    let v = vector("v", &c.v)?;
    let ast = norm(&c.norm, Some(&u))?;
    let rel = c.params.relation(&c.relation)?;
    let verdict = is_orthogonal(rel, &ast, &u, &v, c.tol)?;
    let mut out = json!({
        "norm": ast.to_string(),
        "relation": rel.to_string(),
        "u": u, "v": v,
        "holds": verdict.holds,
        "residual": verdict.residual,
        "tolerance": verdict.tolerance,
    });
    if rel == Relation::Birkhoff && !u.is_zero() && !v.is_zero() {
        out["oracle"] = to_value(&birkhoff_oracle(&ast, &u, &v, c.tol)?);
    }
    Ok(out)
}

fn solve_cmd(c: &PairCmd) -> Outcome<Value> {
    let u = vector("u", &c.u)?;
    let v = vector("v", &c.v)?;
    let ast = norm(&c.norm, Some(&u))?;
    let ab = c.params.require_ab()?;
    let sol = ab_orthogonalizer(&ast, &u, &v, ab)?;
    let (m, p) = rho_pair(&ast, &u, &sol.w)?;
    Ok(json!({
        "norm": ast.to_string(),
        "alpha": ab.alpha(), "beta": ab.beta(),
        "u": u, "v": v,
        "s": sol.s, "w": sol.w,
        "rho_ab_u_w": ab.combine(m, p),
    }))
}

fn interval_cmd(c: &PairCmd) -> Outcome<Value> {
    let u = vector("u", &c.u)?;
    let v = vector("v", &c.v)?;
    let ast = norm(&c.norm, Some(&u))?;
    let i = birkhoff_t_interval(&ast, &u, &v)?;
    Ok(json!({
        "norm": ast.to_string(),
        "u": u, "v": v,
        "lower": i.lower, "upper": i.upper,
    }))
}

fn locus_cmd(c: &LocusCmd) -> Outcome<Value> {
    let u = vector("u", &c.u)?;
    let ast = norm(&c.norm, Some(&u))?;
    let rel = c.params.relation(&c.relation)?;
    let rows = ortho_locus(&ast, &u, rel, c.resolution)?;
    if let Some(path) = &c.out {
        write_jsonl(path, &rows)?;
    }
    let zeros: Vec<_> = rows.iter().filter(|r| r.is_zero_crossing).collect();
    Ok(json!({
        "norm": ast.to_string(),
        "relation": rel.to_string(),
        "u": u,
        "resolution": c.resolution,
        "rows": rows.len(),
        "zero_count": zeros.len(),
        "zeros": to_value(&zeros),
        "out": c.out.as_ref().map(|p| p.display().to_string()),
    }))
}

fn angle_cmd(c: &AngleCmd) -> Outcome<Value> {
    let u = vector("u", &c.u)?;
    let v = vector("v", &c.v)?;
    let ast = norm(&c.norm, Some(&u))?;
    let ab = c.params.require_ab()?;
    let a = angle_ab(&ast, &u, &v, ab)?;
    let mut out = json!({
        "norm": ast.to_string(),
        "alpha": ab.alpha(), "beta": ab.beta(),
        "u": u, "v": v,
        "theta": a.theta,
        "cosine_argument": a.cosine_argument,
    });
    if let Some(s) = &c.scale {
        out["homogeneity_residual"] = json!(angle_homogeneity_check(&ast, &u, &v, s[0], s[1], ab)?);
    }
    Ok(out)
}

fn probe_cmd(c: &ProbeCmd) -> Outcome<Value> {
    let ast = norm(&c.norm, None)?;
    let cfg = sampling(&c.sampling);
    let kinds = if c.kind.is_empty() {
        let mut all = vec![ProbeKind::Smooth, ProbeKind::Convex];
        if c.params.ab()?.is_some() {
            all.push(ProbeKind::Symmetry);
        }
        all
    } else {
        c.kind.clone()
    };
    let mut reports = Vec::new();
    let mut out = json!({ "norm": ast.to_string(), "seed": cfg.seed, "samples": cfg.count });
    for kind in kinds {
        let (key, report) = match kind {
            ProbeKind::Smooth => ("smoothness", smoothness_probe(&ast, &cfg)),
            ProbeKind::Convex => ("strict_convexity", strict_convexity_probe(&ast, &cfg)),
            ProbeKind::Symmetry => (
                "symmetry",
                symmetry_search(&ast, c.params.require_ab()?, &cfg),
            ),
        };
        let mut v = to_value(&report);
        v["probe"] = json!(key);
        out[key] = v.clone();
        reports.push(v);
    }
    if let Some(path) = &c.out {
        write_jsonl(path, &reports)?;
    }
    Ok(out)
}

fn identity_cmd(c: &PairCmd) -> Outcome<Value> {
    let u = vector("u", &c.u)?;
    let v = vector("v", &c.v)?;
    let ast = norm(&c.norm, Some(&u))?;
    let ab = c.params.require_ab()?;
    Ok(json!({
        "norm": ast.to_string(),
        "alpha": ab.alpha(), "beta": ab.beta(),
        "u": u, "v": v,
        "quartic_residual": quartic_identity_residual(&ast, &u, &v, ab)?,
        "symmetry_residual": symmetry_residual(&ast, &u, &v, ab)?,
    }))
}

fn constant_cmd(c: &ConstantCmd) -> Outcome<Value> {
    let a1 = norm(&c.norm, None)?;
    let a2 = norm_with_dim(&c.norm2, a1.dim())?;
    let ab = c.params.require_ab()?;
    let cfg = sampling(&c.sampling);
    let kinds = if c.kind.is_empty() {
        vec![ConstantKind::Angular, ConstantKind::Equivalence]
    } else {
        c.kind.clone()
    };
    let mut out = json!({
        "norm": a1.to_string(), "norm2": a2.to_string(),
        "alpha": ab.alpha(), "beta": ab.beta(),
        "lower_estimate": true,
    });
    for kind in kinds {
        match kind {
            ConstantKind::Angular => {
                out["angular"] = to_value(&angular_constant(&a1, &a2, ab, &cfg)?)
            }
            ConstantKind::Equivalence => {
                out["equivalence"] = to_value(&norm_equiv_constant(&a1, &a2, ab, &cfg)?)
            }
        }
    }
    Ok(out)
}

fn preserver_cmd(c: &PreserverCmd) -> Outcome<Value> {
    let m = parse_matrix(&c.matrix).map_err(|e| positioned("--matrix", &c.matrix, e))?;
    let dom = norm_with_dim(&c.norm.norm, c.norm.dim.unwrap_or(m.cols()))?;
    let cod = norm_with_dim(c.norm2.as_deref().unwrap_or(&c.norm.norm), m.rows())?;
    let map = LinearMap::new(m, dom, cod)?;
    let ab = c.params.require_ab()?;
    let report = preserver_check(&map, ab, &sampling(&c.sampling))?;
    let mut out = to_value(&report);
    out["matrix"] = json!(map.matrix.to_string());
    out["norm"] = json!(map.domain.to_string());
    out["norm2"] = json!(map.codomain.to_string());
    out["all_pass"] = json!(report.all_pass());
    Ok(out)
}

fn mine_cmd(c: &MineCmd) -> Outcome<Value> {
    let ast = norm(&c.norm, None)?;
    let a = c.params.relation(&c.relation)?;
    let b = c.params.relation(&c.relation2)?;
    let report = mine_incomparability(&ast, a, b, &sampling(&c.sampling), c.resolution, c.tol)?;
    let mut out = to_value(&report);
    out["norm"] = json!(ast.to_string());
    out["relation_a"] = json!(a.to_string());
    out["relation_b"] = json!(b.to_string());
    Ok(out)
}

fn audit_cmd(c: &AuditCmd) -> Outcome<Value> {
    let ast = norm(&c.norm, None)?;
    let mut out = to_value(&audit_norm(&ast, &sampling(&c.sampling), c.tol));
    out["norm"] = json!(ast.to_string());
    Ok(out)
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Rho(_) => "rho",
            Command::Ortho(_) => "ortho",
            Command::Solve(_) => "solve",
            Command::Interval(_) => "interval",
            Command::Locus(_) => "locus",
            Command::Angle(_) => "angle",
            Command::Probe(_) => "probe",
            Command::Identity(_) => "identity",
            Command::Constant(_) => "constant",
            Command::Preserver(_) => "preserver",
            Command::Mine(_) => "mine",
            Command::Audit(_) => "audit",
        }
    }

    fn output(&self) -> &OutputOpts {
        match self {
            Command::Rho(c) | Command::Solve(c) | Command::Interval(c) | Command::Identity(c) => {
                &c.output
            }
            Command::Ortho(c) => &c.output,
            Command::Locus(c) => &c.output,
            Command::Angle(c) => &c.output,
            Command::Probe(c) => &c.output,
            Command::Constant(c) => &c.output,
            Command::Preserver(c) => &c.output,
            Command::Mine(c) => &c.output,
            Command::Audit(c) => &c.output,
        }
    }

    fn execute(&self) -> Outcome<Value> {
        match self {
            Command::Rho(c) => rho_cmd(c),
            Command::Ortho(c) => ortho_cmd(c),
            Command::Solve(c) => solve_cmd(c),
            Command::Interval(c) => interval_cmd(c),
            Command::Locus(c) => locus_cmd(c),
            Command::Angle(c) => angle_cmd(c),
            Command::Probe(c) => probe_cmd(c),
            Command::Identity(c) => identity_cmd(c),
            Command::Constant(c) => constant_cmd(c),
            Command::Preserver(c) => preserver_cmd(c),
            Command::Mine(c) => mine_cmd(c),
            Command::Audit(c) => audit_cmd(c),
        }
    }
}

fn shell_quote(arg: &str) -> String {
    let plain = !arg.is_empty()
        && arg
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b"-_.,/=:+".contains(&b));
    if plain {
        arg.to_string()
    } else {
        format!("'{}'", arg.replace('\'', r"'\''"))
    }
}

/// Runs the tool on `args` (including the program name) and returns the exit status.
pub fn run<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    let opts = cli.command.output();
    let result = match opts.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| cli.command.execute()),
            Err(e) => Err(usage(format!("--threads: {e}"))),
        },
        None => cli.command.execute(),
    };
    match result {
        Ok(result) => {
            let mut replay = vec!["normderiv".to_string()];
            replay.extend(args.iter().skip(1).map(|a| shell_quote(a)));
            let doc = json!({
                "command": cli.command.name(),
                "replay": replay.join(" "),
                "result": result,
            });
            let text = match opts.format {
                Format::Json => render::json(&doc) + "\n",
                Format::Table => render::table(&doc),
                Format::Csv => render::csv(&doc),
            };
            match stdout.write_all(text.as_bytes()) {
                Ok(()) => 0,
                Err(_) => 1,
            }
        }
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}
