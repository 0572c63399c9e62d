//! Command-line front end. `run` does the work; `main` maps errors to exit codes.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_pcg::Pcg64Mcg;
use serde_json::{json, Map, Number, Value};

use crate::bands::{xi_kr, xi_sb, xi_ub, BandKind, BandParams, CompetitionSequence, Label};
use crate::error::{Error, Result};
use crate::mcquant::{build_tables, SimConfig, TableKind, TableSet, UbMode};
use crate::procedures::{as_threshold, compete, fdp_control_threshold, tdc_bound, Method, TiePolicy};
use crate::simulate::{gen_dataset, rep_seed, run_experiment, ExperimentConfig, MixtureConfig};

#[derive(Debug, Parser)]
#[command(name = "fdp-bands", version, about = "FDP bounds and control for target-decoy competition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Threshold a competition list with TDC/AS and bound the FDP of the discoveries.
    Bounds(DecisionArgs),
    /// Choose the cutoff that controls the FDP at level alpha with confidence 1 - gamma.
    Control(DecisionArgs),
    /// Calibrate SB and UB quantile tables by Monte Carlo.
    Tables(TablesArgs),
    /// Print the integer bands side by side.
    Compare(CompareArgs),
    /// Run the normal-mixture experiment and print a summary CSV.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Kr,
    Sb,
    Ub,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Det,
    Rand,
}

impl From<ModeArg> for UbMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Det => UbMode::Deterministic,
            ModeArg::Rand => UbMode::Randomized,
        }
    }
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    /// Target-win p-value cutoff; defaults to the method's value.
    #[arg(long)]
    c: Option<f64>,
    /// Decoy-win p-value cutoff; defaults to the method's value.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_enum, default_value = "all")]
    kind: KindArg,
    #[arg(long, value_enum, default_value = "det")]
    mode: ModeArg,
    /// Fixed seed; drawn from entropy and printed when omitted.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "FDP_BANDS_TABLE")]
    table: Option<PathBuf>,
    /// Only the closed-form band; no table needed.
    #[arg(long)]
    kr_only: bool,
}

#[derive(Debug, Args)]
struct DecisionArgs {
    /// Input file (`-` or omitted for standard input).
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[command(flatten)]
    common: Common,
    /// Multi-decoy input with columns target, decoy1..decoyd.
    #[arg(long)]
    decoys: Option<usize>,
    #[arg(long, default_value = "max")]
    method: String,
    #[arg(long, default_value = "random")]
    ties: String,
}

#[derive(Debug, Args)]
struct TablesArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    npaths: Option<u64>,
    #[arg(long)]
    dceiling: Option<u64>,
    /// Comma-separated confidence parameters.
    #[arg(long, default_value = "0.05", value_delimiter = ',')]
    gammas: Vec<f64>,
    #[arg(long = "R", default_value_t = 0.5)]
    r: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Full-size calibration (2e6 paths, ceiling 50000) instead of desk size.
    #[arg(long)]
    production: bool,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long, default_value_t = 100)]
    dmax: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 500)]
    m: usize,
    #[arg(long, default_value_t = 0.5)]
    pi0: f64,
    #[arg(long, default_value_t = 3.0)]
    rho: f64,
    #[arg(long, default_value_t = 0.075)]
    nu: f64,
    #[arg(long)]
    uncalibrated: bool,
    #[arg(long, default_value_t = 1)]
    decoys: usize,
    #[arg(long, default_value = "max")]
    method: String,
    #[arg(long, default_value = "random")]
    ties: String,
    #[arg(long, default_value_t = 500)]
    reps: usize,
    #[arg(long, default_value = "0.05", value_delimiter = ',')]
    alphas: Vec<f64>,
    #[command(flatten)]
    common: Common,
    /// Write the summary here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the scores of replicate 0 as a multi-decoy input file.
    #[arg(long)]
    dump_scores: Option<PathBuf>,
}

/// 17 significant digits.
fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    Number::from_str(&format!("{x:.16e}")).map_or(Value::Null, Value::Number)
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("seed: {s}");
        s
    })
}

fn kinds(common: &Common) -> Vec<BandKind> {
    if common.kr_only {
        return vec![BandKind::Kr];
    }
    match common.kind {
        KindArg::Kr => vec![BandKind::Kr],
        KindArg::Sb => vec![BandKind::Sb],
        KindArg::Ub => vec![BandKind::Ub],
        KindArg::All => BandKind::ALL.to_vec(),
    }
}

fn load_tables(common: &Common, kinds: &[BandKind]) -> Result<TableSet> {
    if kinds.iter().all(|k| *k == BandKind::Kr) {
        return Ok(TableSet::default());
    }
    match &common.table {
        Some(path) => TableSet::load(path),
        None => Err(Error::MissingTable {
            kind: kinds.iter().find_map(|k| k.table_kind()).unwrap_or(TableKind::Sb),
        }),
    }
}

fn params_for(common: &Common, method: Method, d: usize, m: u64, alpha: f64) -> Result<BandParams> {
    let (c0, l0) = method.cutoffs(d)?;
    BandParams::new(common.c.unwrap_or(c0), common.lambda.unwrap_or(l0), m, alpha, common.gamma)
}

fn read_input(path: Option<&Path>) -> Result<String> {
    match path {
        Some(p) if p != Path::new("-") => Ok(fs::read_to_string(p)?),
        _ => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s)?;
            Ok(s)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Labels(Vec<Label>),
    Scored(Vec<(f64, Label)>),
    MultiDecoy(Vec<(f64, Vec<f64>)>),
}

fn parse_label(field: &str, line: usize) -> Result<Label> {
    let v: i64 = field
        .parse()
        .map_err(|_| Error::parse(line, format!("label `{field}` is not an integer")))?;
    Label::try_from(v).map_err(|_| Error::parse(line, format!("label {v} is not one of 1, -1, 0")))
}

fn parse_score(field: &str, line: usize) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(x) if !x.is_nan() => Ok(x),
        _ => Err(Error::parse(line, format!("score `{field}` is not a number"))),
    }
}

/// Tab- or comma-separated records; a first line whose first field is not
/// numeric is a header.
pub fn parse_input(text: &str, decoys: Option<usize>) -> Result<Input> {
    let rows: Vec<(usize, Vec<&str>)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let sep = if l.contains('\t') { '\t' } else { ',' };
            (i + 1, l.split(sep).map(str::trim).collect())
        })
        .collect();
    let mut rows = rows.as_slice();
    if let Some((_, first)) = rows.first() {
        if first[0].parse::<f64>().is_err() {
            rows = &rows[1..];
        }
    }
    let arity = rows.first().map_or(0, |(_, f)| f.len());
    if let Some((line, f)) = rows.iter().find(|(_, f)| f.len() != arity) {
        return Err(Error::parse(*line, format!("expected {arity} columns, found {}", f.len())));
    }
    match decoys {
        Some(d) => {
            if !rows.is_empty() && arity != d + 1 {
                return Err(Error::parse(rows[0].0, format!("expected {} columns for {d} decoys, found {arity}", d + 1)));
            }
            let recs = rows
                .iter()
                .map(|(line, f)| {
                    let t = parse_score(f[0], *line)?;
                    let ds = f[1..].iter().map(|x| parse_score(x, *line)).collect::<Result<Vec<_>>>()?;
                    Ok((t, ds))
                })
                .collect::<Result<_>>()?;
            Ok(Input::MultiDecoy(recs))
        }
        None => match arity {
            0 => Ok(Input::Labels(Vec::new())),
            1 => Ok(Input::Labels(rows.iter().map(|(line, f)| parse_label(f[0], *line)).collect::<Result<_>>()?)),
            2 => Ok(Input::Scored(
                rows.iter()
                    .map(|(line, f)| Ok((parse_score(f[0], *line)?, parse_label(f[1], *line)?)))
                    .collect::<Result<_>>()?,
            )),
            n => Err(Error::parse(rows[0].0, format!("expected 1 or 2 columns (score, label), found {n}; use --decoys for multi-decoy input"))),
        },
    }
}

struct Prepared {
    seq: CompetitionSequence,
    method: Method,
    decoys: usize,
    seed: u64,
    rng: Pcg64Mcg,
}

fn prepare(args: &DecisionArgs) -> Result<Prepared> {
    let method: Method = args.method.parse()?;
    let ties: TiePolicy = args.ties.parse()?;
    let input = parse_input(&read_input(args.input.as_deref())?, args.decoys)?;
    let seed = resolve_seed(args.common.seed);
    let mut rng = Pcg64Mcg::seed_from_u64(seed);
    let decoys = args.decoys.unwrap_or(1);
    let seq = match input {
        Input::Labels(l) => CompetitionSequence::from_labels(l),
        Input::Scored(items) => CompetitionSequence::from_scored(items, &mut rng)?,
        Input::MultiDecoy(recs) => compete(&recs, method, ties, &mut rng)?,
    };
    Ok(Prepared {
        seq,
        method,
        decoys,
        seed,
        rng,
    })
}

fn header(p: &BandParams, seed: u64, m: usize) -> Map<String, Value> {
    let mut obj = Map::new();
    obj.insert("alpha".into(), num(p.alpha));
    obj.insert("gamma".into(), num(p.gamma));
    obj.insert("c".into(), num(p.c));
    obj.insert("lambda".into(), num(p.lambda));
    obj.insert("m".into(), json!(m));
    obj.insert("seed".into(), json!(seed));
    obj
}

fn cmd_bounds(args: &DecisionArgs, out: &mut dyn Write) -> Result<()> {
    let kinds = kinds(&args.common);
    let tables = load_tables(&args.common, &kinds)?;
    let mut prep = prepare(args)?;
    let m = prep.seq.len();
    let params = params_for(&args.common, prep.method, prep.decoys, m as u64, args.alpha)?;
    let k = as_threshold(&prep.seq, &params);
    let mut bounds = Vec::new();
    for kind in kinds {
        let r = tdc_bound(&prep.seq, k, &params, kind, &tables, args.common.mode.into(), &mut prep.rng)?;
        bounds.push(json!({
            "kind": kind.name(),
            "d_max": r.params.d_max,
            "q": num(r.q_bound),
            "q_raw": num(r.q_bound_raw),
        }));
    }
    let mut obj = header(&params, prep.seed, m);
    obj.insert("k_as".into(), json!(k));
    obj.insert("discoveries".into(), json!(prep.seq.t_at(k)));
    obj.insert("bounds".into(), Value::Array(bounds));
    writeln!(out, "{}", Value::Object(obj)).map_err(Error::from)
}

fn cmd_control(args: &DecisionArgs, out: &mut dyn Write) -> Result<()> {
    let kinds = kinds(&args.common);
    let tables = load_tables(&args.common, &kinds)?;
    let mut prep = prepare(args)?;
    let m = prep.seq.len();
    let params = params_for(&args.common, prep.method, prep.decoys, m as u64, args.alpha)?;
    let mut results = Vec::new();
    for kind in kinds {
        let r = fdp_control_threshold(&prep.seq, &params, kind, &tables, args.common.mode.into(), &mut prep.rng)?;
        results.push(json!({
            "kind": kind.name(),
            "d_max": r.params.d_max,
            "k0": r.k_threshold,
            "discoveries": r.n_discoveries,
            "q": num(r.q_bound),
        }));
    }
    let mut obj = header(&params, prep.seed, m);
    obj.insert("results".into(), Value::Array(results));
    writeln!(out, "{}", Value::Object(obj)).map_err(Error::from)
}

fn cmd_tables(args: &TablesArgs, out: &mut dyn Write) -> Result<()> {
    let seed = resolve_seed(args.seed);
    let mut cfg = if args.production {
        SimConfig::production(args.r, args.gammas.clone(), seed)
    } else {
        SimConfig::desk(args.r, args.gammas.clone(), seed)
    };
    if let Some(n) = args.npaths {
        cfg.n_paths = n;
    }
    if let Some(d) = args.dceiling {
        cfg.d_ceiling = d;
    }
    cfg.validate()?;
    let (sb, ub) = build_tables(&cfg)?;
    let (n_sb, n_ub) = (sb.len(), ub.len());
    TableSet::new(sb, ub).save(&args.out)?;
    writeln!(
        out,
        "# fdp-bands-table v1 seed={seed} npaths={} R={} dceiling={} gammas={}",
        cfg.n_paths,
        cfg.r,
        cfg.d_ceiling,
        cfg.gammas.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
    )?;
    writeln!(out, "wrote {n_sb} SB rows and {n_ub} UB rows to {}", args.out.display())?;
    Ok(())
}

fn cmd_compare(args: &CompareArgs, out: &mut dyn Write) -> Result<()> {
    let common = &args.common;
    if args.dmax == 0 {
        return Err(Error::param("--dmax must be at least 1"));
    }
    let kr_only = common.kr_only || common.kind == KindArg::Kr;
    let (c0, l0) = Method::Max.cutoffs(1)?;
    let params = BandParams::new(common.c.unwrap_or(c0), common.lambda.unwrap_or(l0), args.dmax, 0.5, common.gamma)?
        .with_d_max(args.dmax);
    let kr = xi_kr(&params);
    if kr_only {
        writeln!(out, "d,xi_kr")?;
        for d in 1..=args.dmax {
            writeln!(out, "{d},{}", kr.xi(d))?;
        }
        return Ok(());
    }
    let tables = load_tables(common, &[BandKind::Sb, BandKind::Ub])?;
    let r = params.r();
    let z = tables.require(TableKind::Sb, common.gamma, r)?.sb_z(common.gamma, args.dmax, r)?;
    let mut rng = Pcg64Mcg::seed_from_u64(resolve_seed(common.seed));
    let u = tables
        .require(TableKind::Ub, common.gamma, r)?
        .ub_u(common.gamma, args.dmax, r, common.mode.into(), &mut rng)?;
    let sb = xi_sb(&params, z);
    let ub = xi_ub(&params, u)?;
    writeln!(out, "d,xi_sb,xi_ub,xi_kr")?;
    for d in 1..=args.dmax {
        writeln!(out, "{d},{},{},{}", sb.xi(d), ub.xi(d), kr.xi(d))?;
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let common = &args.common;
    let method: Method = args.method.parse()?;
    let ties: TiePolicy = args.ties.parse()?;
    if common.c.is_some() || common.lambda.is_some() {
        return Err(Error::param("simulate takes c and lambda from --method"));
    }
    let kinds = kinds(common);
    let tables = load_tables(common, &kinds)?;
    let seed = resolve_seed(common.seed);
    let mixture = MixtureConfig {
        m: args.m,
        pi0: args.pi0,
        calibrated: !args.uncalibrated,
        rho: args.rho,
        nu: args.nu,
        n_decoys: args.decoys,
        seed,
    };
    let mut cfg = ExperimentConfig::new(mixture, args.alphas.clone(), common.gamma, kinds, args.reps);
    cfg.method = method;
    cfg.ties = ties;
    cfg.mode = common.mode.into();
    if let Some(path) = &args.dump_scores {
        let data = gen_dataset(&MixtureConfig {
            seed: rep_seed(seed, 0),
            ..cfg.mixture.clone()
        })?;
        fs::write(path, data.to_csv())?;
    }
    let csv = run_experiment(&cfg, &tables)?.summary().to_csv();
    match &args.out {
        Some(path) => fs::write(path, csv)?,
        None => out.write_all(csv.as_bytes())?,
    }
    Ok(())
}

/// Run one command line, writing results to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> std::result::Result<(), RunError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(RunError::Usage)?;
    let res = match &cli.command {
        Command::Bounds(a) => cmd_bounds(a, out),
        Command::Control(a) => cmd_control(a, out),
        Command::Tables(a) => cmd_tables(a, out),
        Command::Compare(a) => cmd_compare(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
    };
    res.map_err(RunError::Fdp)
}

#[derive(Debug)]
pub enum RunError {
    Usage(clap::Error),
    Fdp(Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Usage(e) => e.exit_code(),
            RunError::Fdp(e) if e.is_coverage() => 3,
            RunError::Fdp(Error::Param(_) | Error::Parse { .. }) => 2,
            RunError::Fdp(_) => 1,
        }
    }
}

pub fn main() -> i32 {
    let mut stdout = io::stdout().lock();
    match run(std::env::args_os(), &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            match &e {
                RunError::Usage(u) => {
                    let _ = u.print();
                }
                RunError::Fdp(inner) => eprintln!("error: {inner}"),
            }
            e.exit_code()
        }
    }
}
