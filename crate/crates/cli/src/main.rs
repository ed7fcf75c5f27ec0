//! `ccr-folner`: command-line front end for the Følner approximation
//! workbench.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 on usage,
//! parse or input errors.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use ccr_folner::character::{character_relation_check, Character};
use ccr_folner::cp::{self, CpSample, SynthConfig};
use ccr_folner::expr::{parse_element, split_top_level};
use ccr_folner::fock::{FockRep, Relation, RelationParams};
use ccr_folner::lattice::{BoxShape, LatticeModel};
use ccr_folner::rational;
use ccr_folner::report::{self, Report};
use ccr_folner::{Error, SymplecticSpace, VecX};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "ccr-folner", version, about = "Følner approximations of the Weyl and resolvent CCR algebras")]
struct Cli {
    /// Symplectic space as JSON, e.g. '{"d": 2}' (default d = 1).
    #[arg(long, global = true)]
    space: Option<String>,
    /// Seed for stochastic commands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Exact Følner ratios dim(AV + V)/dim(V).
    FolnerRatio(LatticeArgs),
    /// Compressions of the trace representation onto a lattice box.
    Compress(LatticeArgs),
    /// Trace-norm commutators with the normalized box projection.
    Hypertrace(HypertraceArgs),
    /// Operations on finite c.c.p. map samples.
    #[command(subcommand)]
    Cp(CpCommand),
    /// Resolvent algebra checks in truncated Fock space.
    #[command(subcommand)]
    Resolvent(ResolventCommand),
    /// Run a sweep description.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
    },
}

#[derive(Args)]
struct LatticeArgs {
    /// Generators as JSON, e.g. '[[1,0]]'.
    #[arg(long)]
    gens: String,
    /// Box radius.
    #[arg(long = "N")]
    n: u64,
    /// Comma-separated element expressions.
    #[arg(long)]
    ops: String,
    #[arg(long = "box", default_value = "symmetric")]
    shape: BoxShape,
}

#[derive(Args)]
struct HypertraceArgs {
    #[command(flatten)]
    lattice: LatticeArgs,
    /// Ambient box radius (default N + support radius).
    #[arg(long = "R")]
    ambient: Option<u64>,
}

#[derive(Subcommand)]
enum CpCommand {
    /// Spectral split of φ(1) and the certified distance bound.
    Split(CpArgs),
    /// Unitalization ψ = f φ f; writes the ψ sample.
    Unitalize(CpArgs),
    /// Følner certificate for the recorded pairs.
    Certify {
        #[command(flatten)]
        args: CpArgs,
        /// Reference norms as JSON, e.g. '{"W[1,0]": 1}'.
        #[arg(long)]
        norm_refs: Option<String>,
    },
    /// Random c.c.p. sample A ↦ V† P π(A) P V (needs --seed).
    Synth {
        #[command(flatten)]
        lattice: LatticeArgs,
        /// Singular values of V sit within `spread` of 0 or 1.
        #[arg(long, default_value_t = 1.0)]
        spread: f64,
    },
}

#[derive(Args)]
struct CpArgs {
    /// Sample JSON file.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    eps: f64,
}

#[derive(Subcommand)]
enum ResolventCommand {
    /// Residual of one resolvent relation.
    Residuals {
        #[arg(long, default_value_t = 1)]
        modes: usize,
        #[arg(long)]
        levels: usize,
        #[arg(long)]
        cutoff: usize,
        #[arg(long)]
        relation: String,
        /// JSON with lambda, nu, f, g as needed.
        #[arg(long)]
        params: String,
    },
    /// Character values and the σ-free relation report.
    Character {
        /// Functional μ as JSON vector.
        #[arg(long)]
        mu: String,
        /// Comma-separated resolvent expressions.
        #[arg(long, default_value = "")]
        words: String,
        /// JSON with lambda, nu, f, g (default 1, 1, e_1, e_{d+1}).
        #[arg(long)]
        params: Option<String>,
    },
}

/// Failure modes of a run, mapped to exit codes.
enum Failure {
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

/// JSON output with a pass flag.
struct Output {
    value: Value,
    pass: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let space = Arc::new(match &cli.space {
        Some(src) => serde_json::from_str::<SymplecticSpace>(src)?,
        None => SymplecticSpace::standard(1)?,
    });
    let out = dispatch(cli, &space)?;
    let text = match cli.format {
        Format::Json => serde_json::to_string_pretty(&out.value)? + "\n",
        Format::Csv => report::json_to_csv(&out.value)?,
    };
    match &cli.out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(if out.pass { 0 } else { 1 })
}

fn parse_gens(src: &str, space: &SymplecticSpace) -> Result<Vec<VecX>, Failure> {
    let gens: Vec<VecX> = serde_json::from_str(src)?;
    for g in &gens {
        space.check(g)?;
    }
    Ok(gens)
}

fn parse_ops(src: &str, space: &SymplecticSpace) -> Result<Vec<(String, ccr_folner::expr::ElementExpr)>, Failure> {
    let ops: Vec<String> = split_top_level(src).into_iter().map(str::to_string).collect();
    Ok(report::parse_ops(&ops, space)?)
}

fn read_sample(path: &PathBuf) -> Result<CpSample, Failure> {
    let sample = CpSample::from_json(&fs::read_to_string(path)?)?;
    sample.validate()?;
    Ok(sample)
}

fn dispatch(cli: &Cli, space: &Arc<SymplecticSpace>) -> Result<Output, Failure> {
    match &cli.command {
        Command::FolnerRatio(a) => {
            let gens = parse_gens(&a.gens, space)?;
            let rows = report::folner_ratio_rows(space, &gens, a.n, &parse_ops(&a.ops, space)?)?;
            let pass = rows.iter().all(|r| r.pass);
            Ok(Output { value: serde_json::to_value(rows)?, pass })
        }
        Command::Compress(a) => {
            let model = LatticeModel::new(space, parse_gens(&a.gens, space)?, a.shape, a.n)?;
            let rows = report::compress_rows(&model, &parse_ops(&a.ops, space)?)?;
            let pass = rows.iter().all(|r| r.pass);
            Ok(Output { value: serde_json::to_value(rows)?, pass })
        }
        Command::Hypertrace(h) => {
            let a = &h.lattice;
            let gens = parse_gens(&a.gens, space)?;
            let rows = report::hypertrace_rows(space, &gens, a.shape, a.n, h.ambient, &parse_ops(&a.ops, space)?)?;
            let pass = rows.iter().all(|r| r.pass);
            Ok(Output { value: serde_json::to_value(rows)?, pass })
        }
        Command::Cp(cmd) => cp_command(cli, space, cmd),
        Command::Resolvent(cmd) => resolvent_command(space, cmd),
        Command::Sweep { spec } => {
            let spec = report::SweepSpec::from_json(&fs::read_to_string(spec)?)?;
            let report: Report = report::run_sweep(&spec, cli.seed);
            if let Some(err) = &report.error {
                eprintln!("error: {err}");
            }
            let pass = report.exit_code() == 0;
            Ok(Output { value: serde_json::to_value(report)?, pass })
        }
    }
}

fn cp_command(cli: &Cli, space: &Arc<SymplecticSpace>, cmd: &CpCommand) -> Result<Output, Failure> {
    match cmd {
        CpCommand::Split(a) => {
            let sample = read_sample(&a.input)?;
            let s = cp::spectral_split(&sample.unit, a.eps)?;
            let pass = s.distance <= s.certified_bound;
            let value = json!({
                "k": s.k,
                "eps": s.eps,
                "lambda0": s.lambda0,
                "lambda_mid": s.lambda_mid,
                "lambda1": s.lambda1,
                "delta": s.delta,
                "distance": s.distance,
                "spectral_distance": s.spectral_distance(),
                "certified_bound": s.certified_bound,
                "mid_fraction": s.mid_fraction(),
                "mid_fraction_bound": s.mid_fraction_bound(),
                "pass": pass,
            });
            Ok(Output { value, pass })
        }
        CpCommand::Unitalize(a) => {
            let sample = read_sample(&a.input)?;
            let u = cp::unitalize(&sample, a.eps)?;
            let value: Value = serde_json::from_str(&u.psi.to_json()?)?;
            Ok(Output { value, pass: true })
        }
        CpCommand::Certify { args, norm_refs } => {
            let sample = read_sample(&args.input)?;
            let mut refs = sample.norm_refs.clone();
            if let Some(src) = norm_refs {
                let extra: BTreeMap<String, f64> = serde_json::from_str(src)?;
                refs.extend(extra);
            }
            let cert = cp::folner_certificate(&sample, &sample.pairs, args.eps, &refs)?;
            let pass = cert.verdict;
            Ok(Output { value: serde_json::to_value(cert)?, pass })
        }
        CpCommand::Synth { lattice, spread } => {
            let seed = cli.seed.ok_or_else(|| Failure::Usage("cp synth is stochastic: --seed is required".into()))?;
            let model = LatticeModel::new(space, parse_gens(&lattice.gens, space)?, lattice.shape, lattice.n)?;
            let family = report::element_family(space, &parse_ops(&lattice.ops, space)?)?;
            let sample = cp::synth_ccp_with(&model, &family, SynthConfig { seed, spread: *spread })?;
            let value: Value = serde_json::from_str(&sample.to_json()?)?;
            Ok(Output { value, pass: true })
        }
    }
}

fn resolvent_command(space: &Arc<SymplecticSpace>, cmd: &ResolventCommand) -> Result<Output, Failure> {
    match cmd {
        ResolventCommand::Residuals { modes, levels, cutoff, relation, params } => {
            let relation: Relation = relation.parse()?;
            let params: RelationParams = serde_json::from_str(params)?;
            let rep = FockRep::new(*modes, *levels)?;
            let res = rep.relation_residual(relation, &params, *cutoff)?;
            let pass = !relation.is_exact() || res.raw <= report::EXACT_RELATION_TOL;
            Ok(Output { value: serde_json::to_value(res)?, pass })
        }
        ResolventCommand::Character { mu, words, params } => {
            let mu: VecX = serde_json::from_str(mu)?;
            space.check(&mu)?;
            let chi = Character::new(mu);
            let d = space.dim_pairs();
            let params: RelationParams = match params {
                Some(src) => serde_json::from_str(src)?,
                None => RelationParams::new(1.0, 1.0, space.basis(0), space.basis(d)),
            };
            let need = |name: &str| Failure::Usage(format!("[character] missing parameter {name:?}"));
            let check = character_relation_check(
                &chi,
                params.lambda.ok_or_else(|| need("lambda"))?,
                params.nu.ok_or_else(|| need("nu"))?,
                params.f.as_ref().ok_or_else(|| need("f"))?,
                params.g.as_ref().ok_or_else(|| need("g"))?,
            )?;
            let mut values = Vec::new();
            let mut pass = check.pass;
            for src in split_top_level(words) {
                let e = parse_element(src, space)?;
                let v = e.character_value(&chi)?;
                let z = v.to_complex64();
                let mut row = json!({"op": src, "value": v, "numeric": [z.re, z.im]});
                if let Some(word) = e.as_word() {
                    let dist = chi.mult_domain_distance(&word)?;
                    pass &= dist == rational::int(0);
                    row["mult_domain_distance"] = json!(rational::format_rational(&dist));
                }
                values.push(row);
            }
            let value = json!({"mu": chi.mu, "values": values, "report": check});
            Ok(Output { value, pass })
        }
    }
}
