//! Command-line driver: maximal fields, Luxemburg averages, CZ cubes,
//! Muckenhoupt constants, inequality sweeps, and decomposition audits.
//!
//! Exit codes: 0 success / all checks pass, 1 a check failed, 2 usage or
//! configuration error.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use omlab::decomp::{
    build_omega_levels, forest_checks, gamma_chain_checks, lemma23_check, lemma24_check,
    omega_nesting_checks, omega_v_floor_checks, principal_forest, stable_level_range,
    AuditReport, WeightContext,
};
use omlab::geometry::{Domain, DyadicCube, GridFunction};
use omlab::harness::{
    claim_audits, mixed_field, sweep, write_csv, BoundSide, ClaimAuditConfig, SweepConfig,
};
use omlab::instances::{gen_instance, InstanceKind, InstanceSpec};
use omlab::io::{load_grid_function, write_json};
use omlab::orlicz::luxemburg_average;
use omlab::weights::{a1_constant, ainf_params, ap_constant};
use omlab::young::YoungPhi;

#[derive(Parser)]
#[command(name = "omlab", version, about = "Orlicz maximal operators and weight audits on exact dyadic grids")]
struct Cli {
    /// Worker threads (0 = rayon default); OMLAB_THREADS is the fallback.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a maximal field and write it as JSON.
    Maximal(MaximalArgs),
    /// Print the Luxemburg average of f over one cube.
    Luxemburg(LuxemburgArgs),
    /// Decompose a level set into maximal dyadic cubes.
    Cz(CzArgs),
    /// Muckenhoupt constants of a weight.
    Apconst(ApconstArgs),
    /// Generate a certified instance (f, u, v).
    Gen(GenArgs),
    /// Run an inequality sweep from a config; exit 0 iff it passes.
    Verify(VerifyArgs),
    /// Run a decomposition audit; exit 0 iff every check passes.
    Audit(AuditArgs),
}

#[derive(Args)]
struct MaximalArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Young parameters, e.g. r=1,delta=1
    #[arg(long)]
    phi: String,
    /// Grid id of the single-grid operator.
    #[arg(long, conflicts_with = "side")]
    grid: Option<usize>,
    /// dyadic:<g>, or lower/upper for the shifted-grid sandwich.
    #[arg(long, default_value = "dyadic:0")]
    side: String,
    /// Coarsest generation of the supremum (default box_exp + 2).
    #[arg(long, allow_hyphen_values = true)]
    gmax: Option<i32>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LuxemburgArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Cube as grid:gen:c0[,c1[,c2]]
    #[arg(long)]
    cube: String,
    #[arg(long)]
    phi: String,
}

#[derive(Args)]
struct CzArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    phi: String,
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    grid: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ApconstArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// A_p product for this p
    #[arg(long)]
    p: Option<f64>,
    /// A₁ constant with witness
    #[arg(long)]
    a1: bool,
    /// A∞ comparison parameters (C, ε, C₀, ξ)
    #[arg(long)]
    ainf: bool,
    #[arg(long, default_value_t = 0)]
    grid: usize,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    kind: String,
    #[arg(long, default_value_t = 1)]
    dim: u8,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    box_exp: i32,
    #[arg(long, default_value_t = -10, allow_hyphen_values = true)]
    cell_exp: i32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10.0)]
    a1_cap: f64,
    #[arg(long, default_value_t = 2.0)]
    r_cert: f64,
    #[arg(long)]
    out_f: PathBuf,
    #[arg(long)]
    out_u: PathBuf,
    #[arg(long)]
    out_v: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    config: PathBuf,
    /// Write the sweep report CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Recompute and byte-compare against an existing report.
    #[arg(long)]
    check: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    /// omega | forest | lemma23 | lemma24 | claims
    kind: String,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parse "r=R,delta=D".
fn parse_phi(text: &str) -> anyhow::Result<YoungPhi> {
    let mut r = None;
    let mut delta = None;
    for part in text.split(',') {
        let (key, value) =
            part.split_once('=').ok_or_else(|| anyhow!("bad phi component '{part}'"))?;
        let value: f64 = value.trim().parse().context("phi value")?;
        match key.trim() {
            "r" => r = Some(value),
            "delta" => delta = Some(value),
            other => bail!("unknown phi key '{other}'"),
        }
    }
    Ok(YoungPhi::new(
        r.ok_or_else(|| anyhow!("phi needs r="))?,
        delta.ok_or_else(|| anyhow!("phi needs delta="))?,
    )?)
}

/// Parse "grid:gen:c0[,c1[,c2]]".
fn parse_cube(text: &str) -> anyhow::Result<DyadicCube> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        bail!("cube must be grid:gen:coords, got '{text}'");
    }
    let grid: usize = parts[0].parse().context("cube grid")?;
    let gen: i32 = parts[1].parse().context("cube gen")?;
    let mut coords = [0i64; 3];
    for (i, c) in parts[2].split(',').enumerate() {
        if i >= 3 {
            bail!("too many coordinates");
        }
        coords[i] = c.trim().parse().context("cube coordinate")?;
    }
    Ok(DyadicCube::new(grid, gen, coords))
}

/// One instance source for audits: generated or loaded from files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum AuditSource {
    Gen { kind: InstanceKind, seed: u64 },
    Files { f: PathBuf, u: PathBuf, v: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AuditConfigFile {
    schema: String,
    dim: u8,
    box_exp: i32,
    cell_exp: i32,
    source: AuditSource,
    phi_r: f64,
    phi_delta: f64,
    #[serde(default)]
    grid: usize,
    /// g = f·v / t
    #[serde(default = "default_t")]
    t: f64,
    #[serde(default)]
    a: Option<f64>,
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    p_choice: Option<f64>,
    #[serde(default)]
    n_cutoff: Option<i32>,
    #[serde(default = "default_samples")]
    sample_cells: usize,
    #[serde(default = "default_budget")]
    ainf_budget: usize,
    #[serde(default = "default_cap")]
    a1_cap: f64,
}

fn default_t() -> f64 {
    1.0
}
fn default_samples() -> usize {
    32
}
fn default_budget() -> usize {
    1 << 22
}
fn default_cap() -> f64 {
    10.0
}

fn load_audit_inputs(
    cfg: &AuditConfigFile,
) -> anyhow::Result<(GridFunction, GridFunction, GridFunction, GridFunction, YoungPhi)> {
    if cfg.schema != "omlab/1" {
        bail!("unsupported schema '{}'", cfg.schema);
    }
    let domain = Domain::new(cfg.dim, cfg.box_exp, cfg.cell_exp)?;
    let phi = YoungPhi::new(cfg.phi_r, cfg.phi_delta)?;
    let (f, u, v) = match &cfg.source {
        AuditSource::Gen { kind, seed } => {
            let mut spec = InstanceSpec::new(*kind, domain);
            spec.a1_cap = cfg.a1_cap;
            spec.r_cert = cfg.phi_r.max(1.0);
            let inst = gen_instance(&spec, *seed)?;
            (inst.f, inst.u, inst.v)
        }
        AuditSource::Files { f, u, v } => {
            (load_grid_function(f)?, load_grid_function(u)?, load_grid_function(v)?)
        }
    };
    let g = f.mul(&v)?.map(|x| x / cfg.t)?;
    Ok((f, u, v, g, phi))
}

fn emit_json(value: &impl Serialize, out: Option<&PathBuf>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => {
            std::fs::write(path, text + "\n")?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn run_audit(args: &AuditArgs) -> anyhow::Result<bool> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let cfg: AuditConfigFile = serde_json::from_str(&text).context("parsing audit config")?;
    let (_f, u, v, g, phi) = load_audit_inputs(&cfg)?;
    let grid = cfg.grid;

    let report = match args.kind.as_str() {
        "omega" => {
            let ctx = WeightContext::new(&v, &phi, grid, cfg.ainf_budget)?;
            let a = cfg.a.unwrap_or_else(|| {
                omlab::decomp::default_level_base(&phi, v.domain().dim(), cfg.alpha.unwrap_or(1.25))
            });
            let levels = build_omega_levels(&v, &g, &phi, a, grid, None)?;
            let mut checks = Vec::new();
            for fam in &levels.families {
                checks.extend(omega_v_floor_checks(fam, &v, ctx.a1_v, &ctx.mdv)?);
                checks.extend(gamma_chain_checks(fam, &v, ctx.a1_v, &ctx.mdv)?);
            }
            for pair in levels.families.windows(2) {
                checks.extend(omega_nesting_checks(&pair[1], &pair[0], v.domain())?);
            }
            AuditReport::new("omega", checks)
        }
        "forest" => {
            let a = cfg.a.unwrap_or_else(|| {
                omlab::decomp::default_level_base(&phi, v.domain().dim(), cfg.alpha.unwrap_or(1.25))
            });
            let alpha = cfg.alpha.unwrap_or(1.25);
            let range = match cfg.n_cutoff {
                Some(n) => Some((n, stable_level_range(&v, &g, &phi, a, grid)?.1)),
                None => None,
            };
            let levels = build_omega_levels(&v, &g, &phi, a, grid, range)?;
            let forest = principal_forest(&levels.families, &u, &phi, a, alpha, levels.n)?;
            AuditReport::new("forest", forest_checks(&forest, v.domain())?)
        }
        "lemma23" => {
            let ctx = WeightContext::new(&v, &phi, grid, cfg.ainf_budget)?;
            let a = cfg.a.unwrap_or_else(|| {
                omlab::decomp::default_level_base(&phi, v.domain().dim(), cfg.alpha.unwrap_or(1.25))
            });
            let levels = build_omega_levels(&v, &g, &phi, a, grid, None)?;
            let mut checks = Vec::new();
            for fam in &levels.families {
                for k in (fam.k - 3)..=fam.k {
                    checks.extend(lemma23_check(fam, &v, &phi, k, ctx.a1_v)?);
                }
            }
            AuditReport::new("lemma23", checks)
        }
        "lemma24" => {
            let ctx = WeightContext::new(&v, &phi, grid, cfg.ainf_budget)?;
            let a = cfg.a.unwrap_or_else(|| {
                omlab::decomp::default_level_base(&phi, v.domain().dim(), cfg.alpha.unwrap_or(1.25))
            });
            let (n, k_max) = stable_level_range(&v, &g, &phi, a, grid)?;
            let mut checks = Vec::new();
            if n <= k_max {
                let levels = build_omega_levels(&v, &g, &phi, a, grid, Some((n, k_max)))?;
                for fam in &levels.families {
                    for oc in fam.cubes.iter().filter(|c| c.gamma) {
                        for k in fam.k..=(fam.k + 3) {
                            checks.push(lemma24_check(
                                &oc.cube,
                                fam.k,
                                &v,
                                &phi,
                                a,
                                k,
                                &ctx,
                                cfg.p_choice,
                            )?);
                        }
                    }
                }
            }
            AuditReport::new("lemma24", checks)
        }
        "claims" => {
            let claim_cfg = ClaimAuditConfig {
                grid,
                a: cfg.a,
                alpha: cfg.alpha,
                p_choice: cfg.p_choice,
                n_cutoff: cfg.n_cutoff,
                sample_cells: cfg.sample_cells,
                ainf_budget: cfg.ainf_budget,
            };
            let report = claim_audits(&u, &v, &g, &phi, &claim_cfg)?;
            let pass = report.pass;
            let mut doc = serde_json::to_value(&report)?;
            doc["config"] = serde_json::to_value(&cfg)?;
            doc["kind"] = "claims".into();
            doc["schema"] = "omlab/1".into();
            emit_json(&doc, args.out.as_ref())?;
            return Ok(pass);
        }
        other => bail!("unknown audit kind '{other}'"),
    };
    let pass = report.pass;
    let mut doc = serde_json::to_value(&report)?;
    doc["config"] = serde_json::to_value(&cfg)?;
    emit_json(&doc, args.out.as_ref())?;
    Ok(pass)
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    match &cli.command {
        Command::Maximal(args) => {
            let f = load_grid_function(&args.input)?;
            let phi = parse_phi(&args.phi)?;
            let side: BoundSide = match args.grid {
                Some(grid) => BoundSide::Dyadic(grid),
                None => args.side.parse()?,
            };
            let range = args.gmax.map(|g| (f.domain().cell_exp(), g));
            let field = mixed_field(&f, &GridFunction::constant(*f.domain(), 1.0)?, &phi, side, range)?;
            #[derive(Serialize)]
            struct FieldDoc {
                schema: &'static str,
                dim: u8,
                box_exp: i32,
                cell_exp: i32,
                phi_r: f64,
                phi_delta: f64,
                side: String,
                gen_range: (i32, i32),
                values: Vec<f64>,
            }
            let doc = FieldDoc {
                schema: "omlab/1",
                dim: field.domain.dim(),
                box_exp: field.domain.box_exp(),
                cell_exp: field.domain.cell_exp(),
                phi_r: phi.r(),
                phi_delta: phi.delta(),
                side: side.to_string(),
                gen_range: field.gen_range,
                values: field.values,
            };
            emit_json(&doc, Some(&args.out))?;
            Ok(true)
        }
        Command::Luxemburg(args) => {
            let f = load_grid_function(&args.input)?;
            let phi = parse_phi(&args.phi)?;
            let cube = parse_cube(&args.cube)?;
            let value = luxemburg_average(&f, &cube, &phi)?;
            println!("{value:?}");
            Ok(true)
        }
        Command::Cz(args) => {
            let f = load_grid_function(&args.input)?;
            let phi = parse_phi(&args.phi)?;
            let cz = omlab::decomp::cz_cubes(&f, &phi, args.grid, args.lambda)?;
            #[derive(Serialize)]
            struct CzDoc {
                schema: &'static str,
                lambda: f64,
                grid: usize,
                cubes: Vec<String>,
                level_set_cells: usize,
            }
            let doc = CzDoc {
                schema: "omlab/1",
                lambda: cz.lambda,
                grid: cz.grid,
                cubes: cz.cubes.iter().map(|c| c.label(f.domain().dim())).collect(),
                level_set_cells: cz.mask.iter().filter(|&&b| b).count(),
            };
            emit_json(&doc, args.out.as_ref())?;
            Ok(true)
        }
        Command::Apconst(args) => {
            let w = load_grid_function(&args.input)?;
            let grids = [args.grid];
            if args.a1 {
                let cert = a1_constant(&w, &grids)?;
                emit_json(&serde_json::json!({
                    "schema": "omlab/1",
                    "constant": cert.constant,
                    "witness": cert.witness,
                }), None)?;
            } else if args.ainf {
                let params = ainf_params(&w, &grids, 1 << 22)?;
                emit_json(&serde_json::json!({
                    "schema": "omlab/1",
                    "C": params.c,
                    "eps": params.eps,
                    "C0": params.c0,
                    "xi": params.xi,
                    "exhaustive": params.exhaustive,
                }), None)?;
            } else if let Some(p) = args.p {
                let constant = ap_constant(&w, p, &grids)?;
                emit_json(
                    &serde_json::json!({"schema": "omlab/1", "p": p, "constant": constant}),
                    None,
                )?;
            } else {
                bail!("choose one of --a1, --ainf, or --p P");
            }
            Ok(true)
        }
        Command::Gen(args) => {
            let kind: InstanceKind = args.kind.parse()?;
            let domain = Domain::new(args.dim, args.box_exp, args.cell_exp)?;
            let mut spec = InstanceSpec::new(kind, domain);
            spec.a1_cap = args.a1_cap;
            spec.r_cert = args.r_cert;
            let inst = gen_instance(&spec, args.seed)?;
            for (path, func) in
                [(&args.out_f, &inst.f), (&args.out_u, &inst.u), (&args.out_v, &inst.v)]
            {
                let file = std::fs::File::create(path)
                    .with_context(|| format!("creating {}", path.display()))?;
                write_json(func, std::io::BufWriter::new(file))?;
            }
            emit_json(
                &serde_json::json!({
                    "schema": "omlab/1",
                    "kind": kind.to_string(),
                    "seed": args.seed,
                    "a1_u": inst.a1_u,
                    "a1_v": inst.a1_v,
                    "a1_vr": inst.a1_vr,
                    "r_cert": args.r_cert,
                }),
                None,
            )?;
            Ok(true)
        }
        Command::Verify(args) => {
            let text = std::fs::read_to_string(&args.config)
                .with_context(|| format!("reading {}", args.config.display()))?;
            let config: SweepConfig = serde_json::from_str(&text).context("parsing sweep config")?;
            let report = sweep(&config)?;
            let mut csv = Vec::new();
            write_csv(&report, &mut csv)?;
            if let Some(out) = &args.out {
                std::fs::write(out, &csv)?;
            }
            let mut pass = report.pass;
            if let Some(previous) = &args.check {
                let old = std::fs::read(previous)
                    .with_context(|| format!("reading {}", previous.display()))?;
                if old != csv {
                    eprintln!("report mismatch: {} differs from a fresh run", previous.display());
                    pass = false;
                }
            }
            if args.out.is_none() && args.check.is_none() {
                std::io::stdout().write_all(&csv)?;
            }
            eprintln!(
                "sweep: {} records, sup_ratio={}, pass={pass}",
                report.records.len(),
                report.sup_ratio
            );
            Ok(pass)
        }
        Command::Audit(args) => run_audit(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = if cli.threads > 0 {
        cli.threads
    } else {
        std::env::var("OMLAB_THREADS").ok().and_then(|t| t.parse().ok()).unwrap_or(0)
    };
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
