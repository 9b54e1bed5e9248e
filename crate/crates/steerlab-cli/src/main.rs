//! Command-line front end: builds family states, evaluates and optimizes
//! the functional catalog, certifies classical bounds by enumeration,
//! checks mutual steerability, and simulates the two protocols.
//!
//! One JSON report per invocation goes to standard output; --pretty adds
//! human-readable tables on standard error. Exit status: 0 on success
//! (including an accepting certificate run), 2 when the certificate
//! protocol rejects, 1 on usage or runtime errors.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use steerlab::bell::{
    build_functional, chsh_best_angle, chsh_max_closed_form, chsh_value, composite_closed_form,
    composite_witness_angle, evaluate, even_n_best_angle, even_n_closed_form, hardy3_closed_form,
    i3_closed_form, odd_n_best_angle, odd_n_closed_form, optimize_settings, reference_settings,
    BellFunctional, FunctionalKind, OptimizeOptions, SettingsTable,
};
use steerlab::lhv::classical_bound;
use steerlab::protocols::{
    records_to_jsonl, run_qca, run_third_man, EveModel, QcaConfig, ThirdManConfig,
};
use steerlab::qcore::DensityMatrix;
use steerlab::states::{
    composite_family, ghz_family, load_state_json, make_rho2, make_rho_n, TwoQubitFamilyParams,
};
use steerlab::steering::mutual_steering_check;

const SCHEMA: &str = "steerlab/1";

#[derive(Parser)]
#[command(name = "steerlab", version, about = "Rank-2 mixed-state toolbox: steering checks, Bell functionals, LHV certification, and protocol simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: GlobalOpts,
}

#[derive(Args, Clone)]
struct GlobalOpts {
    /// Also print human-readable tables to stderr.
    #[arg(long, global = true)]
    pretty: bool,
    /// Interpret all angle arguments as degrees.
    #[arg(long, global = true)]
    degrees: bool,
    /// Worker threads for the parallel paths.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for every randomized path (optimizer restarts, protocol runs).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

impl GlobalOpts {
    fn angle(&self, v: f64) -> f64 {
        if self.degrees {
            v.to_radians()
        } else {
            v
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a Bell functional on a family state.
    Bell(BellArgs),
    /// Check which parties can be steered to pure states.
    Steering(SteeringArgs),
    /// Simulate a protocol run-by-run.
    #[command(subcommand)]
    Protocol(ProtocolCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Chsh,
    Hardy3,
    I3,
    #[value(name = "hardyN")]
    HardyN,
    Composite,
    #[value(name = "evenN")]
    EvenN,
    #[value(name = "oddN")]
    OddN,
}

#[derive(Args)]
struct BellArgs {
    /// Functional kind.
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Party count (defaults to 2 for chsh, 3 for hardy3/i3; required
    /// otherwise).
    #[arg(long)]
    n: Option<usize>,
    /// Prefix length for the composite functional.
    #[arg(long, default_value_t = 0)]
    r: usize,
    /// Weight of the first branch.
    #[arg(long)]
    nu1: f64,
    /// Family angle (radians; default pi/2).
    #[arg(long)]
    zeta: Option<f64>,
    /// Family phase.
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    /// hardy3 tail angle: the second tail is cos(phi)|0> + sin(phi)|1>.
    #[arg(long, default_value_t = 0.0)]
    phi: f64,
    /// Tail coefficients for hardyN/composite, comma separated
    /// (default 1.0 each).
    #[arg(long, value_delimiter = ',')]
    tail_coeffs: Vec<f64>,
    /// Free measurement angle; defaults to the kind's reference angle
    /// (witness angle for the Hardy-type kinds, best angle otherwise).
    #[arg(long)]
    free_angle: Option<f64>,
    /// Evaluate at the catalog's reference settings (the default mode).
    #[arg(long, conflicts_with_all = ["optimize", "settings_file"])]
    reference_settings: bool,
    /// Maximize the quantum value over all measurement angles.
    #[arg(long)]
    optimize: bool,
    /// Optimizer restarts.
    #[arg(long, default_value_t = 16)]
    restarts: usize,
    /// Explicit settings table (JSON file, radians).
    #[arg(long, conflicts_with = "optimize")]
    settings_file: Option<PathBuf>,
    /// Enumerate deterministic strategies to certify the classical bound.
    #[arg(long)]
    certify: bool,
}

#[derive(Args)]
struct SteeringArgs {
    /// Weight of the first branch (with --zeta; excludes --state-file).
    #[arg(long, conflicts_with = "state_file", requires = "zeta")]
    nu1: Option<f64>,
    /// Family angle.
    #[arg(long, conflicts_with = "state_file")]
    zeta: Option<f64>,
    /// Family phase.
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    /// JSON state file: family parameters or a raw density matrix.
    #[arg(long)]
    state_file: Option<PathBuf>,
    /// Purity tolerance for the branch checks.
    #[arg(long, default_value_t = 1e-9)]
    purity_tol: f64,
    /// Minimum branch distinctness.
    #[arg(long, default_value_t = 1e-9)]
    distinctness_tol: f64,
}

#[derive(Subcommand)]
enum ProtocolCmd {
    /// Key scrambling through a hidden pair label.
    Thirdman(ThirdmanArgs),
    /// Certificate authorization with random inspection.
    Qca(QcaArgs),
}

#[derive(Args)]
struct ThirdmanArgs {
    /// Weight of the correlated pair.
    #[arg(long)]
    nu1: f64,
    /// Number of protocol runs.
    #[arg(long)]
    runs: u64,
    /// Extra equatorial test bases (azimuths, comma separated).
    #[arg(long, value_delimiter = ',')]
    aux_angles: Vec<f64>,
    /// Write the per-run transcript (JSON lines) to this file.
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EveArg {
    None,
    InterceptResend,
}

#[derive(Args)]
struct QcaArgs {
    /// Weight of the first branch.
    #[arg(long)]
    nu1: f64,
    /// Family angle (default pi/2).
    #[arg(long)]
    zeta: Option<f64>,
    /// Tail angle: the dealer's second tail is cos(phi)|0> + sin(phi)|1>.
    #[arg(long)]
    phi: f64,
    /// Number of protocol runs.
    #[arg(long)]
    runs: u64,
    /// Number of runs broadcast for inspection.
    #[arg(long)]
    inspect: u64,
    /// Adversary model.
    #[arg(long, value_enum, default_value = "none")]
    eve: EveArg,
    /// Significance level for the entanglement verdict.
    #[arg(long, default_value_t = 1e-6)]
    alpha: f64,
    /// Permit orthogonal tail states.
    #[arg(long)]
    allow_orthogonal_tails: bool,
    /// Write the per-run transcript (JSON lines) to this file.
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(Serialize)]
struct Tool {
    name: &'static str,
    version: &'static str,
}

#[derive(Serialize)]
struct Report {
    schema: &'static str,
    tool: Tool,
    command: String,
    params: Value,
    results: Value,
    seed: u64,
    duration_ms: f64,
}

/// Label/value rows for the --pretty table.
type PrettyRows = Vec<(String, String)>;

struct CmdOutput {
    params: Value,
    results: Value,
    exit_code: i32,
    rows: PrettyRows,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    if let Some(threads) = cli.global.threads {
        steerlab::configure_threads(threads).map_err(|e| anyhow!("{e}"))?;
    }
    let start = Instant::now();
    let out = match &cli.command {
        Command::Bell(args) => cmd_bell(args, &cli.global)?,
        Command::Steering(args) => cmd_steering(args, &cli.global)?,
        Command::Protocol(ProtocolCmd::Thirdman(args)) => cmd_thirdman(args, &cli.global)?,
        Command::Protocol(ProtocolCmd::Qca(args)) => cmd_qca(args, &cli.global)?,
    };
    let report = Report {
        schema: SCHEMA,
        tool: Tool {
            name: "steerlab",
            version: env!("CARGO_PKG_VERSION"),
        },
        command: std::env::args().skip(1).collect::<Vec<_>>().join(" "),
        params: out.params,
        results: out.results,
        seed: cli.global.seed,
        duration_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    if cli.global.pretty {
        print_table(&out.rows)?;
    }
    Ok(out.exit_code)
}

fn print_table(rows: &PrettyRows) -> Result<()> {
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut err = std::io::stderr().lock();
    for (k, v) in rows {
        writeln!(err, "{k:<width$}  {v}")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// bell
// ---------------------------------------------------------------------------

struct BellSetup {
    kind: FunctionalKind,
    kind_name: &'static str,
    n: usize,
    nu1: f64,
    zeta: f64,
    tau: f64,
    phi: f64,
    tail_coeffs: Vec<f64>,
}

impl BellSetup {
    fn from_args(args: &BellArgs, global: &GlobalOpts) -> Result<Self> {
        let (kind, kind_name, n) = match args.kind {
            KindArg::Chsh => (FunctionalKind::Chsh, "chsh", args.n.unwrap_or(2)),
            KindArg::Hardy3 => (FunctionalKind::Hardy3, "hardy3", args.n.unwrap_or(3)),
            KindArg::I3 => (FunctionalKind::I3, "i3", args.n.unwrap_or(3)),
            KindArg::HardyN => (
                FunctionalKind::HardyN,
                "hardyN",
                args.n.context("--n is required for hardyN")?,
            ),
            KindArg::Composite => (
                FunctionalKind::Composite { prefix_len: args.r },
                "composite",
                args.n.context("--n is required for composite")?,
            ),
            KindArg::EvenN => (
                FunctionalKind::EvenN,
                "evenN",
                args.n.context("--n is required for evenN")?,
            ),
            KindArg::OddN => (
                FunctionalKind::OddN,
                "oddN",
                args.n.context("--n is required for oddN")?,
            ),
        };
        // The Hardy-type kinds need one tail coefficient per party past
        // the steering pair and the prefix; default to |0> tails.
        let mut tail_coeffs = args.tail_coeffs.clone();
        if tail_coeffs.is_empty() {
            let wanted = match kind {
                FunctionalKind::HardyN => n.saturating_sub(2),
                FunctionalKind::Composite { prefix_len } => {
                    n.saturating_sub(2 + prefix_len)
                }
                _ => 0,
            };
            tail_coeffs = vec![1.0; wanted];
        }
        Ok(Self {
            kind,
            kind_name,
            n,
            nu1: args.nu1,
            zeta: args
                .zeta
                .map(|z| global.angle(z))
                .unwrap_or(std::f64::consts::FRAC_PI_2),
            tau: global.angle(args.tau),
            phi: global.angle(args.phi),
            tail_coeffs,
        })
    }

    fn state(&self) -> Result<DensityMatrix> {
        let two_qubit = || -> Result<DensityMatrix> {
            Ok(make_rho2(&TwoQubitFamilyParams::new(
                self.nu1, self.zeta, self.tau,
            )?))
        };
        Ok(match self.kind {
            FunctionalKind::Chsh => two_qubit()?,
            FunctionalKind::Hardy3 => make_rho_n(&composite_family(
                3,
                0,
                self.nu1,
                self.zeta,
                self.tau,
                &[self.phi.cos()],
            )?),
            FunctionalKind::HardyN => make_rho_n(&composite_family(
                self.n,
                0,
                self.nu1,
                self.zeta,
                self.tau,
                &self.tail_coeffs,
            )?),
            FunctionalKind::Composite { prefix_len } => make_rho_n(&composite_family(
                self.n,
                prefix_len,
                self.nu1,
                self.zeta,
                self.tau,
                &self.tail_coeffs,
            )?),
            FunctionalKind::I3 => {
                make_rho_n(&ghz_family(self.n, self.nu1, self.zeta, self.tau)?)
            }
            FunctionalKind::EvenN | FunctionalKind::OddN => {
                if self.n == 2 {
                    two_qubit()?
                } else {
                    make_rho_n(&ghz_family(self.n, self.nu1, self.zeta, self.tau)?)
                }
            }
        })
    }

    /// Witness angle for the Hardy-type kinds, best angle otherwise.
    fn reference_angle(&self) -> Result<f64> {
        let params = TwoQubitFamilyParams::new(self.nu1, self.zeta, self.tau);
        Ok(match self.kind {
            FunctionalKind::Chsh => chsh_best_angle(&params?),
            FunctionalKind::Hardy3 => {
                composite_witness_angle(3, 0, self.nu1, self.zeta, &[self.phi.cos()])?
            }
            FunctionalKind::HardyN => {
                composite_witness_angle(self.n, 0, self.nu1, self.zeta, &self.tail_coeffs)?
            }
            FunctionalKind::Composite { prefix_len } => composite_witness_angle(
                self.n,
                prefix_len,
                self.nu1,
                self.zeta,
                &self.tail_coeffs,
            )?,
            FunctionalKind::I3 => odd_n_best_angle(3, self.nu1, self.zeta)?,
            FunctionalKind::EvenN => even_n_best_angle(self.n, self.nu1, self.zeta)?,
            FunctionalKind::OddN => odd_n_best_angle(self.n, self.nu1, self.zeta)?,
        })
    }

    fn closed_form_at(&self, angle: f64) -> Result<f64> {
        let params = TwoQubitFamilyParams::new(self.nu1, self.zeta, self.tau);
        Ok(match self.kind {
            FunctionalKind::Chsh => chsh_value(&params?, angle),
            FunctionalKind::Hardy3 => hardy3_closed_form(self.nu1, self.zeta, self.phi, angle)?,
            FunctionalKind::HardyN => composite_closed_form(
                self.n,
                0,
                self.nu1,
                self.zeta,
                &self.tail_coeffs,
                angle,
            )?,
            FunctionalKind::Composite { prefix_len } => composite_closed_form(
                self.n,
                prefix_len,
                self.nu1,
                self.zeta,
                &self.tail_coeffs,
                angle,
            )?,
            FunctionalKind::I3 => i3_closed_form(self.nu1, self.zeta, angle)?,
            FunctionalKind::EvenN => even_n_closed_form(self.n, self.nu1, self.zeta, angle)?,
            FunctionalKind::OddN => odd_n_closed_form(self.n, self.nu1, self.zeta, angle)?,
        })
    }
}

fn cmd_bell(args: &BellArgs, global: &GlobalOpts) -> Result<CmdOutput> {
    let setup = BellSetup::from_args(args, global)?;
    let functional: BellFunctional =
        build_functional(setup.kind, setup.n).map_err(|e| anyhow!("{e}"))?;
    let rho = setup.state().map_err(|e| anyhow!("{e}"))?;

    let mut free_angle: Option<f64> = None;
    let mut closed_form: Option<f64> = None;
    let mut optimizer: Value = Value::Null;

    let (value, settings) = if let Some(path) = &args.settings_file {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let settings: SettingsTable =
            serde_json::from_str(&text).context("parsing settings file")?;
        let value = evaluate(&functional, &rho, &settings).map_err(|e| anyhow!("{e}"))?;
        (value, settings)
    } else if args.optimize {
        // Seed the first restart with the reference settings when they
        // exist; a domain error (no witness angle) just means a cold
        // start.
        let init = setup
            .reference_angle()
            .ok()
            .and_then(|t| reference_settings(setup.kind, setup.n, t, setup.tau).ok());
        let opts = OptimizeOptions {
            restarts: args.restarts,
            seed: global.seed,
            ..OptimizeOptions::default()
        };
        let outcome = optimize_settings(&functional, &rho, init.as_ref(), &opts)
            .map_err(|e| anyhow!("{e}"))?;
        optimizer = json!({
            "restarts": args.restarts,
            "converged": outcome.converged,
        });
        if setup.kind == FunctionalKind::Chsh {
            let params = TwoQubitFamilyParams::new(setup.nu1, setup.zeta, setup.tau)
                .map_err(|e| anyhow!("{e}"))?;
            closed_form = Some(chsh_max_closed_form(&params).0);
        }
        (outcome.value, outcome.settings)
    } else {
        let angle = match args.free_angle.map(|t| global.angle(t)) {
            Some(t) => t,
            None => setup.reference_angle().map_err(|e| {
                anyhow!("{e}; pass --free-angle to evaluate at an explicit angle")
            })?,
        };
        let settings = reference_settings(setup.kind, setup.n, angle, setup.tau)
            .map_err(|e| anyhow!("{e}"))?;
        let value = evaluate(&functional, &rho, &settings).map_err(|e| anyhow!("{e}"))?;
        free_angle = Some(angle);
        closed_form = Some(setup.closed_form_at(angle).map_err(|e| anyhow!("{e}"))?);
        (value, settings)
    };

    let violated = functional.violated_by(value);
    let certified = if args.certify {
        let (bound, strategy) = classical_bound(&functional).map_err(|e| anyhow!("{e}"))?;
        json!({
            "enumerated_bound": bound,
            "matches_stated": (bound - functional.classical_bound()).abs() <= 1e-12,
            "strategy_index": strategy.index(),
        })
    } else {
        Value::Null
    };

    let params = json!({
        "kind": setup.kind_name,
        "n": setup.n,
        "r": if matches!(setup.kind, FunctionalKind::Composite { .. }) { json!(args.r) } else { Value::Null },
        "nu1": setup.nu1,
        "zeta": setup.zeta,
        "tau": setup.tau,
        "phi": if matches!(setup.kind, FunctionalKind::Hardy3) { json!(setup.phi) } else { Value::Null },
        "tail_coeffs": setup.tail_coeffs,
    });
    let results = json!({
        "functional": functional.name(),
        "value": value,
        "closed_form": closed_form,
        "classical_bound": functional.classical_bound(),
        "violated": violated,
        "free_angle": free_angle,
        "settings": serde_json::to_value(&settings)?,
        "optimizer": optimizer,
        "certified": certified,
    });

    let mut rows: PrettyRows = vec![
        (
            "functional".into(),
            format!("{} ({} parties)", functional.name(), setup.n),
        ),
        ("quantum value".into(), format!("{value:.9}")),
        (
            "classical bound".into(),
            format!("{:.9}", functional.classical_bound()),
        ),
        ("violated".into(), violated.to_string()),
    ];
    if let Some(cf) = closed_form {
        rows.insert(2, ("closed form".into(), format!("{cf:.9}")));
    }
    if let Some(t) = free_angle {
        rows.push(("free angle".into(), format!("{t:.9}")));
    }
    if let Value::Object(map) = &certified {
        rows.push((
            "certified bound".into(),
            format!(
                "{} (matches: {})",
                map["enumerated_bound"], map["matches_stated"]
            ),
        ));
    }

    Ok(CmdOutput {
        params,
        results,
        exit_code: 0,
        rows,
    })
}

// ---------------------------------------------------------------------------
// steering
// ---------------------------------------------------------------------------

fn cmd_steering(args: &SteeringArgs, global: &GlobalOpts) -> Result<CmdOutput> {
    let (rho, params) = if let Some(path) = &args.state_file {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let file = load_state_json(&text).map_err(|e| anyhow!("{e}"))?;
        (
            file.density_matrix(),
            json!({
                "state_file": path.display().to_string(),
                "n_qubits": file.n_qubits(),
                "purity_tol": args.purity_tol,
                "distinctness_tol": args.distinctness_tol,
            }),
        )
    } else {
        let nu1 = args
            .nu1
            .context("pass --nu1 and --zeta, or --state-file")?;
        let zeta = global.angle(args.zeta.context("--zeta is required with --nu1")?);
        let tau = global.angle(args.tau);
        let p = TwoQubitFamilyParams::new(nu1, zeta, tau).map_err(|e| anyhow!("{e}"))?;
        (
            make_rho2(&p),
            json!({
                "nu1": nu1,
                "zeta": zeta,
                "tau": tau,
                "purity_tol": args.purity_tol,
                "distinctness_tol": args.distinctness_tol,
            }),
        )
    };

    let report = mutual_steering_check(&rho, args.purity_tol, args.distinctness_tol)
        .map_err(|e| anyhow!("{e}"))?;

    let parties: Vec<Value> = report
        .party_verdicts
        .iter()
        .map(|v| {
            json!({
                "party": v.party,
                "steerable_to_pure": v.steerable_to_pure,
                "witness_direction": v.witness_direction.as_ref().map(|d| json!({
                    "theta": d.theta(),
                    "phi": d.phi(),
                })),
                "branch_probabilities": v.branch_probabilities,
                "branch_purities": v.branch_purities,
                "branch_overlap": v.branch_overlap,
            })
        })
        .collect();
    let results = json!({
        "premise_satisfied": report.premise_satisfied,
        "parties": parties,
    });

    let mut rows: PrettyRows = vec![(
        "premise satisfied".into(),
        report.premise_satisfied.to_string(),
    )];
    for v in &report.party_verdicts {
        let dir = v
            .witness_direction
            .as_ref()
            .map(|d| format!("theta={:.6} phi={:.6}", d.theta(), d.phi()))
            .unwrap_or_else(|| "-".into());
        rows.push((
            format!("party {}", v.party),
            format!(
                "steerable={} {} purities=({:.6}, {:.6}) overlap={:.6}",
                v.steerable_to_pure, dir, v.branch_purities[0], v.branch_purities[1], v.branch_overlap
            ),
        ));
    }

    Ok(CmdOutput {
        params,
        results,
        exit_code: 0,
        rows,
    })
}

// ---------------------------------------------------------------------------
// protocols
// ---------------------------------------------------------------------------

fn write_transcript(path: &Option<PathBuf>, records: &[steerlab::protocols::RunRecord]) -> Result<Option<String>> {
    match path {
        None => Ok(None),
        Some(p) => {
            std::fs::write(p, records_to_jsonl(records))
                .with_context(|| format!("writing {}", p.display()))?;
            Ok(Some(p.display().to_string()))
        }
    }
}

fn cmd_thirdman(args: &ThirdmanArgs, global: &GlobalOpts) -> Result<CmdOutput> {
    let config = ThirdManConfig {
        nu1: args.nu1,
        runs: args.runs,
        seed: global.seed,
        aux_angles: args.aux_angles.iter().map(|&a| global.angle(a)).collect(),
    };
    let out = run_third_man(&config).map_err(|e| anyhow!("{e}"))?;
    let transcript = write_transcript(&args.transcript, &out.records)?;
    let s = &out.summary;
    let rows: PrettyRows = vec![
        ("runs".into(), s.runs.to_string()),
        (
            "matched x/y/z/aux".into(),
            format!("{}/{}/{}/{}", s.x_runs, s.y_runs, s.z_runs, s.aux_runs),
        ),
        ("z agreement".into(), format!("{:.6}", s.z_agreement)),
        ("sifted length".into(), s.sifted_len.to_string()),
        (
            "QBER with labels".into(),
            format!("{:.6}", s.qber_with_labels),
        ),
        (
            "raw x QBER (expected)".into(),
            format!(
                "{:.6} ({:.6})",
                s.x_qber_without_labels, s.expected_x_qber_without_labels
            ),
        ),
        (
            "key rate with/without".into(),
            format!(
                "{:.6} / {:.6}",
                s.key_rate_with_labels, s.key_rate_without_labels
            ),
        ),
    ];
    let params = serde_json::to_value(&config)?;
    let mut results = serde_json::to_value(s)?;
    if let Value::Object(map) = &mut results {
        map.insert("transcript_path".into(), json!(transcript));
    }
    Ok(CmdOutput {
        params,
        results,
        exit_code: 0,
        rows,
    })
}

fn cmd_qca(args: &QcaArgs, global: &GlobalOpts) -> Result<CmdOutput> {
    let config = QcaConfig {
        nu1: args.nu1,
        zeta: args
            .zeta
            .map(|z| global.angle(z))
            .unwrap_or(std::f64::consts::FRAC_PI_2),
        phi: global.angle(args.phi),
        runs: args.runs,
        inspection_size: args.inspect,
        seed: global.seed,
        eve: match args.eve {
            EveArg::None => EveModel::None,
            EveArg::InterceptResend => EveModel::InterceptResend,
        },
        allow_orthogonal_tails: args.allow_orthogonal_tails,
        alpha: args.alpha,
    };
    let out = run_qca(&config).map_err(|e| anyhow!("{e}"))?;
    let transcript = write_transcript(&args.transcript, &out.records)?;
    let s = &out.summary;
    let rows: PrettyRows = vec![
        ("runs (inspected)".into(), format!("{} ({})", s.runs, s.inspected)),
        (
            "x coincidence (expected)".into(),
            format!("{:.6} ({:.6})", s.x_coincidence, s.expected_x_coincidence),
        ),
        (
            "z mismatches / tail failures".into(),
            format!("{} / {}", s.z_mismatches, s.chi_failures),
        ),
        ("p value".into(), format!("{:.3e}", s.p_value)),
        (
            "verdicts (steering, entanglement)".into(),
            format!("{}, {}", s.steering_verdict, s.entanglement_verdict),
        ),
        ("accept".into(), s.accept.to_string()),
        ("sifted key length".into(), s.sifted_key_len.to_string()),
    ];
    let params = serde_json::to_value(&config)?;
    let mut results = serde_json::to_value(s)?;
    if let Value::Object(map) = &mut results {
        map.insert("transcript_path".into(), json!(transcript));
    }
    let exit_code = if s.accept { 0 } else { 2 };
    Ok(CmdOutput {
        params,
        results,
        exit_code,
        rows,
    })
}
