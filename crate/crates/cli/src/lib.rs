//! `tnswac` command-line interface.
//!
//! Exit status: 0 success, 2 argument error, 3 input-schema error,
//! 4 confidence-set budget exceeded, 1 any other failure (I/O).

pub mod input;
mod output;

use std::ffi::OsString;
use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use tnswac::confidence::{
    confidence_set, ConfsetOptions, ExclusionRule, DEFAULT_BUDGET, DEFAULT_MEMBER_CAP,
};
use tnswac::procedures::DecisionReport;
use tnswac::simulation::{pvalue_scatter, run_study, scenario, SCENARIOS};
use tnswac::study_model::{comparison_tables, compute_pvalues};
use tnswac::{Level, Method2Variant, PValueSet, Procedure};

use input::AnalysisInput;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Schema { field: String, message: String },
    Budget(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Schema { .. } => 3,
            CliError::Budget(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Budget(m) | CliError::Io(m) => f.write_str(m),
            CliError::Schema { field, message } => write!(f, "input field `{field}`: {message}"),
        }
    }
}

fn usage(flag: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{flag}: {message}"))
}

#[derive(Debug, Parser)]
#[command(
    name = "tnswac",
    version,
    about = "Inference for test-negative studies with added controls"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// P-values and decisions of every procedure for one study.
    Analyze(AnalyzeArgs),
    /// Confidence set for the attributable effects.
    Confset(ConfsetArgs),
    /// Monte Carlo error rates, power and p-value dependence.
    Simulate(SimulateArgs),
    /// Simulated p-value triples for plotting.
    Scatter(ScatterArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProcedureArg {
    Standard,
    Method1,
    Method2,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    StrictLambda,
    ExampleConsistent,
}

impl From<VariantArg> for Method2Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::StrictLambda => Method2Variant::StrictLambda,
            VariantArg::ExampleConsistent => Method2Variant::ExampleConsistent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Tsv,
    Csv,
}

#[derive(Debug, Args)]
struct Common {
    /// Familywise significance level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Procedure(s) to run; `all` includes both method 2 variants unless
    /// `--variant` is given.
    #[arg(long, value_enum, default_value_t = ProcedureArg::All)]
    procedure: ProcedureArg,
    /// Method 2 step-3 level [default: example-consistent].
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Output file, written atomically; standard output if omitted.
    #[arg(long)]
    output: Option<String>,
}

impl Common {
    fn level(&self) -> Result<Level, CliError> {
        Level::new(self.alpha).map_err(|_| {
            usage(
                "--alpha",
                format!("must lie strictly between 0 and 1, got {}", self.alpha),
            )
        })
    }

    fn procedures(&self) -> Result<Vec<Procedure>, CliError> {
        let m2 = |v: Option<VariantArg>| {
            Procedure::Method2(v.map_or(Method2Variant::default(), Into::into))
        };
        let list = match self.procedure {
            ProcedureArg::Standard => vec![Procedure::Standard],
            ProcedureArg::Method1 => vec![Procedure::Method1],
            ProcedureArg::Method2 => vec![m2(self.variant)],
            ProcedureArg::All => match self.variant {
                Some(v) => vec![Procedure::Standard, Procedure::Method1, m2(Some(v))],
                None => Procedure::ALL.to_vec(),
            },
        };
        if self.variant.is_some() && !list.iter().any(|p| p.variant().is_some()) {
            return Err(usage("--variant", "only applies to method2"));
        }
        Ok(list)
    }
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Counts (JSON object or one-row CSV) or a p-value triple
    /// `{"p_i":…,"p_ii":…,"p_iii":…}`; a path, inline JSON, or `-`.
    #[arg(long)]
    input: String,
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Args)]
struct ConfsetArgs {
    /// Counts as a JSON object or one-row CSV; a path, inline JSON, or `-`.
    #[arg(long)]
    input: String,
    #[command(flatten)]
    common: Common,
    /// Lattice step in net-count units.
    #[arg(long, default_value_t = 1)]
    stride: u64,
    /// Maximum number of lattice points.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    /// `json` for the summary, `csv` for the member list.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Also write members as CSV to this path.
    #[arg(long)]
    members_out: Option<String>,
    /// Maximum number of members kept for output.
    #[arg(long, default_value_t = DEFAULT_MEMBER_CAP)]
    member_cap: usize,
    /// Exclude a point when any comparison rejects (extension; the default
    /// excludes only when all three reject).
    #[arg(long)]
    any_rejection: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, default_value = "fig1-null")]
    scenario: String,
    /// Number of simulated studies [default: the scenario's].
    #[arg(long)]
    replicates: Option<u64>,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Args)]
struct ScatterArgs {
    #[arg(long, default_value = "fig1-null")]
    scenario: String,
    #[arg(long)]
    replicates: Option<u64>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    output: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

fn require_format(format: Format, allowed: &[Format]) -> Result<(), CliError> {
    if allowed.contains(&format) {
        Ok(())
    } else {
        let names: Vec<String> = allowed
            .iter()
            .map(|f| format!("{f:?}").to_lowercase())
            .collect();
        Err(usage(
            "--format",
            format!("must be one of {} for this command", names.join(", ")),
        ))
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn analyze(args: &AnalyzeArgs) -> Result<String, CliError> {
    require_format(args.format, &[Format::Json, Format::Tsv])?;
    let alpha = args.common.level()?;
    let procedures = args.common.procedures()?;
    let p: PValueSet = match input::parse_analysis_input(&input::read_source(&args.input)?)? {
        AnalysisInput::Counts(c) => compute_pvalues(&comparison_tables(&c)),
        AnalysisInput::PValues(p) => p,
    };
    let reports: Vec<DecisionReport> = procedures
        .iter()
        .map(|pr| pr.apply(&p, alpha).report(&p))
        .collect();
    if args.format == Format::Json {
        return Ok(json(&reports));
    }
    let mut out = String::from("procedure\tvariant\thypothesis\tp_value\treject\n");
    for r in &reports {
        let variant = r.variant.map_or("", |v| v.as_str());
        let mut rows = vec![
            ("i", r.p.p_i, r.reject.i),
            ("ii", r.p.p_ii, r.reject.ii),
            ("iii", r.p.p_iii, r.reject.iii),
        ];
        if let Some(u) = r.reject.union_i_iii {
            rows.push(("union_i_iii", r.p.p_i_and_iii, u));
        }
        for (hyp, pv, rej) in rows {
            out.push_str(&format!(
                "{}\t{variant}\t{hyp}\t{pv}\t{rej}\n",
                r.procedure.as_str()
            ));
        }
    }
    Ok(out)
}

fn members_csv(members: &[tnswac::NetEffectCounts]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["A_PN", "A_PC", "A_NC"])
        .expect("in-memory write");
    for m in members {
        w.serialize((m.a_pn, m.a_pc, m.a_nc))
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII output")
}

fn confset(args: &ConfsetArgs) -> Result<String, CliError> {
    require_format(args.format, &[Format::Json, Format::Csv])?;
    if args.stride == 0 {
        return Err(usage("--stride", "must be at least 1"));
    }
    let alpha = args.common.level()?;
    let procedures = args.common.procedures()?;
    let wants_members = args.format == Format::Csv || args.members_out.is_some();
    if wants_members && procedures.len() != 1 {
        return Err(usage(
            "--procedure",
            "member output needs a single procedure (and variant)",
        ));
    }
    let counts = input::parse_counts(&input::read_source(&args.input)?)?;

    let mut reports = Vec::new();
    for &procedure in &procedures {
        let mut opts = ConfsetOptions::new(alpha, procedure);
        opts.stride = args.stride;
        opts.budget = args.budget;
        opts.emit_members = wants_members;
        opts.member_cap = args.member_cap;
        opts.rule = if args.any_rejection {
            ExclusionRule::AnyReject
        } else {
            ExclusionRule::AllReject
        };
        let set = confidence_set(&counts, &opts).map_err(|e| match e {
            tnswac::Error::Budget { .. } => CliError::Budget(format!("--budget: {e}")),
            other => usage("--stride", other),
        })?;
        if args.format == Format::Csv {
            return Ok(members_csv(set.members.as_deref().unwrap_or_default()));
        }
        let mut report = set.report();
        if let Some(path) = &args.members_out {
            output::write_atomic(
                path,
                &members_csv(set.members.as_deref().unwrap_or_default()),
            )
            .map_err(|e| CliError::Io(format!("--members-out: {e}")))?;
            report.members_file = Some(path.clone());
        }
        reports.push(report);
    }
    Ok(json(&reports))
}

fn scenario_config(
    name: &str,
    seed: u64,
    replicates: Option<u64>,
) -> Result<tnswac::simulation::SimulationConfig, CliError> {
    let mut config = scenario(name, seed).map_err(|_| {
        usage(
            "--scenario",
            format!(
                "unknown scenario `{name}`; expected one of {}",
                SCENARIOS.join(", ")
            ),
        )
    })?;
    if let Some(r) = replicates {
        config.replicates = r;
    }
    Ok(config)
}

fn simulate(args: &SimulateArgs) -> Result<String, CliError> {
    require_format(args.format, &[Format::Json, Format::Tsv])?;
    let mut config = scenario_config(&args.scenario, args.seed, args.replicates)?;
    if config.replicates == 0 {
        return Err(usage("--replicates", "must be at least 1"));
    }
    config.alpha = args.common.level()?;
    config.procedures = args.common.procedures()?;
    let summary = run_study(&config, config.truth_labels()).map_err(|e| usage("--scenario", e))?;
    Ok(match args.format {
        Format::Tsv => summary.to_tsv(),
        _ => json(&summary),
    })
}

fn scatter(args: &ScatterArgs) -> Result<String, CliError> {
    require_format(args.format, &[Format::Csv])?;
    let config = scenario_config(&args.scenario, args.seed, args.replicates)?;
    let mut out = String::from("replicate,p_i,p_ii,p_iii\n");
    for (i, p) in pvalue_scatter(&config, config.replicates) {
        out.push_str(&format!("{i},{},{},{}\n", p.p_i, p.p_ii, p.p_iii));
    }
    Ok(out)
}

fn dispatch(command: &Command) -> Result<(String, Option<&str>), CliError> {
    Ok(match command {
        Command::Analyze(a) => (analyze(a)?, a.common.output.as_deref()),
        Command::Confset(a) => (confset(a)?, a.common.output.as_deref()),
        Command::Simulate(a) => (simulate(a)?, a.common.output.as_deref()),
        Command::Scatter(a) => (scatter(a)?, a.output.as_deref()),
    })
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit status. Results go to `--output` or `stdout`; diagnostics to
/// `stderr`.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let result = dispatch(&cli.command).and_then(|(text, path)| match path {
        Some(p) => {
            output::write_atomic(p, &text).map_err(|e| CliError::Io(format!("--output: {e}")))
        }
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
