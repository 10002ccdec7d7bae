//! The `cxd` command line.
//!
//! Exit codes: 0 success, 2 invalid input, 3 planning infeasible, 4 backend
//! unavailable or failing.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::analysis::analyze;
use crate::backends::{
    build_retouch_request, DenoiserBackend, HttpClient, MockDenoiser, PlannerBackend, RecordingPlanner,
    RemoteDenoiser, RemotePlanner, RetouchClient, ScriptedPlanner, TemplatePlanner,
};
use crate::composer::{run_sampling, LatentGrid, LatentShape, ModulationParams};
use crate::config::{Config, ConfigError, DENOISER_URL_VAR, PLANNER_URL_VAR, RETOUCH_URL_VAR};
use crate::error::{AnalysisError, BackendError, ComposeError, LexiconError, PlanError};
use crate::lexicon::Lexicon;
use crate::planner::{build_plan, CompositionPlan};
use crate::svg::render_layout;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_BACKEND: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "cxd", version, about = "Complex scene planning and painting pipeline")]
pub struct Cli {
    /// Config file (default: ./cxd.toml when present).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Lexicon file overriding the configured one.
    #[arg(long, global = true)]
    pub lexicon: Option<PathBuf>,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the complexity report of a prompt.
    Analyze { prompt: String },
    /// Build a composition plan.
    Plan(PlanArgs),
    /// Run the sampler on a plan file and write the final latent.
    Paint(PaintArgs),
    /// Plan, paint, decode and retouch in one go.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlannerKind {
    Template,
    Scripted,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DenoiserKind {
    Mock,
    Remote,
}

#[derive(Debug, Args)]
pub struct PlannerArgs {
    #[arg(long, value_enum, default_value = "template")]
    pub planner: PlannerKind,
    /// Reply directory for the scripted planner.
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    /// Store every planner exchange in this directory as scripted fixtures.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// With the scripted planner, answer requests that have no fixture with
    /// the template planner.
    #[arg(long)]
    pub fallback: bool,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    pub prompt: String,
    #[command(flatten)]
    pub planner: PlannerArgs,
    /// Plan JSON destination (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also render the layout as SVG.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct ModulationFlags {
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lambda_pos: Option<f64>,
    #[arg(long)]
    pub lambda_neg: Option<f64>,
    #[arg(long)]
    pub omega: Option<f64>,
    /// Latent height in cells.
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub channels: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PaintArgs {
    pub plan: PathBuf,
    #[arg(long, value_enum, default_value = "mock")]
    pub denoiser: DenoiserKind,
    #[command(flatten)]
    pub modulation: ModulationFlags,
    /// Latent dump destination.
    #[arg(long, default_value = "latent.cxdl")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    pub prompt: String,
    #[command(flatten)]
    pub planner: PlannerArgs,
    #[arg(long, value_enum, default_value = "remote")]
    pub denoiser: DenoiserKind,
    #[command(flatten)]
    pub modulation: ModulationFlags,
    /// Stop after painting (and decoding, with a remote denoiser).
    #[arg(long)]
    pub skip_retouch: bool,
    /// Also write the final latent here.
    #[arg(long)]
    pub latent_out: Option<PathBuf>,
    /// Directory for plan.json and retouch_request.json.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> CliError {
        CliError { code: EXIT_INPUT, message: message.into() }
    }

    pub fn backend(message: impl Into<String>) -> CliError {
        CliError { code: EXIT_BACKEND, message: message.into() }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<LexiconError> for CliError {
    fn from(e: LexiconError) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<BackendError> for CliError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::MissingImage => CliError::input(e.to_string()),
            _ => CliError::backend(e.to_string()),
        }
    }
}

impl From<PlanError> for CliError {
    fn from(e: PlanError) -> Self {
        let code = match &e {
            PlanError::Analysis(_) | PlanError::InvalidPlan(_) => EXIT_INPUT,
            PlanError::LayoutInfeasible(_) | PlanError::UnsatisfiableBudget { .. } => EXIT_INFEASIBLE,
            PlanError::BackendFailure(_) => EXIT_BACKEND,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<ComposeError> for CliError {
    fn from(e: ComposeError) -> Self {
        match e {
            ComposeError::BackendFailure(b) => b.into(),
            other => CliError::input(other.to_string()),
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(|e| CliError::input(format!("stdout: {e}")))
}

fn emit_json(out: &mut dyn Write, value: &serde_json::Value) -> Result<(), CliError> {
    emit(out, &(serde_json::to_string_pretty(value).expect("json values serialize") + "\n"))
}

struct Context {
    config: Config,
    lexicon: Lexicon,
}

impl Context {
    fn load(cli: &Cli) -> Result<Context, CliError> {
        let config = Config::discover(cli.config.as_deref())?;
        let lexicon = match &cli.lexicon {
            Some(p) => Lexicon::from_file(p)?,
            None => config.lexicon()?,
        };
        Ok(Context { config, lexicon })
    }

    fn http(&self) -> Result<HttpClient, CliError> {
        Ok(HttpClient::new(self.config.backends.timeout())?.with_bearer(self.config.backends.token.clone()))
    }

    fn url(&self, value: &Option<String>, var: &str, role: &str) -> Result<String, CliError> {
        value.clone().ok_or_else(|| {
            CliError::backend(format!("no {role} endpoint configured; set {var} or [backends] in cxd.toml"))
        })
    }

    fn planner(&self, args: &PlannerArgs) -> Result<Box<dyn PlannerBackend>, CliError> {
        Ok(match args.planner {
            PlannerKind::Template => Box::new(TemplatePlanner),
            PlannerKind::Scripted => {
                let dir = args
                    .fixtures
                    .as_ref()
                    .ok_or_else(|| CliError::input("--planner scripted needs --fixtures DIR"))?;
                let scripted = ScriptedPlanner::new(dir);
                Box::new(if args.fallback {
                    scripted.with_fallback(Box::new(TemplatePlanner))
                } else {
                    scripted
                })
            }
            PlannerKind::Remote => {
                let url = self.url(&self.config.backends.planner_url, PLANNER_URL_VAR, "planner")?;
                Box::new(RemotePlanner::new(self.http()?, &url))
            }
        })
    }

    fn denoiser(&self, kind: DenoiserKind) -> Result<Denoiser, CliError> {
        Ok(match kind {
            DenoiserKind::Mock => Denoiser::Mock(MockDenoiser),
            DenoiserKind::Remote => {
                let url = self.url(&self.config.backends.denoiser_url, DENOISER_URL_VAR, "denoiser")?;
                Denoiser::Remote(RemoteDenoiser::new(self.http()?, &url))
            }
        })
    }

    fn modulation(&self, flags: &ModulationFlags) -> Result<(ModulationParams, LatentShape), CliError> {
        let m = &self.config.modulation;
        let params = ModulationParams {
            lambda_pos: flags.lambda_pos.unwrap_or(m.params.lambda_pos),
            lambda_neg: flags.lambda_neg.unwrap_or(m.params.lambda_neg),
            omega: flags.omega.unwrap_or(m.params.omega),
            steps: flags.steps.unwrap_or(m.params.steps),
            seed: flags.seed.unwrap_or(m.params.seed),
        };
        let (params, warnings) = params.validated()?;
        for w in warnings {
            eprintln!("warning: {w}");
        }
        let shape = LatentShape::new(
            flags.height.unwrap_or(m.height),
            flags.width.unwrap_or(m.width),
            flags.channels.unwrap_or(m.channels),
        );
        if shape.is_empty() {
            return Err(CliError::input(format!("latent shape {shape} is empty")));
        }
        Ok((params, shape))
    }

    fn plan(&self, prompt: &str, args: &PlannerArgs) -> Result<CompositionPlan, CliError> {
        let planner = self.planner(args)?;
        let config = self.config.planner_config();
        let plan = match &args.record {
            Some(dir) => {
                build_plan(prompt, &RecordingPlanner::new(planner.as_ref(), dir), &self.lexicon, &config)?
            }
            None => build_plan(prompt, planner.as_ref(), &self.lexicon, &config)?,
        };
        for w in &plan.warnings {
            log::warn!("{w}");
        }
        Ok(plan)
    }
}

enum Denoiser {
    Mock(MockDenoiser),
    Remote(RemoteDenoiser),
}

impl Denoiser {
    fn backend(&self) -> &dyn DenoiserBackend {
        match self {
            Denoiser::Mock(m) => m,
            Denoiser::Remote(r) => r,
        }
    }
}

fn paint_summary(z: &LatentGrid, params: &ModulationParams, out: Option<&Path>) -> serde_json::Value {
    let s = z.shape();
    json!({
        "checksum": z.checksum(),
        "shape": [s.height, s.width, s.channels],
        "steps": params.steps,
        "seed": params.seed,
        "out": out.map(|p| p.display().to_string()),
    })
}

fn cmd_analyze(ctx: &Context, prompt: &str, out: &mut dyn Write) -> Result<(), CliError> {
    let analysis = analyze(prompt, &ctx.lexicon, &ctx.config.planner_config().thresholds)?;
    emit(out, &(analysis.report.to_json() + "\n"))
}

fn cmd_plan(ctx: &Context, args: &PlanArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let plan = ctx.plan(&args.prompt, &args.planner)?;
    let json = plan.to_json();
    if let Some(svg) = &args.svg {
        write_file(svg, render_layout(&plan).as_bytes())?;
    }
    match &args.out {
        Some(path) => write_file(path, json.as_bytes()),
        None => emit(out, &json),
    }
}

fn read_plan(path: &Path) -> Result<CompositionPlan, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(CompositionPlan::from_json(&text)?)
}

fn cmd_paint(ctx: &Context, args: &PaintArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (params, shape) = ctx.modulation(&args.modulation)?;
    let plan = read_plan(&args.plan)?;
    let denoiser = ctx.denoiser(args.denoiser)?;
    let z = run_sampling(&plan, &params, shape, denoiser.backend())?;
    write_file(&args.out, &z.to_bytes())?;
    emit_json(out, &paint_summary(&z, &params, Some(&args.out)))
}

fn cmd_generate(ctx: &Context, args: &GenerateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (params, shape) = ctx.modulation(&args.modulation)?;
    // fail fast, before any planning, when the pipeline cannot finish
    let retouch = if args.skip_retouch {
        None
    } else {
        if args.denoiser != DenoiserKind::Remote {
            return Err(CliError::backend(
                "retouching needs a decoded image; use --denoiser remote or --skip-retouch",
            ));
        }
        let url = ctx.url(&ctx.config.backends.retouch_url, RETOUCH_URL_VAR, "retouch")?;
        Some(RetouchClient::new(ctx.http()?, &url))
    };
    let denoiser = ctx.denoiser(args.denoiser)?;

    let plan = ctx.plan(&args.prompt, &args.planner)?;
    if let Some(dir) = &args.out_dir {
        write_file(&dir.join("plan.json"), plan.to_json().as_bytes())?;
    }
    let z = run_sampling(&plan, &params, shape, denoiser.backend())?;
    if let Some(path) = &args.latent_out {
        write_file(path, &z.to_bytes())?;
    }
    let Denoiser::Remote(remote) = &denoiser else {
        return emit_json(out, &paint_summary(&z, &params, args.latent_out.as_deref()));
    };
    let decoded = remote.decode(&z)?;
    let Some(retouch) = retouch else {
        return emit_json(out, &json!({ "checksum": z.checksum(), "image_ref": decoded }));
    };
    let request = build_retouch_request(&plan, &decoded)?;
    if let Some(dir) = &args.out_dir {
        let body = serde_json::to_string_pretty(&request).expect("requests serialize") + "\n";
        write_file(&dir.join("retouch_request.json"), body.as_bytes())?;
    }
    let image_ref = retouch.retouch(&request)?;
    emit_json(
        out,
        &json!({
            "checksum": z.checksum(),
            "decoded_ref": decoded,
            "image_ref": image_ref,
            "retouch_request": request,
        }),
    )
}

/// Runs a parsed command line, writing machine output to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let ctx = Context::load(cli)?;
    match &cli.command {
        Command::Analyze { prompt } => cmd_analyze(&ctx, prompt, out),
        Command::Plan(args) => cmd_plan(&ctx, args, out),
        Command::Paint(args) => cmd_paint(&ctx, args, out),
        Command::Generate(args) => cmd_generate(&ctx, args, out),
    }
}

/// Process entry point; returns the exit code.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let stdout = std::io::stdout();
    match run(&cli, &mut stdout.lock()) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
