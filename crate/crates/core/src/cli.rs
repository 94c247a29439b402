//! The `dirac-delay` command-line front end.
//!
//! Every subcommand reads one JSON config of the form
//! `{"a": 1.0, "potential": {"p": [...], "q": [...]}, "command": {...}}`
//! where `command` carries the options of the chosen subcommand. Results go
//! to `--out` (or stdout) as CSV or JSON.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::charfn::{asymptotic_remainder_fit, AsymptoticOptions};
use crate::domain::{function_from_specs, ComplexSpec, SegmentSpec};
use crate::error::{Error, Result};
use crate::eval::{CharEvaluator, SeriesEvaluator, SolverEvaluator};
use crate::isofamily::{
    build_family, tune_h_for_pair, verify_isospectrality, EigOptions, FamilyDocument,
    FamilyMode, IsoReport,
};
use crate::quadrature::QuadratureRule;
use crate::series::{DEFAULT_POINTS, MAX_DEPTH};
use crate::solver::{CharfnTable, Solver, SolverOptions};
use crate::spectrum::{
    ambarzumian_residual, hadamard_delta, locate_eigenvalues, locate_with_fallback,
    window_transforms,
    HadamardOptions, RootSearchOptions, Spectrum, WindowTransforms,
};
use crate::{make_delay_config, DelayConfig, PotentialPair, C64};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "dirac-delay", version, about = "Dirac-type systems with a constant delay")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Engine for characteristic function values.
    #[arg(long, global = true, value_enum, default_value_t = Engine::Solver)]
    pub engine: Engine,

    /// Solver steps per delay interval (initial level when refining).
    #[arg(long, global = true)]
    pub m: Option<usize>,

    /// Gauss–Legendre points per panel for quadratures.
    #[arg(long, global = true)]
    pub g: Option<usize>,

    /// Overrides the command's main tolerance (solver refinement for
    /// `charfn`/`trace`, Newton tolerance for `spectrum`/`ambarzumian`,
    /// the pass threshold for `iso`).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Engine {
    Solver,
    Series,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Table of Δ₁, Δ₂ on a λ grid (CSV).
    Charfn { config: PathBuf },
    /// Eigenvalues λ_{n,j}, |n| ≤ n_max (JSON).
    Spectrum { config: PathBuf },
    /// Build an iso-bispectral family and verify it (JSON report).
    Iso { config: PathBuf },
    /// Distance of both spectra from the unperturbed ones (JSON).
    Ambarzumian { config: PathBuf },
    /// Δ_j rebuilt from a spectrum file by the truncated product (CSV).
    Hadamard {
        config: PathBuf,
        /// Spectrum JSON as written by `spectrum`.
        #[arg(long)]
        spectrum: Option<PathBuf>,
    },
    /// The fundamental solution on the solver grid for one λ (CSV).
    Trace { config: PathBuf },
    /// Growth of the higher-order remainder along the imaginary axis (CSV).
    Asymptotics { config: PathBuf },
}

// ---------------------------------------------------------------------------
// config documents

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub a: f64,
    #[serde(default)]
    pub potential: Option<PotentialSpec>,
    #[serde(default)]
    pub command: Option<serde_json::Value>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    #[serde(default)]
    pub p: Vec<SegmentSpec>,
    #[serde(default)]
    pub q: Vec<SegmentSpec>,
}

/// A λ grid: `{"min", "max", "count", "im"}` or an explicit list of numbers
/// and `[re, im]` pairs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Range {
        min: f64,
        max: f64,
        count: usize,
        #[serde(default)]
        im: f64,
    },
    List(Vec<ComplexSpec>),
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<C64>> {
        match self {
            GridSpec::Range { min, max, count, im } => {
                if *count == 0 || !(min.is_finite() && max.is_finite() && im.is_finite()) {
                    return Err(Error::Config(
                        "lambda: range needs a finite min/max and count ≥ 1".into(),
                    ));
                }
                Ok((0..*count)
                    .map(|i| {
                        let t = if *count == 1 {
                            0.0
                        } else {
                            i as f64 / (*count - 1) as f64
                        };
                        C64::new(min + (max - min) * t, *im)
                    })
                    .collect())
            }
            GridSpec::List(vals) => Ok(vals.iter().map(|&v| v.into()).collect()),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CharfnCommand {
    lambda: GridSpec,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectrumCommand {
    j: u8,
    n_max: usize,
    #[serde(default)]
    search: Option<RootSearchOptions>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TuneCommand {
    h0: Vec<SegmentSpec>,
    h1: Vec<SegmentSpec>,
    theta_range: [f64; 2],
    #[serde(default)]
    ranks: (usize, usize),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IsoCommand {
    mode: FamilyMode,
    #[serde(default)]
    h: Vec<SegmentSpec>,
    #[serde(default)]
    tune: Option<TuneCommand>,
    samples: Vec<(ComplexSpec, ComplexSpec)>,
    #[serde(default = "default_iso_grid")]
    lambda: GridSpec,
    #[serde(default = "default_iso_tol")]
    tol: f64,
    #[serde(default)]
    eig: Option<EigOptions>,
    /// Writes `x, re_p, im_p, re_q, im_q` for the first sample here.
    #[serde(default)]
    potential_csv: Option<PathBuf>,
}

fn default_iso_grid() -> GridSpec {
    GridSpec::Range {
        min: -15.0,
        max: 15.0,
        count: 61,
        im: 0.0,
    }
}

fn default_iso_tol() -> f64 {
    1e-6
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AmbarzumianCommand {
    #[serde(default = "default_ambarzumian_n")]
    n_max: usize,
    #[serde(default)]
    nu: usize,
    #[serde(default = "default_window_lambda")]
    lambda: ComplexSpec,
    #[serde(default)]
    search: Option<RootSearchOptions>,
}

fn default_ambarzumian_n() -> usize {
    10
}

fn default_window_lambda() -> ComplexSpec {
    ComplexSpec::Real(1.0)
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HadamardCommand {
    lambda: GridSpec,
    #[serde(default)]
    spectrum: Option<PathBuf>,
    #[serde(default = "default_true")]
    tail_correction: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceCommand {
    lambda: ComplexSpec,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct AsymptoticsCommand {
    t_min: Option<f64>,
    t_max: Option<f64>,
    samples: Option<usize>,
}

/// A parsed config with its core objects.
pub struct Loaded {
    pub cfg: DelayConfig,
    pub potential: PotentialPair,
    pub has_potential: bool,
    command: serde_json::Value,
    base: PathBuf,
}

impl Loaded {
    fn command<T: DeserializeOwned>(&self) -> Result<T> {
        serde_json::from_value(self.command.clone())
            .map_err(|e| Error::Config(format!("command: {e}")))
    }

    /// Paths in the config are relative to the config file.
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }
}

pub fn load_config(path: &Path) -> Result<Loaded> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, path.parent().unwrap_or(Path::new(".")))
}

pub fn parse_config(text: &str, base: &Path) -> Result<Loaded> {
    let rc: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let cfg = make_delay_config(rc.a).map_err(|e| Error::Config(format!("a: {e}")))?;
    let has_potential = rc.potential.is_some();
    let spec = rc.potential.unwrap_or_default();
    let p = function_from_specs(&spec.p).map_err(|e| Error::Config(format!("potential.p: {e}")))?;
    let q = function_from_specs(&spec.q).map_err(|e| Error::Config(format!("potential.q: {e}")))?;
    let potential =
        PotentialPair::new(p, q, &cfg).map_err(|e| Error::Config(format!("potential: {e}")))?;
    Ok(Loaded {
        cfg,
        potential,
        has_potential,
        command: rc.command.unwrap_or(serde_json::Value::Object(Default::default())),
        base: base.to_path_buf(),
    })
}

// ---------------------------------------------------------------------------
// running

/// What a command produced: the bytes to write and whether something was
/// flagged numerically.
pub struct Outcome {
    pub output: Vec<u8>,
    pub flagged: bool,
    pub warnings: Vec<String>,
}

impl Outcome {
    fn clean(output: Vec<u8>) -> Self {
        Self {
            output,
            flagged: false,
            warnings: Vec::new(),
        }
    }
}

fn solver_options(cli: &Cli) -> SolverOptions {
    let mut o = SolverOptions::default();
    if let Some(m) = cli.m {
        o.m = m;
        o.max_m = o.max_m.max(m);
    }
    o
}

fn points(cli: &Cli) -> usize {
    cli.g.unwrap_or(DEFAULT_POINTS)
}

fn evaluator(cli: &Cli, loaded: &Loaded, opts: SolverOptions) -> Result<Box<dyn CharEvaluator>> {
    Ok(match cli.engine {
        Engine::Solver => Box::new(SolverEvaluator::new(&loaded.potential, &loaded.cfg, opts)?),
        Engine::Series => Box::new(SeriesEvaluator::new(
            &loaded.potential,
            &loaded.cfg,
            MAX_DEPTH,
            points(cli),
        )?),
    })
}

fn search_options(cli: &Cli, given: Option<RootSearchOptions>) -> RootSearchOptions {
    let mut o = given.unwrap_or_default();
    if let Some(t) = cli.tol {
        o.newton_tol = t;
    }
    o
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub fn cmd_charfn(cli: &Cli, loaded: &Loaded) -> Result<Outcome> {
    let cmd: CharfnCommand = loaded.command()?;
    let grid = cmd.lambda.points()?;
    let mut opts = solver_options(cli);
    if let Some(t) = cli.tol {
        opts.refine_tol = t;
    }
    let table = match cli.engine {
        Engine::Solver => Solver::new(&loaded.potential, &loaded.cfg, opts)?.table(&grid)?,
        Engine::Series => {
            let ev = evaluator(cli, loaded, opts)?;
            let vals = grid
                .iter()
                .map(|&l| ev.eval(l))
                .collect::<Result<Vec<_>>>()?;
            CharfnTable {
                lambda_grid: grid,
                delta1: vals.iter().map(|v| v.0).collect(),
                delta2: vals.iter().map(|v| v.1).collect(),
            }
        }
    };
    let mut out = Vec::new();
    table.write_csv(&mut out)?;
    Ok(Outcome::clean(out))
}

pub fn cmd_spectrum(cli: &Cli, loaded: &Loaded) -> Result<Outcome> {
    let cmd: SpectrumCommand = loaded.command()?;
    let ev = evaluator(cli, loaded, solver_options(cli))?;
    let spec = locate_eigenvalues(ev.as_ref(), cmd.j, cmd.n_max, &search_options(cli, cmd.search))?;
    Ok(Outcome {
        output: json_bytes(&spec)?,
        flagged: !spec.is_clean(),
        warnings: Vec::new(),
    })
}

#[derive(Serialize)]
struct IsoOutput {
    family: FamilyDocument,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scale: Option<f64>,
    report: IsoReport,
}

pub fn cmd_iso(cli: &Cli, loaded: &Loaded) -> Result<Outcome> {
    let cmd: IsoCommand = loaded.command()?;
    let cfg = &loaded.cfg;
    let mut eig = cmd.eig.unwrap_or_default();
    if let Some(m) = cli.m {
        eig.m = m;
    }
    let (h, tuned) = match &cmd.tune {
        Some(t) => {
            let h0 = function_from_specs(&t.h0)?;
            let h1 = function_from_specs(&t.h1)?;
            let k = tune_h_for_pair(cfg, &h0, &h1, (t.theta_range[0], t.theta_range[1]), t.ranks, &eig)?;
            (k.h.clone(), Some(k))
        }
        None => (function_from_specs(&cmd.h)?, None),
    };
    if cmd.samples.is_empty() {
        return Err(Error::Config("command.samples: need at least one (α, β)".into()));
    }
    let params: Vec<(C64, C64)> = cmd
        .samples
        .iter()
        .map(|&(x, y)| (x.into(), y.into()))
        .collect();
    let (alpha, beta) = params[0];
    let (family, first) = build_family(cfg, &h, cmd.mode, alpha, beta, &eig)?;
    let tol = cli.tol.unwrap_or(cmd.tol);
    let grid = cmd.lambda.points()?;
    let report = verify_isospectrality(&family, &params, &grid, tol, solver_options(cli))?;
    if let Some(path) = &cmd.potential_csv {
        let file = fs::File::create(loaded.resolve(path))?;
        write_potential_csv(&first, file)?;
    }
    let out = IsoOutput {
        family: family.to_document(),
        theta: tuned.as_ref().map(|k| k.theta),
        scale: tuned.as_ref().map(|k| k.scale),
        report,
    };
    Ok(Outcome::clean(json_bytes(&out)?))
}

/// `x, re_p, im_p, re_q, im_q` on 401 points of `[0, π]`.
pub fn write_potential_csv<W: Write>(pp: &PotentialPair, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "re_p", "im_p", "re_q", "im_q"])?;
    for i in 0..=400 {
        let x = std::f64::consts::PI * i as f64 / 400.0;
        let (p, q) = pp.eval(x)?;
        w.write_record(&[
            x.to_string(),
            p.re.to_string(),
            p.im.to_string(),
            q.re.to_string(),
            q.im.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct AmbarzumianEntry {
    j: u8,
    residual: Option<f64>,
    baseline_residual: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    flagged: Vec<i64>,
}

#[derive(Serialize)]
struct AmbarzumianOutput {
    a: f64,
    n_max: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    warning: Option<String>,
    spectra: Vec<AmbarzumianEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    window: Option<WindowTransforms>,
    #[serde(skip_serializing_if = "Option::is_none")]
    window_error: Option<String>,
}

/// Upper end of the delay range where the uniqueness statement applies.
pub const AMBARZUMIAN_DELAY_LIMIT: f64 = 2.0 * std::f64::consts::PI / 5.0;

pub fn cmd_ambarzumian(cli: &Cli, loaded: &Loaded) -> Result<Outcome> {
    let cmd: AmbarzumianCommand = loaded.command()?;
    let a = loaded.cfg.a();
    let warning = (a >= AMBARZUMIAN_DELAY_LIMIT).then(|| {
        format!("a = {a} is outside (0, 2π/5); the uniqueness statement does not cover it")
    });
    let search = search_options(cli, cmd.search);
    let ev = evaluator(cli, loaded, solver_options(cli))?;
    let zero = SolverEvaluator::new(&PotentialPair::zero(), &loaded.cfg, solver_options(cli))?;
    let mut spectra = Vec::new();
    let mut flagged = false;
    for j in [1u8, 2] {
        let spec = locate_with_fallback(ev.as_ref(), j, cmd.n_max, &search)?;
        let base = locate_with_fallback(&zero, j, cmd.n_max, &search)?;
        let residual = ambarzumian_residual(&spec).ok();
        flagged |= residual.is_none();
        spectra.push(AmbarzumianEntry {
            j,
            residual,
            baseline_residual: ambarzumian_residual(&base).ok(),
            flagged: spec.flagged(),
        });
    }
    let rule = QuadratureRule::gauss_legendre(points(cli))?;
    let (window, window_error) =
        match window_transforms(&loaded.potential, &loaded.cfg, cmd.nu, cmd.lambda.into(), &rule) {
            Ok(w) => (Some(w), None),
            Err(e) => (None, Some(e.to_string())),
        };
    let out = AmbarzumianOutput {
        a,
        n_max: cmd.n_max,
        warning: warning.clone(),
        spectra,
        window,
        window_error,
    };
    Ok(Outcome {
        output: json_bytes(&out)?,
        flagged,
        warnings: warning.into_iter().collect(),
    })
}

pub fn cmd_hadamard(cli: &Cli, loaded: &Loaded, spectrum: Option<&Path>) -> Result<Outcome> {
    let cmd: HadamardCommand = loaded.command()?;
    let path = match (spectrum, &cmd.spectrum) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => loaded.resolve(p),
        (None, None) => {
            return Err(Error::Config(
                "hadamard needs --spectrum or command.spectrum".into(),
            ))
        }
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let spec = Spectrum::from_json(&text)?;
    if !spec.is_clean() {
        return Err(Error::FlaggedSpectrum(spec.flagged()));
    }
    let grid = cmd.lambda.points()?;
    if grid.iter().any(|l| l.im != 0.0) {
        return Err(Error::Config("command.lambda: hadamard takes real λ only".into()));
    }
    let opts = HadamardOptions {
        tail_correction: cmd.tail_correction,
    };
    let direct = if loaded.has_potential {
        Some(evaluator(cli, loaded, solver_options(cli))?)
    } else {
        None
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    if direct.is_some() {
        w.write_record(["lambda", "re_reconstructed", "re_direct", "abs_error"])?;
    } else {
        w.write_record(["lambda", "re_reconstructed"])?;
    }
    for &l in &grid {
        let recon = hadamard_delta(&spec, l, &opts)?;
        match &direct {
            Some(ev) => {
                let d = ev.component(spec.j, l)?;
                w.write_record(&[
                    l.re.to_string(),
                    recon.re.to_string(),
                    d.re.to_string(),
                    (recon - d).norm().to_string(),
                ])?;
            }
            None => w.write_record(&[l.re.to_string(), recon.re.to_string()])?,
        }
    }
    let out = w
        .into_inner()
        .map_err(|e| Error::Io(io::Error::other(e.to_string())))?;
    Ok(Outcome::clean(out))
}

pub fn cmd_trace(cli: &Cli, loaded: &Loaded) -> Result<Outcome> {
    let cmd: TraceCommand = loaded.command()?;
    let solver = Solver::new(&loaded.potential, &loaded.cfg, solver_options(cli))?;
    let trace = solver.trace(cmd.lambda.into())?;
    let mut out = Vec::new();
    trace.write_csv(&mut out)?;
    Ok(Outcome::clean(out))
}

pub fn cmd_asymptotics(cli: &Cli, loaded: &Loaded) -> Result<Outcome> {
    let cmd: AsymptoticsCommand = loaded.command()?;
    let d = AsymptoticOptions::default();
    let opts = AsymptoticOptions {
        t_min: cmd.t_min.unwrap_or(d.t_min),
        t_max: cmd.t_max.unwrap_or(d.t_max),
        samples: cmd.samples.unwrap_or(d.samples),
        solver: solver_options(cli),
    };
    let fit = asymptotic_remainder_fit(&loaded.potential, &loaded.cfg, &opts)?;
    let mut out = Vec::new();
    fit.write_csv(&mut out)?;
    let note = match fit.fitted_slope {
        Some(s) => format!(
            "fitted slope {s:.4}, bound π − 2a = {:.4}",
            fit.target_slope
        ),
        None => "remainder vanishes identically along the ray".to_string(),
    };
    Ok(Outcome {
        output: out,
        flagged: false,
        warnings: vec![note],
    })
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    let config = match &cli.command {
        Command::Charfn { config }
        | Command::Spectrum { config }
        | Command::Iso { config }
        | Command::Ambarzumian { config }
        | Command::Hadamard { config, .. }
        | Command::Trace { config }
        | Command::Asymptotics { config } => config,
    };
    let loaded = load_config(config)?;
    if cli.engine == Engine::Series && matches!(cli.command, Command::Trace { .. }) {
        return Err(Error::Config("trace is only available from the solver".into()));
    }
    match &cli.command {
        Command::Charfn { .. } => cmd_charfn(cli, &loaded),
        Command::Spectrum { .. } => cmd_spectrum(cli, &loaded),
        Command::Iso { .. } => cmd_iso(cli, &loaded),
        Command::Ambarzumian { .. } => cmd_ambarzumian(cli, &loaded),
        Command::Hadamard { spectrum, .. } => cmd_hadamard(cli, &loaded, spectrum.as_deref()),
        Command::Trace { .. } => cmd_trace(cli, &loaded),
        Command::Asymptotics { .. } => cmd_asymptotics(cli, &loaded),
    }
}

/// Exit status for an error: numerical flags get 2, everything else 1.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::FlaggedSpectrum(_) | Error::NonFinite { .. } | Error::NotFound(_) => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            let written = match &cli.out {
                Some(path) => fs::write(path, &outcome.output),
                None => io::stdout().write_all(&outcome.output),
            };
            if let Err(e) = written {
                eprintln!("error: cannot write output: {e}");
                return EXIT_USAGE;
            }
            if outcome.flagged {
                eprintln!("flagged: some entries could not be resolved");
                EXIT_NUMERICAL
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
