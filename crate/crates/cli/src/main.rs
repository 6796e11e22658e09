//! `ginibre-evt`: limit laws, rates, simulations and verification suites from the command line.

mod output;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use ginibre_evt::empirics::kolmogorov_distance;
use ginibre_evt::limits::{cdf, sup_distance};
use ginibre_evt::rates::{be_rate, transition_rate, w1_rate, TransitionSide};
use ginibre_evt::sampler::{exact_cdf_k1, sample_xn_with, sidecar_path, SamplerConfig, DEFAULT_DRAW_BUDGET};
use ginibre_evt::scaling::constants_for;
use ginibre_evt::{Ecdf, Ensemble, GridPolicy, LimitLaw, RegimeDecl};

use output::{emit, g17, write_config, write_gnuplot, Table};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
    Io(String),
    Acceptance(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) | CliError::Io(_) => 2,
            CliError::Acceptance(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o failure: {m}"),
            CliError::Acceptance(m) => write!(f, "acceptance failure: {m}"),
        }
    }
}

impl From<ginibre_evt::Error> for CliError {
    fn from(e: ginibre_evt::Error) -> Self {
        use ginibre_evt::Error as E;
        match e {
            E::Budget { requested, budget } => {
                CliError::Usage(format!("refusing to run: {requested} draws requested, budget is {budget}"))
            }
            E::Domain(_) | E::NotApplicable(_) => CliError::Usage(e.to_string()),
            E::Numerical(_) => CliError::Numerical(e.to_string()),
            E::Io(_) | E::Json(_) => CliError::Io(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser, Serialize)]
#[command(name = "ginibre-evt", version, about = "Extreme eigenvalues of products of complex Ginibre matrices")]
struct Cli {
    /// Worker threads (default: logical cores). Never changes results.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write a gnuplot script next to a CSV output.
    #[arg(long, global = true)]
    gnuplot: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum Command {
    /// CDF of a limit law: CSV `x,cdf,tail_bound`.
    LimitCdf(LimitCdfArgs),
    /// Theoretical Berry-Esseen and/or W1 rate: JSON.
    Rate(RateArgs),
    /// Draw X_n samples: CSV plus JSON sidecar, optionally a distance summary.
    Simulate(SimulateArgs),
    /// Run a verification suite at its documented scale: JSON, exit 3 on failure.
    Verify(VerifyArgs),
    /// Distances between Phi_alpha and its normal or Gumbel end point: CSV.
    Transition(TransitionArgs),
    /// Exact CDF of X_n for k = 1: CSV.
    ExactCdf(ExactCdfArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum LawName {
    Gumbel,
    Normal,
    PhiAlpha,
}

#[derive(Debug, Args, Serialize)]
struct XGrid {
    /// Single evaluation point.
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["x_min", "x_max", "step"])]
    x: Option<f64>,
    #[arg(long, allow_hyphen_values = true, default_value_t = -8.0)]
    x_min: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 14.0)]
    x_max: f64,
    #[arg(long, default_value_t = 0.01)]
    step: f64,
}

impl XGrid {
    fn points(&self) -> CliResult<Vec<f64>> {
        if let Some(x) = self.x {
            if !x.is_finite() {
                return Err(CliError::Usage(format!("--x must be finite, got {x}")));
            }
            return Ok(vec![x]);
        }
        let ok = self.x_min.is_finite() && self.x_max.is_finite() && self.x_min <= self.x_max && self.step > 0.0;
        if !ok {
            return Err(CliError::Usage(format!(
                "need finite --x-min <= --x-max and --step > 0, got {} {} {}",
                self.x_min, self.x_max, self.step
            )));
        }
        let n = ((self.x_max - self.x_min) / self.step + 1e-9).floor() as usize;
        if n > 10_000_000 {
            return Err(CliError::Usage(format!("grid of {} points is too large", n + 1)));
        }
        Ok((0..=n).map(|i| self.x_min + i as f64 * self.step).collect())
    }
}

#[derive(Debug, Args, Serialize)]
struct LimitCdfArgs {
    #[arg(long, value_enum)]
    law: LawName,
    /// Required for phi-alpha.
    #[arg(long)]
    alpha: Option<f64>,
    #[command(flatten)]
    grid: XGrid,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum RegimeName {
    Zero,
    Finite,
    Infinite,
}

#[derive(Debug, Args, Serialize)]
struct EnsembleArgs {
    #[arg(long)]
    n: u64,
    #[arg(long)]
    k: u64,
    #[arg(long, value_enum)]
    regime: RegimeName,
    /// lim n³/k for the zero regime (default: n³/k of this ensemble; `inf` allowed).
    #[arg(long)]
    beta: Option<f64>,
    /// Limit alpha for the finite regime (default: n/k of this ensemble).
    #[arg(long)]
    alpha: Option<f64>,
    /// lim n(alpha_n - alpha) for the finite regime (default: its value at this ensemble).
    #[arg(long, allow_hyphen_values = true)]
    eta: Option<f64>,
}

impl EnsembleArgs {
    fn resolve(&self) -> CliResult<(Ensemble, RegimeDecl)> {
        let e = Ensemble::new(self.n, self.k)?;
        let alpha_n: f64 = e.alpha_n();
        let decl = match self.regime {
            RegimeName::Zero => {
                self.reject(&[("alpha", self.alpha), ("eta", self.eta)])?;
                RegimeDecl::zero(self.beta.unwrap_or_else(|| e.beta_n()))?
            }
            RegimeName::Finite => {
                self.reject(&[("beta", self.beta)])?;
                let alpha = self.alpha.unwrap_or(alpha_n);
                let eta = self.eta.unwrap_or(self.n as f64 * (alpha_n - alpha));
                RegimeDecl::finite(alpha, eta)?
            }
            RegimeName::Infinite => {
                self.reject(&[("alpha", self.alpha), ("beta", self.beta), ("eta", self.eta)])?;
                RegimeDecl::AlphaInfinite
            }
        };
        decl.check_consistent(&e)?;
        Ok((e, decl))
    }

    fn reject(&self, flags: &[(&str, Option<f64>)]) -> CliResult<()> {
        for (name, v) in flags {
            if v.is_some() {
                return Err(CliError::Usage(format!("--{name} does not apply to regime {:?}", self.regime)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Args, Serialize)]
struct GridArgs {
    #[arg(long, allow_hyphen_values = true)]
    grid_lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    grid_hi: Option<f64>,
    #[arg(long)]
    grid_step: Option<f64>,
    #[arg(long)]
    grid_refine: Option<f64>,
}

impl GridArgs {
    fn policy(&self) -> CliResult<GridPolicy> {
        let d = GridPolicy::default();
        let p = GridPolicy {
            x_lo: self.grid_lo.unwrap_or(d.x_lo),
            x_hi: self.grid_hi.unwrap_or(d.x_hi),
            coarse_step: self.grid_step.unwrap_or(d.coarse_step),
            refine_width: self.grid_refine.unwrap_or(d.refine_width),
            ..d
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum MetricName {
    Be,
    W1,
    Both,
}

#[derive(Debug, Args, Serialize)]
struct RateArgs {
    #[command(flatten)]
    ensemble: EnsembleArgs,
    #[arg(long, value_enum, default_value_t = MetricName::Both)]
    metric: MetricName,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    ensemble: EnsembleArgs,
    #[arg(long)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also compute the Kolmogorov distance to the regime's limit law.
    #[arg(long)]
    summary: bool,
    #[arg(long, default_value_t = DEFAULT_DRAW_BUDGET)]
    draw_budget: u128,
}

#[derive(Debug, Args, Serialize)]
struct VerifyArgs {
    #[arg(value_enum)]
    suite: verify::Suite,
    #[arg(long, default_value_t = 20240601)]
    seed: u64,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Debug, Args, Serialize)]
struct TransitionArgs {
    /// One or more alpha values; each must be <= 0.01 (normal side) or >= 100 (Gumbel side).
    #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
    alpha: Vec<f64>,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Debug, Args, Serialize)]
struct ExactCdfArgs {
    #[arg(long)]
    n: u64,
    #[command(flatten)]
    grid: XGrid,
}

fn config_json(cli: &Cli, extra: serde_json::Value) -> serde_json::Value {
    json!({ "cli": cli, "resolved": extra, "threads": rayon::current_num_threads() })
}

fn finish_csv(cli: &Cli, table: &Table, ycols: &[usize], config: serde_json::Value) -> CliResult<()> {
    let out = cli.out.as_deref();
    emit(out, &table.to_csv())?;
    write_config(out, &config)?;
    if cli.gnuplot {
        match out {
            Some(p) => {
                write_gnuplot(p, table, ycols)?;
            }
            None => return Err(CliError::Usage("--gnuplot needs --out".into())),
        }
    }
    Ok(())
}

fn emit_json(out: Option<&Path>, v: &serde_json::Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| CliError::Io(e.to_string()))?;
    emit(out, &(text + "\n"))
}

fn law_for(name: LawName, alpha: Option<f64>) -> CliResult<LimitLaw> {
    match (name, alpha) {
        (LawName::PhiAlpha, Some(a)) => Ok(LimitLaw::phi_alpha(a)?),
        (LawName::PhiAlpha, None) => Err(CliError::Usage("phi-alpha needs --alpha".into())),
        (_, Some(_)) => Err(CliError::Usage("--alpha only applies to phi-alpha".into())),
        (LawName::Gumbel, None) => Ok(LimitLaw::Gumbel),
        (LawName::Normal, None) => Ok(LimitLaw::StdNormal),
    }
}

fn cmd_limit_cdf(cli: &Cli, a: &LimitCdfArgs) -> CliResult<()> {
    let law = law_for(a.law, a.alpha)?;
    let mut t = Table::new(&["x", "cdf", "tail_bound"]);
    for x in a.grid.points()? {
        let (c, cert) = cdf(&law, x);
        t.push(vec![g17(x), g17(c), g17(cert.tail_bound)]);
    }
    finish_csv(cli, &t, &[1], config_json(cli, json!({ "law": law })))
}

fn cmd_rate(cli: &Cli, a: &RateArgs) -> CliResult<()> {
    let (e, decl) = a.ensemble.resolve()?;
    let grid = a.grid.policy()?;
    let mut reports = Vec::new();
    if a.metric != MetricName::W1 {
        reports.push(be_rate(&e, &decl, &grid)?);
    }
    if a.metric != MetricName::Be {
        reports.push(w1_rate(&e, &decl, &grid)?);
    }
    let config = config_json(cli, json!({ "ensemble": e, "regime": decl, "grid": grid }));
    emit_json(cli.out.as_deref(), &json!({ "config": config, "reports": reports }))
}

fn limit_law_of(decl: &RegimeDecl) -> CliResult<LimitLaw> {
    Ok(match *decl {
        RegimeDecl::AlphaZero { .. } => LimitLaw::StdNormal,
        RegimeDecl::AlphaFinite { alpha, .. } => LimitLaw::phi_alpha(alpha)?,
        RegimeDecl::AlphaInfinite => LimitLaw::Gumbel,
    })
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs) -> CliResult<()> {
    if a.samples == 0 {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    let out = cli.out.as_deref().ok_or_else(|| CliError::Usage("simulate needs --out for the sample CSV".into()))?;
    let (e, decl) = a.ensemble.resolve()?;
    let sc = constants_for::<f64>(&e, &decl)?;
    let cfg = SamplerConfig { draw_budget: a.draw_budget, ..SamplerConfig::default() };
    let batch = sample_xn_with(&sc, a.samples, a.seed, &cfg)?;
    batch.export(out)?;
    let config = config_json(cli, json!({ "ensemble": e, "regime": decl, "meta": batch.meta() }));
    write_config(Some(out), &config)?;
    if cli.gnuplot {
        let script = out.with_extension("gp");
        let name = out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let text = format!(
            "set datafile separator ','\nset key autotitle columnhead\nbinwidth = 0.05\n\
             plot '{name}' using (binwidth*floor($2/binwidth)):(1.0/{}/binwidth) smooth frequency with boxes\n\
             pause mouse close\n",
            a.samples
        );
        emit(Some(&script), &text)?;
    }
    let mut result = json!({
        "samples": out,
        "sidecar": sidecar_path(out),
        "config": config,
    });
    if a.summary {
        let law = limit_law_of(&decl)?;
        let report = kolmogorov_distance(&Ecdf::new(batch.values)?, &law)
            .with_meta("law", law.name())
            .with_meta("root_seed", a.seed)
            .with_meta("n", e.n)
            .with_meta("k", e.k)
            .with_meta("regime", serde_json::to_value(decl).map_err(|e| CliError::Io(e.to_string()))?);
        let path = out.with_extension("summary.json");
        emit(Some(&path), &(report.to_json()? + "\n"))?;
        result["summary"] = serde_json::to_value(&report).map_err(|e| CliError::Io(e.to_string()))?;
    }
    emit_json(None, &result)
}

fn cmd_verify(cli: &Cli, a: &VerifyArgs) -> CliResult<()> {
    let grid = a.grid.policy()?;
    let checks = verify::run(a.suite, a.seed, &grid)?;
    let pass = checks.iter().all(|c| c.pass);
    let config = config_json(cli, json!({ "grid": grid }));
    emit_json(cli.out.as_deref(), &json!({ "suite": a.suite, "pass": pass, "checks": checks, "config": config }))?;
    if pass {
        Ok(())
    } else {
        let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        Err(CliError::Acceptance(failed.join("; ")))
    }
}

fn cmd_transition(cli: &Cli, a: &TransitionArgs) -> CliResult<()> {
    let grid = a.grid.policy()?;
    let mut t = Table::new(&["alpha", "side", "sup_distance", "argmax", "rate", "ratio"]);
    for &alpha in &a.alpha {
        let (side, other, label) = if alpha <= ginibre_evt::rates::TO_NORMAL_MAX_ALPHA {
            (TransitionSide::ToNormal, LimitLaw::StdNormal, "normal")
        } else if alpha >= ginibre_evt::rates::TO_GUMBEL_MIN_ALPHA {
            (TransitionSide::ToGumbel, LimitLaw::Gumbel, "gumbel")
        } else {
            return Err(CliError::Usage(format!("alpha = {alpha} is between the normal and Gumbel gates")));
        };
        let rate = transition_rate(alpha, side)?;
        let (d, x) = sup_distance(&LimitLaw::phi_alpha(alpha)?, &other, &grid)?;
        t.push(vec![g17(alpha), label.into(), g17(d), g17(x), g17(rate), g17(d / rate)]);
    }
    finish_csv(cli, &t, &[2, 4], config_json(cli, json!({ "grid": grid })))
}

fn cmd_exact_cdf(cli: &Cli, a: &ExactCdfArgs) -> CliResult<()> {
    let e = Ensemble::new(a.n, 1)?;
    let sc = constants_for::<f64>(&e, &RegimeDecl::AlphaInfinite)?;
    let mut t = Table::new(&["x", "cdf", "log_cdf", "gumbel", "terms_used", "tail_bound"]);
    for x in a.grid.points()? {
        let c = exact_cdf_k1(&sc, x)?;
        t.push(vec![
            g17(x),
            g17(c.value),
            g17(c.log_value),
            g17(LimitLaw::Gumbel.cdf(x)),
            c.terms_used.to_string(),
            g17(c.tail_bound),
        ]);
    }
    let config = config_json(cli, json!({ "ensemble": e, "alpha_n": sc.alpha_n, "a_n": sc.a_n, "b_n": sc.b_n }));
    finish_csv(cli, &t, &[1, 3], config)
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure {n} threads: {e}")))?;
    }
    match &cli.command {
        Command::LimitCdf(a) => cmd_limit_cdf(cli, a),
        Command::Rate(a) => cmd_rate(cli, a),
        Command::Simulate(a) => cmd_simulate(cli, a),
        Command::Verify(a) => cmd_verify(cli, a),
        Command::Transition(a) => cmd_transition(cli, a),
        Command::ExactCdf(a) => cmd_exact_cdf(cli, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ginibre-evt: {e}");
            ExitCode::from(e.code())
        }
    }
}
