use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::{json, Value};

use normscaler::calib::{alpha_for_p, calibration_curve, p_eff, CalibrationConfig};
use normscaler::dln::{dln_train, DlnConfig, GradNoise};
use normscaler::harness::{diagnose_concentration, run_sweep, SweepConfig, THREADS_ENV};
use normscaler::model::{gen_instance, lr_norm, DesignSpec, ProblemInstance, Signs, TargetSpec};
use normscaler::solver::{ray_scale, solve_min_lp, LineSearch, SolverOptions};
use normscaler::theory::{ray_scale_prediction, regime_specific_prediction, transition_n_star, unified_norm_prediction, TheoryInputs};
use normscaler::Error;

/// Minimum-ℓp interpolation, ℓr-norm scaling theory and diagonal linear networks.
///
/// Prints a JSON summary on stdout and logs on stderr (set RUST_LOG=info for progress).
/// Exit status: 0 on success, 1 on invalid input or configuration, 2 on numerical failure.
#[derive(Parser, Debug)]
#[command(name = "normscaler", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a problem instance Y = X w★ + σξ.
    Gen {
        #[command(flatten)]
        inst: InstanceArgs,
        /// Write the full instance (X, Y, ξ, w★) as JSON to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the minimum-ℓp interpolator and its ℓr norms.
    Solve {
        #[command(flatten)]
        inst: InstanceArgs,
        /// Bias exponent p, in (1, 2] (dimensionless).
        #[arg(long)]
        p: f64,
        #[command(flatten)]
        norms: NormArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Evaluate the closed-form scaling predictions (hidden constants set to 1).
    Theory {
        #[command(flatten)]
        target: TargetArgs,
        #[command(flatten)]
        design: DesignArgs,
        /// Label noise standard deviation σ (label units).
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        /// Bias exponent p, in (1, 2] (dimensionless).
        #[arg(long)]
        p: f64,
        /// Sample size n (rows).
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        norms: NormArgs,
    },
    /// Run a sweep from a JSON recipe; flags override recipe fields.
    Sweep {
        /// Recipe file (JSON mirroring the sweep configuration fields).
        #[arg(long)]
        config: PathBuf,
        /// CSV output path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Base seed for every random stream (integer).
        #[arg(long)]
        base_seed: Option<u64>,
        /// Replicates per cell (count).
        #[arg(long)]
        seeds: Option<usize>,
        /// Experiment identifier written to every row.
        #[arg(long)]
        experiment_id: Option<String>,
        /// Sample sizes n (rows), comma separated.
        #[arg(long, value_delimiter = ',')]
        n_grid: Option<Vec<usize>>,
        /// Label noise levels σ (label units), comma separated.
        #[arg(long, value_delimiter = ',')]
        sigma: Option<Vec<f64>>,
        /// Norm exponents r (dimensionless), comma separated.
        #[arg(long, value_delimiter = ',')]
        r: Option<Vec<f64>>,
        /// Worker threads (count); same effect as the NORMSCALER_THREADS variable.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Map DLN initialization scales α to effective exponents p_eff, or back.
    Calibrate {
        /// Initialization scales α (parameter units), comma separated.
        #[arg(long, value_delimiter = ',')]
        alpha: Vec<f64>,
        /// Find α with p_eff(α) equal to this exponent (dimensionless).
        #[arg(long)]
        p_target: Option<f64>,
        /// Tolerance on p_eff for --p-target (dimensionless).
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        /// Lower end of the α bracket for --p-target (parameter units).
        #[arg(long, default_value_t = 1e-6)]
        alpha_min: f64,
        /// Upper end of the α bracket for --p-target (parameter units).
        #[arg(long, default_value_t = 1e3)]
        alpha_max: f64,
        /// Print p_eff over the default 50-point α grid.
        #[arg(long)]
        curve: bool,
    },
    /// Train a two-layer diagonal linear network by full-batch gradient descent.
    DlnTrain {
        #[command(flatten)]
        inst: InstanceArgs,
        /// Initialization scale α (parameter units).
        #[arg(long, default_value_t = 0.00102)]
        alpha: f64,
        /// Learning rate (step size per epoch).
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        /// Epoch cap (count).
        #[arg(long, default_value_t = 2_000_000)]
        max_epochs: u64,
        /// Stop when the mean squared training loss reaches this value (label units squared).
        #[arg(long, default_value_t = 1e-10)]
        loss_tol: f64,
        /// Gradient-noise amplitude relative to the root training loss (dimensionless); 0 disables it.
        #[arg(long, default_value_t = 0.0)]
        noise_scale: f64,
        /// Seed of the gradient-noise stream (integer).
        #[arg(long, default_value_t = 0)]
        noise_seed: u64,
        #[command(flatten)]
        norms: NormArgs,
    },
    /// Concentration diagnostics of ‖Y‖ and XᵀY on one instance.
    Diagnose {
        #[command(flatten)]
        inst: InstanceArgs,
        /// Conjugate exponent q ≥ 2 (dimensionless).
        #[arg(long)]
        q: f64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TargetName {
    /// Single spike w★ = a·e₁.
    E1,
    /// Flat support of size s with magnitude a.
    Flat,
}

#[derive(Args, Debug)]
struct TargetArgs {
    /// Ground-truth shape.
    #[arg(long, value_enum, default_value = "e1")]
    target: TargetName,
    /// Support size s (coordinates) for the flat target.
    #[arg(long, default_value_t = 1)]
    s: usize,
    /// Per-coordinate magnitude a (parameter units); default 1 for e1 and 1/√s for flat.
    #[arg(long)]
    a: Option<f64>,
    /// Draw Rademacher signs for the support from this seed (integer).
    #[arg(long)]
    sign_seed: Option<u64>,
}

#[derive(Args, Debug)]
struct DesignArgs {
    /// Fixed ambient dimension d (coordinates).
    #[arg(long, conflicts_with = "kappa")]
    d: Option<usize>,
    /// Aspect ratio κ = d/n > 1 (dimensionless), d = ⌈κn⌉.
    #[arg(long)]
    kappa: Option<f64>,
}

#[derive(Args, Debug)]
struct InstanceArgs {
    /// Read the instance from a JSON file written by `gen --out` instead of sampling one.
    #[arg(long, conflicts_with_all = ["n", "d", "kappa", "seed"])]
    instance: Option<PathBuf>,
    #[command(flatten)]
    target: TargetArgs,
    #[command(flatten)]
    design: DesignArgs,
    /// Sample size n (rows).
    #[arg(long)]
    n: Option<usize>,
    /// Label noise standard deviation σ (label units).
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Instance seed (integer).
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct NormArgs {
    /// Norm exponents r (dimensionless), comma separated; defaults to 1 and p.
    #[arg(long, value_delimiter = ',')]
    r: Vec<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LineSearchArg {
    Newton,
    Bb,
    Backtracking,
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Relative feasibility tolerance ‖Xŵ − Y‖/‖Y‖ (dimensionless).
    #[arg(long, default_value_t = 1e-8)]
    tol_feas: f64,
    /// Relative tolerance on the primal-dual identities (dimensionless).
    #[arg(long, default_value_t = 1e-6)]
    tol_cert: f64,
    /// Iteration cap (count).
    #[arg(long, default_value_t = 50_000)]
    max_iters: usize,
    /// Ascent rule for the dual problem.
    #[arg(long, value_enum, default_value = "newton")]
    line_search: LineSearchArg,
}

impl TargetArgs {
    fn spec(&self) -> TargetSpec {
        let mut t = match self.target {
            TargetName::E1 => TargetSpec::single_spike(),
            TargetName::Flat => TargetSpec::flat(self.s),
        };
        t.a = self.a;
        if let Some(seed) = self.sign_seed {
            t.signs = Signs::Rademacher(seed);
        }
        t
    }
}

impl DesignArgs {
    fn spec(&self) -> Result<DesignSpec, Error> {
        match (self.d, self.kappa) {
            (Some(d), None) => Ok(DesignSpec::FixedD(d)),
            (None, Some(k)) => Ok(DesignSpec::Proportional(k)),
            _ => Err(Error::SpecInvalid("give exactly one of --d and --kappa".into())),
        }
    }
}

impl InstanceArgs {
    fn build(&self) -> Result<ProblemInstance, Error> {
        if let Some(path) = &self.instance {
            return Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?);
        }
        let n = self.n.ok_or_else(|| Error::SpecInvalid("--n is required unless --instance is given".into()))?;
        gen_instance(&self.target.spec(), &self.design.spec()?, self.sigma, n, self.seed)
    }
}

impl SolverArgs {
    fn options(&self) -> SolverOptions {
        let line_search = match self.line_search {
            LineSearchArg::Newton => LineSearch::Newton,
            LineSearchArg::Bb => LineSearch::BarzilaiBorwein,
            LineSearchArg::Backtracking => LineSearch::Backtracking,
        };
        SolverOptions { tol_feas: self.tol_feas, tol_cert: self.tol_cert, max_iters: self.max_iters, line_search, ..Default::default() }
    }
}

fn r_list(norms: &NormArgs, p: f64) -> Vec<f64> {
    if norms.r.is_empty() {
        if p == 1.0 {
            vec![1.0]
        } else {
            vec![1.0, p]
        }
    } else {
        norms.r.clone()
    }
}

fn norm_table(rs: &[f64], norm: impl Fn(f64) -> f64) -> Value {
    Value::Array(rs.iter().map(|&r| json!({ "r": r, "norm": norm(r) })).collect())
}

fn instance_summary(inst: &ProblemInstance) -> Value {
    json!({ "n": inst.n, "d": inst.d, "s": inst.s, "sigma": inst.sigma, "seed": inst.seed })
}

/// Outcome of a subcommand: its JSON summary and whether a numerical failure should set the exit status.
struct Outcome {
    summary: Value,
    numerical_failure: bool,
}

impl From<Value> for Outcome {
    fn from(summary: Value) -> Self {
        Self { summary, numerical_failure: false }
    }
}

fn run(cmd: Command) -> Result<Outcome, Error> {
    match cmd {
        Command::Gen { inst, out } => {
            let instance = inst.build()?;
            if let Some(path) = &out {
                std::fs::write(path, serde_json::to_string(&instance)?)?;
            }
            let y_norm = lr_norm(instance.y.view(), 2.0);
            Ok(json!({ "instance": instance_summary(&instance), "y_norm": y_norm, "out": out }).into())
        }
        Command::Solve { inst, p, norms, solver } => {
            let instance = inst.build()?;
            let sol = solve_min_lp(instance.x.view(), instance.y.view(), p, &solver.options())?;
            let summary = json!({
                "instance": instance_summary(&instance),
                "p": p,
                "norms": norm_table(&r_list(&norms, p), |r| lr_norm(sol.w_hat.view(), r)),
                "feas_residual": sol.feas_residual,
                "cert_residual": sol.cert_residual,
                "iters": sol.iters,
                "converged": sol.converged,
                "t_star_empirical": sol.t_star_empirical,
            });
            Ok(Outcome { summary, numerical_failure: !sol.converged })
        }
        Command::Theory { target, design, sigma, p, n, norms } => {
            let (target, design) = (target.spec(), design.spec()?);
            let rows = r_list(&norms, p)
                .into_iter()
                .map(|r| {
                    let inputs = TheoryInputs::from_target(&target, &design, sigma, p, r, n)?;
                    let unified = unified_norm_prediction(&inputs, n)?;
                    let regime = regime_specific_prediction(&inputs, n).ok();
                    Ok(json!({ "r": r, "unified": unified, "regime_specific": regime }))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let inputs = TheoryInputs::from_target(&target, &design, sigma, p, p, n)?;
            let n_star = transition_n_star(&inputs);
            Ok(json!({
                "p": p,
                "q": inputs.q,
                "n": n,
                "d": inputs.d,
                "kappa_bulk": inputs.kappa_bulk,
                "tau_s": inputs.tau_s(),
                "t_star": ray_scale_prediction(&inputs, n),
                "n_star": n_star.value,
                "n_star_boundary": n_star.boundary,
                "r_star": inputs.r_star(),
                "norms": rows,
            })
            .into())
        }
        Command::Sweep { config, out, base_seed, seeds, experiment_id, n_grid, sigma, r, threads } => {
            let mut cfg = SweepConfig::load(&config)?;
            if out.is_some() {
                cfg.output_path = out;
            }
            cfg.base_seed = base_seed.unwrap_or(cfg.base_seed);
            cfg.seeds_per_cell = seeds.unwrap_or(cfg.seeds_per_cell);
            cfg.experiment_id = experiment_id.unwrap_or(cfg.experiment_id);
            cfg.n_grid = n_grid.unwrap_or(cfg.n_grid);
            cfg.sigma_list = sigma.unwrap_or(cfg.sigma_list);
            cfg.r_list = r.unwrap_or(cfg.r_list);
            if let Some(t) = threads {
                std::env::set_var(THREADS_ENV, t.to_string());
            }
            info!("running sweep {}", cfg.experiment_id);
            let records = run_sweep(&cfg)?;
            let failed = records.iter().filter(|r| r.status.starts_with("failed")).count();
            let not_converged = records.iter().filter(|r| r.status == "not_converged" || r.status == "max_epochs" || r.status == "diverged").count();
            Ok(json!({
                "experiment_id": cfg.experiment_id,
                "records": records.len(),
                "failed": failed,
                "not_converged": not_converged,
                "output": cfg.output_path,
            })
            .into())
        }
        Command::Calibrate { alpha, p_target, tol, alpha_min, alpha_max, curve } => {
            let cfg = CalibrationConfig::default();
            let mut out = serde_json::Map::new();
            if !alpha.is_empty() {
                let rows = alpha
                    .iter()
                    .map(|&a| p_eff(a, &cfg).map(|pe| json!({ "alpha": a, "p_eff": pe.p, "stderr": pe.stderr })))
                    .collect::<Result<Vec<_>, Error>>()?;
                out.insert("p_eff".into(), Value::Array(rows));
            }
            if let Some(pt) = p_target {
                let a = alpha_for_p(pt, (alpha_min, alpha_max), tol, &cfg)?;
                out.insert("alpha_for_p".into(), json!({ "p_target": pt, "alpha": a }));
            }
            if curve {
                out.insert("curve".into(), serde_json::to_value(calibration_curve(&cfg)?)?);
            }
            if out.is_empty() {
                return Err(Error::SpecInvalid("give --alpha, --p-target or --curve".into()));
            }
            Ok(Value::Object(out).into())
        }
        Command::DlnTrain { inst, alpha, lr, max_epochs, loss_tol, noise_scale, noise_seed, norms } => {
            let instance = inst.build()?;
            let grad_noise = (noise_scale > 0.0).then_some(GradNoise { scale: noise_scale, seed: noise_seed });
            let cfg = DlnConfig { alpha, lr, max_epochs, loss_tol, grad_noise, ..Default::default() };
            let rep = dln_train(instance.x.view(), instance.y.view(), &cfg)?;
            let p = p_eff(alpha, &CalibrationConfig::default())?.p;
            let summary = json!({
                "instance": instance_summary(&instance),
                "alpha": alpha,
                "lr": lr,
                "p_eff": p,
                "status": rep.status.label(),
                "epochs": rep.epochs_run,
                "final_loss": rep.final_loss,
                "norms": norm_table(&r_list(&norms, p), |r| lr_norm(rep.beta.view(), r)),
            });
            Ok(summary.into())
        }
        Command::Diagnose { inst, q } => {
            let instance = inst.build()?;
            let report = diagnose_concentration(&instance, q)?;
            let t_star = ray_scale(instance.x.view(), instance.y.view(), q).ok();
            Ok(json!({
                "instance": instance_summary(&instance),
                "q": q,
                "report": report,
                "spike_ratio": report.spike_ratio(),
                "total_ratio": report.total_ratio(),
                "t_star_empirical": t_star,
            })
            .into())
        }
    }
}

fn is_numerical(e: &Error) -> bool {
    matches!(
        e,
        Error::NotConverged { .. } | Error::SingularGram | Error::NonFinite(_) | Error::DegenerateInstance(_) | Error::DegenerateFit(_)
    )
}

/// Print to stdout, tolerating a closed pipe.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).target(env_logger::Target::Stderr).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(out) => {
            emit(&serde_json::to_string_pretty(&out.summary).expect("serializable summary"));
            if out.numerical_failure {
                eprintln!("error: solver did not converge");
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            emit(&json!({ "error": e.to_string() }).to_string());
            ExitCode::from(if is_numerical(&e) { 2 } else { 1 })
        }
    }
}
