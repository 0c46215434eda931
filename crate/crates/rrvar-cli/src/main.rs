//! Command-line front end for reduced-rank VAR covariance estimation.
//!
//! Subcommands: `fit`, `forecast`, `diagnose`, `simulate`, `bench`.
//! Exit codes: 0 success, 2 input/usage error, 3 numerical failure,
//! 4 non-convergence (the model file is still written).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rrvar::forecast;
use rrvar::rrcov;
use rrvar::simharness::{self, CaseKind, EstimatorKind};
use rrvar::var::{self, ConstraintSpec, IterOptions, NoiseCov, OrderFitter, VarModel};
use rrvar_cli::{dataset, diagnostics, modelfile, CmdError, EXIT_NONCONVERGENCE};

#[derive(Parser)]
#[command(name = "rrvar", version, about = "Reduced-rank covariance estimation for VAR models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a VAR model with a reduced-rank noise covariance.
    Fit(FitArgs),
    /// One-step point forecast and approximate forecast MSE.
    Forecast(ForecastArgs),
    /// Latent-variable diagnostics for a fitted model.
    Diagnose(DiagnoseArgs),
    /// Simulate data from a benchmark case or a fitted model.
    Simulate(SimulateArgs),
    /// Monte Carlo estimator comparison over a sample-size grid.
    Bench(BenchArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Input dataset CSV (rows = time, columns = series).
    data: PathBuf,
    /// Fixed autoregression order.
    #[arg(long, conflicts_with = "order_select")]
    order: Option<usize>,
    /// Select the order by BIC over 0..=MAX.
    #[arg(long, value_name = "MAX")]
    order_select: Option<usize>,
    /// Constraint file of free coefficients, one "lag,row,col" triple
    /// (1-indexed) per line; selects the iterative procedure.
    #[arg(long)]
    constraints: Option<PathBuf>,
    /// Fixed covariance rank.
    #[arg(long, conflicts_with = "rank_select")]
    rank: Option<usize>,
    /// Select the rank by BIC over 1..K-1 (the default when --rank is absent).
    #[arg(long)]
    rank_select: bool,
    /// Iteration cap for the iterative procedure.
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Relative -2 log-likelihood convergence tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Output model file.
    #[arg(long, default_value = "model.json")]
    model_out: PathBuf,
    /// Directory for BIC curves, convergence trace, and diagnostics.
    #[arg(long, default_value = ".")]
    report_dir: PathBuf,
}

#[derive(Args)]
struct ForecastArgs {
    /// Fitted model JSON.
    model: PathBuf,
    /// Dataset the forecast conditions on.
    data: PathBuf,
    /// Directory for fmse.csv and fmse_diag.csv.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Fitted model JSON (reduced-rank covariance with d >= 1).
    model: PathBuf,
    /// Dataset the model was fitted on.
    data: PathBuf,
    /// Largest lag of the correlation functions.
    #[arg(long, default_value_t = 20)]
    lags: usize,
    /// Directory for scores.csv, ccf.csv, and positions.csv.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Benchmark case generator (iid Gaussian rows).
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    case: Option<CaseArg>,
    /// Dimension of the case generator.
    #[arg(long, default_value_t = 15)]
    k: usize,
    /// Fitted or specified model JSON (VAR sample path).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Number of rows to generate.
    #[arg(long, short = 't')]
    t: usize,
    /// Samples discarded before recording (model path only).
    #[arg(long, default_value_t = 200)]
    burn_in: usize,
    /// RNG seed (required for reproducibility).
    #[arg(long)]
    seed: u64,
    /// Output dataset CSV.
    #[arg(long, default_value = "simulated.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Benchmark case.
    #[arg(long)]
    case: CaseArg,
    /// Dimension.
    #[arg(long, default_value_t = 15)]
    k: usize,
    /// Comma-separated sample sizes.
    #[arg(long, default_value = "50,100,200,400", value_delimiter = ',')]
    t_grid: Vec<usize>,
    /// Replications per sample size.
    #[arg(long, default_value_t = 500)]
    reps: usize,
    /// Estimators to compare against the sample covariance.
    #[arg(long, default_value = "rr,lw,ss", value_delimiter = ',')]
    estimators: Vec<EstimatorArg>,
    /// Master RNG seed.
    #[arg(long)]
    seed: u64,
    /// Directory for table2.csv and table3.csv.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum CaseArg {
    #[value(name = "I", alias = "i")]
    I,
    #[value(name = "II", alias = "ii")]
    II,
    #[value(name = "III", alias = "iii")]
    III,
}

impl From<CaseArg> for CaseKind {
    fn from(c: CaseArg) -> Self {
        match c {
            CaseArg::I => CaseKind::I,
            CaseArg::II => CaseKind::II,
            CaseArg::III => CaseKind::III,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Sample,
    Rr,
    Lw,
    Ss,
}

impl From<EstimatorArg> for EstimatorKind {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Sample => EstimatorKind::Sample,
            EstimatorArg::Rr => EstimatorKind::ReducedRank,
            EstimatorArg::Lw => EstimatorKind::LedoitWolf,
            EstimatorArg::Ss => EstimatorKind::SchaferStrimmer,
        }
    }
}

fn init_thread_pool() {
    if let Ok(val) = std::env::var("VARCOV_THREADS") {
        if let Ok(n) = val.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn main() -> ExitCode {
    init_thread_pool();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => cmd_fit(&args),
        Command::Forecast(args) => cmd_forecast(&args),
        Command::Diagnose(args) => cmd_diagnose(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Bench(args) => cmd_bench(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn parse_constraints(path: &Path, k: usize, p: usize) -> Result<ConstraintSpec, CmdError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CmdError::usage(format!("cannot read {}: {e}", path.display())))?;
    let mut positions = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(CmdError::usage(format!(
                "{}: line {}: expected \"lag,row,col\", got {line:?}",
                path.display(),
                idx + 1
            )));
        }
        let nums: Vec<usize> = fields
            .iter()
            .map(|f| {
                f.parse::<usize>().ok().filter(|&v| v >= 1).ok_or_else(|| {
                    CmdError::usage(format!(
                        "{}: line {}: indices are 1-based integers, got {f:?}",
                        path.display(),
                        idx + 1
                    ))
                })
            })
            .collect::<Result<_, _>>()?;
        positions.push((nums[0] - 1, nums[1] - 1, nums[2] - 1));
    }
    Ok(ConstraintSpec::from_positions(k, p, positions)?)
}

fn residual_sample_cov(model: &VarModel, y: &DMatrix<f64>) -> Result<rrcov::SampleCov, CmdError> {
    let resid = var::residuals(model, y)?;
    Ok(rrcov::sample_cov(&resid, false)?)
}

fn cmd_fit(args: &FitArgs) -> Result<(), CmdError> {
    let ds = dataset::read(&args.data)?;
    let k = ds.y.ncols();
    if k < 2 {
        return Err(CmdError::usage("need at least 2 series"));
    }

    let constrained = args.constraints.is_some();
    let fitter = if constrained {
        OrderFitter::Ols
    } else {
        OrderFitter::TwoStep
    };

    let mut order_curve: Option<Vec<(usize, f64)>> = None;
    let p = match (args.order, args.order_select) {
        (Some(p), _) => p,
        (None, Some(p_max)) => {
            let orders: Vec<usize> = (0..=p_max).collect();
            let (p_star, curve) = var::select_order(&ds.y, &orders, fitter)?;
            order_curve = Some(curve);
            p_star
        }
        (None, None) => {
            return Err(CmdError::usage("one of --order or --order-select is required"));
        }
    };

    let rank_candidates: Vec<usize> = match args.rank {
        Some(d) => vec![d],
        None => (1..k).collect(),
    };

    let (model, rank_curve) = if let Some(path) = &args.constraints {
        if p == 0 {
            return Err(CmdError::usage("constraints require --order >= 1"));
        }
        let constraint = parse_constraints(path, k, p)?;
        let ols = var::fit_ols(&ds.y, p)?;
        let s = residual_sample_cov(&ols, &ds.y)?;
        let (init, curve) = rrcov::select_rank(&s, &rank_candidates)?;
        let opts = IterOptions {
            max_iter: args.max_iter,
            tol: args.tol,
        };
        let model = var::fit_iterative(&ds.y, p, &constraint, init.requested_rank(), opts)?;
        (model, curve)
    } else {
        let ols = var::fit_ols(&ds.y, p)?;
        let s = residual_sample_cov(&ols, &ds.y)?;
        let (_, curve) = rrcov::select_rank(&s, &rank_candidates)?;
        let model = var::fit_two_step(&ds.y, p, &rank_candidates)?;
        (model, curve)
    };

    std::fs::create_dir_all(&args.report_dir)
        .map_err(|e| CmdError::usage(format!("cannot create {}: {e}", args.report_dir.display())))?;

    let rank_rows: Vec<Vec<String>> = rank_curve
        .iter()
        .map(|(d, bic)| vec![d.to_string(), bic.to_string()])
        .collect();
    dataset::write_table(&args.report_dir.join("bic_rank.csv"), &["d", "bic"], &rank_rows)?;

    if let Some(curve) = &order_curve {
        let rows: Vec<Vec<String>> = curve
            .iter()
            .map(|(p, bic)| vec![p.to_string(), bic.to_string()])
            .collect();
        dataset::write_table(&args.report_dir.join("bic_order.csv"), &["p", "bic"], &rows)?;
    }

    let trace_rows: Vec<Vec<String>> = model
        .fit_meta
        .neg2_loglik_trace
        .iter()
        .enumerate()
        .map(|(i, v)| vec![i.to_string(), v.to_string()])
        .collect();
    dataset::write_table(
        &args.report_dir.join("trace.csv"),
        &["step", "neg2_loglik"],
        &trace_rows,
    )?;

    let file = modelfile::ModelFile::new(ds.names.clone(), model.clone());
    modelfile::save(&args.model_out, &file)?;

    let cov = model.noise_cov.as_ref().expect("fitted model has a covariance");
    println!("procedure: {}", model.fit_meta.procedure);
    println!("K: {k}  p: {p}  T: {}", ds.y.nrows());
    if let NoiseCov::ReducedRank(est) = cov {
        println!("rank: {} (requested {})", est.rank(), est.requested_rank());
        println!("sigma2: {}", est.sigma2());
    }
    println!(
        "iterations: {}  converged: {}",
        model.fit_meta.iterations, model.fit_meta.converged
    );

    let resid = var::residuals(&model, &ds.y)?;
    println!("residual standard deviations:");
    for (j, name) in ds.names.iter().enumerate() {
        let col = resid.column(j);
        let sd = (col.dot(&col) / resid.nrows() as f64).sqrt();
        println!("  {name}: {sd:.6}");
    }

    if !model.fit_meta.converged {
        return Err(CmdError {
            code: EXIT_NONCONVERGENCE,
            message: format!(
                "iteration did not converge within {} steps (model written to {})",
                args.max_iter,
                args.model_out.display()
            ),
        });
    }
    println!("model written to {}", args.model_out.display());
    Ok(())
}

fn cmd_forecast(args: &ForecastArgs) -> Result<(), CmdError> {
    let file = modelfile::load(&args.model)?;
    let ds = dataset::read(&args.data)?;
    let model = &file.model;
    if ds.y.ncols() != model.k {
        return Err(CmdError::usage(format!(
            "dataset has {} series but the model expects {}",
            ds.y.ncols(),
            model.k
        )));
    }

    let point = forecast::forecast1(model, &ds.y)?;
    let fmse = forecast::fmse1(model, &ds.y)?;

    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CmdError::usage(format!("cannot create {}: {e}", args.out_dir.display())))?;
    dataset::write(
        &args.out_dir.join("fmse.csv"),
        &file.series_names,
        &fmse.matrix.as_matrix().clone(),
    )?;
    let diag_rows: Vec<Vec<String>> = (0..model.k)
        .map(|i| {
            vec![
                file.series_names[i].clone(),
                fmse.matrix.get(i, i).to_string(),
            ]
        })
        .collect();
    dataset::write_table(&args.out_dir.join("fmse_diag.csv"), &["series", "fmse"], &diag_rows)?;

    println!("one-step forecast:");
    for (i, name) in file.series_names.iter().enumerate() {
        println!("  {name}: {}", point[i]);
    }
    println!("fMSE written to {}", args.out_dir.join("fmse.csv").display());
    Ok(())
}

fn cmd_diagnose(args: &DiagnoseArgs) -> Result<(), CmdError> {
    let file = modelfile::load(&args.model)?;
    let ds = dataset::read(&args.data)?;
    let model = &file.model;
    if ds.y.ncols() != model.k {
        return Err(CmdError::usage(format!(
            "dataset has {} series but the model expects {}",
            ds.y.ncols(),
            model.k
        )));
    }
    let est = match &model.noise_cov {
        Some(NoiseCov::ReducedRank(est)) if est.rank() >= 1 => est,
        _ => {
            return Err(CmdError::usage(
                "diagnostics need a reduced-rank covariance with d >= 1",
            ));
        }
    };

    let resid = var::residuals(model, &ds.y)?;
    let scores = rrcov::latent_scores(est, &resid)?;
    let d = est.rank();
    let n = scores.nrows();
    let band = 1.96 / (n as f64).sqrt();

    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CmdError::usage(format!("cannot create {}: {e}", args.out_dir.display())))?;

    let score_names: Vec<String> = (1..=d).map(|i| format!("latent{i}")).collect();
    dataset::write(&args.out_dir.join("scores.csv"), &score_names, &scores)?;

    let max_lag = args.lags as i64;
    let mut ccf_rows = Vec::new();
    for i in 0..d {
        for j in 0..d {
            for lag in -max_lag..=max_lag {
                let r = diagnostics::cross_corr(&scores, i, j, lag);
                ccf_rows.push(vec![
                    (i + 1).to_string(),
                    (j + 1).to_string(),
                    lag.to_string(),
                    r.to_string(),
                    band.to_string(),
                ]);
            }
        }
    }
    dataset::write_table(
        &args.out_dir.join("ccf.csv"),
        &["dim_i", "dim_j", "lag", "corr", "band"],
        &ccf_rows,
    )?;

    let u = est.loadings();
    let pos_rows: Vec<Vec<String>> = (0..model.k)
        .map(|i| {
            let mut row = vec![file.series_names[i].clone()];
            row.extend((0..d).map(|j| u[(i, j)].to_string()));
            row
        })
        .collect();
    let mut pos_header = vec!["series".to_string()];
    pos_header.extend((1..=d).map(|j| format!("u{j}")));
    let pos_header_refs: Vec<&str> = pos_header.iter().map(String::as_str).collect();
    dataset::write_table(&args.out_dir.join("positions.csv"), &pos_header_refs, &pos_rows)?;

    println!(
        "latent dimension: {d}  usable points: {n}  band: +/-{band:.4}"
    );
    println!("diagnostics written to {}", args.out_dir.display());
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CmdError> {
    let (names, y) = if let Some(path) = &args.model {
        let file = modelfile::load(path)?;
        let y = var::simulate(&file.model, args.t, args.burn_in, args.seed)?;
        (file.series_names, y)
    } else {
        use rand::SeedableRng;
        let kind: CaseKind = args.case.expect("clap enforces --case xor --model").into();
        let case = simharness::make_case(kind, args.k)?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
        let y = simharness::draw_gaussian(&case.sigma, args.t, &mut rng)?;
        let names = (1..=args.k).map(|i| format!("series{i}")).collect();
        (names, y)
    };
    dataset::write(&args.out, &names, &y)?;
    println!(
        "wrote {} rows x {} series to {}",
        y.nrows(),
        y.ncols(),
        args.out.display()
    );
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<(), CmdError> {
    if args.reps == 0 {
        return Err(CmdError::usage("--reps must be at least 1"));
    }
    let case = simharness::make_case(args.case.into(), args.k)?;
    let mut estimators: Vec<EstimatorKind> = args.estimators.iter().map(|&e| e.into()).collect();
    estimators.dedup();

    let mut table2_rows = Vec::new();
    let mut table3_rows = Vec::new();
    for &t in &args.t_grid {
        let out = simharness::run_replications(&case, t, args.reps, &estimators, args.seed)?;
        let mut row = vec![t.to_string()];
        row.extend(out.rank_freq.iter().map(|c| c.to_string()));
        row.push(out.failed.to_string());
        table2_rows.push(row);
        for s in &out.summaries {
            table3_rows.push(vec![
                format!("{:?}", out.case),
                t.to_string(),
                s.tag.clone(),
                s.sl_reduction.to_string(),
                s.sl_reduction_se.to_string(),
                s.mse_spectral_reduction.to_string(),
                s.mse_spectral_reduction_se.to_string(),
                s.mse_frobenius_reduction.to_string(),
                s.mse_frobenius_reduction_se.to_string(),
            ]);
        }
    }

    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CmdError::usage(format!("cannot create {}: {e}", args.out_dir.display())))?;

    let mut t2_header = vec!["T".to_string()];
    t2_header.extend((0..args.k).map(|d| format!("d{d}")));
    t2_header.push("failed".to_string());
    let t2_refs: Vec<&str> = t2_header.iter().map(String::as_str).collect();
    dataset::write_table(&args.out_dir.join("table2.csv"), &t2_refs, &table2_rows)?;

    dataset::write_table(
        &args.out_dir.join("table3.csv"),
        &[
            "case",
            "T",
            "estimator",
            "sl_reduction",
            "sl_se",
            "mse_spectral_reduction",
            "mse_spectral_se",
            "mse_frobenius_reduction",
            "mse_frobenius_se",
        ],
        &table3_rows,
    )?;

    println!(
        "wrote table2.csv and table3.csv to {} ({} replications per T)",
        args.out_dir.display(),
        args.reps
    );
    Ok(())
}
