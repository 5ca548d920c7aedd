use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use gpt_pinn::archive::{load_model, save_model, save_pinn};
use gpt_pinn::config::RunConfig;
use gpt_pinn::eval::{
    draw_test_params, evaluate_test_set, svd_snapshot_experiment, timing_benchmark, BenchConfig,
    EvalGrid, FdReference, PinnReference, ReferenceSource, SnapshotExperiment,
};
use gpt_pinn::gpt::{online_train, GptModel, OnlineConfig};
use gpt_pinn::greedy::{run_offline, uniform_baseline};
use gpt_pinn::output::{self, OnlineRow, RunMeta};
use gpt_pinn::pde::ParameterPoint;
use gpt_pinn::pinn::train_pinn;
use gpt_pinn::reference::FdConfig;
use gpt_pinn::{Error, Result};

const LBFGS_NOTE: &str =
    "full-PINN L-BFGS stage replaced by Adam with an optional step decay of the rate";
const FILTER_NOTE: &str = "stiff-point filter applied to the interior set only";

#[derive(Parser)]
#[command(name = "gpt-pinn", version, about = "Generative pre-trained PINNs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one full PINN at a parameter value.
    TrainFull {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated parameter, e.g. "-1,0,1".
        #[arg(long, allow_hyphen_values = true)]
        mu: String,
        /// Output directory; `[output] dir` of the configuration if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Greedy offline stage: select parameters, train neurons, save the model.
    Offline {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; `[output] dir` of the configuration if absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also build the uniformly sampled model of the same size.
        #[arg(long)]
        uniform_baseline: bool,
    },
    /// Solve for the coefficients at one parameter value.
    Online {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        mu: String,
        /// Output directory; `[output] dir` of the configuration if absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Supplies the domain and online settings; family defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        optimizer: Option<String>,
        /// Prediction grid as "nx,nt".
        #[arg(long, default_value = "101,101")]
        grid: String,
    },
    /// Errors of the model on random test parameters.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Output directory; `[output] dir` of the configuration if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cumulative cost of full PINNs versus the meta-network.
    Bench {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Output directory; `[output] dir` of the configuration if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Singular values of solution and network-parameter snapshots.
    Svd {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; `[output] dir` of the configuration if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::TrainFull { config, mu, out } => train_full(&config, &mu, out),
        Command::Offline {
            config,
            out,
            uniform_baseline,
        } => offline(&config, out, uniform_baseline),
        Command::Online {
            model,
            mu,
            out,
            config,
            lr,
            epochs,
            optimizer,
            grid,
        } => {
            let cfg = config.as_deref().map(RunConfig::load).transpose()?;
            let mut online = cfg
                .as_ref()
                .map_or_else(|| OnlineConfig::new(0.025, 2000), RunConfig::online_config);
            online.lr = lr.unwrap_or(online.lr);
            online.epochs = epochs.unwrap_or(online.epochs);
            online.optimizer = optimizer.unwrap_or(online.optimizer);
            online_query(&model, &mu, out, cfg.as_ref(), &online, &grid)
        }
        Command::Eval { model, config, out } => eval(&model, &config, out),
        Command::Bench { model, config, out } => bench(&model, &config, out),
        Command::Svd { config, out } => svd(&config, out),
    }
}

fn meta_for(command: &str, cfg: &RunConfig) -> Result<RunMeta> {
    let mut meta = RunMeta::new(command);
    meta.config_hash = Some(cfg.hash());
    meta.seeds
        .insert("collocation".into(), cfg.collocation.seed);
    meta.seeds.insert("full_pinn".into(), cfg.full_pinn.seed);
    if let Some(r) = &cfg.collocation.reduced {
        meta.seeds.insert("reduced_collocation".into(), r.seed);
    }
    meta.deviations.push(LBFGS_NOTE.into());
    if cfg.filter()?.is_some() {
        meta.deviations.push(FILTER_NOTE.into());
    }
    Ok(meta)
}

fn out_dir(arg: Option<PathBuf>, cfg: Option<&RunConfig>) -> Result<PathBuf> {
    arg.or_else(|| cfg.and_then(|c| c.output.as_ref()).map(|o| o.dir.clone()))
        .ok_or_else(|| Error::Config("no output directory: pass --out or set [output] dir".into()))
}

fn parse_grid(text: &str, model: &GptModel, horizon: f64) -> Result<EvalGrid> {
    let bad = || {
        Error::Config(format!(
            "grid must be \"nx,nt\" with both at least 2, got `{text}`"
        ))
    };
    let parts: Vec<usize> = text
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    match parts[..] {
        [nx, nt] if nx >= 2 && nt >= 2 => {
            Ok(EvalGrid::new(nx, nt, model.pde().space_interval(), horizon))
        }
        _ => Err(bad()),
    }
}

fn train_full(config: &Path, mu: &str, out: Option<PathBuf>) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let out = &out_dir(out, Some(&cfg))?;
    let pde = cfg.pde_family()?;
    let mu = ParameterPoint::parse(mu)?;
    cfg.domain()?.check(&mu)?;
    let meta = meta_for("train-full", &cfg)?;
    meta.write(out)?;

    let pinn = train_pinn(
        pde.as_ref(),
        &mu,
        cfg.collocation()?,
        &cfg.train_config()?,
        cfg.full_pinn.seed,
    )?;
    info!(
        "trained at {mu}: loss {:.3e} after {} epochs in {:.1} s",
        pinn.terminal_loss, pinn.epochs_run, pinn.wall_time
    );
    save_pinn(&pinn, pde.as_ref(), &out.join("pinn.gptpinn"))?;
    output::write_loss_history(&out.join("loss_history.csv"), &pinn.loss_history)?;
    let points = cfg.eval_grid()?.points();
    output::write_prediction(
        &out.join("prediction.csv"),
        &points,
        &pinn.params.forward_many(&points),
    )?;
    println!("terminal loss {:e}", pinn.terminal_loss);
    Ok(())
}

fn write_model_outputs(model: &GptModel, dir: &Path) -> Result<()> {
    let dim = model.pde().param_names().len();
    output::write_greedy_outputs(dir, &model.history, dim)?;
    for (k, n) in model.neurons().iter().enumerate() {
        output::write_loss_history(
            &dir.join(format!("loss_history_neuron_{}.csv", k + 1)),
            &n.loss_history,
        )?;
    }
    if !model.is_empty() {
        save_model(model, &dir.join("model.gptpinn"))?;
    }
    Ok(())
}

fn offline(config: &Path, out: Option<PathBuf>, baseline: bool) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let out = &out_dir(out, Some(&cfg))?;
    let pde = cfg.pde_family()?;
    let greedy = cfg.greedy_config()?;
    let mut meta = meta_for("offline", &cfg)?;
    meta.seeds.insert("greedy".into(), greedy.seed);
    meta.write(out)?;

    let model = match run_offline(&pde, &greedy) {
        Ok(m) => m,
        Err(failure) => {
            write_model_outputs(&failure.partial, out)?;
            return Err(failure.into());
        }
    };
    write_model_outputs(&model, out)?;
    for (k, r) in model.history.rounds.iter().enumerate() {
        println!(
            "neuron {}: mu = {} (indicator {:e})",
            k + 1,
            r.mu,
            r.max_indicator
        );
    }
    if let Some(worst) = model.history.indicator_sequence().last() {
        println!("worst indicator with {} neurons: {worst:e}", model.len());
    }

    if baseline {
        let uniform = uniform_baseline(&pde, &greedy, model.len()).map_err(Error::from)?;
        write_model_outputs(&uniform, &out.join("uniform"))?;
        if let Some(worst) = uniform
            .history
            .final_scan
            .as_ref()
            .map(|s| s.iter().copied().fold(0.0, f64::max))
        {
            println!("uniform baseline worst indicator: {worst:e}");
        }
    }
    Ok(())
}

fn online_query(
    model_path: &Path,
    mu: &str,
    out: Option<PathBuf>,
    cfg: Option<&RunConfig>,
    online: &OnlineConfig,
    grid: &str,
) -> Result<()> {
    online.validate()?;
    let out = &out_dir(out, cfg)?;
    let model = load_model(model_path)?;
    let mu = ParameterPoint::parse(mu)?;
    let (domain, horizon) = match cfg {
        Some(c) => (c.domain()?, c.horizon()?),
        None => (model.pde().default_domain(), model.pde().default_horizon()),
    };
    domain.check(&mu)?;
    let grid = parse_grid(grid, &model, horizon)?;

    let mut meta = match cfg {
        Some(c) => meta_for("online", c)?,
        None => {
            let mut m = RunMeta::new("online");
            m.deviations.push(LBFGS_NOTE.into());
            if model.filter().is_some() {
                m.deviations.push(FILTER_NOTE.into());
            }
            m
        }
    };
    meta.seeds.clear();
    meta.write(out)?;

    let c0 = model.init_coeffs(&mu);
    let r = online_train(&model, &mu, &c0, online)?;
    output::write_coefficients(&out.join("coefficients.csv"), &r.c)?;
    let dim = model.pde().param_names().len();
    output::write_online_results(
        &out.join("online_results.csv"),
        &[OnlineRow {
            mu: &mu,
            delta: r.delta,
            epochs: r.epochs,
            t_online: r.wall_time,
        }],
        dim,
    )?;
    let points = grid.points();
    output::write_prediction(
        &out.join("prediction.csv"),
        &points,
        &model.predict(&r.c, &points)?,
    )?;
    println!(
        "indicator {:e} after {} epochs ({:.3} s)",
        r.delta, r.epochs, r.wall_time
    );
    Ok(())
}

fn eval(model_path: &Path, config: &Path, out: Option<PathBuf>) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let out = &out_dir(out, Some(&cfg))?;
    let model = load_model(model_path)?;
    check_family(&cfg, &model)?;
    let mut meta = meta_for("eval", &cfg)?;
    meta.seeds.insert("eval".into(), cfg.eval.seed);
    meta.write(out)?;

    let params = draw_test_params(
        &cfg.domain()?,
        cfg.eval.test_count,
        cfg.eval.seed,
        &model.mus(),
    );
    let reference: Box<dyn ReferenceSource> = match cfg.eval.reference.as_str() {
        "fd" => Box::new(FdReference {
            config: FdConfig::default(),
            horizon: cfg.horizon()?,
        }),
        _ => Box::new(PinnReference {
            train: cfg.train_config()?,
            colloc: cfg.collocation()?,
            seed: cfg.full_pinn.seed,
            cache_dir: cfg.eval.cache_dir.clone(),
            cache_only: false,
        }),
    };
    let report = evaluate_test_set(
        &model,
        &params,
        reference.as_ref(),
        &cfg.eval_grid()?,
        Some(&cfg.online_config()),
    )?;
    output::write_test_errors(
        &out.join("test_errors.csv"),
        &report,
        model.pde().param_names().len(),
    )?;
    println!(
        "{} test parameters: worst relative L2 {:e}, worst max-abs {:e}",
        report.rows.len(),
        report.worst_rel_l2(),
        report.worst_max_abs()
    );
    Ok(())
}

fn bench(model_path: &Path, config: &Path, out: Option<PathBuf>) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let out = &out_dir(out, Some(&cfg))?;
    let model = load_model(model_path)?;
    check_family(&cfg, &model)?;
    let mut meta = meta_for("bench", &cfg)?;
    meta.seeds.insert("bench".into(), cfg.bench.seed);
    meta.write(out)?;

    let queries = draw_test_params(
        &cfg.domain()?,
        cfg.bench.queries,
        cfg.bench.seed,
        &model.mus(),
    );
    let bench = BenchConfig {
        train: cfg.train_config()?,
        colloc: cfg.collocation()?,
        online: cfg.online_config(),
        full_samples: cfg.bench.full_samples,
        seed: cfg.full_pinn.seed,
        single_threaded: cfg.bench.single_threaded,
    };
    let curve = timing_benchmark(&model, &queries, &bench)?;
    output::write_timing(&out.join("timing.csv"), &curve)?;
    let breakeven = curve
        .breakeven()
        .map_or("none".to_owned(), |q| q.to_string());
    println!(
        "full PINN {:.3} s/query, meta-network {:.4} s/query (ratio {:.4}), offline {:.1} s, breakeven at {breakeven} queries",
        curve.t_full,
        curve.t_gpt,
        curve.marginal_ratio(),
        curve.offline
    );
    Ok(())
}

fn svd(config: &Path, out: Option<PathBuf>) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let out = &out_dir(out, Some(&cfg))?;
    let pde = cfg.pde_family()?;
    let mut meta = meta_for("svd", &cfg)?;
    meta.seeds.insert("svd".into(), cfg.svd.seed);
    meta.write(out)?;

    let mut train = cfg.train_config()?;
    train.epochs = cfg.svd.epochs;
    let exp = SnapshotExperiment {
        params: draw_test_params(&cfg.domain()?, cfg.svd.count, cfg.svd.seed, &[]),
        fd: cfg.fd_config(),
        horizon: cfg.horizon()?,
        stride: cfg.svd.stride,
        train,
        colloc: cfg.collocation()?,
        seed: cfg.full_pinn.seed,
    };
    let (solution, theta) = svd_snapshot_experiment(pde.as_ref(), &exp)?;
    output::write_svd(&out.join("svd.csv"), &[&solution, &theta])?;
    println!("{solution}\n{theta}");
    Ok(())
}

fn check_family(cfg: &RunConfig, model: &GptModel) -> Result<()> {
    let pde = cfg.pde_family()?;
    if pde.name() != model.pde().name() {
        return Err(Error::Config(format!(
            "model is for {}, configuration for {}",
            model.pde().name(),
            pde.name()
        )));
    }
    Ok(())
}
