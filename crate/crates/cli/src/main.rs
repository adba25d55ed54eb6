//! Command-line front end: benchmarks, training, encoding and checks.
//!
//! Exit codes: 0 on success, 1 on invalid input, 2 on numerical failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dltf::bench::{
    generate_synthetic, run_param_sweep, run_support_recovery_bench, timing_compare, BenchConfig,
    BenchReport, Method, SweepParam, TimingConfig,
};
use dltf::encoder::encode_batch;
use dltf::guarantees::mutual_coherence;
use dltf::io::{load_data, load_dictionary, save_data, save_dictionary};
use dltf::prox_selftest::{run_selftest, SelftestConfig};
use dltf::trainer::{train, Hyperparams};
use dltf::Result;

#[derive(Parser)]
#[command(name = "dltf", version, about = "Dictionary learning for thresholded features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Support-recovery benchmark on synthetic data.
    SynthBench(BenchArgs),
    /// Repeat the benchmark over a grid of one parameter.
    Sweep {
        /// lambda, theta or n.
        #[arg(long)]
        param: SweepParam,
        /// Comma-separated grid values.
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<f64>,
        #[command(flatten)]
        bench: BenchArgs,
    },
    /// Train a dictionary on a data file.
    Train(TrainArgs),
    /// Thresholded features of a data file as `sample,atom,value` rows.
    Encode {
        #[arg(long)]
        dict: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mutual coherence of a dictionary file.
    Coherence {
        #[arg(long)]
        dict: PathBuf,
    },
    /// Randomized optimality check of the (k,2) prox.
    ProxSelftest {
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
    },
    /// Thresholded encoding vs per-sample OMP wall-clock.
    Timing {
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = 128)]
        m: usize,
        #[arg(long = "N", default_value_t = 2000)]
        n_samples: usize,
        #[arg(long, default_value_t = 8)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
    /// Write a synthetic data file (and optionally its generator).
    SynthData {
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = 128)]
        m: usize,
        #[arg(long = "N", default_value_t = 2000)]
        n_samples: usize,
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 0.1)]
        noise_std: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dict_out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct BenchArgs {
    /// JSON config; flags given alongside override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// Train and test set size.
    #[arg(long = "N")]
    n_samples: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    seed: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    ksvd_iters: Option<usize>,
    #[arg(long)]
    dltf_iters: Option<usize>,
    /// Output path; `.json` and `.csv` files are written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl BenchArgs {
    fn resolve(&self) -> Result<BenchConfig> {
        let mut cfg = match &self.config {
            Some(p) => BenchConfig::load(p)?,
            None => BenchConfig::default(),
        };
        macro_rules! set {
            ($field:ident, $value:expr) => {
                if let Some(v) = $value {
                    cfg.$field = v.clone();
                }
            };
        }
        set!(n, &self.n);
        set!(m, &self.m);
        set!(n_train, &self.n_samples);
        set!(n_test, &self.n_samples);
        set!(k_list, &self.k);
        set!(lambda, &self.lambda);
        set!(theta, &self.theta);
        set!(beta, &self.beta);
        set!(seeds, &self.seed);
        set!(methods, &self.methods);
        set!(noise_std, &self.noise_std);
        set!(ksvd_iters, &self.ksvd_iters);
        set!(dltf_outer_iters, &self.dltf_iters);
        if self.out.is_some() {
            cfg.output = self.out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Dictionary output file.
    #[arg(long)]
    out: PathBuf,
    /// JSON diagnostics log.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, default_value_t = 128)]
    atoms: usize,
    #[arg(long, default_value_t = 0.05)]
    lambda: f64,
    #[arg(long, default_value_t = 0.01)]
    theta: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 30)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn summary_table(report: &BenchReport) -> String {
    let mut s = String::new();
    let ks = &report.config.k_list;
    let _ = write!(s, "{:<10}", "method");
    for k in ks {
        let _ = write!(s, "{:>10}", format!("k={k}"));
    }
    s.push('\n');
    for &method in &report.config.methods {
        let _ = write!(s, "{:<10}", method.name());
        for &k in ks {
            match report.mean_ave_dif(method, k) {
                Some(v) => {
                    let _ = write!(s, "{v:>10.3}");
                }
                None => {
                    let _ = write!(s, "{:>10}", "-");
                }
            }
        }
        s.push('\n');
    }
    if report.partial {
        s.push_str("partial report:\n");
        for f in &report.failures {
            let _ = writeln!(s, "  {} k={} seed={}: {}", f.method, f.k, f.seed, f.error);
        }
    }
    s
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SynthBench(args) => {
            let report = run_support_recovery_bench(&args.resolve()?)?;
            print!("{}", summary_table(&report));
        }
        Command::Sweep { param, grid, bench } => {
            let cfg = bench.resolve()?;
            let points = run_param_sweep(&cfg, param, &grid)?;
            for p in &points {
                println!("{param:?} = {}", p.value);
                print!("{}", summary_table(&p.report));
            }
            if let Some(out) = &cfg.output {
                write_json(&out.with_extension("json"), &points)?;
            }
        }
        Command::Train(a) => {
            let x = load_data(&a.data)?;
            let hp = Hyperparams {
                lambda: a.lambda,
                theta: a.theta,
                beta: a.beta,
                k: a.k,
                atoms: a.atoms,
                outer_iters: a.iters,
                ..Hyperparams::default()
            };
            let out = train(&x, &hp, a.seed)?;
            save_dictionary(&out.dictionary, &a.out)?;
            if let Some(log_path) = &a.log {
                write_json(log_path, &out.state.diagnostics)?;
            }
            if let Some(last) = out.state.diagnostics.last() {
                println!(
                    "{} iterations, lagrangian {:.6}, primal residual {:.3e}",
                    last.iteration, last.lagrangian, last.primal_residual
                );
            }
        }
        Command::Encode { dict, data, k, out } => {
            let w = load_dictionary(&dict)?;
            let x = load_data(&data)?;
            let codes = encode_batch(&w, &x, k)?;
            let mut s = String::from("sample,atom,value\n");
            for i in 0..codes.len() {
                for (atom, v) in codes.column_entries(i) {
                    let _ = writeln!(s, "{i},{atom},{v}");
                }
            }
            std::fs::write(&out, s)?;
        }
        Command::Coherence { dict } => {
            let w = load_dictionary(&dict)?;
            println!("{}", serde_json::to_string(&mutual_coherence(&w)?)?);
        }
        Command::ProxSelftest { instances, seed } => {
            let report = run_selftest(&SelftestConfig { instances, seed, ..Default::default() })?;
            println!(
                "{}: {} instances, max objective gap {:.3e}, max sweep violation {:.3e}, {:.0} ms",
                if report.passed { "PASS" } else { "FAIL" },
                report.instances,
                report.max_objective_gap,
                report.max_sweep_violation,
                report.elapsed_ms
            );
            if !report.passed {
                std::process::exit(2);
            }
        }
        Command::Timing { n, m, n_samples, k, seed, repeats } => {
            let rec = timing_compare(&TimingConfig { n, m, n_samples, k, seed, repeats, ..Default::default() })?;
            println!("{}", serde_json::to_string(&rec)?);
        }
        Command::SynthData { n, m, n_samples, k, noise_std, seed, out, dict_out } => {
            let inst = generate_synthetic(n, m, n_samples, k, noise_std, seed)?;
            save_data(&inst.x, &out)?;
            if let Some(p) = dict_out {
                save_dictionary(&inst.w0, p)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
