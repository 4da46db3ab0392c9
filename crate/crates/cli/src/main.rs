use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rmlab::experiments::{
    counterexample_csv, hp_csv, run_sweep, scenario_convergence, scenario_counterexample, scenario_hp_vs_strong,
    timing_lines, ExperimentConfig, ScenarioSetup,
};
use rmlab::models::Evaluable;
use rmlab::problems::{preset, probe_family, probe_stability_constant};
use rmlab::quadrature::{fit_loglog_slope, SampleTarget};
use rmlab::training::{estimate_rademacher, unit_path_norm_family};
use rmlab::Error;

const SEED_VAR: &str = "RM_LAB_SEED";

#[derive(Parser)]
#[command(name = "rm-lab", version, about = "Residual-minimization experiments for linear PDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the sweep grid of a TOML config.
    Run {
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output directory; overrides [output].dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Discrete vs continuous loss of the grid adversary.
    Counterexample {
        #[arg(long, value_delimiter = ',', default_values_t = [4usize, 8, 16, 64])]
        mr: Vec<usize>,
    },
    /// Empirical Rademacher complexity of unit path-norm networks.
    Rademacher {
        #[arg(long)]
        preset: String,
        /// `a..b` for the powers of two in [a, b], or a comma list.
        #[arg(long, default_value = "16..4096")]
        m_grid: String,
        #[arg(long, default_value_t = 20)]
        networks: usize,
        #[arg(long, default_value_t = 16)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Empirical C1 and C2 over the preset's probe family.
    ProbeConstants {
        #[arg(long)]
        preset: String,
    },
    /// Error against width and sample count, medians over seeds.
    Convergence {
        #[arg(long, default_value = "poisson1d_sin")]
        preset: String,
        #[arg(long, value_delimiter = ',', default_values_t = [8usize, 16, 32])]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [64usize, 256, 1024])]
        mr: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [1u64, 2, 3])]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 2000)]
        iters: usize,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Strong-form RM against hp-VRM and the piecewise-constant weak form.
    HpVsStrong {
        #[arg(long, default_value = "poisson1d_sin")]
        preset: String,
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 4])]
        k: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [2usize, 4, 8])]
        n: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        iters: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Input(_) => Failure::Config(e.to_string()),
            _ => Failure::Run(e.to_string()),
        }
    }
}

fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var(SEED_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Config(format!("{SEED_VAR}={v} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn parse_grid(s: &str) -> Result<Vec<usize>, Failure> {
    let bad = || Failure::Config(format!("bad M grid '{s}'"));
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        if a == 0 || a > b {
            return Err(bad());
        }
        let mut m = a.next_power_of_two();
        let mut out = Vec::new();
        while m <= b {
            out.push(m);
            m *= 2;
        }
        Ok(out)
    } else {
        s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
    }
}

fn write_out(dir: &Path, name: &str, body: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Run(e.to_string()))?;
    fs::write(dir.join(name), body).map_err(|e| Failure::Run(e.to_string()))
}

fn run(config: &Path, jobs: usize, out: Option<PathBuf>) -> Result<(), Failure> {
    let text = fs::read_to_string(config).map_err(|e| Failure::Config(format!("{}: {e}", config.display())))?;
    let mut cfg = ExperimentConfig::from_toml_str(&text)
        .map_err(|e| Failure::Config(format!("{}: {e}", config.display())))?;
    if let Some(seed) = env_seed()? {
        cfg.override_seed(seed);
    }
    let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let sweep = run_sweep(&cfg, &text, &dir, jobs)?;
    print!("{}", sweep.summary);
    eprint!("{}", timing_lines(&sweep.outcomes));
    match sweep.failed() {
        0 => Ok(()),
        k => Err(Failure::Run(format!("{k} of {} runs failed", sweep.outcomes.len()))),
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { config, jobs, out } => run(&config, jobs, out),
        Command::Counterexample { mr } => {
            let rows = scenario_counterexample(&mr)?;
            print!("{}", counterexample_csv(&rows));
            Ok(())
        }
        Command::Rademacher {
            preset: name,
            m_grid,
            networks,
            width,
            trials,
            seed,
        } => {
            let prob = preset(&name).map_err(|e| Failure::Config(e.to_string()))?;
            let seed = env_seed()?.or(seed).unwrap_or(0);
            let grid = parse_grid(&m_grid)?;
            let fam = unit_path_norm_family(prob.dim(), width, networks, seed)?;
            let fs: Vec<_> = fam.iter().map(|m| move |x: &[f64]| m.value(x)).collect();
            let region = prob.interior_region();
            println!("m,estimate,stderr");
            let (mut xs, mut ys) = (Vec::new(), Vec::new());
            for &m in &grid {
                let r = estimate_rademacher(&fs, &region, SampleTarget::Interior, m, 16, trials, seed)?;
                println!("{},{:e},{:e}", m, r.estimate, r.stderr);
                xs.push(m as f64);
                ys.push(r.estimate);
            }
            if let Ok(s) = fit_loglog_slope(&xs, &ys) {
                eprintln!("fitted log-log slope {s:.4}");
            }
            Ok(())
        }
        Command::ProbeConstants { preset: name } => {
            let prob = preset(&name).map_err(|e| Failure::Config(e.to_string()))?;
            let probe = probe_stability_constant(&prob, &probe_family(&name)?)?;
            println!("label,residual_norm,boundary_norm,v_norm,x_norm");
            for r in &probe.rows {
                println!(
                    "{},{:e},{:e},{:e},{:e}",
                    r.label.replace(',', ";"),
                    r.residual_norm,
                    r.boundary_norm,
                    r.v_norm,
                    r.x_norm
                );
            }
            println!("# c1_hat={:e} c2_hat={:e}", probe.c1_hat, probe.c2_hat);
            Ok(())
        }
        Command::Convergence {
            preset,
            n,
            mr,
            seeds,
            iters,
            jobs,
            out,
        } => {
            let seeds = env_seed()?.map(|s| vec![s]).unwrap_or(seeds);
            let mut setup = ScenarioSetup {
                jobs,
                ..ScenarioSetup::default()
            };
            setup.optim.max_iter = iters;
            let rep = scenario_convergence(&preset, &n, &mr, &seeds, &setup)?;
            print!("{}", rep.cells_csv());
            for (n, ok) in &rep.error_vs_m_nonincreasing {
                eprintln!("n={n}: error nonincreasing in M: {ok}");
            }
            eprintln!("error nonincreasing in n at largest M: {}", rep.error_vs_n_nonincreasing);
            if let Some(dir) = out {
                write_out(&dir, "cells.csv", &rep.cells_csv())?;
                write_out(&dir, "runs.csv", &rep.runs_csv())?;
            }
            Ok(())
        }
        Command::HpVsStrong {
            preset,
            k,
            n,
            iters,
            seed,
        } => {
            let mut setup = ScenarioSetup::default();
            setup.optim.max_iter = iters;
            let seed = env_seed()?.or(seed).unwrap_or(1);
            let rows = scenario_hp_vs_strong(&preset, &k, &n, seed, &setup)?;
            print!("{}", hp_csv(&rows));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("rm-lab: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Run(m)) => {
            eprintln!("rm-lab: {m}");
            ExitCode::from(3)
        }
    }
}
