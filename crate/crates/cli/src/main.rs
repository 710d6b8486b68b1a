//! Command-line driver around the experiment harness.
//!
//! Every subcommand loads one TOML config (or the built-in default), runs a
//! seeded experiment, and writes `results.csv` plus `verdict.json` into the
//! output directory. Exit codes: 0 = ran and passed, 1 = runtime failure or
//! failed verdict, 2 = the config was refused before anything ran.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use crossdiff::harness::config::ExperimentConfig;
use crossdiff::harness::experiments::{
    particle_run, run_converge_n, run_converge_reg, run_measure_convergence,
    run_pure_diffusion, run_sampler_validation, run_variance_study, solve_configured,
    trajectory_csv,
};
use crossdiff::harness::report::{self, Check, Verdict};
use crossdiff::kernels::MollifierFamily;
use crossdiff::pde::RhsMode;
use crossdiff::Result;

#[derive(Parser)]
#[command(
    name = "crossdiff",
    version,
    about = "Particle and spectral-PDE experiments for fractional cross-diffusion systems"
)]
struct Cli {
    /// TOML experiment config; omitted = the built-in default experiment.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for results.csv, verdict.json and snapshots.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the built-in default configuration as TOML.
    PrintConfig,
    /// Simulate one particle ensemble and snapshot its mollified density.
    SimulateParticles {
        /// Particles per species; defaults to the largest configured N.
        #[arg(long)]
        n: Option<u64>,
        /// Which seed of the ensemble to run.
        #[arg(long, default_value_t = 0)]
        seed_index: u64,
    },
    /// Solve the continuum system and store snapshots plus monitors.
    SolvePde {
        /// Regularize the drift with the interaction kernel of this N.
        #[arg(long)]
        regularized_n: Option<u64>,
    },
    /// Particle-vs-regularized-PDE trajectory norms over the N list.
    ConvergeN,
    /// Regularized-vs-limit PDE norms over the kappa_hat ladder.
    ConvergeReg,
    /// Bounded-Lipschitz probe of the raw empirical measures.
    MeasureConvergence,
    /// Across-seed variance of the interaction force at the probe point.
    VarianceStudy,
    /// Distributional checks of the stable increment sampler.
    ValidateSampler {
        #[arg(long, default_value_t = 1_000_000)]
        ecf_samples: usize,
        #[arg(long, default_value_t = 10_000_000)]
        tail_samples: usize,
    },
    /// Zero-interaction baseline: particles against the fractional heat flow.
    PureDiffusion,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .init();
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) =
            rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global()
        {
            eprintln!("error: cannot size the thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(passed) => {
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_refusal() { 2 } else { 1 })
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default_experiment(),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<bool> {
    if matches!(cli.cmd, Cmd::PrintConfig) {
        print!("{}", ExperimentConfig::default_experiment().to_toml_string()?);
        return Ok(true);
    }
    let started = Instant::now();
    let cfg = load_config(cli)?;
    let hash = report::config_hash(&cfg)?;
    std::fs::create_dir_all(&cli.out)?;

    let (name, table, checks) = match &cli.cmd {
        Cmd::PrintConfig => unreachable!("handled above"),
        Cmd::SimulateParticles { n, seed_index } => {
            let n = n.unwrap_or_else(|| *cfg.particles.n_list.last().expect("validated"));
            let run = particle_run(&cfg, n, *seed_index)?;
            for (k, f) in run.fields.iter().enumerate() {
                f.write_binary_file(cli.out.join(format!("particles_t{k:03}.bin")))?;
            }
            write_profiles(&cli.out, "particles_final", run.fields.last().expect("snapshots"))?;
            let mut checks = vec![mass_check(&run.fields)];
            checks.push(Check::new(
                "no_clipped_jumps",
                run.clipped == 0,
                format!("clipped {}", run.clipped),
            ));
            ("simulate-particles", run.to_csv(&hash, cfg.master_seed), checks)
        }
        Cmd::SolvePde { regularized_n } => {
            let mode = match regularized_n {
                Some(n) => {
                    let fam = MollifierFamily::from_scaling(*n, &cfg.scaling, cfg.model.d)?;
                    RhsMode::Regularized { kappa_hat_n: fam.kappa_hat_n }
                }
                None => RhsMode::Limit,
            };
            let traj = solve_configured(&cfg, mode)?;
            for (k, f) in traj.states.iter().enumerate() {
                f.write_binary_file(cli.out.join(format!("pde_t{k:03}.bin")))?;
            }
            write_profiles(&cli.out, "pde_final", traj.final_state())?;
            let u0 = &traj.states[0];
            let max0 = (0..u0.n_species()).fold(0.0_f64, |m, i| m.max(u0.max_value(i)));
            let min_all = traj
                .states
                .iter()
                .flat_map(|f| (0..f.n_species()).map(|i| f.min_value(i)).collect::<Vec<_>>())
                .fold(f64::INFINITY, f64::min);
            let checks = vec![
                mass_check(&traj.states),
                Check::new(
                    "min_value_above_noise_floor",
                    min_all >= -1e-6 * max0,
                    format!("min {} floor {}", min_all, -1e-6 * max0),
                ),
                Check::new("cfl_advisory", true, format!("max cfl {}", traj.max_cfl)),
            ];
            ("solve-pde", trajectory_csv(&traj, "solve-pde", &hash, cfg.master_seed), checks)
        }
        Cmd::ConvergeN => {
            let rep = run_converge_n(&cfg)?;
            let ns: Vec<f64> = rep.groups.iter().map(|g| g.n as f64).collect();
            let meds: Vec<f64> = rep.groups.iter().map(|g| g.median_err_sq).collect();
            report::write_dat(cli.out.join("medians.dat"), &ns, &meds)?;
            ("converge-n", rep.to_csv(&hash, cfg.master_seed), rep.checks())
        }
        Cmd::ConvergeReg => {
            let rep = run_converge_reg(&cfg)?;
            let ks: Vec<f64> = rep.rows.iter().map(|r| r.kappa_hat_n).collect();
            let errs: Vec<f64> = rep.rows.iter().map(|r| r.err_sq).collect();
            report::write_dat(cli.out.join("rate.dat"), &ks, &errs)?;
            ("converge-reg", rep.to_csv(&hash, cfg.master_seed), rep.checks())
        }
        Cmd::MeasureConvergence => {
            let rep = run_measure_convergence(&cfg)?;
            let ns: Vec<f64> = rep.groups.iter().map(|g| g.n as f64).collect();
            let meds: Vec<f64> = rep.groups.iter().map(|g| g.median_sup).collect();
            report::write_dat(cli.out.join("medians.dat"), &ns, &meds)?;
            ("measure-convergence", rep.to_csv(&hash, cfg.master_seed), rep.checks())
        }
        Cmd::VarianceStudy => {
            let rep = run_variance_study(&cfg)?;
            let ns: Vec<f64> = rep.rows.iter().map(|r| r.n as f64).collect();
            let vars: Vec<f64> = rep.rows.iter().map(|r| r.variance).collect();
            report::write_dat(cli.out.join("variance.dat"), &ns, &vars)?;
            ("variance-study", rep.to_csv(&hash, cfg.master_seed), rep.checks())
        }
        Cmd::ValidateSampler { ecf_samples, tail_samples } => {
            let rep = run_sampler_validation(&cfg, *ecf_samples, *tail_samples)?;
            let xi: Vec<f64> = rep.ecf.xi.iter().map(|f| f[0]).collect();
            report::write_dat(cli.out.join("ecf.dat"), &xi, &rep.ecf.re)?;
            ("validate-sampler", rep.to_csv(&hash, cfg.master_seed), rep.checks())
        }
        Cmd::PureDiffusion => {
            let rep = run_pure_diffusion(&cfg)?;
            let seeds: Vec<f64> = rep.rows.iter().map(|r| r.seed as f64).collect();
            let errs: Vec<f64> = rep.rows.iter().map(|r| r.err_sq).collect();
            report::write_dat(cli.out.join("errors.dat"), &seeds, &errs)?;
            ("pure-diffusion", rep.to_csv(&hash, cfg.master_seed), rep.checks())
        }
    };

    table.write(cli.out.join("results.csv"))?;
    let verdict = Verdict::new(
        name,
        &hash,
        cfg.master_seed,
        checks,
        started.elapsed().as_secs_f64(),
        rayon::current_num_threads(),
    );
    report::write_json(cli.out.join("verdict.json"), &verdict)?;
    for c in &verdict.checks {
        println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!(
        "{name}: {} ({} rows, {:.2}s)",
        if verdict.passed { "PASS" } else { "FAIL" },
        table.n_rows(),
        verdict.wall_seconds
    );
    Ok(verdict.passed)
}

/// Largest per-species mass drift over a snapshot sequence.
fn mass_check(fields: &[crossdiff::Field]) -> Check {
    let first = &fields[0];
    let mut worst = 0.0_f64;
    for f in fields {
        for i in 0..f.n_species() {
            worst = worst.max((f.mass(i) - first.mass(i)).abs());
        }
    }
    Check::new("mass_conserved", worst <= 1e-10, format!("max drift {worst:e}"))
}

/// Per-species final profiles as two-column files (one dimension only).
fn write_profiles(out: &std::path::Path, stem: &str, f: &crossdiff::Field) -> Result<()> {
    let grid = f.grid();
    if grid.dim() != 1 {
        return Ok(());
    }
    let xs: Vec<f64> = (0..grid.nodes_per_axis()).map(|p| grid.node(p)).collect();
    for i in 0..f.n_species() {
        report::write_dat(out.join(format!("{stem}_species{i}.dat")), &xs, f.species(i))?;
    }
    Ok(())
}
