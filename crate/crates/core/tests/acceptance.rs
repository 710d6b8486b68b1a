//! Acceptance suite: one test per advertised guarantee, each at its stated
//! tolerance. Every test ends with a single PASS line so a full log can be
//! scanned criterion by criterion; run with `--nocapture` to see them.

use std::time::Instant;

use crossdiff::frac_ops::{
    frac_gradient, frac_laplacian, h_alpha_seminorm, l2_norm, l2_norm_sq_comp,
    pv_frac_laplacian_point, riesz_potential,
};
use crossdiff::harness::config::ExperimentConfig;
use crossdiff::harness::experiments::{
    run_converge_n, run_converge_reg, run_measure_convergence, run_sampler_validation,
    run_variance_study,
};
use crossdiff::harness::report;
use crossdiff::kernels::{mollifier_rate_check, ForceTable, MollifierFamily};
use crossdiff::particles::{
    generator_check_interacting, generator_check_pure_jump, ParticleEnsemble,
};
use crossdiff::pde::{self, RhsMode, SolverConfig};
use crossdiff::rng::RngStream;
use crossdiff::{Field, ModelParams, PeriodicGrid};

const TAU: f64 = 2.0 * std::f64::consts::PI;

fn pass(id: u32, what: &str, detail: String, t0: Instant) {
    println!("PASS {id:02} {what}: {detail} [{:.2}s]", t0.elapsed().as_secs_f64());
}

/// Isometry of the fractional calculus: composing the Riesz potential of
/// order (1 - alpha)/2 with the plain gradient must reproduce the
/// |xi|^alpha multiplier norm exactly, for arbitrary nodal data in one and
/// two dimensions.
#[test]
fn c01_fractional_gradient_composition_preserves_l2_norm() {
    let t0 = Instant::now();
    let mut worst = 0.0_f64;
    let mut count = 0;
    for (d, m, l, fields) in [(1usize, 256usize, 8.0 * TAU, 64u64), (2, 32, 6.0, 36)] {
        for i in 0..fields {
            let mut rng = RngStream::from_parts(&[0xACC0_0001, d as u64, i]);
            let alpha = 0.55 + 0.4 * rng.uniform();
            let grid = PeriodicGrid::new(d, m, l).unwrap();
            let f = Field::from_fn(grid, 2, |_, _| rng.normal()).unwrap();
            let smoothed = riesz_potential(&f, 0.5 * (1.0 - alpha)).unwrap();
            let grads = frac_gradient(&smoothed, 1.0).unwrap();
            let mut lhs_sq = 0.0;
            for g in &grads {
                for s in 0..g.n_species() {
                    lhs_sq += l2_norm_sq_comp(g.grid(), g.species(s));
                }
            }
            let lhs = lhs_sq.sqrt();
            let rhs = h_alpha_seminorm(&f, alpha);
            worst = worst.max((lhs - rhs).abs() / rhs);
            count += 1;
        }
    }
    assert_eq!(count, 100);
    assert!(worst <= 1e-12, "worst relative deviation {worst:e} exceeds 1e-12");
    pass(1, "gradient/riesz composition is an isometry", format!("worst rel dev {worst:.2e}"), t0);
}

/// The pointwise principal-value quadrature and the spectral multiplier are
/// independent discretizations of the same operator; on a smooth periodic
/// function they must agree to 1e-4.
#[test]
fn c02_pointwise_quadrature_matches_spectral_operator_on_sine() {
    let t0 = Instant::now();
    let grid = PeriodicGrid::new(1, 4096, TAU).unwrap();
    let f = Field::from_fn(grid, 1, |_, x| x[0].sin()).unwrap();
    let alpha = 0.85;
    let lap = frac_laplacian(&f, alpha).unwrap();
    let mut worst = 0.0_f64;
    for k in 0..8 {
        let idx = 256 + 512 * k;
        let x = grid.node(idx);
        let pv = pv_frac_laplacian_point(|y| y[0].sin(), &[x], alpha, 1.0, 1e3).unwrap();
        let dev = (pv - lap.species(0)[idx]).abs();
        assert!(dev <= 1e-4, "pv/spectral deviation {dev:e} at x = {x}");
        worst = worst.max(dev);
    }
    pass(2, "pv quadrature matches the multiplier route", format!("worst dev {worst:.2e}"), t0);
}

/// Acting on the slowly growing profile log(2 + x^2), the fractional
/// Laplacian stays pointwise proportional to the profile itself. The
/// proportionality constant was fitted once and is frozen here; reruns must
/// land within 1% of it.
#[test]
fn c03_fractional_laplacian_of_log_density_stays_proportionally_bounded() {
    let t0 = Instant::now();
    const FITTED_RATIO: f64 = 1.454478932969;
    let psi = |x: &[f64]| (2.0 + x[0] * x[0]).ln();
    let mut worst = 0.0_f64;
    for &x in &[0.0, 1.0, 10.0, 100.0] {
        let v = pv_frac_laplacian_point(psi, &[x], 0.85, 1.0, 1e3).unwrap();
        let ratio = v.abs() / psi(&[x]);
        assert!(
            ratio <= 1.01 * FITTED_RATIO,
            "ratio {ratio} at x = {x} exceeds the fitted constant {FITTED_RATIO}"
        );
        worst = worst.max(ratio);
    }
    let drift = (worst / FITTED_RATIO - 1.0).abs();
    assert!(drift <= 0.01, "max ratio {worst} drifted {drift:e} from the frozen fit");
    pass(
        3,
        "log-density growth ratio is bounded and reproducible",
        format!("max ratio {worst:.6} (frozen {FITTED_RATIO})"),
        t0,
    );
}

/// Distributional law of the jump increments: the empirical characteristic
/// function of 1e6 increments matches exp(-sigma dt |xi|^(2 alpha)) within
/// three standard errors at every probed frequency, and the survival tail of
/// 1e7 unit-scale samples has log-log slope -2 alpha within 0.1.
#[test]
fn c04_stable_increments_match_target_law_in_cf_and_tail() {
    let t0 = Instant::now();
    let cfg = ExperimentConfig::default_experiment();
    let rep = run_sampler_validation(&cfg, 1_000_000, 10_000_000).unwrap();
    let sigma_dt = cfg.model.sigma[0] * cfg.time.dt_particles;
    for j in 0..rep.ecf.xi.len() {
        let xi = rep.ecf.xi[j][0];
        let target = (-sigma_dt * xi.abs().powf(2.0 * cfg.model.alpha)).exp();
        assert!((target - rep.ecf.expected[j]).abs() <= 1e-12);
        let dev = (rep.ecf.re[j] - target).abs();
        assert!(
            dev <= 3.0 * rep.ecf.re_stderr[j],
            "cf deviation {dev:e} at xi = {xi} exceeds 3 se = {:e}",
            3.0 * rep.ecf.re_stderr[j]
        );
    }
    assert!(rep.ecf_ok, "worst z-score {}", rep.worst_z);
    assert_eq!(rep.tail_target, -2.0 * cfg.model.alpha);
    assert!(
        (rep.tail_slope - rep.tail_target).abs() <= 0.1,
        "tail slope {} vs target {}",
        rep.tail_slope,
        rep.tail_target
    );
    assert!(rep.tail_ok);
    pass(
        4,
        "stable sampler matches its law",
        format!("worst z {:.2}, tail slope {:.3}", rep.worst_z, rep.tail_slope),
        t0,
    );
}

/// The tabulated pairwise drift agrees with an independently written O(N^2)
/// loop to 1e-12 on a small ensemble, and with the deposit/convolve/
/// interpolate grid route to 1e-3 relative L2 at production size.
#[test]
fn c05_pairwise_drift_matches_independent_sum_and_grid_route() {
    let t0 = Instant::now();
    let cfg = ExperimentConfig::default_experiment();
    let u0 = cfg.initial_field().unwrap();
    let grid = *u0.grid();
    let a = &cfg.model.a;
    let fam = MollifierFamily::from_scaling(2000, &cfg.scaling, 1).unwrap();

    let small = ParticleEnsemble::init_from_density(&u0, 64, 7).unwrap();
    let table = ForceTable::build(&fam, cfg.model.beta, grid.length(), 1 << 14).unwrap();
    let direct = small.drift_direct(a, &table).unwrap();
    let w = small.weight();
    let mut worst_small = 0.0_f64;
    for i in 0..small.n_species() {
        for (k, &x) in small.species_positions(i).iter().enumerate() {
            let mut acc = 0.0;
            for (j, aij) in a[i].iter().enumerate() {
                let mut s = 0.0;
                for &y in small.species_positions(j) {
                    s += table.force_1d(grid.min_image(x - y));
                }
                acc -= aij * w * s;
            }
            let got = direct[i * small.n_per_species() + k];
            worst_small = worst_small.max((got - acc).abs() / (1.0 + acc.abs()));
        }
    }
    assert!(worst_small <= 1e-12, "pairwise drift deviates {worst_small:e} from the plain loop");

    let big = ParticleEnsemble::init_from_density(&u0, 2000, 4242).unwrap();
    let fine = ForceTable::build(&fam, cfg.model.beta, grid.length(), 1 << 18).unwrap();
    let pairwise = big.drift_direct(a, &fine).unwrap();
    let gridded = big.drift_grid(a, &fam, cfg.model.beta).unwrap();
    let num: f64 =
        pairwise.iter().zip(&gridded).map(|(p, g)| (p - g) * (p - g)).sum::<f64>().sqrt();
    let den: f64 = pairwise.iter().map(|p| p * p).sum::<f64>().sqrt();
    let rel = num / den;
    assert!(rel <= 1e-3, "grid-route drift deviates {rel:e} in relative l2");
    pass(
        5,
        "drift routes agree",
        format!("loop dev {worst_small:.2e}, grid dev {rel:.2e}"),
        t0,
    );
}

/// Continuum solver invariants: (a) per-species mass is conserved to 1e-10
/// over a unit of time, (b) with the coupling switched off a single Fourier
/// mode decays by exactly exp(-sigma |k|^(2 alpha) t) to 1e-8, (c) the
/// scheme self-converges at order 2.0 +- 0.2 in dt, (d) no snapshot dips
/// below -1e-6 times the initial peak.
#[test]
fn c06_continuum_solver_conserves_mass_decays_modes_and_converges() {
    let t0 = Instant::now();
    let cfg = ExperimentConfig::default_experiment();
    let u0 = cfg.initial_field().unwrap();

    let unit = SolverConfig {
        model: cfg.model.clone(),
        mode: RhsMode::Limit,
        dt: 2e-3,
        t_end: 1.0,
        snapshots: 11,
        monitor_s: None,
    };
    let traj = pde::solve(&u0, &unit).unwrap();
    let mut mass_drift = 0.0_f64;
    for f in &traj.states {
        for i in 0..f.n_species() {
            mass_drift = mass_drift.max((f.mass(i) - u0.mass(i)).abs() / u0.mass(i));
        }
    }
    assert!(mass_drift <= 1e-10, "mass drifted {mass_drift:e} over unit time");

    let max0 = (0..u0.n_species()).fold(0.0_f64, |m, i| m.max(u0.max_value(i)));
    let mut min_all = f64::INFINITY;
    for f in &traj.states {
        for i in 0..f.n_species() {
            min_all = min_all.min(f.min_value(i));
        }
    }
    assert!(
        min_all >= -1e-6 * max0,
        "snapshot minimum {min_all:e} fell below the floor {:e}",
        -1e-6 * max0
    );

    let grid = PeriodicGrid::new(1, 256, TAU).unwrap();
    let mode = Field::from_fn(grid, 1, |_, x| (3.0 * x[0]).sin()).unwrap();
    let free = SolverConfig {
        model: ModelParams::new(1, 1, 0.85, 0.5, vec![1.5], vec![vec![0.0]]).unwrap(),
        mode: RhsMode::Limit,
        dt: 1e-3,
        t_end: 0.5,
        snapshots: 2,
        monitor_s: None,
    };
    let decay = (-1.5 * 3.0_f64.powf(1.7) * 0.5).exp();
    let out = pde::solve(&mode, &free).unwrap();
    let mut mode_dev = 0.0_f64;
    for (got, init) in out.final_state().species(0).iter().zip(mode.species(0)) {
        mode_dev = mode_dev.max((got - decay * init).abs());
    }
    assert!(mode_dev <= 1e-8, "single-mode decay off by {mode_dev:e}");

    let mut finals = Vec::new();
    for dt in [4e-3, 2e-3, 1e-3] {
        let sc = SolverConfig {
            model: cfg.model.clone(),
            mode: RhsMode::Limit,
            dt,
            t_end: 0.1,
            snapshots: 2,
            monitor_s: None,
        };
        finals.push(pde::solve(&u0, &sc).unwrap());
    }
    let e01 = l2_norm(&finals[0].final_state().axpy(-1.0, finals[1].final_state()).unwrap());
    let e12 = l2_norm(&finals[1].final_state().axpy(-1.0, finals[2].final_state()).unwrap());
    let order = (e01 / e12).log2();
    assert!((order - 2.0).abs() <= 0.2, "self-convergence order {order} is not 2.0 +- 0.2");

    pass(
        6,
        "continuum solver invariants hold",
        format!(
            "mass drift {mass_drift:.1e}, min {min_all:.1e}, mode dev {mode_dev:.1e}, order {order:.3}"
        ),
        t0,
    );
}

/// Sharpening the interaction kernel moves the regularized solution toward
/// the limit equation: the squared L2 gap decreases strictly along the
/// kernel ladder and its log-log slope against the concentration is
/// negative.
#[test]
fn c07_regularized_pde_converges_to_limit_as_kernels_sharpen() {
    let t0 = Instant::now();
    let cfg = ExperimentConfig::default_experiment();
    let rep = run_converge_reg(&cfg).unwrap();
    assert_eq!(rep.rows.len(), 4);
    for w in rep.rows.windows(2) {
        assert!(w[1].kappa_hat_n > w[0].kappa_hat_n, "concentration ladder must increase");
        assert!(
            w[1].err_sq < w[0].err_sq,
            "gap did not shrink: {} -> {}",
            w[0].err_sq,
            w[1].err_sq
        );
    }
    assert!(rep.strictly_decreasing);
    assert!(rep.slope < 0.0, "log-log slope {} is not negative", rep.slope);
    pass(
        7,
        "regularized solutions approach the limit",
        format!(
            "err_sq {:.2e} -> {:.2e}, slope {:.2}",
            rep.rows[0].err_sq,
            rep.rows.last().unwrap().err_sq,
            rep.slope
        ),
        t0,
    );
}

/// Growing the ensemble drives the particle system toward its regularized
/// continuum twin: the across-seed median of the squared trajectory norm
/// decreases strictly in N, and the fraction of seeds exceeding the
/// per-N threshold never increases.
#[test]
fn c08_particle_systems_track_the_regularized_pde_in_l2() {
    let t0 = Instant::now();
    let cfg = ExperimentConfig::default_experiment();
    let rep = run_converge_n(&cfg).unwrap();
    let ns: Vec<u64> = rep.groups.iter().map(|g| g.n).collect();
    assert_eq!(ns, vec![500, 2000, 8000]);
    for w in rep.groups.windows(2) {
        assert!(
            w[1].median_err_sq < w[0].median_err_sq,
            "median gap did not shrink: {} -> {}",
            w[0].median_err_sq,
            w[1].median_err_sq
        );
        assert!(
            w[1].exceed_fraction <= w[0].exceed_fraction,
            "exceedance grew: {} -> {}",
            w[0].exceed_fraction,
            w[1].exceed_fraction
        );
    }
    assert!(rep.medians_strictly_decreasing);
    assert!(rep.exceedance_non_increasing);
    assert!(rep.init_all_ok, "an initial sampling gap missed its threshold");
    let meds: Vec<String> =
        rep.groups.iter().map(|g| format!("{:.2e}", g.median_err_sq)).collect();
    pass(8, "particle runs converge to the regularized pde", format!("medians {}", meds.join(" > ")), t0);
}

/// The same convergence seen without any mollification on the comparison
/// side: the dictionary (bounded-Lipschitz) distance between the raw
/// empirical measures and the limit solution contracts as N grows.
#[test]
fn c09_empirical_measure_error_contracts_in_dictionary_norm() {
    let t0 = Instant::now();
    let cfg = ExperimentConfig::default_experiment();
    let rep = run_measure_convergence(&cfg).unwrap();
    assert_eq!(rep.groups.len(), 3);
    for w in rep.groups.windows(2) {
        assert!(
            w[1].median_sup < w[0].median_sup,
            "dictionary distance did not shrink: {} -> {}",
            w[0].median_sup,
            w[1].median_sup
        );
    }
    assert!(rep.medians_strictly_decreasing);
    let meds: Vec<String> = rep.groups.iter().map(|g| format!("{:.2e}", g.median_sup)).collect();
    pass(9, "empirical measures contract in dictionary norm", format!("medians {}", meds.join(" > ")), t0);
}

/// Across-seed variance of the mollified interaction force at a fixed probe
/// point decays as N grows, with log-log slope at least as steep as the
/// scaled-kernel prediction -(1 - kappa (d + 2 beta) / d) + 0.15.
#[test]
fn c10_interaction_force_variance_decays_at_scaled_rate() {
    let t0 = Instant::now();
    let cfg = ExperimentConfig::default_experiment();
    let rep = run_variance_study(&cfg).unwrap();
    assert_eq!(rep.rows.first().unwrap().n, 256);
    assert_eq!(rep.rows.last().unwrap().n, 16384);
    for w in rep.rows.windows(2) {
        assert!(
            w[1].variance < w[0].variance,
            "variance did not drop: {} -> {}",
            w[0].variance,
            w[1].variance
        );
    }
    let d = cfg.model.d as f64;
    let bound = -(1.0 - cfg.scaling.kappa * (d + 2.0 * cfg.model.beta) / d) + 0.15;
    assert!((bound - rep.slope_bound).abs() <= 1e-12);
    assert!(
        rep.slope <= bound,
        "variance slope {} is shallower than the bound {}",
        rep.slope,
        bound
    );
    assert!(rep.pairwise_decreasing && rep.slope_within_bound);
    pass(
        10,
        "force variance decays at the scaled rate",
        format!("slope {:.3} <= bound {:.3}", rep.slope, bound),
        t0,
    );
}

/// Mollification error against the gradient scale: for a smooth bump,
/// |f * W_N - f|_2 stays below a single constant times kappa_hat_n^-1
/// |grad f|_2 across the whole kernel ladder. The constant 0.64 is the
/// supremum of (1 - exp(-s^2/2)) / s, so no fitted fixture is needed.
#[test]
fn c11_mollification_error_stays_within_gradient_scale() {
    let t0 = Instant::now();
    let cfg = ExperimentConfig::default_experiment();
    let grid = cfg.build_grid().unwrap();
    let bump: Vec<f64> = (0..grid.total_points())
        .map(|p| {
            let x = grid.node(p);
            (-0.5 * x * x / (1.5 * 1.5)).exp()
        })
        .collect();
    let mut kappas = Vec::new();
    for e in 6..=12 {
        let fam = MollifierFamily::from_scaling(1 << e, &cfg.scaling, 1).unwrap();
        kappas.push(fam.kappa_hat_n);
    }
    assert!(kappas.windows(2).all(|w| w[1] > w[0]));
    let rows = mollifier_rate_check(&grid, &bump, &kappas).unwrap();
    let mut worst = 0.0_f64;
    for r in &rows {
        assert!(
            r.ratio <= 0.64,
            "ratio {} at kappa_hat {} exceeds the universal constant",
            r.ratio,
            r.kappa_hat_n
        );
        worst = worst.max(r.ratio);
    }
    pass(
        11,
        "mollification error tracks the gradient bound",
        format!("max ratio {worst:.4} over {} kernels", rows.len()),
        t0,
    );
}

/// Generator identity on test functions. Pure jump (no coupling): the
/// time-averaged discrete action on cos(kx) matches -sigma |k|^(2 alpha)
/// cos(kx) within three standard errors over 64 seeds plus the explicit
/// O(dt) bias budget. Full model: the residual shrinks when dt halves.
#[test]
fn c12_particle_generator_matches_analytic_action() {
    let t0 = Instant::now();
    let mut means = Vec::new();
    let mut budget = 0.0;
    for seed in 0..64 {
        let c = generator_check_pure_jump(TAU, 0.85, 1.0, 1e-3, 50, 2000, 1, seed).unwrap();
        budget = c.bias_budget.unwrap();
        means.push(c.mean);
    }
    let grand = means.iter().sum::<f64>() / means.len() as f64;
    let var = means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>()
        / (means.len() - 1) as f64;
    let se = (var / means.len() as f64).sqrt();
    assert!(
        grand.abs() <= 3.0 * se + budget,
        "pure-jump residual {grand:e} exceeds 3 se + bias = {:e}",
        3.0 * se + budget
    );

    let cfg = ExperimentConfig::default_experiment();
    let u0 = cfg.initial_field().unwrap();
    let fam = MollifierFamily::from_scaling(2000, &cfg.scaling, 1).unwrap();
    let mut residuals = Vec::new();
    for dt in [0.05, 0.025] {
        let c = generator_check_interacting(
            &u0,
            &cfg.model.a,
            &fam,
            cfg.model.alpha,
            cfg.model.beta,
            &cfg.model.sigma,
            dt,
            200,
            8000,
            8,
            7,
        )
        .unwrap();
        residuals.push(c.mean.abs());
    }
    assert!(
        residuals[1] < residuals[0],
        "halving dt did not shrink the residual: {} -> {}",
        residuals[0],
        residuals[1]
    );
    pass(
        12,
        "generator identity holds in law",
        format!(
            "pure-jump |mean| {:.1e} <= {:.1e}; coupled residual {:.1e} -> {:.1e}",
            grand.abs(),
            3.0 * se + budget,
            residuals[0],
            residuals[1]
        ),
        t0,
    );
}

/// Determinism under parallelism: rendering the result tables of a particle
/// study and a variance study must produce byte-identical CSV text when the
/// worker pool has 1, 4, or 8 threads.
#[test]
fn c13_reports_are_byte_identical_across_thread_counts() {
    let t0 = Instant::now();
    let mut cfg = ExperimentConfig::default_experiment();
    cfg.master_seed = 99;
    cfg.grid.m = 1024;
    cfg.time.t_end = 0.02;
    cfg.time.snapshots = 3;
    cfg.particles.n_list = vec![40, 160];
    cfg.particles.seeds = 2;
    cfg.sweeps.reg_n_list = vec![16, 256];
    cfg.sweeps.variance_n_list = vec![64, 256];
    cfg.sweeps.variance_seeds = 8;
    cfg.validate().unwrap();
    let hash = report::config_hash(&cfg).unwrap();

    let mut renders: Vec<(String, String)> = Vec::new();
    for threads in [1usize, 4, 8] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let pair = pool.install(|| {
            let particles =
                run_converge_n(&cfg).unwrap().to_csv(&hash, cfg.master_seed).render();
            let variance =
                run_variance_study(&cfg).unwrap().to_csv(&hash, cfg.master_seed).render();
            (particles, variance)
        });
        renders.push(pair);
    }
    for r in &renders[1..] {
        assert_eq!(r.0, renders[0].0, "particle study CSV changed with the thread count");
        assert_eq!(r.1, renders[0].1, "variance study CSV changed with the thread count");
    }
    pass(
        13,
        "results are byte-identical across thread counts",
        format!("{} bytes + {} bytes stable at 1/4/8 threads", renders[0].0.len(), renders[0].1.len()),
        t0,
    );
}
