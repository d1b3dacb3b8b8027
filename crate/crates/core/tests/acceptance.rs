//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use fair_nrm::benchmark::csv_io::write_rows;
use fair_nrm::benchmark::experiment::{run_experiment, thread_count, ExperimentOutput};
use fair_nrm::benchmark::fluid::{solve_fluid, FluidProblem};
use fair_nrm::benchmark::metrics::mean_ci95;
use fair_nrm::benchmark::ExperimentConfig;
use fair_nrm::dual::{gradient_bound, l1_ball_grid, online_regret_check, regret_bound, DualConfig};
use fair_nrm::ellipsoid::default_budget;
use fair_nrm::estimator::{kappa_value, CheckOutcome, SeparationResult};
use fair_nrm::primal::{maximize_box_qp, primal_price_update, OptimisticObjective, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use fair_nrm::regularizers::grid_conjugate_oracle;
use fair_nrm::{run_episode, BoxQp, EstimatorState, Instance, ModelParams, PolicyConfig, Regularizer};
use nalgebra::{DMatrix, DVector, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, name: &str, pass: bool, detail: impl AsRef<str>) {
        if !pass {
            self.failed += 1;
        }
        println!("{} {name}: {}", if pass { "PASS" } else { "FAIL" }, detail.as_ref());
    }
}

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_row_slice(x)
}

fn high_gamma() -> DVector<f64> {
    v(&[15.0, 12.0, 30.0])
}

fn reference_high() -> ExperimentConfig {
    ExperimentConfig {
        gammas: vec![("high".into(), high_gamma())],
        ..ExperimentConfig::reference_grid()
    }
}

/// Ordinary least squares `y ≈ a + b x`; returns `(b, R²)`.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, sxy * sxy / (sxx * syy))
}

fn sqrt_t_scaling(r: &mut Report, cfg: &ExperimentConfig, out: &ExperimentOutput) {
    let mut pass = true;
    let mut parts = Vec::new();
    for &lambda in &cfg.lambdas {
        let means: Vec<f64> = cfg
            .horizons
            .iter()
            .map(|&t| out.aggregate("high", lambda, t).unwrap().regret)
            .collect();
        let sqrt_t: Vec<f64> = cfg.horizons.iter().map(|&t| (t as f64).sqrt()).collect();
        let (_, r2) = linear_fit(&sqrt_t, &means);
        let ln_t: Vec<f64> = cfg.horizons.iter().map(|&t| (t as f64).ln()).collect();
        let ln_r: Vec<f64> = means.iter().map(|m| m.max(1e-12).ln()).collect();
        let (slope, _) = linear_fit(&ln_t, &ln_r);
        pass &= r2 >= 0.85 && (0.35..=0.70).contains(&slope);
        parts.push(format!("λ={lambda}: R²={r2:.3} slope={slope:.3}"));
    }
    r.line("sqrt(T) regret scaling", pass, parts.join("; "));
}

fn relative_regret_decreasing(r: &mut Report, cfg: &ExperimentConfig, out: &ExperimentOutput) {
    let mut pass = true;
    let mut parts = Vec::new();
    for &lambda in &cfg.lambdas {
        let early = out.aggregate("high", lambda, 500).unwrap().relative_regret;
        let late = out.aggregate("high", lambda, 10_000).unwrap().relative_regret;
        pass &= late <= 0.8 * early;
        parts.push(format!("λ={lambda}: {early:.4} → {late:.4}"));
    }
    r.line("relative regret decreasing", pass, parts.join("; "));
}

fn fairness_tradeoff(r: &mut Report, cfg: &ExperimentConfig, out: &ExperimentOutput) {
    let rows: Vec<_> = cfg
        .lambdas
        .iter()
        .map(|&l| out.aggregate("high", l, 4000).unwrap())
        .collect();
    let mut fair_ok = true;
    let mut reward_ok = true;
    for w in rows.windows(2) {
        let fair_tol = w[0].maxmin_fairness_ci95.unwrap().max(w[1].maxmin_fairness_ci95.unwrap());
        let reward_tol = w[0].avg_reward_ci95.unwrap().max(w[1].avg_reward_ci95.unwrap());
        fair_ok &= w[1].maxmin_fairness >= w[0].maxmin_fairness - fair_tol;
        reward_ok &= w[1].avg_reward <= w[0].avg_reward + reward_tol;
    }
    let ci0 = rows[0].maxmin_fairness_ci95.unwrap();
    let var_ok = rows[1..].iter().all(|x| x.maxmin_fairness_ci95.unwrap() < ci0);
    let fmt = |f: &dyn Fn(&fair_nrm::benchmark::ExperimentRow) -> (f64, f64)| {
        rows.iter()
            .map(|x| {
                let (m, c) = f(x);
                format!("{m:.3}±{c:.3}")
            })
            .collect::<Vec<_>>()
            .join(", ")
    };
    let fair = fmt(&|x| (x.maxmin_fairness, x.maxmin_fairness_ci95.unwrap()));
    let reward = fmt(&|x| (x.avg_reward, x.avg_reward_ci95.unwrap()));
    r.line(
        "fairness/reward trade-off at T=4000",
        fair_ok && reward_ok && var_ok,
        format!(
            "maxmin [{fair}] monotone={fair_ok}; avg_reward [{reward}] monotone={reward_ok}; λ>0 CI below λ=0 CI={var_ok}"
        ),
    );
}

fn coverage(r: &mut Report) -> bool {
    let inst = Instance::reference(high_gamma(), 1000);
    let mut hits = 0usize;
    let mut steps = 0usize;
    let mut safe = true;
    for trial in 0..10u64 {
        let lambda = [0.0, 0.5, 1.0, 1.5][trial as usize % 4];
        let reg = Regularizer::max_min(lambda, 3).unwrap();
        let rec = run_episode(&inst, &reg, &PolicyConfig::theory(trial)).unwrap();
        safe &= rec.check_safety(&inst).all();
        for t in 0..rec.tau {
            let p = &rec.prices[t];
            let d = inst.params().expected_demand(p);
            let dc = &rec.checked_demand[t];
            let rad = rec.radii[t];
            let rev_ok = (p.dot(dc) - p.dot(&d)).abs() <= 2.0 * rad.delta_r;
            let dem_ok = (dc - &d).amax() <= 2.0 * rad.delta_d;
            hits += usize::from(rev_ok && dem_ok);
            steps += 1;
        }
    }
    let frac = hits as f64 / steps as f64;
    r.line(
        "confidence coverage (theory radii)",
        frac >= 0.99,
        format!("{hits}/{steps} steps = {:.4}", frac),
    );
    safe
}

fn eg_regret(r: &mut Report) {
    let start = Instant::now();
    let m = 3;
    let horizon = 2000;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let g_ref = gradient_bound(&Instance::reference(high_gamma(), horizon));
    let settings: Vec<(f64, f64)> = vec![(5.0, 1.0), (5.0, 30.0), (5.0, g_ref), (1.0, 10.0), (20.0, 2.0)];
    let mut violations = 0usize;
    let mut worst_ratio = f64::NEG_INFINITY;
    let mut grid_size = 0;
    for k in 0..1000 {
        let (c, g) = settings[k % settings.len()];
        let balanced = DualConfig::balanced_eta(m, c, g, horizon);
        let eta = match (k / settings.len()) % 3 {
            0 => balanced,
            1 => 0.25 * balanced,
            _ => (4.0 * balanced).min(1.0 / (c * g)),
        };
        let bench = l1_ball_grid(m, c, 9);
        grid_size = bench.len();
        let gs: Vec<DVector<f64>> = match k % 4 {
            0 => (0..horizon)
                .map(|_| DVector::from_fn(m, |_, _| rng.random_range(-g..=g)))
                .collect(),
            1 => {
                let dir = DVector::from_fn(m, |_, _| if rng.random_bool(0.5) { g } else { -g });
                (0..horizon)
                    .map(|_| dir.map(|x| x * rng.random_range(0.5..=1.0)))
                    .collect()
            }
            2 => {
                let switch = rng.random_range(1..horizon);
                let i = rng.random_range(0..m);
                (0..horizon)
                    .map(|t| {
                        let mut e = DVector::zeros(m);
                        e[i] = if t < switch { g } else { -g };
                        e
                    })
                    .collect()
            }
            _ => (0..horizon)
                .map(|t| DVector::from_fn(m, |i, _| if (t + i) % 2 == 0 { g } else { -g }))
                .collect(),
        };
        let regret = online_regret_check(&gs, &bench, c, eta).unwrap();
        let bound = regret_bound(m, c, g, eta, horizon);
        worst_ratio = worst_ratio.max(regret / bound);
        if regret > bound {
            violations += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    r.line(
        "EG± online regret bound",
        violations == 0 && grid_size >= 1000 && secs < 60.0,
        format!(
            "1000 sequences, grid of {grid_size} points, {violations} violations, max regret/bound {worst_ratio:.3}, {secs:.1}s"
        ),
    );
}

fn conjugate_oracle(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let res = 0.1;
    let groups = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
    let mut worst = 0.0f64;
    let mut bad = 0usize;
    for kind in 0..4 {
        for _ in 0..1000 {
            let m = if kind == 1 { 4 } else { rng.random_range(2..=3) };
            let lambda = rng.random_range(0.0..2.0);
            let w = DVector::from_fn(m, |_, _| rng.random_range(0.5..2.0));
            let gamma = DVector::from_fn(m, |_, _| rng.random_range(0.3..1.0));
            let mu = DVector::from_fn(m, |_, _| rng.random_range(-2.0..2.0));
            let reg = match kind {
                0 => Regularizer::weighted_max_min(lambda, w).unwrap(),
                1 => Regularizer::group_max_min(lambda, w, groups.clone()).unwrap(),
                2 => Regularizer::range_fairness(lambda, w, gamma.clone()).unwrap(),
                _ => Regularizer::load_balancing(lambda, gamma.clone()).unwrap(),
            };
            let (s, val) = reg.conjugate_argmax(&mu, &gamma);
            let attained = reg.eval(&s) + mu.dot(&s);
            let in_box = s.iter().zip(gamma.iter()).all(|(s, g)| s.abs() <= g + 1e-12);
            let grid = grid_conjugate_oracle(&reg, &mu, &gamma, res).unwrap();
            let tol = (reg.metadata(&gamma).lipschitz + mu.abs().sum()) * res;
            let gap = val - grid;
            worst = worst.max(gap / tol);
            if !in_box || (attained - val).abs() > 1e-9 || gap < -1e-9 || gap > tol {
                bad += 1;
            }
        }
    }
    r.line(
        "oracle (a) conjugate vs grid",
        bad == 0,
        format!("4000 instances at resolution {res}, {bad} mismatches, max gap/tolerance {worst:.3}"),
    );
}

/// `p̃ᵀ H p̃ + coeff·max_j |W_j p̃|` with `p̃ = (p₁, p₂, 1)`, maximized over the
/// grid `lo + k·h` in both coordinates.
fn grid_max_2d(h_mat: &Matrix3<f64>, w: &[[f64; 3]], coeff: f64, lo: f64, hi: f64, h: f64) -> f64 {
    let k_max = ((hi - lo) / h).round() as usize;
    let hm = h_mat;
    let c2 = hm[(1, 1)];
    let mut best = f64::NEG_INFINITY;
    for i in 0..=k_max {
        let x = lo + i as f64 * h;
        let c1 = (hm[(0, 1)] + hm[(1, 0)]) * x + hm[(1, 2)] + hm[(2, 1)];
        let c0 = hm[(0, 0)] * x * x + (hm[(0, 2)] + hm[(2, 0)]) * x + hm[(2, 2)];
        let uv: Vec<(f64, f64)> = w.iter().map(|row| (row[0] * x + row[2], row[1])).collect();
        for j in 0..=k_max {
            let y = lo + j as f64 * h;
            let mut f = c0 + y * (c1 + c2 * y);
            if coeff != 0.0 {
                let m = uv.iter().map(|(u, v)| (u + v * y).abs()).fold(0.0, f64::max);
                f += coeff * m;
            }
            best = best.max(f);
        }
    }
    best
}

fn eval_2d(h_mat: &Matrix3<f64>, w: &[[f64; 3]], coeff: f64, p: &DVector<f64>) -> f64 {
    let pt = nalgebra::Vector3::new(p[0], p[1], 1.0);
    let m = w
        .iter()
        .map(|row| (row[0] * pt[0] + row[1] * pt[1] + row[2]).abs())
        .fold(0.0, f64::max);
    pt.dot(&(h_mat * pt)) + coeff * m
}

fn qp_matrix(qp: &BoxQp) -> Matrix3<f64> {
    let mut h = Matrix3::zeros();
    for i in 0..2 {
        for j in 0..2 {
            h[(i, j)] = qp.q[(i, j)];
        }
        h[(i, 2)] = qp.c_lin[i] + qp.affine[i];
    }
    h[(2, 2)] = qp.affine[2];
    h
}

/// `⟨p − π, [B̌|α̌] p̃⟩` as `p̃ᵀ H p̃` with `H = [I | −π]ᵀ [B̌|α̌]`.
fn reward_matrix(bcheck: &DMatrix<f64>, pi: &DVector<f64>) -> Matrix3<f64> {
    let mut s = DMatrix::zeros(2, 3);
    s[(0, 0)] = 1.0;
    s[(1, 1)] = 1.0;
    s[(0, 2)] = -pi[0];
    s[(1, 2)] = -pi[1];
    let h = s.transpose() * bcheck;
    Matrix3::from_fn(|i, j| h[(i, j)])
}

fn random_estimator(rng: &mut ChaCha8Rng) -> EstimatorState {
    let a = DMatrix::<f64>::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
    let b = -(&a * a.transpose() + DMatrix::identity(2, 2) * rng.random_range(0.3..2.0));
    let alpha = DVector::from_fn(2, |_, _| rng.random_range(4.0..10.0));
    let params = ModelParams::new(alpha, b).unwrap();
    let reg_weight = if rng.random_bool(0.5) { 0.001 } else { 3.0 };
    let kappa = kappa_value(2, 1000, 7.5, params.row_norm_bound(), 5.0);
    let mut est = EstimatorState::new(2, reg_weight, kappa).unwrap();
    for _ in 0..rng.random_range(0..30) {
        let p = DVector::from_fn(2, |_, _| rng.random_range(1.0..5.0));
        let d = params.expected_demand(&p).map(|x| x + rng.random_range(-1.0..1.0));
        est.observe(&p, &d);
    }
    est.solve_mt(params.row_norm_bound(), 1000);
    est
}

fn primal_oracle(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (lo, hi, h) = (1.0, 5.0, 1e-3);
    let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 3.0, 1.0, 0.0, 5.0]);

    let mut qp_worst = 0.0f64;
    for k in 0..200 {
        let qp = if k % 2 == 0 {
            let est = random_estimator(&mut rng);
            let mu = DVector::from_fn(3, |_, _| rng.random_range(-5.0 / 3.0..5.0 / 3.0));
            let obj = OptimisticObjective {
                bcheck: est.bcheck(),
                whitening: est.whitening(),
                dual_price: a.tr_mul(&mu),
                coeff: rng.random_range(0.0..10.0),
                lo,
                hi,
            };
            obj.piece(rng.random_range(0..3), if rng.random_bool(0.5) { 1.0 } else { -1.0 })
        } else {
            let m = DMatrix::<f64>::from_fn(2, 2, |_, _| rng.random_range(-2.0..2.0));
            let skew = rng.random_range(-1.0..1.0);
            let q = -(&m * m.transpose()) + DMatrix::from_row_slice(2, 2, &[0.0, skew, -skew, 0.0]);
            BoxQp {
                q,
                c_lin: DVector::from_fn(2, |_, _| rng.random_range(-20.0..20.0)),
                affine: DVector::from_fn(3, |_, _| rng.random_range(-5.0..5.0)),
                lo,
                hi,
            }
        };
        let sol = maximize_box_qp(&qp, None, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
        let hm = qp_matrix(&qp);
        let direct = eval_2d(&hm, &[], 0.0, &sol.p);
        let grid = grid_max_2d(&hm, &[], 0.0, lo, hi, h);
        let gap = (sol.value - grid).abs().max((direct - sol.value).abs());
        qp_worst = qp_worst.max(gap);
    }

    let mut full_worst = 0.0f64;
    for _ in 0..200 {
        let est = random_estimator(&mut rng);
        let raw = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
        let mu = &raw * (rng.random_range(0.0..5.0) / raw.abs().sum());
        let coeff = rng.random_range(0.0..10.0);
        let choice = primal_price_update(&est, &mu, &a, lo, hi, coeff, None).unwrap();
        let hm = reward_matrix(est.bcheck(), &a.tr_mul(&mu));
        let wl = est.whitening();
        let w: Vec<[f64; 3]> = (0..3).map(|j| [wl[(j, 0)], wl[(j, 1)], wl[(j, 2)]]).collect();
        let direct = eval_2d(&hm, &w, coeff, &choice.p);
        let grid = grid_max_2d(&hm, &w, coeff, lo, hi, h);
        let gap = (choice.objective - grid).abs().max((direct - choice.objective).abs());
        full_worst = full_worst.max(gap);
    }
    r.line(
        "oracle (b) box QP and primal update vs grid",
        qp_worst <= 2e-3 && full_worst <= 2e-3,
        format!("200+200 instances at resolution {h}, max gap QP {qp_worst:.2e}, primal update {full_worst:.2e}"),
    );
}

fn fluid_refinement(r: &mut Report) {
    let cfg = ExperimentConfig::reference_grid();
    let mut ok = true;
    let mut checked = 0;
    let mut min_gain = f64::INFINITY;
    for (_, gamma) in &cfg.gammas {
        let inst = Instance::reference(gamma.clone(), 1);
        for &lambda in &cfg.lambdas {
            let reg = Regularizer::max_min(lambda, 3).unwrap();
            let prob = FluidProblem::from_instance(&inst, &reg);
            for res in [0.2, 0.1, 0.05, 0.02, 0.01] {
                let refined = solve_fluid(&inst, &reg, res).unwrap();
                let k_max = ((inst.price_hi() - inst.price_lo()) / res).round() as usize;
                let mut coarse = f64::NEG_INFINITY;
                for i in 0..=k_max {
                    for j in 0..=k_max {
                        let p = v(&[
                            inst.price_lo() + i as f64 * res,
                            inst.price_lo() + j as f64 * res,
                        ]);
                        if prob.is_feasible(&p, 0.0) {
                            coarse = coarse.max(prob.objective(&p));
                        }
                    }
                }
                let gain = refined.j_d_per_period - coarse;
                min_gain = min_gain.min(gain);
                ok &= gain >= -1e-12 && prob.is_feasible(&refined.p_star, 1e-9);
                checked += 1;
            }
        }
    }
    r.line(
        "oracle (c) fluid refinement vs coarse grid",
        ok,
        format!("{checked} (γ, λ, resolution) cases, min(refined − coarse) = {min_gain:.2e}"),
    );
}

fn ellipsoid(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let horizon = 1000usize;
    let shift = (horizon as f64).powi(-2);
    let mut found = 0usize;
    let mut members = 0usize;
    let mut within_budget = 0usize;
    let mut needed_cuts = 0usize;
    let mut max_iters = 0usize;
    let total = 200;
    for k in 0..total {
        let n = 2 + k % 2;
        loop {
            let mm = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let mut skew = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-0.5..0.5));
            skew = &skew - skew.transpose();
            let b = -(&mm * mm.transpose() / n as f64 + DMatrix::identity(n, n) * rng.random_range(0.1..1.0)) + skew;
            let alpha = DVector::from_fn(n, |_, _| rng.random_range(4.0..10.0));
            let params = ModelParams::new(alpha.clone(), b.clone()).unwrap();
            let row_bound = params.row_norm_bound();
            let kappa_full = kappa_value(n, horizon, 7.5, row_bound, 5.0);
            let history: Vec<(DVector<f64>, DVector<f64>)> = (0..rng.random_range(1..25))
                .map(|_| {
                    let p = DVector::from_fn(n, |_, _| rng.random_range(1.0..5.0));
                    let d = params.expected_demand(&p).map(|x| x + rng.random_range(-1.0..1.0));
                    (p, d)
                })
                .collect();
            let est = fit(n, kappa_full, &history);
            let mut target = DMatrix::zeros(n, n + 1);
            target.view_mut((0, 0), (n, n)).copy_from(&(b - DMatrix::identity(n, n) * shift));
            target.set_column(n, &alpha);

            let kappa = if k % 4 < 2 {
                kappa_full
            } else {
                let lam = est.lambda();
                let dist = (0..n)
                    .map(|i| {
                        let diff = (target.row(i) - est.bhat().row(i)).transpose();
                        diff.dot(&(lam * &diff)).sqrt()
                    })
                    .fold(0.0, f64::max);
                1.05 * dist
            };
            let mut est = fit(n, kappa, &history);
            if est.separation_oracle(&target, row_bound) != SeparationResult::Inside {
                continue;
            }
            if est.separation_oracle(est.bhat(), row_bound) != SeparationResult::Inside {
                needed_cuts += 1;
            }
            let dim = n * (n + 1);
            let budget = default_budget(dim, kappa * (n as f64).sqrt(), (horizon as f64).powi(-4));
            if let CheckOutcome::Ellipsoid { iterations } = est.solve_mt(row_bound, horizon) {
                found += 1;
                max_iters = max_iters.max(iterations);
                within_budget += usize::from(iterations <= budget);
                members += usize::from(est.separation_oracle(est.bcheck(), row_bound) == SeparationResult::Inside);
            }
            break;
        }
    }
    r.line(
        "ellipsoid correctness",
        found == total && members == total && within_budget == total,
        format!(
            "{found}/{total} found, {within_budget} within budget, {members} pass the oracle, {needed_cuts} started outside, max iterations {max_iters}"
        ),
    );
}

fn fit(n: usize, kappa: f64, history: &[(DVector<f64>, DVector<f64>)]) -> EstimatorState {
    let mut est = EstimatorState::new(n, (n + 1) as f64, kappa).unwrap();
    for (p, d) in history {
        est.observe(p, d);
    }
    est
}

fn safety_and_replay(r: &mut Report, cfg: &ExperimentConfig, out: &ExperimentOutput, coverage_safe: bool) {
    let unsafe_cells = out.cells.iter().filter(|c| !c.safety.all()).count();
    let replay = run_experiment(cfg, 2).unwrap();
    let bytes = |o: &ExperimentOutput| {
        let rows: Vec<_> = o.cells.iter().map(|c| c.row.clone()).collect();
        let mut buf = Vec::new();
        write_rows(&mut buf, &rows).unwrap();
        buf
    };
    let identical = bytes(out) == bytes(&replay);
    let replay_unsafe = replay.cells.iter().filter(|c| !c.safety.all()).count();
    r.line(
        "safety invariants and deterministic replay",
        unsafe_cells == 0 && replay_unsafe == 0 && coverage_safe && identical,
        format!(
            "{} episodes, {} with a violated invariant, coverage episodes safe={coverage_safe}, replay with 2 threads byte-identical={identical}",
            out.cells.len() + replay.cells.len(),
            unsafe_cells + replay_unsafe
        ),
    );
}

fn fluid_upper_bound(r: &mut Report, cfg: &ExperimentConfig, out: &ExperimentOutput) {
    let mut worst = f64::NEG_INFINITY;
    let mut ok = true;
    for chunk in out.cells.chunks(cfg.trials) {
        let objs: Vec<f64> = chunk.iter().map(|c| c.row.realized_objective).collect();
        let (mean, ci) = mean_ci95(&objs);
        let bench = chunk[0].row.horizon as f64 * chunk[0].row.fluid_per_period;
        worst = worst.max((mean - bench) / ci.max(1e-12));
        ok &= mean <= bench + 2.0 * ci;
    }
    r.line(
        "fluid benchmark dominates (invariant)",
        ok,
        format!("max (mean realized − T·J_D)/CI = {worst:.2}"),
    );
}

fn main() -> ExitCode {
    let mut report = Report { failed: 0 };
    let cfg = reference_high();
    let start = Instant::now();
    let out = run_experiment(&cfg, thread_count(None)).expect("reference experiment runs");
    println!(
        "reference grid: {} episodes in {:.1}s",
        out.cells.len(),
        start.elapsed().as_secs_f64()
    );

    sqrt_t_scaling(&mut report, &cfg, &out);
    relative_regret_decreasing(&mut report, &cfg, &out);
    fairness_tradeoff(&mut report, &cfg, &out);
    let coverage_safe = coverage(&mut report);
    eg_regret(&mut report);
    conjugate_oracle(&mut report);
    primal_oracle(&mut report);
    fluid_refinement(&mut report);
    ellipsoid(&mut report);
    safety_and_replay(&mut report, &cfg, &out, coverage_safe);
    fluid_upper_bound(&mut report, &cfg, &out);

    if report.failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria failed", report.failed);
        ExitCode::FAILURE
    }
}
