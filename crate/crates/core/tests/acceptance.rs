//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero when any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hcons::adversarial::{
    adv_squared_loss, empirical_nu, evaluate, objective_value, smoothness_term, train, AdvConfig, Dataset, LinearModel,
    Objective, PerturbationNorm, SolverConfig,
};
use hcons::conditional::{best_conditional_error, conditional_regret, minimizability_gap, BestMethod, HypothesisClass};
use hcons::counterexamples::{assert_counterexample, build_counterexample, random_params, CounterexampleParams, NegativeTheorem};
use hcons::datagen::{synth_from_truth, synth_linear_dataset, train_test_split, Noise, SynthConfig};
use hcons::distributions::{random_symmetric_distribution, Conditional, FiniteDistribution, GeneratorConfig, InputPoint};
use hcons::fuzz::{fuzz_distribution, run_bound_fuzz, run_general_crosscheck, ClassKind, FuzzConfig};
use hcons::lemmas::{check_lemma_grid, LemmaId};
use hcons::{bounds, LossKind};

type Outcome = hcons::Result<(bool, String)>;
type Criterion = (&'static str, fn() -> Outcome);

fn surrogates() -> Vec<LossKind> {
    let mut v: Vec<LossKind> = [0.1, 0.5, 1.0].iter().map(|&delta| LossKind::Huber { delta }).collect();
    v.extend([1.0, 1.5, 2.0, 3.0, 4.0].iter().map(|&p| LossKind::Lp { p }));
    v.extend([0.1, 0.25].iter().map(|&eps| LossKind::SqEpsInsensitive { eps }));
    v
}

const CLASSES: [ClassKind; 2] = [ClassKind::AllBounded, ClassKind::Constant];

fn bound_fuzz() -> Outcome {
    let start = Instant::now();
    let cfg = FuzzConfig::default();
    let mut checked = 0;
    let mut skipped = 0;
    let mut min_slack = f64::INFINITY;
    let mut bad = Vec::new();
    for s in surrogates() {
        let out = run_bound_fuzz(&cfg, &CLASSES, &[s])?;
        checked += out.summary.checked;
        skipped += out.summary.skipped;
        min_slack = min_slack.min(out.summary.min_slack);
        let v = out.reports.iter().filter(|r| r.report.slack < -1e-8).count();
        if v > 0 {
            bad.push(format!("{s}: {v} violations, min slack {:.3e}", out.summary.min_slack));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = bad.is_empty() && secs <= 60.0;
    Ok((
        pass,
        format!(
            "{checked} instances checked, {skipped} skipped (p_min = 0), min slack {min_slack:.3e}, {secs:.1}s{}",
            if bad.is_empty() { String::new() } else { format!("; {}", bad.join("; ")) }
        ),
    ))
}

fn random_loss(rng: &mut ChaCha8Rng, which: usize) -> LossKind {
    match which {
        0 => LossKind::Squared,
        1 => LossKind::Lp { p: rng.gen_range(1.0..=4.0) },
        2 => LossKind::Huber { delta: rng.gen_range(0.05..=2.0) },
        3 => LossKind::EpsInsensitive { eps: rng.gen_range(0.01..=1.0) },
        _ => LossKind::SqEpsInsensitive { eps: rng.gen_range(0.01..=1.0) },
    }
}

fn random_conditional(rng: &mut ChaCha8Rng) -> Conditional {
    let cfg = GeneratorConfig {
        max_inputs: 1,
        max_atoms: 7,
        bound: rng.gen_range(0.5..=2.0),
    };
    random_symmetric_distribution(rng.gen(), &cfg).points()[0].cond.clone()
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_best, mut worst_sq) = (0.0f64, 0.0f64);
    for _ in 0..500 {
        let cond = random_conditional(&mut rng);
        for which in 0..5 {
            let kind = random_loss(&mut rng, which);
            let closed = best_conditional_error(kind, &cond, BestMethod::ClosedForm)?;
            let numeric = best_conditional_error(kind, &cond, BestMethod::Numeric)?;
            worst_best = worst_best.max((closed - numeric).abs());
        }
        let b = cond.bound();
        let h = rng.gen_range(-b..=b);
        let mu: f64 = cond.atoms().iter().map(|a| a.mass * a.label).sum();
        let regret = conditional_regret(LossKind::Squared, h, &cond)?;
        worst_sq = worst_sq.max((regret - (h - mu).powi(2)).abs());
    }
    Ok((
        worst_best <= 1e-8 && worst_sq <= 1e-12,
        format!("max |closed - numeric| {worst_best:.2e}, max |sq regret - (h-mu)^2| {worst_sq:.2e}"),
    ))
}

fn minimizability_gaps() -> Outcome {
    let cfg = FuzzConfig::default();
    let mut kinds = surrogates();
    kinds.push(LossKind::Squared);
    kinds.push(LossKind::EpsInsensitive { eps: 0.1 });
    let mut worst = 0.0f64;
    for i in 0..cfg.distributions {
        let dist = fuzz_distribution(&cfg, i);
        let class = HypothesisClass::all_bounded(dist.bound(), 101)?;
        for &k in &kinds {
            worst = worst.max(minimizability_gap(k, &class, &dist)?);
        }
    }

    let point = |id: &str, mu: f64| -> hcons::Result<InputPoint> {
        Ok(InputPoint {
            id: id.into(),
            weight: 0.5,
            cond: Conditional::new([(mu - 0.5, 0.5), (mu + 0.5, 0.5)], 1.0)?,
        })
    };
    let crafted = FiniteDistribution::new(vec![point("a", -0.5)?, point("b", 0.5)?], 1.0)?;
    // best constant is 0 with error E[y^2] = 0.5; per-input variances are 0.25
    let expected = 0.5 - 0.25;
    let gap = minimizability_gap(LossKind::Squared, &HypothesisClass::constant_bounded(1.0, 101)?, &crafted)?;
    Ok((
        worst <= 1e-9 && (gap - expected).abs() <= 1e-9,
        format!("max AllBounded gap {worst:.2e} over {} distributions x {} losses, crafted constant gap {gap:.12}", cfg.distributions, kinds.len()),
    ))
}

fn counterexample_suite() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for theorem in NegativeTheorem::ALL {
        let (mut worst_diff, mut min_regret, mut confirmed) = (0.0f64, f64::INFINITY, 0);
        for i in 0..100 {
            let case = build_counterexample(theorem, random_params(theorem, i))?;
            let o = assert_counterexample(&case)?;
            worst_diff = worst_diff.max((o.surrogate_err_hbar - o.surrogate_err_hstar).abs());
            min_regret = min_regret.min(o.sq_regret_hbar);
            confirmed += o.confirmed as usize;
        }
        pass &= worst_diff <= 1e-12 && min_regret >= 2.5e-3;
        notes.push(format!("{theorem}: max err diff {worst_diff:.1e}, min sq regret {min_regret:.4}, {confirmed}/100 confirmed"));
    }
    let (bound, y, mu, delta) = (1.0, -0.8, 0.0, 0.5);
    let case = build_counterexample(NegativeTheorem::HuberNeg, CounterexampleParams { bound, y, mu, param: delta })?;
    let o = assert_counterexample(&case)?;
    let err = delta * (mu - delta / 2.0 - y);
    let regret = (y + delta - mu).powi(2);
    let reference = (o.surrogate_err_hbar - err).abs() <= 1e-12
        && (o.surrogate_err_hstar - err).abs() <= 1e-12
        && (o.sq_regret_hbar - regret).abs() <= 1e-12;
    pass &= reference;
    notes.push(format!(
        "huber reference errors {:.12}/{:.12}, regret {:.12}",
        o.surrogate_err_hbar, o.surrogate_err_hstar, o.sq_regret_hbar
    ));
    Ok((pass, notes.join("; ")))
}

fn lemma_matrix() -> Vec<LemmaId> {
    let bounds = [0.5, 1.0, 2.0];
    let mut v = Vec::new();
    for &bound in &bounds {
        for delta in [0.1, 0.5, 1.0, 2.0] {
            v.push(LemmaId::HuberF { delta, bound });
        }
        for p in [1.25, 1.5, 1.75, 2.0] {
            // as stated, and at the radius where the lp theorem applies it
            v.push(LemmaId::LpLowF { p, bound });
            v.push(LemmaId::LpLowF { p, bound: 4.0 * bound });
        }
        for eps in [0.1, 0.25, 0.5] {
            v.push(LemmaId::SqEpsF { eps, bound });
        }
        for p in [2.0, 3.0, 4.0] {
            v.push(LemmaId::LpClarkson { p, bound });
        }
    }
    v
}

fn lemma_grids() -> Outcome {
    let start = Instant::now();
    let mut violations = 0;
    let mut min_dev = f64::INFINITY;
    let mut bad = Vec::new();
    let lemmas = lemma_matrix();
    for &lemma in &lemmas {
        let g = check_lemma_grid(lemma, 2001)?;
        violations += g.violations;
        min_dev = min_dev.min(g.min_deviation);
        if g.violations > 0 {
            bad.push(format!("{lemma:?}: {} violations", g.violations));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        violations == 0 && secs <= 120.0,
        format!(
            "{} sweeps at 2001 per axis, {violations} violations, min deviation {min_dev:.3e}, {secs:.1}s{}",
            lemmas.len(),
            if bad.is_empty() { String::new() } else { format!("; {}", bad.join("; ")) }
        ),
    ))
}

fn general_crosscheck() -> Outcome {
    let cfg = FuzzConfig::default();
    let mut pass = true;
    let (mut compared, mut agreed) = (0, 0);
    let (mut dl, mut dr) = (0.0f64, 0.0f64);
    let mut bad = Vec::new();
    for s in surrogates() {
        let c = run_general_crosscheck(&cfg, &CLASSES, &[s], &[0.0, 0.1], 1e-9)?;
        compared += c.compared;
        agreed += c.agreed;
        dl = dl.max(c.max_lhs_diff);
        dr = dr.max(c.max_rhs_diff);
        if c.premise_failed > 0 || c.agreed < c.compared {
            pass = false;
            bad.push(format!("{s}: {} premise failures, {} disagreements", c.premise_failed, c.compared - c.agreed));
        }
    }
    Ok((
        pass,
        format!(
            "{agreed}/{compared} compared instances agree (max lhs diff {dl:.1e}, rhs diff {dr:.1e}){}",
            if bad.is_empty() { String::new() } else { format!("; {}", bad.join("; ")) }
        ),
    ))
}

/// Minimum of a convex objective over `(w, b)` by a coarse grid on
/// `[-3, 3]^(d+1)` followed by repeated zooms around the incumbent.
fn grid_oracle(objective: &Objective, data: &Dataset) -> hcons::Result<f64> {
    let k = data.dim() + 1;
    let (mut step, mut half): (f64, f64) = (if k == 2 { 0.01 } else { 0.05 }, 3.0);
    let mut center = vec![0.0; k];
    let mut best = f64::INFINITY;
    while step > 1e-9 {
        let n = (2.0 * half / step).round() as usize + 1;
        let origin: Vec<f64> = center.iter().map(|c| c - half).collect();
        let mut idx = vec![0usize; k];
        loop {
            let p: Vec<f64> = (0..k).map(|j| origin[j] + idx[j] as f64 * step).collect();
            let v = objective_value(objective, &LinearModel::new(p[..k - 1].to_vec(), p[k - 1]), data)?;
            if v < best {
                best = v;
                center = p;
            }
            let mut j = 0;
            while j < k {
                idx[j] += 1;
                if idx[j] < n {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == k {
                break;
            }
        }
        half = 3.0 * step;
        step /= 10.0;
    }
    Ok(best)
}

fn corners_max(model: &LinearModel, x: &[f64], y: f64, gamma: f64) -> f64 {
    (0..1u32 << x.len())
        .map(|mask| {
            let xp: Vec<f64> = x
                .iter()
                .enumerate()
                .map(|(j, v)| v + if mask >> j & 1 == 1 { gamma } else { -gamma })
                .collect();
            (model.predict(&xp) - y).powi(2)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn solver_optimality() -> Outcome {
    let norms = [PerturbationNorm::LInf, PerturbationNorm::L2, PerturbationNorm::L1];
    let mut worst_excess = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    let mut runs = 0;
    for seed in 0..10u64 {
        let d = if seed < 5 { 1 } else { 2 };
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = rng.gen_range(-0.5..0.5);
        let xs: Vec<Vec<f64>> = (0..20).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let ys = xs
            .iter()
            .map(|x| x.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>() + b + rng.gen_range(-0.3..0.3))
            .collect();
        let data = Dataset::new(xs, ys)?;
        let norm = norms[seed as usize % 3];
        let gamma = 0.1;
        let objectives = [
            Objective::SmoothAdv(AdvConfig { gamma, norm, tau: 1.0, surrogate: LossKind::Squared }),
            Objective::SmoothAdv(AdvConfig { gamma, norm, tau: 1.0, surrogate: LossKind::Huber { delta: 0.2 } }),
            Objective::AdvSq { gamma, norm },
        ];
        for objective in &objectives {
            let trained = train(objective, &data, &SolverConfig::default())?;
            let oracle = grid_oracle(objective, &data)?;
            runs += 1;
            worst_excess = worst_excess.max(trained.objective - oracle);
            if trained.objective > oracle + 1e-6 {
                failures.push(format!("seed {seed} {}: {} vs {oracle}", objective.name(), trained.objective));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_corner = 0.0f64;
    for d in 1..=10 {
        for _ in 0..100 {
            let model = LinearModel::new((0..d).map(|_| rng.gen_range(-2.0..2.0)).collect(), rng.gen_range(-1.0..1.0));
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y = rng.gen_range(-2.0..2.0);
            let gamma = rng.gen_range(0.0..0.5);
            let closed = adv_squared_loss(&model, &x, y, gamma, PerturbationNorm::LInf);
            let brute = corners_max(&model, &x, y, gamma);
            worst_corner = worst_corner.max((closed - brute).abs());
        }
    }
    Ok((
        failures.is_empty() && worst_corner <= 1e-12,
        format!(
            "{runs} trainings, max trained - oracle {worst_excess:.2e}, max |closed - corners| {worst_corner:.1e} for d <= 10{}",
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    ))
}

fn upper_bound_chain() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let norms = [PerturbationNorm::LInf, PerturbationNorm::L2, PerturbationNorm::L1];
    let (mut pairs, mut violations, mut violations_4b) = (0, 0, 0);
    let mut worst = f64::NEG_INFINITY;
    // 100 models, each against its own 100-row dataset
    for _ in 0..100 {
        let d = rng.gen_range(1..=5);
        let model = LinearModel::new((0..d).map(|_| rng.gen_range(-1.0..1.0)).collect(), rng.gen_range(-1.0..1.0));
        let xs: Vec<Vec<f64>> = (0..100).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let ys: Vec<f64> = (0..100).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let data = Dataset::new(xs, ys)?;
        let gamma = rng.gen_range(0.0..0.3);
        let norm = norms[rng.gen_range(0..3)];
        let s = smoothness_term(&model, gamma, norm);
        let b_prime = empirical_nu(&model, &data, gamma, norm) / 3.0;
        for (x, y) in data.rows() {
            let adv = adv_squared_loss(&model, x, y, gamma, norm);
            let sq = (model.predict(x) - y).powi(2);
            let excess = adv - (sq + 3.0 * b_prime * s);
            worst = worst.max(excess);
            pairs += 1;
            violations += (excess > 1e-12) as usize;
            violations_4b += (adv > sq + 4.0 * b_prime * s + 1e-12) as usize;
        }
    }
    Ok((
        violations == 0,
        format!(
            "{violations}/{pairs} pairs exceed the 3B' chain (max excess {worst:.3e}); with 4B' {violations_4b} exceed"
        ),
    ))
}

fn trend_bed() -> hcons::Result<(SynthConfig, LinearModel, Dataset)> {
    let cfg = SynthConfig {
        seed: 7,
        d: 5,
        m: 200,
        bound: 3.0,
        noise: Noise::TwoPointWithOutliers {
            a: 0.1,
            outlier_frac: 0.1,
            outlier_scale: 10.0,
        },
    };
    let s = synth_linear_dataset(&cfg)?;
    Ok((cfg, s.truth, s.data))
}

fn adversarial_trend() -> Outcome {
    let (cfg, truth, data) = trend_bed()?;
    let norm = PerturbationNorm::LInf;
    let mut wins = 0;
    let mut rows = Vec::new();
    for gamma in [0.001, 0.005, 0.01] {
        let objectives = [
            Objective::SmoothAdv(AdvConfig { gamma, norm, tau: 1.0, surrogate: LossKind::Huber { delta: 0.2 } }),
            Objective::AdvSq { gamma, norm },
        ];
        let mut means = [(0.0, 0.0); 2];
        for split in 0..5u64 {
            let (train_set, _) = train_test_split(&data, 0.7, split)?;
            let test = synth_from_truth(&truth, &SynthConfig { seed: 1000 + split, m: 10_000, ..cfg })?;
            for (k, objective) in objectives.iter().enumerate() {
                let r = train(objective, &train_set, &SolverConfig::default())?;
                let e = evaluate(&r.model, &test, gamma, norm)?;
                means[k].0 += e.clean_mse / 5.0;
                means[k].1 += e.robust_mse / 5.0;
            }
        }
        let win = means[0].0 <= means[1].0 && means[0].1 <= means[1].1;
        wins += win as usize;
        rows.push(format!(
            "gamma {gamma}: huber {:.5}/{:.5} vs adv-sq {:.5}/{:.5}",
            means[0].0, means[0].1, means[1].0, means[1].1
        ));
    }
    Ok((wins >= 2, format!("{wins}/3 gamma values favour huber; {}", rows.join("; "))))
}

fn learning_bound_direction() -> Outcome {
    let dist = fuzz_distribution(&FuzzConfig::default(), 0);
    let mut pass = true;
    let mut notes = Vec::new();
    for kind in CLASSES {
        let class = kind.build(dist.bound())?;
        for surrogate in [LossKind::Squared, LossKind::Lp { p: 3.0 }, LossKind::Lp { p: 1.5 }] {
            let reports = [100usize, 1000, 10_000]
                .iter()
                .map(|&m| bounds::evaluate_learning_bound(surrogate, &dist, &class, m, 0.05, 0, 5))
                .collect::<hcons::Result<Vec<_>>>()?;
            let decreasing = reports.windows(2).all(|w| w[1].rhs_value < w[0].rhs_value);
            let nonneg = reports.iter().all(|r| r.rademacher_estimate >= 0.0);
            pass &= decreasing && nonneg;
            notes.push(format!(
                "{kind}/{surrogate}: rhs {}",
                reports.iter().map(|r| format!("{:.4}", r.rhs_value)).collect::<Vec<_>>().join(" > ")
            ));
        }
    }
    Ok((pass, notes.join("; ")))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("bound fuzz", bound_fuzz),
        ("best conditional oracles", oracle_equivalence),
        ("minimizability gaps", minimizability_gaps),
        ("counterexamples", counterexample_suite),
        ("lemma grids", lemma_grids),
        ("general template cross-check", general_crosscheck),
        ("adversarial solver optimality", solver_optimality),
        ("adversarial upper-bound chain", upper_bound_chain),
        ("huber vs adv-sq trend", adversarial_trend),
        ("learning bound direction", learning_bound_direction),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (pass, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += !pass as usize;
        println!("criterion {}: {} {name}: {detail}", i + 1, if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {}/{} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
