//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use medclip::estimator::{batch_median_estimate, sigma_bound, MedianEstimatorConfig};
use medclip::geometry::{
    bregman, bregman_project, conjugate_grad, prox_grad, tsallis_multiplier, FeasibleSet,
    ProxSetup,
};
use medclip::objective::{FnObjective, Linear};
use medclip::solvers::{
    resolve_restart_sstm, sstm_step, ClipSchedule, RestartInput, SstmSchedule, SstmState,
};
use medclip::vector::{lq_norm, norm2};
use medclip::{NoiseDist, NoiseOracle, OracleMode, SymmetricDist, TailSpec};
use medclip_harness::config::{ExperimentConfig, ExperimentKind, NoiseSection, ProblemKind};
use medclip_harness::resolve::{build_problem, resolve_schedule, Plan};
use medclip_harness::runner::run_single;
use medclip_harness::run_experiment;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn lipschitz(c: Vec<f64>, dist: SymmetricDist) -> NoiseOracle<Linear> {
    NoiseOracle::new(Linear::new(c), OracleMode::Lipschitz, NoiseDist::Symmetric(dist)).unwrap()
}

fn random_vec(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
}

// 1. Second moment of the median estimator error against sigma^2 a_q^2.
fn moment_bound() -> Outcome {
    const DRAWS: usize = 100_000;
    let cells = [
        (2.0, 2, SymmetricDist::Normal { std: 1.0 }),
        (1.0, 3, SymmetricDist::Cauchy { scale: 1.0 }),
        (0.5, 5, SymmetricDist::Stable { alpha: 0.5, scale: 1.0 }),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut lines = Vec::new();
    let mut ok = true;
    for (kappa, m, dist) in cells {
        for d in [2usize, 16] {
            let c = random_vec(d, &mut rng);
            let x = random_vec(d, &mut rng);
            let oracle = lipschitz(c.clone(), dist);
            let tail = oracle.tail().unwrap();
            assert_eq!(tail.kappa, kappa);
            let cfg = MedianEstimatorConfig::new(m, 1, 0.05, 2.0).unwrap();
            let (mut s2, mut sinf) = (0.0, 0.0);
            for _ in 0..DRAWS {
                let g = batch_median_estimate(&oracle, &x, &cfg, &mut rng).unwrap();
                let err: Vec<f64> = g.value.iter().zip(&c).map(|(a, b)| a - b).collect();
                s2 += lq_norm(&err, 2.0).powi(2);
                sinf += lq_norm(&err, f64::INFINITY).powi(2);
            }
            for (q, sum) in [(2.0, s2), (f64::INFINITY, sinf)] {
                let qcfg = MedianEstimatorConfig { q, ..cfg };
                let bound = sigma_bound(&qcfg, d, norm2(&c), &tail, OracleMode::Lipschitz)
                    .unwrap()
                    .lq_moment();
                let emp = sum / DRAWS as f64;
                ok &= emp <= bound;
                lines.push(format!("k={kappa} d={d} q={q}: {emp:.3e} <= {bound:.3e}"));
            }
        }
    }
    check(ok, lines.join("; "))
}

// 2. The batch estimate is unbiased for the gradient of a linear objective.
fn unbiasedness() -> Outcome {
    const DRAWS: usize = 100_000;
    let d = 6;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for mode in [OracleMode::Lipschitz, OracleMode::Independent] {
        let c = random_vec(d, &mut rng);
        let x = random_vec(d, &mut rng);
        let oracle = NoiseOracle::new(
            Linear::new(c.clone()),
            mode,
            NoiseDist::Symmetric(SymmetricDist::Cauchy { scale: 1.0 }),
        )
        .unwrap();
        let cfg = MedianEstimatorConfig::new(3, 2, 0.5, 2.0).unwrap();
        let (mut sum, mut sq) = (vec![0.0; d], vec![0.0; d]);
        for _ in 0..DRAWS {
            let g = batch_median_estimate(&oracle, &x, &cfg, &mut rng).unwrap();
            for i in 0..d {
                sum[i] += g.value[i];
                sq[i] += g.value[i] * g.value[i];
            }
        }
        let n = DRAWS as f64;
        for i in 0..d {
            let mean = sum[i] / n;
            let se = ((sq[i] / n - mean * mean) / n).sqrt();
            worst = worst.max((mean - c[i]).abs() / se);
        }
    }
    check(worst <= 3.0, format!("largest deviation {worst:.2} standard errors"))
}

fn running_variance(m: usize, rng: &mut ChaCha8Rng) -> f64 {
    let d = 4;
    let oracle = lipschitz(vec![1.0, -0.5, 0.25, 2.0], SymmetricDist::Cauchy { scale: 1.0 });
    let x = vec![0.3, -0.2, 0.1, 0.4];
    let cfg = MedianEstimatorConfig::new(m, 1, 0.1, 2.0).unwrap();
    // Welford over the vector, total variance as the trace
    let (mut mean, mut m2) = (vec![0.0; d], vec![0.0; d]);
    for n in 1..=100_000usize {
        let g = batch_median_estimate(&oracle, &x, &cfg, rng).unwrap();
        for i in 0..d {
            let delta = g.value[i] - mean[i];
            mean[i] += delta / n as f64;
            m2[i] += delta * (g.value[i] - mean[i]);
        }
    }
    m2.iter().sum::<f64>() / 99_999.0
}

// 3. Without the median the running variance is far larger.
fn variance_contrast() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let plain = running_variance(0, &mut rng);
    let med = running_variance(3, &mut rng);
    check(
        plain >= 10.0 * med,
        format!("m=0 variance {plain:.3e}, m=3 variance {med:.3e}, ratio {:.1}", plain / med),
    )
}

fn zo_config(alpha: f64, m: usize, out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::for_kind(ExperimentKind::ZoSstm);
    c.experiment.out = out.to_path_buf();
    c.experiment.runs = Some(15);
    c.experiment.oracle_calls = 100_000;
    c.experiment.trace_every = Some(1000);
    c.problem.d = 16;
    c.problem.l = 200;
    c.schedule.m = Some(m);
    c.noise = Some(NoiseSection {
        mode: OracleMode::Lipschitz,
        dist: NoiseDist::Symmetric(SymmetricDist::Stable { alpha, scale: 1.0 }),
    });
    c
}

// 4. The median variant beats the plain estimator at alpha = 1 and stays
// within a factor two at alpha = 1.5.
fn zo_convergence() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut med = BTreeMap::new();
    for alpha in [1.0, 1.5] {
        for m in [3, 0] {
            let out = dir.path().join(format!("a{alpha}_m{m}"));
            let s = run_experiment(&zo_config(alpha, m, &out)).unwrap();
            assert_eq!(s.failed, 0);
            med.insert((alpha.to_string(), m), s.median_final().unwrap());
        }
    }
    let g = |a: &str, m| med[&(a.to_string(), m)];
    let strict = g("1", 3) < g("1", 0);
    let (lo, hi) = {
        let (a, b) = (g("1.5", 3), g("1.5", 0));
        (a.min(b), a.max(b))
    };
    check(
        strict && hi <= 2.0 * lo,
        format!(
            "alpha=1: m=3 {:.4} vs m=0 {:.4}; alpha=1.5: m=3 {:.4} vs m=0 {:.4}",
            g("1", 3),
            g("1", 0),
            g("1.5", 3),
            g("1.5", 0)
        ),
    )
}

// 5. With no effective clipping and no noise the solver matches a plain
// accelerated recursion written out here.
fn sstm_exactness() -> Outcome {
    let d = 5;
    let quad = |x: &[f64]| {
        x.iter()
            .enumerate()
            .map(|(i, v)| (i as f64 + 1.0) * (v - 0.5).powi(2))
            .sum::<f64>()
    };
    let oracle = NoiseOracle::noiseless_oracle(FnObjective::new(d, quad));
    let (a, l, tau, m) = (2.0, 60.0, 1e-3, 1);
    let schedule = SstmSchedule {
        iterations: 100,
        estimator: MedianEstimatorConfig::new(m, 1, tau, 2.0).unwrap(),
        a,
        smoothness: l,
        clip: ClipSchedule::Constant { lambda: 1e300 },
        trace_every: 1,
    };
    let x0 = vec![2.0, -1.0, 0.0, 1.5, -0.5];
    let mut state = SstmState::new(&x0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    let mut ref_rng = ChaCha8Rng::seed_from_u64(5);
    let (mut y, mut z) = (x0.clone(), x0.clone());
    let mut big_a = 0.0;
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        sstm_step(&mut state, &schedule, &oracle, &mut rng).unwrap();

        let alpha = (k as f64 + 2.0) / (2.0 * a * l);
        let next = big_a + alpha;
        let x: Vec<f64> = (0..d).map(|i| (big_a * y[i] + alpha * z[i]) / next).collect();
        let e: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut ref_rng)).collect();
        let n = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        let e: Vec<f64> = e.iter().map(|v| v / n).collect();
        let plus: Vec<f64> = (0..d).map(|i| x[i] + tau * e[i]).collect();
        let minus: Vec<f64> = (0..d).map(|i| x[i] - tau * e[i]).collect();
        let s = d as f64 / (2.0 * tau) * (quad(&plus) - quad(&minus));
        for i in 0..d {
            z[i] -= alpha * s * e[i];
            y[i] = (big_a * y[i] + alpha * z[i]) / next;
        }
        big_a = next;

        for (got, want) in [(&state.x, &x), (&state.y, &y), (&state.z, &z)] {
            for (p, q) in got.iter().zip(want.iter()) {
                worst = worst.max((p - q).abs());
            }
        }
    }
    let gap = quad(&state.y);
    check(
        worst <= 1e-10 && gap < quad(&x0),
        format!("max deviation over 100 steps {worst:.2e}, final value {gap:.3e}"),
    )
}

fn on_simplex(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let w: Vec<f64> = (0..d).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

// 6. Conjugate inversion, projection optimality and a worked projection.
fn geometry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let setups = [ProxSetup::Ball, ProxSetup::Entropy { gamma: 0.1 }, ProxSetup::Tsallis12];
    let d = 5;

    let mut inversion: f64 = 0.0;
    for setup in &setups {
        for _ in 0..200 {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(0.01..2.0)).collect();
            let back = conjugate_grad(setup, &prox_grad(setup, &x).unwrap()).unwrap();
            for (a, b) in back.iter().zip(&x) {
                inversion = inversion.max((a - b).abs() / b.abs().max(1.0));
            }
        }
    }

    let mut dominated = true;
    for setup in &setups {
        for _ in 0..20 {
            let y: Vec<f64> = (0..d).map(|_| rng.random_range(0.01..1.5)).collect();
            let p = bregman_project(setup, FeasibleSet::Simplex, &y).unwrap();
            let vp = bregman(setup, &p, &y).unwrap();
            for _ in 0..100 {
                let u = on_simplex(d, &mut rng);
                dominated &= vp <= bregman(setup, &u, &y).unwrap() + 1e-12;
            }
        }
    }

    // the multiplier solves 1/(5-c)^2 + 1/(2-c)^2 = 1 on (-inf, 1)
    let h = |c: f64| 1.0 / (5.0 - c).powi(2) + 1.0 / (2.0 - c).powi(2) - 1.0;
    let (mut lo, mut hi) = (-10.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c_ref = 0.5 * (lo + hi);
    let y = [0.04, 0.25];
    let c = tsallis_multiplier(&y).unwrap();
    let p = bregman_project(&ProxSetup::Tsallis12, FeasibleSet::Simplex, &y).unwrap();
    let raw = [1.0 / (5.0 - c).powi(2), 1.0 / (2.0 - c).powi(2)];
    let residual = (raw[0] + raw[1] - 1.0).abs();
    let matches = (p[0] - raw[0]).abs() <= 1e-6 && (p[1] - raw[1]).abs() <= 1e-6;

    check(
        inversion <= 1e-10
            && dominated
            && (c_ref - 0.968).abs() < 5e-4
            && (c - c_ref).abs() <= 1e-6
            && residual <= 1e-6
            && matches,
        format!(
            "inversion {inversion:.1e}, dominance {dominated}, c = {c:.6} (bisection {c_ref:.6}), residual {residual:.1e}"
        ),
    )
}

// 7. Restart ladder and per-stage contraction on a noiseless composite.
fn restart() -> Outcome {
    let input = RestartInput {
        mu: 2.0,
        eps: 1.0,
        r0: 4.0,
        m2: 10.0,
        beta: 0.05,
        b: 1,
        d: 4,
        tail: TailSpec::new(1.0, 0.01, 1.0 / PI).unwrap(),
        mode: OracleMode::Lipschitz,
        m: None,
        max_stage_iterations: None,
        trace_every: 1,
    };
    let sched = resolve_restart_sstm(&input).unwrap();
    let mut ladder = sched.n_r == 4 && sched.stages.len() == 4;
    for (i, st) in sched.stages.iter().enumerate() {
        let prev = 4.0 * 0.5f64.powf(i as f64 / 2.0);
        let r = 4.0 * 0.5f64.powf((i + 1) as f64 / 2.0);
        ladder &= st.t == i + 1
            && (st.radius_prev - prev).abs() <= 1e-12
            && (st.radius - r).abs() <= 1e-12
            && (st.eps_t - 2.0 * prev * prev / 4.0).abs() <= 1e-12;
    }

    let mut c = ExperimentConfig::for_kind(ExperimentKind::ZoRestarted);
    c.problem.kind = Some(ProblemKind::Composite);
    c.problem.d = 4;
    c.problem.l = 8;
    c.problem.mu = 2.0;
    c.schedule.eps = Some(1.0);
    c.noise = Some(NoiseSection {
        mode: OracleMode::Independent,
        dist: NoiseDist::None,
    });
    let center = build_problem(&c).optimum().to_vec();
    c.problem.x0 = Some(center.iter().map(|v| v + 2.0).collect());
    let res = resolve_schedule(&c).unwrap();
    let Plan::Restarted(s) = &res.plan else {
        unreachable!()
    };
    let rec = run_single(&res, 7).unwrap();
    let dist2: Vec<f64> = rec
        .stage_points
        .iter()
        .map(|p| p.iter().zip(&center).map(|(a, b)| (a - b).powi(2)).sum())
        .collect();
    let halving = s.n_r == 4 && dist2.len() == 5 && dist2.windows(2).all(|w| w[1] <= 0.5 * w[0]);
    check(
        ladder && halving,
        format!(
            "ladder {ladder}, stages {}, distance^2 per stage {:?}",
            s.n_r,
            dist2.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>()
        ),
    )
}

fn aggregate_means(path: &Path) -> BTreeMap<u64, f64> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].parse().unwrap(), r[1].parse().unwrap())
        })
        .collect()
}

// 8. Regret grows like sqrt(T) or slower and the best arm dominates.
fn bandit() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::for_kind(ExperimentKind::Bandit);
    c.experiment.out = dir.path().to_path_buf();
    c.experiment.runs = Some(20);
    c.bandit.horizon = 10_000;
    let s = run_experiment(&c).unwrap();
    assert_eq!(s.failed, 0);
    let regret = aggregate_means(&dir.path().join("aggregate_cum_regret.csv"));
    let early = regret[&1000] / 1000f64.sqrt();
    let late = regret[&10_000] / 10_000f64.sqrt();
    let probs = aggregate_means(&dir.path().join("aggregate_opt_prob.csv"));
    let tail: Vec<f64> = probs.values().rev().take(30).copied().collect();
    let smoothed = tail.iter().sum::<f64>() / tail.len() as f64;
    check(
        late <= 1.5 * early && smoothed >= 0.8,
        format!(
            "regret/sqrt(T): {early:.2} at T=1000, {late:.2} at T=10000; smoothed best-arm probability {smoothed:.3}"
        ),
    )
}

fn csv_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

// 9. Same config and seed, same bytes, regardless of worker count.
fn determinism() -> Outcome {
    let mut kinds = Vec::new();
    for kind in [
        ExperimentKind::ZoSstm,
        ExperimentKind::ZoSmd,
        ExperimentKind::ZoRestarted,
        ExperimentKind::ZoSgd,
        ExperimentKind::Bandit,
        ExperimentKind::FullFeedback,
    ] {
        let mut c = ExperimentConfig::for_kind(kind);
        c.experiment.runs = Some(4);
        c.experiment.seed = 11;
        c.experiment.oracle_calls = 3_000;
        c.problem.d = 4;
        c.problem.l = 12;
        c.bandit.horizon = 500;
        match kind {
            ExperimentKind::ZoSmd => {
                c.schedule.nu = Some(0.01);
                c.schedule.lambda = Some(100.0);
            }
            ExperimentKind::ZoRestarted => {
                c.schedule.eps = Some(1.0);
                c.schedule.max_stage_iterations = Some(300);
                c.noise = Some(NoiseSection {
                    mode: OracleMode::Independent,
                    dist: NoiseDist::Symmetric(SymmetricDist::Cauchy { scale: 1e-3 }),
                });
            }
            _ => {}
        }
        kinds.push((kind, c));
    }
    let mut same = true;
    let mut files = 0;
    for (kind, mut c) in kinds {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        c.experiment.out = a.path().to_path_buf();
        c.experiment.workers = 1;
        run_experiment(&c).unwrap();
        c.experiment.out = b.path().to_path_buf();
        c.experiment.workers = 4;
        run_experiment(&c).unwrap();
        let (x, y) = (csv_bytes(a.path()), csv_bytes(b.path()));
        if x.is_empty() || x != y {
            eprintln!("  {kind:?} differs");
            same = false;
        }
        files += x.len();
    }
    check(same, format!("{files} csv files compared across six experiment kinds"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("moment bound", moment_bound),
        ("unbiasedness", unbiasedness),
        ("variance contrast", variance_contrast),
        ("zo convergence", zo_convergence),
        ("sstm exactness", sstm_exactness),
        ("mirror geometry", geometry),
        ("restart schedule", restart),
        ("bandit regret", bandit),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} ({name}): PASS [{secs:.1}s] {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL [{secs:.1}s] {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
