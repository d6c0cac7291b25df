//! Turns a config into a fully numeric plan, recording where every value
//! came from so a run can be reproduced from its metadata alone.

use std::collections::BTreeMap;

use medclip::bandit::{resolve_bandit, BanditEnvironment, BanditSchedule, BanditTheoremInput, Feedback};
use medclip::estimator::{median_size, MedianEstimatorConfig};
use medclip::geometry::{FeasibleSet, ProxSetup};
use medclip::noise::{NoiseOracle, TailSpec};
use medclip::objective::Objective;
use medclip::solvers::{
    resolve_restart_smd, resolve_restart_sstm, resolve_smd, resolve_sstm, ClipSchedule, RestartInput,
    RestartSchedule, SgdParams, SmdSchedule, SmdTheoremInput, SstmSchedule, SstmTheoremInput,
};
use medclip::vector::{dist2, lq_norm};
use serde::Serialize;

use crate::config::{
    ClipMode, ExperimentConfig, ExperimentKind, NoiseSection, ProblemKind, ScheduleMode,
};
use crate::error::{HarnessError, Result};
use crate::least_squares::LeastSquares;

pub const DEFAULT_BETA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// Set explicitly in the config.
    Override,
    /// Tuned default for this experiment kind.
    Default,
    /// Computed from a convergence theorem.
    Formula,
    /// Derived from the generated problem instance.
    Problem,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Entry {
    pub value: f64,
    pub source: Source,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formula: Option<&'static str>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Provenance {
    pub values: BTreeMap<String, Entry>,
    /// Which branch of a `min`/`max` in a formula was active.
    pub branches: BTreeMap<String, String>,
}

impl Provenance {
    fn set(&mut self, name: &str, value: f64, source: Source, formula: Option<&'static str>) -> f64 {
        self.values.insert(
            name.to_string(),
            Entry {
                value,
                source,
                formula,
            },
        );
        value
    }

    /// Override if present, else the fallback with its source.
    fn pick(&mut self, name: &str, over: Option<f64>, fallback: f64, source: Source) -> f64 {
        match over {
            Some(v) => self.set(name, v, Source::Override, None),
            None => self.set(name, fallback, source, None),
        }
    }

    fn pick_usize(&mut self, name: &str, over: Option<usize>, fallback: usize, source: Source) -> usize {
        self.pick(name, over.map(|v| v as f64), fallback as f64, source) as usize
    }

    pub fn get(&self, name: &str) -> Option<&Entry> {
        self.values.get(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "solver", rename_all = "snake_case")]
pub enum Plan {
    Sstm(SstmSchedule),
    Smd(SmdSchedule),
    Sgd(SgdParams),
    Restarted(RestartSchedule),
    Bandit {
        environment: BanditEnvironment,
        schedule: BanditSchedule,
    },
}

/// Problem instance shared by every run of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoInstance {
    pub objective: LeastSquares,
    pub x0: Vec<f64>,
    pub noise: NoiseSection,
}

impl ZoInstance {
    pub fn oracle(&self) -> Result<NoiseOracle<&LeastSquares>> {
        Ok(NoiseOracle::new(
            &self.objective,
            self.noise.mode,
            self.noise.dist,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    pub plan: Plan,
    pub provenance: Provenance,
    pub instance: Option<ZoInstance>,
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

pub fn build_problem(config: &ExperimentConfig) -> LeastSquares {
    let p = &config.problem;
    match config.problem_kind() {
        ProblemKind::LeastSquares => LeastSquares::random(p.d, p.l, p.matrix_seed),
        ProblemKind::Planted => LeastSquares::planted(p.d, p.l, p.matrix_seed),
        ProblemKind::Composite => LeastSquares::composite(p.d, p.l, p.mu, p.matrix_seed),
    }
}

pub fn resolve_schedule(config: &ExperimentConfig) -> Result<Resolution> {
    config.validate()?;
    if config.experiment.kind.is_bandit() {
        return resolve_bandit_plan(config);
    }
    let objective = build_problem(config);
    let x0 = config
        .problem
        .x0
        .clone()
        .unwrap_or_else(|| vec![0.0; objective.dim()]);
    let instance = ZoInstance {
        objective,
        x0,
        noise: config.noise(),
    };
    let mut prov = Provenance::default();
    let plan = resolve_zo(config, &instance, &mut prov)?;
    Ok(Resolution {
        plan,
        provenance: prov,
        instance: Some(instance),
    })
}

fn tail_of(instance: &ZoInstance) -> Result<TailSpec> {
    instance.oracle()?.tail().ok_or_else(|| {
        config_err("theorem mode needs symmetric noise; set schedule.mode = \"explicit\"")
    })
}

fn iterations_from_budget(config: &ExperimentConfig, prov: &mut Provenance, calls_per_iter: u64) -> usize {
    let budget = (config.experiment.oracle_calls / calls_per_iter) as usize;
    prov.pick_usize("iterations", config.schedule.iterations, budget, Source::Default)
}

fn resolve_zo(config: &ExperimentConfig, inst: &ZoInstance, prov: &mut Provenance) -> Result<Plan> {
    let s = &config.schedule;
    let kind = config.experiment.kind;
    let d = inst.objective.dim();
    let every = config.trace_every();
    let radius = prov.pick(
        "radius",
        s.radius,
        dist2(&inst.x0, inst.objective.optimum()),
        Source::Problem,
    );
    let m2 = prov.pick(
        "m2",
        s.m2,
        inst.objective.sigma_max() + inst.objective.mu() * radius,
        Source::Problem,
    );
    let theorem = config.schedule_mode() == ScheduleMode::Theorem;
    let eps = || s.eps.ok_or_else(|| config_err("theorem mode needs schedule.eps"));
    let beta = || prov_free_beta(s.beta);

    match kind {
        ExperimentKind::ZoSstm if theorem => {
            let tail = tail_of(inst)?;
            let m = match s.m {
                Some(m) => m,
                None => median_size(tail.kappa)?,
            };
            let b = s.b.unwrap_or(1);
            let iterations = iterations_from_budget(config, prov, ((2 * m + 1) * b) as u64);
            let eps = prov.set("eps", eps()?, Source::Override, None);
            let beta = prov.pick("beta", s.beta, beta(), Source::Default);
            let res = resolve_sstm(
                &SstmTheoremInput {
                    eps,
                    beta,
                    m2,
                    radius,
                    iterations,
                    b,
                    d,
                    tail,
                    mode: inst.noise.mode,
                    m: Some(m),
                },
                every,
            )?;
            let mut sched = res.schedule;
            prov.pick_usize("m", s.m, m, Source::Formula);
            prov.pick_usize("b", s.b, b, Source::Default);
            sched.estimator.tau = prov.pick_formula("tau", s.tau, sched.estimator.tau, "eps / (4 M2)");
            sched.smoothness =
                prov.pick_formula("smoothness", s.smoothness, sched.smoothness, "sqrt(d) M2 / tau");
            sched.a = prov.pick_formula(
                "a",
                s.a,
                sched.a,
                "min(A^2, sigma K^1.5 sqrt(A) tau / (sqrt(b d) M2 R))",
            );
            prov.set("sigma", res.sigma.sigma(), Source::Formula, Some("median moment bound"));
            prov.set("log_factor", res.log_factor, Source::Formula, Some("ln(4K / beta)"));
            prov.branches.insert("a".into(), res.a_branch.to_string());
            sched.clip = clip_schedule(s.clip, s.lambda, radius, res.log_factor, prov)?;
            sched.validate()?;
            Ok(Plan::Sstm(sched))
        }
        ExperimentKind::ZoSstm => {
            let m = prov.pick_usize("m", s.m, 2, Source::Default);
            let b = prov.pick_usize("b", s.b, 1, Source::Default);
            let iterations = iterations_from_budget(config, prov, ((2 * m + 1) * b) as u64);
            let tau = prov.pick("tau", s.tau, 0.01, Source::Default);
            let a = prov.pick("a", s.a, 0.001, Source::Default);
            let smoothness = prov.pick("smoothness", s.smoothness, 1.0, Source::Default);
            let beta = prov.pick("beta", s.beta, beta(), Source::Default);
            let log_factor = prov.set(
                "log_factor",
                (4.0 * iterations.max(1) as f64 / beta).ln(),
                Source::Formula,
                Some("ln(4K / beta)"),
            );
            let sched = SstmSchedule {
                iterations,
                estimator: MedianEstimatorConfig::new(m, b, tau, 2.0)?,
                a,
                smoothness,
                clip: clip_schedule(s.clip, s.lambda, radius, log_factor, prov)?,
                trace_every: every,
            };
            sched.validate()?;
            Ok(Plan::Sstm(sched))
        }
        ExperimentKind::ZoSmd => {
            let setup = s.setup.unwrap_or(ProxSetup::Ball);
            let set = s.set.unwrap_or(FeasibleSet::WholeSpace);
            prov.branches.insert("setup".into(), setup.name().to_string());
            if theorem {
                let tail = tail_of(inst)?;
                let m = match s.m {
                    Some(m) => m,
                    None => median_size(tail.kappa)?,
                };
                prov.pick_usize("m", s.m, m, Source::Formula);
                let iterations = iterations_from_budget(config, prov, (2 * m + 1) as u64);
                let eps = prov.set("eps", eps()?, Source::Override, None);
                let res = resolve_smd(
                    &SmdTheoremInput {
                        eps,
                        m2,
                        iterations,
                        d,
                        tail,
                        mode: inst.noise.mode,
                        m: Some(m),
                        setup,
                        set,
                    },
                    every,
                )?;
                let mut sched = res.schedule;
                prov.set("diameter", res.diameter, Source::Formula, Some("sqrt(2 sup V)"));
                prov.set("sigma", res.sigma.sigma(), Source::Formula, Some("median moment bound"));
                sched.estimator.tau = prov.pick_formula("tau", s.tau, sched.estimator.tau, "eps / (4 M2)");
                sched.lambda = prov.pick_formula("lambda", s.lambda, sched.lambda, "sigma a_q sqrt(K)");
                sched.nu = prov.pick_formula("nu", s.nu, sched.nu, "D / lambda");
                sched.validate()?;
                Ok(Plan::Smd(sched))
            } else {
                let m = prov.pick_usize("m", s.m, 2, Source::Default);
                let iterations = iterations_from_budget(config, prov, (2 * m + 1) as u64);
                let tau = prov.pick("tau", s.tau, 0.01, Source::Default);
                let nu = s
                    .nu
                    .ok_or_else(|| config_err("explicit mirror descent needs schedule.nu"))?;
                let lambda = s
                    .lambda
                    .ok_or_else(|| config_err("explicit mirror descent needs schedule.lambda"))?;
                prov.set("nu", nu, Source::Override, None);
                prov.set("lambda", lambda, Source::Override, None);
                let sched = SmdSchedule {
                    iterations,
                    estimator: MedianEstimatorConfig::new(m, 1, tau, setup.norms().1)?,
                    nu,
                    lambda,
                    setup,
                    set,
                    trace_every: every,
                };
                sched.validate()?;
                Ok(Plan::Smd(sched))
            }
        }
        ExperimentKind::ZoSgd => {
            if theorem {
                return Err(config_err("zo_sgd has no theorem schedule; use explicit mode"));
            }
            let m = prov.pick_usize("m", s.m, 2, Source::Default);
            let b = prov.pick_usize("b", s.b, 1, Source::Default);
            let iterations = iterations_from_budget(config, prov, ((2 * m + 1) * b) as u64);
            let tau = prov.pick("tau", s.tau, 0.1, Source::Default);
            let params = SgdParams {
                iterations,
                estimator: MedianEstimatorConfig::new(m, b, tau, 2.0)?,
                a: prov.pick("a", s.a, 0.01, Source::Default),
                momentum: prov.pick("momentum", s.momentum, 0.9, Source::Default),
                lambda: s.lambda.map(|l| prov.set("lambda", l, Source::Override, None)),
                trace_every: every,
            };
            params.validate()?;
            Ok(Plan::Sgd(params))
        }
        ExperimentKind::ZoRestarted => {
            let mu = inst.objective.mu();
            if !(mu > 0.0) {
                return Err(config_err(
                    "restarts need a strongly convex problem; set problem.kind = \"composite\" with mu > 0",
                ));
            }
            prov.set("mu", mu, Source::Problem, None);
            let tail = tail_of(inst)?;
            let input = RestartInput {
                mu,
                eps: prov.set("eps", eps()?, Source::Override, None),
                r0: radius,
                m2,
                beta: prov.pick("beta", s.beta, beta(), Source::Default),
                b: prov.pick_usize("b", s.b, 1, Source::Default),
                d,
                tail,
                mode: inst.noise.mode,
                m: s.m,
                max_stage_iterations: s.max_stage_iterations,
                trace_every: every,
            };
            let sched = if s.restart_smd.unwrap_or(false) {
                let setup = s.setup.unwrap_or(ProxSetup::Ball);
                let set = s.set.unwrap_or(FeasibleSet::WholeSpace);
                resolve_restart_smd(&input, setup, set)?
            } else {
                resolve_restart_sstm(&input)?
            };
            prov.pick_usize("m", s.m, sched.m, Source::Formula);
            prov.set("n_r", sched.n_r as f64, Source::Formula, Some("number of restart stages"));
            Ok(Plan::Restarted(sched))
        }
        ExperimentKind::Bandit | ExperimentKind::FullFeedback => unreachable!("handled above"),
    }
}

fn prov_free_beta(beta: Option<f64>) -> f64 {
    beta.unwrap_or(DEFAULT_BETA)
}

impl Provenance {
    fn pick_formula(&mut self, name: &str, over: Option<f64>, value: f64, formula: &'static str) -> f64 {
        match over {
            Some(v) => self.set(name, v, Source::Override, None),
            None => self.set(name, value, Source::Formula, Some(formula)),
        }
    }
}

fn clip_schedule(
    mode: Option<ClipMode>,
    lambda: Option<f64>,
    radius: f64,
    log_factor: f64,
    prov: &mut Provenance,
) -> Result<ClipSchedule> {
    let mode = mode.unwrap_or_default();
    prov.branches.insert(
        "clip".into(),
        match mode {
            ClipMode::Theorem => "theorem",
            ClipMode::Constant => "constant",
            ClipMode::None => "none",
        }
        .into(),
    );
    Ok(match mode {
        ClipMode::Theorem => ClipSchedule::Theorem { radius, log_factor },
        ClipMode::Constant => {
            let l = lambda.ok_or_else(|| config_err("schedule.clip = \"constant\" needs schedule.lambda"))?;
            ClipSchedule::Constant {
                lambda: prov.set("lambda", l, Source::Override, None),
            }
        }
        ClipMode::None => ClipSchedule::Unclipped,
    })
}

fn resolve_bandit_plan(config: &ExperimentConfig) -> Result<Resolution> {
    let s = &config.schedule;
    let noise = config.noise();
    let feedback = if config.experiment.kind == ExperimentKind::Bandit {
        Feedback::Bandit
    } else {
        Feedback::Full
    };
    let mut environment = BanditEnvironment::new(config.bandit.mu.clone(), noise.dist, feedback)?;
    environment.shared_noise = config.bandit.shared_noise;
    let mut prov = Provenance::default();
    let horizon = config.bandit.horizon;
    prov.set("horizon", horizon as f64, Source::Override, None);
    let every = config.trace_every();
    let schedule = if config.schedule_mode() == ScheduleMode::Theorem {
        let (kappa, delta) = match noise.dist {
            medclip::NoiseDist::None => (2.0, 0.0),
            dist => {
                let law = dist.symmetric().ok_or_else(|| {
                    config_err("theorem mode needs symmetric noise; set schedule.mode = \"explicit\"")
                })?;
                (law.tail_index(), law.gamma() * law.stable_scale())
            }
        };
        let r = lq_norm(&config.bandit.mu, f64::INFINITY);
        prov.set("kappa", kappa, Source::Problem, None);
        prov.set("delta", delta, Source::Formula, Some("gamma * scale"));
        prov.set("r", r, Source::Problem, Some("||mu||_inf"));
        let m2 = prov.pick("m2", s.m2, r.max(1.0), Source::Problem);
        let res = resolve_bandit(
            &BanditTheoremInput {
                d: environment.d(),
                horizon,
                kappa,
                delta,
                r,
                m2,
                m: s.m,
            },
            every,
        )?;
        let mut sched = res.schedule;
        prov.pick_usize("m", s.m, sched.m, Source::Formula);
        prov.set("c2", res.c2, Source::Formula, Some("(32 ln d - 8)(8 M2^2 + 2 Delta^2 (2m+1)(4/kappa)^(2/kappa))"));
        sched.nu = prov.pick_formula("nu", s.nu, sched.nu, "sqrt(2m+1) / sqrt(T (36 c^2 + 2 R^2))");
        sched.lambda = prov.pick_formula("lambda", s.lambda, sched.lambda, "sqrt(T)");
        sched
    } else {
        let m = prov.pick_usize("m", s.m, 3, Source::Default);
        let nu = s.nu.ok_or_else(|| config_err("explicit bandit schedule needs schedule.nu"))?;
        let lambda = prov.pick("lambda", s.lambda, (horizon as f64).sqrt(), Source::Default);
        BanditSchedule {
            horizon,
            m,
            nu: prov.set("nu", nu, Source::Override, None),
            lambda,
            trace_every: every,
        }
    };
    schedule.validate()?;
    prov.set(
        "blocks",
        schedule.blocks() as f64,
        Source::Formula,
        Some("ceil((T - 1) / (2m + 1))"),
    );
    Ok(Resolution {
        plan: Plan::Bandit {
            environment,
            schedule,
        },
        provenance: prov,
        instance: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use medclip::noise::{NoiseDist, OracleMode, SymmetricDist};

    fn cauchy_zo(kind: ExperimentKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::for_kind(kind);
        c.problem.d = 4;
        c.problem.l = 10;
        c.noise = Some(NoiseSection {
            mode: OracleMode::Lipschitz,
            dist: NoiseDist::Symmetric(SymmetricDist::Cauchy { scale: 1.0 }),
        });
        c
    }

    #[test]
    fn theorem_median_size_from_tail_index() {
        let mut c = cauchy_zo(ExperimentKind::ZoSstm);
        c.schedule.mode = Some(ScheduleMode::Theorem);
        c.schedule.eps = Some(0.1);
        let r = resolve_schedule(&c).unwrap();
        let Plan::Sstm(s) = r.plan else { panic!() };
        assert_eq!(s.estimator.m, 3);
        assert_eq!(r.provenance.get("m").unwrap().source, Source::Formula);
        assert_eq!(s.iterations, 100_000 / 7);
        assert!(r.provenance.branches.contains_key("a"));

        c.noise = Some(NoiseSection {
            mode: OracleMode::Lipschitz,
            dist: NoiseDist::Symmetric(SymmetricDist::Normal { std: 1.0 }),
        });
        let Plan::Sstm(s) = resolve_schedule(&c).unwrap().plan else { panic!() };
        assert_eq!(s.estimator.m, 2);
    }

    #[test]
    fn explicit_defaults_are_the_tuned_values() {
        let r = resolve_schedule(&ExperimentConfig::default()).unwrap();
        let Plan::Sstm(s) = r.plan else { panic!() };
        assert_eq!((s.a, s.smoothness, s.estimator.tau, s.estimator.m), (0.001, 1.0, 0.01, 2));
        assert_eq!(r.provenance.get("a").unwrap().source, Source::Default);
        let r = resolve_schedule(&ExperimentConfig::for_kind(ExperimentKind::ZoSgd)).unwrap();
        let Plan::Sgd(p) = r.plan else { panic!() };
        assert_eq!((p.a, p.momentum, p.estimator.tau), (0.01, 0.9, 0.1));
    }

    #[test]
    fn overrides_are_marked() {
        let mut c = ExperimentConfig::default();
        c.schedule.a = Some(0.1);
        let r = resolve_schedule(&c).unwrap();
        assert_eq!(r.provenance.get("a").unwrap().source, Source::Override);
    }

    #[test]
    fn bandit_theorem_example() {
        let mut c = ExperimentConfig::for_kind(ExperimentKind::Bandit);
        c.bandit.horizon = 400;
        c.schedule.m = Some(1);
        let r = resolve_schedule(&c).unwrap();
        let Plan::Bandit { schedule, .. } = r.plan else { panic!() };
        assert_eq!(schedule.blocks(), 133);
        assert_eq!(schedule.lambda, 20.0);
        let mut c = ExperimentConfig::for_kind(ExperimentKind::Bandit);
        c.bandit.horizon = 400;
        let Plan::Bandit { schedule, .. } = resolve_schedule(&c).unwrap().plan else { panic!() };
        assert_eq!(schedule.m, 3);
    }

    #[test]
    fn missing_constants_are_config_errors() {
        let mut c = cauchy_zo(ExperimentKind::ZoSstm);
        c.schedule.mode = Some(ScheduleMode::Theorem);
        assert_eq!(resolve_schedule(&c).unwrap_err().exit_code(), 2);
        let c = cauchy_zo(ExperimentKind::ZoSmd);
        assert_eq!(resolve_schedule(&c).unwrap_err().exit_code(), 2);
        let mut c = cauchy_zo(ExperimentKind::ZoRestarted);
        c.problem.kind = Some(ProblemKind::LeastSquares);
        c.schedule.eps = Some(1.0);
        assert_eq!(resolve_schedule(&c).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn restart_ladder_from_config() {
        let mut c = ExperimentConfig::for_kind(ExperimentKind::ZoRestarted);
        c.schedule.eps = Some(1.0);
        c.schedule.radius = Some(4.0);
        c.noise = Some(NoiseSection {
            mode: OracleMode::Independent,
            dist: NoiseDist::None,
        });
        let r = resolve_schedule(&c).unwrap();
        let Plan::Restarted(s) = r.plan else { panic!() };
        assert_eq!(s.n_r, 4);
    }
}
