use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::estimator::RevocationEstimator;
use super::matrix::{init_perf_matrix, step_cost, PerfMatrix};
use super::report::{Event, JobSummary, LedgerRow, Report};
use super::{SimConfig, SimError};
use crate::earlycurve::{detect_plateau, predict_final, rank_models, CurvePoint, Direction, MetricTrace};
use crate::market::{avg_price, bill, revocation_time, Acquisition, Catalog, EndReason, InstanceType, PriceTrace};
use crate::revpred::inference_max_price;
use crate::workload::{checkpoint_time, step_duration, JobSpec, Workload};
use crate::HOUR;

/// Placement decision for one job.
#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub instance: String,
    pub max_price: f64,
    pub probability: f64,
    pub step_cost: f64,
    pub avg_price: f64,
}

impl Choice {
    fn beats(&self, other: &Choice) -> bool {
        self.step_cost
            .total_cmp(&other.step_cost)
            .then(self.avg_price.total_cmp(&other.avg_price))
            .then(self.instance.cmp(&other.instance))
            .is_lt()
    }
}

/// Draws a maximum price for every instance type in `pool` (in order),
/// asks the estimator for its revocation probability and returns the
/// instance with the lowest expected step cost. Ties go to the lower
/// average price, then the name.
#[allow(clippy::too_many_arguments)]
pub fn get_best_inst<R: Rng + ?Sized>(
    t: i64,
    hp: &str,
    matrix: &PerfMatrix,
    pool: &[&InstanceType],
    traces: &BTreeMap<String, PriceTrace>,
    estimator: &dyn RevocationEstimator,
    rng: &mut R,
) -> Result<Choice, SimError> {
    let mut best: Option<Choice> = None;
    for inst in pool {
        let trace = traces.get(&inst.name).ok_or_else(|| SimError::MissingTrace(inst.name.clone()))?;
        let max_price = inference_max_price(trace.price_at(t)?, rng);
        let Some(p) = estimator.probability(trace, t, max_price) else {
            continue;
        };
        let avg = avg_price(trace, t, HOUR)?;
        let c = Choice {
            instance: inst.name.clone(),
            max_price,
            probability: p,
            step_cost: step_cost(matrix, &inst.name, hp, p, avg),
            avg_price: avg,
        };
        if best.as_ref().is_none_or(|b| c.beats(b)) {
            best = Some(c);
        }
    }
    best.ok_or_else(|| SimError::NoInstance { job: hp.to_string(), t })
}

enum Provisioner<'a> {
    Spot(&'a dyn RevocationEstimator),
    /// A single instance type bought with an unreachable maximum price.
    Fixed(&'a InstanceType),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Waiting,
    Running,
    /// Stopped after its exploration budget or a plateau.
    Finished,
    Done,
}

struct Assign {
    instance: String,
    start: i64,
    max_price: f64,
    revoke_at: Option<i64>,
    ckpt: f64,
    step_end: f64,
    step_dur: f64,
    steps: u64,
}

struct Job<'a> {
    spec: &'a JobSpec,
    metrics: MetricTrace,
    observed: MetricTrace,
    state: State,
    steps_done: u64,
    checkpointed: u64,
    target: u64,
    /// Step durations.
    rng: ChaCha8Rng,
    /// Maximum-price draws. Kept per job so a job's placements do not depend
    /// on what other jobs do.
    provision_rng: ChaCha8Rng,
    assign: Option<Assign>,
    upload_until: f64,
    plateau: bool,
    explored: u64,
    predicted: f64,
    selected: bool,
    acquisitions: usize,
    cost: f64,
}

enum Close {
    /// Revocation at the given instant; the instance is kept until then.
    Notice(i64),
    Stop(EndReason),
}

struct Engine<'a> {
    cfg: &'a SimConfig,
    traces: &'a BTreeMap<String, PriceTrace>,
    pool: Vec<&'a InstanceType>,
    provisioner: Provisioner<'a>,
    matrix: PerfMatrix,
    jobs: Vec<Job<'a>>,
    ledger: Vec<LedgerRow>,
    events: Vec<Event>,
    direction: Direction,
    start: i64,
    horizon: i64,
}

impl<'a> Engine<'a> {
    fn new(
        cfg: &'a SimConfig,
        catalog: &'a Catalog,
        traces: &'a BTreeMap<String, PriceTrace>,
        workload: &'a Workload,
        provisioner: Provisioner<'a>,
    ) -> Result<Self, SimError> {
        cfg.validate()?;
        workload.validate(catalog)?;
        if workload.max_trial_steps < cfg.max_trial_steps {
            return Err(SimError::InvalidConfig(format!(
                "workload curves cover {} steps, config asks for {}",
                workload.max_trial_steps, cfg.max_trial_steps
            )));
        }
        let pool: Vec<&InstanceType> = match &provisioner {
            Provisioner::Spot(_) => catalog.iter().collect(),
            Provisioner::Fixed(inst) => vec![*inst],
        };
        if pool.is_empty() {
            return Err(SimError::InvalidConfig("empty instance pool".into()));
        }
        let mut latest_start = i64::MIN;
        let mut horizon = i64::MAX;
        for inst in &pool {
            let tr = traces.get(&inst.name).ok_or_else(|| SimError::MissingTrace(inst.name.clone()))?;
            latest_start = latest_start.max(tr.start());
            horizon = horizon.min(tr.end());
        }
        let start = cfg.start_time.unwrap_or(latest_start + 2 * HOUR);
        if start - HOUR < latest_start {
            return Err(SimError::InvalidConfig(format!(
                "start time {start} needs an hour of price history (traces start at {latest_start})"
            )));
        }
        let jobs = workload
            .jobs
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(2 * i as u64);
                let mut provision_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                provision_rng.set_stream(2 * i as u64 + 1);
                Job {
                    spec,
                    metrics: spec.curve.metrics(cfg.max_trial_steps),
                    observed: MetricTrace::new(Vec::new()).expect("empty trace"),
                    state: State::Waiting,
                    steps_done: 0,
                    checkpointed: 0,
                    target: cfg.theta_steps(),
                    rng,
                    provision_rng,
                    assign: None,
                    upload_until: f64::NEG_INFINITY,
                    plateau: false,
                    explored: 0,
                    predicted: f64::NAN,
                    selected: false,
                    acquisitions: 0,
                    cost: 0.0,
                }
            })
            .collect();
        Ok(Engine {
            cfg,
            traces,
            pool,
            provisioner,
            matrix: init_perf_matrix(catalog, cfg.c0, cfg.perf_init, cfg.ema_beta),
            jobs,
            ledger: Vec::new(),
            events: Vec::new(),
            direction: workload.direction,
            start,
            horizon,
        })
    }

    fn log(&mut self, t: i64, job: usize, kind: &str, instance: &str, detail: String) {
        if self.cfg.record_events {
            self.events.push(Event {
                t,
                job: self.jobs[job].spec.id.clone(),
                kind: kind.into(),
                instance: instance.into(),
                detail,
            });
        }
    }

    fn run(mut self) -> Result<Report, SimError> {
        let mut t = self.start;
        let mut continuing = false;
        loop {
            if t > self.horizon {
                return Err(SimError::Horizon { t, horizon: self.horizon });
            }
            for j in 0..self.jobs.len() {
                if self.jobs[j].state == State::Running {
                    self.advance(j, t)?;
                    self.handle_events(j, t, continuing)?;
                }
            }
            if !continuing && self.jobs.iter().all(|j| j.state == State::Finished) {
                self.select(t)?;
                continuing = true;
            }
            if continuing && self.jobs.iter().all(|j| j.state == State::Done) {
                break;
            }
            self.deploy_waiting(t, continuing)?;
            t += self.cfg.poll_interval;
        }
        self.report()
    }

    /// Completes every step that ends by `t` (and before any revocation).
    fn advance(&mut self, j: usize, t: i64) -> Result<(), SimError> {
        let job = &mut self.jobs[j];
        let a = job.assign.as_mut().expect("running job has an assignment");
        let limit = a.revoke_at.map_or(t as f64, |r| (r.min(t)) as f64);
        while a.step_end <= limit && job.steps_done < job.target {
            job.steps_done += 1;
            a.steps += 1;
            let k = job.steps_done - 1;
            if let Ok(i) = job.metrics.points().binary_search_by_key(&k, |p| p.step) {
                let metric = job.metrics.points()[i].metric;
                job.observed.push(CurvePoint { step: k, metric })?;
            }
            self.matrix.update(&a.instance, &job.spec.id, a.step_dur)?;
            if job.steps_done < job.target {
                let d = step_duration(&job.spec.perf, &a.instance, &mut job.rng)?;
                a.step_dur = d;
                a.step_end += d;
            } else {
                a.step_end = f64::INFINITY;
            }
        }
        Ok(())
    }

    fn handle_events(&mut self, j: usize, t: i64, continuing: bool) -> Result<(), SimError> {
        let cfg = self.cfg;
        let (revoke_at, start) = {
            let a = self.jobs[j].assign.as_ref().expect("running job has an assignment");
            (a.revoke_at, a.start)
        };
        if let Some(r) = revoke_at.filter(|&r| r <= t + cfg.notice_lead) {
            let ok = self.close(j, t, Close::Notice(r))?;
            self.jobs[j].state = State::Waiting;
            self.log(t, j, "notice", "", format!("revocation at {r}; checkpoint {}", if ok { "saved" } else { "lost" }));
            return Ok(());
        }
        let job = &mut self.jobs[j];
        let budget_done = job.steps_done >= job.target;
        if !budget_done && !continuing && cfg.theta < 1.0 && detect_plateau(&job.observed, &cfg.fit) {
            job.plateau = true;
        }
        let plateau = job.plateau && !continuing;
        if budget_done || plateau {
            let ok = self.close(j, t, Close::Stop(EndReason::Finished))?;
            let job = &mut self.jobs[j];
            job.state = match (ok, continuing) {
                (false, _) => State::Waiting,
                (true, false) => State::Finished,
                (true, true) => State::Done,
            };
            let kind = if plateau && !budget_done { "plateau" } else { "budget" };
            self.log(t, j, kind, "", format!("{} steps", self.jobs[j].steps_done));
        } else if t - start > cfg.rotation_limit {
            self.close(j, t, Close::Stop(EndReason::SelfShutdown))?;
            self.jobs[j].state = State::Waiting;
            self.log(t, j, "rotate", "", String::new());
        }
        Ok(())
    }

    /// Checkpoints and releases the job's acquisition. Returns whether the
    /// checkpoint completed; if not, progress since the last one is lost.
    fn close(&mut self, j: usize, t: i64, how: Close) -> Result<bool, SimError> {
        let job = &mut self.jobs[j];
        let a = job.assign.take().expect("running job has an assignment");
        let need = job.steps_done > job.checkpointed;
        let done_at = t as f64 + a.ckpt;
        let (end, reason, ok) = match how {
            Close::Notice(r) => (r, EndReason::Revoked, !need || done_at <= r as f64),
            Close::Stop(reason) => {
                let intended = if need { done_at.ceil() as i64 } else { t };
                match a.revoke_at {
                    Some(r) if r <= intended => (r, EndReason::Revoked, !need || done_at <= r as f64),
                    _ => (intended, reason, true),
                }
            }
        };
        let mut lost = 0;
        if ok {
            if need {
                job.upload_until = done_at;
            }
            job.checkpointed = job.steps_done;
        } else {
            lost = job.steps_done - job.checkpointed;
            job.steps_done = job.checkpointed;
            job.observed = job.observed.truncate_steps(job.checkpointed);
        }
        if end > self.horizon {
            return Err(SimError::Horizon { t: end, horizon: self.horizon });
        }
        let acq = Acquisition {
            instance: a.instance.clone(),
            start_time: a.start,
            max_price: a.max_price,
            end_time: end,
            end_reason: reason,
        };
        let b = bill(&self.traces[&a.instance], &acq)?;
        job.cost += b.charge;
        self.ledger.push(LedgerRow {
            job: job.spec.id.clone(),
            instance: a.instance,
            start: a.start,
            end,
            reason: reason.as_str().into(),
            charge: b.charge,
            refunded: b.refunded,
            gross: b.gross,
            steps: a.steps,
            lost,
        });
        Ok(ok)
    }

    fn deploy_waiting(&mut self, t: i64, continuing: bool) -> Result<(), SimError> {
        let cap = self.cfg.max_parallel.unwrap_or(usize::MAX);
        let mut running = self.jobs.iter().filter(|j| j.state == State::Running).count();
        for j in 0..self.jobs.len() {
            if self.jobs[j].state != State::Waiting {
                continue;
            }
            if self.jobs[j].steps_done >= self.jobs[j].target {
                self.jobs[j].state = if continuing { State::Done } else { State::Finished };
                continue;
            }
            if running >= cap {
                continue;
            }
            self.deploy(j, t)?;
            running += 1;
        }
        Ok(())
    }

    fn deploy(&mut self, j: usize, t: i64) -> Result<(), SimError> {
        let spec = self.jobs[j].spec;
        let choice = match &self.provisioner {
            Provisioner::Spot(est) => {
                let rng = &mut self.jobs[j].provision_rng;
                get_best_inst(t, &spec.id, &self.matrix, &self.pool, self.traces, *est, rng)?
            }
            Provisioner::Fixed(inst) => {
                let trace = &self.traces[&inst.name];
                let avg = avg_price(trace, t, HOUR)?;
                Choice {
                    instance: inst.name.clone(),
                    max_price: f64::MAX,
                    probability: 0.0,
                    step_cost: step_cost(&self.matrix, &inst.name, &spec.id, 0.0, avg),
                    avg_price: avg,
                }
            }
        };
        let trace = &self.traces[&choice.instance];
        let revoke_at = revocation_time(trace, t, choice.max_price)?;
        let ckpt = checkpoint_time(&spec.checkpoint, &choice.instance)?.seconds;
        let job = &mut self.jobs[j];
        let restore = if job.checkpointed > 0 {
            (job.upload_until - t as f64).max(0.0) + ckpt
        } else {
            0.0
        };
        let d = step_duration(&spec.perf, &choice.instance, &mut job.rng)?;
        job.assign = Some(Assign {
            instance: choice.instance.clone(),
            start: t,
            max_price: choice.max_price,
            revoke_at,
            ckpt,
            step_end: t as f64 + restore + d,
            step_dur: d,
            steps: 0,
        });
        job.state = State::Running;
        job.acquisitions += 1;
        self.log(
            t,
            j,
            "deploy",
            &choice.instance,
            format!("p={:.4} max_price={:.4} restore={restore:.1}s", choice.probability, choice.max_price),
        );
        Ok(())
    }

    /// Extrapolates every setting's final metric and continues the best
    /// `mcnt` of each algorithm.
    fn select(&mut self, t: i64) -> Result<(), SimError> {
        let max = self.cfg.max_trial_steps;
        let fit = self.cfg.fit_config();
        let worst = match self.direction {
            Direction::Minimize => f64::INFINITY,
            Direction::Maximize => f64::NEG_INFINITY,
        };
        let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, job) in self.jobs.iter_mut().enumerate() {
            let last = job.observed.last().map_or(worst, |p| p.metric);
            job.predicted = if job.steps_done >= max || job.plateau {
                last
            } else {
                predict_final(&job.observed, max, &fit).unwrap_or(last)
            };
            if !job.predicted.is_finite() {
                job.predicted = worst;
            }
            job.explored = job.steps_done;
            groups.entry(job.spec.algorithm.clone()).or_default().push(i);
        }
        for members in groups.values() {
            let preds: Vec<(String, f64)> =
                members.iter().map(|&i| (self.jobs[i].spec.id.clone(), self.jobs[i].predicted)).collect();
            let top = rank_models(&preds, self.cfg.mcnt.min(members.len()), self.direction)?;
            for &i in members {
                let job = &mut self.jobs[i];
                job.selected = top.contains(&job.spec.id);
                // A plateaued model has converged and counts as fully trained.
                if job.selected && !job.plateau && job.steps_done < max {
                    job.target = max;
                    job.state = State::Waiting;
                } else {
                    job.state = State::Done;
                }
            }
        }
        for i in 0..self.jobs.len() {
            if self.jobs[i].selected {
                let p = self.jobs[i].predicted;
                self.log(t, i, "selected", "", format!("predicted {p:.6}"));
            }
        }
        Ok(())
    }

    fn report(self) -> Result<Report, SimError> {
        let total_cost: f64 = self.ledger.iter().map(|r| r.charge).sum();
        let gross_cost: f64 = self.ledger.iter().map(|r| r.gross).sum();
        let jct = self.ledger.iter().map(|r| r.end).max().map_or(0, |e| e - self.start);
        let executed: u64 = self.ledger.iter().map(|r| r.steps).sum();
        let free: u64 = self.ledger.iter().filter(|r| r.refunded).map(|r| r.steps).sum();
        let lost: u64 = self.ledger.iter().map(|r| r.lost).sum();
        let max = self.cfg.max_trial_steps;
        let mut selected: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut truth: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
        let jobs: Vec<JobSummary> = self
            .jobs
            .iter()
            .map(|j| {
                let true_final = j.spec.curve.true_final(max);
                truth.entry(j.spec.algorithm.clone()).or_default().push((j.spec.id.clone(), true_final));
                if j.selected {
                    selected.entry(j.spec.algorithm.clone()).or_default().push(j.spec.id.clone());
                }
                JobSummary {
                    id: j.spec.id.clone(),
                    algorithm: j.spec.algorithm.clone(),
                    steps_done: j.steps_done,
                    explored_steps: j.explored,
                    plateau: j.plateau,
                    predicted_final: j.predicted,
                    true_final,
                    selected: j.selected,
                    acquisitions: j.acquisitions,
                    cost: j.cost,
                }
            })
            .collect();
        let mut hits = 0usize;
        for (alg, finals) in &truth {
            let best = rank_models(finals, 1, self.direction)?;
            if selected.get(alg).is_some_and(|s| s.contains(&best[0])) {
                hits += 1;
            }
        }
        Ok(Report {
            seed: self.cfg.seed,
            theta: self.cfg.theta,
            start_time: self.start,
            total_cost,
            gross_cost,
            jct,
            pcr: (jct > 0 && total_cost > 0.0).then(|| 1.0 / (jct as f64 * total_cost)),
            executed_steps: executed,
            free_steps: free,
            lost_steps: lost,
            free_steps_fraction: if executed == 0 { 0.0 } else { free as f64 / executed as f64 },
            selected,
            best_selected_fraction: if truth.is_empty() { 0.0 } else { hits as f64 / truth.len() as f64 },
            jobs,
            ledger: self.ledger,
            events: self.events,
        })
    }
}

/// Runs the tuning workflow over all catalog instance types.
pub fn run_simulation(
    config: &SimConfig,
    catalog: &Catalog,
    traces: &BTreeMap<String, PriceTrace>,
    workload: &Workload,
    estimator: &dyn RevocationEstimator,
) -> Result<Report, SimError> {
    Engine::new(config, catalog, traces, workload, Provisioner::Spot(estimator))?.run()
}

/// Runs every setting to the full budget on one instance type that is never
/// revoked.
pub fn simulate_baseline(
    config: &SimConfig,
    catalog: &Catalog,
    traces: &BTreeMap<String, PriceTrace>,
    workload: &Workload,
    instance: &str,
) -> Result<Report, SimError> {
    let inst = catalog.get(instance).ok_or_else(|| SimError::UnknownInstance(instance.to_string()))?;
    let cfg = SimConfig {
        theta: 1.0,
        ..config.clone()
    };
    let single = Catalog::new(vec![inst.clone()])?;
    Engine::new(&cfg, &single, traces, workload, Provisioner::Fixed(inst))?.run()
}
