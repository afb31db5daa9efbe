//! The per-slot simulation loop, run summaries, sweeps and presets.
//!
//! Every slot `t` runs, in order:
//!
//! 1. at `t % T0 == 0`, spectral regrouping and RB reallocation from the
//!    current pair midpoints;
//! 2. one mobility step;
//! 3. fading draws for every own and co-channel link on every RB in use;
//! 4. local power decisions from own gains and the interference estimate;
//! 5. true rates with the realized co-channel interference;
//! 6. queue event, queue and ledger update, AoI sample, virtual queues and
//!    interference estimate.
//!
//! Slots before the warm-up boundary update the state but no statistic.

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{fade, rate, PathLoss};
use crate::clustering::{allocate_rbs, cluster_pairs, GroupAssignment, RbMap};
use crate::control::{
    baseline_policy, drift_weight, update_virtual, waterfill, DriftInputs, Policy, PowerDecision, VirtualQueues,
    VirtualUpdate,
};
use crate::error::{Error, Result};
use crate::evt::{fit_moments, FitReport};
use crate::metrics::{ccdf_table, spearman, CcdfPoint, Histogram};
use crate::mobility::{init_pairs, step, PairState, RoadGrid};
use crate::params::{derive_params, DerivedParams, IndicatorTiming, InterferenceModel, SimParams};
use crate::queueing::{advance_queue, aoi_sample, aoi_violation, excess_event, ihat_pending, AgeBoundTally, TxState};
use crate::rng::{stream, Stream};

/// Per-slot state of one pair, emitted when tracing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlotRecord {
    pub slot: u64,
    pub pair: usize,
    /// Total transmit power in watts.
    pub power: f64,
    /// Realized rate in packets.
    pub rate: f64,
    /// Queue length at the start of the slot.
    pub queue: f64,
    /// AoI at the end of the slot in seconds.
    pub aoi: Option<f64>,
    pub indicator: bool,
    pub excess: Option<f64>,
    /// Drift weight; zero under the baseline policies.
    pub weight: f64,
    pub zeta: f64,
    pub virtual_queues: VirtualQueues,
}

/// Hooks into a running simulation. All methods default to no-ops.
pub trait Observer {
    /// Whether [`Observer::records`] should be fed.
    fn wants_records(&self) -> bool {
        false
    }

    fn wants_positions(&self) -> bool {
        false
    }

    /// Every pair's record for one slot, in pair order.
    fn records(&mut self, _records: &[SlotRecord]) -> Result<()> {
        Ok(())
    }

    /// Positions after the mobility step of `slot`.
    fn positions(&mut self, _slot: u64, _pairs: &[PairState]) -> Result<()> {
        Ok(())
    }

    /// A new grouping and RB allocation taking effect at `slot`.
    fn epoch(&mut self, _slot: u64, _groups: &GroupAssignment, _rbs: &RbMap) -> Result<()> {
        Ok(())
    }
}

/// Observer that ignores everything.
pub struct Silent;

impl Observer for Silent {}

/// Post-warm-up statistics of one pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSummary {
    pub pair: usize,
    /// Time-averaged total power in watts.
    pub mean_power: f64,
    pub mean_aoi: Option<f64>,
    pub worst_aoi: Option<f64>,
    /// Fraction of defined AoI samples above the age limit.
    pub violation_prob: f64,
    /// Fraction of slots with the queue event `Q > R - psi`.
    pub event_prob: f64,
    pub mean_queue: f64,
    pub queue_q999: Option<f64>,
    pub aoi_q999: Option<f64>,
    pub virtual_queues: VirtualQueues,
}

/// Everything a run reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub policy: String,
    pub seed: u64,
    pub pairs: usize,
    pub slots: u64,
    pub warmup: u64,
    /// Slots actually simulated (short of `slots` only on abort).
    pub completed: u64,
    pub derived: DerivedParams,
    pub per_pair: Vec<PairSummary>,
    pub mean_power: f64,
    pub mean_aoi: Option<f64>,
    pub worst_aoi: Option<f64>,
    pub violation_prob: f64,
    pub event_prob: f64,
    pub queue_hist: Histogram,
    pub aoi_hist: Histogram,
    pub queue_ccdf: Vec<CcdfPoint>,
    pub aoi_ccdf: Vec<CcdfPoint>,
    /// Pooled conditional excesses, at most `excess_cap` of them (the first ones).
    pub excess: Vec<f64>,
    /// Total conditional excesses observed, including those past the cap.
    pub excess_count: u64,
    pub fit: Option<FitReport>,
    /// Why no fit is reported, when `fit` is `None`.
    pub fit_error: Option<String>,
    pub age_bound: AgeBoundTally,
    /// Largest `J(end) / slots` over pairs, per virtual queue.
    pub virtual_growth: VirtualQueues,
    /// Spearman correlation of per-pair 99.9% quantiles of queue and AoI.
    pub tail_rank_correlation: Option<f64>,
    pub epochs: u64,
    /// Pair-epochs left without any RB.
    pub starved_pair_epochs: u64,
    /// Epochs whose spectral embedding had a tied eigengap.
    pub degenerate_epochs: u64,
}

impl RunSummary {
    /// Quantile `p` of the pooled queue length.
    pub fn queue_quantile(&self, p: f64) -> Option<f64> {
        self.queue_hist.quantile(p)
    }

    pub fn aoi_quantile(&self, p: f64) -> Option<f64> {
        self.aoi_hist.quantile(p)
    }

    /// Pooled `Pr{AoI > x}`.
    pub fn aoi_ccdf_at(&self, x: f64) -> f64 {
        self.aoi_hist.ccdf(x)
    }
}

#[derive(Debug, Clone)]
struct PairStats {
    power: f64,
    slots: u64,
    events: u64,
    queue_sum: f64,
    queue: Histogram,
    aoi: Histogram,
    violations: u64,
}

/// Co-channel state of one RB in the current slot.
#[derive(Debug, Clone, Default)]
struct RbSlot {
    /// Pairs using the RB.
    users: Vec<usize>,
    /// `gains[a * u + b]`: gain from the tx of `users[a]` to the rx of `users[b]`.
    gains: Vec<f64>,
    powers: Vec<f64>,
}

/// A simulation in progress.
pub struct Simulation {
    p: SimParams,
    d: DerivedParams,
    policy: Policy,
    grid: RoadGrid,
    pathloss: PathLoss,
    pairs: Vec<PairState>,
    tx: Vec<TxState>,
    vq: Vec<VirtualQueues>,
    prev_rate: Vec<Option<f64>>,
    /// Interference estimate, `K x N`.
    estimate: Vec<f64>,
    rbmap: RbMap,
    /// `(rb, position in users)` per pair.
    slots_of: Vec<Vec<(usize, usize)>>,
    rb: Vec<RbSlot>,
    cache: Vec<(u64, f64)>,
    mobility_rng: rand_chacha::ChaCha8Rng,
    fading_rng: rand_chacha::ChaCha8Rng,
    clustering_rng: rand_chacha::ChaCha8Rng,
    slot: u64,
    warmup: u64,
    stats: Vec<PairStats>,
    excess: Vec<f64>,
    excess_count: u64,
    age_bound: AgeBoundTally,
    epochs: u64,
    starved: u64,
    degenerate: u64,
    records: Vec<SlotRecord>,
}

impl Simulation {
    pub fn new(params: &SimParams, policy: Policy) -> Result<Simulation> {
        let d = derive_params(params)?;
        let p = params.clone();
        let grid = RoadGrid::from_params(&p)?;
        let mut mobility_rng = stream(p.seed, Stream::Mobility);
        let pairs = init_pairs(&grid, p.pairs, p.pair_gap, p.step_length(), &mut mobility_rng)?;
        let k = p.pairs;
        let stats = (0..k)
            .map(|_| PairStats {
                power: 0.0,
                slots: 0,
                events: 0,
                queue_sum: 0.0,
                queue: Histogram::for_queue(),
                aoi: Histogram::for_aoi(p.slot),
                violations: 0,
            })
            .collect();
        Ok(Simulation {
            pathloss: PathLoss::from_params(&p),
            tx: (0..k).map(|_| TxState::new(d.arrivals_per_slot, p.slot)).collect(),
            vq: vec![VirtualQueues::default(); k],
            prev_rate: vec![None; k],
            estimate: vec![0.0; k * p.rbs],
            rbmap: RbMap {
                per_pair: vec![Vec::new(); k],
                starved: Vec::new(),
            },
            slots_of: vec![Vec::new(); k],
            rb: vec![RbSlot::default(); p.rbs],
            cache: vec![(u64::MAX, 0.0); k * k],
            fading_rng: stream(p.seed, Stream::Fading),
            clustering_rng: stream(p.seed, Stream::Clustering),
            warmup: p.warmup_slots(),
            slot: 0,
            stats,
            excess: Vec::new(),
            excess_count: 0,
            age_bound: AgeBoundTally::default(),
            epochs: 0,
            starved: 0,
            degenerate: 0,
            records: Vec::new(),
            mobility_rng,
            pairs,
            grid,
            policy,
            d,
            p,
        })
    }

    pub fn derived(&self) -> &DerivedParams {
        &self.d
    }

    pub fn pairs(&self) -> &[PairState] {
        &self.pairs
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn rb_map(&self) -> &RbMap {
        &self.rbmap
    }

    pub fn virtual_queues(&self) -> &[VirtualQueues] {
        &self.vq
    }

    pub fn queues(&self) -> impl Iterator<Item = f64> + '_ {
        self.tx.iter().map(|t| t.queue)
    }

    fn regroup(&mut self, obs: &mut dyn Observer) -> Result<()> {
        let mids: Vec<_> = self.pairs.iter().map(PairState::midpoint).collect();
        let groups = cluster_pairs(
            &mids,
            self.p.effective_groups(),
            self.p.kernel_scale,
            self.p.neighborhood,
            &mut self.clustering_rng,
        )?;
        self.rbmap = allocate_rbs(&groups, self.p.rbs);
        for (n, users) in self.rbmap.users(self.p.rbs).into_iter().enumerate() {
            self.rb[n].users = users;
        }
        for s in &mut self.slots_of {
            s.clear();
        }
        for (n, r) in self.rb.iter().enumerate() {
            for (pos, &k) in r.users.iter().enumerate() {
                self.slots_of[k].push((n, pos));
            }
        }
        self.epochs += 1;
        self.starved += self.rbmap.starved.len() as u64;
        self.degenerate += groups.degenerate as u64;
        obs.epoch(self.slot, &groups, &self.rbmap)
    }

    fn link_gain(&mut self, from: usize, to: usize) -> f64 {
        let idx = from * self.p.pairs + to;
        if self.cache[idx].0 != self.slot {
            let g = self
                .pathloss
                .gain(self.pairs[from].tx.pos, self.pairs[to].rx.pos, &self.grid);
            self.cache[idx] = (self.slot, g);
        }
        self.cache[idx].1
    }

    fn draw_gains(&mut self) {
        for n in 0..self.rb.len() {
            let users = std::mem::take(&mut self.rb[n].users);
            let u = users.len();
            let mut gains = std::mem::take(&mut self.rb[n].gains);
            gains.clear();
            for &a in &users {
                for &b in &users {
                    let g = self.link_gain(a, b) * fade(&mut self.fading_rng);
                    gains.push(g);
                }
            }
            debug_assert_eq!(gains.len(), u * u);
            self.rb[n].gains = gains;
            self.rb[n].users = users;
        }
    }

    fn own_gain(&self, n: usize, pos: usize) -> f64 {
        let u = self.rb[n].users.len();
        self.rb[n].gains[pos * u + pos]
    }

    fn local_interference(&self, k: usize, n: usize) -> f64 {
        match self.p.interference {
            InterferenceModel::Ema { .. } => self.estimate[k * self.p.rbs + n],
            InterferenceModel::Fixed(i) => i,
        }
    }

    /// Power decision of pair `k` with its drift weight.
    fn decide(&self, k: usize) -> Result<(PowerDecision, f64)> {
        let own = &self.slots_of[k];
        if self.policy != Policy::Proposed {
            return Ok((baseline_policy(self.policy, own.len(), self.p.max_power)?, 0.0));
        }
        let gains: Vec<f64> = own.iter().map(|&(n, pos)| self.own_gain(n, pos)).collect();
        let interference: Vec<f64> = own.iter().map(|&(n, _)| self.local_interference(k, n)).collect();
        let noise = self.p.noise_power();
        let reference_rate = match self.p.indicator {
            IndicatorTiming::PreviousRate => self.prev_rate[k],
            IndicatorTiming::FullPower => {
                let each = if own.is_empty() {
                    0.0
                } else {
                    self.p.max_power / own.len() as f64
                };
                Some(rate(
                    &vec![each; own.len()],
                    &gains,
                    &interference,
                    noise,
                    self.p.rate_scale(),
                ))
            }
        };
        let weight = drift_weight(
            &self.vq[k],
            &DriftInputs {
                queue: self.tx[k].queue,
                reference_rate,
                arrivals: self.d.arrivals_per_slot,
                tolerance: self.p.tolerance.for_pair(k),
                psi: self.d.psi,
                scale: self.p.rate_scale(),
            },
        );
        let decision = waterfill(weight, &gains, &interference, self.p.tradeoff, self.p.max_power, noise);
        Ok((decision, weight))
    }

    /// Runs one slot.
    pub fn step(&mut self, obs: &mut dyn Observer) -> Result<()> {
        let t = self.slot;
        if t.is_multiple_of(self.p.recluster_period) {
            self.regroup(obs)?;
        }
        step(
            &mut self.pairs,
            &self.grid,
            self.p.step_length(),
            &mut self.mobility_rng,
        );
        if obs.wants_positions() {
            obs.positions(t, &self.pairs)?;
        }
        self.draw_gains();

        let k_total = self.p.pairs;
        let mut weights = vec![0.0; k_total];
        let mut zetas = vec![0.0; k_total];
        for r in &mut self.rb {
            r.powers.clear();
            r.powers.resize(r.users.len(), 0.0);
        }
        for k in 0..k_total {
            let (dec, w) = self.decide(k)?;
            for (&(n, pos), &pw) in self.slots_of[k].iter().zip(&dec.powers) {
                self.rb[n].powers[pos] = pw;
            }
            weights[k] = w;
            zetas[k] = dec.zeta;
        }

        let noise = self.p.noise_power();
        let scale = self.p.rate_scale();
        let measuring = t >= self.warmup;
        let tracing = obs.wants_records();
        self.records.clear();
        let mut powers = Vec::new();
        let mut gains = Vec::new();
        let mut interference = Vec::new();
        for k in 0..k_total {
            powers.clear();
            gains.clear();
            interference.clear();
            for &(n, pos) in &self.slots_of[k] {
                let r = &self.rb[n];
                let u = r.users.len();
                let i: f64 = (0..u)
                    .filter(|&a| a != pos)
                    .map(|a| r.powers[a] * r.gains[a * u + pos])
                    .sum();
                powers.push(r.powers[pos]);
                gains.push(r.gains[pos * u + pos]);
                interference.push(i);
            }
            let rk = rate(&powers, &gains, &interference, noise, scale);
            if let InterferenceModel::Ema { smoothing } = self.p.interference {
                for (&(n, _), &i) in self.slots_of[k].iter().zip(&interference) {
                    let e = &mut self.estimate[k * self.p.rbs + n];
                    *e += smoothing * (i - *e);
                }
            }

            let q = self.tx[k].queue;
            let x = excess_event(q, rk, self.d.psi);
            let at = self.tx[k].slot_end();
            advance_queue(&mut self.tx[k], rk);
            let aoi = aoi_sample(&self.tx[k].ledger, at);
            self.vq[k] = update_virtual(
                &self.vq[k],
                &VirtualUpdate {
                    excess: x,
                    rate: rk,
                    arrivals: self.d.arrivals_per_slot,
                    tolerance: self.p.tolerance.for_pair(k),
                    mean_bound: self.d.excess_mean_bound,
                    second_moment_bound: self.d.excess_second_moment_bound,
                },
            );
            self.prev_rate[k] = Some(rk);
            let total_power: f64 = powers.iter().sum();

            if measuring {
                let s = &mut self.stats[k];
                s.power += total_power;
                s.slots += 1;
                s.queue_sum += q;
                s.queue.record(q);
                if let Some(x) = x {
                    s.events += 1;
                    self.excess_count += 1;
                    if self.excess.len() < self.p.excess_cap {
                        self.excess.push(x);
                    }
                }
                if let Some(a) = aoi {
                    s.aoi.record(a);
                    let viol = aoi_violation(a, self.p.age_limit);
                    s.violations += viol as u64;
                    self.age_bound.record(
                        viol,
                        ihat_pending(&self.tx[k].ledger, at, self.p.age_limit),
                        x.is_some(),
                    );
                }
            }
            if tracing {
                self.records.push(SlotRecord {
                    slot: t,
                    pair: k,
                    power: total_power,
                    rate: rk,
                    queue: q,
                    aoi,
                    indicator: x.is_some(),
                    excess: x,
                    weight: weights[k],
                    zeta: zetas[k],
                    virtual_queues: self.vq[k],
                });
            }
        }
        if tracing {
            obs.records(&self.records)?;
        }
        self.slot += 1;
        Ok(())
    }

    /// Statistics over the slots simulated so far.
    pub fn summary(&self) -> RunSummary {
        let mut queue_hist = Histogram::for_queue();
        let mut aoi_hist = Histogram::for_aoi(self.p.slot);
        let mut per_pair = Vec::with_capacity(self.p.pairs);
        let (mut power, mut slots, mut events, mut violations) = (0.0, 0u64, 0u64, 0u64);
        let elapsed = self.slot.max(1) as f64;
        let mut growth = VirtualQueues::default();
        for (k, s) in self.stats.iter().enumerate() {
            queue_hist.merge(&s.queue);
            aoi_hist.merge(&s.aoi);
            power += s.power;
            slots += s.slots;
            events += s.events;
            violations += s.violations;
            let n = s.slots.max(1) as f64;
            let j = self.vq[k];
            growth.excess = growth.excess.max(j.excess / elapsed);
            growth.second_moment = growth.second_moment.max(j.second_moment / elapsed);
            growth.rate = growth.rate.max(j.rate / elapsed);
            growth.event = growth.event.max(j.event / elapsed);
            per_pair.push(PairSummary {
                pair: k,
                mean_power: s.power / n,
                mean_aoi: s.aoi.mean(),
                worst_aoi: s.aoi.max(),
                violation_prob: s.violations as f64 / s.aoi.count().max(1) as f64,
                event_prob: s.events as f64 / n,
                mean_queue: s.queue_sum / n,
                queue_q999: s.queue.quantile(0.999),
                aoi_q999: s.aoi.quantile(0.999),
                virtual_queues: j,
            });
        }
        let (qs, as_): (Vec<f64>, Vec<f64>) = per_pair
            .iter()
            .filter_map(|p| Some((p.queue_q999?, p.aoi_q999?)))
            .unzip();
        let tail_rank_correlation = spearman(&qs, &as_);
        let (fit, fit_error) = match fit_moments(&self.excess) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        };
        RunSummary {
            policy: self.policy.label(),
            seed: self.p.seed,
            pairs: self.p.pairs,
            slots: self.p.slots,
            warmup: self.warmup,
            completed: self.slot,
            derived: self.d,
            mean_power: power / slots.max(1) as f64,
            mean_aoi: aoi_hist.mean(),
            worst_aoi: aoi_hist.max(),
            violation_prob: violations as f64 / aoi_hist.count().max(1) as f64,
            event_prob: events as f64 / slots.max(1) as f64,
            queue_ccdf: ccdf_table(&queue_hist),
            aoi_ccdf: ccdf_table(&aoi_hist),
            queue_hist,
            aoi_hist,
            excess: self.excess.clone(),
            excess_count: self.excess_count,
            fit,
            fit_error,
            age_bound: self.age_bound,
            virtual_growth: growth,
            tail_rank_correlation,
            epochs: self.epochs,
            starved_pair_epochs: self.starved,
            degenerate_epochs: self.degenerate,
            per_pair,
        }
    }
}

/// Runs a full simulation.
pub fn run(params: &SimParams, policy: Policy) -> Result<RunSummary> {
    run_observed(params, policy, &mut Silent)
}

/// Runs a full simulation, feeding `obs`. A failure inside the slot loop
/// returns [`Error::RunAborted`] carrying the summary so far.
pub fn run_observed(params: &SimParams, policy: Policy, obs: &mut dyn Observer) -> Result<RunSummary> {
    let mut sim = Simulation::new(params, policy)?;
    while sim.slot < params.slots {
        if let Err(e) = sim.step(obs) {
            return Err(Error::RunAborted {
                slot: sim.slot,
                partial: Box::new(sim.summary()),
                source: Box::new(e),
            });
        }
    }
    Ok(sim.summary())
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Arrival bit rate in bits/s.
    ArrivalRate,
    /// Transmitter-receiver gap in metres.
    PairGap,
    /// Number of pairs.
    Pairs,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::ArrivalRate => "arrival_rate",
            SweepAxis::PairGap => "pair_gap",
            SweepAxis::Pairs => "pairs",
        }
    }

    /// `params` with this axis set to `value`.
    pub fn apply(self, params: &SimParams, value: f64) -> Result<SimParams> {
        let mut p = params.clone();
        match self {
            SweepAxis::ArrivalRate => p.arrival_bps = value,
            SweepAxis::PairGap => p.pair_gap = value,
            SweepAxis::Pairs => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::param(
                        "K",
                        format!("sweep value {value} is not a positive integer"),
                    ));
                }
                p.pairs = value as usize;
            }
        }
        p.validate()?;
        Ok(p)
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<SweepAxis> {
        match s {
            "arrival_rate" | "lambda" => Ok(SweepAxis::ArrivalRate),
            "pair_gap" | "gap" => Ok(SweepAxis::PairGap),
            "pairs" | "K" => Ok(SweepAxis::Pairs),
            _ => Err(Error::Config(format!(
                "unknown sweep axis `{s}` (expected arrival_rate, pair_gap or pairs)"
            ))),
        }
    }
}

/// One sweep point: the axis value and its run, or the error it hit.
#[derive(Debug)]
pub struct SweepPoint {
    pub value: f64,
    pub outcome: Result<RunSummary>,
}

/// Independent runs over `values`, in parallel. A failing point does not
/// stop the others.
pub fn sweep(params: &SimParams, policy: Policy, axis: SweepAxis, values: &[f64]) -> Vec<SweepPoint> {
    values
        .par_iter()
        .map(|&value| SweepPoint {
            value,
            outcome: axis.apply(params, value).and_then(|p| run(&p, policy)),
        })
        .collect()
}

/// Runs `params` under each seed, in parallel.
pub fn replicate(params: &SimParams, policy: Policy, seeds: &[u64]) -> Vec<Result<RunSummary>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut p = params.clone();
            p.seed = seed;
            run(&p, policy)
        })
        .collect()
}

/// Canned experiment setups.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Excess-tail fit for several network sizes.
    Sizes,
    /// Queue and AoI tails, proposed against the uniform baseline.
    Compare,
    /// AoI tail over pair gaps.
    Gaps,
    /// Mean and worst AoI over arrival rates.
    Rates,
}

/// What a preset runs: either one configuration under several policies or
/// a sweep along one axis.
#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    Compare { policies: Vec<Policy> },
    Sweep { axis: SweepAxis, values: Vec<f64> },
}

/// Arrival rates of the trade-off sweep, bits/s.
pub const TRADEOFF_RATES: [f64; 7] = [0.07e6, 0.1e6, 0.2e6, 0.35e6, 0.5e6, 0.6e6, 0.7e6];

impl Preset {
    pub fn plan(self) -> Plan {
        match self {
            Preset::Sizes => Plan::Sweep {
                axis: SweepAxis::Pairs,
                values: vec![20.0, 40.0, 80.0],
            },
            Preset::Compare => Plan::Compare {
                policies: vec![Policy::Proposed, Policy::UniformFullPower],
            },
            Preset::Gaps => Plan::Sweep {
                axis: SweepAxis::PairGap,
                values: vec![10.0, 15.0, 20.0, 25.0],
            },
            Preset::Rates => Plan::Sweep {
                axis: SweepAxis::ArrivalRate,
                values: TRADEOFF_RATES.to_vec(),
            },
        }
    }

    /// Base parameters; every preset uses the defaults at `K = 80`.
    pub fn params(self) -> SimParams {
        SimParams::default()
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Preset> {
        match s {
            "sizes" => Ok(Preset::Sizes),
            "compare" => Ok(Preset::Compare),
            "gaps" => Ok(Preset::Gaps),
            "rates" => Ok(Preset::Rates),
            _ => Err(Error::Config(format!(
                "unknown preset `{s}` (expected sizes, compare, gaps or rates)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimParams {
        SimParams {
            pairs: 12,
            groups: 3,
            slots: 3000,
            ..SimParams::default()
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = run(&small(), Policy::Proposed).unwrap();
        let b = run(&small(), Policy::Proposed).unwrap();
        assert_eq!(a, b);
        let mut p = small();
        p.seed = 2;
        assert_ne!(run(&p, Policy::Proposed).unwrap(), a);
    }

    #[test]
    fn summary_invariants() {
        let s = run(&small(), Policy::Proposed).unwrap();
        assert_eq!(s.completed, 3000);
        assert_eq!(s.epochs, 30);
        assert!((0.0..=1.0).contains(&s.violation_prob));
        assert!((0.0..=1.0).contains(&s.event_prob));
        for p in &s.per_pair {
            assert!(p.worst_aoi.unwrap() >= p.mean_aoi.unwrap());
            assert!(p.mean_power <= SimParams::default().max_power * (1.0 + 1e-12));
        }
        assert!(s.age_bound.check().holds);
    }

    #[test]
    fn single_pair_over_provisioned() {
        let p = SimParams {
            pairs: 1,
            slots: 20_000,
            ..SimParams::default()
        };
        let s = run(&p, Policy::Proposed).unwrap();
        assert_eq!(s.violation_prob, 0.0);
        assert!(s.virtual_growth.rate < 1e-3 && s.virtual_growth.event < 1e-3);
        assert!(s.virtual_growth.excess < 1e-3 && s.virtual_growth.second_moment < 1e-3);
    }

    #[test]
    fn zero_power_starves_queue() {
        let p = SimParams {
            pairs: 4,
            groups: 2,
            slots: 2000,
            warmup_fraction: 0.0,
            ..SimParams::default()
        };
        let mut sim = Simulation::new(&p, Policy::FixedPower(0.0)).unwrap();
        for _ in 0..p.slots {
            sim.step(&mut Silent).unwrap();
        }
        let a = sim.derived().arrivals_per_slot;
        for q in sim.queues() {
            assert!((q - 2000.0 * a).abs() < 1e-9);
        }
        let s = sim.summary();
        assert_eq!(s.aoi_hist.count(), 0);
        assert_eq!(s.mean_power, 0.0);
    }

    struct Collect {
        epochs: Vec<u64>,
        rows: usize,
    }

    impl Observer for Collect {
        fn wants_records(&self) -> bool {
            true
        }
        fn records(&mut self, r: &[SlotRecord]) -> Result<()> {
            self.rows += r.len();
            Ok(())
        }
        fn epoch(&mut self, slot: u64, g: &GroupAssignment, rbs: &RbMap) -> Result<()> {
            assert_eq!(g.labels.len(), rbs.per_pair.len());
            self.epochs.push(slot);
            Ok(())
        }
    }

    #[test]
    fn reclusters_on_period_only() {
        let p = SimParams { slots: 450, ..small() };
        let mut c = Collect {
            epochs: Vec::new(),
            rows: 0,
        };
        run_observed(&p, Policy::Proposed, &mut c).unwrap();
        assert_eq!(c.epochs, vec![0, 100, 200, 300, 400]);
        assert_eq!(c.rows, 450 * 12);
    }

    struct Failing;

    impl Observer for Failing {
        fn wants_positions(&self) -> bool {
            true
        }
        fn positions(&mut self, slot: u64, _: &[PairState]) -> Result<()> {
            if slot == 7 {
                Err(Error::Numerical("observer failure".into()))
            } else {
                Ok(())
            }
        }
    }

    #[test]
    fn abort_carries_partial_summary() {
        match run_observed(&small(), Policy::Proposed, &mut Failing) {
            Err(Error::RunAborted { slot, partial, .. }) => {
                assert_eq!(slot, 7);
                assert_eq!(partial.completed, 7);
            }
            other => panic!("expected abort, got {other:?}"),
        }
    }

    #[test]
    fn sweep_records_failures_and_continues() {
        let p = SimParams { slots: 200, ..small() };
        let pts = sweep(&p, Policy::Proposed, SweepAxis::PairGap, &[10.0, 70.0, 15.0]);
        assert_eq!(pts.len(), 3);
        assert!(pts[0].outcome.is_ok());
        assert!(pts[1].outcome.is_err());
        assert!(pts[2].outcome.is_ok());
    }

    #[test]
    fn single_value_sweep_equals_run() {
        let p = SimParams { slots: 500, ..small() };
        let pts = sweep(&p, Policy::Proposed, SweepAxis::PairGap, &[15.0]);
        assert_eq!(pts[0].outcome.as_ref().unwrap(), &run(&p, Policy::Proposed).unwrap());
    }

    #[test]
    fn parses_axis_and_preset() {
        assert_eq!("lambda".parse::<SweepAxis>().unwrap(), SweepAxis::ArrivalRate);
        assert!("foo".parse::<SweepAxis>().is_err());
        assert_eq!("gaps".parse::<Preset>().unwrap(), Preset::Gaps);
        assert!(SweepAxis::Pairs.apply(&small(), 2.5).is_err());
    }
}
