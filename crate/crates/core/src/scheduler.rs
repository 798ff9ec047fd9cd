//! Scheduling of a single trial.
//!
//! One big step is one time unit, in which every agent takes at least one
//! atomic step. How steps interleave is set by [`Schedule`]. After each big
//! step the simulator (not the agents) checks whether the strand has reached
//! consensus.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{self, Agent, Population, StepEvent, Variant};
use crate::bounds;
use crate::error::{Error, Result};
use crate::strand::{Strand, Value};

const SPAWN_STREAM: u64 = 0;
const ORDER_STREAM: u64 = 1;
const VARIANT_STREAM: u64 = 2;

/// Independent random sub-stream `stream` of a trial seed.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// How atomic steps are interleaved.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// Each atomic step takes an independent uniform duration in `(0, 1]`,
    /// so agents drift relative to each other.
    #[default]
    RandomDurations,
    /// Every agent steps exactly once per big step, in a fresh uniformly
    /// random order. All agents move in lockstep.
    Rounds,
}

impl Schedule {
    pub fn name(self) -> &'static str {
        match self {
            Schedule::RandomDurations => "random-durations",
            Schedule::Rounds => "rounds",
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "random-durations" | "durations" => Ok(Schedule::RandomDurations),
            "rounds" => Ok(Schedule::Rounds),
            other => Err(Error::param(format!("unknown schedule {other:?}"))),
        }
    }
}

/// Fixed-point resolution of step durations: one time unit is `TICKS` ticks.
const TICKS: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub n: usize,
    pub population: Population,
    pub variant: Variant,
    pub seed: u64,
    pub max_big_steps: u64,
    pub record_trajectory: bool,
    #[serde(default)]
    pub schedule: Schedule,
}

impl TrialConfig {
    /// A config with the default step cap of `100 * n^2` and no trajectory.
    pub fn new(n: usize, population: Population, variant: Variant, seed: u64) -> Self {
        TrialConfig {
            n,
            population,
            variant,
            seed,
            max_big_steps: default_max_big_steps(n),
            record_trajectory: false,
            schedule: Schedule::default(),
        }
    }

    pub fn with_schedule(mut self, schedule: Schedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_max_big_steps(mut self, max: u64) -> Self {
        self.max_big_steps = max;
        self
    }

    pub fn with_trajectory(mut self, record: bool) -> Self {
        self.record_trajectory = record;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < Strand::MIN_LEN {
            return Err(Error::InvalidSize(self.n));
        }
        if self.max_big_steps == 0 {
            return Err(Error::param("max_big_steps must be at least 1"));
        }
        self.variant.validate()
    }
}

pub fn default_max_big_steps(n: usize) -> u64 {
    100 * (n as u64) * (n as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "timeout")]
    Timeout,
}

impl Decision {
    pub fn value(self) -> Option<Value> {
        match self {
            Decision::Zero => Some(Value::Zero),
            Decision::One => Some(Value::One),
            Decision::Timeout => None,
        }
    }
}

impl From<Value> for Decision {
    fn from(v: Value) -> Self {
        match v {
            Value::Zero => Decision::Zero,
            Value::One => Decision::One,
        }
    }
}

impl std::fmt::Display for Decision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Decision::Zero => "0",
            Decision::One => "1",
            Decision::Timeout => "timeout",
        })
    }
}

/// Census and collision count after one big step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub zeros: usize,
    pub ones: usize,
    pub empties: usize,
    pub collisions: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub writes: u64,
    pub erases: u64,
    pub non_collision_erases: u64,
    /// Big step during which the first erase happened.
    pub first_erase_step: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    pub decision: Decision,
    pub big_steps: u64,
    pub trajectory: Option<Vec<StepRecord>>,
    pub events: EventCounts,
}

/// When a trial is considered finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    /// First time every cell holds the same value.
    AnyConsensus,
    /// First time every cell holds this value.
    ConsensusOn(Value),
}

impl StopRule {
    fn reached(self, strand: &Strand) -> Option<Value> {
        match (self, strand.consensus_value()) {
            (StopRule::AnyConsensus, found) => found,
            (StopRule::ConsensusOn(target), Some(found)) if found == target => Some(found),
            _ => None,
        }
    }
}

/// A trial in progress.
#[derive(Debug, Clone)]
pub struct Simulation {
    strand: Strand,
    agents: Vec<Agent>,
    variant: Variant,
    schedule: Schedule,
    /// Agents in the order they acted during the most recent big step.
    order: Vec<usize>,
    /// Pending step completion times in ticks (random-durations schedule).
    clock: BinaryHeap<Reverse<(u64, usize)>>,
    order_rng: ChaCha8Rng,
    variant_rng: ChaCha8Rng,
    big_steps: u64,
    events: EventCounts,
}

impl Simulation {
    /// Fresh all-empty strand with agents spawned from the config seed.
    pub fn new(config: &TrialConfig) -> Result<Self> {
        Self::with_strand(config, Strand::new(config.n)?)
    }

    /// Like [`Simulation::new`] but starting from an arbitrary strand.
    pub fn with_strand(config: &TrialConfig, strand: Strand) -> Result<Self> {
        config.validate()?;
        if strand.len() != config.n {
            return Err(Error::param(format!(
                "initial strand has {} cells, config says {}",
                strand.len(),
                config.n
            )));
        }
        let mut spawn_rng = substream(config.seed, SPAWN_STREAM);
        let agents = agents::spawn_agents(&config.population, config.n, &mut spawn_rng)?;
        Ok(Self::from_parts(strand, agents, config.variant, config.schedule, config.seed))
    }

    /// Explicit placement of every agent.
    pub fn from_parts(strand: Strand, agents: Vec<Agent>, variant: Variant, schedule: Schedule, seed: u64) -> Self {
        let mut order_rng = substream(seed, ORDER_STREAM);
        let (order, clock) = match schedule {
            Schedule::Rounds => ((0..agents.len()).collect(), BinaryHeap::new()),
            Schedule::RandomDurations => {
                let clock = (0..agents.len())
                    .map(|i| Reverse((order_rng.random_range(1..=TICKS), i)))
                    .collect();
                (Vec::with_capacity(2 * agents.len()), clock)
            }
        };
        Simulation {
            strand,
            agents,
            variant,
            schedule,
            order,
            clock,
            order_rng,
            variant_rng: substream(seed, VARIANT_STREAM),
            big_steps: 0,
            events: EventCounts::default(),
        }
    }

    pub fn strand(&self) -> &Strand {
        &self.strand
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule
    }

    pub fn big_steps(&self) -> u64 {
        self.big_steps
    }

    pub fn events(&self) -> EventCounts {
        self.events
    }

    /// The current census as a record labelled with the current step.
    pub fn snapshot(&self) -> StepRecord {
        let census = self.strand.census();
        StepRecord {
            step: self.big_steps,
            zeros: census.zeros,
            ones: census.ones,
            empties: census.empties,
            collisions: self.strand.count_collisions(),
        }
    }

    /// Agents in the order they acted during the most recent big step. Under
    /// [`Schedule::Rounds`] this is a permutation of all agents.
    pub fn last_order(&self) -> &[usize] {
        &self.order
    }

    /// Runs one big step and returns the resulting census.
    pub fn big_step(&mut self) -> StepRecord {
        self.run_round();
        self.snapshot()
    }

    fn run_round(&mut self) {
        self.big_steps += 1;
        match self.schedule {
            Schedule::Rounds => {
                self.order.shuffle(&mut self.order_rng);
                for k in 0..self.order.len() {
                    self.act(self.order[k]);
                }
            }
            Schedule::RandomDurations => {
                // Every step that completes within (t - 1, t].
                self.order.clear();
                let end = self.big_steps.saturating_mul(TICKS);
                while let Some(&Reverse((at, i))) = self.clock.peek() {
                    if at > end {
                        break;
                    }
                    self.clock.pop();
                    self.clock.push(Reverse((at + self.order_rng.random_range(1..=TICKS), i)));
                    self.order.push(i);
                    self.act(i);
                }
            }
        }
    }

    fn act(&mut self, i: usize) {
        let event = agents::step(&mut self.agents[i], &mut self.strand, &self.variant, &mut self.variant_rng);
        match event {
            StepEvent::Idle => {}
            StepEvent::Wrote => self.events.writes += 1,
            StepEvent::Erased { at_collision } => {
                self.events.erases += 1;
                if !at_collision {
                    self.events.non_collision_erases += 1;
                }
                self.events.first_erase_step.get_or_insert(self.big_steps);
            }
        }
    }

    /// Runs big steps until `stop` is met or `max_big_steps` have elapsed.
    pub fn run(&mut self, max_big_steps: u64, stop: StopRule, record: bool) -> (Decision, Option<Vec<StepRecord>>) {
        let mut trajectory = record.then(Vec::new);
        if let Some(v) = stop.reached(&self.strand) {
            return (v.into(), trajectory);
        }
        while self.big_steps < max_big_steps {
            self.run_round();
            if let Some(traj) = trajectory.as_mut() {
                traj.push(self.snapshot());
            }
            if let Some(v) = stop.reached(&self.strand) {
                return (v.into(), trajectory);
            }
        }
        (Decision::Timeout, trajectory)
    }
}

/// Runs one trial from the all-empty strand until any consensus.
pub fn run_trial(config: &TrialConfig) -> Result<TrialResult> {
    let strand = Strand::new(config.n)?;
    run_trial_from(config, strand, StopRule::AnyConsensus)
}

/// Runs one trial from an arbitrary initial strand.
pub fn run_trial_from(config: &TrialConfig, initial: Strand, stop: StopRule) -> Result<TrialResult> {
    let mut sim = Simulation::with_strand(config, initial)?;
    let (decision, trajectory) = sim.run(config.max_big_steps, stop, config.record_trajectory);
    Ok(TrialResult {
        seed: config.seed,
        decision,
        big_steps: sim.big_steps(),
        trajectory,
        events: sim.events(),
    })
}

/// Requirement flags for one decided trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequirementReport {
    pub decision: Value,
    /// The decided value has at least one writer.
    pub validity: bool,
    /// The decided value is the strict writer majority (`None` on a tie).
    pub majority_value: Option<bool>,
}

/// Checks a single decided trial; `None` for a timeout.
pub fn check_requirements(result: &TrialResult, pop: &Population) -> Option<RequirementReport> {
    let decision = result.decision.value()?;
    Some(RequirementReport {
        decision,
        validity: pop.writers(decision) > 0,
        majority_value: pop.majority().map(|m| m == decision),
    })
}

/// Frequency of the majority decision when the writer ratio is strong
/// enough for the majority guarantee to apply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MajorityCheck {
    pub majority: Value,
    pub ratio: f64,
    pub trials: usize,
    pub frequency: f64,
    /// Standard error of `frequency`.
    pub std_error: f64,
    /// Lower bound on the probability of the majority decision.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRequirements {
    pub trials: usize,
    pub decided: usize,
    pub validity_violations: usize,
    pub majority: Option<MajorityCheck>,
}

/// Strong majority threshold `W_v / W_{1-v}`.
pub const STRONG_MAJORITY_RATIO: f64 = 3.0;

pub fn check_batch(results: &[TrialResult], pop: &Population, n: usize) -> BatchRequirements {
    let reports: Vec<_> = results.iter().filter_map(|r| check_requirements(r, pop)).collect();
    let validity_violations = reports.iter().filter(|r| !r.validity).count();
    let majority = pop.majority().and_then(|m| {
        let (big, small) = (pop.writers(m), pop.writers(m.complement()));
        if small == 0 || f64::from(big) / f64::from(small) < STRONG_MAJORITY_RATIO || results.is_empty() {
            return None;
        }
        let hits = results.iter().filter(|r| r.decision.value() == Some(m)).count();
        let trials = results.len();
        let frequency = hits as f64 / trials as f64;
        let bound = bounds::majority_prob_lower_bound(small, big, n).ok()?;
        Some(MajorityCheck {
            majority: m,
            ratio: f64::from(big) / f64::from(small),
            trials,
            frequency,
            std_error: (frequency * (1.0 - frequency) / trials as f64).sqrt(),
            bound: bound.best_stated(),
        })
    });
    BatchRequirements {
        trials: results.len(),
        decided: reports.len(),
        validity_violations,
        majority,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{AgentKind, Direction};
    use crate::strand::CellState;

    fn pop(w0: u32, w1: u32) -> Population {
        Population::new(w0, w1).unwrap()
    }

    #[test]
    fn validity_with_single_writer_type() {
        for seed in 0..50 {
            let cfg = TrialConfig::new(10, pop(0, 3), Variant::Basic, seed);
            let r = run_trial(&cfg).unwrap();
            assert_eq!(r.decision, Decision::One);
            assert!(r.big_steps <= cfg.max_big_steps);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = TrialConfig::new(60, pop(4, 6), Variant::Basic, 17).with_trajectory(true);
        assert_eq!(run_trial(&cfg).unwrap(), run_trial(&cfg).unwrap());
        let other = run_trial(&cfg.clone().with_seed(18)).unwrap();
        assert_ne!(run_trial(&cfg).unwrap().trajectory, other.trajectory);
    }

    #[test]
    fn lone_writer_fills_in_lockstep() {
        let run = |pos, dir, steps| {
            let agents = vec![Agent::new(AgentKind::Writer(Value::One), pos, dir)];
            let mut sim = Simulation::from_parts(Strand::new(3).unwrap(), agents, Variant::Basic, Schedule::Rounds, 0);
            (0..steps)
                .map(|_| {
                    sim.big_step();
                    sim.strand().to_string()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(0, Direction::Plus, 3), ["1VV", "11V", "111"]);
        // Turning around at an end costs one step.
        assert_eq!(run(0, Direction::Minus, 4), ["1VV", "1VV", "11V", "111"]);
        assert_eq!(run(1, Direction::Plus, 5), ["V1V", "V11", "V11", "V11", "111"]);
    }

    #[test]
    fn every_agent_acts_in_every_time_unit() {
        let cfg = TrialConfig::new(30, pop(3, 4), Variant::Basic, 21);
        let mut a = Simulation::new(&cfg).unwrap();
        let mut b = Simulation::new(&cfg).unwrap();
        let mut total = 0;
        for _ in 0..200 {
            a.big_step();
            b.big_step();
            assert_eq!(a.last_order(), b.last_order());
            let mut seen = a.last_order().to_vec();
            total += seen.len();
            seen.sort_unstable();
            seen.dedup();
            assert_eq!(seen, (0..14).collect::<Vec<_>>());
        }
        // Uniform durations on (0, 1] average two steps per unit.
        let mean = total as f64 / (200.0 * 14.0);
        assert!((mean - 2.0).abs() < 0.1, "{mean}");
    }

    #[test]
    fn consensus_is_absorbing() {
        let cfg = TrialConfig::new(12, pop(2, 3), Variant::Basic, 3);
        let mut sim = Simulation::with_strand(&cfg, Strand::uniform(12, Value::One).unwrap()).unwrap();
        let before = sim.snapshot();
        for _ in 0..200 {
            let rec = sim.big_step();
            assert_eq!((rec.zeros, rec.ones, rec.empties, rec.collisions), (before.zeros, before.ones, before.empties, 0));
        }
    }

    #[test]
    fn permutation_is_reproducible_and_complete() {
        let cfg = TrialConfig::new(20, pop(3, 4), Variant::Basic, 77).with_schedule(Schedule::Rounds);
        let mut a = Simulation::new(&cfg).unwrap();
        let mut b = Simulation::new(&cfg).unwrap();
        let mut orders = Vec::new();
        for _ in 0..5 {
            a.big_step();
            b.big_step();
            assert_eq!(a.last_order(), b.last_order());
            let mut sorted = a.last_order().to_vec();
            sorted.sort_unstable();
            assert_eq!(sorted, (0..14).collect::<Vec<_>>());
            orders.push(a.last_order().to_vec());
        }
        assert!(orders.windows(2).any(|w| w[0] != w[1]));
    }

    #[test]
    fn variant_randomness_does_not_perturb_spawn() {
        let basic = TrialConfig::new(30, pop(3, 4), Variant::Basic, 5);
        let stab = TrialConfig { variant: Variant::SelfStabilizing { epsilon: 0.3 }, ..basic.clone() };
        assert_eq!(Simulation::new(&basic).unwrap().agents(), Simulation::new(&stab).unwrap().agents());
    }

    #[test]
    fn trajectory_is_consistent() {
        let cfg = TrialConfig::new(40, pop(3, 5), Variant::Basic, 9).with_trajectory(true);
        let mut sim = Simulation::new(&cfg).unwrap();
        for step in 1..=300 {
            let rec = sim.big_step();
            assert_eq!(rec.step, step);
            assert_eq!(rec.zeros + rec.ones + rec.empties, 40);
            assert_eq!(rec.collisions, sim.strand().count_collisions());
            if sim.strand().consensus_value().is_some() {
                break;
            }
        }
        let r = run_trial(&cfg).unwrap();
        assert_eq!(r.trajectory.as_ref().unwrap().len() as u64, r.big_steps);
        let last = r.trajectory.as_ref().unwrap().last().copied().unwrap();
        assert_eq!(last.collisions, 0);
        assert_eq!(last.zeros * last.ones, 0);
    }

    #[test]
    fn empties_never_grow_before_first_erase() {
        for seed in 0..20 {
            let cfg = TrialConfig::new(50, pop(4, 6), Variant::Basic, seed);
            let mut sim = Simulation::new(&cfg).unwrap();
            let mut empties = sim.snapshot().empties;
            while sim.events().first_erase_step.is_none() && sim.big_steps() < 10_000 {
                let rec = sim.big_step();
                if sim.events().first_erase_step.is_none() {
                    assert!(rec.empties <= empties);
                }
                empties = rec.empties;
            }
        }
    }

    #[test]
    fn decision_is_stable_after_consensus() {
        for seed in 0..5 {
            let cfg = TrialConfig::new(40, pop(3, 6), Variant::Basic, seed);
            let mut sim = Simulation::new(&cfg).unwrap();
            let (decision, _) = sim.run(cfg.max_big_steps, StopRule::AnyConsensus, false);
            assert_ne!(decision, Decision::Timeout);
            let frozen = sim.strand().clone();
            for _ in 0..1000 {
                sim.big_step();
                assert_eq!(sim.strand(), &frozen);
            }
        }
    }

    #[test]
    fn timeout_reports_cap() {
        let cfg = TrialConfig::new(200, pop(40, 50), Variant::Basic, 1).with_max_big_steps(3);
        let r = run_trial(&cfg).unwrap();
        assert_eq!(r.decision, Decision::Timeout);
        assert_eq!(r.big_steps, 3);
        assert!(check_requirements(&r, &cfg.population).is_none());
    }

    #[test]
    fn stop_rule_targets_a_value() {
        let cfg = TrialConfig::new(10, pop(1, 3), Variant::Basic, 1);
        let start = Strand::uniform(10, Value::Zero).unwrap();
        let any = run_trial_from(&cfg, start.clone(), StopRule::AnyConsensus).unwrap();
        assert_eq!((any.decision, any.big_steps), (Decision::Zero, 0));
        let cfg = cfg.with_max_big_steps(100);
        let target = run_trial_from(&cfg, start, StopRule::ConsensusOn(Value::One)).unwrap();
        // Basic cannot leave a uniform strand.
        assert_eq!(target.decision, Decision::Timeout);
        assert_eq!(target.events.erases, 0);
    }

    #[test]
    fn requirement_flags() {
        let mk = |decision| TrialResult { seed: 0, decision, big_steps: 1, trajectory: None, events: EventCounts::default() };
        let r = check_requirements(&mk(Decision::Zero), &pop(0, 5)).unwrap();
        assert!(!r.validity);
        let r = check_requirements(&mk(Decision::One), &pop(0, 5)).unwrap();
        assert!(r.validity);
        assert_eq!(r.majority_value, Some(true));

        let results: Vec<_> = (0..4).map(|i| mk(if i == 0 { Decision::Zero } else { Decision::One })).collect();
        let batch = check_batch(&results, &pop(10, 30), 12);
        let m = batch.majority.unwrap();
        assert_eq!(m.majority, Value::One);
        assert!((m.frequency - 0.75).abs() < 1e-12);
        assert!((m.bound - (1.0 - (1.0f64 / 3.0).powi(12)) * (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        assert!(check_batch(&results, &pop(10, 20), 12).majority.is_none());
    }

    #[test]
    fn invalid_configs() {
        assert!(run_trial(&TrialConfig::new(1, pop(1, 1), Variant::Basic, 0)).is_err());
        assert!(run_trial(&TrialConfig::new(5, pop(1, 1), Variant::Basic, 0).with_max_big_steps(0)).is_err());
        let cfg = TrialConfig::new(5, pop(1, 1), Variant::Basic, 0);
        let bad = Strand::from_cells(vec![CellState::Empty; 6]).unwrap();
        assert!(run_trial_from(&cfg, bad, StopRule::AnyConsensus).is_err());
    }
}
