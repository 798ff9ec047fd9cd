//! Batch experiments: seeded Monte-Carlo runs, aggregation, and the CSV and
//! JSON artifacts consumed by plotting scripts.
//!
//! Trial `k` of an experiment always uses seed `seed_base + k`, so every
//! artifact is reproducible byte for byte. Trials may run on a worker pool;
//! results are gathered in seed order before aggregation.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{Population, Variant};
use crate::bounds;
use crate::error::{Error, Result};
use crate::oracle;
use crate::scheduler::{
    self, check_batch, run_trial, run_trial_from, BatchRequirements, Decision, Schedule, Simulation, StepRecord,
    StopRule, TrialConfig, TrialResult,
};
use crate::strand::{Strand, Value};

/// Bins used for step-count histograms.
pub const HISTOGRAM_BINS: usize = 30;

/// One trial configuration, minus the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTemplate {
    pub label: String,
    pub n: usize,
    pub population: Population,
    pub variant: Variant,
    pub max_big_steps: u64,
    pub record_trajectory: bool,
    #[serde(default)]
    pub schedule: Schedule,
}

impl TrialTemplate {
    pub fn new(label: impl Into<String>, n: usize, population: Population, variant: Variant) -> Self {
        TrialTemplate {
            label: label.into(),
            n,
            population,
            variant,
            max_big_steps: scheduler::default_max_big_steps(n),
            record_trajectory: false,
            schedule: Schedule::default(),
        }
    }

    pub fn with_variant(&self, variant: Variant) -> Self {
        TrialTemplate {
            label: variant.name().to_string(),
            variant,
            ..self.clone()
        }
    }

    pub fn with_trajectory(mut self, record: bool) -> Self {
        self.record_trajectory = record;
        self
    }

    pub fn with_max_big_steps(mut self, max: u64) -> Self {
        self.max_big_steps = max;
        self
    }

    pub fn with_schedule(mut self, schedule: Schedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn config(&self, seed: u64) -> TrialConfig {
        TrialConfig {
            n: self.n,
            population: self.population,
            variant: self.variant,
            seed,
            max_big_steps: self.max_big_steps,
            record_trajectory: self.record_trajectory,
            schedule: self.schedule,
        }
    }
}

/// Reference presets on a 1000-cell strand.
pub mod presets {
    use super::*;

    pub const N: usize = 1000;
    pub const TRIALS: u32 = 300;
    /// Independent seed ranges per preset.
    pub const HIGH_SEED_BASE: u64 = 1_000_000;
    pub const LOW_SEED_BASE: u64 = 2_000_000;

    /// `w1 = 50`, `w0 = 40` (p = 0.56).
    pub fn high_competition(variant: Variant) -> TrialTemplate {
        TrialTemplate::new("high", N, Population::new(40, 50).expect("non-empty"), variant)
    }

    /// `w1 = 50`, `w0 = 32` (p = 0.60).
    pub fn low_competition(variant: Variant) -> TrialTemplate {
        TrialTemplate::new("low", N, Population::new(32, 50).expect("non-empty"), variant)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Artifact {
    Trials,
    Histogram,
    Trajectory,
    Comparison,
    BoundsTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub templates: Vec<TrialTemplate>,
    pub trials: u32,
    pub seed_base: u64,
    pub outputs: Vec<Artifact>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.templates.is_empty() {
            return Err(Error::Config(format!("experiment {:?} has no configurations", self.name)));
        }
        for t in &self.templates {
            t.config(self.seed_base)
                .validate()
                .map_err(|e| Error::Config(format!("configuration {:?}: {e}", t.label)))?;
        }
        if self.outputs.contains(&Artifact::Comparison) {
            comparison_pair(&self.templates)?;
        }
        Ok(())
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..u64::from(self.trials)).map(|k| self.seed_base + k)
    }
}

/// Runs every seed of `template`, in parallel, returning results in seed order.
pub fn run_batch(template: &TrialTemplate, seeds: &[u64]) -> Result<Vec<TrialResult>> {
    seeds.par_iter().map(|&seed| run_trial(&template.config(seed))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub stddev: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let count = values.len();
        let mean = values.iter().sum::<f64>() / count as f64;
        let var = if count > 1 {
            values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if count % 2 == 1 {
            sorted[count / 2]
        } else {
            (sorted[count / 2 - 1] + sorted[count / 2]) / 2.0
        };
        Some(Summary {
            count,
            mean,
            median,
            stddev: var.sqrt(),
            min: sorted[0],
            max: sorted[count - 1],
        })
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        self.stddev / (self.count as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Equal-width bins spanning the observed range.
    pub fn equal_width(values: &[f64], bins: usize) -> Histogram {
        let bins = bins.max(1);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if values.is_empty() {
            return Histogram { lo: 0.0, width: 1.0, counts: vec![0; bins] };
        }
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let mut counts = vec![0u64; bins];
        for &x in values {
            let idx = (((x - lo) / width).floor() as usize).min(bins - 1);
            counts[idx] += 1;
        }
        Histogram { lo, width, counts }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionFrequencies {
    pub zero: f64,
    pub one: f64,
    pub timeout: f64,
}

impl DecisionFrequencies {
    pub fn of(results: &[TrialResult]) -> Self {
        let t = results.len().max(1) as f64;
        let count = |d: Decision| results.iter().filter(|r| r.decision == d).count() as f64 / t;
        DecisionFrequencies {
            zero: count(Decision::Zero),
            one: count(Decision::One),
            timeout: count(Decision::Timeout),
        }
    }
}

/// Closed-form and oracle figures for one `(n, w0, w1)`. Entries that need
/// `w1 > w0` (or `w1 > w0 > 0`) are absent otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    pub n: usize,
    pub w0: u32,
    pub w1: u32,
    pub p: f64,
    pub update_win: f64,
    pub update_lose: f64,
    pub update_tie: f64,
    pub majority_bound: Option<f64>,
    pub strong_ratio_bound: Option<f64>,
    pub runtime_bound: Option<f64>,
    pub exact_decision_prob: Option<f64>,
}

impl BoundsRow {
    pub fn compute(n: usize, w0: u32, w1: u32) -> Result<Self> {
        let pop = Population::new(w0, w1)?;
        let chain = bounds::update_step_probs(w0, w1)?;
        let majority = bounds::majority_prob_lower_bound(w0, w1, n).ok();
        Ok(BoundsRow {
            n,
            w0,
            w1,
            p: pop.p_label(),
            update_win: chain.win,
            update_lose: chain.lose,
            update_tie: chain.tie,
            majority_bound: majority.map(|m| m.general),
            strong_ratio_bound: majority.and_then(|m| m.strong_ratio),
            runtime_bound: bounds::expected_steps_upper_bound(w0, w1, n).ok(),
            exact_decision_prob: oracle::exact_decision_prob(w0, w1, n).ok(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub seed: u64,
    pub decision: Decision,
    pub big_steps: u64,
}

impl From<&TrialResult> for TrialRow {
    fn from(r: &TrialResult) -> Self {
        TrialRow {
            seed: r.seed,
            decision: r.decision,
            big_steps: r.big_steps,
        }
    }
}

/// Per-step means across trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragedStep {
    pub step: u64,
    pub zeros: f64,
    pub ones: f64,
    pub empties: f64,
    pub collisions: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigReport {
    pub label: String,
    pub n: usize,
    pub w0: u32,
    pub w1: u32,
    pub variant: String,
    pub schedule: Schedule,
    pub p: f64,
    pub trials: usize,
    /// Over all trials; a timeout counts as the step cap.
    pub steps: Summary,
    pub decisions: DecisionFrequencies,
    pub timeouts: usize,
    pub histogram: Histogram,
    pub bounds: BoundsRow,
    pub requirements: BatchRequirements,
    pub rows: Vec<TrialRow>,
    pub trajectory: Option<Vec<AveragedStep>>,
}

impl ConfigReport {
    pub fn from_results(template: &TrialTemplate, results: &[TrialResult]) -> Result<Self> {
        let steps: Vec<f64> = results.iter().map(|r| r.big_steps as f64).collect();
        let pop = template.population;
        let trajectory = template
            .record_trajectory
            .then(|| average_trajectories(results))
            .flatten();
        Ok(ConfigReport {
            label: template.label.clone(),
            n: template.n,
            w0: pop.w0(),
            w1: pop.w1(),
            variant: template.variant.to_string(),
            schedule: template.schedule,
            p: pop.p_label(),
            trials: results.len(),
            steps: Summary::of(&steps).ok_or_else(|| Error::Config("no trials were run".into()))?,
            decisions: DecisionFrequencies::of(results),
            timeouts: results.iter().filter(|r| r.decision == Decision::Timeout).count(),
            histogram: Histogram::equal_width(&steps, HISTOGRAM_BINS),
            bounds: BoundsRow::compute(template.n, pop.w0(), pop.w1())?,
            requirements: check_batch(results, &pop, template.n),
            rows: results.iter().map(TrialRow::from).collect(),
            trajectory,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub seed_base: u64,
    pub trials: u32,
    pub configs: Vec<ConfigReport>,
    pub comparison: Option<Comparison>,
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let seeds: Vec<u64> = spec.seeds().collect();
    let mut configs = Vec::with_capacity(spec.templates.len());
    let mut step_sets = Vec::with_capacity(spec.templates.len());
    for template in &spec.templates {
        let results = run_batch(template, &seeds)?;
        step_sets.push(results.iter().map(|r| r.big_steps).collect::<Vec<_>>());
        configs.push(ConfigReport::from_results(template, &results)?);
    }
    let comparison = if spec.outputs.contains(&Artifact::Comparison) {
        let (a, b) = comparison_pair(&spec.templates)?;
        Some(Comparison::from_steps(&seeds, &step_sets[a], &step_sets[b]))
    } else {
        None
    };
    Ok(ExperimentReport {
        name: spec.name.clone(),
        seed_base: spec.seed_base,
        trials: spec.trials,
        configs,
        comparison,
    })
}

/// Pads every trajectory with its final record up to the longest one and
/// averages step by step.
pub fn average_trajectories(results: &[TrialResult]) -> Option<Vec<AveragedStep>> {
    let trajectories: Vec<&Vec<StepRecord>> = results.iter().filter_map(|r| r.trajectory.as_ref()).collect();
    if trajectories.is_empty() {
        return None;
    }
    let longest = trajectories.iter().map(|t| t.len()).max().unwrap_or(0);
    let k = trajectories.len() as f64;
    let mut out = Vec::with_capacity(longest);
    for s in 0..longest {
        let (mut z, mut o, mut e, mut c) = (0.0, 0.0, 0.0, 0.0);
        for t in &trajectories {
            // An empty trajectory means the trial started at its stop state.
            let Some(rec) = t.get(s).or(t.last()) else { continue };
            z += rec.zeros as f64;
            o += rec.ones as f64;
            e += rec.empties as f64;
            c += rec.collisions as f64;
        }
        out.push(AveragedStep {
            step: s as u64 + 1,
            zeros: z / k,
            ones: o / k,
            empties: e / k,
            collisions: c / k,
        });
    }
    Some(out)
}

// ---------------------------------------------------------------------------
// Variant comparison

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairedRow {
    pub seed: u64,
    pub basic_steps: u64,
    pub waiting_steps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    /// Pairs where the second variant needed fewer steps.
    pub second_faster: u64,
    pub first_faster: u64,
    pub ties: u64,
    /// Exact two-sided binomial p-value, ties dropped.
    pub p_value: f64,
}

impl SignTest {
    pub fn new(second_faster: u64, first_faster: u64, ties: u64) -> Self {
        let n = (second_faster + first_faster) as usize;
        let k = second_faster.min(first_faster) as usize;
        let p_value = if n == 0 {
            1.0
        } else {
            let pmf = oracle::binomial_pmf(n, 0.5);
            (2.0 * pmf[..=k].iter().sum::<f64>()).min(1.0)
        };
        SignTest {
            second_faster,
            first_faster,
            ties,
            p_value,
        }
    }
}

/// Paired per-seed step counts of two variants on the same configuration.
/// Column names follow the basic-versus-waiting use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<PairedRow>,
    pub mean_basic: f64,
    pub mean_waiting: f64,
    /// `mean(basic - waiting)`.
    pub mean_difference: f64,
    pub sign_test: SignTest,
}

impl Comparison {
    pub fn from_steps(seeds: &[u64], first: &[u64], second: &[u64]) -> Self {
        let rows: Vec<PairedRow> = seeds
            .iter()
            .zip(first.iter().zip(second))
            .map(|(&seed, (&a, &b))| PairedRow {
                seed,
                basic_steps: a,
                waiting_steps: b,
            })
            .collect();
        let t = rows.len().max(1) as f64;
        let mean_basic = rows.iter().map(|r| r.basic_steps as f64).sum::<f64>() / t;
        let mean_waiting = rows.iter().map(|r| r.waiting_steps as f64).sum::<f64>() / t;
        let second_faster = rows.iter().filter(|r| r.waiting_steps < r.basic_steps).count() as u64;
        let first_faster = rows.iter().filter(|r| r.waiting_steps > r.basic_steps).count() as u64;
        let ties = rows.len() as u64 - second_faster - first_faster;
        Comparison {
            rows,
            mean_basic,
            mean_waiting,
            mean_difference: mean_basic - mean_waiting,
            sign_test: SignTest::new(second_faster, first_faster, ties),
        }
    }
}

fn comparison_pair(templates: &[TrialTemplate]) -> Result<(usize, usize)> {
    if templates.len() != 2 {
        return Err(Error::Config("a comparison needs exactly two configurations".into()));
    }
    check_comparable(&templates[0], &templates[1])?;
    Ok((0, 1))
}

fn check_comparable(a: &TrialTemplate, b: &TrialTemplate) -> Result<()> {
    if a.n != b.n || a.population != b.population || a.max_big_steps != b.max_big_steps || a.schedule != b.schedule {
        return Err(Error::Config(format!(
            "cannot compare {:?} and {:?}: strand length, population, schedule and step cap must match",
            a.label, b.label
        )));
    }
    Ok(())
}

/// Runs `first` and `second` on the same seeds and pairs the step counts.
pub fn compare_variants(first: &TrialTemplate, second: &TrialTemplate, trials: u32, seed_base: u64) -> Result<Comparison> {
    check_comparable(first, second)?;
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let seeds: Vec<u64> = (0..u64::from(trials)).map(|k| seed_base + k).collect();
    let steps = |t: &TrialTemplate| -> Result<Vec<u64>> {
        Ok(run_batch(t, &seeds)?.iter().map(|r| r.big_steps).collect())
    };
    Ok(Comparison::from_steps(&seeds, &steps(first)?, &steps(second)?))
}

// ---------------------------------------------------------------------------
// Trajectories

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub trials: usize,
    pub n: usize,
    pub points: Vec<AveragedStep>,
}

/// Pearson correlation; `None` when either side has no spread.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let (mx, my) = (xs[..n].iter().sum::<f64>() / n as f64, ys[..n].iter().sum::<f64>() / n as f64);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

impl TrajectoryReport {
    /// Step at which mean collisions peak; the strand is still being filled
    /// up to this point.
    pub fn collision_peak_step(&self) -> Option<u64> {
        self.points
            .iter()
            .max_by(|a, b| a.collisions.total_cmp(&b.collisions).then(b.step.cmp(&a.step)))
            .map(|p| p.step)
    }

    /// Correlation of mean collisions against mean zeros over steps
    /// `1..=end_step`.
    pub fn correlation_until(&self, end_step: u64) -> Option<f64> {
        let (zs, cs): (Vec<f64>, Vec<f64>) = self
            .points
            .iter()
            .take_while(|p| p.step <= end_step)
            .map(|p| (p.zeros, p.collisions))
            .unzip();
        pearson(&zs, &cs)
    }

    /// Collisions-versus-zeros correlation over the early phase, from the
    /// first step up to the collision peak.
    pub fn early_phase_correlation(&self) -> Option<f64> {
        self.correlation_until(self.collision_peak_step()?)
    }

    /// First step after `after` with `collisions < ratio * zeros` while
    /// `zeros > min_zero_fraction * n`.
    pub fn sparse_collision_step(&self, after: u64, ratio: f64, min_zero_fraction: f64) -> Option<u64> {
        let floor = min_zero_fraction * self.n as f64;
        self.points
            .iter()
            .filter(|p| p.step > after)
            .find(|p| p.zeros > floor && p.collisions < ratio * p.zeros)
            .map(|p| p.step)
    }

    /// [`TrajectoryReport::sparse_collision_step`] restricted to the late
    /// phase, after the collision peak. Early steps are excluded because a
    /// mostly empty strand has few collisions for the trivial reason that few
    /// cells are adjacent.
    pub fn late_sparse_collision_step(&self, ratio: f64, min_zero_fraction: f64) -> Option<u64> {
        self.sparse_collision_step(self.collision_peak_step()?, ratio, min_zero_fraction)
    }
}

pub fn trajectory_experiment(template: &TrialTemplate, trials: u32, seed_base: u64) -> Result<TrajectoryReport> {
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let template = template.clone().with_trajectory(true);
    let seeds: Vec<u64> = (0..u64::from(trials)).map(|k| seed_base + k).collect();
    let results = run_batch(&template, &seeds)?;
    Ok(TrajectoryReport {
        trials: results.len(),
        n: template.n,
        points: average_trajectories(&results).unwrap_or_default(),
    })
}

// ---------------------------------------------------------------------------
// Arbitrary starting configurations

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilizationReport {
    pub target: Value,
    pub trials: usize,
    pub reached: usize,
    pub fraction: f64,
    /// Big steps to reach the target, per trial (`None` on timeout).
    pub steps: Vec<Option<u64>>,
}

/// Runs from `initial` until every cell holds the majority writers' value.
pub fn self_stabilization_experiment(
    template: &TrialTemplate,
    initial: &Strand,
    trials: u32,
    seed_base: u64,
) -> Result<StabilizationReport> {
    let target = template
        .population
        .majority()
        .ok_or_else(|| Error::Config("stabilization needs a strict writer majority".into()))?;
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let steps: Vec<Option<u64>> = (0..u64::from(trials))
        .into_par_iter()
        .map(|k| {
            let r = run_trial_from(&template.config(seed_base + k), initial.clone(), StopRule::ConsensusOn(target))?;
            Ok((r.decision != Decision::Timeout).then_some(r.big_steps))
        })
        .collect::<Result<_>>()?;
    let reached = steps.iter().filter(|s| s.is_some()).count();
    Ok(StabilizationReport {
        target,
        trials: steps.len(),
        reached,
        fraction: reached as f64 / steps.len() as f64,
        steps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldReport {
    pub target: Value,
    pub big_steps: u64,
    /// Fraction of big steps that ended with every cell at `target`.
    pub at_target: f64,
    pub final_state: String,
    pub strand_changed: bool,
}

/// Runs a fixed number of big steps from `initial` and reports how much of
/// the time the strand sat at the majority consensus.
pub fn hold_experiment(template: &TrialTemplate, initial: &Strand, big_steps: u64, seed: u64) -> Result<HoldReport> {
    let target = template
        .population
        .majority()
        .ok_or_else(|| Error::Config("hold check needs a strict writer majority".into()))?;
    let mut sim = Simulation::with_strand(&template.config(seed), initial.clone())?;
    let mut hits = 0u64;
    let mut changed = false;
    for _ in 0..big_steps {
        sim.big_step();
        changed |= sim.strand() != initial;
        if sim.strand().consensus_value() == Some(target) {
            hits += 1;
        }
    }
    Ok(HoldReport {
        target,
        big_steps,
        at_target: hits as f64 / big_steps.max(1) as f64,
        final_state: sim.strand().to_string(),
        strand_changed: changed,
    })
}

// ---------------------------------------------------------------------------
// Files

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Serializes `rows` as CSV (with header) into a byte buffer.
pub fn csv_bytes<T: Serialize>(rows: &[T]) -> std::result::Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| csv::Error::from(e.into_error()))
}

/// Writes `rows` as CSV to `path`. An empty slice still writes the header
/// when `T` has named fields and `header` is given.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let bytes = if rows.is_empty() {
        format!("{}\n", header.join(",")).into_bytes()
    } else {
        csv_bytes(rows).map_err(csv_err(path))?
    };
    write_bytes(path, &bytes)
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(bytes).map_err(io_err(path))
}

pub const TRIALS_HEADER: [&str; 3] = ["seed", "decision", "big_steps"];
pub const TRAJECTORY_HEADER: [&str; 5] = ["step", "zeros", "ones", "empties", "collisions"];
pub const COMPARISON_HEADER: [&str; 3] = ["seed", "basic_steps", "waiting_steps"];

#[derive(Serialize)]
struct HistogramRow {
    bin: usize,
    lo: f64,
    hi: f64,
    count: u64,
}

fn histogram_rows(h: &Histogram) -> Vec<HistogramRow> {
    h.counts
        .iter()
        .enumerate()
        .map(|(bin, &count)| HistogramRow {
            bin,
            lo: h.lo + bin as f64 * h.width,
            hi: h.lo + (bin + 1) as f64 * h.width,
            count,
        })
        .collect()
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Writes the requested artifacts into `dir` and returns the paths written.
pub fn write_artifacts(report: &ExperimentReport, outputs: &[Artifact], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let base = file_stem(&report.name);
    for cfg in &report.configs {
        let stem = format!("{base}_{}", file_stem(&cfg.label));
        if outputs.contains(&Artifact::Trials) {
            let p = dir.join(format!("{stem}_trials.csv"));
            write_csv(&p, &cfg.rows, &TRIALS_HEADER)?;
            written.push(p);
        }
        if outputs.contains(&Artifact::Histogram) {
            let p = dir.join(format!("{stem}_histogram.csv"));
            write_csv(&p, &histogram_rows(&cfg.histogram), &["bin", "lo", "hi", "count"])?;
            written.push(p);
        }
        if outputs.contains(&Artifact::Trajectory) {
            if let Some(traj) = &cfg.trajectory {
                let p = dir.join(format!("{stem}_trajectory.csv"));
                write_csv(&p, traj, &TRAJECTORY_HEADER)?;
                written.push(p);
            }
        }
    }
    if outputs.contains(&Artifact::BoundsTable) {
        let rows: Vec<BoundsRow> = report.configs.iter().map(|c| c.bounds).collect();
        let p = dir.join(format!("{base}_bounds.csv"));
        write_csv(&p, &rows, &[])?;
        written.push(p);
    }
    if let (true, Some(cmp)) = (outputs.contains(&Artifact::Comparison), &report.comparison) {
        let p = dir.join(format!("{base}_comparison.csv"));
        write_csv(&p, &cmp.rows, &COMPARISON_HEADER)?;
        written.push(p);
    }
    let p = dir.join(format!("{base}_report.json"));
    let json = serde_json::to_vec_pretty(report).map_err(|e| Error::Config(format!("cannot encode report: {e}")))?;
    write_bytes(&p, &json)?;
    written.push(p);
    Ok(written)
}

// ---------------------------------------------------------------------------
// Declarative experiment files

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    name: String,
    trials: u32,
    seed_base: u64,
    #[serde(default = "default_outputs")]
    outputs: Vec<Artifact>,
    #[serde(rename = "config")]
    configs: Vec<SweepConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepConfig {
    label: Option<String>,
    n: usize,
    w0: u32,
    w1: u32,
    #[serde(default = "default_variant")]
    variant: String,
    epsilon: Option<f64>,
    k1: Option<u32>,
    k2: Option<u32>,
    max_big_steps: Option<u64>,
    #[serde(default)]
    record_trajectory: bool,
    schedule: Option<String>,
}

fn default_outputs() -> Vec<Artifact> {
    vec![Artifact::Trials, Artifact::Histogram]
}

fn default_variant() -> String {
    "basic".into()
}

impl ExperimentSpec {
    /// Parses a TOML experiment file:
    ///
    /// ```toml
    /// name = "competition"
    /// trials = 300
    /// seed_base = 1000
    /// outputs = ["trials", "histogram", "bounds-table"]
    ///
    /// [[config]]
    /// label = "high"
    /// n = 1000
    /// w0 = 40
    /// w1 = 50
    /// variant = "basic"
    /// ```
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: SweepFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let templates = file
            .configs
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                let variant = Variant::from_parts(&c.variant, c.epsilon, c.k1, c.k2)
                    .map_err(|e| Error::Config(e.to_string()))?;
                let population = Population::new(c.w0, c.w1).map_err(|e| Error::Config(e.to_string()))?;
                let mut t = TrialTemplate::new(c.label.unwrap_or_else(|| format!("config{i}")), c.n, population, variant)
                    .with_trajectory(c.record_trajectory);
                if let Some(max) = c.max_big_steps {
                    t = t.with_max_big_steps(max);
                }
                if let Some(schedule) = c.schedule {
                    t = t.with_schedule(schedule.parse().map_err(|e: Error| Error::Config(e.to_string()))?);
                }
                Ok(t)
            })
            .collect::<Result<Vec<_>>>()?;
        let spec = ExperimentSpec {
            name: file.name,
            templates,
            trials: file.trials,
            seed_base: file.seed_base,
            outputs: file.outputs,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text)
    }
}
