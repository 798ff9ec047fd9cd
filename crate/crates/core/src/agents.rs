//! Writers and erasers, and the per-variant rule each one follows in a
//! single atomic step.
//!
//! Rules are pure functions of what an agent can see: its own kind and mark,
//! a waiting/active bit, and the cell it is on plus the cell it just passed.
//! They never see an absolute index; the position bookkeeping in this module
//! only turns a rule's decision into a move along the strand. The naive
//! baseline is the one exception and reads cell 0 directly.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::strand::{is_collision, CellState, Strand, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentKind {
    Writer(Value),
    Eraser(Value),
}

impl AgentKind {
    pub fn mark(self) -> Value {
        match self {
            AgentKind::Writer(v) | AgentKind::Eraser(v) => v,
        }
    }

    pub fn is_writer(self) -> bool {
        matches!(self, AgentKind::Writer(_))
    }
}

/// Local orientation of travel. `Plus` moves toward higher indices, but the
/// agent itself attaches no global meaning to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Plus,
    Minus,
}

impl Direction {
    pub fn reversed(self) -> Direction {
        match self {
            Direction::Plus => Direction::Minus,
            Direction::Minus => Direction::Plus,
        }
    }

    pub fn sign(self) -> isize {
        match self {
            Direction::Plus => 1,
            Direction::Minus => -1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Agent {
    pub kind: AgentKind,
    pub position: usize,
    pub direction: Direction,
    /// Eraser is parked at a collision it erased (waiting variant).
    pub waiting: bool,
    /// Writer has gone quiet (active/inactive variant).
    pub inactive: bool,
    /// Run length of confirming observations; active/inactive variant only.
    pub streak: u32,
}

impl Agent {
    pub fn new(kind: AgentKind, position: usize, direction: Direction) -> Self {
        Agent {
            kind,
            position,
            direction,
            waiting: false,
            inactive: false,
            streak: 0,
        }
    }
}

/// Agent counts. Eraser counts are tied to writer counts: `e0 = w1` and
/// `e1 = w0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Population {
    w0: u32,
    w1: u32,
}

impl Population {
    pub fn new(w0: u32, w1: u32) -> Result<Self> {
        if w0 == 0 && w1 == 0 {
            return Err(Error::EmptyPopulation);
        }
        Ok(Population { w0, w1 })
    }

    pub fn w0(&self) -> u32 {
        self.w0
    }

    pub fn w1(&self) -> u32 {
        self.w1
    }

    pub fn e0(&self) -> u32 {
        self.w1
    }

    pub fn e1(&self) -> u32 {
        self.w0
    }

    pub fn writers(&self, v: Value) -> u32 {
        match v {
            Value::Zero => self.w0,
            Value::One => self.w1,
        }
    }

    pub fn total(&self) -> usize {
        2 * (self.w0 as usize + self.w1 as usize)
    }

    /// Probability that a first write is a 1, `w1 / (w0 + w1)`.
    pub fn p1(&self) -> f64 {
        f64::from(self.w1) / (f64::from(self.w0) + f64::from(self.w1))
    }

    /// `p1` rounded to two decimals, as used in preset labels.
    pub fn p_label(&self) -> f64 {
        (self.p1() * 100.0).round() / 100.0
    }

    /// The value with strictly more writers, if any.
    pub fn majority(&self) -> Option<Value> {
        match self.w1.cmp(&self.w0) {
            std::cmp::Ordering::Greater => Some(Value::One),
            std::cmp::Ordering::Less => Some(Value::Zero),
            std::cmp::Ordering::Equal => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Variant {
    /// Race to cell 0; baseline only.
    Naive,
    Basic,
    /// Erasers park at the collision they erased until it resolves.
    Waiting,
    /// Erasers also erase their own mark unconditionally with probability
    /// `epsilon` per step.
    SelfStabilizing { epsilon: f64 },
    /// Writers go inactive after `k1` opposite marks in a row and come back
    /// after `k2` own marks in a row. Needs more than two bits of memory.
    ActiveInactive { k1: u32, k2: u32 },
}

impl Variant {
    pub const DEFAULT_EPSILON: f64 = 1e-3;
    pub const DEFAULT_K: u32 = 3;

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Naive => "naive",
            Variant::Basic => "basic",
            Variant::Waiting => "waiting",
            Variant::SelfStabilizing { .. } => "self-stabilizing",
            Variant::ActiveInactive { .. } => "active-inactive",
        }
    }

    /// Builds a variant from its name and optional parameters; missing
    /// parameters take the defaults.
    pub fn from_parts(
        name: &str,
        epsilon: Option<f64>,
        k1: Option<u32>,
        k2: Option<u32>,
    ) -> Result<Self> {
        let variant = match name.trim().to_ascii_lowercase().as_str() {
            "naive" => Variant::Naive,
            "basic" => Variant::Basic,
            "waiting" => Variant::Waiting,
            "self-stabilizing" | "self_stabilizing" => Variant::SelfStabilizing {
                epsilon: epsilon.unwrap_or(Self::DEFAULT_EPSILON),
            },
            "active-inactive" | "active_inactive" => Variant::ActiveInactive {
                k1: k1.unwrap_or(Self::DEFAULT_K),
                k2: k2.unwrap_or(Self::DEFAULT_K),
            },
            other => return Err(Error::UnknownVariant(other.to_string())),
        };
        variant.validate()?;
        Ok(variant)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Variant::SelfStabilizing { epsilon } if !(epsilon > 0.0 && epsilon < 1.0) => Err(
                Error::param(format!("epsilon must lie in (0, 1), got {epsilon}")),
            ),
            Variant::ActiveInactive { k1, k2 } if k1 == 0 || k2 == 0 => {
                Err(Error::param("k1 and k2 must be at least 1"))
            }
            _ => Ok(()),
        }
    }

    /// Whether all agent state beyond position and direction fits in two bits.
    pub fn is_two_bit(&self) -> bool {
        !matches!(self, Variant::ActiveInactive { .. })
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::SelfStabilizing { epsilon } => write!(f, "{}(epsilon={epsilon})", self.name()),
            Variant::ActiveInactive { k1, k2 } => write!(f, "{}(k1={k1},k2={k2})", self.name()),
            _ => f.write_str(self.name()),
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::from_parts(s, None, None, None)
    }
}

/// What changed in the strand during one agent step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepEvent {
    Idle,
    Wrote,
    Erased { at_collision: bool },
}

/// Everything a (non-naive) rule is allowed to look at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LocalView {
    pub current: CellState,
    /// The cell most recently passed, if it exists.
    pub previous: Option<CellState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WriterAction {
    pub write: bool,
    pub advance: bool,
    pub inactive: bool,
    pub streak: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EraserAction {
    pub erase: bool,
    pub advance: bool,
    pub waiting: bool,
}

/// The writer rule. In the waiting variant a writer that has not just written
/// stays put while it sees a collision, so it is on hand to refill the cell
/// once an eraser clears it.
pub fn writer_rule(mark: Value, variant: &Variant, inactive: bool, streak: u32, view: LocalView) -> WriterAction {
    let current = view.current;
    match *variant {
        Variant::ActiveInactive { k1, k2 } => {
            let (confirms, limit) = if inactive {
                (current.holds(mark), k2)
            } else {
                (current.holds(mark.complement()), k1)
            };
            let streak = if confirms { streak + 1 } else { 0 };
            let flip = streak >= limit;
            WriterAction {
                write: !inactive && current.is_empty(),
                advance: true,
                inactive: inactive ^ flip,
                streak: if flip { 0 } else { streak },
            }
        }
        Variant::Waiting => {
            let spin = view.previous.is_some_and(|p| is_collision(p, current));
            WriterAction {
                write: current.is_empty(),
                advance: !spin,
                inactive: false,
                streak: 0,
            }
        }
        _ => WriterAction {
            write: current.is_empty(),
            advance: true,
            inactive: false,
            streak: 0,
        },
    }
}

/// The eraser rule. `random_erase` is the outcome of the self-stabilizing
/// coin and is ignored by every other variant.
pub fn eraser_rule(
    mark: Value,
    variant: &Variant,
    waiting: bool,
    view: LocalView,
    random_erase: bool,
) -> EraserAction {
    let pattern = view.previous == Some(mark.complement().into()) && view.current.holds(mark);
    match variant {
        Variant::Waiting => {
            if pattern {
                EraserAction {
                    erase: true,
                    advance: false,
                    waiting: true,
                }
            } else if waiting && view.current.is_empty() {
                EraserAction {
                    erase: false,
                    advance: false,
                    waiting: true,
                }
            } else {
                EraserAction {
                    erase: false,
                    advance: true,
                    waiting: false,
                }
            }
        }
        Variant::SelfStabilizing { .. } => EraserAction {
            erase: pattern || (random_erase && view.current.holds(mark)),
            advance: true,
            waiting: false,
        },
        _ => EraserAction {
            erase: pattern,
            advance: true,
            waiting: false,
        },
    }
}

fn look(agent: &Agent, strand: &Strand) -> LocalView {
    let cells = strand.cells();
    let previous = agent
        .position
        .checked_add_signed(-agent.direction.sign())
        .and_then(|i| cells.get(i).copied());
    LocalView {
        current: cells[agent.position],
        previous,
    }
}

/// One cell along the agent's direction; at either end of the strand the
/// agent turns around in place instead.
fn advance(agent: &mut Agent, len: usize) {
    match agent.position.checked_add_signed(agent.direction.sign()) {
        Some(next) if next < len => agent.position = next,
        _ => agent.direction = agent.direction.reversed(),
    }
}

/// Spawns every agent of `pop` at a uniform random cell with a uniform
/// random direction.
pub fn spawn_agents<R: Rng + ?Sized>(pop: &Population, n: usize, rng: &mut R) -> Result<Vec<Agent>> {
    if n < Strand::MIN_LEN {
        return Err(Error::InvalidSize(n));
    }
    if pop.w0 == 0 && pop.w1 == 0 {
        return Err(Error::EmptyPopulation);
    }
    let kinds = [
        (AgentKind::Writer(Value::Zero), pop.w0()),
        (AgentKind::Writer(Value::One), pop.w1()),
        (AgentKind::Eraser(Value::Zero), pop.e0()),
        (AgentKind::Eraser(Value::One), pop.e1()),
    ];
    let mut agents = Vec::with_capacity(pop.total());
    for (kind, count) in kinds {
        for _ in 0..count {
            let position = rng.random_range(0..n);
            let direction = if rng.random_bool(0.5) {
                Direction::Plus
            } else {
                Direction::Minus
            };
            agents.push(Agent::new(kind, position, direction));
        }
    }
    Ok(agents)
}

pub fn writer_step(agent: &mut Agent, strand: &mut Strand, variant: &Variant) -> StepEvent {
    let AgentKind::Writer(mark) = agent.kind else {
        panic!("writer_step called on {:?}", agent.kind);
    };
    let action = writer_rule(mark, variant, agent.inactive, agent.streak, look(agent, strand));
    agent.inactive = action.inactive;
    agent.streak = action.streak;
    debug_assert!(!variant.is_two_bit() || (agent.streak == 0 && !agent.inactive));
    let wrote = action.write
        && strand
            .try_write(agent.position, mark)
            .expect("agent position in range");
    if action.advance {
        advance(agent, strand.len());
    }
    if wrote {
        StepEvent::Wrote
    } else {
        StepEvent::Idle
    }
}

pub fn eraser_step<R: Rng + ?Sized>(
    agent: &mut Agent,
    strand: &mut Strand,
    variant: &Variant,
    rng: &mut R,
) -> StepEvent {
    let coin = match *variant {
        Variant::SelfStabilizing { epsilon } => rng.random_bool(epsilon),
        _ => false,
    };
    eraser_step_with_coin(agent, strand, variant, coin)
}

/// [`eraser_step`] with the self-stabilizing coin supplied by the caller.
pub fn eraser_step_with_coin(
    agent: &mut Agent,
    strand: &mut Strand,
    variant: &Variant,
    random_erase: bool,
) -> StepEvent {
    let AgentKind::Eraser(mark) = agent.kind else {
        panic!("eraser_step called on {:?}", agent.kind);
    };
    let view = look(agent, strand);
    let action = eraser_rule(mark, variant, agent.waiting, view, random_erase);
    agent.waiting = action.waiting;
    let mut event = StepEvent::Idle;
    if action.erase {
        let at_collision = view
            .previous
            .is_some_and(|prev| crate::strand::is_collision(prev, view.current));
        debug_assert!(
            at_collision || matches!(variant, Variant::SelfStabilizing { .. }),
            "non-collision erase under {variant}"
        );
        if strand
            .try_erase(agent.position, mark)
            .expect("agent position in range")
        {
            event = StepEvent::Erased { at_collision };
        }
    }
    if action.advance {
        advance(agent, strand.len());
    }
    event
}

/// The naive baseline. Writers head for cell 0 until somebody writes it;
/// afterwards only writers of the value in cell 0 write, sweeping back and
/// forth. Erasers do nothing.
pub fn naive_step(agent: &mut Agent, strand: &mut Strand) -> StepEvent {
    let AgentKind::Writer(mark) = agent.kind else {
        return StepEvent::Idle;
    };
    match strand.cells()[0].value() {
        None => {
            if agent.position == 0 {
                let wrote = strand.try_write(0, mark).expect("cell 0 exists");
                agent.direction = Direction::Minus;
                advance(agent, strand.len());
                if wrote {
                    StepEvent::Wrote
                } else {
                    StepEvent::Idle
                }
            } else {
                agent.direction = Direction::Minus;
                agent.position -= 1;
                StepEvent::Idle
            }
        }
        Some(decided) => {
            let wrote = decided == mark
                && strand
                    .try_write(agent.position, mark)
                    .expect("agent position in range");
            advance(agent, strand.len());
            if wrote {
                StepEvent::Wrote
            } else {
                StepEvent::Idle
            }
        }
    }
}

/// One atomic step of `agent` under `variant`.
pub fn step<R: Rng + ?Sized>(
    agent: &mut Agent,
    strand: &mut Strand,
    variant: &Variant,
    rng: &mut R,
) -> StepEvent {
    match (variant, agent.kind) {
        (Variant::Naive, _) => naive_step(agent, strand),
        (_, AgentKind::Writer(_)) => writer_step(agent, strand, variant),
        (_, AgentKind::Eraser(_)) => eraser_step(agent, strand, variant, rng),
    }
}
