//! Recovery synthesis as an AND-OR safety game over state estimates.
//!
//! Y-nodes hold an estimate and belong to the supervisor, which picks a
//! control decision. Z-nodes hold the estimate and that decision and belong
//! to the plant, which answers with any feasible observable event. A Y-node
//! is winning when its navigation cell has collapsed onto the operational
//! region, or when some safe decision leads only to winning Y-nodes.
//!
//! The depth-first engine keeps the current search path and treats a return
//! to an estimate on that path as a loss for the decision that caused it.
//! Winning verdicts are memoized unconditionally; a losing verdict is only
//! memoized when it did not depend on a path node above it.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::automata::{AutomataError, CompositeModel, ControlDecision, EventId, StateEstimate};
use crate::mission::MissionModel;

pub const DEFAULT_NODE_BUDGET: usize = 1_000_000;

pub type YId = usize;
pub type ZId = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SynthError {
    #[error("synthesis aborted: node budget of {budget} exceeded")]
    BudgetExceeded { budget: usize },
    #[error("the initial estimate is not winning")]
    NotWinning,
    #[error(transparent)]
    Model(#[from] AutomataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exploration {
    #[default]
    DepthFirst,
    BreadthFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecisionOrder {
    /// Single moves toward fresh safe estimates, then other single events,
    /// then larger sets.
    #[default]
    PreferMove,
    /// Smallest decisions first, in event order.
    Minimal,
    Randomized(u64),
    /// Largest decisions first.
    MaximallyPermissive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthConfig {
    pub exploration: Exploration,
    pub decision_order: DecisionOrder,
    pub node_budget: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            exploration: Exploration::DepthFirst,
            decision_order: DecisionOrder::PreferMove,
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct YState {
    pub estimate: StateEstimate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InitialY {
    Ready(YState),
    /// The closure of the estimate already contains an unsafe state.
    UnsafeAtStart(StateEstimate),
}

/// The supervisor's first node: the unobservable reach of the raw estimate.
pub fn initial_y(m: &MissionModel, raw: &StateEstimate) -> Result<InitialY, AutomataError> {
    let c = m.composite();
    c.check_estimate(raw)?;
    let closed = c.unobservable_reach(raw, &c.decision([]));
    if c.is_unsafe(&closed) {
        Ok(InitialY::UnsafeAtStart(closed))
    } else {
        Ok(InitialY::Ready(YState { estimate: closed }))
    }
}

/// Every admissible decision at `y`, before safety pruning, ordered per
/// `order` with an empty search path.
pub fn candidate_decisions(
    m: &MissionModel,
    y: &YState,
    order: DecisionOrder,
) -> Result<Vec<ControlDecision>, AutomataError> {
    let mut rng = match order {
        DecisionOrder::Randomized(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    ordered_candidates(m, &y.estimate, order, &|_| false, &mut rng)
}

/// Controllable subsets `γ` of the feasible set; `∅` only when nothing is
/// feasible. Returned unordered.
fn admissible_subsets(feasible: &BTreeSet<EventId>) -> Vec<BTreeSet<EventId>> {
    let events: Vec<EventId> = feasible.iter().copied().collect();
    if events.is_empty() {
        return vec![BTreeSet::new()];
    }
    assert!(events.len() < 24, "decision lattice too large to enumerate");
    (1u32..(1 << events.len()))
        .map(|mask| {
            events
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, &e)| e)
                .collect()
        })
        .collect()
}

fn ordered_candidates(
    m: &MissionModel,
    est: &StateEstimate,
    order: DecisionOrder,
    on_path: &dyn Fn(&StateEstimate) -> bool,
    rng: &mut Option<ChaCha8Rng>,
) -> Result<Vec<ControlDecision>, AutomataError> {
    let c = m.composite();
    let feasible = c.feasible_controllable(est)?;
    let mut subsets = admissible_subsets(&feasible);
    match order {
        DecisionOrder::PreferMove => {
            // single moves (fresh safe targets first), other single events,
            // then larger sets
            let class = |g: &BTreeSet<EventId>| -> u8 {
                if g.len() != 1 {
                    return 3;
                }
                let e = *g.iter().next().unwrap();
                if !m.move_events().contains(&e) {
                    return 2;
                }
                let d = c.decision([e]);
                match c.observe(est, &d, e) {
                    Ok(next) if !c.is_unsafe(&next) && !on_path(&next) => 0,
                    _ => 1,
                }
            };
            subsets
                .sort_by_cached_key(|g| (class(g), g.len(), g.iter().copied().collect::<Vec<_>>()));
        }
        DecisionOrder::Minimal => {
            subsets.sort_by_key(|g| (g.len(), g.iter().copied().collect::<Vec<_>>()));
        }
        DecisionOrder::MaximallyPermissive => {
            subsets.sort_by_key(|g| {
                (
                    std::cmp::Reverse(g.len()),
                    g.iter().copied().collect::<Vec<_>>(),
                )
            });
        }
        DecisionOrder::Randomized(_) => {
            subsets.sort();
            if let Some(rng) = rng.as_mut() {
                subsets.shuffle(rng);
            }
        }
    }
    Ok(subsets.into_iter().map(|g| c.decision(g)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PruneReason {
    /// The unobservable reach under the decision is unsafe.
    UnsafeReach,
    /// Observing this event leads to an unsafe estimate.
    UnsafeSuccessor(EventId),
    /// No observable event is feasible: the plant would stall.
    Stall,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ZStatus {
    Live,
    Pruned(PruneReason),
}

#[derive(Debug, Clone)]
pub struct YNode {
    pub estimate: StateEstimate,
    pub goal: bool,
    pub decisions: Vec<ZId>,
}

#[derive(Debug, Clone)]
pub struct ZNode {
    pub source: YId,
    pub decision: ControlDecision,
    pub status: ZStatus,
    pub observations: Vec<(EventId, YId)>,
}

impl ZNode {
    pub fn is_live(&self) -> bool {
        self.status == ZStatus::Live
    }
}

/// The explored game graph with its winning region and the decision chosen
/// at each winning non-goal node.
#[derive(Debug, Clone)]
pub struct Rbts {
    y_nodes: Vec<YNode>,
    z_nodes: Vec<ZNode>,
    y_index: HashMap<StateEstimate, YId>,
    z_index: HashMap<(YId, ControlDecision), ZId>,
    initial: YId,
    winning: Vec<bool>,
    strategy: BTreeMap<YId, ZId>,
}

impl Rbts {
    fn new() -> Self {
        Rbts {
            y_nodes: Vec::new(),
            z_nodes: Vec::new(),
            y_index: HashMap::new(),
            z_index: HashMap::new(),
            initial: 0,
            winning: Vec::new(),
            strategy: BTreeMap::new(),
        }
    }

    pub fn y_nodes(&self) -> &[YNode] {
        &self.y_nodes
    }

    pub fn z_nodes(&self) -> &[ZNode] {
        &self.z_nodes
    }

    pub fn y(&self, id: YId) -> &YNode {
        &self.y_nodes[id]
    }

    pub fn z(&self, id: ZId) -> &ZNode {
        &self.z_nodes[id]
    }

    pub fn initial(&self) -> YId {
        self.initial
    }

    pub fn find_y(&self, est: &StateEstimate) -> Option<YId> {
        self.y_index.get(est).copied()
    }

    pub fn is_winning(&self, y: YId) -> bool {
        self.winning[y]
    }

    pub fn recoverable(&self) -> bool {
        self.winning[self.initial]
    }

    /// Chosen decision node at a winning non-goal Y-node.
    pub fn strategy(&self, y: YId) -> Option<ZId> {
        self.strategy.get(&y).copied()
    }

    pub fn num_nodes(&self) -> usize {
        self.y_nodes.len() + self.z_nodes.len()
    }

    /// Structural check: bipartite edges, live Z-nodes with at least one
    /// observation and no unsafe estimate, and closure of the winning region.
    pub fn check_structure(&self, c: &CompositeModel) -> Result<(), String> {
        for (zid, z) in self.z_nodes.iter().enumerate() {
            if z.source >= self.y_nodes.len() || !self.y_nodes[z.source].decisions.contains(&zid) {
                return Err(format!("z{zid} is not attached to its source"));
            }
            if !z.is_live() {
                if !z.observations.is_empty() {
                    return Err(format!("pruned z{zid} has successors"));
                }
                continue;
            }
            if z.observations.is_empty() {
                return Err(format!("live z{zid} has no observation"));
            }
            let est = &self.y_nodes[z.source].estimate;
            if c.is_unsafe(&c.unobservable_reach(est, &z.decision)) {
                return Err(format!("live z{zid} has an unsafe reach"));
            }
            for &(_, y) in &z.observations {
                if y >= self.y_nodes.len() {
                    return Err(format!("z{zid} points outside the Y-nodes"));
                }
            }
        }
        for (yid, y) in self.y_nodes.iter().enumerate() {
            if c.is_unsafe(&y.estimate) {
                return Err(format!("y{yid} is unsafe"));
            }
            if y.decisions.iter().any(|&z| self.z_nodes[z].source != yid) {
                return Err(format!("y{yid} lists a foreign decision"));
            }
            if self.winning[yid] && !y.goal {
                let Some(&z) = self.strategy.get(&yid) else {
                    return Err(format!("winning y{yid} has no strategy"));
                };
                let zn = &self.z_nodes[z];
                if !zn.is_live() || zn.source != yid {
                    return Err(format!("strategy of y{yid} is not a live decision of it"));
                }
                if let Some(&(_, s)) = zn.observations.iter().find(|&&(_, s)| !self.winning[s]) {
                    return Err(format!("strategy of y{yid} reaches losing y{s}"));
                }
            }
        }
        Ok(())
    }
}

struct Builder<'m> {
    m: &'m MissionModel,
    cfg: SynthConfig,
    t: Rbts,
    work: usize,
    rng: Option<ChaCha8Rng>,
    winnable: HashSet<StateEstimate>,
}

impl<'m> Builder<'m> {
    fn new(m: &'m MissionModel, cfg: SynthConfig) -> Self {
        let rng = match cfg.decision_order {
            DecisionOrder::Randomized(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        };
        Builder {
            m,
            cfg,
            t: Rbts::new(),
            work: 0,
            rng,
            winnable: HashSet::new(),
        }
    }

    fn charge(&mut self) -> Result<(), SynthError> {
        self.work += 1;
        if self.work > self.cfg.node_budget || self.t.num_nodes() > self.cfg.node_budget {
            return Err(SynthError::BudgetExceeded {
                budget: self.cfg.node_budget,
            });
        }
        Ok(())
    }

    fn y_node(&mut self, est: StateEstimate) -> YId {
        if let Some(&id) = self.t.y_index.get(&est) {
            return id;
        }
        let id = self.t.y_nodes.len();
        let goal = self.m.is_goal(&est);
        self.t.y_index.insert(est.clone(), id);
        self.t.y_nodes.push(YNode {
            estimate: est,
            goal,
            decisions: Vec::new(),
        });
        self.t.winning.push(goal);
        id
    }

    /// Creates (or reuses) the Z-node for `d` at `y`, applying the pruning
    /// rules for unsafe reach, unsafe successors and stalls.
    fn z_node(&mut self, y: YId, d: ControlDecision) -> Result<ZId, SynthError> {
        if let Some(&z) = self.t.z_index.get(&(y, d.clone())) {
            return Ok(z);
        }
        self.charge()?;
        let c = self.m.composite();
        let est = self.t.y_nodes[y].estimate.clone();
        let reach = c.unobservable_reach(&est, &d);
        let mut status = ZStatus::Live;
        let mut successors = Vec::new();
        if c.is_unsafe(&reach) {
            status = ZStatus::Pruned(PruneReason::UnsafeReach);
        } else {
            let events = c.feasible_observable(&reach, &d)?;
            if events.is_empty() {
                status = ZStatus::Pruned(PruneReason::Stall);
            }
            for e in events {
                let next = c.observe(&reach, &d, e)?;
                if c.is_unsafe(&next) {
                    status = ZStatus::Pruned(PruneReason::UnsafeSuccessor(e));
                    successors.clear();
                    break;
                }
                successors.push((e, next));
            }
        }
        let observations = successors
            .into_iter()
            .map(|(e, est)| (e, self.y_node(est)))
            .collect();
        let id = self.t.z_nodes.len();
        self.t.z_nodes.push(ZNode {
            source: y,
            decision: d.clone(),
            status,
            observations,
        });
        self.t.y_nodes[y].decisions.push(id);
        self.t.z_index.insert((y, d), id);
        Ok(id)
    }

    fn candidates(
        &mut self,
        y: YId,
        on_stack: &HashMap<YId, usize>,
    ) -> Result<Vec<ControlDecision>, SynthError> {
        self.charge()?;
        let est = self.t.y_nodes[y].estimate.clone();
        let index = &self.t.y_index;
        let on_path = |s: &StateEstimate| index.get(s).is_some_and(|id| on_stack.contains_key(id));
        Ok(ordered_candidates(
            self.m,
            &est,
            self.cfg.decision_order,
            &on_path,
            &mut self.rng,
        )?)
    }

    fn depth_first(&mut self, root: YId) -> Result<(), SynthError> {
        struct ZFrame {
            z: ZId,
            next: usize,
        }
        struct Frame {
            y: YId,
            depth: usize,
            cands: Vec<ControlDecision>,
            next_cand: usize,
            low: usize,
            z: Option<ZFrame>,
        }

        if self.t.y_nodes[root].goal {
            return Ok(());
        }
        self.solve_globally(root)?;
        // memo: Some(true) winning, Some(false) losing regardless of path
        let mut memo: HashMap<YId, bool> = HashMap::new();
        let mut on_stack: HashMap<YId, usize> = HashMap::new();
        on_stack.insert(root, 0);
        let cands = self.candidates(root, &on_stack)?;
        let mut stack = vec![Frame {
            y: root,
            depth: 0,
            cands,
            next_cand: 0,
            low: usize::MAX,
            z: None,
        }];
        let mut returned: Option<(bool, usize)> = None;

        while let Some(frame) = stack.last_mut() {
            if let Some((won, low)) = returned.take() {
                frame.low = frame.low.min(low);
                match (&mut frame.z, won) {
                    (Some(zf), true) => zf.next += 1,
                    (z, false) => *z = None,
                    (None, true) => unreachable!("child returned without a pending decision"),
                }
            }

            let mut push: Option<YId> = None;
            loop {
                if frame.z.is_none() {
                    if frame.next_cand >= frame.cands.len() {
                        break;
                    }
                    let d = frame.cands[frame.next_cand].clone();
                    frame.next_cand += 1;
                    let z = self.z_node(frame.y, d)?;
                    if self.t.z_nodes[z].is_live() {
                        frame.z = Some(ZFrame { z, next: 0 });
                    }
                    continue;
                }
                let zf = frame.z.as_mut().unwrap();
                let obs = &self.t.z_nodes[zf.z].observations;
                let Some(&(_, s)) = obs.get(zf.next) else {
                    break;
                };
                if self.t.y_nodes[s].goal || memo.get(&s) == Some(&true) {
                    zf.next += 1;
                } else if memo.get(&s) == Some(&false)
                    || !self.winnable.contains(&self.t.y_nodes[s].estimate)
                {
                    frame.z = None;
                } else if let Some(&d) = on_stack.get(&s) {
                    frame.low = frame.low.min(d);
                    frame.z = None;
                } else {
                    push = Some(s);
                    break;
                }
            }

            if let Some(s) = push {
                let depth = frame.depth + 1;
                on_stack.insert(s, depth);
                let cands = self.candidates(s, &on_stack)?;
                stack.push(Frame {
                    y: s,
                    depth,
                    cands,
                    next_cand: 0,
                    low: usize::MAX,
                    z: None,
                });
                continue;
            }

            let frame = stack.pop().unwrap();
            on_stack.remove(&frame.y);
            match frame.z {
                Some(zf) => {
                    self.t.strategy.insert(frame.y, zf.z);
                    self.t.winning[frame.y] = true;
                    memo.insert(frame.y, true);
                    returned = Some((true, usize::MAX));
                }
                None => {
                    if frame.low >= frame.depth {
                        memo.insert(frame.y, false);
                    }
                    returned = Some((false, frame.low));
                }
            }
        }
        Ok(())
    }

    /// Exact winning region of the full game from `root`, computed on a
    /// scratch graph. Path-scoped losses in the depth-first search are not
    /// reusable; this lets it discard losing estimates outright.
    fn solve_globally(&mut self, root: YId) -> Result<(), SynthError> {
        let mut scratch = Builder::new(self.m, self.cfg);
        scratch.work = self.work;
        let r = scratch.y_node(self.t.y_nodes[root].estimate.clone());
        scratch.breadth_first(r)?;
        self.work = scratch.work;
        self.winnable = scratch
            .t
            .y_nodes
            .into_iter()
            .zip(scratch.t.winning)
            .filter(|(_, w)| *w)
            .map(|(y, _)| y.estimate)
            .collect();
        Ok(())
    }

    fn breadth_first(&mut self, root: YId) -> Result<(), SynthError> {
        let no_stack = HashMap::new();
        let mut queue = VecDeque::from([root]);
        let mut expanded = BTreeSet::new();
        while let Some(y) = queue.pop_front() {
            if self.t.y_nodes[y].goal || !expanded.insert(y) {
                continue;
            }
            for d in self.candidates(y, &no_stack)? {
                let z = self.z_node(y, d)?;
                for &(_, s) in &self.t.z_nodes[z].observations {
                    if !expanded.contains(&s) {
                        queue.push_back(s);
                    }
                }
            }
        }

        // Level-synchronous attractor: a node joins at level k through its
        // first decision whose successors all joined before level k.
        loop {
            let won = self.t.winning.clone();
            let mut changed = false;
            for y in 0..self.t.y_nodes.len() {
                if won[y] || !expanded.contains(&y) {
                    continue;
                }
                let choice = self.t.y_nodes[y].decisions.iter().copied().find(|&z| {
                    let zn = &self.t.z_nodes[z];
                    zn.is_live() && zn.observations.iter().all(|&(_, s)| won[s])
                });
                if let Some(z) = choice {
                    self.t.winning[y] = true;
                    self.t.strategy.insert(y, z);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        Ok(())
    }
}

/// Explores the game from `y0` and decides whether it is winning.
pub fn build_rbts(m: &MissionModel, y0: &YState, cfg: &SynthConfig) -> Result<Rbts, SynthError> {
    let c = m.composite();
    c.check_estimate(&y0.estimate)?;
    let mut b = Builder::new(m, *cfg);
    let root = b.y_node(y0.estimate.clone());
    b.t.initial = root;
    if c.is_unsafe(&y0.estimate) {
        return Ok(b.t);
    }
    match cfg.exploration {
        Exploration::DepthFirst => b.depth_first(root)?,
        Exploration::BreadthFirst => b.breadth_first(root)?,
    }
    Ok(b.t)
}

/// A winning strategy: the decision to issue at each reachable estimate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoverySupervisor {
    initial: StateEstimate,
    strategy: BTreeMap<StateEstimate, ControlDecision>,
}

impl RecoverySupervisor {
    pub fn new(initial: StateEstimate, strategy: BTreeMap<StateEstimate, ControlDecision>) -> Self {
        RecoverySupervisor { initial, strategy }
    }

    pub fn initial(&self) -> &StateEstimate {
        &self.initial
    }

    pub fn decision(&self, est: &StateEstimate) -> Option<&ControlDecision> {
        self.strategy.get(est)
    }

    pub fn strategy(&self) -> &BTreeMap<StateEstimate, ControlDecision> {
        &self.strategy
    }

    pub fn len(&self) -> usize {
        self.strategy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strategy.is_empty()
    }

    /// Walks every play consistent with the strategy and checks that it is
    /// closed, safe and acyclic. Returns the longest play in Y-visits.
    pub fn verify(&self, m: &MissionModel) -> Result<usize, String> {
        let c = m.composite();
        // 0 unvisited, 1 on stack, 2 done; value is the longest play below
        let mut state: HashMap<&StateEstimate, (u8, usize)> = HashMap::new();
        fn visit<'a>(
            sup: &'a RecoverySupervisor,
            m: &MissionModel,
            c: &CompositeModel,
            est: &'a StateEstimate,
            state: &mut HashMap<&'a StateEstimate, (u8, usize)>,
        ) -> Result<usize, String> {
            if m.is_goal(est) {
                return Ok(0);
            }
            match state.get(est) {
                Some((1, _)) => return Err(format!("cycle through {}", c.display(est))),
                Some((_, depth)) => return Ok(*depth),
                None => {}
            }
            let (key, d) = sup
                .strategy
                .get_key_value(est)
                .ok_or_else(|| format!("no decision at {}", c.display(est)))?;
            if c.is_unsafe(&c.unobservable_reach(key, d)) {
                return Err(format!("unsafe reach at {}", c.display(key)));
            }
            state.insert(key, (1, 0));
            let events = c.feasible_observable(key, d).map_err(|e| e.to_string())?;
            if events.is_empty() {
                return Err(format!("stall at {}", c.display(key)));
            }
            let mut longest = 0;
            for e in events {
                let next = c.observe(key, d, e).map_err(|e| e.to_string())?;
                if c.is_unsafe(&next) {
                    return Err(format!("unsafe successor {}", c.display(&next)));
                }
                let next_key = match sup.strategy.get_key_value(&next) {
                    Some((k, _)) => k,
                    None if m.is_goal(&next) => continue,
                    None => return Err(format!("no decision at {}", c.display(&next))),
                };
                longest = longest.max(visit(sup, m, c, next_key, state)?);
            }
            state.insert(key, (2, longest + 1));
            Ok(longest + 1)
        }
        visit(self, m, c, &self.initial, &mut state)
    }
}

/// Follows the chosen decisions from the initial node and collects them.
pub fn extract_supervisor(t: &Rbts) -> Result<RecoverySupervisor, SynthError> {
    if !t.recoverable() {
        return Err(SynthError::NotWinning);
    }
    let mut strategy = BTreeMap::new();
    let mut queue = VecDeque::from([t.initial]);
    let mut seen = BTreeSet::from([t.initial]);
    while let Some(y) = queue.pop_front() {
        if t.y_nodes[y].goal {
            continue;
        }
        let z = t.strategy[&y];
        let zn = &t.z_nodes[z];
        strategy.insert(t.y_nodes[y].estimate.clone(), zn.decision.clone());
        for &(_, s) in &zn.observations {
            if seen.insert(s) {
                queue.push_back(s);
            }
        }
    }
    Ok(RecoverySupervisor {
        initial: t.y_nodes[t.initial].estimate.clone(),
        strategy,
    })
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuntimeError {
    #[error(
        "desynchronized: `{event}` is not a feasible observation at {estimate} under {decision}"
    )]
    Desynchronized {
        event: String,
        estimate: String,
        decision: String,
    },
    #[error("no decision stored for {0}")]
    MissingDecision(String),
    #[error("recovery already completed")]
    Finished,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuntimeStatus {
    Decision(ControlDecision),
    GoalReached,
}

/// Online execution of a recovery supervisor against observed events.
#[derive(Debug, Clone)]
pub struct SupervisorRuntime<'a> {
    sup: RecoverySupervisor,
    m: &'a MissionModel,
    estimate: StateEstimate,
    decision: Option<ControlDecision>,
}

impl<'a> SupervisorRuntime<'a> {
    pub fn start(sup: RecoverySupervisor, m: &'a MissionModel) -> Result<Self, RuntimeError> {
        let estimate = sup.initial.clone();
        let decision = if m.is_goal(&estimate) {
            None
        } else {
            Some(sup.decision(&estimate).cloned().ok_or_else(|| {
                RuntimeError::MissingDecision(m.composite().display(&estimate).to_string())
            })?)
        };
        Ok(SupervisorRuntime {
            sup,
            m,
            estimate,
            decision,
        })
    }

    pub fn estimate(&self) -> &StateEstimate {
        &self.estimate
    }

    pub fn supervisor(&self) -> &RecoverySupervisor {
        &self.sup
    }

    /// Current decision; `None` once the goal has been reached.
    pub fn decision(&self) -> Option<&ControlDecision> {
        self.decision.as_ref()
    }

    pub fn step(&mut self, e: EventId) -> Result<RuntimeStatus, RuntimeError> {
        let c = self.m.composite();
        let d = self.decision.as_ref().ok_or(RuntimeError::Finished)?;
        let next = c
            .observe(&self.estimate, d, e)
            .map_err(|_| RuntimeError::Desynchronized {
                event: c
                    .events()
                    .get(e)
                    .map(|ev| ev.name.clone())
                    .unwrap_or_else(|| format!("#{e}")),
                estimate: c.display(&self.estimate).to_string(),
                decision: c.display_decision(d).to_string(),
            })?;
        self.estimate = next;
        if self.m.is_goal(&self.estimate) {
            self.decision = None;
            return Ok(RuntimeStatus::GoalReached);
        }
        let d =
            self.sup.decision(&self.estimate).cloned().ok_or_else(|| {
                RuntimeError::MissingDecision(c.display(&self.estimate).to_string())
            })?;
        self.decision = Some(d.clone());
        Ok(RuntimeStatus::Decision(d))
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("oracle inconclusive: more than {budget} estimates")]
pub struct OracleInconclusive {
    pub budget: usize,
}

/// Exhaustive check of recoverability: enumerates every reachable estimate
/// under every admissible decision, then iterates the winning set to a
/// fixed point. Independent of decision ordering and of the search engine.
pub fn oracle_recoverable(
    m: &MissionModel,
    y0: &YState,
    budget: usize,
) -> Result<bool, OracleInconclusive> {
    let c = m.composite();
    if c.is_unsafe(&y0.estimate) {
        return Ok(false);
    }
    // per estimate: successor lists of the decisions that survive pruning
    let mut moves: HashMap<StateEstimate, Vec<Vec<StateEstimate>>> = HashMap::new();
    let mut queue = VecDeque::from([y0.estimate.clone()]);
    let mut seen: BTreeSet<StateEstimate> = BTreeSet::from([y0.estimate.clone()]);
    while let Some(est) = queue.pop_front() {
        if m.is_goal(&est) {
            continue;
        }
        let feasible = c
            .feasible_controllable(&est)
            .expect("oracle estimates are well formed");
        let mut options = Vec::new();
        'decisions: for gamma in admissible_subsets(&feasible) {
            let d = c.decision(gamma);
            let reach = c.unobservable_reach(&est, &d);
            if c.is_unsafe(&reach) {
                continue;
            }
            let events = c.feasible_observable(&reach, &d).expect("well formed");
            if events.is_empty() {
                continue;
            }
            let mut succ = Vec::new();
            for e in events {
                let next = c.observe(&reach, &d, e).expect("feasible");
                if c.is_unsafe(&next) {
                    continue 'decisions;
                }
                succ.push(next);
            }
            for s in &succ {
                if seen.insert(s.clone()) {
                    if seen.len() > budget {
                        return Err(OracleInconclusive { budget });
                    }
                    queue.push_back(s.clone());
                }
            }
            options.push(succ);
        }
        moves.insert(est, options);
    }

    let mut win: BTreeSet<StateEstimate> = seen.iter().filter(|s| m.is_goal(s)).cloned().collect();
    loop {
        let before = win.len();
        for (est, options) in &moves {
            if !win.contains(est)
                && options
                    .iter()
                    .any(|succ| succ.iter().all(|s| win.contains(s)))
            {
                win.insert(est.clone());
            }
        }
        if win.len() == before {
            break;
        }
    }
    Ok(win.contains(&y0.estimate))
}

impl fmt::Display for PruneReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PruneReason::UnsafeReach => write!(f, "unsafe reach"),
            PruneReason::UnsafeSuccessor(_) => write!(f, "unsafe successor"),
            PruneReason::Stall => write!(f, "stall"),
        }
    }
}
