//! Deterministic finite automata, synchronous composition and
//! partial-observation state estimation over a composite plant.
//!
//! Estimates are Cartesian: one subset of states per component, in component
//! order. Correlation between components is not tracked.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

pub type StateId = usize;
pub type EventId = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AutomataError {
    #[error("unknown state `{state}` in automaton `{automaton}`")]
    UnknownState { automaton: String, state: String },
    #[error("unknown event `{event}` in automaton `{automaton}`")]
    UnknownEvent { automaton: String, event: String },
    #[error("duplicate state `{0}`")]
    DuplicateState(String),
    #[error("duplicate event `{0}`")]
    DuplicateEvent(String),
    #[error("event `{0}` is controllable but unobservable")]
    ControllableUnobservable(String),
    #[error("nondeterministic transition from `{state}` on `{event}`")]
    Nondeterministic { state: String, event: String },
    #[error("state `{0}` is both marked and unsafe")]
    UnsafeMarked(String),
    #[error("automaton `{0}` has no initial state")]
    NoInitial(String),
    #[error("event `{0}` has inconsistent attributes across components")]
    AttributeClash(String),
    #[error("malformed estimate: {0}")]
    MalformedEstimate(String),
    #[error("event `{0}` is not feasible at this estimate under this decision")]
    InfeasibleObservation(String),
}

pub type Result<T> = std::result::Result<T, AutomataError>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Event {
    pub name: String,
    pub controllable: bool,
    pub observable: bool,
}

impl Event {
    pub fn new(name: impl Into<String>, controllable: bool, observable: bool) -> Self {
        Event {
            name: name.into(),
            controllable,
            observable,
        }
    }

    pub fn controllable(name: impl Into<String>) -> Self {
        Self::new(name, true, true)
    }

    pub fn uncontrollable(name: impl Into<String>) -> Self {
        Self::new(name, false, true)
    }

    pub fn unobservable(name: impl Into<String>) -> Self {
        Self::new(name, false, false)
    }
}

/// A deterministic automaton with marked and unsafe states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Automaton {
    name: String,
    states: Vec<String>,
    state_index: HashMap<String, StateId>,
    events: Vec<Event>,
    event_index: HashMap<String, EventId>,
    delta: BTreeMap<(StateId, EventId), StateId>,
    initial: Option<StateId>,
    marked: BTreeSet<StateId>,
    unsafe_states: BTreeSet<StateId>,
}

impl Automaton {
    pub fn new(name: impl Into<String>) -> Self {
        Automaton {
            name: name.into(),
            states: Vec::new(),
            state_index: HashMap::new(),
            events: Vec::new(),
            event_index: HashMap::new(),
            delta: BTreeMap::new(),
            initial: None,
            marked: BTreeSet::new(),
            unsafe_states: BTreeSet::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn add_state(&mut self, name: impl Into<String>) -> Result<StateId> {
        let name = name.into();
        if self.state_index.contains_key(&name) {
            return Err(AutomataError::DuplicateState(name));
        }
        let id = self.states.len();
        self.state_index.insert(name.clone(), id);
        self.states.push(name);
        Ok(id)
    }

    pub fn add_event(&mut self, event: Event) -> Result<EventId> {
        if self.event_index.contains_key(&event.name) {
            return Err(AutomataError::DuplicateEvent(event.name));
        }
        if event.controllable && !event.observable {
            return Err(AutomataError::ControllableUnobservable(event.name));
        }
        let id = self.events.len();
        self.event_index.insert(event.name.clone(), id);
        self.events.push(event);
        Ok(id)
    }

    /// Adds `event` unless an event with the same name already exists. The
    /// attributes must match in that case.
    pub fn ensure_event(&mut self, event: Event) -> Result<EventId> {
        match self.event_index.get(&event.name) {
            Some(&id) if self.events[id] == event => Ok(id),
            Some(_) => Err(AutomataError::AttributeClash(event.name)),
            None => self.add_event(event),
        }
    }

    pub fn add_transition(&mut self, from: &str, event: &str, to: &str) -> Result<()> {
        let q = self.state_id(from)?;
        let e = self.event_id(event)?;
        let t = self.state_id(to)?;
        self.add_transition_ids(q, e, t)
    }

    pub fn add_transition_ids(&mut self, from: StateId, event: EventId, to: StateId) -> Result<()> {
        match self.delta.get(&(from, event)) {
            Some(&existing) if existing != to => Err(AutomataError::Nondeterministic {
                state: self.states[from].clone(),
                event: self.events[event].name.clone(),
            }),
            _ => {
                self.delta.insert((from, event), to);
                Ok(())
            }
        }
    }

    pub fn set_initial(&mut self, state: &str) -> Result<()> {
        self.initial = Some(self.state_id(state)?);
        Ok(())
    }

    pub fn mark(&mut self, state: &str) -> Result<()> {
        let q = self.state_id(state)?;
        if self.unsafe_states.contains(&q) {
            return Err(AutomataError::UnsafeMarked(state.to_string()));
        }
        self.marked.insert(q);
        Ok(())
    }

    pub fn mark_all(&mut self) {
        self.marked = (0..self.states.len())
            .filter(|q| !self.unsafe_states.contains(q))
            .collect();
    }

    pub fn set_unsafe(&mut self, state: &str) -> Result<()> {
        let q = self.state_id(state)?;
        if self.marked.contains(&q) {
            return Err(AutomataError::UnsafeMarked(state.to_string()));
        }
        self.unsafe_states.insert(q);
        Ok(())
    }

    /// Checks the structural invariants that the incremental builders cannot
    /// check on their own.
    pub fn validate(&self) -> Result<()> {
        if self.initial.is_none() {
            return Err(AutomataError::NoInitial(self.name.clone()));
        }
        if let Some(q) = self.marked.intersection(&self.unsafe_states).next() {
            return Err(AutomataError::UnsafeMarked(self.states[*q].clone()));
        }
        Ok(())
    }

    pub fn state_id(&self, name: &str) -> Result<StateId> {
        self.state_index
            .get(name)
            .copied()
            .ok_or_else(|| AutomataError::UnknownState {
                automaton: self.name.clone(),
                state: name.to_string(),
            })
    }

    pub fn event_id(&self, name: &str) -> Result<EventId> {
        self.event_index
            .get(name)
            .copied()
            .ok_or_else(|| AutomataError::UnknownEvent {
                automaton: self.name.clone(),
                event: name.to_string(),
            })
    }

    pub fn has_event(&self, name: &str) -> bool {
        self.event_index.contains_key(name)
    }

    pub fn state_name(&self, q: StateId) -> &str {
        &self.states[q]
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn event(&self, e: EventId) -> &Event {
        &self.events[e]
    }

    pub fn initial(&self) -> StateId {
        self.initial
            .expect("validated automaton has an initial state")
    }

    pub fn initial_opt(&self) -> Option<StateId> {
        self.initial
    }

    pub fn marked(&self) -> &BTreeSet<StateId> {
        &self.marked
    }

    pub fn unsafe_states(&self) -> &BTreeSet<StateId> {
        &self.unsafe_states
    }

    pub fn is_marked(&self, q: StateId) -> bool {
        self.marked.contains(&q)
    }

    pub fn is_unsafe(&self, q: StateId) -> bool {
        self.unsafe_states.contains(&q)
    }

    /// All transitions as `(source, event, target)` in ascending order.
    pub fn transitions(&self) -> impl Iterator<Item = (StateId, EventId, StateId)> + '_ {
        self.delta.iter().map(|(&(q, e), &t)| (q, e, t))
    }

    pub fn num_transitions(&self) -> usize {
        self.delta.len()
    }

    pub fn step_id(&self, q: StateId, e: EventId) -> Option<StateId> {
        self.delta.get(&(q, e)).copied()
    }

    /// Transition lookup by name. Unknown names are usage errors; an
    /// undefined transition is `Ok(None)`.
    pub fn step(&self, q: &str, e: &str) -> Result<Option<&str>> {
        let q = self.state_id(q)?;
        let e = self.event_id(e)?;
        Ok(self.step_id(q, e).map(|t| self.state_name(t)))
    }

    pub fn enabled(&self, q: StateId) -> impl Iterator<Item = EventId> + '_ {
        self.delta.range((q, 0)..(q + 1, 0)).map(|(&(_, e), _)| e)
    }

    fn successors(&self, q: StateId) -> impl Iterator<Item = StateId> + '_ {
        self.delta.range((q, 0)..(q + 1, 0)).map(|(_, &t)| t)
    }

    fn accessible(&self) -> BTreeSet<StateId> {
        let mut seen = BTreeSet::new();
        let Some(init) = self.initial else {
            return seen;
        };
        let mut queue = VecDeque::from([init]);
        seen.insert(init);
        while let Some(q) = queue.pop_front() {
            for t in self.successors(q) {
                if seen.insert(t) {
                    queue.push_back(t);
                }
            }
        }
        seen
    }

    fn coaccessible(&self) -> BTreeSet<StateId> {
        let mut preds: Vec<Vec<StateId>> = vec![Vec::new(); self.states.len()];
        for (q, _, t) in self.transitions() {
            preds[t].push(q);
        }
        let mut seen: BTreeSet<StateId> = self.marked.clone();
        let mut queue: VecDeque<StateId> = self.marked.iter().copied().collect();
        while let Some(q) = queue.pop_front() {
            for &p in &preds[q] {
                if seen.insert(p) {
                    queue.push_back(p);
                }
            }
        }
        seen
    }

    /// Restricts the automaton to the given states, keeping names and events.
    fn restrict(&self, keep: &BTreeSet<StateId>) -> Automaton {
        let mut out = Automaton::new(self.name.clone());
        out.events = self.events.clone();
        out.event_index = self.event_index.clone();
        let mut remap = HashMap::new();
        for &q in keep {
            let id = out.add_state(self.states[q].clone()).expect("unique names");
            remap.insert(q, id);
        }
        for (q, e, t) in self.transitions() {
            if let (Some(&q2), Some(&t2)) = (remap.get(&q), remap.get(&t)) {
                out.delta.insert((q2, e), t2);
            }
        }
        out.initial = self.initial.and_then(|q| remap.get(&q).copied());
        out.marked = self
            .marked
            .iter()
            .filter_map(|q| remap.get(q).copied())
            .collect();
        out.unsafe_states = self
            .unsafe_states
            .iter()
            .filter_map(|q| remap.get(q).copied())
            .collect();
        out
    }
}

/// Accessible and coaccessible part of `a`, and whether `a` was nonblocking,
/// i.e. every accessible state can reach a marked state.
pub fn trim_nonblocking(a: &Automaton) -> (Automaton, bool) {
    let acc = a.accessible();
    let coacc = a.coaccessible();
    let keep: BTreeSet<StateId> = acc.intersection(&coacc).copied().collect();
    let nonblocking = keep.len() == acc.len();
    (a.restrict(&keep), nonblocking)
}

/// Merges the alphabets of `components`, checking attribute consistency.
/// Events are numbered in order of first appearance.
fn merged_alphabet(components: &[Automaton]) -> Result<Vec<Event>> {
    let mut events: Vec<Event> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for a in components {
        for ev in a.events() {
            match index.get(ev.name.as_str()) {
                Some(&i) if events[i] != *ev => {
                    return Err(AutomataError::AttributeClash(ev.name.clone()))
                }
                Some(_) => {}
                None => {
                    index.insert(ev.name.as_str(), events.len());
                    events.push(ev.clone());
                }
            }
        }
    }
    Ok(events)
}

/// Synchronous product of `components`: shared events synchronize, private
/// events interleave. Only the accessible part is built. A product state is
/// unsafe if any coordinate is unsafe and marked if every coordinate is.
pub fn sync_product(components: &[Automaton]) -> Result<Automaton> {
    for a in components {
        a.validate()?;
    }
    let events = merged_alphabet(components)?;
    let local: Vec<Vec<Option<EventId>>> = components
        .iter()
        .map(|a| events.iter().map(|ev| a.event_id(&ev.name).ok()).collect())
        .collect();

    let name = components
        .iter()
        .map(Automaton::name)
        .collect::<Vec<_>>()
        .join("||");
    let mut out = Automaton::new(name);
    for ev in &events {
        out.add_event(ev.clone())?;
    }

    let tuple_name = |t: &[StateId]| -> String {
        let parts: Vec<&str> = t
            .iter()
            .zip(components)
            .map(|(&q, a)| a.state_name(q))
            .collect();
        format!("({})", parts.join(","))
    };

    let init: Vec<StateId> = components.iter().map(Automaton::initial).collect();
    let mut ids: HashMap<Vec<StateId>, StateId> = HashMap::new();
    let mut queue = VecDeque::new();
    ids.insert(init.clone(), out.add_state(tuple_name(&init))?);
    queue.push_back(init);

    while let Some(tuple) = queue.pop_front() {
        let src = ids[&tuple];
        'events: for (e, _) in events.iter().enumerate() {
            let mut next = tuple.clone();
            for (i, a) in components.iter().enumerate() {
                if let Some(le) = local[i][e] {
                    match a.step_id(tuple[i], le) {
                        Some(t) => next[i] = t,
                        None => continue 'events,
                    }
                }
            }
            let dst = match ids.get(&next) {
                Some(&id) => id,
                None => {
                    let id = out.add_state(tuple_name(&next))?;
                    ids.insert(next.clone(), id);
                    queue.push_back(next);
                    id
                }
            };
            out.delta.insert((src, e), dst);
        }
    }

    for (tuple, &id) in &ids {
        let unsafe_coord = tuple.iter().zip(components).any(|(&q, a)| a.is_unsafe(q));
        if unsafe_coord {
            out.unsafe_states.insert(id);
        } else if tuple.iter().zip(components).all(|(&q, a)| a.is_marked(q)) {
            out.marked.insert(id);
        }
    }
    out.initial = Some(0);
    Ok(out)
}

/// An ordered list of automata running synchronously, with a merged global
/// alphabet. Global event ids are assigned in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompositeModel {
    components: Vec<Automaton>,
    events: Vec<Event>,
    event_index: HashMap<String, EventId>,
    local: Vec<Vec<Option<EventId>>>,
}

impl CompositeModel {
    pub fn new(components: Vec<Automaton>) -> Result<Self> {
        for a in &components {
            a.validate()?;
        }
        let events = merged_alphabet(&components)?;
        let event_index = events
            .iter()
            .enumerate()
            .map(|(i, ev)| (ev.name.clone(), i))
            .collect();
        let local = components
            .iter()
            .map(|a| events.iter().map(|ev| a.event_id(&ev.name).ok()).collect())
            .collect();
        Ok(CompositeModel {
            components,
            events,
            event_index,
            local,
        })
    }

    pub fn components(&self) -> &[Automaton] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &Automaton {
        &self.components[i]
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn event(&self, e: EventId) -> &Event {
        &self.events[e]
    }

    pub fn event_id(&self, name: &str) -> Result<EventId> {
        self.event_index
            .get(name)
            .copied()
            .ok_or_else(|| AutomataError::UnknownEvent {
                automaton: "composite".into(),
                event: name.to_string(),
            })
    }

    pub fn event_name(&self, e: EventId) -> &str {
        &self.events[e].name
    }

    /// Local id of global event `e` in component `i`, if it belongs there.
    pub fn local_event(&self, i: usize, e: EventId) -> Option<EventId> {
        self.local[i][e]
    }

    pub fn uncontrollable(&self) -> BTreeSet<EventId> {
        (0..self.events.len())
            .filter(|&e| !self.events[e].controllable)
            .collect()
    }

    /// `Σ_uc ∪ controllable`.
    pub fn decision<I: IntoIterator<Item = EventId>>(&self, controllable: I) -> ControlDecision {
        let mut enabled = self.uncontrollable();
        enabled.extend(controllable);
        ControlDecision { enabled }
    }

    /// Decision from controllable event names.
    pub fn decision_named(&self, names: &[&str]) -> Result<ControlDecision> {
        let ids = names
            .iter()
            .map(|n| self.event_id(n))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.decision(ids))
    }

    /// The singleton estimate at every component's initial state.
    pub fn initial_estimate(&self) -> StateEstimate {
        StateEstimate {
            cells: self
                .components
                .iter()
                .map(|a| BTreeSet::from([a.initial()]))
                .collect(),
        }
    }

    /// Builds an estimate from per-component state names.
    pub fn estimate(&self, cells: &[&[&str]]) -> Result<StateEstimate> {
        if cells.len() != self.components.len() {
            return Err(AutomataError::MalformedEstimate(format!(
                "expected {} cells, got {}",
                self.components.len(),
                cells.len()
            )));
        }
        let cells = cells
            .iter()
            .zip(&self.components)
            .map(|(names, a)| names.iter().map(|n| a.state_id(n)).collect())
            .collect::<Result<Vec<BTreeSet<StateId>>>>()?;
        let est = StateEstimate { cells };
        self.check_estimate(&est)?;
        Ok(est)
    }

    pub fn check_estimate(&self, s: &StateEstimate) -> Result<()> {
        if s.cells.len() != self.components.len() {
            return Err(AutomataError::MalformedEstimate(format!(
                "arity {} does not match {} components",
                s.cells.len(),
                self.components.len()
            )));
        }
        for (i, (cell, a)) in s.cells.iter().zip(&self.components).enumerate() {
            if cell.is_empty() {
                return Err(AutomataError::MalformedEstimate(format!(
                    "cell {i} is empty"
                )));
            }
            if let Some(&q) = cell.iter().find(|&&q| q >= a.num_states()) {
                return Err(AutomataError::MalformedEstimate(format!(
                    "cell {i} references state {q} outside `{}`",
                    a.name()
                )));
            }
        }
        Ok(())
    }

    pub fn check_decision(&self, d: &ControlDecision) -> Result<()> {
        if let Some(&e) = d.enabled.iter().find(|&&e| e >= self.events.len()) {
            return Err(AutomataError::MalformedEstimate(format!(
                "decision references unknown event id {e}"
            )));
        }
        Ok(())
    }

    /// Per-component feasibility: every component that knows `e` has some
    /// state in its cell enabling it.
    pub fn event_feasible(&self, s: &StateEstimate, e: EventId) -> bool {
        let mut owned = false;
        for (i, a) in self.components.iter().enumerate() {
            if let Some(le) = self.local[i][e] {
                owned = true;
                if !s.cells[i].iter().any(|&q| a.step_id(q, le).is_some()) {
                    return false;
                }
            }
        }
        owned
    }

    pub fn feasible_controllable(&self, s: &StateEstimate) -> Result<BTreeSet<EventId>> {
        self.check_estimate(s)?;
        Ok((0..self.events.len())
            .filter(|&e| self.events[e].controllable && self.event_feasible(s, e))
            .collect())
    }

    pub fn feasible_observable(
        &self,
        s: &StateEstimate,
        d: &ControlDecision,
    ) -> Result<BTreeSet<EventId>> {
        self.check_estimate(s)?;
        self.check_decision(d)?;
        Ok(d.enabled
            .iter()
            .copied()
            .filter(|&e| self.events[e].observable && self.event_feasible(s, e))
            .collect())
    }

    /// Closure of each cell under the unobservable events enabled by `d`.
    pub fn unobservable_reach(&self, s: &StateEstimate, d: &ControlDecision) -> StateEstimate {
        let silent: Vec<EventId> = d
            .enabled
            .iter()
            .copied()
            .filter(|&e| !self.events[e].observable)
            .collect();
        let cells = self
            .components
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let local: Vec<EventId> = silent.iter().filter_map(|&e| self.local[i][e]).collect();
                let mut cell = s.cells[i].clone();
                if local.is_empty() {
                    return cell;
                }
                let mut stack: Vec<StateId> = cell.iter().copied().collect();
                while let Some(q) = stack.pop() {
                    for &le in &local {
                        if let Some(t) = a.step_id(q, le) {
                            if cell.insert(t) {
                                stack.push(t);
                            }
                        }
                    }
                }
                cell
            })
            .collect();
        StateEstimate { cells }
    }

    /// Refines the estimate by an observed event, then closes it under the
    /// unobservable events of `d`. The event must be feasible.
    pub fn observe(
        &self,
        s: &StateEstimate,
        d: &ControlDecision,
        e: EventId,
    ) -> Result<StateEstimate> {
        self.check_estimate(s)?;
        let ev = self
            .events
            .get(e)
            .ok_or_else(|| AutomataError::UnknownEvent {
                automaton: "composite".into(),
                event: format!("#{e}"),
            })?;
        if !ev.observable || !d.enabled.contains(&e) || !self.event_feasible(s, e) {
            return Err(AutomataError::InfeasibleObservation(ev.name.clone()));
        }
        let cells = self
            .components
            .iter()
            .enumerate()
            .map(|(i, a)| match self.local[i][e] {
                Some(le) => s.cells[i]
                    .iter()
                    .filter_map(|&q| a.step_id(q, le))
                    .collect(),
                None => s.cells[i].clone(),
            })
            .collect();
        Ok(self.unobservable_reach(&StateEstimate { cells }, d))
    }

    /// True if some cell contains an unsafe state of its component.
    pub fn is_unsafe(&self, s: &StateEstimate) -> bool {
        s.cells
            .iter()
            .zip(&self.components)
            .any(|(cell, a)| cell.iter().any(|&q| a.is_unsafe(q)))
    }

    pub fn display<'a>(&'a self, s: &'a StateEstimate) -> EstimateDisplay<'a> {
        EstimateDisplay {
            model: self,
            estimate: s,
        }
    }

    pub fn display_decision<'a>(&'a self, d: &'a ControlDecision) -> DecisionDisplay<'a> {
        DecisionDisplay {
            model: self,
            decision: d,
        }
    }
}

/// Tuple of non-empty per-component state subsets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateEstimate {
    cells: Vec<BTreeSet<StateId>>,
}

impl StateEstimate {
    pub fn from_cells(cells: Vec<BTreeSet<StateId>>) -> Self {
        StateEstimate { cells }
    }

    pub fn cells(&self) -> &[BTreeSet<StateId>] {
        &self.cells
    }

    pub fn cell(&self, i: usize) -> &BTreeSet<StateId> {
        &self.cells[i]
    }

    pub fn with_cell(&self, i: usize, cell: BTreeSet<StateId>) -> StateEstimate {
        let mut cells = self.cells.clone();
        cells[i] = cell;
        StateEstimate { cells }
    }

    /// Component-wise membership of a concrete state tuple.
    pub fn contains(&self, tuple: &[StateId]) -> bool {
        tuple.len() == self.cells.len() && tuple.iter().zip(&self.cells).all(|(q, c)| c.contains(q))
    }

    pub fn is_subset(&self, other: &StateEstimate) -> bool {
        self.cells.len() == other.cells.len()
            && self
                .cells
                .iter()
                .zip(&other.cells)
                .all(|(a, b)| a.is_subset(b))
    }
}

/// The set of events a supervisor enables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ControlDecision {
    pub enabled: BTreeSet<EventId>,
}

impl ControlDecision {
    pub fn contains(&self, e: EventId) -> bool {
        self.enabled.contains(&e)
    }
}

pub struct EstimateDisplay<'a> {
    model: &'a CompositeModel,
    estimate: &'a StateEstimate,
}

impl fmt::Display for EstimateDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, cell) in self.estimate.cells.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            let a = &self.model.components[i];
            let names: Vec<&str> = cell.iter().map(|&q| a.state_name(q)).collect();
            write!(f, "{{{}}}", names.join(","))?;
        }
        write!(f, ")")
    }
}

pub struct DecisionDisplay<'a> {
    model: &'a CompositeModel,
    decision: &'a ControlDecision,
}

impl fmt::Display for DecisionDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let uc = self.model.uncontrollable();
        let ctrl: Vec<&str> = self
            .decision
            .enabled
            .iter()
            .filter(|e| !uc.contains(e))
            .map(|&e| self.model.event_name(e))
            .collect();
        let has_uc = uc.is_subset(&self.decision.enabled);
        match (ctrl.is_empty(), has_uc) {
            (true, true) => write!(f, "Σ_uc"),
            (false, true) => write!(f, "{{{}}}∪Σ_uc", ctrl.join(",")),
            _ => {
                let all: Vec<&str> = self
                    .decision
                    .enabled
                    .iter()
                    .map(|&e| self.model.event_name(e))
                    .collect();
                write!(f, "{{{}}}", all.join(","))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn self_loop(name: &str) -> Automaton {
        let mut a = Automaton::new(name);
        a.add_state("q").unwrap();
        a.add_event(Event::controllable("a")).unwrap();
        a.add_transition("q", "a", "q").unwrap();
        a.set_initial("q").unwrap();
        a.mark_all();
        a
    }

    #[test]
    fn rejects_controllable_unobservable() {
        let mut a = Automaton::new("x");
        assert_eq!(
            a.add_event(Event::new("c", true, false)),
            Err(AutomataError::ControllableUnobservable("c".into()))
        );
    }

    #[test]
    fn rejects_nondeterminism() {
        let mut a = Automaton::new("x");
        a.add_state("p").unwrap();
        a.add_state("q").unwrap();
        a.add_event(Event::controllable("a")).unwrap();
        a.add_transition("p", "a", "p").unwrap();
        assert!(matches!(
            a.add_transition("p", "a", "q"),
            Err(AutomataError::Nondeterministic { .. })
        ));
    }

    #[test]
    fn unsafe_and_marked_are_disjoint() {
        let mut a = Automaton::new("x");
        a.add_state("p").unwrap();
        a.mark("p").unwrap();
        assert!(a.set_unsafe("p").is_err());
    }

    #[test]
    fn step_unknown_names_are_errors() {
        let a = self_loop("x");
        assert_eq!(a.step("q", "a").unwrap(), Some("q"));
        assert!(a.step("nope", "a").is_err());
        assert!(a.step("q", "b").is_err());
    }

    #[test]
    fn product_of_identical_self_loops_is_identity() {
        let p = sync_product(&[self_loop("x"), self_loop("y")]).unwrap();
        assert_eq!(p.num_states(), 1);
        assert_eq!(p.num_transitions(), 1);
        assert_eq!(p.step("(q,q)", "a").unwrap(), Some("(q,q)"));
    }

    #[test]
    fn product_attribute_clash() {
        let mut b = Automaton::new("y");
        b.add_state("q").unwrap();
        b.add_event(Event::uncontrollable("a")).unwrap();
        b.set_initial("q").unwrap();
        assert_eq!(
            sync_product(&[self_loop("x"), b]).unwrap_err(),
            AutomataError::AttributeClash("a".into())
        );
    }

    #[test]
    fn trim_all_marked_is_unchanged() {
        let a = self_loop("x");
        let (t, ok) = trim_nonblocking(&a);
        assert!(ok);
        assert_eq!(t, a);
    }

    #[test]
    fn trim_chain_with_unmarked_tail() {
        let mut a = Automaton::new("chain");
        a.add_state("q0").unwrap();
        a.add_state("q1").unwrap();
        a.add_event(Event::controllable("a")).unwrap();
        a.add_transition("q0", "a", "q1").unwrap();
        a.set_initial("q0").unwrap();
        a.mark("q0").unwrap();
        let (t, ok) = trim_nonblocking(&a);
        assert!(!ok);
        assert_eq!(t.states(), &["q0".to_string()]);
        assert_eq!(t.num_transitions(), 0);
    }

    #[test]
    fn observe_rejects_infeasible_event() {
        let m = CompositeModel::new(vec![self_loop("x")]).unwrap();
        let s = m.initial_estimate();
        let none = m.decision([]);
        let a = m.event_id("a").unwrap();
        assert!(matches!(
            m.observe(&s, &none, a),
            Err(AutomataError::InfeasibleObservation(_))
        ));
    }

    #[test]
    fn malformed_estimates_are_rejected() {
        let m = CompositeModel::new(vec![self_loop("x")]).unwrap();
        let empty = StateEstimate::from_cells(vec![BTreeSet::new()]);
        assert!(m.feasible_controllable(&empty).is_err());
        let wrong_arity = StateEstimate::from_cells(vec![]);
        assert!(m.feasible_controllable(&wrong_arity).is_err());
        let out_of_range = StateEstimate::from_cells(vec![BTreeSet::from([7])]);
        assert!(m.feasible_controllable(&out_of_range).is_err());
    }
}
