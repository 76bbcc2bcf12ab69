//! Discrete-time closed-loop swarm simulator.
//!
//! The continuous layer is replaced by fixed action durations: a search,
//! a move, a return and a nominal sub-zone step each take a configured time,
//! and the plant emits the corresponding event when the action completes.
//! Detections (border found, re-entry into the operational region) follow
//! one tick after the action that caused them.
//!
//! The swarm patrols the operational region in lock-step. At most one drone
//! is in recovery at a time.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::automata::{Automaton, EventId, StateEstimate, StateId};
use crate::mission::{
    Direction, GridMap, MissionModel, ModelError, SubZone, Zone, DESYNC, EXPLORE, LOSS, NAV,
    REGROUP, RETURN, SCAN,
};
use crate::rbts::{
    build_rbts, extract_supervisor, initial_y, InitialY, RecoverySupervisor, RuntimeStatus,
    SupervisorRuntime, SynthConfig, SynthError,
};
use crate::trace::{Mode, TraceRecord};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("simulator invariant violated at t={time:.6}: {msg}")]
    Invariant { time: f64, msg: String },
    #[error("usage error: {0}")]
    Usage(String),
    #[error(transparent)]
    Synthesis(#[from] SynthError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Action durations in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Durations {
    pub search: f64,
    pub moves: f64,
    pub ret: f64,
    pub inner: f64,
}

impl Default for Durations {
    fn default() -> Self {
        Durations {
            search: 2.0,
            moves: 6.0,
            ret: 2.0,
            inner: 4.0,
        }
    }
}

impl Durations {
    pub fn uniform(secs: f64) -> Self {
        Durations {
            search: secs,
            moves: secs,
            ret: secs,
            inner: secs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossPolicy {
    Never,
    Always,
    /// The loss fires with this probability on each tick spent in an unsafe
    /// zone.
    Probability(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSpec {
    pub estimate: Vec<Zone>,
    pub start: Zone,
    /// Drone to fault; drawn from the seed when absent.
    pub drone: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub map: GridMap,
    pub n_drones: usize,
    pub tick_period: f64,
    pub durations: Durations,
    pub loss_policy: LossPolicy,
    pub seed: u64,
    pub trial: TrialSpec,
    pub synth: SynthConfig,
    /// Hard cap on simulated ticks for one trial.
    pub tick_budget: u64,
    /// How long a stalled drone is observed before the run ends, seconds.
    pub stall_window: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            map: GridMap::default(),
            n_drones: 10,
            tick_period: 1.0 / 240.0,
            durations: Durations::default(),
            loss_policy: LossPolicy::Never,
            seed: 0,
            trial: TrialSpec {
                estimate: vec![1, 2],
                start: 1,
                drone: None,
            },
            synth: SynthConfig::default(),
            tick_budget: 50_000_000,
            stall_window: 60.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let cfg = |m: &str| Err(SimError::Config(m.to_string()));
        if self.n_drones == 0 {
            return cfg("at least one drone is required");
        }
        if !(self.tick_period > 0.0 && self.tick_period.is_finite()) {
            return cfg("tick period must be positive");
        }
        let d = self.durations;
        if [d.search, d.moves, d.ret, d.inner]
            .iter()
            .any(|&x| !(x > 0.0 && x.is_finite()))
        {
            return cfg("durations must be positive");
        }
        if let LossPolicy::Probability(p) = self.loss_policy {
            if !(0.0..=1.0).contains(&p) {
                return cfg("loss probability must lie in [0, 1]");
            }
        }
        if self.stall_window < 0.0 {
            return cfg("stall window must be non-negative");
        }
        if let Some(id) = self.trial.drone {
            if id >= self.n_drones {
                return Err(SimError::Config(format!("drone {id} does not exist")));
            }
        }
        Ok(())
    }

    fn ticks(&self, secs: f64) -> u64 {
        ((secs / self.tick_period).round() as u64).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroneState {
    pub id: usize,
    pub mode: Mode,
    /// Set when recovery found no solution; the drone never moves again.
    pub stalled: bool,
    /// Navigation state (zone, border state or no-fly sink).
    pub true_zone: StateId,
    /// Sub-zone inside the operational region; `None` while unknown.
    pub true_inner: Option<SubZone>,
    pub exploration: StateId,
    pub scanning: StateId,
    /// Map units, x east and y south; the centre of the current cell or
    /// sub-zone slot.
    pub position: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Running,
    /// Rejoined the swarm and completed one nominal step with it.
    Regrouped,
    Stalled,
    SafetyViolation,
    Timeout,
}

#[derive(Debug, Clone)]
enum Pending {
    Plant(EventId),
    Secondary(String),
}

#[derive(Debug)]
struct Lost<'m> {
    id: usize,
    runtime: Option<SupervisorRuntime<'m>>,
    initial_estimate: StateEstimate,
    recoverable: bool,
    pending: Option<(Pending, u64)>,
    action_start: u64,
    secondary_state: StateId,
    mode_state: StateId,
    fault_tick: u64,
    reentry_tick: Option<u64>,
    regroup_tick: Option<u64>,
    moves: Vec<String>,
    zones: BTreeMap<String, usize>,
    modes: Vec<Mode>,
    heading: Option<Direction>,
    controllable_events: usize,
}

#[derive(Debug)]
struct Swarm {
    subzone: SubZone,
    loop_state: StateId,
    next_step: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub estimate: Vec<Zone>,
    pub start: Zone,
    pub lost_drone: usize,
    pub recoverable: bool,
    pub outcome: Outcome,
    pub move_sequence: Vec<String>,
    pub trace: Vec<TraceRecord>,
    /// Fault injection to re-entry detection.
    pub primary_recovery_time: Option<f64>,
    /// Re-entry detection to regrouping.
    pub secondary_recovery_time: Option<f64>,
    /// Navigation states occupied by the lost drone, with multiplicity.
    pub zones_visited: BTreeMap<String, usize>,
    pub modes: Vec<Mode>,
    /// Ticks at which estimate soundness was checked.
    pub soundness_checks: u64,
    /// Controllable events executed by the lost drone after the fault.
    pub controllable_after_fault: usize,
}

pub struct Simulation<'m> {
    model: &'m MissionModel,
    cfg: SimConfig,
    nominal_loop: Automaton,
    tick: u64,
    drones: Vec<DroneState>,
    swarm: Swarm,
    lost: Option<Lost<'m>>,
    rng: ChaCha8Rng,
    trace: Vec<TraceRecord>,
    outcome: Outcome,
    rejoined: bool,
    soundness_checks: u64,
}

impl<'m> Simulation<'m> {
    /// All drones start nominal, evenly spread over the base sub-zone.
    pub fn new(model: &'m MissionModel, cfg: SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        if cfg.map != *model.map() {
            return Err(SimError::Config(
                "configuration map differs from the model map".into(),
            ));
        }
        let nominal_loop = model
            .nominal_loop()
            .map_err(|e| SimError::Config(e.to_string()))?;
        let base = model.map().base_subzone();
        let signal = nominal_loop
            .event_id(&base.signal_event())
            .map_err(|e| SimError::Config(e.to_string()))?;
        let loop_state = nominal_loop
            .step_id(nominal_loop.initial(), signal)
            .ok_or_else(|| SimError::Config("nominal loop cannot resolve the base".into()))?;

        let c = model.composite();
        let or_state = model.zone_state(model.map().or_zone())?;
        let mut drones = Vec::with_capacity(cfg.n_drones);
        for id in 0..cfg.n_drones {
            drones.push(DroneState {
                id,
                mode: Mode::Nom,
                stalled: false,
                true_zone: or_state,
                true_inner: Some(base),
                exploration: c.component(EXPLORE).initial(),
                scanning: c.component(SCAN).initial(),
                position: (0.0, 0.0),
            });
        }
        let inner_ticks = cfg.ticks(cfg.durations.inner);
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut sim = Simulation {
            model,
            cfg,
            nominal_loop,
            tick: 0,
            drones,
            swarm: Swarm {
                subzone: base,
                loop_state,
                next_step: inner_ticks,
            },
            lost: None,
            rng,
            trace: Vec::new(),
            outcome: Outcome::Running,
            rejoined: false,
            soundness_checks: 0,
        };
        for id in 0..sim.drones.len() {
            sim.drones[id].position = sim.slot_position(id, base);
        }
        Ok(sim)
    }

    pub fn drones(&self) -> &[DroneState] {
        &self.drones
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.cfg.tick_period
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn outcome(&self) -> Outcome {
        self.outcome
    }

    pub fn swarm_subzone(&self) -> SubZone {
        self.swarm.subzone
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// Current position of a drone; interpolated linearly between cell
    /// centres while a move is under way.
    pub fn position(&self, id: usize) -> (f64, f64) {
        let rest = self.drones[id].position;
        let Some(lost) = self.lost.as_ref().filter(|l| l.id == id) else {
            return rest;
        };
        let Some((Pending::Plant(e), due)) = &lost.pending else {
            return rest;
        };
        if !self.model.move_events().contains(e) {
            return rest;
        }
        let Some(next) = self.model.tuple_step(&self.lost_tuple(id), *e) else {
            return rest;
        };
        let to = self.zone_position(next[NAV]);
        let span = (due - lost.action_start) as f64;
        let k = ((self.tick - lost.action_start) as f64 / span).clamp(0.0, 1.0);
        (rest.0 + k * (to.0 - rest.0), rest.1 + k * (to.1 - rest.1))
    }

    /// Draws a drone id from the simulation's random stream.
    pub fn pick_drone(&mut self) -> usize {
        self.rng.gen_range(0..self.drones.len())
    }

    /// Runtime estimate of the lost drone as a state estimate.
    pub fn lost_state_estimate(&self) -> Option<&StateEstimate> {
        let lost = self.lost.as_ref()?;
        Some(match &lost.runtime {
            Some(rt) => rt.estimate(),
            None => &lost.initial_estimate,
        })
    }

    /// Id of the drone in recovery.
    pub fn lost_drone(&self) -> Option<usize> {
        self.lost.as_ref().map(|l| l.id)
    }

    /// Runtime estimate of the lost drone, if one is in recovery.
    pub fn lost_estimate(&self) -> Option<String> {
        let est = self.lost_state_estimate()?;
        Some(self.model.composite().display(est).to_string())
    }

    fn slot_position(&self, id: usize, z: SubZone) -> (f64, f64) {
        let (cx, cy) = self.model.map().center(self.model.map().or_zone());
        let (ox, oy) = z.offset();
        let n = self.drones.len() as f64;
        let x = cx - 0.5 + ox - 0.25 + 0.5 * (id as f64 + 1.0) / (n + 1.0);
        (x, cy - 0.5 + oy)
    }

    fn zone_position(&self, q: StateId) -> (f64, f64) {
        let map = self.model.map();
        match self.model.state_zone(q) {
            Some(z) => map.center(z),
            None => map.center(map.or_zone()),
        }
    }

    fn record(&mut self, drone: usize, event: &str) {
        let mode = self.drones[drone].mode;
        let estimate = if mode == Mode::Nom {
            None
        } else {
            self.lost_estimate()
        };
        self.trace.push(TraceRecord {
            time: self.time(),
            drone,
            event: event.to_string(),
            mode,
            estimate,
        });
    }

    fn invariant(&self, msg: impl Into<String>) -> SimError {
        SimError::Invariant {
            time: self.time(),
            msg: msg.into(),
        }
    }

    fn switch_mode(&mut self, event: &str) -> Result<(), SimError> {
        let switcher = self.model.mode_switcher();
        let lost = self.lost.as_mut().expect("mode switch needs a lost drone");
        let e = switcher
            .event_id(event)
            .map_err(|e| SimError::Config(e.to_string()))?;
        let next = switcher
            .step_id(lost.mode_state, e)
            .ok_or_else(|| SimError::Invariant {
                time: self.tick as f64 * self.cfg.tick_period,
                msg: format!("mode switcher rejects `{event}`"),
            })?;
        lost.mode_state = next;
        let mode: Mode = switcher
            .state_name(next)
            .parse()
            .map_err(|_| SimError::Config("unexpected mode state".into()))?;
        lost.modes.push(mode);
        let id = lost.id;
        self.drones[id].mode = mode;
        Ok(())
    }

    /// Relocates `drone` to `true_zone`, switches it to primary recovery and
    /// synthesizes its supervisor from `estimate`. An unrecoverable estimate
    /// leaves the drone stalled.
    pub fn inject_fault(
        &mut self,
        drone: usize,
        true_zone: Zone,
        estimate: &[Zone],
    ) -> Result<(), SimError> {
        self.check_fault(drone, true_zone, estimate)?;
        let plan = plan_recovery(self.model, estimate, &self.cfg.synth)?;
        self.inject_planned(drone, true_zone, estimate, plan)
    }

    /// As [`Simulation::inject_fault`] with a precomputed recovery plan for
    /// `estimate`.
    pub fn inject_planned(
        &mut self,
        drone: usize,
        true_zone: Zone,
        estimate: &[Zone],
        plan: Recovery,
    ) -> Result<(), SimError> {
        self.check_fault(drone, true_zone, estimate)?;
        let model = self.model;
        let tuple = model.relocated(true_zone)?;
        let raw = model.zone_estimate(estimate)?;
        let closed = match initial_y(model, &raw).map_err(ModelError::from)? {
            InitialY::Ready(y) => y.estimate,
            InitialY::UnsafeAtStart(s) => s,
        };
        let (runtime, recoverable) = match plan {
            Recovery::Unrecoverable => (None, false),
            Recovery::Supervised(sup) => {
                if sup.initial() != &closed {
                    return Err(SimError::Contract(
                        "plan was built for another estimate".into(),
                    ));
                }
                let rt = SupervisorRuntime::start(sup, model).map_err(|e| SimError::Invariant {
                    time: self.time(),
                    msg: e.to_string(),
                })?;
                (Some(rt), true)
            }
        };

        let mut zones = BTreeMap::new();
        zones.insert(model.navigation().state_name(tuple[NAV]).to_string(), 1);
        self.lost = Some(Lost {
            id: drone,
            runtime,
            initial_estimate: closed,
            recoverable,
            pending: None,
            action_start: self.tick,
            secondary_state: model.secondary_supervisor().initial(),
            mode_state: model.mode_switcher().initial(),
            fault_tick: self.tick,
            reentry_tick: None,
            regroup_tick: None,
            moves: Vec::new(),
            zones,
            modes: vec![Mode::Nom],
            heading: None,
            controllable_events: 0,
        });
        let d = &mut self.drones[drone];
        d.true_zone = tuple[NAV];
        d.exploration = tuple[EXPLORE];
        d.scanning = tuple[SCAN];
        d.true_inner = None;
        d.stalled = !recoverable;
        self.drones[drone].position = self.zone_position(tuple[NAV]);
        self.switch_mode(DESYNC)?;
        self.record(drone, DESYNC);
        self.schedule_plant()?;
        self.check_soundness()?;
        Ok(())
    }

    fn check_fault(
        &self,
        drone: usize,
        true_zone: Zone,
        estimate: &[Zone],
    ) -> Result<(), SimError> {
        if drone >= self.drones.len() {
            return Err(SimError::Contract(format!("drone {drone} does not exist")));
        }
        if self.lost.is_some() {
            return Err(SimError::Contract(
                "another drone is already in recovery".into(),
            ));
        }
        if self.drones[drone].mode != Mode::Nom {
            return Err(SimError::Contract(format!("drone {drone} is not nominal")));
        }
        if !estimate.contains(&true_zone) {
            return Err(SimError::Contract(format!(
                "true zone {true_zone} is outside the estimate {estimate:?}"
            )));
        }
        Ok(())
    }

    fn lost_tuple(&self, id: usize) -> Vec<StateId> {
        let d = &self.drones[id];
        vec![d.true_zone, d.exploration, d.scanning]
    }

    /// Picks the next plant action of the lost drone in primary recovery.
    fn schedule_plant(&mut self) -> Result<(), SimError> {
        let Some(lost) = self.lost.as_ref() else {
            return Ok(());
        };
        let Some(rt) = lost.runtime.as_ref() else {
            return Ok(());
        };
        if lost.pending.is_some() || self.drones[lost.id].mode != Mode::Rec1 {
            return Ok(());
        }
        let Some(d) = rt.decision() else {
            return Ok(());
        };
        let tuple = self.lost_tuple(lost.id);
        let e = self
            .model
            .plant_choice(&tuple, d)
            .ok_or_else(|| self.invariant("plant has no enabled event under the decision"))?;
        let c = self.model.composite();
        let ev = c.event(e);
        let dur = if !ev.controllable {
            1
        } else if ev.name.starts_with("m_") {
            self.cfg.ticks(self.cfg.durations.moves)
        } else if ev.name == RETURN {
            self.cfg.ticks(self.cfg.durations.ret)
        } else {
            self.cfg.ticks(self.cfg.durations.search)
        };
        let due = self.tick + dur;
        let lost = self.lost.as_mut().unwrap();
        lost.pending = Some((Pending::Plant(e), due));
        lost.action_start = self.tick;
        Ok(())
    }

    fn fire_plant(&mut self, e: EventId) -> Result<(), SimError> {
        let model = self.model;
        let c = model.composite();
        let id = self.lost.as_ref().unwrap().id;
        let tuple = self.lost_tuple(id);
        let name = c.event_name(e).to_string();
        {
            let rt = self.lost.as_ref().unwrap().runtime.as_ref().unwrap();
            if !rt.decision().is_some_and(|d| d.contains(e)) {
                return Err(self.invariant(format!("plant emitted `{name}` outside the decision")));
            }
        }
        let next = model
            .tuple_step(&tuple, e)
            .ok_or_else(|| self.invariant(format!("`{name}` is not enabled in the plant")))?;
        {
            let d = &mut self.drones[id];
            d.true_zone = next[NAV];
            d.exploration = next[EXPLORE];
            d.scanning = next[SCAN];
        }
        let lost = self.lost.as_mut().unwrap();
        if c.event(e).controllable {
            lost.controllable_events += 1;
        }
        if let Some(dir) = name.strip_prefix("m_").and_then(Direction::from_suffix) {
            lost.moves.push(name.clone());
            lost.heading = Some(dir);
            *lost
                .zones
                .entry(model.navigation().state_name(next[NAV]).to_string())
                .or_insert(0) += 1;
            self.drones[id].position = self.zone_position(next[NAV]);
        }
        let status = self
            .lost
            .as_mut()
            .unwrap()
            .runtime
            .as_mut()
            .unwrap()
            .step(e)
            .map_err(|err| SimError::Invariant {
                time: self.tick as f64 * self.cfg.tick_period,
                msg: err.to_string(),
            })?;
        if status == RuntimeStatus::GoalReached {
            self.switch_mode(&name)?;
            self.record(id, &name);
            self.enter_region()?;
        } else {
            self.record(id, &name);
        }
        Ok(())
    }

    /// Re-entry detected: resolve the sub-zone and start regrouping.
    fn enter_region(&mut self) -> Result<(), SimError> {
        let model = self.model;
        let lost = self.lost.as_mut().unwrap();
        lost.reentry_tick = Some(self.tick);
        let id = lost.id;
        let heading = lost.heading.unwrap_or(Direction::South);
        let sub = SubZone::entered_from(heading);
        let inner = model.inner();
        let signal = sub.signal_event();
        let ok = inner
            .step(inner.state_name(inner.initial()), &signal)
            .ok()
            .flatten()
            .is_some();
        if !ok {
            return Err(self.invariant(format!("G_O rejects `{signal}`")));
        }
        let or_state = model.zone_state(model.map().or_zone())?;
        let d = &mut self.drones[id];
        d.true_zone = or_state;
        d.true_inner = Some(sub);
        self.drones[id].position = self.slot_position(id, sub);
        self.record(id, &signal);
        let due = self.tick + self.cfg.ticks(self.cfg.durations.search);
        self.lost.as_mut().unwrap().pending =
            Some((Pending::Secondary(model.map().or_search_event()), due));
        Ok(())
    }

    fn fire_secondary(&mut self, event: String) -> Result<(), SimError> {
        let model = self.model;
        let sec = model.secondary_supervisor();
        let lost = self.lost.as_mut().unwrap();
        let e = sec
            .event_id(&event)
            .map_err(|e| SimError::Config(e.to_string()))?;
        let next = sec
            .step_id(lost.secondary_state, e)
            .ok_or_else(|| SimError::Invariant {
                time: self.tick as f64 * self.cfg.tick_period,
                msg: format!("secondary supervisor rejects `{event}`"),
            })?;
        lost.secondary_state = next;
        lost.controllable_events += 1;
        let id = lost.id;
        self.record(id, &event);
        // alternate search and return
        let follow = if event == RETURN {
            (model.map().or_search_event(), self.cfg.durations.search)
        } else {
            (RETURN.to_string(), self.cfg.durations.ret)
        };
        let due = self.tick + self.cfg.ticks(follow.1);
        self.lost.as_mut().unwrap().pending = Some((Pending::Secondary(follow.0), due));
        Ok(())
    }

    fn step_swarm(&mut self) -> Result<(), SimError> {
        let next = self.swarm.subzone.next();
        let search = self.model.map().or_search_event();
        let events = [search, next.observe_event(), next.move_event()];
        for ev in &events {
            let e = self
                .nominal_loop
                .event_id(ev)
                .map_err(|e| SimError::Config(e.to_string()))?;
            self.swarm.loop_state = self
                .nominal_loop
                .step_id(self.swarm.loop_state, e)
                .ok_or_else(|| self.invariant(format!("nominal loop rejects `{ev}`")))?;
        }
        self.swarm.subzone = next;
        self.swarm.next_step = self.tick + self.cfg.ticks(self.cfg.durations.inner);
        let members: Vec<usize> = self
            .drones
            .iter()
            .filter(|d| d.mode == Mode::Nom)
            .map(|d| d.id)
            .collect();
        for &id in &members {
            for ev in &events {
                self.record(id, ev);
            }
            self.drones[id].true_inner = Some(next);
            self.drones[id].position = self.slot_position(id, next);
        }
        if self.rejoined {
            let id = self.lost.as_ref().unwrap().id;
            if members.contains(&id) {
                self.outcome = Outcome::Regrouped;
            }
        }
        Ok(())
    }

    /// In regrouping mode, checks whether the swarm has reached the lost
    /// drone's sub-zone and, if so, emits `regroup` and returns it to
    /// nominal operation in phase with the swarm.
    pub fn regroup_check(&mut self, drone: usize) -> Result<bool, SimError> {
        let lost_id = self.lost.as_ref().map(|l| l.id);
        if lost_id != Some(drone) || self.drones[drone].mode != Mode::Rec2 {
            return Err(SimError::Usage(format!("drone {drone} is not regrouping")));
        }
        if self.drones[drone].true_inner != Some(self.swarm.subzone) {
            return Ok(false);
        }
        self.switch_mode(REGROUP)?;
        let lost = self.lost.as_mut().unwrap();
        lost.pending = None;
        lost.regroup_tick = Some(self.tick);
        self.rejoined = true;
        self.drones[drone].position = self.slot_position(drone, self.swarm.subzone);
        self.record(drone, REGROUP);
        Ok(true)
    }

    fn apply_loss_policy(&mut self) -> Result<(), SimError> {
        let Some(lost) = self.lost.as_ref() else {
            return Ok(());
        };
        let id = lost.id;
        if self.drones[id].mode != Mode::Rec1 {
            return Ok(());
        }
        let zone = self.model.state_zone(self.drones[id].true_zone);
        if !zone.is_some_and(|z| self.model.map().unsafe_zones().contains(&z)) {
            return Ok(());
        }
        let fire = match self.cfg.loss_policy {
            LossPolicy::Never => false,
            LossPolicy::Always => true,
            LossPolicy::Probability(p) => self.rng.gen_bool(p),
        };
        if fire {
            let nav = self.model.navigation();
            let l = nav
                .event_id(LOSS)
                .map_err(|e| SimError::Config(e.to_string()))?;
            let sink = nav
                .step_id(self.drones[id].true_zone, l)
                .ok_or_else(|| self.invariant("unsafe zone without a loss transition"))?;
            self.drones[id].true_zone = sink;
            self.lost.as_mut().unwrap().pending = None;
            self.record(id, LOSS);
            self.outcome = Outcome::SafetyViolation;
        }
        Ok(())
    }

    fn check_soundness(&mut self) -> Result<(), SimError> {
        let (Some(id), Some(est)) = (self.lost_drone(), self.lost_state_estimate()) else {
            return Ok(());
        };
        if self.drones[id].mode != Mode::Rec1 {
            return Ok(());
        }
        if !est.contains(&self.lost_tuple(id)) {
            return Err(self.invariant("estimate no longer contains the true state"));
        }
        self.soundness_checks += 1;
        Ok(())
    }

    fn needs_every_tick(&self) -> bool {
        let Some(lost) = self.lost.as_ref() else {
            return false;
        };
        self.cfg.loss_policy != LossPolicy::Never
            && self.drones[lost.id].mode == Mode::Rec1
            && self
                .model
                .state_zone(self.drones[lost.id].true_zone)
                .is_some_and(|z| self.model.map().unsafe_zones().contains(&z))
    }

    /// Advances one control period and returns the records emitted in it.
    pub fn tick(&mut self) -> Result<Vec<TraceRecord>, SimError> {
        if self.outcome != Outcome::Running {
            return Ok(Vec::new());
        }
        let start = self.trace.len();
        self.tick += 1;

        if self.tick >= self.swarm.next_step {
            self.step_swarm()?;
        }

        let due = self
            .lost
            .as_ref()
            .and_then(|l| l.pending.as_ref())
            .filter(|(_, due)| *due <= self.tick)
            .map(|(p, _)| p.clone());
        if let Some(p) = due {
            self.lost.as_mut().unwrap().pending = None;
            match p {
                Pending::Plant(e) => {
                    self.fire_plant(e)?;
                    self.schedule_plant()?;
                }
                Pending::Secondary(ev) => self.fire_secondary(ev)?,
            }
        }

        self.apply_loss_policy()?;
        self.check_soundness()?;
        if let Some(id) = self.lost.as_ref().map(|l| l.id) {
            if self.drones[id].mode == Mode::Rec2 {
                self.regroup_check(id)?;
            }
        }
        Ok(self.trace[start..].to_vec())
    }

    /// Skips ticks in which nothing can happen, then runs one tick. The
    /// result is identical to calling [`Simulation::tick`] repeatedly.
    pub fn advance(&mut self) -> Result<(), SimError> {
        if self.outcome != Outcome::Running {
            return Ok(());
        }
        if !self.needs_every_tick() {
            let mut next = self.swarm.next_step;
            if let Some((_, due)) = self.lost.as_ref().and_then(|l| l.pending.as_ref()) {
                next = next.min(*due);
            }
            if next > self.tick + 1 {
                self.tick = next - 1;
            }
        }
        self.tick()?;
        Ok(())
    }

    fn report(&self, trial: &TrialSpec) -> TrialReport {
        let lost = self.lost.as_ref().expect("report needs an injected fault");
        let period = self.cfg.tick_period;
        let secs = |t: u64| t as f64 * period;
        TrialReport {
            estimate: trial.estimate.clone(),
            start: trial.start,
            lost_drone: lost.id,
            recoverable: lost.recoverable,
            outcome: self.outcome,
            move_sequence: lost.moves.clone(),
            trace: self.trace.clone(),
            primary_recovery_time: lost.reentry_tick.map(|t| secs(t - lost.fault_tick)),
            secondary_recovery_time: lost
                .reentry_tick
                .zip(lost.regroup_tick)
                .map(|(a, b)| secs(b - a)),
            zones_visited: lost.zones.clone(),
            modes: lost.modes.clone(),
            soundness_checks: self.soundness_checks,
            controllable_after_fault: lost.controllable_events,
        }
    }
}

/// Runs one fault-and-recovery trial to completion: regrouping, a stall
/// verdict, a safety violation, or the tick budget.
pub fn run_trial(cfg: &SimConfig) -> Result<TrialReport, SimError> {
    let model = MissionModel::new(cfg.map.clone());
    run_trial_with(&model, cfg)
}

pub fn run_trial_with(model: &MissionModel, cfg: &SimConfig) -> Result<TrialReport, SimError> {
    let plan = plan_recovery(model, &cfg.trial.estimate, &cfg.synth)?;
    run_trial_planned(model, cfg, plan)
}

/// Synthesis result for a fault with zone estimate `estimate`.
#[derive(Debug, Clone, PartialEq)]
pub enum Recovery {
    Supervised(RecoverySupervisor),
    Unrecoverable,
}

pub fn plan_recovery(
    model: &MissionModel,
    estimate: &[Zone],
    synth: &SynthConfig,
) -> Result<Recovery, SimError> {
    let raw = model.zone_estimate(estimate)?;
    match initial_y(model, &raw).map_err(ModelError::from)? {
        InitialY::UnsafeAtStart(_) => Ok(Recovery::Unrecoverable),
        InitialY::Ready(y) => {
            let t = build_rbts(model, &y, synth)?;
            if t.recoverable() {
                Ok(Recovery::Supervised(extract_supervisor(&t)?))
            } else {
                Ok(Recovery::Unrecoverable)
            }
        }
    }
}

/// Runs a trial whose supervisor was synthesized beforehand.
pub fn run_trial_planned(
    model: &MissionModel,
    cfg: &SimConfig,
    plan: Recovery,
) -> Result<TrialReport, SimError> {
    let mut sim = Simulation::new(model, cfg.clone())?;
    let drone = match cfg.trial.drone {
        Some(id) => id,
        None => sim.pick_drone(),
    };
    sim.inject_planned(drone, cfg.trial.start, &cfg.trial.estimate, plan)?;
    let stall_end = sim.tick + cfg.ticks(cfg.stall_window);
    loop {
        if sim.outcome != Outcome::Running {
            break;
        }
        if sim.drones[drone].stalled && sim.tick >= stall_end {
            sim.outcome = Outcome::Stalled;
            break;
        }
        if sim.tick >= cfg.tick_budget {
            sim.outcome = Outcome::Timeout;
            break;
        }
        sim.advance()?;
    }
    Ok(sim.report(&cfg.trial))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial(estimate: &[Zone], start: Zone) -> SimConfig {
        SimConfig {
            trial: TrialSpec {
                estimate: estimate.to_vec(),
                start,
                drone: Some(3),
            },
            ..SimConfig::default()
        }
    }

    #[test]
    fn init_spreads_drones_over_base() {
        let m = MissionModel::default();
        let sim = Simulation::new(&m, SimConfig::default()).unwrap();
        assert_eq!(sim.drones().len(), 10);
        let (cx, cy) = m.map().center(13);
        for d in sim.drones() {
            assert_eq!(d.mode, Mode::Nom);
            assert_eq!(d.true_inner, Some(SubZone::A));
            // inside the north-west quadrant of zone 13
            assert!(d.position.0 > cx - 0.5 && d.position.0 < cx);
            assert!(d.position.1 > cy - 0.5 && d.position.1 < cy);
        }
        let xs: Vec<f64> = sim.drones().iter().map(|d| d.position.0).collect();
        assert!(xs.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn single_drone_swarm() {
        let m = MissionModel::default();
        let cfg = SimConfig {
            n_drones: 1,
            ..SimConfig::default()
        };
        assert_eq!(Simulation::new(&m, cfg).unwrap().drones().len(), 1);
    }

    #[test]
    fn invalid_configs() {
        let m = MissionModel::default();
        let bad = [
            SimConfig {
                n_drones: 0,
                ..SimConfig::default()
            },
            SimConfig {
                tick_period: 0.0,
                ..SimConfig::default()
            },
            SimConfig {
                durations: Durations::uniform(-1.0),
                ..SimConfig::default()
            },
            SimConfig {
                loss_policy: LossPolicy::Probability(1.5),
                ..SimConfig::default()
            },
        ];
        for cfg in bad {
            assert!(matches!(Simulation::new(&m, cfg), Err(SimError::Config(_))));
        }
    }

    #[test]
    fn fault_outside_estimate_is_a_contract_violation() {
        let m = MissionModel::default();
        let mut sim = Simulation::new(&m, SimConfig::default()).unwrap();
        assert!(matches!(
            sim.inject_fault(3, 9, &[1, 2]),
            Err(SimError::Contract(_))
        ));
    }

    #[test]
    fn only_one_drone_recovers_at_a_time() {
        let m = MissionModel::default();
        let mut sim = Simulation::new(&m, SimConfig::default()).unwrap();
        sim.inject_fault(3, 1, &[1, 2]).unwrap();
        assert!(matches!(
            sim.inject_fault(4, 1, &[1, 2]),
            Err(SimError::Contract(_))
        ));
    }

    #[test]
    fn recoverable_fault_enters_primary_recovery() {
        let m = MissionModel::default();
        let mut sim = Simulation::new(&m, SimConfig::default()).unwrap();
        sim.inject_fault(3, 1, &[1, 2]).unwrap();
        let d = &sim.drones()[3];
        assert_eq!(d.mode, Mode::Rec1);
        assert!(!d.stalled);
        assert_eq!(sim.lost_estimate().unwrap(), "({1,2},{R},{I})");
    }

    #[test]
    fn unrecoverable_fault_stalls() {
        let m = MissionModel::default();
        let mut sim = Simulation::new(&m, SimConfig::default()).unwrap();
        sim.inject_fault(3, 2, &[1, 2, 3, 4, 5]).unwrap();
        assert!(sim.drones()[3].stalled);
        assert_eq!(sim.drones()[3].mode, Mode::Rec1);
    }

    #[test]
    fn first_actions_of_trial_one() {
        let m = MissionModel::default();
        let cfg = SimConfig::default();
        let period = cfg.tick_period;
        let mut sim = Simulation::new(&m, cfg).unwrap();
        sim.inject_fault(3, 1, &[1, 2]).unwrap();
        while sim.trace().iter().filter(|r| r.drone == 3).count() < 3 {
            sim.advance().unwrap();
        }
        let lost: Vec<_> = sim.trace().iter().filter(|r| r.drone == 3).collect();
        assert_eq!(lost[1].event, "s_n");
        assert!((lost[1].time - 2.0).abs() < 1e-9);
        assert_eq!(lost[2].event, "b_n");
        assert!((lost[2].time - (2.0 + period)).abs() < 1e-9);
        assert_eq!(lost[2].estimate.as_deref(), Some("({1,2},{M},{N})"));
    }

    #[test]
    fn nominal_cycle_period() {
        let m = MissionModel::default();
        let mut sim = Simulation::new(&m, SimConfig::default()).unwrap();
        while sim.time() < 16.0 - 1e-9 {
            sim.advance().unwrap();
        }
        let moves: Vec<(f64, String)> = sim
            .trace()
            .iter()
            .filter(|r| r.drone == 0 && r.event.starts_with("m_"))
            .map(|r| (r.time, r.event.clone()))
            .collect();
        let names: Vec<&str> = moves.iter().map(|(_, e)| e.as_str()).collect();
        assert_eq!(names, ["m_B", "m_C", "m_D", "m_A"]);
        assert!((moves[3].0 - 16.0).abs() < 1e-9);
        assert_eq!(sim.swarm_subzone(), SubZone::A);
    }

    #[test]
    fn moves_interpolate_between_cell_centres() {
        let m = MissionModel::default();
        let mut sim = Simulation::new(&m, SimConfig::default()).unwrap();
        sim.inject_fault(3, 1, &[1, 2]).unwrap();
        while !sim.trace().iter().any(|r| r.drone == 3 && r.event == "b_e") {
            sim.advance().unwrap();
        }
        // the next action is the first east move: 6 s from zone 1 to zone 2
        let (x0, y0) = m.map().center(1);
        let half = sim.config().ticks(3.0);
        for _ in 0..half {
            sim.tick().unwrap();
        }
        let (x, y) = sim.position(3);
        assert!((x - (x0 + 0.5)).abs() < 1e-9);
        assert!((y - y0).abs() < 1e-9);
    }

    #[test]
    fn loss_policy_always_fires_in_unsafe_zone() {
        let m = MissionModel::default();
        let cfg = SimConfig {
            loss_policy: LossPolicy::Always,
            ..SimConfig::default()
        };
        let mut sim = Simulation::new(&m, cfg).unwrap();
        sim.inject_fault(3, 10, &[10]).unwrap();
        sim.tick().unwrap();
        assert_eq!(sim.outcome(), Outcome::SafetyViolation);
        assert_eq!(m.navigation().state_name(sim.drones()[3].true_zone), "Δ");
        assert_eq!(sim.trace().last().unwrap().event, "l");
    }

    #[test]
    fn loss_policy_never_keeps_the_drone() {
        let m = MissionModel::default();
        let mut sim = Simulation::new(&m, SimConfig::default()).unwrap();
        sim.inject_fault(3, 10, &[10]).unwrap();
        for _ in 0..100 {
            sim.tick().unwrap();
        }
        assert_eq!(sim.outcome(), Outcome::Running);
        assert_eq!(m.navigation().state_name(sim.drones()[3].true_zone), "10");
    }

    #[test]
    fn regroup_check_requires_regrouping_mode() {
        let m = MissionModel::default();
        let mut sim = Simulation::new(&m, SimConfig::default()).unwrap();
        sim.inject_fault(3, 1, &[1, 2]).unwrap();
        assert!(matches!(sim.regroup_check(3), Err(SimError::Usage(_))));
    }

    #[test]
    fn regroup_waits_for_the_swarm() {
        let m = MissionModel::default();
        let mut sim = Simulation::new(&m, SimConfig::default()).unwrap();
        sim.inject_fault(3, 1, &[1, 2]).unwrap();
        while sim.drones()[3].mode != Mode::Rec2 {
            sim.advance().unwrap();
        }
        let waiting = sim.drones()[3].true_inner.unwrap();
        assert_eq!(waiting, SubZone::A);
        while sim.drones()[3].mode == Mode::Rec2 {
            assert_ne!(sim.swarm_subzone(), waiting);
            sim.advance().unwrap();
        }
        assert_eq!(sim.swarm_subzone(), waiting);
        assert_eq!(sim.trace().last().unwrap().event, REGROUP);
    }

    #[test]
    fn trial_one_from_zone_one() {
        let r = run_trial(&trial(&[1, 2], 1)).unwrap();
        assert!(r.recoverable);
        assert_eq!(r.outcome, Outcome::Regrouped);
        assert_eq!(r.move_sequence, ["m_e", "m_e", "m_s", "m_s"]);
        assert_eq!(r.modes, [Mode::Nom, Mode::Rec1, Mode::Rec2, Mode::Nom]);
        assert!(r.primary_recovery_time.unwrap() > 0.0);
        assert!(r.secondary_recovery_time.is_some());
        assert_eq!(r.zones_visited.get("B13"), Some(&1));
    }

    #[test]
    fn stalled_trial_never_moves() {
        let r = run_trial(&trial(&[1, 2, 3, 4, 5], 3)).unwrap();
        assert!(!r.recoverable);
        assert_eq!(r.outcome, Outcome::Stalled);
        assert!(r.move_sequence.is_empty());
        assert_eq!(r.controllable_after_fault, 0);
        assert!(r
            .trace
            .iter()
            .filter(|x| x.drone == 3)
            .all(|x| x.event == DESYNC));
    }

    #[test]
    fn runs_are_deterministic() {
        let mut cfg = trial(&[1, 2, 6, 7], 6);
        cfg.trial.drone = None;
        cfg.seed = 42;
        let a = run_trial(&cfg).unwrap();
        let b = run_trial(&cfg).unwrap();
        assert_eq!(a, b);
    }
}
