//! The patrol mission: grid map, navigation automata for the buffer zone,
//! the inner sub-zone layer of the operational region, and the supervisors
//! that drive the swarm in each mode.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::automata::{
    AutomataError, Automaton, CompositeModel, ControlDecision, Event, EventId, StateEstimate,
    StateId,
};

pub type Zone = u32;

/// Name of the no-fly sink state in the navigation automaton.
pub const NO_FLY: &str = "Δ";
pub const LOSS: &str = "l";
pub const RETURN: &str = "r";
pub const DESYNC: &str = "desync";
pub const REGROUP: &str = "regroup";

/// Component order of the recovery composite.
pub const NAV: usize = 0;
pub const EXPLORE: usize = 1;
pub const SCAN: usize = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("zone {0} is outside the map")]
    ZoneOutOfRange(Zone),
    #[error("the operational region {0} cannot be unsafe")]
    UnsafeOperationalRegion(Zone),
    #[error("map must have at least one row and one column")]
    EmptyMap,
    #[error("zone {0} is not a buffer zone")]
    NotBufferZone(Zone),
    #[error("unsafe_zones without loss transitions")]
    MissingLossTransitions,
    #[error("{0} must be the only unsafe state of the navigation automaton")]
    UnsafeStates(String),
    #[error("automaton `{0}` does not match the mission structure: {1}")]
    Structure(String, String),
    #[error(transparent)]
    Automata(#[from] AutomataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    /// Scan order.
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::East,
        Direction::South,
        Direction::West,
    ];

    pub fn suffix(self) -> &'static str {
        match self {
            Direction::North => "n",
            Direction::East => "e",
            Direction::South => "s",
            Direction::West => "w",
        }
    }

    /// Scanning-automaton state that has just searched this border.
    pub fn scan_state(self) -> &'static str {
        match self {
            Direction::North => "N",
            Direction::East => "E",
            Direction::South => "S",
            Direction::West => "W",
        }
    }

    pub fn next(self) -> Direction {
        match self {
            Direction::North => Direction::East,
            Direction::East => Direction::South,
            Direction::South => Direction::West,
            Direction::West => Direction::North,
        }
    }

    pub fn opposite(self) -> Direction {
        self.next().next()
    }

    pub fn from_suffix(s: &str) -> Option<Direction> {
        Direction::ALL.into_iter().find(|d| d.suffix() == s)
    }

    pub fn move_event(self) -> String {
        format!("m_{}", self.suffix())
    }

    pub fn search_event(self) -> String {
        format!("s_{}", self.suffix())
    }

    pub fn border_event(self) -> String {
        format!("b_{}", self.suffix())
    }
}

/// Quadrants of the operational region: A (NW), B (NE), C (SE), D (SW).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SubZone {
    A,
    B,
    C,
    D,
}

impl SubZone {
    pub const ALL: [SubZone; 4] = [SubZone::A, SubZone::B, SubZone::C, SubZone::D];

    pub fn name(self) -> &'static str {
        match self {
            SubZone::A => "A",
            SubZone::B => "B",
            SubZone::C => "C",
            SubZone::D => "D",
        }
    }

    pub fn parse(s: &str) -> Option<SubZone> {
        SubZone::ALL.into_iter().find(|z| z.name() == s)
    }

    /// Successor on the patrol cycle A → B → C → D → A.
    pub fn next(self) -> SubZone {
        match self {
            SubZone::A => SubZone::B,
            SubZone::B => SubZone::C,
            SubZone::C => SubZone::D,
            SubZone::D => SubZone::A,
        }
    }

    pub fn prev(self) -> SubZone {
        self.next().next().next()
    }

    pub fn adjacent(self) -> [SubZone; 2] {
        [self.prev(), self.next()]
    }

    pub fn is_adjacent(self, other: SubZone) -> bool {
        self.adjacent().contains(&other)
    }

    /// Quadrant a drone lands in when entering the region across the
    /// given border, moving in direction `heading`.
    pub fn entered_from(heading: Direction) -> SubZone {
        match heading {
            Direction::South => SubZone::A,
            Direction::West => SubZone::B,
            Direction::North => SubZone::C,
            Direction::East => SubZone::D,
        }
    }

    /// Centre of the quadrant in unit-cell coordinates (x east, y south).
    pub fn offset(self) -> (f64, f64) {
        match self {
            SubZone::A => (0.25, 0.25),
            SubZone::B => (0.75, 0.25),
            SubZone::C => (0.75, 0.75),
            SubZone::D => (0.25, 0.75),
        }
    }

    pub fn move_event(self) -> String {
        format!("m_{}", self.name())
    }

    pub fn observe_event(self) -> String {
        format!("o_{}", self.name())
    }

    pub fn signal_event(self) -> String {
        format!("g_{}", self.name().to_ascii_lowercase())
    }
}

impl fmt::Display for SubZone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Result of a move on the navigation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighbor {
    Zone(Zone),
    /// The border state in front of the operational region.
    Border,
    NoFly,
}

/// Row-major zone grid; row 1 is north, zone id = (row-1)*cols + col.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    rows: u32,
    cols: u32,
    or_zone: Zone,
    unsafe_zones: BTreeSet<Zone>,
    base_subzone: SubZone,
}

impl Default for GridMap {
    fn default() -> Self {
        build_grid_map(5, 5, 13, [10, 16], SubZone::A).expect("default map is valid")
    }
}

pub fn build_grid_map(
    rows: u32,
    cols: u32,
    or_zone: Zone,
    unsafe_zones: impl IntoIterator<Item = Zone>,
    base_subzone: SubZone,
) -> Result<GridMap, ModelError> {
    if rows == 0 || cols == 0 {
        return Err(ModelError::EmptyMap);
    }
    let unsafe_zones: BTreeSet<Zone> = unsafe_zones.into_iter().collect();
    let n = rows * cols;
    if or_zone == 0 || or_zone > n {
        return Err(ModelError::ZoneOutOfRange(or_zone));
    }
    if let Some(&z) = unsafe_zones.iter().find(|&&z| z == 0 || z > n) {
        return Err(ModelError::ZoneOutOfRange(z));
    }
    if unsafe_zones.contains(&or_zone) {
        return Err(ModelError::UnsafeOperationalRegion(or_zone));
    }
    Ok(GridMap {
        rows,
        cols,
        or_zone,
        unsafe_zones,
        base_subzone,
    })
}

impl GridMap {
    pub fn rows(&self) -> u32 {
        self.rows
    }

    pub fn cols(&self) -> u32 {
        self.cols
    }

    pub fn or_zone(&self) -> Zone {
        self.or_zone
    }

    pub fn unsafe_zones(&self) -> &BTreeSet<Zone> {
        &self.unsafe_zones
    }

    pub fn base_subzone(&self) -> SubZone {
        self.base_subzone
    }

    pub fn num_zones(&self) -> u32 {
        self.rows * self.cols
    }

    pub fn contains(&self, z: Zone) -> bool {
        z >= 1 && z <= self.num_zones()
    }

    pub fn is_buffer(&self, z: Zone) -> bool {
        self.contains(z) && z != self.or_zone
    }

    pub fn buffer_zones(&self) -> impl Iterator<Item = Zone> + '_ {
        (1..=self.num_zones()).filter(move |&z| z != self.or_zone)
    }

    /// (row, col), both 1-based.
    pub fn coords(&self, z: Zone) -> (u32, u32) {
        ((z - 1) / self.cols + 1, (z - 1) % self.cols + 1)
    }

    /// Centre of a zone's cell, x east and y south, in cell units.
    pub fn center(&self, z: Zone) -> (f64, f64) {
        let (r, c) = self.coords(z);
        (c as f64 - 0.5, r as f64 - 0.5)
    }

    pub fn border_state(&self) -> String {
        format!("B{}", self.or_zone)
    }

    pub fn reentry_event(&self) -> String {
        format!("b_{}", self.or_zone)
    }

    pub fn or_search_event(&self) -> String {
        format!("s_{}", self.or_zone)
    }

    pub fn neighbor(&self, z: Zone, d: Direction) -> Result<Neighbor, ModelError> {
        if !self.is_buffer(z) {
            return Err(ModelError::NotBufferZone(z));
        }
        let (r, c) = self.coords(z);
        let (r, c) = match d {
            Direction::North => (r as i64 - 1, c as i64),
            Direction::East => (r as i64, c as i64 + 1),
            Direction::South => (r as i64 + 1, c as i64),
            Direction::West => (r as i64, c as i64 - 1),
        };
        if r < 1 || c < 1 || r > self.rows as i64 || c > self.cols as i64 {
            return Ok(Neighbor::NoFly);
        }
        let t = (r as u32 - 1) * self.cols + c as u32;
        Ok(if t == self.or_zone {
            Neighbor::Border
        } else {
            Neighbor::Zone(t)
        })
    }
}

/// Navigation automaton over the buffer zones. States are the zones in
/// numeric order, then the border state, then the no-fly sink.
pub fn build_navigation(map: &GridMap) -> Automaton {
    let mut g = Automaton::new("G_M");
    for z in 1..=map.num_zones() {
        g.add_state(z.to_string()).unwrap();
    }
    let border = map.border_state();
    g.add_state(border.clone()).unwrap();
    g.add_state(NO_FLY).unwrap();

    for d in Direction::ALL {
        g.add_event(Event::controllable(d.move_event())).unwrap();
    }
    for d in Direction::ALL {
        g.add_event(Event::controllable(d.search_event())).unwrap();
    }
    let reentry = map.reentry_event();
    g.add_event(Event::uncontrollable(reentry.clone())).unwrap();
    g.add_event(Event::unobservable(LOSS)).unwrap();

    for z in map.buffer_zones() {
        let src = z.to_string();
        for d in Direction::ALL {
            let dst = match map.neighbor(z, d).expect("buffer zone") {
                Neighbor::Zone(t) => t.to_string(),
                Neighbor::Border => border.clone(),
                Neighbor::NoFly => NO_FLY.to_string(),
            };
            g.add_transition(&src, &d.move_event(), &dst).unwrap();
            g.add_transition(&src, &d.search_event(), &src).unwrap();
        }
    }
    g.add_transition(&border, &reentry, &map.or_zone.to_string())
        .unwrap();
    for u in map.unsafe_zones() {
        g.add_transition(&u.to_string(), LOSS, NO_FLY).unwrap();
    }
    g.set_initial(&map.or_zone.to_string()).unwrap();
    g.set_unsafe(NO_FLY).unwrap();
    g.mark(&map.or_zone.to_string()).unwrap();
    g
}

/// Roam (R) → observe a border (O) → await a move or return decision (M).
pub fn build_exploration() -> Automaton {
    let mut a = Automaton::new("exploration");
    for q in ["R", "O", "M"] {
        a.add_state(q).unwrap();
    }
    for d in Direction::ALL {
        a.add_event(Event::controllable(d.search_event())).unwrap();
    }
    for d in Direction::ALL {
        a.add_event(Event::uncontrollable(d.border_event()))
            .unwrap();
    }
    for d in Direction::ALL {
        a.add_event(Event::controllable(d.move_event())).unwrap();
    }
    a.add_event(Event::controllable(RETURN)).unwrap();
    for d in Direction::ALL {
        a.add_transition("R", &d.search_event(), "O").unwrap();
        a.add_transition("O", &d.border_event(), "M").unwrap();
        a.add_transition("M", &d.move_event(), "R").unwrap();
    }
    a.add_transition("M", RETURN, "R").unwrap();
    a.set_initial("R").unwrap();
    a.mark("R").unwrap();
    a
}

/// Border checks in the fixed order n, e, s, w, restarting at I on entry to
/// a new zone. A move is only possible across the border just found.
pub fn build_scanning() -> Automaton {
    let mut a = Automaton::new("scanning");
    a.add_state("I").unwrap();
    for d in Direction::ALL {
        a.add_state(d.scan_state()).unwrap();
    }
    for d in Direction::ALL {
        a.add_event(Event::controllable(d.search_event())).unwrap();
    }
    for d in Direction::ALL {
        a.add_event(Event::uncontrollable(d.border_event()))
            .unwrap();
    }
    for d in Direction::ALL {
        a.add_event(Event::controllable(d.move_event())).unwrap();
    }
    a.add_transition("I", "s_n", "N").unwrap();
    for d in Direction::ALL {
        let next = d.next();
        a.add_transition(d.scan_state(), &next.search_event(), next.scan_state())
            .unwrap();
        a.add_transition(d.scan_state(), &d.border_event(), d.scan_state())
            .unwrap();
        a.add_transition(d.scan_state(), &d.move_event(), "I")
            .unwrap();
    }
    a.set_initial("I").unwrap();
    a.mark_all();
    a
}

fn add_inner_events(a: &mut Automaton, map: &GridMap, signals: bool) {
    if signals {
        for z in SubZone::ALL {
            a.add_event(Event::uncontrollable(z.signal_event()))
                .unwrap();
        }
    }
    a.add_event(Event::controllable(map.or_search_event()))
        .unwrap();
    for z in SubZone::ALL {
        a.add_event(Event::uncontrollable(z.observe_event()))
            .unwrap();
    }
    for z in SubZone::ALL {
        a.add_event(Event::controllable(z.move_event())).unwrap();
    }
}

/// Inner navigation layer of the operational region (G_O).
pub fn build_inner(map: &GridMap) -> Automaton {
    let mut a = Automaton::new("G_O");
    a.add_state("U").unwrap();
    for z in SubZone::ALL {
        a.add_state(z.name()).unwrap();
    }
    add_inner_events(&mut a, map, true);
    let search = map.or_search_event();
    for z in SubZone::ALL {
        a.add_transition("U", &z.signal_event(), z.name()).unwrap();
        a.add_transition(z.name(), &search, z.name()).unwrap();
        for y in z.adjacent() {
            a.add_transition(z.name(), &y.observe_event(), z.name())
                .unwrap();
            a.add_transition(z.name(), &y.move_event(), y.name())
                .unwrap();
        }
    }
    a.set_initial("U").unwrap();
    a.mark(map.base_subzone().name()).unwrap();
    a
}

pub fn nominal_state(z: SubZone) -> String {
    format!("P{}", z.name())
}

/// Patrol supervisor: in state `P<x>` the only permitted move is to the next
/// sub-zone on the cycle. Observations and sub-zone signals are never
/// disabled; a signal resynchronizes the supervisor with G_O.
pub fn build_nominal_supervisor(map: &GridMap) -> Automaton {
    let mut a = Automaton::new("nominal");
    for z in SubZone::ALL {
        a.add_state(nominal_state(z)).unwrap();
    }
    add_inner_events(&mut a, map, true);
    let search = map.or_search_event();
    for z in SubZone::ALL {
        let q = nominal_state(z);
        a.add_transition(&q, &search, &q).unwrap();
        for y in SubZone::ALL {
            a.add_transition(&q, &y.observe_event(), &q).unwrap();
            a.add_transition(&q, &y.signal_event(), &nominal_state(y))
                .unwrap();
        }
        a.add_transition(&q, &z.next().move_event(), &nominal_state(z.next()))
            .unwrap();
    }
    a.set_initial(&nominal_state(map.base_subzone())).unwrap();
    a.mark_all();
    a
}

/// Regrouping supervisor: wait in place, alternating a search for the swarm
/// with a return.
pub fn build_secondary_supervisor(map: &GridMap) -> Automaton {
    let mut a = Automaton::new("secondary");
    a.add_state("P").unwrap();
    a.add_state("Q").unwrap();
    let search = map.or_search_event();
    a.add_event(Event::controllable(search.clone())).unwrap();
    a.add_event(Event::controllable(RETURN)).unwrap();
    a.add_transition("P", &search, "Q").unwrap();
    a.add_transition("Q", RETURN, "P").unwrap();
    a.set_initial("P").unwrap();
    a.mark_all();
    a
}

/// NOM --desync--> REC1 --b_OR--> REC2 --regroup--> NOM.
pub fn build_mode_switcher(map: &GridMap) -> Automaton {
    let mut a = Automaton::new("mode");
    for q in ["NOM", "REC1", "REC2"] {
        a.add_state(q).unwrap();
    }
    let reentry = map.reentry_event();
    a.add_event(Event::uncontrollable(DESYNC)).unwrap();
    a.add_event(Event::uncontrollable(reentry.clone())).unwrap();
    a.add_event(Event::uncontrollable(REGROUP)).unwrap();
    a.add_transition("NOM", DESYNC, "REC1").unwrap();
    a.add_transition("REC1", &reentry, "REC2").unwrap();
    a.add_transition("REC2", REGROUP, "NOM").unwrap();
    a.set_initial("NOM").unwrap();
    a.mark("NOM").unwrap();
    a
}

/// The full mission: the recovery composite (G_M, exploration, scanning),
/// the inner layer with its two supervisors, and the mode switcher.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissionModel {
    map: GridMap,
    composite: CompositeModel,
    inner: Automaton,
    nominal: Automaton,
    secondary: Automaton,
    mode_switcher: Automaton,
    nominal_estimate: StateEstimate,
    moves: BTreeSet<usize>,
}

impl MissionModel {
    pub fn new(map: GridMap) -> Self {
        let parts = MissionParts {
            navigation: build_navigation(&map),
            exploration: build_exploration(),
            scanning: build_scanning(),
            inner: build_inner(&map),
            nominal: build_nominal_supervisor(&map),
            secondary: build_secondary_supervisor(&map),
            mode_switcher: build_mode_switcher(&map),
        };
        Self::from_parts(map, parts).expect("constructed mission is consistent")
    }

    /// Assembles a mission from externally supplied automata, re-checking
    /// the structural invariants the recovery engine relies on.
    pub fn from_parts(map: GridMap, parts: MissionParts) -> Result<Self, ModelError> {
        check_navigation(&map, &parts.navigation)?;
        for a in [&parts.exploration, &parts.scanning] {
            if !a.unsafe_states().is_empty() {
                return Err(ModelError::Structure(
                    a.name().to_string(),
                    "only the navigation automaton may have unsafe states".into(),
                ));
            }
        }
        for a in [
            &parts.inner,
            &parts.nominal,
            &parts.secondary,
            &parts.mode_switcher,
        ] {
            a.validate()?;
        }
        for (a, q) in [
            (&parts.exploration, "R"),
            (&parts.scanning, "I"),
            (&parts.inner, "U"),
            (&parts.mode_switcher, "NOM"),
        ] {
            a.state_id(q).map_err(|_| {
                ModelError::Structure(a.name().to_string(), format!("missing state {q}"))
            })?;
        }
        let composite =
            CompositeModel::new(vec![parts.navigation, parts.exploration, parts.scanning])?;
        let nav = composite.component(NAV);
        let or_state = nav.state_id(&map.or_zone().to_string())?;
        let nominal_estimate = composite
            .initial_estimate()
            .with_cell(NAV, [or_state].into());
        let moves = Direction::ALL
            .iter()
            .filter_map(|d| composite.event_id(&d.move_event()).ok())
            .collect();
        Ok(MissionModel {
            map,
            composite,
            inner: parts.inner,
            nominal: parts.nominal,
            secondary: parts.secondary,
            mode_switcher: parts.mode_switcher,
            nominal_estimate,
            moves,
        })
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn composite(&self) -> &CompositeModel {
        &self.composite
    }

    pub fn navigation(&self) -> &Automaton {
        self.composite.component(NAV)
    }

    pub fn exploration(&self) -> &Automaton {
        self.composite.component(EXPLORE)
    }

    pub fn scanning(&self) -> &Automaton {
        self.composite.component(SCAN)
    }

    pub fn inner(&self) -> &Automaton {
        &self.inner
    }

    pub fn nominal_supervisor(&self) -> &Automaton {
        &self.nominal
    }

    pub fn secondary_supervisor(&self) -> &Automaton {
        &self.secondary
    }

    pub fn mode_switcher(&self) -> &Automaton {
        &self.mode_switcher
    }

    pub fn nominal_estimate(&self) -> &StateEstimate {
        &self.nominal_estimate
    }

    /// Global ids of the zone-to-zone move events.
    pub fn move_events(&self) -> &BTreeSet<usize> {
        &self.moves
    }

    /// Nominal closed loop of the inner layer.
    pub fn nominal_loop(&self) -> Result<Automaton, AutomataError> {
        crate::automata::sync_product(&[self.inner.clone(), self.nominal.clone()])
    }

    /// Mode switcher composed with the inner layer and both inner
    /// supervisors.
    pub fn mode_switched_loop(&self) -> Result<Automaton, AutomataError> {
        crate::automata::sync_product(&[
            self.mode_switcher.clone(),
            self.inner.clone(),
            self.nominal.clone(),
            self.secondary.clone(),
        ])
    }

    pub fn zone_state(&self, z: Zone) -> Result<StateId, ModelError> {
        if !self.map.contains(z) {
            return Err(ModelError::ZoneOutOfRange(z));
        }
        Ok(self.navigation().state_id(&z.to_string())?)
    }

    /// Post-desynchronization estimate `({zones},{R},{I})`.
    pub fn zone_estimate(&self, zones: &[Zone]) -> Result<StateEstimate, ModelError> {
        let cell = zones
            .iter()
            .map(|&z| {
                if !self.map.contains(z) {
                    Err(ModelError::ZoneOutOfRange(z))
                } else if self.map.is_buffer(z) {
                    self.zone_state(z)
                } else {
                    Err(ModelError::NotBufferZone(z))
                }
            })
            .collect::<Result<BTreeSet<_>, _>>()?;
        if cell.is_empty() {
            return Err(ModelError::Automata(AutomataError::MalformedEstimate(
                "empty zone set".into(),
            )));
        }
        Ok(self.composite.initial_estimate().with_cell(NAV, cell))
    }

    /// Buffer zone of a navigation state, if it is one.
    pub fn state_zone(&self, q: StateId) -> Option<Zone> {
        self.navigation()
            .state_name(q)
            .parse::<Zone>()
            .ok()
            .filter(|&z| self.map.is_buffer(z))
    }

    pub fn is_goal(&self, s: &StateEstimate) -> bool {
        s.cell(NAV) == self.nominal_estimate.cell(NAV)
    }

    /// True plant state of a freshly relocated drone: `(zone, R, I)`.
    pub fn relocated(&self, z: Zone) -> Result<Vec<StateId>, ModelError> {
        let mut tuple: Vec<StateId> = self
            .composite
            .components()
            .iter()
            .map(|a| a.initial())
            .collect();
        tuple[NAV] = self.zone_state(z)?;
        Ok(tuple)
    }

    /// Event the plant produces from the concrete state `tuple` under
    /// decision `d`. Observable uncontrollable events (detections) come
    /// first; otherwise the first enabled controllable event in the order
    /// moves, return, searches. The silent loss event is never chosen here.
    pub fn plant_choice(&self, tuple: &[StateId], d: &ControlDecision) -> Option<EventId> {
        let c = &self.composite;
        let enabled = |e: EventId| d.contains(e) && self.tuple_step(tuple, e).is_some();
        let uncontrollable = (0..c.events().len())
            .find(|&e| !c.event(e).controllable && c.event(e).observable && enabled(e));
        uncontrollable.or_else(|| {
            let rank = |e: EventId| {
                let name = c.event_name(e);
                if name.starts_with("m_") {
                    0
                } else if name == RETURN {
                    1
                } else {
                    2
                }
            };
            let mut ctrl: Vec<EventId> = (0..c.events().len())
                .filter(|&e| c.event(e).controllable && enabled(e))
                .collect();
            ctrl.sort_by_key(|&e| (rank(e), e));
            ctrl.first().copied()
        })
    }

    /// Synchronous step of the concrete composite state.
    pub fn tuple_step(&self, tuple: &[StateId], e: EventId) -> Option<Vec<StateId>> {
        let mut next = tuple.to_vec();
        let mut owned = false;
        for (i, a) in self.composite.components().iter().enumerate() {
            if let Some(le) = self.composite.local_event(i, e) {
                owned = true;
                next[i] = a.step_id(tuple[i], le)?;
            }
        }
        owned.then_some(next)
    }
}

impl Default for MissionModel {
    fn default() -> Self {
        MissionModel::new(GridMap::default())
    }
}

/// Automata making up a mission, in the order they are serialized.
#[derive(Debug, Clone)]
pub struct MissionParts {
    pub navigation: Automaton,
    pub exploration: Automaton,
    pub scanning: Automaton,
    pub inner: Automaton,
    pub nominal: Automaton,
    pub secondary: Automaton,
    pub mode_switcher: Automaton,
}

fn check_navigation(map: &GridMap, g: &Automaton) -> Result<(), ModelError> {
    g.validate()?;
    let structure = |msg: String| ModelError::Structure(g.name().to_string(), msg);
    let no_fly = g
        .state_id(NO_FLY)
        .map_err(|_| structure(format!("missing state {NO_FLY}")))?;
    if g.unsafe_states().iter().copied().collect::<Vec<_>>() != vec![no_fly] {
        return Err(ModelError::UnsafeStates(NO_FLY.into()));
    }
    for z in 1..=map.num_zones() {
        g.state_id(&z.to_string())
            .map_err(|_| structure(format!("missing zone {z}")))?;
    }
    let border = g
        .state_id(&map.border_state())
        .map_err(|_| structure(format!("missing state {}", map.border_state())))?;
    let reentry = g
        .event_id(&map.reentry_event())
        .map_err(|_| structure(format!("missing event {}", map.reentry_event())))?;
    if g.step_id(border, reentry) != Some(g.state_id(&map.or_zone().to_string())?) {
        return Err(structure(
            "border state must lead to the operational region".into(),
        ));
    }
    let loss = g.event_id(LOSS).ok();
    for u in map.unsafe_zones() {
        let q = g.state_id(&u.to_string())?;
        if loss.and_then(|l| g.step_id(q, l)) != Some(no_fly) {
            return Err(ModelError::MissingLossTransitions);
        }
    }
    if let Some(l) = loss {
        let ev = g.event(l);
        if ev.controllable || ev.observable {
            return Err(structure(
                "loss event must be uncontrollable and unobservable".into(),
            ));
        }
    }
    if g.enabled(no_fly).next().is_some() {
        return Err(structure(format!("{NO_FLY} must be a sink")));
    }
    Ok(())
}
