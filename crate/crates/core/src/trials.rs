//! Benchmark trials and model checks.

use std::fmt::Write as _;

use crate::automata::trim_nonblocking;
use crate::mission::{MissionModel, Zone, NAV};
use crate::rbts::{
    build_rbts, extract_supervisor, initial_y, oracle_recoverable, InitialY, RecoverySupervisor,
    RuntimeStatus, SupervisorRuntime, SynthConfig, SynthError,
};
use crate::sim::{run_trial_with, Durations, Outcome, SimConfig, SimError, TrialSpec};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialRow {
    pub trial: u32,
    pub estimate: Vec<Zone>,
    pub starts: Vec<Zone>,
    pub expected_recoverable: bool,
}

/// The four benchmark trials on the default map with their expected
/// verdicts.
pub fn table1_rows() -> Vec<TrialRow> {
    let row = |trial, estimate: &[Zone], expected_recoverable| TrialRow {
        trial,
        estimate: estimate.to_vec(),
        starts: estimate.to_vec(),
        expected_recoverable,
    };
    vec![
        row(1, &[1, 2], true),
        row(2, &[1, 6, 11], true),
        row(3, &[1, 2, 6, 7], true),
        row(4, &[1, 2, 3, 4, 5], false),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: u32,
    pub estimate: Vec<Zone>,
    pub start: Zone,
    pub expected_recoverable: bool,
    pub recoverable: bool,
    pub outcome: Outcome,
    pub moves: Vec<String>,
    pub primary_time: Option<f64>,
    pub secondary_time: Option<f64>,
}

impl TrialResult {
    pub fn matches(&self) -> bool {
        self.recoverable == self.expected_recoverable
    }
}

/// Runs every (estimate, start) pair of the benchmark. Trials run on worker
/// threads; results come back in table order.
pub fn run_table1(
    m: &MissionModel,
    base: &SimConfig,
    durations: Durations,
) -> Result<Vec<TrialResult>, SimError> {
    let jobs: Vec<(TrialRow, Zone)> = table1_rows()
        .into_iter()
        .flat_map(|r| r.starts.clone().into_iter().map(move |s| (r.clone(), s)))
        .collect();
    let results: Vec<Result<TrialResult, SimError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|(row, start)| {
                let cfg = SimConfig {
                    durations,
                    trial: TrialSpec {
                        estimate: row.estimate.clone(),
                        start: *start,
                        drone: base.trial.drone,
                    },
                    ..base.clone()
                };
                scope.spawn(move || {
                    let r = run_trial_with(m, &cfg)?;
                    Ok(TrialResult {
                        trial: row.trial,
                        estimate: row.estimate.clone(),
                        start: *start,
                        expected_recoverable: row.expected_recoverable,
                        recoverable: r.recoverable,
                        outcome: r.outcome,
                        moves: r.move_sequence,
                        primary_time: r.primary_recovery_time,
                        secondary_time: r.secondary_recovery_time,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("trial thread panicked"))
            .collect()
    });
    results.into_iter().collect()
}

pub fn format_table1(results: &[TrialResult]) -> String {
    let mut out = String::from(
        "trial estimate        start verdict        expected moves primary   secondary\n",
    );
    let time = |t: Option<f64>| t.map_or("-".to_string(), |t| format!("{t:.3}"));
    for r in results {
        let est: Vec<String> = r.estimate.iter().map(|z| z.to_string()).collect();
        let _ = writeln!(
            out,
            "{:<5} {:<15} {:<5} {:<14} {:<8} {:<5} {:<9} {}{}",
            r.trial,
            format!("{{{}}}", est.join(",")),
            r.start,
            if r.recoverable {
                "recoverable"
            } else {
                "no solution"
            },
            if r.expected_recoverable {
                "rec"
            } else {
                "unrec"
            },
            r.moves.len(),
            time(r.primary_time),
            time(r.secondary_time),
            if r.matches() { "" } else { "  MISMATCH" }
        );
    }
    out
}

/// Outcome of driving a supervisor against the plant from one start zone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoSim {
    pub moves: Vec<String>,
    pub events: Vec<String>,
}

/// Executes `sup` against the deterministic plant from `start`, checking at
/// every step that the runtime estimate contains the true state and that
/// the true state is safe.
pub fn co_simulate(
    m: &MissionModel,
    sup: &RecoverySupervisor,
    start: Zone,
) -> Result<CoSim, String> {
    let c = m.composite();
    let mut tuple = m.relocated(start).map_err(|e| e.to_string())?;
    let mut rt = SupervisorRuntime::start(sup.clone(), m).map_err(|e| e.to_string())?;
    let mut out = CoSim {
        moves: Vec::new(),
        events: Vec::new(),
    };
    let limit = 4 * sup.len() + 8;
    for _ in 0..limit {
        if !rt.estimate().contains(&tuple) {
            return Err(format!(
                "estimate {} lost the true state",
                c.display(rt.estimate())
            ));
        }
        if c.components()[NAV].is_unsafe(tuple[NAV]) {
            return Err("entered an unsafe state".into());
        }
        let Some(d) = rt.decision() else {
            return Ok(out);
        };
        let e = m
            .plant_choice(&tuple, d)
            .ok_or_else(|| format!("plant deadlocked at {}", c.display(rt.estimate())))?;
        tuple = m.tuple_step(&tuple, e).ok_or("plant step failed")?;
        let name = c.event_name(e).to_string();
        if name.starts_with("m_") {
            out.moves.push(name.clone());
        }
        out.events.push(name);
        if rt.step(e).map_err(|e| e.to_string())? == RuntimeStatus::GoalReached {
            return Ok(out);
        }
    }
    Err("no progress towards the goal".into())
}

/// Non-empty zone subsets with at most `max` elements, in lexicographic
/// order.
pub fn zone_subsets(zones: &[Zone], max: usize) -> Vec<Vec<Zone>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn go(zones: &[Zone], from: usize, max: usize, cur: &mut Vec<Zone>, out: &mut Vec<Vec<Zone>>) {
        for i in from..zones.len() {
            cur.push(zones[i]);
            out.push(cur.clone());
            if cur.len() < max {
                go(zones, i + 1, max, cur, out);
            }
            cur.pop();
        }
    }
    go(zones, 0, max, &mut cur, &mut out);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    UnsafeAtStart,
    Recoverable,
    Unrecoverable,
}

/// Engine verdict for a zone estimate, with its supervisor when winning.
pub fn synthesize(
    m: &MissionModel,
    zones: &[Zone],
    cfg: &SynthConfig,
) -> Result<(Verdict, Option<RecoverySupervisor>), SynthError> {
    let raw = m.zone_estimate(zones).map_err(|e| match e {
        crate::mission::ModelError::Automata(a) => SynthError::Model(a),
        other => SynthError::Model(crate::automata::AutomataError::MalformedEstimate(
            other.to_string(),
        )),
    })?;
    let y = match initial_y(m, &raw)? {
        InitialY::UnsafeAtStart(_) => return Ok((Verdict::UnsafeAtStart, None)),
        InitialY::Ready(y) => y,
    };
    let t = build_rbts(m, &y, cfg)?;
    if t.recoverable() {
        Ok((Verdict::Recoverable, Some(extract_supervisor(&t)?)))
    } else {
        Ok((Verdict::Unrecoverable, None))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub recoverable: usize,
    pub unrecoverable: usize,
    pub unsafe_at_start: usize,
    /// Estimates the oracle could not decide within its budget.
    pub inconclusive: usize,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &str, failures: &[String], total: usize) {
        self.checks.push(Check {
            name: name.to_string(),
            passed: failures.is_empty(),
            detail: match failures.first() {
                None => format!("{total} ok"),
                Some(f) => format!("{} of {total} failed; first: {f}", failures.len()),
            },
        });
    }
}

impl std::fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            )?;
        }
        writeln!(
            f,
            "estimates: {} recoverable, {} unrecoverable, {} unsafe at start, {} oracle-inconclusive",
            self.recoverable, self.unrecoverable, self.unsafe_at_start, self.inconclusive
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyConfig {
    pub max_zones: usize,
    pub oracle_budget: usize,
    pub synth: SynthConfig,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            max_zones: 2,
            oracle_budget: 200_000,
            synth: SynthConfig::default(),
        }
    }
}

/// Nonblocking checks, then for every zone estimate up to the configured
/// size: engine/oracle agreement, supervisor verification and a
/// co-simulation from every start zone.
pub fn verify_model(m: &MissionModel, cfg: &VerifyConfig) -> VerifyReport {
    let mut report = VerifyReport::default();
    for (name, product) in [
        ("nominal loop nonblocking", m.nominal_loop()),
        ("mode-switched loop nonblocking", m.mode_switched_loop()),
    ] {
        let failures = match product {
            Ok(a) if trim_nonblocking(&a).1 => vec![],
            Ok(_) => vec!["blocking states present".to_string()],
            Err(e) => vec![e.to_string()],
        };
        report.push(name, &failures, 1);
    }

    let zones: Vec<Zone> = m.map().buffer_zones().collect();
    let subsets = zone_subsets(&zones, cfg.max_zones);
    let mut disagree = Vec::new();
    let mut unsound = Vec::new();
    for zs in &subsets {
        let label = format!("{zs:?}");
        let (verdict, sup) = match synthesize(m, zs, &cfg.synth) {
            Ok(v) => v,
            Err(e) => {
                disagree.push(format!("{label}: {e}"));
                continue;
            }
        };
        match verdict {
            Verdict::UnsafeAtStart => {
                report.unsafe_at_start += 1;
                continue;
            }
            Verdict::Recoverable => report.recoverable += 1,
            Verdict::Unrecoverable => report.unrecoverable += 1,
        }
        let raw = m.zone_estimate(zs).expect("zones come from the map");
        if let Ok(InitialY::Ready(y)) = initial_y(m, &raw) {
            match oracle_recoverable(m, &y, cfg.oracle_budget) {
                Ok(o) if o == (verdict == Verdict::Recoverable) => {}
                Ok(o) => disagree.push(format!("{label}: engine {verdict:?}, oracle {o}")),
                Err(_) => report.inconclusive += 1,
            }
        }
        if let Some(sup) = sup {
            if let Err(e) = sup.verify(m) {
                unsound.push(format!("{label}: {e}"));
            }
            for &z in zs {
                if let Err(e) = co_simulate(m, &sup, z) {
                    unsound.push(format!("{label} from {z}: {e}"));
                }
            }
        }
    }
    report.push("engine and oracle agree", &disagree, subsets.len());
    report.push(
        "supervisors sound under co-simulation",
        &unsound,
        report.recoverable,
    );
    report
}
