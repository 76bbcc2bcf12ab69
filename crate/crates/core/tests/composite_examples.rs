use std::collections::{BTreeSet, VecDeque};

use swarm_recovery::automata::{sync_product, trim_nonblocking, StateEstimate, StateId};
use swarm_recovery::mission::{build_grid_map, MissionModel, SubZone, NAV};

fn est(m: &MissionModel, nav: &[&str], e: &str, s: &str) -> StateEstimate {
    m.composite().estimate(&[nav, &[e], &[s]]).unwrap()
}

fn names(m: &MissionModel, set: &BTreeSet<usize>) -> Vec<String> {
    set.iter()
        .map(|&e| m.composite().event_name(e).to_string())
        .collect()
}

#[test]
fn feasible_controllable_examples() {
    let m = MissionModel::default();
    let c = m.composite();
    let f = |s: StateEstimate| names(&m, &c.feasible_controllable(&s).unwrap());
    assert_eq!(f(est(&m, &["1", "2"], "R", "I")), ["s_n"]);
    assert!(f(est(&m, &["1", "2"], "O", "N")).is_empty());
    let mut mn = f(est(&m, &["1", "2"], "M", "N"));
    mn.sort();
    assert_eq!(mn, ["m_n", "r"]);
}

#[test]
fn feasible_observable_examples() {
    let m = MissionModel::default();
    let c = m.composite();
    let sn = c.decision_named(&["s_n"]).unwrap();
    let uc = c.decision_named(&[]).unwrap();
    let f = |s: StateEstimate, d| names(&m, &c.feasible_observable(&s, d).unwrap());
    assert_eq!(f(est(&m, &["1", "2"], "R", "I"), &sn), ["s_n"]);
    assert_eq!(f(est(&m, &["1", "2"], "O", "N"), &uc), ["b_n"]);
    let mut v = f(est(&m, &["8", "9", "B13", "14"], "R", "I"), &sn);
    v.sort();
    assert_eq!(v, ["b_13", "s_n"]);
}

#[test]
fn unobservable_reach_examples() {
    let m = MissionModel::default();
    let c = m.composite();
    let uc = c.decision_named(&[]).unwrap();
    let show = |s: &StateEstimate| c.display(s).to_string();
    let r = |nav: &[&str]| show(&c.unobservable_reach(&est(&m, nav, "R", "I"), &uc));
    assert_eq!(r(&["1", "2"]), "({1,2},{R},{I})");
    assert_eq!(r(&["10"]), "({10,Δ},{R},{I})");
    assert_eq!(r(&["6", "11", "16"]), "({6,11,16,Δ},{R},{I})");
}

#[test]
fn observe_examples() {
    let m = MissionModel::default();
    let c = m.composite();
    let sn = c.decision_named(&["s_n"]).unwrap();
    let show = |s: &StateEstimate| c.display(s).to_string();
    let s = est(&m, &["1", "2"], "R", "I");
    let e = c.event_id("s_n").unwrap();
    assert_eq!(show(&c.observe(&s, &sn, e).unwrap()), "({1,2},{O},{N})");
    let s = est(&m, &["8", "9", "B13", "14"], "R", "I");
    let b = c.event_id("b_13").unwrap();
    assert_eq!(show(&c.observe(&s, &sn, b).unwrap()), "({13},{R},{I})");
    assert_eq!(show(&c.observe(&s, &sn, e).unwrap()), "({8,9,14},{O},{N})");
    // an infeasible observation is refused
    let r = c.event_id("r").unwrap();
    assert!(c.observe(&s, &sn, r).is_err());
}

#[test]
fn product_with_exploration() {
    let m = MissionModel::default();
    let mut nav = m.navigation().clone();
    nav.set_initial("1").unwrap();
    let p = sync_product(&[nav, m.exploration().clone()]).unwrap();
    assert!(p.state_id("(1,M)").is_ok());
    assert_eq!(p.step("(1,M)", "m_n").unwrap(), Some("(Δ,R)"));
}

#[test]
fn nonblocking_compositions() {
    let m = MissionModel::default();
    assert!(trim_nonblocking(&m.nominal_loop().unwrap()).1);
    assert!(trim_nonblocking(&m.mode_switched_loop().unwrap()).1);
    assert!(trim_nonblocking(m.mode_switcher()).1);
}

/// Every reachable composite state with the drone at the border state
/// allows no controllable event and exactly one observation.
#[test]
fn border_state_forces_reentry() {
    for m in [
        MissionModel::default(),
        MissionModel::new(build_grid_map(3, 3, 5, [], SubZone::A).unwrap()),
    ] {
        let c = m.composite();
        let border = m.navigation().state_id(&m.map().border_state()).unwrap();
        let all = c.decision(0..c.events().len());
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<Vec<StateId>> = m
            .map()
            .buffer_zones()
            .map(|z| m.relocated(z).unwrap())
            .collect();
        let mut at_border = 0;
        while let Some(t) = queue.pop_front() {
            if !seen.insert(t.clone()) {
                continue;
            }
            if t[NAV] == border {
                at_border += 1;
                let s = StateEstimate::from_cells(t.iter().map(|&q| [q].into()).collect());
                assert!(c.feasible_controllable(&s).unwrap().is_empty());
                assert_eq!(
                    names(&m, &c.feasible_observable(&s, &all).unwrap()),
                    [m.map().reentry_event()]
                );
                continue;
            }
            for e in 0..c.events().len() {
                if let Some(n) = m.tuple_step(&t, e) {
                    queue.push_back(n);
                }
            }
        }
        assert!(at_border > 0);
    }
}
