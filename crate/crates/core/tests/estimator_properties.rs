use proptest::prelude::*;

use swarm_recovery::automata::{
    sync_product, Automaton, CompositeModel, ControlDecision, Event, EventId, StateId,
};

const EVENTS: usize = 4;
const MAX_STATES: usize = 6;

#[derive(Debug, Clone)]
struct ComponentSpec {
    states: usize,
    owns: Vec<bool>,
    table: Vec<Option<usize>>,
}

fn component_spec() -> impl Strategy<Value = ComponentSpec> {
    (
        1..=MAX_STATES,
        prop::collection::vec(any::<bool>(), EVENTS),
        prop::collection::vec(
            prop::option::weighted(0.6, 0..MAX_STATES),
            MAX_STATES * EVENTS,
        ),
    )
        .prop_map(|(states, owns, table)| ComponentSpec {
            states,
            owns,
            table,
        })
}

fn attributes(all_observable: bool) -> impl Strategy<Value = Vec<(bool, bool)>> {
    let attr = if all_observable {
        prop_oneof![Just((true, true)), Just((false, true))].boxed()
    } else {
        prop_oneof![
            Just((true, true)),
            Just((false, true)),
            Just((false, false))
        ]
        .boxed()
    };
    prop::collection::vec(attr, EVENTS)
}

fn build(attrs: &[(bool, bool)], specs: &[ComponentSpec]) -> CompositeModel {
    let mut comps = Vec::new();
    for (i, spec) in specs.iter().enumerate() {
        let mut a = Automaton::new(format!("c{i}"));
        for q in 0..spec.states {
            a.add_state(q.to_string()).unwrap();
        }
        let mut local = [None; EVENTS];
        for (e, &(c, o)) in attrs.iter().enumerate() {
            if spec.owns[e] {
                local[e] = Some(a.add_event(Event::new(format!("e{e}"), c, o)).unwrap());
            }
        }
        for q in 0..spec.states {
            for (e, slot) in local.iter().enumerate() {
                if let (Some(le), Some(t)) = (*slot, spec.table[q * EVENTS + e]) {
                    a.add_transition_ids(q, le, t % spec.states).unwrap();
                }
            }
        }
        a.set_initial("0").unwrap();
        a.mark_all();
        comps.push(a);
    }
    CompositeModel::new(comps).unwrap()
}

fn everything(c: &CompositeModel) -> ControlDecision {
    c.decision(0..c.events().len())
}

fn product_step(c: &CompositeModel, tuple: &[StateId], e: EventId) -> Option<Vec<StateId>> {
    let mut next = tuple.to_vec();
    let mut owned = false;
    for (i, a) in c.components().iter().enumerate() {
        if let Some(le) = c.local_event(i, e) {
            owned = true;
            next[i] = a.step_id(tuple[i], le)?;
        }
    }
    owned.then_some(next)
}

fn model(all_observable: bool) -> impl Strategy<Value = CompositeModel> {
    (
        attributes(all_observable),
        prop::collection::vec(component_spec(), 1..=3),
    )
        .prop_map(|(attrs, specs)| build(&attrs, &specs))
}

proptest! {
    #[test]
    fn estimate_tracks_the_true_state(
        c in model(false),
        choices in prop::collection::vec(any::<usize>(), 0..40),
        restrict in prop::collection::vec(any::<bool>(), EVENTS),
    ) {
        // decision: all uncontrollable events plus a random controllable subset
        let d = c.decision((0..c.events().len()).filter(|&e| restrict[e % EVENTS]));
        let mut tuple: Vec<StateId> = c.components().iter().map(|a| a.initial()).collect();
        let mut est = c.unobservable_reach(&c.initial_estimate(), &d);
        for pick in choices {
            prop_assert!(est.contains(&tuple));
            let enabled: Vec<EventId> = (0..c.events().len())
                .filter(|&e| d.contains(e) && product_step(&c, &tuple, e).is_some())
                .collect();
            if enabled.is_empty() {
                break;
            }
            let e = enabled[pick % enabled.len()];
            tuple = product_step(&c, &tuple, e).unwrap();
            if c.event(e).observable {
                prop_assert!(c.feasible_observable(&est, &d).unwrap().contains(&e));
                est = c.observe(&est, &d, e).unwrap();
                prop_assert!(est.cells().iter().all(|cell| !cell.is_empty()));
            }
        }
        prop_assert!(est.contains(&tuple));
    }

    #[test]
    fn reach_is_a_closure(
        c in model(false),
        seeds in prop::collection::vec(prop::collection::btree_set(0..MAX_STATES, 1..=3), 3),
    ) {
        let cells = c
            .components()
            .iter()
            .zip(&seeds)
            .map(|(a, s)| s.iter().map(|q| q % a.num_states()).collect())
            .collect();
        let s = swarm_recovery::automata::StateEstimate::from_cells(cells);
        let d = everything(&c);
        let once = c.unobservable_reach(&s, &d);
        prop_assert!(s.is_subset(&once));
        prop_assert_eq!(c.unobservable_reach(&once, &d), once);
    }

    #[test]
    fn feasible_observable_respects_the_decision(
        c in model(false),
        restrict in prop::collection::vec(any::<bool>(), EVENTS),
    ) {
        let d = c.decision((0..c.events().len()).filter(|&e| restrict[e % EVENTS]));
        let s = c.unobservable_reach(&c.initial_estimate(), &d);
        let feasible = c.feasible_observable(&s, &d).unwrap();
        prop_assert!(feasible.iter().all(|e| d.contains(*e)));
        for e in 0..c.events().len() {
            let ev = c.event(e);
            if !ev.controllable && ev.observable && c.event_feasible(&s, e) {
                prop_assert!(feasible.contains(&e));
            }
        }
    }

    #[test]
    fn singletons_follow_the_product(c in model(true)) {
        let product = sync_product(c.components()).unwrap();
        let d = everything(&c);
        for q in 0..product.num_states() {
            let name = product.state_name(q);
            let tuple: Vec<StateId> = name
                .trim_matches(|ch| ch == '(' || ch == ')')
                .split(',')
                .map(|x| x.parse().unwrap())
                .collect();
            let cells = tuple.iter().map(|&x| [x].into()).collect();
            let s = swarm_recovery::automata::StateEstimate::from_cells(cells);
            for e in 0..c.events().len() {
                let via_product = product
                    .step(name, &c.events()[e].name)
                    .ok()
                    .flatten()
                    .map(str::to_string);
                let feasible = c.event_feasible(&s, e);
                prop_assert_eq!(feasible, via_product.is_some());
                if let Some(target) = via_product {
                    let next = c.observe(&s, &d, e).unwrap();
                    let names: Vec<String> = next
                        .cells()
                        .iter()
                        .map(|cell| {
                            prop_assert_eq!(cell.len(), 1);
                            Ok(cell.iter().next().unwrap().to_string())
                        })
                        .collect::<Result<_, TestCaseError>>()?;
                    prop_assert_eq!(format!("({})", names.join(",")), target);
                }
            }
        }
    }

    #[test]
    fn product_size_is_bounded(c in model(false)) {
        let product = sync_product(c.components()).unwrap();
        let bound: usize = c.components().iter().map(|a| a.num_states()).product();
        prop_assert!(product.num_states() <= bound);
    }
}
