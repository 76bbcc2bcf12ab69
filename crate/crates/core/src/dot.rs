//! Graphviz export.
//!
//! Game graphs: Y-nodes are boxes, Z-nodes rounded boxes, goal nodes
//! double-bordered, pruned decisions dashed and gray, the extracted strategy
//! bold.

use std::fmt::Write as _;

use crate::automata::{Automaton, CompositeModel};
use crate::rbts::{Rbts, ZStatus};

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn automaton_to_dot(a: &Automaton) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph {} {{", quote(a.name()));
    out.push_str("  rankdir=LR;\n");
    out.push_str("  node [shape=circle];\n");
    for (q, name) in a.states().iter().enumerate() {
        let mut attrs = Vec::new();
        if a.is_marked(q) {
            attrs.push("shape=doublecircle".to_string());
        }
        if a.is_unsafe(q) {
            attrs.push("color=red".to_string());
        }
        if a.initial_opt() == Some(q) {
            attrs.push("penwidth=2".to_string());
        }
        let _ = writeln!(out, "  s{q} [label={}{}];", quote(name), prefixed(&attrs));
    }
    for (q, e, t) in a.transitions() {
        let ev = a.event(e);
        let style = if ev.observable { "" } else { ", style=dotted" };
        let _ = writeln!(out, "  s{q} -> s{t} [label={}{style}];", quote(&ev.name));
    }
    out.push_str("}\n");
    out
}

fn prefixed(attrs: &[String]) -> String {
    attrs.iter().map(|a| format!(", {a}")).collect()
}

pub fn rbts_to_dot(t: &Rbts, c: &CompositeModel) -> String {
    let mut out = String::new();
    out.push_str("digraph rbts {\n");
    for (y, node) in t.y_nodes().iter().enumerate() {
        let mut attrs = vec!["shape=box".to_string()];
        if node.goal {
            attrs.push("peripheries=2".into());
        }
        if y == t.initial() {
            attrs.push("penwidth=2".into());
        }
        let _ = writeln!(
            out,
            "  y{y} [label={}, {}];",
            quote(&c.display(&node.estimate).to_string()),
            attrs.join(", ")
        );
    }
    for (z, node) in t.z_nodes().iter().enumerate() {
        let label = format!(
            "{}\\n{}",
            c.display(&t.y(node.source).estimate),
            c.display_decision(&node.decision)
        );
        let style = match node.status {
            ZStatus::Live => "style=rounded",
            ZStatus::Pruned(_) => "style=\"rounded,dashed\", color=gray, fontcolor=gray",
        };
        let _ = writeln!(
            out,
            "  z{z} [label=\"{}\", shape=box, {style}];",
            label.replace('"', "\\\"")
        );
    }
    for (z, node) in t.z_nodes().iter().enumerate() {
        let decision = quote(&c.display_decision(&node.decision).to_string());
        let edge_style = match node.status {
            ZStatus::Pruned(_) => ", style=dashed, color=gray",
            ZStatus::Live if t.strategy(node.source) == Some(z) => ", style=bold",
            ZStatus::Live => "",
        };
        let _ = writeln!(
            out,
            "  y{} -> z{z} [label={decision}{edge_style}];",
            node.source
        );
        for &(e, y) in &node.observations {
            let _ = writeln!(out, "  z{z} -> y{y} [label={}];", quote(c.event_name(e)));
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::Event;
    use crate::mission::MissionModel;
    use crate::rbts::{build_rbts, initial_y, InitialY, SynthConfig};

    fn node_lines(dot: &str) -> usize {
        dot.lines()
            .filter(|l| {
                let l = l.trim_start();
                l.contains(" [label=") && !l.contains("->")
            })
            .count()
    }

    #[test]
    fn single_state_automaton() {
        let mut a = Automaton::new("one");
        a.add_state("q").unwrap();
        a.add_event(Event::controllable("a")).unwrap();
        a.add_transition("q", "a", "q").unwrap();
        a.set_initial("q").unwrap();
        let dot = automaton_to_dot(&a);
        assert!(dot.starts_with("digraph \"one\" {"));
        assert_eq!(node_lines(&dot), 1);
        assert!(dot.contains("s0 -> s0 [label=\"a\"]"));
    }

    #[test]
    fn trial_one_export() {
        let m = MissionModel::default();
        let InitialY::Ready(y) = initial_y(&m, &m.zone_estimate(&[1, 2]).unwrap()).unwrap() else {
            panic!("unsafe start");
        };
        let t = build_rbts(&m, &y, &SynthConfig::default()).unwrap();
        let dot = rbts_to_dot(&t, m.composite());
        assert_eq!(node_lines(&dot), t.y_nodes().len() + t.z_nodes().len());
        assert!(dot
            .lines()
            .any(|l| l.contains("-> z") && l.contains("style=dashed") && l.contains("{m_n}∪Σ_uc")));
        assert!(dot.contains("peripheries=2"));
        assert!(dot.contains("style=rounded"));
    }
}
