//! Text formats: mission model files, estimates and supervisor files.
//!
//! A model file is a sequence of sections. A document holding only a `map`
//! section stands for the standard mission automata built on that map.
//!
//! ```text
//! map
//! rows 5
//! cols 5
//! or_zone 13
//! unsafe 10 16
//! base A
//! end
//!
//! automaton exploration G_E
//! event s_n controllable observable
//! state R O M
//! initial R
//! marked R
//! trans R s_n O
//! end
//!
//! composite navigation exploration scanning
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::automata::{AutomataError, Automaton, ControlDecision, Event, StateEstimate};
use crate::mission::{
    build_grid_map, GridMap, MissionModel, MissionParts, ModelError, SubZone, Zone,
};
use crate::rbts::RecoverySupervisor;

/// Automaton roles in the order they appear in a model file.
pub const ROLES: [&str; 7] = [
    "navigation",
    "exploration",
    "scanning",
    "inner",
    "nominal",
    "secondary",
    "mode_switcher",
];

const COMPOSITE: [&str; 3] = ["navigation", "exploration", "scanning"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("line {line}, column {column}: {msg}")]
    Syntax {
        line: usize,
        column: usize,
        msg: String,
    },
    #[error("{0}")]
    Semantic(String),
}

impl From<ModelError> for FormatError {
    fn from(e: ModelError) -> Self {
        FormatError::Semantic(e.to_string())
    }
}

impl From<AutomataError> for FormatError {
    fn from(e: AutomataError) -> Self {
        FormatError::Semantic(e.to_string())
    }
}

struct Line<'a> {
    number: usize,
    tokens: Vec<(usize, &'a str)>,
}

impl<'a> Line<'a> {
    fn syntax(&self, idx: usize, msg: impl Into<String>) -> FormatError {
        let column = self
            .tokens
            .get(idx)
            .or(self.tokens.last())
            .map_or(1, |t| t.0);
        FormatError::Syntax {
            line: self.number,
            column,
            msg: msg.into(),
        }
    }

    fn keyword(&self) -> &'a str {
        self.tokens[0].1
    }

    fn args(&self) -> impl Iterator<Item = &'a str> + '_ {
        self.tokens[1..].iter().map(|t| t.1)
    }

    fn arity(&self, n: usize) -> Result<(), FormatError> {
        if self.tokens.len() != n + 1 {
            return Err(self.syntax(
                self.tokens.len().min(n + 1),
                format!("`{}` takes {n} argument(s)", self.keyword()),
            ));
        }
        Ok(())
    }

    fn number<T: std::str::FromStr>(&self, idx: usize) -> Result<T, FormatError> {
        self.tokens[idx].1.parse().map_err(|_| {
            self.syntax(
                idx,
                format!("expected a number, found `{}`", self.tokens[idx].1),
            )
        })
    }

    fn semantic<T>(&self, r: Result<T, AutomataError>) -> Result<T, FormatError> {
        r.map_err(|e| FormatError::Semantic(format!("line {}: {e}", self.number)))
    }
}

fn tokenize(text: &str) -> Vec<Line<'_>> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = Vec::new();
        let mut start = None;
        for (pos, ch) in content
            .char_indices()
            .chain(std::iter::once((content.len(), ' ')))
        {
            match (ch.is_whitespace(), start) {
                (false, None) => start = Some(pos),
                (true, Some(s)) => {
                    tokens.push((content[..s].chars().count() + 1, &content[s..pos]));
                    start = None;
                }
                _ => {}
            }
        }
        if !tokens.is_empty() {
            lines.push(Line {
                number: i + 1,
                tokens,
            });
        }
    }
    lines
}

fn parse_map(lines: &[Line<'_>], header: &Line<'_>) -> Result<GridMap, FormatError> {
    let (mut rows, mut cols, mut or_zone, mut base) = (None, None, None, None);
    let mut unsafe_zones = BTreeSet::new();
    for line in lines {
        match line.keyword() {
            "rows" => {
                line.arity(1)?;
                rows = Some(line.number::<u32>(1)?);
            }
            "cols" => {
                line.arity(1)?;
                cols = Some(line.number::<u32>(1)?);
            }
            "or_zone" => {
                line.arity(1)?;
                or_zone = Some(line.number::<Zone>(1)?);
            }
            "unsafe" => {
                for i in 1..line.tokens.len() {
                    unsafe_zones.insert(line.number::<Zone>(i)?);
                }
            }
            "base" => {
                line.arity(1)?;
                base = Some(
                    SubZone::parse(line.tokens[1].1)
                        .ok_or_else(|| line.syntax(1, "expected a sub-zone A, B, C or D"))?,
                );
            }
            other => return Err(line.syntax(0, format!("unknown map field `{other}`"))),
        }
    }
    let missing = |f: &str| header.syntax(0, format!("map section lacks `{f}`"));
    let map = build_grid_map(
        rows.ok_or_else(|| missing("rows"))?,
        cols.ok_or_else(|| missing("cols"))?,
        or_zone.ok_or_else(|| missing("or_zone"))?,
        unsafe_zones,
        base.unwrap_or(SubZone::A),
    )?;
    Ok(map)
}

fn flag(line: &Line<'_>, idx: usize, yes: &str, no: &str) -> Result<bool, FormatError> {
    match line.tokens[idx].1 {
        t if t == yes => Ok(true),
        t if t == no => Ok(false),
        t => Err(line.syntax(idx, format!("expected `{yes}` or `{no}`, found `{t}`"))),
    }
}

fn parse_automaton(lines: &[Line<'_>], name: &str) -> Result<Automaton, FormatError> {
    let mut a = Automaton::new(name);
    let mut marked = Vec::new();
    let mut unsafe_states = Vec::new();
    let mut initial = None;
    let mut trans = Vec::new();
    for line in lines {
        match line.keyword() {
            "event" => {
                line.arity(3)?;
                let c = flag(line, 2, "controllable", "uncontrollable")?;
                let o = flag(line, 3, "observable", "unobservable")?;
                line.semantic(a.add_event(Event::new(line.tokens[1].1, c, o)))?;
            }
            "state" => {
                for s in line.args() {
                    line.semantic(a.add_state(s))?;
                }
            }
            "initial" => {
                line.arity(1)?;
                initial = Some(line);
            }
            "marked" => marked.push(line),
            "unsafe" => unsafe_states.push(line),
            "trans" => {
                line.arity(3)?;
                trans.push(line);
            }
            other => return Err(line.syntax(0, format!("unknown automaton field `{other}`"))),
        }
    }
    for line in trans {
        let t: Vec<&str> = line.args().collect();
        line.semantic(a.add_transition(t[0], t[1], t[2]))?;
    }
    if let Some(line) = initial {
        line.semantic(a.set_initial(line.tokens[1].1))?;
    }
    for line in unsafe_states {
        for s in line.args() {
            line.semantic(a.set_unsafe(s))?;
        }
    }
    for line in marked {
        for s in line.args() {
            line.semantic(a.mark(s))?;
        }
    }
    a.validate()?;
    Ok(a)
}

/// Parses a model file and re-checks every structural invariant of the
/// mission.
pub fn parse_model(text: &str) -> Result<MissionModel, FormatError> {
    let lines = tokenize(text);
    let mut map = None;
    let mut automata: BTreeMap<&str, Automaton> = BTreeMap::new();
    let mut i = 0;
    while i < lines.len() {
        let header = &lines[i];
        let body_end = match header.keyword() {
            "map" | "automaton" => {
                let end = lines[i + 1..]
                    .iter()
                    .position(|l| l.keyword() == "end")
                    .map(|p| i + 1 + p)
                    .ok_or_else(|| header.syntax(0, "section is not closed by `end`"))?;
                if let Some(l) = lines[i + 1..end]
                    .iter()
                    .find(|l| matches!(l.keyword(), "map" | "automaton" | "composite"))
                {
                    return Err(l.syntax(0, "nested section"));
                }
                Some(end)
            }
            _ => None,
        };
        match header.keyword() {
            "map" => {
                header.arity(0)?;
                if map.is_some() {
                    return Err(header.syntax(0, "duplicate map section"));
                }
                let end = body_end.unwrap();
                map = Some(parse_map(&lines[i + 1..end], header)?);
                i = end + 1;
            }
            "automaton" => {
                header.arity(2)?;
                let role = header.tokens[1].1;
                let Some(&role) = ROLES.iter().find(|r| **r == role) else {
                    return Err(header.syntax(1, format!("unknown automaton role `{role}`")));
                };
                if automata.contains_key(role) {
                    return Err(header.syntax(1, format!("duplicate automaton `{role}`")));
                }
                let end = body_end.unwrap();
                automata.insert(
                    role,
                    parse_automaton(&lines[i + 1..end], header.tokens[2].1)?,
                );
                i = end + 1;
            }
            "composite" => {
                let order: Vec<&str> = header.args().collect();
                if order != COMPOSITE {
                    return Err(FormatError::Semantic(format!(
                        "line {}: composite order must be `{}`",
                        header.number,
                        COMPOSITE.join(" ")
                    )));
                }
                i += 1;
            }
            other => return Err(header.syntax(0, format!("unexpected `{other}`"))),
        }
    }
    let map = map.ok_or_else(|| FormatError::Semantic("missing map section".into()))?;
    if automata.is_empty() {
        return Ok(MissionModel::new(map));
    }
    let mut take = |role: &str| {
        automata
            .remove(role)
            .ok_or_else(|| FormatError::Semantic(format!("missing automaton `{role}`")))
    };
    let parts = MissionParts {
        navigation: take("navigation")?,
        exploration: take("exploration")?,
        scanning: take("scanning")?,
        inner: take("inner")?,
        nominal: take("nominal")?,
        secondary: take("secondary")?,
        mode_switcher: take("mode_switcher")?,
    };
    Ok(MissionModel::from_parts(map, parts)?)
}

pub fn serialize_map(map: &GridMap) -> String {
    let mut out = String::from("map\n");
    let _ = writeln!(out, "rows {}", map.rows());
    let _ = writeln!(out, "cols {}", map.cols());
    let _ = writeln!(out, "or_zone {}", map.or_zone());
    if !map.unsafe_zones().is_empty() {
        let zs: Vec<String> = map.unsafe_zones().iter().map(|z| z.to_string()).collect();
        let _ = writeln!(out, "unsafe {}", zs.join(" "));
    }
    let _ = writeln!(out, "base {}", map.base_subzone().name());
    out.push_str("end\n");
    out
}

fn serialize_automaton(out: &mut String, role: &str, a: &Automaton) {
    let _ = writeln!(out, "automaton {role} {}", a.name());
    for ev in a.events() {
        let _ = writeln!(
            out,
            "event {} {} {}",
            ev.name,
            if ev.controllable {
                "controllable"
            } else {
                "uncontrollable"
            },
            if ev.observable {
                "observable"
            } else {
                "unobservable"
            }
        );
    }
    let _ = writeln!(out, "state {}", a.states().join(" "));
    if let Some(q) = a.initial_opt() {
        let _ = writeln!(out, "initial {}", a.state_name(q));
    }
    let names =
        |set: &BTreeSet<usize>| -> Vec<&str> { set.iter().map(|&q| a.state_name(q)).collect() };
    if !a.marked().is_empty() {
        let _ = writeln!(out, "marked {}", names(a.marked()).join(" "));
    }
    if !a.unsafe_states().is_empty() {
        let _ = writeln!(out, "unsafe {}", names(a.unsafe_states()).join(" "));
    }
    for (q, e, t) in a.transitions() {
        let _ = writeln!(
            out,
            "trans {} {} {}",
            a.state_name(q),
            a.event(e).name,
            a.state_name(t)
        );
    }
    out.push_str("end\n");
}

/// Full model file: map, every automaton, and the composite order.
pub fn serialize_model(m: &MissionModel) -> String {
    let mut out = serialize_map(m.map());
    let automata = [
        m.navigation(),
        m.exploration(),
        m.scanning(),
        m.inner(),
        m.nominal_supervisor(),
        m.secondary_supervisor(),
        m.mode_switcher(),
    ];
    for (role, a) in ROLES.iter().zip(automata) {
        out.push('\n');
        serialize_automaton(&mut out, role, a);
    }
    let _ = writeln!(out, "\ncomposite {}", COMPOSITE.join(" "));
    out
}

/// Parses a zone list such as `1,2,6,7`.
pub fn parse_zone_list(text: &str) -> Result<Vec<Zone>, FormatError> {
    let text = text.trim().trim_start_matches('{').trim_end_matches('}');
    let mut zones = Vec::new();
    for (i, part) in text.split(',').enumerate() {
        let part = part.trim();
        let z = part.parse::<Zone>().map_err(|_| FormatError::Syntax {
            line: 1,
            column: i + 1,
            msg: format!("expected a zone number, found `{part}`"),
        })?;
        zones.push(z);
    }
    Ok(zones)
}

/// Parses an estimate in tuple notation, e.g. `({1,2},{R},{I})`.
pub fn parse_estimate(m: &MissionModel, text: &str) -> Result<StateEstimate, FormatError> {
    let syntax = |column: usize, msg: &str| FormatError::Syntax {
        line: 1,
        column,
        msg: msg.to_string(),
    };
    let chars: Vec<char> = text.trim().chars().collect();
    if chars.first() != Some(&'(') || chars.last() != Some(&')') {
        return Err(syntax(1, "estimate must be enclosed in parentheses"));
    }
    let mut cells: Vec<Vec<String>> = Vec::new();
    let mut pos = 1;
    while pos < chars.len() - 1 {
        if chars[pos] != '{' {
            return Err(syntax(pos + 1, "expected `{`"));
        }
        let close = chars[pos..]
            .iter()
            .position(|&c| c == '}')
            .map(|p| pos + p)
            .ok_or_else(|| syntax(pos + 1, "unclosed `{`"))?;
        let inner: String = chars[pos + 1..close].iter().collect();
        cells.push(
            inner
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect(),
        );
        pos = close + 1;
        if pos < chars.len() - 1 {
            if chars[pos] != ',' {
                return Err(syntax(pos + 1, "expected `,`"));
            }
            pos += 1;
        }
    }
    let refs: Vec<Vec<&str>> = cells
        .iter()
        .map(|c| c.iter().map(String::as_str).collect())
        .collect();
    let slices: Vec<&[&str]> = refs.iter().map(Vec::as_slice).collect();
    Ok(m.composite().estimate(&slices)?)
}

fn decision_tokens(m: &MissionModel, d: &ControlDecision) -> String {
    let c = m.composite();
    let ctrl: Vec<&str> = d
        .enabled
        .iter()
        .filter(|&&e| c.event(e).controllable)
        .map(|&e| c.event_name(e))
        .collect();
    if ctrl.is_empty() {
        "-".into()
    } else {
        ctrl.join(",")
    }
}

/// One rule per line: the estimate, then the enabled controllable events
/// (`-` for none). Uncontrollable events are always enabled.
///
/// ```text
/// initial ({1,2},{R},{I})
/// rule ({1,2},{R},{I}) s_n
/// ```
pub fn serialize_supervisor(m: &MissionModel, sup: &RecoverySupervisor) -> String {
    let c = m.composite();
    let mut out = String::new();
    let _ = writeln!(out, "initial {}", c.display(sup.initial()));
    for (est, d) in sup.strategy() {
        let _ = writeln!(out, "rule {} {}", c.display(est), decision_tokens(m, d));
    }
    out
}

pub fn parse_supervisor(m: &MissionModel, text: &str) -> Result<RecoverySupervisor, FormatError> {
    let c = m.composite();
    let mut initial = None;
    let mut strategy = BTreeMap::new();
    for line in tokenize(text) {
        let with_line = |e: FormatError| match e {
            FormatError::Syntax { column, msg, .. } => FormatError::Syntax {
                line: line.number,
                column: column + line.tokens[1].0 - 1,
                msg,
            },
            FormatError::Semantic(msg) => {
                FormatError::Semantic(format!("line {}: {msg}", line.number))
            }
        };
        match line.keyword() {
            "initial" => {
                line.arity(1)?;
                initial = Some(parse_estimate(m, line.tokens[1].1).map_err(with_line)?);
            }
            "rule" => {
                line.arity(2)?;
                let est = parse_estimate(m, line.tokens[1].1).map_err(with_line)?;
                let mut ctrl = Vec::new();
                if line.tokens[2].1 != "-" {
                    for name in line.tokens[2].1.split(',') {
                        let e = line.semantic(c.event_id(name))?;
                        if !c.event(e).controllable {
                            return Err(line.syntax(2, format!("`{name}` is not controllable")));
                        }
                        ctrl.push(e);
                    }
                }
                if strategy.insert(est, c.decision(ctrl)).is_some() {
                    return Err(line.syntax(1, "duplicate rule"));
                }
            }
            other => return Err(line.syntax(0, format!("unexpected `{other}`"))),
        }
    }
    let initial =
        initial.ok_or_else(|| FormatError::Semantic("missing initial estimate".into()))?;
    Ok(RecoverySupervisor::new(initial, strategy))
}
