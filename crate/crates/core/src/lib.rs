//! Recovery toolkit for desynchronized drones in a patrolling swarm.
//!
//! * [`automata`]: deterministic automata, composition and state estimation.
//! * [`mission`]: the grid map and the mission automata.
//! * [`rbts`]: recovery supervisor synthesis and online execution.
//! * [`sim`]: tick-based swarm simulation with fault injection.
//! * [`trace`]: event trace records.
//! * [`io`]: text formats for models and supervisors.
//! * [`dot`]: Graphviz export.
//! * [`trials`]: benchmark trials and model verification.

pub mod automata;
pub mod dot;
pub mod io;
pub mod mission;
pub mod rbts;
pub mod sim;
pub mod trace;
pub mod trials;
