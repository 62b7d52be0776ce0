//! Trust-workload POMDP toolkit: model estimation from interaction logs,
//! Q-MDP transparency control, and closed-loop mission simulation.

pub mod estimation;
pub mod model;
pub mod policy;
pub mod sim;
pub mod util;
