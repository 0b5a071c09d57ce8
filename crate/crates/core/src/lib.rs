//! Two-state vector formalism: pre- and post-selected quantum systems.

pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod measurement;
pub mod multistate;
pub mod observables;
pub mod oracle;
pub mod scenarios;
pub mod spin;
pub mod two_state;

pub use error::{Error, Result};
pub use linalg::{Operator, StateVector, C64};
pub use two_state::{make_generic, TwoState, TwoStateBasis};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
