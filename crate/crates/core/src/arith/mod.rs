pub mod number;
pub mod phase;

pub use number::{frac, parse_number, rat, Rational};
pub use phase::PhaseSum;
