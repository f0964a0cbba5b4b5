pub mod bt;
pub mod cli;
pub mod eta;
pub mod godel;
pub mod reduce;
pub mod separation;
pub mod term;
pub mod transform;
pub mod zoo;
