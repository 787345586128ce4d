pub mod al;
pub mod augment;
pub mod cli;
pub mod coldstart;
pub mod config;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod nn;
pub mod pool;
pub mod rng;
pub mod selection;
pub mod verify;

pub use error::{Error, Result};
