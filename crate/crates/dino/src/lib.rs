//! Pipeline around [`dino_core`]: on-disk dataset, bases, run and report
//! formats, thread-pool execution, and the `dino` command-line tool.

pub mod cli;
mod error;
pub mod exec;
pub mod io;
pub mod pipeline;

pub use error::{Error, Result};
