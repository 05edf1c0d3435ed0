// SPDX-License-Identifier: Apache-2.0

pub mod cli;
pub mod echo;
pub mod error;
pub mod maps;
mod optimize;
pub mod pulses;
pub mod sequences;
pub mod solver;
pub mod su2;

pub use error::{Error, Result};
