// SPDX-License-Identifier: Apache-2.0

pub mod aggregate;
pub mod benchmark;
pub mod checker;
pub mod config;
pub mod embed;
pub mod error;
pub mod eval;
pub mod kg;
pub mod neural;
pub mod paths;
pub mod patterns;
pub mod relatedness;
pub mod synth;

pub use error::{Error, Result};
