//! Test oracles shared by the integration suites.
#![allow(dead_code)]

pub mod gradients;
pub mod signals;
pub mod tasks;
