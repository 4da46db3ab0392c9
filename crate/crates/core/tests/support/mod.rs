//! Oracles shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

pub mod ad;
pub mod frac;
