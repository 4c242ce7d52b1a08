//! Contact graph routing over time-varying satellite networks.

pub mod constellation;
pub mod cli;
pub mod contactplan;
pub mod error;
pub mod forwarding;
pub mod routesearch;
pub mod simcore;
pub mod traffic;
pub mod tsrcg;

pub use error::{Error, Result};
