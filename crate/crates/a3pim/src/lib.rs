//! Text formats, configuration files, reports and parallel drivers around
//! [`a3pim_core`].

pub mod config;
pub mod parallel;
pub mod report;
pub mod text;
pub mod view;

pub use a3pim_core;
