//! Scenario runner and self-test for the `stereoloc` library.

pub mod config;
pub mod oracle;
pub mod report;
pub mod run;
pub mod selftest;
pub mod sweep;
