//! Harness around the bandit engine: file formats, experiment commands,
//! and report generation.
//!
//! Exit-code convention shared by every command:
//! - 0: success
//! - 1: an `--assert-*` gate failed (for CI use)
//! - 2: configuration or IO error

pub mod commands;
pub mod data;
pub mod manifest;
pub mod output;
pub mod state;

/// Exit codes used by the binary.
pub mod exit {
    pub const OK: i32 = 0;
    pub const ASSERT_FAILED: i32 = 1;
    pub const CONFIG_ERROR: i32 = 2;
}
