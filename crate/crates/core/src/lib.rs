//! Security auditing for Electron-style application bundles.
//!
//! The crate covers the full audit pipeline: reading and writing `asar`
//! archives, walking the installed module tree, matching it against an
//! advisory database, measuring how far each module trails its upstream
//! repository, simulating a Squirrel update feed (including a hijacked one),
//! and detecting tampered bundles.

pub mod advisory;
pub mod asar;
pub mod bundle;
pub mod divergence;
pub mod integrity;
pub mod net;
pub mod package;
pub mod report;
pub mod update;
