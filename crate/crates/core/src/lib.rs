//! Workload-dynamics evaluation for object databases.
//!
//! The crate is a pipeline of independent stages:
//!
//! * [`db`] generates an OCB-style class graph and object graph.
//! * [`workload`] executes OCB operations from a root object and records
//!   the objects each transaction touched.
//! * [`hregion`] and [`protocol`] decide which root each transaction starts
//!   from, and how that choice drifts over time.
//! * [`sim`] replays the resulting trace through a paged store with an LRU or
//!   CLOCK buffer, and [`cluster`] plugs dynamic clustering policies into it.
//! * [`harness`] wires everything into H sweeps and reports.

pub mod cluster;
pub mod config;
pub mod db;
pub mod error;
pub mod harness;
pub mod hregion;
pub mod ids;
pub mod protocol;
pub mod rng;
pub mod sim;
pub mod trace;
pub mod workload;

pub use error::{Error, Result};
pub use ids::{ClassId, Oid, PageId, RefType};
