//! Simulation library for marker-free last-mile drone delivery.
//!
//! The pipeline estimates a safe descent spot from an aerial semantic grid,
//! descends, and searches for the front door along the house footprint. A
//! frontier-exploration baseline and a batch harness compare the two on
//! procedurally generated houses.

pub mod baseline;
pub mod descent;
pub mod edt;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod navigation;
pub mod occupancy;
pub mod semantics;
pub mod simworld;
