//! Pedestrian micro-simulation engine, analysis toolkit and capability
//! checklist scorer.
//!
//! The crate is organized around the simulation workflow: build the
//! environment ([`geometry`]), feed it demand ([`demand`]), describe routing
//! and behavior ([`scenario`], [`agents`]), run deterministic seeded
//! simulations ([`engine`]), quantify the results ([`analysis`]), render
//! them ([`presentation`]) and score the feature set against a capability
//! checklist ([`checklist`]). A whole model lives in one [`bundle`] file.

pub mod agents;
pub mod analysis;
pub mod bundle;
pub mod checklist;
pub mod demand;
pub mod engine;
pub mod geometry;
pub mod presentation;
pub mod scenario;
pub mod util;
