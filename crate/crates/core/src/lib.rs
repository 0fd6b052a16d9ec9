//! Peak age-of-information violation bounds for sensory packets on an
//! ISAC-enabled vehicle-to-infrastructure link.
//!
//! The analytic chain runs from the finite-blocklength rate ([`fbc`]) and the
//! Swerling-I detection probability ([`sensing`]) through the inter-arrival
//! and service-time MGFs ([`sensing`], [`service`]) to the stochastic
//! network calculus bound and its optimization over `θ` and the power split
//! `α` ([`bound`]). [`sim`] simulates the same system event by event.

pub mod bound;
pub mod error;
pub mod fbc;
pub mod params;
pub mod quad;
pub mod sensing;
pub mod service;
pub mod sim;

pub use error::{Error, MgfConstraint, Result};
pub use params::{load_params, SystemParams};
pub use sensing::ArrivalModel;
pub use service::{GainMode, MgfForm, ServiceModel};
pub use bound::{BoundResult, SystemModel};
pub use sim::{PacketTrace, SimStats, Simulator};
