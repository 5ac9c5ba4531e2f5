//! Lattice Boltzmann model of a microbial fuel cell anode compartment.
//!
//! Two D2Q9 BGK solvers (pore flow and substrate transport) are coupled with
//! an agent-based biofilm and a mediator-based bio-electrochemical model on an
//! hourly outer clock.

pub mod ade;
pub mod bench;
pub mod biofilm;
pub mod config;
pub mod d2q9;
pub mod electrochem;
pub mod error;
pub mod flow;
pub mod grid;
pub mod output;
pub mod sim;

pub use error::{Error, Result};
