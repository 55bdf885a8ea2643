//! Dynamic traffic distribution for urban road networks.
//!
//! The pipeline runs from a raw street graph to simulated key performance
//! indicators:
//!
//! * [`prep`] simplifies the graph (non-drivable streets, degree-two chains,
//!   roundabouts) into a [`net::Network`];
//! * [`routes`] enumerates diverse candidate routes and their time windows;
//! * [`schedule`] holds the discrete-time route-and-timing model, its rule
//!   checker and objective;
//! * [`solver`] optimizes that model exactly and reads/writes its fact form;
//! * [`sim`] runs a mesoscopic simulation with a rolling-horizon controller.

pub mod ids;
pub mod net;
pub mod prep;
pub mod routes;
pub mod schedule;
pub mod solver;
pub mod sim;
pub mod synth;
pub mod scenario;
pub mod cli;
