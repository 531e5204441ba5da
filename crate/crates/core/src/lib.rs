//! Station: a discrete-tick environment in which language-model agents live,
//! study, publish, and compete on research tasks.

pub mod action;
pub mod agent;
pub mod backends;
pub mod capsules;
pub mod config;
pub mod evaluation;
pub mod governance;
pub mod inspect;
pub mod kernel;
pub mod persistence;
pub mod research;
pub mod rooms;
