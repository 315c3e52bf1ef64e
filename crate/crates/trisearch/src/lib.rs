//! Multi-robot search and formation simulator on a shared triangular lattice.

pub mod consensus;
pub mod formation;
pub mod harness;
pub mod motion;
pub mod netsim;
pub mod search;
pub mod topomap;
pub mod trigrid;
pub mod world;
