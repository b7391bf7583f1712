//! Core types for composing blockchains into overlay protocols: ledgers and
//! their algebra, certificates, a deterministic network simulator,
//! simulated underlay chains and the serial, lvl and lvs composition gates.

pub mod bits;
pub mod cert;
pub mod digest;
pub mod gate;
pub mod ledger;
pub mod lvl;
pub mod oft;
pub mod simnet;
pub mod underlay;
pub mod view;
pub mod world;
