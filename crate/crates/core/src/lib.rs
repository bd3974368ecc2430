//! Deterministic collapse simulator driven by pseudorandom absolute phase
//! constants.
//!
//! An incoming wavepacket carries a phase constant `α1`; every cluster of the
//! detecting screen carries its own `α2`. A contraction happens at the first
//! cluster whose phase lies within `αs/2` of the packet's and whose coverage
//! `K` is at least `α2/2π`. Nothing in a run is random in the strict sense:
//! all phases come from seeded streams, and ensembles of such deterministic
//! trials are checked against the Born rules by the [`analysis`] module.
//!
//! The numerical core is generic over [`Real`]; the aliases below fix it to
//! `f64`, which is what the scenarios and the command-line tool use.

pub mod analysis;
pub mod collapse;
pub mod cli;
pub mod config;
pub mod io;
pub mod legacy_grid;
pub mod phases;
pub mod quadrature;
pub mod scalar;
pub mod scenarios;
pub mod screen;
pub mod wavepackets;

pub use scalar::Real;

pub type PhaseConstant = phases::Phase<f64>;
pub type WavepacketField = wavepackets::Field<f64>;
pub type Superposition = wavepackets::Superposition<f64>;
pub type Cluster = screen::Cluster<f64>;
pub type Screen = screen::Screen<f64>;
pub type Rect = quadrature::Rect<f64>;
pub type Constants = collapse::Constants<f64>;
pub type SpotRecord = collapse::SpotRecord<f64>;
pub type Apparatus = collapse::Apparatus<f64>;

pub use phases::SeededStream;
