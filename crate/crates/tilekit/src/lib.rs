//! Anisotropic time-frequency analysis at desk scale: dyadic geometry,
//! tiles and trees, wave packets, maximally modulated multiplier operators,
//! mass/energy decompositions, and a verification harness that certifies
//! the library's inequalities empirically.

pub mod error;
pub mod decomposition;
pub mod geometry;
pub mod generator;
pub mod grid;
pub mod multipliers;
pub mod mass_energy;
pub mod operators;
pub mod report;
pub mod tiles;
pub mod verify;
pub mod wavepackets;

pub use error::{Result, TilekitError};
