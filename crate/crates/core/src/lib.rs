//! Frequency-domain radiative transport tomography on a disk.
//!
//! Synthesizes angularly averaged boundary data (ballistic, single and
//! multiple scattering), inverts it by band-limited filtered backprojection,
//! refines the reconstruction by subtracting modelled multiple scattering,
//! and checks the stationary-phase estimates the method relies on.

pub mod error;
pub mod exec;
pub mod fields;
pub mod forward;
pub mod geometry;
pub mod inversion;
pub mod oscphase;
pub mod quad;
pub mod xray;

pub use error::{Error, Result};
pub use geometry::{DiskDomain, ParallelCoord, SinogramLayout, Vec2};
