//! Perimeter-defense game on a hemispherical boundary.

pub mod assignment;
pub mod baselines;
pub mod emfac;
pub mod engine;
pub mod geometry;
pub mod neural;
mod numeric;
