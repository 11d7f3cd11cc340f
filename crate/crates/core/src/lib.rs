//! Matrix-variate zonal, Hermite and Laguerre polynomials with exact
//! coefficient tables, Wiener-chaos coefficients of Gaussian determinants,
//! intrinsic volumes of ellipsoids, Mehler-type operators, and arithmetic
//! random wave experiments on the three-torus.

pub mod acceptance;
pub mod arw;
pub mod chaos;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod matpoly;
pub mod mehler;
pub mod partitions;
pub mod sampling;
pub mod stats;
pub mod symfun;
pub mod zonal;

pub use error::{Error, Result};
pub use partitions::{Partition, Rational};
