//! Tract-level passenger-vehicle CO₂e inventories and spatial econometric
//! models of vehicle miles traveled.

pub mod econometrics;
pub mod ef_model;
pub mod error;
pub mod format;
pub mod geo;
pub mod geo_io;
pub mod inventory;
pub mod io;
pub mod scenario;
pub mod synth;
pub mod weights;

pub use error::{Error, ErrorClass, Result};
