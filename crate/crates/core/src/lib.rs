//! Unit-root, cointegration and integral-fit tools for annual macroeconomic
//! series linking inflation, unemployment and labor-force growth.

pub mod critical;
pub mod dataset;
pub mod dist;
pub mod engle_granger;
pub mod error;
pub mod integral;
pub mod johansen;
pub mod regression;
pub mod report;
pub mod series;
pub mod sim;
pub mod unit_root;
pub mod var;

pub use error::{Error, Result};
pub use series::{AnnualSeries, Units, Window};
