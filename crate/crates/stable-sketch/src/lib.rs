pub mod bounds;
pub mod calibration;
pub mod error;
pub mod estimators;
pub mod rng;
pub mod select;
pub mod simlab;
pub mod sketch;
pub mod stable;
