//! Six-degree-of-freedom simulation of a gliding aquatic-aerial robot with
//! collapsible pectoral wings.

pub mod actuator;
pub mod aero;
pub mod config;
pub mod error;
pub mod experiments;
pub mod hydro;
pub mod model;
pub mod sim;

pub use error::{Error, ErrorCategory, Result};
pub use model::{BodyState, Environment, Mat3, RobotParams, Vec3};
