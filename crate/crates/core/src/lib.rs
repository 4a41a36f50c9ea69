//! Synthesis, simulation and TRL calibration of coplanar-waveguide passive
//! microwave components.
//!
//! The crate is organised bottom-up:
//!
//! * [`netcore`]: frequency sweeps, N-port scattering matrices and the
//!   connection algebra (cascade, innerconnect, self-connect, termination).
//! * [`cpw`]: quasi-static conformal-mapping models of single and
//!   edge-coupled coplanar waveguide.
//! * [`elements`]: closed-form primitive elements (lines, coupled lines,
//!   T-junctions, one-ports, the closed-form branch-line hybrid).
//! * [`devices`]: the 20 dB coupled-line coupler, the 8-part branch-line
//!   hybrid, T-junction parasitic fitting and the design-tuning loop.
//! * [`trl`]: Thru-Reflect-Line calibration, de-embedding and a virtual
//!   four-arm probe station.
//! * [`metrics`]: return loss, isolation, coupling and insertion loss,
//!   band extraction and spec compliance.
//! * [`tsio`]: Touchstone v1 reader and writer.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cpw;
pub mod devices;
pub mod elements;
mod error;
pub mod metrics;
pub mod netcore;
pub mod optim;
pub mod trl;
pub mod tsio;

pub use error::{Error, Result};
pub use netcore::{FrequencySweep, Network, SMatrix, TransferMatrix, C64};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// System reference impedance used unless a caller asks otherwise.
pub const DEFAULT_Z0: f64 = 50.0;
