//! Simulation and analysis toolkit for CMOS-integrated kinetic-inductance
//! resonators read out through a single-electron transistor.
//!
//! The crate is organised bottom-up:
//!
//! - [`film`]: TiN thin-film kinetic inductance, switching and normal-state behaviour.
//! - [`resonator`]: lumped-element reflectometry network, resonance extraction and the
//!   self-consistent nonlinear operating point.
//! - [`set_device`]: constant-interaction Coulomb-blockade conductance model.
//! - [`readout`]: noisy IQ trace synthesis and boxcar downsampling.
//! - [`estimator`]: least-squares fitting, 2D Gaussian blob fits, SNR and `t_min`.
//! - [`harness`]: configuration, sweep recipes and tabular output used by the CLI.
//!
//! Public interfaces use laboratory units (µm, nm, K, µA, nH, kΩ, fF, aF, dBm);
//! everything is converted to SI internally.

pub mod consts;
pub mod estimator;
pub mod film;
pub mod harness;
pub mod readout;
pub mod resonator;
pub mod rng;
pub mod set_device;

pub use estimator::{BlobFit, FitError, FitReport, SnrPoint};
pub use film::{BiasState, FilmError, FilmSpec, FilmType, ThermalState};
pub use readout::{ChainSpec, IqTrace, ReadoutError};
pub use resonator::{
    FilmState, Inductor, OperatingPoint, ResonanceSummary, ResonatorError, ResonatorSpec,
};
pub use set_device::{BiasPoint, SetSpec};
