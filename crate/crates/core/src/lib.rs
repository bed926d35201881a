//! Analysis and simulation toolkit for laser-activated colour centres.
//!
//! The library has two halves that close a loop on each other:
//!
//! * **Analysis** — photoluminescence spectra ([`spectrum`]), vibronic
//!   lineshape synthesis and Huang–Rhys fitting ([`vibronic`]), photon
//!   autocorrelation ([`hbt`]), emission polarimetry ([`polarimetry`]), and
//!   emitter-grid localization ([`localization`]).
//! * **Simulation** — a stochastic defect state machine for implantation and
//!   laser annealing ([`kinetics`]) plus the SPAD-feedback controller that
//!   drives it ([`feedback`]). The simulator provides ground truth against
//!   which the analysis half is validated.
//!
//! File codecs, campaign configuration, and report emission live in [`io`].
//!
//! Batch operations run data-parallel over sites/spectra when the `parallel`
//! feature (default) is enabled; every parallel entry point has a sequential
//! twin with a `_seq` suffix that produces bit-identical results.

pub mod error;
pub mod exec;
pub mod feedback;
pub mod fit;
pub mod hbt;
pub mod io;
pub mod kinetics;
pub mod localization;
pub mod polarimetry;
pub mod rng;
pub mod spectrum;
pub mod vibronic;

pub use error::{Error, Result};
pub use spectrum::{Spectrum, SpectralWindow, PeakFit};
