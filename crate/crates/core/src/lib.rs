//! Interpretable time-frequency convolution networks for vibration signals.
//!
//! A [`tfconv::TfConvLayer`] correlates a signal with kernels generated by a
//! parameterised time-frequency function (STTF, Chirplet, Morlet, Laplace)
//! and trains only the few control parameters of each kernel. Prepended to a
//! small 1D CNN it gives a classifier whose first layer can be read as a
//! bank of band-pass filters ([`interpret`]).

pub mod data;
pub mod error;
pub mod gradcheck;
pub mod interpret;
pub mod kernels;
pub mod math;
pub mod nn;
pub mod par;
pub mod seed;
pub mod tfconv;

pub use error::{Error, Result};
pub use kernels::{KernelFamily, KernelParams};
pub use math::{ComplexSeq, Signal};
pub use nn::{Model, Tensor};
pub use tfconv::TfConvLayer;
