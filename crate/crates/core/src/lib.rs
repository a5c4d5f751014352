//! Detuning-robust pulse sequences for non-adiabatic geometric single-qubit
//! gates in a three-level Λ system.
//!
//! A gate is driven by two consecutive two-color pulse pairs. The first pair
//! (pulse area π) rotates the qubit by π about the axis n̂(θ, φ); the second
//! pair (area 2π, parameters (π − θ, π + φ)) acts only on the former dark
//! state so that any detuning-dependent phase becomes global. The shared
//! envelope is a constant plus a truncated cosine series whose coefficients
//! are tuned for a flat fidelity-versus-detuning response.
//!
//! Module map:
//!
//! * [`gate_algebra`]: ideal qubit operators, dark/bright basis, targets.
//! * [`pulse_model`]: envelopes, coefficient constraints, sequence assembly.
//! * [`dynamics`]: RK4 propagation of the detuned three-level equations.
//! * [`optimizer`]: minimax direct search over the free coefficients.
//! * [`analysis`]: detuning sweeps, baselines, a₂ robustness maps.
//! * [`awg_export`]: two-tone RF synthesis and waveform files.
//!
//! Units: times in µs, angular frequencies in rad/µs. Frequencies shown to
//! humans (kHz, MHz) are cyclic, i.e. Ω/2π; see [`units`].

pub mod analysis;
pub mod awg_export;
pub mod dynamics;
pub mod error;
pub mod format;
pub mod gate_algebra;
pub mod optimizer;
pub mod presets;
pub mod pulse_model;
pub mod units;

pub use error::{Error, Result};
