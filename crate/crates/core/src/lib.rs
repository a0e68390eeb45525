//! Resource-allocation core for multi-device edge inference over a shared
//! sensing / computation / communication budget.
//!
//! Each device senses a feature vector, quantizes it, and transmits it to an
//! edge server that fuses all features and classifies the observation.  The
//! quality of the fused features is measured by a discriminant gain: a sum of
//! per-feature, per-class-pair ratios whose denominators collect every noise
//! source (sensing noise, clutter, sensing-power-limited distortion `S`, and
//! quantization distortion `D`).  This crate maximizes that gain over
//! per-device sensing power, transmit energy, communication time, and
//! quantization resolution, subject to a shared latency budget and per-device
//! energy and channel-capacity budgets.
//!
//! The solver stack, bottom up:
//!
//! * [`model`] — domain types, the gain expression, capacity and
//!   quantization-rate expressions, feasibility checking, and the variable
//!   transform between physical controls and distortion coordinates.
//! * [`solver`] — the fractional-programming outer loop (auxiliary ratio
//!   weights), the inner convex subproblem split into a per-device
//!   power/quantization stage and a communication-time stage, plus the three
//!   single-coordinate baseline schemes.
//! * [`oracle`] — an independent brute-force grid search and a KKT residual
//!   checker used to certify solver output on small instances.
//! * [`scenario`] — seeded generation of channels, device profiles, and
//!   synthetic class statistics.
//! * [`evalsim`] — Monte-Carlo feature sampling, the maximum-likelihood
//!   classifier, and sweep-cell evaluation connecting gain to accuracy.
//!
//! The crate is `no_std` (with `alloc`); all file formats, the CLI, and
//! wall-clock timing live in the companion `edgegain-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod evalsim;
pub mod math;
pub mod model;
pub mod oracle;
pub mod random;
pub mod scenario;
pub mod solver;
