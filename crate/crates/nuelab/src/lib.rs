//! Numerical laboratory for randomly perturbed non-uniformly expanding maps.
//!
//! The crate is organised bottom-up:
//!
//! * [`dynamics`] — phase spaces, the map catalog, additive noise and random orbits;
//! * [`hyperbolic`] — truncated distances, Pliss times, hyperbolic times, tail sets;
//! * [`inducing`] — base points, hyperbolic pre-balls and the induced Gibbs–Markov map of a circle map;
//! * [`measures`] — Ulam matrices, stationary and empirical densities, transfer operators,
//!   tower projection, Lyapunov spectra and the stochastic-stability sweep.
//!
//! Every random quantity is drawn from a ChaCha stream keyed by `(seed, domain, index)`, so
//! results never depend on the number of worker threads.

pub mod dynamics;
pub mod hyperbolic;
pub mod inducing;
pub mod measures;
pub mod rng;
