//! Markovian cellular-automaton decoding of the toric code under noisy
//! syndrome measurement.
//!
//! The decoder follows an attractive φ-field generated either by a 3D
//! cellular automaton ([`field::PhiField`]) or by an explicit `1/r^alpha`
//! superposition. [`engine`] drives static, synchronous, asynchronous and
//! explicit-field survival experiments; [`analysis`] turns their records into
//! curves, crossings and finite-size scaling fits. [`toom`] holds the
//! classical NEC majority automaton used as a reference eroder.

pub mod analysis;
pub mod config;
pub mod engine;
pub mod field;
pub mod records;
pub mod rules;
pub mod runner;
pub mod toom;
pub mod toric;
