//! List-decodable subspace recovery with low-degree moment relaxations.
//!
//! The pipeline: [`datagen`] plants a subspace among outliers, [`program`]
//! compiles the selector/projection polynomial system into a conic program,
//! [`sdp`] solves it with a Frobenius-norm objective, and [`decoder`] rounds
//! the resulting pseudoexpectation into a short list of projections.

pub mod datagen;
pub mod decoder;
pub mod experiment;
pub mod matrix_serde;
pub mod moment;
pub mod par;
pub mod program;
pub mod rng;
pub mod sdp;
