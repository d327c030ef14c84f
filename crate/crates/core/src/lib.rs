//! Discrete Dolbeault calculus for flat unitary bundles over closed
//! triangulated surfaces of genus ≥ 2, and certificates for the second
//! variation of the L² metric on the moduli of pairs (complex structure,
//! flat unitary bundle).
//!
//! Layers, bottom up: [`surface`] (meshes and charts), [`calculus`]
//! (scalar P1 operators and the wedge/Hodge conventions), [`bundle`]
//! (twisted complexes for `End E` and `TX`), [`tangent`] (harmonic tangent
//! vectors), [`variation`] (first and second variation terms), [`oracle`]
//! (dense reference operators) and [`batch`] (data-parallel drivers).

pub mod batch;
pub mod bundle;
pub mod calculus;
pub mod error;
pub mod oracle;
pub mod surface;
pub mod tangent;
pub mod variation;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex64;
pub type Mat = nalgebra::DMatrix<C64>;
