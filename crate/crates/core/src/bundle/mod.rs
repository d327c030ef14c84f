//! Flat unitary bundles, their `End E` and `TX` Dolbeault complexes, and the
//! adjoint action.

pub mod ad;
pub mod cochain;
pub mod cocycle;
pub mod complex;

pub use ad::{ad_on_scalar, ad_star, calibrate_ad_star, AD_STAR_CONSTANT};
pub use cochain::{BundleCochain, CochainKind};
pub use cocycle::{GeneratorSet, UnitaryCocycle};
pub use complex::{SolveInfo, SolverConfig, SolverMethod, TwistedComplex};
