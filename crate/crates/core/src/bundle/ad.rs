//! `ad ν` on sections of `End E` and its weighted adjoint.

use super::cochain::{BundleCochain, CochainKind};
use super::complex::TwistedComplex;
use crate::calculus::FormType;
use crate::error::Result;
use crate::{Mat, C64};

/// Constant `c` in `ad*(ν, α)_f = c ρ_f⁻¹ [α_f, ν_f*]` (face value before
/// lumping) that makes [`ad_star`] the exact adjoint of [`ad_on_scalar`].
pub const AD_STAR_CONSTANT: f64 = -2.0;

const ZERO_ONE: CochainKind = CochainKind::Face(FormType::ZeroOne);

/// `[ν, x]` with `x` averaged to the face: a (0,1)-form.
pub fn ad_on_scalar(cx: &TwistedComplex, nu: &BundleCochain, x: &BundleCochain) -> Result<BundleCochain> {
    nu.expect(ZERO_ONE)?;
    let avg = cx.face_average(x)?;
    let mut out = cx.zero_form(ZERO_ONE);
    for f in 0..cx.surface().num_faces() {
        let (n, a) = (nu.site(f), avg.site(f));
        out.set_site(f, &(&n * &a - &a * &n));
    }
    Ok(out)
}

/// Adjoint of `x ↦ ad_on_scalar(ν, x)` for the vertex and (0,1) pairings.
pub fn ad_star(cx: &TwistedComplex, nu: &BundleCochain, alpha: &BundleCochain) -> Result<BundleCochain> {
    ad_star_scaled(cx, nu, alpha, AD_STAR_CONSTANT)
}

fn ad_star_scaled(cx: &TwistedComplex, nu: &BundleCochain, alpha: &BundleCochain, c: f64) -> Result<BundleCochain> {
    nu.expect(ZERO_ONE)?;
    alpha.expect(ZERO_ONE)?;
    let s = cx.surface();
    let y: Vec<Mat> = (0..s.num_faces())
        .map(|f| {
            let (a, ns) = (alpha.site(f), nu.site(f).adjoint());
            (&a * &ns - &ns * &a) * C64::new(c / s.density(f), 0.0)
        })
        .collect();
    let mass: Vec<f64> = (0..s.num_faces()).map(|f| s.density(f) * s.area(f)).collect();
    Ok(cx.lump_to_vertices(&y, &mass))
}

/// Recover the adjoint constant from a single pairing: returns `c` such that
/// `⟨ad ν x, α⟩ = c ⟨x, ad*₁(ν, α)⟩`, where `ad*₁` uses `c = 1`.
pub fn calibrate_ad_star(cx: &TwistedComplex, nu: &BundleCochain, x: &BundleCochain, alpha: &BundleCochain) -> Result<C64> {
    let lhs = cx.inner(&ad_on_scalar(cx, nu, x)?, alpha)?;
    let rhs = cx.inner(x, &ad_star_scaled(cx, nu, alpha, 1.0)?)?;
    Ok(lhs / rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{GeneratorSet, SolverConfig, UnitaryCocycle};
    use crate::surface::{standard_surface, DensityPolicy};
    use std::sync::Arc;

    fn sample(kind: CochainKind, n: usize, sites: usize, seed: f64) -> BundleCochain {
        let mut c = BundleCochain::zeros(kind, n, sites);
        for (i, d) in c.data.iter_mut().enumerate() {
            let t = (i as f64 + 1.0) * seed;
            *d = C64::new(t.sin(), (2.3 * t).cos());
        }
        c
    }

    #[test]
    fn adjoint_constant_is_minus_two() {
        let s = Arc::new(standard_surface(2, 1, DensityPolicy::Hyperbolic).unwrap());
        let c = UnitaryCocycle::from_generators(s.mesh(), &GeneratorSet::rank_two_degree_one(2), 0).unwrap();
        let cx = TwistedComplex::end_bundle(s.clone(), &c, SolverConfig::default()).unwrap();
        let (nv, nf) = (s.num_vertices(), s.num_faces());
        for seed in [0.31, 0.77, 1.9] {
            let nu = sample(ZERO_ONE, 2, nf, seed);
            let x = sample(CochainKind::Vertex, 2, nv, seed + 0.1);
            let alpha = sample(ZERO_ONE, 2, nf, seed + 0.2);
            let k = calibrate_ad_star(&cx, &nu, &x, &alpha).unwrap();
            assert!((k - C64::new(AD_STAR_CONSTANT, 0.0)).norm() < 1e-10, "{k}");
            let lhs = cx.inner(&ad_on_scalar(&cx, &nu, &x).unwrap(), &alpha).unwrap();
            let rhs = cx.inner(&x, &ad_star(&cx, &nu, &alpha).unwrap()).unwrap();
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }
}
