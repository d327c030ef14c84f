//! Second variation `G(v₁, v₂; v₃, v₄)` of the metric, term by term.

use serde::{Deserialize, Serialize};

use super::{check_inputs, mu_bar_times, mu_times, Calculus, Scope, System, Term, VariationReport};
use crate::bundle::ad_on_scalar;
use crate::error::Result;
use crate::tangent::{CenterPoint, TangentVector};
use crate::C64;

fn all_terms(center: &CenterPoint, v: &[TangentVector; 4]) -> Result<(Vec<Term>, super::SolverStats)> {
    check_inputs(center, v)?;
    let c = Calculus::new(center);
    let end = &center.end;
    let [v1, v2, v3, v4] = v;
    let (nu1, nu2, nu3, nu4) = (&v1.nu, &v2.nu, &v3.nu, &v4.nu);

    let k12 = c.inv(&c.source(v1, v2)?)?;
    let k21 = c.inv(&c.source(v2, v1)?)?;
    let y = c.inv(&c.a_star(v2, nu3)?)?;
    let m4n1 = mu_times(&v4.mu, &nu1.adjoint())?;
    let m3n2 = mu_times(&v3.mu, &nu2.adjoint())?;

    let mut t = Vec::new();
    let mut push = |name: &str, value: C64, scope: Scope| t.push(Term::new(name, value, scope));

    push("projector_cross", c.pair(&c.a_op(v1, &y)?, nu4)?, Scope::Shared);
    push("gauge_hessian_ad", c.pair(&ad_on_scalar(end, nu3, &k12)?, nu4)? * -1.0, Scope::Shared);
    push("beltrami_area", -c.pair(&mu_times(&v1.mu, &mu_bar_times(&v2.mu, nu3)?)?, nu4)?, Scope::Shared);
    let z = c.inv(&end.dbar_star(&m3n2)?)?;
    push("projector_mixed_left", c.pair(&c.a_op(v1, &z)?, nu4)?, Scope::Shared);
    push("connection_hessian_left", c.pair(&mu_times(&v3.mu, &end.d_hol(&k12)?)?, nu4)?, Scope::Shared);
    push(
        "beltrami_bundle_left",
        c.pair(&mu_times(&v3.mu, &mu_bar_times(&v2.mu, nu1)?)?, nu4)?,
        Scope::Universal,
    );
    push("projector_mixed_right", c.pair(&end.dbar(&y)?, &m4n1)?, Scope::Shared);
    push("connection_hessian_right", c.pair(nu3, &mu_times(&v4.mu, &end.d_hol(&k21)?)?)?, Scope::Shared);
    push(
        "beltrami_bundle_right",
        c.pair(nu3, &mu_times(&v4.mu, &mu_bar_times(&v1.mu, nu2)?)?)?,
        Scope::Universal,
    );
    push("beltrami_cross", c.pair(&m3n2, &m4n1)?, Scope::Shared);

    let w = c.inv(&end.dbar_star(&mu_times(&v1.mu, &nu2.adjoint())?)?)?;
    push("fiber_transport_left", -c.pair(&mu_times(&v3.mu, &end.d_hol(&w)?)?, nu4)?, Scope::Fibered);
    let w = c.inv(&end.dbar_star(&mu_times(&v2.mu, &nu1.adjoint())?)?)?;
    push("fiber_transport_right", -c.pair(nu3, &mu_times(&v4.mu, &end.d_hol(&w)?)?)?, Scope::Fibered);
    let w = c.inv(&end.d_star(&mu_bar_times(&v2.mu, nu1)?)?)?;
    push("fiber_gauge_left", -c.pair(&mu_times(&v3.mu, &end.d_hol(&w)?)?, nu4)?, Scope::Fibered);
    let w = c.inv(&end.d_star(&mu_bar_times(&v1.mu, nu2)?)?)?;
    push("fiber_gauge_right", -c.pair(nu3, &mu_times(&v4.mu, &end.d_hol(&w)?)?)?, Scope::Fibered);

    Ok((t, c.stats()))
}

fn select(terms: &[Term], drop: Scope) -> Vec<Term> {
    terms.iter().filter(|t| t.scope != drop).cloned().collect()
}

/// Second variation in the universal system.
pub fn second_variation_universal(center: &CenterPoint, v: &[TangentVector; 4]) -> Result<VariationReport> {
    let (terms, stats) = all_terms(center, v)?;
    Ok(VariationReport::assemble(System::Universal, select(&terms, Scope::Fibered), v, stats))
}

/// Second variation in the fibered system.
pub fn second_variation_fibered(center: &CenterPoint, v: &[TangentVector; 4]) -> Result<VariationReport> {
    let (terms, stats) = all_terms(center, v)?;
    Ok(VariationReport::assemble(System::Fibered, select(&terms, Scope::Universal), v, stats))
}

/// Universal minus fibered: the two universal-only terms (`Removed`) and
/// the negated fibered-only terms (`Added`).
pub fn difference_report(center: &CenterPoint, v: &[TangentVector; 4]) -> Result<VariationReport> {
    let (terms, stats) = all_terms(center, v)?;
    let diff = terms
        .into_iter()
        .filter_map(|t| match t.scope {
            Scope::Universal => Some(Term { scope: Scope::Removed, ..t }),
            Scope::Fibered => Some(Term { re: -t.re, im: -t.im, scope: Scope::Added, ..t }),
            _ => None,
        })
        .collect();
    Ok(VariationReport::assemble(System::Difference, diff, v, stats))
}

/// `(ν, μ, μ, ν)` with the complementary components zero: `v₁ = v₄ = (0, ν)`,
/// `v₂ = v₃ = (μ, 0)`.
pub fn restricted_quadruple(center: &CenterPoint, mu: &TangentVector, nu: &TangentVector) -> [TangentVector; 4] {
    let zero = center.zero_tangent();
    let a = zero.with_nu(nu.nu.clone());
    let b = zero.with_mu(mu.mu.clone());
    [a.clone(), b.clone(), b, a]
}

/// The restricted difference split as `⟨Δ₀⁻¹h, h⟩ + ⟨|μ|²ν, ν⟩` with
/// `h = ∂*(μ̄ν)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositivityCertificate {
    pub term_a: f64,
    pub term_b: f64,
    /// Total of the restricted difference report.
    pub total: f64,
    pub total_im: f64,
    /// `|term_a + term_b − total|`
    pub reconcile_error: f64,
    /// `‖μν‖²`, the natural size of both terms.
    pub scale: f64,
}

impl PositivityCertificate {
    pub fn holds(&self, tol: f64) -> bool {
        self.term_a >= -1e-12 * self.scale
            && self.term_b > 0.0
            && self.total > 0.0
            && self.total_im.abs() <= tol * self.scale.max(1.0)
            && self.reconcile_error <= tol * self.scale.max(1.0)
    }
}

pub fn positivity_certificate(center: &CenterPoint, mu: &TangentVector, nu: &TangentVector) -> Result<PositivityCertificate> {
    let q = restricted_quadruple(center, mu, nu);
    let report = difference_report(center, &q)?;
    let c = Calculus::new(center);
    let end = &center.end;
    let h = end.d_star(&mu_bar_times(&mu.mu, &nu.nu)?)?;
    let term_a = end.inner(&c.inv(&h)?, &h)?;
    let munu = mu_times(&mu.mu, &mu_bar_times(&mu.mu, &nu.nu)?)?;
    let term_b = c.pair(&munu, &nu.nu)?;
    let scale = term_b.re.abs();
    let total = report.total();
    Ok(PositivityCertificate {
        term_a: term_a.re,
        term_b: term_b.re,
        total: total.re,
        total_im: total.im,
        reconcile_error: (term_a + term_b - total).norm(),
        scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{GeneratorSet, SolverConfig};
    use crate::surface::DensityPolicy;
    use crate::tangent::random_tangent;

    fn center(gens: &GeneratorSet) -> CenterPoint {
        CenterPoint::standard(2, 1, DensityPolicy::Hyperbolic, gens, SolverConfig::default()).unwrap()
    }

    fn quad(c: &CenterPoint, seed: u64) -> [TangentVector; 4] {
        std::array::from_fn(|k| random_tangent(c, seed * 4 + k as u64, 1.0).unwrap())
    }

    #[test]
    fn hermitian_symmetry() {
        let c = center(&GeneratorSet::rank_two_degree_one(2));
        for seed in 0..3 {
            let [a, b, x, y] = quad(&c, seed);
            for fib in [false, true] {
                let f = |q: &[TangentVector; 4]| {
                    if fib { second_variation_fibered(&c, q) } else { second_variation_universal(&c, q) }.unwrap().total()
                };
                let g = f(&[a.clone(), b.clone(), x.clone(), y.clone()]);
                let h = f(&[b.clone(), a.clone(), y.clone(), x.clone()]);
                assert!((g - h.conj()).norm() < 1e-8 * (1.0 + g.norm()), "{g} {h}");
            }
        }
    }

    #[test]
    fn difference_reconciles() {
        let c = center(&GeneratorSet::rank_two_degree_one(2));
        let q = quad(&c, 7);
        let u = second_variation_universal(&c, &q).unwrap();
        let f = second_variation_fibered(&c, &q).unwrap();
        let d = difference_report(&c, &q).unwrap();
        assert!((u.total() - f.total() - d.total()).norm() < 1e-10);
        assert_eq!(d.terms.iter().filter(|t| t.scope == Scope::Added).count(), 4);
        assert_eq!(d.terms.iter().filter(|t| t.scope == Scope::Removed).count(), 2);
        assert!(u.sum_defect() < 1e-12 && f.sum_defect() < 1e-12);
        assert_eq!(u.terms.len(), 10);
        assert_eq!(f.terms.len(), 12);
    }

    #[test]
    fn restricted_difference_is_positive() {
        let c = center(&GeneratorSet::rank_two_degree_one(2));
        for seed in 0..3 {
            let mu = random_tangent(&c, 100 + seed, 1.0).unwrap();
            let nu = random_tangent(&c, 200 + seed, 1.0).unwrap();
            let cert = positivity_certificate(&c, &mu, &nu).unwrap();
            assert!(cert.holds(1e-10), "{cert:?}");
        }
    }

    #[test]
    fn rank_one_without_beltrami_vanishes() {
        let c = center(&GeneratorSet::trivial(2, 1));
        let q = quad(&c, 3).map(|v| v.nu_only());
        for r in [second_variation_universal(&c, &q).unwrap(), second_variation_fibered(&c, &q).unwrap()] {
            assert!(r.total().norm() < 1e-12, "{:?}", r.total);
        }
    }
}
