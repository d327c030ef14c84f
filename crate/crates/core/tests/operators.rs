use std::sync::{Arc, OnceLock};

use moduli_lab::bundle::{ad_on_scalar, ad_star, BundleCochain, CochainKind, GeneratorSet, SolverConfig, TwistedComplex, UnitaryCocycle};
use moduli_lab::calculus::FormType;
use moduli_lab::surface::{standard_surface, DensityPolicy};
use moduli_lab::C64;
use proptest::prelude::*;

const ZERO_ONE: CochainKind = CochainKind::Face(FormType::ZeroOne);
const ONE_ZERO: CochainKind = CochainKind::Face(FormType::OneZero);

fn complexes() -> &'static (TwistedComplex, TwistedComplex) {
    static CX: OnceLock<(TwistedComplex, TwistedComplex)> = OnceLock::new();
    CX.get_or_init(|| {
        let s = Arc::new(standard_surface(2, 2, DensityPolicy::Hyperbolic).unwrap());
        let c = UnitaryCocycle::from_generators(s.mesh(), &GeneratorSet::rank_two_degree_one(2), 0).unwrap();
        let end = TwistedComplex::end_bundle(s.clone(), &c, SolverConfig::default()).unwrap();
        let tx = TwistedComplex::tangent_bundle(s, SolverConfig::default()).unwrap();
        (end, tx)
    })
}

fn cochain(kind: CochainKind, n: usize, sites: usize, a: f64, b: f64) -> BundleCochain {
    let mut c = BundleCochain::zeros(kind, n, sites);
    for (i, d) in c.data.iter_mut().enumerate() {
        let t = i as f64;
        *d = C64::new((a * t + b).sin(), (b * t - a).cos());
    }
    c
}

fn close(x: C64, y: C64) -> bool {
    (x - y).norm() <= 1e-10 * (1.0 + x.norm().max(y.norm()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dbar_adjoint(a in 0.1f64..3.0, b in -2.0f64..2.0) {
        let (end, tx) = complexes();
        for cx in [end, tx] {
            let s = cx.surface();
            let x = cochain(CochainKind::Vertex, cx.rank(), s.num_vertices(), a, b);
            let al = cochain(cx.out_kind(), cx.rank(), s.num_faces(), b, a);
            prop_assert!(close(cx.inner(&cx.dbar(&x).unwrap(), &al).unwrap(), cx.inner(&x, &cx.dbar_star(&al).unwrap()).unwrap()));
        }
    }

    #[test]
    fn d_adjoint_and_ad_adjoint(a in 0.1f64..3.0, b in -2.0f64..2.0) {
        let (end, _) = complexes();
        let s = end.surface();
        let x = cochain(CochainKind::Vertex, 2, s.num_vertices(), a, b);
        let w = cochain(ONE_ZERO, 2, s.num_faces(), b, a);
        prop_assert!(close(end.inner(&end.d_hol(&x).unwrap(), &w).unwrap(), end.inner(&x, &end.d_star(&w).unwrap()).unwrap()));
        let nu = cochain(ZERO_ONE, 2, s.num_faces(), a + 0.5, -b);
        let al = cochain(ZERO_ONE, 2, s.num_faces(), b - 0.3, a);
        prop_assert!(close(
            end.inner(&ad_on_scalar(end, &nu, &x).unwrap(), &al).unwrap(),
            end.inner(&x, &ad_star(end, &nu, &al).unwrap()).unwrap()
        ));
    }

    #[test]
    fn laplacians_agree_on_end(a in 0.1f64..3.0, b in -2.0f64..2.0) {
        let (end, _) = complexes();
        let x = cochain(CochainKind::Vertex, 2, end.surface().num_vertices(), a, b);
        let l1 = end.laplacian(&x).unwrap();
        let l2 = end.d_star(&end.d_hol(&x).unwrap()).unwrap();
        prop_assert!(l1.sub(&l2).unwrap().max_abs() <= 1e-9 * (1.0 + l1.max_abs()));
    }
}

#[test]
fn harmonic_projection_is_coclosed_and_idempotent() {
    let (end, _) = complexes();
    let al = cochain(ZERO_ONE, 2, end.surface().num_faces(), 0.7, 0.2);
    let p = end.harmonic_project(&al).unwrap();
    assert!(end.norm(&end.dbar_star(&p).unwrap()).unwrap() < 1e-8 * end.norm(&al).unwrap());
    let pp = end.harmonic_project(&p).unwrap();
    assert!(end.norm(&pp.sub(&p).unwrap()).unwrap() < 1e-9 * end.norm(&p).unwrap());
}
