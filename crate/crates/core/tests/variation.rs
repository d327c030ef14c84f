use moduli_lab::batch::{map_indexed, Execution};
use moduli_lab::bundle::{GeneratorSet, SolverConfig, SolverMethod};
use moduli_lab::surface::DensityPolicy;
use moduli_lab::tangent::{random_tangent, CenterPoint, TangentVector};
use moduli_lab::variation::{
    difference_report, first_variation, positivity_certificate, second_variation_fibered, second_variation_universal,
    Scope, VariationReport,
};
use moduli_lab::C64;

fn center(method: SolverMethod) -> CenterPoint {
    let config = SolverConfig { method, ..SolverConfig::default() };
    CenterPoint::standard(2, 2, DensityPolicy::Hyperbolic, &GeneratorSet::rank_two_degree_one(2), config).unwrap()
}

fn quad(c: &CenterPoint, seed: u64) -> [TangentVector; 4] {
    std::array::from_fn(|k| random_tangent(c, 1000 + 4 * seed + k as u64, 1.0).unwrap())
}

#[test]
fn dense_and_iterative_reports_agree() {
    let (d, i) = (center(SolverMethod::Dense), center(SolverMethod::Iterative));
    let q = quad(&d, 0);
    let a = second_variation_universal(&d, &q).unwrap();
    let b = second_variation_universal(&i, &q).unwrap();
    assert!((a.total() - b.total()).norm() < 1e-7 * (1.0 + a.total().norm()));
    assert!(a.solver_stats.dense_solves > 0 && b.solver_stats.dense_solves == 0);
}

#[test]
fn parallel_and_sequential_batches_match() {
    let c = center(SolverMethod::Auto);
    let run = |exec| -> Vec<VariationReport> { map_indexed(4, exec, |s| difference_report(&c, &quad(&c, s as u64)).unwrap()) };
    assert_eq!(run(Execution::Sequential), run(Execution::Parallel));
}

#[test]
fn report_round_trips_through_json() {
    let c = center(SolverMethod::Auto);
    let r = second_variation_fibered(&c, &quad(&c, 1)).unwrap();
    let back: VariationReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(back, r);
    assert_eq!(r.inputs_digest.len(), 64);
    assert!(r.terms.iter().any(|t| t.scope == Scope::Fibered));
}

#[test]
fn first_variation_is_sesquilinear() {
    let c = center(SolverMethod::Auto);
    let [a, b, v, w] = quad(&c, 2);
    let s = C64::new(0.3, -1.2);
    let combo = a.scaled(s);
    for fibered in [false, true] {
        let x = first_variation(&c, fibered, &combo, &b, &v).unwrap();
        let y = first_variation(&c, fibered, &a, &b, &v).unwrap();
        assert!((C64::from(x.d_eps) - s * C64::from(y.d_eps)).norm() < 1e-12);
        let x = first_variation(&c, fibered, &a, &b.scaled(s), &w).unwrap();
        let y = first_variation(&c, fibered, &a, &b, &w).unwrap();
        assert!((C64::from(x.d_eps) - s.conj() * C64::from(y.d_eps)).norm() < 1e-12);
    }
}

#[test]
fn positivity_scales_quartically() {
    let c = center(SolverMethod::Auto);
    let mu = random_tangent(&c, 7, 1.0).unwrap();
    let nu = random_tangent(&c, 8, 1.0).unwrap();
    let a = positivity_certificate(&c, &mu, &nu).unwrap();
    let b = positivity_certificate(&c, &mu.scaled(C64::new(2.0, 0.0)), &nu).unwrap();
    assert!((b.total - 4.0 * a.total).abs() < 1e-9 * b.total);
    assert!(a.holds(1e-10));
}
