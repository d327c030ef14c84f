use moduli_lab::oracle::{torus_crosscheck, Mode};
use moduli_lab::{Mat, C64};

#[test]
fn rank_two_torus_converges() {
    let coef = Mat::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(0.0, 0.5), C64::new(-0.2, 0.0), C64::new(0.3, 0.3)]);
    let modes = vec![Mode { k: 1, l: 1, coef: coef.clone() }, Mode { k: -2, l: 0, coef: coef.adjoint() }];
    let report = torus_crosscheck(2, &modes, &[6, 12, 24], &Mat::identity(2, 2)).unwrap();
    assert!(report.decreasing, "{report:?}");
    assert!(report.levels.iter().all(|l| l.kernel_dim == 4));
    // projector error is first order (centroid sampling of ∂̄f), the inverse second order
    for w in report.levels.windows(2) {
        assert!(w[1].projector_error < 0.6 * w[0].projector_error, "{report:?}");
        assert!(w[1].inverse_error < 0.3 * w[0].inverse_error, "{report:?}");
    }
}
