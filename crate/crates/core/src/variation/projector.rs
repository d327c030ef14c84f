//! Derivative of the harmonic projector under a perturbation of `∂̄`,
//! checked against central finite differences. Everything happens in
//! whitened coordinates, where the weighted adjoint is the conjugate
//! transpose.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::TwistedComplex;
use crate::error::{Error, Result};
use crate::oracle::{materialize, operator_norm, OperatorKind};
use crate::{Mat, C64};

/// Default size of a random perturbation, in units of the smallest nonzero
/// singular value. Large enough that truncation error dominates rounding
/// down to steps of 1e-5, small enough that 1e-3 is still asymptotic.
pub const PERTURBATION_SCALE: f64 = 10.0;

fn whitened_dbar(cx: &TwistedComplex) -> Result<Mat> {
    Ok(materialize(cx, &OperatorKind::Dbar, cx.config().dense_cap)?.whitened())
}

struct Split {
    /// Right singular vectors of the range.
    v: Mat,
    sigma: Vec<f64>,
    /// Right singular vectors of the kernel.
    kernel: Mat,
}

/// Singular decomposition split at rank `r` (largest values first).
fn split(d: &Mat, r: usize) -> Split {
    let full = d.ncols();
    let svd = d.clone().svd(false, true);
    let vt = svd.v_t.expect("requested v");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let v = vt.adjoint();
    let pick = |m: &Mat, idx: &[usize]| Mat::from_fn(m.nrows(), idx.len(), |i, j| m[(i, idx[j])]);
    let range = &order[..r];
    // Kernel: right singular vectors beyond rank r, including those missing
    // from a thin decomposition.
    let kernel = if order.len() == full {
        pick(&v, &order[r..])
    } else {
        let vr = pick(&v, range);
        let comp = Mat::identity(full, full) - &vr * vr.adjoint();
        let svd2 = comp.svd(true, false);
        let u2 = svd2.u.expect("requested u");
        let idx: Vec<usize> = (0..full).filter(|&i| svd2.singular_values[i] > 0.5).collect();
        pick(&u2, &idx)
    };
    Split { v: pick(&v, range), sigma: range.iter().map(|&i| svd.singular_values[i]).collect(), kernel }
}

/// Orthonormal basis `Q` of the range of `D V` and the triangular factor,
/// for `V` spanning the complement of a kernel shared by the whole family.
fn range_qr(d: &Mat, v: &Mat) -> (Mat, Mat) {
    let qr = (d * v).qr();
    (qr.q(), qr.r())
}

/// Random whitened perturbation of `∂̄`, vanishing on the kernel, with
/// operator norm `scale` times the smallest nonzero singular value of `∂̄`.
pub fn random_perturbation(cx: &TwistedComplex, seed: u64, scale: f64) -> Result<Mat> {
    let d = whitened_dbar(cx)?;
    let r = cx.dim0() - cx.kernel_dim();
    let s = split(&d, r);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(d.nrows(), d.ncols(), |_, _| {
        C64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)
    });
    let a = &a - &a * &s.kernel * s.kernel.adjoint();
    let norm = operator_norm(&a);
    if norm == 0.0 {
        return Err(Error::Precondition("perturbation vanished".into()));
    }
    let floor = s.sigma.last().copied().unwrap_or(1.0);
    Ok(a * C64::new(scale * floor / norm, 0.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectorSweep {
    pub steps: Vec<f64>,
    /// `‖FD − dP‖ / ‖dP‖` in operator norm.
    pub errors: Vec<f64>,
    /// Least-squares slope of `log error` against `log step`.
    pub slope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectorCheck {
    pub dim0: usize,
    pub dim1: usize,
    pub kernel_dim: usize,
    /// Operator norm of the analytic derivative.
    pub derivative_norm: f64,
    pub sweep: ProjectorSweep,
    /// `‖P dP P‖`, zero since `P` is idempotent.
    pub harmonic_pairing: f64,
}

impl ProjectorCheck {
    /// Error at the step closest to `h`.
    pub fn error_at(&self, h: f64) -> f64 {
        let i = (0..self.sweep.steps.len())
            .min_by(|&a, &b| (self.sweep.steps[a] / h).ln().abs().total_cmp(&(self.sweep.steps[b] / h).ln().abs()))
            .unwrap_or(0);
        self.sweep.errors.get(i).copied().unwrap_or(f64::NAN)
    }
}

/// Compare `dP = −(P Ã D̃⁺ + (D̃⁺)† Ã† P)` with `(P(h) − P(−h)) / 2h`, where
/// `P(t)` projects onto the orthogonal complement of the range of `D̃ + tÃ`.
pub fn projector_derivative_check(cx: &TwistedComplex, a: &Mat, steps: &[f64]) -> Result<ProjectorCheck> {
    let d = whitened_dbar(cx)?;
    if a.shape() != d.shape() {
        return Err(Error::TypeMismatch(format!("perturbation is {:?}, operator is {:?}", a.shape(), d.shape())));
    }
    if steps.len() < 2 || steps.iter().any(|&h| h <= 0.0) {
        return Err(Error::Precondition("need at least two positive steps".into()));
    }
    let r = cx.dim0() - cx.kernel_dim();
    let s = split(&d, r);
    let m = d.nrows();
    let (q, rf) = range_qr(&d, &s.v);
    let p = Mat::identity(m, m) - &q * q.adjoint();
    let rinv = rf.try_inverse().ok_or_else(|| Error::Precondition("∂̄ lost rank off its kernel".into()))?;
    // D⁺ = V R⁻¹ Q†
    let pinv = &s.v * rinv * q.adjoint();
    let left = &p * a * &pinv;
    let dp = -(&left + left.adjoint());

    let dp_norm = operator_norm(&dp).max(1e-300);
    let errors = steps
        .iter()
        .map(|&h| {
            let (qp, _) = range_qr(&(&d + a * C64::new(h, 0.0)), &s.v);
            let (qm, _) = range_qr(&(&d - a * C64::new(h, 0.0)), &s.v);
            // P(h) − P(−h) = Q₋Q₋† − Q₊Q₊†
            let fd = (&qm * qm.adjoint() - &qp * qp.adjoint()) / C64::new(2.0 * h, 0.0);
            operator_norm(&(fd - &dp)) / dp_norm
        })
        .collect::<Vec<_>>();
    let xs: Vec<f64> = steps.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.max(1e-300).ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();

    Ok(ProjectorCheck {
        dim0: cx.dim0(),
        dim1: cx.dim1(),
        kernel_dim: cx.kernel_dim(),
        derivative_norm: dp_norm,
        sweep: ProjectorSweep { steps: steps.to_vec(), errors, slope: sxy / sxx },
        harmonic_pairing: operator_norm(&(&p * &dp * &p)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{GeneratorSet, SolverConfig, UnitaryCocycle};
    use crate::surface::{standard_surface, DensityPolicy};
    use std::sync::Arc;

    #[test]
    fn derivative_matches_finite_differences() {
        let s = Arc::new(standard_surface(2, 1, DensityPolicy::Hyperbolic).unwrap());
        let c = UnitaryCocycle::from_generators(s.mesh(), &GeneratorSet::trivial(2, 1), 0).unwrap();
        let cx = TwistedComplex::end_bundle(s, &c, SolverConfig::default()).unwrap();
        let a = random_perturbation(&cx, 11, PERTURBATION_SCALE).unwrap();
        let chk = projector_derivative_check(&cx, &a, &[1e-3, 1e-4, 1e-5]).unwrap();
        assert!(chk.error_at(1e-4) < 1e-6, "{chk:?}");
        assert!((chk.sweep.slope - 2.0).abs() < 0.2, "{chk:?}");
        assert!(chk.harmonic_pairing < 1e-10, "{chk:?}");
    }

    #[test]
    fn rank_two_bundle_checks_out() {
        let s = Arc::new(standard_surface(2, 1, DensityPolicy::Hyperbolic).unwrap());
        let c = UnitaryCocycle::from_generators(s.mesh(), &GeneratorSet::rank_two_degree_one(2), 0).unwrap();
        let cx = TwistedComplex::end_bundle(s, &c, SolverConfig::default()).unwrap();
        for seed in 0..3 {
            let a = random_perturbation(&cx, seed, PERTURBATION_SCALE).unwrap();
            let chk = projector_derivative_check(&cx, &a, &[1e-3, 1e-4, 1e-5]).unwrap();
            assert!(chk.error_at(1e-4) < 1e-6 && (chk.sweep.slope - 2.0).abs() < 0.2, "{chk:?}");
        }
    }
}
