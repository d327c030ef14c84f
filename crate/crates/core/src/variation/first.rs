//! The metric at the center and its first variation.

use serde::{Deserialize, Serialize};

use super::{check_inputs, mu_bar_times, mu_times, ComplexValue};
use crate::calculus::{area_constant, wedge_trace_integrate, FormType};
use crate::error::Result;
use crate::tangent::{CenterPoint, TangentVector};
use crate::{Mat, C64};

/// `g(v₁, v₂) = ∫ μ₁ μ̄₂ dA + ∫ tr ν₁ ∧ ★ν₂*`.
pub fn metric_g(center: &CenterPoint, v1: &TangentVector, v2: &TangentVector) -> Result<C64> {
    check_inputs(center, &[v1.clone(), v2.clone()])?;
    let s = &center.surface;
    let beltrami: C64 = (0..s.num_faces())
        .map(|f| v1.mu.data[f] * v2.mu.data[f].conj() * s.density(f) * s.area(f))
        .sum();
    // ★ on (1,0) multiplies by −i
    let star: Vec<Mat> = v2.nu.adjoint().to_sites().into_iter().map(|m| m * C64::new(0.0, -1.0)).collect();
    let bundle = wedge_trace_integrate(&v1.nu.to_sites(), FormType::ZeroOne, &star, FormType::OneZero, s)?;
    Ok(beltrami + bundle)
}

/// Derivatives of `g(v₁, v₂)` along `ε` and `ε̄` in the direction `v`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstVariation {
    pub d_eps: ComplexValue,
    pub d_eps_bar: ComplexValue,
}

/// Universal system: `i∫tr((μ̄₂ν₁)∧ν)` and `−i∫tr((μ₁ν*)∧ν₂*)`, evaluated as
/// wedge integrals. Fibered system: the same quantities written as face
/// sums `i∫μ̄₂ tr(ν₁ν)` and `−i∫μ₁ tr(ν*ν₂*)`.
pub fn first_variation(
    center: &CenterPoint,
    fibered: bool,
    v1: &TangentVector,
    v2: &TangentVector,
    v: &TangentVector,
) -> Result<FirstVariation> {
    check_inputs(center, &[v1.clone(), v2.clone(), v.clone()])?;
    let s = &center.surface;
    let i = C64::new(0.0, 1.0);
    let (d_eps, d_eps_bar) = if fibered {
        let k_eps = area_constant(FormType::OneZero, FormType::ZeroOne)?;
        let k_bar = area_constant(FormType::ZeroOne, FormType::OneZero)?;
        let mut a = C64::new(0.0, 0.0);
        let mut b = C64::new(0.0, 0.0);
        for f in 0..s.num_faces() {
            let (n1, n2, n) = (v1.nu.site(f), v2.nu.site(f), v.nu.site(f));
            a += v2.mu.data[f].conj() * (&n1 * &n).trace() * s.area(f);
            b += v1.mu.data[f] * (n.adjoint() * n2.adjoint()).trace() * s.area(f);
        }
        (i * k_eps * a, -i * k_bar * b)
    } else {
        let left = mu_bar_times(&v2.mu, &v1.nu)?.to_sites();
        let a = wedge_trace_integrate(&left, FormType::OneZero, &v.nu.to_sites(), FormType::ZeroOne, s)?;
        let left = mu_times(&v1.mu, &v.nu.adjoint())?.to_sites();
        let b = wedge_trace_integrate(&left, FormType::ZeroOne, &v2.nu.adjoint().to_sites(), FormType::OneZero, s)?;
        (i * a, -i * b)
    };
    Ok(FirstVariation { d_eps: d_eps.into(), d_eps_bar: d_eps_bar.into() })
}
