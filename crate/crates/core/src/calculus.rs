//! Scalar P1 Dolbeault calculus on a [`ConformalSurface`].
//!
//! Functions live on vertices and are linear on faces; forms are constant on
//! faces and expressed in the face chart.
//!
//! Conventions, used everywhere in the crate:
//!
//! | quantity | value |
//! |---|---|
//! | `dz̄ ∧ dz` | `2i dx∧dy` |
//! | `dz ∧ dz̄` | `−2i dx∧dy` |
//! | `★dz`, `★dz̄` | `−i dz`, `i dz̄` |
//! | `★(ρ dx∧dy)` | `1` |
//! | vertex pairing | `Σ_v w_v f_v ḡ_v`, `w_v = Σ_{f∋v} ρ_f A_f / 3` |
//! | (0,1) and (1,0) pairing | `Σ_f 2A_f α_f β̄_f` |
//! | Beltrami pairing | `Σ_f ρ_f A_f μ_f μ̄'_f` |
//!
//! With these, `−i ∫ α ∧ β̄ = ⟨α, β⟩` for (0,1)-forms and
//! `∫ α ∧ ★β̄ = ⟨α, β⟩`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surface::ConformalSurface;
use crate::{Mat, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FormType {
    /// Face-constant function.
    Face,
    /// Coefficient of `dz`.
    OneZero,
    /// Coefficient of `dz̄`.
    ZeroOne,
    /// Coefficient of `dz̄ ∧ dz`.
    OneOne,
}

impl FormType {
    /// Factor picked up by a coefficient when the chart changes by
    /// `z ↦ r z + c` with `|r| = 1`.
    pub fn spin_factor(self, r: C64) -> C64 {
        match self {
            FormType::Face => C64::new(1.0, 0.0),
            FormType::OneZero => r.conj(),
            FormType::ZeroOne => r,
            FormType::OneOne => C64::new(1.0, 0.0),
        }
    }
}

/// Constant `κ` with `a ∧ b = κ dx∧dy` for unit coefficients.
pub fn area_constant(a: FormType, b: FormType) -> Result<C64> {
    use FormType::*;
    match (a, b) {
        (ZeroOne, OneZero) | (Face, OneOne) | (OneOne, Face) => Ok(C64::new(0.0, 2.0)),
        (OneZero, ZeroOne) => Ok(C64::new(0.0, -2.0)),
        _ => Err(Error::TypeMismatch(format!("wedge of {a:?} and {b:?} is not a top form"))),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Form {
    pub kind: FormType,
    pub coeffs: Vec<C64>,
}

impl Form {
    pub fn new(kind: FormType, coeffs: Vec<C64>) -> Self {
        Form { kind, coeffs }
    }
    pub fn zeros(kind: FormType, faces: usize) -> Self {
        Form { kind, coeffs: vec![C64::new(0.0, 0.0); faces] }
    }
    fn expect(&self, kind: FormType) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::TypeMismatch(format!("expected {kind:?}, got {:?}", self.kind)))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Weight {
    /// `w_v = Σ ρ A / 3`
    Density,
    /// `w_v = Σ A / 3`
    Unit,
}

pub fn dbar(f: &[C64], s: &ConformalSurface) -> Form {
    face_stencil(f, s, false)
}

pub fn d_hol(f: &[C64], s: &ConformalSurface) -> Form {
    face_stencil(f, s, true)
}

fn face_stencil(f: &[C64], s: &ConformalSurface, holomorphic: bool) -> Form {
    let coeffs = (0..s.num_faces())
        .map(|face| {
            let c = if holomorphic { s.d_coefficients(face) } else { s.dbar_coefficients(face) };
            let v = s.mesh().face_vertices(face);
            (0..3).map(|k| c[k] * f[v[k]]).sum()
        })
        .collect();
    Form::new(if holomorphic { FormType::OneZero } else { FormType::ZeroOne }, coeffs)
}

/// Adjoint of [`dbar`]: (0,1)-forms to functions.
pub fn dbar_star(alpha: &Form, s: &ConformalSurface) -> Result<Vec<C64>> {
    alpha.expect(FormType::ZeroOne)?;
    Ok(adjoint_stencil(alpha, s, false))
}

/// Adjoint of [`d_hol`]: (1,0)-forms to functions.
pub fn d_star(omega: &Form, s: &ConformalSurface) -> Result<Vec<C64>> {
    omega.expect(FormType::OneZero)?;
    Ok(adjoint_stencil(omega, s, true))
}

fn adjoint_stencil(alpha: &Form, s: &ConformalSurface, holomorphic: bool) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); s.num_vertices()];
    for face in 0..s.num_faces() {
        let c = if holomorphic { s.d_coefficients(face) } else { s.dbar_coefficients(face) };
        let w = 2.0 * s.area(face);
        for (k, v) in s.mesh().face_vertices(face).into_iter().enumerate() {
            out[v] += c[k].conj() * alpha.coeffs[face] * w;
        }
    }
    for (v, x) in out.iter_mut().enumerate() {
        *x /= s.vertex_weight(v);
    }
    out
}

pub fn hodge_star(alpha: &Form, s: &ConformalSurface) -> Form {
    let i = C64::new(0.0, 1.0);
    let (kind, coeffs) = match alpha.kind {
        FormType::ZeroOne => (FormType::ZeroOne, alpha.coeffs.iter().map(|c| i * c).collect()),
        FormType::OneZero => (FormType::OneZero, alpha.coeffs.iter().map(|c| -i * c).collect()),
        FormType::OneOne => (
            FormType::Face,
            alpha.coeffs.iter().enumerate().map(|(f, c)| 2.0 * i * c / s.density(f)).collect(),
        ),
        FormType::Face => (
            FormType::OneOne,
            alpha.coeffs.iter().enumerate().map(|(f, c)| c * s.density(f) / (2.0 * i)).collect(),
        ),
    };
    Form::new(kind, coeffs)
}

pub fn ip_scalar(f: &[C64], g: &[C64], s: &ConformalSurface, weight: Weight) -> C64 {
    (0..s.num_vertices())
        .map(|v| {
            let w = match weight {
                Weight::Density => s.vertex_weight(v),
                Weight::Unit => s.vertex_area(v),
            };
            f[v] * g[v].conj() * w
        })
        .sum()
}

/// Per-face weight of the L² pairing for coefficients of type `kind`.
pub fn form_weight(kind: FormType, s: &ConformalSurface, f: usize) -> f64 {
    match kind {
        FormType::ZeroOne | FormType::OneZero => 2.0 * s.area(f),
        FormType::Face => s.density(f) * s.area(f),
        FormType::OneOne => 4.0 * s.area(f) / s.density(f),
    }
}

pub fn ip_form(alpha: &Form, beta: &Form, s: &ConformalSurface) -> Result<C64> {
    beta.expect(alpha.kind)?;
    Ok((0..s.num_faces())
        .map(|f| alpha.coeffs[f] * beta.coeffs[f].conj() * form_weight(alpha.kind, s, f))
        .sum())
}

/// `μ ⌟ ω`: Beltrami coefficient applied to a (1,0)-form gives a (0,1)-form.
pub fn mu_contract(mu: &[C64], omega: &Form) -> Result<Form> {
    omega.expect(FormType::OneZero)?;
    Ok(Form::new(FormType::ZeroOne, mu.iter().zip(&omega.coeffs).map(|(m, w)| m * w).collect()))
}

/// `μ̄ ⌟ α`: conjugate Beltrami coefficient applied to a (0,1)-form.
pub fn mu_bar_contract(mu: &[C64], alpha: &Form) -> Result<Form> {
    alpha.expect(FormType::ZeroOne)?;
    Ok(Form::new(FormType::OneZero, mu.iter().zip(&alpha.coeffs).map(|(m, a)| m.conj() * a).collect()))
}

/// `∫ α ∧ β` for scalar face forms.
pub fn wedge_integrate(alpha: &Form, beta: &Form, s: &ConformalSurface) -> Result<C64> {
    let k = area_constant(alpha.kind, beta.kind)?;
    Ok((0..s.num_faces()).map(|f| alpha.coeffs[f] * beta.coeffs[f] * s.area(f)).sum::<C64>() * k)
}

/// `∫ tr(α ∧ β)` for matrix-valued face forms.
pub fn wedge_trace_integrate(
    alpha: &[Mat],
    alpha_kind: FormType,
    beta: &[Mat],
    beta_kind: FormType,
    s: &ConformalSurface,
) -> Result<C64> {
    let k = area_constant(alpha_kind, beta_kind)?;
    if alpha.len() != s.num_faces() || beta.len() != s.num_faces() {
        return Err(Error::TypeMismatch("wedge operands are not face-valued".into()));
    }
    let sum: C64 = (0..s.num_faces()).map(|f| (&alpha[f] * &beta[f]).trace() * s.area(f)).sum();
    Ok(sum * k)
}

/// Face-wise derivative of a face-constant form: the field is lifted to a
/// linear function `a + p(z − z_c) + q(z̄ − z̄_c)` by least squares over the
/// face and its three edge neighbours unfolded into the face chart.
/// Returns `(∂, ∂̄)` as forms of the appropriate type.
pub fn face_derivative(alpha: &Form, s: &ConformalSurface) -> Result<(Form, Form)> {
    let (d_kind, dbar_kind, d_sign) = match alpha.kind {
        FormType::Face => (FormType::OneZero, FormType::ZeroOne, 1.0),
        FormType::ZeroOne => (FormType::OneOne, FormType::OneOne, -1.0),
        FormType::OneZero => (FormType::OneOne, FormType::OneOne, 1.0),
        FormType::OneOne => {
            return Err(Error::TypeMismatch("derivative of a top form".into()));
        }
    };
    let m = s.mesh();
    let mut d = Vec::with_capacity(s.num_faces());
    let mut db = Vec::with_capacity(s.num_faces());
    for f in 0..s.num_faces() {
        let z = s.chart(f);
        let zc = (z[0] + z[1] + z[2]) / 3.0;
        let mut rows: Vec<(C64, C64)> = vec![(C64::new(0.0, 0.0), alpha.coeffs[f])];
        for h in m.face_half_edges(f) {
            let t = m.half_edge(h).twin;
            let g = m.half_edge(t).face;
            let r = s.rotation(h);
            let zg = s.chart(g);
            // dest(t) = origin(h): fixes the translation
            let kt = s.corner_index(t);
            let c = z[s.corner_index(h)] - r * zg[(kt + 1) % 3];
            let cg = r * (zg[0] + zg[1] + zg[2]) / 3.0 + c;
            rows.push((cg - zc, alpha.coeffs[g] * alpha.kind.spin_factor(r)));
        }
        // normal equations for unknowns (a, p, q)
        let mut ata = Matrix3::<C64>::zeros();
        let mut atb = Vector3::<C64>::zeros();
        for (dz, val) in &rows {
            let row = Vector3::new(C64::new(1.0, 0.0), *dz, dz.conj());
            ata += row.conjugate() * row.transpose();
            atb += row.conjugate() * *val;
        }
        let sol = ata
            .lu()
            .solve(&atb)
            .ok_or_else(|| Error::Chart { face: f, msg: "degenerate neighbourhood for derivative".into() })?;
        d.push(sol[1] * d_sign);
        db.push(sol[2]);
    }
    Ok((Form::new(d_kind, d), Form::new(dbar_kind, db)))
}
