//! Dense reference operators, assembled directly from the face stencils as
//! Kronecker blocks, and a flat-torus spectral cross-check.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::bundle::{BundleCochain, CochainKind, SolverConfig, TwistedComplex, UnitaryCocycle};
use crate::calculus::FormType;
use crate::error::{Error, Result};
use crate::surface::{ConformalSurface, HalfEdgeMesh};
use crate::{Mat, C64};

/// Relative eigenvalue threshold separating the kernel in restricted inverses.
pub const KERNEL_THRESHOLD: f64 = 1e-10;

/// Coordinates of a cochain space with the diagonal weight of each entry.
#[derive(Clone, Debug, PartialEq)]
pub struct Space {
    pub kind: CochainKind,
    pub n: usize,
    pub weights: Vec<f64>,
}

impl Space {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    fn vertex(cx: &TwistedComplex) -> Self {
        Self::expand(CochainKind::Vertex, cx.rank(), cx.vertex_weights())
    }

    fn face(cx: &TwistedComplex, kind: CochainKind) -> Self {
        Self::expand(kind, cx.rank(), cx.face_weights())
    }

    fn expand(kind: CochainKind, n: usize, w: &[f64]) -> Self {
        Space { kind, n, weights: w.iter().flat_map(|&x| std::iter::repeat_n(x, n * n)).collect() }
    }
}

#[derive(Clone, Debug)]
pub struct DenseOperator {
    pub matrix: Mat,
    pub domain: Space,
    pub codomain: Space,
}

impl DenseOperator {
    pub fn apply(&self, x: &BundleCochain) -> Result<BundleCochain> {
        if x.kind != self.domain.kind || x.data.len() != self.domain.dim() {
            return Err(Error::TypeMismatch(format!("operator expects {:?}, got {:?}", self.domain.kind, x.kind)));
        }
        let y = &self.matrix * DVector::from_column_slice(&x.data);
        Ok(BundleCochain { kind: self.codomain.kind, n: self.codomain.n, data: y.iter().copied().collect() })
    }

    /// Adjoint for the weighted pairings: `W_dom⁻¹ M† W_cod`.
    pub fn adjoint(&self) -> DenseOperator {
        let m = DMatrix::from_fn(self.domain.dim(), self.codomain.dim(), |i, j| {
            self.matrix[(j, i)].conj() * self.codomain.weights[j] / self.domain.weights[i]
        });
        DenseOperator { matrix: m, domain: self.codomain.clone(), codomain: self.domain.clone() }
    }

    /// `self ∘ other`
    pub fn compose(&self, other: &DenseOperator) -> DenseOperator {
        DenseOperator { matrix: &self.matrix * &other.matrix, domain: other.domain.clone(), codomain: self.codomain.clone() }
    }

    /// `W_cod^{1/2} M W_dom^{-1/2}`: the matrix in orthonormal coordinates.
    pub fn whitened(&self) -> Mat {
        DMatrix::from_fn(self.codomain.dim(), self.domain.dim(), |i, j| {
            self.matrix[(i, j)] * (self.codomain.weights[i] / self.domain.weights[j]).sqrt()
        })
    }
}

/// Largest singular value.
pub fn operator_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().fold(0.0, |a, &s| a.max(s))
}

#[derive(Clone, Debug)]
pub enum OperatorKind {
    Dbar,
    DHol,
    DbarStar,
    DStar,
    Laplacian,
    HarmonicProjector,
    /// `x ↦ [ν, x̄_f]`
    Ad(BundleCochain),
    /// Weighted adjoint of `Ad`.
    AdStar(BundleCochain),
}

fn check_cap(size: usize, cap: usize) -> Result<()> {
    if size > cap {
        Err(Error::DenseCapExceeded { size, cap })
    } else {
        Ok(())
    }
}

/// Fiber map `X ↦ L X R` on row-major vectors.
fn fiber(l: &Mat, r: &Mat) -> Mat {
    l.kronecker(&r.transpose())
}

fn stencil_matrix(cx: &TwistedComplex, holomorphic: bool) -> Mat {
    let s = cx.surface();
    let b = cx.rank() * cx.rank();
    let mut m = DMatrix::zeros(cx.dim1(), cx.dim0());
    for f in 0..s.num_faces() {
        let c = s.dbar_coefficients(f);
        for (k, v) in s.mesh().face_vertices(f).into_iter().enumerate() {
            let (l, r) = cx.corner_action(f, k);
            let ck = if holomorphic { c[k].conj() } else { c[k] };
            let blk = fiber(l, r) * ck;
            let mut view = m.view_mut((f * b, v * b), (b, b));
            view += blk;
        }
    }
    m
}

fn ad_matrix(cx: &TwistedComplex, nu: &BundleCochain) -> Mat {
    let s = cx.surface();
    let n = cx.rank();
    let b = n * n;
    let id = Mat::identity(n, n);
    let mut m = DMatrix::zeros(cx.dim1(), cx.dim0());
    for f in 0..s.num_faces() {
        let nf = nu.site(f);
        // vec(νX − Xν) = (ν ⊗ I − I ⊗ νᵀ) vec X
        let comm = nf.kronecker(&id) - id.kronecker(&nf.transpose());
        for (k, v) in s.mesh().face_vertices(f).into_iter().enumerate() {
            let (l, r) = cx.corner_action(f, k);
            let blk = &comm * fiber(l, r) * C64::new(1.0 / 3.0, 0.0);
            let mut view = m.view_mut((f * b, v * b), (b, b));
            view += blk;
        }
    }
    m
}

/// Dense matrix of `op` on `cx`, refusing systems larger than `cap`.
pub fn materialize(cx: &TwistedComplex, op: &OperatorKind, cap: usize) -> Result<DenseOperator> {
    check_cap(cx.dim0().max(cx.dim1()), cap)?;
    let v = Space::vertex(cx);
    let out = Space::face(cx, cx.out_kind());
    let hol = || -> Result<Space> {
        match cx.out_kind() {
            CochainKind::Face(FormType::ZeroOne) => Ok(Space::face(cx, CochainKind::Face(FormType::OneZero))),
            _ => Err(Error::TypeMismatch("∂ is only defined on the End E complex".into())),
        }
    };
    Ok(match op {
        OperatorKind::Dbar => DenseOperator { matrix: stencil_matrix(cx, false), domain: v, codomain: out },
        OperatorKind::DHol => DenseOperator { matrix: stencil_matrix(cx, true), domain: v, codomain: hol()? },
        OperatorKind::DbarStar => materialize(cx, &OperatorKind::Dbar, cap)?.adjoint(),
        OperatorKind::DStar => materialize(cx, &OperatorKind::DHol, cap)?.adjoint(),
        OperatorKind::Laplacian => {
            let d = materialize(cx, &OperatorKind::Dbar, cap)?;
            d.adjoint().compose(&d)
        }
        OperatorKind::HarmonicProjector => {
            let d = materialize(cx, &OperatorKind::Dbar, cap)?;
            let ds = d.adjoint();
            let (inv, _) = restricted_inverse(&ds.compose(&d))?;
            let exact = d.compose(&inv).compose(&ds);
            let id = Mat::identity(exact.matrix.nrows(), exact.matrix.ncols());
            DenseOperator { matrix: id - exact.matrix, domain: out.clone(), codomain: out }
        }
        OperatorKind::Ad(nu) => {
            nu.expect(CochainKind::Face(FormType::ZeroOne))?;
            DenseOperator { matrix: ad_matrix(cx, nu), domain: v, codomain: out }
        }
        OperatorKind::AdStar(nu) => materialize(cx, &OperatorKind::Ad(nu.clone()), cap)?.adjoint(),
    })
}

/// Inverse of a weighted-self-adjoint positive semidefinite operator on the
/// complement of its kernel (zero on the kernel). Returns the kernel dimension.
pub fn restricted_inverse(lap: &DenseOperator) -> Result<(DenseOperator, usize)> {
    let w = &lap.domain.weights;
    let s = lap.whitened();
    let s = (&s + s.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(s);
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, l| a.max(l.abs()));
    if eig.eigenvalues.iter().any(|&l| l < -KERNEL_THRESHOLD * lmax.max(1.0)) {
        return Err(Error::Precondition("operator is not positive semidefinite".into()));
    }
    let thr = KERNEL_THRESHOLD * lmax;
    let dim = w.len();
    let mut inv = DMatrix::<C64>::zeros(dim, dim);
    let mut kernel = 0;
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l <= thr {
            kernel += 1;
            continue;
        }
        let v = eig.eigenvectors.column(i);
        inv += (v * v.adjoint()) * C64::new(1.0 / l, 0.0);
    }
    let m = DMatrix::from_fn(dim, dim, |i, j| inv[(i, j)] * (w[j] / w[i]).sqrt());
    Ok((DenseOperator { matrix: m, domain: lap.domain.clone(), codomain: lap.domain.clone() }, kernel))
}

/// Orthogonal projector onto the kernel, in the weighted pairing.
pub fn kernel_projector(lap: &DenseOperator) -> Result<DenseOperator> {
    let (inv, _) = restricted_inverse(lap)?;
    let m = Mat::identity(lap.domain.dim(), lap.domain.dim()) - &lap.matrix * &inv.matrix;
    Ok(DenseOperator { matrix: m, domain: lap.domain.clone(), codomain: lap.domain.clone() })
}

/// Square flat torus `[0,1)²` cut into `m × m` squares, two triangles each.
pub fn torus_surface(m: usize) -> Result<ConformalSurface> {
    if m < 3 {
        return Err(Error::Precondition("torus grid needs m ≥ 3".into()));
    }
    let idx = |i: usize, j: usize| (i % m) + m * (j % m);
    let mut tris = Vec::with_capacity(2 * m * m);
    let mut charts = Vec::with_capacity(2 * m * m);
    let h = 1.0 / m as f64;
    for j in 0..m {
        for i in 0..m {
            let p = |di: usize, dj: usize| C64::new((i + di) as f64 * h, (j + dj) as f64 * h);
            tris.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            charts.push([p(0, 0), p(1, 0), p(1, 1)]);
            tris.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            charts.push([p(0, 0), p(1, 1), p(0, 1)]);
        }
    }
    let mesh = HalfEdgeMesh::from_triangles(m * m, &tris)?;
    let nf = mesh.num_faces();
    ConformalSurface::from_charts(mesh, charts, vec![1.0; nf])
}

/// One Fourier mode `coef · exp(2πi(kx + ly))` with a matrix coefficient.
#[derive(Clone, Debug)]
pub struct Mode {
    pub k: i32,
    pub l: i32,
    pub coef: Mat,
}

fn mode_value(modes: &[Mode], z: C64, n: usize) -> Mat {
    let mut acc = Mat::zeros(n, n);
    for md in modes {
        let phase = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (md.k as f64 * z.re + md.l as f64 * z.im));
        acc += &md.coef * phase;
    }
    acc
}

fn mode_dbar(modes: &[Mode], z: C64, n: usize) -> Mat {
    let mut acc = Mat::zeros(n, n);
    for md in modes {
        let phase = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (md.k as f64 * z.re + md.l as f64 * z.im));
        // ∂̄ = ½(∂x + i∂y)
        let factor = C64::new(0.0, std::f64::consts::PI) * C64::new(md.k as f64, md.l as f64);
        acc += &md.coef * (phase * factor);
    }
    acc
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusLevel {
    pub m: usize,
    /// `‖P_mesh α − P_spec α‖ / ‖P_spec α‖` for `α = ∂̄f + C`.
    pub projector_error: f64,
    /// Relative error of the mesh `Δ₀⁻¹` against the Fourier inverse.
    pub inverse_error: f64,
    pub kernel_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusReport {
    pub rank: usize,
    pub levels: Vec<TorusLevel>,
    pub decreasing: bool,
}

/// Compare mesh operators with their Fourier counterparts on the flat torus
/// for the trivial rank-`n` bundle. On `[0,1)²` with ρ = 1, `Δ₀ = −½∇²`, and
/// the harmonic projector keeps exactly the constant part of a (0,1)-form.
pub fn torus_crosscheck(rank: usize, modes: &[Mode], grids: &[usize], constant: &Mat) -> Result<TorusReport> {
    if modes.iter().any(|m| m.k == 0 && m.l == 0) {
        return Err(Error::Precondition("modes must have nonzero frequency".into()));
    }
    let mut levels = Vec::new();
    for &m in grids {
        let s = Arc::new(torus_surface(m)?);
        let cocycle = UnitaryCocycle::trivial(s.mesh(), rank);
        let cx = TwistedComplex::end_bundle(s.clone(), &cocycle, SolverConfig::default())?;
        let kind = CochainKind::Face(FormType::ZeroOne);
        let alpha_sites: Vec<Mat> = (0..s.num_faces())
            .map(|f| {
                let z = s.chart(f);
                mode_dbar(modes, (z[0] + z[1] + z[2]) / 3.0, rank) + constant
            })
            .collect();
        let alpha = BundleCochain::from_sites(kind, rank, &alpha_sites);
        let expect = BundleCochain::from_sites(kind, rank, &vec![constant.clone(); s.num_faces()]);
        let p = cx.harmonic_project(&alpha)?;
        let projector_error = cx.norm(&p.sub(&expect)?)? / cx.norm(&expect)?.max(1e-300);

        let mut pos = vec![C64::new(0.0, 0.0); s.num_vertices()];
        for f in 0..s.num_faces() {
            for (k, v) in s.mesh().face_vertices(f).into_iter().enumerate() {
                pos[v] = s.chart(f)[k];
            }
        }
        let g = BundleCochain::from_sites(
            CochainKind::Vertex,
            rank,
            &pos.iter().map(|&z| mode_value(modes, z, rank)).collect::<Vec<_>>(),
        );
        let scaled: Vec<Mode> = modes
            .iter()
            .map(|md| {
                let lambda = 2.0 * std::f64::consts::PI.powi(2) * ((md.k * md.k + md.l * md.l) as f64);
                Mode { k: md.k, l: md.l, coef: &md.coef / C64::new(lambda, 0.0) }
            })
            .collect();
        let exact = BundleCochain::from_sites(
            CochainKind::Vertex,
            rank,
            &pos.iter().map(|&z| mode_value(&scaled, z, rank)).collect::<Vec<_>>(),
        );
        let approx = cx.delta0_inv(&g)?;
        let inverse_error = cx.norm(&approx.sub(&exact)?)? / cx.norm(&exact)?.max(1e-300);
        levels.push(TorusLevel { m, projector_error, inverse_error, kernel_dim: cx.kernel_dim() });
    }
    let decreasing = levels
        .windows(2)
        .all(|w| w[1].projector_error < w[0].projector_error && w[1].inverse_error < w[0].inverse_error);
    Ok(TorusReport { rank, levels, decreasing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{ad_star, GeneratorSet};
    use crate::surface::{standard_surface, DensityPolicy};

    fn complex() -> TwistedComplex {
        let s = Arc::new(standard_surface(2, 1, DensityPolicy::Hyperbolic).unwrap());
        let c = UnitaryCocycle::from_generators(s.mesh(), &GeneratorSet::rank_two_degree_one(2), 0).unwrap();
        TwistedComplex::end_bundle(s, &c, SolverConfig::default()).unwrap()
    }

    fn sample(kind: CochainKind, n: usize, sites: usize, seed: u64) -> BundleCochain {
        let mut c = BundleCochain::zeros(kind, n, sites);
        for (i, d) in c.data.iter_mut().enumerate() {
            let t = (i as f64 + 1.0) * (seed as f64 + 0.37);
            *d = C64::new(t.sin(), (1.7 * t).cos());
        }
        c
    }

    #[test]
    fn dense_matches_functional_dbar() {
        let cx = complex();
        let d = materialize(&cx, &OperatorKind::Dbar, 6000).unwrap();
        let x = sample(CochainKind::Vertex, 2, cx.surface().num_vertices(), 1);
        let diff = d.apply(&x).unwrap().sub(&cx.dbar(&x).unwrap()).unwrap();
        assert!(diff.max_abs() < 1e-12);
    }

    #[test]
    fn projector_is_orthogonal_idempotent() {
        let cx = complex();
        let p = materialize(&cx, &OperatorKind::HarmonicProjector, 6000).unwrap();
        let pw = p.whitened();
        assert!(operator_norm(&(&pw * &pw - &pw)) < 1e-8);
        assert!(operator_norm(&(&pw - pw.adjoint())) < 1e-8);
        let d = materialize(&cx, &OperatorKind::Dbar, 6000).unwrap();
        assert!(operator_norm(&p.compose(&d).whitened()) < 1e-8);
    }

    #[test]
    fn ad_star_matches_dense_adjoint() {
        let cx = complex();
        let nf = cx.surface().num_faces();
        let nu = sample(CochainKind::Face(FormType::ZeroOne), 2, nf, 2);
        let alpha = sample(CochainKind::Face(FormType::ZeroOne), 2, nf, 3);
        let dense = materialize(&cx, &OperatorKind::AdStar(nu.clone()), 6000).unwrap();
        let diff = dense.apply(&alpha).unwrap().sub(&ad_star(&cx, &nu, &alpha).unwrap()).unwrap();
        assert!(diff.max_abs() < 1e-10);
    }

    #[test]
    fn restricted_inverse_matches_solver() {
        let cx = complex();
        let lap = materialize(&cx, &OperatorKind::Laplacian, 6000).unwrap();
        let (inv, kernel) = restricted_inverse(&lap).unwrap();
        assert_eq!(kernel, cx.kernel_dim());
        let b = sample(CochainKind::Vertex, 2, cx.surface().num_vertices(), 4);
        let diff = inv.apply(&b).unwrap().sub(&cx.delta0_inv(&b).unwrap()).unwrap();
        assert!(cx.norm(&diff).unwrap() < 1e-8 * cx.norm(&inv.apply(&b).unwrap()).unwrap());
    }

    #[test]
    fn cap_is_enforced() {
        let cx = complex();
        assert!(matches!(materialize(&cx, &OperatorKind::Dbar, 10), Err(Error::DenseCapExceeded { .. })));
    }

    #[test]
    fn torus_converges() {
        let coef = Mat::identity(1, 1);
        let modes = vec![Mode { k: 1, l: 0, coef: coef.clone() }, Mode { k: 1, l: -2, coef: coef * C64::new(0.5, 0.25) }];
        let report = torus_crosscheck(1, &modes, &[6, 12, 24], &Mat::identity(1, 1)).unwrap();
        assert!(report.decreasing, "{report:?}");
        assert!(report.levels.iter().all(|l| l.kernel_dim == 1));
    }
}
