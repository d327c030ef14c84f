//! Twisted Dolbeault complexes: P1 sections of a flat bundle at vertices,
//! face-constant forms, the Laplacian `Δ₀ = ∂̄*∂̄` and its restricted inverse.
//!
//! A complex is described by per-corner fiber maps `X ↦ L X R` taking the
//! vertex frame into the face frame, plus vertex and face weights. `End E`
//! uses `L = G`, `R = G*` with `G` the cocycle transport; `TX` uses rank 1,
//! `L` the chart rotation and `R = 1`.

use std::sync::{Arc, OnceLock};

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use super::cochain::{BundleCochain, CochainKind};
use super::cocycle::{identity, UnitaryCocycle};
use crate::batch::{map_indexed, Execution};
use crate::calculus::FormType;
use crate::error::{Error, Result};
use crate::surface::ConformalSurface;
use crate::{Mat, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SolverMethod {
    /// Dense below the cap, conjugate gradients above.
    #[default]
    Auto,
    Iterative,
    Dense,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub tol: f64,
    /// Largest system size (`V·n²`) handled densely.
    pub dense_cap: usize,
    pub execution: Execution,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { method: SolverMethod::Auto, tol: 1e-10, dense_cap: 4000, execution: Execution::default() }
    }
}

/// What happened in one `Δ₀⁻¹` application.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveInfo {
    pub dense: bool,
    pub iterations: usize,
    /// Relative residual `‖Δx − Πb‖ / ‖b‖` in the weighted norm.
    pub residual: f64,
    /// Weighted norm of the kernel component removed from the right-hand side.
    pub projected: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum KernelRule {
    /// Kernel sections are parallel; found by propagation.
    Parallel,
    /// Kernel found from the dense Laplacian.
    Dense,
}

pub struct TwistedComplex {
    surface: Arc<ConformalSurface>,
    n: usize,
    out_kind: CochainKind,
    left: Vec<[Mat; 3]>,
    right: Vec<[Mat; 3]>,
    vertex_weight: Vec<f64>,
    face_weight: Vec<f64>,
    kernel: Vec<Vec<C64>>,
    config: SolverConfig,
    factor: OnceLock<std::result::Result<Cholesky<C64, Dyn>, String>>,
}

impl std::fmt::Debug for TwistedComplex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TwistedComplex")
            .field("n", &self.n)
            .field("out_kind", &self.out_kind)
            .field("vertices", &self.surface.num_vertices())
            .field("kernel_dim", &self.kernel.len())
            .finish()
    }
}

impl TwistedComplex {
    /// Complex of `End E` for the bundle defined by `cocycle`.
    pub fn end_bundle(surface: Arc<ConformalSurface>, cocycle: &UnitaryCocycle, config: SolverConfig) -> Result<Self> {
        let mesh = surface.mesh();
        let mut left = Vec::with_capacity(mesh.num_faces());
        let mut right = Vec::with_capacity(mesh.num_faces());
        for f in 0..mesh.num_faces() {
            let g = cocycle.face_frames(mesh, f);
            right.push(std::array::from_fn(|k| g[k].adjoint()));
            left.push(g);
        }
        let vertex_weight = surface.vertex_weights().to_vec();
        let face_weight = (0..surface.num_faces()).map(|f| 2.0 * surface.area(f)).collect();
        Self::assemble(
            surface,
            cocycle.rank(),
            CochainKind::Face(FormType::ZeroOne),
            left,
            right,
            vertex_weight,
            face_weight,
            KernelRule::Parallel,
            config,
        )
    }

    /// Complex of the holomorphic tangent bundle: vector fields to Beltrami
    /// differentials.
    pub fn tangent_bundle(surface: Arc<ConformalSurface>, config: SolverConfig) -> Result<Self> {
        let rot = surface.vertex_chart_rotations();
        let one = identity(1);
        let left = rot.iter().map(|r| r.map(|g| DMatrix::from_element(1, 1, g))).collect();
        let right = vec![[one.clone(), one.clone(), one]; surface.num_faces()];
        let mut vertex_weight = vec![0.0; surface.num_vertices()];
        for f in 0..surface.num_faces() {
            for v in surface.mesh().face_vertices(f) {
                vertex_weight[v] += surface.density(f).powi(2) * surface.area(f) / 3.0;
            }
        }
        let face_weight = (0..surface.num_faces()).map(|f| surface.density(f) * surface.area(f)).collect();
        Self::assemble(surface, 1, CochainKind::Beltrami, left, right, vertex_weight, face_weight, KernelRule::Dense, config)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        surface: Arc<ConformalSurface>,
        n: usize,
        out_kind: CochainKind,
        left: Vec<[Mat; 3]>,
        right: Vec<[Mat; 3]>,
        vertex_weight: Vec<f64>,
        face_weight: Vec<f64>,
        rule: KernelRule,
        config: SolverConfig,
    ) -> Result<Self> {
        let mut cx = TwistedComplex {
            surface,
            n,
            out_kind,
            left,
            right,
            vertex_weight,
            face_weight,
            kernel: Vec::new(),
            config,
            factor: OnceLock::new(),
        };
        let raw = match rule {
            KernelRule::Parallel => cx.parallel_sections(),
            KernelRule::Dense => cx.dense_kernel()?,
        };
        cx.kernel = cx.orthonormalize(raw);
        Ok(cx)
    }

    pub fn surface(&self) -> &Arc<ConformalSurface> {
        &self.surface
    }
    pub fn rank(&self) -> usize {
        self.n
    }
    pub fn out_kind(&self) -> CochainKind {
        self.out_kind
    }
    pub fn config(&self) -> &SolverConfig {
        &self.config
    }
    pub fn set_config(&mut self, config: SolverConfig) {
        self.config = config;
    }
    /// Fiber maps `(L, R)` at corner `k` of face `f`.
    pub fn corner_action(&self, f: usize, k: usize) -> (&Mat, &Mat) {
        (&self.left[f][k], &self.right[f][k])
    }
    pub fn vertex_weights(&self) -> &[f64] {
        &self.vertex_weight
    }
    pub fn face_weights(&self) -> &[f64] {
        &self.face_weight
    }
    pub fn kernel_dim(&self) -> usize {
        self.kernel.len()
    }
    /// Weighted-orthonormal basis of `ker Δ₀`.
    pub fn kernel_basis(&self) -> Vec<BundleCochain> {
        self.kernel
            .iter()
            .map(|k| BundleCochain { kind: CochainKind::Vertex, n: self.n, data: k.clone() })
            .collect()
    }
    /// Size of the vertex-side system, `V·n²`.
    pub fn dim0(&self) -> usize {
        self.surface.num_vertices() * self.n * self.n
    }
    pub fn dim1(&self) -> usize {
        self.surface.num_faces() * self.n * self.n
    }

    pub fn zero_section(&self) -> BundleCochain {
        BundleCochain::zeros(CochainKind::Vertex, self.n, self.surface.num_vertices())
    }
    pub fn zero_form(&self, kind: CochainKind) -> BundleCochain {
        BundleCochain::zeros(kind, self.n, self.surface.num_faces())
    }

    fn weighted_ip(&self, x: &[C64], y: &[C64], weights: &[f64]) -> C64 {
        let b = self.n * self.n;
        x.chunks(b)
            .zip(y.chunks(b))
            .zip(weights)
            .map(|((xs, ys), w)| xs.iter().zip(ys).map(|(a, c)| a * c.conj()).sum::<C64>() * *w)
            .sum()
    }

    /// Weighted pairing of two cochains of the same kind.
    pub fn inner(&self, x: &BundleCochain, y: &BundleCochain) -> Result<C64> {
        if x.kind != y.kind || x.n != self.n || y.n != self.n {
            return Err(Error::TypeMismatch(format!("pairing {:?} with {:?}", x.kind, y.kind)));
        }
        let w = if x.kind == CochainKind::Vertex { &self.vertex_weight } else { &self.face_weight };
        if x.sites() != w.len() || y.sites() != w.len() {
            return Err(Error::TypeMismatch("cochain size does not match the surface".into()));
        }
        Ok(self.weighted_ip(&x.data, &y.data, w))
    }

    pub fn norm(&self, x: &BundleCochain) -> Result<f64> {
        Ok(self.inner(x, x)?.re.max(0.0).sqrt())
    }

    fn check_vertex(&self, x: &BundleCochain) -> Result<()> {
        x.expect(CochainKind::Vertex)?;
        if x.n != self.n || x.sites() != self.surface.num_vertices() {
            return Err(Error::TypeMismatch("section does not live on this complex".into()));
        }
        Ok(())
    }

    fn check_face(&self, x: &BundleCochain, kind: CochainKind) -> Result<()> {
        x.expect(kind)?;
        if x.n != self.n || x.sites() != self.surface.num_faces() {
            return Err(Error::TypeMismatch("form does not live on this complex".into()));
        }
        Ok(())
    }

    fn holomorphic_kind(&self) -> Result<CochainKind> {
        match self.out_kind {
            CochainKind::Face(FormType::ZeroOne) => Ok(CochainKind::Face(FormType::OneZero)),
            _ => Err(Error::TypeMismatch("∂ is only defined on the End E complex".into())),
        }
    }

    fn stencil(&self, x: &BundleCochain, holomorphic: bool, kind: CochainKind) -> BundleCochain {
        let s = &self.surface;
        let mut out = self.zero_form(kind);
        for f in 0..s.num_faces() {
            let c = s.dbar_coefficients(f);
            let vs = s.mesh().face_vertices(f);
            let mut acc = Mat::zeros(self.n, self.n);
            for k in 0..3 {
                let ck = if holomorphic { c[k].conj() } else { c[k] };
                acc += (&self.left[f][k] * x.site(vs[k]) * &self.right[f][k]) * ck;
            }
            out.set_site(f, &acc);
        }
        out
    }

    fn adjoint_stencil(&self, a: &BundleCochain, holomorphic: bool) -> BundleCochain {
        let s = &self.surface;
        let mut out = self.zero_section();
        for f in 0..s.num_faces() {
            let c = s.dbar_coefficients(f);
            let vs = s.mesh().face_vertices(f);
            let af = a.site(f);
            for k in 0..3 {
                let ck = if holomorphic { c[k] } else { c[k].conj() };
                let term = self.left[f][k].adjoint() * &af * self.right[f][k].adjoint() * (ck * self.face_weight[f]);
                out.add_to_site(vs[k], &term);
            }
        }
        self.divide_vertex_weights(&mut out);
        out
    }

    fn divide_vertex_weights(&self, x: &mut BundleCochain) {
        let b = self.n * self.n;
        for (v, chunk) in x.data.chunks_mut(b).enumerate() {
            for c in chunk {
                *c /= self.vertex_weight[v];
            }
        }
    }

    /// `∂̄` on sections.
    pub fn dbar(&self, x: &BundleCochain) -> Result<BundleCochain> {
        self.check_vertex(x)?;
        Ok(self.stencil(x, false, self.out_kind))
    }

    /// `∂` on sections (End E only).
    pub fn d_hol(&self, x: &BundleCochain) -> Result<BundleCochain> {
        self.check_vertex(x)?;
        let kind = self.holomorphic_kind()?;
        Ok(self.stencil(x, true, kind))
    }

    /// Weighted adjoint of [`Self::dbar`].
    pub fn dbar_star(&self, a: &BundleCochain) -> Result<BundleCochain> {
        self.check_face(a, self.out_kind)?;
        Ok(self.adjoint_stencil(a, false))
    }

    /// Weighted adjoint of [`Self::d_hol`].
    pub fn d_star(&self, a: &BundleCochain) -> Result<BundleCochain> {
        let kind = self.holomorphic_kind()?;
        self.check_face(a, kind)?;
        Ok(self.adjoint_stencil(a, true))
    }

    /// `Δ₀ = ∂̄*∂̄`.
    pub fn laplacian(&self, x: &BundleCochain) -> Result<BundleCochain> {
        self.dbar_star(&self.dbar(x)?)
    }

    /// Per-face mean of the three corner values, in the face frame.
    pub fn face_average(&self, x: &BundleCochain) -> Result<BundleCochain> {
        self.check_vertex(x)?;
        let s = &self.surface;
        let mut out = self.zero_form(CochainKind::Face(FormType::Face));
        for f in 0..s.num_faces() {
            let vs = s.mesh().face_vertices(f);
            let mut acc = Mat::zeros(self.n, self.n);
            for k in 0..3 {
                acc += &self.left[f][k] * x.site(vs[k]) * &self.right[f][k];
            }
            out.set_site(f, &(acc / C64::new(3.0, 0.0)));
        }
        Ok(out)
    }

    /// Adjoint-style lumping of face values back to vertices:
    /// `(1/w_v) Σ_{f∋v} (wf_f/3) L* Y_f R*`.
    pub fn lump_to_vertices(&self, y: &[Mat], face_mass: &[f64]) -> BundleCochain {
        let s = &self.surface;
        let mut out = self.zero_section();
        for f in 0..s.num_faces() {
            let vs = s.mesh().face_vertices(f);
            for k in 0..3 {
                let term = self.left[f][k].adjoint() * &y[f] * self.right[f][k].adjoint() * C64::new(face_mass[f] / 3.0, 0.0);
                out.add_to_site(vs[k], &term);
            }
        }
        self.divide_vertex_weights(&mut out);
        out
    }

    /// Remove the kernel component; returns the cochain and the removed norm.
    pub fn project_off_kernel(&self, x: &BundleCochain) -> Result<(BundleCochain, f64)> {
        self.check_vertex(x)?;
        let mut out = x.data.clone();
        let mut removed = 0.0;
        for k in &self.kernel {
            let c = self.weighted_ip(&out, k, &self.vertex_weight);
            removed += c.norm_sqr();
            for (o, kv) in out.iter_mut().zip(k) {
                *o -= c * kv;
            }
        }
        Ok((BundleCochain { kind: CochainKind::Vertex, n: self.n, data: out }, removed.sqrt()))
    }

    fn use_dense(&self) -> Result<bool> {
        match self.config.method {
            SolverMethod::Dense => {
                if self.dim0() > self.config.dense_cap {
                    Err(Error::DenseCapExceeded { size: self.dim0(), cap: self.config.dense_cap })
                } else {
                    Ok(true)
                }
            }
            SolverMethod::Iterative => Ok(false),
            SolverMethod::Auto => Ok(self.dim0() <= self.config.dense_cap),
        }
    }

    /// `Δ₀⁻¹` restricted to the orthogonal complement of the kernel. The
    /// right-hand side is projected off the kernel first.
    pub fn solve(&self, rhs: &BundleCochain) -> Result<(BundleCochain, SolveInfo)> {
        let (b, projected) = self.project_off_kernel(rhs)?;
        let bnorm = self.weighted_ip(&b.data, &b.data, &self.vertex_weight).re.sqrt();
        if bnorm == 0.0 {
            return Ok((self.zero_section(), SolveInfo { dense: false, iterations: 0, residual: 0.0, projected }));
        }
        let dense = self.use_dense()?;
        let (x, iterations) = if dense { (self.dense_solve(&b)?, 0) } else { self.cg_solve(&b, bnorm)? };
        let (x, _) = self.project_off_kernel(&x)?;
        let r = self.laplacian(&x)?.sub(&b)?;
        let residual = self.weighted_ip(&r.data, &r.data, &self.vertex_weight).re.sqrt() / bnorm;
        Ok((x, SolveInfo { dense, iterations, residual, projected }))
    }

    /// Convenience wrapper around [`Self::solve`].
    pub fn delta0_inv(&self, rhs: &BundleCochain) -> Result<BundleCochain> {
        Ok(self.solve(rhs)?.0)
    }

    fn cg_solve(&self, b: &BundleCochain, bnorm: f64) -> Result<(BundleCochain, usize)> {
        let w = &self.vertex_weight;
        let mut x = self.zero_section();
        let mut r = b.clone();
        let mut p = r.clone();
        let mut rr = self.weighted_ip(&r.data, &r.data, w).re;
        let max_iter = 10 * self.dim0().max(10);
        for it in 0..max_iter {
            if rr.sqrt() <= self.config.tol * bnorm {
                return Ok((x, it));
            }
            let ap = self.laplacian(&p)?;
            let pap = self.weighted_ip(&p.data, &ap.data, w).re;
            if pap <= 0.0 {
                return Err(Error::NoConvergence { iterations: it, residual: rr.sqrt() / bnorm });
            }
            let alpha = C64::new(rr / pap, 0.0);
            x = x.axpy(alpha, &p)?;
            r = self.project_off_kernel(&r.axpy(-alpha, &ap)?)?.0;
            let rr_new = self.weighted_ip(&r.data, &r.data, w).re;
            p = r.axpy(C64::new(rr_new / rr, 0.0), &p)?;
            rr = rr_new;
        }
        Err(Error::NoConvergence { iterations: max_iter, residual: rr.sqrt() / bnorm })
    }

    fn dense_factor(&self) -> Result<&Cholesky<C64, Dyn>> {
        let res = self.factor.get_or_init(|| {
            let n0 = self.dim0();
            let b = self.n * self.n;
            let cols = map_indexed(n0, self.config.execution, |j| {
                let mut e = self.zero_section();
                e.data[j] = C64::new(1.0, 0.0);
                let mut col = self.laplacian(&e).map(|c| c.data).unwrap_or_default();
                for (i, c) in col.iter_mut().enumerate() {
                    *c *= self.vertex_weight[i / b];
                }
                col
            });
            let mut h = DMatrix::<C64>::from_fn(n0, n0, |i, j| cols[j][i]);
            // + W K K* W pins the kernel
            for k in &self.kernel {
                let wk: Vec<C64> = k.iter().enumerate().map(|(i, c)| c * self.vertex_weight[i / b]).collect();
                for j in 0..n0 {
                    for i in 0..n0 {
                        h[(i, j)] += wk[i] * wk[j].conj();
                    }
                }
            }
            let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
            Cholesky::new(h).ok_or_else(|| "Laplacian plus kernel shift is not positive definite".to_string())
        });
        res.as_ref().map_err(|m| Error::Precondition(m.clone()))
    }

    fn dense_solve(&self, b: &BundleCochain) -> Result<BundleCochain> {
        let chol = self.dense_factor()?;
        let blk = self.n * self.n;
        let wb = nalgebra::DVector::from_iterator(
            b.data.len(),
            b.data.iter().enumerate().map(|(i, c)| c * self.vertex_weight[i / blk]),
        );
        let x = chol.solve(&wb);
        Ok(BundleCochain { kind: CochainKind::Vertex, n: self.n, data: x.iter().copied().collect() })
    }

    /// `P = I − ∂̄ Δ₀⁻¹ ∂̄*` on forms of the output kind.
    pub fn harmonic_project(&self, a: &BundleCochain) -> Result<BundleCochain> {
        let exact = self.dbar(&self.delta0_inv(&self.dbar_star(a)?)?)?;
        a.sub(&exact)
    }

    /// Kernel candidates by parallel transport from vertex 0: each vertex gets
    /// a linear map from the root fiber, and closing constraints cut the space.
    fn parallel_sections(&self) -> Vec<Vec<C64>> {
        let s = &self.surface;
        let n = self.n;
        let b = n * n;
        let fiber = |l: &Mat, r: &Mat| l.kronecker(&r.transpose());
        let nv = s.num_vertices();
        let mut maps: Vec<Option<Mat>> = vec![None; nv];
        maps[0] = Some(identity(b));
        let mut gram = DMatrix::<C64>::zeros(b, b);
        let mut faces_of: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nv];
        for f in 0..s.num_faces() {
            for (k, v) in s.mesh().face_vertices(f).into_iter().enumerate() {
                faces_of[v].push((f, k));
            }
        }
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(v) = queue.pop_front() {
            let mv = maps[v].clone().expect("queued vertices are mapped");
            for &(f, k) in &faces_of[v] {
                let vs = s.mesh().face_vertices(f);
                let into_face = fiber(&self.left[f][k], &self.right[f][k]) * &mv;
                for j in 0..3 {
                    if j == k {
                        continue;
                    }
                    let to_vertex = fiber(&self.left[f][j].adjoint(), &self.right[f][j].adjoint());
                    let cand = &to_vertex * &into_face;
                    match &maps[vs[j]] {
                        Some(existing) => {
                            let d = &cand - existing;
                            gram += d.adjoint() * d;
                        }
                        None => {
                            maps[vs[j]] = Some(cand);
                            queue.push_back(vs[j]);
                        }
                    }
                }
            }
        }
        let eig = nalgebra::SymmetricEigen::new(gram);
        let mut out = Vec::new();
        for (i, lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda.abs() < 1e-8 {
                let root = eig.eigenvectors.column(i);
                let mut data = vec![C64::new(0.0, 0.0); nv * b];
                for v in 0..nv {
                    let val = maps[v].as_ref().expect("connected mesh") * root;
                    data[v * b..(v + 1) * b].copy_from_slice(val.as_slice());
                }
                out.push(data);
            }
        }
        out
    }

    /// Kernel from the eigendecomposition of the whitened dense Laplacian.
    fn dense_kernel(&self) -> Result<Vec<Vec<C64>>> {
        let n0 = self.dim0();
        if n0 > self.config.dense_cap {
            return Err(Error::DenseCapExceeded { size: n0, cap: self.config.dense_cap });
        }
        let b = self.n * self.n;
        let sq: Vec<f64> = (0..n0).map(|i| self.vertex_weight[i / b].sqrt()).collect();
        let cols = map_indexed(n0, self.config.execution, |j| {
            let mut e = self.zero_section();
            e.data[j] = C64::new(1.0 / sq[j], 0.0);
            let d = self.stencil(&e, false, self.out_kind);
            d.data.iter().enumerate().map(|(i, c)| c * self.face_weight[i / b].sqrt()).collect::<Vec<_>>()
        });
        let m = DMatrix::<C64>::from_fn(self.dim1(), n0, |i, j| cols[j][i]);
        let gram = m.adjoint() * m;
        let eig = nalgebra::SymmetricEigen::new(gram);
        let scale = eig.eigenvalues.iter().fold(0.0f64, |a, l| a.max(l.abs())).max(1e-300);
        Ok(eig
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, l)| l.abs() < 1e-10 * scale)
            .map(|(i, _)| eig.eigenvectors.column(i).iter().zip(&sq).map(|(c, s)| c / *s).collect())
            .collect())
    }

    fn orthonormalize(&self, raw: Vec<Vec<C64>>) -> Vec<Vec<C64>> {
        let w = &self.vertex_weight;
        let mut basis: Vec<Vec<C64>> = Vec::new();
        for mut v in raw {
            for _ in 0..2 {
                for q in &basis {
                    let c = self.weighted_ip(&v, q, w);
                    for (a, b) in v.iter_mut().zip(q) {
                        *a -= c * b;
                    }
                }
            }
            let nrm = self.weighted_ip(&v, &v, w).re.sqrt();
            if nrm > 1e-10 {
                basis.push(v.into_iter().map(|c| c / nrm).collect());
            }
        }
        basis
    }
}
