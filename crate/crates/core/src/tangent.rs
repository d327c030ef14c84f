//! Tangent vectors `μ ⊕ ν` at a center point: harmonic Beltrami
//! differentials and harmonic `End E`-valued (0,1)-forms.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::batch::map_indexed;
use crate::bundle::{BundleCochain, CochainKind, GeneratorSet, SolverConfig, TwistedComplex, UnitaryCocycle};
use crate::calculus::FormType;
use crate::error::{Error, Result};
use crate::surface::{standard_surface, ConformalSurface, DensityPolicy};
use crate::{Mat, C64};

pub const ZERO_ONE: CochainKind = CochainKind::Face(FormType::ZeroOne);

/// A surface with a flat bundle and both Dolbeault complexes built.
#[derive(Debug)]
pub struct CenterPoint {
    pub surface: Arc<ConformalSurface>,
    pub cocycle: UnitaryCocycle,
    pub end: TwistedComplex,
    pub tx: TwistedComplex,
}

impl CenterPoint {
    pub fn new(surface: Arc<ConformalSurface>, cocycle: UnitaryCocycle, config: SolverConfig) -> Result<Self> {
        let end = TwistedComplex::end_bundle(surface.clone(), &cocycle, config)?;
        let tx = TwistedComplex::tangent_bundle(surface.clone(), config)?;
        Ok(CenterPoint { surface, cocycle, end, tx })
    }

    /// Polygon gluing of `genus`, refined `levels` times, with the bundle
    /// given by `gens` (marked face 0).
    pub fn standard(
        genus: usize,
        levels: usize,
        density: DensityPolicy,
        gens: &GeneratorSet,
        config: SolverConfig,
    ) -> Result<Self> {
        let surface = Arc::new(standard_surface(genus, levels, density)?);
        let cocycle = UnitaryCocycle::from_generators(surface.mesh(), gens, 0)?;
        Self::new(surface, cocycle, config)
    }

    pub fn rank(&self) -> usize {
        self.end.rank()
    }

    pub fn zero_tangent(&self) -> TangentVector {
        TangentVector { mu: self.tx.zero_form(CochainKind::Beltrami), nu: self.end.zero_form(ZERO_ONE) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    /// Beltrami differential, rank 1.
    pub mu: BundleCochain,
    /// `End E`-valued (0,1)-form.
    pub nu: BundleCochain,
}

impl TangentVector {
    pub fn new(mu: BundleCochain, nu: BundleCochain) -> Result<Self> {
        mu.expect(CochainKind::Beltrami)?;
        nu.expect(ZERO_ONE)?;
        if mu.n != 1 || mu.sites() != nu.sites() {
            return Err(Error::TypeMismatch("μ must be scalar and live on the same faces as ν".into()));
        }
        Ok(TangentVector { mu, nu })
    }

    pub fn with_mu(&self, mu: BundleCochain) -> Self {
        TangentVector { mu, nu: self.nu.clone() }
    }

    pub fn with_nu(&self, nu: BundleCochain) -> Self {
        TangentVector { mu: self.mu.clone(), nu }
    }

    pub fn mu_only(&self) -> Self {
        self.with_nu(self.nu.scaled(C64::new(0.0, 0.0)))
    }

    pub fn nu_only(&self) -> Self {
        self.with_mu(self.mu.scaled(C64::new(0.0, 0.0)))
    }

    pub fn scaled(&self, s: C64) -> Self {
        TangentVector { mu: self.mu.scaled(s), nu: self.nu.scaled(s) }
    }

    /// `mu <face> re im` and `nu <face> re im ...` lines.
    pub fn to_text(&self) -> String {
        let mut s = format!("tangent {} {}\n", self.nu.n, self.nu.sites());
        for f in 0..self.mu.sites() {
            let m = self.mu.data[f];
            let _ = writeln!(s, "mu {f} {:e} {:e}", m.re, m.im);
        }
        for f in 0..self.nu.sites() {
            let _ = write!(s, "nu {f}");
            for c in self.nu.site_slice(f) {
                let _ = write!(s, " {:e} {:e}", c.re, c.im);
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let perr = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_string() };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hl, header) = lines.next().ok_or_else(|| perr(1, "empty tangent file"))?;
        let tok: Vec<&str> = header.split_whitespace().collect();
        if tok.len() != 3 || tok[0] != "tangent" {
            return Err(perr(hl + 1, "expected `tangent rank faces`"));
        }
        let n: usize = tok[1].parse().map_err(|_| perr(hl + 1, "malformed rank"))?;
        let nf: usize = tok[2].parse().map_err(|_| perr(hl + 1, "malformed face count"))?;
        let mut mu = BundleCochain::zeros(CochainKind::Beltrami, 1, nf);
        let mut nu = BundleCochain::zeros(ZERO_ONE, n, nf);
        for (ln, l) in lines {
            let tok: Vec<&str> = l.split_whitespace().collect();
            let vals = tok
                .iter()
                .skip(2)
                .map(|t| t.parse::<f64>().map_err(|_| perr(ln + 1, "malformed number")))
                .collect::<Result<Vec<_>>>()?;
            let f: usize = tok.get(1).and_then(|t| t.parse().ok()).ok_or_else(|| perr(ln + 1, "malformed face"))?;
            if f >= nf {
                return Err(perr(ln + 1, "face out of range"));
            }
            match tok[0] {
                "mu" if vals.len() == 2 => mu.data[f] = C64::new(vals[0], vals[1]),
                "nu" if vals.len() == 2 * n * n => {
                    for k in 0..n * n {
                        nu.data[f * n * n + k] = C64::new(vals[2 * k], vals[2 * k + 1]);
                    }
                }
                _ => return Err(perr(ln + 1, "expected `mu f re im` or `nu f` with rank² entries")),
            }
        }
        TangentVector::new(mu, nu)
    }
}

/// Harmonic part of a Beltrami differential.
pub fn project_beltrami(center: &CenterPoint, mu: &BundleCochain) -> Result<BundleCochain> {
    center.tx.harmonic_project(mu)
}

/// Harmonic part of an `End E`-valued (0,1)-form.
pub fn project_nu(center: &CenterPoint, nu: &BundleCochain) -> Result<BundleCochain> {
    center.end.harmonic_project(nu)
}

/// Kodaira–Spencer map at the center: `(μ̃, ν̃) ↦ (P μ̃, P^{0,1} ν̃)`.
pub fn ks_center(center: &CenterPoint, mu: &BundleCochain, nu: &BundleCochain) -> Result<TangentVector> {
    TangentVector::new(project_beltrami(center, mu)?, project_nu(center, nu)?)
}

/// Remove the trace part `(tr ν / n) I` face by face.
pub fn project_traceless(nu: &BundleCochain) -> BundleCochain {
    let n = nu.n;
    let mut out = nu.clone();
    for f in 0..nu.sites() {
        let m = nu.site(f);
        let t = m.trace() / n as f64;
        out.set_site(f, &(m - Mat::identity(n, n) * t));
    }
    out
}

/// Weighted norms of `∂̄*μ` and `∂̄*ν`; both vanish for harmonic tangents.
pub fn harmonic_defect(center: &CenterPoint, v: &TangentVector) -> Result<(f64, f64)> {
    let dm = center.tx.dbar_star(&v.mu)?;
    let dn = center.end.dbar_star(&v.nu)?;
    Ok((center.tx.norm(&dm)?, center.end.norm(&dn)?))
}

fn random_cochain(kind: CochainKind, n: usize, sites: usize, rng: &mut ChaCha8Rng) -> BundleCochain {
    let mut c = BundleCochain::zeros(kind, n, sites);
    for d in &mut c.data {
        *d = C64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0);
    }
    c
}

/// Random harmonic tangent vector; each nonzero component is rescaled to
/// weighted norm `scale`.
pub fn random_tangent(center: &CenterPoint, seed: u64, scale: f64) -> Result<TangentVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nf = center.surface.num_faces();
    let mu_raw = random_cochain(CochainKind::Beltrami, 1, nf, &mut rng);
    let nu_raw = random_cochain(ZERO_ONE, center.rank(), nf, &mut rng);
    let v = ks_center(center, &mu_raw, &nu_raw)?;
    let mn = center.tx.norm(&v.mu)?;
    let nn = center.end.norm(&v.nu)?;
    let mu = if mn > 0.0 { v.mu.scaled(C64::new(scale / mn, 0.0)) } else { v.mu };
    let nu = if nn > 0.0 { v.nu.scaled(C64::new(scale / nn, 0.0)) } else { v.nu };
    Ok(TangentVector { mu, nu })
}

/// Orthonormal basis of harmonic forms of `cx` (dense; diagnostic use).
pub fn harmonic_basis(cx: &TwistedComplex) -> Result<Vec<BundleCochain>> {
    let (n0, n1) = (cx.dim0(), cx.dim1());
    let cap = cx.config().dense_cap;
    if n1 > cap {
        return Err(Error::DenseCapExceeded { size: n1, cap });
    }
    let b = cx.rank() * cx.rank();
    let vw = cx.vertex_weights();
    let fw = cx.face_weights();
    let cols = map_indexed(n0, cx.config().execution, |j| {
        let mut e = cx.zero_section();
        e.data[j] = C64::new(1.0 / vw[j / b].sqrt(), 0.0);
        cx.dbar(&e)
            .map(|d| d.data.iter().enumerate().map(|(i, c)| c * fw[i / b].sqrt()).collect::<Vec<_>>())
    });
    let cols = cols.into_iter().collect::<Result<Vec<_>>>()?;
    let d = DMatrix::<C64>::from_fn(n1, n0, |i, j| cols[j][i]);
    let gram = &d * d.adjoint();
    let eig = nalgebra::SymmetricEigen::new(gram);
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, l| a.max(l.abs())).max(1e-300);
    let mut out = Vec::new();
    for (i, l) in eig.eigenvalues.iter().enumerate() {
        if l.abs() < 1e-10 * scale {
            let col = eig.eigenvectors.column(i);
            let data = col.iter().enumerate().map(|(k, c)| c / fw[k / b].sqrt()).collect();
            out.push(BundleCochain { kind: cx.out_kind(), n: cx.rank(), data });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn center() -> CenterPoint {
        CenterPoint::standard(2, 2, DensityPolicy::Hyperbolic, &GeneratorSet::rank_two_degree_one(2), SolverConfig::default())
            .unwrap()
    }

    #[test]
    fn random_tangents_are_harmonic() {
        let c = center();
        let v = random_tangent(&c, 3, 1.0).unwrap();
        let (dm, dn) = harmonic_defect(&c, &v).unwrap();
        assert!(dm < 1e-8 && dn < 1e-8, "{dm} {dn}");
        assert!((c.end.norm(&v.nu).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ks_kills_exact_inputs() {
        let c = center();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_cochain(CochainKind::Vertex, 1, c.surface.num_vertices(), &mut rng);
        let y = random_cochain(CochainKind::Vertex, 2, c.surface.num_vertices(), &mut rng);
        let v = ks_center(&c, &c.tx.dbar(&x).unwrap(), &c.end.dbar(&y).unwrap()).unwrap();
        assert!(v.mu.max_abs() < 1e-8 && v.nu.max_abs() < 1e-8);
    }

    #[test]
    fn traceless_projection_is_orthogonal() {
        let c = center();
        let v = random_tangent(&c, 4, 1.0).unwrap();
        let t = project_traceless(&v.nu);
        let rest = v.nu.sub(&t).unwrap();
        assert!(c.end.inner(&t, &rest).unwrap().norm() < 1e-12);
        for f in 0..t.sites() {
            assert!(t.site(f).trace().norm() < 1e-12);
        }
    }

    #[test]
    fn harmonic_basis_is_orthonormal_and_coclosed() {
        let c = CenterPoint::standard(2, 1, DensityPolicy::Uniform, &GeneratorSet::trivial(2, 1), SolverConfig::default()).unwrap();
        let basis = harmonic_basis(&c.end).unwrap();
        assert_eq!(basis.len(), c.end.dim1() - c.end.dim0() + c.end.kernel_dim());
        for (i, a) in basis.iter().enumerate().take(5) {
            assert!(c.end.dbar_star(a).unwrap().max_abs() < 1e-8);
            for (j, b) in basis.iter().enumerate().take(5) {
                let ip = c.end.inner(a, b).unwrap();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((ip - expect).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn tangent_text_round_trip() {
        let c = center();
        let v = random_tangent(&c, 5, 0.5).unwrap();
        let back = TangentVector::from_text(&v.to_text()).unwrap();
        assert!(back.nu.sub(&v.nu).unwrap().max_abs() < 1e-15);
        assert!(back.mu.sub(&v.mu).unwrap().max_abs() < 1e-15);
    }
}
