//! Flat unitary cocycles on the edges of a triangulated surface.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::surface::HalfEdgeMesh;
use crate::{Mat, C64};

/// Tolerance for unitarity and the surface-group relation on input generators.
pub const GENERATOR_TOL: f64 = 1e-10;
/// Tolerance on central face holonomies while assembling the cocycle.
pub const HOLONOMY_TOL: f64 = 1e-9;

/// Generator matrices `(a_i, b_i)` of a projectively flat unitary bundle of
/// rank `n` and degree `d`: `Π [a_i, b_i] = exp(2πi d/n) I`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSet {
    pub rank: usize,
    pub degree: i64,
    /// `[(a1, b1), (a2, b2), ...]`
    pub pairs: Vec<(Mat, Mat)>,
}

pub fn identity(n: usize) -> Mat {
    DMatrix::identity(n, n)
}

pub fn commutator_group(a: &Mat, b: &Mat) -> Mat {
    a * b * a.adjoint() * b.adjoint()
}

fn unitarity_residual(m: &Mat) -> f64 {
    (m.adjoint() * m - identity(m.nrows())).norm()
}

/// Haar-ish random unitary from the QR factor of a Gaussian-like matrix.
pub fn random_unitary(n: usize, rng: &mut impl Rng) -> Mat {
    let m = DMatrix::from_fn(n, n, |_, _| {
        C64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)
    });
    let qr = m.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            let d = r[(i, i)];
            if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) }
        } else {
            C64::new(0.0, 0.0)
        }
    });
    q * phases
}

/// `exp(i θ σ·m)` for a unit axis `m`.
fn su2(theta: f64, axis: [f64; 3]) -> Mat {
    let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let [x, y, z] = axis.map(|c| c / norm);
    let (c, s) = (theta.cos(), theta.sin());
    let i = C64::new(0.0, 1.0);
    DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(c, 0.0) + i * s * z,
            i * s * x + s * y,
            i * s * x - s * y,
            C64::new(c, 0.0) - i * s * z,
        ],
    )
}

/// Clock and shift matrices of size `n`: `C S C⁻¹ S⁻¹ = exp(2πi/n) I`.
pub fn clock_shift(n: usize) -> (Mat, Mat) {
    let w = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / n as f64);
    let clock = DMatrix::from_fn(n, n, |i, j| if i == j { w.powu(i as u32) } else { C64::new(0.0, 0.0) });
    let shift = DMatrix::from_fn(n, n, |i, j| if i == (j + 1) % n { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
    (clock, shift)
}

impl GeneratorSet {
    pub fn trivial(genus: usize, rank: usize) -> Self {
        GeneratorSet { rank, degree: 0, pairs: vec![(identity(rank), identity(rank)); genus] }
    }

    /// Irreducible rank-2 degree-1 example: `a1 = iσ_z`, `b1 = iσ_x`, and a
    /// commuting SU(2) pair on a skew axis for the remaining handles.
    pub fn rank_two_degree_one(genus: usize) -> Self {
        let i = C64::new(0.0, 1.0);
        let z = C64::new(0.0, 0.0);
        let a1 = DMatrix::from_row_slice(2, 2, &[i, z, z, -i]);
        let b1 = DMatrix::from_row_slice(2, 2, &[z, i, i, z]);
        let mut pairs = vec![(a1, b1)];
        for k in 1..genus {
            let axis = [1.0, 2.0, 3.0 + k as f64];
            pairs.push((su2(0.7 * k as f64, axis), su2(-1.3 / k as f64, axis)));
        }
        GeneratorSet { rank: 2, degree: 1, pairs }
    }

    /// Degree-0 set with random `(a1, b1)` and `(a2, b2) = (b1, a1)`; higher
    /// handles trivial.
    pub fn random_degree_zero(genus: usize, rank: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a1 = random_unitary(rank, &mut rng);
        let b1 = random_unitary(rank, &mut rng);
        let mut pairs = vec![(a1.clone(), b1.clone()), (b1, a1)];
        pairs.truncate(genus.max(2));
        while pairs.len() < genus {
            pairs.push((identity(rank), identity(rank)));
        }
        GeneratorSet { rank, degree: 0, pairs }
    }

    /// Clock/shift on the first handle, trivial elsewhere; degree 1.
    pub fn clock_shift(genus: usize, rank: usize) -> Self {
        let (c, s) = clock_shift(rank);
        let mut pairs = vec![(c, s)];
        while pairs.len() < genus {
            pairs.push((identity(rank), identity(rank)));
        }
        GeneratorSet { rank, degree: 1, pairs }
    }

    /// Look up a named preset: `trivial`, `rank2-degree1`, `random-degree0`,
    /// `clock-shift`.
    pub fn preset(name: &str, genus: usize, rank: usize, seed: u64) -> Result<Self> {
        match name {
            "trivial" => Ok(Self::trivial(genus, rank)),
            "rank2-degree1" => Ok(Self::rank_two_degree_one(genus)),
            "random-degree0" => Ok(Self::random_degree_zero(genus, rank, seed)),
            "clock-shift" => Ok(Self::clock_shift(genus, rank)),
            other => Err(Error::Precondition(format!("unknown bundle preset `{other}`"))),
        }
    }

    pub fn central_phase(&self) -> C64 {
        C64::from_polar(1.0, 2.0 * std::f64::consts::PI * self.degree as f64 / self.rank as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let mut prod = identity(self.rank);
        for (i, (a, b)) in self.pairs.iter().enumerate() {
            for (name, m) in [(format!("a{}", i + 1), a), (format!("b{}", i + 1), b)] {
                if m.nrows() != self.rank || m.ncols() != self.rank {
                    return Err(Error::InvalidCocycle(format!("{name} is not {0}x{0}", self.rank)));
                }
                let residual = unitarity_residual(m);
                if residual > GENERATOR_TOL {
                    return Err(Error::NotUnitary { name, residual });
                }
            }
            prod = prod * commutator_group(a, b);
        }
        let residual = (prod - identity(self.rank) * self.central_phase()).norm();
        if residual > GENERATOR_TOL {
            return Err(Error::RelationMismatch { residual, tol: GENERATOR_TOL });
        }
        Ok(())
    }

    fn by_label(&self) -> HashMap<String, Mat> {
        let mut out = HashMap::new();
        for (i, (a, b)) in self.pairs.iter().enumerate() {
            out.insert(format!("a{}", i + 1), a.clone());
            out.insert(format!("b{}", i + 1), b.clone());
        }
        out
    }

    /// `generators <rank> <degree> <genus>` followed by one
    /// `gen <label> re im re im ...` line per matrix (row-major).
    pub fn to_text(&self) -> String {
        let mut s = format!("generators {} {} {}\n", self.rank, self.degree, self.pairs.len());
        for (i, (a, b)) in self.pairs.iter().enumerate() {
            for (label, m) in [(format!("a{}", i + 1), a), (format!("b{}", i + 1), b)] {
                let _ = write!(s, "gen {label}");
                for r in 0..self.rank {
                    for c in 0..self.rank {
                        let _ = write!(s, " {:e} {:e}", m[(r, c)].re, m[(r, c)].im);
                    }
                }
                s.push('\n');
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let perr = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_string() };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let (hl, header) = lines.next().ok_or_else(|| perr(1, "empty generator file"))?;
        let tok: Vec<&str> = header.split_whitespace().collect();
        if tok.len() != 4 || tok[0] != "generators" {
            return Err(perr(hl + 1, "expected `generators rank degree genus`"));
        }
        let rank: usize = tok[1].parse().map_err(|_| perr(hl + 1, "malformed rank"))?;
        let degree: i64 = tok[2].parse().map_err(|_| perr(hl + 1, "malformed degree"))?;
        let genus: usize = tok[3].parse().map_err(|_| perr(hl + 1, "malformed genus"))?;
        let mut mats: HashMap<String, Mat> = HashMap::new();
        for (ln, l) in lines {
            let tok: Vec<&str> = l.split_whitespace().collect();
            if tok.first() != Some(&"gen") || tok.len() != 2 + 2 * rank * rank {
                return Err(perr(ln + 1, "expected `gen label` and rank² complex entries"));
            }
            let vals = tok[2..]
                .iter()
                .map(|t| t.parse::<f64>().map_err(|_| perr(ln + 1, "malformed matrix entry")))
                .collect::<Result<Vec<_>>>()?;
            let m = DMatrix::from_fn(rank, rank, |r, c| {
                let k = 2 * (r * rank + c);
                C64::new(vals[k], vals[k + 1])
            });
            mats.insert(tok[1].to_string(), m);
        }
        let mut pairs = Vec::with_capacity(genus);
        for i in 1..=genus {
            let a = mats.remove(&format!("a{i}"));
            let b = mats.remove(&format!("b{i}"));
            match (a, b) {
                (Some(a), Some(b)) => pairs.push((a, b)),
                _ => return Err(Error::InvalidCocycle(format!("generators a{i}/b{i} missing"))),
            }
        }
        Ok(GeneratorSet { rank, degree, pairs })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

fn side_matrix(labels: &HashMap<String, Mat>, label: &str) -> Result<Mat> {
    let m = labels.get(label).ok_or_else(|| Error::InvalidCocycle(format!("no generator for label {label}")))?;
    Ok(if label.starts_with('a') { m.clone() } else { m.adjoint() })
}

/// Edge transports `T_h : E_origin(h) → E_dest(h)`, one stored per undirected
/// edge, in a gauge where a vertex spanning tree carries the identity. Faces
/// are flat except `marked_face`, whose holonomy is the central phase.
#[derive(Clone, Debug)]
pub struct UnitaryCocycle {
    rank: usize,
    degree: i64,
    edge_rep: Vec<usize>,
    edge_of: Vec<usize>,
    transport: Vec<Mat>,
    marked_face: usize,
}

impl UnitaryCocycle {
    pub fn trivial(mesh: &HalfEdgeMesh, rank: usize) -> Self {
        let (edge_rep, edge_of) = mesh.edge_index();
        let transport = vec![identity(rank); edge_rep.len()];
        UnitaryCocycle { rank, degree: 0, edge_rep, edge_of, transport, marked_face: 0 }
    }

    /// Build the cocycle from generator matrices attached to the labeled
    /// polygon sides of `mesh`.
    pub fn from_generators(mesh: &HalfEdgeMesh, gens: &GeneratorSet, marked_face: usize) -> Result<Self> {
        gens.validate()?;
        if gens.pairs.len() != mesh.genus() {
            return Err(Error::InvalidCocycle(format!(
                "{} generator pairs for a genus {} surface",
                gens.pairs.len(),
                mesh.genus()
            )));
        }
        if marked_face >= mesh.num_faces() {
            return Err(Error::InvalidCocycle(format!("marked face {marked_face} out of range")));
        }
        let n = gens.rank;
        let labels = gens.by_label();
        // Crossing matrices from face(h) into face(twin h). Around the glued
        // corner the crossings multiply to Π [a_i, b_i] when an `a` side is
        // entered through its inverse and a `b` side directly.
        let mut crossing = Vec::with_capacity(mesh.num_half_edges());
        for h in 0..mesh.num_half_edges() {
            let t = mesh.half_edge(h).twin;
            let m = match (mesh.label(h), mesh.label(t)) {
                (Some(l), None) => side_matrix(&labels, l)?.adjoint(),
                (None, Some(l)) => side_matrix(&labels, l)?,
                (None, None) => identity(n),
                (Some(_), Some(_)) => return Err(Error::InvalidCocycle(format!("both halves of edge {h} are labeled"))),
            };
            crossing.push(m);
        }
        // G[h]: vertex frame of origin(h) into the frame of face(h)
        let mut frame: Vec<Mat> = vec![identity(n); mesh.num_half_edges()];
        for star in mesh.vertex_stars() {
            for w in 1..star.len() {
                let prev = star[w - 1];
                let crossed = mesh.prev(prev);
                frame[star[w]] = &crossing[crossed] * &frame[prev];
            }
        }
        let (edge_rep, edge_of) = mesh.edge_index();
        let transport: Vec<Mat> = edge_rep
            .iter()
            .map(|&h| {
                let n1 = mesh.half_edge(h).next;
                frame[n1].adjoint() * &frame[h]
            })
            .collect();
        let mut cocycle = UnitaryCocycle { rank: n, degree: gens.degree, edge_rep, edge_of, transport, marked_face };
        cocycle.route_phases(mesh)?;
        cocycle.tree_gauge(mesh);
        let hol = cocycle.face_holonomy(mesh, marked_face);
        let expected = identity(n) * gens.central_phase();
        let residual = (hol - expected).norm();
        if residual > HOLONOMY_TOL {
            return Err(Error::RelationMismatch { residual, tol: HOLONOMY_TOL });
        }
        Ok(cocycle)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }
    pub fn degree(&self) -> i64 {
        self.degree
    }
    pub fn marked_face(&self) -> usize {
        self.marked_face
    }

    /// `T_h : E_origin(h) → E_dest(h)`.
    pub fn transport(&self, h: usize) -> Mat {
        let e = self.edge_of[h];
        if self.edge_rep[e] == h {
            self.transport[e].clone()
        } else {
            self.transport[e].adjoint()
        }
    }

    fn scale_transport(&mut self, h: usize, phase: C64) {
        let e = self.edge_of[h];
        let p = if self.edge_rep[e] == h { phase } else { phase.conj() };
        self.transport[e] *= p;
    }

    /// Transport once around face `f`, based at its first corner.
    pub fn face_holonomy(&self, mesh: &HalfEdgeMesh, f: usize) -> Mat {
        let [h0, h1, h2] = mesh.face_half_edges(f);
        self.transport(h2) * self.transport(h1) * self.transport(h0)
    }

    /// Transports from each corner's fiber to the fiber at the face's
    /// lowest-index vertex, following the face boundary.
    pub fn face_frames(&self, mesh: &HalfEdgeMesh, f: usize) -> [Mat; 3] {
        let hs = mesh.face_half_edges(f);
        let vs = mesh.face_vertices(f);
        let base = (0..3).min_by_key(|&k| vs[k]).unwrap_or(0);
        std::array::from_fn(|k| {
            let mut g = identity(self.rank);
            let mut j = k;
            while j != base {
                g = self.transport(hs[j]) * g;
                j = (j + 1) % 3;
            }
            g
        })
    }

    fn central_value(&self, m: &Mat) -> Result<C64> {
        let lambda = m.trace() / self.rank as f64;
        let residual = (m - identity(self.rank) * lambda).norm();
        if residual > HOLONOMY_TOL || (lambda.norm() - 1.0).abs() > HOLONOMY_TOL {
            return Err(Error::InvalidCocycle(format!("face holonomy is not a central phase (residual {residual:e})")));
        }
        Ok(lambda)
    }

    /// Push every central face holonomy into the marked face along a dual
    /// spanning tree, leaves first.
    fn route_phases(&mut self, mesh: &HalfEdgeMesh) -> Result<()> {
        let nf = mesh.num_faces();
        let mut parent_he = vec![usize::MAX; nf];
        let mut order = Vec::with_capacity(nf);
        let mut seen = vec![false; nf];
        let mut queue = VecDeque::from([self.marked_face]);
        seen[self.marked_face] = true;
        while let Some(f) = queue.pop_front() {
            order.push(f);
            for h in mesh.face_half_edges(f) {
                let t = mesh.half_edge(h).twin;
                let g = mesh.half_edge(t).face;
                if !seen[g] {
                    seen[g] = true;
                    parent_he[g] = t;
                    queue.push_back(g);
                }
            }
        }
        let mut phase: Vec<C64> = (0..nf)
            .map(|f| self.central_value(&self.face_holonomy(mesh, f)))
            .collect::<Result<_>>()?;
        for &f in order.iter().rev() {
            if f == self.marked_face {
                continue;
            }
            let h = parent_he[f];
            let fix = phase[f].conj();
            self.scale_transport(h, fix);
            phase[f] *= fix;
            let p = mesh.half_edge(mesh.half_edge(h).twin).face;
            phase[p] *= fix.conj();
        }
        Ok(())
    }

    /// Gauge transform so that a BFS spanning tree of vertices carries `I`.
    fn tree_gauge(&mut self, mesh: &HalfEdgeMesh) {
        let nv = mesh.num_vertices();
        let mut gauge: Vec<Option<Mat>> = vec![None; nv];
        gauge[0] = Some(identity(self.rank));
        let stars = mesh.vertex_stars();
        let mut queue = VecDeque::from([0usize]);
        while let Some(a) = queue.pop_front() {
            for &h in &stars[a] {
                let b = mesh.dest(h);
                if gauge[b].is_none() {
                    let ga = gauge[a].clone().unwrap_or_else(|| identity(self.rank));
                    gauge[b] = Some(self.transport(h) * ga);
                    queue.push_back(b);
                }
            }
        }
        for e in 0..self.transport.len() {
            let h = self.edge_rep[e];
            let ga = gauge[mesh.half_edge(h).origin].as_ref().expect("connected mesh");
            let gb = gauge[mesh.dest(h)].as_ref().expect("connected mesh");
            self.transport[e] = gb.adjoint() * &self.transport[e] * ga;
        }
    }

    /// Dimension of the space of matrices commuting with every transport.
    /// In tree gauge this is the commutant of the holonomy group.
    pub fn commutant_dim(&self) -> usize {
        let n = self.rank;
        let n2 = n * n;
        let mut gram = DMatrix::<C64>::zeros(n2, n2);
        for t in &self.transport {
            // vec(TX − XT), row-major vec
            let op = t.kronecker(&identity(n)) - identity(n).kronecker(&t.transpose());
            gram += op.adjoint() * op;
        }
        let eig = nalgebra::SymmetricEigen::new(gram);
        eig.eigenvalues.iter().filter(|&&l| l.abs() < 1e-8).count()
    }

    pub fn is_irreducible(&self) -> bool {
        self.commutant_dim() == 1
    }

    /// Maximum deviation from unitarity over all stored transports.
    pub fn unitarity_residual(&self) -> f64 {
        self.transport.iter().map(unitarity_residual).fold(0.0, f64::max)
    }

    /// Maximum deviation from flatness over unmarked faces.
    pub fn flatness_residual(&self, mesh: &HalfEdgeMesh) -> f64 {
        (0..mesh.num_faces())
            .filter(|&f| f != self.marked_face)
            .map(|f| (self.face_holonomy(mesh, f) - identity(self.rank)).norm())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{build_polygon_gluing, refine_n};

    fn mesh() -> HalfEdgeMesh {
        refine_n(&build_polygon_gluing(2).unwrap(), 1).unwrap()
    }

    #[test]
    fn presets_satisfy_relation() {
        GeneratorSet::rank_two_degree_one(2).validate().unwrap();
        GeneratorSet::random_degree_zero(2, 3, 5).validate().unwrap();
        GeneratorSet::clock_shift(2, 3).validate().unwrap();
        GeneratorSet::trivial(3, 1).validate().unwrap();
    }

    #[test]
    fn wrong_relation_is_rejected() {
        let mut g = GeneratorSet::rank_two_degree_one(2);
        g.degree = 0;
        assert!(matches!(g.validate(), Err(Error::RelationMismatch { .. })));
    }

    #[test]
    fn non_unitary_is_rejected() {
        let mut g = GeneratorSet::trivial(2, 2);
        g.pairs[0].0[(0, 0)] = C64::new(1.5, 0.0);
        assert!(matches!(g.validate(), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn rank_two_degree_one_is_irreducible_and_flat() {
        let m = mesh();
        let c = UnitaryCocycle::from_generators(&m, &GeneratorSet::rank_two_degree_one(2), 0).unwrap();
        assert!(c.is_irreducible());
        assert!(c.unitarity_residual() < 1e-12);
        assert!(c.flatness_residual(&m) < 1e-10);
        let hol = c.face_holonomy(&m, 0);
        assert!((hol + identity(2)).norm() < 1e-10);
    }

    #[test]
    fn clock_shift_orientation() {
        let m = mesh();
        let c = UnitaryCocycle::from_generators(&m, &GeneratorSet::clock_shift(2, 3), 5).unwrap();
        let w = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        assert!((c.face_holonomy(&m, 5) - identity(3) * w).norm() < 1e-10);
    }

    #[test]
    fn trivial_commutant_is_full() {
        let m = mesh();
        let c = UnitaryCocycle::from_generators(&m, &GeneratorSet::trivial(2, 2), 0).unwrap();
        assert_eq!(c.commutant_dim(), 4);
    }

    #[test]
    fn generator_text_round_trip() {
        let g = GeneratorSet::random_degree_zero(2, 2, 11);
        let back = GeneratorSet::from_text(&g.to_text()).unwrap();
        assert_eq!(g.rank, back.rank);
        for (p, q) in g.pairs.iter().zip(&back.pairs) {
            assert!((&p.0 - &q.0).norm() < 1e-15 && (&p.1 - &q.1).norm() < 1e-15);
        }
    }
}
