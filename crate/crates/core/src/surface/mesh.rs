//! Half-edge combinatorics for closed oriented triangulated surfaces.

use std::collections::HashMap;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HalfEdge {
    pub origin: usize,
    pub twin: usize,
    pub next: usize,
    pub face: usize,
}

/// A closed, connected, oriented triangle mesh stored as half-edges.
///
/// Generator edges of the polygon gluing carry labels (`a1`, `b1`, ...);
/// the label sits on the half-edge whose crossing from its own face into the
/// twin face applies the generator. Meshes produced by [`build_polygon_gluing`]
/// also carry the Klein-model position of each half-edge's origin corner,
/// which the hyperbolic density policy reads. Geodesics are chords in that
/// model, so midpoint refinement keeps the corners on geodesic edges.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfEdgeMesh {
    num_vertices: usize,
    num_faces: usize,
    genus: usize,
    half_edges: Vec<HalfEdge>,
    labels: Vec<Option<String>>,
    corner_disk: Option<Vec<C64>>,
    face_start: Vec<usize>,
}

impl HalfEdgeMesh {
    /// Assemble and validate a mesh from raw records.
    pub fn from_parts(
        num_vertices: usize,
        num_faces: usize,
        genus: usize,
        half_edges: Vec<HalfEdge>,
        labels: Vec<Option<String>>,
        corner_disk: Option<Vec<C64>>,
    ) -> Result<Self> {
        if labels.len() != half_edges.len() {
            return Err(Error::InvalidMesh("label count differs from half-edge count".into()));
        }
        if let Some(cd) = &corner_disk {
            if cd.len() != half_edges.len() {
                return Err(Error::InvalidMesh("corner position count differs from half-edge count".into()));
            }
        }
        let mut mesh = HalfEdgeMesh {
            num_vertices,
            num_faces,
            genus,
            half_edges,
            labels,
            corner_disk,
            face_start: Vec::new(),
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Build a mesh from oriented vertex triples. Edges are matched by vertex
    /// pairs, so the input must be free of multi-edges.
    pub fn from_triangles(num_vertices: usize, triangles: &[[usize; 3]]) -> Result<Self> {
        let mut half_edges = Vec::with_capacity(3 * triangles.len());
        let mut by_pair: HashMap<(usize, usize), usize> = HashMap::new();
        for (f, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let id = 3 * f + k;
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                if by_pair.insert((a, b), id).is_some() {
                    return Err(Error::InvalidMesh(format!(
                        "directed edge {a}->{b} appears twice (non-manifold or inconsistent orientation)"
                    )));
                }
                half_edges.push(HalfEdge { origin: a, twin: usize::MAX, next: 3 * f + (k + 1) % 3, face: f });
            }
        }
        for f in 0..triangles.len() {
            for k in 0..3 {
                let id = 3 * f + k;
                let (a, b) = (triangles[f][k], triangles[f][(k + 1) % 3]);
                let twin = *by_pair
                    .get(&(b, a))
                    .ok_or_else(|| Error::InvalidMesh(format!("edge {a}->{b} has no twin (boundary)")))?;
                half_edges[id].twin = twin;
            }
        }
        let h = half_edges.len();
        let chi = num_vertices as i64 - (h / 2) as i64 + triangles.len() as i64;
        if chi > 2 || (2 - chi) % 2 != 0 {
            return Err(Error::InvalidMesh(format!("Euler characteristic {chi} is not that of a closed orientable surface")));
        }
        let genus = ((2 - chi) / 2) as usize;
        Self::from_parts(num_vertices, triangles.len(), genus, half_edges, vec![None; h], None)
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }
    pub fn num_faces(&self) -> usize {
        self.num_faces
    }
    pub fn num_edges(&self) -> usize {
        self.half_edges.len() / 2
    }
    pub fn num_half_edges(&self) -> usize {
        self.half_edges.len()
    }
    pub fn genus(&self) -> usize {
        self.genus
    }
    pub fn half_edge(&self, h: usize) -> &HalfEdge {
        &self.half_edges[h]
    }
    pub fn half_edges(&self) -> &[HalfEdge] {
        &self.half_edges
    }
    pub fn label(&self, h: usize) -> Option<&str> {
        self.labels[h].as_deref()
    }
    pub fn corner_disk(&self) -> Option<&[C64]> {
        self.corner_disk.as_deref()
    }
    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices as i64 - self.num_edges() as i64 + self.num_faces as i64
    }
    pub fn prev(&self, h: usize) -> usize {
        let n = self.half_edges[h].next;
        self.half_edges[n].next
    }
    pub fn dest(&self, h: usize) -> usize {
        self.half_edges[self.half_edges[h].next].origin
    }

    /// The three half-edges of `f` in `next` order, starting from the lowest id.
    pub fn face_half_edges(&self, f: usize) -> [usize; 3] {
        let h0 = self.face_start[f];
        let h1 = self.half_edges[h0].next;
        [h0, h1, self.half_edges[h1].next]
    }

    /// Corner vertices of `f`, ordered like [`Self::face_half_edges`].
    pub fn face_vertices(&self, f: usize) -> [usize; 3] {
        self.face_half_edges(f).map(|h| self.half_edges[h].origin)
    }

    /// Next outgoing half-edge counter-clockwise around `origin(h)`.
    pub fn rotate(&self, h: usize) -> usize {
        self.half_edges[self.prev(h)].twin
    }

    /// Outgoing half-edges of every vertex, listed in rotation order starting
    /// from the lowest-id outgoing half-edge.
    pub fn vertex_stars(&self) -> Vec<Vec<usize>> {
        let mut first = vec![usize::MAX; self.num_vertices];
        for (h, he) in self.half_edges.iter().enumerate() {
            if first[he.origin] == usize::MAX {
                first[he.origin] = h;
            }
        }
        first
            .into_iter()
            .map(|start| {
                let mut star = vec![start];
                let mut h = self.rotate(start);
                while h != start {
                    star.push(h);
                    h = self.rotate(h);
                }
                star
            })
            .collect()
    }

    /// Canonical representative (smaller id) of each undirected edge, with the
    /// edge index of every half-edge.
    pub fn edge_index(&self) -> (Vec<usize>, Vec<usize>) {
        let mut reps = Vec::with_capacity(self.num_edges());
        let mut index = vec![usize::MAX; self.half_edges.len()];
        for h in 0..self.half_edges.len() {
            let t = self.half_edges[h].twin;
            if h < t {
                index[h] = reps.len();
                index[t] = reps.len();
                reps.push(h);
            }
        }
        (reps, index)
    }

    pub fn faces_have_distinct_vertices(&self) -> bool {
        (0..self.num_faces).all(|f| {
            let [a, b, c] = self.face_vertices(f);
            a != b && b != c && a != c
        })
    }

    /// Check every structural invariant; also rebuilds the face lookup table.
    pub fn validate(&mut self) -> Result<()> {
        let h_count = self.half_edges.len();
        let bad = |m: String| Err(Error::InvalidMesh(m));
        if h_count == 0 || h_count % 2 != 0 {
            return bad(format!("half-edge count {h_count} must be positive and even"));
        }
        if h_count != 3 * self.num_faces {
            return bad(format!("{h_count} half-edges cannot triangulate {} faces", self.num_faces));
        }
        for (h, he) in self.half_edges.iter().enumerate() {
            if he.origin >= self.num_vertices || he.twin >= h_count || he.next >= h_count || he.face >= self.num_faces {
                return bad(format!("half-edge {h} references an out-of-range index"));
            }
            if he.twin == h {
                return bad(format!("half-edge {h} is its own twin"));
            }
            if self.half_edges[he.twin].twin != h {
                return bad(format!("twin of twin of half-edge {h} is not {h} (non-manifold edge)"));
            }
        }
        let mut face_start = vec![usize::MAX; self.num_faces];
        let mut face_count = vec![0usize; self.num_faces];
        for (h, he) in self.half_edges.iter().enumerate() {
            let n1 = he.next;
            let n2 = self.half_edges[n1].next;
            if self.half_edges[n2].next != h {
                return bad(format!("next-cycle at half-edge {h} does not have length 3"));
            }
            if self.half_edges[n1].face != he.face || self.half_edges[n2].face != he.face {
                return bad(format!("next-cycle at half-edge {h} leaves face {}", he.face));
            }
            face_count[he.face] += 1;
            if h < face_start[he.face] {
                face_start[he.face] = h;
            }
            let twin_origin = self.half_edges[he.twin].origin;
            if twin_origin != self.half_edges[n1].origin {
                return bad(format!("half-edge {h} and its twin are not oppositely oriented"));
            }
        }
        if let Some(f) = face_count.iter().position(|&c| c != 3) {
            return bad(format!("face {f} has {} half-edges", face_count[f]));
        }
        self.face_start = face_start;

        // vertex manifoldness: one rotation cycle per vertex covering all outgoing half-edges
        let mut outgoing = vec![0usize; self.num_vertices];
        for he in &self.half_edges {
            outgoing[he.origin] += 1;
        }
        if let Some(v) = outgoing.iter().position(|&c| c == 0) {
            return bad(format!("vertex {v} is isolated"));
        }
        for (v, star) in self.vertex_stars().iter().enumerate() {
            if star.len() != outgoing[v] {
                return bad(format!("vertex {v} is non-manifold (star splits into several fans)"));
            }
        }

        // connectivity over faces
        let mut seen = vec![false; self.num_faces];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut reached = 1;
        while let Some(f) = stack.pop() {
            for h in self.face_half_edges(f) {
                let g = self.half_edges[self.half_edges[h].twin].face;
                if !seen[g] {
                    seen[g] = true;
                    reached += 1;
                    stack.push(g);
                }
            }
        }
        if reached != self.num_faces {
            return bad("mesh is not connected".into());
        }

        let chi = self.euler_characteristic();
        if chi != 2 - 2 * self.genus as i64 {
            return bad(format!("Euler characteristic {chi} does not match genus {}", self.genus));
        }
        Ok(())
    }
}

/// The standard 4g-gon `a1 b1 a1⁻¹ b1⁻¹ … ag bg ag⁻¹ bg⁻¹`, fan-triangulated
/// from a center vertex.
///
/// Vertex 0 is the center, vertex 1 the single glued polygon corner. Face `k`
/// has corners (center, corner k, corner k+1); its half-edges are `3k`
/// (spoke out), `3k+1` (polygon side `k`), `3k+2` (spoke back).
pub fn build_polygon_gluing(genus: usize) -> Result<HalfEdgeMesh> {
    if genus < 2 {
        return Err(Error::UnsupportedGenus(genus));
    }
    let sides = 4 * genus;
    let mut half_edges = Vec::with_capacity(3 * sides);
    let mut labels = vec![None; 3 * sides];
    for k in 0..sides {
        let side_twin = match k % 4 {
            0 | 1 => k + 2,
            _ => k - 2,
        };
        half_edges.push(HalfEdge { origin: 0, twin: 3 * ((k + sides - 1) % sides) + 2, next: 3 * k + 1, face: k });
        half_edges.push(HalfEdge { origin: 1, twin: 3 * side_twin + 1, next: 3 * k + 2, face: k });
        half_edges.push(HalfEdge { origin: 1, twin: 3 * ((k + 1) % sides), next: 3 * k, face: k });
        let i = k / 4 + 1;
        match k % 4 {
            0 => labels[3 * k + 1] = Some(format!("a{i}")),
            1 => labels[3 * k + 1] = Some(format!("b{i}")),
            _ => {}
        }
    }
    // Regular hyperbolic 4g-gon with interior angles 2π/4g in the Poincaré disk:
    // cosh R = cot²(π/4g), Euclidean radius tanh(R/2).
    let cot = 1.0 / (std::f64::consts::PI / sides as f64).tan();
    let poincare = ((cot * cot).acosh() / 2.0).tanh();
    let radius = 2.0 * poincare / (1.0 + poincare * poincare);
    let corner = |k: usize| C64::from_polar(radius, 2.0 * std::f64::consts::PI * (k % sides) as f64 / sides as f64);
    let mut corner_disk = Vec::with_capacity(3 * sides);
    for k in 0..sides {
        corner_disk.push(C64::new(0.0, 0.0));
        corner_disk.push(corner(k));
        corner_disk.push(corner(k + 1));
    }
    HalfEdgeMesh::from_parts(2, sides, genus, half_edges, labels, Some(corner_disk))
}

/// 1→4 midpoint subdivision. Child half-edges of a labeled edge keep its label.
pub fn refine(mesh: &HalfEdgeMesh) -> Result<HalfEdgeMesh> {
    let (_, edge_of) = mesh.edge_index();
    let v0 = mesh.num_vertices();
    let nf = mesh.num_faces();
    let mut half_edges = vec![HalfEdge { origin: 0, twin: 0, next: 0, face: 0 }; 12 * nf];
    let mut labels = vec![None; 12 * nf];
    let mut corner_disk = mesh.corner_disk().map(|_| vec![C64::new(0.0, 0.0); 12 * nf]);
    // first/second half of every coarse half-edge
    let mut first = vec![0usize; mesh.num_half_edges()];
    let mut second = vec![0usize; mesh.num_half_edges()];

    for f in 0..nf {
        let hs = mesh.face_half_edges(f);
        let vs = mesh.face_vertices(f);
        let m = hs.map(|h| v0 + edge_of[h]);
        // child faces: (v0,m0,m2) (m0,v1,m1) (m2,m1,v2) (m0,m1,m2)
        let tris = [[vs[0], m[0], m[2]], [m[0], vs[1], m[1]], [m[2], m[1], vs[2]], [m[0], m[1], m[2]]];
        for (c, tri) in tris.iter().enumerate() {
            let nfid = 4 * f + c;
            for k in 0..3 {
                half_edges[3 * nfid + k] = HalfEdge { origin: tri[k], twin: usize::MAX, next: 3 * nfid + (k + 1) % 3, face: nfid };
            }
        }
        let id = |c: usize, k: usize| 3 * (4 * f + c) + k;
        first[hs[0]] = id(0, 0);
        second[hs[0]] = id(1, 0);
        first[hs[1]] = id(1, 1);
        second[hs[1]] = id(2, 1);
        first[hs[2]] = id(2, 2);
        second[hs[2]] = id(0, 2);
        for (a, b) in [(id(0, 1), id(3, 2)), (id(1, 2), id(3, 0)), (id(2, 0), id(3, 1))] {
            half_edges[a].twin = b;
            half_edges[b].twin = a;
        }
        for &h in &hs {
            if let Some(l) = mesh.label(h) {
                labels[first[h]] = Some(l.to_string());
                labels[second[h]] = Some(l.to_string());
            }
        }
        if let (Some(cd), Some(src)) = (corner_disk.as_mut(), mesh.corner_disk()) {
            let p = hs.map(|h| src[h]);
            let mid = [(p[0] + p[1]) * 0.5, (p[1] + p[2]) * 0.5, (p[2] + p[0]) * 0.5];
            let pos = [[p[0], mid[0], mid[2]], [mid[0], p[1], mid[1]], [mid[2], mid[1], p[2]], [mid[0], mid[1], mid[2]]];
            for c in 0..4 {
                for k in 0..3 {
                    cd[id(c, k)] = pos[c][k];
                }
            }
        }
    }
    for h in 0..mesh.num_half_edges() {
        let t = mesh.half_edge(h).twin;
        half_edges[first[h]].twin = second[t];
        half_edges[second[h]].twin = first[t];
    }
    HalfEdgeMesh::from_parts(v0 + mesh.num_edges(), 4 * nf, mesh.genus(), half_edges, labels, corner_disk)
}

/// Apply [`refine`] `levels` times.
pub fn refine_n(mesh: &HalfEdgeMesh, levels: usize) -> Result<HalfEdgeMesh> {
    let mut m = mesh.clone();
    for _ in 0..levels {
        m = refine(&m)?;
    }
    Ok(m)
}
