//! Per-face complex charts, transition rotations and density.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::mesh::HalfEdgeMesh;
use crate::error::{Error, Result};

/// Tolerance for chart compatibility across shared edges.
pub const CHART_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DensityPolicy {
    /// ρ ≡ 1 in every chart.
    #[default]
    Uniform,
    /// Poincaré-disk density at the face centroid, pulled back to the chart
    /// by the area ratio of the disk triangle to the chart triangle. Corner
    /// positions come from the mesh in Klein coordinates.
    Hyperbolic,
}

#[derive(Clone, Debug)]
pub struct ConformalSurface {
    mesh: HalfEdgeMesh,
    charts: Vec<[C64; 3]>,
    density: Vec<f64>,
    area: Vec<f64>,
    rotation: Vec<C64>,
    corner: Vec<usize>,
    dbar: Vec<[C64; 3]>,
    vertex_weight: Vec<f64>,
    vertex_area: Vec<f64>,
}

/// Corners of the unit equilateral chart.
pub fn equilateral_chart() -> [C64; 3] {
    [C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::from_polar(1.0, std::f64::consts::FRAC_PI_3)]
}

/// Equip every face with the unit equilateral chart.
pub fn equip_conformal(mesh: HalfEdgeMesh, density: DensityPolicy) -> Result<ConformalSurface> {
    if !mesh.faces_have_distinct_vertices() {
        return Err(Error::Precondition(
            "conformal structure needs three distinct vertices per face; refine the mesh first".into(),
        ));
    }
    let nf = mesh.num_faces();
    let chart = equilateral_chart();
    let chart_area = 3f64.sqrt() / 4.0;
    let rho = match density {
        DensityPolicy::Uniform => vec![1.0; nf],
        DensityPolicy::Hyperbolic => {
            let cd = mesh.corner_disk().ok_or_else(|| {
                Error::Precondition("hyperbolic density needs disk corner positions on the mesh".into())
            })?;
            (0..nf)
                .map(|f| {
                    let w = mesh.face_half_edges(f).map(|h| klein_to_poincare(cd[h]));
                    let c = (w[0] + w[1] + w[2]) / 3.0;
                    let s = 1.0 - c.norm_sqr();
                    let disk_area = triangle_area(&w);
                    4.0 / (s * s) * disk_area / chart_area
                })
                .collect()
        }
    };
    ConformalSurface::from_charts(mesh, vec![chart; nf], rho)
}

fn klein_to_poincare(k: C64) -> C64 {
    k / (1.0 + (1.0 - k.norm_sqr()).max(0.0).sqrt())
}

fn triangle_area(z: &[C64; 3]) -> f64 {
    let e1 = z[1] - z[0];
    let e2 = z[2] - z[0];
    0.5 * (e1.conj() * e2).im
}

impl ConformalSurface {
    /// Build from explicit charts (ordered like `mesh.face_half_edges`) and densities.
    pub fn from_charts(mesh: HalfEdgeMesh, charts: Vec<[C64; 3]>, density: Vec<f64>) -> Result<Self> {
        let nf = mesh.num_faces();
        if charts.len() != nf || density.len() != nf {
            return Err(Error::InvalidMesh("chart or density count differs from face count".into()));
        }
        if !mesh.faces_have_distinct_vertices() {
            return Err(Error::Precondition("faces must have three distinct vertices".into()));
        }
        let mut corner = vec![0usize; mesh.num_half_edges()];
        for f in 0..nf {
            for (k, h) in mesh.face_half_edges(f).into_iter().enumerate() {
                corner[h] = k;
            }
        }
        let mut area = Vec::with_capacity(nf);
        let mut dbar = Vec::with_capacity(nf);
        for (f, z) in charts.iter().enumerate() {
            let a = triangle_area(z);
            if !(a > 0.0) {
                return Err(Error::Chart { face: f, msg: format!("chart is degenerate or clockwise (area {a})") });
            }
            if !(density[f] > 0.0) || !density[f].is_finite() {
                return Err(Error::Chart { face: f, msg: format!("density {} is not positive", density[f]) });
            }
            area.push(a);
            let e1 = z[1] - z[0];
            let e2 = z[2] - z[0];
            let det = e1 * e2.conj() - e2 * e1.conj();
            let c1 = -e2 / det;
            let c2 = e1 / det;
            dbar.push([-(c1 + c2), c1, c2]);
        }
        let edge = |h: usize| {
            let f = mesh.half_edge(h).face;
            let k = corner[h];
            charts[f][(k + 1) % 3] - charts[f][k]
        };
        let mut rotation = Vec::with_capacity(mesh.num_half_edges());
        for h in 0..mesh.num_half_edges() {
            let ef = edge(h);
            let eg = edge(mesh.half_edge(h).twin);
            let r = -ef / eg;
            if (r.norm() - 1.0).abs() > CHART_TOL {
                return Err(Error::Chart {
                    face: mesh.half_edge(h).face,
                    msg: format!("edge {h} has length mismatch {} across its twin", r.norm()),
                });
            }
            rotation.push(r / r.norm());
        }
        let mut vertex_weight = vec![0.0; mesh.num_vertices()];
        let mut vertex_area = vec![0.0; mesh.num_vertices()];
        for f in 0..nf {
            for v in mesh.face_vertices(f) {
                vertex_weight[v] += density[f] * area[f] / 3.0;
                vertex_area[v] += area[f] / 3.0;
            }
        }
        Ok(ConformalSurface { mesh, charts, density, area, rotation, corner, dbar, vertex_weight, vertex_area })
    }

    pub fn mesh(&self) -> &HalfEdgeMesh {
        &self.mesh
    }
    pub fn num_faces(&self) -> usize {
        self.mesh.num_faces()
    }
    pub fn num_vertices(&self) -> usize {
        self.mesh.num_vertices()
    }
    pub fn chart(&self, f: usize) -> [C64; 3] {
        self.charts[f]
    }
    pub fn density(&self, f: usize) -> f64 {
        self.density[f]
    }
    pub fn densities(&self) -> &[f64] {
        &self.density
    }
    /// Euclidean chart area of face `f`.
    pub fn area(&self, f: usize) -> f64 {
        self.area[f]
    }
    /// Rotation taking the chart of `face(twin(h))` into the chart of `face(h)`.
    pub fn rotation(&self, h: usize) -> C64 {
        self.rotation[h]
    }
    /// Position of `h` (as origin corner) within its face.
    pub fn corner_index(&self, h: usize) -> usize {
        self.corner[h]
    }
    /// Coefficients `c_k` with `∂̄f = Σ c_k f_k` on the face; the `∂`
    /// coefficients are their conjugates.
    pub fn dbar_coefficients(&self, f: usize) -> [C64; 3] {
        self.dbar[f]
    }
    pub fn d_coefficients(&self, f: usize) -> [C64; 3] {
        self.dbar[f].map(|c| c.conj())
    }
    /// Lumped vertex mass `Σ ρ_f A_f / 3`.
    pub fn vertex_weight(&self, v: usize) -> f64 {
        self.vertex_weight[v]
    }
    pub fn vertex_weights(&self) -> &[f64] {
        &self.vertex_weight
    }
    /// Lumped chart area `Σ A_f / 3`.
    pub fn vertex_area(&self, v: usize) -> f64 {
        self.vertex_area[v]
    }
    /// `Σ ρ_f A_f`.
    pub fn total_area(&self) -> f64 {
        (0..self.num_faces()).map(|f| self.density[f] * self.area[f]).sum()
    }

    /// For every face corner, the rotation taking the chart of the vertex's
    /// reference face (face of its lowest-id outgoing half-edge) into the
    /// face's chart, found by walking the vertex star.
    pub fn vertex_chart_rotations(&self) -> Vec<[C64; 3]> {
        let mut out = vec![[C64::new(1.0, 0.0); 3]; self.num_faces()];
        for star in self.mesh.vertex_stars() {
            let mut rot = C64::new(1.0, 0.0);
            for (i, &h) in star.iter().enumerate() {
                if i > 0 {
                    rot = self.rotation[h] * rot;
                }
                out[self.mesh.half_edge(h).face][self.corner[h]] = rot;
            }
        }
        out
    }
}
