//! Closed triangulated surfaces: half-edge combinatorics, polygon gluing,
//! refinement, conformal charts and file IO.

pub mod conformal;
pub mod io;
pub mod mesh;

pub use conformal::{equilateral_chart, equip_conformal, ConformalSurface, DensityPolicy};
pub use io::{load_conformal, load_mesh, read_conformal, read_mesh, save_conformal, save_mesh, write_conformal, write_mesh};
pub use mesh::{build_polygon_gluing, refine, refine_n, HalfEdge, HalfEdgeMesh};

/// Polygon gluing for `genus`, refined `levels` times, with equilateral charts.
pub fn standard_surface(genus: usize, levels: usize, density: DensityPolicy) -> crate::Result<ConformalSurface> {
    let mesh = refine_n(&build_polygon_gluing(genus)?, levels)?;
    equip_conformal(mesh, density)
}
