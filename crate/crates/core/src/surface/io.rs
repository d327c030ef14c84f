//! Plain-text mesh and conformal-data files.
//!
//! Mesh file:
//! ```text
//! surf <V> <E> <F> <genus>
//! he <id> <origin> <twin> <next> <face> [label]
//! cp <id> <re> <im>          (optional disk position of the origin corner)
//! ```
//! Conformal file:
//! ```text
//! chart <face> <z0re> <z0im> <z1re> <z1im> <z2re> <z2im>
//! rho <face> <value>
//! ```
//! Lines starting with `#` and blank lines are ignored.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64 as C64;

use super::conformal::ConformalSurface;
use super::mesh::{HalfEdge, HalfEdgeMesh};
use crate::error::{Error, Result};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| parse_err(line, format!("malformed {what}")))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn write_mesh(mesh: &HalfEdgeMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "surf {} {} {} {}", mesh.num_vertices(), mesh.num_edges(), mesh.num_faces(), mesh.genus());
    for (h, he) in mesh.half_edges().iter().enumerate() {
        let _ = write!(s, "he {h} {} {} {} {}", he.origin, he.twin, he.next, he.face);
        if let Some(l) = mesh.label(h) {
            let _ = write!(s, " {l}");
        }
        s.push('\n');
    }
    if let Some(cd) = mesh.corner_disk() {
        for (h, z) in cd.iter().enumerate() {
            let _ = writeln!(s, "cp {h} {:e} {:e}", z.re, z.im);
        }
    }
    s
}

pub fn read_mesh(text: &str) -> Result<HalfEdgeMesh> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty mesh file"))?;
    let mut tok = header.split_whitespace();
    if tok.next() != Some("surf") {
        return Err(parse_err(hline, "expected `surf V E F genus` header"));
    }
    let v: usize = num(tok.next(), hline, "vertex count")?;
    let e: usize = num(tok.next(), hline, "edge count")?;
    let f: usize = num(tok.next(), hline, "face count")?;
    let g: usize = num(tok.next(), hline, "genus")?;
    let nh = 2 * e;
    let mut hes: Vec<Option<HalfEdge>> = vec![None; nh];
    let mut labels = vec![None; nh];
    let mut cps: Vec<Option<C64>> = vec![None; nh];
    let mut any_cp = false;
    let mut last = hline;
    for (ln, l) in lines {
        last = ln;
        let mut tok = l.split_whitespace();
        match tok.next() {
            Some("he") => {
                let id: usize = num(tok.next(), ln, "half-edge id")?;
                if id >= nh {
                    return Err(parse_err(ln, format!("half-edge id {id} exceeds 2E = {nh}")));
                }
                if hes[id].is_some() {
                    return Err(parse_err(ln, format!("half-edge {id} defined twice")));
                }
                let origin = num(tok.next(), ln, "origin")?;
                let twin = num(tok.next(), ln, "twin")?;
                let next = num(tok.next(), ln, "next")?;
                let face = num(tok.next(), ln, "face")?;
                hes[id] = Some(HalfEdge { origin, twin, next, face });
                labels[id] = tok.next().map(str::to_string);
            }
            Some("cp") => {
                let id: usize = num(tok.next(), ln, "half-edge id")?;
                if id >= nh {
                    return Err(parse_err(ln, format!("corner id {id} exceeds 2E = {nh}")));
                }
                let re = num(tok.next(), ln, "real part")?;
                let im = num(tok.next(), ln, "imaginary part")?;
                cps[id] = Some(C64::new(re, im));
                any_cp = true;
            }
            Some(other) => return Err(parse_err(ln, format!("unknown record `{other}`"))),
            None => {}
        }
    }
    let half_edges = hes
        .into_iter()
        .enumerate()
        .map(|(i, h)| h.ok_or_else(|| parse_err(last + 1, format!("truncated file: half-edge {i} missing"))))
        .collect::<Result<Vec<_>>>()?;
    let corner_disk = if any_cp {
        Some(
            cps.into_iter()
                .enumerate()
                .map(|(i, c)| c.ok_or_else(|| parse_err(last + 1, format!("corner position {i} missing"))))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    HalfEdgeMesh::from_parts(v, f, g, half_edges, labels, corner_disk)
}

pub fn save_mesh(mesh: &HalfEdgeMesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_mesh(mesh))?;
    Ok(())
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<HalfEdgeMesh> {
    read_mesh(&std::fs::read_to_string(path)?)
}

pub fn write_conformal(surface: &ConformalSurface) -> String {
    let mut s = String::new();
    for f in 0..surface.mesh().num_faces() {
        let z = surface.chart(f);
        let _ = writeln!(
            s,
            "chart {f} {:e} {:e} {:e} {:e} {:e} {:e}",
            z[0].re, z[0].im, z[1].re, z[1].im, z[2].re, z[2].im
        );
    }
    for f in 0..surface.mesh().num_faces() {
        let _ = writeln!(s, "rho {f} {:e}", surface.density(f));
    }
    s
}

/// Parse conformal data for `mesh`; transition rotations are recomputed and
/// the charts checked for edge-length agreement.
pub fn read_conformal(mesh: HalfEdgeMesh, text: &str) -> Result<ConformalSurface> {
    let nf = mesh.num_faces();
    let mut charts: Vec<Option<[C64; 3]>> = vec![None; nf];
    let mut rho: Vec<Option<f64>> = vec![None; nf];
    let mut last = 0;
    for (ln, l) in content_lines(text) {
        last = ln;
        let mut tok = l.split_whitespace();
        let kind = tok.next().unwrap_or_default();
        let f: usize = num(tok.next(), ln, "face id")?;
        if f >= nf {
            return Err(parse_err(ln, format!("face {f} out of range")));
        }
        match kind {
            "chart" => {
                let mut z = [C64::new(0.0, 0.0); 3];
                for zk in &mut z {
                    let re = num(tok.next(), ln, "chart coordinate")?;
                    let im = num(tok.next(), ln, "chart coordinate")?;
                    *zk = C64::new(re, im);
                }
                charts[f] = Some(z);
            }
            "rho" => rho[f] = Some(num(tok.next(), ln, "density")?),
            other => return Err(parse_err(ln, format!("unknown record `{other}`"))),
        }
    }
    let charts = charts
        .into_iter()
        .enumerate()
        .map(|(f, c)| c.ok_or_else(|| parse_err(last + 1, format!("chart for face {f} missing"))))
        .collect::<Result<Vec<_>>>()?;
    let rho = rho
        .into_iter()
        .enumerate()
        .map(|(f, c)| c.ok_or_else(|| parse_err(last + 1, format!("density for face {f} missing"))))
        .collect::<Result<Vec<_>>>()?;
    ConformalSurface::from_charts(mesh, charts, rho)
}

pub fn save_conformal(surface: &ConformalSurface, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_conformal(surface))?;
    Ok(())
}

pub fn load_conformal(mesh: HalfEdgeMesh, path: impl AsRef<Path>) -> Result<ConformalSurface> {
    read_conformal(mesh, &std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::mesh::{build_polygon_gluing, refine};

    #[test]
    fn mesh_round_trip_is_identity() {
        let m = refine(&build_polygon_gluing(2).unwrap()).unwrap();
        let back = read_mesh(&write_mesh(&m)).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn truncated_file_reports_line() {
        let m = build_polygon_gluing(2).unwrap();
        let text = write_mesh(&m);
        let cut: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        match read_mesh(&cut) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 11),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_manifold_edge_is_rejected() {
        let m = build_polygon_gluing(2).unwrap();
        let text = write_mesh(&m).replace("he 1 1 7 2 0 a1", "he 1 1 4 2 0 a1");
        assert!(matches!(read_mesh(&text), Err(Error::InvalidMesh(_))));
    }
}
