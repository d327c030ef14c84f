//! Matrix-valued cochains: vertex sections, face forms and Beltrami fields.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calculus::FormType;
use crate::error::{Error, Result};
use crate::{Mat, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CochainKind {
    /// P1 section, one fiber value per vertex in the vertex frame.
    Vertex,
    /// Face-constant form in the face frame.
    Face(FormType),
    /// Face-constant Beltrami differential `μ dz̄ ⊗ ∂_z`.
    Beltrami,
}

/// `n × n` blocks stored row-major, one per site.
#[derive(Clone, Debug, PartialEq)]
pub struct BundleCochain {
    pub kind: CochainKind,
    pub n: usize,
    pub data: Vec<C64>,
}

impl BundleCochain {
    pub fn zeros(kind: CochainKind, n: usize, sites: usize) -> Self {
        BundleCochain { kind, n, data: vec![C64::new(0.0, 0.0); sites * n * n] }
    }

    pub fn from_sites(kind: CochainKind, n: usize, sites: &[Mat]) -> Self {
        let mut c = Self::zeros(kind, n, sites.len());
        for (i, m) in sites.iter().enumerate() {
            c.set_site(i, m);
        }
        c
    }

    /// Entries with real and imaginary parts uniform in `[-1, 1)`.
    pub fn random(kind: CochainKind, n: usize, sites: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = Self::zeros(kind, n, sites);
        for d in &mut c.data {
            *d = C64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0);
        }
        c
    }

    /// Rank-1 cochain from scalar values.
    pub fn from_scalars(kind: CochainKind, values: Vec<C64>) -> Self {
        BundleCochain { kind, n: 1, data: values }
    }

    pub fn block(&self) -> usize {
        self.n * self.n
    }

    pub fn sites(&self) -> usize {
        self.data.len() / self.block()
    }

    pub fn site(&self, i: usize) -> Mat {
        let b = self.block();
        DMatrix::from_row_slice(self.n, self.n, &self.data[i * b..(i + 1) * b])
    }

    pub fn site_slice(&self, i: usize) -> &[C64] {
        let b = self.block();
        &self.data[i * b..(i + 1) * b]
    }

    pub fn set_site(&mut self, i: usize, m: &Mat) {
        let n = self.n;
        for r in 0..n {
            for c in 0..n {
                self.data[i * n * n + r * n + c] = m[(r, c)];
            }
        }
    }

    pub fn add_to_site(&mut self, i: usize, m: &Mat) {
        let n = self.n;
        for r in 0..n {
            for c in 0..n {
                self.data[i * n * n + r * n + c] += m[(r, c)];
            }
        }
    }

    pub fn to_sites(&self) -> Vec<Mat> {
        (0..self.sites()).map(|i| self.site(i)).collect()
    }

    pub fn expect(&self, kind: CochainKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::TypeMismatch(format!("expected {kind:?}, got {:?}", self.kind)))
        }
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.kind != other.kind || self.n != other.n || self.data.len() != other.data.len() {
            return Err(Error::TypeMismatch(format!(
                "cochain shapes differ: {:?}/{} vs {:?}/{}",
                self.kind, self.n, other.kind, other.n
            )));
        }
        Ok(())
    }

    pub fn scaled(&self, s: C64) -> Self {
        BundleCochain { kind: self.kind, n: self.n, data: self.data.iter().map(|x| x * s).collect() }
    }

    /// `self + s · other`
    pub fn axpy(&self, s: C64, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        Ok(BundleCochain {
            kind: self.kind,
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + s * b).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.axpy(C64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(C64::new(-1.0, 0.0), other)
    }

    /// Site-wise conjugate transpose; (0,1) and (1,0) swap.
    pub fn adjoint(&self) -> Self {
        let kind = match self.kind {
            CochainKind::Face(FormType::ZeroOne) => CochainKind::Face(FormType::OneZero),
            CochainKind::Face(FormType::OneZero) => CochainKind::Face(FormType::ZeroOne),
            k => k,
        };
        let sites: Vec<Mat> = (0..self.sites()).map(|i| self.site(i).adjoint()).collect();
        Self::from_sites(kind, self.n, &sites)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn site_round_trip_is_row_major() {
        let m = DMatrix::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(3.0, 0.0), C64::new(4.0, 0.0)]);
        let c = BundleCochain::from_sites(CochainKind::Vertex, 2, &[m.clone()]);
        assert_eq!(c.data[1], C64::new(2.0, 0.0));
        assert_eq!(c.site(0), m);
    }

    #[test]
    fn adjoint_swaps_type() {
        let c = BundleCochain::zeros(CochainKind::Face(FormType::ZeroOne), 2, 3);
        assert_eq!(c.adjoint().kind, CochainKind::Face(FormType::OneZero));
    }
}
