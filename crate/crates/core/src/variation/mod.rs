//! First and second variation of the L² metric on the moduli of pairs, for
//! the universal and the fibered systems, and the certificates built from
//! them.

mod first;
mod projector;
mod terms;

use std::cell::RefCell;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bundle::{ad_on_scalar, ad_star, BundleCochain, CochainKind, SolveInfo};
use crate::calculus::FormType;
use crate::error::{Error, Result};
use crate::tangent::{CenterPoint, TangentVector};
use crate::C64;

pub use first::{first_variation, metric_g, FirstVariation};
pub use projector::{projector_derivative_check, PERTURBATION_SCALE, random_perturbation, ProjectorCheck, ProjectorSweep};
pub use terms::{
    difference_report, positivity_certificate, restricted_quadruple, second_variation_fibered,
    second_variation_universal, PositivityCertificate,
};

const ZERO_ONE: CochainKind = CochainKind::Face(FormType::ZeroOne);
const ONE_ZERO: CochainKind = CochainKind::Face(FormType::OneZero);

/// Conventions every number in a report depends on.
pub const CONVENTIONS: &str = "dz̄∧dz=2i dx∧dy; ★dz=-i dz; ★dz̄=i dz̄; \
(0,1) and (1,0) pairing 2A tr(ab*); vertex weight Σ ρA/3; Beltrami pairing ρA; \
ad*(ν,α)_f=-2ρ⁻¹[α,ν*] lumped by ρA/3; Δ₀=∂̄*∂̄ inverted off its kernel";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Universal,
    Fibered,
    Difference,
}

/// Where a term lives: in both systems, or only in one of them. In a
/// difference report, `Added` marks fibered-only terms (entered negated)
/// and `Removed` marks universal-only ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Shared,
    Universal,
    Fibered,
    Added,
    Removed,
}

impl Scope {
    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Shared => "shared",
            Scope::Universal => "universal",
            Scope::Fibered => "fibered",
            Scope::Added => "added",
            Scope::Removed => "removed",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for ComplexValue {
    fn from(z: C64) -> Self {
        ComplexValue { re: z.re, im: z.im }
    }
}

impl From<ComplexValue> for C64 {
    fn from(z: ComplexValue) -> Self {
        C64::new(z.re, z.im)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    pub re: f64,
    pub im: f64,
    pub scope: Scope,
}

impl Term {
    fn new(name: &str, value: C64, scope: Scope) -> Self {
        Term { name: name.to_string(), re: value.re, im: value.im, scope }
    }

    pub fn value(&self) -> C64 {
        C64::new(self.re, self.im)
    }
}

/// Aggregate of the `Δ₀⁻¹` applications behind a report.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub solves: usize,
    pub dense_solves: usize,
    pub max_iterations: usize,
    pub max_residual: f64,
}

impl SolverStats {
    fn record(&mut self, info: &SolveInfo) {
        self.solves += 1;
        self.dense_solves += info.dense as usize;
        self.max_iterations = self.max_iterations.max(info.iterations);
        self.max_residual = self.max_residual.max(info.residual);
    }

    pub fn merge(&mut self, other: &SolverStats) {
        self.solves += other.solves;
        self.dense_solves += other.dense_solves;
        self.max_iterations = self.max_iterations.max(other.max_iterations);
        self.max_residual = self.max_residual.max(other.max_residual);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationReport {
    pub system: System,
    pub terms: Vec<Term>,
    pub total: ComplexValue,
    pub inputs_digest: String,
    pub conventions_digest: String,
    pub solver_stats: SolverStats,
}

impl VariationReport {
    fn assemble(system: System, terms: Vec<Term>, inputs: &[TangentVector], stats: SolverStats) -> Self {
        let total: C64 = terms.iter().map(Term::value).sum();
        VariationReport {
            system,
            terms,
            total: total.into(),
            inputs_digest: inputs_digest(inputs),
            conventions_digest: conventions_digest(),
            solver_stats: stats,
        }
    }

    pub fn total(&self) -> C64 {
        self.total.into()
    }

    /// `|total − Σ terms|`
    pub fn sum_defect(&self) -> f64 {
        (self.total() - self.terms.iter().map(Term::value).sum::<C64>()).norm()
    }

    pub fn term(&self, name: &str) -> Option<&Term> {
        self.terms.iter().find(|t| t.name == name)
    }

    /// `name,re,im,scope` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("name,re,im,scope\n");
        for t in &self.terms {
            s.push_str(&format!("{},{:e},{:e},{}\n", t.name, t.re, t.im, t.scope.as_str()));
        }
        s
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn inputs_digest(inputs: &[TangentVector]) -> String {
    let mut h = Sha256::new();
    for v in inputs {
        h.update(v.to_text().as_bytes());
    }
    hex(&h.finalize())
}

pub fn conventions_digest() -> String {
    hex(&Sha256::digest(CONVENTIONS.as_bytes()))
}

/// `μ·ω`: (1,0) to (0,1).
pub(crate) fn mu_times(mu: &BundleCochain, omega: &BundleCochain) -> Result<BundleCochain> {
    omega.expect(ONE_ZERO)?;
    Ok(scale_sites(mu, omega, false, ZERO_ONE))
}

/// `μ̄·α`: (0,1) to (1,0).
pub(crate) fn mu_bar_times(mu: &BundleCochain, alpha: &BundleCochain) -> Result<BundleCochain> {
    alpha.expect(ZERO_ONE)?;
    Ok(scale_sites(mu, alpha, true, ONE_ZERO))
}

fn scale_sites(mu: &BundleCochain, x: &BundleCochain, conj: bool, kind: CochainKind) -> BundleCochain {
    let b = x.block();
    let data = x
        .data
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let m = mu.data[i / b];
            c * if conj { m.conj() } else { m }
        })
        .collect();
    BundleCochain { kind, n: x.n, data }
}

/// The operators the variation formulas are written in, with solver
/// bookkeeping.
pub(crate) struct Calculus<'a> {
    pub center: &'a CenterPoint,
    stats: RefCell<SolverStats>,
}

impl<'a> Calculus<'a> {
    pub fn new(center: &'a CenterPoint) -> Self {
        Calculus { center, stats: RefCell::new(SolverStats::default()) }
    }

    pub fn stats(&self) -> SolverStats {
        *self.stats.borrow()
    }

    pub fn pair(&self, x: &BundleCochain, y: &BundleCochain) -> Result<C64> {
        self.center.end.inner(x, y)
    }

    pub fn inv(&self, b: &BundleCochain) -> Result<BundleCochain> {
        let (x, info) = self.center.end.solve(b)?;
        self.stats.borrow_mut().record(&info);
        Ok(x)
    }

    /// `A x = −μ∂x + [ν, x]`
    pub fn a_op(&self, v: &TangentVector, x: &BundleCochain) -> Result<BundleCochain> {
        let end = &self.center.end;
        ad_on_scalar(end, &v.nu, x)?.sub(&mu_times(&v.mu, &end.d_hol(x)?)?)
    }

    /// `A* α = −∂*(μ̄α) + ad*(ν, α)`
    pub fn a_star(&self, v: &TangentVector, alpha: &BundleCochain) -> Result<BundleCochain> {
        let end = &self.center.end;
        ad_star(end, &v.nu, alpha)?.sub(&end.d_star(&mu_bar_times(&v.mu, alpha)?)?)
    }

    /// Source of the connection correction: `ad*(ν_j, ν_i) + ∂̄*(μ_i ν_j*) + ∂*(μ̄_j ν_i)`.
    pub fn source(&self, vi: &TangentVector, vj: &TangentVector) -> Result<BundleCochain> {
        let end = &self.center.end;
        ad_star(end, &vj.nu, &vi.nu)?
            .add(&end.dbar_star(&mu_times(&vi.mu, &vj.nu.adjoint())?)?)?
            .add(&end.d_star(&mu_bar_times(&vj.mu, &vi.nu)?)?)
    }
}

pub(crate) fn check_inputs(center: &CenterPoint, inputs: &[TangentVector]) -> Result<()> {
    let nf = center.surface.num_faces();
    for v in inputs {
        if v.nu.n != center.rank() {
            return Err(Error::RankMismatch { expected: center.rank(), got: v.nu.n });
        }
        if v.nu.sites() != nf || v.mu.sites() != nf {
            return Err(Error::TypeMismatch("tangent vector does not live on this surface".into()));
        }
    }
    Ok(())
}
