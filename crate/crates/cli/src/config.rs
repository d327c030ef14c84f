//! Experiment manifests: JSON with every field optional. Missing fields take
//! the defaults of the `g2-n2-d1` preset.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use moduli_lab::bundle::{GeneratorSet, SolverConfig, SolverMethod, UnitaryCocycle};
use moduli_lab::surface::{equip_conformal, load_mesh, refine_n, standard_surface, DensityPolicy};
use moduli_lab::tangent::CenterPoint;
use serde::{Deserialize, Serialize};

pub const PRESETS: [(&str, &str); 2] = [
    ("g2-n1-d0", include_str!("../presets/g2-n1-d0.json")),
    ("g2-n2-d1", include_str!("../presets/g2-n2-d1.json")),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSpec {
    pub genus: usize,
    pub refinements: usize,
    pub density: DensityPolicy,
    /// Mesh file to use instead of the polygon gluing; refined `refinements`
    /// times.
    pub file: Option<PathBuf>,
}

impl Default for MeshSpec {
    fn default() -> Self {
        MeshSpec { genus: 2, refinements: 2, density: DensityPolicy::Hyperbolic, file: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BundleSpec {
    pub preset: String,
    pub rank: usize,
    pub degree: i64,
    /// Generator file; overrides `preset`.
    pub generators: Option<PathBuf>,
}

impl Default for BundleSpec {
    fn default() -> Self {
        BundleSpec { preset: "rank2-degree1".into(), rank: 2, degree: 1, generators: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Projector algebra, operator norm.
    pub algebra: f64,
    /// Relative adjointness residual.
    pub adjoint: f64,
    /// Iterative against dense restricted inverse, relative.
    pub oracle: f64,
    /// Universal against fibered first variation, relative.
    pub first_variation: f64,
    /// Report total against the sum of its terms.
    pub sum: f64,
    /// Hermitian symmetry of the second variation, relative.
    pub symmetry: f64,
    /// Difference and positivity reconciliation.
    pub reconcile: f64,
    /// Vanishing for rank 1 without Beltrami inputs.
    pub vanishing: f64,
    /// Projector-derivative error at step 1e-4.
    pub projector: f64,
    /// Allowed deviation of the log-log slope from 2.
    pub slope: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            algebra: 1e-8,
            adjoint: 1e-10,
            oracle: 1e-8,
            first_variation: 1e-12,
            sum: 1e-12,
            symmetry: 1e-8,
            reconcile: 1e-10,
            vanishing: 1e-12,
            projector: 1e-6,
            slope: 0.2,
        }
    }
}

impl Tolerances {
    fn uniform(t: f64) -> Self {
        Tolerances {
            algebra: t,
            adjoint: t,
            oracle: t,
            first_variation: t,
            sum: t,
            symmetry: t,
            reconcile: t,
            vanishing: t,
            projector: t,
            slope: t,
        }
    }

    fn all(&self) -> [f64; 10] {
        [
            self.algebra,
            self.adjoint,
            self.oracle,
            self.first_variation,
            self.sum,
            self.symmetry,
            self.reconcile,
            self.vanishing,
            self.projector,
            self.slope,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mesh: MeshSpec,
    pub bundle: BundleSpec,
    pub seed: u64,
    pub samples: usize,
    /// Sample tangents with a Beltrami component.
    pub with_mu: bool,
    pub tolerances: Tolerances,
    pub dense_cap: usize,
    pub solver: SolverMethod,
    pub adjoint_trials: usize,
    pub oracle_trials: usize,
    pub first_variation_trials: usize,
    pub steps: Vec<f64>,
    /// Not part of the serialized report, so runs into different
    /// directories stay byte-identical.
    #[serde(skip_serializing)]
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mesh: MeshSpec::default(),
            bundle: BundleSpec::default(),
            seed: 0,
            samples: 8,
            with_mu: true,
            tolerances: Tolerances::default(),
            dense_cap: 6000,
            solver: SolverMethod::Auto,
            adjoint_trials: 1000,
            oracle_trials: 100,
            first_variation_trials: 200,
            steps: vec![1e-3, 1e-4, 1e-5],
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn cerr(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

/// Command-line values that override the manifest.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub dense_cap: Option<usize>,
    pub tol: Option<f64>,
    pub density: Option<DensityPolicy>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| cerr(format!("config: {e}")))
    }

    /// A path, or the name of a shipped preset when no such file exists.
    pub fn load(spec: Option<&Path>) -> Result<Self, ConfigError> {
        let Some(path) = spec else {
            return Ok(ExperimentConfig::default());
        };
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(|e| cerr(format!("{}: {e}", path.display())))?;
            let mut cfg = Self::from_json(&text)?;
            // relative file references resolve against the manifest
            let base = path.parent().unwrap_or(Path::new("."));
            for p in [&mut cfg.mesh.file, &mut cfg.bundle.generators].into_iter().flatten() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
            return Ok(cfg);
        }
        let name = path.to_string_lossy();
        PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| Self::from_json(text))
            .unwrap_or_else(|| Err(cerr(format!("config `{name}` is neither a file nor a preset"))))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(p) = &o.out {
            self.out = p.clone();
        }
        if let Some(c) = o.dense_cap {
            self.dense_cap = c;
        }
        if let Some(t) = o.tol {
            self.tolerances = Tolerances::uniform(t);
        }
        if let Some(d) = o.density {
            self.mesh.density = d;
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.mesh.file.is_none() && self.mesh.genus < 2 {
            return Err(cerr("mesh.genus must be at least 2"));
        }
        if self.bundle.rank == 0 {
            return Err(cerr("bundle.rank must be positive"));
        }
        for p in [&self.mesh.file, &self.bundle.generators].into_iter().flatten() {
            if !p.exists() {
                return Err(cerr(format!("{} does not exist", p.display())));
            }
        }
        if self.tolerances.all().iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(cerr("tolerances must be positive and finite"));
        }
        if self.samples == 0 || self.dense_cap == 0 {
            return Err(cerr("samples and dense_cap must be positive"));
        }
        if self.steps.len() < 2 || self.steps.iter().any(|h| !(*h > 0.0)) {
            return Err(cerr("steps needs at least two positive values"));
        }
        Ok(())
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig { method: self.solver, dense_cap: self.dense_cap, ..SolverConfig::default() }
    }

    pub fn generators(&self, genus: usize) -> Result<GeneratorSet, ConfigError> {
        let b = &self.bundle;
        let gens = match &b.generators {
            Some(p) => GeneratorSet::load(p).map_err(|e| cerr(format!("{}: {e}", p.display())))?,
            None => GeneratorSet::preset(&b.preset, genus, b.rank, self.seed).map_err(|e| cerr(e.to_string()))?,
        };
        if gens.rank != b.rank || gens.degree != b.degree {
            return Err(cerr(format!(
                "bundle is rank {} degree {}, config says rank {} degree {}",
                gens.rank, gens.degree, b.rank, b.degree
            )));
        }
        Ok(gens)
    }

    pub fn center(&self) -> Result<CenterPoint, ConfigError> {
        let m = &self.mesh;
        let surface = match &m.file {
            Some(p) => {
                let mesh = load_mesh(p).map_err(|e| cerr(format!("{}: {e}", p.display())))?;
                let mesh = refine_n(&mesh, m.refinements).map_err(|e| cerr(e.to_string()))?;
                equip_conformal(mesh, m.density).map_err(|e| cerr(e.to_string()))?
            }
            None => standard_surface(m.genus, m.refinements, m.density).map_err(|e| cerr(e.to_string()))?,
        };
        let gens = self.generators(surface.mesh().genus())?;
        let surface = Arc::new(surface);
        let cocycle = UnitaryCocycle::from_generators(surface.mesh(), &gens, 0).map_err(|e| cerr(e.to_string()))?;
        CenterPoint::new(surface, cocycle, self.solver_config()).map_err(|e| cerr(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_validate() {
        for (name, _) in PRESETS {
            let cfg = ExperimentConfig::load(Some(Path::new(name))).unwrap();
            cfg.validate().unwrap();
        }
    }

    #[test]
    fn unknown_field_is_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"sed": 3}"#).is_err());
    }

    #[test]
    fn tol_override_replaces_all() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply(&Overrides { tol: Some(1e-3), ..Overrides::default() });
        assert!(cfg.tolerances.all().iter().all(|&t| t == 1e-3));
        cfg.apply(&Overrides { tol: Some(-1.0), ..Overrides::default() });
        assert!(cfg.validate().is_err());
    }
}
