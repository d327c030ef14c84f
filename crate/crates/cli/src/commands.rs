//! The four subcommands. Each returns a report, extra output files and a
//! list of failed assertions; nothing here touches the filesystem.

use moduli_lab::batch::{map_indexed, Execution};
use moduli_lab::bundle::{
    ad_on_scalar, ad_star, BundleCochain, CochainKind, SolverConfig, SolverMethod, TwistedComplex,
};
use moduli_lab::calculus::FormType;
use moduli_lab::oracle::{materialize, operator_norm, restricted_inverse, torus_crosscheck, Mode, OperatorKind};
use moduli_lab::tangent::{random_tangent, CenterPoint, TangentVector};
use moduli_lab::variation::{
    difference_report, first_variation, positivity_certificate, projector_derivative_check, random_perturbation,
    second_variation_fibered, second_variation_universal, Scope, VariationReport, PERTURBATION_SCALE,
};
use moduli_lab::{Mat, C64};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ConfigError, ExperimentConfig};

const ZERO_ONE: CochainKind = CochainKind::Face(FormType::ZeroOne);
const ONE_ZERO: CochainKind = CochainKind::Face(FormType::OneZero);

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Failure {
    pub check: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample: Option<u64>,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

pub struct Outcome {
    pub report: Value,
    /// Extra files as `(name, contents)`.
    pub files: Vec<(String, String)>,
    pub failures: Vec<Failure>,
}

/// Collects named checks and turns the failing ones into [`Failure`]s.
#[derive(Default)]
struct Ledger {
    checks: Vec<Check>,
    failures: Vec<Failure>,
}

impl Ledger {
    fn at_most(&mut self, name: &str, value: f64, tol: f64) {
        self.record(name, value, tol, value <= tol, None);
    }

    fn at_most_sample(&mut self, name: &str, value: f64, tol: f64, seed: u64) {
        self.record(name, value, tol, value <= tol, Some(seed));
    }

    fn record(&mut self, name: &str, value: f64, tol: f64, pass: bool, sample: Option<u64>) {
        if !pass {
            self.failures.push(Failure { check: name.into(), sample, detail: format!("{value:e} vs {tol:e}") });
        }
        self.checks.push(Check { name: name.into(), value, tol, pass });
    }

    fn fail(&mut self, name: &str, sample: Option<u64>, detail: String) {
        self.failures.push(Failure { check: name.into(), sample, detail });
    }
}

fn sample_seed(base: u64, s: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(s as u64)
}

fn tangent(center: &CenterPoint, seed: u64, k: u64, scale: f64, with_mu: bool) -> moduli_lab::Result<TangentVector> {
    let v = random_tangent(center, seed.wrapping_mul(8).wrapping_add(k), scale)?;
    Ok(if with_mu { v } else { v.nu_only() })
}

fn rel(a: C64, b: C64) -> f64 {
    let d = (a - b).norm();
    if d == 0.0 {
        0.0
    } else {
        d / a.norm().max(b.norm())
    }
}

fn config_value(cfg: &ExperimentConfig) -> Value {
    serde_json::to_value(cfg).unwrap_or(Value::Null)
}

fn setup(cfg: &ExperimentConfig) -> Result<CenterPoint, ConfigError> {
    cfg.validate()?;
    cfg.center()
}

/// Dense projector algebra, adjointness, kernels, oracle equivalence, first
/// variation agreement and the torus cross-check.
pub fn check_operators(cfg: &ExperimentConfig) -> Result<Outcome, ConfigError> {
    let center = setup(cfg)?;
    let tol = &cfg.tolerances;
    let mut led = Ledger::default();
    let cap = cfg.dense_cap;
    let end = &center.end;
    let exec = Execution::default();

    for (label, cx) in [("end", &center.end), ("tx", &center.tx)] {
        let p = materialize(cx, &OperatorKind::HarmonicProjector, cap).map_err(|e| ConfigError(e.to_string()))?;
        let d = materialize(cx, &OperatorKind::Dbar, cap).map_err(|e| ConfigError(e.to_string()))?;
        let pw = p.whitened();
        led.at_most(&format!("{label}.projector_idempotent"), operator_norm(&(&pw * &pw - &pw)), tol.algebra);
        led.at_most(&format!("{label}.projector_self_adjoint"), operator_norm(&(&pw - pw.adjoint())), tol.algebra);
        led.at_most(&format!("{label}.projector_kills_dbar"), operator_norm(&p.compose(&d).whitened()), tol.algebra);
    }

    let nv = center.surface.num_vertices();
    let nf = center.surface.num_faces();
    let n = center.rank();
    let residuals = map_indexed(cfg.adjoint_trials, exec, |t| -> moduli_lab::Result<f64> {
        let s = sample_seed(cfg.seed, t).wrapping_mul(4);
        let x = BundleCochain::random(CochainKind::Vertex, n, nv, s);
        let (lhs, rhs, scale) = match t % 4 {
            0 => {
                let a = BundleCochain::random(ZERO_ONE, n, nf, s + 1);
                let dx = end.dbar(&x)?;
                (end.inner(&dx, &a)?, end.inner(&x, &end.dbar_star(&a)?)?, end.norm(&dx)? * end.norm(&a)?)
            }
            1 => {
                let a = BundleCochain::random(ONE_ZERO, n, nf, s + 1);
                let dx = end.d_hol(&x)?;
                (end.inner(&dx, &a)?, end.inner(&x, &end.d_star(&a)?)?, end.norm(&dx)? * end.norm(&a)?)
            }
            2 => {
                let nu = BundleCochain::random(ZERO_ONE, n, nf, s + 2);
                let a = BundleCochain::random(ZERO_ONE, n, nf, s + 1);
                let ax = ad_on_scalar(end, &nu, &x)?;
                (end.inner(&ax, &a)?, end.inner(&x, &ad_star(end, &nu, &a)?)?, end.norm(&ax)?.max(1e-300) * end.norm(&a)?)
            }
            _ => {
                let tx = &center.tx;
                let f = BundleCochain::random(CochainKind::Vertex, 1, nv, s);
                let m = BundleCochain::random(CochainKind::Beltrami, 1, nf, s + 1);
                let df = tx.dbar(&f)?;
                (tx.inner(&df, &m)?, tx.inner(&f, &tx.dbar_star(&m)?)?, tx.norm(&df)? * tx.norm(&m)?)
            }
        };
        Ok((lhs - rhs).norm() / scale.max(1e-300))
    });
    let mut worst = 0.0f64;
    for r in residuals {
        match r {
            Ok(v) => worst = worst.max(v),
            Err(e) => led.fail("adjointness", None, e.to_string()),
        }
    }
    led.at_most("adjointness_max_relative", worst, tol.adjoint);

    let kernel = end.kernel_dim();
    let commutant = center.cocycle.commutant_dim();
    led.record("kernel_equals_commutant", kernel as f64, commutant as f64, kernel == commutant, None);
    if center.cocycle.is_irreducible() {
        led.record("irreducible_kernel_is_one", kernel as f64, 1.0, kernel == 1, None);
    }
    if cfg.bundle.generators.is_none() && cfg.bundle.preset == "trivial" {
        led.record("trivial_kernel_is_n_squared", kernel as f64, (n * n) as f64, kernel == n * n, None);
    }

    // iterative solver against the dense restricted inverse
    let iter_cfg = SolverConfig { method: SolverMethod::Iterative, ..cfg.solver_config() };
    let iterative = TwistedComplex::end_bundle(center.surface.clone(), &center.cocycle, iter_cfg)
        .map_err(|e| ConfigError(e.to_string()))?;
    let lap = materialize(end, &OperatorKind::Laplacian, cap).map_err(|e| ConfigError(e.to_string()))?;
    let (inv, dense_kernel) = restricted_inverse(&lap).map_err(|e| ConfigError(e.to_string()))?;
    led.record("dense_kernel_matches", dense_kernel as f64, kernel as f64, dense_kernel == kernel, None);
    let errs = map_indexed(cfg.oracle_trials, exec, |t| -> moduli_lab::Result<f64> {
        let b = BundleCochain::random(CochainKind::Vertex, n, nv, sample_seed(cfg.seed, t) ^ 0x5EED);
        let want = inv.apply(&b)?;
        let got = iterative.delta0_inv(&b)?;
        Ok(end.norm(&got.sub(&want)?)? / end.norm(&want)?.max(1e-300))
    });
    let mut worst = 0.0f64;
    for r in errs {
        match r {
            Ok(v) => worst = worst.max(v),
            Err(e) => led.fail("oracle_equivalence", None, e.to_string()),
        }
    }
    led.at_most("oracle_equivalence_max_relative", worst, tol.oracle);
    let x = BundleCochain::random(CochainKind::Vertex, n, nv, cfg.seed);
    let dense_dbar = materialize(end, &OperatorKind::Dbar, cap).map_err(|e| ConfigError(e.to_string()))?;
    let functional = end.dbar(&x).map_err(|e| ConfigError(e.to_string()))?;
    let diff = dense_dbar.apply(&x).and_then(|y| y.sub(&functional)).map(|d| d.max_abs()).unwrap_or(f64::INFINITY);
    led.at_most("dense_dbar_matches_stencil", diff, tol.algebra);

    let fv = map_indexed(cfg.first_variation_trials, exec, |t| -> moduli_lab::Result<f64> {
        let s = sample_seed(cfg.seed, t) ^ 0xF1;
        let v: Vec<TangentVector> =
            (0..3).map(|k| tangent(&center, s, k, 1.0, cfg.with_mu)).collect::<moduli_lab::Result<_>>()?;
        let u = first_variation(&center, false, &v[0], &v[1], &v[2])?;
        let f = first_variation(&center, true, &v[0], &v[1], &v[2])?;
        Ok(rel(u.d_eps.into(), f.d_eps.into()).max(rel(u.d_eps_bar.into(), f.d_eps_bar.into())))
    });
    let mut worst = 0.0f64;
    for r in fv {
        match r {
            Ok(v) => worst = worst.max(v),
            Err(e) => led.fail("first_variation", None, e.to_string()),
        }
    }
    led.at_most("first_variation_max_relative", worst, tol.first_variation);

    let coef = Mat::from_fn(n, n, |i, j| C64::new(1.0 / (1 + i + j) as f64, 0.3 * (i as f64 - j as f64)));
    let modes = [Mode { k: 1, l: 0, coef: coef.clone() }, Mode { k: 1, l: -1, coef: coef.adjoint() }];
    let torus = match torus_crosscheck(n, &modes, &[4, 8, 16], &Mat::identity(n, n)) {
        Ok(t) => {
            led.record("torus_errors_decrease", t.decreasing as u8 as f64, 1.0, t.decreasing, None);
            serde_json::to_value(&t).unwrap_or(Value::Null)
        }
        Err(e) => {
            led.fail("torus_crosscheck", None, e.to_string());
            Value::Null
        }
    };

    let report = json!({
        "command": "check-operators",
        "config": config_value(cfg),
        "dims": { "vertices": nv, "faces": nf, "rank": n, "dim0": end.dim0(), "dim1": end.dim1(),
                  "kernel": kernel, "commutant": commutant, "tx_kernel": center.tx.kernel_dim() },
        "checks": led.checks,
        "torus": torus,
        "failures": led.failures,
    });
    Ok(Outcome { report, files: vec![], failures: led.failures })
}

struct SvSample {
    universal: VariationReport,
    fibered: VariationReport,
    difference: VariationReport,
    symmetry: [f64; 2],
}

fn second_variation_sample(center: &CenterPoint, cfg: &ExperimentConfig, s: usize) -> moduli_lab::Result<SvSample> {
    let seed = sample_seed(cfg.seed, s);
    let v = (0..4).map(|k| tangent(center, seed, k, 1.0, cfg.with_mu)).collect::<moduli_lab::Result<Vec<_>>>()?;
    let q: [TangentVector; 4] = v.try_into().expect("four tangents");
    let mirror = [q[1].clone(), q[0].clone(), q[3].clone(), q[2].clone()];
    let universal = second_variation_universal(center, &q)?;
    let fibered = second_variation_fibered(center, &q)?;
    let difference = difference_report(center, &q)?;
    let mu = second_variation_universal(center, &mirror)?.total().conj();
    let mf = second_variation_fibered(center, &mirror)?.total().conj();
    Ok(SvSample { symmetry: [rel(universal.total(), mu), rel(fibered.total(), mf)], universal, fibered, difference })
}

/// Both second variations and their difference on seeded quadruples.
pub fn second_variation(cfg: &ExperimentConfig) -> Result<Outcome, ConfigError> {
    let center = setup(cfg)?;
    let tol = &cfg.tolerances;
    let vanish = center.rank() == 1 && !cfg.with_mu;
    let results = map_indexed(cfg.samples, Execution::default(), |s| second_variation_sample(&center, cfg, s));
    let mut led = Ledger::default();
    let mut samples = Vec::new();
    let mut csv = String::from("seed,system,name,re,im,scope\n");
    for (s, r) in results.into_iter().enumerate() {
        let seed = sample_seed(cfg.seed, s);
        let smp = match r {
            Ok(x) => x,
            Err(e) => {
                led.fail("second_variation", Some(seed), e.to_string());
                continue;
            }
        };
        let mut check = |name: &str, value: f64, tol: f64| led.at_most_sample(name, value, tol, seed);
        for rep in [&smp.universal, &smp.fibered, &smp.difference] {
            let scale = rep.terms.iter().map(|t| t.value().norm()).fold(1.0, f64::max);
            check("sum_of_terms", rep.sum_defect() / scale, tol.sum);
        }
        check("hermitian_universal", smp.symmetry[0], tol.symmetry);
        check("hermitian_fibered", smp.symmetry[1], tol.symmetry);
        let recon = (smp.universal.total() - smp.fibered.total() - smp.difference.total()).norm();
        let scale = smp.universal.total().norm().max(smp.fibered.total().norm()).max(1.0);
        check("difference_reconciles", recon / scale, tol.reconcile);
        let added = smp.difference.terms.iter().filter(|t| t.scope == Scope::Added).count();
        let removed = smp.difference.terms.iter().filter(|t| t.scope == Scope::Removed).count();
        led.record("bookkeeping_4_added_2_removed", (added * 10 + removed) as f64, 42.0, added == 4 && removed == 2, Some(seed));
        if vanish {
            let worst = smp.universal.total().norm().max(smp.fibered.total().norm());
            led.record("rank_one_no_beltrami_vanishes", worst, tol.vanishing, worst <= tol.vanishing, Some(seed));
        }
        for rep in [&smp.universal, &smp.fibered, &smp.difference] {
            let system = serde_json::to_value(rep.system).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            for t in &rep.terms {
                csv.push_str(&format!("{seed},{system},{},{:e},{:e},{}\n", t.name, t.re, t.im, t.scope.as_str()));
            }
        }
        samples.push(json!({
            "seed": seed,
            "universal": smp.universal,
            "fibered": smp.fibered,
            "difference": smp.difference,
            "symmetry_defect": smp.symmetry,
        }));
    }
    let report = json!({
        "command": "second-variation",
        "config": config_value(cfg),
        "samples": samples,
        "failed_checks": led.checks.iter().filter(|c| !c.pass).count(),
        "total_checks": led.checks.len(),
        "failures": led.failures,
    });
    Ok(Outcome { report, files: vec![("terms.csv".into(), csv)], failures: led.failures })
}

fn spread(s: usize, shift: f64) -> f64 {
    // golden-ratio sequence in [0.5, 2)
    0.5 + 1.5 * ((s as f64 + shift) * 0.618_033_988_749_895).fract()
}

/// Positivity certificates for the restricted difference on seeded presets.
pub fn positivity(cfg: &ExperimentConfig) -> Result<Outcome, ConfigError> {
    let center = setup(cfg)?;
    let tol = &cfg.tolerances;
    let results = map_indexed(cfg.samples, Execution::default(), |s| {
        let seed = sample_seed(cfg.seed, s);
        let mu = tangent(&center, seed, 0, spread(s, 0.0), true)?;
        let nu = tangent(&center, seed, 1, spread(s, 0.37), true)?;
        let cert = positivity_certificate(&center, &mu, &nu)?;
        let x = center.tx.norm(&mu.mu)? * center.end.norm(&nu.nu)?;
        Ok::<_, moduli_lab::Error>((cert, x))
    });
    let mut led = Ledger::default();
    let mut csv = String::from("seed,term_a,term_b,total\n");
    let mut plot = String::from("norm_mu2_times_norm_nu1\ttotal\n");
    let mut samples = Vec::new();
    for (s, r) in results.into_iter().enumerate() {
        let seed = sample_seed(cfg.seed, s);
        let (cert, x) = match r {
            Ok(v) => v,
            Err(e) => {
                led.fail("positivity", Some(seed), e.to_string());
                continue;
            }
        };
        let scale = cert.scale.max(1e-300);
        led.record("term_a_nonnegative", -cert.term_a / scale, 1e-12, cert.term_a >= -1e-12 * scale, Some(seed));
        led.record("term_b_positive", cert.term_b, 0.0, cert.term_b > 0.0, Some(seed));
        led.record("total_positive", cert.total, 0.0, cert.total > 0.0, Some(seed));
        led.at_most_sample("total_real", cert.total_im.abs() / cert.total.abs().max(1e-300), tol.reconcile, seed);
        led.at_most_sample("decomposition_reconciles", cert.reconcile_error / scale, tol.reconcile, seed);
        csv.push_str(&format!("{seed},{:e},{:e},{:e}\n", cert.term_a, cert.term_b, cert.total));
        plot.push_str(&format!("{x:e}\t{:e}\n", cert.total));
        samples.push(json!({ "seed": seed, "certificate": cert, "norm_product": x }));
    }
    let report = json!({
        "command": "positivity",
        "config": config_value(cfg),
        "samples": samples,
        "failures": led.failures,
    });
    Ok(Outcome {
        report,
        files: vec![("positivity.csv".into(), csv), ("plotdata.tsv".into(), plot)],
        failures: led.failures,
    })
}

/// Finite-difference check of the projector derivative over step sizes.
pub fn projector_derivative(cfg: &ExperimentConfig) -> Result<Outcome, ConfigError> {
    let center = setup(cfg)?;
    let tol = &cfg.tolerances;
    let end = &center.end;
    let results = map_indexed(cfg.samples, Execution::default(), |s| {
        let seed = sample_seed(cfg.seed, s);
        let a = random_perturbation(end, seed, PERTURBATION_SCALE)?;
        projector_derivative_check(end, &a, &cfg.steps)
    });
    let mut led = Ledger::default();
    let mut csv = String::from("seed,step,error\n");
    let mut samples = Vec::new();
    for (s, r) in results.into_iter().enumerate() {
        let seed = sample_seed(cfg.seed, s);
        let chk = match r {
            Ok(c) => c,
            Err(e) => {
                led.fail("projector_derivative", Some(seed), e.to_string());
                continue;
            }
        };
        led.at_most_sample("error_at_1e-4", chk.error_at(1e-4), tol.projector, seed);
        led.at_most_sample("slope_minus_2", (chk.sweep.slope - 2.0).abs(), tol.slope, seed);
        led.at_most_sample("harmonic_pairing", chk.harmonic_pairing, tol.algebra, seed);
        for (h, e) in chk.sweep.steps.iter().zip(&chk.sweep.errors) {
            csv.push_str(&format!("{seed},{h:e},{e:e}\n"));
        }
        samples.push(json!({ "seed": seed, "check": chk }));
    }
    let report = json!({
        "command": "projector-derivative",
        "config": config_value(cfg),
        "samples": samples,
        "failures": led.failures,
    });
    Ok(Outcome { report, files: vec![("projector.csv".into(), csv)], failures: led.failures })
}
