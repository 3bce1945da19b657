//! Randomized verification suites.
//!
//! Trial `t` of a suite runs at size `n = 2 + t mod (n_max - 1)` with its own
//! random stream derived from the master seed, the suite and `t`, so a suite
//! gives the same results whether run alone or as part of `all`.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use ncrep_core::algebra::{StarAlgebra, Subalgebra};
use ncrep_core::expectations::{
    existence_diagnosis, expectation_from_density, expectation_to_density, functional_distance_on,
    preserving_expectation,
};
use ncrep_core::hoffman_rossi::{
    representing_expectation_state, representing_expectation_tracial, RepresentationOptions,
};
use ncrep_core::jensen::{geometric_mean, holder_tracial, jensen_check, logmodular_witness};
use ncrep_core::matrix::{
    c64, herm_funcalc, hermitian_part, hs_norm, identity, matrix_unit, max_abs, min_singular_value, op_norm,
    ComplexMatrix, FunCalc, HermitianSpectrum, LinearMap,
};
use ncrep_core::random::{
    ginibre, random_block_instance, random_central_state, random_element, random_star_algebra, random_state, rng,
    trial_seed, TrialRng,
};
use ncrep_core::states::PositiveFunctional;
use ncrep_core::tol;

use crate::error::{CliError, CliResult};
use crate::instance::{describe_parts, to_string, InstanceDescription};
use crate::report::{Failure, Report};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Expectations,
    HoffmanRossi,
    Jensen,
    Diagnosis,
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Expectations => "expectations",
            Suite::HoffmanRossi => "hoffman-rossi",
            Suite::Jensen => "jensen",
            Suite::Diagnosis => "diagnosis",
            Suite::All => "all",
        }
    }

    fn salt(self) -> u64 {
        match self {
            Suite::Expectations => 0x6578_7065,
            Suite::HoffmanRossi => 0x686f_6666,
            Suite::Jensen => 0x6a65_6e73,
            Suite::Diagnosis => 0x6469_6167,
            Suite::All => 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub n_max: usize,
    pub trials: usize,
    pub seed: u64,
    /// Perturb the computed objects by `1e-3` so the checks must fail.
    pub inject_fault: bool,
    /// Where failing instances are written; nothing is written if unset.
    pub failure_dir: Option<PathBuf>,
}

/// Size of the injected fault.
const FAULT: f64 = 1e-3;

/// Directory for failing instances that belongs to a report path.
pub fn failure_dir_for(report: &Path) -> PathBuf {
    let mut s = report.as_os_str().to_owned();
    s.push(".failures");
    PathBuf::from(s)
}

pub fn run_suite(suite: Suite, cfg: &SuiteConfig) -> CliResult<Report> {
    if cfg.n_max < 2 {
        return Err(CliError::Usage(format!("--n-max must be at least 2, got {}", cfg.n_max)));
    }
    let mut report = Report::new(format!("suite {}", suite.name()));
    report.seed = Some(cfg.seed);
    report.n_max = Some(cfg.n_max);
    report.trials = Some(cfg.trials);
    if cfg.n_max > 16 {
        report.note(format!("n_max = {} is above the advised 16; trials may be slow", cfg.n_max));
    }
    let list: &[Suite] = match suite {
        Suite::All => &[Suite::Expectations, Suite::HoffmanRossi, Suite::Jensen, Suite::Diagnosis],
        _ => std::slice::from_ref(&suite),
    };
    for &s in list {
        run_one(s, cfg, &mut report)?;
    }
    Ok(report)
}

/// Measurements of one trial and the instance they came from.
struct Trial {
    suite: &'static str,
    checks: Vec<(String, f64, f64)>,
    instance: Option<InstanceDescription>,
    fault: bool,
    index: u64,
}

impl Trial {
    /// `base` is scaled by the global tolerance factor.
    fn check(&mut self, name: &str, deviation: f64, base: f64) {
        self.checks.push((format!("{}/{}", self.suite, name), deviation, tol::tol(base)));
    }

    fn check_scaled(&mut self, name: &str, deviation: f64, tolerance: f64) {
        self.checks.push((format!("{}/{}", self.suite, name), deviation, tolerance));
    }
}

type TrialFn = fn(&mut Trial, &mut TrialRng, usize) -> ncrep_core::Result<()>;

fn run_one(suite: Suite, cfg: &SuiteConfig, report: &mut Report) -> CliResult<()> {
    let body: TrialFn = match suite {
        Suite::Expectations => expectations_trial,
        Suite::HoffmanRossi => hoffman_rossi_trial,
        Suite::Jensen => jensen_trial,
        Suite::Diagnosis => diagnosis_trial,
        Suite::All => unreachable!("expanded by run_suite"),
    };
    let name = suite.name();
    let master = trial_seed(cfg.seed, suite.salt());
    for t in 0..cfg.trials {
        let n = 2 + t % (cfg.n_max - 1);
        let mut r = rng(trial_seed(master, t as u64));
        let mut trial =
            Trial { suite: name, checks: Vec::new(), instance: None, fault: cfg.inject_fault, index: t as u64 };
        let outcome = body(&mut trial, &mut r, n);
        let error = outcome.err();
        trial.check("completed", if error.is_some() { 1.0 } else { 0.0 }, 0.0);

        let failed: Vec<_> = trial.checks.iter().filter(|(_, d, tl)| !(d <= tl)).cloned().collect();
        for (check, dev, tolerance) in &trial.checks {
            report.record(check, *dev, *tolerance);
        }
        if failed.is_empty() {
            continue;
        }
        let path = match (&cfg.failure_dir, &trial.instance) {
            (Some(dir), Some(inst)) => Some(write_failure(dir, name, t, inst)?),
            _ => None,
        };
        for (check, dev, _) in failed {
            let assertion = match (&error, check.ends_with("/completed")) {
                (Some(e), true) => format!("{check}: {e}"),
                _ => check,
            };
            report.failures.push(Failure {
                suite: name.into(),
                trial: Some(t),
                assertion,
                deviation: dev,
                instance: path.clone(),
            });
        }
    }
    Ok(())
}

fn write_failure(dir: &Path, suite: &str, t: usize, inst: &InstanceDescription) -> CliResult<String> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    let path = dir.join(format!("{suite}-trial-{t}.json"));
    std::fs::write(&path, to_string(inst)).map_err(|source| CliError::Io { path: path.clone(), source })?;
    Ok(path.display().to_string())
}

/// `map + ε·id`.
fn corrupt(map: &LinearMap) -> ncrep_core::Result<LinearMap> {
    let k = map.matrix().nrows();
    LinearMap::from_matrix(map.n(), map.matrix() + ComplexMatrix::identity(k, k) * c64(FAULT, 0.0))
}

/// Largest entry of `Ψ(x) − Φ(x)` over a basis of `A`.
fn extension_gap(psi: &LinearMap, a: &Subalgebra, phi: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> f64 {
    a.basis().iter().map(|x| max_abs(&(psi.apply(x) - phi(x)))).fold(0.0, f64::max)
}

fn expectations_trial(t: &mut Trial, r: &mut TrialRng, n: usize) -> ncrep_core::Result<()> {
    let m = StarAlgebra::full(n);
    let d = random_star_algebra(r, n);
    let omega = random_central_state(r, &d, &m)?;
    t.instance = Some(describe_parts(&d, None, &omega, None));

    let e = preserving_expectation(&omega, &d, &m)?;
    for (name, dev, tolerance) in e.check().entries() {
        t.check_scaled(&format!("ce_{name}"), dev, tolerance);
    }
    let map = if t.fault { corrupt(e.map())? } else { e.map().clone() };
    t.check("preservation", functional_distance_on(&omega.pullback(&map)?, &omega, &m)?, 1e-8);

    // ω = τ(nρ ·) and E_ω is the density expectation of h = E_τ(nρ)⁻¹ nρ.
    let tau = PositiveFunctional::tracial(n);
    let k = omega.density() * c64(n as f64, 0.0);
    let g = hermitian_part(&preserving_expectation(&tau, &d, &m)?.apply(&k));
    let h = hermitian_part(&(herm_funcalc(&g, FunCalc::Pow(-1.0))? * &k));
    let from_density = expectation_from_density(&h, &d, &m, &tau)?;
    t.check("uniqueness", e.distance(&from_density), 1e-8);
    let back = expectation_to_density(&from_density, &tau)?;
    t.check("density_round_trip", hs_norm(&(back - &h)) / hs_norm(&h), 1e-8);

    let x = ginibre(r, n, n);
    let ex = e.apply(&x);
    let gap = e.apply(&(x.adjoint() * &x)) - ex.adjoint() * &ex;
    let low = HermitianSpectrum::of_hermitian_part(&gap).min();
    t.check("kadison_schwarz", (-low).max(0.0) / op_norm(&x).powi(2), 1e-8);
    Ok(())
}

fn hoffman_rossi_trial(t: &mut Trial, r: &mut TrialRng, n: usize) -> ncrep_core::Result<()> {
    let m = StarAlgebra::full(n);
    let inst = random_block_instance(r, n, true)?;
    let tau = PositiveFunctional::tracial(n);
    t.instance = Some(describe_parts(&inst.d, Some(&inst.a), &tau, Some(&inst.phi)));

    let rep = representing_expectation_tracial(&m, &tau, &inst.d, &inst.phi, &RepresentationOptions::default())?;
    let map = if t.fault { corrupt(rep.psi.map())? } else { rep.psi.map().clone() };
    t.check("extension", extension_gap(&map, &inst.a, |x| inst.phi.apply(x)), 1e-7);
    t.check("preservation", functional_distance_on(&rep.rho.pullback(&map)?, &rep.rho, &m)?, 1e-8);
    t.check("measure", rep.measure_deviation, 1e-8);
    t.check("annihilation", rep.annihilation, 1e-8);
    t.check("mth_excess", (rep.mth_ratio - 1.0).max(0.0), 1e-9);
    for (name, dev, tolerance) in rep.psi.check().entries() {
        t.check_scaled(&format!("ce_{name}"), dev, tolerance);
    }

    let state = representing_expectation_state(&m, &tau, &inst.d, &inst.phi, &RepresentationOptions::default())?;
    t.check("state_pipeline_agreement", rep.psi.distance(&state.psi), 1e-7);
    let scale = 0.3 * op_norm(&rep.extension_functional);
    let opts = RepresentationOptions { perturbation: Some((trial_seed(0x7065, t.index), scale)) };
    let perturbed = representing_expectation_tracial(&m, &tau, &inst.d, &inst.phi, &opts)?;
    t.check("perturbation_invariance", rep.psi.distance(&perturbed.psi), 1e-7);
    Ok(())
}

fn jensen_trial(t: &mut Trial, r: &mut TrialRng, n: usize) -> ncrep_core::Result<()> {
    let m = StarAlgebra::full(n);
    let inst = random_block_instance(r, n, true)?;
    let tau = PositiveFunctional::tracial(n);
    t.instance = Some(describe_parts(&inst.d, Some(&inst.a), &tau, Some(&inst.phi)));

    let psi = preserving_expectation(&tau, &inst.d, &m)?;
    t.check("psi_extends_phi", extension_gap(psi.map(), &inst.a, |x| inst.phi.apply(x)), 1e-7);
    let b = {
        let x = ginibre(r, n, n);
        x.adjoint() * &x + identity(n)
    };
    let logmodular = logmodular_witness(&inst.a, &b).is_ok();
    t.check("logmodular_witness", if logmodular { 0.0 } else { 1.0 }, 0.0);

    let a = loop {
        let a = random_element(r, inst.a.space());
        let pa = inst.phi.apply(&a);
        if min_singular_value(&a) > 1e-3 * op_norm(&a) && min_singular_value(&pa) > 1e-3 * op_norm(&pa) {
            break a;
        }
    };
    let rep = jensen_check(&tau, &inst.phi, &psi, &a, logmodular)?;
    let gap = if t.fault {
        let shifted = inst.phi.apply(&a) + identity(n) * c64(FAULT, 0.0);
        (rep.delta_a - geometric_mean(&tau, &shifted)?.value).abs() / rep.delta_a
    } else {
        rep.relative_gap
    };
    t.check("equality", gap, 1e-6);
    t.check("inequality_excess", (rep.delta_phi / rep.delta_a - 1.0).max(0.0), 1e-7);

    let det = a.clone().lu().determinant().norm().powf(1.0 / n as f64);
    t.check("determinant_oracle", (rep.delta_a - det).abs() / det, 1e-6);
    let seq = geometric_mean(&tau, &a)?.power_sequence;
    let rise = seq.windows(2).map(|w| (w[1] - w[0]) / w[0]).fold(0.0, f64::max);
    t.check("power_sequence_rise", rise, 1e-9);

    let (p, q, s) = [(1.0, 2.0, 2.0), (0.5, 1.0, 1.0), (2.0 / 3.0, 1.0, 2.0)][n % 3];
    let (x, y) = (ginibre(r, n, n), ginibre(r, n, n));
    let h = holder_tracial(&tau, &m, &x, &y, p, q, s)?;
    t.check("holder_excess", (h.lhs - h.rhs).max(0.0) / h.rhs.max(1.0), 1e-9);
    t.check("abs_power_symmetry", h.symmetry_deviation, 1e-9);
    Ok(())
}

fn diagnosis_trial(t: &mut Trial, r: &mut TrialRng, n: usize) -> ncrep_core::Result<()> {
    let m = StarAlgebra::full(n);
    let d = random_star_algebra(r, n);
    let central = t.index.is_multiple_of(2);
    let omega = if central { random_central_state(r, &d, &m)? } else { random_state(r, n) };
    t.instance = Some(describe_parts(&d, None, &omega, None));

    let diag = existence_diagnosis(&omega, &d, &m);
    let judged_central = if t.fault {
        let skewed = omega.density() + matrix_unit(n, 0, 0) * c64(FAULT, 0.0);
        existence_diagnosis(&PositiveFunctional::state(skewed)?, &d, &m).d_central
    } else {
        diag.d_central
    };
    t.check(
        "centrality_iff_expectation",
        if judged_central == diag.tracial_expectation_constructed { 0.0 } else { 1.0 },
        0.0,
    );
    t.check("inconsistencies", diag.inconsistencies.len() as f64, 0.0);
    if central {
        t.check("constructed_central_is_central", if diag.d_central { 0.0 } else { 1.0 }, 0.0);
    }
    Ok(())
}
