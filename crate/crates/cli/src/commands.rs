//! `diagnose`, `represent` and `jensen` on a single instance.

use std::fmt::Write as _;

use ncrep_core::expectations::{
    existence_diagnosis, preserving_expectation, support_ideal_expectation, ConditionalExpectation, ExpectationKind,
};
use ncrep_core::hoffman_rossi::{
    representing_expectation_state, representing_expectation_tracial, Representation, RepresentationOptions,
};
use ncrep_core::jensen::{jensen_measure_suite, JensenInstance};
use ncrep_core::matrix::{matrix_unit, max_abs, ComplexMatrix};
use ncrep_core::states::PositiveFunctional;
use ncrep_core::{tol, Error};

use crate::error::{CliError, CliResult};
use crate::instance::Instance;
use crate::report::{Failure, Report};

/// Human-readable text plus the assertions behind the exit code.
#[derive(Debug, Clone)]
pub struct Output {
    pub text: String,
    pub report: Report,
}

/// Failures that come from the numerics rather than from the input.
fn is_numerical(e: &Error) -> bool {
    matches!(
        e,
        Error::GSingular { .. }
            | Error::InconsistencyDetected(_)
            | Error::NotConverged(_)
            | Error::InvariantViolation { .. }
    )
}

/// Record a numerical pipeline failure as a failed assertion; hand input
/// problems back as errors.
fn pipeline_failure(report: &mut Report, stage: &str, e: Error) -> CliResult<()> {
    if !is_numerical(&e) {
        return Err(e.into());
    }
    report.record(&format!("{stage}/completed"), 1.0, 0.0);
    report.failures.push(Failure {
        suite: stage.into(),
        trial: None,
        assertion: e.to_string(),
        deviation: 1.0,
        instance: None,
    });
    Ok(())
}

pub fn format_matrix(x: &ComplexMatrix) -> String {
    let real = x.iter().all(|z| z.im.abs() <= 1e-12 * (1.0 + z.re.abs()));
    let mut out = String::new();
    for i in 0..x.nrows() {
        out.push_str("  [");
        for j in 0..x.ncols() {
            let z = x[(i, j)];
            // Print exact zeros for rounding noise.
            let clean = |v: f64| if v.abs() < 1e-13 { 0.0 } else { v };
            if real {
                let _ = write!(out, " {:>9.5}", clean(z.re));
            } else {
                let _ = write!(out, " {:>9.5}{:+.5}i", clean(z.re), clean(z.im));
            }
        }
        out.push_str(" ]\n");
    }
    out
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn character(inst: &Instance, cmd: &str) -> CliResult<()> {
    if inst.phi.is_none() {
        return Err(CliError::Usage(format!("{cmd} needs an instance with \"A\" and \"character\"")));
    }
    Ok(())
}

/// The tracial pipeline when the state is a trace on `M`, otherwise the state pipeline.
fn pipeline(inst: &Instance) -> ncrep_core::Result<(Representation, &'static str)> {
    let phi = inst.phi.as_ref().expect("checked by caller");
    let opts = RepresentationOptions::default();
    if inst.tracial || inst.state.tracial_certificate(&inst.m).result {
        Ok((representing_expectation_tracial(&inst.m, &inst.state, &inst.d, phi, &opts)?, "tracial"))
    } else {
        Ok((representing_expectation_state(&inst.m, &inst.state, &inst.d, phi, &opts)?, "state"))
    }
}

fn record_representation(report: &mut Report, rep: &Representation) {
    report.record("represent/extension", rep.extension_deviation, tol::tol(1e-7));
    report.record("represent/preservation", rep.preservation_deviation, tol::tol(1e-8));
    report.record("represent/measure", rep.measure_deviation, tol::tol(1e-8));
    report.record("represent/annihilation", rep.annihilation, tol::tol(1e-8));
    if rep.mth_ratio.is_finite() {
        report.record("represent/mth_excess", (rep.mth_ratio - 1.0).max(0.0), tol::tol(1e-9));
    }
    for (name, dev, tolerance) in rep.psi.check().entries() {
        report.record(&format!("represent/ce_{name}"), dev, tolerance);
    }
}

fn describe_expectation(out: &mut String, e: &ConditionalExpectation) {
    let n = e.n();
    let _ = writeln!(out, "  range dimension {}", e.range().dim());
    if n <= 4 {
        let _ = writeln!(out, "  images of the matrix units E_ij:");
        for i in 0..n {
            for j in 0..n {
                let y = e.apply(&matrix_unit(n, i, j));
                if max_abs(&y) > 1e-13 {
                    let _ = write!(out, "  E_{}{} ->\n{}", i + 1, j + 1, format_matrix(&y));
                }
            }
        }
    }
}

fn write_representation(out: &mut String, rep: &Representation, kind: &str) {
    let _ = writeln!(out, "representing measure ({kind} pipeline), density of ρ:");
    out.push_str(&format_matrix(rep.rho.density()));
    let _ = writeln!(out, "Ψ:");
    describe_expectation(out, &rep.psi);
    let _ = writeln!(out, "  cond(g) = {:.3e}", rep.g_condition);
}

pub fn represent(inst: &Instance) -> CliResult<Output> {
    character(inst, "represent")?;
    let mut report = Report::new("represent");
    let mut text = String::new();
    match pipeline(inst) {
        Ok((rep, kind)) => {
            write_representation(&mut text, &rep, kind);
            record_representation(&mut report, &rep);
        }
        Err(e) => pipeline_failure(&mut report, "represent", e)?,
    }
    Ok(Output { text, report })
}

pub fn diagnose(inst: &Instance) -> CliResult<Output> {
    let (omega, d, m) = (&inst.state, &inst.d, &inst.m);
    let diag = existence_diagnosis(omega, d, m);
    let mut report = Report::new("diagnose");
    let mut t = String::new();
    let a_dim = inst.a.as_ref().map(|a| a.dim().to_string()).unwrap_or_else(|| "-".into());
    let _ = writeln!(
        t,
        "n = {}, dim D = {}, dim A = {a_dim}, state: {}",
        inst.n,
        d.dim(),
        if inst.tracial { "trace" } else { "density" }
    );
    let rows = [
        ("ω faithful on D", yes_no(diag.omega_faithful_on_d).to_string()),
        ("ω faithful on M", yes_no(diag.omega_faithful_on_m).to_string()),
        ("ω tracial on D", yes_no(diag.omega_tracial_on_d).to_string()),
        ("D ω-central", format!("{} (violation {:.2e})", yes_no(diag.d_central), diag.centrality_violation)),
        ("D locally ω-central", yes_no(diag.locally_central).to_string()),
        ("support commutes with D", yes_no(diag.support_commutes).to_string()),
        (
            "D invariant under σ^ω",
            diag.modular_invariant.map_or("n/a (ω not faithful on M)".to_string(), |b| yes_no(b).to_string()),
        ),
        ("preserving candidate valid", yes_no(diag.preserving_candidate_valid).to_string()),
        ("tracial expectation built", yes_no(diag.tracial_expectation_constructed).to_string()),
    ];
    for (k, v) in rows {
        let _ = writeln!(t, "{k:<28}{v}");
    }
    match diag.expectation {
        ExpectationKind::Preserving => {
            let _ = writeln!(t, "{:<28}ω-preserving onto D", "expectation");
            if let Ok(e) = preserving_expectation(omega, d, m) {
                describe_expectation(&mut t, &e);
            }
        }
        ExpectationKind::SupportIdeal => {
            let _ = writeln!(t, "{:<28}supported ideal expectation onto Dz, z the support of ω on D", "expectation");
            if let Ok(e) = support_ideal_expectation(omega, d, m) {
                let _ = write!(t, "  z =\n{}", format_matrix(e.support()));
                describe_expectation(&mut t, &e);
            }
        }
        ExpectationKind::None => {
            let why = if diag.d_central { "construction failed" } else { "D not ω-central" };
            let reason = diag.reason.as_deref().unwrap_or("");
            let _ = writeln!(t, "{:<28}no expectation: {why} ({reason})", "expectation");
        }
    }
    for s in &diag.inconsistencies {
        let _ = writeln!(t, "inconsistency: {s}");
    }
    report.record("diagnose/inconsistencies", diag.inconsistencies.len() as f64, 0.0);

    if inst.phi.is_some() {
        if diag.expectation == ExpectationKind::Preserving {
            match pipeline(inst) {
                Ok((rep, kind)) => {
                    write_representation(&mut t, &rep, kind);
                    record_representation(&mut report, &rep);
                }
                Err(e) if is_numerical(&e) => pipeline_failure(&mut report, "represent", e)?,
                Err(e) => {
                    let _ = writeln!(t, "representing measure: not available ({e})");
                }
            }
        } else {
            let _ = writeln!(t, "representing measure: not available without an ω-preserving expectation onto D");
        }
    }
    Ok(Output { text: t, report })
}

/// `Ψ` extending `Φ` and preserving the state used for the geometric means.
/// Prefers the `ω`-preserving expectation onto `D`; if that does not extend
/// `Φ`, falls back to the representing pipeline and its measure `ρ`.
fn jensen_setup(inst: &Instance, text: &mut String) -> CliResult<JensenInstance> {
    let phi = inst.phi.clone().expect("checked by caller");
    let omega = &inst.state;
    if !omega.is_state() {
        return Err(Error::NotAState(omega.density().trace().re).into());
    }
    if let Ok(psi) = preserving_expectation(omega, &inst.d, &inst.m) {
        let gap = phi.domain().basis().iter().map(|x| max_abs(&(psi.apply(x) - phi.apply(x)))).fold(0.0, f64::max);
        if gap <= tol::tol(1e-7) {
            let _ = writeln!(text, "Ψ: the ω-preserving expectation onto D (extends Φ within {gap:.2e})");
            return Ok(JensenInstance { omega: omega.clone(), phi, psi });
        }
    }
    let (rep, kind) = pipeline(inst)?;
    let _ = writeln!(text, "Ψ: representing expectation ({kind} pipeline); geometric means taken for its measure ρ");
    let rho = PositiveFunctional::state(rep.rho.density().clone())?;
    Ok(JensenInstance { omega: rho, phi, psi: rep.psi })
}

pub fn jensen(inst: &Instance, trials: usize, seed: u64) -> CliResult<Output> {
    character(inst, "jensen")?;
    let mut text = String::new();
    let ji = jensen_setup(inst, &mut text)?;
    let s = jensen_measure_suite(&ji, trials, seed);
    let mut report = Report::new("jensen");
    report.seed = Some(seed);
    report.trials = Some(trials);
    report.record("jensen/failed_trials", s.failures.len() as f64, 0.0);
    if s.equality_checks > 0 {
        report.record("jensen/equality_gap", s.max_relative_gap, tol::tol(1e-6));
    }
    report.note(format!(
        "{} of {} trials passed; {} equality checks, {} boundary cases with singular Φ(a), {} near misses above 1e-9",
        s.passes, s.trials, s.equality_checks, s.boundary_cases, s.near_misses
    ));
    report.note(format!(
        "logmodular witness {}",
        if s.logmodular { "found: equality checked" } else { "not available: inequality only" }
    ));
    if !ji.omega.tracial_certificate(&inst.m).result {
        report.note(
            "the state is not a trace on M; equality can fail for such states even when every other hypothesis holds",
        );
    }
    for f in s.failures {
        report.failures.push(Failure {
            suite: "jensen".into(),
            trial: None,
            assertion: f,
            deviation: f64::NAN,
            instance: None,
        });
    }
    Ok(Output { text, report })
}
