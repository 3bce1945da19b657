//! Geometric means `Δ_ω(a) = exp ω(log|a|)`, the Newton square-root
//! iteration, tracial Hölder inequalities, Cholesky witnesses for
//! logmodularity, and the Jensen equality `Δ_ω(Φ(a)) = Δ_ω(a)`.

use nalgebra::DMatrix;
use rand::Rng;

use crate::algebra::{StarAlgebra, Subalgebra};
use crate::error::{Error, Result};
use crate::expectations::ConditionalExpectation;
use crate::hoffman_rossi::DCharacter;
use crate::matrix::{
    c64, herm_funcalc, hermitian_part, identity, max_abs, min_singular_value, op_norm, svd, ComplexMatrix, FunCalc,
    HermitianSpectrum,
};
use crate::random::{ginibre, random_element, rng, trial_seed};
use crate::states::PositiveFunctional;
use crate::tol;

/// Number of terms after the first in the power sequence.
pub const POWER_STEPS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct GeometricMeanReport {
    pub value: f64,
    /// `ω(|a|^{2^{-n}})^{2^n}` for `n = 0..=20`.
    pub power_sequence: Vec<f64>,
    /// `|s_20 − Δ| / Δ`. Of order `2^{-21} Var_ω(log|a|)`, so only small for
    /// moderate spread of singular values.
    pub limit_gap: f64,
}

/// Eigenvalues of `a*a` and the weights `ω` puts on its eigenvectors.
fn weighted_spectrum(omega: &PositiveFunctional, a: &ComplexMatrix) -> (Vec<f64>, Vec<f64>) {
    let spec = HermitianSpectrum::of_hermitian_part(&(a.adjoint() * a));
    let v = &spec.eigenvectors;
    let rotated = v.adjoint() * omega.density() * v;
    let weights = (0..v.ncols()).map(|i| rotated[(i, i)].re.max(0.0)).collect();
    (spec.eigenvalues.iter().copied().collect(), weights)
}

/// `ω(|a|^t)` for `t > 0`, computed as `W + Σ w_i expm1((t/2) ln λ_i)` so
/// that it stays accurate as `t → 0`. Returns its `ln_1p` argument.
fn power_mean_offset(lams: &[f64], w: &[f64], t: f64) -> f64 {
    let total: f64 = w.iter().sum();
    (total - 1.0) + lams.iter().zip(w).map(|(l, wi)| wi * (0.5 * t * l.ln()).exp_m1()).sum::<f64>()
}

pub fn geometric_mean(omega: &PositiveFunctional, a: &ComplexMatrix) -> Result<GeometricMeanReport> {
    if !omega.is_state() {
        return Err(Error::NotAState(omega.density().trace().re));
    }
    let smin = min_singular_value(a);
    if !(smin > tol::tol(tol::PD_REL) * op_norm(a)) {
        return Err(Error::NotInvertible(smin));
    }
    let (lams, w) = weighted_spectrum(omega, a);
    let log_mean: f64 = lams.iter().zip(&w).map(|(l, wi)| 0.5 * wi * l.ln()).sum();
    let value = log_mean.exp();

    let mut seq = Vec::with_capacity(POWER_STEPS + 1);
    for n in 0..=POWER_STEPS {
        let t = 0.5f64.powi(n as i32);
        let s = ((1.0 / t) * power_mean_offset(&lams, &w, t).ln_1p()).exp();
        if let Some(&prev) = seq.last() {
            let prev: f64 = prev;
            if s > prev + tol::tol(1e-9) * prev.max(1.0) {
                return Err(Error::invariant("power sequence decreasing", format!("term {n}: {s:.15e} > {prev:.15e}")));
            }
        }
        seq.push(s);
    }
    let limit_gap = (seq[POWER_STEPS] - value).abs() / value;
    Ok(GeometricMeanReport { value, power_sequence: seq, limit_gap })
}

/// `Δ_ω(a)`, or `0` when `a` is singular.
pub fn geometric_mean_or_zero(omega: &PositiveFunctional, a: &ComplexMatrix) -> Result<(f64, bool)> {
    match geometric_mean(omega, a) {
        Ok(r) => Ok((r.value, false)),
        Err(Error::NotInvertible(_)) => Ok((0.0, true)),
        Err(e) => Err(e),
    }
}

const SQRT_MAX_STEPS: usize = 100;

/// Newton iterates `x₁ = a`, `x_{n+1} = (x_n + a x_n⁻¹)/2` converging to `a^{1/2}`.
pub fn sqrt_iteration(a: &ComplexMatrix) -> Result<Vec<ComplexMatrix>> {
    let spec = HermitianSpectrum::of(a)?;
    if !spec.is_positive_definite() {
        return Err(Error::NotPositiveDefinite { min: spec.min(), threshold: spec.pd_threshold() });
    }
    let a = hermitian_part(a);
    let scale = op_norm(&a);
    let n = a.nrows();
    let mut seq = vec![a.clone()];
    for step in 1..=SQRT_MAX_STEPS {
        let x = seq.last().expect("nonempty");
        let chol = x.clone().cholesky().ok_or(Error::NotPositiveDefinite { min: 0.0, threshold: 0.0 })?;
        let inv = chol.solve(&identity(n));
        let next = hermitian_part(&((x + &a * inv) * c64(0.5, 0.0)));
        let delta = (&next - x).norm();
        if step >= 2 {
            let drop = HermitianSpectrum::of_hermitian_part(&(x - &next)).min();
            if drop < -tol::tol(1e-10) * scale.max(1.0) {
                return Err(Error::invariant("Loewner decreasing", format!("step {step}: {drop:.3e}")));
            }
        }
        seq.push(next);
        if delta <= 1e-12 * scale {
            let root = herm_funcalc(&a, FunCalc::Sqrt)?;
            let last = seq.last().expect("nonempty");
            let gap = max_abs(&(last - &root)) / max_abs(&root);
            if gap > tol::tol(1e-9) {
                return Err(Error::InconsistencyDetected(format!("Newton limit differs from a^(1/2) by {gap:.3e}")));
            }
            return Ok(seq);
        }
    }
    Err(Error::NotConverged(SQRT_MAX_STEPS))
}

/// An exponent in `(0, ∞]`.
pub type Exponent = f64;

/// `ω(|x|^p)^{1/p}`, or the operator norm for `p = ∞`.
pub fn tracial_norm(omega: &PositiveFunctional, x: &ComplexMatrix, p: Exponent) -> f64 {
    if p.is_infinite() {
        return op_norm(x);
    }
    omega_abs_power(omega, x, p).powf(1.0 / p)
}

/// `ω(|x|^p)` for finite `p > 0`.
pub fn omega_abs_power(omega: &PositiveFunctional, x: &ComplexMatrix, p: f64) -> f64 {
    let spec = HermitianSpectrum::of_hermitian_part(&(x.adjoint() * x));
    let y = spec.apply(|l| c64(l.max(0.0).powf(p / 2.0), 0.0));
    omega.eval(&y).re
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// Largest relative `|ω(|x|^s) − ω(|x*|^s)|` over `x ∈ {a, b}` and the finite exponents.
    pub symmetry_deviation: f64,
}

/// `‖ab‖_p ≤ ‖a‖_q ‖b‖_r` for `1/p = 1/q + 1/r` under a tracial state, `p < 1` allowed.
pub fn holder_tracial(
    omega: &PositiveFunctional,
    m: &StarAlgebra,
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    p: Exponent,
    q: Exponent,
    r: Exponent,
) -> Result<HolderReport> {
    let cert = omega.tracial_certificate(m);
    if !cert.result {
        return Err(Error::NotTracial(cert.max_violation));
    }
    for (name, e) in [("p", p), ("q", q), ("r", r)] {
        if !(e > 0.0) {
            return Err(Error::InvalidExponents(format!("{name} = {e} is not positive")));
        }
    }
    let inv = |e: f64| if e.is_infinite() { 0.0 } else { 1.0 / e };
    if (inv(p) - inv(q) - inv(r)).abs() > 1e-12 * inv(p).max(1.0) {
        return Err(Error::InvalidExponents(format!("1/{p} ≠ 1/{q} + 1/{r}")));
    }
    let lhs = tracial_norm(omega, &(a * b), p);
    let rhs = tracial_norm(omega, a, q) * tracial_norm(omega, b, r);
    let holds = lhs <= rhs + tol::tol(1e-9) * rhs.max(1.0);

    let mut symmetry_deviation: f64 = 0.0;
    for x in [a, b] {
        for s in [p, q, r] {
            if s.is_finite() {
                let u = omega_abs_power(omega, x, s);
                let v = omega_abs_power(omega, &x.adjoint(), s);
                symmetry_deviation = symmetry_deviation.max((u - v).abs() / u.abs().max(1.0));
            }
        }
    }
    if symmetry_deviation > tol::tol(1e-9) {
        return Err(Error::invariant("ω(|x|^p) = ω(|x*|^p)", format!("{symmetry_deviation:.3e}")));
    }
    Ok(HolderReport { lhs, rhs, holds, symmetry_deviation })
}

/// Invertible `a ∈ A` with `a*a = b`, for block-upper-triangular `A` and `b ⪰ εI`.
///
/// In the frame where `A` is block upper triangular with contiguous blocks,
/// the upper Cholesky factor of `b` lies in `A`.
pub fn logmodular_witness(a_alg: &Subalgebra, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let tri = a_alg.triangular().ok_or(Error::NotTriangularType)?;
    let spec = HermitianSpectrum::of(b)?;
    if !spec.is_positive_definite() {
        return Err(Error::NotBoundedBelow(spec.min()));
    }
    let n = b.nrows();
    let order: Vec<usize> = tri.blocks.concat();
    let mut perm = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        perm[(i, k)] = c64(1.0, 0.0);
    }
    let frame = &tri.unitary * &perm;
    let local = hermitian_part(&(frame.adjoint() * b * &frame));
    let lower = local.cholesky().ok_or(Error::NotBoundedBelow(spec.min()))?.unpack();
    let a = &frame * lower.adjoint() * frame.adjoint();

    let scale = op_norm(b);
    let gap = max_abs(&(a.adjoint() * &a - b)) / scale;
    if gap > tol::tol(1e-9) {
        return Err(Error::InconsistencyDetected(format!("a*a differs from b by {gap:.3e}")));
    }
    if !a_alg.contains(&a) {
        return Err(Error::InconsistencyDetected("Cholesky factor left the algebra".into()));
    }
    Ok(a)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JensenReport {
    pub delta_a: f64,
    pub delta_phi: f64,
    /// `Φ(a)` is singular and `Δ_ω(Φ(a))` was taken as `0`.
    pub phi_singular: bool,
    pub inequality_holds: bool,
    pub equality_checked: bool,
    pub equality_holds: bool,
    /// `|Δ_ω(a) − Δ_ω(Φ(a))| / Δ_ω(a)`.
    pub relative_gap: f64,
}

impl JensenReport {
    pub const INEQUALITY_SLACK: f64 = 1e-7;
    pub const EQUALITY_TOL: f64 = 1e-6;

    pub fn passed(&self) -> bool {
        self.inequality_holds && (!self.equality_checked || self.equality_holds)
    }
}

/// Compare `Δ_ω(a)` and `Δ_ω(Φ(a))` for `ω` tracial on `D` and preserved by
/// an extension `Ψ` of `Φ`. Equality is checked only when `logmodular` is set
/// and `Φ(a)` is invertible; otherwise only `Δ_ω(Φ(a)) ≤ Δ_ω(a)`.
pub fn jensen_check(
    omega: &PositiveFunctional,
    phi: &DCharacter,
    psi: &ConditionalExpectation,
    a: &ComplexMatrix,
    logmodular: bool,
) -> Result<JensenReport> {
    let defect = psi.preservation_defect(omega)?;
    if defect > tol::tol(1e-8) {
        return Err(Error::invariant("ω∘Ψ = ω", format!("{defect:.3e}")));
    }
    let cert = omega.tracial_certificate(phi.range());
    if !cert.result {
        return Err(Error::NotTracial(cert.max_violation));
    }
    if !phi.domain().contains(a) {
        return Err(Error::invariant("a ∈ A", "element is not in the domain of Φ"));
    }
    let delta_a = geometric_mean(omega, a)?.value;
    let (delta_phi, phi_singular) = geometric_mean_or_zero(omega, &phi.apply(a))?;
    let relative_gap = (delta_a - delta_phi).abs() / delta_a;
    let inequality_holds = delta_phi <= delta_a * (1.0 + tol::tol(JensenReport::INEQUALITY_SLACK));
    let equality_checked = logmodular && !phi_singular;
    let equality_holds = equality_checked && relative_gap <= tol::tol(JensenReport::EQUALITY_TOL);
    Ok(JensenReport {
        delta_a,
        delta_phi,
        phi_singular,
        inequality_holds,
        equality_checked,
        equality_holds,
        relative_gap,
    })
}

/// Everything [`jensen_measure_suite`] needs about an instance.
#[derive(Debug, Clone)]
pub struct JensenInstance {
    pub omega: PositiveFunctional,
    pub phi: DCharacter,
    pub psi: ConditionalExpectation,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct JensenSummary {
    pub trials: usize,
    pub passes: usize,
    pub equality_checks: usize,
    pub boundary_cases: usize,
    /// Largest relative gap among equality checks.
    pub max_relative_gap: f64,
    /// Equality checks whose gap exceeded `1e-9` yet passed the tolerance.
    pub near_misses: usize,
    pub logmodular: bool,
    pub failures: Vec<String>,
}

/// Random invertible elements of `A` from a seeded stream, plus one boundary
/// case with singular `Φ(a)` in every ten trials.
pub fn jensen_measure_suite(inst: &JensenInstance, trials: usize, seed: u64) -> JensenSummary {
    let a_alg = inst.phi.domain();
    let n = a_alg.n();
    let mut summary = JensenSummary { trials, ..Default::default() };
    let mut r = rng(seed);
    let b = {
        let x = ginibre(&mut r, n, n);
        x.adjoint() * &x + identity(n)
    };
    summary.logmodular = logmodular_witness(a_alg, &b).is_ok();
    for t in 0..trials {
        let mut tr = rng(trial_seed(seed, t as u64));
        let boundary = t % 10 == 9;
        let a = if boundary { singular_phi_element(&mut tr, inst) } else { invertible_element(&mut tr, inst) };
        let outcome = if boundary {
            boundary_check(inst, &a)
        } else {
            jensen_check(&inst.omega, &inst.phi, &inst.psi, &a, summary.logmodular)
        };
        match outcome {
            Ok(rep) => {
                if rep.phi_singular {
                    summary.boundary_cases += 1;
                }
                if rep.equality_checked {
                    summary.equality_checks += 1;
                    summary.max_relative_gap = summary.max_relative_gap.max(rep.relative_gap);
                    if rep.relative_gap > 1e-9 && rep.equality_holds {
                        summary.near_misses += 1;
                    }
                }
                if rep.passed() {
                    summary.passes += 1;
                } else {
                    summary.failures.push(format!("trial {t}: {rep:?}"));
                }
            }
            Err(e) => summary.failures.push(format!("trial {t}: {e}")),
        }
    }
    summary
}

fn invertible_element(rng: &mut impl Rng, inst: &JensenInstance) -> ComplexMatrix {
    let space = inst.phi.domain().space();
    loop {
        let a = random_element(rng, space);
        let phi_a = inst.phi.apply(&a);
        if min_singular_value(&a) > 1e-3 * op_norm(&a) && min_singular_value(&phi_a) > 1e-3 * op_norm(&phi_a) {
            return a;
        }
    }
}

/// `a ∈ A` whose image `Φ(a)` has a kernel, obtained by subtracting from
/// `Φ(a)`'s smallest singular direction.
fn singular_phi_element(rng: &mut impl Rng, inst: &JensenInstance) -> ComplexMatrix {
    let a = random_element(rng, inst.phi.domain().space());
    let d = inst.phi.apply(&a);
    let svd = svd(&d, true, true);
    let i = svd.singular_values.imin();
    let u = svd.u.expect("u requested").column(i).into_owned();
    let v = svd.v_t.expect("v_t requested").row(i).into_owned();
    let cut = (u * v) * c64(svd.singular_values[i], 0.0);
    // A singular pair of an element of D stays inside one block of D; the
    // projection only removes rounding.
    let cut = inst.phi.range().project(&cut).unwrap_or(cut);
    a - cut
}

fn boundary_check(inst: &JensenInstance, a: &ComplexMatrix) -> Result<JensenReport> {
    let (delta_a, _) = geometric_mean_or_zero(&inst.omega, a)?;
    let (delta_phi, phi_singular) = geometric_mean_or_zero(&inst.omega, &inst.phi.apply(a))?;
    Ok(JensenReport {
        delta_a,
        delta_phi,
        phi_singular,
        inequality_holds: delta_phi <= delta_a * (1.0 + tol::tol(JensenReport::INEQUALITY_SLACK)),
        equality_checked: false,
        equality_holds: false,
        relative_gap: if delta_a > 0.0 { (delta_a - delta_phi).abs() / delta_a } else { 0.0 },
    })
}
