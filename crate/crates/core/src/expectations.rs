//! Conditional expectations: state-preserving constructions, the
//! density/expectation/state correspondence, averaging onto the relative
//! commutant, supports, and expectations onto the ideal cut out by a support.

use nalgebra::DMatrix;

use crate::algebra::{commutant, StarAlgebra};
use crate::error::{Error, Result};
use crate::matrix::{
    herm_funcalc, hermitian_part, identity, left_mul_columns, max_abs, op_norm, orthonormalize, psd_support,
    pseudo_inverse, right_mul_columns, vec_of, ComplexMatrix, FunCalc, HermitianSpectrum, LinearMap, OperatorSubspace,
};
use crate::random::{random_element, rng};
use crate::states::{
    is_d_central, locally_central_check, modular_generator, modular_group, modular_invariance_check, pt_radon_nikodym,
    support_commutation_defect, trace_norm, PositiveFunctional,
};
use crate::tol;

/// Seed for the positivity probes used by [`ConditionalExpectation::check`].
const PROBE_SEED: u64 = 0x5eed;
const PROBES: usize = 8;

/// A unital positive idempotent bimodule map of `domain` onto `range`.
///
/// `range.unit()` is `I` for an expectation onto `D` and a central projection
/// `z` for an expectation onto the ideal `Dz`. `module` is the algebra the map
/// is a bimodule over (`D` in both cases).
#[derive(Debug, Clone)]
pub struct ConditionalExpectation {
    map: LinearMap,
    domain: StarAlgebra,
    range: StarAlgebra,
    module: StarAlgebra,
    support: ComplexMatrix,
}

/// Largest deviation found for each defining property.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExpectationDeviations {
    pub unit: f64,
    pub idempotence: f64,
    pub positivity: f64,
    pub bimodule: f64,
    pub range: f64,
}

impl ExpectationDeviations {
    pub const UNIT_TOL: f64 = 1e-9;
    pub const IDEMPOTENCE_TOL: f64 = 1e-9;
    pub const POSITIVITY_TOL: f64 = 1e-8;
    pub const BIMODULE_TOL: f64 = 1e-8;
    pub const RANGE_TOL: f64 = 1e-8;

    /// `(name, deviation, tolerance)` for each property.
    pub fn entries(&self) -> [(&'static str, f64, f64); 5] {
        [
            ("unital", self.unit, tol::tol(Self::UNIT_TOL)),
            ("idempotent", self.idempotence, tol::tol(Self::IDEMPOTENCE_TOL)),
            ("positive", self.positivity, tol::tol(Self::POSITIVITY_TOL)),
            ("bimodule", self.bimodule, tol::tol(Self::BIMODULE_TOL)),
            ("range", self.range, tol::tol(Self::RANGE_TOL)),
        ]
    }

    pub fn first_violation(&self) -> Option<(&'static str, f64, f64)> {
        self.entries().into_iter().find(|(_, d, t)| !(d <= t))
    }
}

impl ConditionalExpectation {
    /// Wrap and validate a map. The support is computed from the map.
    pub fn new(map: LinearMap, domain: StarAlgebra, range: StarAlgebra, module: StarAlgebra) -> Result<Self> {
        let support = support_of_map(&map, &domain, true)?;
        let e = ConditionalExpectation { map, domain, range, module, support };
        e.validate()?;
        Ok(e)
    }

    pub fn map(&self) -> &LinearMap {
        &self.map
    }

    pub fn domain(&self) -> &StarAlgebra {
        &self.domain
    }

    pub fn range(&self) -> &StarAlgebra {
        &self.range
    }

    pub fn module(&self) -> &StarAlgebra {
        &self.module
    }

    pub fn support(&self) -> &ComplexMatrix {
        &self.support
    }

    pub fn n(&self) -> usize {
        self.map.n()
    }

    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        self.map.apply(x)
    }

    /// Operator norm of `E − F` restricted to the domain, Hilbert–Schmidt to Hilbert–Schmidt.
    pub fn distance(&self, other: &ConditionalExpectation) -> f64 {
        self.map.sub(&other.map).restricted_norm(self.domain.space())
    }

    pub fn check(&self) -> ExpectationDeviations {
        let q = self.domain.space().columns();
        let l = self.map.matrix();
        let lq = l * q;
        let scale = lq.norm().max(1.0);

        let unit = max_abs(&(self.apply(self.domain.unit()) - self.range.unit()));
        let idempotence = (l * &lq - &lq).norm() / scale;
        let rq = self.range.space().columns();
        let range = (&lq - rq * rq.ad_mul(&lq)).norm() / scale;

        // E(d x) = d E(x) and E(x d) = E(x) d for basis d of the module and
        // all x in the domain basis, checked in matrix form.
        let mut bimodule: f64 = 0.0;
        let mut module_elems = self.module.basis();
        module_elems.push(identity(self.n()));
        for d in &module_elems {
            let s = op_norm(d).max(1.0) * scale;
            let dl = (l * left_mul_columns(d, q) - left_mul_columns(d, &lq)).norm() / s;
            let dr = (l * right_mul_columns(q, d) - right_mul_columns(&lq, d)).norm() / s;
            bimodule = bimodule.max(dl).max(dr);
        }

        let mut r = rng(PROBE_SEED);
        let mut positivity: f64 = 0.0;
        for _ in 0..PROBES {
            let x = random_element(&mut r, self.domain.space());
            let y = self.apply(&(x.adjoint() * &x));
            let min = HermitianSpectrum::of_hermitian_part(&y).min();
            let nx = op_norm(&x).powi(2).max(1e-300);
            positivity = positivity.max((-min / nx).max(0.0));
        }
        // Level-2 spot check: (id ⊗ E)(X*X) ⪰ 0 for X ∈ M₂(M).
        let n = self.n();
        let blocks: Vec<_> = (0..4).map(|_| random_element(&mut r, self.domain.space())).collect();
        let mut big = DMatrix::zeros(2 * n, 2 * n);
        for bi in 0..2 {
            for bj in 0..2 {
                big.view_mut((bi * n, bj * n), (n, n)).copy_from(&blocks[2 * bi + bj]);
            }
        }
        let xx = big.adjoint() * &big;
        let mut img = DMatrix::zeros(2 * n, 2 * n);
        for bi in 0..2 {
            for bj in 0..2 {
                let blk = xx.view((bi * n, bj * n), (n, n)).into_owned();
                img.view_mut((bi * n, bj * n), (n, n)).copy_from(&self.apply(&blk));
            }
        }
        let min2 = HermitianSpectrum::of_hermitian_part(&img).min();
        positivity = positivity.max((-min2 / op_norm(&big).powi(2).max(1e-300)).max(0.0));

        ExpectationDeviations { unit, idempotence, positivity, bimodule, range }
    }

    pub fn validate(&self) -> Result<()> {
        match self.check().first_violation() {
            Some((name, dev, t)) => Err(Error::invariant(name, format!("deviation {dev:.3e} exceeds {t:.1e}"))),
            None => Ok(()),
        }
    }

    /// `sup |ω(E(x)) − ω(x)|` over the unit ball of the domain.
    pub fn preservation_defect(&self, omega: &PositiveFunctional) -> Result<f64> {
        let pulled = omega.pullback(&self.map)?;
        functional_distance_on(&pulled, omega, &self.domain)
    }
}

/// `sup_{x ∈ M, ‖x‖ ≤ 1} |φ(x) − ψ(x)|`, the trace norm of `P_M(ρ_φ − ρ_ψ)`.
pub fn functional_distance_on(phi: &PositiveFunctional, psi: &PositiveFunctional, m: &StarAlgebra) -> Result<f64> {
    Ok(trace_norm(&m.project(&(phi.density() - psi.density()))?))
}

/// Row `i` is the functional `x ↦ ω(b_i* x)` in vectorized coordinates.
fn pairing_rows(rho: &ComplexMatrix, space: &OperatorSubspace) -> ComplexMatrix {
    let n = space.ambient_dim();
    let k = space.dim();
    let mut rows = DMatrix::zeros(k, n * n);
    for i in 0..k {
        let f = (rho * space.basis_element(i).adjoint()).transpose();
        rows.set_row(i, &vec_of(&f).transpose());
    }
    rows
}

/// `x ↦ d` with `ω(b* d) = ω(b* P_M x)` for every basis element `b` of `target`.
/// Fails with `GramSingular` when `ω` is not faithful on `target`.
pub fn gram_map(omega: &PositiveFunctional, target: &OperatorSubspace, m: &StarAlgebra) -> Result<LinearMap> {
    let g = omega.gram(target);
    let spec = HermitianSpectrum::of_hermitian_part(&g);
    if !(spec.min() > tol::tol(tol::PD_REL) * spec.max()) {
        return Err(Error::GramSingular);
    }
    let rows = pairing_rows(omega.density(), target);
    let chol = g.cholesky().ok_or(Error::GramSingular)?;
    let coeffs = chol.solve(&rows);
    let l = target.columns() * coeffs;
    LinearMap::from_matrix(target.ambient_dim(), l).map(|l| l.compose(&m.space().projector_map()))
}

/// Minimum-norm solution of the possibly singular Gram system, as a map.
fn pinv_gram_map(omega: &PositiveFunctional, target: &OperatorSubspace, m: &StarAlgebra) -> Result<LinearMap> {
    let g = omega.gram(target);
    let rows = pairing_rows(omega.density(), target);
    let coeffs = pseudo_inverse(&g, tol::tol(tol::RANK_REL)) * rows;
    let l = target.columns() * coeffs;
    LinearMap::from_matrix(target.ambient_dim(), l).map(|l| l.compose(&m.space().projector_map()))
}

fn restricted_gap(a: &LinearMap, b: &LinearMap, m: &StarAlgebra) -> f64 {
    a.sub(b).restricted_norm(m.space())
}

/// The `ω`-preserving expectation of `M` onto `D` when `D` lies in the
/// centralizer of `ω` and `ω` is faithful on `D`.
///
/// When `ω` is faithful on `M` this is the `ω`-orthogonal projection onto `D`.
/// Otherwise it is built on the corner `zMz`, `z` the support of `ω|M`, and
/// lifted back through `d ↦ dz`; the lift is cross-checked against the
/// projection computed directly on `D`.
pub fn preserving_expectation(
    omega: &PositiveFunctional,
    d: &StarAlgebra,
    m: &StarAlgebra,
) -> Result<ConditionalExpectation> {
    if !omega.is_faithful_on(d) {
        return Err(Error::GramSingular);
    }
    let c = is_d_central(omega, d, m)?;
    if !c.central {
        return Err(Error::NotDCentral(c.violation));
    }
    let direct = gram_map(omega, d.space(), m)?;
    let map = if omega.is_faithful_on(m) {
        direct
    } else {
        let rho_m = m.project(omega.density())?;
        let z = psd_support(&hermitian_part(&rho_m))?;
        let dz: Vec<_> = d.basis().iter().map(|b| b * &z).collect();
        let dz_space = orthonormalize(&dz)?;
        let compress = LinearMap::sandwich(&z, &z);
        let e0 = gram_map(omega, &dz_space, m)?.compose(&compress);
        // ι_D: the inverse of d ↦ dz on D.
        let n = m.n();
        let mut images = DMatrix::zeros(n * n, d.dim());
        for (j, b) in d.basis().iter().enumerate() {
            images.set_column(j, &vec_of(&(b * &z)));
        }
        let lift = d.space().columns() * pseudo_inverse(&images, tol::tol(tol::RANK_REL));
        let lifted = LinearMap::from_matrix(n, lift * e0.matrix())?;
        let gap = restricted_gap(&lifted, &direct, m);
        if gap > tol::tol(1e-8) * direct.restricted_norm(m.space()).max(1.0) {
            return Err(Error::InconsistencyDetected(format!(
                "compressed and direct constructions differ by {gap:.3e}"
            )));
        }
        lifted
    };
    let e = ConditionalExpectation::new(map, m.clone(), d.clone(), d.clone())?;
    let defect = e.preservation_defect(omega)?;
    if defect > tol::tol(1e-9) {
        return Err(Error::invariant("state preserved", format!("ω∘E differs from ω by {defect:.3e}")));
    }
    Ok(e)
}

/// The `ω`-preserving expectation onto a `σ^ω`-invariant `D`, for `ω` faithful on `M`.
pub fn modular_expectation(
    omega: &PositiveFunctional,
    d: &StarAlgebra,
    m: &StarAlgebra,
) -> Result<ConditionalExpectation> {
    if !omega.is_faithful_on(m) {
        return Err(Error::NotFaithful);
    }
    let restricted = omega.restrict_to(m)?;
    if !modular_invariance_check(&restricted, d)? {
        return Err(Error::NotModularInvariant);
    }
    let map = gram_map(omega, d.space(), m)?;
    let e = ConditionalExpectation::new(map, m.clone(), d.clone(), d.clone())?;
    let defect = e.preservation_defect(omega)?;
    if defect > tol::tol(1e-9) {
        return Err(Error::invariant("state preserved", format!("ω∘E differs from ω by {defect:.3e}")));
    }
    Ok(e)
}

/// The `ν`-preserving expectation onto `D`: the centralizer construction when
/// it applies, the modular one otherwise.
fn reference_expectation(nu: &PositiveFunctional, d: &StarAlgebra, m: &StarAlgebra) -> Result<ConditionalExpectation> {
    match preserving_expectation(nu, d, m) {
        Err(Error::NotDCentral(_)) => modular_expectation(nu, d, m),
        other => other,
    }
}

/// `E(x) = E_D(h^{1/2} x h^{1/2})` for a positive `h ∈ D′ ∩ M` commuting with
/// the density of `ν` and normalized by `E_D(h) = I`.
pub fn expectation_from_density(
    h: &ComplexMatrix,
    d: &StarAlgebra,
    m: &StarAlgebra,
    nu: &PositiveFunctional,
) -> Result<ConditionalExpectation> {
    let h = hermitian_part(h);
    let root = herm_funcalc(&h, FunCalc::Sqrt)?;
    if !m.contains(&h) {
        return Err(Error::invariant("density in M", "h is not an element of M"));
    }
    let scale = op_norm(&h).max(1e-300);
    let mut worst: f64 = 0.0;
    for b in d.basis() {
        worst = worst.max(op_norm(&(&h * &b - &b * &h)));
    }
    let rho = m.project(nu.density())?;
    worst = worst.max(op_norm(&(&h * &rho - &rho * &h)) / op_norm(&rho).max(1e-300));
    if worst > tol::tol(1e-9) * scale {
        return Err(Error::DensityDoesNotCommute(worst));
    }
    let ed = reference_expectation(nu, d, m)?;
    let norm_dev = max_abs(&(ed.apply(&h) - d.unit()));
    if norm_dev > tol::tol(1e-8) {
        return Err(Error::NotNormalized(norm_dev));
    }
    let map = ed.map().compose(&LinearMap::sandwich(&root, &root)).compose(&m.space().projector_map());
    let e = ConditionalExpectation::new(map, m.clone(), d.clone(), d.clone())?;
    let nu_h = PositiveFunctional::new(&root * nu.density() * &root)?;
    let pulled = nu.pullback(e.map())?;
    let gap = functional_distance_on(&pulled, &nu_h, m)?;
    if gap > tol::tol(1e-9) {
        return Err(Error::InconsistencyDetected(format!("ν∘E and ν_h differ by {gap:.3e}")));
    }
    Ok(e)
}

/// `h = d(ν∘E)/dν` on `M`.
pub fn expectation_to_density(e: &ConditionalExpectation, nu: &PositiveFunctional) -> Result<ComplexMatrix> {
    let m = e.domain();
    let psi = PositiveFunctional::new(m.project(nu.pullback(e.map())?.density())?)?;
    let base = nu.restrict_to(m)?;
    let h = pt_radon_nikodym(&psi, &base)?;
    for b in e.module().basis() {
        let c = op_norm(&(&h * &b - &b * &h));
        if c > tol::tol(1e-8) * op_norm(&h).max(1.0) {
            return Err(Error::DoesNotCommute(c));
        }
    }
    Ok(h)
}

/// Whether `E` commutes with the modular group of `ν`, decided three ways:
/// `ν∘E∘σ_t = ν∘E`, `E∘σ_t = σ_t∘E` at sampled `t`, and `[ad log ρ, E] = 0`.
pub fn commutes_with_modular(e: &ConditionalExpectation, nu: &PositiveFunctional) -> Result<bool> {
    let m = e.domain();
    let base = nu.restrict_to(m)?;
    if !base.is_faithful() {
        return Err(Error::NotFaithful);
    }
    let pulled = nu.pullback(e.map())?;
    let lnorm = e.map().restricted_norm(m.space()).max(1.0);
    let mut by_state = true;
    let mut by_map = true;
    for t in [0.1, 1.0, std::f64::consts::SQRT_2] {
        let s = modular_group(&base, t)?;
        let shifted = pulled.pullback(&s)?;
        by_state &= functional_distance_on(&shifted, &pulled, m)? <= tol::tol(1e-9);
        let gap = restricted_gap(&e.map().compose(&s), &s.compose(e.map()), m);
        by_map &= gap <= tol::tol(1e-8) * lnorm;
    }
    let g = modular_generator(&base)?;
    let gap = restricted_gap(&e.map().compose(&g), &g.compose(e.map()), m);
    let by_generator = gap <= tol::tol(1e-8) * lnorm * g.norm().max(1.0);
    if by_state != by_map || by_map != by_generator {
        return Err(Error::InconsistencyDetected(format!(
            "modular commutation: state test {by_state}, map test {by_map}, generator test {by_generator}"
        )));
    }
    Ok(by_map)
}

/// `ρ = ψ ∘ E_{D′∩M}` for a state `ψ` extending `ω|D`, where `D` lies in the
/// centralizer of the faithful `ω`. The result extends `ω|D`, has `D` in its
/// centralizer and commutes with `ω` whenever `ψ` does.
pub fn average_to_central(
    psi: &PositiveFunctional,
    omega: &PositiveFunctional,
    d: &StarAlgebra,
    m: &StarAlgebra,
) -> Result<PositiveFunctional> {
    let c = is_d_central(omega, d, m)?;
    if !c.central {
        return Err(Error::NotCentral(c.violation));
    }
    let ext = extension_defect(psi, omega, d);
    if ext > tol::tol(1e-8) {
        return Err(Error::NotAnExtension(ext));
    }
    let rel_commutant = commutant(d, m)?;
    let avg = modular_expectation(omega, &rel_commutant, m)?;
    let rho = PositiveFunctional::new(m.project(psi.pullback(avg.map())?.density())?)?;

    let ext = extension_defect(&rho, omega, d);
    if ext > tol::tol(1e-9) {
        return Err(Error::invariant("extends ω on D", format!("{ext:.3e}")));
    }
    let cen = is_d_central(&rho, d, m)?;
    if cen.commutator_norm > tol::tol(1e-9) {
        return Err(Error::invariant("D-central", format!("commutator norm {:.3e}", cen.commutator_norm)));
    }
    let rw = m.project(omega.density())?;
    let rp = m.project(psi.density())?;
    if op_norm(&(&rp * &rw - &rw * &rp)) <= tol::tol(1e-10) {
        let gap = op_norm(&(rho.density() * &rw - &rw * rho.density()));
        if gap > tol::tol(1e-9) {
            return Err(Error::invariant("commutes with ω", format!("{gap:.3e}")));
        }
    }
    Ok(rho)
}

/// Largest `|ψ(d) − ω(d)|` over the basis of `D`.
pub fn extension_defect(psi: &PositiveFunctional, omega: &PositiveFunctional, d: &StarAlgebra) -> f64 {
    d.basis().iter().map(|b| (psi.eval(b) - omega.eval(b)).norm()).fold(0.0, f64::max)
}

/// Support of a positive map on `domain`: the complement of the largest
/// projection it annihilates, read off from `Tr(E(y)) = Tr(Q y)`.
/// With `onto_subalgebra` the support must also commute with the range.
pub fn support_of_map(map: &LinearMap, domain: &StarAlgebra, onto_subalgebra: bool) -> Result<ComplexMatrix> {
    let n = map.n();
    let q = hermitian_part(&domain.project(&map.adjoint().apply(&identity(n)).adjoint())?);
    let spec = HermitianSpectrum::of_hermitian_part(&q);
    let z = spec.projection_above(tol::tol(tol::PD_REL) * spec.spectral_norm().max(f64::MIN_POSITIVE));
    let lnorm = map.restricted_norm(domain.space()).max(1.0);
    let cut = LinearMap::sandwich(&z, &z);
    let gap = restricted_gap(map, &map.compose(&cut), domain);
    if gap > tol::tol(1e-8) * lnorm {
        return Err(Error::invariant("E(x) = E(zxz)", format!("{gap:.3e}")));
    }
    if onto_subalgebra {
        let gap = restricted_gap(&LinearMap::left(&z).compose(map), &LinearMap::right(&z).compose(map), domain);
        if gap > tol::tol(1e-8) * lnorm {
            return Err(Error::invariant("zE(x) = E(x)z", format!("{gap:.3e}")));
        }
    }
    Ok(z)
}

/// Expectation of `M` onto `Dz`, `z` the support of `ω|D`, with support at
/// most `z` and preserving `ω`. Built from the corner `zMz` and, separately,
/// from the singular Gram system on `D`; the two must agree.
pub fn support_ideal_expectation(
    omega: &PositiveFunctional,
    d: &StarAlgebra,
    m: &StarAlgebra,
) -> Result<ConditionalExpectation> {
    if !omega.is_state() {
        return Err(Error::NotAState(omega.density().trace().re));
    }
    let c = is_d_central(omega, d, m)?;
    if !c.central {
        return Err(Error::NotDCentral(c.violation));
    }
    let z = psd_support(&hermitian_part(&d.project(omega.density())?))?;
    let zc = d.basis().iter().map(|b| op_norm(&(&z * b - b * &z))).fold(0.0, f64::max);
    if zc > tol::tol(1e-9) {
        return Err(Error::SupportNotCentral(zc));
    }
    let dz: Vec<_> = d.basis().iter().map(|b| b * &z).collect();
    let ideal = StarAlgebra::trusted(orthonormalize(&dz)?, z.clone());
    let corner = gram_map(omega, ideal.space(), m)?.compose(&LinearMap::sandwich(&z, &z));
    let via_gram = LinearMap::left(&z).compose(&pinv_gram_map(omega, d.space(), m)?);
    let gap = restricted_gap(&corner, &via_gram, m);
    if gap > tol::tol(1e-8) * corner.restricted_norm(m.space()).max(1.0) {
        return Err(Error::InconsistencyDetected(format!("ideal expectation routes differ by {gap:.3e}")));
    }
    let e = ConditionalExpectation::new(corner, m.clone(), ideal, d.clone())?;
    let zdev = max_abs(&(e.support() - e.support() * &z));
    if zdev > tol::tol(1e-9) {
        return Err(Error::invariant("support below z", format!("{zdev:.3e}")));
    }
    let defect = e.preservation_defect(omega)?;
    if defect > tol::tol(1e-9) {
        return Err(Error::invariant("state preserved", format!("{defect:.3e}")));
    }
    Ok(e)
}

/// Which expectation the diagnosis managed to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpectationKind {
    /// `ω`-preserving expectation onto `D`.
    Preserving,
    /// Expectation onto `Dz` for the support `z` of `ω|D`.
    SupportIdeal,
    None,
}

/// Equivalence table for a pair `(ω, D)` inside `M`.
#[derive(Debug, Clone)]
pub struct ExistenceDiagnosis {
    pub omega_faithful_on_d: bool,
    pub omega_faithful_on_m: bool,
    pub omega_tracial_on_d: bool,
    pub d_central: bool,
    pub centrality_violation: f64,
    pub locally_central: bool,
    pub support_commutes: bool,
    /// `σ^ω(D) = D`; only defined when `ω` is faithful on `M`.
    pub modular_invariant: Option<bool>,
    /// The Gram candidate is an `ω`-preserving conditional expectation.
    pub preserving_candidate_valid: bool,
    /// The candidate is valid and `ω|D` is tracial.
    pub tracial_expectation_constructed: bool,
    pub expectation: ExpectationKind,
    /// Why no expectation was produced, if none was.
    pub reason: Option<String>,
    pub inconsistencies: Vec<String>,
}

impl ExistenceDiagnosis {
    pub fn consistent(&self) -> bool {
        self.inconsistencies.is_empty()
    }
}

fn candidate_valid(
    map: LinearMap,
    omega: &PositiveFunctional,
    range: StarAlgebra,
    d: &StarAlgebra,
    m: &StarAlgebra,
) -> bool {
    let e = ConditionalExpectation { support: identity(m.n()), map, domain: m.clone(), range, module: d.clone() };
    e.check().first_violation().is_none() && e.preservation_defect(omega).is_ok_and(|x| x <= tol::tol(1e-9))
}

/// Report centrality, local centrality, support commutation, modular
/// invariance and whether an expectation can be built, and cross-check the
/// equivalences between them. Never fails; disagreements are listed.
pub fn existence_diagnosis(omega: &PositiveFunctional, d: &StarAlgebra, m: &StarAlgebra) -> ExistenceDiagnosis {
    let mut bad = Vec::new();
    let faithful_d = omega.is_faithful_on(d);
    let faithful_m = omega.is_faithful_on(m);
    let tracial_d = omega.tracial_certificate(d).result;
    let (d_central, violation) = match is_d_central(omega, d, m) {
        Ok(c) => (c.central, c.violation),
        Err(e) => {
            bad.push(e.to_string());
            (false, f64::NAN)
        }
    };
    let locally_central = locally_central_check(omega, d, m).unwrap_or_else(|e| {
        bad.push(e.to_string());
        false
    });
    let support_commutes = support_commutation_defect(omega, d, m).is_ok_and(|x| x <= tol::tol(1e-9));
    let modular_invariant = if faithful_m {
        match omega.restrict_to(m).and_then(|r| modular_invariance_check(&r, d)) {
            Ok(b) => Some(b),
            Err(e) => {
                bad.push(e.to_string());
                None
            }
        }
    } else {
        None
    };

    let candidate = if faithful_d {
        gram_map(omega, d.space(), m).map(|l| candidate_valid(l, omega, d.clone(), d, m)).unwrap_or(false)
    } else {
        support_candidate(omega, d, m)
    };
    let tracial_constructed = candidate && tracial_d;

    if faithful_d && d_central != tracial_constructed {
        bad.push(format!("centrality {d_central} but tracial expectation constructed {tracial_constructed}"));
    }
    if let Some(mi) = modular_invariant {
        if mi != candidate {
            bad.push(format!("modular invariance {mi} but preserving candidate valid {candidate}"));
        }
    }
    if !faithful_d && d_central && !candidate {
        bad.push("central but the support expectation is not valid".into());
    }

    let (expectation, reason) = if d_central && faithful_d {
        match preserving_expectation(omega, d, m) {
            Ok(_) => (ExpectationKind::Preserving, None),
            Err(e) => {
                bad.push(format!("central and faithful on D, yet construction failed: {e}"));
                (ExpectationKind::None, Some(e.to_string()))
            }
        }
    } else if d_central {
        match support_ideal_expectation(omega, d, m) {
            Ok(_) => (ExpectationKind::SupportIdeal, None),
            Err(e) => (ExpectationKind::None, Some(e.to_string())),
        }
    } else {
        (ExpectationKind::None, Some("D is not in the centralizer of ω".into()))
    };

    ExistenceDiagnosis {
        omega_faithful_on_d: faithful_d,
        omega_faithful_on_m: faithful_m,
        omega_tracial_on_d: tracial_d,
        d_central,
        centrality_violation: violation,
        locally_central,
        support_commutes,
        modular_invariant,
        preserving_candidate_valid: candidate,
        tracial_expectation_constructed: tracial_constructed,
        expectation,
        reason,
        inconsistencies: bad,
    }
}

fn support_candidate(omega: &PositiveFunctional, d: &StarAlgebra, m: &StarAlgebra) -> bool {
    let Ok(z) = d.project(omega.density()).and_then(|x| psd_support(&hermitian_part(&x))) else {
        return false;
    };
    let dz: Vec<_> = d.basis().iter().map(|b| b * &z).collect();
    let Ok(space) = orthonormalize(&dz) else {
        return false;
    };
    let ideal = StarAlgebra::trusted(space, z.clone());
    match pinv_gram_map(omega, d.space(), m) {
        Ok(l) => candidate_valid(LinearMap::left(&z).compose(&l), omega, ideal, d, m),
        Err(_) => false,
    }
}
