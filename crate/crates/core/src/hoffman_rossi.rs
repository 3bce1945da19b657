//! `D`-characters and representing expectations: given a unital homomorphism
//! `Φ: A → D` fixing `D`, build a conditional expectation `Ψ: M → D`
//! extending it together with the state `ρ` it preserves.

use nalgebra::{DMatrix, DVector};

use crate::algebra::{check_ss_density, diagonal_part_check, StarAlgebra, Subalgebra};
use crate::error::{Error, Result};
use crate::expectations::{
    average_to_central, extension_defect, gram_map, preserving_expectation, ConditionalExpectation,
};
use crate::matrix::{
    c64, herm_funcalc, hermitian_part, hs_project, identity, left_mul_columns, max_abs, null_space, op_norm,
    orthonormalize, pseudo_inverse, right_mul_columns, svd, unvec, ComplexMatrix, ComplexVector, FunCalc,
    HermitianSpectrum, LinearMap, OperatorSubspace,
};
use crate::random::{ginibre, random_element, rng};
use crate::states::{is_d_central, trace_product, PositiveFunctional};
use crate::tol;

/// Unital homomorphism `Φ: A → D` that is the identity on `D ⊆ A`, with kernel `J`.
#[derive(Debug, Clone)]
pub struct DCharacter {
    domain: Subalgebra,
    range: StarAlgebra,
    map: LinearMap,
    kernel: OperatorSubspace,
}

/// Largest deviation found for each defining property of a character.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CharacterDeviations {
    pub unit: f64,
    pub identity_on_range: f64,
    pub multiplicative: f64,
    pub bimodule: f64,
    pub splitting: f64,
    pub contractive: f64,
}

impl DCharacter {
    /// `map` is read on `A` only; it is composed with the projection onto `A`.
    pub fn new(domain: Subalgebra, range: StarAlgebra, map: LinearMap) -> Result<Self> {
        let phi = Self::assemble(domain, range, map)?;
        phi.validate()?;
        Ok(phi)
    }

    fn assemble(domain: Subalgebra, range: StarAlgebra, map: LinearMap) -> Result<Self> {
        let n = domain.n();
        if map.n() != n || range.n() != n {
            return Err(Error::DimensionMismatch { expected: n, found: map.n().max(range.n()) });
        }
        let map = map.compose(&domain.space().projector_map());
        let q = domain.space().columns();
        let images = map.matrix() * q;
        let ker = null_space(&images, tol::tol(tol::RANK_REL), tol::tol(1e-12));
        let kernel = OperatorSubspace::from_orthonormal_columns(n, q * ker);
        Ok(DCharacter { domain, range, map, kernel })
    }

    pub fn domain(&self) -> &Subalgebra {
        &self.domain
    }

    pub fn range(&self) -> &StarAlgebra {
        &self.range
    }

    pub fn map(&self) -> &LinearMap {
        &self.map
    }

    pub fn kernel(&self) -> &OperatorSubspace {
        &self.kernel
    }

    pub fn n(&self) -> usize {
        self.map.n()
    }

    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        self.map.apply(x)
    }

    pub fn check(&self) -> CharacterDeviations {
        let n = self.n();
        let unit = max_abs(&(self.apply(&identity(n)) - identity(n)));
        let db = self.range.basis();
        let identity_on_range = db.iter().map(|d| max_abs(&(self.apply(d) - d))).fold(0.0, f64::max);
        // Columns of `q` are the basis of A; `fq` holds their images.
        let q = self.domain.space().columns();
        let l = self.map.matrix();
        let fq = l * q;
        let ab = self.domain.basis();
        let mut multiplicative: f64 = 0.0;
        for (i, x) in ab.iter().enumerate() {
            let fx = unvec(fq.column(i).as_slice(), n);
            let dev = max_abs(&(l * left_mul_columns(x, q) - left_mul_columns(&fx, &fq)));
            multiplicative = multiplicative.max(dev);
        }
        let mut bimodule: f64 = 0.0;
        for d in &db {
            bimodule = bimodule.max(max_abs(&(l * left_mul_columns(d, q) - left_mul_columns(d, &fq))));
            bimodule = bimodule.max(max_abs(&(l * right_mul_columns(q, d) - right_mul_columns(&fq, d))));
        }
        let splitting = match self.kernel.sum(self.range.space()) {
            Ok(s) if s.dim() == self.kernel.dim() + self.range.dim() => s.distance(self.domain.space()),
            _ => 1.0,
        };
        let mut r = rng(0xc4a7);
        let mut contractive: f64 = 0.0;
        for _ in 0..4 {
            let a = random_element(&mut r, self.domain.space());
            let na = op_norm(&a);
            contractive = contractive.max((op_norm(&self.apply(&a)) - na) / na.max(1e-300));
        }
        CharacterDeviations {
            unit,
            identity_on_range,
            multiplicative,
            bimodule,
            splitting,
            contractive: contractive.max(0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.check();
        let t = tol::tol(1e-8);
        let checks = [
            ("unital", c.unit),
            ("identity on D", c.identity_on_range),
            ("multiplicative", c.multiplicative),
            ("bimodule", c.bimodule),
            ("splitting A = J ⊕ D", c.splitting),
            ("contractive", c.contractive),
        ];
        for (name, dev) in checks {
            if !(dev <= t) {
                let detail = if name == "multiplicative" {
                    format!("{dev:.3e} at {}", self.worst_pair())
                } else {
                    format!("{dev:.3e}")
                };
                return Err(Error::invariant(name, detail));
            }
        }
        Ok(())
    }

    fn worst_pair(&self) -> String {
        let ab = self.domain.basis();
        let mut worst = (0.0, 0, 0);
        for (i, x) in ab.iter().enumerate() {
            for (j, y) in ab.iter().enumerate() {
                let dev = max_abs(&(self.apply(&(x * y)) - self.apply(x) * self.apply(y)));
                if dev > worst.0 {
                    worst = (dev, i, j);
                }
            }
        }
        format!("basis pair ({}, {})", worst.1, worst.2)
    }

    /// `Φ_u(x) = u Φ(u* x u) u*` on `u A u*`.
    pub fn conjugate(&self, u: &ComplexMatrix) -> Self {
        DCharacter {
            domain: self.domain.conjugate(u),
            range: self.range.conjugate(u),
            map: self.map.conjugate(u),
            kernel: self.kernel.conjugate(u),
        }
    }
}

/// Block upper triangular `A`, block diagonal `D` and the block-diagonal
/// compression `Φ` for an ordered partition of `0..n`.
pub fn make_block_character(n: usize, blocks: &[Vec<usize>]) -> Result<(Subalgebra, StarAlgebra, DCharacter)> {
    let a = Subalgebra::block_upper_triangular(n, blocks)?;
    let d = StarAlgebra::block_diagonal(n, blocks)?;
    let mut map = LinearMap::zero(n);
    for b in blocks {
        let mut p = DMatrix::zeros(n, n);
        for &i in b {
            p[(i, i)] = c64(1.0, 0.0);
        }
        map = map.add(&LinearMap::sandwich(&p, &p));
    }
    let phi = DCharacter::assemble(a.clone(), d.clone(), map)?;
    phi.validate()?;
    if !check_ss_density(&a, &StarAlgebra::full(n)) {
        return Err(Error::invariant("A + A* dense", "block triangular algebra is not dense"));
    }
    if !diagonal_part_check(&a, &d, &phi)? {
        return Err(Error::invariant("A ∩ A* = D", "diagonal part differs from D"));
    }
    Ok((a, d, phi))
}

/// Optional perturbation of the extension functional: add a random element
/// of size `scale` from the annihilator of `A`, drawn with `seed`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RepresentationOptions {
    pub perturbation: Option<(u64, f64)>,
}

/// Output of a representing-expectation pipeline and its intermediate data.
#[derive(Debug, Clone)]
pub struct Representation {
    pub psi: ConditionalExpectation,
    /// State preserved by `Ψ`, with `D` in its centralizer.
    pub rho: PositiveFunctional,
    /// Intermediate state annihilating `ker Φ`, before averaging.
    pub omega: PositiveFunctional,
    /// Extension functional `r`.
    pub extension_functional: ComplexMatrix,
    pub g_condition: f64,
    /// `‖E_D(h) − I‖` (tracial) or `|ω(d) − ϑ(d)|` on `D` (state).
    pub normalization_deviation: f64,
    /// Largest `|ω(j)|` over the kernel basis.
    pub annihilation: f64,
    /// Largest `τ(f)² / (‖a‖₂² τ(f² g))` over sampled `f ∈ D₊`; at most one.
    pub mth_ratio: f64,
    /// `‖(Ψ − Φ)|A‖`.
    pub extension_deviation: f64,
    /// `sup |ρ(Ψ(x)) − ρ(x)|` over the unit ball of `M`.
    pub preservation_deviation: f64,
    /// Largest `|ρ(a) − ω₀(Φ(a))|` over the basis of `A`, `ω₀` the input state.
    pub measure_deviation: f64,
}

impl Representation {
    pub const EXTENSION_TOL: f64 = 1e-7;
    pub const PRESERVATION_TOL: f64 = 1e-8;
}

/// Minimum-norm `r ∈ M` with `Tr(k r a_i) = values_i` on the basis of `A`.
fn extension_functional(
    k: &ComplexMatrix,
    values: &[num_complex::Complex64],
    a: &Subalgebra,
    m: &StarAlgebra,
    opts: &RepresentationOptions,
) -> Result<ComplexMatrix> {
    let ab = a.basis();
    let mb = m.basis();
    let km: Vec<_> = mb.iter().map(|x| k * x).collect();
    let s = DMatrix::from_fn(ab.len(), mb.len(), |i, j| trace_product(&km[j], &ab[i]));
    let rhs = DVector::from_column_slice(values);
    let mut coeffs: ComplexVector = pseudo_inverse(&s, tol::tol(tol::RANK_REL)) * &rhs;
    let res = (&s * &coeffs - &rhs).norm();
    if res > tol::tol(1e-9) * rhs.norm().max(1.0) {
        return Err(Error::InconsistencyDetected(format!("extension functional residual {res:.3e}")));
    }
    if let Some((seed, scale)) = opts.perturbation {
        let free = null_space(&s, tol::tol(tol::RANK_REL), tol::tol(1e-12));
        if free.ncols() > 0 {
            let mut r = rng(seed);
            let w = ginibre(&mut r, free.ncols(), 1).column(0).into_owned();
            let step = &free * w;
            let len = step.norm().max(f64::MIN_POSITIVE);
            coeffs += step * c64(scale / len, 0.0);
        }
    }
    Ok(m.space().from_coordinates(&coeffs))
}

/// `r = a b*` with `a = u|r|^{1/2}`, `b = |r|^{1/2}` from the singular value decomposition.
pub fn polar_factors(r: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    let svd = svd(r, true, true);
    let (w, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let n = r.nrows();
    let root =
        DMatrix::from_fn(n, n, |i, j| if i == j { c64(svd.singular_values[i].sqrt(), 0.0) } else { c64(0.0, 0.0) });
    let a = &w * &root * &vt;
    let b = vt.adjoint() * &root * &vt;
    (a, b)
}

fn g_guard(g: &ComplexMatrix) -> Result<f64> {
    let spec = HermitianSpectrum::of_hermitian_part(g);
    let condition = if spec.min() > 0.0 { spec.max() / spec.min() } else { f64::INFINITY };
    if !(condition <= 1e12) {
        return Err(Error::GSingular { condition });
    }
    Ok(condition)
}

fn annihilation(state: &PositiveFunctional, phi: &DCharacter) -> f64 {
    phi.kernel().basis().iter().map(|j| state.eval(j).norm()).fold(0.0, f64::max)
}

fn finish(
    theta: PositiveFunctional,
    reference: &PositiveFunctional,
    d: &StarAlgebra,
    m: &StarAlgebra,
    phi: &DCharacter,
    partial: Partial,
) -> Result<Representation> {
    let rho = average_to_central(&theta, reference, d, m)?;
    let psi = preserving_expectation(&rho, d, m)?;
    let a = phi.domain();
    let extension_deviation = psi.map().sub(phi.map()).restricted_norm(a.space());
    if !(extension_deviation <= tol::tol(Representation::EXTENSION_TOL)) {
        return Err(Error::invariant("Ψ extends Φ", format!("{extension_deviation:.3e}")));
    }
    let preservation_deviation = psi.preservation_defect(&rho)?;
    if !(preservation_deviation <= tol::tol(Representation::PRESERVATION_TOL)) {
        return Err(Error::invariant("ρ∘Ψ = ρ", format!("{preservation_deviation:.3e}")));
    }
    let measure_deviation =
        a.basis().iter().map(|x| (rho.eval(x) - reference.eval(&phi.apply(x))).norm()).fold(0.0, f64::max);
    if !(measure_deviation <= tol::tol(1e-8)) {
        return Err(Error::invariant("ρ|A = ω∘Φ", format!("{measure_deviation:.3e}")));
    }
    Ok(Representation {
        psi,
        rho,
        omega: theta,
        extension_functional: partial.r,
        g_condition: partial.g_condition,
        normalization_deviation: partial.normalization,
        annihilation: partial.annihilation,
        mth_ratio: partial.mth_ratio,
        extension_deviation,
        preservation_deviation,
        measure_deviation,
    })
}

struct Partial {
    r: ComplexMatrix,
    g_condition: f64,
    normalization: f64,
    annihilation: f64,
    mth_ratio: f64,
}

/// Representing expectation for a faithful tracial state `τ` on `M`.
///
/// `r` matches `τ∘Φ` on `A` through `x ↦ τ(r x)`; with `r = a b*`, `c` is the
/// projection of `b` onto `[A a]₂`, `g = E_D(c c*)` and
/// `h = g^{-1/2} c c* g^{-1/2}`. The state `τ(h ·)` annihilates `ker Φ` and is
/// averaged onto the relative commutant before `Ψ` is built.
pub fn representing_expectation_tracial(
    m: &StarAlgebra,
    tau: &PositiveFunctional,
    d: &StarAlgebra,
    phi: &DCharacter,
    opts: &RepresentationOptions,
) -> Result<Representation> {
    let cert = tau.tracial_certificate(m);
    if !cert.result {
        return Err(Error::NotTracial(cert.max_violation));
    }
    if !tau.is_faithful_on(m) {
        return Err(Error::NotFaithful);
    }
    let a = phi.domain();
    let k = hermitian_part(&m.project(tau.density())?);
    let values: Vec<_> = a.basis().iter().map(|x| tau.eval(&phi.apply(x))).collect();
    let r = extension_functional(&k, &values, a, m, opts)?;
    let (af, bf) = polar_factors(&r);
    let k_half = herm_funcalc(&k, FunCalc::Sqrt)?;
    let k_mhalf = herm_funcalc(&k, FunCalc::Pow(-0.5))?;

    let span: Vec<_> = a.basis().iter().map(|x| x * &af * &k_half).collect();
    let e = orthonormalize(&span)?;
    let c = hs_project(&e, &(&bf * &k_half))? * &k_mhalf;
    let cc = &c * c.adjoint();

    let ed = preserving_expectation(tau, d, m)?;
    let g = hermitian_part(&ed.apply(&cc));
    let g_condition = g_guard(&g)?;
    let g_mhalf = herm_funcalc(&g, FunCalc::Pow(-0.5))?;
    let h = hermitian_part(&(&g_mhalf * &cc * &g_mhalf));

    let normalization = max_abs(&(ed.apply(&h) - d.unit()));
    if !(normalization <= tol::tol(1e-7)) {
        return Err(Error::invariant("E_D(h) = I", format!("{normalization:.3e}")));
    }
    let theta = PositiveFunctional::new(hermitian_part(&(&k * &h)))?;
    let ann = annihilation(&theta, phi);
    if !(ann <= tol::tol(1e-8)) {
        return Err(Error::invariant("annihilates ker Φ", format!("{ann:.3e}")));
    }
    let mth_ratio = mth_operator_ratio(tau, d, &af, &g, 0x6d74)?;
    if !(mth_ratio <= 1.0 + tol::tol(1e-9)) {
        return Err(Error::invariant("τ(f)² ≤ ‖a‖₂² τ(f²g)", format!("ratio {mth_ratio:.12}")));
    }
    finish(theta, tau, d, m, phi, Partial { r, g_condition, normalization, annihilation: ann, mth_ratio })
}

/// Largest `τ(f)² / (τ(a*a) τ(f g f))` over random `f = y y*`, `y ∈ D`.
fn mth_operator_ratio(
    tau: &PositiveFunctional,
    d: &StarAlgebra,
    a: &ComplexMatrix,
    g: &ComplexMatrix,
    seed: u64,
) -> Result<f64> {
    let mut r = rng(seed);
    let a2 = tau.eval(&(a.adjoint() * a)).re;
    let mut worst: f64 = 0.0;
    for _ in 0..8 {
        let y = random_element(&mut r, d.space());
        let f = &y * y.adjoint();
        let lhs = tau.eval(&f).re.powi(2);
        let rhs = a2 * tau.eval(&(&f * g * &f)).re;
        worst = worst.max(lhs / rhs.max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

/// Representing expectation for a faithful state `ω` with `D` in its centralizer.
///
/// Same steps as the tracial pipeline with reference density `k = ρ_ω`:
/// `r` matches `ω∘Φ` through `x ↦ Tr(r x)`, `g₀ = E_D(k^{-1/2} c c* k^{-1/2})`,
/// `h₁ = g₀^{-1/2} c` and `ϑ = Tr(h₁ h₁* ·)`.
pub fn representing_expectation_state(
    m: &StarAlgebra,
    omega: &PositiveFunctional,
    d: &StarAlgebra,
    phi: &DCharacter,
    opts: &RepresentationOptions,
) -> Result<Representation> {
    if !omega.is_faithful_on(m) {
        return Err(Error::NotFaithful);
    }
    let cen = is_d_central(omega, d, m)?;
    if !cen.central {
        return Err(Error::NotCentral(cen.violation));
    }
    let a = phi.domain();
    let k = hermitian_part(&m.project(omega.density())?);
    let values: Vec<_> = a.basis().iter().map(|x| omega.eval(&phi.apply(x))).collect();
    let r = extension_functional(&identity(m.n()), &values, a, m, opts)?;
    let (af, bf) = polar_factors(&r);

    let span: Vec<_> = a.basis().iter().map(|x| x * &af).collect();
    let e = orthonormalize(&span)?;
    let c = hs_project(&e, &bf)?;
    let k_mhalf = herm_funcalc(&k, FunCalc::Pow(-0.5))?;

    let ed = preserving_expectation(omega, d, m)?;
    let g0 = hermitian_part(&ed.apply(&(&k_mhalf * &c * c.adjoint() * &k_mhalf)));
    let g_condition = g_guard(&g0)?;
    let h1 = herm_funcalc(&g0, FunCalc::Pow(-0.5))? * &c;
    let theta = PositiveFunctional::new(hermitian_part(&(&h1 * h1.adjoint())))?;

    let normalization = extension_defect(&theta, omega, d);
    if !(normalization <= tol::tol(1e-7)) {
        return Err(Error::invariant("ϑ extends ω on D", format!("{normalization:.3e}")));
    }
    let ann = annihilation(&theta, phi);
    if !(ann <= tol::tol(1e-8)) {
        return Err(Error::invariant("annihilates ker Φ", format!("{ann:.3e}")));
    }
    finish(theta, omega, d, m, phi, Partial { r, g_condition, normalization, annihilation: ann, mth_ratio: f64::NAN })
}

/// `Ψ(x) = Σ_t Ψ_t(e_t x e_t)` for mutually orthogonal projections `e_t`
/// summing to `I`, each central in the range, with `Ψ_t` defined on `e_t M e_t`.
pub fn compose_direct_sum(
    m: &StarAlgebra,
    pieces: &[(ComplexMatrix, ConditionalExpectation)],
) -> Result<ConditionalExpectation> {
    if pieces.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = m.n();
    let t = tol::tol(1e-9);
    let mut total = DMatrix::zeros(n, n);
    for (i, (e, _)) in pieces.iter().enumerate() {
        if max_abs(&(e * e - e)) > t || max_abs(&(e - e.adjoint())) > t {
            return Err(Error::ProjectionsNotPartition(format!("piece {} is not a projection", i + 1)));
        }
        for (j, (f, _)) in pieces.iter().enumerate().skip(i + 1) {
            if max_abs(&(e * f)) > t {
                return Err(Error::ProjectionsNotPartition(format!("pieces {} and {} overlap", i + 1, j + 1)));
            }
        }
        total += e;
    }
    if max_abs(&(total - m.unit())) > t {
        return Err(Error::ProjectionsNotPartition("projections do not sum to the unit".into()));
    }
    let mut range_elems = Vec::new();
    for (_, p) in pieces {
        range_elems.extend(p.range().basis());
    }
    for (e, _) in pieces {
        let c = range_elems.iter().map(|b| op_norm(&(e * b - b * e))).fold(0.0, f64::max);
        if c > t {
            return Err(Error::NotCentralInD(c));
        }
    }
    let mut map = LinearMap::zero(n);
    for (e, p) in pieces {
        map = map.add(&p.map().compose(&LinearMap::sandwich(e, e)));
    }
    let map = map.compose(&m.space().projector_map());
    let range = StarAlgebra::from_spanning_set(&range_elems, identity(n))?;
    let psi = ConditionalExpectation::new(map, m.clone(), range.clone(), range)?;
    for (i, (_, p)) in pieces.iter().enumerate() {
        let gap = psi.map().sub(p.map()).restricted_norm(p.domain().space());
        if gap > tol::tol(1e-8) {
            return Err(Error::invariant("extends each piece", format!("piece {}: {gap:.3e}", i + 1)));
        }
    }
    Ok(psi)
}

/// Representing expectation on an abelian `M` for a faithful state `σ` on `D`:
/// the tracial pipeline run with `τ = σ ∘ P_D`, followed by a uniqueness check
/// against the `ρ`-orthogonal projection computed directly.
pub fn representing_expectation_commutative(
    m: &StarAlgebra,
    sigma: &PositiveFunctional,
    d: &StarAlgebra,
    phi: &DCharacter,
) -> Result<Representation> {
    let defect = m.commutativity_defect();
    if !m.is_abelian() {
        return Err(Error::NotAbelian(defect));
    }
    let tau = PositiveFunctional::state(hermitian_part(&d.project(sigma.density())?))?;
    let rep = representing_expectation_tracial(m, &tau, d, phi, &RepresentationOptions::default())?;
    let direct = gram_map(&rep.rho, d.space(), m)?;
    let gap = rep.psi.map().sub(&direct).restricted_norm(m.space());
    if gap > tol::tol(1e-8) {
        return Err(Error::InconsistencyDetected(format!("representing expectation not unique: {gap:.3e}")));
    }
    Ok(rep)
}

/// Expectation extending `Φ` from a normal state `ψ` extending `ω_D∘Φ`, when
/// `A + A*` is dense in `M`. Density forces `D` into the centralizer of `ψ`.
pub fn extension_via_ss_density(
    m: &StarAlgebra,
    omega_d: &PositiveFunctional,
    d: &StarAlgebra,
    phi: &DCharacter,
    psi: &PositiveFunctional,
) -> Result<ConditionalExpectation> {
    let a = phi.domain();
    if !check_ss_density(a, m) {
        let span = a.space().sum(&a.space().adjoint()).map(|s| s.dim()).unwrap_or(0);
        return Err(Error::NotDense { span, ambient: m.dim() });
    }
    let cert = omega_d.tracial_certificate(d);
    if !cert.result {
        return Err(Error::NotTracial(cert.max_violation));
    }
    if !omega_d.is_faithful_on(d) {
        return Err(Error::NotFaithful);
    }
    let ext = a.basis().iter().map(|x| (psi.eval(x) - omega_d.eval(&phi.apply(x))).norm()).fold(0.0, f64::max);
    if ext > tol::tol(1e-8) {
        return Err(Error::NotAnExtension(ext));
    }
    let cen = is_d_central(psi, d, m)?;
    if !cen.central {
        return Err(Error::InconsistencyDetected(format!(
            "extension of ω∘Φ on a dense algebra is not D-central ({:.3e})",
            cen.violation
        )));
    }
    let e = preserving_expectation(psi, d, m)?;
    let gap = e.map().sub(phi.map()).restricted_norm(a.space());
    if gap > tol::tol(1e-7) {
        return Err(Error::invariant("Ψ extends Φ", format!("{gap:.3e}")));
    }
    Ok(e)
}

/// Outcome of [`mth_report`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MthReport {
    pub holds: bool,
    /// `Σ μ/g` over the support of `μ`, infinite if `g` vanishes there.
    pub inverse_mass: f64,
    /// `(Σ fμ)² / Σ f²gμ` at `f = 1/g`.
    pub max_ratio: f64,
}

/// Whether `(Σ f μ)² ≤ Σ f² g μ` for every `f ≥ 0`.
pub fn mth_check(mu: &[f64], g: &[f64]) -> bool {
    mth_report(mu, g).holds
}

/// Decide `(Σ f μ)² ≤ Σ f² g μ` for all `f ≥ 0` by `g > 0` on the support of
/// `μ` and `Σ μ/g ≤ 1`; the ratio at the maximizer `f = 1/g` must agree.
pub fn mth_report(mu: &[f64], g: &[f64]) -> MthReport {
    assert_eq!(mu.len(), g.len(), "weight and density lengths differ");
    let slack = tol::tol(1e-9);
    let support: Vec<usize> = (0..mu.len()).filter(|&i| mu[i] > 0.0).collect();
    if support.is_empty() {
        return MthReport { holds: true, inverse_mass: 0.0, max_ratio: 0.0 };
    }
    if support.iter().any(|&i| !(g[i] > 0.0)) {
        return MthReport { holds: false, inverse_mass: f64::INFINITY, max_ratio: f64::INFINITY };
    }
    let inverse_mass: f64 = support.iter().map(|&i| mu[i] / g[i]).sum();
    let num: f64 = support.iter().map(|&i| mu[i] / g[i]).sum::<f64>().powi(2);
    let den: f64 = support.iter().map(|&i| (1.0 / g[i]).powi(2) * g[i] * mu[i]).sum();
    let max_ratio = num / den;
    debug_assert!((max_ratio - inverse_mass).abs() <= 1e-9 * inverse_mass.max(1.0));
    MthReport { holds: inverse_mass <= 1.0 + slack, inverse_mass, max_ratio }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{diag, matrix_unit};

    fn e(n: usize, i: usize, j: usize) -> ComplexMatrix {
        matrix_unit(n, i, j)
    }

    fn sample(n: usize) -> ComplexMatrix {
        DMatrix::from_fn(n, n, |i, j| c64(1.0 + i as f64 * 0.7 - j as f64 * 0.3, (i * j) as f64 * 0.2 - 0.1))
    }

    #[test]
    fn block_character_shapes() {
        let (a, d, phi) = make_block_character(2, &[vec![0], vec![1]]).unwrap();
        assert_eq!((a.dim(), d.dim(), phi.kernel().dim()), (3, 2, 1));
        let x = sample(2);
        let mut expected = x.clone();
        expected[(0, 1)] = c64(0.0, 0.0);
        expected[(1, 0)] = c64(0.0, 0.0);
        assert!(max_abs(&(phi.apply(&x) - expected)) < 1e-14);
        let (a, d, _) = make_block_character(3, &[vec![0, 1], vec![2]]).unwrap();
        assert_eq!((a.dim(), d.dim()), (7, 5));
        let (a, d, phi) = make_block_character(3, &[vec![0, 1, 2]]).unwrap();
        assert_eq!((a.dim(), d.dim(), phi.kernel().dim()), (9, 9, 0));
        assert!(matches!(make_block_character(3, &[vec![0], vec![0, 1, 2]]), Err(Error::BadPartition(_))));
    }

    #[test]
    fn non_multiplicative_map_is_rejected() {
        let (a, d, _) = make_block_character(2, &[vec![0], vec![1]]).unwrap();
        // Keeps the off-diagonal entry: identity on D but not multiplicative into D.
        let bad = DCharacter::new(a, d, LinearMap::identity(2));
        match bad {
            Err(Error::InvariantViolation { invariant, .. }) => assert_ne!(invariant, "unital"),
            other => panic!("expected invariant violation, got {other:?}"),
        }
    }

    #[test]
    fn tracial_diagonal_example() {
        let (_, d, phi) = make_block_character(2, &[vec![0], vec![1]]).unwrap();
        let m = StarAlgebra::full(2);
        let rep = representing_expectation_tracial(&m, &PositiveFunctional::tracial(2), &d, &phi, &Default::default())
            .unwrap();
        let x = sample(2);
        let mut expected = x.clone();
        expected[(0, 1)] = c64(0.0, 0.0);
        expected[(1, 0)] = c64(0.0, 0.0);
        assert!(max_abs(&(rep.psi.apply(&x) - expected)) < 1e-10);
    }

    fn t2_scalar_character(row: usize) -> (Subalgebra, StarAlgebra, DCharacter) {
        let (a, _, _) = make_block_character(2, &[vec![0], vec![1]]).unwrap();
        let d = StarAlgebra::scalars(2);
        let phi =
            DCharacter::new(a.clone(), d.clone(), LinearMap::from_fn(2, |x| identity(2) * x[(row, row)])).unwrap();
        (a, d, phi)
    }

    #[test]
    fn tracial_scalar_example() {
        let (_, d, phi) = t2_scalar_character(0);
        let m = StarAlgebra::full(2);
        let rep = representing_expectation_tracial(&m, &PositiveFunctional::tracial(2), &d, &phi, &Default::default())
            .unwrap();
        assert!(max_abs(&(rep.extension_functional.clone() - e(2, 0, 0) * c64(2.0, 0.0))) < 1e-10);
        let x = sample(2);
        assert!(max_abs(&(rep.psi.apply(&x) - identity(2) * x[(0, 0)])) < 1e-10);
        // density 2E₁₁ with respect to τ
        assert!(max_abs(&(rep.rho.density() - e(2, 0, 0))) < 1e-10);
    }

    #[test]
    fn state_scalar_example() {
        let (_, d, phi) = t2_scalar_character(1);
        let m = StarAlgebra::full(2);
        let w = PositiveFunctional::new(diag(&[0.7, 0.3])).unwrap();
        let rep = representing_expectation_state(&m, &w, &d, &phi, &Default::default()).unwrap();
        let x = sample(2);
        assert!(max_abs(&(rep.psi.apply(&x) - identity(2) * x[(1, 1)])) < 1e-10);
    }

    #[test]
    fn trivial_character_gives_identity() {
        let (_, d, phi) = make_block_character(3, &[vec![0, 1, 2]]).unwrap();
        let m = StarAlgebra::full(3);
        let tau = PositiveFunctional::tracial(3);
        let rep = representing_expectation_tracial(&m, &tau, &d, &phi, &Default::default()).unwrap();
        assert!(max_abs(&(rep.psi.map().matrix() - LinearMap::identity(3).matrix())) < 1e-10);
        assert!(max_abs(&(rep.rho.density() - tau.density())) < 1e-10);
    }

    #[test]
    fn direct_sum_of_diagonal_pieces() {
        let m = StarAlgebra::full(2);
        let tau = PositiveFunctional::tracial(2);
        let mut pieces = Vec::new();
        for i in 0..2 {
            let p = e(2, i, i);
            let corner = StarAlgebra::from_spanning_set(std::slice::from_ref(&p), p.clone()).unwrap();
            let ex = preserving_expectation(&tau, &corner, &corner).unwrap();
            pieces.push((p, ex));
        }
        let psi = compose_direct_sum(&m, &pieces).unwrap();
        let ed = preserving_expectation(&tau, &StarAlgebra::diagonal(2), &m).unwrap();
        assert!(psi.distance(&ed) < 1e-12);
        let single = compose_direct_sum(&m, &[(identity(2), ed.clone())]).unwrap();
        assert!(single.distance(&ed) < 1e-12);
        let overlap = vec![(identity(2), ed.clone()), (e(2, 0, 0), ed)];
        assert!(matches!(compose_direct_sum(&m, &overlap), Err(Error::ProjectionsNotPartition(_))));
    }

    #[test]
    fn classical_point_mass() {
        let m = StarAlgebra::diagonal(3);
        let a = Subalgebra::from_star(&m);
        let d = StarAlgebra::scalars(3);
        let phi = DCharacter::new(a, d.clone(), LinearMap::from_fn(3, |x| identity(3) * x[(0, 0)])).unwrap();
        let rep = representing_expectation_commutative(&m, &PositiveFunctional::tracial(3), &d, &phi).unwrap();
        assert!(max_abs(&(rep.rho.density() - e(3, 0, 0))) < 1e-10);
        assert!(matches!(
            representing_expectation_commutative(
                &StarAlgebra::full(2),
                &PositiveFunctional::tracial(2),
                &StarAlgebra::scalars(2),
                &t2_scalar_character(0).2
            ),
            Err(Error::NotAbelian(_))
        ));
    }

    #[test]
    fn dense_extension() {
        let (_, d, phi) = make_block_character(2, &[vec![0], vec![1]]).unwrap();
        let m = StarAlgebra::full(2);
        let tau = PositiveFunctional::tracial(2);
        let rep = representing_expectation_tracial(&m, &tau, &d, &phi, &Default::default()).unwrap();
        let e2 = extension_via_ss_density(&m, &tau, &d, &phi, &rep.rho).unwrap();
        assert!(e2.distance(&rep.psi) < 1e-10);
        let dd = StarAlgebra::diagonal(2);
        let phi_d = DCharacter::new(Subalgebra::from_star(&dd), dd.clone(), LinearMap::identity(2)).unwrap();
        assert!(matches!(extension_via_ss_density(&m, &tau, &dd, &phi_d, &tau), Err(Error::NotDense { .. })));
    }

    #[test]
    fn mth_examples() {
        assert!(mth_check(&[0.25; 4], &[1.0; 4]));
        assert!(!mth_check(&[0.5, 0.5], &[1.0, 0.0]));
        assert!(!mth_check(&[0.5, 0.5], &[0.5, 0.5]));
        assert!(mth_check(&[0.5, 0.0], &[2.0, 0.0]));
    }
}
