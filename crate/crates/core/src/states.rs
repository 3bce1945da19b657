//! Positive functionals carried by densities, their supports and centralizers,
//! and the modular group of a faithful functional.
//!
//! Every functional here is finite: `ω(x) = Tr(ρ x)` with `ρ ⪰ 0`. The domain
//! sets attached to a weight (`𝔭_ω`, `𝔫_ω`, `𝔪_ω`) are therefore `M₊`, `M`
//! and `M` and get no type of their own.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::algebra::{commutant, StarAlgebra};
use crate::error::{Error, Result};
use crate::matrix::{
    c64, check_hermitian, herm_funcalc, hermitian_part, identity, is_finite, max_abs, null_space, op_norm,
    orthonormalize, vec_of, ComplexMatrix, FunCalc, HermitianSpectrum, LinearMap, OperatorSubspace,
};
use crate::tol;

/// `ω(x) = Tr(ρ x)` with `ρ ⪰ 0`.
#[derive(Debug, Clone)]
pub struct PositiveFunctional {
    density: ComplexMatrix,
    is_state: bool,
    support: ComplexMatrix,
    faithful: bool,
}

/// `Tr(a b)` without forming the product.
pub(crate) fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    let n = a.nrows();
    let mut s = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub(crate) fn trace_norm(x: &ComplexMatrix) -> f64 {
    HermitianSpectrum::of_hermitian_part(x).eigenvalues.iter().map(|l| l.abs()).sum()
}

impl PositiveFunctional {
    pub fn new(density: ComplexMatrix) -> Result<Self> {
        if !is_finite(&density) {
            return Err(Error::invariant("finite entries", "density has NaN or Inf"));
        }
        check_hermitian(&density)?;
        let density = hermitian_part(&density);
        let spec = HermitianSpectrum::of_hermitian_part(&density);
        let thr = spec.pd_threshold();
        if spec.min() < -thr {
            return Err(Error::NotPositiveDefinite { min: spec.min(), threshold: -thr });
        }
        let tr = density.trace().re;
        let is_state = (tr - 1.0).abs() <= tol::tol(1e-10);
        let support = spec.projection_above(thr.max(f64::MIN_POSITIVE));
        let faithful = spec.is_positive_definite();
        Ok(PositiveFunctional { density, is_state, support, faithful })
    }

    /// Normalize a positive density to trace one.
    pub fn state(density: ComplexMatrix) -> Result<Self> {
        let tr = density.trace().re;
        if !(tr > 0.0) {
            return Err(Error::NotAState(tr));
        }
        Self::new(density / c64(tr, 0.0))
    }

    /// `Tr(·)/n`.
    pub fn tracial(n: usize) -> Self {
        Self::new(identity(n) / c64(n as f64, 0.0)).expect("I/n is a state")
    }

    pub fn density(&self) -> &ComplexMatrix {
        &self.density
    }

    pub fn n(&self) -> usize {
        self.density.nrows()
    }

    pub fn eval(&self, x: &ComplexMatrix) -> Complex64 {
        trace_product(&self.density, x)
    }

    pub fn is_state(&self) -> bool {
        self.is_state
    }

    /// Faithful on all of `M_n`.
    pub fn is_faithful(&self) -> bool {
        self.faithful
    }

    pub fn support(&self) -> &ComplexMatrix {
        &self.support
    }

    /// The same functional restricted to `M`, carried by `P_M(ρ)`.
    pub fn restrict_to(&self, m: &StarAlgebra) -> Result<Self> {
        Self::new(m.project(&self.density)?)
    }

    /// `G_ij = ω(b_i* b_j)` on an orthonormal basis.
    pub fn gram(&self, space: &OperatorSubspace) -> ComplexMatrix {
        let n = space.ambient_dim();
        let k = space.dim();
        let mut cols = DMatrix::zeros(n * n, k);
        for j in 0..k {
            cols.set_column(j, &vec_of(&(space.basis_element(j) * &self.density)));
        }
        let g = space.columns().ad_mul(&cols);
        hermitian_part(&g)
    }

    /// Whether `ω(x*x) > 0` for all nonzero `x` in the algebra.
    pub fn is_faithful_on(&self, a: &StarAlgebra) -> bool {
        let g = self.gram(a.space());
        let spec = HermitianSpectrum::of_hermitian_part(&g);
        spec.min() > 0.0 && spec.min() > tol::tol(tol::PD_REL) * spec.max()
    }

    /// Density of `x ↦ ω(E(x))`.
    pub fn pullback(&self, map: &LinearMap) -> Result<Self> {
        let sigma = map.adjoint().apply(&self.density).adjoint();
        Self::new(hermitian_part(&sigma))
    }

    /// `sup_{‖x‖ ≤ 1} |ω(x) − ψ(x)|` over `M_n`, the trace norm of the density difference.
    pub fn distance(&self, other: &PositiveFunctional) -> f64 {
        trace_norm(&(&self.density - &other.density))
    }

    /// Largest `|ω(xy) − ω(yx)|` over basis pairs of `m`.
    pub fn tracial_certificate(&self, m: &StarAlgebra) -> TracialCertificate {
        let basis = m.basis();
        let mut worst: f64 = 0.0;
        for x in &basis {
            let c = &self.density * x - x * &self.density;
            for y in &basis {
                worst = worst.max(trace_product(&c, y).norm());
            }
        }
        let threshold = tol::tol(1e-9) * op_norm(&self.density);
        TracialCertificate { result: worst <= threshold, max_violation: worst, threshold }
    }
}

/// Outcome of testing `ω(xy) = ω(yx)` on an algebra.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracialCertificate {
    pub result: bool,
    pub max_violation: f64,
    pub threshold: f64,
}

pub fn support_projection(omega: &PositiveFunctional) -> ComplexMatrix {
    omega.support().clone()
}

fn singleton_span(x: &ComplexMatrix) -> Result<OperatorSubspace> {
    orthonormalize(std::slice::from_ref(x))
}

/// `M_ω`: elements of `M` commuting with the density of `ω|M`.
pub fn centralizer(omega: &PositiveFunctional, m: &StarAlgebra) -> Result<StarAlgebra> {
    if !omega.is_faithful_on(m) {
        return Err(Error::NotFaithful);
    }
    let rho = m.project(omega.density())?;
    commutant(&singleton_span(&rho)?, m)
}

/// `M^ω = {x ∈ M : [x, e] = 0, ω(xy) = ω(yx) for y ∈ M}` with `e` the support
/// of `ω|M`, solved as one linear system in `M`'s coordinates.
pub fn omega_central_algebra(omega: &PositiveFunctional, m: &StarAlgebra) -> Result<StarAlgebra> {
    let n = m.n();
    let rho = m.project(omega.density())?;
    let e = PositiveFunctional::new(rho.clone())?.support().clone();
    let basis = m.basis();
    let k = basis.len();
    let mut sys = DMatrix::zeros(n * n + k, k);
    for (c, x) in basis.iter().enumerate() {
        let comm = x * &e - &e * x;
        let v = vec_of(&comm);
        for r in 0..n * n {
            sys[(r, c)] = v[r];
        }
        for (l, y) in basis.iter().enumerate() {
            sys[(n * n + l, c)] = trace_product(&rho, &(x * y)) - trace_product(&rho, &(y * x));
        }
    }
    let ker = null_space(&sys, tol::tol(tol::RANK_REL), tol::tol(1e-12));
    let space = OperatorSubspace::from_orthonormal_columns(n, m.space().columns() * ker);
    Ok(StarAlgebra::trusted(space, m.unit().clone()))
}

/// Subspace distance between `e M^ω e` and the centralizer of `ω` on `eMe`.
pub fn centralizer_algebra_deviation(omega: &PositiveFunctional, m: &StarAlgebra) -> Result<f64> {
    let rho = m.project(omega.density())?;
    let e = PositiveFunctional::new(rho)?.support().clone();
    let mw = omega_central_algebra(omega, m)?;
    let compressed: Vec<_> = mw.basis().iter().map(|b| &e * b * &e).collect();
    let left = orthonormalize(&compressed)?;
    let corner: Vec<_> = m.basis().iter().map(|b| &e * b * &e).collect();
    let eme = StarAlgebra::trusted(orthonormalize(&corner)?, e.clone());
    let right = centralizer(omega, &eme)?;
    Ok(left.distance(right.space()))
}

/// Result of testing `ω(dx) = ω(xd)` for `d ∈ D`, `x ∈ M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Centrality {
    pub central: bool,
    /// Largest `|ω(dx) − ω(xd)|` over basis pairs.
    pub violation: f64,
    /// Largest `‖[ρ_M, d]‖_HS` over the basis of `D`.
    pub commutator_norm: f64,
}

/// Whether `D` lies in the ω-centralizer of `M`. Evaluated on basis pairs and,
/// separately, through `[ρ_M, d]`; the two routes must agree.
pub fn is_d_central(omega: &PositiveFunctional, d: &StarAlgebra, m: &StarAlgebra) -> Result<Centrality> {
    let rho = m.project(omega.density())?;
    let scale = op_norm(&rho);
    let threshold = tol::tol(1e-9) * scale;
    let mb = m.basis();
    let mut violation: f64 = 0.0;
    let mut comm_norm: f64 = 0.0;
    for dd in d.basis() {
        for x in &mb {
            let lhs = trace_product(&rho, &(&dd * x));
            let rhs = trace_product(&rho, &(x * &dd));
            violation = violation.max((lhs - rhs).norm());
        }
        comm_norm = comm_norm.max((&rho * &dd - &dd * &rho).norm());
    }
    let central = violation <= threshold;
    let by_commutator = comm_norm <= threshold;
    let slack = (m.dim() as f64).sqrt() * 10.0;
    if (central && comm_norm > slack * threshold) || (by_commutator && !central && violation > slack * threshold) {
        return Err(Error::InconsistencyDetected(format!(
            "centrality: pairwise violation {violation:.3e} vs commutator norm {comm_norm:.3e}"
        )));
    }
    Ok(Centrality { central, violation, commutator_norm: comm_norm })
}

/// Largest `‖[e, d]‖` over the basis of `D`, `e` the support of `ω|M`.
pub fn support_commutation_defect(omega: &PositiveFunctional, d: &StarAlgebra, m: &StarAlgebra) -> Result<f64> {
    let rho = m.project(omega.density())?;
    let e = PositiveFunctional::new(rho)?.support().clone();
    Ok(d.basis().iter().map(|b| max_abs(&(&e * b - b * &e))).fold(0.0, f64::max))
}

/// Spectral projections of a Hermitian matrix, eigenvalues grouped when closer
/// than `1e-8` relative to the spectral norm.
pub(crate) fn spectral_projections(h: &ComplexMatrix) -> Vec<ComplexMatrix> {
    let spec = HermitianSpectrum::of_hermitian_part(h);
    let gap = tol::tol(1e-8) * spec.spectral_norm().max(1.0);
    let lams: Vec<f64> = spec.eigenvalues.iter().copied().collect();
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=lams.len() {
        if i == lams.len() || lams[i] - lams[i - 1] > gap {
            let (lo, hi) = (lams[start], lams[i - 1]);
            out.push(spec.apply(|l| {
                if l >= lo - gap / 2.0 && l <= hi + gap / 2.0 {
                    c64(1.0, 0.0)
                } else {
                    c64(0.0, 0.0)
                }
            }));
            start = i;
        }
    }
    out
}

/// Cap on the number of projections sampled by [`locally_central_check`].
pub const CAP_PROJ: usize = 64;

/// Projections of `D` used for the local test: `I` and the spectral projections
/// of `d + d*` and `i(d − d*)` for basis elements `d`.
pub fn sample_projections(d: &StarAlgebra) -> Vec<ComplexMatrix> {
    let mut out = vec![d.unit().clone()];
    'outer: for b in d.basis() {
        let herms = [&b + b.adjoint(), (&b - b.adjoint()) * c64(0.0, 1.0)];
        for h in herms {
            if max_abs(&h) <= 1e-14 {
                continue;
            }
            for p in spectral_projections(&h) {
                if out.len() >= CAP_PROJ {
                    break 'outer;
                }
                if out.iter().all(|q| max_abs(&(q - &p)) > 1e-8) {
                    out.push(p);
                }
            }
        }
    }
    out
}

/// `ω(p x p d p) = ω(p d p x p)` for sampled projections `p ∈ D` and basis
/// elements `d ∈ D`, `x ∈ M`. Together with `[e, D] = 0` this must agree with
/// [`is_d_central`].
pub fn locally_central_check(omega: &PositiveFunctional, d: &StarAlgebra, m: &StarAlgebra) -> Result<bool> {
    let rho = m.project(omega.density())?;
    let threshold = tol::tol(1e-9) * op_norm(&rho);
    let mb = m.basis();
    let db = d.basis();
    let mut local = true;
    'proj: for p in sample_projections(d) {
        let prp = &p * &rho * &p;
        for dd in &db {
            let pdp = &p * dd * &p;
            // ω(pxp·pdp) − ω(pdp·pxp) = Tr([pdp, pρp] x)
            let c = &pdp * &prp - &prp * &pdp;
            for x in &mb {
                if trace_product(&c, x).norm() > threshold {
                    local = false;
                    break 'proj;
                }
            }
        }
    }
    let support_ok = support_commutation_defect(omega, d, m)? <= tol::tol(1e-9);
    let central = is_d_central(omega, d, m)?.central;
    if central != (local && support_ok) {
        return Err(Error::InconsistencyDetected(format!(
            "local centrality {local} with support commutation {support_ok} disagrees with centrality {central}"
        )));
    }
    Ok(local)
}

fn require_faithful(omega: &PositiveFunctional) -> Result<()> {
    if !omega.is_faithful() {
        return Err(Error::NotFaithful);
    }
    Ok(())
}

/// `σ_t(x) = ρ^{it} x ρ^{-it}`.
pub fn modular_group(omega: &PositiveFunctional, t: f64) -> Result<LinearMap> {
    require_faithful(omega)?;
    let u = herm_funcalc(omega.density(), FunCalc::PowerIt(t))?;
    Ok(LinearMap::sandwich(&u, &u.adjoint()))
}

/// `x ↦ [log ρ, x]`, the generator of the modular group divided by `i`.
pub fn modular_generator(omega: &PositiveFunctional) -> Result<LinearMap> {
    require_faithful(omega)?;
    let l = herm_funcalc(omega.density(), FunCalc::Log)?;
    Ok(LinearMap::left(&l).sub(&LinearMap::right(&l)))
}

/// Whether `σ_t(D) ⊆ D` for all `t`, decided by `[log ρ, D] ⊆ D` and
/// cross-checked by sampling `t ∈ {0.1, 1, π}`.
pub fn modular_invariance_check(omega: &PositiveFunctional, d: &StarAlgebra) -> Result<bool> {
    let gen = modular_generator(omega)?;
    let basis = d.basis();
    let infinitesimal = basis.iter().all(|b| d.contains(&gen.apply(b)));
    let mut sampled = true;
    for t in [0.1, 1.0, std::f64::consts::PI] {
        let s = modular_group(omega, t)?;
        sampled &= basis.iter().all(|b| d.contains(&s.apply(b)));
    }
    if infinitesimal != sampled {
        return Err(Error::InconsistencyDetected(format!(
            "modular invariance: generator test {infinitesimal}, sampled test {sampled}"
        )));
    }
    Ok(infinitesimal)
}

/// `h = ρ_ψ ρ_φ⁻¹` when the densities commute, so that `ψ(x) = φ(h^{1/2} x h^{1/2})`.
pub fn pt_radon_nikodym(psi: &PositiveFunctional, phi: &PositiveFunctional) -> Result<ComplexMatrix> {
    require_faithful(phi)?;
    let (rp, rf) = (psi.density(), phi.density());
    let comm = op_norm(&(rp * rf - rf * rp));
    if comm > tol::tol(1e-9) * op_norm(rp).max(1e-300) * op_norm(rf) {
        return Err(Error::DoesNotCommute(comm));
    }
    let inv = herm_funcalc(rf, FunCalc::Pow(-1.0))?;
    let h = hermitian_part(&(rp * inv));
    let root = herm_funcalc(&h, FunCalc::Sqrt)?;
    let back = &root * rf * &root;
    let dev = op_norm(&(back - rp));
    if dev > tol::tol(1e-8) * op_norm(rp).max(1e-300) {
        return Err(Error::InconsistencyDetected(format!("Radon–Nikodym reconstruction off by {dev:.3e}")));
    }
    Ok(h)
}

/// `u_t = ρ_ψ^{it} ρ_φ^{-it}`.
pub fn connes_cocycle(psi: &PositiveFunctional, phi: &PositiveFunctional, t: f64) -> Result<ComplexMatrix> {
    require_faithful(psi)?;
    require_faithful(phi)?;
    let a = herm_funcalc(psi.density(), FunCalc::PowerIt(t))?;
    let b = herm_funcalc(phi.density(), FunCalc::PowerIt(-t))?;
    Ok(a * b)
}
