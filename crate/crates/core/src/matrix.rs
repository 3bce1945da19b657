//! Dense complex matrices, Hermitian functional calculus and Hilbert–Schmidt
//! geometry.
//!
//! Matrices are vectorized column-major, so a linear map on `M_n` is an
//! `n² × n²` matrix acting on `vec(x)`, and `vec(a x b) = (bᵀ ⊗ a) vec(x)`.
//! The Hilbert–Schmidt pairing is `⟨x, y⟩ = Tr(y* x)`, linear in the first slot.

use nalgebra::{DMatrix, DVector, Dyn, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tol;

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> ComplexMatrix {
    DMatrix::identity(n, n)
}

pub fn zeros(n: usize) -> ComplexMatrix {
    DMatrix::zeros(n, n)
}

/// Matrix unit `E_ij` (0-based).
pub fn matrix_unit(n: usize, i: usize, j: usize) -> ComplexMatrix {
    let mut e = zeros(n);
    e[(i, j)] = ONE;
    e
}

/// Real diagonal matrix.
pub fn diag(values: &[f64]) -> ComplexMatrix {
    let n = values.len();
    let mut d = zeros(n);
    for (i, v) in values.iter().enumerate() {
        d[(i, i)] = c64(*v, 0.0);
    }
    d
}

/// Build a matrix from real rows.
pub fn from_real_rows(rows: &[&[f64]]) -> ComplexMatrix {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    DMatrix::from_fn(r, c, |i, j| c64(rows[i][j], 0.0))
}

pub fn vec_of(x: &ComplexMatrix) -> ComplexVector {
    DVector::from_column_slice(x.as_slice())
}

pub fn unvec(v: &[Complex64], n: usize) -> ComplexMatrix {
    DMatrix::from_column_slice(n, n, v)
}

/// `Tr(y* x)`.
pub fn hs_inner(x: &ComplexMatrix, y: &ComplexMatrix) -> Complex64 {
    x.iter().zip(y.iter()).map(|(a, b)| b.conj() * a).sum()
}

pub fn hs_norm(x: &ComplexMatrix) -> f64 {
    x.norm()
}

/// SVD of `x`, computed on `x / max|x_ij|`.
///
/// nalgebra's implicit-shift SVD occasionally stalls or returns NaN on sparse
/// inputs with exactly repeated entries. When that happens the
/// decomposition is retried on `x W` for a fixed pseudo-random unitary `W`,
/// which has the same singular values and left vectors; `V* = V'* W*`.
pub fn svd(x: &ComplexMatrix, compute_u: bool, compute_v: bool) -> SVD<Complex64, Dyn, Dyn> {
    let s = max_abs(x);
    if s == 0.0 || !s.is_finite() {
        return SVD::new(x.clone(), compute_u, compute_v);
    }
    let scaled = x.unscale(s);
    for attempt in 0..4u64 {
        let w =
            (attempt > 0).then(|| crate::random::random_unitary(&mut crate::random::rng(0x5bd1 + attempt), x.ncols()));
        let input = w.as_ref().map_or_else(|| scaled.clone(), |w| &scaled * w);
        let Some(mut out) = SVD::try_new_unordered(input, compute_u, compute_v, f64::EPSILON, 2_000) else {
            continue;
        };
        if out.singular_values.iter().any(|v| !v.is_finite()) {
            continue;
        }
        if let (Some(w), Some(vt)) = (&w, out.v_t.as_mut()) {
            *vt = &*vt * w.adjoint();
        }
        out.singular_values *= s;
        out.sort_by_singular_values();
        return out;
    }
    panic!("SVD of a {}x{} matrix failed to converge under four rotations", x.nrows(), x.ncols());
}

/// Largest singular value.
pub fn op_norm(x: &ComplexMatrix) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    svd(x, false, false).singular_values.max()
}

pub fn min_singular_value(x: &ComplexMatrix) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    svd(x, false, false).singular_values.min()
}

/// Columns of `cols` are vectorized n×n matrices `x_j`; returns the columns
/// `vec(d x_j)`. Column-major storage makes `cols` the block row `[x_1 x_2 …]`.
pub(crate) fn left_mul_columns(d: &ComplexMatrix, cols: &ComplexMatrix) -> ComplexMatrix {
    let n = d.nrows();
    let k = cols.ncols();
    let wide = DMatrix::from_column_slice(n, n * k, cols.as_slice());
    let prod = d * wide;
    DMatrix::from_column_slice(n * n, k, prod.as_slice())
}

/// Columns `vec(x_j d)`.
pub(crate) fn right_mul_columns(cols: &ComplexMatrix, d: &ComplexMatrix) -> ComplexMatrix {
    let n = d.nrows();
    let mut out = DMatrix::zeros(n * n, cols.ncols());
    for j in 0..cols.ncols() {
        let x = DMatrix::from_column_slice(n, n, cols.column(j).as_slice());
        out.set_column(j, &DMatrix::from_column_slice(n * n, 1, (x * d).as_slice()).column(0));
    }
    out
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

pub fn trace(x: &ComplexMatrix) -> Complex64 {
    x.trace()
}

pub fn max_abs(x: &ComplexMatrix) -> f64 {
    x.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn is_finite(x: &ComplexMatrix) -> bool {
    x.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn hermitian_part(x: &ComplexMatrix) -> ComplexMatrix {
    (x + x.adjoint()) * c64(0.5, 0.0)
}

/// Largest entrywise deviation from Hermiticity.
pub fn hermitian_deviation(x: &ComplexMatrix) -> f64 {
    max_abs(&(x - x.adjoint()))
}

fn check_square(x: &ComplexMatrix) -> Result<usize> {
    if x.nrows() != x.ncols() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), found: x.ncols() });
    }
    if x.nrows() == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(x.nrows())
}

/// Hermitian within `1e-10` entrywise, relative to the largest entry when it exceeds 1.
pub fn check_hermitian(x: &ComplexMatrix) -> Result<()> {
    check_square(x)?;
    let dev = hermitian_deviation(x);
    if dev > tol::tol(1e-10) * max_abs(x).max(1.0) {
        return Err(Error::NotHermitian(dev));
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianSpectrum {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl HermitianSpectrum {
    pub fn of(x: &ComplexMatrix) -> Result<Self> {
        check_hermitian(x)?;
        Ok(Self::of_hermitian_part(x))
    }

    /// Decompose `(x + x*)/2` without checking Hermiticity.
    pub fn of_hermitian_part(x: &ComplexMatrix) -> Self {
        let eig = SymmetricEigen::new(hermitian_part(x));
        let n = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
        let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        HermitianSpectrum { eigenvalues, eigenvectors }
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    pub fn spectral_norm(&self) -> f64 {
        self.min().abs().max(self.max().abs())
    }

    /// Threshold below which an eigenvalue counts as zero for definiteness.
    pub fn pd_threshold(&self) -> f64 {
        tol::tol(tol::PD_REL) * self.spectral_norm()
    }

    pub fn is_positive_definite(&self) -> bool {
        self.min() > self.pd_threshold() && self.min() > 0.0
    }

    /// `U f(Λ) U*`.
    pub fn apply(&self, f: impl Fn(f64) -> Complex64) -> ComplexMatrix {
        let u = &self.eigenvectors;
        let mut scaled = u.clone();
        for (j, lam) in self.eigenvalues.iter().enumerate() {
            let s = f(*lam);
            for v in scaled.column_mut(j).iter_mut() {
                *v *= s;
            }
        }
        scaled * u.adjoint()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.apply(|l| c64(l, 0.0))
    }

    /// Projection onto the span of eigenvectors whose eigenvalue exceeds `threshold`.
    pub fn projection_above(&self, threshold: f64) -> ComplexMatrix {
        self.apply(|l| if l > threshold { ONE } else { ZERO })
    }
}

/// Scalar functions available to [`herm_funcalc`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FunCalc {
    Sqrt,
    Log,
    Pow(f64),
    Exp,
    /// `x ↦ x^{it}`, unitary for positive definite input.
    PowerIt(f64),
}

pub fn herm_funcalc(x: &ComplexMatrix, f: FunCalc) -> Result<ComplexMatrix> {
    let spec = HermitianSpectrum::of(x)?;
    let thr = spec.pd_threshold();
    let need_pd = |spec: &HermitianSpectrum| -> Result<()> {
        if !spec.is_positive_definite() {
            return Err(Error::NotPositiveDefinite { min: spec.min(), threshold: thr });
        }
        Ok(())
    };
    let need_psd = |spec: &HermitianSpectrum| -> Result<()> {
        if spec.min() < -thr {
            return Err(Error::NotPositiveDefinite { min: spec.min(), threshold: -thr });
        }
        Ok(())
    };
    match f {
        FunCalc::Sqrt => {
            need_psd(&spec)?;
            Ok(spec.apply(|l| c64(l.max(0.0).sqrt(), 0.0)))
        }
        FunCalc::Log => {
            need_pd(&spec)?;
            Ok(spec.apply(|l| c64(l.ln(), 0.0)))
        }
        FunCalc::Pow(p) => {
            if p < 0.0 {
                need_pd(&spec)?;
            } else {
                need_psd(&spec)?;
            }
            Ok(spec.apply(|l| c64(l.max(0.0).powf(p), 0.0)))
        }
        FunCalc::Exp => Ok(spec.apply(|l| c64(l.exp(), 0.0))),
        FunCalc::PowerIt(t) => {
            need_pd(&spec)?;
            Ok(spec.apply(|l| Complex64::from_polar(1.0, t * l.ln())))
        }
    }
}

/// `x^p` on the support of a positive semidefinite `x`, zero on its kernel.
/// Negative `p` gives the Moore–Penrose style inverse power.
pub fn psd_power_on_support(x: &ComplexMatrix, p: f64) -> Result<ComplexMatrix> {
    let spec = HermitianSpectrum::of(x)?;
    let thr = spec.pd_threshold();
    if spec.min() < -thr {
        return Err(Error::NotPositiveDefinite { min: spec.min(), threshold: -thr });
    }
    Ok(spec.apply(|l| if l > thr { c64(l.powf(p), 0.0) } else { ZERO }))
}

/// Support projection of a positive semidefinite matrix.
pub fn psd_support(x: &ComplexMatrix) -> Result<ComplexMatrix> {
    let spec = HermitianSpectrum::of(x)?;
    let thr = spec.pd_threshold();
    if spec.min() < -thr {
        return Err(Error::NotPositiveDefinite { min: spec.min(), threshold: -thr });
    }
    Ok(spec.projection_above(thr))
}

/// Orthonormal columns spanning the numerical kernel of `m`. A singular value
/// counts as zero when it is at most `max(rel · σ_max, floor)`.
pub fn null_space(m: &ComplexMatrix, rel: f64, floor: f64) -> ComplexMatrix {
    let (r, c) = m.shape();
    if c == 0 {
        return DMatrix::zeros(r, 0);
    }
    if r == 0 {
        return DMatrix::identity(c, c);
    }
    let padded = if r < c {
        let mut p = DMatrix::zeros(c, c);
        p.rows_mut(0, r).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = svd(&padded, false, true);
    let vt = svd.v_t.expect("v_t requested");
    let smax = svd.singular_values.max();
    let thr = (rel * smax).max(floor);
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] <= thr).collect();
    let mut out = DMatrix::zeros(c, keep.len());
    for (k, &i) in keep.iter().enumerate() {
        out.set_column(k, &vt.row(i).adjoint());
    }
    out
}

/// Moore–Penrose pseudo-inverse, singular values below `rel · σ_max` dropped.
pub fn pseudo_inverse(m: &ComplexMatrix, rel: f64) -> ComplexMatrix {
    let svd = svd(m, true, true);
    let eps = rel * svd.singular_values.max();
    svd.pseudo_inverse(eps.max(f64::MIN_POSITIVE)).expect("u and v computed")
}

/// Subspace of `M_n` with an orthonormal basis under `Tr(y* x)`.
///
/// The basis is stored as the `n² × k` matrix of its vectorizations.
#[derive(Debug, Clone)]
pub struct OperatorSubspace {
    n: usize,
    q: ComplexMatrix,
}

impl OperatorSubspace {
    pub fn zero(n: usize) -> Self {
        OperatorSubspace { n, q: DMatrix::zeros(n * n, 0) }
    }

    /// All of `M_n` with the matrix-unit basis.
    pub fn full(n: usize) -> Self {
        OperatorSubspace { n, q: DMatrix::identity(n * n, n * n) }
    }

    /// Wrap columns that are already orthonormal.
    pub fn from_orthonormal_columns(n: usize, q: ComplexMatrix) -> Self {
        debug_assert_eq!(q.nrows(), n * n);
        OperatorSubspace { n, q }
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.q.ncols()
    }

    pub fn columns(&self) -> &ComplexMatrix {
        &self.q
    }

    pub fn basis_element(&self, i: usize) -> ComplexMatrix {
        unvec(self.q.column(i).as_slice(), self.n)
    }

    pub fn basis(&self) -> Vec<ComplexMatrix> {
        (0..self.dim()).map(|i| self.basis_element(i)).collect()
    }

    fn check_dim(&self, x: &ComplexMatrix) -> Result<()> {
        if x.nrows() != self.n || x.ncols() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: x.nrows() });
        }
        Ok(())
    }

    pub fn coordinates(&self, x: &ComplexMatrix) -> Result<ComplexVector> {
        self.check_dim(x)?;
        Ok(self.q.ad_mul(&vec_of(x)))
    }

    pub fn from_coordinates(&self, c: &ComplexVector) -> ComplexMatrix {
        let v = &self.q * c;
        unvec(v.as_slice(), self.n)
    }

    pub fn project(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        let c = self.coordinates(x)?;
        Ok(self.from_coordinates(&c))
    }

    /// `‖x − P(x)‖_HS`.
    pub fn residual_norm(&self, x: &ComplexMatrix) -> Result<f64> {
        Ok((x - self.project(x)?).norm())
    }

    /// Membership with relative tolerance `1e-8 · max(1, ‖x‖_HS)`.
    pub fn contains(&self, x: &ComplexMatrix) -> bool {
        match self.residual_norm(x) {
            Ok(r) => r <= tol::tol(1e-8) * x.norm().max(1.0),
            Err(_) => false,
        }
    }

    /// The orthogonal projector `Q Q*` as an `n² × n²` matrix.
    pub fn projector(&self) -> ComplexMatrix {
        &self.q * self.q.adjoint()
    }

    pub fn projector_map(&self) -> LinearMap {
        LinearMap { n: self.n, m: self.projector() }
    }

    /// Largest entry of `Q*Q − I`.
    pub fn gram_deviation(&self) -> f64 {
        let g = self.q.ad_mul(&self.q);
        max_abs(&(g - DMatrix::identity(self.dim(), self.dim())))
    }

    /// Add the candidates by modified Gram–Schmidt with one reorthogonalization
    /// pass; residuals below `1e-9` times the largest candidate norm are dropped.
    pub fn extend(&self, candidates: &[ComplexMatrix]) -> Result<Self> {
        for c in candidates {
            self.check_dim(c)?;
        }
        let largest = candidates.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let dep_tol = tol::tol(tol::RANK_REL) * largest;
        let mut cols: Vec<ComplexVector> = (0..self.dim()).map(|i| self.q.column(i).into_owned()).collect();
        for cand in candidates {
            let mut w = vec_of(cand);
            if w.norm() <= dep_tol {
                continue;
            }
            for _ in 0..2 {
                for col in &cols {
                    let coef = col.dotc(&w);
                    w.axpy(-coef, col, ONE);
                }
            }
            let nw = w.norm();
            if nw > dep_tol && nw > 0.0 {
                cols.push(w / c64(nw, 0.0));
            }
        }
        let q = if cols.is_empty() { DMatrix::zeros(self.n * self.n, 0) } else { DMatrix::from_columns(&cols) };
        Ok(OperatorSubspace { n: self.n, q })
    }

    /// Subspace of adjoints `{x* : x ∈ S}`.
    pub fn adjoint(&self) -> Self {
        let cols: Vec<ComplexVector> = self.basis().iter().map(|b| vec_of(&b.adjoint())).collect();
        let q = if cols.is_empty() { DMatrix::zeros(self.n * self.n, 0) } else { DMatrix::from_columns(&cols) };
        OperatorSubspace { n: self.n, q }
    }

    pub fn sum(&self, other: &OperatorSubspace) -> Result<Self> {
        self.extend(&other.basis())
    }

    /// `S ∩ T`, as the kernel of `x ↦ (I − P_T) x` on `S`.
    pub fn intersection(&self, other: &OperatorSubspace) -> Self {
        let resid = &self.q - &other.q * other.q.ad_mul(&self.q);
        let ker = null_space(&resid, 0.0, tol::tol(1e-8));
        OperatorSubspace { n: self.n, q: &self.q * ker }
    }

    /// Sine of the largest principal angle, symmetrized:
    /// `max(‖(I − P_T) Q_S‖, ‖(I − P_S) Q_T‖)`; 1 if the dimensions differ.
    pub fn distance(&self, other: &OperatorSubspace) -> f64 {
        if self.dim() != other.dim() {
            return 1.0;
        }
        if self.dim() == 0 {
            return 0.0;
        }
        let a = &self.q - &other.q * other.q.ad_mul(&self.q);
        let b = &other.q - &self.q * self.q.ad_mul(&other.q);
        op_norm(&a).max(op_norm(&b))
    }

    /// Conjugate every basis element by a unitary.
    pub fn conjugate(&self, u: &ComplexMatrix) -> Self {
        let m = LinearMap::sandwich(u, &u.adjoint());
        OperatorSubspace { n: self.n, q: m.matrix() * &self.q }
    }
}

pub fn orthonormalize(spanning_set: &[ComplexMatrix]) -> Result<OperatorSubspace> {
    let first = spanning_set.first().ok_or(Error::EmptyInput)?;
    if first.nrows() != first.ncols() {
        return Err(Error::DimensionMismatch { expected: first.nrows(), found: first.ncols() });
    }
    OperatorSubspace::zero(first.nrows()).extend(spanning_set)
}

pub fn hs_project(s: &OperatorSubspace, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    s.project(x)
}

/// Linear map on `M_n`, stored as an `n² × n²` matrix acting on column-major `vec`.
#[derive(Debug, Clone)]
pub struct LinearMap {
    n: usize,
    m: ComplexMatrix,
}

impl LinearMap {
    pub fn from_matrix(n: usize, m: ComplexMatrix) -> Result<Self> {
        if m.nrows() != n * n || m.ncols() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: m.nrows() });
        }
        Ok(LinearMap { n, m })
    }

    /// Tabulate `f` on the matrix units.
    pub fn from_fn(n: usize, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Self {
        let mut m = DMatrix::zeros(n * n, n * n);
        for l in 0..n {
            for k in 0..n {
                let img = f(&matrix_unit(n, k, l));
                m.set_column(k + l * n, &vec_of(&img));
            }
        }
        LinearMap { n, m }
    }

    pub fn identity(n: usize) -> Self {
        LinearMap { n, m: DMatrix::identity(n * n, n * n) }
    }

    pub fn zero(n: usize) -> Self {
        LinearMap { n, m: DMatrix::zeros(n * n, n * n) }
    }

    /// `x ↦ a x b`.
    pub fn sandwich(a: &ComplexMatrix, b: &ComplexMatrix) -> Self {
        LinearMap { n: a.nrows(), m: b.transpose().kronecker(a) }
    }

    /// `x ↦ a x`.
    pub fn left(a: &ComplexMatrix) -> Self {
        LinearMap { n: a.nrows(), m: identity(a.nrows()).kronecker(a) }
    }

    /// `x ↦ x b`.
    pub fn right(b: &ComplexMatrix) -> Self {
        LinearMap { n: b.nrows(), m: b.transpose().kronecker(&identity(b.nrows())) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.m
    }

    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let v = &self.m * vec_of(x);
        unvec(v.as_slice(), self.n)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &LinearMap) -> LinearMap {
        LinearMap { n: self.n, m: &self.m * &other.m }
    }

    /// Adjoint for the Hilbert–Schmidt pairing.
    pub fn adjoint(&self) -> LinearMap {
        LinearMap { n: self.n, m: self.m.adjoint() }
    }

    pub fn sub(&self, other: &LinearMap) -> LinearMap {
        LinearMap { n: self.n, m: &self.m - &other.m }
    }

    pub fn add(&self, other: &LinearMap) -> LinearMap {
        LinearMap { n: self.n, m: &self.m + &other.m }
    }

    /// Operator norm for the Hilbert–Schmidt norm on `M_n`.
    pub fn norm(&self) -> f64 {
        op_norm(&self.m)
    }

    /// Operator norm of the restriction to a subspace.
    pub fn restricted_norm(&self, s: &OperatorSubspace) -> f64 {
        op_norm(&(&self.m * s.columns()))
    }

    /// Conjugate the map by a unitary: `x ↦ u E(u* x u) u*`.
    pub fn conjugate(&self, u: &ComplexMatrix) -> LinearMap {
        let into = LinearMap::sandwich(u, &u.adjoint());
        let back = LinearMap::sandwich(&u.adjoint(), u);
        into.compose(self).compose(&back)
    }
}
