//! Unital *-subalgebras and non-selfadjoint subalgebras of `M_n`, described by
//! orthonormal bases.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hoffman_rossi::DCharacter;
use crate::matrix::{
    identity, matrix_unit, max_abs, null_space, op_norm, orthonormalize, unvec, vec_of, ComplexMatrix, OperatorSubspace,
};
use crate::tol;

/// Anything carried by an [`OperatorSubspace`].
pub trait Span {
    fn span(&self) -> &OperatorSubspace;
}

impl Span for OperatorSubspace {
    fn span(&self) -> &OperatorSubspace {
        self
    }
}

/// Unital *-subalgebra. The unit is `I` except for corner and ideal algebras
/// such as `eMe` or `Dz`, whose unit is the projection `e` or `z`.
#[derive(Debug, Clone)]
pub struct StarAlgebra {
    space: OperatorSubspace,
    unit: ComplexMatrix,
}

impl Span for StarAlgebra {
    fn span(&self) -> &OperatorSubspace {
        &self.space
    }
}

/// Largest residual `‖v − P v‖` over the columns of `vs`.
fn max_residual(space: &OperatorSubspace, vs: &ComplexMatrix) -> f64 {
    if vs.ncols() == 0 {
        return 0.0;
    }
    let q = space.columns();
    let r = vs - q * q.ad_mul(vs);
    (0..r.ncols()).map(|j| r.column(j).norm()).fold(0.0, f64::max)
}

fn product_columns(basis: &[ComplexMatrix]) -> ComplexMatrix {
    let n = basis.first().map_or(0, |b| b.nrows());
    let k = basis.len();
    let mut out = DMatrix::zeros(n * n, k * k);
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            out.set_column(i * k + j, &vec_of(&(a * b)));
        }
    }
    out
}

fn check_product_closed(space: &OperatorSubspace) -> Result<()> {
    let basis = space.basis();
    let prods = product_columns(&basis);
    let q = space.columns();
    let r = &prods - q * q.ad_mul(&prods);
    let k = basis.len();
    for col in 0..r.ncols() {
        let dev = r.column(col).norm();
        if dev > tol::tol(1e-9) {
            return Err(Error::invariant(
                "closed under product",
                format!("basis pair ({}, {}) leaves the span by {dev:.3e}", col / k, col % k),
            ));
        }
    }
    Ok(())
}

fn check_unit(space: &OperatorSubspace, unit: &ComplexMatrix) -> Result<()> {
    let t = tol::tol(1e-9);
    if max_abs(&(unit * unit - unit)) > t || max_abs(&(unit - unit.adjoint())) > t {
        return Err(Error::invariant("unit is a projection", "u² ≠ u or u* ≠ u"));
    }
    if space.residual_norm(unit)? > t * unit.norm().max(1.0) {
        return Err(Error::invariant("unit in span", "unit is not in the span of the basis"));
    }
    for (i, b) in space.basis().iter().enumerate() {
        let dev = max_abs(&(unit * b - b)).max(max_abs(&(b * unit - b)));
        if dev > t {
            return Err(Error::invariant("unit acts as identity", format!("basis element {i} moved by {dev:.3e}")));
        }
    }
    Ok(())
}

impl StarAlgebra {
    /// Validate and wrap.
    pub fn new(space: OperatorSubspace, unit: ComplexMatrix) -> Result<Self> {
        let a = StarAlgebra { space, unit };
        a.validate()?;
        Ok(a)
    }

    pub(crate) fn trusted(space: OperatorSubspace, unit: ComplexMatrix) -> Self {
        StarAlgebra { space, unit }
    }

    /// Span of a spanning set, with the given unit.
    pub fn from_spanning_set(elements: &[ComplexMatrix], unit: ComplexMatrix) -> Result<Self> {
        Self::new(orthonormalize(elements)?, unit)
    }

    pub fn full(n: usize) -> Self {
        StarAlgebra { space: OperatorSubspace::full(n), unit: identity(n) }
    }

    pub fn scalars(n: usize) -> Self {
        let space = orthonormalize(&[identity(n)]).expect("nonempty");
        StarAlgebra { space, unit: identity(n) }
    }

    pub fn diagonal(n: usize) -> Self {
        let units: Vec<_> = (0..n).map(|i| matrix_unit(n, i, i)).collect();
        StarAlgebra { space: orthonormalize(&units).expect("nonempty"), unit: identity(n) }
    }

    /// `⊕ M_{n_i}` over a partition of `0..n` (0-based index sets).
    pub fn block_diagonal(n: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        validate_partition(n, blocks)?;
        let mut units = Vec::new();
        for b in blocks {
            for &i in b {
                for &j in b {
                    units.push(matrix_unit(n, i, j));
                }
            }
        }
        Ok(StarAlgebra { space: orthonormalize(&units)?, unit: identity(n) })
    }

    pub fn n(&self) -> usize {
        self.space.ambient_dim()
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn space(&self) -> &OperatorSubspace {
        &self.space
    }

    pub fn unit(&self) -> &ComplexMatrix {
        &self.unit
    }

    pub fn basis(&self) -> Vec<ComplexMatrix> {
        self.space.basis()
    }

    pub fn project(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.space.project(x)
    }

    pub fn contains(&self, x: &ComplexMatrix) -> bool {
        self.space.contains(x)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return Err(Error::EmptyInput);
        }
        check_unit(&self.space, &self.unit)?;
        let adj = self.space.adjoint();
        let dev = max_residual(&self.space, adj.columns());
        if dev > tol::tol(1e-9) {
            return Err(Error::invariant("closed under adjoint", format!("deviation {dev:.3e}")));
        }
        check_product_closed(&self.space)
    }

    /// Largest `‖[b_i, b_j]‖` over basis pairs.
    pub fn commutativity_defect(&self) -> f64 {
        let basis = self.basis();
        let mut worst: f64 = 0.0;
        for (i, a) in basis.iter().enumerate() {
            for b in &basis[i + 1..] {
                worst = worst.max(max_abs(&(a * b - b * a)));
            }
        }
        worst
    }

    pub fn is_abelian(&self) -> bool {
        self.commutativity_defect() <= tol::tol(1e-9)
    }

    /// `u A u*` for a unitary `u`.
    pub fn conjugate(&self, u: &ComplexMatrix) -> Self {
        StarAlgebra { space: self.space.conjugate(u), unit: u * &self.unit * u.adjoint() }
    }

    /// Center `A ∩ A′`.
    pub fn center(&self) -> Result<StarAlgebra> {
        commutant(self, self)
    }

    /// Compress to `W* A W` for an isometry `W` whose range projection `W W*`
    /// commutes with `A`. The result lives in `M_m`, `m = W.ncols()`.
    pub fn compress(&self, w: &ComplexMatrix) -> Result<StarAlgebra> {
        let m = w.ncols();
        let elems: Vec<_> = self.basis().iter().map(|b| w.adjoint() * b * w).collect();
        StarAlgebra::new(orthonormalize(&elems)?, identity(m))
    }

    /// `W A W*` for an isometry `W`; the unit becomes `W W*`.
    pub fn expand(&self, w: &ComplexMatrix) -> Result<StarAlgebra> {
        let elems: Vec<_> = self.basis().iter().map(|b| w * b * w.adjoint()).collect();
        let unit = w * w.adjoint();
        Ok(StarAlgebra::trusted(orthonormalize(&elems)?, unit))
    }
}

/// Block structure of a block-upper-triangular algebra, in the frame
/// `x ↦ u x u*`.
#[derive(Debug, Clone)]
pub struct TriangularStructure {
    pub unitary: ComplexMatrix,
    pub blocks: Vec<Vec<usize>>,
}

/// Unital subalgebra, not necessarily closed under adjoints.
#[derive(Debug, Clone)]
pub struct Subalgebra {
    space: OperatorSubspace,
    triangular: Option<TriangularStructure>,
}

impl Span for Subalgebra {
    fn span(&self) -> &OperatorSubspace {
        &self.space
    }
}

impl Subalgebra {
    pub fn new(space: OperatorSubspace) -> Result<Self> {
        let a = Subalgebra { space, triangular: None };
        a.validate()?;
        Ok(a)
    }

    pub fn from_star(a: &StarAlgebra) -> Self {
        Subalgebra { space: a.space.clone(), triangular: None }
    }

    /// Block upper triangular matrices over an ordered partition: `x_ij = 0`
    /// whenever the block of `i` comes after the block of `j`.
    pub fn block_upper_triangular(n: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        validate_partition(n, blocks)?;
        let mut pos = vec![0usize; n];
        for (t, b) in blocks.iter().enumerate() {
            for &i in b {
                pos[i] = t;
            }
        }
        let mut units = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if pos[i] <= pos[j] {
                    units.push(matrix_unit(n, i, j));
                }
            }
        }
        Ok(Subalgebra {
            space: orthonormalize(&units)?,
            triangular: Some(TriangularStructure { unitary: identity(n), blocks: blocks.to_vec() }),
        })
    }

    pub fn n(&self) -> usize {
        self.space.ambient_dim()
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn space(&self) -> &OperatorSubspace {
        &self.space
    }

    pub fn basis(&self) -> Vec<ComplexMatrix> {
        self.space.basis()
    }

    pub fn contains(&self, x: &ComplexMatrix) -> bool {
        self.space.contains(x)
    }

    pub fn triangular(&self) -> Option<&TriangularStructure> {
        self.triangular.as_ref()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return Err(Error::EmptyInput);
        }
        check_unit(&self.space, &identity(self.n()))?;
        check_product_closed(&self.space)
    }

    pub fn conjugate(&self, u: &ComplexMatrix) -> Self {
        Subalgebra {
            space: self.space.conjugate(u),
            triangular: self
                .triangular
                .as_ref()
                .map(|t| TriangularStructure { unitary: u * &t.unitary, blocks: t.blocks.clone() }),
        }
    }

    /// `W* A W` for an isometry `W` onto a subspace reducing `A`.
    pub fn compress(&self, w: &ComplexMatrix) -> Result<Subalgebra> {
        let elems: Vec<_> = self.basis().iter().map(|b| w.adjoint() * b * w).collect();
        Subalgebra::new(orthonormalize(&elems)?)
    }
}

/// Check that `blocks` is a partition of `0..n` into nonempty sets.
pub fn validate_partition(n: usize, blocks: &[Vec<usize>]) -> Result<()> {
    if n == 0 {
        return Err(Error::BadPartition("ambient dimension is zero".into()));
    }
    let mut seen = vec![false; n];
    for b in blocks {
        if b.is_empty() {
            return Err(Error::BadPartition("empty block".into()));
        }
        for &i in b {
            if i >= n {
                return Err(Error::BadPartition(format!("index {} out of range", i + 1)));
            }
            if seen[i] {
                return Err(Error::BadPartition(format!("index {} repeated", i + 1)));
            }
            seen[i] = true;
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(Error::BadPartition(format!("index {} missing", i + 1)));
    }
    Ok(())
}

fn check_generators(generators: &[ComplexMatrix], n: usize) -> Result<()> {
    if generators.is_empty() {
        return Err(Error::EmptyInput);
    }
    for g in generators {
        if g.nrows() != n || g.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: g.nrows() });
        }
    }
    Ok(())
}

/// Span of all words in the generators, grown by left multiplication of the
/// newest basis vectors until the dimension stops changing.
fn close_under_words(words: &[ComplexMatrix], n: usize) -> Result<OperatorSubspace> {
    let mut seed = vec![identity(n)];
    seed.extend(words.iter().cloned());
    let mut space = orthonormalize(&seed)?;
    let mut frontier = space.basis();
    for _ in 0..n * n {
        let cands: Vec<_> = words.iter().flat_map(|g| frontier.iter().map(move |b| g * b)).collect();
        let next = space.extend(&cands)?;
        if next.dim() == space.dim() {
            break;
        }
        frontier = (space.dim()..next.dim()).map(|i| next.basis_element(i)).collect();
        space = next;
    }
    Ok(space)
}

pub fn generate_star_algebra(generators: &[ComplexMatrix], n: usize) -> Result<StarAlgebra> {
    check_generators(generators, n)?;
    let mut words: Vec<_> = generators.to_vec();
    words.extend(generators.iter().map(|g| g.adjoint()));
    StarAlgebra::new(close_under_words(&words, n)?, identity(n))
}

/// Unital (non-selfadjoint) algebra generated by `generators`.
pub fn generate_subalgebra(generators: &[ComplexMatrix], n: usize) -> Result<Subalgebra> {
    check_generators(generators, n)?;
    Subalgebra::new(close_under_words(generators, n)?)
}

/// `{x ∈ within : [x, b] = 0 for every basis element b of s}`.
///
/// The kernel is narrowed one basis element at a time, so each step is a small
/// SVD on the surviving coordinates.
pub fn commutant(s: &impl Span, within: &StarAlgebra) -> Result<StarAlgebra> {
    let n = within.n();
    if s.span().ambient_dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: s.span().ambient_dim() });
    }
    let w = within.space().columns();
    let mut coords: ComplexMatrix = DMatrix::identity(within.dim(), within.dim());
    for b in s.span().basis() {
        if coords.ncols() == 0 {
            break;
        }
        let cur = w * &coords;
        let mut k = DMatrix::zeros(n * n, cur.ncols());
        for l in 0..cur.ncols() {
            let x = unvec(cur.column(l).as_slice(), n);
            k.set_column(l, &vec_of(&(&x * &b - &b * &x)));
        }
        let floor = tol::tol(1e-12) * b.norm();
        let ns = null_space(&k, tol::tol(tol::RANK_REL), floor);
        coords = &coords * ns;
    }
    let space = OperatorSubspace::from_orthonormal_columns(n, w * coords);
    Ok(StarAlgebra::trusted(space, within.unit().clone()))
}

pub fn contains(s: &impl Span, x: &ComplexMatrix) -> bool {
    s.span().contains(x)
}

/// Whether `A + A*` spans `M`.
pub fn check_ss_density(a: &Subalgebra, m: &StarAlgebra) -> bool {
    match a.space().sum(&a.space().adjoint()) {
        Ok(s) => s.dim() == m.dim(),
        Err(_) => false,
    }
}

/// Whether `A ∩ A* = D`. Computed on subspaces and, independently, by checking
/// that `Φ` fixes `A ∩ A*`; the two must agree.
pub fn diagonal_part_check(a: &Subalgebra, d: &StarAlgebra, phi: &DCharacter) -> Result<bool> {
    let inter = a.space().intersection(&a.space().adjoint());
    let by_subspace = inter.distance(d.space()) <= tol::tol(1e-8);
    let by_character = inter.basis().iter().all(|x| {
        let fx = phi.apply(x);
        op_norm(&(fx - x)) <= tol::tol(1e-8) * op_norm(x).max(1.0)
    });
    if by_subspace != by_character {
        return Err(Error::InconsistencyDetected(format!(
            "diagonal part: subspace test says {by_subspace}, character test says {by_character}"
        )));
    }
    Ok(by_subspace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hoffman_rossi::make_block_character;
    use crate::matrix::{c64, diag};

    #[test]
    fn generated_dimensions() {
        assert_eq!(generate_star_algebra(&[identity(3)], 3).unwrap().dim(), 1);
        assert_eq!(generate_star_algebra(&[matrix_unit(2, 0, 1)], 2).unwrap().dim(), 4);
        let a = generate_star_algebra(&[diag(&[1.0, 2.0, 2.0])], 3).unwrap();
        // Polynomials in diag(1,2,2): p(1) on the first entry, p(2) on the rest.
        let oracle = orthonormalize(&[matrix_unit(3, 0, 0), diag(&[0.0, 1.0, 1.0])]).unwrap();
        assert_eq!(a.dim(), 2);
        assert!(a.space().distance(&oracle) < 1e-12);
    }

    #[test]
    fn generated_algebra_is_idempotent() {
        let g = DMatrix::from_fn(3, 3, |i, j| c64((i * j) as f64, i as f64 - 1.0) * if i <= j { 1.0 } else { 0.0 });
        let a = generate_star_algebra(&[g], 3).unwrap();
        let b = generate_star_algebra(&a.basis(), 3).unwrap();
        assert!(a.space().distance(b.space()) < 1e-10);
    }

    #[test]
    fn commutant_examples() {
        let n = 3;
        let c = commutant(&StarAlgebra::full(n), &StarAlgebra::full(n)).unwrap();
        assert_eq!(c.dim(), 1);
        assert!(c.contains(&identity(n)));
        let c = commutant(&StarAlgebra::scalars(n), &StarAlgebra::full(n)).unwrap();
        assert_eq!(c.dim(), n * n);
        // [x, E11] = 0 forces x12 = x21 = 0 in M2.
        let d2 = StarAlgebra::diagonal(2);
        let c = commutant(&d2, &StarAlgebra::full(2)).unwrap();
        assert!(c.space().distance(d2.space()) < 1e-12);
        c.validate().unwrap();
    }

    #[test]
    fn membership() {
        let d2 = StarAlgebra::diagonal(2);
        assert!(contains(&d2, &identity(2)));
        assert!(!contains(&d2, &matrix_unit(2, 0, 1)));
    }

    #[test]
    fn self_adjoint_density() {
        let m = StarAlgebra::full(2);
        let t2 = Subalgebra::block_upper_triangular(2, &[vec![0], vec![1]]).unwrap();
        assert!(check_ss_density(&t2, &m));
        assert!(!check_ss_density(&Subalgebra::from_star(&StarAlgebra::diagonal(2)), &m));
        assert!(check_ss_density(&Subalgebra::from_star(&m), &m));
    }

    #[test]
    fn diagonal_part() {
        let (a, d, phi) = make_block_character(2, &[vec![0], vec![1]]).unwrap();
        assert!(diagonal_part_check(&a, &d, &phi).unwrap());
        let (a, d, phi) = make_block_character(3, &[vec![0, 1, 2]]).unwrap();
        assert!(diagonal_part_check(&a, &d, &phi).unwrap());
    }

    #[test]
    fn bad_partitions() {
        assert!(matches!(validate_partition(3, &[vec![0, 1]]), Err(Error::BadPartition(_))));
        assert!(matches!(validate_partition(2, &[vec![0, 1], vec![1]]), Err(Error::BadPartition(_))));
        assert!(matches!(validate_partition(2, &[vec![0, 1], vec![]]), Err(Error::BadPartition(_))));
    }
}
