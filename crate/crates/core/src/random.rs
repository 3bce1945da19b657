//! Seeded random instances: unitaries, states, partitions, star algebras and
//! block-character instances.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::algebra::{commutant, StarAlgebra, Subalgebra};
use crate::error::Result;
use crate::hoffman_rossi::{make_block_character, DCharacter};
use crate::matrix::{c64, identity, orthonormalize, ComplexMatrix, ComplexVector, OperatorSubspace};
use crate::states::PositiveFunctional;

pub type TrialRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TrialRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for trial `index` of a run seeded with `master`.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64(re * s, im * s)
    })
}

/// Haar-distributed unitary from the QR factorization of a Ginibre matrix.
pub fn random_unitary(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    let qr = ginibre(rng, n, n).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c64(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// `X*X + δI` normalized to trace one, `δ = 1e-3`.
pub fn random_density(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    let x = ginibre(rng, n, n);
    let rho = x.adjoint() * &x + identity(n) * c64(1e-3, 0.0);
    let tr = rho.trace();
    rho / tr
}

/// Density of rank `rank` (no regularization), normalized.
pub fn random_low_rank_density(rng: &mut impl Rng, n: usize, rank: usize) -> ComplexMatrix {
    let x = ginibre(rng, rank, n);
    let rho = x.adjoint() * &x;
    let tr = rho.trace();
    rho / tr
}

pub fn random_state(rng: &mut impl Rng, n: usize) -> PositiveFunctional {
    PositiveFunctional::new(random_density(rng, n)).expect("regularized density is a state")
}

/// A faithful state whose density lies in `D′ ∩ M`, so `D` is in its centralizer.
pub fn random_central_state(rng: &mut impl Rng, d: &StarAlgebra, m: &StarAlgebra) -> Result<PositiveFunctional> {
    let c = commutant(d, m)?;
    let rho = c.project(&random_density(rng, m.n()))?;
    PositiveFunctional::state(rho)
}

/// Element of a subspace with standard complex Gaussian coordinates.
pub fn random_element(rng: &mut impl Rng, space: &OperatorSubspace) -> ComplexMatrix {
    let k = space.dim();
    let coords: ComplexVector = ginibre(rng, k, 1).column(0).into_owned();
    space.from_coordinates(&coords)
}

/// Random ordered partition of `0..n` into nonempty blocks.
pub fn random_partition(rng: &mut impl Rng, n: usize) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut blocks = vec![vec![idx[0]]];
    for &i in &idx[1..] {
        if rng.random_bool(0.5) {
            blocks.push(vec![i]);
        } else {
            blocks.last_mut().expect("nonempty").push(i);
        }
    }
    for b in &mut blocks {
        b.sort_unstable();
    }
    blocks
}

/// `⊕_i (M_{a_i} ⊗ I_{m_i})` with `Σ a_i m_i = n`, conjugated by a random unitary.
pub fn random_star_algebra(rng: &mut impl Rng, n: usize) -> StarAlgebra {
    let mut shape = Vec::new();
    let mut left = n;
    while left > 0 {
        let a = rng.random_range(1..=left);
        let max_m = left / a;
        let m = rng.random_range(1..=max_m);
        shape.push((a, m));
        left -= a * m;
    }
    let mut elems = Vec::new();
    let mut off = 0;
    for &(a, m) in &shape {
        for p in 0..a {
            for q in 0..a {
                let mut x = DMatrix::zeros(n, n);
                for s in 0..m {
                    x[(off + p * m + s, off + q * m + s)] = c64(1.0, 0.0);
                }
                elems.push(x);
            }
        }
        off += a * m;
    }
    let u = random_unitary(rng, n);
    let alg = StarAlgebra::from_spanning_set(&elems, identity(n)).expect("block algebra is valid");
    alg.conjugate(&u)
}

/// Block-character instance over a random partition, conjugated by a random unitary.
#[derive(Debug, Clone)]
pub struct BlockInstance {
    pub blocks: Vec<Vec<usize>>,
    pub unitary: ComplexMatrix,
    pub a: Subalgebra,
    pub d: StarAlgebra,
    pub phi: DCharacter,
}

pub fn random_block_instance(rng: &mut impl Rng, n: usize, conjugate: bool) -> Result<BlockInstance> {
    let blocks = random_partition(rng, n);
    let (a, d, phi) = make_block_character(n, &blocks)?;
    let unitary = if conjugate { random_unitary(rng, n) } else { identity(n) };
    Ok(BlockInstance {
        a: a.conjugate(&unitary),
        d: d.conjugate(&unitary),
        phi: phi.conjugate(&unitary),
        blocks,
        unitary,
    })
}

/// Random spanning set for a star algebra: two generic elements of it.
pub fn random_generators(rng: &mut impl Rng, alg: &StarAlgebra) -> Vec<ComplexMatrix> {
    vec![random_element(rng, alg.space()), random_element(rng, alg.space())]
}

/// Orthonormal basis of a random `k`-dimensional subspace of `M_n`.
pub fn random_subspace(rng: &mut impl Rng, n: usize, k: usize) -> OperatorSubspace {
    let elems: Vec<_> = (0..k).map(|_| ginibre(rng, n, n)).collect();
    orthonormalize(&elems).expect("nonempty")
}
