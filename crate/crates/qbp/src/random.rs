//! Seeded random operators. Every generator is a pure function of its seed.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::operator::{DenseOperator, SiteLayout};

/// SplitMix64 finalizer; derives independent sub-seeds from a master seed.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn ginibre(rng: &mut impl Rng, d: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(d, d, |_, _| {
        Complex64::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        )
    })
}

/// GUE-type Hermitian matrix `(G + G†)/2` with standard complex Gaussian `G`.
pub fn random_hermitian(seed: u64, layout: &SiteLayout) -> DenseOperator {
    random_hermitian_with(&mut rng(seed), layout)
}

pub fn random_hermitian_with(rng: &mut impl Rng, layout: &SiteLayout) -> DenseOperator {
    let g = ginibre(rng, layout.dim());
    let h = (&g + g.adjoint()) * Complex64::new(0.5, 0.0);
    DenseOperator::new(layout.clone(), h).expect("dimension matches layout")
}

/// Random full-rank density matrix `G G† / Tr(G G†)`.
pub fn random_density(seed: u64, layout: &SiteLayout) -> DenseOperator {
    random_density_with(&mut rng(seed), layout)
}

pub fn random_density_with(rng: &mut impl Rng, layout: &SiteLayout) -> DenseOperator {
    let g = ginibre(rng, layout.dim());
    let w = &g * g.adjoint();
    let tr = w.trace().re;
    let w = (&w + w.adjoint()) * Complex64::new(0.5 / tr, 0.0);
    DenseOperator::new(layout.clone(), w).expect("dimension matches layout")
}

/// Density matrix mixed with the identity so that every eigenvalue is at least `floor`.
pub fn random_density_floored(seed: u64, layout: &SiteLayout, floor: f64) -> DenseOperator {
    let d = layout.dim() as f64;
    assert!(floor * d < 1.0, "floor {floor} too large for dimension {d}");
    let rho = random_density(seed, layout);
    &rho.scale(1.0 - floor * d) + &DenseOperator::identity(layout.clone()).scale(floor)
}

/// Unitary `exp(i H)` with `H` from [`random_hermitian`].
pub fn random_unitary(seed: u64, layout: &SiteLayout) -> DenseOperator {
    random_unitary_with(&mut rng(seed), layout)
}

pub fn random_unitary_with(rng: &mut impl Rng, layout: &SiteLayout) -> DenseOperator {
    let h = random_hermitian_with(rng, layout);
    let eig = h.hermitian_eig().expect("GUE sample is Hermitian");
    let n = eig.values.len();
    let mut scaled = eig.vectors.clone();
    for (j, &lam) in eig.values.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, lam);
        for i in 0..n {
            scaled[(i, j)] *= phase;
        }
    }
    DenseOperator::new(layout.clone(), &scaled * eig.vectors.adjoint())
        .expect("dimension matches layout")
}
