//! Seeded, splittable randomness.
//!
//! Every stream is keyed by `(seed, module, operation, index)` through a
//! SHA-256 digest, so sample `i` of an operation is the same no matter which
//! thread draws it or in which order.

use crate::linalg::{self, CMatrix, RVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

pub fn stream(seed: u64, module: &str, operation: &str, index: u64) -> Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((module.len() as u64).to_le_bytes());
    h.update(module.as_bytes());
    h.update((operation.len() as u64).to_le_bytes());
    h.update(operation.as_bytes());
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

pub fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn gaussian_vector(rng: &mut Rng, dim: usize) -> RVector {
    RVector::from_iterator(dim, (0..dim).map(|_| normal(rng)))
}

/// Uniform point on the unit sphere of `ℝ^dim`.
pub fn unit_sphere(rng: &mut Rng, dim: usize) -> RVector {
    loop {
        let v = gaussian_vector(rng, dim);
        let n = v.norm();
        if n > 1e-12 {
            return v.unscale(n);
        }
    }
}

pub fn uniform(rng: &mut Rng) -> f64 {
    rand::Rng::random::<f64>(rng)
}

pub fn complex_gaussian(rng: &mut Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| Complex64::new(normal(rng), normal(rng)))
}

/// Random Hermitian matrix from the Gaussian unitary ensemble.
pub fn hermitian(rng: &mut Rng, n: usize) -> CMatrix {
    linalg::hermitian_part(&complex_gaussian(rng, n, n))
}

/// Random `n×m` isometry (`m ≤ n`).
pub fn isometry(rng: &mut Rng, n: usize, m: usize) -> CMatrix {
    assert!(m <= n, "isometry needs m <= n");
    let g = complex_gaussian(rng, n, m);
    let q = g.qr().q();
    q.columns(0, m).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_keyed() {
        let a = gaussian_vector(&mut stream(1, "m", "op", 0), 4);
        let b = gaussian_vector(&mut stream(1, "m", "op", 0), 4);
        let c = gaussian_vector(&mut stream(1, "m", "op", 1), 4);
        let d = gaussian_vector(&mut stream(1, "mo", "p", 0), 4);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn isometry_is_isometric() {
        let v = isometry(&mut stream(3, "t", "iso", 0), 4, 2);
        let g = v.adjoint() * &v;
        assert!((g - linalg::identity(2)).norm() < 1e-12);
    }
}
