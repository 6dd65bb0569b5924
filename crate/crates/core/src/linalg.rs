//! Dense complex linear algebra helpers shared by every module.
//!
//! Hermitian matrices are identified with real Euclidean space through an
//! orthonormal basis under the real Frobenius inner product
//! `<A, B> = Re tr(A* B)`; see [`herm_basis`] and [`hvec`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;
pub type RVector = DVector<f64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Matrix unit `E_{ij}` of size `n`.
pub fn unit(n: usize, i: usize, j: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    m[(i, j)] = ONE;
    m
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn from_real(m: &RMatrix) -> CMatrix {
    m.map(re)
}

pub fn diag_real(d: &[f64]) -> CMatrix {
    let mut m = CMatrix::zeros(d.len(), d.len());
    for (i, &x) in d.iter().enumerate() {
        m[(i, i)] = re(x);
    }
    m
}

/// Kronecker product `a ⊗ b`; the outer index belongs to `a`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == ZERO {
                continue;
            }
            for p in 0..br {
                for q in 0..bc {
                    out[(i * br + p, j * bc + q)] = s * b[(p, q)];
                }
            }
        }
    }
    out
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    m.is_square() && (m - m.adjoint()).camax() <= tol
}

pub fn all_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Real Frobenius inner product `Re tr(a* b)`.
pub fn real_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// Complex Frobenius inner product `tr(a* b)`.
pub fn complex_inner(a: &CMatrix, b: &CMatrix) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// `Re tr(a b)` without forming the product.
pub fn re_trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..a.ncols() {
            let x = a[(i, k)];
            let y = b[(k, i)];
            acc += x.re * y.re - x.im * y.im;
        }
    }
    acc
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(m: &CMatrix) -> (RVector, CMatrix) {
    let h = hermitian_part(m);
    let eig = h.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = RVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigvalsh(m: &CMatrix) -> RVector {
    if m.nrows() == 0 {
        return RVector::zeros(0);
    }
    let mut v: Vec<f64> = hermitian_part(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    RVector::from_vec(v)
}

pub fn min_eig(m: &CMatrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    eigvalsh(m)[0]
}

pub fn max_eig(m: &CMatrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let v = eigvalsh(m);
    v[v.len() - 1]
}

/// Real symmetric realification `[[A, -B], [B, A]]` of `A + iB`.
///
/// Its spectrum is the spectrum of the Hermitian input with every
/// eigenvalue doubled in multiplicity.
pub fn realify(m: &CMatrix) -> RMatrix {
    let (n, c) = m.shape();
    let mut r = RMatrix::zeros(2 * n, 2 * c);
    for i in 0..n {
        for j in 0..c {
            let z = m[(i, j)];
            r[(i, j)] = z.re;
            r[(i + n, j + c)] = z.re;
            r[(i, j + c)] = -z.im;
            r[(i + n, j)] = z.im;
        }
    }
    r
}

/// Largest singular value.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if is_hermitian(m, 0.0) {
        let v = eigvalsh(m);
        return v[0].abs().max(v[v.len() - 1].abs());
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0_f64, |a, &b| a.max(b))
}

/// Top singular triple `(sigma, u, v)` with `m v = sigma u`.
pub fn top_singular(m: &CMatrix) -> (f64, DVector<Complex64>, DVector<Complex64>) {
    let svd = m.clone().svd(true, true);
    let mut best = 0;
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s > svd.singular_values[best] {
            best = i;
        }
    }
    let u = svd.u.as_ref().unwrap().column(best).into_owned();
    let v = svd.v_t.as_ref().unwrap().row(best).adjoint().into_owned();
    (svd.singular_values[best], u, v)
}

/// Clip the eigenvalues of a Hermitian matrix into `[lo, hi]`.
pub fn clip_spectrum(m: &CMatrix, lo: f64, hi: f64) -> CMatrix {
    let (vals, vecs) = eigh(m);
    let clipped = vals.map(|x| x.clamp(lo, hi));
    rebuild(&vecs, &clipped)
}

pub fn rebuild(vecs: &CMatrix, vals: &RVector) -> CMatrix {
    let mut scaled = vecs.clone();
    for (j, &lam) in vals.iter().enumerate() {
        scaled.column_mut(j).scale_mut(lam);
    }
    hermitian_part(&(scaled * vecs.adjoint()))
}

/// Orthonormal basis of `H_n` under the real Frobenius inner product.
pub fn herm_basis(n: usize) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(n * n);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..n {
        out.push(unit(n, i, i));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let mut a = CMatrix::zeros(n, n);
            a[(i, j)] = re(s);
            a[(j, i)] = re(s);
            out.push(a);
            let mut b = CMatrix::zeros(n, n);
            b[(i, j)] = Complex64::new(0.0, -s);
            b[(j, i)] = Complex64::new(0.0, s);
            out.push(b);
        }
    }
    out
}

/// Coordinates of a Hermitian matrix in [`herm_basis`].
pub fn hvec(m: &CMatrix) -> RVector {
    let n = m.nrows();
    let s = std::f64::consts::SQRT_2;
    let mut v = Vec::with_capacity(n * n);
    for i in 0..n {
        v.push(m[(i, i)].re);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let z = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            v.push(s * z.re);
            v.push(-s * z.im);
        }
    }
    RVector::from_vec(v)
}

/// Inverse of [`hvec`].
pub fn hmat(v: &RVector, n: usize) -> CMatrix {
    assert_eq!(v.len(), n * n, "hmat: coordinate length mismatch");
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = re(v[i]);
    }
    let mut k = n;
    for i in 0..n {
        for j in (i + 1)..n {
            let z = Complex64::new(s * v[k], -s * v[k + 1]);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            k += 2;
        }
    }
    m
}

/// Orthonormalize Hermitian matrices under the real inner product,
/// discarding members whose residual norm falls below `tol`.
pub fn orthonormalize_real(mats: &[CMatrix], tol: f64) -> Vec<CMatrix> {
    let mut out: Vec<CMatrix> = Vec::new();
    for m in mats {
        let mut r = m.clone();
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for q in &out {
                let c = real_inner(q, &r);
                r -= q.scale(c);
            }
        }
        let nrm = r.norm();
        if nrm > tol {
            out.push(r.unscale(nrm));
        }
    }
    out
}

/// Orthonormalize under the complex inner product `tr(a* b)`.
pub fn orthonormalize_complex(mats: &[CMatrix], tol: f64) -> Vec<CMatrix> {
    let mut out: Vec<CMatrix> = Vec::new();
    for m in mats {
        let mut r = m.clone();
        for _ in 0..2 {
            for q in &out {
                let c = complex_inner(q, &r);
                r -= q * c;
            }
        }
        let nrm = r.norm();
        if nrm > tol {
            out.push(r.unscale(nrm));
        }
    }
    out
}

/// Singular values of a real matrix, descending.
pub fn singular_values(m: &RMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Numerical rank: singular values above `tol` (absolute).
pub fn rank(m: &RMatrix, tol: f64) -> usize {
    singular_values(m).iter().filter(|&&s| s > tol).count()
}

/// Orthonormal basis (columns) of the null space of `m`.
pub fn nullspace(m: &RMatrix, tol: f64) -> RMatrix {
    let n = m.ncols();
    if m.nrows() == 0 {
        return RMatrix::identity(n, n);
    }
    // pad to square so that the full right singular basis is available
    let rows = m.nrows().max(n);
    let mut padded = RMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.unwrap();
    let cols: Vec<RVector> = (0..n)
        .filter(|&i| svd.singular_values[i] <= tol)
        .map(|i| vt.row(i).transpose())
        .collect();
    if cols.is_empty() {
        RMatrix::zeros(n, 0)
    } else {
        RMatrix::from_columns(&cols)
    }
}

/// Orthonormal basis (columns) of the column space of `m`.
pub fn column_space(m: &RMatrix, tol: f64) -> RMatrix {
    if m.ncols() == 0 || m.nrows() == 0 {
        return RMatrix::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.unwrap();
    let cols: Vec<RVector> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > tol)
        .map(|i| u.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        RMatrix::zeros(m.nrows(), 0)
    } else {
        RMatrix::from_columns(&cols)
    }
}

/// Least-squares solution of `a x = b` via the pseudo-inverse.
pub fn lstsq(a: &RMatrix, b: &RVector, tol: f64) -> RVector {
    if a.ncols() == 0 {
        return RVector::zeros(0);
    }
    let svd = a.clone().svd(true, true);
    svd.solve(b, tol).unwrap_or_else(|_| RVector::zeros(a.ncols()))
}

/// Orthonormal basis (columns) of the range of a PSD matrix: eigenvectors
/// with eigenvalue above `tol`.
pub fn psd_range(m: &CMatrix, tol: f64) -> CMatrix {
    let (vals, vecs) = eigh(m);
    let cols: Vec<_> = (0..vals.len())
        .filter(|&i| vals[i] > tol)
        .map(|i| vecs.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        CMatrix::zeros(m.nrows(), 0)
    } else {
        CMatrix::from_columns(&cols)
    }
}

/// Orthonormal basis (columns) of the kernel of a PSD matrix.
pub fn psd_kernel(m: &CMatrix, tol: f64) -> CMatrix {
    let (vals, vecs) = eigh(m);
    let cols: Vec<_> = (0..vals.len())
        .filter(|&i| vals[i] <= tol)
        .map(|i| vecs.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        CMatrix::zeros(m.nrows(), 0)
    } else {
        CMatrix::from_columns(&cols)
    }
}

/// Block matrix `[[a, b], [c, d]]`.
pub fn block2(a: &CMatrix, b: &CMatrix, c: &CMatrix, d: &CMatrix) -> CMatrix {
    let (p, q) = (a.nrows(), a.ncols());
    let mut out = CMatrix::zeros(p + c.nrows(), q + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, q), b.shape()).copy_from(b);
    out.view_mut((p, 0), c.shape()).copy_from(c);
    out.view_mut((p, q), d.shape()).copy_from(d);
    out
}

/// Block-diagonal direct sum.
pub fn direct_sum(blocks: &[CMatrix]) -> CMatrix {
    let r: usize = blocks.iter().map(|b| b.nrows()).sum();
    let c: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::zeros(r, c);
    let (mut i, mut j) = (0, 0);
    for b in blocks {
        out.view_mut((i, j), b.shape()).copy_from(b);
        i += b.nrows();
        j += b.ncols();
    }
    out
}

/// The `(a, b)` block of size `k×k` in a matrix partitioned into `k×k` blocks.
pub fn block(m: &CMatrix, a: usize, b: usize, k: usize) -> CMatrix {
    m.view((a * k, b * k), (k, k)).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample_hermitian() -> CMatrix {
        CMatrix::from_row_slice(
            3,
            3,
            &[
                re(2.0),
                Complex64::new(0.5, 1.0),
                re(-1.0),
                Complex64::new(0.5, -1.0),
                re(0.0),
                Complex64::new(0.0, 0.3),
                re(-1.0),
                Complex64::new(0.0, -0.3),
                re(1.5),
            ],
        )
    }

    #[test]
    fn hvec_round_trips_and_is_isometric() {
        let m = sample_hermitian();
        let v = hvec(&m);
        assert_relative_eq!((hmat(&v, 3) - &m).norm(), 0.0, epsilon = 1e-14);
        assert_relative_eq!(v.norm(), m.norm(), epsilon = 1e-12);
        for (k, b) in herm_basis(3).iter().enumerate() {
            assert_relative_eq!(real_inner(b, &m), v[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn eigenvalues_agree_with_realification() {
        let m = sample_hermitian();
        let direct = eigvalsh(&m);
        let mut doubled: Vec<f64> = realify(&m).symmetric_eigenvalues().iter().copied().collect();
        doubled.sort_by(f64::total_cmp);
        for (k, lam) in direct.iter().enumerate() {
            assert_relative_eq!(*lam, doubled[2 * k], epsilon = 1e-12);
            assert_relative_eq!(*lam, doubled[2 * k + 1], epsilon = 1e-12);
        }
    }

    #[test]
    fn clip_and_norms() {
        let d = diag_real(&[1.0, -1.0]);
        assert_relative_eq!((clip_spectrum(&d, 0.0, f64::INFINITY) - diag_real(&[1.0, 0.0])).norm(), 0.0);
        assert_relative_eq!(spectral_norm(&(unit(2, 0, 1) + unit(2, 1, 0))), 1.0, epsilon = 1e-14);
        assert_relative_eq!(spectral_norm(&unit(2, 0, 1)), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn nullspace_of_rank_one() {
        let m = RMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let n = nullspace(&m, 1e-12);
        assert_eq!(n.ncols(), 2);
        assert!((&m * &n).norm() < 1e-12);
    }

    #[test]
    fn kron_ordering() {
        let a = unit(2, 0, 1);
        let b = unit(2, 1, 0);
        let k = kron(&a, &b);
        assert_eq!(k[(1, 2)], ONE);
        assert_relative_eq!(k.norm(), 1.0);
    }
}
