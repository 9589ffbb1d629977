//! Small dense helpers shared by the numerical modules.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use ndarray_linalg::{Eig, Eigh, Solve, QR, SVD, UPLO};
use num_complex::Complex64 as c64;

use crate::error::{Error, Result};

pub type Mat = Array2<f64>;
pub type CMat = Array2<c64>;

pub const I: c64 = c64 { re: 0.0, im: 1.0 };

pub fn to_complex(m: &ArrayView2<f64>) -> CMat {
    m.mapv(|x| c64::new(x, 0.0))
}

pub fn dagger(m: &CMat) -> CMat {
    m.t().mapv(|z| z.conj())
}

pub fn max_abs(m: &ArrayView2<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn max_abs_c(m: &ArrayView2<c64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.norm()))
}

pub fn antisymmetry_defect(m: &ArrayView2<f64>) -> f64 {
    max_abs(&(m + &m.t()).view())
}

pub fn anti_hermiticity_defect(m: &CMat) -> f64 {
    max_abs_c(&(m + &dagger(m)).view())
}

// Real decompositions run through the complex LAPACK routines. The system
// OpenBLAS 0.3.20 selects a real double kernel on AVX-512 hosts that corrupts
// blocked real factorizations (LU from n ≈ 12, QR/SVD/symmetric eig from
// n ≈ 200), while every complex routine stays at rounding level. For real
// input the Householder-based complex routines return real factors, which
// `real_part` checks.

fn real_part(m: &CMat, what: &str) -> Result<Mat> {
    let imag = m.iter().fold(0.0f64, |acc, z| acc.max(z.im.abs()));
    if imag > 1e-10 {
        return Err(Error::Backend(format!("{what} of a real matrix returned imaginary parts {imag:.3e}")));
    }
    Ok(m.mapv(|z| z.re))
}

/// Largest singular value. Zero for empty matrices.
pub fn spectral_norm(m: &ArrayView2<f64>) -> f64 {
    spectral_norm_c(&to_complex(m).view())
}

pub fn spectral_norm_c(m: &ArrayView2<c64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let (_, s, _) = m.to_owned().svd(false, false).expect("svd of finite matrix");
    s.iter().cloned().fold(0.0, f64::max)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh_c(m: &CMat) -> Result<(Array1<f64>, CMat)> {
    if m.is_empty() {
        return Ok((Array1::zeros(0), CMat::zeros((0, 0))));
    }
    let h = (m + &dagger(m)).mapv(|z| z * 0.5).as_standard_layout().to_owned();
    // The backend hands row-major storage to LAPACK as its transpose, which
    // for a Hermitian matrix is the conjugate; undo that on the vectors.
    let (vals, vecs) = h.eigh(UPLO::Lower)?;
    Ok((vals, vecs.mapv(|z| z.conj())))
}

/// Eigen-decomposition of a real symmetric matrix, eigenvalues ascending.
pub fn eigh_r(m: &Mat) -> Result<(Array1<f64>, Mat)> {
    if m.is_empty() {
        return Ok((Array1::zeros(0), Mat::zeros((0, 0))));
    }
    let h = to_complex(&((m + &m.t()) * 0.5).view());
    let (vals, vecs) = eigh_c(&h)?;
    Ok((vals, real_part(&vecs, "symmetric eigendecomposition")?))
}

/// Thin QR of a real matrix.
pub fn qr_r(m: &Mat) -> Result<(Mat, Mat)> {
    let (q, r) = to_complex(&m.view()).qr()?;
    Ok((real_part(&q, "QR")?, real_part(&r, "QR")?))
}

pub fn eig_c(m: &CMat) -> Result<(Array1<c64>, CMat)> {
    if m.is_empty() {
        return Ok((Array1::zeros(0), CMat::zeros((0, 0))));
    }
    Ok(m.eig()?)
}

pub fn spectral_radius_c(m: &CMat) -> Result<f64> {
    let (vals, _) = eig_c(m)?;
    Ok(vals.iter().fold(0.0, |acc, z| acc.max(z.norm())))
}

/// Orthonormal basis of the column span, dropping directions whose singular
/// value is below `rel_tol` times the largest.
pub fn orthonormal_columns(v: &CMat, rel_tol: f64) -> Result<CMat> {
    let n = v.nrows();
    if v.ncols() == 0 {
        return Ok(CMat::zeros((n, 0)));
    }
    let (u, s, _) = v.svd(true, false)?;
    let u = u.expect("requested U");
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let keep = s.iter().filter(|&&x| x > rel_tol * smax && x > 0.0).count();
    Ok(u.slice(s![.., ..keep]).to_owned())
}

/// Real orthonormal bases of a conjugation-closed complex subspace and of its
/// orthogonal complement, read off the real projector onto it.
pub fn real_split(q: &CMat) -> Result<(Mat, Mat)> {
    let n = q.nrows();
    let p = q.dot(&dagger(q)).mapv(|z| z.re);
    let (vals, vecs) = eigh_r(&p)?;
    let up: Vec<usize> = (0..n).filter(|&i| vals[i] > 0.5).collect();
    let down: Vec<usize> = (0..n).filter(|&i| vals[i] <= 0.5).collect();
    Ok((vecs.select(Axis(1), &up), vecs.select(Axis(1), &down)))
}

pub fn kron_c(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = CMat::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == c64::new(0.0, 0.0) {
                continue;
            }
            out.slice_mut(s![i * br..(i + 1) * br, j * bc..(j + 1) * bc])
                .assign(&b.mapv(|x| x * aij));
        }
    }
    out
}

/// Solves X = A + B X B† for X by vectorisation (row-major vec, so
/// vec(B X B†) = (B ⊗ conj B) vec X).
pub fn stein_solve_c(a: &CMat, b: &CMat) -> Result<CMat> {
    let m = a.nrows();
    if m == 0 {
        return Ok(CMat::zeros((0, 0)));
    }
    let kb = kron_c(b, &b.mapv(|z| z.conj()));
    let lhs = CMat::eye(m * m) - kb;
    let rhs = Array1::from_iter(a.iter().cloned());
    let x = lhs
        .solve(&rhs)
        .map_err(|e| Error::Classification(format!("singular steady-state system: {e}")))?;
    let x = x.into_shape_with_order((m, m)).expect("square reshape");
    Ok(x)
}

/// Real version of [`stein_solve_c`]. Falls back to doubling iterations for
/// large blocks, where the vectorised system becomes too expensive.
pub fn stein_solve_r(a: &Mat, b: &Mat) -> Result<Mat> {
    let m = a.nrows();
    if m == 0 {
        return Ok(Mat::zeros((0, 0)));
    }
    if m > 40 {
        return Ok(stein_doubling(a, b));
    }
    let mut lhs = Mat::eye(m * m);
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in 0..m {
                    lhs[[i * m + j, k * m + l]] -= b[[i, k]] * b[[j, l]];
                }
            }
        }
    }
    let rhs = Array1::from_iter(a.iter().cloned());
    let x = solve_r(&lhs, &rhs)?;
    Ok(x.into_shape_with_order((m, m)).expect("square reshape"))
}

/// Real linear solve through the complex LU.
pub fn solve_r(m: &Mat, b: &Array1<f64>) -> Result<Array1<f64>> {
    let mc = to_complex(&m.view());
    let bc = b.mapv(|x| c64::new(x, 0.0));
    let x = mc
        .solve(&bc)
        .map_err(|e| Error::Classification(format!("singular steady-state system: {e}")))?;
    Ok(x.mapv(|z| z.re))
}

fn stein_doubling(a: &Mat, b: &Mat) -> Mat {
    let mut x = a.clone();
    let mut bk = b.clone();
    for _ in 0..200 {
        let inc = bk.dot(&x).dot(&bk.t());
        x = &x + &inc;
        bk = bk.dot(&bk);
        if max_abs(&inc.view()) < 1e-17 || max_abs(&bk.view()) < 1e-17 {
            break;
        }
    }
    x
}

/// Real antisymmetric part, (M - Mᵀ)/2.
pub fn antisymmetrize(m: &Mat) -> Mat {
    (m - &m.t()) * 0.5
}

pub fn anti_hermitize(m: &CMat) -> CMat {
    (m - &dagger(m)).mapv(|z| z * 0.5)
}

/// Least-squares slope and intercept of y against x.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Canonical antisymmetric pairing: Γ = O (⊕ λ_j J) Oᵀ with J = [[0,1],[-1,0]],
/// λ_j ≥ 0 sorted descending, O orthogonal.
///
/// The pairs come from the Hermitian eigenproblem of iΓ. For iΓ v = μ v with
/// μ > 0 and v = (x + i y)/√2, the real vectors (y, x) form an orthonormal pair
/// carrying +μ. The kernel is handled separately through ΓᵀΓ so that it gets a
/// real basis.
pub fn canonical_pairing(gamma: &Mat) -> Result<(Mat, Vec<f64>)> {
    let n = gamma.nrows();
    if n % 2 != 0 {
        return Err(Error::Shape(format!("odd mode count {n} has no pairing")));
    }
    let h = to_complex(&gamma.view()).mapv(|z| z * I);
    let (mu, v) = eigh_c(&h)?;
    // Pairing check: eigenvalues of iΓ come in ± pairs.
    for j in 0..n / 2 {
        let d = (mu[j] + mu[n - 1 - j]).abs();
        if d > 1e-10 {
            return Err(Error::NotAntisymmetric { defect: d });
        }
    }
    let zero_tol = 1e-11;
    let mut pairs: Vec<(f64, Array1<f64>, Array1<f64>)> = Vec::new();
    for j in (0..n).rev() {
        if mu[j] <= zero_tol {
            break;
        }
        let col = v.column(j);
        let x = col.mapv(|z| z.re * std::f64::consts::SQRT_2);
        let y = col.mapv(|z| z.im * std::f64::consts::SQRT_2);
        pairs.push((mu[j], y, x));
    }
    let kernel_dim = n - 2 * pairs.len();
    let mut o = Mat::zeros((n, n));
    for (p, (_, e1, e2)) in pairs.iter().enumerate() {
        o.column_mut(2 * p).assign(e1);
        o.column_mut(2 * p + 1).assign(e2);
    }
    let mut lambdas: Vec<f64> = pairs.iter().map(|p| p.0.min(1.0)).collect();
    if kernel_dim > 0 {
        let gtg = gamma.t().dot(gamma);
        let (_, kv) = eigh_r(&gtg)?;
        // Smallest eigenvalues of ΓᵀΓ span the (numerical) kernel; project out
        // the paired directions to keep the basis orthogonal.
        let mut kern = kv.slice(s![.., ..kernel_dim]).to_owned();
        if !pairs.is_empty() {
            let used = o.slice(s![.., ..2 * pairs.len()]).to_owned();
            kern = &kern - &used.dot(&used.t().dot(&kern));
        }
        let q = orthonormal_columns(&to_complex(&kern.view()), 1e-8)?.mapv(|z| z.re);
        if q.ncols() != kernel_dim {
            return Err(Error::Backend("kernel basis lost rank".into()));
        }
        let off = 2 * pairs.len();
        o.slice_mut(s![.., off..]).assign(&q);
        lambdas.extend(std::iter::repeat(0.0).take(kernel_dim / 2));
    }
    Ok((o, lambdas))
}

/// Builds ⊕ λ_j J.
pub fn paired_block(lambdas: &[f64]) -> Mat {
    let n = 2 * lambdas.len();
    let mut d = Mat::zeros((n, n));
    for (j, &l) in lambdas.iter().enumerate() {
        d[[2 * j, 2 * j + 1]] = l;
        d[[2 * j + 1, 2 * j]] = -l;
    }
    d
}

pub fn block_diag(a: &Mat, b: &Mat) -> Mat {
    let (n, m) = (a.nrows(), b.nrows());
    let mut out = Mat::zeros((n + m, n + m));
    out.slice_mut(s![..n, ..n]).assign(a);
    out.slice_mut(s![n.., n..]).assign(b);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hermitian_eigenvectors_solve_the_problem() {
        let h = CMat::from_shape_vec(
            (2, 2),
            vec![c64::new(1.0, 0.0), c64::new(0.3, 0.7), c64::new(0.3, -0.7), c64::new(-0.5, 0.0)],
        )
        .unwrap();
        let (w, v) = eigh_c(&h).unwrap();
        for j in 0..2 {
            let col = v.column(j).to_owned();
            let r = h.dot(&col) - col.mapv(|z| z * w[j]);
            assert!(r.iter().map(|z| z.norm()).sum::<f64>() < 1e-14);
        }
    }

    #[test]
    fn pairing_reconstructs_matrix() {
        let g = array![
            [0.0, 0.3, 0.1, 0.0],
            [-0.3, 0.0, 0.2, 0.4],
            [-0.1, -0.2, 0.0, 0.05],
            [0.0, -0.4, -0.05, 0.0]
        ];
        let (o, l) = canonical_pairing(&g).unwrap();
        let back = o.dot(&paired_block(&l)).dot(&o.t());
        assert!(max_abs(&(&back - &g).view()) < 1e-12);
        assert!(max_abs(&(o.t().dot(&o) - Mat::eye(4)).view()) < 1e-12);
        assert!(l[0] >= l[1]);
    }

    #[test]
    fn pairing_handles_kernel() {
        let mut g = Mat::zeros((6, 6));
        g[[0, 3]] = 0.7;
        g[[3, 0]] = -0.7;
        let (o, l) = canonical_pairing(&g).unwrap();
        assert_eq!(l.len(), 3);
        assert!((l[0] - 0.7).abs() < 1e-12 && l[1] == 0.0 && l[2] == 0.0);
        let back = o.dot(&paired_block(&l)).dot(&o.t());
        assert!(max_abs(&(&back - &g).view()) < 1e-12);
    }

    #[test]
    fn stein_solvers_agree_with_series() {
        let b = array![[0.5, 0.1], [-0.2, 0.3]];
        let a = array![[0.0, 0.3], [-0.3, 0.0]];
        let x = stein_solve_r(&a, &b).unwrap();
        let series = stein_doubling(&a, &b);
        assert!(max_abs(&(&x - &series).view()) < 1e-13);
        let xc = stein_solve_c(&to_complex(&a.view()), &to_complex(&b.view())).unwrap();
        assert!(max_abs(&(xc.mapv(|z| z.re) - &x).view()) < 1e-13);
    }

    #[test]
    fn real_decompositions_hold_at_large_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 320;
        let g = crate::sampling::gaussian_matrix(n, n, &mut rng);
        let (q, r) = qr_r(&g).unwrap();
        assert!(max_abs(&(q.dot(&r) - &g).view()) < 1e-10);
        assert!((spectral_norm(&q.view()) - 1.0).abs() < 1e-12);
        let sym = &g + &g.t();
        let (w, v) = eigh_r(&sym).unwrap();
        assert!(max_abs(&(sym.dot(&v) - v.dot(&Mat::from_diag(&w))).view()) < 1e-10);
    }

    #[test]
    fn real_solve_is_accurate_beyond_small_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [8usize, 16, 48] {
            let m = crate::sampling::gaussian_matrix(n, n, &mut rng) + Mat::eye(n) * 5.0;
            let b = Array1::from_iter((0..n).map(|i| i as f64 - 3.0));
            let x = solve_r(&m, &b).unwrap();
            let res = (m.dot(&x) - &b).iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(res < 1e-10, "n {n}: {res}");
        }
    }
}
