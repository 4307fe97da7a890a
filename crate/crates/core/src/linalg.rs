//! Small dense linear algebra kernels: Householder QR, triangular solves,
//! Cholesky, and least squares built on them.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{GpsError, Result};

/// Thin QR factorization `A = Q R` of an `n x k` matrix with `n >= k`.
#[derive(Debug, Clone)]
pub struct ThinQr {
    /// `n x k`, orthonormal columns.
    pub q: Array2<f64>,
    /// `k x k`, upper triangular.
    pub r: Array2<f64>,
}

impl ThinQr {
    /// Smallest `|R_ii|` relative to the Frobenius norm of the input.
    pub fn min_relative_diagonal(&self, scale: f64) -> f64 {
        let k = self.r.ncols();
        if k == 0 {
            return f64::INFINITY;
        }
        let smallest = (0..k)
            .map(|i| self.r[[i, i]].abs())
            .fold(f64::INFINITY, f64::min);
        if scale > 0.0 {
            smallest / scale
        } else {
            0.0
        }
    }

    /// True when some diagonal entry of `R` is below `tol * scale`.
    pub fn is_rank_deficient(&self, scale: f64, tol: f64) -> bool {
        self.min_relative_diagonal(scale) <= tol
    }
}

/// Householder QR. Panics never; returns an error for `n < k`.
pub fn householder_qr(a: ArrayView2<f64>) -> Result<ThinQr> {
    let (n, k) = a.dim();
    if n < k {
        return Err(GpsError::RankDeficient(format!(
            "QR needs at least as many rows as columns ({n} < {k})"
        )));
    }
    // Column-major working copy; each column contiguous.
    let mut cols: Vec<Vec<f64>> = (0..k).map(|j| a.column(j).to_vec()).collect();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut r = Array2::<f64>::zeros((k, k));

    for j in 0..k {
        let x = &cols[j][j..];
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut v = x.to_vec();
        if norm == 0.0 {
            // Zero column: identity reflector, R_jj = 0.
            reflectors.push(vec![0.0; n - j]);
            continue;
        }
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        for t in v.iter_mut() {
            *t /= vnorm;
        }
        for col in cols.iter_mut().skip(j) {
            let seg = &mut col[j..];
            let d: f64 = seg.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (s, vi) in seg.iter_mut().zip(&v) {
                *s -= 2.0 * d * vi;
            }
        }
        reflectors.push(v);
    }
    for j in 0..k {
        for i in 0..=j {
            r[[i, j]] = cols[j][i];
        }
    }

    // Accumulate Q = H_0 H_1 ... H_{k-1} applied to the first k unit vectors.
    let mut q = Array2::<f64>::zeros((n, k));
    for c in 0..k {
        let mut e = vec![0.0; n];
        e[c] = 1.0;
        for j in (0..k).rev() {
            let v = &reflectors[j];
            let seg = &mut e[j..];
            let d: f64 = seg.iter().zip(v).map(|(a, b)| a * b).sum();
            if d != 0.0 {
                for (s, vi) in seg.iter_mut().zip(v) {
                    *s -= 2.0 * d * vi;
                }
            }
        }
        for i in 0..n {
            q[[i, c]] = e[i];
        }
    }

    // Sign convention: non-negative diagonal of R.
    for i in 0..k {
        if r[[i, i]] < 0.0 {
            r.row_mut(i).mapv_inplace(|v| -v);
            q.column_mut(i).mapv_inplace(|v| -v);
        }
    }
    Ok(ThinQr { q, r })
}

/// Solve `R x = b` for upper-triangular `R`.
pub fn solve_upper(r: ArrayView2<f64>, b: ArrayView1<f64>) -> Result<Array1<f64>> {
    let k = r.nrows();
    let mut x = Array1::<f64>::zeros(k);
    for i in (0..k).rev() {
        let mut s = b[i];
        for j in (i + 1)..k {
            s -= r[[i, j]] * x[j];
        }
        let d = r[[i, i]];
        if d == 0.0 {
            return Err(GpsError::RankDeficient("singular triangular factor".into()));
        }
        x[i] = s / d;
    }
    Ok(x)
}

/// Solve `L x = b` for lower-triangular `L`.
pub fn solve_lower(l: ArrayView2<f64>, b: ArrayView1<f64>) -> Result<Array1<f64>> {
    let k = l.nrows();
    let mut x = Array1::<f64>::zeros(k);
    for i in 0..k {
        let mut s = b[i];
        for j in 0..i {
            s -= l[[i, j]] * x[j];
        }
        let d = l[[i, i]];
        if d == 0.0 {
            return Err(GpsError::RankDeficient("singular triangular factor".into()));
        }
        x[i] = s / d;
    }
    Ok(x)
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: ArrayView2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(GpsError::DimensionMismatch {
            expected: n,
            found: a.ncols(),
        });
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(GpsError::InvalidParameter(
                "matrix is not positive definite".into(),
            ));
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / d;
        }
    }
    Ok(l)
}

/// Frobenius norm.
pub fn frobenius(a: ArrayView2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Least squares via Householder QR; errors when `n <= k` or when the
/// factor is numerically singular.
pub fn lstsq_qr(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<Array1<f64>> {
    let (n, k) = x.dim();
    if n <= k {
        return Err(GpsError::RankDeficient(format!(
            "{n} observations for {k} predictors"
        )));
    }
    let qr = householder_qr(x)?;
    let scale = frobenius(x);
    if qr.is_rank_deficient(scale, 1e-12) {
        return Err(GpsError::RankDeficient(
            "design matrix is numerically rank deficient".into(),
        ));
    }
    let qty = qr.q.t().dot(&y);
    solve_upper(qr.r.view(), qty.view())
}

/// Least squares through the normal equations `XᵀX b = Xᵀy` with Cholesky.
pub fn lstsq_normal(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<Array1<f64>> {
    let gram = x.t().dot(&x);
    let rhs = x.t().dot(&y);
    let l = cholesky(gram.view()).map_err(|_| {
        GpsError::RankDeficient("normal equations are not positive definite".into())
    })?;
    let z = solve_lower(l.view(), rhs.view())?;
    solve_upper(l.t(), z.view())
}

/// Minimum-norm solution of an underdetermined full-row-rank system,
/// `b = Xᵀ (X Xᵀ)⁻¹ y`, computed from the QR factorization of `Xᵀ`.
pub fn min_norm_solution(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<Array1<f64>> {
    let xt = x.t();
    let qr = householder_qr(xt)?;
    if qr.is_rank_deficient(frobenius(x), 1e-12) {
        return Err(GpsError::RankDeficient(
            "rows of the design are linearly dependent".into(),
        ));
    }
    // Xᵀ = Q R  =>  X = Rᵀ Qᵀ ; solve Rᵀ z = y, b = Q z.
    let z = solve_lower(qr.r.t(), y)?;
    Ok(qr.q.dot(&z))
}

/// Column sums of squares.
pub fn column_sumsq(x: ArrayView2<f64>) -> Array1<f64> {
    x.map_axis(Axis(0), |c| c.iter().map(|v| v * v).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn qr_reconstructs_and_is_orthonormal() {
        let a = array![[1.0, 2.0, 0.5], [3.0, -1.0, 2.0], [0.0, 4.0, 1.0], [2.0, 2.0, -3.0]];
        let qr = householder_qr(a.view()).unwrap();
        let back = qr.q.dot(&qr.r);
        for (u, v) in back.iter().zip(a.iter()) {
            assert!((u - v).abs() < 1e-12);
        }
        let qtq = qr.q.t().dot(&qr.q);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((qtq[[i, j]] - e).abs() < 1e-12);
            }
            assert!(qr.r[[i, i]] >= 0.0);
        }
    }

    #[test]
    fn lstsq_routes_agree() {
        let x = array![[1.0, 0.3], [0.2, 1.0], [-0.5, 0.7], [0.9, -0.4], [0.1, 0.1]];
        let y = array![1.0, 2.0, 0.5, -1.0, 0.3];
        let a = lstsq_qr(x.view(), y.view()).unwrap();
        let b = lstsq_normal(x.view(), y.view()).unwrap();
        assert!((&a - &b).iter().all(|d| d.abs() < 1e-10));
    }

    #[test]
    fn min_norm_interpolates() {
        let x = array![[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]];
        let y = array![1.0, 2.0];
        let b = min_norm_solution(x.view(), y.view()).unwrap();
        let fit = x.dot(&b);
        assert!((fit[0] - 1.0).abs() < 1e-12 && (fit[1] - 2.0).abs() < 1e-12);
        // b lies in the row space: b = Xᵀ w.
        let w = lstsq_qr(x.t(), b.view()).unwrap();
        assert!((x.t().dot(&w) - &b).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(cholesky(a.view()).is_err());
    }

    #[test]
    fn collinear_columns_flagged() {
        let x = array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]];
        let y = array![1.0, 1.0, 1.0];
        assert!(matches!(
            lstsq_qr(x.view(), y.view()),
            Err(GpsError::RankDeficient(_))
        ));
    }
}
