//! Small dense linear-algebra helpers shared by the modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

/// Relative singular-value threshold used for every kernel and rank decision.
pub const KERNEL_TOL: f64 = 1e-8;

fn threshold(sigma_max: f64) -> f64 {
    KERNEL_TOL * sigma_max.max(1.0)
}

/// Orthonormal basis (columns) of the kernel of `m`.
///
/// Singular values below `1e-8 * max(1, σ_max)` count as zero.
pub fn null_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    if rows == 0 {
        return DMatrix::identity(cols, cols);
    }
    // thin SVD only yields a full V when rows >= cols
    let padded;
    let a = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        padded = p;
        &padded
    } else {
        m
    };
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let sv = &svd.singular_values;
    let tol = threshold(sv.max());
    let keep: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] < tol).collect();
    let mut out = DMatrix::zeros(cols, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        out.set_column(c, &v_t.row(i).transpose());
    }
    out
}

/// Numerical rank with the same threshold as [`null_space`].
pub fn rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let tol = threshold(sv.max());
    sv.iter().filter(|&&s| s >= tol).count()
}

/// Orthonormal basis (columns) of the column space of `m`.
pub fn column_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(rows, 0);
    }
    let padded;
    let a = if cols < rows {
        let mut p = DMatrix::zeros(rows, rows);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        padded = p;
        &padded
    } else {
        m
    };
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("u requested");
    let sv = &svd.singular_values;
    let tol = threshold(sv.max());
    let keep: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] >= tol).collect();
    let mut out = DMatrix::zeros(rows, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        out.set_column(c, &u.column(i));
    }
    out
}

/// Gram–Schmidt in the inner product `metric`, preserving column order.
///
/// Fails when the columns are dependent.
pub fn orthonormalize(cols: &DMatrix<f64>, metric: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = cols.ncols();
    if n == 0 {
        return Ok(cols.clone());
    }
    let gram = cols.transpose() * metric * cols;
    let scale = gram.diagonal().max().max(1e-300);
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::RankDeficient("Gram matrix is not positive definite".into()))?;
    let l = chol.l();
    for i in 0..n {
        if l[(i, i)] * l[(i, i)] < KERNEL_TOL * scale {
            return Err(Error::RankDeficient(format!(
                "column {i} is dependent on the previous ones"
            )));
        }
    }
    let linv_t = l
        .transpose()
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient("singular triangular factor".into()))?;
    Ok(cols * linv_t)
}

/// Basis of the `metric`-orthogonal complement of `sub` inside the span of
/// `ambient` (both given as columns in a common coordinate system).
pub fn orthogonal_complement(
    sub: &DMatrix<f64>,
    ambient: &DMatrix<f64>,
    metric: &DMatrix<f64>,
) -> DMatrix<f64> {
    if sub.ncols() == 0 {
        return ambient.clone();
    }
    // ambient * c is orthogonal to sub  <=>  (subᵀ M ambient) c = 0
    let constraints = sub.transpose() * metric * ambient;
    let ker = null_space(&constraints);
    ambient * ker
}

/// `G^{-1/2}` for a symmetric positive definite `G`.
pub fn inv_sqrt_spd(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = g.nrows();
    if n == 0 {
        return Ok(g.clone());
    }
    let eig = SymmetricEigen::new(g.clone());
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let l = eig.eigenvalues[i];
        if l <= 0.0 {
            return Err(Error::RankDeficient(format!(
                "Gram matrix has non-positive eigenvalue {l:.3e}"
            )));
        }
        d[(i, i)] = 1.0 / l.sqrt();
    }
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Symmetrises in place and returns the eigenvalues in ascending order.
pub fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_vec(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Orthogonal projector onto the column span of an orthonormal basis.
pub fn projector(basis: &DMatrix<f64>) -> DMatrix<f64> {
    basis * basis.transpose()
}
