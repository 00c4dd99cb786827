//! Matrix realizations of the classical compact algebras.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{BlockKind, IdealBlock, LieAlgebra};
use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// A compact classical simple algebra by type and matrix size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Classical {
    Su { n: usize },
    So { n: usize },
}

impl Classical {
    pub fn dim(&self) -> usize {
        match *self {
            Classical::Su { n } => n * n - 1,
            Classical::So { n } => n * (n - 1) / 2,
        }
    }

    pub fn matrix_size(&self) -> usize {
        match *self {
            Classical::Su { n } | Classical::So { n } => n,
        }
    }

    pub fn name(&self) -> String {
        match *self {
            Classical::Su { n } => format!("su({n})"),
            Classical::So { n } => format!("so({n})"),
        }
    }

    pub fn basis(&self) -> Result<MatrixBasis> {
        match *self {
            Classical::Su { n } => MatrixBasis::su(n),
            Classical::So { n } => MatrixBasis::so(n),
        }
    }

    /// Number of linearly independent diagonal (Cartan) generators in the
    /// documented basis.
    pub fn rank(&self) -> usize {
        match *self {
            Classical::Su { n } => n - 1,
            Classical::So { n } => n / 2,
        }
    }
}

/// A basis of matrices, orthonormal for the pairing `-scale · Re tr(XY)`.
#[derive(Debug, Clone)]
pub struct MatrixBasis {
    pub mats: Vec<CMatrix>,
    pub labels: Vec<String>,
    pub scale: f64,
    /// Indices of the basis elements spanning the standard maximal torus.
    pub cartan: Vec<usize>,
}

fn unit(n: usize, a: usize, b: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    m[(a, b)] = Complex64::new(1.0, 0.0);
    m
}

fn commutator(x: &CMatrix, y: &CMatrix) -> CMatrix {
    x * y - y * x
}

impl MatrixBasis {
    /// `su(n)`: antisymmetric pairs `A_ab`, imaginary symmetric pairs
    /// `B_ab` (both `a < b`, lexicographic) and the diagonal generators
    /// `H_k = i·diag(1,…,1,−k,0,…)`; every element has unit norm for
    /// `-2·Re tr(XY)`.
    pub fn su(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("su(n) needs n >= 2, got {n}")));
        }
        let i = Complex64::new(0.0, 1.0);
        let mut mats = Vec::new();
        let mut labels = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                mats.push((unit(n, a, b) - unit(n, b, a)) * Complex64::new(0.5, 0.0));
                labels.push(format!("A{}{}", a + 1, b + 1));
            }
        }
        for a in 0..n {
            for b in a + 1..n {
                mats.push((unit(n, a, b) + unit(n, b, a)) * (i * 0.5));
                labels.push(format!("B{}{}", a + 1, b + 1));
            }
        }
        let mut cartan = Vec::new();
        for k in 1..n {
            let s = 1.0 / ((2 * k * (k + 1)) as f64).sqrt();
            let mut h = CMatrix::zeros(n, n);
            for m in 0..k {
                h[(m, m)] = i * s;
            }
            h[(k, k)] = i * (-(k as f64) * s);
            cartan.push(mats.len());
            mats.push(h);
            labels.push(format!("H{k}"));
        }
        Ok(MatrixBasis {
            mats,
            labels,
            scale: 2.0,
            cartan,
        })
    }

    /// `so(n)`: `e_rs = E_rs − E_sr` for `r < s`, orthonormal for `-½·tr(XY)`.
    pub fn so(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidArgument(format!("so(n) needs n >= 3, got {n}")));
        }
        if n == 4 {
            return Err(Error::InvalidArgument(
                "so(4) is not simple; use so(3) ⊕ so(3)".into(),
            ));
        }
        let mut mats = Vec::new();
        let mut labels = Vec::new();
        let mut cartan = Vec::new();
        for r in 0..n {
            for s in r + 1..n {
                if r % 2 == 0 && s == r + 1 {
                    cartan.push(mats.len());
                }
                mats.push(unit(n, r, s) - unit(n, s, r));
                labels.push(format!("e{}{}", r + 1, s + 1));
            }
        }
        Ok(MatrixBasis {
            mats,
            labels,
            scale: 0.5,
            cartan,
        })
    }

    /// The `-κ`-orthonormal basis of `su(3)` in which
    /// `[e3,e6] = √3/6 e1 − ½ e2`, `[e4,e7] = √3/6 e1 + ½ e2` and
    /// `[e5,e8] = √3/3 e1`.
    ///
    /// With `A_ab = (E_ab − E_ba)/√12` and `B_ab = i(E_ab + E_ba)/√12`:
    /// `e1 = i(E11 − E22)/√12`, `e2 = −i(E11 + E22 − 2E33)/6`, `e3 = A13`,
    /// `e4 = B23`, `e5 = A12`, `e6 = B13`, `e7 = A23`, `e8 = B12`.
    pub fn su3_standard() -> Self {
        let i = Complex64::new(0.0, 1.0);
        let s = 1.0 / 12f64.sqrt();
        let a = |p, q| (unit(3, p, q) - unit(3, q, p)) * Complex64::new(s, 0.0);
        let b = |p, q| (unit(3, p, q) + unit(3, q, p)) * (i * s);
        let e1 = (unit(3, 0, 0) - unit(3, 1, 1)) * (i * s);
        let e2 = (unit(3, 0, 0) + unit(3, 1, 1) - unit(3, 2, 2) * Complex64::new(2.0, 0.0))
            * (-i / 6.0);
        let mats = vec![e1, e2, a(0, 2), b(1, 2), a(0, 1), b(0, 2), a(1, 2), b(0, 1)];
        let labels = (1..=8).map(|k| format!("e{k}")).collect();
        MatrixBasis {
            mats,
            labels,
            scale: 6.0,
            cartan: vec![0, 1],
        }
    }

    pub fn dim(&self) -> usize {
        self.mats.len()
    }

    pub fn size(&self) -> usize {
        self.mats.first().map_or(0, |m| m.nrows())
    }

    pub fn pairing(&self, x: &CMatrix, y: &CMatrix) -> f64 {
        -self.scale * (x * y).trace().re
    }

    /// Coordinates of `m` in the basis, together with the norm of the part
    /// of `m` outside the span.
    pub fn coordinates(&self, m: &CMatrix) -> (DVector<f64>, f64) {
        let coords = DVector::from_iterator(
            self.dim(),
            self.mats.iter().map(|e| self.pairing(m, e)),
        );
        let mut back = CMatrix::zeros(m.nrows(), m.ncols());
        for (c, e) in coords.iter().zip(&self.mats) {
            back += e * Complex64::new(*c, 0.0);
        }
        let residual = (m - back).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        (coords, residual)
    }

    /// Structure constants from matrix commutators.
    pub fn algebra(&self, label: &str) -> Result<LieAlgebra> {
        let n = self.dim();
        let mut c = vec![0.0; n * n * n];
        for i in 0..n {
            for j in i + 1..n {
                let br = commutator(&self.mats[i], &self.mats[j]);
                let (coords, residual) = self.coordinates(&br);
                if residual > 1e-10 {
                    return Err(Error::NotLieAlgebra(format!(
                        "matrix span not closed under brackets (residual {residual:.3e})"
                    )));
                }
                for k in 0..n {
                    let v = if coords[k].abs() < 1e-14 { 0.0 } else { coords[k] };
                    c[(i * n + j) * n + k] = v;
                    c[(j * n + i) * n + k] = -v;
                }
            }
        }
        LieAlgebra::from_structure(
            n,
            c,
            vec![IdealBlock {
                label: label.to_string(),
                range: 0..n,
                kind: BlockKind::Simple,
            }],
            self.labels.clone(),
        )
    }

    /// Places each basis matrix of `self` as a diagonal block at `offset`
    /// inside `target` and returns the coordinate matrix
    /// (`target.dim() × self.dim()`).
    pub fn block_inclusion(&self, target: &MatrixBasis, offset: usize) -> Result<DMatrix<f64>> {
        let m = self.size();
        let n = target.size();
        if offset + m > n {
            return Err(Error::InvalidArgument(format!(
                "block of size {m} at offset {offset} does not fit in {n}×{n} matrices"
            )));
        }
        let mut out = DMatrix::zeros(target.dim(), self.dim());
        for (col, x) in self.mats.iter().enumerate() {
            let mut big = CMatrix::zeros(n, n);
            big.view_mut((offset, offset), (m, m)).copy_from(x);
            let (coords, residual) = target.coordinates(&big);
            if residual > 1e-10 {
                return Err(Error::InvalidArgument(format!(
                    "basis element {} does not lie in the target algebra",
                    self.labels[col]
                )));
            }
            out.set_column(col, &coords);
        }
        Ok(out)
    }
}
