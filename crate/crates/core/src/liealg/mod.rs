//! Compact Lie algebras as dense structure-constant tensors.
//!
//! `c(i, j, k)` is the coefficient of `e_k` in `[e_i, e_j]`. Every algebra
//! carries the list of its simple ideals (and an optional center) as index
//! ranges of the basis.

pub mod matrix;

use std::ops::Range;

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::linalg;
use crate::{Error, Result};

pub use matrix::{CMatrix, Classical, MatrixBasis};

/// Tolerance for the structural checks on constructed algebras.
pub const STRUCTURE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Simple,
    Center,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdealBlock {
    pub label: String,
    pub range: Range<usize>,
    pub kind: BlockKind,
}

impl IdealBlock {
    pub fn len(&self) -> usize {
        self.range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct LieAlgebra {
    dim: usize,
    structure: Vec<f64>,
    blocks: Vec<IdealBlock>,
    basis_labels: Vec<String>,
    killing: OnceLock<DMatrix<f64>>,
}

/// A symmetric bilinear form in the basis of some algebra.
#[derive(Debug, Clone)]
pub struct BilinearForm {
    pub matrix: DMatrix<f64>,
    pub ad_invariant: bool,
}

impl BilinearForm {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        BilinearForm {
            matrix,
            ad_invariant: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn eval(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        (x.transpose() * &self.matrix * y)[(0, 0)]
    }

    /// Largest `|B([X,Y],Z) + B(Y,[X,Z])|` over basis triples.
    pub fn invariance_residual(&self, alg: &LieAlgebra) -> f64 {
        let n = alg.dim();
        let mut worst: f64 = 0.0;
        for x in 0..n {
            let ad = alg.ad_basis(x);
            // B(ad_x Y, Z) + B(Y, ad_x Z) = (ad_xᵀ B + B ad_x)_{YZ}
            let m = ad.transpose() * &self.matrix + &self.matrix * &ad;
            worst = worst.max(linalg::max_abs(&m));
        }
        worst
    }
}

impl LieAlgebra {
    /// Builds an algebra from a dense tensor in `[i][j][k]` row-major order,
    /// checking antisymmetry, the Jacobi identity and that the blocks are
    /// commuting ideals.
    pub fn from_structure(
        dim: usize,
        structure: Vec<f64>,
        blocks: Vec<IdealBlock>,
        basis_labels: Vec<String>,
    ) -> Result<Self> {
        if structure.len() != dim * dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim * dim,
                got: structure.len(),
            });
        }
        if basis_labels.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: basis_labels.len(),
            });
        }
        let covered: usize = blocks.iter().map(|b| b.len()).sum();
        let mut next = 0;
        for b in &blocks {
            if b.range.start != next {
                return Err(Error::NotLieAlgebra(format!(
                    "ideal blocks must tile the basis contiguously (block {})",
                    b.label
                )));
            }
            next = b.range.end;
        }
        if covered != dim || next != dim {
            return Err(Error::NotLieAlgebra(format!(
                "ideal blocks cover {covered} of {dim} basis vectors"
            )));
        }
        let alg = LieAlgebra {
            dim,
            structure,
            blocks,
            basis_labels,
            killing: OnceLock::new(),
        };
        alg.validate()?;
        Ok(alg)
    }

    /// Like [`LieAlgebra::from_structure`] but without any validation. Used to
    /// build deliberately broken inputs.
    pub fn from_structure_unchecked(dim: usize, structure: Vec<f64>) -> Self {
        LieAlgebra {
            dim,
            structure,
            blocks: vec![IdealBlock {
                label: "g1".into(),
                range: 0..dim,
                kind: BlockKind::Simple,
            }],
            basis_labels: (1..=dim).map(|i| format!("e{i}")).collect(),
            killing: OnceLock::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if self.c(i, j, k) != -self.c(j, i, k) {
                        return Err(Error::NotLieAlgebra(format!(
                            "structure constants not antisymmetric at ({i},{j},{k})"
                        )));
                    }
                }
            }
        }
        let jac = self.jacobi_residual();
        if jac > STRUCTURE_TOL {
            return Err(Error::NotLieAlgebra(format!("Jacobi residual {jac:.3e}")));
        }
        let owner = self.block_of_index();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let v = self.c(i, j, k);
                    if v.abs() > STRUCTURE_TOL && (owner[i] != owner[j] || owner[j] != owner[k]) {
                        return Err(Error::NotLieAlgebra(format!(
                            "bracket [{},{}] leaves the ideal blocks",
                            self.basis_labels[i], self.basis_labels[j]
                        )));
                    }
                }
            }
        }
        for b in &self.blocks {
            if b.kind == BlockKind::Center {
                for i in b.range.clone() {
                    for j in 0..n {
                        for k in 0..n {
                            if self.c(i, j, k).abs() > STRUCTURE_TOL {
                                return Err(Error::NotLieAlgebra(format!(
                                    "center block {} is not central",
                                    b.label
                                )));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn block_of_index(&self) -> Vec<usize> {
        let mut owner = vec![0; self.dim];
        for (b, blk) in self.blocks.iter().enumerate() {
            for i in blk.range.clone() {
                owner[i] = b;
            }
        }
        owner
    }

    /// `su(n)` in the basis of [`MatrixBasis::su`].
    pub fn su(n: usize) -> Result<Self> {
        MatrixBasis::su(n)?.algebra(&format!("su({n})"))
    }

    /// `so(n)` in the basis `e_rs = E_rs − E_sr`; `so(4)` is rejected.
    pub fn so(n: usize) -> Result<Self> {
        MatrixBasis::so(n)?.algebra(&format!("so({n})"))
    }

    /// `su(3)` in the `-κ`-orthonormal basis of [`MatrixBasis::su3_standard`].
    pub fn su3_standard() -> Self {
        MatrixBasis::su3_standard()
            .algebra("su(3)")
            .expect("su(3) standard basis is closed")
    }

    pub fn abelian(dim: usize) -> Self {
        LieAlgebra {
            dim,
            structure: vec![0.0; dim * dim * dim],
            blocks: if dim == 0 {
                Vec::new()
            } else {
                vec![IdealBlock {
                    label: "z".into(),
                    range: 0..dim,
                    kind: BlockKind::Center,
                }]
            },
            basis_labels: (1..=dim).map(|i| format!("t{i}")).collect(),
            killing: OnceLock::new(),
        }
    }

    /// Direct sum with simple blocks relabelled `g1, g2, …` and central
    /// blocks `z`.
    pub fn direct_sum(parts: &[LieAlgebra]) -> Result<Self> {
        Self::direct_sum_labeled(parts, "g")
    }

    pub fn direct_sum_labeled(parts: &[LieAlgebra], prefix: &str) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidArgument("direct sum of no algebras".into()));
        }
        let dim: usize = parts.iter().map(|p| p.dim).sum();
        let mut c = vec![0.0; dim * dim * dim];
        let mut blocks = Vec::new();
        let mut labels = Vec::new();
        let mut offset = 0;
        let mut simple = 0;
        let mut central = 0;
        for p in parts {
            let m = p.dim;
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        c[((offset + i) * dim + offset + j) * dim + offset + k] = p.c(i, j, k);
                    }
                }
            }
            for b in &p.blocks {
                let label = match b.kind {
                    BlockKind::Simple => {
                        simple += 1;
                        format!("{prefix}{simple}")
                    }
                    BlockKind::Center => {
                        central += 1;
                        if central == 1 {
                            "z".to_string()
                        } else {
                            format!("z{central}")
                        }
                    }
                };
                blocks.push(IdealBlock {
                    label,
                    range: b.range.start + offset..b.range.end + offset,
                    kind: b.kind,
                });
            }
            labels.extend(p.basis_labels.iter().cloned());
            offset += m;
        }
        Ok(LieAlgebra {
            dim,
            structure: c,
            blocks,
            basis_labels: labels,
            killing: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[IdealBlock] {
        &self.blocks
    }

    pub fn simple_blocks(&self) -> impl Iterator<Item = &IdealBlock> {
        self.blocks.iter().filter(|b| b.kind == BlockKind::Simple)
    }

    pub fn center_indices(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .filter(|b| b.kind == BlockKind::Center)
            .flat_map(|b| b.range.clone())
            .collect()
    }

    pub fn basis_labels(&self) -> &[String] {
        &self.basis_labels
    }

    pub fn structure(&self) -> &[f64] {
        &self.structure
    }

    #[inline]
    pub fn c(&self, i: usize, j: usize, k: usize) -> f64 {
        self.structure[(i * self.dim + j) * self.dim + k]
    }

    pub fn bracket(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let n = self.dim;
        let mut out = DVector::zeros(n);
        for i in 0..n {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                let xy = x[i] * y[j];
                if xy == 0.0 {
                    continue;
                }
                let base = (i * n + j) * n;
                for k in 0..n {
                    out[k] += xy * self.structure[base + k];
                }
            }
        }
        out
    }

    /// `ad(e_i)` as a matrix.
    pub fn ad_basis(&self, i: usize) -> DMatrix<f64> {
        let n = self.dim;
        DMatrix::from_fn(n, n, |k, l| self.c(i, l, k))
    }

    /// Matrix of `Y ↦ [X, Y]`.
    pub fn ad_matrix(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let n = self.dim;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            if x[i] != 0.0 {
                m += self.ad_basis(i) * x[i];
            }
        }
        Ok(m)
    }

    /// `κ(X, Y) = tr(ad X ∘ ad Y)`.
    pub fn killing_form(&self) -> BilinearForm {
        BilinearForm {
            matrix: self.killing.get_or_init(|| self.compute_killing()).clone(),
            ad_invariant: true,
        }
    }

    fn compute_killing(&self) -> DMatrix<f64> {
        let n = self.dim;
        let ads: Vec<DMatrix<f64>> = (0..n).map(|i| self.ad_basis(i)).collect();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = ads[i].component_mul(&ads[j].transpose()).sum();
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }

    /// Max-norm of the Jacobiator over all basis triples.
    pub fn jacobi_residual(&self) -> f64 {
        // Jacobi is equivalent to ad([e_i, e_j]) = [ad e_i, ad e_j]
        let n = self.dim;
        let ads: Vec<DMatrix<f64>> = (0..n).map(|i| self.ad_basis(i)).collect();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut lhs = DMatrix::zeros(n, n);
                for m in 0..n {
                    let c = self.c(i, j, m);
                    if c != 0.0 {
                        lhs += &ads[m] * c;
                    }
                }
                let rhs = &ads[i] * &ads[j] - &ads[j] * &ads[i];
                worst = worst.max((lhs - rhs).amax());
            }
        }
        worst
    }

    /// Same algebra with every basis vector multiplied by `factor`.
    pub fn rescaled(&self, factor: f64) -> Self {
        LieAlgebra {
            dim: self.dim,
            structure: self.structure.iter().map(|c| c * factor).collect(),
            blocks: self.blocks.clone(),
            basis_labels: self.basis_labels.clone(),
            killing: OnceLock::new(),
        }
    }

    /// Restriction of the structure to a subalgebra spanned by `cols`
    /// (columns in the basis of `self`), expressed in that spanning basis.
    pub fn subalgebra_structure(&self, cols: &DMatrix<f64>) -> Result<Vec<f64>> {
        let m = cols.ncols();
        let gram = cols.transpose() * cols;
        let inv = gram
            .try_inverse()
            .ok_or_else(|| Error::RankDeficient("subalgebra basis is dependent".into()))?;
        let pinv = inv * cols.transpose();
        let mut c = vec![0.0; m * m * m];
        for a in 0..m {
            for b in a + 1..m {
                let br = self.bracket(&cols.column(a).into_owned(), &cols.column(b).into_owned());
                let coords = &pinv * &br;
                let back = cols * &coords;
                if linalg::max_abs_vec(&(back - &br)) > STRUCTURE_TOL {
                    return Err(Error::NotLieAlgebra("span is not a subalgebra".into()));
                }
                for k in 0..m {
                    c[(a * m + b) * m + k] = coords[k];
                    c[(b * m + a) * m + k] = -coords[k];
                }
            }
        }
        Ok(c)
    }
}

/// `Wᵀ B W` for a basis `W` (columns) of a subspace.
pub fn restrict_form(b: &BilinearForm, basis: &DMatrix<f64>) -> Result<BilinearForm> {
    if basis.nrows() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: b.dim(),
            got: basis.nrows(),
        });
    }
    if linalg::rank(basis) < basis.ncols() {
        return Err(Error::RankDeficient(
            "subspace basis has dependent columns".into(),
        ));
    }
    Ok(BilinearForm {
        matrix: basis.transpose() * &b.matrix * basis,
        ad_invariant: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force Killing form straight from the definition, used as an
    /// oracle for the vectorised implementation.
    fn killing_oracle(alg: &LieAlgebra) -> DMatrix<f64> {
        let n = alg.dim();
        DMatrix::from_fn(n, n, |i, j| {
            let mut t = 0.0;
            for k in 0..n {
                for l in 0..n {
                    t += alg.c(i, l, k) * alg.c(j, k, l);
                }
            }
            t
        })
    }

    #[test]
    fn su2_constants_are_cyclic() {
        let su2 = LieAlgebra::su(2).unwrap();
        assert_eq!(su2.dim(), 3);
        assert!((su2.c(0, 1, 2) - 1.0).abs() < 1e-15);
        assert!((su2.c(1, 2, 0) - 1.0).abs() < 1e-15);
        assert!((su2.c(2, 0, 1) - 1.0).abs() < 1e-15);
        assert_eq!(su2.jacobi_residual(), 0.0);
        let k = su2.killing_form().matrix;
        assert!(linalg::max_abs(&(k.clone() + DMatrix::identity(3, 3) * 2.0)) < 1e-14);
        assert!(linalg::max_abs(&(k - killing_oracle(&su2))) < 1e-14);
    }

    #[test]
    fn su2_ad_of_first_vector() {
        let su2 = LieAlgebra::su(2).unwrap();
        let ad = su2.ad_matrix(&DVector::from_vec(vec![1.0, 0.0, 0.0])).unwrap();
        let mut expect = DMatrix::zeros(3, 3);
        expect[(2, 1)] = 1.0;
        expect[(1, 2)] = -1.0;
        assert!(linalg::max_abs(&(ad - expect)) < 1e-15);
        assert!(su2.ad_matrix(&DVector::zeros(2)).is_err());
        assert_eq!(linalg::max_abs(&su2.ad_matrix(&DVector::zeros(3)).unwrap()), 0.0);
    }

    #[test]
    fn su3_standard_matches_printed_brackets() {
        let su3 = LieAlgebra::su3_standard();
        let r3 = 3f64.sqrt();
        // 0-based indices: e3=2, e6=5, e4=3, e7=6, e5=4, e8=7
        assert!((su3.c(2, 5, 0) - r3 / 6.0).abs() < 1e-14);
        assert!((su3.c(2, 5, 1) + 0.5).abs() < 1e-14);
        assert!((su3.c(3, 6, 0) - r3 / 6.0).abs() < 1e-14);
        assert!((su3.c(3, 6, 1) - 0.5).abs() < 1e-14);
        assert!((su3.c(4, 7, 0) - r3 / 3.0).abs() < 1e-14);
        // -κ orthonormal
        let k = su3.killing_form().matrix;
        assert!(linalg::max_abs(&(k + DMatrix::identity(8, 8))) < 1e-13);
        // only c36^1 c36^2 and c47^1 c47^2 (and transposes) mix directions
        let n = 8;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in k + 1..n {
                        let p = su3.c(i, j, k) * su3.c(i, j, l);
                        if p.abs() > 1e-14 {
                            let pair = (i.min(j), i.max(j));
                            assert!(pair == (2, 5) || pair == (3, 6), "{i} {j} {k} {l}");
                            assert_eq!((k, l), (0, 1));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn su3_trace_basis_is_scaled_standard() {
        // κ = -3·I in the trace basis; constants scale by √3
        let su3 = LieAlgebra::su(3).unwrap();
        let k = su3.killing_form().matrix;
        assert!(linalg::max_abs(&(k + DMatrix::identity(8, 8) * 3.0)) < 1e-12);
        assert!(su3.jacobi_residual() < 1e-12);
    }

    #[test]
    fn so_algebras() {
        let so3 = LieAlgebra::so(3).unwrap();
        // e12, e13, e23: [e12, e13] = -e23
        assert!((so3.c(0, 1, 2) + 1.0).abs() < 1e-15);
        assert!((so3.c(0, 1, 2).abs() - 1.0).abs() < 1e-15);
        for n in [3, 5, 6] {
            let so = LieAlgebra::so(n).unwrap();
            let k = so.killing_form().matrix;
            let expect = -2.0 * (n as f64 - 2.0);
            assert!(linalg::max_abs(&(k - DMatrix::identity(so.dim(), so.dim()) * expect)) < 1e-12);
        }
        assert!(LieAlgebra::so(4).is_err());
        assert!(LieAlgebra::so(2).is_err());
        assert!(LieAlgebra::su(1).is_err());
    }

    #[test]
    fn so5_basis_is_nice() {
        let so5 = LieAlgebra::so(5).unwrap();
        let n = so5.dim();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in k + 1..n {
                        assert!((so5.c(i, j, k) * so5.c(i, j, l)).abs() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn direct_sums() {
        let su2 = LieAlgebra::su(2).unwrap();
        let su3 = LieAlgebra::su(3).unwrap();
        let s = LieAlgebra::direct_sum(&[su2.clone(), su3]).unwrap();
        assert_eq!(s.dim(), 11);
        assert_eq!(s.blocks()[0].label, "g1");
        assert_eq!(s.blocks()[0].range, 0..3);
        assert_eq!(s.blocks()[1].label, "g2");
        assert_eq!(s.blocks()[1].range, 3..11);
        let k = s.killing_form().matrix;
        assert!(linalg::sorted_eigenvalues(&(-k))[0] > 0.0);

        let d = LieAlgebra::direct_sum(&[su2.clone(), su2]).unwrap();
        for i in 0..3 {
            for j in 3..6 {
                for k in 0..6 {
                    assert_eq!(d.c(i, j, k), 0.0);
                }
            }
        }
        let k = d.killing_form().matrix;
        assert!(linalg::max_abs(&(k + DMatrix::identity(6, 6) * 2.0)) < 1e-12);
        assert!(LieAlgebra::direct_sum(&[]).is_err());
    }

    #[test]
    fn abelian_and_perturbed() {
        let a = LieAlgebra::abelian(2);
        assert_eq!(a.jacobi_residual(), 0.0);
        assert_eq!(linalg::max_abs(&a.killing_form().matrix), 0.0);
        let ad = a.ad_matrix(&DVector::from_vec(vec![0.3, -1.2])).unwrap();
        assert_eq!(linalg::max_abs(&ad), 0.0);

        let su2 = LieAlgebra::su(2).unwrap();
        let mut c = su2.structure().to_vec();
        // c(0,1,2) only
        c[5] += 0.1;
        let bad = LieAlgebra::from_structure_unchecked(3, c.clone());
        assert!(bad.jacobi_residual() > 0.05);
        let blocks = su2.blocks().to_vec();
        let labels = su2.basis_labels().to_vec();
        assert!(LieAlgebra::from_structure(3, c, blocks, labels).is_err());
    }

    #[test]
    fn restriction_to_diagonal() {
        let su2 = LieAlgebra::su(2).unwrap();
        let d = LieAlgebra::direct_sum(&[su2.clone(), su2]).unwrap();
        let k = d.killing_form();
        let mut w = DMatrix::zeros(6, 3);
        for i in 0..3 {
            w[(i, i)] = 1.0;
            w[(i + 3, i)] = 1.0;
        }
        let r = restrict_form(&k, &w).unwrap();
        assert!(linalg::max_abs(&(r.matrix + DMatrix::identity(3, 3) * 4.0)) < 1e-12);
        let id = restrict_form(&k, &DMatrix::identity(6, 6)).unwrap();
        assert!(linalg::max_abs(&(id.matrix - &k.matrix)) == 0.0);
        let zero = restrict_form(&BilinearForm::new(DMatrix::zeros(6, 6)), &w).unwrap();
        assert_eq!(linalg::max_abs(&zero.matrix), 0.0);
        let mut dep = w.clone();
        dep.set_column(2, &w.column(0).clone_owned());
        assert!(restrict_form(&k, &dep).is_err());
    }
}
