//! Invariant exterior calculus on `p`: invariant forms, `d`, metric inner
//! products, `d*`, the Hodge Laplacian and Betti numbers.
//!
//! Forms are stored densely over strictly increasing index tuples in colex
//! order, in a `g_b`-orthonormal basis of `p`. The inner product induced by
//! `g = Σ x_r g_b|_{p_r}` sums over all index tuples, so in increasing-tuple
//! coordinates a `k`-form has weight `k! Π 1/x` per tuple.

use std::collections::BTreeMap;
use std::ops::Range;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::homog::ReductiveSplit;
use crate::liealg::LieAlgebra;
use crate::linalg;
use crate::{Error, Result};

/// Largest supported `dim p`.
pub const MAX_DIM_P: usize = 24;

const DROP_TOL: f64 = 1e-14;

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: usize = 1;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// Colex rank of a strictly increasing tuple.
pub fn rank_tuple(idx: &[usize]) -> usize {
    idx.iter()
        .enumerate()
        .map(|(a, &i)| binomial(i, a + 1))
        .sum()
}

/// All increasing `k`-tuples from `0..n`, in colex order.
pub fn tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); binomial(n, k)];
    let mut cur = Vec::with_capacity(k);
    fn rec(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut [Vec<usize>]) {
        if cur.len() == k {
            out[rank_tuple(cur)] = cur.clone();
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(n, k, i + 1, cur, out);
            cur.pop();
        }
    }
    rec(n, k, 0, &mut cur, &mut out);
    out
}

/// Sorts in place; returns the permutation sign, or `None` on a repeat.
pub fn sort_with_sign(v: &mut [usize]) -> Option<f64> {
    let mut sign = 1.0;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
        if j > 0 && v[j - 1] == v[j] {
            return None;
        }
    }
    for w in v.windows(2) {
        if w[0] == w[1] {
            return None;
        }
    }
    Some(sign)
}

/// An alternating form on `p`, stored on increasing tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantForm {
    degree: usize,
    n: usize,
    coeffs: DVector<f64>,
}

impl InvariantForm {
    pub fn zeros(n: usize, degree: usize) -> Self {
        InvariantForm {
            degree,
            n,
            coeffs: DVector::zeros(binomial(n, degree)),
        }
    }

    pub fn from_coeffs(n: usize, degree: usize, coeffs: DVector<f64>) -> Result<Self> {
        if coeffs.len() != binomial(n, degree) {
            return Err(Error::DimensionMismatch {
                expected: binomial(n, degree),
                got: coeffs.len(),
            });
        }
        Ok(InvariantForm { degree, n, coeffs })
    }

    /// Evaluates `f` on every increasing tuple.
    pub fn from_fn(n: usize, degree: usize, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let t = tuples(n, degree);
        let coeffs = DVector::from_iterator(t.len(), t.iter().map(|i| f(i)));
        InvariantForm { degree, n, coeffs }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    /// Value on basis vectors in any order.
    pub fn get(&self, idx: &[usize]) -> f64 {
        let mut v = idx.to_vec();
        match sort_with_sign(&mut v) {
            Some(s) => s * self.coeffs[rank_tuple(&v)],
            None => 0.0,
        }
    }

    /// Sets the value on `idx`, adjusting for the ordering sign.
    pub fn set(&mut self, idx: &[usize], value: f64) {
        let mut v = idx.to_vec();
        if let Some(s) = sort_with_sign(&mut v) {
            self.coeffs[rank_tuple(&v)] = s * value;
        }
    }

    pub fn scaled(&self, t: f64) -> Self {
        InvariantForm {
            degree: self.degree,
            n: self.n,
            coeffs: &self.coeffs * t,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.n, self.degree), (other.n, other.degree));
        InvariantForm {
            degree: self.degree,
            n: self.n,
            coeffs: &self.coeffs + &other.coeffs,
        }
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs_vec(&self.coeffs)
    }
}

/// `g = (x_1, …, x_r)_{g_b}` with `g_b = Σ z_i (−κ_{g_i})`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    pub z: Vec<f64>,
    pub x: Vec<f64>,
}

impl MetricSpec {
    pub fn new(z: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        for v in z.iter().chain(&x) {
            if !(*v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "metric coefficients must be positive, got {v}"
                )));
            }
        }
        Ok(MetricSpec { z, x })
    }

    /// The normal metric `g_b` itself.
    pub fn normal(z: Vec<f64>, blocks: usize) -> Self {
        MetricSpec {
            z,
            x: vec![1.0; blocks],
        }
    }
}

/// Row-major sparse matrix.
#[derive(Debug, Clone)]
struct SparseOp {
    cols: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseOp {
    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows
                .iter()
                .map(|r| r.iter().map(|&(c, x)| x * v[c]).sum::<f64>()),
        )
    }

    fn apply_mat(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        debug_assert_eq!(m.nrows(), self.cols);
        let mut out = DMatrix::zeros(self.rows.len(), m.ncols());
        for (i, r) in self.rows.iter().enumerate() {
            for &(c, x) in r {
                for j in 0..m.ncols() {
                    out[(i, j)] += x * m[(c, j)];
                }
            }
        }
        out
    }
}

/// Invariant de Rham complex of `G/K` (or of `G` when `K` is trivial) in a
/// fixed `g_b`-orthonormal basis of `p`.
#[derive(Debug)]
pub struct InvariantComplex {
    n: usize,
    ambient: LieAlgebra,
    gb: DMatrix<f64>,
    p_basis: DMatrix<f64>,
    k_in_g: DMatrix<f64>,
    z: Vec<f64>,
    /// `g_b([e_a, e_b], e_c)`, flattened `(a·n + b)·n + c`.
    structure: Vec<f64>,
    /// `ρ(Z)_{ca} = g_b([Z, e_a], e_c)` for each basis vector `Z` of `k`.
    rho: Vec<DMatrix<f64>>,
    block_of: Vec<usize>,
    block_labels: Vec<String>,
    bases: Vec<OnceLock<DMatrix<f64>>>,
    diffs: Vec<OnceLock<SparseOp>>,
}

impl InvariantComplex {
    /// General constructor: `p_basis` must be `g_b`-orthonormal and `blocks`
    /// must tile its columns by `ad(k)`-invariant pieces.
    pub fn new(
        ambient: &LieAlgebra,
        gb: &DMatrix<f64>,
        p_basis: &DMatrix<f64>,
        k_in_g: &DMatrix<f64>,
        blocks: &[(String, Range<usize>)],
        z: &[f64],
    ) -> Result<Self> {
        let n = p_basis.ncols();
        if n > MAX_DIM_P {
            return Err(Error::TooLarge {
                what: "dim p",
                value: n,
                limit: MAX_DIM_P,
            });
        }
        let mut block_of = vec![usize::MAX; n];
        for (b, (_, r)) in blocks.iter().enumerate() {
            for i in r.clone() {
                if i >= n || block_of[i] != usize::MAX {
                    return Err(Error::InvalidArgument("blocks do not tile p".into()));
                }
                block_of[i] = b;
            }
        }
        if block_of.iter().any(|&b| b == usize::MAX) {
            return Err(Error::InvalidArgument("blocks do not tile p".into()));
        }
        let dim_g = ambient.dim();
        let mut structure = vec![0.0; n * n * n];
        let gp = gb * p_basis;
        for a in 0..n {
            let ea = p_basis.column(a).into_owned();
            for b in a + 1..n {
                let br = ambient.bracket(&ea, &p_basis.column(b).into_owned());
                let coords = gp.transpose() * br;
                for c in 0..n {
                    let v = if coords[c].abs() < DROP_TOL { 0.0 } else { coords[c] };
                    structure[(a * n + b) * n + c] = v;
                    structure[(b * n + a) * n + c] = -v;
                }
            }
        }
        let rho = (0..k_in_g.ncols())
            .map(|z| {
                let ad = ambient
                    .ad_matrix(&k_in_g.column(z).into_owned())
                    .expect("k columns live in g");
                let mut r = gp.transpose() * ad * p_basis;
                r.apply(|v| {
                    if v.abs() < DROP_TOL {
                        *v = 0.0
                    }
                });
                r
            })
            .collect();
        debug_assert_eq!(gb.nrows(), dim_g);
        Ok(InvariantComplex {
            n,
            ambient: ambient.clone(),
            gb: gb.clone(),
            p_basis: p_basis.clone(),
            k_in_g: k_in_g.clone(),
            z: z.to_vec(),
            structure,
            rho,
            block_of,
            block_labels: blocks.iter().map(|b| b.0.clone()).collect(),
            bases: (0..=n + 1).map(|_| OnceLock::new()).collect(),
            diffs: (0..=n + 1).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn from_split(split: &ReductiveSplit) -> Result<Self> {
        let blocks: Vec<(String, Range<usize>)> = split
            .blocks
            .iter()
            .map(|b| (b.label.clone(), b.range.clone()))
            .collect();
        Self::new(
            split.embedding.ambient(),
            &split.gb,
            &split.p_basis,
            split.embedding.inclusion(),
            &blocks,
            &split.z,
        )
    }

    /// The Lie group `G` with bi-invariant metric `g_b = Σ z_i (−κ_{g_i})`.
    ///
    /// With `per_element` every basis vector is its own block (diagonal
    /// metrics in the given basis); otherwise each simple ideal is a block.
    pub fn lie_group(alg: &LieAlgebra, z: &[f64], per_element: bool) -> Result<Self> {
        let blocks = alg.blocks();
        if z.len() != blocks.len() {
            return Err(Error::DimensionMismatch {
                expected: blocks.len(),
                got: z.len(),
            });
        }
        let kappa = alg.killing_form().matrix;
        let n = alg.dim();
        let mut gb = DMatrix::zeros(n, n);
        for (b, zi) in blocks.iter().zip(z) {
            let r = b.range.clone();
            let sub = kappa.view((r.start, r.start), (r.len(), r.len())) * (-zi);
            gb.view_mut((r.start, r.start), (r.len(), r.len())).copy_from(&sub);
        }
        let p_basis = linalg::orthonormalize(&DMatrix::identity(n, n), &gb)?;
        let mut off: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off = off.max(gb[(i, j)].abs());
                }
            }
        }
        if per_element && off > 1e-12 {
            return Err(Error::InvalidArgument(
                "per-element blocks need a g_b-orthogonal basis".into(),
            ));
        }
        let block_list: Vec<(String, Range<usize>)> = if per_element {
            (0..n).map(|i| (alg.basis_labels()[i].clone(), i..i + 1)).collect()
        } else {
            blocks.iter().map(|b| (b.label.clone(), b.range.clone())).collect()
        };
        Self::new(alg, &gb, &p_basis, &DMatrix::zeros(n, 0), &block_list, z)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn block_count(&self) -> usize {
        self.block_labels.len()
    }

    pub fn block_labels(&self) -> &[String] {
        &self.block_labels
    }

    pub fn block_of(&self, a: usize) -> usize {
        self.block_of[a]
    }

    pub fn ambient(&self) -> &LieAlgebra {
        &self.ambient
    }

    pub fn gb(&self) -> &DMatrix<f64> {
        &self.gb
    }

    pub fn p_basis(&self) -> &DMatrix<f64> {
        &self.p_basis
    }

    pub fn k_in_g(&self) -> &DMatrix<f64> {
        &self.k_in_g
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    /// `g_b([e_a, e_b]_p, e_c)`.
    pub fn c(&self, a: usize, b: usize, c: usize) -> f64 {
        self.structure[(a * self.n + b) * self.n + c]
    }

    pub fn isotropy(&self) -> &[DMatrix<f64>] {
        &self.rho
    }

    fn check_metric(&self, m: &MetricSpec) -> Result<()> {
        if m.x.len() != self.block_count() {
            return Err(Error::DimensionMismatch {
                expected: self.block_count(),
                got: m.x.len(),
            });
        }
        if m.z.len() != self.z.len()
            || m.z.iter().zip(&self.z).any(|(a, b)| (a - b).abs() > 1e-12 * b.abs().max(1.0))
        {
            return Err(Error::InvalidArgument(
                "metric z differs from the complex's bi-invariant coefficients".into(),
            ));
        }
        Ok(())
    }

    /// `(L_Z α)_I = −Σ_pos α(…, ρ(Z) e_{i_pos}, …)`.
    pub fn lie_derivative(&self, z: usize, alpha: &InvariantForm) -> InvariantForm {
        let rho = &self.rho[z];
        let k = alpha.degree;
        InvariantForm::from_fn(self.n, k, |idx| {
            let mut s = 0.0;
            let mut buf = idx.to_vec();
            for pos in 0..k {
                for c in 0..self.n {
                    let r = rho[(c, idx[pos])];
                    if r == 0.0 {
                        continue;
                    }
                    buf.copy_from_slice(idx);
                    buf[pos] = c;
                    s -= r * alpha.get(&buf);
                }
            }
            s
        })
    }

    pub fn invariance_residual(&self, alpha: &InvariantForm) -> f64 {
        (0..self.rho.len())
            .map(|z| self.lie_derivative(z, alpha).max_abs())
            .fold(0.0, f64::max)
    }

    /// Orthonormal (for `g_b`) basis of `(Λ^k p*)^K` as columns in
    /// increasing-tuple coordinates; each column has Euclidean norm `1/√k!`.
    pub fn invariant_basis(&self, k: usize) -> &DMatrix<f64> {
        self.bases[k].get_or_init(|| self.compute_basis(k))
    }

    pub fn invariant_dim(&self, k: usize) -> usize {
        if k > self.n {
            return 0;
        }
        self.invariant_basis(k).ncols()
    }

    pub fn invariant_forms(&self, k: usize) -> Vec<InvariantForm> {
        let b = self.invariant_basis(k);
        b.column_iter()
            .map(|c| InvariantForm {
                degree: k,
                n: self.n,
                coeffs: c.into_owned(),
            })
            .collect()
    }

    fn compute_basis(&self, k: usize) -> DMatrix<f64> {
        let n = self.n;
        let total = binomial(n, k);
        let norm = 1.0 / factorial(k).sqrt();
        let trivial = self.rho.iter().all(|r| r.iter().all(|v| *v == 0.0));
        if trivial {
            return DMatrix::identity(total, total) * norm;
        }
        let all = tuples(n, k);
        let mut sectors: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
        for (r, t) in all.iter().enumerate() {
            let mut key = vec![0; self.block_count()];
            for &i in t {
                key[self.block_of[i]] += 1;
            }
            sectors.entry(key).or_default().push(r);
        }
        let mut cols: Vec<DVector<f64>> = Vec::new();
        let mut local = vec![usize::MAX; total];
        let mut buf = vec![0; k];
        for members in sectors.values() {
            for (p, &r) in members.iter().enumerate() {
                local[r] = p;
            }
            let m = members.len();
            let mut kernel = DMatrix::<f64>::identity(m, m);
            for rho in &self.rho {
                if kernel.ncols() == 0 {
                    break;
                }
                let mut op = DMatrix::zeros(m, m);
                for (row, &r) in members.iter().enumerate() {
                    let idx = &all[r];
                    for pos in 0..k {
                        for c in 0..n {
                            let v = rho[(c, idx[pos])];
                            if v == 0.0 {
                                continue;
                            }
                            buf.copy_from_slice(idx);
                            buf[pos] = c;
                            if let Some(sign) = sort_with_sign(&mut buf) {
                                let j = local[rank_tuple(&buf)];
                                if j != usize::MAX {
                                    op[(row, j)] -= v * sign;
                                }
                            }
                        }
                    }
                }
                let restricted = op * &kernel;
                if linalg::max_abs(&restricted) == 0.0 {
                    continue;
                }
                let ker = linalg::null_space(&restricted);
                kernel = &kernel * ker;
            }
            for col in kernel.column_iter() {
                let mut v = DVector::zeros(total);
                for (p, &r) in members.iter().enumerate() {
                    v[r] = col[p] * norm;
                }
                cols.push(v);
            }
            for &r in members {
                local[r] = usize::MAX;
            }
        }
        if cols.is_empty() {
            return DMatrix::zeros(total, 0);
        }
        DMatrix::from_columns(&cols)
    }

    fn diff_op(&self, k: usize) -> &SparseOp {
        self.diffs[k].get_or_init(|| self.compute_diff(k))
    }

    /// `dα(X_0..X_k) = Σ_{a<b} (−1)^{a+b} α([X_a, X_b]_p, X_0, …, X̂_a, …, X̂_b, …)`.
    fn compute_diff(&self, k: usize) -> SparseOp {
        let n = self.n;
        let rows_t = tuples(n, k + 1);
        let mut rows = Vec::with_capacity(rows_t.len());
        let mut rest = Vec::with_capacity(k);
        for idx in &rows_t {
            let mut entries: BTreeMap<usize, f64> = BTreeMap::new();
            for a in 0..idx.len() {
                for b in a + 1..idx.len() {
                    let sign_ab = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
                    rest.clear();
                    rest.extend(idx.iter().enumerate().filter(|&(p, _)| p != a && p != b).map(|(_, &v)| v));
                    for c in 0..n {
                        let v = self.c(idx[a], idx[b], c);
                        if v == 0.0 || rest.contains(&c) {
                            continue;
                        }
                        let before = rest.iter().filter(|&&r| r < c).count();
                        let sign_c = if before % 2 == 0 { 1.0 } else { -1.0 };
                        let mut j = rest.clone();
                        j.insert(before, c);
                        *entries.entry(rank_tuple(&j)).or_insert(0.0) += sign_ab * sign_c * v;
                    }
                }
            }
            rows.push(entries.into_iter().filter(|e| e.1 != 0.0).collect());
        }
        SparseOp {
            cols: binomial(n, k),
            rows,
        }
    }

    pub fn differential(&self, alpha: &InvariantForm) -> InvariantForm {
        InvariantForm {
            degree: alpha.degree + 1,
            n: self.n,
            coeffs: self.diff_op(alpha.degree).apply(&alpha.coeffs),
        }
    }

    /// `d` restricted to invariant forms, in full coordinates of degree `k+1`
    /// (`C(n, k+1) × dim (Λ^k)^K`).
    pub fn differential_on_invariants(&self, k: usize) -> DMatrix<f64> {
        self.diff_op(k).apply_mat(self.invariant_basis(k))
    }

    /// `d : (Λ^k)^K → (Λ^{k+1})^K` in invariant-basis coordinates.
    pub fn d_matrix(&self, k: usize) -> DMatrix<f64> {
        let full = self.differential_on_invariants(k);
        self.invariant_basis(k + 1).transpose() * full * factorial(k + 1)
    }

    /// Invariant-basis coordinates of `α` and the size of its part outside
    /// the invariant subspace.
    pub fn project(&self, alpha: &InvariantForm) -> (DVector<f64>, f64) {
        let b = self.invariant_basis(alpha.degree);
        let a = b.transpose() * &alpha.coeffs * factorial(alpha.degree);
        let back = b * &a;
        (a, linalg::max_abs_vec(&(&alpha.coeffs - back)))
    }

    pub fn from_invariant_coords(&self, k: usize, a: &DVector<f64>) -> InvariantForm {
        InvariantForm {
            degree: k,
            n: self.n,
            coeffs: self.invariant_basis(k) * a,
        }
    }

    /// Diagonal of the inner product on increasing-tuple coordinates.
    pub fn metric_weights(&self, metric: &MetricSpec, k: usize) -> Result<DVector<f64>> {
        self.check_metric(metric)?;
        let f = factorial(k);
        let t = tuples(self.n, k);
        Ok(DVector::from_iterator(
            t.len(),
            t.iter().map(|idx| {
                f * idx
                    .iter()
                    .map(|&a| 1.0 / metric.x[self.block_of[a]])
                    .product::<f64>()
            }),
        ))
    }

    pub fn inner(&self, metric: &MetricSpec, a: &InvariantForm, b: &InvariantForm) -> Result<f64> {
        if a.degree != b.degree {
            return Err(Error::DimensionMismatch {
                expected: a.degree,
                got: b.degree,
            });
        }
        let w = self.metric_weights(metric, a.degree)?;
        Ok(a.coeffs.component_mul(&w).dot(&b.coeffs))
    }

    pub fn norm(&self, metric: &MetricSpec, a: &InvariantForm) -> Result<f64> {
        Ok(self.inner(metric, a, a)?.max(0.0).sqrt())
    }

    fn weighted(&self, metric: &MetricSpec, k: usize, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let w = self.metric_weights(metric, k)?;
        let mut out = m.clone();
        for (i, mut row) in out.row_iter_mut().enumerate() {
            row *= w[i];
        }
        Ok(out)
    }

    /// Gram matrix of the invariant basis of degree `k`.
    pub fn form_gram(&self, metric: &MetricSpec, k: usize) -> Result<DMatrix<f64>> {
        let b = self.invariant_basis(k);
        Ok(b.transpose() * self.weighted(metric, k, b)?)
    }

    /// `M = (D B_{k−1})ᵀ W_k B_k`, so that `G_{k−1} c = M b` gives `d*`.
    fn adjoint_pairing(&self, metric: &MetricSpec, k: usize) -> Result<DMatrix<f64>> {
        let db = self.differential_on_invariants(k - 1);
        let wb = self.weighted(metric, k, self.invariant_basis(k))?;
        Ok(db.transpose() * wb)
    }

    /// `d*_g β`, the `g`-adjoint of `d` on invariant forms.
    pub fn codifferential(&self, metric: &MetricSpec, beta: &InvariantForm) -> Result<InvariantForm> {
        let k = beta.degree;
        if k == 0 {
            return Err(Error::InvalidArgument("d* of a 0-form".into()));
        }
        let (b, _) = self.project(beta);
        let m = self.adjoint_pairing(metric, k)?;
        let g = self.form_gram(metric, k - 1)?;
        let rhs = m * b;
        let c = if g.nrows() == 0 {
            rhs
        } else {
            g.cholesky()
                .ok_or_else(|| Error::RankDeficient("form Gram matrix".into()))?
                .solve(&rhs)
        };
        Ok(self.from_invariant_coords(k - 1, &c))
    }

    /// Quadratic form `|dα|² + |d*α|²` in invariant-basis coordinates.
    pub fn laplacian_form(&self, metric: &MetricSpec, k: usize) -> Result<DMatrix<f64>> {
        let db = self.differential_on_invariants(k);
        let mut l = db.transpose() * self.weighted(metric, k + 1, &db)?;
        if k > 0 {
            let m = self.adjoint_pairing(metric, k)?;
            let g = self.form_gram(metric, k - 1)?;
            if g.nrows() > 0 {
                let chol = g
                    .cholesky()
                    .ok_or_else(|| Error::RankDeficient("form Gram matrix".into()))?;
                l += m.transpose() * chol.solve(&m);
            }
        }
        Ok((&l + l.transpose()) * 0.5)
    }

    /// `Δ_g` on `(Λ^k)^K`, symmetrised as `G^{−1/2} L G^{−1/2}`.
    pub fn laplacian(&self, metric: &MetricSpec, k: usize) -> Result<DMatrix<f64>> {
        let l = self.laplacian_form(metric, k)?;
        let gi = linalg::inv_sqrt_spd(&self.form_gram(metric, k)?)?;
        let out = &gi * l * &gi;
        Ok((&out + out.transpose()) * 0.5)
    }

    /// Harmonic invariant `k`-forms, as invariant-basis coordinate columns.
    pub fn harmonic_coords(&self, metric: &MetricSpec, k: usize) -> Result<DMatrix<f64>> {
        let l = self.laplacian(metric, k)?;
        if l.nrows() == 0 {
            return Ok(l);
        }
        let gi = linalg::inv_sqrt_spd(&self.form_gram(metric, k)?)?;
        Ok(gi * linalg::null_space(&l))
    }

    pub fn betti(&self, metric: &MetricSpec, k: usize) -> Result<usize> {
        let l = self.laplacian(metric, k)?;
        if l.nrows() == 0 {
            return Ok(0);
        }
        Ok(linalg::null_space(&l).ncols())
    }

    /// `dim (Λ^k)^K − rank d_k − rank d_{k−1}`, with no metric involved.
    pub fn betti_by_ranks(&self, k: usize) -> usize {
        let m = self.invariant_dim(k);
        let up = linalg::rank(&self.differential_on_invariants(k));
        let down = if k == 0 {
            0
        } else {
            linalg::rank(&self.differential_on_invariants(k - 1))
        };
        m - up - down
    }

    /// `‖dα‖_g + ‖d*_g α‖_g`.
    pub fn harmonic_residual(&self, metric: &MetricSpec, alpha: &InvariantForm) -> Result<f64> {
        let d = self.norm(metric, &self.differential(alpha))?;
        let dstar = if alpha.degree == 0 {
            0.0
        } else {
            self.norm(metric, &self.codifferential(metric, alpha)?)?
        };
        Ok(d + dstar)
    }

    /// `p_0 = {X ∈ p : [k, X] = 0}`, orthonormal columns in `p` coordinates.
    pub fn trivial_isotypic(&self) -> DMatrix<f64> {
        let n = self.n;
        if self.rho.is_empty() {
            return DMatrix::identity(n, n);
        }
        let mut stacked = DMatrix::zeros(n * self.rho.len(), n);
        for (i, r) in self.rho.iter().enumerate() {
            stacked.rows_mut(i * n, n).copy_from(r);
        }
        linalg::null_space(&stacked)
    }

    /// `θ_X = g_b(X, ·)` for `X ∈ g`.
    pub fn theta(&self, x: &DVector<f64>) -> InvariantForm {
        let v = self.p_basis.transpose() * &self.gb * x;
        InvariantForm {
            degree: 1,
            n: self.n,
            coeffs: v,
        }
    }

    /// `ω_X(Y, W) = g_b([Y, W], X)` for `X ∈ g`.
    pub fn omega(&self, x: &DVector<f64>) -> InvariantForm {
        let gx = &self.gb * x;
        let cols: Vec<DVector<f64>> = self.p_basis.column_iter().map(|c| c.into_owned()).collect();
        InvariantForm::from_fn(self.n, 2, |idx| {
            self.ambient.bracket(&cols[idx[0]], &cols[idx[1]]).dot(&gx)
        })
    }

    /// `ω_{Z + X_Z}` where `X_Z ∈ p_0` solves `κ(X, X_Z) = −κ(X, Z)` on `p_0`;
    /// `z` is given in the basis of `k`.
    pub fn harmonic_2form_correction(&self, z: &DVector<f64>) -> Result<InvariantForm> {
        if z.len() != self.k_in_g.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.k_in_g.ncols(),
                got: z.len(),
            });
        }
        let zg = &self.k_in_g * z;
        let p0 = &self.p_basis * self.trivial_isotypic();
        let x = if p0.ncols() == 0 {
            DVector::zeros(zg.len())
        } else {
            let kappa = self.ambient.killing_form().matrix;
            let a = p0.transpose() * &kappa * &p0;
            let rhs = -(p0.transpose() * &kappa * &zg);
            let v = (-a.clone())
                .cholesky()
                .ok_or_else(|| Error::RankDeficient("κ restricted to p_0 is singular".into()))?
                .solve(&(-rhs));
            &p0 * v
        };
        Ok(self.omega(&(zg + x)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colex_ranks_are_a_bijection() {
        for (n, k) in [(5, 0), (5, 2), (6, 3), (7, 4)] {
            let t = tuples(n, k);
            assert_eq!(t.len(), binomial(n, k));
            for (r, idx) in t.iter().enumerate() {
                assert_eq!(rank_tuple(idx), r);
                assert!(idx.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn sorting_sign() {
        let mut v = vec![2, 0, 1];
        assert_eq!(sort_with_sign(&mut v), Some(1.0));
        assert_eq!(v, vec![0, 1, 2]);
        let mut v = vec![1, 0];
        assert_eq!(sort_with_sign(&mut v), Some(-1.0));
        let mut v = vec![1, 2, 1];
        assert_eq!(sort_with_sign(&mut v), None);
    }

    #[test]
    fn form_get_and_set_are_antisymmetric() {
        let mut f = InvariantForm::zeros(4, 3);
        f.set(&[2, 0, 3], 1.5);
        assert_eq!(f.get(&[0, 2, 3]), -1.5);
        assert_eq!(f.get(&[3, 0, 2]), -1.5);
        assert_eq!(f.get(&[0, 3, 2]), 1.5);
        assert_eq!(f.get(&[0, 0, 3]), 0.0);
    }

    #[test]
    fn su2_group_complex() {
        let su2 = LieAlgebra::su(2).unwrap();
        let cx = InvariantComplex::lie_group(&su2, &[1.0], false).unwrap();
        assert_eq!(cx.invariant_dim(3), 1);
        let g = MetricSpec::normal(vec![1.0], 1);
        assert_eq!(cx.betti(&g, 0).unwrap(), 1);
        assert_eq!(cx.betti(&g, 1).unwrap(), 0);
        assert_eq!(cx.betti(&g, 2).unwrap(), 0);
        assert_eq!(cx.betti(&g, 3).unwrap(), 1);
        assert_eq!(cx.betti_by_ranks(3), 1);
        let gram = cx.form_gram(&g, 2).unwrap();
        assert!(linalg::max_abs(&(gram - DMatrix::identity(3, 3))) < 1e-12);
    }

    #[test]
    fn gram_scales_with_metric() {
        let su2 = LieAlgebra::su(2).unwrap();
        let cx = InvariantComplex::lie_group(&su2, &[1.0], true).unwrap();
        let g = MetricSpec::normal(vec![1.0], 3);
        let t = 2.5;
        let gt = MetricSpec::new(vec![1.0], vec![t; 3]).unwrap();
        for k in 0..=3 {
            let a = cx.form_gram(&g, k).unwrap();
            let b = cx.form_gram(&gt, k).unwrap();
            assert!(linalg::max_abs(&(a * t.powi(-(k as i32)) - b)) < 1e-12);
        }
        // e^0 ∧ e^2 has weight 1/(x_0 x_2)
        let h = MetricSpec::new(vec![1.0], vec![2.0, 3.0, 5.0]).unwrap();
        let mut f = InvariantForm::zeros(3, 2);
        f.set(&[0, 2], 1.0);
        let norm_sq = cx.inner(&h, &f, &f).unwrap();
        assert!((norm_sq - 2.0 / 10.0).abs() < 1e-14);
    }

    #[test]
    fn oversized_p_is_rejected() {
        let alg = LieAlgebra::so(8).unwrap();
        let err = InvariantComplex::lie_group(&alg, &[1.0], false).unwrap_err();
        assert!(matches!(err, Error::TooLarge { value: 28, limit: 24, .. }));
    }
}
