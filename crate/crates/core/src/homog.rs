//! Embeddings `k ⊂ g`, Killing constants, alignment and reductive
//! decompositions `g = k ⊕ p`.

use std::fmt::Write as _;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::liealg::{BlockKind, IdealBlock, LieAlgebra, STRUCTURE_TOL};
use crate::linalg;
use crate::{Error, Result};

/// Tolerance for orthogonality and invariance of constructed decompositions.
pub const SPLIT_TOL: f64 = 1e-10;
/// Relative residual above which restricted Killing forms are not proportional.
pub const KILLING_RATIO_TOL: f64 = 1e-8;
/// `σ₂/σ₁` below which the Killing-constant matrix counts as rank one.
pub const RANK_ONE_TOL: f64 = 1e-8;
/// Tolerance on the alignment identities.
pub const ALIGN_TOL: f64 = 1e-9;

/// Inclusion of a compact algebra `k` into a semisimple `g`.
#[derive(Debug, Clone)]
pub struct Embedding {
    ambient: LieAlgebra,
    sub: LieAlgebra,
    inclusion: DMatrix<f64>,
}

impl Embedding {
    /// Validates shape, injectivity and the homomorphism property
    /// `ι([Z,W]) = [ιZ, ιW]` on all basis pairs.
    pub fn new(ambient: LieAlgebra, sub: LieAlgebra, inclusion: DMatrix<f64>) -> Result<Self> {
        if inclusion.nrows() != ambient.dim() {
            return Err(Error::DimensionMismatch {
                expected: ambient.dim(),
                got: inclusion.nrows(),
            });
        }
        if inclusion.ncols() != sub.dim() {
            return Err(Error::DimensionMismatch {
                expected: sub.dim(),
                got: inclusion.ncols(),
            });
        }
        if ambient.blocks().iter().any(|b| b.kind != BlockKind::Simple) {
            return Err(Error::InvalidArgument(
                "ambient algebra must be semisimple".into(),
            ));
        }
        if linalg::rank(&inclusion) < sub.dim() {
            return Err(Error::RankDeficient(
                "inclusion is not injective (K is not almost-effective)".into(),
            ));
        }
        let e = Embedding {
            ambient,
            sub,
            inclusion,
        };
        if let Some((i, j, residual)) = e.worst_homomorphism_pair() {
            if residual > STRUCTURE_TOL {
                return Err(Error::NotHomomorphism { i, j, residual });
            }
        }
        Ok(e)
    }

    /// `K` trivial.
    pub fn trivial(ambient: LieAlgebra) -> Result<Self> {
        let n = ambient.dim();
        Self::new(ambient, LieAlgebra::abelian(0), DMatrix::zeros(n, 0))
    }

    /// Column-stacks per-factor inclusions `ι(Z) = (ι₁(Z), …, ι_s(Z))` into
    /// the direct sum of the factors.
    pub fn diagonal(sub: &LieAlgebra, factors: &[(LieAlgebra, DMatrix<f64>)]) -> Result<Self> {
        let algebras: Vec<LieAlgebra> = factors.iter().map(|(a, _)| a.clone()).collect();
        let ambient = LieAlgebra::direct_sum(&algebras)?;
        let mut inc = DMatrix::zeros(ambient.dim(), sub.dim());
        let mut offset = 0;
        for (f, (alg, m)) in factors.iter().enumerate() {
            if m.shape() != (alg.dim(), sub.dim()) {
                return Err(Error::InvalidArgument(format!(
                    "factor {} inclusion has shape {:?}, expected {:?}",
                    f + 1,
                    m.shape(),
                    (alg.dim(), sub.dim())
                )));
            }
            inc.view_mut((offset, 0), m.shape()).copy_from(m);
            offset += alg.dim();
        }
        Self::new(ambient, sub.clone(), inc)
    }

    fn worst_homomorphism_pair(&self) -> Option<(usize, usize, f64)> {
        let m = self.sub.dim();
        let mut worst: Option<(usize, usize, f64)> = None;
        for a in 0..m {
            for b in a + 1..m {
                let za = self.inclusion.column(a).into_owned();
                let zb = self.inclusion.column(b).into_owned();
                let lhs = self.ambient.bracket(&za, &zb);
                let mut kbr = DVector::zeros(m);
                for c in 0..m {
                    kbr[c] = self.sub.c(a, b, c);
                }
                let rhs = &self.inclusion * kbr;
                let r = linalg::max_abs_vec(&(lhs - rhs));
                if worst.map_or(true, |w| r > w.2) {
                    worst = Some((a, b, r));
                }
            }
        }
        worst
    }

    pub fn homomorphism_residual(&self) -> f64 {
        self.worst_homomorphism_pair().map_or(0.0, |w| w.2)
    }

    pub fn ambient(&self) -> &LieAlgebra {
        &self.ambient
    }

    pub fn sub(&self) -> &LieAlgebra {
        &self.sub
    }

    pub fn inclusion(&self) -> &DMatrix<f64> {
        &self.inclusion
    }

    pub fn dim_g(&self) -> usize {
        self.ambient.dim()
    }

    pub fn dim_k(&self) -> usize {
        self.sub.dim()
    }

    pub fn dim_p(&self) -> usize {
        self.dim_g() - self.dim_k()
    }

    /// Number of simple ideals of `g`.
    pub fn ideal_count(&self) -> usize {
        self.ambient.blocks().len()
    }

    pub fn ideal_range(&self, i: usize) -> Range<usize> {
        self.ambient.blocks()[i].range.clone()
    }

    pub fn k_blocks(&self) -> &[IdealBlock] {
        self.sub.blocks()
    }

    pub fn simple_k_blocks(&self) -> Vec<&IdealBlock> {
        self.sub.simple_blocks().collect()
    }

    pub fn center_dim(&self) -> usize {
        self.sub.center_indices().len()
    }

    /// Index groups of `k`: the whole center first (if any), then each
    /// simple ideal.
    pub fn k_groups(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        let center = self.sub.center_indices();
        if !center.is_empty() {
            out.push(("z".to_string(), center));
        }
        for b in self.sub.simple_blocks() {
            out.push((b.label.clone(), b.range.clone().collect()));
        }
        out
    }

    /// Columns of `m` at `idx`.
    fn select(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
        m.select_columns(idx.iter())
    }

    /// `π_i ∘ ι` as a `dim g × dim k` matrix (zero outside ideal `i`).
    pub fn projected_inclusion(&self, i: usize) -> DMatrix<f64> {
        let r = self.ideal_range(i);
        let mut out = DMatrix::zeros(self.dim_g(), self.dim_k());
        out.rows_mut(r.start, r.len())
            .copy_from(&self.inclusion.rows(r.start, r.len()));
        out
    }

    /// Killing form of `g` restricted to ideal `i`, as a full `dim g` matrix.
    pub fn ideal_killing(&self, i: usize) -> DMatrix<f64> {
        let kappa = self.ambient.killing_form().matrix;
        let r = self.ideal_range(i);
        let mut out = DMatrix::zeros(self.dim_g(), self.dim_g());
        out.view_mut((r.start, r.start), (r.len(), r.len()))
            .copy_from(&kappa.view((r.start, r.start), (r.len(), r.len())));
        out
    }

    fn ideal_killings(&self) -> Vec<DMatrix<f64>> {
        let kappa = self.ambient.killing_form().matrix;
        (0..self.ideal_count())
            .map(|i| {
                let r = self.ideal_range(i);
                let mut out = DMatrix::zeros(self.dim_g(), self.dim_g());
                out.view_mut((r.start, r.start), (r.len(), r.len()))
                    .copy_from(&kappa.view((r.start, r.start), (r.len(), r.len())));
                out
            })
            .collect()
    }

    /// `g_b = Σ z_i (−κ_{g_i})`.
    pub fn normal_metric(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        check_z(z, self.ideal_count())?;
        let mut gb = DMatrix::zeros(self.dim_g(), self.dim_g());
        for (i, k) in self.ideal_killings().into_iter().enumerate() {
            gb -= k * z[i];
        }
        Ok(gb)
    }

    /// `⟨·,·⟩ = −κ_g|_{k×k}` in the basis of `k`.
    pub fn k_inner_product(&self) -> DMatrix<f64> {
        let kappa = self.ambient.killing_form().matrix;
        -(self.inclusion.transpose() * kappa * &self.inclusion)
    }

    /// Indices `i` with `π_i(k) = 0`.
    pub fn vanishing_projections(&self) -> Vec<usize> {
        (0..self.ideal_count())
            .filter(|&i| {
                let r = self.ideal_range(i);
                linalg::max_abs(&self.inclusion.rows(r.start, r.len()).into_owned()) < STRUCTURE_TOL
            })
            .collect()
    }
}

fn check_z(z: &[f64], s: usize) -> Result<()> {
    if z.len() != s {
        return Err(Error::DimensionMismatch {
            expected: s,
            got: z.len(),
        });
    }
    if let Some(bad) = z.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "bi-invariant coefficients must be positive, got {bad}"
        )));
    }
    Ok(())
}

/// Matrix `c_ij` of Killing ratios `κ_{π_i(k_j)} = c_ij κ_{g_i}|`.
///
/// Rows are the ideals of `g`; column 0 is the center of `k` (always zero),
/// column `j ≥ 1` the `j`-th simple ideal of `k`.
#[derive(Debug, Clone)]
pub struct KillingConstants {
    pub matrix: DMatrix<f64>,
    /// Largest relative proportionality residual over all nonzero pairs.
    pub residual: f64,
}

impl KillingConstants {
    pub fn get(&self, ideal: usize, block: usize) -> f64 {
        self.matrix[(ideal, block)]
    }
}

pub fn killing_constants(e: &Embedding) -> Result<KillingConstants> {
    let s = e.ideal_count();
    let simple = e.simple_k_blocks();
    let kappa_k = e.sub().killing_form().matrix;
    let mut m = DMatrix::zeros(s, simple.len() + 1);
    let mut worst: f64 = 0.0;
    for i in 0..s {
        let kg = e.ideal_killing(i);
        let proj = e.projected_inclusion(i);
        for (jj, blk) in simple.iter().enumerate() {
            let w = proj.columns(blk.range.start, blk.len()).into_owned();
            if linalg::max_abs(&w) < STRUCTURE_TOL {
                continue;
            }
            let b = w.transpose() * &kg * &w;
            let a = kappa_k
                .view((blk.range.start, blk.range.start), (blk.len(), blk.len()))
                .into_owned();
            let c = a.dot(&b) / b.dot(&b);
            let residual = (&a - &b * c).norm() / a.norm().max(f64::MIN_POSITIVE);
            if residual > KILLING_RATIO_TOL {
                return Err(Error::NonScalarKilling {
                    ideal: i + 1,
                    block: jj + 1,
                    residual,
                });
            }
            worst = worst.max(residual);
            m[(i, jj + 1)] = c;
        }
    }
    Ok(KillingConstants {
        matrix: m,
        residual: worst,
    })
}

/// Result of the alignment test.
#[derive(Debug, Clone)]
pub struct AlignmentData {
    pub c: Vec<f64>,
    pub lambda: Vec<f64>,
    pub killing_constants: DMatrix<f64>,
    pub is_aligned: bool,
    pub diagnostics: String,
    /// `⟨·,·⟩ = −κ_g|_k` in the basis of `k`.
    pub inner_product: DMatrix<f64>,
}

impl AlignmentData {
    pub fn s(&self) -> usize {
        self.c.len()
    }

    pub fn inverse_sum(&self) -> f64 {
        self.c.iter().map(|c| 1.0 / c).sum()
    }
}

/// Aligned constants from a bare Killing-constant matrix (simple blocks only,
/// `s × t`). Returns `(c, λ)` normalised by `Σ 1/c_i = 1`, or `None` when
/// the matrix is not a positive rank-one matrix.
pub fn alignment_from_constants(cij: &DMatrix<f64>) -> Option<(Vec<f64>, Vec<f64>)> {
    let (s, t) = cij.shape();
    if s == 0 || t == 0 || cij.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    if s > 1 && t > 1 {
        let sv = cij.clone().singular_values();
        let mut v: Vec<f64> = sv.iter().copied().collect();
        v.sort_by(|a, b| b.total_cmp(a));
        if v[1] / v[0] >= RANK_ONE_TOL {
            return None;
        }
    }
    // 1/c_i ∝ 1/c_ij for every j; average the normalised columns
    let mut inv = vec![0.0; s];
    for j in 0..t {
        let col_sum: f64 = (0..s).map(|i| 1.0 / cij[(i, j)]).sum();
        for (i, v) in inv.iter_mut().enumerate() {
            *v += (1.0 / cij[(i, j)]) / col_sum / t as f64;
        }
    }
    let c: Vec<f64> = inv.iter().map(|v| 1.0 / v).collect();
    let lambda: Vec<f64> = (0..t)
        .map(|j| (0..s).map(|i| cij[(i, j)] / c[i]).sum::<f64>() / s as f64)
        .collect();
    for i in 0..s {
        for j in 0..t {
            if (c[i] * lambda[j] - cij[(i, j)]).abs() > ALIGN_TOL * cij[(i, j)].max(1.0) {
                return None;
            }
        }
    }
    Some((c, lambda))
}

pub fn alignment_check(e: &Embedding) -> AlignmentData {
    let s = e.ideal_count();
    let inner = e.k_inner_product();
    let mut diag = String::new();
    let kc = match killing_constants(e) {
        Ok(kc) => kc,
        Err(err) => {
            return AlignmentData {
                c: Vec::new(),
                lambda: Vec::new(),
                killing_constants: DMatrix::zeros(s, 0),
                is_aligned: false,
                diagnostics: err.to_string(),
                inner_product: inner,
            }
        }
    };
    let not_aligned = |diagnostics: String, kc: &KillingConstants| AlignmentData {
        c: Vec::new(),
        lambda: Vec::new(),
        killing_constants: kc.matrix.clone(),
        is_aligned: false,
        diagnostics,
        inner_product: e.k_inner_product(),
    };
    if e.dim_k() == 0 {
        return not_aligned("k = 0".into(), &kc);
    }
    let vanishing = e.vanishing_projections();
    if !vanishing.is_empty() {
        let ideals: Vec<String> = vanishing.iter().map(|i| format!("g{}", i + 1)).collect();
        return not_aligned(
            format!(
                "π_i(k) = 0 for {}; the space splits off these factors",
                ideals.join(", ")
            ),
            &kc,
        );
    }

    // 1/c_i from the share of ⟨·,·⟩ carried by each ideal, block by block
    let killings = e.ideal_killings();
    let mut shares: Vec<Vec<f64>> = Vec::new();
    let mut worst_prop: f64 = 0.0;
    for (_, idx) in e.k_groups() {
        let total = inner.select_rows(idx.iter()).select_columns(idx.iter());
        let mut row = Vec::with_capacity(s);
        for (i, kg) in killings.iter().enumerate() {
            let w = Embedding::select(&e.projected_inclusion(i), &idx);
            let gi = -(w.transpose() * kg * &w);
            let r = gi.dot(&total) / total.dot(&total);
            let res = (&gi - &total * r).norm() / total.norm();
            worst_prop = worst_prop.max(res);
            row.push(r);
        }
        shares.push(row);
    }
    if worst_prop > KILLING_RATIO_TOL {
        let _ = write!(
            diag,
            "restricted forms on a block of k are not proportional to ⟨·,·⟩ (residual {worst_prop:.3e}); "
        );
    }
    let inv_c: Vec<f64> = (0..s)
        .map(|i| shares.iter().map(|row| row[i]).sum::<f64>() / shares.len() as f64)
        .collect();
    let mut spread: f64 = 0.0;
    for row in &shares {
        for i in 0..s {
            spread = spread.max((row[i] - inv_c[i]).abs());
        }
    }
    if spread > ALIGN_TOL {
        let _ = write!(
            diag,
            "ideal shares differ between blocks of k by {spread:.3e}; "
        );
    }
    if inv_c.iter().any(|v| !(*v > 0.0)) {
        let _ = write!(diag, "nonpositive ideal share; ");
    }

    let simple_cols = kc.matrix.columns(1, kc.matrix.ncols() - 1).into_owned();
    let mut rank_one = true;
    if simple_cols.ncols() > 0 {
        if simple_cols.iter().any(|v| !(*v > 0.0)) {
            rank_one = false;
            let _ = write!(diag, "some c_ij vanish; ");
        } else if s > 1 && simple_cols.ncols() > 1 {
            let mut sv: Vec<f64> = simple_cols.clone().singular_values().iter().copied().collect();
            sv.sort_by(|a, b| b.total_cmp(a));
            if sv[1] / sv[0] >= RANK_ONE_TOL {
                rank_one = false;
                let _ = write!(diag, "c_ij is not rank one (σ2/σ1 = {:.3e}); ", sv[1] / sv[0]);
            }
        }
    }

    let c: Vec<f64> = inv_c.iter().map(|v| 1.0 / v).collect();
    let t = simple_cols.ncols();
    let lambda: Vec<f64> = (0..t)
        .map(|j| (0..s).map(|i| simple_cols[(i, j)] / c[i]).sum::<f64>() / s as f64)
        .collect();
    let mut fit: f64 = 0.0;
    for i in 0..s {
        for j in 0..t {
            fit = fit.max((c[i] * lambda[j] - simple_cols[(i, j)]).abs());
        }
    }
    if rank_one && fit > ALIGN_TOL {
        let _ = write!(diag, "c_ij ≠ c_i λ_j (max deviation {fit:.3e}); ");
    }
    let is_aligned = diag.is_empty();
    if is_aligned {
        diag.push_str("aligned");
    }
    AlignmentData {
        c,
        lambda,
        killing_constants: kc.matrix,
        is_aligned,
        diagnostics: diag.trim_end_matches("; ").to_string(),
        inner_product: inner,
    }
}

/// `b₃(G/K)`, `d_{G/K}` and a basis of `{y : Σ y_i κ_{g_i} vanishes on k}`.
#[derive(Debug, Clone)]
pub struct ThirdBetti {
    pub b3: usize,
    pub d_gk: usize,
    /// Orthonormal kernel basis, one `y` per column (`s × b₃`).
    pub kernel: DMatrix<f64>,
}

/// Linear map `y ↦ Q|_{k×k}` with `Q = Σ y_i κ_{g_i}`, one column per ideal.
pub fn restriction_map(e: &Embedding) -> DMatrix<f64> {
    let m = e.dim_k();
    let s = e.ideal_count();
    let mut out = DMatrix::zeros(m * m, s);
    for (i, kg) in e.ideal_killings().iter().enumerate() {
        let r = e.inclusion().transpose() * kg * e.inclusion();
        for (row, v) in r.iter().enumerate() {
            out[(row, i)] = *v;
        }
    }
    out
}

pub fn b3_dimension(e: &Embedding) -> ThirdBetti {
    let s = e.ideal_count();
    let map = restriction_map(e);
    let kernel = if e.dim_k() == 0 {
        DMatrix::identity(s, s)
    } else {
        linalg::null_space(&map)
    };
    let b3 = kernel.ncols();
    ThirdBetti {
        b3,
        d_gk: s - b3,
        kernel,
    }
}

/// Explicit admissibility conditions: one row `(1/c_ij)_i` per simple block of
/// `k` (zero where `π_i(k_j) = 0`) and one row `(κ_{g_i}(Z_i^α, Z_i^β))_i` per
/// pair of center basis vectors.
pub fn admissibility_conditions(e: &Embedding) -> Result<DMatrix<f64>> {
    let kc = killing_constants(e)?;
    let s = e.ideal_count();
    let t = kc.matrix.ncols() - 1;
    let center = e.sub().center_indices();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for j in 1..=t {
        rows.push(
            (0..s)
                .map(|i| {
                    let c = kc.get(i, j);
                    if c > 0.0 {
                        1.0 / c
                    } else {
                        0.0
                    }
                })
                .collect(),
        );
    }
    let killings = e.ideal_killings();
    for (a, &za) in center.iter().enumerate() {
        for &zb in &center[a..] {
            let x = e.inclusion().column(za).into_owned();
            let y = e.inclusion().column(zb).into_owned();
            rows.push(
                killings
                    .iter()
                    .map(|kg| (x.transpose() * kg * &y)[(0, 0)])
                    .collect(),
            );
        }
    }
    Ok(DMatrix::from_fn(rows.len(), s, |r, c| rows[r][c]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitBlockKind {
    /// `g_b`-orthocomplement of `π_i(k)` in the ideal `g_i` (0-based).
    Isotropy(usize),
    /// The diagonal copy `g_{η_j}` of `k` (0-based `j`, labelled `p_{s+j+1}`).
    Diagonal(usize),
    /// Complement of a group of `k` (see [`Embedding::k_groups`]) inside the
    /// sum of its projections.
    Residual(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitBlock {
    pub label: String,
    pub range: Range<usize>,
    pub kind: SplitBlockKind,
}

impl SplitBlock {
    pub fn len(&self) -> usize {
        self.range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }
}

/// Constants of the aligned decomposition.
///
/// `a[j]`, `b[j]`, `d[j]` hold `A_{s+j+1}`, `B_{s+j+1}`, `D_{s+j+1}` for
/// `j = 0..s−1`.
#[derive(Debug, Clone)]
pub struct AlignedFrame {
    pub c: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Rows `η_1 … η_{s−1}`.
    pub eta: DMatrix<f64>,
    /// `⟨·,·⟩`-orthonormal basis `Z^α` of `k` adapted to its ideals, as
    /// columns in the basis of `k`.
    pub adapted_k_basis: DMatrix<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub d: Vec<f64>,
    pub b_2s: f64,
}

impl AlignedFrame {
    /// `A_j` in the `1 ≤ j ≤ s−1` indexing.
    pub fn a_j(&self, j: usize) -> f64 {
        self.a[j - 1]
    }
}

/// `g_b`-orthogonal reductive decomposition with a `g_b`-orthonormal basis
/// of `p` adapted to its blocks.
#[derive(Debug, Clone)]
pub struct ReductiveSplit {
    pub embedding: Embedding,
    pub z: Vec<f64>,
    pub gb: DMatrix<f64>,
    pub p_basis: DMatrix<f64>,
    pub blocks: Vec<SplitBlock>,
    pub aligned: Option<AlignedFrame>,
}

impl ReductiveSplit {
    pub fn dim_p(&self) -> usize {
        self.p_basis.ncols()
    }

    pub fn s(&self) -> usize {
        self.embedding.ideal_count()
    }

    pub fn block_ranges(&self) -> Vec<Range<usize>> {
        self.blocks.iter().map(|b| b.range.clone()).collect()
    }

    pub fn block_basis(&self, b: usize) -> DMatrix<f64> {
        let r = &self.blocks[b].range;
        self.p_basis.columns(r.start, r.len()).into_owned()
    }

    /// Block index holding the isotropy part of ideal `i`, if nonempty.
    pub fn isotropy_block(&self, i: usize) -> Option<usize> {
        self.blocks
            .iter()
            .position(|b| b.kind == SplitBlockKind::Isotropy(i))
    }

    pub fn diagonal_block(&self, j: usize) -> Option<usize> {
        self.blocks
            .iter()
            .position(|b| b.kind == SplitBlockKind::Diagonal(j))
    }

    /// `max |g_b(k, p)|`.
    pub fn k_p_residual(&self) -> f64 {
        linalg::max_abs(&(self.embedding.inclusion().transpose() * &self.gb * &self.p_basis))
    }

    /// `max |Gram − I|` for the `p` basis.
    pub fn orthonormality_residual(&self) -> f64 {
        let n = self.dim_p();
        linalg::max_abs(&(self.p_basis.transpose() * &self.gb * &self.p_basis - DMatrix::identity(n, n)))
    }

    /// Largest component of `[k, block]` outside the block.
    pub fn invariance_residual(&self) -> f64 {
        let e = &self.embedding;
        let mut worst: f64 = 0.0;
        for b in 0..self.blocks.len() {
            let basis = self.block_basis(b);
            // g_b-orthogonal projector onto the block
            let proj = &basis * basis.transpose() * &self.gb;
            for z in 0..e.dim_k() {
                let zv = e.inclusion().column(z).into_owned();
                for v in basis.column_iter() {
                    let br = e.ambient().bracket(&zv, &v.into_owned());
                    let outside = &br - &proj * &br;
                    // only the p-part matters: brackets with k stay in p
                    worst = worst.max(linalg::max_abs_vec(&outside));
                }
            }
        }
        worst
    }

    /// `p` coordinates (in the block basis) of `ρ(Z)`: entry `(c, a)` is
    /// `g_b([Z, v_a], v_c)`.
    pub fn isotropy_action(&self, zk: &DVector<f64>) -> DMatrix<f64> {
        let e = &self.embedding;
        let z = e.inclusion() * zk;
        let ad = e.ambient().ad_matrix(&z).expect("dimension checked");
        self.p_basis.transpose() * &self.gb * ad * &self.p_basis
    }
}

fn ideal_basis(e: &Embedding, i: usize) -> DMatrix<f64> {
    let r = e.ideal_range(i);
    let mut m = DMatrix::zeros(e.dim_g(), r.len());
    for (c, row) in r.enumerate() {
        m[(row, c)] = 1.0;
    }
    m
}

fn isotropy_complements(e: &Embedding, gb: &DMatrix<f64>) -> Result<Vec<DMatrix<f64>>> {
    (0..e.ideal_count())
        .map(|i| {
            let image = linalg::column_space(&e.projected_inclusion(i));
            let q = linalg::orthogonal_complement(&image, &ideal_basis(e, i), gb);
            linalg::orthonormalize(&q, gb)
        })
        .collect()
}

/// `⟨·,·⟩`-orthonormal basis of `k` adapted to its blocks.
fn adapted_k_basis(e: &Embedding) -> Result<DMatrix<f64>> {
    let m = e.dim_k();
    let inner = e.k_inner_product();
    let mut out = DMatrix::zeros(m, m);
    let mut col = 0;
    for (_, idx) in e.k_groups() {
        let mut cols = DMatrix::zeros(m, idx.len());
        for (c, &i) in idx.iter().enumerate() {
            cols[(i, c)] = 1.0;
        }
        let q = linalg::orthonormalize(&cols, &inner)?;
        out.columns_mut(col, idx.len()).copy_from(&q);
        col += idx.len();
    }
    Ok(out)
}

fn finish_split(
    e: &Embedding,
    z: &[f64],
    gb: DMatrix<f64>,
    pieces: Vec<(String, SplitBlockKind, DMatrix<f64>)>,
    aligned: Option<AlignedFrame>,
) -> Result<ReductiveSplit> {
    let dim_p: usize = pieces.iter().map(|p| p.2.ncols()).sum();
    if dim_p != e.dim_p() {
        return Err(Error::RankDeficient(format!(
            "blocks span {dim_p} dimensions, expected dim p = {}",
            e.dim_p()
        )));
    }
    let mut p_basis = DMatrix::zeros(e.dim_g(), dim_p);
    let mut blocks = Vec::new();
    let mut offset = 0;
    for (label, kind, m) in pieces {
        if m.ncols() == 0 {
            continue;
        }
        p_basis.columns_mut(offset, m.ncols()).copy_from(&m);
        blocks.push(SplitBlock {
            label,
            range: offset..offset + m.ncols(),
            kind,
        });
        offset += m.ncols();
    }
    let split = ReductiveSplit {
        embedding: e.clone(),
        z: z.to_vec(),
        gb,
        p_basis,
        blocks,
        aligned,
    };
    let orth = split.orthonormality_residual();
    let kp = split.k_p_residual();
    if orth > SPLIT_TOL || kp > SPLIT_TOL {
        return Err(Error::NotAligned(format!(
            "decomposition is not g_b-orthonormal (Gram residual {orth:.3e}, g_b(k,p) {kp:.3e})"
        )));
    }
    Ok(split)
}

/// Aligned block decomposition `p = p_1 ⊕ … ⊕ p_s ⊕ g_{η_1} ⊕ … ⊕ g_{η_{s−1}}`.
pub fn aligned_split(e: &Embedding, a: &AlignmentData, z: &[f64]) -> Result<ReductiveSplit> {
    if !a.is_aligned {
        return Err(Error::NotAligned(a.diagnostics.clone()));
    }
    let s = e.ideal_count();
    check_z(z, s)?;
    let gb = e.normal_metric(z)?;
    let c = &a.c;
    let zk = adapted_k_basis(e)?;
    let zg = e.inclusion() * &zk;
    let proj: Vec<DMatrix<f64>> = (0..s)
        .map(|i| {
            let r = e.ideal_range(i);
            let mut m = DMatrix::zeros(e.dim_g(), e.dim_k());
            m.rows_mut(r.start, r.len()).copy_from(&zg.rows(r.start, r.len()));
            m
        })
        .collect();

    let mut a_vals = Vec::with_capacity(s - 1);
    let mut b_vals = Vec::with_capacity(s - 1);
    let mut d_vals = Vec::with_capacity(s - 1);
    let mut eta = DMatrix::zeros(s.saturating_sub(1), s);
    let mut partial = 0.0;
    for j in 0..s.saturating_sub(1) {
        partial += z[j] / c[j];
        let aj = -(c[j + 1] / z[j + 1]) * partial;
        let w = z[j + 1] / c[j + 1];
        a_vals.push(aj);
        b_vals.push(partial + aj * aj * w);
        d_vals.push(partial + aj * aj * aj * w);
        for l in 0..=j {
            eta[(j, l)] = 1.0;
        }
        eta[(j, j + 1)] = aj;
    }
    let b_2s: f64 = (0..s).map(|l| z[l] / c[l]).sum();

    let mut pieces = Vec::new();
    for (i, q) in isotropy_complements(e, &gb)?.into_iter().enumerate() {
        pieces.push((format!("p{}", i + 1), SplitBlockKind::Isotropy(i), q));
    }
    for j in 0..s.saturating_sub(1) {
        let mut phi = DMatrix::zeros(e.dim_g(), e.dim_k());
        for (l, p) in proj.iter().enumerate() {
            if eta[(j, l)] != 0.0 {
                phi += p * eta[(j, l)];
            }
        }
        phi /= b_vals[j].sqrt();
        pieces.push((format!("p{}", s + j + 1), SplitBlockKind::Diagonal(j), phi));
    }
    let frame = AlignedFrame {
        c: c.clone(),
        lambda: a.lambda.clone(),
        eta,
        adapted_k_basis: zk,
        a: a_vals,
        b: b_vals,
        d: d_vals,
        b_2s,
    };
    finish_split(e, z, gb, pieces, Some(frame))
}

/// Reductive decomposition for arbitrary embeddings: the isotropy parts of
/// each ideal followed by, for every block of `k`, the complement of that
/// block inside the sum of its projections.
pub fn generic_split(e: &Embedding, z: &[f64]) -> Result<ReductiveSplit> {
    let s = e.ideal_count();
    check_z(z, s)?;
    let gb = e.normal_metric(z)?;
    let mut pieces = Vec::new();
    for (i, q) in isotropy_complements(e, &gb)?.into_iter().enumerate() {
        pieces.push((format!("p{}", i + 1), SplitBlockKind::Isotropy(i), q));
    }
    for (bi, (label, idx)) in e.k_groups().into_iter().enumerate() {
        let projections: Vec<DMatrix<f64>> = (0..s)
            .map(|i| Embedding::select(&e.projected_inclusion(i), &idx))
            .collect();
        let all = DMatrix::from_fn(e.dim_g(), s * idx.len(), |r, c| {
            projections[c / idx.len()][(r, c % idx.len())]
        });
        let span = linalg::column_space(&all);
        let own = Embedding::select(e.inclusion(), &idx);
        let rest = linalg::orthogonal_complement(&own, &span, &gb);
        let rest = linalg::orthonormalize(&rest, &gb)?;
        pieces.push((format!("r_{label}"), SplitBlockKind::Residual(bi), rest));
    }
    finish_split(e, z, gb, pieces, None)
}

/// Intertwiner dimensions between isotropy blocks and ideals of `k`.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    /// `(isotropy block label, k block label, dim Hom_K)` for simple blocks.
    pub hom_dims: Vec<(String, String, usize)>,
    /// `(isotropy block label, dim of K-fixed vectors)`.
    pub fixed_dims: Vec<(String, usize)>,
    pub center_dim: usize,
    pub condition_i: bool,
    pub condition_ii: bool,
}

impl AssumptionReport {
    pub fn holds(&self) -> bool {
        self.condition_i && self.condition_ii
    }
}

fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Checks that no isotropy block `p_i` shares an irreducible summand with a
/// simple ideal of `k`, and that `p_i` has no fixed vectors when `k` has a
/// center.
pub fn assumption_check(e: &Embedding, split: &ReductiveSplit) -> AssumptionReport {
    let m = e.dim_k();
    let actions: Vec<DMatrix<f64>> = (0..m)
        .map(|z| {
            let mut v = DVector::zeros(m);
            v[z] = 1.0;
            split.isotropy_action(&v)
        })
        .collect();
    let mut hom_dims = Vec::new();
    let mut fixed_dims = Vec::new();
    for blk in split
        .blocks
        .iter()
        .filter(|b| matches!(b.kind, SplitBlockKind::Isotropy(_)))
    {
        let r = blk.range.clone();
        let rhos: Vec<DMatrix<f64>> = actions
            .iter()
            .map(|a| a.view((r.start, r.start), (r.len(), r.len())).into_owned())
            .collect();
        for kb in e.simple_k_blocks() {
            let kr = kb.range.clone();
            let d = kr.len();
            let n = r.len();
            let mut eqs = DMatrix::zeros(m * d * n, d * n);
            for (zi, rho) in rhos.iter().enumerate() {
                let ad = e.sub().ad_basis(zi);
                let ad = ad.view((kr.start, kr.start), (d, d)).into_owned();
                // vec(ad·T − T·ρ) = (I ⊗ ad − ρᵀ ⊗ I) vec(T)
                let op = kron(&DMatrix::identity(n, n), &ad) - kron(&rho.transpose(), &DMatrix::identity(d, d));
                eqs.rows_mut(zi * d * n, d * n).copy_from(&op);
            }
            let dim = linalg::null_space(&eqs).ncols();
            hom_dims.push((blk.label.clone(), kb.label.clone(), dim));
        }
        let n = r.len();
        let mut stacked = DMatrix::zeros(m * n, n);
        for (zi, rho) in rhos.iter().enumerate() {
            stacked.rows_mut(zi * n, n).copy_from(rho);
        }
        let fixed = if m == 0 { n } else { linalg::null_space(&stacked).ncols() };
        fixed_dims.push((blk.label.clone(), fixed));
    }
    let center_dim = e.center_dim();
    let condition_i = hom_dims.iter().all(|h| h.2 == 0);
    let condition_ii = center_dim == 0 || fixed_dims.iter().all(|f| f.1 == 0);
    AssumptionReport {
        hom_dims,
        fixed_dims,
        center_dim,
        condition_i,
        condition_ii,
    }
}
