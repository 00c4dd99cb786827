//! Cartan 3-forms, the closed forms `H_Q` on `G/K`, and the closed-form
//! harmonicity criteria together with their metric families.

use nalgebra::{DMatrix, DVector};

use crate::exterior::{InvariantComplex, InvariantForm, MetricSpec};
use crate::homog::{
    self, alignment_check, aligned_split, assumption_check, AlignedFrame, AssumptionReport,
    Embedding, ReductiveSplit, SplitBlockKind,
};
use crate::liealg::{BilinearForm, LieAlgebra};
use crate::{linalg, Error, Result};

/// Threshold for `Q|_{k×k} = 0`.
pub const ADMISSIBLE_TOL: f64 = 1e-9;
/// Threshold on the normalized residual of the harmonicity equations.
pub const HARM_TOL: f64 = 1e-8;
/// Threshold on the oracle residual of a unit-norm form.
pub const ORACLE_TOL: f64 = 1e-8;
/// Bisection tolerance in `A` for the normal-for-`Q` family.
pub const ROOT_TOL: f64 = 1e-12;

/// `Q = Σ y_i κ_{g_i}`.
#[derive(Debug, Clone)]
pub struct BiInvariantQ {
    pub y: Vec<f64>,
    pub matrix: DMatrix<f64>,
    /// `max |Q(Z, W)|` over basis vectors of `k`.
    pub restriction_norm: f64,
    pub invariance_residual: f64,
    pub admissible: bool,
}

fn ideal_sum(alg: &LieAlgebra, ranges: &[std::ops::Range<usize>], y: &[f64]) -> DMatrix<f64> {
    let kappa = alg.killing_form().matrix;
    let n = alg.dim();
    let mut q = DMatrix::zeros(n, n);
    for (r, yi) in ranges.iter().zip(y) {
        let sub = kappa.view((r.start, r.start), (r.len(), r.len())) * *yi;
        q.view_mut((r.start, r.start), (r.len(), r.len())).copy_from(&sub);
    }
    q
}

/// Assembles `Q` on `g` and decides admissibility against the kernel of
/// `y ↦ Q|_{k×k}`.
pub fn make_q(e: &Embedding, y: &[f64]) -> Result<BiInvariantQ> {
    let s = e.ideal_count();
    if y.len() != s {
        return Err(Error::DimensionMismatch {
            expected: s,
            got: y.len(),
        });
    }
    let ranges: Vec<_> = (0..s).map(|i| e.ideal_range(i)).collect();
    let matrix = ideal_sum(e.ambient(), &ranges, y);
    let restriction = e.inclusion().transpose() * &matrix * e.inclusion();
    let restriction_norm = linalg::max_abs(&restriction);
    let kernel = homog::b3_dimension(e).kernel;
    let yv = DVector::from_column_slice(y);
    let off = if kernel.ncols() == 0 {
        yv.norm()
    } else {
        (&yv - &kernel * (kernel.transpose() * &yv)).norm()
    };
    let invariance_residual = BilinearForm::new(matrix.clone()).invariance_residual(e.ambient());
    Ok(BiInvariantQ {
        y: y.to_vec(),
        matrix,
        restriction_norm,
        invariance_residual,
        admissible: off <= ADMISSIBLE_TOL * yv.norm().max(1.0),
    })
}

/// `Q = Σ y_i κ_{g_i}` over the simple ideals of a Lie algebra (no `k`).
pub fn make_group_q(alg: &LieAlgebra, y: &[f64]) -> Result<BiInvariantQ> {
    let ranges: Vec<_> = alg.simple_blocks().map(|b| b.range.clone()).collect();
    if y.len() != ranges.len() {
        return Err(Error::DimensionMismatch {
            expected: ranges.len(),
            got: y.len(),
        });
    }
    let matrix = ideal_sum(alg, &ranges, y);
    let invariance_residual = BilinearForm::new(matrix.clone()).invariance_residual(alg);
    Ok(BiInvariantQ {
        y: y.to_vec(),
        matrix,
        restriction_norm: 0.0,
        invariance_residual,
        admissible: true,
    })
}

fn p_columns(cx: &InvariantComplex) -> Vec<DVector<f64>> {
    cx.p_basis().column_iter().map(|c| c.into_owned()).collect()
}

/// `Q([e_a, e_b], e_c)` with full brackets: `Q̄` on a group, `Q̃` on `p`.
pub fn cartan_form(cx: &InvariantComplex, q: &DMatrix<f64>) -> InvariantForm {
    let cols = p_columns(cx);
    let qp = q * cx.p_basis();
    let alg = cx.ambient();
    InvariantForm::from_fn(cx.n(), 3, |idx| {
        let br = alg.bracket(&cols[idx[0]], &cols[idx[1]]);
        br.dot(&qp.column(idx[2]))
    })
}

/// `H_Q`, the 2-form `α_Q` on `g`, and the residuals of its defining
/// identities.
#[derive(Debug, Clone)]
pub struct HForm {
    pub h: InvariantForm,
    /// `α_Q(U, V) = Q(U_p, V_k) − Q(V_p, U_k)` in the basis of `g`.
    pub alpha: DMatrix<f64>,
    /// `max |dH_Q|`.
    pub closed_residual: f64,
    /// Distance between the two expressions of `H_Q`.
    pub alt_residual: f64,
    /// `max |π*H_Q − Q̄ − d̂α_Q|` over basis triples of `g`.
    pub pullback_residual: f64,
}

fn projectors(cx: &InvariantComplex) -> (DMatrix<f64>, DMatrix<f64>) {
    let p = cx.p_basis();
    let pp = p * p.transpose() * cx.gb();
    let m = pp.nrows();
    let pk = DMatrix::identity(m, m) - &pp;
    (pp, pk)
}

fn dense3(f: &InvariantForm) -> Vec<f64> {
    let n = f.n();
    let mut t = vec![0.0; n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                if a != b && b != c && a != c {
                    t[(a * n + b) * n + c] = f.get(&[a, b, c]);
                }
            }
        }
    }
    t
}

/// Builds `H_Q = 4Q([X,Y],Z) − Q([X,Y]_p,Z) + Q([X,Z]_p,Y) − Q([Y,Z]_p,X)`
/// and checks it against `Q([X,Y],Z) + Q([X,Y]_k,Z) − Q([X,Z]_k,Y) +
/// Q([Y,Z]_k,X)` and against `π*H_Q = Q̄ + d̂α_Q`.
pub fn h_q(cx: &InvariantComplex, q: &DMatrix<f64>) -> Result<HForm> {
    let kq = cx.k_in_g().transpose() * q * cx.k_in_g();
    let scale = linalg::max_abs(q).max(1.0);
    if linalg::max_abs(&kq) > ADMISSIBLE_TOL * scale {
        return Err(Error::NotAdmissible(format!(
            "max |Q(k, k)| = {:.3e}",
            linalg::max_abs(&kq)
        )));
    }
    let n = cx.n();
    let alg = cx.ambient();
    let cols = p_columns(cx);
    let (pp, pk) = projectors(cx);
    let qp = q * cx.p_basis();
    let mut br = vec![DVector::zeros(0); n * n];
    for a in 0..n {
        for b in a + 1..n {
            br[a * n + b] = alg.bracket(&cols[a], &cols[b]);
        }
    }
    let qv = |v: &DVector<f64>, c: usize| v.dot(&qp.column(c));
    let h = InvariantForm::from_fn(n, 3, |idx| {
        let (a, b, c) = (idx[0], idx[1], idx[2]);
        4.0 * qv(&br[a * n + b], c) - qv(&(&pp * &br[a * n + b]), c) + qv(&(&pp * &br[a * n + c]), b)
            - qv(&(&pp * &br[b * n + c]), a)
    });
    let alt = InvariantForm::from_fn(n, 3, |idx| {
        let (a, b, c) = (idx[0], idx[1], idx[2]);
        qv(&br[a * n + b], c) + qv(&(&pk * &br[a * n + b]), c) - qv(&(&pk * &br[a * n + c]), b)
            + qv(&(&pk * &br[b * n + c]), a)
    });
    let alt_residual = (h.coeffs() - alt.coeffs()).amax();
    let closed_residual = cx.differential(&h).max_abs();

    let m = alg.dim();
    let half = pp.transpose() * q * &pk;
    let alpha = &half - half.transpose();

    // π*H_Q on g: contract the p-tensor with the coordinate map g → p
    let r = cx.p_basis().transpose() * cx.gb();
    let t = dense3(&h);
    let mut t1 = vec![0.0; n * n * m];
    for a in 0..n {
        for b in 0..n {
            for k in 0..m {
                let mut s = 0.0;
                for c in 0..n {
                    s += t[(a * n + b) * n + c] * r[(c, k)];
                }
                t1[(a * n + b) * m + k] = s;
            }
        }
    }
    let mut t2 = vec![0.0; n * m * m];
    for a in 0..n {
        for j in 0..m {
            for k in 0..m {
                let mut s = 0.0;
                for b in 0..n {
                    s += t1[(a * n + b) * m + k] * r[(b, j)];
                }
                t2[(a * m + j) * m + k] = s;
            }
        }
    }
    let qa = |mat: &DMatrix<f64>, i: usize, j: usize, k: usize| -> f64 {
        (0..m).map(|l| alg.c(i, j, l) * mat[(l, k)]).sum()
    };
    let mut pullback_residual: f64 = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            for k in j + 1..m {
                let pull: f64 = (0..n).map(|a| r[(a, i)] * t2[(a * m + j) * m + k]).sum();
                let qbar = qa(q, i, j, k);
                let dalpha = -qa(&alpha, i, j, k) + qa(&alpha, i, k, j) - qa(&alpha, j, k, i);
                pullback_residual = pullback_residual.max((pull - qbar - dalpha).abs());
            }
        }
    }
    Ok(HForm {
        h,
        alpha,
        closed_residual,
        alt_residual,
        pullback_residual,
    })
}

/// `‖d*_{g_b} Q̃‖_{g_b}` at the normal metric of the complex.
pub fn qtilde_coclosure_residual(cx: &InvariantComplex, q: &DMatrix<f64>) -> Result<f64> {
    let qt = cartan_form(cx, q);
    let metric = MetricSpec::normal(cx.z().to_vec(), cx.block_count());
    cx.norm(&metric, &cx.codifferential(&metric, &qt)?)
}

fn require_group(cx: &InvariantComplex, x: &[f64]) -> Result<()> {
    if cx.k_in_g().ncols() != 0 {
        return Err(Error::InvalidArgument("closed-form d* needs K trivial".into()));
    }
    if x.len() != cx.n() {
        return Err(Error::DimensionMismatch {
            expected: cx.n(),
            got: x.len(),
        });
    }
    if let Some(bad) = x.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::InvalidArgument(format!("metric entries must be positive, got {bad}")));
    }
    Ok(())
}

/// `Σ_{i,j} c_ij^k β(e_i, e_j, e_l) / (x_i x_j)`.
fn contracted(cx: &InvariantComplex, x: &[f64], beta: &InvariantForm, k: usize, l: usize) -> f64 {
    let n = cx.n();
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let c = cx.c(i, j, k);
            if c != 0.0 {
                s += 2.0 * c * beta.get(&[i, j, l]) / (x[i] * x[j]);
            }
        }
    }
    s
}

/// Closed-form codifferential of a 3-form on a Lie group for the diagonal
/// metric `g = (x_1,…,x_n)_{g_b}`:
/// `d*β = −3/2 Σ_{k<l} (x_k Σ c_ij^k β_ijl/(x_i x_j) − x_l Σ c_ij^l β_ijk/(x_i x_j)) e_k∧e_l`.
pub fn closed_form_codifferential(cx: &InvariantComplex, x: &[f64], beta: &InvariantForm) -> Result<InvariantForm> {
    require_group(cx, x)?;
    if beta.degree() != 3 {
        return Err(Error::InvalidArgument(format!(
            "expected a 3-form, got degree {}",
            beta.degree()
        )));
    }
    Ok(InvariantForm::from_fn(cx.n(), 2, |idx| {
        let (k, l) = (idx[0], idx[1]);
        -1.5 * (x[k] * contracted(cx, x, beta, k, l) - x[l] * contracted(cx, x, beta, l, k))
    }))
}

/// Ideal of `g` holding each basis vector of a Lie-group complex.
fn ideal_of(cx: &InvariantComplex) -> Result<Vec<usize>> {
    let blocks = cx.ambient().blocks();
    cx.p_basis()
        .column_iter()
        .map(|col| {
            let hits: Vec<usize> = blocks
                .iter()
                .enumerate()
                .filter(|(_, b)| b.range.clone().any(|r| col[r].abs() > 1e-12))
                .map(|(i, _)| i)
                .collect();
            match hits.as_slice() {
                [i] => Ok(*i),
                _ => Err(Error::InvalidArgument(
                    "basis is not adapted to the ideal decomposition".into(),
                )),
            }
        })
        .collect()
}

/// `S_kl = Σ_{i,j} c_ij^k c_ij^l / (x_i x_j)`.
fn s_kl(cx: &InvariantComplex, x: &[f64], k: usize, l: usize) -> f64 {
    let n = cx.n();
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let a = cx.c(i, j, k);
            if a != 0.0 {
                s += 2.0 * a * cx.c(i, j, l) / (x[i] * x[j]);
            }
        }
    }
    s
}

/// Closed form of `d*_g Q̄` for `Q = Σ y_i κ_{g_i}` on a Lie group with a
/// diagonal metric adapted to the ideals:
/// `(3/2) Σ_i (y_i/z_i) Σ_{γ<δ in g_i} (x_γ − x_δ) S_γδ e_γ∧e_δ`.
pub fn cartan_codifferential(cx: &InvariantComplex, x: &[f64], y: &[f64]) -> Result<InvariantForm> {
    require_group(cx, x)?;
    let ideal = ideal_of(cx)?;
    let simple: Vec<usize> = cx
        .ambient()
        .blocks()
        .iter()
        .enumerate()
        .filter(|(_, b)| b.kind == crate::liealg::BlockKind::Simple)
        .map(|(i, _)| i)
        .collect();
    if y.len() != simple.len() {
        return Err(Error::DimensionMismatch {
            expected: simple.len(),
            got: y.len(),
        });
    }
    let z = cx.z();
    let coef = |blk: usize| -> f64 {
        simple
            .iter()
            .position(|&b| b == blk)
            .map_or(0.0, |p| y[p] / z[blk])
    };
    Ok(InvariantForm::from_fn(cx.n(), 2, |idx| {
        let (k, l) = (idx[0], idx[1]);
        if ideal[k] != ideal[l] {
            return 0.0;
        }
        1.5 * coef(ideal[k]) * (x[k] - x[l]) * s_kl(cx, x, k, l)
    }))
}

/// Outcome of the Lie-group harmonicity conditions.
#[derive(Debug, Clone)]
pub struct GroupHarmonicity {
    /// `(k, l, S_kl)` for every same-ideal pair with `x_k ≠ x_l` and `y ≠ 0`.
    pub conditions: Vec<(usize, usize, f64)>,
    pub max_violation: f64,
    pub harmonic: bool,
    /// With a correction `α`: `max |d*(Q̄ + dα)|` from the closed forms.
    pub correction_residual: Option<f64>,
}

/// Evaluates `Σ c_ij^k c_ij^l/(x_i x_j) = 0` for `x_k ≠ x_l`, and with `alpha`
/// the coclosedness of `Q̄ + dα` through the closed forms.
pub fn group_harmonicity(
    cx: &InvariantComplex,
    x: &[f64],
    y: &[f64],
    alpha: Option<&InvariantForm>,
) -> Result<GroupHarmonicity> {
    let closed = cartan_codifferential(cx, x, y)?;
    let ideal = ideal_of(cx)?;
    let n = cx.n();
    let simple: Vec<usize> = cx
        .ambient()
        .blocks()
        .iter()
        .enumerate()
        .filter(|(_, b)| b.kind == crate::liealg::BlockKind::Simple)
        .map(|(i, _)| i)
        .collect();
    let active = |blk: usize| simple.iter().position(|&b| b == blk).is_some_and(|p| y[p] != 0.0);
    let mut conditions = Vec::new();
    let mut scale: f64 = 1.0;
    for k in 0..n {
        for l in k + 1..n {
            if ideal[k] != ideal[l] || !active(ideal[k]) {
                continue;
            }
            if (x[k] - x[l]).abs() <= 1e-12 * x[k].max(x[l]) {
                continue;
            }
            let s = s_kl(cx, x, k, l);
            scale = scale.max(s_kl(cx, x, k, k).abs());
            conditions.push((k, l, s));
        }
    }
    let max_violation = conditions.iter().map(|c| c.2.abs()).fold(0.0, f64::max);
    let mut harmonic = max_violation <= 1e-9 * scale;
    let correction_residual = match alpha {
        Some(a) => {
            let da = cx.differential(a);
            let total = closed.add(&closed_form_codifferential(cx, x, &da)?);
            let r = total.max_abs();
            harmonic = r <= 1e-9 * scale;
            Some(r)
        }
        None => None,
    };
    Ok(GroupHarmonicity {
        conditions,
        max_violation,
        harmonic,
        correction_residual,
    })
}

fn su3_pieces(x: &[f64; 8]) -> (f64, f64, f64) {
    let p = 1.0 / (x[2] * x[5]);
    let q = 1.0 / (x[3] * x[6]);
    (p, q, x[0] / (x[4] * x[7]))
}

/// `t` as printed for the harmonic representative `Hκ + t·d(e_1∧e_2)` on
/// `SU(3)` with a diagonal metric in the standard basis.
pub fn su3_correction(x: &[f64; 8]) -> f64 {
    let (p, q, r) = su3_pieces(x);
    -(3f64.sqrt()) * (x[0] - x[1]) * (p - q) / ((x[0] + 3.0 * x[1]) * (p + q) + 12.0 * r)
}

/// `t` making `Hκ + t·d(e_1∧e_2)` harmonic, with `Hκ = κ([·,·],·)`.
pub fn su3_harmonic_correction(x: &[f64; 8]) -> f64 {
    let (p, q, r) = su3_pieces(x);
    3f64.sqrt() * (x[0] - x[1]) * (p - q) / ((x[0] + 3.0 * x[1]) * (p + q) + 4.0 * r)
}

/// Casimir constants of an aligned split.
#[derive(Debug, Clone)]
pub struct CasimirData {
    /// `Σ λ_j dim k_j`.
    pub cas0: f64,
    /// `Cas_1 … Cas_s`; zero for empty `p_i`.
    pub cas: Vec<f64>,
    /// `max_i |Cas_i + Cas_0 − dim k / c_i|`.
    pub identity_residual: f64,
    /// `Σ ⟨[Z^α, Z^β], Z^γ⟩²` over the adapted basis of `k`.
    pub cas0_structure: f64,
}

fn frame(split: &ReductiveSplit) -> Result<&AlignedFrame> {
    split
        .aligned
        .as_ref()
        .ok_or_else(|| Error::NotAligned("split was not built from alignment data".into()))
}

pub fn casimir_data(split: &ReductiveSplit) -> Result<CasimirData> {
    let fr = frame(split)?;
    let e = &split.embedding;
    let zk = &fr.adapted_k_basis;
    let zg = e.inclusion() * zk;
    let gz = &split.gb * &zg;
    let s = e.ideal_count();
    let mut cas = vec![0.0; s];
    for (i, slot) in cas.iter_mut().enumerate() {
        let Some(b) = split.isotropy_block(i) else {
            continue;
        };
        let basis = split.block_basis(b);
        let cols: Vec<DVector<f64>> = basis.column_iter().map(|c| c.into_owned()).collect();
        let mut sum = 0.0;
        for a in 0..cols.len() {
            for bb in 0..cols.len() {
                let br = e.ambient().bracket(&cols[a], &cols[bb]);
                sum += (gz.transpose() * br).norm_squared();
            }
        }
        *slot = sum;
    }
    let simple = e.simple_k_blocks();
    let cas0: f64 = simple
        .iter()
        .zip(&fr.lambda)
        .map(|(b, l)| l * b.len() as f64)
        .sum();
    let inner = e.k_inner_product();
    let m = e.dim_k();
    let mut cas0_structure = 0.0;
    for a in 0..m {
        for b in 0..m {
            let br = e.sub().bracket(&zk.column(a).into_owned(), &zk.column(b).into_owned());
            cas0_structure += (zk.transpose() * &inner * br).norm_squared();
        }
    }
    let identity_residual = (0..s)
        .map(|i| (cas[i] + cas0 - m as f64 / fr.c[i]).abs())
        .fold(0.0, f64::max);
    Ok(CasimirData {
        cas0,
        cas,
        identity_residual,
        cas0_structure,
    })
}

/// Data of the harmonicity equations for one `(x, Q)`.
#[derive(Debug, Clone)]
pub struct HarmonicityCheck {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// `A_1 … A_{s−1}`.
    pub big_a: Vec<f64>,
    /// `C_1 … C_{s−1}` for the unit-norm `y`.
    pub c: Vec<f64>,
    /// `(j, k, normalized lhs − rhs)` for `1 ≤ j < k ≤ s−1`.
    pub residuals: Vec<(usize, usize, f64)>,
    /// `(lhs, rhs)` of each equation, same order as `residuals`.
    pub sides: Vec<(f64, f64)>,
    pub max_residual: f64,
    pub holds: bool,
}

/// Closed-form metric families.
#[derive(Debug, Clone, PartialEq)]
pub enum FamilyMode {
    /// `Cas_0 = 0`: `x_2 … x_s` from `x_1`; `diagonal` gives
    /// `x_{s+1} … x_{2s−1}` (free).
    AbelianK { x1: f64, diagonal: Vec<f64> },
    /// `Cas_0 > 0`: everything from `x_1`, `x_s`, `x_{s+1}`.
    NonabelianK { x1: f64, xs: f64, x_diag: f64 },
    /// `(1,…,1,t)` when every `Cas_i = 0`.
    LedgerObata,
    /// Normal metrics making `H_Q` harmonic, at parameter `tau` of the
    /// common ratio `(a_j A_j + b_j)/C_j`.
    NormalForQ { y: Vec<f64>, tau: f64 },
}

/// A member of a closed-form metric family.
#[derive(Debug, Clone)]
pub struct MetricFamily {
    /// `x_1 … x_{2s−1}` (entries of empty blocks are 1 and unused).
    pub x: Vec<f64>,
    /// Bi-invariant coefficients of the background metric.
    pub z: Vec<f64>,
    /// Named positivity thresholds or parameters (`u`, `v`, `t`, `A_j`).
    pub values: Vec<(String, f64)>,
}

/// An aligned space with its split, Casimir constants and the oracle
/// complex.
#[derive(Debug)]
pub struct AlignedSpace {
    pub split: ReductiveSplit,
    pub casimir: CasimirData,
    pub assumptions: AssumptionReport,
    complex: InvariantComplex,
}

impl AlignedSpace {
    pub fn new(e: &Embedding, z: &[f64]) -> Result<Self> {
        let a = alignment_check(e);
        let split = aligned_split(e, &a, z)?;
        Self::from_split(split)
    }

    pub fn from_split(split: ReductiveSplit) -> Result<Self> {
        frame(&split)?;
        let casimir = casimir_data(&split)?;
        let assumptions = assumption_check(&split.embedding, &split);
        let complex = InvariantComplex::from_split(&split)?;
        Ok(AlignedSpace {
            split,
            casimir,
            assumptions,
            complex,
        })
    }

    pub fn s(&self) -> usize {
        self.split.s()
    }

    pub fn frame(&self) -> &AlignedFrame {
        self.split.aligned.as_ref().expect("checked in constructor")
    }

    pub fn complex(&self) -> &InvariantComplex {
        &self.complex
    }

    pub fn embedding(&self) -> &Embedding {
        &self.split.embedding
    }

    /// `x_1 … x_{2s−1}` from per-block scalings (1 for empty blocks).
    pub fn full_x(&self, x_blocks: &[f64]) -> Result<Vec<f64>> {
        let s = self.s();
        if x_blocks.len() != self.split.blocks.len() {
            return Err(Error::DimensionMismatch {
                expected: self.split.blocks.len(),
                got: x_blocks.len(),
            });
        }
        let mut x = vec![1.0; 2 * s - 1];
        for (blk, v) in self.split.blocks.iter().zip(x_blocks) {
            match blk.kind {
                SplitBlockKind::Isotropy(i) => x[i] = *v,
                SplitBlockKind::Diagonal(j) => x[s + j] = *v,
                SplitBlockKind::Residual(_) => unreachable!("aligned splits have no residual blocks"),
            }
        }
        Ok(x)
    }

    /// Per-block scalings from `x_1 … x_{2s−1}`.
    pub fn block_x(&self, x: &[f64]) -> Vec<f64> {
        let s = self.s();
        self.split
            .blocks
            .iter()
            .map(|b| match b.kind {
                SplitBlockKind::Isotropy(i) => x[i],
                SplitBlockKind::Diagonal(j) => x[s + j],
                SplitBlockKind::Residual(_) => 1.0,
            })
            .collect()
    }

    pub fn metric(&self, x_blocks: &[f64]) -> Result<MetricSpec> {
        MetricSpec::new(self.split.z.clone(), x_blocks.to_vec())
    }

    /// `Σ y_i / c_i`.
    pub fn admissibility(&self, y: &[f64]) -> f64 {
        y.iter().zip(&self.frame().c).map(|(y, c)| y / c).sum()
    }

    /// Orthonormal basis (columns) of `{y : Σ y_i/c_i = 0}`.
    pub fn admissible_basis(&self) -> DMatrix<f64> {
        let row = DMatrix::from_row_slice(1, self.s(), &self.frame().c.iter().map(|c| 1.0 / c).collect::<Vec<_>>());
        linalg::null_space(&row)
    }

    /// `(a_j, b_j)` for `j = 1 … s−1` at the full metric `x`.
    fn ab(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let s = self.s();
        let cas = &self.casimir.cas;
        let cas0 = self.casimir.cas0;
        let mut a = Vec::with_capacity(s - 1);
        let mut b = Vec::with_capacity(s - 1);
        let mut partial = 0.0;
        for j in 1..s {
            partial += cas[j - 1] / (x[j - 1] * x[j - 1]) + cas0 / (x[s + j - 1] * x[s + j - 1]);
            a.push(cas[j] / (x[j] * x[j]) + cas0 / (x[s + j - 1] * x[s + j - 1]));
            b.push(partial);
        }
        (a, b)
    }

    /// Row vector of `y ↦ C_j`, `j` 1-based.
    fn c_row(&self, j: usize) -> DVector<f64> {
        let fr = self.frame();
        let mut r = DVector::zeros(self.s());
        for l in 0..j {
            r[l] = 1.0 / fr.c[l];
        }
        r[j] = fr.a_j(j) / fr.c[j];
        r
    }

    /// `(j, k, lhs coefficient, rhs coefficient)` of the harmonicity
    /// equations `L_jk C_j = R_jk C_k`.
    fn harm_coefficients(&self, x: &[f64]) -> Vec<(usize, usize, f64, f64)> {
        let s = self.s();
        let (a, b) = self.ab(x);
        let big_a = &self.frame().a;
        let cas0 = self.casimir.cas0;
        let xs = |j: usize| x[s + j - 1];
        let mut out = Vec::new();
        for j in 1..s {
            for k in j + 1..s {
                let lhs = xs(k)
                    * (a[k - 1] * big_a[k - 1] + b[k - 1]
                        + 2.0 * cas0 * (1.0 / (xs(j) * xs(j)) - 1.0 / (xs(k) * xs(k))));
                let rhs = xs(j) * (a[j - 1] * big_a[j - 1] + b[j - 1]);
                out.push((j, k, lhs, rhs));
            }
        }
        out
    }

    fn check_y(&self, y: &[f64]) -> Result<DVector<f64>> {
        if y.len() != self.s() {
            return Err(Error::DimensionMismatch {
                expected: self.s(),
                got: y.len(),
            });
        }
        let yv = DVector::from_column_slice(y);
        let norm = yv.norm();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("Q must be nonzero".into()));
        }
        let yv = yv / norm;
        let adm = self.admissibility(yv.as_slice());
        if adm.abs() > ADMISSIBLE_TOL {
            return Err(Error::NotAdmissible(format!("Σ y_i/c_i = {adm:.3e}")));
        }
        Ok(yv)
    }

    fn check_assumptions(&self) -> Result<()> {
        if self.assumptions.holds() {
            return Ok(());
        }
        let mut why = Vec::new();
        if !self.assumptions.condition_i {
            for (p, k, d) in &self.assumptions.hom_dims {
                if *d > 0 {
                    why.push(format!("{p} shares a summand with {k} ({d} intertwiners)"));
                }
            }
        }
        if !self.assumptions.condition_ii {
            why.push("isotropy blocks have fixed vectors while k has a center".into());
        }
        Err(Error::AssumptionViolated(why.join("; ")))
    }

    /// Evaluates the harmonicity equations for `H_Q` at the metric with
    /// per-block scalings `x_blocks`.
    pub fn theorem_check(&self, x_blocks: &[f64], y: &[f64]) -> Result<HarmonicityCheck> {
        self.check_assumptions()?;
        let x = self.full_x(x_blocks)?;
        if let Some(bad) = x.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::InvalidArgument(format!("metric entries must be positive, got {bad}")));
        }
        let yv = self.check_y(y)?;
        let s = self.s();
        let (a, b) = self.ab(&x);
        let c: Vec<f64> = (1..s).map(|j| self.c_row(j).dot(&yv)).collect();
        let mut residuals = Vec::new();
        let mut sides = Vec::new();
        for (j, k, l, r) in self.harm_coefficients(&x) {
            let lhs = l * c[j - 1];
            let rhs = r * c[k - 1];
            residuals.push((j, k, (lhs - rhs) / lhs.abs().max(rhs.abs()).max(1.0)));
            sides.push((lhs, rhs));
        }
        let max_residual = residuals.iter().map(|r| r.2.abs()).fold(0.0, f64::max);
        Ok(HarmonicityCheck {
            a,
            b,
            big_a: self.frame().a.clone(),
            c,
            residuals,
            sides,
            max_residual,
            holds: max_residual <= HARM_TOL,
        })
    }

    /// `H_Q` for `Q = Σ y_i κ_{g_i}`.
    pub fn h_form(&self, y: &[f64]) -> Result<HForm> {
        let q = make_q(self.embedding(), y)?;
        h_q(&self.complex, &q.matrix)
    }

    /// `‖dH‖_g + ‖d*_g H‖_g` for `H = H_Q/‖H_Q‖_g`.
    pub fn oracle_residual(&self, x_blocks: &[f64], y: &[f64]) -> Result<f64> {
        let metric = self.metric(x_blocks)?;
        let h = self.h_form(y)?.h;
        let norm = self.complex.norm(&metric, &h)?;
        if norm == 0.0 {
            return Err(Error::InvalidArgument("H_Q vanishes".into()));
        }
        self.complex.harmonic_residual(&metric, &h.scaled(1.0 / norm))
    }

    /// Basis (columns) of the admissible `y` whose `H_Q` satisfies the
    /// harmonicity equations at `x_blocks`.
    pub fn harmonic_q_space(&self, x_blocks: &[f64]) -> Result<DMatrix<f64>> {
        self.check_assumptions()?;
        let x = self.full_x(x_blocks)?;
        let s = self.s();
        let mut rows: Vec<DVector<f64>> = Vec::new();
        let adm = DVector::from_iterator(s, self.frame().c.iter().map(|c| 1.0 / c));
        rows.push(&adm / adm.norm());
        for (j, k, l, r) in self.harm_coefficients(&x) {
            let row = self.c_row(j) * l - self.c_row(k) * r;
            let n = row.norm();
            if n > 0.0 {
                rows.push(row / n);
            }
        }
        let m = DMatrix::from_fn(rows.len(), s, |i, c| rows[i][c]);
        Ok(linalg::null_space(&m))
    }

    /// The unique ray of admissible `Q` with `H_Q` harmonic for the normal
    /// metric `g_b` of the split, unit norm and first nonzero entry positive.
    pub fn unique_harmonic_q(&self) -> Result<BiInvariantQ> {
        self.check_assumptions()?;
        let s = self.s();
        let x = vec![1.0; 2 * s - 1];
        let (a, b) = self.ab(&x);
        let big_a = &self.frame().a;
        let e: Vec<f64> = (0..s - 1).map(|j| a[j] * big_a[j] + b[j]).collect();
        let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if e.iter().all(|v| v.abs() <= 1e-10 * scale) {
            return Err(Error::InvalidArgument(
                "g_b is proportional to the standard metric; every H_Q is harmonic".into(),
            ));
        }
        let mut m = DMatrix::zeros(s, s);
        let mut rhs = DVector::zeros(s);
        for j in 0..s - 1 {
            for l in 0..=j {
                m[(j, l)] = 1.0;
            }
            m[(j, j + 1)] = big_a[j];
            rhs[j] = if e[j].abs() <= 1e-10 * scale { 0.0 } else { e[j] };
        }
        for l in 0..s {
            m[(s - 1, l)] = 1.0;
        }
        let u = m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::RankDeficient("A-matrix of the split".into()))?;
        let c = &self.frame().c;
        let mut y: Vec<f64> = u.iter().zip(c).map(|(u, c)| u * c).collect();
        normalize_ray(&mut y);
        make_q(self.embedding(), &y)
    }

    /// A member of one of the closed-form metric families.
    pub fn special_families(&self, mode: &FamilyMode) -> Result<MetricFamily> {
        match mode {
            FamilyMode::AbelianK { x1, diagonal } => self.abelian_family(*x1, diagonal),
            FamilyMode::NonabelianK { x1, xs, x_diag } => self.nonabelian_family(*x1, *xs, *x_diag),
            FamilyMode::LedgerObata => self.ledger_obata_family(),
            FamilyMode::NormalForQ { y, tau } => self.normal_for_q(y, *tau),
        }
    }

    fn abelian_family(&self, x1: f64, diagonal: &[f64]) -> Result<MetricFamily> {
        let s = self.s();
        if self.casimir.cas0.abs() > 1e-10 {
            return Err(Error::InvalidArgument("k is not abelian (Cas_0 > 0)".into()));
        }
        if diagonal.len() != s - 1 {
            return Err(Error::DimensionMismatch {
                expected: s - 1,
                got: diagonal.len(),
            });
        }
        let cas = &self.casimir.cas;
        let big_a = &self.frame().a;
        let mut x = vec![1.0; 2 * s - 1];
        x[0] = x1;
        x[s..].copy_from_slice(diagonal);
        let mut sum = cas[0] / (x1 * x1);
        for j in 1..s {
            let v = -big_a[j - 1] * cas[j] / sum;
            if !(v > 0.0) {
                return Err(Error::Infeasible(format!("x_{} has no positive solution", j + 1)));
            }
            x[j] = v.sqrt();
            sum += cas[j] / v;
        }
        Ok(MetricFamily {
            x,
            z: self.split.z.clone(),
            values: Vec::new(),
        })
    }

    /// `x_2 … x_{s−1}` from `x_1` and `w = 1/x_{s+1}²`, or the index whose
    /// right-hand side is not positive.
    fn nonabelian_prefix(&self, x1: f64, w: f64) -> std::result::Result<Vec<f64>, usize> {
        let s = self.s();
        let cas = &self.casimir.cas;
        let cas0 = self.casimir.cas0;
        let big_a = &self.frame().a;
        let mut x = vec![x1];
        let mut sum = cas[0] / (x1 * x1);
        for j in 1..s - 1 {
            let r = sum + cas0 * (j as f64 + big_a[j - 1]) * w;
            let scale = sum.abs().max(cas0 * w).max(1e-300);
            if cas[j] == 0.0 {
                if r.abs() > 1e-9 * scale {
                    return Err(j);
                }
                x.push(1.0);
                continue;
            }
            if !(r > 0.0) {
                return Err(j);
            }
            let v = -big_a[j - 1] * cas[j] / r;
            x.push(v.sqrt());
            sum += cas[j] / v;
        }
        Ok(x)
    }

    fn nonabelian_family(&self, x1: f64, xs: f64, x_diag: f64) -> Result<MetricFamily> {
        let s = self.s();
        let cas = &self.casimir.cas;
        let cas0 = self.casimir.cas0;
        if !(cas0 > 1e-10) {
            return Err(Error::InvalidArgument("k is abelian (Cas_0 = 0)".into()));
        }
        if s < 3 {
            return Err(Error::InvalidArgument("family needs s >= 3".into()));
        }
        for v in [x1, xs, x_diag] {
            if !(v > 0.0) {
                return Err(Error::InvalidArgument(format!("parameters must be positive, got {v}")));
            }
        }
        let big_a = &self.frame().a;
        let w = 1.0 / (x_diag * x_diag);
        let mut values = Vec::new();
        // threshold u: smallest x_{s+1} keeping every right-hand side positive
        let feasible = |xd: f64| self.nonabelian_prefix(x1, 1.0 / (xd * xd)).is_ok();
        if s > 3 || cas[1] > 0.0 {
            let u = threshold_below(feasible, x_diag);
            values.push(("u".to_string(), u));
        }
        let prefix = self.nonabelian_prefix(x1, w).map_err(|j| {
            Error::Infeasible(format!(
                "x_{} has no positive solution at x_{} = {x_diag} (threshold u = {})",
                j + 1,
                s + 1,
                values.first().map_or(f64::NAN, |v| v.1)
            ))
        })?;
        let mut x = vec![1.0; 2 * s - 1];
        x[..s - 1].copy_from_slice(&prefix);
        x[s - 1] = xs;
        for v in &mut x[s..2 * s - 2] {
            *v = x_diag;
        }
        let sum: f64 = (0..s - 1).map(|l| cas[l] / (x[l] * x[l])).sum();
        let last = big_a[s - 2];
        let base = sum + s as f64 * cas0 * w;
        if cas[s - 1] > 0.0 {
            let v = (-last * cas[s - 1] / base).sqrt();
            values.push(("v".to_string(), v));
        }
        let rhs = base + last * cas[s - 1] / (xs * xs);
        if !(rhs > 0.0) {
            return Err(Error::Infeasible(format!(
                "x_{} has no positive solution at x_{s} = {xs}",
                2 * s - 1
            )));
        }
        x[2 * s - 2] = (cas0 * (1.0 - last) / rhs).sqrt();
        Ok(MetricFamily {
            x,
            z: self.split.z.clone(),
            values,
        })
    }

    fn ledger_obata_family(&self) -> Result<MetricFamily> {
        let s = self.s();
        if self.casimir.cas.iter().any(|c| c.abs() > 1e-10) {
            return Err(Error::InvalidArgument("some isotropy block p_i is nonzero".into()));
        }
        let big_a = &self.frame().a;
        for j in 1..s - 1 {
            if (big_a[j - 1] + j as f64).abs() > 1e-9 * j as f64 {
                return Err(Error::Infeasible(format!(
                    "A_{j} = {} must equal −{j} for x_{} = … = x_{} to make every H_Q harmonic",
                    big_a[j - 1],
                    s + 1,
                    2 * s - 2
                )));
            }
        }
        let last = big_a[s - 2];
        let t = ((1.0 - last) / s as f64).sqrt();
        let mut x = vec![1.0; 2 * s - 1];
        x[2 * s - 2] = t;
        Ok(MetricFamily {
            x,
            z: self.split.z.clone(),
            values: vec![("t".into(), t), (format!("A_{}", s - 1), last)],
        })
    }

    fn normal_for_q(&self, y: &[f64], tau: f64) -> Result<MetricFamily> {
        let yv = self.check_y(y)?;
        let s = self.s();
        let c = &self.frame().c;
        let x = vec![1.0; 2 * s - 1];
        let (a, b) = self.ab(&x);
        let mut big_a = Vec::with_capacity(s - 1);
        let mut values = Vec::new();
        let mut partial = 0.0;
        for j in 0..s - 1 {
            partial += yv[j] / c[j];
            let wj = yv[j + 1] / c[j + 1];
            let root = -b[j] / a[j];
            let c_at_root = partial + root * wj;
            let scale = partial.abs().max(wj.abs()).max(1e-300);
            let aj = if c_at_root.abs() <= 1e-12 * scale.max(1.0) {
                root
            } else {
                let f = |aa: f64| (a[j] * aa + b[j]) / (partial + aa * wj);
                let bis = bisect_branch(f, tau, root, partial, wj)?;
                let closed = (tau * partial - b[j]) / (a[j] - tau * wj);
                values.push((format!("closed_form_gap_{}", j + 1), (bis - closed).abs()));
                bis
            };
            if !(aj < 0.0) {
                return Err(Error::Infeasible(format!(
                    "A_{} = {aj} is not negative at tau = {tau}",
                    j + 1
                )));
            }
            values.push((format!("A_{}", j + 1), aj));
            big_a.push(aj);
        }
        let mut z = vec![1.0; s];
        let mut sum = z[0] / c[0];
        for j in 0..s - 1 {
            z[j + 1] = -(c[j + 1] / big_a[j]) * sum;
            sum += z[j + 1] / c[j + 1];
        }
        Ok(MetricFamily { x, z, values })
    }
}

/// Scales `y` to unit norm with its first nonzero entry positive.
pub fn normalize_ray(y: &mut [f64]) {
    let n = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n == 0.0 {
        return;
    }
    let first = y.iter().copied().find(|v| v.abs() > 1e-12 * n).unwrap_or(1.0);
    let f = first.signum() / n;
    for v in y.iter_mut() {
        *v *= f;
    }
}

/// Infimum of the feasible set `(u, ∞)` below `start`, assuming monotone
/// feasibility; 0 when everything down to machine scale is feasible.
fn threshold_below(feasible: impl Fn(f64) -> bool, start: f64) -> f64 {
    let mut hi = start.max(1.0);
    while !feasible(hi) {
        hi *= 2.0;
        if hi > 1e12 {
            return f64::INFINITY;
        }
    }
    let mut lo = hi;
    while feasible(lo) {
        lo /= 2.0;
        if lo < 1e-12 {
            return 0.0;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    hi
}

/// Solves `f(A) = tau` on the branch of `f` through `root` (where `f = 0`),
/// with `f(A) = (aA + b)/(Y + wA)` and its pole at `−Y/w`.
fn bisect_branch(
    f: impl Fn(f64) -> f64,
    tau: f64,
    root: f64,
    y: f64,
    w: f64,
) -> Result<f64> {
    if tau == 0.0 {
        return Ok(root);
    }
    let pole = if w != 0.0 { Some(-y / w) } else { None };
    let g = |a: f64| f(a) - tau;
    let g0 = g(root);
    let mut step = 1e-3 * root.abs().max(1.0);
    for dir in [1.0, -1.0] {
        let limit = pole.filter(|p| (p - root) * dir > 0.0);
        let mut lo = root;
        let mut s = step;
        for _ in 0..200 {
            let mut hi = root + dir * s;
            if let Some(p) = limit {
                if (hi - p) * dir >= 0.0 {
                    hi = root + 0.999_999 * (p - root);
                }
            }
            if g(hi).signum() != g0.signum() {
                let (mut l, mut h) = (lo, hi);
                while (h - l).abs() > ROOT_TOL {
                    let m = 0.5 * (l + h);
                    if g(m).signum() == g0.signum() {
                        l = m;
                    } else {
                        h = m;
                    }
                }
                return Ok(0.5 * (l + h));
            }
            if limit.is_some_and(|p| (hi - root).abs() >= 0.999 * (p - root).abs()) {
                break;
            }
            lo = hi;
            s *= 2.0;
            if s > 1e12 {
                break;
            }
        }
        step = 1e-3 * root.abs().max(1.0);
    }
    Err(Error::Infeasible(format!("no A on the branch through {root} reaches ratio {tau}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64) / ((1u64 << 53) as f64)
    }

    fn su3_group() -> InvariantComplex {
        InvariantComplex::lie_group(&LieAlgebra::su3_standard(), &[1.0], true).unwrap()
    }

    #[test]
    fn cartan_form_on_su2_is_a_volume_multiple() {
        let alg = LieAlgebra::su(2).unwrap();
        let cx = InvariantComplex::lie_group(&alg, &[1.0], true).unwrap();
        let q = make_group_q(&alg, &[1.0]).unwrap();
        let f = cartan_form(&cx, &q.matrix);
        assert_eq!(f.coeffs().len(), 1);
        // basis e/√2 with [e1,e2] = e3: κ([e1,e2],e3)/2^{3/2} = −2/2^{3/2}
        assert!((f.coeffs()[0] + 2.0 / 8f64.sqrt()).abs() < 1e-12, "{}", f.coeffs()[0]);
        assert!(cx.differential(&f).max_abs() < 1e-12);
        let zero = cartan_form(&cx, &DMatrix::zeros(3, 3));
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn make_q_admissibility() {
        let e = catalog::su2n_squared_mod_su2n(2).build().unwrap();
        let q = make_q(&e, &[1.0, -1.0]).unwrap();
        assert!(q.admissible);
        assert!(q.restriction_norm < 1e-12);
        assert!(q.invariance_residual < 1e-10);
        let q = make_q(&e, &[1.0, 0.0]).unwrap();
        assert!(!q.admissible);
        assert!(make_q(&e, &[1.0]).is_err());
    }

    #[test]
    fn h_q_identities_on_catalog() {
        for desc in catalog::aligned_catalog() {
            let e = desc.build().unwrap();
            let space = AlignedSpace::new(&e, &vec![1.0; e.ideal_count()]).unwrap();
            let basis = space.admissible_basis();
            for col in basis.column_iter() {
                let y: Vec<f64> = col.iter().copied().collect();
                let h = space.h_form(&y).unwrap();
                assert!(h.closed_residual < 1e-9, "{} closed {}", desc.name, h.closed_residual);
                assert!(h.alt_residual < 1e-10, "{} alt {}", desc.name, h.alt_residual);
                assert!(h.pullback_residual < 1e-9, "{} pullback {}", desc.name, h.pullback_residual);
                assert!(space.complex().invariance_residual(&h.h) < 1e-9);
            }
            let zero = space.h_form(&vec![0.0; e.ideal_count()]).unwrap();
            assert_eq!(zero.h.max_abs(), 0.0);
        }
    }

    #[test]
    fn h_q_refuses_inadmissible() {
        let e = catalog::ledger_obata_su2(2).build().unwrap();
        let space = AlignedSpace::new(&e, &[1.0, 1.0]).unwrap();
        assert!(matches!(space.h_form(&[1.0, 0.0]), Err(Error::NotAdmissible(_))));
    }

    #[test]
    fn h_q_classes_span_third_cohomology() {
        for desc in catalog::aligned_catalog() {
            let e = desc.build().unwrap();
            let space = AlignedSpace::new(&e, &vec![1.0; e.ideal_count()]).unwrap();
            let cx = space.complex();
            let basis = space.admissible_basis();
            // coordinates of each H_Q, reduced modulo exact forms
            let exact = cx.differential_on_invariants(2);
            let mut cols = exact.clone();
            let start = cols.ncols();
            for col in basis.column_iter() {
                let y: Vec<f64> = col.iter().copied().collect();
                let h = space.h_form(&y).unwrap().h;
                assert!(cx.project(&h).1 < 1e-9);
                let nc = cols.ncols();
                cols = cols.insert_column(nc, 0.0);
                cols.set_column(nc, h.coeffs());
            }
            let added = linalg::rank(&cols) - linalg::rank(&exact);
            assert_eq!(added, basis.ncols(), "{}", desc.name);
            assert_eq!(start, exact.ncols());
            let b3 = homog::b3_dimension(&e).b3;
            assert_eq!(added, b3, "{}", desc.name);
        }
    }

    #[test]
    fn qtilde_is_coclosed_for_normal_metrics() {
        let mut seed = 7u64;
        for desc in catalog::aligned_catalog() {
            let e = desc.build().unwrap();
            let s = e.ideal_count();
            let z: Vec<f64> = (0..s).map(|_| 0.5 + lcg(&mut seed)).collect();
            let space = AlignedSpace::new(&e, &z).unwrap();
            let y: Vec<f64> = (0..s).map(|_| lcg(&mut seed) - 0.5).collect();
            let q = make_q(&e, &y).unwrap();
            let r = qtilde_coclosure_residual(space.complex(), &q.matrix).unwrap();
            assert!(r < 1e-9, "{} {r}", desc.name);
        }
    }

    #[test]
    fn closed_form_codifferential_matches_oracle() {
        let mut seed = 11u64;
        for alg in [LieAlgebra::su3_standard(), LieAlgebra::so(5).unwrap()] {
            let cx = InvariantComplex::lie_group(&alg, &[1.0], true).unwrap();
            let n = cx.n();
            for _ in 0..5 {
                let x: Vec<f64> = (0..n).map(|_| 0.3 + 2.0 * lcg(&mut seed)).collect();
                let beta = InvariantForm::from_fn(n, 3, |_| lcg(&mut seed) - 0.5);
                let metric = MetricSpec::new(vec![1.0], x.clone()).unwrap();
                let oracle = cx.codifferential(&metric, &beta).unwrap();
                let closed = closed_form_codifferential(&cx, &x, &beta).unwrap();
                let gap = (oracle.coeffs() - closed.coeffs()).amax();
                assert!(gap < 1e-9, "gap {gap}");
            }
        }
    }

    #[test]
    fn cartan_codifferential_matches_oracle() {
        let mut seed = 5u64;
        let su2 = LieAlgebra::su(2).unwrap();
        let alg = LieAlgebra::direct_sum(&[LieAlgebra::su3_standard(), su2]).unwrap();
        let z = [1.3, 0.7];
        let cx = InvariantComplex::lie_group(&alg, &z, true).unwrap();
        for _ in 0..4 {
            let x: Vec<f64> = (0..cx.n()).map(|_| 0.3 + 2.0 * lcg(&mut seed)).collect();
            let y = [lcg(&mut seed) - 0.5, lcg(&mut seed) - 0.5];
            let q = make_group_q(&alg, &y).unwrap();
            let qbar = cartan_form(&cx, &q.matrix);
            let metric = MetricSpec::new(z.to_vec(), x.clone()).unwrap();
            let oracle = cx.codifferential(&metric, &qbar).unwrap();
            let closed = cartan_codifferential(&cx, &x, &y).unwrap();
            assert!((oracle.coeffs() - closed.coeffs()).amax() < 1e-9);
        }
    }

    #[test]
    fn su3_structure_products() {
        let cx = su3_group();
        let s3 = 3f64.sqrt();
        assert!((cx.c(2, 5, 0) - s3 / 6.0).abs() < 1e-12);
        assert!((cx.c(3, 6, 0) - s3 / 6.0).abs() < 1e-12);
        assert!((cx.c(2, 5, 1) + 0.5).abs() < 1e-12);
        assert!((cx.c(3, 6, 1) - 0.5).abs() < 1e-12);
        assert!((cx.c(4, 7, 0) - s3 / 3.0).abs() < 1e-12);
        let x = vec![1.0; 8];
        for k in 0..8 {
            for l in k + 1..8 {
                let s = s_kl(&cx, &x, k, l);
                if (k, l) == (0, 1) {
                    // c36^1 c36^2 + c47^1 c47^2 cancel pairwise at x = 1
                    assert!(s.abs() < 1e-12);
                } else {
                    assert!(s.abs() < 1e-12, "({k},{l}) {s}");
                }
            }
        }
    }

    #[test]
    fn su3_dichotomy() {
        let cx = su3_group();
        let y = [1.0];
        let mut x = vec![1.0, 1.0, 1.2, 0.7, 1.5, 0.9, 1.1, 2.0];
        assert!(group_harmonicity(&cx, &x, &y, None).unwrap().harmonic);
        x[1] = 2.0;
        assert!(!group_harmonicity(&cx, &x, &y, None).unwrap().harmonic);
        // x3·x6 = x4·x7
        x[2] = 1.4;
        x[5] = 0.5;
        x[3] = 0.7;
        x[6] = 1.0;
        assert!(group_harmonicity(&cx, &x, &y, None).unwrap().harmonic);
    }

    #[test]
    fn so_nice_basis_always_harmonic() {
        let mut seed = 3u64;
        for n in [3, 5, 6] {
            let alg = LieAlgebra::so(n).unwrap();
            let cx = InvariantComplex::lie_group(&alg, &[1.0], true).unwrap();
            let x: Vec<f64> = (0..cx.n()).map(|_| 0.2 + lcg(&mut seed)).collect();
            let r = group_harmonicity(&cx, &x, &[1.0], None).unwrap();
            assert!(r.harmonic);
            let q = make_group_q(&alg, &[1.0]).unwrap();
            let metric = MetricSpec::new(vec![1.0], x).unwrap();
            let res = cx.harmonic_residual(&metric, &cartan_form(&cx, &q.matrix)).unwrap();
            assert!(res < 1e-9);
        }
    }

    #[test]
    fn su3_correction_values() {
        let x = [1.0, 2.0, 1.0, 1.0, 1.0, 1.0, 3.0, 1.0];
        let cx = su3_group();
        let q = make_group_q(&LieAlgebra::su3_standard(), &[1.0]).unwrap();
        let hk = cartan_form(&cx, &q.matrix);
        let mut e12 = InvariantForm::zeros(8, 2);
        e12.set(&[0, 1], 1.0);
        let de12 = cx.differential(&e12);
        let metric = MetricSpec::new(vec![1.0], x.to_vec()).unwrap();
        let t = su3_harmonic_correction(&x);
        let form = hk.add(&de12.scaled(t));
        let res = cx.harmonic_residual(&metric, &form).unwrap() / cx.norm(&metric, &form).unwrap();
        assert!(res < 1e-10, "{res}");
        let check = group_harmonicity(&cx, &x, &[1.0], Some(&e12.scaled(t))).unwrap();
        assert!(check.harmonic);
        let mut same = x;
        same[1] = same[0];
        assert_eq!(su3_correction(&same), 0.0);
        assert_eq!(su3_harmonic_correction(&same), 0.0);
    }

    #[test]
    fn casimir_identity_on_catalog() {
        for desc in catalog::aligned_catalog() {
            let e = desc.build().unwrap();
            let space = AlignedSpace::new(&e, &vec![1.0; e.ideal_count()]).unwrap();
            let c = &space.casimir;
            assert!(c.identity_residual < 1e-8, "{} {}", desc.name, c.identity_residual);
            assert!((c.cas0 - c.cas0_structure).abs() < 1e-9, "{}", desc.name);
            assert!(c.cas.iter().all(|v| *v >= -1e-12));
        }
    }

    #[test]
    fn casimir_glo2_values() {
        // SU(3)^3 / ΔSU(2) with κ_su(2) = (2/3) κ_su(3)|
        let e = catalog::su3_power_mod_su2(3).build().unwrap();
        let space = AlignedSpace::new(&e, &[1.0, 1.0, 1.0]).unwrap();
        let c = 2.0 / 3.0;
        assert!((space.casimir.cas0 - c * 3.0 / 3.0).abs() < 1e-10);
        for v in &space.casimir.cas {
            assert!((v - (1.0 - c) * 3.0 / 3.0).abs() < 1e-10);
        }
        let lo = catalog::ledger_obata_su2(3).build().unwrap();
        let space = AlignedSpace::new(&lo, &[1.0, 1.0, 1.0]).unwrap();
        assert!((space.casimir.cas0 - 1.0).abs() < 1e-10);
        assert!(space.casimir.cas.iter().all(|v| v.abs() < 1e-12));
        let ab = catalog::su2_power_mod_u1(3).build().unwrap();
        let space = AlignedSpace::new(&ab, &[1.0, 1.0, 1.0]).unwrap();
        assert!(space.casimir.cas0.abs() < 1e-12);
    }

    #[test]
    fn theorem_matches_oracle_on_ledger_obata() {
        let e = catalog::ledger_obata_su2(3).build().unwrap();
        let space = AlignedSpace::new(&e, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(space.split.blocks.len(), 2);
        let y = space.admissible_basis().column(0).iter().copied().collect::<Vec<_>>();
        for (t, expect) in [(1.0, true), (2.0, false)] {
            let check = space.theorem_check(&[1.0, t], &y).unwrap();
            assert_eq!(check.holds, expect, "t = {t}");
            let oracle = space.oracle_residual(&[1.0, t], &y).unwrap();
            assert_eq!(oracle <= ORACLE_TOL, expect, "t = {t}, residual {oracle}");
        }
    }

    #[test]
    fn s2_holds_vacuously() {
        let e = catalog::su2n_squared_mod_su2n(2).build().unwrap();
        let space = AlignedSpace::new(&e, &[1.0, 2.0]).unwrap();
        let x: Vec<f64> = (0..space.split.blocks.len()).map(|i| 1.0 + 0.3 * i as f64).collect();
        let check = space.theorem_check(&x, &[1.0, -1.0]).unwrap();
        assert!(check.holds && check.residuals.is_empty());
        assert!(space.oracle_residual(&x, &[1.0, -1.0]).unwrap() < ORACLE_TOL);
    }

    #[test]
    fn theorem_refuses_when_assumptions_fail() {
        let e = catalog::so_squared_mod_so3(5).build().unwrap();
        let space = AlignedSpace::new(&e, &[1.0, 1.0]).unwrap();
        assert!(!space.assumptions.holds());
        let x = vec![1.0; space.split.blocks.len()];
        assert!(matches!(
            space.theorem_check(&x, &[1.0, -1.0]),
            Err(Error::AssumptionViolated(_))
        ));
    }

    #[test]
    fn unique_q_for_skewed_ledger_obata() {
        let e = catalog::ledger_obata_su2(3).build().unwrap();
        let space = AlignedSpace::new(&e, &[1.0, 1.0, 2.0]).unwrap();
        let q = space.unique_harmonic_q().unwrap();
        assert!(space.admissibility(&q.y).abs() < 1e-10);
        let ones = vec![1.0; space.split.blocks.len()];
        assert!(space.theorem_check(&ones, &q.y).unwrap().holds);
        assert!(space.oracle_residual(&ones, &q.y).unwrap() < ORACLE_TOL);
        let ker = space.harmonic_q_space(&ones).unwrap();
        assert_eq!(ker.ncols(), 1);
        let mut alt: Vec<f64> = ker.column(0).iter().copied().collect();
        normalize_ray(&mut alt);
        for (a, b) in alt.iter().zip(&q.y) {
            assert!((a - b).abs() < 1e-9);
        }
        // scaled z gives the same ray
        let scaled = AlignedSpace::new(&e, &[3.0, 3.0, 6.0]).unwrap();
        let q2 = scaled.unique_harmonic_q().unwrap();
        for (a, b) in q2.y.iter().zip(&q.y) {
            assert!((a - b).abs() < 1e-9);
        }
        let standard = AlignedSpace::new(&e, &[1.0, 1.0, 1.0]).unwrap();
        assert!(standard.unique_harmonic_q().is_err());
    }

    #[test]
    fn ledger_obata_family() {
        let e = catalog::ledger_obata_su2(3).build().unwrap();
        for (z, t) in [([1.0, 1.0, 1.0], 1.0), ([1.0, 1.0, 2.0], (2.0f64 / 3.0).sqrt())] {
            let space = AlignedSpace::new(&e, &z).unwrap();
            let fam = space.special_families(&FamilyMode::LedgerObata).unwrap();
            assert!((fam.x[4] - t).abs() < 1e-12);
            let xb = space.block_x(&fam.x);
            for col in space.admissible_basis().column_iter() {
                let y: Vec<f64> = col.iter().copied().collect();
                assert!(space.theorem_check(&xb, &y).unwrap().holds);
            }
        }
        let space = AlignedSpace::new(&e, &[1.0, 2.0, 1.0]).unwrap();
        assert!(matches!(
            space.special_families(&FamilyMode::LedgerObata),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn glo2_family_relation() {
        let e = catalog::su3_power_mod_su2(3).build().unwrap();
        let space = AlignedSpace::new(&e, &[1.0, 1.0, 1.0]).unwrap();
        let (x1, xs, xd) = (1.3, 1.1, 0.9);
        let fam = space
            .special_families(&FamilyMode::NonabelianK { x1, xs, x_diag: xd })
            .unwrap();
        let s = 3.0;
        let c = 2.0 / 3.0;
        assert!((fam.x[1] - x1).abs() < 1e-12, "x1 = … = x_(s−1)");
        let expect = (1.0 - c) * (s - 1.0) / (c * s) * (1.0 / (x1 * x1) - 1.0 / (xs * xs)) + 1.0 / (xd * xd);
        assert!((1.0 / (fam.x[4] * fam.x[4]) - expect).abs() < 1e-12);
        let xb = space.block_x(&fam.x);
        for col in space.admissible_basis().column_iter() {
            let y: Vec<f64> = col.iter().copied().collect();
            assert!(space.theorem_check(&xb, &y).unwrap().holds);
        }
    }

    #[test]
    fn abelian_family_makes_every_q_harmonic() {
        let e = catalog::su2_power_mod_u1(3).build().unwrap();
        let space = AlignedSpace::new(&e, &[1.0, 1.5, 0.8]).unwrap();
        let fam = space
            .special_families(&FamilyMode::AbelianK {
                x1: 1.2,
                diagonal: vec![0.7, 1.9],
            })
            .unwrap();
        let xb = space.block_x(&fam.x);
        for col in space.admissible_basis().column_iter() {
            let y: Vec<f64> = col.iter().copied().collect();
            assert!(space.theorem_check(&xb, &y).unwrap().holds);
        }
    }

    // Oracle truth for z = (1,1,2): every H_Q is harmonic at (1, t) with t² = 4/5,
    // cross-checked by an independent full-tensor computation.
    #[test]
    fn ledger_obata_oracle_harmonic_point() {
        let e = catalog::ledger_obata_su2(3).build().unwrap();
        let space = AlignedSpace::new(&e, &[1.0, 1.0, 2.0]).unwrap();
        let basis = space.admissible_basis();
        let worst = |t: f64| {
            basis
                .column_iter()
                .map(|col| {
                    let y: Vec<f64> = col.iter().copied().collect();
                    space.oracle_residual(&[1.0, t], &y).unwrap()
                })
                .fold(0.0, f64::max)
        };
        assert!(worst(0.8f64.sqrt()) < ORACLE_TOL);
        assert!(worst((2.0f64 / 3.0).sqrt()) > 1e-4);
        assert!(worst(1.0) > 1e-4);
    }

    #[test]
    fn theorem_matches_oracle_when_diagonal_scalings_agree() {
        let mut seed = 11u64;
        for desc in catalog::aligned_catalog() {
            let e = desc.build().unwrap();
            let s = e.ideal_count();
            let z: Vec<f64> = (0..s).map(|_| 0.6 + lcg(&mut seed)).collect();
            let space = AlignedSpace::new(&e, &z).unwrap();
            let nb = space.split.blocks.len();
            let iso = nb - (s - 1);
            let mut xb = vec![1.0; nb];
            for v in xb.iter_mut().take(iso) {
                *v = 0.6 + lcg(&mut seed);
            }
            let q = match space.harmonic_q_space(&xb) {
                Ok(k) => k,
                Err(_) => continue,
            };
            for col in q.column_iter() {
                let y: Vec<f64> = col.iter().copied().collect();
                assert!(space.theorem_check(&xb, &y).unwrap().holds, "{}", desc.name);
                assert!(space.oracle_residual(&xb, &y).unwrap() < ORACLE_TOL, "{}", desc.name);
            }
        }
    }

    #[test]
    fn normal_metrics_for_a_given_q() {
        let e = catalog::su3_power_mod_su2(3).build().unwrap();
        let standard = AlignedSpace::new(&e, &[1.0, 1.0, 1.0]).unwrap();
        let y = vec![1.0, 2.0, -3.0];
        for tau in [0.05, -0.05] {
            let fam = standard
                .special_families(&FamilyMode::NormalForQ { y: y.clone(), tau })
                .unwrap();
            for (name, v) in &fam.values {
                if name.starts_with("closed_form_gap") {
                    assert!(*v < 1e-10, "{name} {v}");
                }
            }
            let space = AlignedSpace::new(&e, &fam.z).unwrap();
            let ones = vec![1.0; space.split.blocks.len()];
            assert!(space.theorem_check(&ones, &y).unwrap().holds);
            assert!(space.oracle_residual(&ones, &y).unwrap() < ORACLE_TOL);
        }
    }

    #[test]
    fn forms_supported_on_isotropy_are_orthogonal_to_h_q() {
        let e = catalog::su3_power_mod_su2(3).build().unwrap();
        let space = AlignedSpace::new(&e, &[1.0, 1.3, 0.8]).unwrap();
        let cx = space.complex();
        let iso: Vec<bool> = (0..cx.n())
            .map(|a| {
                let b = cx.block_of(a);
                matches!(space.split.blocks[b].kind, SplitBlockKind::Isotropy(_))
            })
            .collect();
        let forms: Vec<InvariantForm> = cx
            .invariant_forms(2)
            .into_iter()
            .filter(|f| {
                crate::exterior::tuples(cx.n(), 2)
                    .iter()
                    .zip(f.coeffs().iter())
                    .all(|(t, v)| v.abs() < 1e-12 || t.iter().all(|&a| iso[a]))
            })
            .collect();
        assert!(!forms.is_empty());
        let metric = space.metric(&[0.7, 1.4, 2.1, 0.9, 1.6]).unwrap();
        let y = space.admissible_basis().column(0).iter().copied().collect::<Vec<_>>();
        let h = space.h_form(&y).unwrap().h;
        for w in forms {
            let ip = cx.inner(&metric, &h, &cx.differential(&w)).unwrap();
            assert!(ip.abs() < 1e-9, "{ip}");
        }
    }

    #[test]
    fn group_complex_rejected_by_closed_forms_on_quotients() {
        let e = catalog::ledger_obata_su2(2).build().unwrap();
        let space = AlignedSpace::new(&e, &[1.0, 1.0]).unwrap();
        let cx = space.complex();
        let beta = InvariantForm::zeros(cx.n(), 3);
        assert!(closed_form_codifferential(cx, &vec![1.0; cx.n()], &beta).is_err());
    }
}
