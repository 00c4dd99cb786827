//! Space descriptions `G/K` and a catalog of standard examples.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::homog::Embedding;
use crate::liealg::matrix::MatrixBasis;
use crate::liealg::LieAlgebra;
use crate::{Error, Result};

/// A simple factor of `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum FactorSpec {
    Su {
        n: usize,
        /// `"trace"` (default) or `"standard"` (the `-κ`-orthonormal su(3)
        /// basis with its printed bracket pattern).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        basis: Option<String>,
    },
    So { n: usize },
}

impl FactorSpec {
    pub fn su(n: usize) -> Self {
        FactorSpec::Su { n, basis: None }
    }

    pub fn so(n: usize) -> Self {
        FactorSpec::So { n }
    }

    pub fn name(&self) -> String {
        match self {
            FactorSpec::Su { n, .. } => format!("su({n})"),
            FactorSpec::So { n } => format!("so({n})"),
        }
    }

    pub fn matrix_basis(&self) -> Result<MatrixBasis> {
        match self {
            FactorSpec::Su { n, basis } => match basis.as_deref() {
                None | Some("trace") => MatrixBasis::su(*n),
                Some("standard") if *n == 3 => Ok(MatrixBasis::su3_standard()),
                Some(other) => Err(Error::InvalidArgument(format!(
                    "unknown basis {other:?} for su({n})"
                ))),
            },
            FactorSpec::So { n } => MatrixBasis::so(*n),
        }
    }
}

/// A block of `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum KBlockSpec {
    Su { n: usize },
    So { n: usize },
    Torus { dim: usize },
}

impl KBlockSpec {
    pub fn dim(&self) -> usize {
        match *self {
            KBlockSpec::Su { n } => n * n - 1,
            KBlockSpec::So { n } => n * (n - 1) / 2,
            KBlockSpec::Torus { dim } => dim,
        }
    }

    pub fn name(&self) -> String {
        match self {
            KBlockSpec::Su { n } => format!("su({n})"),
            KBlockSpec::So { n } => format!("so({n})"),
            KBlockSpec::Torus { dim } => format!("t^{dim}"),
        }
    }

    fn matrix_basis(&self) -> Result<Option<MatrixBasis>> {
        match *self {
            KBlockSpec::Su { n } => MatrixBasis::su(n).map(Some),
            KBlockSpec::So { n } => MatrixBasis::so(n).map(Some),
            KBlockSpec::Torus { dim } => {
                if dim == 0 {
                    Err(Error::InvalidArgument("torus of dimension 0".into()))
                } else {
                    Ok(None)
                }
            }
        }
    }
}

/// How one block of `k` maps into one factor of `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EmbeddingDescriptor {
    Zero,
    /// Matrix block placed on the diagonal starting at row/column `offset`.
    Block { offset: usize },
    /// Torus basis vector `a` goes to the `a`-th Cartan generator.
    Cartan,
    /// Explicit coordinates, `dim(factor)` rows by `dim(block)` columns.
    Matrix { rows: Vec<Vec<f64>> },
}

/// `G/K` given by factors of `g`, blocks of `k` and a descriptor for each
/// (factor, block) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceDescription {
    #[serde(default)]
    pub name: String,
    pub g_factors: Vec<FactorSpec>,
    #[serde(default)]
    pub k_blocks: Vec<KBlockSpec>,
    /// `embedding[i][j]` maps block `j` of `k` into factor `i` of `g`.
    #[serde(default)]
    pub embedding: Vec<Vec<EmbeddingDescriptor>>,
}

impl SpaceDescription {
    pub fn dim_g(&self) -> usize {
        self.g_factors
            .iter()
            .map(|f| match f {
                FactorSpec::Su { n, .. } => n * n - 1,
                FactorSpec::So { n } => n * (n - 1) / 2,
            })
            .sum()
    }

    pub fn dim_k(&self) -> usize {
        self.k_blocks.iter().map(KBlockSpec::dim).sum()
    }

    /// Builds the embedding. Torus blocks are merged into a single center
    /// placed before the simple blocks of `k`.
    pub fn build(&self) -> Result<Embedding> {
        if self.g_factors.is_empty() {
            return Err(Error::InvalidArgument("g has no factors".into()));
        }
        if self.dim_k() > 0 && self.embedding.len() != self.g_factors.len() {
            return Err(Error::InvalidArgument(format!(
                "embedding has {} rows, expected one per g factor ({})",
                self.embedding.len(),
                self.g_factors.len()
            )));
        }
        let bases = self
            .g_factors
            .iter()
            .map(FactorSpec::matrix_basis)
            .collect::<Result<Vec<_>>>()?;
        let algebras = bases
            .iter()
            .enumerate()
            .map(|(i, b)| b.algebra(&format!("g{}", i + 1)))
            .collect::<Result<Vec<_>>>()?;
        let ambient = LieAlgebra::direct_sum(&algebras)?;

        // k-columns: center first, then simple blocks in listed order
        let mut order: Vec<usize> = (0..self.k_blocks.len())
            .filter(|&j| matches!(self.k_blocks[j], KBlockSpec::Torus { .. }))
            .collect();
        order.extend(
            (0..self.k_blocks.len()).filter(|&j| !matches!(self.k_blocks[j], KBlockSpec::Torus { .. })),
        );
        let torus_dim: usize = self
            .k_blocks
            .iter()
            .filter_map(|b| match b {
                KBlockSpec::Torus { dim } => Some(*dim),
                _ => None,
            })
            .sum();
        let mut parts = Vec::new();
        if torus_dim > 0 {
            parts.push(LieAlgebra::abelian(torus_dim));
        }
        let mut kbases: Vec<Option<MatrixBasis>> = Vec::new();
        for blk in &self.k_blocks {
            kbases.push(blk.matrix_basis()?);
        }
        for &j in &order {
            if let Some(b) = &kbases[j] {
                parts.push(b.algebra("k")?);
            }
        }
        let sub = if parts.is_empty() {
            LieAlgebra::abelian(0)
        } else {
            LieAlgebra::direct_sum_labeled(&parts, "k")?
        };

        let mut inclusion = DMatrix::zeros(ambient.dim(), sub.dim());
        let mut col = 0;
        for &j in &order {
            let blk = &self.k_blocks[j];
            let width = blk.dim();
            let mut row = 0;
            for (i, gb) in bases.iter().enumerate() {
                let desc = self.embedding[i].get(j).ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "embedding row {} has no entry for k block {}",
                        i + 1,
                        j + 1
                    ))
                })?;
                let m = descriptor_matrix(desc, blk, kbases[j].as_ref(), gb).map_err(|err| {
                    Error::InvalidArgument(format!(
                        "k block {} ({}) into g factor {} ({}): {err}",
                        j + 1,
                        blk.name(),
                        i + 1,
                        self.g_factors[i].name()
                    ))
                })?;
                inclusion.view_mut((row, col), (gb.dim(), width)).copy_from(&m);
                row += gb.dim();
            }
            col += width;
        }
        for (i, r) in self.embedding.iter().enumerate() {
            if r.len() != self.k_blocks.len() {
                return Err(Error::InvalidArgument(format!(
                    "embedding row {} has {} entries, expected {}",
                    i + 1,
                    r.len(),
                    self.k_blocks.len()
                )));
            }
        }
        Embedding::new(ambient, sub, inclusion)
    }
}

fn descriptor_matrix(
    desc: &EmbeddingDescriptor,
    blk: &KBlockSpec,
    kbasis: Option<&MatrixBasis>,
    target: &MatrixBasis,
) -> Result<DMatrix<f64>> {
    let width = blk.dim();
    match desc {
        EmbeddingDescriptor::Zero => Ok(DMatrix::zeros(target.dim(), width)),
        EmbeddingDescriptor::Block { offset } => match kbasis {
            Some(b) => b.block_inclusion(target, *offset),
            None => Err(Error::InvalidArgument(
                "torus blocks use \"cartan\" or \"matrix\" descriptors".into(),
            )),
        },
        EmbeddingDescriptor::Cartan => {
            if kbasis.is_some() {
                return Err(Error::InvalidArgument(
                    "\"cartan\" applies to torus blocks only".into(),
                ));
            }
            if width > target.cartan.len() {
                return Err(Error::InvalidArgument(format!(
                    "torus of dimension {width} exceeds rank {}",
                    target.cartan.len()
                )));
            }
            let mut m = DMatrix::zeros(target.dim(), width);
            for (a, &h) in target.cartan.iter().take(width).enumerate() {
                m[(h, a)] = 1.0;
            }
            Ok(m)
        }
        EmbeddingDescriptor::Matrix { rows } => {
            if rows.len() != target.dim() || rows.iter().any(|r| r.len() != width) {
                return Err(Error::InvalidArgument(format!(
                    "matrix must be {} × {width}",
                    target.dim()
                )));
            }
            Ok(DMatrix::from_fn(target.dim(), width, |r, c| rows[r][c]))
        }
    }
}

fn diag_desc(s: usize, blocks: &[EmbeddingDescriptor]) -> Vec<Vec<EmbeddingDescriptor>> {
    (0..s).map(|_| blocks.to_vec()).collect()
}

/// `H^s/ΔK` with every factor receiving the same descriptors.
pub fn diagonal_space(
    name: &str,
    factor: FactorSpec,
    s: usize,
    k_blocks: Vec<KBlockSpec>,
    per_factor: &[EmbeddingDescriptor],
) -> SpaceDescription {
    SpaceDescription {
        name: name.to_string(),
        g_factors: vec![factor; s],
        embedding: if k_blocks.is_empty() {
            Vec::new()
        } else {
            diag_desc(s, per_factor)
        },
        k_blocks,
    }
}

/// `SU(2)^s/ΔSU(2)`.
pub fn ledger_obata_su2(s: usize) -> SpaceDescription {
    diagonal_space(
        &format!("SU(2)^{s}/ΔSU(2)"),
        FactorSpec::su(2),
        s,
        vec![KBlockSpec::Su { n: 2 }],
        &[EmbeddingDescriptor::Block { offset: 0 }],
    )
}

/// `SU(2n)²/ΔSU(2)^n`, each `SU(2)` a diagonal block.
pub fn su2n_squared_mod_su2n(n: usize) -> SpaceDescription {
    let blocks = vec![KBlockSpec::Su { n: 2 }; n];
    let desc: Vec<EmbeddingDescriptor> = (0..n)
        .map(|j| EmbeddingDescriptor::Block { offset: 2 * j })
        .collect();
    diagonal_space(
        &format!("SU({})^2/ΔSU(2)^{n}", 2 * n),
        FactorSpec::su(2 * n),
        2,
        blocks,
        &desc,
    )
}

/// `SU(n)^s/ΔT^{n−1}` with the maximal torus.
pub fn su_power_mod_torus(n: usize, s: usize) -> SpaceDescription {
    diagonal_space(
        &format!("SU({n})^{s}/ΔT^{}", n - 1),
        FactorSpec::su(n),
        s,
        vec![KBlockSpec::Torus { dim: n - 1 }],
        &[EmbeddingDescriptor::Cartan],
    )
}

/// `SU(3)^s/ΔSU(2)` with `SU(2)` the upper-left block.
pub fn su3_power_mod_su2(s: usize) -> SpaceDescription {
    diagonal_space(
        &format!("SU(3)^{s}/ΔSU(2)"),
        FactorSpec::su(3),
        s,
        vec![KBlockSpec::Su { n: 2 }],
        &[EmbeddingDescriptor::Block { offset: 0 }],
    )
}

/// `SU(3)^s/ΔSO(3)` with the irreducible real embedding.
pub fn su3_power_mod_so3(s: usize) -> SpaceDescription {
    diagonal_space(
        &format!("SU(3)^{s}/ΔSO(3)"),
        FactorSpec::su(3),
        s,
        vec![KBlockSpec::So { n: 3 }],
        &[EmbeddingDescriptor::Block { offset: 0 }],
    )
}

/// `SU(2)^s/ΔU(1)`.
pub fn su2_power_mod_u1(s: usize) -> SpaceDescription {
    su_power_mod_torus(2, s)
}

/// `SO(n)²/ΔSO(3)`, the block embedding whose isotropy blocks contain
/// copies of the adjoint representation when `n ≥ 5`.
pub fn so_squared_mod_so3(n: usize) -> SpaceDescription {
    diagonal_space(
        &format!("SO({n})^2/ΔSO(3)"),
        FactorSpec::so(n),
        2,
        vec![KBlockSpec::So { n: 3 }],
        &[EmbeddingDescriptor::Block { offset: 0 }],
    )
}

/// The compact group `H^s` itself (`K` trivial).
pub fn group(factor: FactorSpec, s: usize) -> SpaceDescription {
    let name = format!("{}^{s}", factor.name().to_uppercase());
    diagonal_space(&name, factor, s, Vec::new(), &[])
}

/// `SU(3)/T²`.
pub fn su3_flag() -> SpaceDescription {
    su_power_mod_torus(3, 1)
}

/// The spaces exercised by the Betti-number suite.
pub fn betti_catalog() -> Vec<SpaceDescription> {
    vec![
        ledger_obata_su2(2),
        ledger_obata_su2(3),
        su2n_squared_mod_su2n(2),
        su_power_mod_torus(3, 2),
        su3_flag(),
        group(FactorSpec::su(2), 3),
        su2_power_mod_u1(3),
        su3_power_mod_so3(2),
    ]
}

/// Aligned spaces used by the Casimir and standard-metric checks.
pub fn aligned_catalog() -> Vec<SpaceDescription> {
    vec![
        ledger_obata_su2(2),
        ledger_obata_su2(3),
        ledger_obata_su2(4),
        su2n_squared_mod_su2n(2),
        su_power_mod_torus(3, 2),
        su2_power_mod_u1(3),
        su3_power_mod_su2(3),
        su3_power_mod_so3(3),
    ]
}
