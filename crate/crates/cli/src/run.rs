//! The `analyze`, `sweep`, `verify` and `betti` drivers.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use homharm::cartan::{
    cartan_form, group_harmonicity, make_group_q, su3_correction, su3_harmonic_correction,
    AlignedSpace, HARM_TOL, ORACLE_TOL,
};
use homharm::catalog::FactorSpec;
use homharm::exterior::{InvariantComplex, InvariantForm, MetricSpec};
use homharm::homog::{alignment_check, b3_dimension, generic_split, AlignmentData, Embedding};

use crate::report::{
    AlignmentReport, AssumptionsReport, BettiReport, BlockReport, CasimirReport, CheckRow, Dims,
    Report, SweepPoint, Timing, VerifySummary,
};
use crate::rng::SplitMix64;
use crate::spec::{DiagonalSampling, Fault, SpaceSpec, SCHEMA_VERSION};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OracleMode {
    On,
    Off,
    /// Oracle on the first row and on a seeded quarter of the rest.
    Sample,
}

#[derive(Debug, Clone)]
pub struct Options {
    pub seed: u64,
    pub trials: usize,
    pub oracle: OracleMode,
    pub timings: bool,
    /// Directory for repro bundles.
    pub bundle_dir: PathBuf,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            seed: 0,
            trials: 50,
            oracle: OracleMode::On,
            timings: false,
            bundle_dir: PathBuf::from("."),
        }
    }
}

enum Space {
    Group { cx: InvariantComplex, su3: bool },
    Aligned(Box<AlignedSpace>),
    Generic(InvariantComplex),
}

struct Session {
    spec: SpaceSpec,
    e: Embedding,
    z: Vec<f64>,
    alignment: Option<AlignmentData>,
    space: Space,
    notes: Vec<String>,
    timings: Vec<Timing>,
    clock: Instant,
}

fn core(err: homharm::Error) -> CliError {
    CliError::Invalid(err.to_string())
}

impl Session {
    fn open(spec: &SpaceSpec) -> Result<Self, CliError> {
        let clock = Instant::now();
        let e = spec.validate()?;
        let z = spec.z_or_default();
        let mut notes = Vec::new();
        let (alignment, space) = if e.dim_k() == 0 {
            let cx = InvariantComplex::lie_group(e.ambient(), &z, true).map_err(core)?;
            let su3 = matches!(
                spec.g_factors.as_slice(),
                [FactorSpec::Su { n: 3, basis: Some(b) }] if b == "standard"
            );
            (None, Space::Group { cx, su3 })
        } else {
            let a = alignment_check(&e);
            let space = if a.is_aligned {
                match AlignedSpace::new(&e, &z) {
                    Ok(sp) => {
                        if !sp.assumptions.holds() {
                            notes.push(
                                "conditions (i)/(ii) fail: the closed-form criterion does not apply".into(),
                            );
                        }
                        Space::Aligned(Box::new(sp))
                    }
                    Err(err) => {
                        notes.push(format!("aligned split unavailable ({err}); generic split used"));
                        Space::Generic(generic_complex(&e, &z)?)
                    }
                }
            } else {
                notes.push(format!("not aligned: {}", a.diagnostics));
                Space::Generic(generic_complex(&e, &z)?)
            };
            (Some(a), space)
        };
        let mut session = Session {
            spec: spec.clone(),
            e,
            z,
            alignment,
            space,
            notes,
            timings: Vec::new(),
            clock,
        };
        session.lap("setup");
        Ok(session)
    }

    fn lap(&mut self, stage: &str) {
        self.timings.push(Timing {
            stage: stage.into(),
            seconds: self.clock.elapsed().as_secs_f64(),
        });
        self.clock = Instant::now();
    }

    fn complex(&self) -> &InvariantComplex {
        match &self.space {
            Space::Group { cx, .. } | Space::Generic(cx) => cx,
            Space::Aligned(sp) => sp.complex(),
        }
    }

    fn block_count(&self) -> usize {
        self.complex().block_count()
    }

    fn default_xs(&self) -> Result<Vec<Vec<f64>>, CliError> {
        let xs = self.spec.xs();
        let n = self.block_count();
        if xs.is_empty() {
            return Ok(vec![vec![1.0; n]]);
        }
        for (i, x) in xs.iter().enumerate() {
            if x.len() != n {
                return Err(CliError::Invalid(format!(
                    "x[{i}] has {} entries, expected one per block ({n}: {})",
                    x.len(),
                    self.complex().block_labels().join(", ")
                )));
            }
        }
        Ok(xs)
    }

    fn default_ys(&self) -> Vec<Vec<f64>> {
        let ys = self.spec.ys();
        if !ys.is_empty() {
            return ys;
        }
        match &self.space {
            Space::Aligned(sp) => columns(&sp.admissible_basis()),
            Space::Group { .. } => {
                let s = self.e.ideal_count();
                (0..s)
                    .map(|i| (0..s).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                    .collect()
            }
            Space::Generic(_) => Vec::new(),
        }
    }

    fn betti(&self) -> Result<BettiReport, CliError> {
        let cx = self.complex();
        let metric = MetricSpec::normal(self.z.clone(), cx.block_count());
        let mut laplacian = [0; 3];
        let mut ranks = [0; 3];
        for k in 1..=3 {
            laplacian[k - 1] = cx.betti(&metric, k).map_err(core)?;
            ranks[k - 1] = cx.betti_by_ranks(k);
        }
        let formula = [0, self.e.center_dim(), b3_dimension(&self.e).b3];
        Ok(BettiReport {
            laplacian,
            ranks,
            formula,
            agree: laplacian == formula && ranks == formula,
        })
    }

    fn closed_form(&self, x: &[f64], y: &[f64]) -> Result<Option<(bool, f64)>, CliError> {
        match &self.space {
            Space::Aligned(sp) => {
                if !sp.assumptions.holds() {
                    return Ok(None);
                }
                let check = sp.theorem_check(x, y).map_err(core)?;
                if self.spec.inject_fault == Some(Fault::HarmSign) {
                    let r = check
                        .sides
                        .iter()
                        .map(|(l, r)| (l + r).abs() / l.abs().max(r.abs()).max(1.0))
                        .fold(0.0, f64::max);
                    return Ok(Some((r <= HARM_TOL, r)));
                }
                Ok(Some((check.holds, check.max_residual)))
            }
            Space::Group { cx, .. } => {
                let g = group_harmonicity(cx, x, y, None).map_err(core)?;
                Ok(Some((g.harmonic, g.max_violation)))
            }
            Space::Generic(_) => Ok(None),
        }
    }

    fn oracle(&self, x: &[f64], y: &[f64]) -> Result<f64, CliError> {
        match &self.space {
            Space::Aligned(sp) => sp.oracle_residual(x, y).map_err(core),
            Space::Group { cx, .. } => {
                let q = make_group_q(self.e.ambient(), y).map_err(core)?;
                let h = cartan_form(cx, &q.matrix);
                normalized_residual(cx, &self.z, x, &h)
            }
            Space::Generic(_) => Err(CliError::Invalid("no closed-form forms on a generic split".into())),
        }
    }

    fn check_row(&self, kind: &str, x: &[f64], y: &[f64], with_oracle: bool) -> Result<CheckRow, CliError> {
        let closed = self.closed_form(x, y)?;
        let oracle = if with_oracle { Some(self.oracle(x, y)?) } else { None };
        let oracle_verdict = oracle.map(|r| r <= ORACLE_TOL);
        let agree = match (closed, oracle_verdict) {
            (Some((c, _)), Some(o)) => Some(c == o),
            _ => None,
        };
        Ok(CheckRow {
            kind: kind.into(),
            x: x.to_vec(),
            y: y.to_vec(),
            t: None,
            closed_form: closed.map(|c| c.0),
            closed_form_residual: closed.map(|c| c.1),
            oracle: oracle_verdict,
            oracle_residual: oracle,
            agree,
        })
    }

    fn su3_rows(&self, x: &[f64], with_oracle: bool) -> Result<Vec<CheckRow>, CliError> {
        let Space::Group { cx, su3: true } = &self.space else {
            return Ok(Vec::new());
        };
        let Ok(x8) = <[f64; 8]>::try_from(x) else {
            return Ok(Vec::new());
        };
        let q = make_group_q(self.e.ambient(), &[1.0]).map_err(core)?;
        let hk = cartan_form(cx, &q.matrix);
        let mut e12 = InvariantForm::zeros(8, 2);
        e12.set(&[0, 1], 1.0);
        let de12 = cx.differential(&e12);
        let mut rows = Vec::new();
        for (kind, t) in [
            ("su3-printed", su3_correction(&x8)),
            ("su3-corrected", su3_harmonic_correction(&x8)),
        ] {
            let oracle = if with_oracle {
                Some(normalized_residual(cx, &self.z, x, &hk.add(&de12.scaled(t)))?)
            } else {
                None
            };
            rows.push(CheckRow {
                kind: kind.into(),
                x: x.to_vec(),
                y: vec![1.0],
                t: Some(t),
                closed_form: Some(true),
                closed_form_residual: None,
                oracle: oracle.map(|r| r <= ORACLE_TOL),
                oracle_residual: oracle,
                agree: oracle.map(|r| r <= ORACLE_TOL),
            });
        }
        Ok(rows)
    }

    fn report(&self, command: &str, rows: Vec<CheckRow>, include_timings: bool) -> Result<Report, CliError> {
        let disagreements = rows.iter().filter(|r| r.agree == Some(false)).count();
        let betti = Some(self.betti()?);
        let (blocks, assumptions, casimir) = match &self.space {
            Space::Aligned(sp) => (
                sp.split
                    .blocks
                    .iter()
                    .map(|b| BlockReport {
                        label: b.label.clone(),
                        dim: b.len(),
                    })
                    .collect(),
                Some(AssumptionsReport {
                    condition_i: sp.assumptions.condition_i,
                    condition_ii: sp.assumptions.condition_ii,
                }),
                Some(CasimirReport {
                    cas0: sp.casimir.cas0,
                    cas: sp.casimir.cas.clone(),
                    identity_residual: sp.casimir.identity_residual,
                }),
            ),
            _ => (
                self.complex()
                    .block_labels()
                    .iter()
                    .enumerate()
                    .map(|(b, l)| BlockReport {
                        label: l.clone(),
                        dim: (0..self.complex().n()).filter(|&a| self.complex().block_of(a) == b).count(),
                    })
                    .collect(),
                None,
                None,
            ),
        };
        let betti_ok = betti.as_ref().is_none_or(|b| b.agree);
        Ok(Report {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            space: self.spec.name.clone(),
            seed: 0,
            dims: Dims {
                g: self.e.dim_g(),
                k: self.e.dim_k(),
                p: self.e.dim_p(),
                s: self.e.ideal_count(),
            },
            z: self.z.clone(),
            betti,
            alignment: self.alignment.as_ref().map(|a| AlignmentReport {
                aligned: a.is_aligned,
                c: a.c.clone(),
                lambda: a.lambda.clone(),
                diagnostics: a.diagnostics.clone(),
            }),
            blocks,
            assumptions,
            casimir,
            rows,
            sweep: Vec::new(),
            verify: None,
            notes: self.notes.clone(),
            disagreements,
            passed: disagreements == 0 && betti_ok,
            timings: include_timings.then(|| self.timings.clone()),
        })
    }
}

fn generic_complex(e: &Embedding, z: &[f64]) -> Result<InvariantComplex, CliError> {
    let split = generic_split(e, z).map_err(core)?;
    InvariantComplex::from_split(&split).map_err(core)
}

fn normalized_residual(cx: &InvariantComplex, z: &[f64], x: &[f64], h: &InvariantForm) -> Result<f64, CliError> {
    let metric = MetricSpec::new(z.to_vec(), x.to_vec()).map_err(core)?;
    let norm = cx.norm(&metric, h).map_err(core)?;
    if norm == 0.0 {
        return Err(CliError::Invalid("form vanishes".into()));
    }
    cx.harmonic_residual(&metric, &h.scaled(1.0 / norm)).map_err(core)
}

fn columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

fn oracle_flags(n: usize, mode: OracleMode, seed: u64) -> Vec<bool> {
    match mode {
        OracleMode::On => vec![true; n],
        OracleMode::Off => vec![false; n],
        OracleMode::Sample => {
            let mut rng = SplitMix64::new(seed ^ 0x5A17);
            (0..n).map(|i| i == 0 || rng.next_f64() < 0.25).collect()
        }
    }
}

pub fn betti(spec: &SpaceSpec, opts: &Options) -> Result<Report, CliError> {
    let mut session = Session::open(spec)?;
    session.lap("betti");
    let mut r = session.report("betti", Vec::new(), opts.timings)?;
    r.seed = opts.seed;
    Ok(r)
}

pub fn analyze(spec: &SpaceSpec, opts: &Options) -> Result<Report, CliError> {
    let mut session = Session::open(spec)?;
    let xs = session.default_xs()?;
    let ys = session.default_ys();
    let flags = oracle_flags(xs.len() * ys.len(), opts.oracle, opts.seed);
    let mut rows = Vec::new();
    let kind = if matches!(session.space, Space::Group { .. }) { "group" } else { "harm" };
    if !matches!(session.space, Space::Generic(_)) {
        let mut i = 0;
        for x in &xs {
            for y in &ys {
                rows.push(session.check_row(kind, x, y, flags[i])?);
                i += 1;
            }
            rows.extend(session.su3_rows(x, opts.oracle != OracleMode::Off)?);
        }
    }
    session.lap("checks");
    let mut r = session.report("analyze", rows, opts.timings)?;
    r.seed = opts.seed;
    Ok(r)
}

pub fn sweep(spec: &SpaceSpec, opts: &Options) -> Result<Report, CliError> {
    let mut session = Session::open(spec)?;
    let sw = spec
        .sweep
        .clone()
        .ok_or_else(|| CliError::Invalid("spec has no \"sweep\" section".into()))?;
    let Space::Aligned(sp) = &session.space else {
        return Err(CliError::Invalid("sweep needs an aligned space".into()));
    };
    let labels = session.complex().block_labels().to_vec();
    let b = labels
        .iter()
        .position(|l| *l == sw.block)
        .ok_or_else(|| CliError::Invalid(format!("unknown block {:?} (blocks: {})", sw.block, labels.join(", "))))?;
    let base = sw.base.clone().unwrap_or_else(|| vec![1.0; labels.len()]);
    if base.len() != labels.len() {
        return Err(CliError::Invalid(format!(
            "sweep base has {} entries, expected {}",
            base.len(),
            labels.len()
        )));
    }
    let ys = session.default_ys();
    let flags = oracle_flags(sw.steps * ys.len(), opts.oracle, opts.seed);
    let mut rows = Vec::new();
    let mut points = Vec::new();
    let mut i = 0;
    for step in 1..=sw.steps {
        let t = sw.from + (sw.to - sw.from) * step as f64 / sw.steps as f64;
        let mut x = base.clone();
        x[b] = t;
        let harmonic_q_dim = if sp.assumptions.holds() {
            sp.harmonic_q_space(&x).map_err(core)?.ncols()
        } else {
            0
        };
        let mut closed_all = true;
        let mut closed_max: f64 = 0.0;
        let mut oracle_max = Some(0.0f64);
        for y in &ys {
            let row = session.check_row("harm", &x, y, flags[i])?;
            i += 1;
            closed_all &= row.closed_form == Some(true);
            closed_max = closed_max.max(row.closed_form_residual.unwrap_or(f64::INFINITY));
            oracle_max = match (oracle_max, row.oracle_residual) {
                (Some(a), Some(o)) => Some(a.max(o)),
                _ => None,
            };
            rows.push(row);
        }
        points.push(SweepPoint {
            t,
            harmonic_q_dim,
            closed_form_all: closed_all,
            closed_form_max_residual: closed_max,
            oracle_all: oracle_max.map(|r| r <= ORACLE_TOL),
            oracle_max_residual: oracle_max,
        });
    }
    session.lap("sweep");
    let mut r = session.report("sweep", rows, opts.timings)?;
    r.seed = opts.seed;
    r.sweep = points;
    Ok(r)
}

#[derive(Serialize)]
struct ReproBundle<'a> {
    seed: u64,
    trial: usize,
    x: &'a [f64],
    y: &'a [f64],
    closed_form: Option<bool>,
    closed_form_residual: Option<f64>,
    oracle_residual: Option<f64>,
    replay: String,
    /// The input spec with `x` and `y` pinned to the failing pair.
    spec: SpaceSpec,
}

/// `x` and admissible `y` for one verification trial. Odd trials take `y`
/// from the closed-form harmonic set when it is nonempty so both verdicts
/// are exercised.
fn sample_trial(
    session: &Session,
    rng: &mut SplitMix64,
    trial: usize,
) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    match &session.space {
        Space::Aligned(sp) => {
            let common = rng.uniform(0.5, 2.0);
            let x: Vec<f64> = sp
                .split
                .blocks
                .iter()
                .map(|b| match (b.kind, session.spec.diagonal_sampling) {
                    (homharm::homog::SplitBlockKind::Diagonal(_), DiagonalSampling::Equal) => common,
                    _ => rng.uniform(0.5, 2.0),
                })
                .collect();
            let mut basis = sp.admissible_basis();
            if trial % 2 == 1 {
                let h = sp.harmonic_q_space(&x).map_err(core)?;
                if h.ncols() > 0 {
                    basis = h;
                }
            }
            let coeffs = DVector::from_fn(basis.ncols(), |_, _| rng.normal());
            let y = &basis * coeffs;
            Ok((x, y.iter().copied().collect()))
        }
        Space::Group { cx, .. } => {
            let alg = cx.ambient();
            let mut x = vec![0.0; cx.n()];
            let per_ideal = trial % 2 == 1;
            for blk in alg.blocks() {
                let v = rng.uniform(0.5, 2.0);
                for a in blk.range.clone() {
                    x[a] = if per_ideal { v } else { rng.uniform(0.5, 2.0) };
                }
            }
            let y = (0..session.e.ideal_count()).map(|_| rng.normal()).collect();
            Ok((x, y))
        }
        Space::Generic(_) => Err(CliError::Invalid("verify needs an aligned space or a Lie group".into())),
    }
}

pub fn verify(spec: &SpaceSpec, opts: &Options) -> Result<Report, CliError> {
    let mut session = Session::open(spec)?;
    if let Space::Aligned(sp) = &session.space {
        if !sp.assumptions.holds() {
            return Err(CliError::Invalid(
                "verify needs conditions (i)/(ii); the closed-form criterion does not apply".into(),
            ));
        }
    }
    let mut rng = SplitMix64::new(opts.seed);
    let mut rows = Vec::new();
    let mut bundle = None;
    for trial in 0..opts.trials {
        let (x, y) = sample_trial(&session, &mut rng, trial)?;
        let kind = if matches!(session.space, Space::Group { .. }) { "group" } else { "harm" };
        let row = session.check_row(kind, &x, &y, true)?;
        let failed = row.agree == Some(false);
        if failed {
            let mut pinned = spec.clone();
            pinned.x = Some(crate::spec::Vectors::One(x.clone()));
            pinned.y = Some(crate::spec::Vectors::One(y.clone()));
            let b = ReproBundle {
                seed: opts.seed,
                trial,
                x: &x,
                y: &y,
                closed_form: row.closed_form,
                closed_form_residual: row.closed_form_residual,
                oracle_residual: row.oracle_residual,
                replay: format!(
                    "homharm verify --spec SPEC --seed {} --trials {}",
                    opts.seed,
                    trial + 1
                ),
                spec: pinned,
            };
            let path = write_bundle(&opts.bundle_dir, opts.seed, trial, &b)?;
            bundle = Some(path.display().to_string());
        }
        rows.push(row);
        if failed {
            break;
        }
    }
    session.lap("verify");
    let completed = rows.len();
    let mut r = session.report("verify", rows, opts.timings)?;
    r.seed = opts.seed;
    r.verify = Some(VerifySummary {
        trials: opts.trials,
        completed,
        diagonal_sampling: match spec.diagonal_sampling {
            DiagonalSampling::Free => "free".into(),
            DiagonalSampling::Equal => "equal".into(),
        },
        fault: spec.inject_fault.map(|_| "harm-sign".into()),
        bundle,
    });
    Ok(r)
}

fn write_bundle(dir: &Path, seed: u64, trial: usize, b: &ReproBundle) -> Result<PathBuf, CliError> {
    let path = dir.join(format!("repro-seed{seed}-trial{trial}.json"));
    let text = serde_json::to_string_pretty(b).expect("bundle serializes");
    std::fs::write(&path, text + "\n").map_err(|err| CliError::Io {
        path: path.display().to_string(),
        source: err,
    })?;
    Ok(path)
}
