//! Report records and their JSON, CSV and text-table renderings.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::numfmt::{fmt_sig, round_json};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dims {
    pub g: usize,
    pub k: usize,
    pub p: usize,
    pub s: usize,
}

/// Betti numbers from the Laplacian kernel, from ranks of `d`, and from the
/// closed formulas `b₁ = 0`, `b₂ = dim z(k)`, `b₃ = s − d_{G/K}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BettiReport {
    pub laplacian: [usize; 3],
    pub ranks: [usize; 3],
    pub formula: [usize; 3],
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub aligned: bool,
    pub c: Vec<f64>,
    pub lambda: Vec<f64>,
    pub diagnostics: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub label: String,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionsReport {
    pub condition_i: bool,
    pub condition_ii: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasimirReport {
    pub cas0: f64,
    pub cas: Vec<f64>,
    pub identity_residual: f64,
}

/// One closed-form verdict paired with its oracle verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    /// `harm`, `group`, `su3-printed` or `su3-corrected`.
    pub kind: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t: Option<f64>,
    pub closed_form: Option<bool>,
    pub closed_form_residual: Option<f64>,
    pub oracle: Option<bool>,
    pub oracle_residual: Option<f64>,
    pub agree: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub t: f64,
    /// Dimension of the admissible `y` passing the closed-form equations.
    pub harmonic_q_dim: usize,
    pub closed_form_all: bool,
    pub closed_form_max_residual: f64,
    pub oracle_all: Option<bool>,
    pub oracle_max_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySummary {
    pub trials: usize,
    pub completed: usize,
    pub diagonal_sampling: String,
    pub fault: Option<String>,
    pub bundle: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub space: String,
    pub seed: u64,
    pub dims: Dims,
    pub z: Vec<f64>,
    pub betti: Option<BettiReport>,
    pub alignment: Option<AlignmentReport>,
    pub blocks: Vec<BlockReport>,
    pub assumptions: Option<AssumptionsReport>,
    pub casimir: Option<CasimirReport>,
    pub rows: Vec<CheckRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySummary>,
    pub notes: Vec<String>,
    pub disagreements: usize,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Vec<Timing>>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        round_json(&mut v);
        let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let nx = self.rows.iter().map(|r| r.x.len()).max().unwrap_or(0);
        let ny = self.rows.iter().map(|r| r.y.len()).max().unwrap_or(0);
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["kind".to_string()];
        header.extend((1..=nx).map(|i| format!("x{i}")));
        header.extend((1..=ny).map(|i| format!("y{i}")));
        header.extend(
            ["t", "closed_form", "closed_form_residual", "oracle", "oracle_residual", "agree"]
                .map(String::from),
        );
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![r.kind.clone()];
            rec.extend((0..nx).map(|i| r.x.get(i).map(|v| fmt_sig(*v)).unwrap_or_default()));
            rec.extend((0..ny).map(|i| r.y.get(i).map(|v| fmt_sig(*v)).unwrap_or_default()));
            rec.push(opt_num(r.t));
            rec.push(opt_bool(r.closed_form));
            rec.push(opt_num(r.closed_form_residual));
            rec.push(opt_bool(r.oracle));
            rec.push(opt_num(r.oracle_residual));
            rec.push(opt_bool(r.agree));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let d = &self.dims;
        let _ = writeln!(out, "space      {}", self.space);
        let _ = writeln!(out, "command    {}", self.command);
        let _ = writeln!(out, "seed       {}", self.seed);
        let _ = writeln!(out, "dims       g={} k={} p={} s={}", d.g, d.k, d.p, d.s);
        let _ = writeln!(out, "z          {}", join(&self.z));
        if let Some(b) = &self.betti {
            let _ = writeln!(
                out,
                "betti      laplacian={:?} ranks={:?} formula={:?} {}",
                b.laplacian,
                b.ranks,
                b.formula,
                if b.agree { "agree" } else { "DISAGREE" }
            );
        }
        if let Some(a) = &self.alignment {
            let _ = writeln!(
                out,
                "aligned    {} c=[{}] lambda=[{}]",
                a.aligned,
                join(&a.c),
                join(&a.lambda)
            );
        }
        if !self.blocks.is_empty() {
            let labels: Vec<String> = self.blocks.iter().map(|b| format!("{}:{}", b.label, b.dim)).collect();
            let _ = writeln!(out, "blocks     {}", labels.join(" "));
        }
        if let Some(a) = &self.assumptions {
            let _ = writeln!(out, "conditions (i)={} (ii)={}", a.condition_i, a.condition_ii);
        }
        if let Some(c) = &self.casimir {
            let _ = writeln!(
                out,
                "casimir    cas0={} cas=[{}] identity_residual={}",
                fmt_sig(c.cas0),
                join(&c.cas),
                fmt_sig(c.identity_residual)
            );
        }
        if !self.rows.is_empty() {
            let mut cells = vec![[
                "kind", "x", "y", "t", "closed", "closed_res", "oracle", "oracle_res", "agree",
            ]
            .map(String::from)
            .to_vec()];
            for r in &self.rows {
                cells.push(vec![
                    r.kind.clone(),
                    join(&r.x),
                    join(&r.y),
                    opt_num(r.t),
                    opt_bool(r.closed_form),
                    opt_num(r.closed_form_residual),
                    opt_bool(r.oracle),
                    opt_num(r.oracle_residual),
                    opt_bool(r.agree),
                ]);
            }
            let widths: Vec<usize> = (0..cells[0].len())
                .map(|c| cells.iter().map(|row| row[c].chars().count()).max().unwrap_or(0))
                .collect();
            out.push('\n');
            for row in &cells {
                let line: Vec<String> = row
                    .iter()
                    .zip(&widths)
                    .map(|(v, w)| format!("{v:<w$}"))
                    .collect();
                let _ = writeln!(out, "{}", line.join("  ").trim_end());
            }
        }
        if !self.sweep.is_empty() {
            out.push('\n');
            let _ = writeln!(out, "t  harmonic_q_dim  closed_form_all  closed_max_res  oracle_all  oracle_max_res");
            for p in &self.sweep {
                let _ = writeln!(
                    out,
                    "{}  {}  {}  {}  {}  {}",
                    fmt_sig(p.t),
                    p.harmonic_q_dim,
                    p.closed_form_all,
                    fmt_sig(p.closed_form_max_residual),
                    opt_bool(p.oracle_all),
                    opt_num(p.oracle_max_residual)
                );
            }
        }
        if let Some(v) = &self.verify {
            let _ = writeln!(
                out,
                "verify     {}/{} trials, sampling={}{}",
                v.completed,
                v.trials,
                v.diagonal_sampling,
                v.bundle.as_ref().map(|b| format!(", bundle={b}")).unwrap_or_default()
            );
        }
        for n in &self.notes {
            let _ = writeln!(out, "note       {n}");
        }
        let _ = writeln!(
            out,
            "result     {} ({} disagreements)",
            if self.passed { "PASS" } else { "FAIL" },
            self.disagreements
        );
        out
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
            Format::Table => self.to_table(),
        }
    }

    pub fn emit(&self, format: Format, out: Option<&Path>) -> Result<(), CliError> {
        let text = self.render(format);
        match out {
            Some(p) => std::fs::write(p, text).map_err(|err| CliError::Io {
                path: p.display().to_string(),
                source: err,
            }),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| fmt_sig(*x)).collect::<Vec<_>>().join(",")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(fmt_sig).unwrap_or_else(|| "-".into())
}

fn opt_bool(v: Option<bool>) -> String {
    v.map(|b| b.to_string()).unwrap_or_else(|| "-".into())
}
