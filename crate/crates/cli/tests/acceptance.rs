//! One PASS/FAIL line per acceptance criterion.
//!
//! Criteria listed in `KNOWN_RED` fail for reasons analysed in the project
//! notes (printed formulas that disagree with the Hodge-Laplacian oracle).
//! The test fails if any other criterion fails or if a known-red criterion
//! unexpectedly passes.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use homharm::cartan::{
    closed_form_codifferential, group_harmonicity, make_group_q, make_q, qtilde_coclosure_residual, su3_correction,
    su3_harmonic_correction, AlignedSpace, FamilyMode,
};
use homharm::catalog::{self, FactorSpec};
use homharm::exterior::{InvariantComplex, InvariantForm, MetricSpec};
use homharm::homog::{b3_dimension, generic_split};
use homharm::liealg::LieAlgebra;
use homharm_cli::rng::SplitMix64;

const KERNEL_TOL: f64 = 1e-8;
const LAPLACIAN_TOL: f64 = 1e-8;
const CODIFFERENTIAL_TOL: f64 = 1e-9;
const CASIMIR_TOL: f64 = 1e-8;
const ORACLE_TOL: f64 = 1e-8;
const PROPERTY_TOL: f64 = 1e-9;
const OFF_FAMILY_RESIDUAL: f64 = 1e-4;

const KNOWN_RED: [u32; 3] = [2, 5, 7];

struct Outcome {
    id: u32,
    pass: bool,
    detail: String,
}

fn within(start: Instant, limit: Duration) -> (bool, String) {
    let el = start.elapsed();
    (el < limit, format!("{:.2}s (limit {}s)", el.as_secs_f64(), limit.as_secs()))
}

fn normalized_residual(cx: &InvariantComplex, metric: &MetricSpec, h: &InvariantForm) -> f64 {
    let n = cx.norm(metric, h).unwrap();
    cx.harmonic_residual(metric, &h.scaled(1.0 / n)).unwrap()
}

fn betti_suite() -> Outcome {
    let start = Instant::now();
    assert_eq!(homharm::linalg::KERNEL_TOL, KERNEL_TOL);
    let spaces = [
        catalog::ledger_obata_su2(2),
        catalog::ledger_obata_su2(3),
        catalog::su2n_squared_mod_su2n(2),
        catalog::su_power_mod_torus(3, 2),
        catalog::su3_flag(),
        catalog::group(FactorSpec::su(2), 3),
    ];
    let mut bad = Vec::new();
    for desc in &spaces {
        let e = desc.build().unwrap();
        let z = vec![1.0; e.ideal_count()];
        let cx = InvariantComplex::from_split(&generic_split(&e, &z).unwrap()).unwrap();
        let metric = MetricSpec::normal(z, cx.block_count());
        let got: Vec<usize> = (1..=3).map(|k| cx.betti(&metric, k).unwrap()).collect();
        let want = vec![0, e.center_dim(), b3_dimension(&e).b3];
        if got != want {
            bad.push(format!("{} got {got:?} want {want:?}", desc.name));
        }
    }
    let (fast, time) = within(start, Duration::from_secs(60));
    Outcome {
        id: 1,
        pass: bad.is_empty() && fast,
        detail: format!("{} spaces, mismatches {:?}, {time}", spaces.len(), bad),
    }
}

fn su3_example() -> Outcome {
    let start = Instant::now();
    let alg = LieAlgebra::su3_standard();
    let cx = InvariantComplex::lie_group(&alg, &[1.0], true).unwrap();
    let hk = homharm::cartan::cartan_form(&cx, &make_group_q(&alg, &[1.0]).unwrap().matrix);
    let mut e12 = InvariantForm::zeros(8, 2);
    e12.set(&[0, 1], 1.0);
    let de12 = cx.differential(&e12);
    let mut rng = SplitMix64::new(2);
    let (mut printed_ok, mut corrected_ok, mut dichotomy_ok) = (0, 0, 0);
    let mut worst_printed: f64 = 0.0;
    let trials = 20;
    for i in 0..trials {
        let mut x: [f64; 8] = std::array::from_fn(|_| rng.uniform(0.5, 2.0));
        match i % 4 {
            0 => x[1] = x[0],
            1 => x[6] = x[2] * x[5] / x[3],
            _ => {}
        }
        let metric = MetricSpec::new(vec![1.0], x.to_vec()).unwrap();
        let r_printed = normalized_residual(&cx, &metric, &hk.add(&de12.scaled(su3_correction(&x))));
        let r_corrected = normalized_residual(&cx, &metric, &hk.add(&de12.scaled(su3_harmonic_correction(&x))));
        worst_printed = worst_printed.max(r_printed);
        printed_ok += usize::from(r_printed <= LAPLACIAN_TOL);
        corrected_ok += usize::from(r_corrected <= LAPLACIAN_TOL);
        let scale = x[2] * x[5];
        let dichotomy = (x[0] - x[1]).abs() <= 1e-12 || (x[2] * x[5] - x[3] * x[6]).abs() <= 1e-12 * scale;
        let kernel = normalized_residual(&cx, &metric, &hk) <= LAPLACIAN_TOL;
        let closed = group_harmonicity(&cx, &x, &[1.0], None).unwrap().harmonic;
        dichotomy_ok += usize::from(dichotomy == kernel && closed == kernel);
    }
    let (fast, time) = within(start, Duration::from_secs(10));
    Outcome {
        id: 2,
        pass: printed_ok == trials && dichotomy_ok == trials && fast,
        detail: format!(
            "printed t harmonic {printed_ok}/{trials} (worst residual {worst_printed:.3e}), \
             sign-corrected t harmonic {corrected_ok}/{trials}, dichotomy matches kernel {dichotomy_ok}/{trials}, {time}"
        ),
    }
}

fn codifferential_formula() -> Outcome {
    let start = Instant::now();
    let mut rng = SplitMix64::new(3);
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    for alg in [LieAlgebra::su3_standard(), LieAlgebra::so(5).unwrap()] {
        let cx = InvariantComplex::lie_group(&alg, &[1.0], true).unwrap();
        let n = cx.n();
        let basis = homharm::exterior::tuples(n, 3);
        for _ in 0..50 {
            let x: Vec<f64> = (0..n).map(|_| rng.uniform(0.3, 3.0)).collect();
            let metric = MetricSpec::new(vec![1.0], x.clone()).unwrap();
            let beta = InvariantForm::from_fn(n, 3, |_| rng.uniform(-1.0, 1.0));
            let gap = (cx.codifferential(&metric, &beta).unwrap().coeffs()
                - closed_form_codifferential(&cx, &x, &beta).unwrap().coeffs())
            .norm()
                / beta.coeffs().norm();
            worst = worst.max(gap);
            pairs += 1;
            if pairs % 10 == 1 {
                let m2 = homharm::exterior::binomial(n, 2);
                let mut diff = DMatrix::zeros(m2, basis.len());
                for (c, idx) in basis.iter().enumerate() {
                    let mut e = InvariantForm::zeros(n, 3);
                    e.set(idx, 1.0);
                    let d = cx.codifferential(&metric, &e).unwrap().coeffs() - closed_form_codifferential(&cx, &x, &e).unwrap().coeffs();
                    diff.set_column(c, &d);
                }
                worst = worst.max(diff.singular_values().max());
            }
        }
    }
    let (fast, time) = within(start, Duration::from_secs(30));
    Outcome {
        id: 3,
        pass: worst <= CODIFFERENTIAL_TOL && fast,
        detail: format!("{pairs} pairs on su(3), so(5), operator-norm distance {worst:.3e}, {time}"),
    }
}

fn casimir_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut worst_cas0: f64 = 0.0;
    let spaces = catalog::aligned_catalog();
    for desc in &spaces {
        let e = desc.build().unwrap();
        let space = AlignedSpace::new(&e, &vec![1.0; e.ideal_count()]).unwrap();
        worst = worst.max(space.casimir.identity_residual);
        worst_cas0 = worst_cas0.max((space.casimir.cas0 - space.casimir.cas0_structure).abs());
    }
    Outcome {
        id: 4,
        pass: worst <= CASIMIR_TOL && worst_cas0 <= CASIMIR_TOL,
        detail: format!(
            "{} spaces, identity residual {worst:.3e}, Cas0 trace vs structure constants {worst_cas0:.3e}",
            spaces.len()
        ),
    }
}

fn harm_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = SplitMix64::new(5);
    let mut parts = Vec::new();
    let mut total = 0;
    for desc in [catalog::ledger_obata_su2(3), catalog::su3_power_mod_su2(3)] {
        let e = desc.build().unwrap();
        assert!(e.dim_p() <= 24);
        let space = AlignedSpace::new(&e, &vec![1.0; e.ideal_count()]).unwrap();
        let mut disagree = 0;
        for trial in 0..50 {
            let x: Vec<f64> = space.split.blocks.iter().map(|_| rng.uniform(0.5, 2.0)).collect();
            let mut basis = space.admissible_basis();
            if trial % 2 == 1 {
                let h = space.harmonic_q_space(&x).unwrap();
                if h.ncols() > 0 {
                    basis = h;
                }
            }
            let c = DVector::from_fn(basis.ncols(), |_, _| rng.normal());
            let y: Vec<f64> = (&basis * c).iter().copied().collect();
            let verdict = space.theorem_check(&x, &y).unwrap().holds;
            let oracle = space.oracle_residual(&x, &y).unwrap() <= ORACLE_TOL;
            disagree += usize::from(verdict != oracle);
        }
        total += disagree;
        parts.push(format!("{}: {disagree}/50 disagreements", desc.name));
    }
    let (fast, time) = within(start, Duration::from_secs(300));
    Outcome {
        id: 5,
        pass: total == 0 && fast,
        detail: format!("{}, {time}", parts.join(", ")),
    }
}

fn standard_metric_and_unique_q() -> Outcome {
    let mut failures = Vec::new();
    for desc in catalog::aligned_catalog() {
        let e = desc.build().unwrap();
        let space = AlignedSpace::new(&e, &vec![1.0; e.ideal_count()]).unwrap();
        let ones = vec![1.0; space.split.blocks.len()];
        for col in space.admissible_basis().column_iter() {
            let y: Vec<f64> = col.iter().copied().collect();
            let holds = space.theorem_check(&ones, &y).unwrap().holds;
            let oracle = space.oracle_residual(&ones, &y).unwrap() <= ORACLE_TOL;
            if !(holds && oracle) {
                failures.push(format!("{} standard metric", desc.name));
            }
        }
    }
    let e = catalog::ledger_obata_su2(3).build().unwrap();
    let space = AlignedSpace::new(&e, &[1.0, 1.0, 2.0]).unwrap();
    let ones = vec![1.0; space.split.blocks.len()];
    let q = space.unique_harmonic_q().unwrap();
    let ray_holds = space.theorem_check(&ones, &q.y).unwrap().holds;
    let ray_oracle = space.oracle_residual(&ones, &q.y).unwrap();
    let yv = DVector::from_column_slice(&q.y);
    let basis = space.admissible_basis();
    let coords = basis.transpose() * &yv;
    let perp = homharm::linalg::null_space(&DMatrix::from_row_slice(1, coords.len(), coords.as_slice()));
    let other: Vec<f64> = (&basis * perp.column(0)).iter().copied().collect();
    let comp_holds = space.theorem_check(&ones, &other).unwrap().holds;
    let comp_oracle = space.oracle_residual(&ones, &other).unwrap();
    if !(ray_holds && ray_oracle <= ORACLE_TOL) {
        failures.push(format!("unique ray fails (oracle {ray_oracle:.3e})"));
    }
    if comp_holds || comp_oracle <= ORACLE_TOL {
        failures.push(format!("complement passes (oracle {comp_oracle:.3e})"));
    }
    Outcome {
        id: 6,
        pass: failures.is_empty(),
        detail: format!(
            "unique ray y={:?}, ray oracle {ray_oracle:.3e}, complement oracle {comp_oracle:.3e}, failures {failures:?}",
            q.y.iter().map(|v| (v * 1e6).round() / 1e6).collect::<Vec<_>>()
        ),
    }
}

fn ledger_obata_family() -> Outcome {
    let e = catalog::ledger_obata_su2(3).build().unwrap();
    let mut parts = Vec::new();
    let mut pass = true;
    for (z, expected) in [([1.0, 1.0, 1.0], 1.0), ([1.0, 1.0, 2.0], (2.0f64 / 3.0).sqrt())] {
        let space = AlignedSpace::new(&e, &z).unwrap();
        let fam = space.special_families(&FamilyMode::LedgerObata).unwrap();
        let t = fam.values.iter().find(|v| v.0 == "t").unwrap().1;
        let basis = space.admissible_basis();
        let worst = |t: f64| {
            let mut x = fam.x.clone();
            *x.last_mut().unwrap() = t;
            let xb = space.block_x(&x);
            basis
                .column_iter()
                .map(|c| space.oracle_residual(&xb, c.as_slice()).unwrap())
                .fold(0.0, f64::max)
        };
        let at = worst(t);
        let off = worst(t - 0.05).min(worst(t + 0.05));
        let ok = (t - expected).abs() <= 1e-12 && at <= ORACLE_TOL && off > OFF_FAMILY_RESIDUAL;
        pass &= ok;
        parts.push(format!(
            "z={z:?}: t={t:.10}, residual at t {at:.3e}, at t±0.05 {off:.3e}"
        ));
    }
    Outcome {
        id: 7,
        pass,
        detail: parts.join("; "),
    }
}

fn closure_properties() -> Outcome {
    let mut rng = SplitMix64::new(8);
    let complexes: Vec<InvariantComplex> = catalog::betti_catalog()
        .iter()
        .map(|d| {
            let e = d.build().unwrap();
            let z: Vec<f64> = (0..e.ideal_count()).map(|i| 1.0 + 0.3 * i as f64).collect();
            InvariantComplex::from_split(&generic_split(&e, &z).unwrap()).unwrap()
        })
        .collect();
    let aligned: Vec<AlignedSpace> = catalog::aligned_catalog()
        .iter()
        .map(|d| {
            let e = d.build().unwrap();
            let z: Vec<f64> = (0..e.ideal_count()).map(|i| 1.0 + 0.5 * i as f64).collect();
            AlignedSpace::new(&e, &z).unwrap()
        })
        .collect();
    let random_form = |cx: &InvariantComplex, k: usize, rng: &mut SplitMix64| {
        let a = DVector::from_fn(cx.invariant_dim(k), |_, _| rng.uniform(-1.0, 1.0));
        cx.from_invariant_coords(k, &a)
    };
    let (mut dd, mut adj, mut dh, mut qt): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..200 {
        let cx = &complexes[(rng.next_u64() % complexes.len() as u64) as usize];
        let k = (rng.next_u64() % 3) as usize;
        let a = random_form(cx, k, &mut rng);
        dd = dd.max(cx.differential(&cx.differential(&a)).max_abs());

        let x: Vec<f64> = (0..cx.block_count()).map(|_| rng.uniform(0.3, 3.0)).collect();
        let metric = MetricSpec::new(cx.z().to_vec(), x).unwrap();
        let k = 1 + (rng.next_u64() % 3) as usize;
        let alpha = random_form(cx, k - 1, &mut rng);
        let beta = random_form(cx, k, &mut rng);
        let lhs = cx.inner(&metric, &cx.codifferential(&metric, &beta).unwrap(), &alpha).unwrap();
        let rhs = cx.inner(&metric, &beta, &cx.differential(&alpha)).unwrap();
        adj = adj.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0));

        let space = &aligned[(rng.next_u64() % aligned.len() as u64) as usize];
        let basis = space.admissible_basis();
        let y = &basis * DVector::from_fn(basis.ncols(), |_, _| rng.normal());
        let h = space.h_form(y.as_slice()).unwrap();
        dh = dh.max(h.closed_residual / h.h.max_abs().max(1.0));
        let yq: Vec<f64> = (0..space.s()).map(|_| rng.normal()).collect();
        let q = make_q(space.embedding(), &yq).unwrap();
        qt = qt.max(qtilde_coclosure_residual(space.complex(), &q.matrix).unwrap());
    }
    Outcome {
        id: 8,
        pass: [dd, adj, dh, qt].iter().all(|v| *v <= PROPERTY_TOL),
        detail: format!(
            "200 instances: d² {dd:.3e}, adjointness {adj:.3e}, dH_Q {dh:.3e}, d*Q̃ {qt:.3e}"
        ),
    }
}

fn negative_control() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let spec = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/fault-harm-sign.json");
    let out = dir.path().join("report.json");
    let status = Command::new(env!("CARGO_BIN_EXE_homharm"))
        .args(["verify", "--spec", spec.to_str().unwrap(), "--seed", "3", "--out", out.to_str().unwrap()])
        .current_dir(dir.path())
        .output()
        .unwrap();
    let bundles: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("repro-"))
        .collect();
    let code = status.status.code();
    Outcome {
        id: 9,
        pass: code == Some(1) && bundles.len() == 1,
        detail: format!("exit {code:?}, {} repro bundle(s)", bundles.len()),
    }
}

fn main() {
    let outcomes = [
        betti_suite(),
        su3_example(),
        codifferential_formula(),
        casimir_identity(),
        harm_equivalence(),
        standard_metric_and_unique_q(),
        ledger_obata_family(),
        closure_properties(),
        negative_control(),
    ];
    let mut unexpected = Vec::new();
    for o in &outcomes {
        let known = KNOWN_RED.contains(&o.id);
        let tag = match (o.pass, known) {
            (true, false) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
            (true, true) => "PASS (expected FAIL)",
        };
        println!("criterion {}: {tag}: {}", o.id, o.detail);
        if o.pass == known {
            unexpected.push(o.id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("criteria with unexpected outcome: {unexpected:?}");
        std::process::exit(1);
    }
}
