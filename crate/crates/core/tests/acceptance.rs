//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines are always shown.
//! Exits nonzero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use rand::Rng;
use tsirelson::certificate::{build_km_certificate, enumerate_k, km_membership, verify_certificate, Mode};
use tsirelson::classical::{classical_norm, classical_norm_oracle};
use tsirelson::modified::{modified_norm, modified_norm_oracle};
use tsirelson::stabilization::{
    approxim_construct, averaging_depth, block_counts, check_comparing1, check_comparing2, required_per_output,
    stabilization_pipeline, BasisSpec, BlockSequence, PipelineConfig,
};
use tsirelson::successive::{build_k_certificate, phi_exact, v_map, ExponentSeq};
use tsirelson::vector::{quantize_to_grid, GridEntry};
use tsirelson::{approx_le, BaseKind, GridVector, Params, Sign, SparseVector};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn oracle_classical() -> Outcome {
    let start = Instant::now();
    let mut rng = rng(1);
    let (mut worst, mut cases, mut bad) = (0.0f64, 0, 0);
    for &(p, r) in &PARAM_SET {
        let pr = params(p, r);
        for _ in 0..200 {
            let x = random_vector(&mut rng, &pr, 6);
            let dp = classical_norm(&x, &pr).unwrap().value;
            let oracle = classical_norm_oracle(&x, &pr, x.len() - 1, 1e-9).unwrap();
            let reference = reference_classical(&x, &pr);
            for o in [oracle.value, reference] {
                let err = (dp - o).abs() / (1.0 + o);
                worst = worst.max(err);
                if err > 1e-6 {
                    bad += 1;
                }
            }
            cases += 1;
        }
    }
    let t = start.elapsed();
    outcome(
        bad == 0 && secs(t) <= 60.0,
        format!("{cases} vectors, max err/(1+oracle) {worst:.1e} (tol 1e-6), {:.2} s (limit 60 s)", secs(t)),
    )
}

fn oracle_modified() -> Outcome {
    let start = Instant::now();
    let mut rng = rng(2);
    let (mut worst, mut cases, mut bad) = (0.0f64, 0, 0);
    for &(p, r) in &PARAM_SET {
        let pr = params(p, r);
        for _ in 0..200 {
            let x = random_vector(&mut rng, &pr, 5);
            let dp = modified_norm(&x, &pr, 1e-9).unwrap().value;
            let oracle = modified_norm_oracle(&x, &pr, x.len() - 1, 1e-9).unwrap();
            let reference = reference_modified(&x, &pr);
            for o in [oracle.value, reference] {
                let err = (dp - o).abs() / (1.0 + o);
                worst = worst.max(err);
                if err > 1e-6 {
                    bad += 1;
                }
            }
            cases += 1;
        }
    }
    let t = start.elapsed();
    outcome(
        bad == 0 && secs(t) <= 120.0,
        format!("{cases} vectors, max err/(1+oracle) {worst:.1e} (tol 1e-6), {:.2} s (limit 120 s)", secs(t)),
    )
}

fn sandwich() -> Outcome {
    let mut rng = rng(3);
    let mut bad = 0;
    let mut worst_ratio = 0.0f64;
    for k in 0..1000 {
        let (p, r) = PARAM_SET[k % PARAM_SET.len()];
        let pr = params(p, r);
        let x = random_vector(&mut rng, &pr, 40);
        let c = classical_norm(&x, &pr).unwrap().value;
        let m = modified_norm(&x, &pr, 1e-9).unwrap();
        let l = lp(&x, p);
        worst_ratio = worst_ratio.max(m.value / c);
        let ok = c <= m.upper_bound + 1e-9 && m.value <= l + 1e-9 && m.value <= 3.0 * c + 1e-9;
        if !ok {
            bad += 1;
        }
    }
    outcome(
        bad == 0,
        format!("1000 vectors, {bad} violations (slack 1e-9), max modified/classical {worst_ratio:.4} (bound 3)"),
    )
}

fn norming_round_trip() -> Outcome {
    let mut rng = rng(4);
    let mut bad = Vec::new();
    for k in 0..300 {
        let (p, r) = PARAM_SET[k % PARAM_SET.len()];
        let pr = params(p, r);
        let y = random_member(&mut rng, &pr, BaseKind::T, 30, 6);
        let replay = build_km_certificate(&y, &pr).ok().and_then(|c| {
            (c.mode == Mode::Disjoint).then(|| verify_certificate(&c, &pr).ok()).flatten()
        });
        let exact = replay.as_ref().is_some_and(|v| {
            *v == y && v.to_sparse().iter().zip(y.to_sparse().iter()).all(|(a, b)| a.0 == b.0 && a.1.to_bits() == b.1.to_bits())
        });
        if !exact {
            bad.push(format!("member {k}"));
        }
    }
    let mut rejected = 0;
    for k in 0..300 {
        let (p, r) = PARAM_SET[k % PARAM_SET.len()];
        let pr = params(p, r);
        let y = loop {
            let len = rng.gen_range(2..=30);
            let y = random_grid(&mut rng, &pr, BaseKind::T, len, 2);
            if kraft(&y.levels(), r) > one() {
                break y;
            }
        };
        if !km_membership(&y, &pr) && build_km_certificate(&y, &pr).is_err() {
            rejected += 1;
        } else {
            bad.push(format!("non-member {k}"));
        }
    }
    // Set equality on supports inside {1, 2, 3, 4} with levels ≤ 3.
    let support: BTreeSet<usize> = (1..=4).collect();
    let mut small = 0;
    for r in [2u32, 3] {
        let pr = params(2.0, r);
        let enumerated: BTreeSet<Vec<(usize, i8, i32)>> = enumerate_k(&support, 3, Mode::Disjoint, &pr, 1 << 20)
            .unwrap()
            .vectors
            .iter()
            .map(|v| v.iter().map(|(i, e)| (i, e.sign.as_i8(), e.exp)).collect())
            .collect();
        let mut expected = BTreeSet::new();
        // Each coordinate: absent, or a sign and a level 0..=3.
        for code in 0..9usize.pow(4) {
            let mut c = code;
            let mut entries = Vec::new();
            for i in 1..=4 {
                let d = c % 9;
                c /= 9;
                if d > 0 {
                    let sign = if d % 2 == 1 { 1i8 } else { -1 };
                    entries.push((i, sign, -(((d - 1) / 2) as i32)));
                }
            }
            let levels: Vec<i32> = entries.iter().map(|e| -e.2).collect();
            if !entries.is_empty() && kraft(&levels, r) <= one() {
                expected.insert(entries);
            }
        }
        small += expected.len();
        if expected != enumerated {
            bad.push(format!("enumeration mismatch at r = {r}"));
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "300 members certified and replayed bit-exactly, {rejected}/300 non-members rejected, \
             {small} small-scale members matched enumeration{}",
            if bad.is_empty() { String::new() } else { format!("; failures: {bad:?}") }
        ),
    )
}

fn phi_certificates() -> Outcome {
    let mut rng = rng(5);
    let mut bad = Vec::new();
    let mut certified = 0;
    while certified < 300 {
        let (p, r) = PARAM_SET[certified % PARAM_SET.len()];
        let pr = params(p, r);
        let len = rng.gen_range(1..=20);
        let m: Vec<i32> = (0..len).map(|_| rng.gen_range(0..=6)).collect();
        if reference_phi(&m, r) > one() {
            continue;
        }
        let seq = ExponentSeq::new(m.clone()).unwrap();
        let expected = GridVector::from_entries(
            pr.base(BaseKind::T),
            m.iter().enumerate().map(|(k, &e)| (k + 1, GridEntry::new(Sign::Plus, -e))),
        )
        .unwrap();
        let ok = build_k_certificate(&seq, &pr).is_ok_and(|c| {
            c.mode == Mode::Successive && verify_certificate(&c, &pr).is_ok_and(|v| v == expected && v == v_map(&seq, &pr))
        });
        if !ok {
            bad.push(format!("m = {m:?}"));
        }
        certified += 1;
    }
    let mut additive = 0;
    for k in 0..1000 {
        let r = PARAM_SET[k % PARAM_SET.len()].1;
        let len = rng.gen_range(3..=20);
        let m: Vec<i32> = (0..len).map(|_| rng.gen_range(0..=6)).collect();
        let i = rng.gen_range(1..len - 1);
        let whole = phi_exact(&m, r);
        if whole == reference_phi(&m, r) && whole == phi_exact(&m[..=i], r) + phi_exact(&m[i..], r) {
            additive += 1;
        }
    }
    let mut dominated = 0;
    for k in 0..1000 {
        let r = PARAM_SET[k % PARAM_SET.len()].1;
        let len = rng.gen_range(1..=20);
        let m: Vec<i32> = (0..len).map(|_| rng.gen_range(0..=6)).collect();
        // ‖V(m)‖_q^q = Σ t^{−q·m(i)} = Σ r^{−m(i)}.
        if phi_exact(&m, r) <= kraft(&m, r) * num_rational::BigRational::from_integer(2.into()) {
            dominated += 1;
        }
    }
    outcome(
        bad.is_empty() && additive == 1000 && dominated == 1000,
        format!(
            "{}/300 successive certificates verified, additivity {additive}/1000, Φ ≤ 2‖V‖_q^q {dominated}/1000",
            300 - bad.len()
        ),
    )
}

fn comparing() -> Outcome {
    let mut rng = rng(6);
    let (mut ok1, mut ok2) = (0, 0);
    for k in 0..500 {
        let (p, r) = PARAM_SET[k % PARAM_SET.len()];
        let pr = params(p, r);
        let x = random_member(&mut rng, &pr, BaseKind::S, 12, 5);
        let c = check_comparing1(&x, &pr, 1e-9).unwrap();
        let levels = x.levels();
        let pairing = tsirelson::exact::to_f64(&kraft(&levels, r));
        let witness_ok = c.witness.iter().eq(x.iter()) && km_membership(&c.witness, &pr);
        let norm = modified_norm(&x.to_sparse(), &pr, 1e-9).unwrap().value;
        if c.holds && witness_ok && c.pairing == pairing && pairing <= norm + 1e-9 {
            ok1 += 1;
        }
    }
    for k in 0..500 {
        let (p, r) = PARAM_SET[k % PARAM_SET.len()];
        let pr = params(p, r);
        // ‖x‖_p^p = Σ r^{−level} ≤ r: up to r² coordinates of level ≥ 1, or r of any level.
        let x = loop {
            let len = rng.gen_range(1..=(r as usize * 2).min(12));
            let x = random_grid(&mut rng, &pr, BaseKind::S, len, 4);
            if kraft(&x.levels(), r) <= kraft(&[-1], r) {
                break x;
            }
        };
        let c = check_comparing2(&x, &pr, 1e-9).unwrap();
        let bound = 1.0 + tsirelson::exact::to_f64(&kraft(&x.levels(), r)) / pr.t;
        let norm = modified_norm(&x.to_sparse(), &pr, 1e-9).unwrap();
        if c.holds && norm.value <= bound + 1e-9 {
            ok2 += 1;
        }
    }
    outcome(ok1 == 500 && ok2 == 500, format!("comparing1 {ok1}/500, comparing2 {ok2}/500 (slack 1e-9)"))
}

/// Normalise to `‖u‖_p = α^{−3/2}` and round onto the `α`-grid.
fn grid_blocks(blocks: &[SparseVector], pr: &Params) -> BlockSequence {
    let target = pr.alpha.powf(-1.5);
    let grid = blocks
        .iter()
        .map(|u| quantize_to_grid(&u.scale(target / lp(u, pr.p)), pr.base(BaseKind::Alpha)).unwrap())
        .collect();
    BlockSequence::new(grid, pr).unwrap()
}

fn averaging() -> Outcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    let mut notes = Vec::new();
    for r in [2u32, 4] {
        for p in [1.5, 2.0, 3.0] {
            let pr = params(p, r);
            let m = pr.level_count as i32;
            let need = required_per_output(&pr, 0.01);
            // Unit blocks and shifted copies of a two-coordinate pattern.
            let units: Vec<SparseVector> = (1..=2 * need).map(|i| SparseVector::unit(i).unwrap()).collect();
            let pairs: Vec<SparseVector> = (0..2 * need)
                .map(|k| SparseVector::from_entries([(2 * k + 1, 1.0), (2 * k + 2, -0.4)]).unwrap())
                .collect();
            for (name, blocks) in [("unit", units), ("pair", pairs)] {
                let seq = grid_blocks(&blocks, &pr);
                let a = match approxim_construct(&seq, 0.01, 2, &pr) {
                    Ok(a) => a,
                    Err(e) => {
                        bad.push(format!("p={p} r={r} {name}: {e}"));
                        continue;
                    }
                };
                for y in a.outputs.vectors() {
                    let mut mass = vec![0.0f64; m as usize];
                    for (_, e) in y.iter() {
                        mass[e.exp.rem_euclid(m) as usize] += pr.alpha.powf(p * f64::from(e.exp));
                    }
                    for (level, &v) in mass.iter().enumerate() {
                        let norm = v.powf(1.0 / p);
                        checked += 1;
                        if norm < pr.alpha.powi(-3) * (1.0 - 1e-12) || norm > 1.0 + 1e-12 {
                            bad.push(format!("p={p} r={r} {name} level {level}: {norm}"));
                        }
                    }
                }
            }
        }
    }
    let pr = params(2.0, 4);
    let l = averaging_depth(&pr, 0.01);
    let counts = block_counts(&pr, l);
    if l != 4 || counts != vec![256, 512] {
        bad.push(format!("r=4, p=2: l = {l}, counts {counts:?} (expected 4, [256, 512])"));
    } else {
        notes.push("r=4, p=2: l = 4, block lengths [256, 512]".to_string());
    }
    outcome(
        bad.is_empty(),
        format!(
            "{checked} (vector, level) bounds α^-3 ≤ ‖J_m y‖_p ≤ 1 checked, {} violations; {}",
            bad.len(),
            notes.join("; ")
        ) + &if bad.is_empty() { String::new() } else { format!("; {bad:?}") },
    )
}

fn stab_envelopes() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    let runs: [(f64, u32, usize, BasisSpec); 2] = [
        (2.0, 4, 100, BasisSpec::Unit { count: 2 * required_per_output(&params(2.0, 4), 0.01) }),
        (1.5, 2, 20, BasisSpec::Random { count: 8 * 3 * required_per_output(&params(1.5, 2), 0.01), pool: 3, seed: 11 }),
    ];
    for (p, r, trials, basis) in runs {
        let pr = params(p, r);
        let q = pr.q;
        let config = PipelineConfig { trials, seed: 7, ..PipelineConfig::default() };
        let report = match stabilization_pipeline(&basis, &pr, &config) {
            Ok(rep) => rep,
            Err(e) => {
                pass = false;
                parts.push(format!("p={p} r={r}: {e}"));
                continue;
            }
        };
        let m_root = f64::from(pr.level_count).powf(1.0 / p);
        let log_root = pr.log2_r().powf(1.0 / p);
        let (stab_lo, stab_hi) = (pr.alpha.powf(-4.0 * p), 6.0 * (p + q) * pr.alpha.powi(4));
        let (fin_lo, fin_hi) = (4f64.powi(-6), 3.0 * 4f64.powi(7) * (p + q));
        let lambda_bound = 3.0 * 4f64.powi(13) * (p + q);
        let mut rho = Vec::new();
        for t in &report.trials {
            let s = &t.stab;
            let ok = approx_le(stab_lo, m_root * s.modified / s.lp_norm, 1e-9)
                && approx_le(m_root * s.modified_upper / s.lp_norm, stab_hi, 1e-9)
                && approx_le(fin_lo, log_root * s.modified / s.lp_norm, 1e-9)
                && approx_le(log_root * s.modified_upper / s.lp_norm, fin_hi, 1e-9)
                && s.modified <= s.lp_norm + 1e-9
                && s.classical.is_none_or(|c| c <= s.modified_upper + 1e-9);
            pass &= ok;
            rho.push(log_root * s.modified / s.lp_norm);
        }
        let lo = rho.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = rho.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lambda = hi / lo;
        pass &= lambda <= lambda_bound && report.trials.len() == trials && report.summary().passed();
        parts.push(format!(
            "p={p} r={r}: {trials} draws, ρ ∈ [{lo:.4}, {hi:.4}] within [{fin_lo:.3e}, {fin_hi}], λ̂ = {lambda:.6} (bound {lambda_bound})"
        ));
    }
    outcome(pass, parts.join("; "))
}

fn performance() -> Outcome {
    let mut rng = rng(9);
    let mut parts = Vec::new();
    let mut pass = true;
    for r in [2u32, 3, 4] {
        let pr = params(2.0, r);
        let x = SparseVector::from_entries((1..=200).map(|i| (i, rng.gen_range(-1.0..1.0)))).unwrap();
        let start = Instant::now();
        classical_norm(&x, &pr).unwrap();
        let tc = secs(start.elapsed());
        let start = Instant::now();
        modified_norm(&x, &pr, 1e-9).unwrap();
        let tm = secs(start.elapsed());
        pass &= tc <= 5.0 && tm <= 5.0;
        parts.push(format!("r={r}: classical {tc:.3} s, modified {tm:.3} s"));
    }
    outcome(pass, format!("support 200 (limit 5 s each): {}", parts.join(", ")))
}

fn determinism() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_tsirelson");
    let dir = tempfile::tempdir().unwrap();
    let params_path = dir.path().join("p.json");
    std::fs::write(&params_path, "{\"p\": 2.0, \"r\": 2}").unwrap();
    let selftest = || Command::new(exe).args(["selftest", "--seed", "3"]).output().unwrap();
    let (a, b) = (selftest(), selftest());
    let selftest_ok = a.status.success() && a.stdout == b.stdout && !a.stdout.is_empty();
    let experiment = |tag: &str| {
        let out = dir.path().join(format!("{tag}.json"));
        let csv = dir.path().join(format!("{tag}.csv"));
        let status = Command::new(exe)
            .args(["experiment", "stabilization", "--basis-gen", "random", "--trials", "10", "--seed", "5"])
            .arg("--params")
            .arg(&params_path)
            .arg("--out")
            .arg(&out)
            .arg("--csv")
            .arg(&csv)
            .output()
            .unwrap();
        (status, std::fs::read(out).unwrap_or_default(), std::fs::read(csv).unwrap_or_default())
    };
    let (s1, j1, c1) = experiment("first");
    let (s2, j2, c2) = experiment("second");
    let experiment_ok = s1.status.success() && s1.stdout == s2.stdout && !j1.is_empty() && j1 == j2 && c1 == c2;
    outcome(
        selftest_ok && experiment_ok,
        format!(
            "selftest stdout identical: {selftest_ok}; experiment JSON ({} bytes) and CSV identical: {experiment_ok}",
            j1.len()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("oracle equivalence, classical", oracle_classical),
        ("oracle equivalence, modified", oracle_modified),
        ("sandwich and 3-equivalence", sandwich),
        ("norming set round-trip", norming_round_trip),
        ("Φ certificates and identities", phi_certificates),
        ("comparison lemmas", comparing),
        ("averaging construction bounds", averaging),
        ("stabilization envelopes", stab_envelopes),
        ("performance", performance),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!("criterion {:>2} {} {name}: {}", k + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
