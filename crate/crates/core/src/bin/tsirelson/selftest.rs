//! Reduced-size invariant suites behind `tsirelson selftest`.
//!
//! Every suite draws from its own seeded stream, so a single suite run with
//! `--suite` reproduces exactly the cases it sees in a full run. A failing
//! case is printed as JSON on stderr for replay.

use std::process::ExitCode;

use num_rational::BigRational;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use tsirelson::certificate::{build_km_certificate, km_membership, verify_certificate};
use tsirelson::classical::{classical_norm, classical_norm_oracle};
use tsirelson::exact::kraft_sum;
use tsirelson::io;
use tsirelson::modified::{modified_norm, modified_norm_oracle};
use tsirelson::stabilization::{
    approxim_construct, check_comparing1, check_comparing2, required_per_output, stabilization_pipeline, BasisSpec,
    BlockSequence, PipelineConfig,
};
use tsirelson::successive::{build_k_certificate, phi_exact, v_map, ExponentSeq};
use tsirelson::vector::{j_m_split, quantize_to_grid, GridEntry};
use tsirelson::{approx_le, BaseKind, Error, GridVector, Params, Sign, SparseVector, DEFAULT_TOL};

type Outcome = std::result::Result<usize, Value>;

struct Suite {
    name: &'static str,
    reference: &'static str,
    default_n: usize,
    run: fn(&mut ChaCha8Rng, usize) -> Outcome,
}

const SUITES: &[Suite] = &[
    Suite { name: "params", reference: "Parameter identities", default_n: 0, run: params_suite },
    Suite { name: "quantize", reference: "Grid quantization sandwich", default_n: 200, run: quantize_suite },
    Suite { name: "jsplit", reference: "J_m partition", default_n: 200, run: jsplit_suite },
    Suite { name: "classical-oracle", reference: "Classical norm vs oracle", default_n: 100, run: classical_oracle_suite },
    Suite { name: "modified-oracle", reference: "Modified norm vs oracle", default_n: 100, run: modified_oracle_suite },
    Suite { name: "sandwich", reference: "Corollary 3-equivalence", default_n: 200, run: sandwich_suite },
    Suite { name: "form", reference: "Lemma form round-trip", default_n: 300, run: form_suite },
    Suite { name: "jacek", reference: "Theorem jacek certificates", default_n: 300, run: jacek_suite },
    Suite { name: "phi", reference: "Phi additivity", default_n: 200, run: phi_suite },
    Suite { name: "comparing1", reference: "Lemma comparing1", default_n: 500, run: comparing1_suite },
    Suite { name: "comparing2", reference: "Lemma comparing2", default_n: 500, run: comparing2_suite },
    Suite { name: "approxim", reference: "Lemma approxim bounds", default_n: 0, run: approxim_suite },
    Suite { name: "stab", reference: "Lemma stab envelopes", default_n: 20, run: stab_suite },
];

pub fn run(only: Option<&str>, n: Option<usize>, seed: u64) -> tsirelson::Result<ExitCode> {
    let selected: Vec<(usize, &Suite)> = match only {
        Some(name) => {
            let found = SUITES.iter().enumerate().find(|(_, s)| s.name == name).ok_or_else(|| {
                let names: Vec<&str> = SUITES.iter().map(|s| s.name).collect();
                Error::InvalidArgument(format!("unknown suite {name:?}; known: {}", names.join(", ")))
            })?;
            vec![found]
        }
        None => SUITES.iter().enumerate().collect(),
    };
    let mut failed = false;
    println!("{:<6} {:<18} {:<30} {:>6}", "status", "suite", "reference", "cases");
    for (k, suite) in selected {
        let mut rng = tsirelson::rng::stream(seed, k as u64);
        let outcome = (suite.run)(&mut rng, n.unwrap_or(suite.default_n));
        match outcome {
            Ok(cases) => println!("{:<6} {:<18} {:<30} {:>6}", "PASS", suite.name, suite.reference, cases),
            Err(case) => {
                failed = true;
                println!("{:<6} {:<18} {:<30} {:>6}", "FAIL", suite.name, suite.reference, "-");
                eprintln!("{}", json!({"suite": suite.name, "seed": seed, "case": case}));
            }
        }
    }
    Ok(if failed { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

const PARAM_SET: &[(f64, u32)] = &[(2.0, 2), (2.0, 4), (1.5, 3), (3.0, 2)];

fn pick_params(rng: &mut ChaCha8Rng) -> Params {
    let (p, r) = PARAM_SET[rng.gen_range(0..PARAM_SET.len())];
    Params::new(p, r).expect("listed parameters are valid")
}

/// Random vector: increasing indices with gaps, `±t^{−j}` or uniform entries.
fn random_vector(rng: &mut ChaCha8Rng, params: &Params, max_support: usize) -> SparseVector {
    let len = rng.gen_range(1..=max_support);
    let mut index = 0usize;
    let mut entries = Vec::with_capacity(len);
    for _ in 0..len {
        index += rng.gen_range(1..=3);
        let magnitude = if rng.gen_bool(0.5) {
            params.t.powi(-rng.gen_range(0..4))
        } else {
            rng.gen_range(0.01..1.0)
        };
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        entries.push((index, sign * magnitude));
    }
    SparseVector::from_entries(entries).expect("indices are distinct and positive")
}

fn random_grid(rng: &mut ChaCha8Rng, params: &Params, kind: BaseKind, max_support: usize, max_level: i32) -> GridVector {
    let len = rng.gen_range(1..=max_support);
    let mut index = 0usize;
    let mut entries = Vec::with_capacity(len);
    for _ in 0..len {
        index += rng.gen_range(1..=2);
        let sign = if rng.gen_bool(0.5) { Sign::Plus } else { Sign::Minus };
        entries.push((index, GridEntry::new(sign, -rng.gen_range(0..=max_level))));
    }
    GridVector::from_entries(params.base(kind), entries).expect("indices are distinct and positive")
}

/// Random grid vector with Kraft sum at most one (coordinates are dropped
/// until it is).
fn random_member(rng: &mut ChaCha8Rng, params: &Params, kind: BaseKind, max_support: usize, max_level: i32) -> GridVector {
    let one = BigRational::from_integer(1.into());
    loop {
        let mut y = random_grid(rng, params, kind, max_support, max_level);
        while kraft_sum(y.levels(), params.r) > one {
            let drop = y.min_index().expect("nonempty");
            let keep = y.support_set().into_iter().filter(|&i| i != drop).collect();
            y = y.restrict(&keep);
        }
        if !y.is_empty() {
            return y;
        }
    }
}

fn case(params: &Params, x: Value, detail: Value) -> Value {
    json!({"params": io::params_json(params), "input": x, "detail": detail})
}

fn params_suite(_: &mut ChaCha8Rng, _: usize) -> Outcome {
    let mut cases = 0;
    for &p in &[1.25, 1.5, 2.0, 3.0, 4.0] {
        for r in 2..=64u32 {
            let params = Params::new(p, r).map_err(|e| json!({"p": p, "r": r, "error": e.to_string()}))?;
            params.check_invariants().map_err(|e| json!({"p": p, "r": r, "error": e.to_string()}))?;
            cases += 1;
        }
    }
    Ok(cases)
}

fn quantize_suite(rng: &mut ChaCha8Rng, n: usize) -> Outcome {
    for _ in 0..n {
        let params = pick_params(rng);
        let x = random_vector(rng, &params, 12);
        let base = params.base(BaseKind::Alpha);
        let g = quantize_to_grid(&x, base).map_err(|e| case(&params, io::sparse_json(&x), json!(e.to_string())))?;
        for (i, v) in x.iter() {
            let ratio = g.coefficient(i) / v;
            let half = base.value.sqrt();
            if !(ratio > 0.0 && ratio >= (1.0 - 1e-12) / half && ratio <= half * (1.0 + 1e-12)) {
                return Err(case(&params, io::sparse_json(&x), json!({"index": i, "ratio": ratio})));
            }
        }
    }
    Ok(n)
}

fn jsplit_suite(rng: &mut ChaCha8Rng, n: usize) -> Outcome {
    for _ in 0..n {
        let params = pick_params(rng);
        let x = random_grid(rng, &params, BaseKind::Alpha, 16, 12);
        let parts = j_m_split(&x, &params).map_err(|e| case(&params, io::grid_json(&x), json!(e.to_string())))?;
        let union = GridVector::disjoint_sum(x.base(), &parts);
        let mass: f64 = parts.iter().map(|q| q.power_mass(params.p)).sum();
        let total = x.power_mass(params.p);
        if union.as_ref() != Ok(&x) || (mass - total).abs() > 1e-12 * total {
            return Err(case(&params, io::grid_json(&x), json!({"mass": mass, "total": total})));
        }
    }
    Ok(n)
}

fn classical_oracle_suite(rng: &mut ChaCha8Rng, n: usize) -> Outcome {
    for _ in 0..n {
        let params = pick_params(rng);
        let x = random_vector(rng, &params, 5);
        let err = |d: Value| case(&params, io::sparse_json(&x), d);
        let dp = classical_norm(&x, &params).map_err(|e| err(json!(e.to_string())))?;
        let o = classical_norm_oracle(&x, &params, x.len().saturating_sub(1), DEFAULT_TOL)
            .map_err(|e| err(json!(e.to_string())))?;
        if (dp.value - o.value).abs() > 1e-6 * (1.0 + o.value) {
            return Err(err(json!({"dp": dp.value, "oracle": o.value})));
        }
    }
    Ok(n)
}

fn modified_oracle_suite(rng: &mut ChaCha8Rng, n: usize) -> Outcome {
    for _ in 0..n {
        let params = pick_params(rng);
        let x = random_vector(rng, &params, 4);
        let err = |d: Value| case(&params, io::sparse_json(&x), d);
        let dp = modified_norm(&x, &params, DEFAULT_TOL).map_err(|e| err(json!(e.to_string())))?;
        let o = modified_norm_oracle(&x, &params, x.len().saturating_sub(1), DEFAULT_TOL)
            .map_err(|e| err(json!(e.to_string())))?;
        if (dp.value - o.value).abs() > 1e-6 * (1.0 + o.value) {
            return Err(err(json!({"dp": dp.value, "oracle": o.value})));
        }
    }
    Ok(n)
}

fn sandwich_suite(rng: &mut ChaCha8Rng, n: usize) -> Outcome {
    for _ in 0..n {
        let params = pick_params(rng);
        let x = random_vector(rng, &params, 20);
        let err = |d: Value| case(&params, io::sparse_json(&x), d);
        let c = classical_norm(&x, &params).map_err(|e| err(json!(e.to_string())))?.value;
        let m = modified_norm(&x, &params, DEFAULT_TOL).map_err(|e| err(json!(e.to_string())))?;
        let l = tsirelson::vector::lp_norm(&x, params.p).map_err(|e| err(json!(e.to_string())))?;
        let tol = DEFAULT_TOL;
        if !(approx_le(c, m.upper_bound, tol) && approx_le(m.value, l, tol) && approx_le(m.value, 3.0 * c, tol)) {
            return Err(err(json!({"classical": c, "modified": m.value, "lp": l})));
        }
    }
    Ok(n)
}

fn form_suite(rng: &mut ChaCha8Rng, n: usize) -> Outcome {
    for _ in 0..n {
        let params = pick_params(rng);
        let y = random_member(rng, &params, BaseKind::T, 20, 6);
        let err = |d: Value| case(&params, io::grid_json(&y), d);
        let cert = build_km_certificate(&y, &params).map_err(|e| err(json!(e.to_string())))?;
        let replay = verify_certificate(&cert, &params).map_err(|e| err(json!(e.to_string())))?;
        if replay != y {
            return Err(err(io::certificate_json(&cert)));
        }
        let heavy = random_grid(rng, &params, BaseKind::T, 20, 2);
        if kraft_sum(heavy.levels(), params.r) > BigRational::from_integer(1.into())
            && (km_membership(&heavy, &params) || build_km_certificate(&heavy, &params).is_ok())
        {
            return Err(case(&params, io::grid_json(&heavy), json!("non-member accepted")));
        }
    }
    Ok(n)
}

fn random_phi_sequence(rng: &mut ChaCha8Rng, params: &Params, max_len: usize) -> ExponentSeq {
    let one = BigRational::from_integer(1.into());
    loop {
        let len = rng.gen_range(1..=max_len);
        let m: Vec<i32> = (0..len).map(|_| rng.gen_range(0..=6)).collect();
        if phi_exact(&m, params.r) <= one {
            return ExponentSeq::new(m).expect("nonempty");
        }
    }
}

fn jacek_suite(rng: &mut ChaCha8Rng, n: usize) -> Outcome {
    for _ in 0..n {
        let params = pick_params(rng);
        let m = random_phi_sequence(rng, &params, 20);
        let err = |d: Value| case(&params, json!(m.as_slice()), d);
        let cert = build_k_certificate(&m, &params).map_err(|e| err(json!(e.to_string())))?;
        let replay = verify_certificate(&cert, &params).map_err(|e| err(json!(e.to_string())))?;
        if replay != v_map(&m, &params) {
            return Err(err(io::certificate_json(&cert)));
        }
    }
    Ok(n)
}

fn phi_suite(rng: &mut ChaCha8Rng, n: usize) -> Outcome {
    for _ in 0..n {
        let params = pick_params(rng);
        let len = rng.gen_range(3..=20);
        let m: Vec<i32> = (0..len).map(|_| rng.gen_range(0..=6)).collect();
        let i = rng.gen_range(1..len - 1);
        let whole = phi_exact(&m, params.r);
        let split = phi_exact(&m[..=i], params.r) + phi_exact(&m[i..], params.r);
        if whole != split {
            return Err(case(&params, json!(m), json!({"split_at": i})));
        }
    }
    Ok(n)
}

fn comparing1_suite(rng: &mut ChaCha8Rng, n: usize) -> Outcome {
    for _ in 0..n {
        let params = pick_params(rng);
        let x = random_member(rng, &params, BaseKind::S, 12, 5);
        let c = check_comparing1(&x, &params, DEFAULT_TOL).map_err(|e| case(&params, io::grid_json(&x), json!(e.to_string())))?;
        if !c.holds {
            return Err(case(&params, io::grid_json(&x), json!({"pairing": c.pairing, "norm": c.norm})));
        }
    }
    Ok(n)
}

fn comparing2_suite(rng: &mut ChaCha8Rng, n: usize) -> Outcome {
    for _ in 0..n {
        let params = pick_params(rng);
        let x = random_grid(rng, &params, BaseKind::S, 12, 4);
        let c = check_comparing2(&x, &params, DEFAULT_TOL).map_err(|e| case(&params, io::grid_json(&x), json!(e.to_string())))?;
        if !c.holds {
            return Err(case(&params, io::grid_json(&x), json!({"norm": c.norm, "bound": c.bound})));
        }
    }
    Ok(n)
}

fn approxim_suite(_: &mut ChaCha8Rng, _: usize) -> Outcome {
    let mut cases = 0;
    for &r in &[2u32, 4] {
        let params = Params::new(2.0, r).expect("valid");
        let eps = 0.01;
        let count = required_per_output(&params, eps);
        // e_n scaled to α^{-3/2} lands on α^{-2} e_n.
        let blocks: Vec<GridVector> = (1..=count)
            .map(|i| GridVector::from_entries(params.base(BaseKind::Alpha), [(i, GridEntry::new(Sign::Plus, -2))]).expect("valid"))
            .collect();
        let err = |d: String| json!({"r": r, "error": d});
        let seq = BlockSequence::new(blocks, &params).map_err(|e| err(e.to_string()))?;
        let a = approxim_construct(&seq, eps, 1, &params).map_err(|e| err(e.to_string()))?;
        cases += a.level_norms.iter().map(Vec::len).sum::<usize>();
    }
    Ok(cases)
}

fn stab_suite(rng: &mut ChaCha8Rng, n: usize) -> Outcome {
    let params = Params::new(2.0, 2).expect("valid");
    let config = PipelineConfig { trials: n.max(1), seed: rng.gen(), max_outputs: 4, ..PipelineConfig::default() };
    let basis = BasisSpec::Unit { count: required_per_output(&params, config.eps) * 4 };
    let report = stabilization_pipeline(&basis, &params, &config).map_err(|e| json!(e.to_string()))?;
    let summary = report.summary();
    if !summary.passed() {
        return Err(report.to_json(super::VERSION)["summary"].clone());
    }
    Ok(report.trials.len())
}
