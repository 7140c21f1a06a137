//! Generators and brute-force reference values shared by the integration
//! tests. The references recurse directly on the implicit equations over
//! subsets of the support, independently of the library solvers.

#![allow(dead_code)]

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tsirelson::vector::GridEntry;
use tsirelson::{BaseKind, GridVector, Params, Sign, SparseVector};

pub const PARAM_SET: [(f64, u32); 4] = [(2.0, 2), (2.0, 4), (1.5, 3), (3.0, 2)];

pub fn params(p: f64, r: u32) -> Params {
    Params::new(p, r).expect("valid parameters")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    tsirelson::rng::stream(seed, 0)
}

/// Random vector with `1..=max_support` entries at gappy increasing
/// indices; entries are `±t^{−j}` or uniform magnitudes, half and half.
pub fn random_vector(rng: &mut ChaCha8Rng, params: &Params, max_support: usize) -> SparseVector {
    let len = rng.gen_range(1..=max_support);
    let mut index = 0;
    let mut entries = Vec::new();
    for _ in 0..len {
        index += rng.gen_range(1..=4);
        let magnitude = if rng.gen_bool(0.5) {
            params.t.powi(-rng.gen_range(0..5))
        } else {
            rng.gen_range(0.001..1.0)
        };
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        entries.push((index, sign * magnitude));
    }
    SparseVector::from_entries(entries).unwrap()
}

pub fn random_grid(rng: &mut ChaCha8Rng, params: &Params, kind: BaseKind, support: usize, max_level: i32) -> GridVector {
    let mut index = 0;
    let mut entries = Vec::new();
    for _ in 0..support {
        index += rng.gen_range(1..=3);
        let sign = if rng.gen_bool(0.5) { Sign::Plus } else { Sign::Minus };
        entries.push((index, GridEntry::new(sign, -rng.gen_range(0..=max_level))));
    }
    GridVector::from_entries(params.base(kind), entries).unwrap()
}

/// `Σ r^{−level}` as an exact rational.
pub fn kraft(levels: &[i32], r: u32) -> BigRational {
    levels
        .iter()
        .map(|&l| {
            let p = BigInt::from(r).pow(l.unsigned_abs());
            if l >= 0 {
                BigRational::new(1.into(), p)
            } else {
                BigRational::from_integer(p)
            }
        })
        .sum()
}

pub fn one() -> BigRational {
    BigRational::from_integer(1.into())
}

/// Random grid vector with Kraft sum at most one: levels are drawn and
/// then deepened one step at a time at random positions until feasible.
pub fn random_member(rng: &mut ChaCha8Rng, params: &Params, kind: BaseKind, max_support: usize, max_level: i32) -> GridVector {
    loop {
        let len = rng.gen_range(1..=max_support);
        let mut levels: Vec<i32> = (0..len).map(|_| rng.gen_range(0..=max_level)).collect();
        while kraft(&levels, params.r) > one() {
            let shallow: Vec<usize> = (0..len).filter(|&k| levels[k] < max_level).collect();
            if shallow.is_empty() {
                break;
            }
            levels[shallow[rng.gen_range(0..shallow.len())]] += 1;
        }
        if kraft(&levels, params.r) > one() {
            continue;
        }
        let mut index = 0;
        let entries: Vec<(usize, GridEntry)> = levels
            .iter()
            .map(|&l| {
                index += rng.gen_range(1..=2);
                let sign = if rng.gen_bool(0.5) { Sign::Plus } else { Sign::Minus };
                (index, GridEntry::new(sign, -l))
            })
            .collect();
        return GridVector::from_entries(params.base(kind), entries).unwrap();
    }
}

/// `|v|` in index order.
fn magnitudes(x: &SparseVector) -> Vec<f64> {
    x.iter().map(|(_, v)| v.abs()).collect()
}

/// Families of at most `r` (and at least 2) nonempty subsets of `set`
/// given as labelings of its elements by `0` (unused) or a block number.
fn families(set: u32, r: usize, successive: bool, mut visit: impl FnMut(&[u32])) {
    let elems: Vec<u32> = (0..32).filter(|b| set & (1 << b) != 0).collect();
    let mut labels = vec![0usize; elems.len()];
    fn rec(k: usize, elems: &[u32], labels: &mut Vec<usize>, r: usize, successive: bool, visit: &mut dyn FnMut(&[u32])) {
        if k == elems.len() {
            let mut blocks = vec![0u32; r + 1];
            for (e, &l) in elems.iter().zip(labels.iter()) {
                blocks[l] |= 1 << e;
            }
            let used: Vec<u32> = blocks[1..].iter().copied().filter(|&b| b != 0).collect();
            if used.len() >= 2 {
                visit(&used);
            }
            return;
        }
        // In successive mode used labels are nondecreasing along the index
        // order, so blocks come out ordered.
        let floor = if successive { labels[..k].iter().copied().max().unwrap_or(0).max(1) } else { 1 };
        labels[k] = 0;
        rec(k + 1, elems, labels, r, successive, visit);
        for l in floor..=r {
            labels[k] = l;
            rec(k + 1, elems, labels, r, successive, visit);
        }
        labels[k] = 0;
    }
    rec(0, &elems, &mut labels, r, successive, &mut visit);
}

/// Exact norm by recursion on subsets: every block of an admissible
/// family with at least two blocks is a proper subset.
fn subset_norm(values: &[f64], params: &Params, successive: bool) -> f64 {
    let n = values.len();
    assert!(n <= 8, "reference oracle is exponential");
    let r = params.r as usize;
    let mut memo: HashMap<u32, f64> = HashMap::new();
    let mut order: Vec<u32> = (1..(1u32 << n)).collect();
    order.sort_by_key(|s| s.count_ones());
    for set in order {
        let sup = (0..n).filter(|&i| set & (1 << i) != 0).map(|i| values[i]).fold(0.0, f64::max);
        let mut best = 0.0f64;
        families(set, r, successive, |blocks| {
            let sum: f64 = blocks.iter().map(|b| memo[b]).sum();
            best = best.max(sum);
        });
        memo.insert(set, sup.max(best / params.t));
    }
    if n == 0 { 0.0 } else { memo[&((1u32 << n) - 1)] }
}

/// `‖x‖_{p,r}` by brute force (support ≤ 8).
pub fn reference_classical(x: &SparseVector, params: &Params) -> f64 {
    subset_norm(&magnitudes(x), params, true)
}

/// `|x|_{p,r}` by brute force (support ≤ 8).
pub fn reference_modified(x: &SparseVector, params: &Params) -> f64 {
    subset_norm(&magnitudes(x), params, false)
}

pub fn lp(x: &SparseVector, p: f64) -> f64 {
    x.iter().map(|(_, v)| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

/// `Φ(m)` straight from its definition.
pub fn reference_phi(m: &[i32], r: u32) -> BigRational {
    let w = |e: i32| kraft(&[e], r);
    match m.len() {
        0 => BigRational::from_integer(0.into()),
        1 => w(m[0]),
        n => {
            let inner: BigRational = m[1..n - 1].iter().map(|&e| w(e)).sum();
            w(m[0]) + inner * BigRational::from_integer(2.into()) + w(m[n - 1])
        }
    }
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + b.abs())
}
