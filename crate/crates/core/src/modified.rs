//! The modified norm `|x|_{p,r}`, whose splits use at most `r` pairwise
//! disjoint pieces.
//!
//! Its norming set is exactly the set of vectors with entries `±t^{−j}`
//! (`j ≥ 0`) and `ℓ_q` norm at most one, i.e. with Kraft sum
//! `Σ r^{−j(i)} ≤ 1`. Evaluating the norm therefore means choosing a level
//! for every coordinate so as to maximise `Σ |x(i)|·t^{−j(i)}` under the
//! Kraft inequality. Levels are capped at `J` with `‖x‖_1·t^{−J} ≤ tol`.
//!
//! After sorting `|x|` in decreasing order an optimal assignment can use
//! nondecreasing levels, and a Kraft-feasible assignment is the same as a
//! walk down a complete `r`-ary tree: at level `j` there are `c` free nodes,
//! each either takes the next coordinate or is split into `r` nodes of level
//! `j + 1`. The solver is a dynamic program over (level, position, free
//! nodes), with free nodes capped by the number of coordinates left and
//! counted in exact integers.

use std::collections::BTreeMap;

use crate::classical::{subset_recursion, OracleValue};
use crate::error::{Error, Result};
use crate::params::{BaseKind, Params};
use crate::vector::{dual_pair, GridEntry, GridVector, Sign, SparseVector};

/// Largest support handled by the set-partition oracle.
pub const ORACLE_MAX_SUPPORT: usize = 6;

/// Largest number of decision bits the solver will store.
const MAX_DECISION_BITS: usize = 1 << 33;

/// Optimal level per used coordinate (unlisted coordinates are unused).
#[derive(Debug, Clone, PartialEq)]
pub struct LevelAssignment {
    pub levels: BTreeMap<usize, u32>,
    /// `Σ |x(i)|·t^{−j(i)}` over used coordinates.
    pub value: f64,
    /// Upper bound on the mass lost by the level cap.
    pub slack: f64,
    /// Deepest level the search allowed.
    pub level_cap: u32,
}

impl LevelAssignment {
    /// The norming functional `y(i) = sign(x(i))·t^{−j(i)}`.
    pub fn functional(&self, x: &SparseVector, params: &Params) -> GridVector {
        let mut y = GridVector::new(params.base(BaseKind::T));
        for (&i, &j) in &self.levels {
            y.insert(i, GridEntry::new(Sign::of(x.get(i)), -(j as i32)));
        }
        y
    }

    /// Exact Kraft check `Σ r^{−j(i)} ≤ 1`.
    pub fn is_kraft_feasible(&self, params: &Params) -> bool {
        crate::exact::kraft_cmp_one(self.levels.values().map(|&j| j as i32), params.r)
            != std::cmp::Ordering::Greater
    }
}

/// Value of `|x|_{p,r}` and its optimal level assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedNorm {
    /// Guaranteed lower bound on the norm.
    pub value: f64,
    /// `value + slack` bounds the norm from above.
    pub upper_bound: f64,
    pub witness: LevelAssignment,
}

/// Smallest `J ≥ 0` with `l1·t^{−J} ≤ tol`.
pub fn level_cap(l1: f64, t: f64, tol: f64) -> u32 {
    if l1 <= tol {
        return 0;
    }
    let j = ((l1 / tol).ln() / t.ln()).ceil();
    let mut j = j.max(0.0) as u32;
    while l1 * t.powf(-(j as f64)) > tol {
        j += 1;
    }
    j
}

/// Compute `|x|_{p,r}` within `tol`.
pub fn modified_norm(x: &SparseVector, params: &Params, tol: f64) -> Result<ModifiedNorm> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let mut order: Vec<(usize, f64)> = x.iter().map(|(i, v)| (i, v.abs())).collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let n = order.len();
    let l1 = x.l1_norm();
    let cap = level_cap(l1, params.t, tol);
    let slack = l1 * params.t.powf(-(f64::from(cap) + 1.0));
    if n == 0 {
        let witness = LevelAssignment { levels: BTreeMap::new(), value: 0.0, slack: 0.0, level_cap: cap };
        return Ok(ModifiedNorm { value: 0.0, upper_bound: 0.0, witness });
    }
    let values: Vec<f64> = order.iter().map(|&(_, v)| v).collect();
    let sorted_levels = LevelDp::new(&values, params, cap)?.solve();

    let weights: Vec<f64> = (0..=cap).map(|j| params.t.powf(-f64::from(j))).collect();
    let mut value = 0.0;
    let mut levels = BTreeMap::new();
    for (k, level) in sorted_levels.iter().enumerate() {
        if let Some(j) = *level {
            value += values[k] * weights[j as usize];
            levels.insert(order[k].0, j);
        }
    }
    let witness = LevelAssignment { levels, value, slack, level_cap: cap };
    debug_assert!(witness.is_kraft_feasible(params));
    debug_assert!({
        let y = witness.functional(x, params).to_sparse();
        (dual_pair(x, &y) - value).abs() <= 1e-12 * value.max(1.0)
    });
    Ok(ModifiedNorm { value, upper_bound: value + slack, witness })
}

/// `(level, position, free nodes)` dynamic program on sorted magnitudes.
struct LevelDp<'a> {
    values: &'a [f64],
    r: usize,
    cap: u32,
    weights: Vec<f64>,
    /// Start of row `i` in a triangular layer (`c ∈ 0..=n−i`).
    row_start: Vec<usize>,
    layer_len: usize,
}

impl<'a> LevelDp<'a> {
    fn new(values: &'a [f64], params: &Params, cap: u32) -> Result<Self> {
        let n = values.len();
        let mut row_start = Vec::with_capacity(n + 1);
        let mut acc = 0usize;
        for i in 0..=n {
            row_start.push(acc);
            acc += n - i + 1;
        }
        let bits = acc.saturating_mul(cap as usize + 1);
        if bits > MAX_DECISION_BITS {
            return Err(Error::Budget(format!(
                "modified norm search needs {bits} decision bits (limit {MAX_DECISION_BITS}); \
                 raise tol or shrink the support"
            )));
        }
        Ok(LevelDp {
            values,
            r: params.r as usize,
            cap,
            weights: (0..=cap).map(|j| params.t.powf(-f64::from(j))).collect(),
            row_start,
            layer_len: acc,
        })
    }

    fn at(&self, i: usize, c: usize) -> usize {
        self.row_start[i] + c
    }

    /// Level per sorted position, `None` for unused coordinates.
    fn solve(&self) -> Vec<Option<u32>> {
        let n = self.values.len();
        let layers = self.cap as usize + 1;
        let words = self.layer_len.div_ceil(64);
        let mut place_bits = vec![0u64; words * layers];
        let mut deeper = vec![0.0f64; self.layer_len];
        let mut here = vec![0.0f64; self.layer_len];
        for j in (0..layers).rev() {
            let w = self.weights[j];
            let bits = &mut place_bits[j * words..(j + 1) * words];
            for i in (0..=n).rev() {
                let room = n - i;
                for c in 0..=room {
                    let advance = if j + 1 < layers && c > 0 {
                        deeper[self.at(i, (c.saturating_mul(self.r)).min(room))]
                    } else {
                        0.0
                    };
                    let mut best = advance;
                    if c > 0 && i < n {
                        let place = self.values[i] * w + here[self.at(i + 1, c - 1)];
                        if place >= advance {
                            best = place;
                            let k = self.at(i, c);
                            bits[k / 64] |= 1 << (k % 64);
                        }
                    }
                    here[self.at(i, c)] = best;
                }
            }
            std::mem::swap(&mut deeper, &mut here);
        }

        let mut levels = vec![None; n];
        let (mut j, mut i, mut c) = (0usize, 0usize, 1usize.min(n));
        while i < n && c > 0 && j < layers {
            let k = self.at(i, c);
            if place_bits[j * words + k / 64] >> (k % 64) & 1 == 1 {
                levels[i] = Some(j as u32);
                i += 1;
                c -= 1;
            } else {
                j += 1;
                c = c.saturating_mul(self.r).min(n - i);
            }
        }
        levels
    }
}

/// Depth-truncated recursion `max{‖x‖_∞, t^{−1}·sup Σ |F_i x|}` over
/// families of at most `r` pairwise disjoint nonempty subsets of the
/// support.
pub fn modified_norm_oracle(x: &SparseVector, params: &Params, depth: usize, tol: f64) -> Result<OracleValue> {
    let n = x.len();
    if n > ORACLE_MAX_SUPPORT {
        return Err(Error::SupportTooLarge { size: n, limit: ORACLE_MAX_SUPPORT });
    }
    let values: Vec<f64> = x.values().iter().map(|v| v.abs()).collect();
    let value = subset_recursion(&values, params, depth, disjoint_families);
    let slack = x.l1_norm() * params.t.powf(-(depth as f64));
    Ok(OracleValue { value, slack, depth, within_tol: slack <= tol })
}

/// All families of 1..=r pairwise disjoint nonempty subsets of `mask`,
/// each family listed once (blocks ordered by their least element).
fn disjoint_families(mask: u32, r: usize, emit: &mut dyn FnMut(&[u32])) {
    let bits: Vec<u32> = (0..32).filter(|&k| mask >> k & 1 == 1).collect();
    fn walk(bits: &[u32], r: usize, blocks: &mut Vec<u32>, emit: &mut dyn FnMut(&[u32])) {
        let Some((&bit, rest)) = bits.split_first() else {
            if !blocks.is_empty() {
                emit(blocks);
            }
            return;
        };
        walk(rest, r, blocks, emit);
        for k in 0..blocks.len() {
            blocks[k] |= 1 << bit;
            walk(rest, r, blocks, emit);
            blocks[k] &= !(1 << bit);
        }
        if blocks.len() < r {
            blocks.push(1 << bit);
            walk(rest, r, blocks, emit);
            blocks.pop();
        }
    }
    let mut blocks = Vec::with_capacity(r);
    walk(&bits, r, &mut blocks, emit);
}

fn require_t_base(x: &GridVector) -> Result<()> {
    if x.base().kind != Some(BaseKind::T) {
        return Err(Error::InvalidVector("expected a t-grid vector".into()));
    }
    Ok(())
}

/// `n(x)`: the smallest level `j` with `|x(i)| = t^{−j}` for some `i`.
pub fn min_level(x: &GridVector) -> Result<i32> {
    require_t_base(x)?;
    x.iter()
        .map(|(_, e)| e.level())
        .min()
        .ok_or_else(|| Error::InvalidVector("level of the empty vector".into()))
}

/// `m(x)`: the largest level present.
pub fn max_level(x: &GridVector) -> Result<i32> {
    require_t_base(x)?;
    x.iter()
        .map(|(_, e)| e.level())
        .max()
        .ok_or_else(|| Error::InvalidVector("level of the empty vector".into()))
}
