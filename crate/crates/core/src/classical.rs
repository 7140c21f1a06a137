//! The classical norm `‖x‖_{p,r}`, whose splits use at most `r`
//! successive pieces.
//!
//! The implicit equation is solved by dynamic programming over intervals of
//! the ordered support. Any admissible family `E_1 < ⋯ < E_l` can be widened
//! to consecutive intervals tiling the support hull without lowering the sum
//! (the norm is 1-unconditional and monotone under restriction), so only
//! interval tilings need to be searched. Gaps between support indices play no
//! role, so coordinates are compressed to ranks first.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Params;
use crate::vector::SparseVector;

/// Largest DP table (intervals × parts) the solver will allocate.
const MAX_TABLE_ENTRIES: usize = 1 << 26;

/// Largest support handled by the brute-force oracle.
pub const ORACLE_MAX_SUPPORT: usize = 8;

/// Optimal split tree for one interval of the support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitTree {
    /// First and last support index covered by this node.
    pub interval: (usize, usize),
    pub value: f64,
    #[serde(flatten)]
    pub node: SplitNode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitNode {
    /// The sup-norm branch wins; `index` attains the maximum on the interval.
    Leaf(usize),
    /// `t^{−1}` times the sum over 2..=r consecutive sub-intervals wins.
    Children(Vec<SplitTree>),
}

impl SplitTree {
    /// Recompute the value bottom-up from the coefficients of `x`.
    pub fn evaluate(&self, x: &SparseVector, params: &Params) -> f64 {
        match &self.node {
            SplitNode::Leaf(i) => x.get(*i).abs(),
            SplitNode::Children(children) => {
                let (lo, hi) = self.interval;
                let sup = x
                    .iter()
                    .filter(|(i, _)| (lo..=hi).contains(i))
                    .fold(0.0f64, |m, (_, v)| m.max(v.abs()));
                let sum = children
                    .iter()
                    .rev()
                    .map(|c| c.evaluate(x, params) / params.t)
                    .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| v + a)))
                    .unwrap_or(0.0);
                sup.max(sum)
            }
        }
    }

    /// Check the structural invariants: children tile the parent interval
    /// with consecutive nonempty pieces, and there are between 2 and `r`.
    pub fn is_well_formed(&self, x: &SparseVector, params: &Params) -> bool {
        match &self.node {
            SplitNode::Leaf(i) => {
                let (lo, hi) = self.interval;
                (lo..=hi).contains(i) && x.get(*i) != 0.0
            }
            SplitNode::Children(children) => {
                if children.len() < 2 || children.len() > params.r as usize {
                    return false;
                }
                let support: Vec<usize> = x
                    .support()
                    .filter(|i| (self.interval.0..=self.interval.1).contains(i))
                    .collect();
                let mut cursor = 0usize;
                for child in children {
                    let Some(&first) = support.get(cursor) else { return false };
                    if child.interval.0 != first {
                        return false;
                    }
                    let len = support[cursor..]
                        .iter()
                        .take_while(|&&i| i <= child.interval.1)
                        .count();
                    if len == 0 || !child.is_well_formed(x, params) {
                        return false;
                    }
                    cursor += len;
                }
                cursor == support.len() && support.last() == Some(&self.interval.1)
            }
        }
    }
}

/// Value of `‖x‖_{p,r}` together with an optimal split tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalNorm {
    pub value: f64,
    /// `None` for the zero vector.
    pub witness: Option<SplitTree>,
}

/// Compute `‖x‖_{p,r}` exactly (up to rounding) in `O(n³·r)` time.
///
/// Ties between optimal splits prefer the sup-norm branch, then fewer
/// parts, then the leftmost first breakpoint.
pub fn classical_norm(x: &SparseVector, params: &Params) -> Result<ClassicalNorm> {
    let indices: Vec<usize> = x.support().collect();
    let values: Vec<f64> = x.values().iter().map(|v| v.abs()).collect();
    let n = values.len();
    if n == 0 {
        return Ok(ClassicalNorm { value: 0.0, witness: None });
    }
    let max_parts = (params.r as usize).min(n);
    if n * n * max_parts > MAX_TABLE_ENTRIES {
        return Err(Error::SupportTooLarge {
            size: n,
            limit: (MAX_TABLE_ENTRIES / max_parts).isqrt(),
        });
    }
    let table = IntervalTable::solve(&values, params.t, max_parts);
    let witness = table.tree(&indices, 0, n - 1);
    Ok(ClassicalNorm { value: table.norm(0, n - 1), witness: Some(witness) })
}

/// DP tables over rank intervals `[a, b]`.
struct IntervalTable {
    n: usize,
    max_parts: usize,
    /// `N(a, b)`.
    norm: Vec<f64>,
    /// 0 for the sup-norm branch, otherwise the number of parts.
    parts: Vec<u32>,
    /// Leftmost maximiser of `|x|` on `[a, b]`.
    argmax: Vec<u32>,
    /// `P(a, b, l)` for `l ≥ 2`: best `Σ t^{−1}·N(E_k)` over tilings of
    /// `[a, b]` by exactly `l` intervals, with the end of the first interval.
    tiling: Vec<f64>,
    first_cut: Vec<u32>,
}

impl IntervalTable {
    fn solve(values: &[f64], t: f64, max_parts: usize) -> Self {
        let n = values.len();
        let extra = max_parts.saturating_sub(1);
        let mut tab = IntervalTable {
            n,
            max_parts,
            norm: vec![0.0; n * n],
            parts: vec![0; n * n],
            argmax: vec![0; n * n],
            tiling: vec![f64::NEG_INFINITY; n * n * extra],
            first_cut: vec![0; n * n * extra],
        };
        // a descending, b ascending: every quantity read below lives on a
        // strictly shorter interval that is already final.
        for a in (0..n).rev() {
            let mut sup = 0.0f64;
            let mut arg = a;
            for b in a..n {
                if values[b] > sup {
                    sup = values[b];
                    arg = b;
                }
                let len = b - a + 1;
                for l in 2..=max_parts.min(len) {
                    let mut best = f64::NEG_INFINITY;
                    let mut cut = a;
                    for c in a..=(b + 1 - l) {
                        let rest = if l == 2 {
                            tab.norm(c + 1, b) / t
                        } else {
                            tab.tiling[tab.tiling_at(c + 1, b, l - 1)]
                        };
                        let v = tab.norm(a, c) / t + rest;
                        if v > best {
                            best = v;
                            cut = c;
                        }
                    }
                    let at = tab.tiling_at(a, b, l);
                    tab.tiling[at] = best;
                    tab.first_cut[at] = cut as u32;
                }
                let mut value = sup;
                let mut parts = 0u32;
                for l in 2..=max_parts.min(len) {
                    let v = tab.tiling[tab.tiling_at(a, b, l)];
                    if v > value {
                        value = v;
                        parts = l as u32;
                    }
                }
                let at = a * n + b;
                tab.norm[at] = value;
                tab.parts[at] = parts;
                tab.argmax[at] = arg as u32;
            }
        }
        tab
    }

    fn norm(&self, a: usize, b: usize) -> f64 {
        self.norm[a * self.n + b]
    }

    fn tiling_at(&self, a: usize, b: usize, l: usize) -> usize {
        debug_assert!(l >= 2 && l <= self.max_parts);
        (a * self.n + b) * (self.max_parts - 1) + (l - 2)
    }

    fn tree(&self, indices: &[usize], a: usize, b: usize) -> SplitTree {
        let at = a * self.n + b;
        let interval = (indices[a], indices[b]);
        let value = self.norm[at];
        let parts = self.parts[at] as usize;
        if parts == 0 {
            let leaf = indices[self.argmax[at] as usize];
            return SplitTree { interval, value, node: SplitNode::Leaf(leaf) };
        }
        let mut children = Vec::with_capacity(parts);
        let mut start = a;
        for l in (2..=parts).rev() {
            let cut = self.first_cut[self.tiling_at(start, b, l)] as usize;
            children.push(self.tree(indices, start, cut));
            start = cut + 1;
        }
        children.push(self.tree(indices, start, b));
        SplitTree { interval, value, node: SplitNode::Children(children) }
    }
}

/// Result of a depth-truncated norming-set search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleValue {
    /// Best pairing found; a lower bound on the norm.
    pub value: f64,
    /// Guaranteed bound on `norm − value`, `‖x‖_1·t^{−depth}`.
    pub slack: f64,
    pub depth: usize,
    /// Whether `slack ≤ tol`.
    pub within_tol: bool,
}

/// `sup ⟨x, z⟩` over members `z` of the successive norming set supported in
/// `supp x` and generated by at most `depth` applications of the closure
/// rule (single-member rescalings included).
///
/// Runs a memoised recursion over arbitrary subsets of the support, so it
/// does not rely on the interval reduction used by [`classical_norm`]. A tree
/// whose internal nodes all have two or more children has depth below the
/// support size, so `depth ≥ |supp x| − 1` already yields the exact supremum;
/// `slack` is the generic truncation bound regardless.
pub fn classical_norm_oracle(
    x: &SparseVector,
    params: &Params,
    depth: usize,
    tol: f64,
) -> Result<OracleValue> {
    let n = x.len();
    if n > ORACLE_MAX_SUPPORT {
        return Err(Error::SupportTooLarge { size: n, limit: ORACLE_MAX_SUPPORT });
    }
    let values: Vec<f64> = x.values().iter().map(|v| v.abs()).collect();
    let value = subset_recursion(&values, params, depth, successive_families);
    let slack = x.l1_norm() * params.t.powf(-(depth as f64));
    Ok(OracleValue { value, slack, depth, within_tol: slack <= tol })
}

/// Shared driver for the subset recursions of both oracles: `W_0(S)` is the
/// largest coefficient on `S`, and `W_d(S)` adds `t^{−1}·Σ W_{d−1}(E_i)` over
/// the families produced by `families`.
pub(crate) fn subset_recursion<F>(values: &[f64], params: &Params, depth: usize, families: F) -> f64
where
    F: Fn(u32, usize, &mut dyn FnMut(&[u32])),
{
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    let full = (1u32 << n) - 1;
    let sup: Vec<f64> = (0..=full)
        .map(|mask| {
            (0..n)
                .filter(|&k| mask >> k & 1 == 1)
                .fold(0.0f64, |m, k| m.max(values[k]))
        })
        .collect();
    let mut current = sup.clone();
    let r = params.r as usize;
    for _ in 0..depth {
        let mut next = current.clone();
        for mask in 1..=full {
            let mut best = 0.0f64;
            families(mask, r, &mut |blocks: &[u32]| {
                let s = blocks.iter().rev().fold(0.0, |acc, &b| current[b as usize] + acc);
                if s > best {
                    best = s;
                }
            });
            let v = best / params.t;
            if v > next[mask as usize] {
                next[mask as usize] = v;
            }
        }
        if next == current {
            break;
        }
        current = next;
    }
    current[full as usize]
}

/// All families `E_1 < ⋯ < E_l` (1 ≤ l ≤ r) of nonempty subsets of `mask`.
fn successive_families(mask: u32, r: usize, emit: &mut dyn FnMut(&[u32])) {
    let bits: Vec<u32> = (0..32).filter(|&k| mask >> k & 1 == 1).collect();
    let mut blocks: Vec<u32> = Vec::with_capacity(r);
    fn walk(bits: &[u32], r: usize, blocks: &mut Vec<u32>, emit: &mut dyn FnMut(&[u32])) {
        let Some((&bit, rest)) = bits.split_first() else {
            if !blocks.is_empty() {
                emit(blocks);
            }
            return;
        };
        // Skip this element.
        walk(rest, r, blocks, emit);
        // Extend the current block.
        if let Some(last) = blocks.last_mut() {
            *last |= 1 << bit;
            walk(rest, r, blocks, emit);
            *blocks.last_mut().unwrap() &= !(1 << bit);
        }
        // Open a new block.
        if blocks.len() < r {
            blocks.push(1 << bit);
            walk(rest, r, blocks, emit);
            blocks.pop();
        }
    }
    walk(&bits, r, &mut blocks, emit);
}
