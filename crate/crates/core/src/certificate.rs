//! Membership certificates for the norming sets.
//!
//! A certificate is a tree of closure-rule applications: leaves are signed
//! unit vectors `±e_n`, and a node with children `c_1, …, c_l` (`l ≤ r`)
//! stands for `t^{−1}(v_1 + ⋯ + v_l)`. In successive mode the children's
//! supports must be increasing blocks (the set `K_{q,r}`); in disjoint mode
//! they need only be pairwise disjoint (the set `K^M_{q,r}`). Evaluation is
//! carried out on exponents, so replaying a certificate is exact.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{kraft_cmp_one, kraft_residual_digits};
use crate::params::{BaseKind, Params};
use crate::vector::{GridEntry, GridVector, Sign};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Successive,
    Disjoint,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Successive => "successive",
            Mode::Disjoint => "disjoint",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CertNode {
    Leaf(Sign, usize),
    Children(Vec<CertNode>),
}

impl CertNode {
    pub fn depth(&self) -> usize {
        match self {
            CertNode::Leaf(..) => 0,
            CertNode::Children(c) => 1 + c.iter().map(CertNode::depth).max().unwrap_or(0),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            CertNode::Leaf(..) => 1,
            CertNode::Children(c) => c.iter().map(CertNode::leaf_count).sum(),
        }
    }

    /// Apply `map` to every leaf index.
    pub fn map_indices<F: Fn(usize) -> usize + Copy>(&self, map: F) -> CertNode {
        match self {
            CertNode::Leaf(s, i) => CertNode::Leaf(*s, map(*i)),
            CertNode::Children(c) => CertNode::Children(c.iter().map(|n| n.map_indices(map)).collect()),
        }
    }

    /// Apply `sign_of` to every leaf.
    pub fn with_signs<F: Fn(usize) -> Sign + Copy>(&self, sign_of: F) -> CertNode {
        match self {
            CertNode::Leaf(_, i) => CertNode::Leaf(sign_of(*i), *i),
            CertNode::Children(c) => CertNode::Children(c.iter().map(|n| n.with_signs(sign_of)).collect()),
        }
    }

    /// Wrap in `times` single-child nodes (a pure `t^{−times}` rescaling).
    pub fn rescaled(self, times: usize) -> CertNode {
        (0..times).fold(self, |node, _| CertNode::Children(vec![node]))
    }

    /// Drop leaves failing `keep`; nodes left without children disappear.
    fn prune<F: Fn(usize) -> bool + Copy>(self, keep: F) -> Option<CertNode> {
        match self {
            CertNode::Leaf(_, i) => keep(i).then_some(self),
            CertNode::Children(c) => {
                let kept: Vec<CertNode> = c.into_iter().filter_map(|n| n.prune(keep)).collect();
                (!kept.is_empty()).then_some(CertNode::Children(kept))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub mode: Mode,
    pub node: CertNode,
}

/// Location (child indices from the root) and nature of the first rule
/// violation found while replaying a certificate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertificateError {
    pub path: Vec<usize>,
    pub kind: Violation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoChildren,
    TooManyChildren { count: usize, r: u32 },
    OrderingViolation { child: usize },
    Overlap { index: usize },
    ZeroIndex,
}

impl fmt::Display for CertificateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "node {:?}: ", self.path)?;
        match &self.kind {
            Violation::NoChildren => write!(f, "internal node without children"),
            Violation::TooManyChildren { count, r } => {
                write!(f, "{count} children exceed the limit r = {r}")
            }
            Violation::OrderingViolation { child } => {
                write!(f, "ordering violation: child {child} does not follow its predecessor")
            }
            Violation::Overlap { index } => write!(f, "children overlap at index {index}"),
            Violation::ZeroIndex => write!(f, "leaf index 0 (indices are 1-based)"),
        }
    }
}

impl std::error::Error for CertificateError {}

/// Replay the closure rules bottom-up and return the root vector.
pub fn verify_certificate(cert: &Certificate, params: &Params) -> std::result::Result<GridVector, CertificateError> {
    let mut path = Vec::new();
    evaluate(&cert.node, cert.mode, params, &mut path)
}

fn evaluate(
    node: &CertNode,
    mode: Mode,
    params: &Params,
    path: &mut Vec<usize>,
) -> std::result::Result<GridVector, CertificateError> {
    let base = params.base(BaseKind::T);
    let fail = |path: &Vec<usize>, kind| CertificateError { path: path.clone(), kind };
    match node {
        CertNode::Leaf(sign, index) => {
            if *index == 0 {
                return Err(fail(path, Violation::ZeroIndex));
            }
            let mut v = GridVector::new(base);
            v.insert(*index, GridEntry::new(*sign, 0));
            Ok(v)
        }
        CertNode::Children(children) => {
            if children.is_empty() {
                return Err(fail(path, Violation::NoChildren));
            }
            if children.len() > params.r as usize {
                return Err(fail(path, Violation::TooManyChildren { count: children.len(), r: params.r }));
            }
            let mut out = GridVector::new(base);
            let mut last_max = 0usize;
            for (k, child) in children.iter().enumerate() {
                path.push(k);
                let v = evaluate(child, mode, params, path)?;
                path.pop();
                if mode == Mode::Successive && k > 0 && v.min_index().is_some_and(|lo| lo <= last_max) {
                    return Err(fail(path, Violation::OrderingViolation { child: k }));
                }
                last_max = last_max.max(v.max_index().unwrap_or(0));
                for (i, e) in v.iter() {
                    if out.insert(i, GridEntry::new(e.sign, e.exp - 1)).is_some() {
                        return Err(fail(path, Violation::Overlap { index: i }));
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Membership in `K^M_{q,r}`: entries in `C_t` and Kraft sum at most one,
/// decided in exact arithmetic.
pub fn km_membership(y: &GridVector, params: &Params) -> bool {
    if y.base().kind != Some(BaseKind::T) {
        return false;
    }
    kraft_cmp_one(y.levels(), params.r) != Ordering::Greater
}

/// Output of [`claim_decompose`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClaimDecomposition {
    /// Support indices by nondecreasing level (ties by index): the
    /// arrangement in which the parts are successive blocks.
    pub order: Vec<usize>,
    /// `r` parts, each of `ℓ_q` norm exactly `t^{−1}`.
    pub parts: Vec<GridVector>,
}

/// Split a vector of `ℓ_q` norm exactly one into `r` parts of norm `t^{−1}`
/// that are successive once coordinates are sorted by magnitude.
///
/// Follows the induction on the deepest level: the bottom level has a
/// multiple of `r` coordinates, groups of `r` are collapsed into one
/// coordinate a level higher, the shorter vector is decomposed, and every
/// collapsed coordinate is expanded back into its group.
pub fn claim_decompose(x: &GridVector, params: &Params) -> Result<ClaimDecomposition> {
    if x.base().kind != Some(BaseKind::T) {
        return Err(Error::InvalidVector("expected a t-grid vector".into()));
    }
    if kraft_cmp_one(x.levels(), params.r) != Ordering::Equal {
        return Err(Error::Precondition("claim decomposition needs ‖x‖_q = 1 exactly".into()));
    }
    let mut sorted: Vec<(usize, GridEntry)> = x.iter().collect();
    sorted.sort_by_key(|&(i, e)| (e.level(), i));
    if sorted[0].1.level() == 0 {
        return Err(Error::Precondition(
            "x is a signed unit vector (n(x) = 0); it needs no decomposition".into(),
        ));
    }
    let levels: Vec<u32> = sorted.iter().map(|(_, e)| e.level() as u32).collect();
    let ranges = claim_ranges(&levels, params.r as usize);
    let base = x.base();
    let parts = ranges
        .into_iter()
        .map(|(lo, hi)| {
            GridVector::from_entries(base, sorted[lo..hi].iter().copied())
                .expect("indices are distinct")
        })
        .collect();
    Ok(ClaimDecomposition { order: sorted.iter().map(|&(i, _)| i).collect(), parts })
}

/// Position ranges `[lo, hi)` of the `r` blocks for sorted levels (all ≥ 1)
/// with Kraft sum exactly one.
fn claim_ranges(levels: &[u32], r: usize) -> Vec<(usize, usize)> {
    let deepest = *levels.last().expect("nonempty");
    if deepest == 1 {
        assert_eq!(levels.len(), r, "level-1 vector of unit norm has exactly r entries");
        return (0..r).map(|k| (k, k + 1)).collect();
    }
    let upper = levels.partition_point(|&l| l < deepest);
    let bottom = levels.len() - upper;
    assert!(bottom.is_multiple_of(r), "bottom level of a unit-norm vector must have a multiple of r entries");
    let groups = bottom / r;
    let mut collapsed = levels[..upper].to_vec();
    collapsed.extend(std::iter::repeat_n(deepest - 1, groups));
    let expand_start = |u: usize| if u < upper { u } else { upper + (u - upper) * r };
    let expand_end = |u: usize| if u < upper { u + 1 } else { upper + (u - upper + 1) * r };
    claim_ranges(&collapsed, r)
        .into_iter()
        .map(|(lo, hi)| (expand_start(lo), expand_end(hi - 1)))
        .collect()
}

/// Disjoint-mode certificate for a member of `K^M_{q,r}`.
///
/// The vector is first padded beyond its support to `ℓ_q` norm one (the
/// residual budget is written in base `r`), decomposed recursively with
/// [`claim_decompose`], and the padding leaves are pruned at the end.
pub fn build_km_certificate(y: &GridVector, params: &Params) -> Result<Certificate> {
    if y.is_empty() {
        return Err(Error::InvalidVector("the zero vector has no certificate".into()));
    }
    if !km_membership(y, params) {
        return Err(Error::NotMember("Kraft sum exceeds one or the base is not t".into()));
    }
    let levels = y.levels();
    let pads = kraft_residual_digits(&levels, params.r).expect("member has residual ≥ 0");
    let first_pad = y.max_index().expect("nonempty") + 1;
    let mut entries: Vec<(usize, Sign, u32)> =
        y.iter().map(|(i, e)| (i, e.sign, e.level() as u32)).collect();
    let mut next = first_pad;
    for (level, count) in pads {
        for _ in 0..count {
            entries.push((next, Sign::Plus, level as u32));
            next += 1;
        }
    }
    entries.sort_by_key(|&(i, _, l)| (l, i));
    let node = unit_norm_tree(&entries, params.r as usize)
        .prune(|i| i < first_pad)
        .expect("original support survives pruning");
    let cert = Certificate { mode: Mode::Disjoint, node };
    let replay = verify_certificate(&cert, params)?;
    if replay != *y {
        return Err(Error::Construction("certificate does not replay to the input".into()));
    }
    Ok(cert)
}

/// Tree for sorted entries of Kraft sum exactly one.
fn unit_norm_tree(entries: &[(usize, Sign, u32)], r: usize) -> CertNode {
    if let [(i, sign, 0)] = entries {
        return CertNode::Leaf(*sign, *i);
    }
    let levels: Vec<u32> = entries.iter().map(|e| e.2).collect();
    let children = claim_ranges(&levels, r)
        .into_iter()
        .map(|(lo, hi)| {
            let lifted: Vec<(usize, Sign, u32)> =
                entries[lo..hi].iter().map(|&(i, s, l)| (i, s, l - 1)).collect();
            unit_norm_tree(&lifted, r)
        })
        .collect();
    CertNode::Children(children)
}

/// Result of [`enumerate_k`].
#[derive(Debug, Clone, PartialEq)]
pub struct Enumeration {
    /// Distinct members, sorted.
    pub vectors: Vec<GridVector>,
    /// Set when `cap` stopped the enumeration early.
    pub truncated: bool,
}

pub const ENUMERATION_MAX_SUPPORT: usize = 8;
pub const ENUMERATION_MAX_DEPTH: usize = 10;

/// All members of the norming set (in the given mode) supported inside
/// `support` whose certificate has depth at most `depth`.
///
/// At most `cap` vectors are produced; `truncated` reports whether the cap
/// was hit.
pub fn enumerate_k(
    support: &BTreeSet<usize>,
    depth: usize,
    mode: Mode,
    params: &Params,
    cap: usize,
) -> Result<Enumeration> {
    if support.len() > ENUMERATION_MAX_SUPPORT {
        return Err(Error::SupportTooLarge { size: support.len(), limit: ENUMERATION_MAX_SUPPORT });
    }
    if depth > ENUMERATION_MAX_DEPTH {
        return Err(Error::InvalidArgument(format!(
            "enumeration depth {depth} exceeds {ENUMERATION_MAX_DEPTH}"
        )));
    }
    if support.contains(&0) {
        return Err(Error::InvalidVector("indices are 1-based".into()));
    }
    let index: Vec<usize> = support.iter().copied().collect();
    let n = index.len();
    let r = params.r as usize;

    // Unsigned patterns: level per rank, u8::MAX = absent.
    type Pattern = Vec<u8>;
    let mut truncated = false;
    let mut known: HashSet<Pattern> = HashSet::new();
    let mut current: Vec<Pattern> = Vec::new();
    for k in 0..n {
        let mut p = vec![u8::MAX; n];
        p[k] = 0;
        known.insert(p.clone());
        current.push(p);
    }
    let mask_of = |p: &Pattern| p.iter().enumerate().filter(|(_, &l)| l != u8::MAX).fold(0u32, |m, (k, _)| m | 1 << k);
    for _ in 0..depth {
        let members: Vec<(u32, Pattern)> = current.iter().map(|p| (mask_of(p), p.clone())).collect();
        let mut fresh: Vec<Pattern> = Vec::new();
        let mut chosen: Vec<usize> = Vec::new();
        combine(&members, mode, r, 0, 0, &mut chosen, &mut |picked: &[usize]| {
            let mut out = vec![u8::MAX; n];
            for &m in picked {
                for (k, &l) in members[m].1.iter().enumerate() {
                    if l != u8::MAX {
                        out[k] = l + 1;
                    }
                }
            }
            if known.len() >= cap {
                truncated = true;
                return false;
            }
            if known.insert(out.clone()) {
                fresh.push(out);
            }
            true
        });
        if fresh.is_empty() || truncated {
            current.extend(fresh);
            break;
        }
        current.extend(fresh);
    }

    let base = params.base(BaseKind::T);
    let mut vectors: Vec<GridVector> = Vec::new();
    let mut patterns: Vec<&Pattern> = known.iter().collect();
    patterns.sort();
    'outer: for p in patterns {
        let used: Vec<usize> = (0..n).filter(|&k| p[k] != u8::MAX).collect();
        for signs in 0u32..(1 << used.len()) {
            if vectors.len() >= cap {
                truncated = true;
                break 'outer;
            }
            let entries = used.iter().enumerate().map(|(b, &k)| {
                let sign = if signs >> b & 1 == 1 { Sign::Minus } else { Sign::Plus };
                (index[k], GridEntry::new(sign, -i32::from(p[k])))
            });
            vectors.push(GridVector::from_entries(base, entries)?);
        }
    }
    vectors.sort_by(|a, b| {
        let ka: Vec<(usize, GridEntry)> = a.iter().collect();
        let kb: Vec<(usize, GridEntry)> = b.iter().collect();
        ka.cmp(&kb)
    });
    Ok(Enumeration { vectors, truncated })
}

/// Enumerate admissible tuples of members (by position in `members`):
/// successive tuples have increasing blocks, disjoint tuples have disjoint
/// masks ordered by least element. `visit` returns false to stop.
fn combine(
    members: &[(u32, Vec<u8>)],
    mode: Mode,
    r: usize,
    used_mask: u32,
    start: usize,
    chosen: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]) -> bool,
) -> bool {
    for m in start..members.len() {
        let mask = members[m].0;
        let admissible = match mode {
            Mode::Successive => {
                used_mask == 0 || mask.trailing_zeros() >= 32 - used_mask.leading_zeros()
            }
            Mode::Disjoint => {
                mask & used_mask == 0
                    && chosen.last().is_none_or(|&prev| mask.trailing_zeros() > members[prev].0.trailing_zeros())
            }
        };
        if !admissible {
            continue;
        }
        chosen.push(m);
        if !visit(chosen) {
            return false;
        }
        if chosen.len() < r && !combine(members, mode, r, used_mask | mask, 0, chosen, visit) {
            return false;
        }
        chosen.pop();
    }
    true
}
