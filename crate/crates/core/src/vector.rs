//! Finite-support vectors, grid vectors and the elementary operations on
//! them (ℓ_e norms, pairing, restriction, spreading, block checks,
//! quantization and the `J_m` level split).

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::params::{GridBase, Params};

/// Element of `c_00`: finitely many nonzero coefficients at 1-based indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    entries: BTreeMap<usize, f64>,
}

impl SparseVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build from `(index, value)` pairs. Zeros are dropped; index 0,
    /// non-finite values and repeated indices are rejected.
    pub fn from_entries<I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let mut map = BTreeMap::new();
        for (index, value) in entries {
            if index == 0 {
                return Err(Error::InvalidVector("indices are 1-based".into()));
            }
            if !value.is_finite() {
                return Err(Error::InvalidVector(format!(
                    "non-finite coefficient at index {index}"
                )));
            }
            if map.contains_key(&index) {
                return Err(Error::InvalidVector(format!("index {index} given twice")));
            }
            if value != 0.0 {
                map.insert(index, value);
            }
        }
        Ok(SparseVector { entries: map })
    }

    /// Coefficients placed at indices `1, 2, …`.
    pub fn from_dense(values: &[f64]) -> Result<Self> {
        Self::from_entries(values.iter().enumerate().map(|(i, &v)| (i + 1, v)))
    }

    /// Unit vector `e_index`.
    pub fn unit(index: usize) -> Result<Self> {
        Self::from_entries([(index, 1.0)])
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries.get(&index).copied().unwrap_or(0.0)
    }

    /// Set a coefficient; setting zero removes it.
    pub fn set(&mut self, index: usize, value: f64) -> Result<()> {
        if index == 0 || !value.is_finite() {
            return Err(Error::InvalidVector(format!(
                "cannot store {value} at index {index}"
            )));
        }
        if value == 0.0 {
            self.entries.remove(&index);
        } else {
            self.entries.insert(index, value);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().map(|(&i, &v)| (i, v))
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.keys().copied()
    }

    pub fn min_index(&self) -> Option<usize> {
        self.entries.keys().next().copied()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.entries.keys().next_back().copied()
    }

    /// Coefficients in support order.
    pub fn values(&self) -> Vec<f64> {
        self.entries.values().copied().collect()
    }

    pub fn abs(&self) -> SparseVector {
        SparseVector {
            entries: self.entries.iter().map(|(&i, &v)| (i, v.abs())).collect(),
        }
    }

    pub fn scale(&self, factor: f64) -> SparseVector {
        let mut out = SparseVector::new();
        for (i, v) in self.iter() {
            let w = v * factor;
            if w != 0.0 {
                out.entries.insert(i, w);
            }
        }
        out
    }

    /// `self + factor·other`.
    pub fn add_scaled(&self, other: &SparseVector, factor: f64) -> SparseVector {
        let mut out = self.entries.clone();
        for (i, v) in other.iter() {
            let w = out.get(&i).copied().unwrap_or(0.0) + factor * v;
            if w == 0.0 {
                out.remove(&i);
            } else {
                out.insert(i, w);
            }
        }
        SparseVector { entries: out }
    }

    /// `Σ |x(i)|^e` for finite `e`.
    pub fn power_mass(&self, e: f64) -> f64 {
        self.entries.values().map(|v| v.abs().powf(e)).sum()
    }

    pub fn sup_norm(&self) -> f64 {
        self.entries.values().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn l1_norm(&self) -> f64 {
        self.entries.values().map(|v| v.abs()).sum()
    }
}

/// ℓ_e norm; `e = f64::INFINITY` gives the sup-norm.
pub fn lp_norm(x: &SparseVector, e: f64) -> Result<f64> {
    if e.is_nan() || e < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "norm exponent must be ≥ 1 or ∞, got {e}"
        )));
    }
    if e.is_infinite() {
        return Ok(x.sup_norm());
    }
    if e == 1.0 {
        return Ok(x.l1_norm());
    }
    Ok(x.power_mass(e).powf(1.0 / e))
}

/// `⟨x, y⟩ = Σ x(i)·y(i)`.
pub fn dual_pair(x: &SparseVector, y: &SparseVector) -> f64 {
    let (small, large) = if x.len() <= y.len() { (x, y) } else { (y, x) };
    small
        .iter()
        .filter_map(|(i, v)| large.entries.get(&i).map(|w| v * w))
        .sum()
}

/// Restriction `E x`.
pub fn restrict(x: &SparseVector, set: &BTreeSet<usize>) -> SparseVector {
    SparseVector {
        entries: x
            .entries
            .iter()
            .filter(|(i, _)| set.contains(i))
            .map(|(&i, &v)| (i, v))
            .collect(),
    }
}

/// Spreading image `Σ a_n e_{φ(n)}`. The map is only consulted on the
/// support and must be strictly increasing there.
pub fn spread<F>(x: &SparseVector, map: F) -> Result<SparseVector>
where
    F: Fn(usize) -> usize,
{
    let mut out = BTreeMap::new();
    let mut last = 0usize;
    for (i, v) in x.iter() {
        let j = map(i);
        if j <= last {
            return Err(Error::InvalidArgument(format!(
                "spreading map is not strictly increasing at index {i} (maps to {j})"
            )));
        }
        last = j;
        out.insert(j, v);
    }
    Ok(SparseVector { entries: out })
}

/// `max supp x_k < min supp x_{k+1}` for consecutive nonempty vectors.
pub fn is_block(seq: &[SparseVector]) -> bool {
    let mut last = 0usize;
    for v in seq {
        if let (Some(lo), Some(hi)) = (v.min_index(), v.max_index()) {
            if lo <= last {
                return false;
            }
            last = hi;
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn of(value: f64) -> Sign {
        if value < 0.0 {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn from_i8(value: i8) -> Result<Sign> {
        match value {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            other => Err(Error::InvalidVector(format!("sign must be ±1, got {other}"))),
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// Coefficient `sign · β^exp` of a grid vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridEntry {
    pub sign: Sign,
    pub exp: i32,
}

impl GridEntry {
    pub fn new(sign: Sign, exp: i32) -> Self {
        GridEntry { sign, exp }
    }

    /// Nonnegative level `j` with `|coefficient| = β^{−j}`.
    pub fn level(&self) -> i32 {
        -self.exp
    }
}

/// Vector with entries in `C_β`, stored with exact integer exponents.
#[derive(Debug, Clone, PartialEq)]
pub struct GridVector {
    base: GridBase,
    entries: BTreeMap<usize, GridEntry>,
}

impl GridVector {
    pub fn new(base: GridBase) -> Self {
        GridVector { base, entries: BTreeMap::new() }
    }

    pub fn from_entries<I>(base: GridBase, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, GridEntry)>,
    {
        let mut out = GridVector::new(base);
        for (index, entry) in entries {
            if index == 0 {
                return Err(Error::InvalidVector("indices are 1-based".into()));
            }
            if out.entries.insert(index, entry).is_some() {
                return Err(Error::InvalidVector(format!("index {index} given twice")));
            }
        }
        Ok(out)
    }

    /// Positive entries `β^{−levels[k]}` at indices `1, 2, …`.
    pub fn from_levels(base: GridBase, levels: &[i32]) -> Self {
        GridVector {
            base,
            entries: levels
                .iter()
                .enumerate()
                .map(|(k, &l)| (k + 1, GridEntry::new(Sign::Plus, -l)))
                .collect(),
        }
    }

    pub fn base(&self) -> GridBase {
        self.base
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<GridEntry> {
        self.entries.get(&index).copied()
    }

    pub fn insert(&mut self, index: usize, entry: GridEntry) -> Option<GridEntry> {
        assert!(index >= 1, "indices are 1-based");
        self.entries.insert(index, entry)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, GridEntry)> + '_ {
        self.entries.iter().map(|(&i, &e)| (i, e))
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.keys().copied()
    }

    pub fn support_set(&self) -> BTreeSet<usize> {
        self.entries.keys().copied().collect()
    }

    pub fn min_index(&self) -> Option<usize> {
        self.entries.keys().next().copied()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.entries.keys().next_back().copied()
    }

    /// Levels `−exp` in increasing index order.
    pub fn levels(&self) -> Vec<i32> {
        self.entries.values().map(GridEntry::level).collect()
    }

    pub fn coefficient(&self, index: usize) -> f64 {
        self.get(index)
            .map(|e| e.sign.as_f64() * self.base.pow(e.exp))
            .unwrap_or(0.0)
    }

    pub fn to_sparse(&self) -> SparseVector {
        SparseVector {
            entries: self
                .entries
                .iter()
                .map(|(&i, e)| (i, e.sign.as_f64() * self.base.pow(e.exp)))
                .collect(),
        }
    }

    /// Multiply by `β^shift` (exact in exponent arithmetic).
    pub fn shift_exponents(&self, shift: i32) -> GridVector {
        GridVector {
            base: self.base,
            entries: self
                .entries
                .iter()
                .map(|(&i, e)| (i, GridEntry::new(e.sign, e.exp + shift)))
                .collect(),
        }
    }

    /// Sum of grid vectors with pairwise disjoint supports over one base.
    pub fn disjoint_sum<'a, I>(base: GridBase, parts: I) -> Result<GridVector>
    where
        I: IntoIterator<Item = &'a GridVector>,
    {
        let mut out = GridVector::new(base);
        for part in parts {
            if !part.base.same_grid(&base) {
                return Err(Error::InvalidVector("grid bases differ".into()));
            }
            for (i, e) in part.iter() {
                if out.entries.insert(i, e).is_some() {
                    return Err(Error::InvalidVector(format!(
                        "supports overlap at index {i}"
                    )));
                }
            }
        }
        Ok(out)
    }

    /// Restriction to a subset of indices.
    pub fn restrict(&self, set: &BTreeSet<usize>) -> GridVector {
        GridVector {
            base: self.base,
            entries: self
                .entries
                .iter()
                .filter(|(i, _)| set.contains(i))
                .map(|(&i, &e)| (i, e))
                .collect(),
        }
    }

    /// Re-index through a strictly increasing map of the support.
    pub fn relabel<F>(&self, map: F) -> Result<GridVector>
    where
        F: Fn(usize) -> usize,
    {
        let mut out = GridVector::new(self.base);
        let mut last = 0usize;
        for (i, e) in self.iter() {
            let j = map(i);
            if j <= last {
                return Err(Error::InvalidArgument(format!(
                    "relabeling is not strictly increasing at index {i}"
                )));
            }
            last = j;
            out.entries.insert(j, e);
        }
        Ok(out)
    }

    /// `Σ β^{e·exp}` over the support.
    pub fn power_mass(&self, e: f64) -> f64 {
        self.entries
            .values()
            .map(|g| self.base.value.powf(e * f64::from(g.exp)))
            .sum()
    }
}

/// Replace every coefficient by the nearest signed power of `base` in
/// logarithmic scale. Exact half-way cases go to the smaller magnitude, so
/// every coordinate satisfies `β^{−1/2} ≤ β^{j}/|x(i)| ≤ β^{1/2}`.
pub fn quantize_to_grid(x: &SparseVector, base: GridBase) -> Result<GridVector> {
    if !base.value.is_finite() || base.value <= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "grid base must be > 1, got {}",
            base.value
        )));
    }
    let ln_base = base.value.ln();
    let mut out = GridVector::new(base);
    for (i, v) in x.iter() {
        let log = v.abs().ln() / ln_base;
        let exp = (log - 0.5).ceil();
        if !exp.is_finite() || exp.abs() > f64::from(i32::MAX) {
            return Err(Error::InvalidVector(format!(
                "coefficient {v} at index {i} is out of grid range"
            )));
        }
        out.entries.insert(i, GridEntry::new(Sign::of(v), exp as i32));
    }
    Ok(out)
}

/// Split `x ∈ N_α` into `(J_0 x, …, J_{M−1} x)`: a coordinate `α^{j}` goes
/// to part `j mod M`, so that `α^{−m} J_m x` has entries in `C_s`.
pub fn j_m_split(x: &GridVector, params: &Params) -> Result<Vec<GridVector>> {
    let alpha = params.base(crate::params::BaseKind::Alpha);
    if !x.base.same_grid(&alpha) {
        return Err(Error::InvalidVector("J_m split needs an α-grid vector".into()));
    }
    let m = params.level_count as i32;
    let mut parts = vec![GridVector::new(alpha); params.level_count as usize];
    for (i, e) in x.iter() {
        parts[e.exp.rem_euclid(m) as usize].entries.insert(i, e);
    }
    Ok(parts)
}

/// Whether the sets of a family must be successive or only disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arrangement {
    Successive,
    Disjoint,
}

/// Ordered family of pairwise disjoint index sets.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSet {
    sets: Vec<BTreeSet<usize>>,
    arrangement: Arrangement,
}

impl IntervalSet {
    pub fn new(sets: Vec<BTreeSet<usize>>, arrangement: Arrangement) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (k, set) in sets.iter().enumerate() {
            for &i in set {
                if !seen.insert(i) {
                    return Err(Error::InvalidArgument(format!(
                        "set {k} overlaps an earlier set at index {i}"
                    )));
                }
            }
        }
        if arrangement == Arrangement::Successive {
            let mut last = 0;
            for (k, set) in sets.iter().enumerate() {
                if let (Some(&lo), Some(&hi)) = (set.first(), set.last()) {
                    if lo <= last {
                        return Err(Error::InvalidArgument(format!(
                            "set {k} does not follow its predecessor"
                        )));
                    }
                    last = hi;
                }
            }
        }
        Ok(IntervalSet { sets, arrangement })
    }

    pub fn sets(&self) -> &[BTreeSet<usize>] {
        &self.sets
    }

    pub fn arrangement(&self) -> Arrangement {
        self.arrangement
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }
}
