//! Parameter bundle `(p, q, r, t, s, M, α)` and grid bases.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the derived identities of [`Params`].
const IDENTITY_TOL: f64 = 1e-12;

/// All quantities derived from an exponent `p` and branching factor `r`.
///
/// * `q = p/(p−1)` is the conjugate exponent;
/// * `t = r^{1/q}` scales the norming sets, `s = r^{1/p}`, so `t·s = r`;
/// * `level_count = ⌊log₂ r⌋` (written `M`) and `alpha = s^{1/M}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub p: f64,
    pub q: f64,
    pub r: u32,
    pub t: f64,
    pub s: f64,
    pub level_count: u32,
    pub alpha: f64,
}

/// Serialized form: `{"p": 2.0, "r": 4}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamsSpec {
    pub p: f64,
    pub r: u32,
}

impl Params {
    pub fn new(p: f64, r: u32) -> Result<Self> {
        derive_params(p, r)
    }

    pub fn spec(&self) -> ParamsSpec {
        ParamsSpec { p: self.p, r: self.r }
    }

    pub fn r_f64(&self) -> f64 {
        f64::from(self.r)
    }

    /// `log₂ r`, used by the final stabilization envelope.
    pub fn log2_r(&self) -> f64 {
        self.r_f64().log2()
    }

    pub fn base(&self, kind: BaseKind) -> GridBase {
        let value = match kind {
            BaseKind::Alpha => self.alpha,
            BaseKind::S => self.s,
            BaseKind::T => self.t,
        };
        GridBase { kind: Some(kind), value }
    }

    /// Recheck every identity tying the derived quantities together.
    pub fn check_invariants(&self) -> Result<()> {
        let rel = |a: f64, b: f64| (a - b).abs() <= IDENTITY_TOL * b.abs().max(1.0);
        let r = self.r_f64();
        let checks = [
            ("1/p + 1/q = 1", rel(1.0 / self.p + 1.0 / self.q, 1.0)),
            ("t^q = r", rel(self.t.powf(self.q), r)),
            ("s^p = r", rel(self.s.powf(self.p), r)),
            ("t·s = r", rel(self.t * self.s, r)),
            ("alpha^M = s", rel(self.alpha.powi(self.level_count as i32), self.s)),
            (
                "2^{1/p} ≤ alpha ≤ 4^{1/p}",
                self.alpha >= 2f64.powf(1.0 / self.p) * (1.0 - IDENTITY_TOL)
                    && self.alpha <= 4f64.powf(1.0 / self.p) * (1.0 + IDENTITY_TOL),
            ),
            ("M ≥ 1", self.level_count >= 1),
            ("r ≥ 2", self.r >= 2),
        ];
        match checks.iter().find(|(_, ok)| !ok) {
            Some((name, _)) => Err(Error::InvalidParams(format!(
                "identity {name} fails for p={}, r={}",
                self.p, self.r
            ))),
            None => Ok(()),
        }
    }
}

impl TryFrom<ParamsSpec> for Params {
    type Error = Error;

    fn try_from(spec: ParamsSpec) -> Result<Self> {
        derive_params(spec.p, spec.r)
    }
}

/// Derive the full parameter bundle from `p ∈ (1, ∞)` and `r ≥ 2`.
///
/// `M` is taken as `⌊log₂ r⌋`, which keeps `M ≥ 1` for every admissible `r`
/// and gives `2^M ≤ r < 4^M`, hence `2^{1/p} ≤ α ≤ 4^{1/p}`.
pub fn derive_params(p: f64, r: u32) -> Result<Params> {
    if !p.is_finite() || p <= 1.0 {
        return Err(Error::InvalidParams(format!(
            "exponent p must satisfy 1 < p < ∞, got {p}"
        )));
    }
    if r < 2 {
        return Err(Error::InvalidParams(format!(
            "branching factor r must be at least 2, got {r}"
        )));
    }
    let rf = f64::from(r);
    let q = p / (p - 1.0);
    let t = rf.powf(1.0 / q);
    let s = rf.powf(1.0 / p);
    let level_count = 31 - r.leading_zeros();
    let alpha = rf.powf(1.0 / (p * f64::from(level_count)));
    let params = Params { p, q, r, t, s, level_count, alpha };
    params.check_invariants()?;
    Ok(params)
}

/// Which derived quantity a grid is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseKind {
    Alpha,
    S,
    T,
}

impl BaseKind {
    pub fn name(self) -> &'static str {
        match self {
            BaseKind::Alpha => "alpha",
            BaseKind::S => "s",
            BaseKind::T => "t",
        }
    }
}

/// Base `β > 1` of a grid `C_β = {±β^j : j ∈ ℤ} ∪ {0}`.
///
/// `kind` is `None` for ad hoc bases that are not one of `α`, `s`, `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridBase {
    pub kind: Option<BaseKind>,
    pub value: f64,
}

impl GridBase {
    pub fn custom(value: f64) -> Result<Self> {
        if !value.is_finite() || value <= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "grid base must be finite and > 1, got {value}"
            )));
        }
        Ok(GridBase { kind: None, value })
    }

    /// `β^exp`.
    pub fn pow(&self, exp: i32) -> f64 {
        self.value.powf(f64::from(exp))
    }

    /// Two bases are the same grid when their kinds agree and their values
    /// coincide bit for bit.
    pub fn same_grid(&self, other: &GridBase) -> bool {
        self.kind == other.kind && self.value.to_bits() == other.value.to_bits()
    }
}
