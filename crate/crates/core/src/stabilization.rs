//! Finite experiments on the stabilization of `|·|_{p,r}` against `‖·‖_p`.
//!
//! The pipeline mirrors the argument on `ℓ_p` for block sequences given
//! explicitly:
//!
//! 1. normalise the blocks `u_n` to `‖u_n‖_p = α^{−3/2}` and round each
//!    coordinate to the nearest power of `α` (half-step rule), giving
//!    `x_n ∈ N_α` with `α^{−2} ≤ ‖x_n‖_p ≤ α^{−1}`;
//! 2. keep the blocks whose level profiles `(‖J_m x_n‖_p^p)_m` agree within
//!    `ε` and average them into vectors `y` whose every level part satisfies
//!    `α^{−3} ≤ ‖J_m y‖_p ≤ 1` ([`approxim_construct`]);
//! 3. draw coefficient vectors `a` on the positive face of the `ℓ_p` sphere
//!    and compare `M^{1/p}|Σ a_n y_n|_{p,r}` with `‖Σ a_n y_n‖_p`
//!    ([`stab_verify`]).
//!
//! Reported inequalities are recomputed from the raw norms whenever a
//! report is serialized.

use std::collections::HashMap;

use serde_json::{json, Value};

use crate::classical::classical_norm;
use crate::error::{Error, Result};
use crate::exact::{kraft_sum, to_f64};
use crate::modified::modified_norm;
use crate::params::{BaseKind, Params};
use crate::vector::{is_block, j_m_split, lp_norm, quantize_to_grid, dual_pair, GridVector, SparseVector};
use crate::{approx_le, certificate::km_membership};

/// Relative slack for checks whose two sides are computed in floating point
/// from exact grid data.
const FLOAT_SLACK: f64 = 1e-12;

/// How coefficient draws are seeded, echoed into reports.
pub const RNG_DESCRIPTION: &str =
    "trial k draws from ChaCha8 seeded with splitmix64(seed ^ splitmix64(k + 0x5851F42D4C957F2D)); \
     a_n = g_n^(1/p) / (sum g)^(1/p), g_n uniform on (0, 1]";

/// Block sequence of nonzero `α`-grid vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSequence {
    vectors: Vec<GridVector>,
}

impl BlockSequence {
    pub fn new(vectors: Vec<GridVector>, params: &Params) -> Result<Self> {
        let alpha = params.base(BaseKind::Alpha);
        for (n, v) in vectors.iter().enumerate() {
            if !v.base().same_grid(&alpha) {
                return Err(Error::InvalidVector(format!("block {n} is not an α-grid vector")));
            }
            if v.is_empty() {
                return Err(Error::InvalidVector(format!("block {n} is zero")));
            }
        }
        let sparse: Vec<SparseVector> = vectors.iter().map(GridVector::to_sparse).collect();
        if !is_block(&sparse) {
            return Err(Error::InvalidVector("vectors do not form a block sequence".into()));
        }
        Ok(BlockSequence { vectors })
    }

    pub fn vectors(&self) -> &[GridVector] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// `(‖J_m x‖_p^p)_{m < M}`.
pub fn level_masses(x: &GridVector, params: &Params) -> Result<Vec<f64>> {
    Ok(j_m_split(x, params)?.iter().map(|part| part.power_mass(params.p)).collect())
}

fn require_base(x: &GridVector, kind: BaseKind, params: &Params) -> Result<()> {
    if !x.base().same_grid(&params.base(kind)) {
        return Err(Error::InvalidVector(format!("expected a {}-grid vector", kind.name())));
    }
    Ok(())
}

/// Outcome of [`check_comparing1`].
#[derive(Debug, Clone, PartialEq)]
pub struct Comparing1 {
    pub holds: bool,
    /// `y(i) = sign(x(i))·|x(i)|^{p/q}` on the `t`-grid.
    pub witness: GridVector,
    /// `⟨x, y⟩ = ‖x‖_p^p`, exact.
    pub pairing: f64,
    pub norm: f64,
}

/// For `x ∈ N_s` with `‖x‖_p ≤ 1`, check `‖x‖_p^p ≤ |x|_{p,r}`.
///
/// Raising `s^{−j}` to the power `p/q` gives `t^{−j}`, so the witness keeps
/// the exponents of `x` and only changes the base.
pub fn check_comparing1(x: &GridVector, params: &Params, tol: f64) -> Result<Comparing1> {
    require_base(x, BaseKind::S, params)?;
    let mass = kraft_sum(x.levels(), params.r);
    if mass > num_rational::BigRational::from_integer(1.into()) {
        return Err(Error::NotMember("‖x‖_p > 1".into()));
    }
    let witness = GridVector::from_entries(params.base(BaseKind::T), x.iter())?;
    let pairing = to_f64(&mass);
    let norm = modified_norm(&x.to_sparse(), params, tol)?;
    let float_pairing = dual_pair(&x.to_sparse(), &witness.to_sparse());
    let holds = km_membership(&witness, params)
        && (float_pairing - pairing).abs() <= 1e-12 * pairing.max(1.0)
        && approx_le(pairing, norm.value, crate::DEFAULT_TOL);
    Ok(Comparing1 { holds, witness, pairing, norm: norm.value })
}

/// Outcome of [`check_comparing2`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparing2 {
    pub holds: bool,
    /// Upper estimate of `|x|_{p,r}` (value plus truncation slack).
    pub norm: f64,
    /// `1 + ‖x‖_p^p / t`.
    pub bound: f64,
}

/// For `x ∈ N_s`, check `|x|_{p,r} ≤ 1 + ‖x‖_p^p / t`.
pub fn check_comparing2(x: &GridVector, params: &Params, tol: f64) -> Result<Comparing2> {
    require_base(x, BaseKind::S, params)?;
    let mass = to_f64(&kraft_sum(x.levels(), params.r));
    let bound = 1.0 + mass / params.t;
    let norm = modified_norm(&x.to_sparse(), params, tol)?;
    Ok(Comparing2 {
        holds: approx_le(norm.upper_bound, bound, crate::DEFAULT_TOL),
        norm: norm.upper_bound,
        bound,
    })
}

/// Admitted blocks and their level profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelProfile {
    /// Positions (in the input sequence) of the admitted blocks.
    pub admitted: Vec<usize>,
    /// `‖J_m x_n‖_p^p` per admitted block.
    pub masses: Vec<Vec<f64>>,
    /// `b_m` with `0 ≤ b_m − ‖J_m x_n‖_p^p < ε` for every admitted block.
    pub targets: Vec<f64>,
    pub eps: f64,
}

/// Everything [`approxim_construct`] decides before building vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproximPlan {
    pub profile: LevelProfile,
    /// Smallest `l` with `r^l ≥ 1/ε`.
    pub l: u32,
    /// `⌊α^{(Ml+k)p}⌋` for `k < M`: blocks averaged into the `k`-th component.
    pub counts: Vec<usize>,
    pub required_per_output: usize,
}

/// `⌊α^{(Ml+k)p}⌋ = ⌊r^l · r^{k/M}⌋`.
pub fn block_counts(params: &Params, l: u32) -> Vec<usize> {
    let r = params.r_f64();
    let m = f64::from(params.level_count);
    (0..params.level_count)
        .map(|k| {
            let v = r.powi(l as i32) * r.powf(f64::from(k) / m);
            (v * (1.0 + 1e-12)).floor() as usize
        })
        .collect()
}

/// Smallest `l ≥ 0` with `r^l ≥ 1/ε`.
pub fn averaging_depth(params: &Params, eps: f64) -> u32 {
    let mut l = 0u32;
    let mut power = 1.0f64;
    while power * eps < 1.0 {
        power *= params.r_f64();
        l += 1;
    }
    l
}

/// Blocks consumed by one averaged vector for the given `ε`.
pub fn required_per_output(params: &Params, eps: f64) -> usize {
    block_counts(params, averaging_depth(params, eps)).iter().sum()
}

/// Check `α^{−2} ≤ ‖x_n‖_p ≤ α^{−1}`, bin the level profiles with width
/// `ε`, and fix the averaging lengths.
pub fn approxim_plan(seq: &BlockSequence, eps: f64, params: &Params) -> Result<ApproximPlan> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0, 1), got {eps}")));
    }
    let alpha = params.alpha;
    let lo = alpha.powi(-2) * (1.0 - FLOAT_SLACK);
    let hi = alpha.powi(-1) * (1.0 + FLOAT_SLACK);
    let mut masses = Vec::with_capacity(seq.len());
    for (n, x) in seq.vectors().iter().enumerate() {
        let norm = x.power_mass(params.p).powf(1.0 / params.p);
        if norm < lo || norm > hi {
            return Err(Error::Precondition(format!(
                "block {n} has ‖x_n‖_p = {norm}, outside [α^-2, α^-1] = [{}, {}]",
                alpha.powi(-2),
                alpha.powi(-1)
            )));
        }
        masses.push(level_masses(x, params)?);
    }

    // Largest bin, first-seen on ties.
    let mut bins: HashMap<Vec<i64>, (usize, Vec<usize>)> = HashMap::new();
    for (n, profile) in masses.iter().enumerate() {
        let key: Vec<i64> = profile.iter().map(|&v| (v / eps).floor() as i64).collect();
        bins.entry(key).or_insert_with(|| (n, Vec::new())).1.push(n);
    }
    let (_, admitted) = bins
        .into_values()
        .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(&a.0)))
        .ok_or_else(|| Error::Precondition("empty block sequence".into()))?;
    let m = params.level_count as usize;
    let admitted_masses: Vec<Vec<f64>> = admitted.iter().map(|&n| masses[n].clone()).collect();
    let targets: Vec<f64> = (0..m)
        .map(|k| admitted_masses.iter().map(|v| v[k]).fold(f64::NEG_INFINITY, f64::max))
        .collect();

    let l = averaging_depth(params, eps);
    let counts = block_counts(params, l);
    let required = counts.iter().sum();
    Ok(ApproximPlan {
        profile: LevelProfile { admitted, masses: admitted_masses, targets, eps },
        l,
        counts,
        required_per_output: required,
    })
}

/// Output of [`approxim_construct`].
#[derive(Debug, Clone, PartialEq)]
pub struct Approximation {
    pub plan: ApproximPlan,
    /// Averaged vectors `y = y_0 + ⋯ + y_{M−1}`, a block sequence.
    pub outputs: BlockSequence,
    /// The components `y_k` of every output.
    pub components: Vec<Vec<GridVector>>,
    /// Input positions summed into each component.
    pub sources: Vec<Vec<Vec<usize>>>,
    /// `‖J_m y‖_p` per output.
    pub level_norms: Vec<Vec<f64>>,
    /// `c_k^m = (⌊α^{(Ml+k)p}⌋ / α^{(Ml+k)p})·b_{m+k}`.
    pub predicted: Vec<Vec<f64>>,
}

/// Average admitted blocks into `outputs` vectors whose level parts all
/// satisfy `α^{−3} ≤ ‖J_m y‖_p ≤ 1`.
///
/// Component `k` of an output is `α^{−(Ml+k)}` times the sum of the next
/// `⌊α^{(Ml+k)p}⌋` unused admitted blocks; blocks are consumed in order, so
/// the outputs again form a block sequence.
pub fn approxim_construct(
    seq: &BlockSequence,
    eps: f64,
    outputs: usize,
    params: &Params,
) -> Result<Approximation> {
    let plan = approxim_plan(seq, eps, params)?;
    build_from_plan(seq, plan, outputs, params)
}

fn build_from_plan(
    seq: &BlockSequence,
    plan: ApproximPlan,
    outputs: usize,
    params: &Params,
) -> Result<Approximation> {
    if outputs == 0 {
        return Err(Error::InvalidArgument("at least one output vector is needed".into()));
    }
    let needed = outputs * plan.required_per_output;
    if plan.profile.admitted.len() < needed {
        return Err(Error::Precondition(format!(
            "insufficient input: {outputs} output(s) need {needed} blocks with matching profiles \
             ({} per output), the largest profile bin has {}",
            plan.required_per_output,
            plan.profile.admitted.len()
        )));
    }
    let m = params.level_count as usize;
    let mi = params.level_count as i32;
    let alpha = params.alpha;
    let p = params.p;
    let base = params.base(BaseKind::Alpha);

    let predicted: Vec<Vec<f64>> = (0..m)
        .map(|k| {
            let exact = alpha.powf(f64::from(mi * plan.l as i32 + k as i32) * p);
            let ratio = plan.counts[k] as f64 / exact;
            (0..m).map(|lvl| ratio * plan.profile.targets[(lvl + k) % m]).collect()
        })
        .collect();

    let mut cursor = 0usize;
    let mut vectors = Vec::with_capacity(outputs);
    let mut components = Vec::with_capacity(outputs);
    let mut sources = Vec::with_capacity(outputs);
    let mut level_norms = Vec::with_capacity(outputs);
    for o in 0..outputs {
        let mut comps = Vec::with_capacity(m);
        let mut srcs = Vec::with_capacity(m);
        for k in 0..m {
            let chosen: Vec<usize> = plan.profile.admitted[cursor..cursor + plan.counts[k]].to_vec();
            cursor += plan.counts[k];
            let sum = GridVector::disjoint_sum(base, chosen.iter().map(|&n| &seq.vectors()[n]))?;
            let yk = sum.shift_exponents(-(mi * plan.l as i32 + k as i32));
            let masses = level_masses(&yk, params)?;
            for (lvl, &mass) in masses.iter().enumerate() {
                let gap = predicted[k][lvl] - mass;
                let scale = predicted[k][lvl].max(1.0);
                if gap < -FLOAT_SLACK * scale || gap >= plan.profile.eps {
                    return Err(Error::Construction(format!(
                        "output {o}, component {k}, level {lvl}: c - ‖J_m y_k‖^p = {gap} outside [0, ε)"
                    )));
                }
            }
            comps.push(yk);
            srcs.push(chosen);
        }
        let y = GridVector::disjoint_sum(base, &comps)?;
        let norms: Vec<f64> = level_masses(&y, params)?.iter().map(|v| v.powf(1.0 / p)).collect();
        for (lvl, &v) in norms.iter().enumerate() {
            if v < alpha.powi(-3) * (1.0 - FLOAT_SLACK) || v > 1.0 + FLOAT_SLACK {
                return Err(Error::Construction(format!(
                    "output {o}, level {lvl}: ‖J_m y‖_p = {v} outside [α^-3, 1]; eps is too large"
                )));
            }
        }
        vectors.push(y);
        components.push(comps);
        sources.push(srcs);
        level_norms.push(norms);
    }
    Ok(Approximation {
        plan,
        outputs: BlockSequence::new(vectors, params)?,
        components,
        sources,
        level_norms,
        predicted,
    })
}

/// Knobs for [`stab_verify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabOptions {
    /// Tolerance passed to the modified-norm solver.
    pub tol: f64,
    /// Largest support on which the classical norm is also evaluated.
    pub classical_limit: usize,
}

impl Default for StabOptions {
    fn default() -> Self {
        StabOptions { tol: crate::DEFAULT_TOL, classical_limit: 400 }
    }
}

/// Raw measurements for one coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StabTrial {
    /// Normalised coefficients, `Σ a_n^p = 1`.
    pub coefficients: Vec<f64>,
    /// `k_n` with `α^{−k_n} ≤ a_n < α^{−k_n+1}`.
    pub grid_exponents: Vec<i32>,
    /// `‖J_m x‖_p` for the grid approximant `x = Σ α^{−k_n} x_n`.
    pub grid_level_norms: Vec<f64>,
    pub lp_norm: f64,
    /// `None` when the support exceeds the classical limit.
    pub classical: Option<f64>,
    pub modified: f64,
    pub modified_upper: f64,
}

/// Pass/fail flags derived from a [`StabTrial`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabChecks {
    /// `M^{1/p}|z|_{p,r} / ‖z‖_p`.
    pub scaled_ratio: f64,
    /// `(log₂ r)^{1/p}|z|_{p,r} / ‖z‖_p`.
    pub rho: f64,
    pub stab_lower: bool,
    pub stab_upper: bool,
    pub level_bounds: bool,
    pub sandwich: bool,
    pub intermediate: bool,
    pub final_envelope: bool,
}

impl StabChecks {
    pub fn all(&self) -> bool {
        self.stab_lower
            && self.stab_upper
            && self.level_bounds
            && self.sandwich
            && self.intermediate
            && self.final_envelope
    }
}

/// Constants of the two-sided estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelopes {
    /// `α^{−4p}` and `6(p+q)α^4`.
    pub stab: (f64, f64),
    /// `α^{−4p−2}` and `6(p+q)α^6`.
    pub intermediate: (f64, f64),
    /// `4^{−6}` and `3·4^7(p+q)`.
    pub final_bracket: (f64, f64),
    /// `3·4^{13}(p+q)`.
    pub lambda_bound: f64,
}

impl Envelopes {
    pub fn new(params: &Params) -> Self {
        let (p, q, a) = (params.p, params.q, params.alpha);
        Envelopes {
            stab: (a.powf(-4.0 * p), 6.0 * (p + q) * a.powi(4)),
            intermediate: (a.powf(-4.0 * p - 2.0), 6.0 * (p + q) * a.powi(6)),
            final_bracket: (4f64.powi(-6), 3.0 * 4f64.powi(7) * (p + q)),
            lambda_bound: 3.0 * 4f64.powi(13) * (p + q),
        }
    }
}

impl StabTrial {
    pub fn checks(&self, params: &Params) -> StabChecks {
        let env = Envelopes::new(params);
        let tol = crate::DEFAULT_TOL;
        let m_root = f64::from(params.level_count).powf(1.0 / params.p);
        let log_root = params.log2_r().powf(1.0 / params.p);
        let lo = self.modified / self.lp_norm;
        let hi = self.modified_upper / self.lp_norm;
        let alpha = params.alpha;
        let level_bounds = self.grid_level_norms.iter().all(|&v| {
            v >= alpha.powi(-4) * (1.0 - FLOAT_SLACK) && v <= 1.0 + FLOAT_SLACK
        });
        let sandwich = self.classical.is_none_or(|c| approx_le(c, self.modified_upper, tol))
            && approx_le(self.modified, self.lp_norm, tol);
        StabChecks {
            scaled_ratio: m_root * lo,
            rho: log_root * lo,
            stab_lower: approx_le(env.stab.0, m_root * lo, tol),
            stab_upper: approx_le(m_root * hi, env.stab.1, tol),
            level_bounds,
            sandwich,
            intermediate: approx_le(env.intermediate.0, m_root * lo, tol)
                && approx_le(m_root * hi, env.intermediate.1, tol),
            final_envelope: approx_le(env.final_bracket.0, log_root * lo, tol)
                && approx_le(log_root * hi, env.final_bracket.1, tol),
        }
    }
}

/// Check the two-sided estimate
/// `α^{−4p}‖z‖_p ≤ M^{1/p}|z|_{p,r} ≤ 6(p+q)α^4‖z‖_p` for
/// `z = Σ a_n x_n`, where every block satisfies `α^{−3} ≤ ‖J_m x_n‖_p ≤ 1`.
pub fn stab_verify(
    seq: &BlockSequence,
    coeffs: &[f64],
    params: &Params,
    opts: &StabOptions,
) -> Result<StabTrial> {
    let alpha = params.alpha;
    for (n, x) in seq.vectors().iter().enumerate() {
        for (m, mass) in level_masses(x, params)?.into_iter().enumerate() {
            let v = mass.powf(1.0 / params.p);
            if v < alpha.powi(-3) * (1.0 - FLOAT_SLACK) || v > 1.0 + FLOAT_SLACK {
                return Err(Error::Precondition(format!(
                    "block n = {n}, level m = {m}: ‖J_m x_n‖_p = {v} outside [α^-3, 1]"
                )));
            }
        }
    }
    if coeffs.len() != seq.len() {
        return Err(Error::InvalidArgument(format!(
            "{} coefficients for {} blocks",
            coeffs.len(),
            seq.len()
        )));
    }
    if let Some(n) = coeffs.iter().position(|&a| !(a > 0.0 && a.is_finite())) {
        return Err(Error::InvalidArgument(format!("coefficient {n} must be positive and finite")));
    }
    let scale = coeffs.iter().map(|a| a.powf(params.p)).sum::<f64>().powf(1.0 / params.p);
    let coefficients: Vec<f64> = coeffs.iter().map(|a| a / scale).collect();

    let ln_alpha = alpha.ln();
    let grid_exponents: Vec<i32> = coefficients
        .iter()
        .map(|&a| {
            let mut k = (-(a.ln() / ln_alpha)).ceil() as i32;
            while alpha.powi(-k) > a {
                k += 1;
            }
            while k > 0 && alpha.powi(-(k - 1)) <= a {
                k -= 1;
            }
            k
        })
        .collect();
    let base = params.base(BaseKind::Alpha);
    let shifted: Vec<GridVector> = seq
        .vectors()
        .iter()
        .zip(&grid_exponents)
        .map(|(x, &k)| x.shift_exponents(-k))
        .collect();
    let grid = GridVector::disjoint_sum(base, &shifted)?;
    let grid_level_norms: Vec<f64> =
        level_masses(&grid, params)?.iter().map(|v| v.powf(1.0 / params.p)).collect();

    let mut z = SparseVector::new();
    for (x, &a) in seq.vectors().iter().zip(&coefficients) {
        z = z.add_scaled(&x.to_sparse(), a);
    }
    let evaluation = evaluate_combination(&z, params, opts)?;
    Ok(StabTrial {
        coefficients,
        grid_exponents,
        grid_level_norms,
        lp_norm: evaluation.lp_norm,
        classical: evaluation.classical,
        modified: evaluation.modified,
        modified_upper: evaluation.modified_upper,
    })
}

struct Evaluation {
    lp_norm: f64,
    classical: Option<f64>,
    modified: f64,
    modified_upper: f64,
}

fn evaluate_combination(z: &SparseVector, params: &Params, opts: &StabOptions) -> Result<Evaluation> {
    let modified = modified_norm(z, params, opts.tol)?;
    let classical = if z.len() <= opts.classical_limit {
        Some(classical_norm(z, params)?.value)
    } else {
        None
    };
    Ok(Evaluation {
        lp_norm: lp_norm(z, params.p)?,
        classical,
        modified: modified.value,
        modified_upper: modified.upper_bound,
    })
}

/// Where the pipeline's blocks come from.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisSpec {
    Explicit(Vec<SparseVector>),
    /// `e_1, e_2, …, e_count`.
    Unit { count: usize },
    /// Shifted copies of `pool` random patterns (support 1..=3, entries of
    /// magnitude in `[1/4, 1]` with random signs), chosen at random.
    Random { count: usize, pool: usize, seed: u64 },
}

impl BasisSpec {
    pub fn describe(&self) -> Value {
        match self {
            BasisSpec::Explicit(v) => json!({"kind": "explicit", "count": v.len()}),
            BasisSpec::Unit { count } => json!({"kind": "unit", "count": count}),
            BasisSpec::Random { count, pool, seed } => {
                json!({"kind": "random", "count": count, "pool": pool, "seed": seed})
            }
        }
    }

    pub fn generate(&self) -> Result<Vec<SparseVector>> {
        use rand::Rng;
        match self {
            BasisSpec::Explicit(v) => Ok(v.clone()),
            BasisSpec::Unit { count } => (1..=*count).map(SparseVector::unit).collect(),
            BasisSpec::Random { count, pool, seed } => {
                if *pool == 0 {
                    return Err(Error::InvalidArgument("random basis needs a nonempty pool".into()));
                }
                let mut rng = crate::rng::stream(*seed, u64::MAX);
                let patterns: Vec<Vec<f64>> = (0..*pool)
                    .map(|_| {
                        let len = rng.gen_range(1..=3);
                        (0..len)
                            .map(|_| {
                                let v = rng.gen_range(0.25..=1.0);
                                if rng.gen_bool(0.5) { v } else { -v }
                            })
                            .collect()
                    })
                    .collect();
                let mut next = 1usize;
                let mut out = Vec::with_capacity(*count);
                for _ in 0..*count {
                    let pattern = &patterns[rng.gen_range(0..*pool)];
                    let v = SparseVector::from_entries(
                        pattern.iter().enumerate().map(|(k, &c)| (next + k, c)),
                    )?;
                    next += pattern.len();
                    out.push(v);
                }
                Ok(out)
            }
        }
    }
}

/// Settings of [`stabilization_pipeline`].
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub trials: usize,
    pub seed: u64,
    pub eps: f64,
    /// Number of averaged vectors; `None` takes as many as the inputs and
    /// the support budget allow, up to `max_outputs`.
    pub outputs: Option<usize>,
    pub max_outputs: usize,
    pub tol: f64,
    /// Largest support of an evaluated combination.
    pub support_budget: usize,
    pub classical_limit: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            trials: 100,
            seed: 0,
            eps: 0.01,
            outputs: None,
            max_outputs: 8,
            tol: crate::DEFAULT_TOL,
            support_budget: 2000,
            classical_limit: 400,
        }
    }
}

impl PipelineConfig {
    pub fn to_json(&self) -> Value {
        json!({
            "trials": self.trials,
            "seed": self.seed,
            "eps": self.eps,
            "outputs": self.outputs,
            "max_outputs": self.max_outputs,
            "tol": self.tol,
            "support_budget": self.support_budget,
            "classical_limit": self.classical_limit,
        })
    }
}

/// Rounding of the normalised blocks onto the `α`-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantization {
    /// `‖x_n‖_p / ‖u_n‖_p` range over all blocks.
    pub norm_ratio: (f64, f64),
    /// Largest `|log_α(|x_n(i)| / |u_n(i)|)|` over all coordinates (≤ 1/2).
    pub max_log_step: f64,
    /// `‖x_n‖_p` range.
    pub grid_norms: (f64, f64),
}

/// One pipeline trial: the grid-side measurement plus the same combination
/// of the unrounded blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineTrial {
    pub stab: StabTrial,
    pub basis_lp_norm: f64,
    pub basis_modified: f64,
    pub basis_modified_upper: f64,
}

impl PipelineTrial {
    pub fn basis_rho(&self, params: &Params) -> f64 {
        params.log2_r().powf(1.0 / params.p) * self.basis_modified / self.basis_lp_norm
    }
}

/// Full record of a stabilization run.
#[derive(Debug, Clone, PartialEq)]
pub struct StabReport {
    pub params: Params,
    pub config: PipelineConfig,
    pub basis: Value,
    pub quantization: Quantization,
    pub approximation: Approximation,
    pub trials: Vec<PipelineTrial>,
}

/// Aggregates recomputed from the trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabSummary {
    pub rho_min: f64,
    pub rho_max: f64,
    /// `max ρ / min ρ` on the averaged vectors.
    pub lambda_hat: f64,
    pub basis_rho_min: f64,
    pub basis_rho_max: f64,
    pub basis_lambda_hat: f64,
    pub all_trials_pass: bool,
    pub basis_within_final: bool,
    pub lambda_within_bound: bool,
}

impl StabSummary {
    pub fn passed(&self) -> bool {
        self.all_trials_pass && self.basis_within_final && self.lambda_within_bound
    }
}

impl StabReport {
    pub fn summary(&self) -> StabSummary {
        let env = Envelopes::new(&self.params);
        let tol = crate::DEFAULT_TOL;
        let checks: Vec<StabChecks> = self.trials.iter().map(|t| t.stab.checks(&self.params)).collect();
        let rhos: Vec<f64> = checks.iter().map(|c| c.rho).collect();
        let basis: Vec<f64> = self.trials.iter().map(|t| t.basis_rho(&self.params)).collect();
        let (rho_min, rho_max) = min_max(&rhos);
        let (basis_rho_min, basis_rho_max) = min_max(&basis);
        let lambda_hat = rho_max / rho_min;
        let basis_lambda_hat = basis_rho_max / basis_rho_min;
        StabSummary {
            rho_min,
            rho_max,
            lambda_hat,
            basis_rho_min,
            basis_rho_max,
            basis_lambda_hat,
            all_trials_pass: checks.iter().all(StabChecks::all),
            basis_within_final: approx_le(env.final_bracket.0, basis_rho_min, tol)
                && approx_le(basis_rho_max, env.final_bracket.1, tol),
            lambda_within_bound: approx_le(lambda_hat, env.lambda_bound, tol)
                && approx_le(basis_lambda_hat, env.lambda_bound, tol),
        }
    }

    pub fn to_json(&self, version: &str) -> Value {
        let env = Envelopes::new(&self.params);
        let summary = self.summary();
        let trials: Vec<Value> = self
            .trials
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let c = t.stab.checks(&self.params);
                json!({
                    "trial": k,
                    "coefficients": t.stab.coefficients,
                    "grid_exponents": t.stab.grid_exponents,
                    "grid_level_norms": t.stab.grid_level_norms,
                    "lp_norm": t.stab.lp_norm,
                    "classical": t.stab.classical,
                    "modified": t.stab.modified,
                    "modified_upper": t.stab.modified_upper,
                    "scaled_ratio": c.scaled_ratio,
                    "rho": c.rho,
                    "basis_lp_norm": t.basis_lp_norm,
                    "basis_modified": t.basis_modified,
                    "basis_rho": t.basis_rho(&self.params),
                    "checks": {
                        "stab_lower": c.stab_lower,
                        "stab_upper": c.stab_upper,
                        "grid_level_bounds": c.level_bounds,
                        "sandwich": c.sandwich,
                        "intermediate_envelope": c.intermediate,
                        "final_envelope": c.final_envelope,
                    },
                })
            })
            .collect();
        let a = &self.approximation;
        json!({
            "version": version,
            "params": crate::io::params_json(&self.params),
            "config": self.config.to_json(),
            "rng": RNG_DESCRIPTION,
            "basis": self.basis,
            "quantization": {
                "norm_ratio": [self.quantization.norm_ratio.0, self.quantization.norm_ratio.1],
                "max_log_step": self.quantization.max_log_step,
                "grid_norms": [self.quantization.grid_norms.0, self.quantization.grid_norms.1],
                "equivalence_constant": self.params.alpha.sqrt(),
            },
            "approximation": {
                "admitted": a.plan.profile.admitted.len(),
                "targets": a.plan.profile.targets,
                "l": a.plan.l,
                "counts": a.plan.counts,
                "required_per_output": a.plan.required_per_output,
                "outputs": a.outputs.len(),
                "output_supports": a.outputs.vectors().iter().map(GridVector::len).collect::<Vec<_>>(),
                "level_norms": a.level_norms,
                "predicted_masses": a.predicted,
            },
            "envelopes": {
                "stab": [env.stab.0, env.stab.1],
                "intermediate": [env.intermediate.0, env.intermediate.1],
                "final": [env.final_bracket.0, env.final_bracket.1],
                "lambda_bound": env.lambda_bound,
            },
            "summary": {
                "rho_min": summary.rho_min,
                "rho_max": summary.rho_max,
                "lambda_hat": summary.lambda_hat,
                "basis_rho_min": summary.basis_rho_min,
                "basis_rho_max": summary.basis_rho_max,
                "basis_lambda_hat": summary.basis_lambda_hat,
                "all_trials_pass": summary.all_trials_pass,
                "basis_within_final": summary.basis_within_final,
                "lambda_within_bound": summary.lambda_within_bound,
                "passed": summary.passed(),
            },
            "trials": trials,
        })
    }

    /// Columns `trial, lp_norm, classical, modified, rho, within_bounds`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["trial", "lp_norm", "classical", "modified", "rho", "within_bounds"])?;
        for (k, t) in self.trials.iter().enumerate() {
            let c = t.stab.checks(&self.params);
            w.write_record([
                k.to_string(),
                t.stab.lp_norm.to_string(),
                t.stab.classical.map(|v| v.to_string()).unwrap_or_default(),
                t.stab.modified.to_string(),
                c.rho.to_string(),
                c.all().to_string(),
            ])?;
        }
        w.flush()
    }
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Run the whole experiment on an explicit or generated block basis.
pub fn stabilization_pipeline(basis: &BasisSpec, params: &Params, config: &PipelineConfig) -> Result<StabReport> {
    if config.trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is needed".into()));
    }
    let blocks = basis.generate()?;
    if blocks.is_empty() || blocks.iter().any(SparseVector::is_empty) {
        return Err(Error::InvalidVector("basis blocks must be nonzero".into()));
    }
    if !is_block(&blocks) {
        return Err(Error::InvalidVector("basis is not a block sequence".into()));
    }
    let alpha = params.alpha;
    let target = alpha.powf(-1.5);
    let mut normalized = Vec::with_capacity(blocks.len());
    let mut grid = Vec::with_capacity(blocks.len());
    let mut ratio = (f64::INFINITY, f64::NEG_INFINITY);
    let mut grid_norms = (f64::INFINITY, f64::NEG_INFINITY);
    let mut max_log_step = 0.0f64;
    for u in &blocks {
        let u = u.scale(target / lp_norm(u, params.p)?);
        let x = quantize_to_grid(&u, params.base(BaseKind::Alpha))?;
        let xs = x.to_sparse();
        for (i, v) in u.iter() {
            max_log_step = max_log_step.max(((xs.get(i) / v).ln() / alpha.ln()).abs());
        }
        let xn = lp_norm(&xs, params.p)?;
        let un = lp_norm(&u, params.p)?;
        ratio = (ratio.0.min(xn / un), ratio.1.max(xn / un));
        grid_norms = (grid_norms.0.min(xn), grid_norms.1.max(xn));
        normalized.push(u);
        grid.push(x);
    }
    let seq = BlockSequence::new(grid, params)?;
    let plan = approxim_plan(&seq, config.eps, params)?;

    // Outputs that fit both the admitted blocks and the support budget.
    let by_inputs = plan.profile.admitted.len() / plan.required_per_output.max(1);
    let mut by_budget = 0usize;
    let mut support = 0usize;
    for chunk in plan.profile.admitted.chunks(plan.required_per_output).take(by_inputs) {
        support += chunk.iter().map(|&n| seq.vectors()[n].len()).sum::<usize>();
        if support > config.support_budget {
            break;
        }
        by_budget += 1;
    }
    let outputs = match config.outputs {
        Some(k) if k > by_budget.min(by_inputs) && by_budget < by_inputs.min(k) => {
            return Err(Error::Budget(format!(
                "{k} outputs exceed the support budget of {} (at most {by_budget} fit)",
                config.support_budget
            )));
        }
        Some(k) => k,
        None => by_inputs.min(by_budget).min(config.max_outputs),
    };
    if outputs == 0 {
        return Err(if by_inputs == 0 {
            Error::Precondition(format!(
                "insufficient input: one output needs {} blocks with matching profiles, the largest bin has {}",
                plan.required_per_output,
                plan.profile.admitted.len()
            ))
        } else {
            Error::Budget(format!(
                "a single averaged vector exceeds the support budget of {}",
                config.support_budget
            ))
        });
    }
    let approximation = build_from_plan(&seq, plan, outputs, params)?;

    // The same averages applied to the unrounded blocks.
    let mi = params.level_count as i32;
    let basis_outputs: Vec<SparseVector> = approximation
        .sources
        .iter()
        .map(|comps| {
            let mut w = SparseVector::new();
            for (k, chosen) in comps.iter().enumerate() {
                let factor = alpha.powi(-(mi * approximation.plan.l as i32 + k as i32));
                for &n in chosen {
                    w = w.add_scaled(&normalized[n], factor);
                }
            }
            w
        })
        .collect();

    let opts = StabOptions { tol: config.tol, classical_limit: config.classical_limit };
    let mut trials = Vec::with_capacity(config.trials);
    for trial in 0..config.trials {
        let mut rng = crate::rng::stream(config.seed, trial as u64);
        let draws: Vec<f64> = (0..outputs).map(|_| crate::rng::open_unit(&mut rng)).collect();
        let total: f64 = draws.iter().sum();
        let coeffs: Vec<f64> = draws.iter().map(|g| (g / total).powf(1.0 / params.p)).collect();
        let stab = stab_verify(&approximation.outputs, &coeffs, params, &opts)?;
        let mut w = SparseVector::new();
        for (b, &a) in basis_outputs.iter().zip(&stab.coefficients) {
            w = w.add_scaled(b, a);
        }
        let basis_norm = modified_norm(&w, params, config.tol)?;
        trials.push(PipelineTrial {
            basis_lp_norm: lp_norm(&w, params.p)?,
            basis_modified: basis_norm.value,
            basis_modified_upper: basis_norm.upper_bound,
            stab,
        });
    }
    Ok(StabReport {
        params: *params,
        config: PipelineConfig { outputs: Some(outputs), ..config.clone() },
        basis: basis.describe(),
        quantization: Quantization { norm_ratio: ratio, max_log_step, grid_norms },
        approximation,
        trials,
    })
}
