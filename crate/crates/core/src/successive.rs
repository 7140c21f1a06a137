//! Exponent sequences, their weight functional `Φ`, and the certificates
//! they induce for the successive norming set `K_{q,r}`.
//!
//! For `m = (m(1), …, m(n))`,
//!
//! ```text
//! Φ(m) = r^{−m(1)}                                      (n = 1)
//!      = r^{−m(1)} + r^{−m(2)}                          (n = 2)
//!      = r^{−m(1)} + 2·Σ_{1<i<n} r^{−m(i)} + r^{−m(n)}  (n > 2)
//! ```
//!
//! and `V(m) = (t^{−m(1)}, …, t^{−m(n)})`. Whenever `Φ(m) ≤ 1` the vector
//! `V(m)` belongs to `K_{q,r}`, and [`build_k_certificate`] produces the
//! witnessing tree.

use std::cmp::Ordering;

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::certificate::{km_membership, verify_certificate, CertNode, Certificate, Mode};
use crate::error::{Error, Result};
use crate::exact::{kraft_sum, power_of_r, to_f64};
use crate::params::{BaseKind, Params};
use crate::vector::{GridEntry, GridVector, Sign};

/// Nonempty finite sequence of integer exponents.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExponentSeq(Vec<i32>);

impl ExponentSeq {
    pub fn new(entries: Vec<i32>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("exponent sequence must be nonempty".into()));
        }
        Ok(ExponentSeq(entries))
    }

    pub fn as_slice(&self) -> &[i32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `m + k·1`.
    pub fn shifted(&self, k: i32) -> ExponentSeq {
        ExponentSeq(self.0.iter().map(|&x| x + k).collect())
    }

    /// Concatenation `m⌢l`.
    pub fn concat(&self, other: &ExponentSeq) -> ExponentSeq {
        ExponentSeq(self.0.iter().chain(&other.0).copied().collect())
    }
}

impl std::str::FromStr for ExponentSeq {
    type Err = Error;

    /// Parse `"1,2,1"`.
    fn from_str(s: &str) -> Result<Self> {
        let entries = s
            .split(',')
            .map(|part| {
                part.trim()
                    .parse::<i32>()
                    .map_err(|e| Error::InvalidArgument(format!("bad exponent {part:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        ExponentSeq::new(entries)
    }
}

/// `Φ(m)` in exact arithmetic.
pub fn phi_exact(m: &[i32], r: u32) -> BigRational {
    let n = m.len();
    let mut sum = BigRational::zero();
    for (k, &e) in m.iter().enumerate() {
        let term = power_of_r(r, -i64::from(e));
        if n > 2 && k > 0 && k + 1 < n {
            sum += &term + &term;
        } else {
            sum += term;
        }
    }
    sum
}

pub fn phi(m: &ExponentSeq, params: &Params) -> f64 {
    to_f64(&phi_exact(m.as_slice(), params.r))
}

/// `V(m)`: exponent `−m(i)` at index `i`.
pub fn v_map(m: &ExponentSeq, params: &Params) -> GridVector {
    GridVector::from_levels(params.base(BaseKind::T), m.as_slice())
}

/// Successive-mode certificate for `V(m)`, `Φ(m) ≤ 1`.
///
/// The sequence is first shifted by the largest `k` with `Φ(m) ≤ r^{−k}`
/// (costing `k` single-child rescalings), then cut greedily into maximal
/// consecutive pieces of weight at most `r^{−1}`; there are at most `r` of
/// them, and each piece lowered by one is certified recursively.
pub fn build_k_certificate(m: &ExponentSeq, params: &Params) -> Result<Certificate> {
    let total = phi_exact(m.as_slice(), params.r);
    if total > BigRational::one() {
        return Err(Error::NotMember(format!(
            "Φ(m) = {} exceeds 1",
            to_f64(&total)
        )));
    }
    let node = successive_tree(m.as_slice(), 1, params.r)?;
    let cert = Certificate { mode: Mode::Successive, node };
    let replay = verify_certificate(&cert, params)?;
    if replay != v_map(m, params) {
        return Err(Error::Construction("certificate does not replay to V(m)".into()));
    }
    Ok(cert)
}

/// Tree for `V(m)` placed at indices `first, first + 1, …`.
fn successive_tree(m: &[i32], first: usize, r: u32) -> Result<CertNode> {
    let total = phi_exact(m, r);
    let mut shift = 0i32;
    while total.clone() * power_of_r(r, i64::from(shift) + 1) <= BigRational::one() {
        shift += 1;
    }
    if m.len() == 1 {
        // Φ = r^{−m(1)} exactly, so the shift consumes the whole exponent.
        debug_assert_eq!(shift, m[0]);
        return Ok(CertNode::Leaf(Sign::Plus, first).rescaled(shift as usize));
    }
    let lowered: Vec<i32> = m.iter().map(|&e| e - shift).collect();
    let bound = power_of_r(r, -1);
    let mut pieces: Vec<(usize, usize)> = Vec::new();
    let mut start = 0usize;
    while start < lowered.len() {
        let mut end = start;
        while end < lowered.len() && phi_exact(&lowered[start..=end], r) <= bound {
            end += 1;
        }
        if end == start {
            return Err(Error::Construction(format!(
                "piece starting at {} has weight above 1/r",
                first + start
            )));
        }
        pieces.push((start, end));
        start = end;
    }
    if pieces.len() > r as usize || pieces.len() < 2 {
        return Err(Error::Construction(format!(
            "greedy split produced {} pieces for r = {r}",
            pieces.len()
        )));
    }
    let children = pieces
        .into_iter()
        .map(|(lo, hi)| {
            let child: Vec<i32> = lowered[lo..hi].iter().map(|&e| e - 1).collect();
            successive_tree(&child, first + lo, r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CertNode::Children(children).rescaled(shift as usize))
}

/// Successive-mode certificate for an arbitrary `t`-grid vector whose level
/// sequence (in index order) has `Φ ≤ 1`.
pub fn certify_successive(y: &GridVector, params: &Params) -> Result<Certificate> {
    if y.base().kind != Some(BaseKind::T) {
        return Err(Error::InvalidVector("expected a t-grid vector".into()));
    }
    if y.is_empty() {
        return Err(Error::InvalidVector("the zero vector has no certificate".into()));
    }
    let indices: Vec<usize> = y.support().collect();
    let m = ExponentSeq::new(y.levels())?;
    let pattern = build_k_certificate(&m, params)?;
    let node = pattern
        .node
        .map_indices(|k| indices[k - 1])
        .with_signs(|i| y.get(i).map_or(Sign::Plus, |e| e.sign));
    let cert = Certificate { mode: Mode::Successive, node };
    if verify_certificate(&cert, params)? != *y {
        return Err(Error::Construction("relabelled certificate does not replay".into()));
    }
    Ok(cert)
}

/// A member of `K^M_{q,r}` written as `y_1 + y_2 + y_3` with
/// `y_1 < y_2 < y_3`, each piece certified in `K_{q,r}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreeSplit {
    pub pieces: Vec<GridVector>,
    /// `None` for empty pieces.
    pub certificates: Vec<Option<Certificate>>,
}

/// Cut `y` into three successive pieces of `q`-mass at most `1/2` and
/// certify each one. A vector with an entry `±1` is a signed unit vector
/// and comes back as a single leaf.
pub fn three_split(y: &GridVector, params: &Params) -> Result<ThreeSplit> {
    if y.is_empty() || !km_membership(y, params) {
        return Err(Error::NotMember("three-way split needs a nonzero member of K^M".into()));
    }
    let base = y.base();
    let empty = GridVector::new(base);
    if y.iter().any(|(_, e)| e.level() == 0) {
        let (i, e) = y.iter().next().expect("nonempty");
        let cert = Certificate { mode: Mode::Successive, node: CertNode::Leaf(e.sign, i) };
        return Ok(ThreeSplit {
            pieces: vec![y.clone(), empty.clone(), empty],
            certificates: vec![Some(cert), None, None],
        });
    }
    let half = BigRational::new(1.into(), 2.into());
    let entries: Vec<(usize, GridEntry)> = y.iter().collect();
    let mut pieces: Vec<Vec<(usize, GridEntry)>> = vec![Vec::new(); 3];
    let mut piece = 0usize;
    let mut mass = BigRational::zero();
    for &(i, e) in &entries {
        let w = power_of_r(params.r, -i64::from(e.level()));
        if piece < 2 && (mass.clone() + &w).cmp(&half) == Ordering::Greater {
            piece += 1;
            mass = BigRational::zero();
        }
        mass += w;
        pieces[piece].push((i, e));
    }
    let pieces: Vec<GridVector> = pieces
        .into_iter()
        .map(|p| GridVector::from_entries(base, p))
        .collect::<Result<_>>()?;
    let mut certificates = Vec::with_capacity(3);
    for p in &pieces {
        if kraft_sum(p.levels(), params.r) > half {
            return Err(Error::Construction("a piece exceeds q-mass 1/2".into()));
        }
        certificates.push(if p.is_empty() { None } else { Some(certify_successive(p, params)?) });
    }
    Ok(ThreeSplit { pieces, certificates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_params;

    fn seq(e: &[i32]) -> ExponentSeq {
        ExponentSeq::new(e.to_vec()).unwrap()
    }

    #[test]
    fn phi_formulas() {
        let pr = derive_params(2.0, 2).unwrap();
        assert_eq!(phi(&seq(&[1]), &pr), 0.5);
        assert_eq!(phi(&seq(&[1, 2]), &pr), 0.75);
        assert_eq!(phi(&seq(&[1, 2, 1]), &pr), 1.5);
        assert_eq!(phi(&seq(&[-1]), &pr), 2.0);
        assert!(ExponentSeq::new(vec![]).is_err());
        assert_eq!("1, 2,1".parse::<ExponentSeq>().unwrap(), seq(&[1, 2, 1]));
        assert!("1,x".parse::<ExponentSeq>().is_err());
    }

    #[test]
    fn v_map_examples() {
        let pr = derive_params(2.0, 2).unwrap();
        let v = v_map(&seq(&[1, 1]), &pr);
        assert_eq!(v.levels(), vec![1, 1]);
        let pr3 = derive_params(2.0, 3).unwrap();
        let v = v_map(&seq(&[2]), &pr3);
        assert_eq!(v.get(1), Some(GridEntry::new(Sign::Plus, -2)));
    }

    #[test]
    fn certificate_examples() {
        let pr = derive_params(2.0, 2).unwrap();
        let c = build_k_certificate(&seq(&[1, 1]), &pr).unwrap();
        assert_eq!(
            c.node,
            CertNode::Children(vec![CertNode::Leaf(Sign::Plus, 1), CertNode::Leaf(Sign::Plus, 2)])
        );
        let c = build_k_certificate(&seq(&[1, 2]), &pr).unwrap();
        assert_eq!(
            c.node,
            CertNode::Children(vec![
                CertNode::Leaf(Sign::Plus, 1),
                CertNode::Children(vec![CertNode::Leaf(Sign::Plus, 2)]),
            ])
        );
        let c = build_k_certificate(&seq(&[2, 2]), &pr).unwrap();
        assert_eq!(verify_certificate(&c, &pr).unwrap(), v_map(&seq(&[2, 2]), &pr));
        assert!(build_k_certificate(&seq(&[1, 2, 1]), &pr).is_err());
        let c = build_k_certificate(&seq(&[0]), &pr).unwrap();
        assert_eq!(c.node, CertNode::Leaf(Sign::Plus, 1));
    }

    #[test]
    fn three_split_halves() {
        let pr = derive_params(2.0, 2).unwrap();
        let y = v_map(&seq(&[1, 1]), &pr);
        let s = three_split(&y, &pr).unwrap();
        assert_eq!(s.pieces[0].levels(), vec![1]);
        assert_eq!(s.pieces[1].levels(), vec![1]);
        assert!(s.pieces[2].is_empty());
        assert!(s.certificates[2].is_none());
    }

    #[test]
    fn three_split_unit_vector() {
        let pr = derive_params(2.0, 3).unwrap();
        let y = GridVector::from_entries(pr.base(BaseKind::T), [(4, GridEntry::new(Sign::Minus, 0))]).unwrap();
        let s = three_split(&y, &pr).unwrap();
        assert_eq!(s.certificates[0].as_ref().unwrap().node, CertNode::Leaf(Sign::Minus, 4));
    }

    #[test]
    fn three_split_uses_all_three_pieces() {
        let pr = derive_params(2.0, 2).unwrap();
        // Masses 1/4, 1/2, 1/4 in index order.
        let y = v_map(&seq(&[2, 1, 2]), &pr);
        let s = three_split(&y, &pr).unwrap();
        let lens: Vec<usize> = s.pieces.iter().map(GridVector::len).collect();
        assert_eq!(lens, vec![1, 1, 1]);
        let total = GridVector::disjoint_sum(y.base(), &s.pieces).unwrap();
        assert_eq!(total, y);
        for (p, c) in s.pieces.iter().zip(&s.certificates) {
            assert_eq!(&verify_certificate(c.as_ref().unwrap(), &pr).unwrap(), p);
        }
    }
}
