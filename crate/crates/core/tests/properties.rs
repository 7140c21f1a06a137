//! Property tests for the norm, certificate and interchange invariants.

mod common;

use common::*;
use proptest::prelude::*;
use tsirelson::certificate::{build_km_certificate, verify_certificate};
use tsirelson::classical::classical_norm;
use tsirelson::io;
use tsirelson::modified::modified_norm;
use tsirelson::successive::phi_exact;
use tsirelson::vector::{quantize_to_grid, restrict, spread, GridEntry};
use tsirelson::{BaseKind, GridVector, Params, Sign, SparseVector};

fn any_params() -> impl Strategy<Value = Params> {
    (0..PARAM_SET.len()).prop_map(|k| params(PARAM_SET[k].0, PARAM_SET[k].1))
}

/// Entries with distinct increasing indices and magnitudes in `[1e-3, 1]`.
fn any_vector(max_support: usize) -> impl Strategy<Value = SparseVector> {
    prop::collection::vec((1usize..4, 1e-3f64..1.0, any::<bool>()), 1..=max_support).prop_map(|raw| {
        let mut index = 0;
        SparseVector::from_entries(raw.into_iter().map(|(gap, v, neg)| {
            index += gap;
            (index, if neg { -v } else { v })
        }))
        .unwrap()
    })
}

fn norms(x: &SparseVector, pr: &Params) -> (f64, f64) {
    (classical_norm(x, pr).unwrap().value, modified_norm(x, pr, 1e-12).unwrap().value)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn sandwich_and_three_equivalence(pr in any_params(), x in any_vector(24)) {
        let (c, m) = norms(&x, &pr);
        prop_assert!(c <= m + 1e-9);
        prop_assert!(m <= lp(&x, pr.p) + 1e-9);
        prop_assert!(m <= 3.0 * c + 1e-9);
        prop_assert!(x.sup_norm() <= c + 1e-12);
    }

    #[test]
    fn sign_changes_do_not_matter(pr in any_params(), x in any_vector(16), flips in prop::collection::vec(any::<bool>(), 16)) {
        let y = SparseVector::from_entries(
            x.iter().zip(flips.iter().cycle()).map(|((i, v), &f)| (i, if f { -v } else { v })),
        ).unwrap();
        let (c1, m1) = norms(&x, &pr);
        let (c2, m2) = norms(&y, &pr);
        prop_assert_eq!(c1.to_bits(), c2.to_bits());
        prop_assert_eq!(m1.to_bits(), m2.to_bits());
    }

    #[test]
    fn spreading_preserves_both_norms(pr in any_params(), x in any_vector(16), stretch in 1usize..5, offset in 0usize..7) {
        let y = spread(&x, |i| stretch * i + offset).unwrap();
        let (c1, m1) = norms(&x, &pr);
        let (c2, m2) = norms(&y, &pr);
        prop_assert_eq!(c1.to_bits(), c2.to_bits());
        prop_assert_eq!(m1.to_bits(), m2.to_bits());
    }

    #[test]
    fn restriction_never_increases(pr in any_params(), x in any_vector(16), keep in prop::collection::vec(any::<bool>(), 16)) {
        let set = x.support().zip(keep.iter()).filter(|(_, &k)| k).map(|(i, _)| i).collect();
        let y = restrict(&x, &set);
        let (c1, m1) = norms(&x, &pr);
        let (c2, m2) = norms(&y, &pr);
        prop_assert!(c2 <= c1 + 1e-12);
        prop_assert!(m2 <= m1 + 1e-12);
    }

    #[test]
    fn modified_norm_ignores_order(pr in any_params(), x in any_vector(16), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut values = x.values();
        values.shuffle(&mut rng(seed));
        let y = SparseVector::from_dense(&values).unwrap();
        let a = modified_norm(&x, &pr, 1e-12).unwrap().value;
        let b = modified_norm(&y, &pr, 1e-12).unwrap().value;
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn norms_are_homogeneous(pr in any_params(), x in any_vector(16), k in -4i32..4) {
        // Scaling by a power of two is exact in binary floating point.
        let factor = 2f64.powi(k);
        let (c1, m1) = norms(&x, &pr);
        let (c2, m2) = norms(&x.scale(factor), &pr);
        prop_assert!(close(c2, factor * c1, 1e-12));
        prop_assert!(close(m2, factor * m1, 1e-9));
    }

    #[test]
    fn phi_is_additive_at_interior_points(r in 2u32..6, m in prop::collection::vec(0i32..7, 3..20), cut in any::<prop::sample::Index>()) {
        let i = 1 + cut.index(m.len() - 2);
        prop_assert_eq!(phi_exact(&m, r), phi_exact(&m[..=i], r) + phi_exact(&m[i..], r));
        prop_assert_eq!(phi_exact(&m, r), reference_phi(&m, r));
    }

    #[test]
    fn disjoint_certificates_replay(pr in any_params(), seed in any::<u64>()) {
        let y = random_member(&mut rng(seed), &pr, BaseKind::T, 24, 6);
        let cert = build_km_certificate(&y, &pr).unwrap();
        prop_assert!(verify_certificate(&cert, &pr).unwrap() == y);
        let text = io::certificate_json(&cert).to_string();
        prop_assert!(io::parse_certificate(&text).unwrap() == cert);
    }

    #[test]
    fn vector_files_round_trip(pr in any_params(), x in any_vector(20), exps in prop::collection::vec(-512i32..=512, 1..20)) {
        let back = io::parse_vector(&io::sparse_json(&x).to_string(), &pr).unwrap().to_sparse();
        prop_assert!(back.iter().zip(x.iter()).all(|(a, b)| a.0 == b.0 && a.1.to_bits() == b.1.to_bits()));
        let g = GridVector::from_entries(
            pr.base(BaseKind::S),
            exps.iter().enumerate().map(|(k, &e)| (k + 1, GridEntry::new(if e % 2 == 0 { Sign::Plus } else { Sign::Minus }, e))),
        ).unwrap();
        let back = io::parse_vector(&io::grid_json(&g).to_string(), &pr).unwrap();
        prop_assert!(back.expect_grid(BaseKind::S).unwrap() == &g);
    }

    #[test]
    fn grid_values_survive_requantization(pr in any_params(), exps in prop::collection::vec(-512i32..=512, 1..20)) {
        let base = pr.base(BaseKind::Alpha);
        let g = GridVector::from_entries(base, exps.iter().enumerate().map(|(k, &e)| (k + 1, GridEntry::new(Sign::Minus, e)))).unwrap();
        prop_assert!(quantize_to_grid(&g.to_sparse(), base).unwrap() == g);
    }
}
