//! Randomized invariants via proptest. These overlap deliberately with the
//! module unit tests but draw from wider input distributions.

use num_bigint::BigUint;
use proptest::prelude::*;

use fqrank::gf::{Elem, Field};
use fqrank::io;
use fqrank::slicerank;
use fqrank::strata;
use fqrank::subrank;
use fqrank::tensor::FqTensor;

fn arb_field() -> impl Strategy<Value = Field> {
    prop_oneof![
        Just(Field::build(2, 1).unwrap()),
        Just(Field::build(3, 1).unwrap()),
        Just(Field::build(2, 2).unwrap()),
        Just(Field::build(5, 1).unwrap()),
    ]
}

fn arb_tensor(max_dim: usize) -> impl Strategy<Value = FqTensor> {
    (arb_field(), proptest::collection::vec(1..=max_dim, 3), any::<u64>())
        .prop_map(|(f, dims, seed)| FqTensor::random(f, dims, seed).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn io_round_trips(t in arb_tensor(3)) {
        let s = io::tensor_to_structured(&t);
        prop_assert_eq!(&io::tensor_from_str(&s).unwrap(), &t);
        let c = io::tensor_to_compact(&t);
        prop_assert_eq!(&io::tensor_from_str(&c).unwrap(), &t);
        // the writer is canonical: parse then re-serialize is the identity
        prop_assert_eq!(io::tensor_to_structured(&io::tensor_from_str(&s).unwrap()), s);
    }

    #[test]
    fn direct_sum_flattening_ranks_add(a in arb_tensor(3), seed in any::<u64>()) {
        let b = FqTensor::random(a.field().clone(), a.dims().to_vec(), seed).unwrap();
        let s = a.direct_sum(&b).unwrap();
        for modes in [&[1usize][..], &[2], &[3], &[1, 2]] {
            let ra = a.flatten(modes).unwrap().rank();
            let rb = b.flatten(modes).unwrap().rank();
            let rs = s.flatten(modes).unwrap().rank();
            prop_assert_eq!(rs, ra + rb);
        }
    }

    #[test]
    fn kronecker_flattening_ranks_multiply(a in arb_tensor(2), seed in any::<u64>()) {
        let b = FqTensor::random(a.field().clone(), vec![2, 2, 2], seed).unwrap();
        let p = a.kronecker(&b).unwrap();
        for modes in [&[1usize][..], &[3]] {
            let ra = a.flatten(modes).unwrap().rank();
            let rb = b.flatten(modes).unwrap().rank();
            let rp = p.flatten(modes).unwrap().rank();
            prop_assert_eq!(rp, ra * rb);
        }
    }

    #[test]
    fn gr_between_zero_and_flattening_bound(t in arb_tensor(3)) {
        let g = strata::geometric_rank(&t, 2, strata::DEFAULT_BUDGET).unwrap();
        prop_assert!(g.value <= strata::flattening_upper_bound(&t));
        prop_assert_eq!(g.value == 0, t.is_zero());
    }

    #[test]
    fn greedy_certificates_verify(t in arb_tensor(3), seed in any::<u64>()) {
        let target = *t.dims().iter().min().unwrap();
        let out = subrank::greedy_diagonalize(&t, target, subrank::DEFAULT_GREEDY_BUDGET, seed).unwrap();
        if let Some(cert) = out.certificate() {
            prop_assert!(subrank::check_certificate(&t, cert).unwrap());
        }
    }

    #[test]
    fn slice_rank_upper_decomposition_reconstructs(t in arb_tensor(3)) {
        let (r, dec) = slicerank::slice_rank_upper(&t).unwrap();
        prop_assert_eq!(dec.len(), r);
        prop_assert!(dec.reconstructs(&t).unwrap());
    }

    #[test]
    fn bias_denominator_and_zero_tensor(dims in proptest::collection::vec(1usize..=3, 3)) {
        let f = Field::build(2, 1).unwrap();
        let t = FqTensor::zero(f.clone(), dims.clone()).unwrap();
        let b = strata::bias_and_ar(&t, strata::DEFAULT_BUDGET).unwrap();
        // the zero tensor vanishes everywhere: Z = q^E, bias 1, AR 0
        prop_assert_eq!(&b.z, &BigUint::from(2u32).pow(b.e));
        prop_assert!(b.analytic_rank_f64().abs() < 1e-9);
    }

    #[test]
    fn gaussian_binomial_symmetry(n in 0u32..=6, c in 0u32..=6) {
        prop_assume!(c <= n);
        for q in [2u64, 3, 4] {
            let a = strata::gaussian_binomial(c, n, q).unwrap();
            let b = strata::gaussian_binomial(n - c, n, q).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn diagonal_family_subrank(vals in proptest::collection::vec(0u16..2, 1..=3)) {
        let f = Field::build(2, 1).unwrap();
        let vals: Vec<Elem> = vals;
        let t = FqTensor::diagonal(f, &vals, 3).unwrap();
        let nnz = vals.iter().filter(|&&v| v != 0).count();
        let g = strata::geometric_rank(&t, 3, strata::DEFAULT_BUDGET).unwrap();
        prop_assert!(g.certain);
        prop_assert_eq!(g.value, nnz);
        let rep = subrank::subrank_report(&t, &subrank::ReportOptions::default()).unwrap();
        prop_assert_eq!(rep.exact, Some(nnz));
    }
}
