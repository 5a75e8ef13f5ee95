use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use proptest::prelude::*;

use dhsp_sieve::greedy::alpha_radix;
use dhsp_sieve::group::{crt_split, mod_inverse, signed_rep, Element, GroupCtx};
use dhsp_sieve::oracle::make_reflection_oracle;
use dhsp_sieve::phase::{Branch, PhaseBackend};
use dhsp_sieve::staged::match_by_suffix;
use dhsp_sieve::verifier::rho_coset_mixture;
use dhsp_sieve::Error;

fn big(bytes: &[u8]) -> BigUint {
    BigUint::from_bytes_le(bytes)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn oracle_constant_exactly_on_cosets(n in 1u64.., s in any::<u64>(), a in any::<u64>(), d in 1u64..) {
        let (s, a) = (BigUint::from(s % n), BigUint::from(a % n));
        let o = make_reflection_oracle(&GroupCtx::new(n).unwrap(), &s).unwrap();
        prop_assert!(o.check_reflection(std::slice::from_ref(&s), std::slice::from_ref(&a)).unwrap());
        let other = (&a + BigUint::from(d % n)) % n;
        if other != a {
            let fa = o.evaluate_element(&Element::new(false, vec![a.clone()])).unwrap();
            let fo = o.evaluate_element(&Element::new(false, vec![other])).unwrap();
            prop_assert_ne!(fa, fo);
        }
    }

    #[test]
    fn restriction_halves_the_slope(n in 1u32..40, s in any::<u64>(), a in any::<u64>()) {
        let modulus = BigUint::from(1u8) << n;
        let s = BigUint::from(s) % &modulus;
        let o = make_reflection_oracle(&GroupCtx::new(modulus.clone()).unwrap(), &s).unwrap();
        let view = o.restrict_parity(s.is_odd()).unwrap();
        let half = &modulus >> 1;
        let a = BigUint::from(a) % &half;
        prop_assert!(view.check_reflection(&[&s >> 1], &[a]).unwrap());
    }

    #[test]
    fn combine_labels(n in 2u64..1_000_000, s in any::<u64>(), seed in any::<u64>()) {
        let o = make_reflection_oracle(&GroupCtx::new(n).unwrap(), &BigUint::from(s % n)).unwrap();
        let mut be = PhaseBackend::from_seed(o.clone(), seed);
        let (p, q) = (be.sample_phase_qubit(), be.sample_phase_qubit());
        let (k, l) = (p.k().clone(), q.k().clone());
        let (r, branch) = be.combine(p, q).unwrap();
        let nb = BigUint::from(n);
        let want = match branch {
            Branch::Sum => (&k + &l) % &nb,
            Branch::Difference => (&k + &nb - &l) % &nb,
        };
        prop_assert_eq!(r.k(), &want);
        prop_assert_eq!(o.queries(), 2);

        let mut other = PhaseBackend::from_seed(o, seed ^ 1);
        let foreign = other.sample_phase_qubit();
        let mixed = be.combine(r, foreign);
        prop_assert!(matches!(mixed, Err(Error::MixedBackends(_, _))));
    }

    #[test]
    fn suffix_matching(labels in prop::collection::vec(any::<u16>(), 0..200), lo in 0u64..8, width in 1u64..6) {
        let hi = lo + width;
        let items: Vec<BigUint> = labels.iter().map(|&x| BigUint::from(x)).collect();
        let total = items.len();
        let window = |k: &BigUint| (k >> lo) % (BigUint::from(1u8) << width);
        let (pairs, rest) = match_by_suffix(items, |k| k, lo, hi);
        prop_assert_eq!(2 * pairs.len() + rest.len(), total);
        for (a, b) in &pairs {
            prop_assert_eq!(window(a), window(b));
        }
        let mut seen = std::collections::HashSet::new();
        for r in &rest {
            prop_assert!(seen.insert(window(r)));
        }
    }

    #[test]
    fn coset_mixture_is_a_state(n in 1u64..=24, s in any::<u64>()) {
        let rho = rho_coset_mixture(n, s % n).unwrap();
        prop_assert!(rho.check_invariants(1e-10).is_ok());
    }

    #[test]
    fn signed_representatives(x in prop::collection::vec(any::<u8>(), 1..20), n in prop::collection::vec(any::<u8>(), 1..20)) {
        let n = big(&n) + 1u8;
        let x = big(&x) % &n;
        let r = signed_rep(&x, &n);
        let nb = BigInt::from(n.clone());
        prop_assert_eq!(((&r % &nb) + &nb) % &nb, BigInt::from(x));
        prop_assert!(&r * 2 > -nb.clone() && &r * 2 <= nb);
    }

    #[test]
    fn crt_and_inverses(n in 1u64..1_000_000_000, a in any::<u64>()) {
        let nb = BigUint::from(n);
        let c = crt_split(&nb);
        prop_assert_eq!((BigUint::from(1u8) << c.two_exp) * &c.odd, nb.clone());
        let a = BigUint::from(a) % &nb;
        if let Some(inv) = mod_inverse(&a, &nb) {
            prop_assert_eq!((&a * inv) % &nb, BigUint::from(1u8) % &nb);
        } else {
            prop_assert!(a.gcd(&nb) != BigUint::from(1u8));
        }
    }

    #[test]
    fn alpha_counts_factors(unit in 1u64..1_000_000, j in 0u32..40, r in 2u32..7) {
        prop_assume!(unit % u64::from(r) != 0);
        let k = BigUint::from(unit) * BigUint::from(r).pow(j);
        prop_assert_eq!(alpha_radix(&k, r), u64::from(j));
    }
}
