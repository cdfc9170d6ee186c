//! Property tests for the pairing and `delta` on the Carlitz tower at `q = 2`.

use std::sync::{Arc, OnceLock};

use drl_core::reciprocity::{delta, pairing_rhs, vanishing_bound, PairingForm};
use drl_core::sample;
use drl_core::verify::RunConfig;
use drl_core::{DrinfeldModule, LocalField, Tower, TowerElem};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tower() -> &'static Tower {
    static TOWER: OnceLock<Tower> = OnceLock::new();
    TOWER.get_or_init(|| {
        let field = LocalField::new(2, 1, 1, 32).unwrap();
        Tower::new(Arc::new(DrinfeldModule::carlitz(&field).unwrap()))
    })
}

/// `v_n^k` times a unit drawn from `seed`.
fn element(n: u32, k: i64, seed: u64) -> TowerElem {
    let level = tower().level(n).unwrap();
    sample::with_valuation(&level, &mut ChaCha8Rng::seed_from_u64(seed), k)
}

/// Exponents `k` with `2 <= k / e_n <= n + 1`, the range where the log form applies.
fn alpha_exponent(n: u32) -> std::ops::RangeInclusive<i64> {
    let e = tower().level(n).unwrap().degree() as i64;
    2 * e..=(n as i64 + 1) * e
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pairing_is_additive_in_alpha(n in 1u32..=3, k1 in 0i64..64, k2 in 0i64..64, s in any::<u64>(), kb in -3i64..=3) {
        let range = alpha_exponent(n);
        let span = range.end() - range.start() + 1;
        let a1 = element(n, range.start() + k1 % span, s);
        let a2 = element(n, range.start() + k2 % span, s ^ 1);
        let beta = element(n, kb, s ^ 2);
        let t = tower();
        let left = pairing_rhs(t, &a1.add(&a2), &beta, PairingForm::Log).unwrap();
        let right = pairing_rhs(t, &a1, &beta, PairingForm::Log).unwrap()
            .add(&pairing_rhs(t, &a2, &beta, PairingForm::Log).unwrap(), t).unwrap();
        prop_assert_eq!(left.coord(), right.coord());
    }

    #[test]
    fn pairing_is_multiplicative_in_beta(n in 1u32..=3, k in 0i64..64, s in any::<u64>(), k1 in -3i64..=3, k2 in -3i64..=3) {
        let range = alpha_exponent(n);
        let alpha = element(n, range.start() + k % (range.end() - range.start() + 1), s);
        let (b1, b2) = (element(n, k1, s ^ 3), element(n, k2, s ^ 4));
        let t = tower();
        let left = pairing_rhs(t, &alpha, &b1.mul(&b2), PairingForm::Log).unwrap();
        let right = pairing_rhs(t, &alpha, &b1, PairingForm::Log).unwrap()
            .add(&pairing_rhs(t, &alpha, &b2, PairingForm::Log).unwrap(), t).unwrap();
        prop_assert_eq!(left.coord(), right.coord());
    }

    #[test]
    fn pairing_vanishes_above_the_bound(n in 1u32..=3, extra in 1i64..16, s in any::<u64>(), kb in -3i64..=3) {
        let level = tower().level(n).unwrap();
        let k = sample::min_exponent_above(&level, vanishing_bound(2, n, 1)) + extra - 1;
        let value = pairing_rhs(tower(), &element(n, k, s), &element(n, kb, s ^ 5), PairingForm::Log).unwrap();
        prop_assert!(value.is_zero());
    }

    #[test]
    fn delta_is_a_homomorphism(n in 1u32..=3, s in any::<u64>(), k1 in -3i64..=3, k2 in -3i64..=3) {
        let (b1, b2) = (element(n, k1, s), element(n, k2, s ^ 6));
        let t = tower();
        let sum = delta(t, &b1).unwrap().representative().add(delta(t, &b2).unwrap().representative());
        prop_assert!(delta(t, &b1.mul(&b2)).unwrap().congruent_to(&sum).unwrap());
    }

    #[test]
    fn config_text_round_trips(
        levels in proptest::collection::vec(1u32..6, 1..4),
        seed in any::<u64>(),
        samples in 1usize..500,
        pi_prec in 16i64..64,
    ) {
        let mut cfg = RunConfig::carlitz(3);
        cfg.levels = levels;
        cfg.seed = seed;
        cfg.samples = samples;
        cfg.pi_prec = pi_prec;
        let parsed = RunConfig::parse(&cfg.to_text()).unwrap();
        prop_assert_eq!(parsed.digest(), cfg.digest());
        prop_assert_eq!(parsed, cfg);
    }
}
