//! The sign sequence ξ_(1), …, ξ_(n): signs of the observations sorted by
//! strictly decreasing absolute value. Under a continuous symmetric null
//! the entries are i.i.d. Rademacher, which is what makes every test built
//! on it distribution-free.

use rand::Rng;

use crate::error::{Error, Result};

/// Signs of a sample ordered by decreasing |x|. Entries are exactly ±1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignSequence {
    signs: Vec<i8>,
}

impl SignSequence {
    /// Wrap a raw ±1 vector (used by calibration simulations).
    pub fn from_signs(signs: Vec<i8>) -> Result<Self> {
        if signs.is_empty() {
            return Err(Error::Domain("sign sequence must be non-empty".into()));
        }
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::Domain("sign sequence entries must be ±1".into()));
        }
        Ok(Self { signs })
    }

    /// n i.i.d. fair signs, drawn 64 per generator word.
    pub fn rademacher<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("sign sequence must be non-empty".into()));
        }
        let mut signs = Vec::with_capacity(n);
        let mut remaining = n;
        while remaining > 0 {
            let mut word: u64 = rng.gen();
            let take = remaining.min(64);
            for _ in 0..take {
                signs.push(if word & 1 == 1 { 1 } else { -1 });
                word >>= 1;
            }
            remaining -= take;
        }
        Ok(Self { signs })
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }
}

/// Build the sign sequence of a sample.
///
/// Ties in |x| are broken by a seeded uniform permutation of the tied block
/// and exact zeros receive an independent fair sign, so the null law stays
/// exactly i.i.d. Rademacher even on floating-point data with collisions.
pub fn build_sign_sequence<R: Rng + ?Sized>(x: &[f64], rng: &mut R) -> Result<SignSequence> {
    if x.is_empty() {
        return Err(Error::Domain(
            "cannot build a sign sequence from an empty sample".into(),
        ));
    }
    if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!(
            "sample entries must be finite, got {bad}"
        )));
    }

    let keys: Vec<u64> = (0..x.len()).map(|_| rng.gen()).collect();
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| {
        x[b].abs()
            .total_cmp(&x[a].abs())
            .then_with(|| keys[a].cmp(&keys[b]))
    });

    let signs = idx
        .iter()
        .map(|&i| {
            let v = x[i];
            if v > 0.0 {
                1
            } else if v < 0.0 {
                -1
            } else if rng.gen::<bool>() {
                1
            } else {
                -1
            }
        })
        .collect();
    Ok(SignSequence { signs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn hand_sorted_examples() {
        let seq = build_sign_sequence(&[3.0, -1.0, 2.0], &mut rng(0)).unwrap();
        assert_eq!(seq.signs(), &[1, 1, -1]);

        let seq = build_sign_sequence(&[-5.0], &mut rng(0)).unwrap();
        assert_eq!(seq.signs(), &[-1]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_sign_sequence(&[], &mut rng(0)).is_err());
        assert!(build_sign_sequence(&[1.0, f64::NAN], &mut rng(0)).is_err());
        assert!(build_sign_sequence(&[f64::INFINITY], &mut rng(0)).is_err());
        assert!(SignSequence::from_signs(vec![1, 0, -1]).is_err());
        assert!(SignSequence::from_signs(vec![]).is_err());
    }

    #[test]
    fn null_sign_mean_concentrates() {
        // 1000 symmetric draws: mean of signs within 4/sqrt(1000)
        let mut r = rng(11);
        let x: Vec<f64> = (0..1000)
            .map(|_| {
                let u: f64 = rand::Rng::gen::<f64>(&mut r) - 0.5;
                u * 10.0
            })
            .collect();
        let seq = build_sign_sequence(&x, &mut r).unwrap();
        let mean = seq.signs().iter().map(|&s| s as f64).sum::<f64>() / 1000.0;
        assert!(mean.abs() < 0.124, "mean {mean}");
    }

    #[test]
    fn zeros_get_random_signs_with_fair_law() {
        let x = vec![0.0; 4096];
        let seq = build_sign_sequence(&x, &mut rng(3)).unwrap();
        let plus = seq.signs().iter().filter(|&&s| s == 1).count();
        assert!((plus as f64 - 2048.0).abs() < 4.0 * 32.0, "plus {plus}");
    }

    #[test]
    fn tied_blocks_are_uniformly_permuted() {
        // two tied values of magnitude 1 with opposite signs: the leading
        // sign should be + about half the time over seeds
        let x = vec![1.0, -1.0];
        let mut lead_plus = 0;
        for seed in 0..2000 {
            let seq = build_sign_sequence(&x, &mut rng(seed)).unwrap();
            if seq.signs()[0] == 1 {
                lead_plus += 1;
            }
        }
        assert!((lead_plus as f64 - 1000.0).abs() < 4.0 * (2000.0_f64 * 0.25).sqrt());
    }

    #[test]
    fn rademacher_matches_length_and_law() {
        let seq = SignSequence::rademacher(1000, &mut rng(1)).unwrap();
        assert_eq!(seq.len(), 1000);
        let mean = seq.signs().iter().map(|&s| s as f64).sum::<f64>() / 1000.0;
        assert!(mean.abs() < 0.124);
        assert!(SignSequence::rademacher(0, &mut rng(1)).is_err());
    }

    proptest! {
        #[test]
        fn permutation_invariance_for_distinct_magnitudes(
            xs in proptest::collection::vec(-1e6_f64..1e6, 1..40),
            seed in 0u64..1000,
            perm_seed in 0u64..1000,
        ) {
            // force distinct |x| by nudging duplicates
            let mut xs = xs;
            xs.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
            for i in 1..xs.len() {
                if xs[i].abs() <= xs[i-1].abs() {
                    let bumped = xs[i-1].abs() * (1.0 + 1e-9) + 1e-9;
                    xs[i] = bumped.copysign(if xs[i] == 0.0 { 1.0 } else { xs[i] });
                }
            }
            let mut shuffled = xs.clone();
            use rand::seq::SliceRandom;
            shuffled.shuffle(&mut rng(perm_seed));

            let a = build_sign_sequence(&xs, &mut rng(seed)).unwrap();
            let b = build_sign_sequence(&shuffled, &mut rng(seed.wrapping_add(1))).unwrap();
            prop_assert_eq!(a.signs(), b.signs());
        }

        #[test]
        fn negation_and_scaling(
            xs in proptest::collection::vec(-1e6_f64..1e6, 1..40),
            scale in 1e-6_f64..1e6,
            seed in 0u64..1000,
        ) {
            let nonzero: Vec<f64> = xs.iter().map(|&v| if v == 0.0 { 0.5 } else { v }).collect();
            let neg: Vec<f64> = nonzero.iter().map(|v| -v).collect();
            let scaled: Vec<f64> = nonzero.iter().map(|v| v * scale).collect();

            let a = build_sign_sequence(&nonzero, &mut rng(seed)).unwrap();
            let b = build_sign_sequence(&neg, &mut rng(seed)).unwrap();
            let flipped: Vec<i8> = a.signs().iter().map(|s| -s).collect();
            prop_assert_eq!(b.signs(), &flipped[..]);

            let c = build_sign_sequence(&scaled, &mut rng(seed)).unwrap();
            prop_assert_eq!(a.signs(), c.signs());
        }
    }
}
