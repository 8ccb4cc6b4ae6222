//! Weighted isotonic least squares via pool-adjacent-violators (PAVA).
//!
//! Given values v_1..v_n with positive weights ordered by their covariate,
//! PAVA computes the weighted L2 projection onto the cone of nondecreasing
//! (isotonic) or nonincreasing (antitonic) sequences. Blocks that violate the
//! ordering are repeatedly merged into their weighted mean; the result is the
//! exact global minimizer.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PavaError {
    #[error("values and weights differ in length ({values} vs {weights})")]
    LengthMismatch { values: usize, weights: usize },
    #[error("non-finite value {value} at position {index}")]
    NonFiniteValue { index: usize, value: f64 },
    #[error("weight {weight} at position {index} is not positive and finite")]
    BadWeight { index: usize, weight: f64 },
}

/// Weighted least-squares projection onto nondecreasing sequences.
pub fn isotonic_ls(values: &[f64], weights: &[f64]) -> Result<Vec<f64>, PavaError> {
    validate(values, weights)?;
    Ok(pool(values, weights, false))
}

/// Weighted least-squares projection onto nonincreasing sequences.
pub fn antitonic_ls(values: &[f64], weights: &[f64]) -> Result<Vec<f64>, PavaError> {
    validate(values, weights)?;
    Ok(pool(values, weights, true))
}

fn validate(values: &[f64], weights: &[f64]) -> Result<(), PavaError> {
    if values.len() != weights.len() {
        return Err(PavaError::LengthMismatch { values: values.len(), weights: weights.len() });
    }
    for (index, &value) in values.iter().enumerate() {
        if !value.is_finite() {
            return Err(PavaError::NonFiniteValue { index, value });
        }
    }
    for (index, &weight) in weights.iter().enumerate() {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(PavaError::BadWeight { index, weight });
        }
    }
    Ok(())
}

/// Stack-based PAVA. Each stack block holds (weighted mean, total weight,
/// count); a new element is pushed and then merged backwards while it violates
/// the required ordering. For the antitonic case the ordering test flips.
fn pool(values: &[f64], weights: &[f64], antitonic: bool) -> Vec<f64> {
    let n = values.len();
    let mut mean = Vec::with_capacity(n);
    let mut weight = Vec::with_capacity(n);
    let mut count = Vec::with_capacity(n);
    for i in 0..n {
        mean.push(values[i]);
        weight.push(weights[i]);
        count.push(1usize);
        while mean.len() > 1 {
            let top = mean.len() - 1;
            let violates = if antitonic {
                mean[top] > mean[top - 1]
            } else {
                mean[top] < mean[top - 1]
            };
            if !violates {
                break;
            }
            let w = weight[top - 1] + weight[top];
            mean[top - 1] = (weight[top - 1] * mean[top - 1] + weight[top] * mean[top]) / w;
            weight[top - 1] = w;
            count[top - 1] += count[top];
            mean.pop();
            weight.pop();
            count.pop();
        }
    }
    let mut out = Vec::with_capacity(n);
    for (m, c) in mean.iter().zip(count.iter()) {
        out.extend(std::iter::repeat(*m).take(*c));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn antitonic_pools_leading_violation() {
        // Indicator targets (0, 1, 0): the first pair violates nonincreasing
        // order and pools to its mean; the tail is already in order.
        let fit = antitonic_ls(&[0.0, 1.0, 0.0], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(fit, vec![0.5, 0.5, 0.0]);
    }

    #[test]
    fn already_monotone_input_is_unchanged() {
        let fit = antitonic_ls(&[1.0, 1.0, 0.0], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(fit, vec![1.0, 1.0, 0.0]);
        let fit = isotonic_ls(&[-2.0, 0.0, 0.0, 3.5], &[1.0; 4]).unwrap();
        assert_eq!(fit, vec![-2.0, 0.0, 0.0, 3.5]);
    }

    #[test]
    fn weights_shift_the_pooled_mean() {
        // Pooling (0, 1) with weights (3, 1) gives 0.25.
        let fit = antitonic_ls(&[0.0, 1.0], &[3.0, 1.0]).unwrap();
        assert_eq!(fit, vec![0.25, 0.25]);
    }

    #[test]
    fn isotonic_and_antitonic_are_mirror_images() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.gen_range(1..20);
            let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..3.0)).collect();
            let anti = antitonic_ls(&values, &weights).unwrap();
            let negated: Vec<f64> = values.iter().map(|v| -v).collect();
            let iso_of_neg = isotonic_ls(&negated, &weights).unwrap();
            for (a, b) in anti.iter().zip(iso_of_neg.iter()) {
                assert!((a + b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fit_is_monotone_weight_preserving_and_idempotent() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.gen_range(1..30);
            let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
            let fit = antitonic_ls(&values, &weights).unwrap();
            for pair in fit.windows(2) {
                assert!(pair[0] >= pair[1] - 1e-12);
            }
            // Weighted mean is preserved by projection onto the cone.
            let wm = |vs: &[f64]| -> f64 {
                vs.iter().zip(&weights).map(|(v, w)| v * w).sum::<f64>()
                    / weights.iter().sum::<f64>()
            };
            assert!((wm(&values) - wm(&fit)).abs() < 1e-10);
            let again = antitonic_ls(&fit, &weights).unwrap();
            for (a, b) in fit.iter().zip(again.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matches_exhaustive_block_partition_oracle_on_small_inputs() {
        // Every antitonic LS solution is constant on blocks of a partition,
        // with each block at its weighted mean, then clipped to be ordered;
        // for n <= 6 we can enumerate all partitions and keep the best
        // feasible candidate.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(19);
        for _ in 0..300 {
            let n = rng.gen_range(1..=6);
            let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..2.0)).collect();
            let fit = antitonic_ls(&values, &weights).unwrap();
            let best = brute_force_antitonic(&values, &weights);
            let err = |f: &[f64]| -> f64 {
                f.iter()
                    .zip(&values)
                    .zip(&weights)
                    .map(|((f, v), w)| w * (f - v) * (f - v))
                    .sum()
            };
            assert!(
                err(&fit) <= err(&best) + 1e-9,
                "PAVA objective {} worse than oracle {}",
                err(&fit),
                err(&best)
            );
        }
    }

    /// Enumerates contiguous partitions (compositions of n); each block takes
    /// its weighted mean; keeps the best candidate that is nonincreasing.
    fn brute_force_antitonic(values: &[f64], weights: &[f64]) -> Vec<f64> {
        let n = values.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        // Bitmask over n-1 positions: bit set = block boundary after position i.
        for mask in 0..(1u32 << (n - 1)) {
            let mut fit = Vec::with_capacity(n);
            let mut start = 0;
            for end in 0..n {
                let boundary = end == n - 1 || (mask >> end) & 1 == 1;
                if boundary {
                    let wsum: f64 = weights[start..=end].iter().sum();
                    let mean: f64 = values[start..=end]
                        .iter()
                        .zip(&weights[start..=end])
                        .map(|(v, w)| v * w)
                        .sum::<f64>()
                        / wsum;
                    fit.extend(std::iter::repeat(mean).take(end - start + 1));
                    start = end + 1;
                }
            }
            if fit.windows(2).any(|p| p[0] < p[1] - 1e-12) {
                continue;
            }
            let err: f64 = fit
                .iter()
                .zip(values)
                .zip(weights)
                .map(|((f, v), w)| w * (f - v) * (f - v))
                .sum();
            if best.as_ref().map_or(true, |(e, _)| err < *e) {
                best = Some((err, fit));
            }
        }
        best.unwrap().1
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(
            antitonic_ls(&[1.0], &[1.0, 2.0]),
            Err(PavaError::LengthMismatch { .. })
        ));
        assert!(matches!(
            antitonic_ls(&[f64::NAN], &[1.0]),
            Err(PavaError::NonFiniteValue { .. })
        ));
        assert!(matches!(
            antitonic_ls(&[1.0], &[0.0]),
            Err(PavaError::BadWeight { .. })
        ));
    }
}
