//! Small numeric helpers: deterministic summation and hashing.

/// Pairwise (cascade) summation over a slice.
///
/// Fixed reduction order: the result depends only on the input sequence,
/// never on thread count or chunking, so estimators built on it reproduce
/// bit-identically across runs.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BASE: usize = 64;
    if values.len() <= BASE {
        let mut acc = 0.0;
        for &v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Mean via pairwise summation.
pub fn pairwise_mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

/// Two-pass sample variance (denominator n-1) with pairwise sums.
pub fn sample_variance(values: &[f64], mean: f64) -> f64 {
    debug_assert!(values.len() >= 2);
    let mut sq = vec![0.0; values.len()];
    for (s, &v) in sq.iter_mut().zip(values) {
        let d = v - mean;
        *s = d * d;
    }
    pairwise_sum(&sq) / (values.len() - 1) as f64
}

/// FNV-1a over bytes; used to fingerprint model specs in batch metadata.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let v = [1.0, 2.0, 3.0, 4.5];
        assert_eq!(pairwise_sum(&v), 10.5);
    }

    #[test]
    fn pairwise_is_chunking_independent() {
        let v: Vec<f64> = (0..10_001).map(|i| (i as f64).sin() * 1e-3).collect();
        let a = pairwise_sum(&v);
        let b = pairwise_sum(&v);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn fnv_distinguishes_inputs() {
        assert_ne!(fnv1a64(b"a"), fnv1a64(b"b"));
    }
}
