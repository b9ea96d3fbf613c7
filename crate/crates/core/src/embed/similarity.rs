use super::{EmbedError, Embedding};

/// Left-to-right dot product accumulated in `f64`.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

pub fn l2_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Cosine similarity of two raw vectors.
///
/// Errors on differing lengths or an all-zero input rather than guessing a value.
pub fn cosine_slices(a: &[f64], b: &[f64]) -> Result<f64, EmbedError> {
    if a.len() != b.len() {
        return Err(EmbedError::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    let na = l2_norm(a);
    let nb = l2_norm(b);
    if na == 0.0 || nb == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

pub fn cosine(a: &Embedding, b: &Embedding) -> Result<f64, EmbedError> {
    cosine_slices(a.values(), b.values())
}

/// Greedy token alignment F1 over precomputed token vectors.
///
/// Precision averages, over candidate tokens, the best cosine to any
/// reference token; recall does the same from the reference side. Cosines
/// are clamped to `[0, 1]` first.
pub fn greedy_alignment_f1(reference: &[Embedding], candidate: &[Embedding]) -> Result<f64, EmbedError> {
    if reference.is_empty() || candidate.is_empty() {
        return Err(EmbedError::EmptyText);
    }
    let mut sims = vec![vec![0.0; reference.len()]; candidate.len()];
    for (i, c) in candidate.iter().enumerate() {
        for (j, r) in reference.iter().enumerate() {
            sims[i][j] = cosine(c, r)?.clamp(0.0, 1.0);
        }
    }
    let precision =
        sims.iter().map(|row| row.iter().copied().fold(0.0, f64::max)).sum::<f64>() / candidate.len() as f64;
    let recall = (0..reference.len()).map(|j| sims.iter().map(|row| row[j]).fold(0.0, f64::max)).sum::<f64>()
        / reference.len() as f64;
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_angles() {
        assert_eq!(cosine_slices(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 1.0);
        assert_eq!(cosine_slices(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine_slices(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn zero_vector_is_an_error() {
        assert_eq!(cosine_slices(&[0.0, 0.0], &[1.0, 0.0]), Err(EmbedError::ZeroVector));
        assert_eq!(cosine_slices(&[1.0, 0.0], &[0.0, 0.0]), Err(EmbedError::ZeroVector));
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(matches!(
            cosine_slices(&[1.0], &[1.0, 0.0]),
            Err(EmbedError::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    proptest! {
        #[test]
        fn symmetric_and_scale_invariant(
            a in prop::collection::vec(-100.0f64..100.0, 8),
            b in prop::collection::vec(-100.0f64..100.0, 8),
            alpha in 1e-3f64..1e3,
        ) {
            prop_assume!(l2_norm(&a) > 1e-6 && l2_norm(&b) > 1e-6);
            let ab = cosine_slices(&a, &b).unwrap();
            prop_assert_eq!(ab.to_bits(), cosine_slices(&b, &a).unwrap().to_bits());
            let scaled: Vec<f64> = a.iter().map(|x| x * alpha).collect();
            prop_assert!((cosine_slices(&scaled, &b).unwrap() - ab).abs() < 1e-9);
            prop_assert!((-1.0..=1.0).contains(&ab));
        }
    }
}
