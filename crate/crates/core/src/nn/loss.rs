use super::NnError;

/// Probability clamp for the cross-entropy logarithms.
pub const BCE_EPS: f64 = 1e-7;

/// Mean binary cross-entropy; probabilities are clamped to `[ε, 1 − ε]`.
pub fn bce_loss(p: &[f64], y: &[f64]) -> Result<f64, NnError> {
    if p.len() != y.len() {
        return Err(NnError::LengthMismatch(p.len(), y.len()));
    }
    if p.is_empty() {
        return Err(NnError::EmptyBatch);
    }
    let s: f64 = p
        .iter()
        .zip(y)
        .map(|(&p, &y)| {
            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(s / p.len() as f64)
}

/// Mean absolute error over every coordinate component.
pub fn mae_loss(pred: &[(f64, f64)], truth: &[(f64, f64)]) -> Result<f64, NnError> {
    if pred.len() != truth.len() {
        return Err(NnError::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(NnError::EmptyBatch);
    }
    let s: f64 = pred.iter().zip(truth).map(|(a, b)| (a.0 - b.0).abs() + (a.1 - b.1).abs()).sum();
    Ok(s / (2 * pred.len()) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bce_goldens() {
        assert!(bce_loss(&[1.0 - BCE_EPS], &[1.0]).unwrap() < 1e-6);
        assert!((bce_loss(&[0.5], &[1.0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        // Saturated inputs stay finite.
        assert!(bce_loss(&[0.0, 1.0], &[1.0, 0.0]).unwrap().is_finite());
        assert!(bce_loss(&[], &[]).is_err());
    }

    #[test]
    fn bce_matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p: Vec<f64> = (0..257).map(|_| rng.random_range(0.001..0.999)).collect();
        let y: Vec<f64> = (0..257).map(|_| rng.random_range(0..2) as f64).collect();
        let mut acc = 0.0f64;
        for i in 0..p.len() {
            acc += if y[i] == 1.0 { -p[i].ln() } else { -(1.0 - p[i]).ln() };
        }
        assert!((bce_loss(&p, &y).unwrap() - acc / 257.0).abs() < 1e-10);
    }

    #[test]
    fn mae_goldens() {
        assert_eq!(mae_loss(&[(3.0, 4.0)], &[(3.0, 4.0)]).unwrap(), 0.0);
        assert_eq!(mae_loss(&[(10.0, 10.0)], &[(12.0, 14.0)]).unwrap(), 3.0);
        assert!(matches!(mae_loss(&[(0.0, 0.0)], &[]), Err(NnError::LengthMismatch(1, 0))));
    }

    #[test]
    fn mae_matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a: Vec<(f64, f64)> = (0..100).map(|_| (rng.random_range(-5.0..45.0), rng.random_range(-5.0..45.0))).collect();
        let b: Vec<(f64, f64)> = (0..100).map(|_| (rng.random_range(0.0..39.0), rng.random_range(0.0..39.0))).collect();
        let mut comps = Vec::new();
        for i in 0..100 {
            comps.push((a[i].0 - b[i].0).abs());
            comps.push((a[i].1 - b[i].1).abs());
        }
        let want = comps.iter().sum::<f64>() / comps.len() as f64;
        assert!((mae_loss(&a, &b).unwrap() - want).abs() < 1e-12);
    }
}
