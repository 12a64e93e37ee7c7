use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::MetricsError;

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_paired(motion: &[Vec<f64>], text: &[Vec<f64>]) -> Result<(), MetricsError> {
    if motion.len() != text.len() {
        return Err(MetricsError::ShapeMismatch(format!(
            "{} motion features paired with {} text features",
            motion.len(),
            text.len()
        )));
    }
    if let (Some(m), Some(t)) = (motion.first(), text.first()) {
        if m.len() != t.len() {
            return Err(MetricsError::ShapeMismatch(format!(
                "feature dims differ: motion {} vs text {}",
                m.len(),
                t.len()
            )));
        }
    }
    Ok(())
}

/// R-precision: each motion queries a pool of its true text plus `pool`-1
/// seeded random distractor texts; returns R@1, R@2, R@3 (fraction of queries
/// whose true text ranks in the top k by Euclidean distance).
pub fn r_precision(
    motion: &[Vec<f64>],
    text: &[Vec<f64>],
    pool: usize,
    seed: u64,
) -> Result<[f64; 3], MetricsError> {
    check_paired(motion, text)?;
    if motion.len() < pool {
        return Err(MetricsError::InsufficientPool { got: motion.len(), need: pool });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = [0usize; 3];
    for (i, q) in motion.iter().enumerate() {
        let true_dist = euclid(q, &text[i]);
        // Rank = 1 + number of distractors strictly closer than the pair.
        let mut closer = 0usize;
        let mut drawn = 0usize;
        let mut seen = vec![i];
        while drawn < pool - 1 {
            let j = rng.gen_range(0..text.len());
            if seen.contains(&j) {
                continue;
            }
            seen.push(j);
            drawn += 1;
            if euclid(q, &text[j]) < true_dist {
                closer += 1;
            }
        }
        for (k, h) in hits.iter_mut().enumerate() {
            if closer < k + 1 {
                *h += 1;
            }
        }
    }
    let n = motion.len() as f64;
    Ok([hits[0] as f64 / n, hits[1] as f64 / n, hits[2] as f64 / n])
}

/// Mean Euclidean distance between each motion feature and its paired text
/// feature.
pub fn mm_dist(motion: &[Vec<f64>], text: &[Vec<f64>]) -> Result<f64, MetricsError> {
    check_paired(motion, text)?;
    if motion.is_empty() {
        return Err(MetricsError::InsufficientSamples { got: 0, need: 1 });
    }
    let total: f64 = motion.iter().zip(text).map(|(m, t)| euclid(m, t)).sum();
    Ok(total / motion.len() as f64)
}

/// Mean Euclidean distance over `n_pairs` disjoint random pairs of features.
pub fn diversity(feats: &[Vec<f64>], n_pairs: usize, seed: u64) -> Result<f64, MetricsError> {
    if feats.len() < 2 * n_pairs {
        return Err(MetricsError::InsufficientSamples { got: feats.len(), need: 2 * n_pairs });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..feats.len()).collect();
    idx.shuffle(&mut rng);
    let total: f64 = (0..n_pairs)
        .map(|p| euclid(&feats[idx[2 * p]], &feats[idx[2 * p + 1]]))
        .sum();
    Ok(total / n_pairs as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_feats(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn perfect_alignment_gives_r1_of_one() {
        let feats = random_feats(64, 6, 1);
        let [r1, r2, r3] = r_precision(&feats, &feats, 32, 99).unwrap();
        assert_eq!(r1, 1.0);
        assert!(r1 <= r2 && r2 <= r3 && r3 <= 1.0);
    }

    #[test]
    fn independent_features_hit_one_over_pool() {
        let motion = random_feats(10_000, 8, 2);
        let text = random_feats(10_000, 8, 3);
        let [r1, r2, r3] = r_precision(&motion, &text, 32, 4).unwrap();
        let p = 1.0 / 32.0;
        let sigma = (p * (1.0 - p) / 10_000.0_f64).sqrt();
        assert!((r1 - p).abs() <= 3.0 * sigma, "r1 = {r1}");
        assert!(r1 <= r2 && r2 <= r3);
    }

    #[test]
    fn invariant_under_common_isometry() {
        let motion = random_feats(48, 4, 5);
        let text = random_feats(48, 4, 6);
        let shift = [10.0, -3.0, 0.5, 2.0];
        // Reflection in coordinate 0 plus a translation preserves distances.
        let map = |f: &Vec<f64>| -> Vec<f64> {
            f.iter().enumerate().map(|(i, v)| if i == 0 { -v } else { *v } + shift[i]).collect()
        };
        let a = r_precision(&motion, &text, 32, 7).unwrap();
        let mm: Vec<Vec<f64>> = motion.iter().map(map).collect();
        let tm: Vec<Vec<f64>> = text.iter().map(map).collect();
        let b = r_precision(&mm, &tm, 32, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pool_larger_than_corpus_is_rejected() {
        let feats = random_feats(8, 3, 1);
        assert!(matches!(
            r_precision(&feats, &feats, 32, 0),
            Err(MetricsError::InsufficientPool { got: 8, need: 32 })
        ));
    }

    #[test]
    fn mm_dist_hand_cases() {
        let a = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 0.0]];
        assert_eq!(mm_dist(&a, &a).unwrap(), 0.0);
        let b: Vec<Vec<f64>> = a.iter().map(|f| vec![f[0] + 1.0, f[1]]).collect();
        assert!((mm_dist(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        // Distances 5, 0, 1 -> mean 2.
        let c = vec![vec![3.0, 4.0], vec![1.0, 1.0], vec![2.0, 1.0]];
        assert!((mm_dist(&a, &c).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn diversity_of_identical_features_is_zero() {
        let feats = vec![vec![1.0, 2.0]; 40];
        assert_eq!(diversity(&feats, 20, 1).unwrap(), 0.0);
    }

    #[test]
    fn diversity_is_scale_equivariant() {
        let feats = random_feats(600, 5, 8);
        let scaled: Vec<Vec<f64>> = feats.iter().map(|f| f.iter().map(|v| 3.0 * v).collect()).collect();
        let a = diversity(&feats, 300, 2).unwrap();
        let b = diversity(&scaled, 300, 2).unwrap();
        assert!((b - 3.0 * a).abs() <= 1e-9);
    }

    #[test]
    fn two_balanced_clusters_approach_unit_diversity() {
        // Half the random disjoint pairs cross clusters at distance 2.
        let mut feats = vec![vec![0.0]; 4000];
        feats.extend(vec![vec![2.0]; 4000]);
        let d = diversity(&feats, 2000, 3).unwrap();
        assert!((d - 1.0).abs() < 0.1, "got {d}");
    }

    #[test]
    fn too_few_samples_for_diversity() {
        let feats = random_feats(10, 2, 1);
        assert!(matches!(
            diversity(&feats, 300, 0),
            Err(MetricsError::InsufficientSamples { got: 10, need: 600 })
        ));
    }
}
