use nalgebra::{DMatrix, DVector};

use crate::MetricsError;

const EIG_CLAMP: f64 = -1e-10;
const TRACE_CLAMP: f64 = -1e-6;

/// Fréchet distance between two Gaussians:
/// ‖μ1−μ2‖² + tr(Σ1 + Σ2 − 2·(Σ1Σ2)^{1/2}).
///
/// The cross term uses the symmetric product Σ1^{1/2} Σ2 Σ1^{1/2}, whose
/// eigendecomposition is real for PSD inputs. Covariances are symmetrized on
/// entry; eigenvalues down to -1e-10 are treated as rounding and clamped to
/// zero, anything lower is an error.
pub fn frechet_distance(
    mu1: &[f64],
    sigma1: &[f64],
    mu2: &[f64],
    sigma2: &[f64],
) -> Result<f64, MetricsError> {
    let d = mu1.len();
    if mu2.len() != d || sigma1.len() != d * d || sigma2.len() != d * d {
        return Err(MetricsError::ShapeMismatch(format!(
            "expected means of length {d} and {d}x{d} covariances"
        )));
    }
    let s1 = symmetrize(sigma1, d);
    let s2 = symmetrize(sigma2, d);

    // tr((Σ1Σ2)^{1/2}) = tr((Σ1^{1/2} Σ2 Σ1^{1/2})^{1/2}), and that matrix is
    // (R1 R2)(R1 R2)ᵀ for the PSD roots R_i, so the trace of its square root
    // is the sum of singular values of R1·R2 — nonnegative by construction,
    // which sidesteps eigensolver rounding on rank-deficient products.
    let root1 = psd_sqrt(&s1)?;
    let root2 = psd_sqrt(&s2)?;
    let cross_trace: f64 = (&root1 * &root2).svd(false, false).singular_values.iter().sum();

    let mean_term: f64 = mu1.iter().zip(mu2).map(|(a, b)| (a - b) * (a - b)).sum();
    let result = mean_term + s1.trace() + s2.trace() - 2.0 * cross_trace;
    if result < TRACE_CLAMP {
        return Err(MetricsError::NotPsd(result));
    }
    Ok(result.max(0.0))
}

/// Sample mean and covariance (normalized by n) of row-vector features.
pub fn gaussian_fit(feats: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = feats.len();
    assert!(n > 0, "gaussian_fit needs at least one sample");
    let d = feats[0].len();
    let mut mu = vec![0.0; d];
    for f in feats {
        for (m, x) in mu.iter_mut().zip(f) {
            *m += x;
        }
    }
    for m in &mut mu {
        *m /= n as f64;
    }
    let mut sigma = vec![0.0; d * d];
    for f in feats {
        for i in 0..d {
            let di = f[i] - mu[i];
            for j in 0..d {
                sigma[i * d + j] += di * (f[j] - mu[j]);
            }
        }
    }
    for s in &mut sigma {
        *s /= n as f64;
    }
    (mu, sigma)
}

fn symmetrize(s: &[f64], d: usize) -> DMatrix<f64> {
    let m = DMatrix::from_row_slice(d, d, s);
    (&m + m.transpose()) * 0.5
}

// Clamp threshold scaled by the spectral magnitude: eigensolver rounding on
// a rank-deficient PSD matrix grows with ||A||, so an absolute cutoff would
// reject valid high-dimensional covariances.
fn clamp_tol(eigs: &DVector<f64>) -> f64 {
    let scale = eigs.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    EIG_CLAMP * scale.max(1.0)
}

fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>, MetricsError> {
    let eig = m.clone().symmetric_eigen();
    let mut lam = eig.eigenvalues;
    let tol = clamp_tol(&lam);
    for e in lam.iter_mut() {
        if *e < tol {
            return Err(MetricsError::NotPsd(*e));
        }
        *e = e.max(0.0).sqrt();
    }
    let v = eig.eigenvectors;
    Ok(&v * DMatrix::from_diagonal(&lam) * v.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_gaussians_score_zero() {
        let mu = vec![0.3, -1.2, 4.0];
        let sigma = vec![2.0, 0.5, 0.0, 0.5, 1.0, 0.2, 0.0, 0.2, 3.0];
        let d = frechet_distance(&mu, &sigma, &mu, &sigma).unwrap();
        assert!(d.abs() <= 1e-9, "got {d}");
    }

    #[test]
    fn one_dimensional_closed_form() {
        // N(0,1) vs N(1,1) -> 1; N(0,1) vs N(0,4) -> (1-2)^2 = 1.
        assert!((frechet_distance(&[0.0], &[1.0], &[1.0], &[1.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((frechet_distance(&[0.0], &[1.0], &[0.0], &[4.0]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matches_scalar_closed_form_on_1000_random_gaussians() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let (m1, m2) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let (v1, v2) = (rng.gen_range(0.01..9.0), rng.gen_range(0.01..9.0));
            let got = frechet_distance(&[m1], &[v1], &[m2], &[v2]).unwrap();
            let want = (m1 - m2).powi(2) + (v1.sqrt() - v2.sqrt()).powi(2);
            assert!((got - want).abs() <= 1e-8, "got {got}, want {want}");
        }
    }

    #[test]
    fn symmetric_in_its_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let d = 4;
            let mut a = vec![0.0; d * d];
            let mut b = vec![0.0; d * d];
            for x in a.iter_mut().chain(b.iter_mut()) {
                *x = rng.gen_range(-1.0..1.0);
            }
            // Gram matrices are PSD by construction.
            let gram = |m: &[f64]| {
                let mm = DMatrix::from_row_slice(d, d, m);
                let g = &mm * mm.transpose();
                g.as_slice().to_vec()
            };
            let (sa, sb) = (gram(&a), gram(&b));
            let mu1: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mu2: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f12 = frechet_distance(&mu1, &sa, &mu2, &sb).unwrap();
            let f21 = frechet_distance(&mu2, &sb, &mu1, &sa).unwrap();
            assert!((f12 - f21).abs() <= 1e-9, "{f12} vs {f21}");
        }
    }

    #[test]
    fn rejects_clearly_indefinite_covariance() {
        let bad = vec![1.0, 0.0, 0.0, -2.0];
        assert!(matches!(
            frechet_distance(&[0.0, 0.0], &bad, &[0.0, 0.0], &bad),
            Err(MetricsError::NotPsd(_))
        ));
    }

    #[test]
    fn gaussian_fit_recovers_hand_moments() {
        let feats = vec![vec![1.0, 0.0], vec![3.0, 4.0]];
        let (mu, sigma) = gaussian_fit(&feats);
        assert_eq!(mu, vec![2.0, 2.0]);
        assert_eq!(sigma, vec![1.0, 2.0, 2.0, 4.0]);
    }
}
