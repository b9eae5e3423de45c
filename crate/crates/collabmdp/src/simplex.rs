//! Probability-simplex primitives shared by the experts, the opponents and
//! the harness.

use rand::Rng;

/// Uniform distribution over `n` points.
pub fn uniform(n: usize) -> Vec<f64> {
    assert!(n >= 1, "empty action set");
    vec![1.0 / n as f64; n]
}

/// Numerically stable softmax: `w(a) ∝ exp(x(a))` with max subtraction.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = w.iter().sum();
    for v in &mut w {
        *v /= z;
    }
    w
}

/// Shannon entropy with the 0·ln 0 = 0 convention.
pub fn entropy(w: &[f64]) -> f64 {
    -w.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// Euclidean projection of an arbitrary vector onto the probability simplex.
///
/// Sort-based algorithm; O(n log n).
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut css = 0.0;
    let mut rho = 0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            rho = i + 1;
            theta = t;
        }
    }
    debug_assert!(rho >= 1);
    let _ = rho;
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// A Dirichlet(1,…,1) draw, i.e. a uniform sample from the simplex.
///
/// Normalized Exp(1) variates; avoids pulling in a distributions crate for
/// the one case we need.
pub fn dirichlet_ones<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            -u.ln()
        })
        .collect();
    let z: f64 = v.iter().sum();
    for x in &mut v {
        *x /= z;
    }
    v
}

/// Whether `v` is entrywise nonnegative and sums to 1 within `tol`.
pub fn is_distribution(v: &[f64], tol: f64) -> bool {
    v.iter().all(|&x| x >= -tol) && (v.iter().sum::<f64>() - 1.0).abs() <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn softmax_of_zeros_is_uniform() {
        assert_eq!(softmax(&[0.0, 0.0, 0.0]), uniform(3));
    }

    #[test]
    fn projection_fixes_points_already_on_simplex() {
        let p = vec![0.2, 0.5, 0.3];
        let q = project_to_simplex(&p);
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn entropy_extremes() {
        assert_eq!(entropy(&[1.0, 0.0]), 0.0);
        assert!((entropy(&uniform(4)) - 4.0_f64.ln()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn projection_lands_on_simplex(v in prop::collection::vec(-5.0..5.0f64, 1..8)) {
            let p = project_to_simplex(&v);
            prop_assert!(is_distribution(&p, 1e-9));
        }

        #[test]
        fn softmax_shift_invariance(
            x in prop::collection::vec(-30.0..30.0f64, 1..8),
            c in -100.0..100.0f64,
        ) {
            let a = softmax(&x);
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            let b = softmax(&shifted);
            for (p, q) in a.iter().zip(&b) {
                prop_assert!((p - q).abs() <= 1e-12);
            }
        }
    }
}
