//! Norm conventions.
//!
//! Two different matrix norms appear in the bound formulas and they must not
//! be conflated:
//!
//! * `op_inf_*` — the operator ∞-norm, i.e. the maximum row ℓ1 norm
//!   `max_s Σ_a |M(s,a)|`. Policy change magnitudes and kernel differences
//!   use this one.
//! * `max_abs_*` — the max norm, i.e. the largest absolute entry. Q-table
//!   differences use this one.
//!
//! Vectors use the ℓ1 norm (`l1_*`) and the sup norm (`sup_*`).

/// Σ |vᵢ|.
pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Σ |aᵢ − bᵢ|.
pub fn l1_diff(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// max |vᵢ|.
pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// max |aᵢ − bᵢ|.
pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Operator ∞-norm of a matrix: max over rows of the row ℓ1 norm.
pub fn op_inf_norm(m: &[Vec<f64>]) -> f64 {
    m.iter().map(|r| l1_norm(r)).fold(0.0, f64::max)
}

/// Operator ∞-norm of a matrix difference.
pub fn op_inf_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| l1_diff(x, y)).fold(0.0, f64::max)
}

/// Max norm of a matrix: largest absolute entry.
pub fn max_abs_norm(m: &[Vec<f64>]) -> f64 {
    m.iter().map(|r| sup_norm(r)).fold(0.0, f64::max)
}

/// Max norm of a matrix difference.
pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| sup_diff(x, y)).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn op_inf_is_max_row_l1_not_max_entry() {
        let m = vec![vec![0.5, -0.5, 0.3], vec![0.9, 0.0, 0.0]];
        assert_eq!(op_inf_norm(&m), 1.3);
        assert_eq!(max_abs_norm(&m), 0.9);
    }

    #[test]
    fn diffs_match_norm_of_difference() {
        let a = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let b = vec![vec![0.5, 2.5], vec![3.0, 3.0]];
        assert!((op_inf_diff(&a, &b) - 1.0).abs() < 1e-15);
        assert!((max_abs_diff(&a, &b) - 1.0).abs() < 1e-15);
        assert!((l1_diff(&a[0], &b[0]) - 1.0).abs() < 1e-15);
        assert!((sup_diff(&a[1], &b[1]) - 1.0).abs() < 1e-15);
    }
}
