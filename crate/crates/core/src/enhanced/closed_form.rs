//! Explicit formulas for linear (`m = 2`) and quadratic (`m = 3`) splines,
//! used as oracles for the generic construction.
//!
//! Knot differences are taken from the 0-based knot slice `t`; `ℓ` is the
//! 0-based first index of an interior knot.

use alloc::vec::Vec;

use thiserror::Error;

use crate::knots::KnotVector;
use crate::linalg::{BandedSymMatrix, SparseMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClosedFormError {
    #[error("formula is for order {expected}, knot vector has order {found}")]
    WrongOrder { expected: usize, found: usize },
    #[error("formula needs simple interior knots, {value} has multiplicity {mult}")]
    MultipleKnot { value: f64, mult: usize },
    #[error("index {0} is not the first occurrence of an interior knot")]
    BadIndex(usize),
}

fn powi(x: f64, k: i32) -> f64 {
    libm::pow(x, f64::from(k))
}

fn check(kv: &KnotVector, m: usize, l: usize) -> Result<(), ClosedFormError> {
    if kv.order() != m {
        return Err(ClosedFormError::WrongOrder { expected: m, found: kv.order() });
    }
    if l >= kv.knots().len() || !kv.is_first_interior(l) {
        return Err(ClosedFormError::BadIndex(l));
    }
    Ok(())
}

fn order_only(kv: &KnotVector, m: usize) -> Result<(), ClosedFormError> {
    if kv.order() != m {
        return Err(ClosedFormError::WrongOrder { expected: m, found: kv.order() });
    }
    Ok(())
}

/// Tridiagonal Gramian of the hat functions.
pub fn gram_m2(kv: &KnotVector) -> Result<BandedSymMatrix, ClosedFormError> {
    order_only(kv, 2)?;
    let t = kv.knots();
    let n = kv.dim();
    let mut g = BandedSymMatrix::zeros(n, 1);
    for j in 0..n {
        g.set(j, j, (t[j + 2] - t[j]) / 3.0);
        if j + 1 < n {
            g.set(j + 1, j, (t[j + 2] - t[j + 1]) / 6.0);
        }
    }
    Ok(g)
}

/// Tridiagonal `S` of the linear approximate dual.
pub fn s_m2(kv: &KnotVector) -> Result<BandedSymMatrix, ClosedFormError> {
    order_only(kv, 2)?;
    let t = kv.knots();
    let n = kv.dim();
    // weight of the derivative term between hats j and j+1
    let alpha: Vec<f64> = (0..n - 1).map(|j| powi(t[j + 2] - t[j + 1], 2) / (t[j + 3] - t[j])).collect();
    let mut s = BandedSymMatrix::zeros(n, 1);
    for j in 0..n {
        let d = t[j + 2] - t[j];
        let left = if j > 0 { alpha[j - 1] } else { 0.0 };
        let right = if j + 1 < n { alpha[j] } else { 0.0 };
        s.set(j, j, 2.0 / d + 2.0 / (d * d) * (left + right));
        if j + 1 < n {
            let beta =
                -2.0 * powi(t[j + 2] - t[j + 1], 2) / ((t[j + 2] - t[j]) * (t[j + 3] - t[j]) * (t[j + 3] - t[j + 1]));
            s.set(j + 1, j, beta);
        }
    }
    Ok(s)
}

/// The `n × (n-2)` factor `Z` with `I - ΓS = Z D_3 D_2`.
pub fn z_m2(kv: &KnotVector) -> Result<SparseMatrix, ClosedFormError> {
    order_only(kv, 2)?;
    let t = kv.knots();
    let n = kv.dim();
    let mut trip = Vec::with_capacity(3 * n);
    for j in 0..n.saturating_sub(2) {
        let p = t[j + 2] - t[j + 1];
        let q = t[j + 3] - t[j + 2];
        let span = t[j + 3] - t[j + 1];
        trip.push((j, j, p * q * q / (18.0 * span)));
        trip.push((j + 1, j, -p * q / 18.0));
        trip.push((j + 2, j, p * p * q / (18.0 * span)));
    }
    Ok(SparseMatrix::from_triplets(n, n.saturating_sub(2), &trip))
}

/// For linear splines the row `w` of a knot `ℓ` is `κ_ℓ` times the unit
/// vector at `ℓ - 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct M2ClosedForm {
    pub kappa: f64,
    pub index: usize,
}

pub fn closed_form_m2(kv: &KnotVector, l: usize) -> Result<M2ClosedForm, ClosedFormError> {
    check(kv, 2, l)?;
    let t = kv.knots();
    let left = t[l] - t[l - 1];
    let right = t[l + 1] - t[l];
    let kappa = left * left * right * right / (18.0 * (t[l + 1] - t[l - 1]));
    Ok(M2ClosedForm { kappa, index: l - 2 })
}

/// For quadratic splines on simple knots the row `w` of a knot `ℓ` is
/// `μ e_{ℓ-4} + κ e_{ℓ-3} + ν e_{ℓ-2}`. Entries whose index falls outside
/// `0..n-3` vanish.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct M3Coefficients {
    pub mu: f64,
    pub kappa: f64,
    pub nu: f64,
}

impl M3Coefficients {
    /// `(index, value)` for the three entries, skipping indices below zero.
    pub fn entries(&self, l: usize) -> impl Iterator<Item = (usize, f64)> {
        [(l as isize - 4, self.mu), (l as isize - 3, self.kappa), (l as isize - 2, self.nu)]
            .into_iter()
            .filter(|(i, _)| *i >= 0)
            .map(|(i, v)| (i as usize, v))
    }
}

pub fn closed_form_m3(kv: &KnotVector, l: usize) -> Result<M3Coefficients, ClosedFormError> {
    check(kv, 3, l)?;
    for (value, mult) in kv.interior_knots() {
        if mult > 1 {
            return Err(ClosedFormError::MultipleKnot { value, mult });
        }
    }
    let t = kv.knots();
    let g = |i: usize| t[l - 2 + i] - t[l - 3 + i];
    let (a, b, c, d, e, f) = (g(0), g(1), g(2), g(3), g(4), g(5));
    Ok(M3Coefficients { mu: mu_m3(a, b, c, d), kappa: kappa_m3(b, c, d, e), nu: mu_m3(f, e, d, c) })
}

fn mu_m3(a: f64, b: f64, c: f64, d: f64) -> f64 {
    (b * b * powi(a + b + c, 2) + a * (a + b) * (b + c) * c) * powi(d, 4)
        / (600.0 * (a + b + c + d) * (b + c + d) * (c + d))
}

fn kappa_m3(b: f64, c: f64, d: f64, e: f64) -> f64 {
    let bcd = b + c + d;
    let bcde = b + c + d + e;
    let cde = c + d + e;
    let num = c * c * (b + c) * (c + d) * powi(d + e, 3) * bcd * bcd
        + c * c * powi(d, 3) * (b + c) * cde * bcde * bcde
        + c * c * d * (b + c) * powi(d + e, 2) * bcd * bcd * cde
        + c * c * d * d * (b + c) * (c + d) * (d + e) * bcde * bcde
        + b * c * c * d * d * powi(d + e, 2) * bcd * bcde
        + b * d * d * powi(b + c, 2) * (c + d) * powi(d + e, 2) * cde
        + b * b * c * d * d * powi(d + e, 3) * bcd
        + b * b * c * powi(d, 3) * powi(d + e, 2) * bcde;
    num / (600.0 * bcd * bcde * (c + d) * cde)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bspline::DerivativeMatrix;
    use crate::enhanced::build_b;
    use crate::gram_dual::{gram_matrix, solve_s_unique};
    use crate::linalg::{DenseMatrix, Tolerances};
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn simple_knots(rng: &mut ChaCha8Rng, m: usize, spans: usize) -> KnotVector {
        let mut t = vec![0.0; m];
        let mut x = 0.0;
        for _ in 0..spans - 1 {
            x += rng.gen_range(0.2..1.5);
            t.push(x);
        }
        x += rng.gen_range(0.2..1.5);
        t.extend(vec![x; m]);
        KnotVector::new(t, m).unwrap()
    }

    fn rel_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
        a.sub(b).max_abs() / b.max_abs()
    }

    #[test]
    fn linear_gram_and_s_match_the_generic_pipeline() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let kv = simple_knots(&mut rng, 2, 12);
            let g = gram_m2(&kv).unwrap();
            assert!(rel_diff(&g.to_dense(), &gram_matrix(&kv).to_dense()) <= 1e-12);
            let s = s_m2(&kv).unwrap();
            assert!(rel_diff(&s.to_dense(), &solve_s_unique(&kv).unwrap().to_dense()) <= 1e-10);
        }
    }

    #[test]
    fn linear_factor_z_reproduces_the_defect() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..20 {
            let kv = simple_knots(&mut rng, 2, 12);
            let n = kv.dim();
            let g = gram_matrix(&kv).to_dense();
            let s = solve_s_unique(&kv).unwrap().to_dense();
            let defect = DenseMatrix::identity(n).sub(&g.matmul(&s));
            let d2 = DerivativeMatrix::new(&kv, 2).unwrap().to_sparse().to_dense();
            let d3 = DerivativeMatrix::new(&kv, 3).unwrap().to_sparse().to_dense();
            let zp = z_m2(&kv).unwrap().to_dense().matmul(&d3.matmul(&d2));
            assert!(defect.sub(&zp).max_abs() <= 1e-11, "{:e}", defect.sub(&zp).max_abs());
        }
    }

    #[test]
    fn linear_kappa_matches_defect_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..20 {
            let kv = simple_knots(&mut rng, 2, 12);
            let values: Vec<(f64, usize)> = kv.interior_knots();
            let sel = kv.select_coarse(&values).unwrap();
            let b = build_b(&kv, &gram_matrix(&kv), &solve_s_unique(&kv).unwrap(), &sel, &Tolerances::default())
                .unwrap()
                .to_dense();
            for (row, (knot, _)) in sel.rows().enumerate() {
                let cf = closed_form_m2(&kv, knot.index).unwrap();
                let mut expected = vec![0.0; b.cols()];
                expected[cf.index] = cf.kappa;
                for (x, y) in b.row(row).iter().zip(&expected) {
                    assert!((x - y).abs() <= 1e-10 * cf.kappa, "{x} {y}");
                }
            }
        }
    }

    #[test]
    fn uniform_linear_kappa() {
        let t: Vec<f64> = [0.0, 0.0].into_iter().chain((1..10).map(f64::from)).chain([10.0, 10.0]).collect();
        let kv = KnotVector::new(t, 2).unwrap();
        let cf = closed_form_m2(&kv, 5).unwrap();
        assert!((cf.kappa - 1.0 / 36.0).abs() <= 1e-15);
        assert_eq!(cf.index, 3);
    }

    #[test]
    fn quadratic_coefficients_match_defect_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for _ in 0..20 {
            let kv = simple_knots(&mut rng, 3, 12);
            let sel = kv.select_coarse(&kv.interior_knots()).unwrap();
            let b = build_b(&kv, &gram_matrix(&kv), &solve_s_unique(&kv).unwrap(), &sel, &Tolerances::default())
                .unwrap()
                .to_dense();
            for (row, (knot, _)) in sel.rows().enumerate() {
                let coeffs = closed_form_m3(&kv, knot.index).unwrap();
                let mut expected = vec![0.0; b.cols()];
                for (k, v) in coeffs.entries(knot.index) {
                    if k < expected.len() {
                        expected[k] = v;
                    }
                }
                let scale = expected.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
                for (x, y) in b.row(row).iter().zip(&expected) {
                    assert!((x - y).abs() <= 1e-10 * scale, "row {row}: {x} {y}");
                }
            }
        }
    }

    #[test]
    fn quadratic_kappa_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        for _ in 0..100 {
            let g: Vec<f64> = (0..4).map(|_| rng.gen_range(0.1..2.0)).collect();
            let k1 = kappa_m3(g[0], g[1], g[2], g[3]);
            let k2 = kappa_m3(g[3], g[2], g[1], g[0]);
            assert!((k1 - k2).abs() <= 1e-14 * k1.abs());
        }
    }

    #[test]
    fn quadratic_mu_vanishes_at_the_first_interior_knot() {
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let kv = simple_knots(&mut rng, 3, 8);
        assert_eq!(closed_form_m3(&kv, 3).unwrap().mu, 0.0);
        assert!(closed_form_m3(&kv, 4).unwrap().mu > 0.0);
    }

    #[test]
    fn formulas_reject_unsupported_input() {
        let kv = KnotVector::new(vec![0.0, 0.0, 0.0, 1.0, 1.0, 2.0, 3.0, 3.0, 3.0], 3).unwrap();
        assert!(matches!(closed_form_m3(&kv, 3), Err(ClosedFormError::MultipleKnot { mult: 2, .. })));
        assert!(matches!(closed_form_m2(&kv, 3), Err(ClosedFormError::WrongOrder { expected: 2, found: 3 })));
        assert!(matches!(gram_m2(&kv), Err(ClosedFormError::WrongOrder { .. })));
        let kv = KnotVector::new(vec![0.0, 0.0, 1.0, 2.0, 3.0, 3.0], 2).unwrap();
        assert_eq!(closed_form_m2(&kv, 0), Err(ClosedFormError::BadIndex(0)));
        assert_eq!(closed_form_m2(&kv, 4), Err(ClosedFormError::BadIndex(4)));
    }
}
