//! Randomized invariant suite behind `aduals selftest`.

use aduals_core::bspline::{eval_basis, DerivativeMatrix};
use aduals_core::enhanced::{a0_columns, build_a};
use aduals_core::{ApproxDual, CoarseSelection, EnhancedDual, KnotVector, RightInverseMethod, Tolerances};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_SEED: u64 = 20_240_917;

/// Open knot vector on `[0, b]` with `spans` random spans and, when
/// `repeated` is set, occasional interior knots of multiplicity up to `m - 1`.
pub fn random_knots(rng: &mut ChaCha8Rng, m: usize, spans: usize, repeated: bool) -> KnotVector {
    let mut t = vec![0.0; m];
    let mut x = 0.0;
    for _ in 0..spans - 1 {
        x += rng.gen_range(0.3..1.0);
        let mult = if repeated && m > 2 && rng.gen_bool(0.3) { rng.gen_range(1..m) } else { 1 };
        t.extend(std::iter::repeat_n(x, mult));
    }
    x += rng.gen_range(0.3..1.0);
    t.extend(vec![x; m]);
    KnotVector::new(t, m).expect("generated knots are open")
}

/// Up to four distinct interior knots, each with a random multiplicity not
/// exceeding its multiplicity in `kv`.
pub fn random_selection(rng: &mut ChaCha8Rng, kv: &KnotVector) -> CoarseSelection {
    let mut interior = kv.interior_knots();
    interior.shuffle(rng);
    let count = rng.gen_range(1..=interior.len().min(4));
    let picks: Vec<(f64, usize)> = interior[..count].iter().map(|&(v, mult)| (v, rng.gen_range(1..=mult))).collect();
    kv.select_coarse(&picks).expect("selection of existing interior knots")
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub cases: usize,
    /// Largest observed violation measure; compared against `bound`.
    pub worst: f64,
    pub bound: f64,
    /// Set when a construction failed outright.
    pub error: Option<String>,
}

impl CheckOutcome {
    fn new(name: &'static str, bound: f64) -> Self {
        Self { name, cases: 0, worst: 0.0, bound, error: None }
    }

    fn record(&mut self, value: f64) {
        self.cases += 1;
        if !(value <= self.worst) {
            self.worst = value;
        }
    }

    fn fail(&mut self, msg: String) {
        self.error.get_or_insert(msg);
    }

    pub fn passed(&self) -> bool {
        self.error.is_none() && self.worst <= self.bound
    }

    pub fn line(&self) -> String {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        match &self.error {
            Some(e) => format!("{status} {:<22} {e}", self.name),
            None => format!(
                "{status} {:<22} cases={:<5} worst={:.3e} bound={:.3e}",
                self.name, self.cases, self.worst, self.bound
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelftestConfig {
    pub seed: u64,
    /// Multiplies every tolerance.
    pub tol_scale: f64,
    pub knot_vectors_per_order: usize,
}

impl Default for SelftestConfig {
    fn default() -> Self {
        Self { seed: DEFAULT_SEED, tol_scale: 1.0, knot_vectors_per_order: 6 }
    }
}

/// Runs all invariant checks over orders `2..=6` and returns one outcome per
/// check, in a fixed order.
pub fn run(cfg: &SelftestConfig) -> Vec<CheckOutcome> {
    let s = cfg.tol_scale;
    let tol = Tolerances::default().scaled(s);
    let mut unity = CheckOutcome::new("partition_of_unity", 1e-13 * s);
    let mut recursion = CheckOutcome::new("derivative_recursion", 1e-12 * s);
    let mut support = CheckOutcome::new("kernel_support", 0.0);
    let mut rank = CheckOutcome::new("a_full_rank", 0.0);
    let mut pattern = CheckOutcome::new("b_zero_pattern", 0.0);
    let mut residual = CheckOutcome::new("au_equals_b", tol.right_inverse);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for m in 2..=6 {
        for trial in 0..cfg.knot_vectors_per_order {
            let kv = random_knots(&mut rng, m, 3 * m + trial, true);
            check_unity(&mut rng, &kv, &mut unity);
            check_recursion(&mut rng, &kv, &mut recursion);
            let dual = match ApproxDual::with_tolerances(&kv, &tol) {
                Ok(d) => d,
                Err(e) => {
                    support.fail(format!("m={m}: {e}"));
                    continue;
                }
            };
            check_support(&mut rng, &dual, &mut support);
            let sel = random_selection(&mut rng, &kv);
            check_rank(&kv, &sel, &mut rank);
            for method in [RightInverseMethod::MoorePenrose, RightInverseMethod::SelectedColumns] {
                match EnhancedDual::with_tolerances(dual.clone(), sel.clone(), method, &tol) {
                    Ok(ed) => {
                        check_pattern(&kv, &ed, &mut pattern);
                        let diff = ed.a().matmul(ed.um()).add(&ed.b().scaled(-1.0)).max_abs();
                        residual.record(diff / ed.b().max_abs().max(f64::MIN_POSITIVE));
                    }
                    Err(e) => residual.fail(format!("m={m} {method:?}: {e}")),
                }
            }
        }
    }
    vec![unity, recursion, support, rank, pattern, residual]
}

fn check_unity(rng: &mut ChaCha8Rng, kv: &KnotVector, out: &mut CheckOutcome) {
    for _ in 0..50 {
        let x = rng.gen_range(kv.a()..=kv.b());
        match eval_basis(kv, kv.order(), x, 0) {
            Ok(w) => out.record((w.values.iter().sum::<f64>() - 1.0).abs()),
            Err(e) => out.fail(format!("x={x}: {e}")),
        }
    }
}

/// `N'_{q+1}` against `D_q` applied to the order-`q` values, in units of
/// the largest entry of `D_q`.
fn check_recursion(rng: &mut ChaCha8Rng, kv: &KnotVector, out: &mut CheckOutcome) {
    let m = kv.order();
    for q in m..2 * m {
        let d = match DerivativeMatrix::new(kv, q) {
            Ok(d) => d,
            Err(e) => return out.fail(format!("q={q}: {e}")),
        };
        let scale = d.h().iter().fold(f64::INFINITY, |a, &b| a.min(b)).recip();
        for _ in 0..10 {
            let x = rng.gen_range(kv.a()..=kv.b());
            let (Ok(low), Ok(high)) = (eval_basis(kv, q, x, 0), eval_basis(kv, q + 1, x, 1)) else {
                return out.fail(format!("q={q} x={x}: evaluation failed"));
            };
            let via = d.mul_vec(&low.to_dense(kv.dim_of_order(q)));
            let high = high.to_dense(kv.dim_of_order(q + 1));
            let worst = via.iter().zip(&high).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            out.record(worst / scale);
        }
    }
}

/// For `x` in span `[θ_k, θ_{k+1})`, `K(x, y)` vanishes for `y` at or
/// beyond `θ_{k-2m+2}` and `θ_{k+2m-1}`. A cut clamped to an endpoint is
/// skipped: the basis does not vanish at `a` or `b`.
fn check_support(rng: &mut ChaCha8Rng, dual: &ApproxDual, out: &mut CheckOutcome) {
    let kv = dual.knots();
    let m = kv.order();
    let t = kv.knots();
    let last = t.len() - 1;
    for _ in 0..40 {
        let x = rng.gen_range(kv.a()..kv.b());
        let Some(k) = kv.span(x) else { continue };
        let below = t[k.saturating_sub(2 * m - 2)];
        let above = t[(k + 2 * m - 1).min(last)];
        let mut ys = Vec::with_capacity(4);
        if below > kv.a() {
            ys.extend([below, rng.gen_range(kv.a()..below)]);
        }
        if above < kv.b() {
            ys.extend([above, rng.gen_range(above..kv.b())]);
        }
        for y in ys {
            match dual.kernel(x, y) {
                Ok(v) => out.record(v.abs()),
                Err(e) => out.fail(format!("x={x} y={y}: {e}")),
            }
        }
    }
}

/// `A` has full row rank and the column-selected block `A₀` has positive
/// determinant; a violation is recorded as one unit.
fn check_rank(kv: &KnotVector, sel: &CoarseSelection, out: &mut CheckOutcome) {
    let a = match build_a(kv, sel) {
        Ok(a) => a.to_dense(),
        Err(e) => return out.fail(format!("{e}")),
    };
    let a0 = a.select_columns(&a0_columns(kv, sel));
    let det = a0.lu().map(|lu| lu.det()).unwrap_or(0.0);
    let gram_det = a.matmul(&a.transpose()).lu().map(|lu| lu.det()).unwrap_or(0.0);
    out.record(if det > 0.0 && gram_det > 0.0 { 0.0 } else { 1.0 });
}

/// Nonzero entries of row `(ℓ, ν)` of `B` stay inside `[ℓ-2m+1+μ, ℓ-2]`
/// (1-based), `μ` the multiplicity of `θ_ℓ`; the measure is the largest
/// entry found outside.
fn check_pattern(kv: &KnotVector, ed: &EnhancedDual, out: &mut CheckOutcome) {
    let m = kv.order();
    for (row, (knot, _)) in ed.selection().rows().enumerate() {
        let lo = (knot.index + 1 + knot.knot_mult).saturating_sub(2 * m);
        let hi = knot.index.checked_sub(2);
        let outside = ed
            .b()
            .row(row)
            .iter()
            .filter(|e| !hi.is_some_and(|h| e.1 >= lo && e.1 <= h))
            .map(|e| e.2.abs())
            .fold(0.0, f64::max);
        out.record(outside);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_is_green() {
        let outcomes = run(&SelftestConfig { knot_vectors_per_order: 2, ..Default::default() });
        assert_eq!(outcomes.len(), 6);
        for o in &outcomes {
            assert!(o.passed(), "{}", o.line());
            assert!(o.cases > 0);
        }
    }

    #[test]
    fn tiny_tolerance_scale_fails_residual_checks() {
        let outcomes = run(&SelftestConfig { tol_scale: 0.0, knot_vectors_per_order: 1, ..Default::default() });
        assert!(outcomes.iter().any(|o| !o.passed()));
    }

    #[test]
    fn generators_are_reproducible() {
        let a = random_knots(&mut ChaCha8Rng::seed_from_u64(3), 4, 10, true);
        let b = random_knots(&mut ChaCha8Rng::seed_from_u64(3), 4, 10, true);
        assert_eq!(a, b);
        let sel = random_selection(&mut ChaCha8Rng::seed_from_u64(4), &a);
        assert!(sel.entries().iter().all(|e| e.mult <= e.knot_mult && e.mult < 4));
    }
}
