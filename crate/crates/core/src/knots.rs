//! Open knot vectors, coarse-knot selections and uniform refinement.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KnotError {
    #[error("order must be at least 1")]
    ZeroOrder,
    #[error("knots must be finite and non-decreasing (violated at index {0})")]
    NotNonDecreasing(usize),
    #[error("the parameter interval is empty: need a < b")]
    TooFewKnots,
    #[error("endpoint {value} has multiplicity {found}, expected the order {order}")]
    EndpointMultiplicity { value: f64, found: usize, order: usize },
    #[error("interior knot {value} has multiplicity {found}, at most {max} allowed")]
    InteriorMultiplicity { value: f64, found: usize, max: usize },
    #[error("requested multiplicity {requested} at {value} is outside 1..={max}")]
    InvalidMultiplicity { value: f64, requested: usize, max: usize },
    #[error("refinement level must be at least 1")]
    ZeroRefinement,
    #[error("{0} is not an interior knot")]
    NotAnInteriorKnot(f64),
    #[error("knot {value} has multiplicity {available}, cannot select {requested}")]
    MultiplicityExceeded { value: f64, requested: usize, available: usize },
    #[error("knot {0} is selected more than once")]
    DuplicateSelection(f64),
}

/// Open knot vector `θ_0 ≤ … ≤ θ_{n+m-1}` of order `m`.
///
/// Both endpoints carry multiplicity exactly `m`; interior knots have
/// multiplicity at most `m`. A knot of multiplicity `m` makes the splines
/// discontinuous there; refinement never creates one.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    order: usize,
    knots: Vec<f64>,
}

impl KnotVector {
    pub fn new(knots: Vec<f64>, order: usize) -> Result<Self, KnotError> {
        if order == 0 {
            return Err(KnotError::ZeroOrder);
        }
        if let Some(i) = knots.iter().position(|t| !t.is_finite()) {
            return Err(KnotError::NotNonDecreasing(i));
        }
        if let Some(i) = knots.windows(2).position(|w| w[1] < w[0]) {
            return Err(KnotError::NotNonDecreasing(i + 1));
        }
        let (a, b) = match (knots.first(), knots.last()) {
            (Some(&a), Some(&b)) if a < b => (a, b),
            _ => return Err(KnotError::TooFewKnots),
        };
        let left = knots.iter().take_while(|&&t| t == a).count();
        if left != order {
            return Err(KnotError::EndpointMultiplicity { value: a, found: left, order });
        }
        let right = knots.iter().rev().take_while(|&&t| t == b).count();
        if right != order {
            return Err(KnotError::EndpointMultiplicity { value: b, found: right, order });
        }
        let max = order;
        let mut i = left;
        while i < knots.len() - right {
            let found = knots[i..].iter().take_while(|&&t| t == knots[i]).count();
            if found > max {
                return Err(KnotError::InteriorMultiplicity { value: knots[i], found, max });
            }
            i += found;
        }
        Ok(Self { order, knots })
    }

    /// Order `m` (polynomial degree `m - 1`).
    pub fn order(&self) -> usize {
        self.order
    }

    /// Dimension `n` of the spline space of order `m`.
    pub fn dim(&self) -> usize {
        self.knots.len() - self.order
    }

    /// Dimension of the order-`q` space on the same knots, `n + m - q`.
    ///
    /// # Panics
    /// If `q` exceeds `n + m`.
    pub fn dim_of_order(&self, q: usize) -> usize {
        self.knots.len() - q
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn knot(&self, i: usize) -> f64 {
        self.knots[i]
    }

    pub fn a(&self) -> f64 {
        self.knots[0]
    }

    pub fn b(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    /// Multiplicity of the value `t` (0 if it is not a knot).
    pub fn multiplicity(&self, t: f64) -> usize {
        self.knots.iter().filter(|&&s| s == t).count()
    }

    /// Index of the first knot equal to `t`.
    pub fn first_index_of(&self, t: f64) -> Option<usize> {
        self.knots.iter().position(|&s| s == t)
    }

    /// Whether `i` is the first occurrence of an interior knot value.
    pub fn is_first_interior(&self, i: usize) -> bool {
        i >= self.order && i < self.dim() && self.knots[i] > self.knots[i - 1]
    }

    /// Span index `s` with `θ_s ≤ x < θ_{s+1}` and `m-1 ≤ s ≤ n-1`; at
    /// `x = b` the last nonempty span is returned. `None` outside `[a, b]`.
    pub fn span(&self, x: f64) -> Option<usize> {
        if !(x >= self.a() && x <= self.b()) {
            return None;
        }
        let n = self.dim();
        if x == self.b() {
            return Some(n - 1);
        }
        // first knot strictly greater than x, minus one
        let s = self.knots.partition_point(|&t| t <= x) - 1;
        Some(s.clamp(self.order - 1, n - 1))
    }

    /// Knot average `h_{j,k} = (θ_{k+j} - θ_k) / j`.
    pub fn h(&self, j: usize, k: usize) -> f64 {
        (self.knots[k + j] - self.knots[k]) / j as f64
    }

    /// Greville abscissae of the order-`q` B-splines on these knots.
    pub fn greville(&self, q: usize) -> Vec<f64> {
        (0..self.dim_of_order(q))
            .map(|k| {
                if q == 1 {
                    0.5 * (self.knots[k] + self.knots[k + 1])
                } else {
                    let inner = &self.knots[k + 1..k + q];
                    // rounding can push the mean of equal knots past them
                    let mean = inner.iter().sum::<f64>() / (q - 1) as f64;
                    mean.clamp(inner[0], inner[q - 2])
                }
            })
            .collect()
    }

    /// Distinct interior knot values with their multiplicities.
    pub fn interior_knots(&self) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for &t in &self.knots[self.order..self.dim()] {
            match out.last_mut() {
                Some(last) if last.0 == t => last.1 += 1,
                _ => out.push((t, 1)),
            }
        }
        out
    }

    /// Left endpoints of the nonempty knot spans, followed by `b`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for &t in &self.knots {
            if out.last() != Some(&t) {
                out.push(t);
            }
        }
        out
    }

    /// Inserts the simple knots `a + i (b - a) / (2N)` for `0 < i < 2N`
    /// that are not knots already, then raises the multiplicity of each
    /// listed value to the requested one.
    ///
    /// Every grid point is evaluated from its rational position in one step,
    /// so the same abscissa is bit-identical across refinement levels.
    pub fn refine_uniform(&self, levels: usize, interior_mult_at: &[(f64, usize)]) -> Result<KnotVector, KnotError> {
        if levels == 0 {
            return Err(KnotError::ZeroRefinement);
        }
        let (a, b, m) = (self.a(), self.b(), self.order);
        let max = max_interior_multiplicity(m);
        for &(value, requested) in interior_mult_at {
            if !(value > a && value < b) {
                return Err(KnotError::NotAnInteriorKnot(value));
            }
            if requested == 0 || requested > max {
                return Err(KnotError::InvalidMultiplicity { value, requested, max });
            }
        }
        let steps = 2 * levels;
        let mut interior = self.interior_knots();
        for i in 1..steps {
            let t = a + (b - a) * (i as f64 / steps as f64);
            if !interior.iter().any(|&(s, _)| s == t) {
                interior.push((t, 1));
            }
        }
        for &(value, requested) in interior_mult_at {
            match interior.iter_mut().find(|e| e.0 == value) {
                Some(e) => e.1 = e.1.max(requested),
                None => interior.push((value, requested)),
            }
        }
        interior.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut knots = Vec::with_capacity(2 * m + interior.len());
        knots.extend(std::iter::repeat_n(a, m));
        for (t, mult) in interior {
            knots.extend(std::iter::repeat_n(t, mult));
        }
        knots.extend(std::iter::repeat_n(b, m));
        KnotVector::new(knots, m)
    }

    /// Selects interior knot values with multiplicities `μ_j`; entries are
    /// returned ordered by position.
    pub fn select_coarse(&self, values: &[(f64, usize)]) -> Result<CoarseSelection, KnotError> {
        let mut entries = Vec::with_capacity(values.len());
        for &(value, mult) in values {
            let index = self
                .first_index_of(value)
                .filter(|&i| self.is_first_interior(i))
                .ok_or(KnotError::NotAnInteriorKnot(value))?;
            let available = self.multiplicity(value);
            if mult == 0 {
                return Err(KnotError::InvalidMultiplicity { value, requested: 0, max: available });
            }
            if mult > available {
                return Err(KnotError::MultiplicityExceeded { value, requested: mult, available });
            }
            if entries.iter().any(|e: &SelectedKnot| e.index == index) {
                return Err(KnotError::DuplicateSelection(value));
            }
            entries.push(SelectedKnot { index, value, mult, knot_mult: available });
        }
        entries.sort_by_key(|e| e.index);
        Ok(CoarseSelection { entries })
    }

    /// The coarse knot vector `Θ₀`: the end knots together with the selected
    /// interior knots at their selected multiplicities.
    pub fn coarse_knots(&self, sel: &CoarseSelection) -> KnotVector {
        let m = self.order;
        let mut knots = vec![self.a(); m];
        for e in sel.entries() {
            knots.extend(std::iter::repeat_n(e.value, e.mult));
        }
        knots.extend(std::iter::repeat_n(self.b(), m));
        Self { order: m, knots }
    }
}

// refinement keeps the spline space continuous across inserted knots
fn max_interior_multiplicity(order: usize) -> usize {
    (order - 1).max(1)
}

/// One selected knot: first-occurrence index `ℓ`, value `θ_ℓ`, selected
/// multiplicity `μ` and the multiplicity of `θ_ℓ` in the knot vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectedKnot {
    pub index: usize,
    pub value: f64,
    pub mult: usize,
    pub knot_mult: usize,
}

/// Interior knots `θ_{ℓ_1} < … < θ_{ℓ_r}` with multiplicities `μ_j` that
/// span the coarse knot vector inside a fine one.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseSelection {
    entries: Vec<SelectedKnot>,
}

impl CoarseSelection {
    pub fn entries(&self) -> &[SelectedKnot] {
        &self.entries
    }

    /// Number of selected knot values `r`.
    pub fn r(&self) -> usize {
        self.entries.len()
    }

    /// Total multiplicity `r̃ = Σ μ_j`.
    pub fn r_tilde(&self) -> usize {
        self.entries.iter().map(|e| e.mult).sum()
    }

    /// One `(knot, ν)` pair per reproduction condition, `0 ≤ ν < μ_j`, in
    /// row order.
    pub fn rows(&self) -> impl Iterator<Item = (SelectedKnot, usize)> + '_ {
        self.entries.iter().flat_map(|e| (0..e.mult).map(move |nu| (*e, nu)))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    pub(crate) fn example_knots() -> KnotVector {
        let mut t = vec![0.0, 0.0];
        t.extend((1..=7).map(f64::from));
        t.extend([8.0, 8.0]);
        t.extend((9..=11).map(f64::from));
        t.extend([12.0, 12.0]);
        KnotVector::new(t, 2).unwrap()
    }

    #[test]
    fn greville_stays_inside_repeated_knots() {
        // the plain mean of six or more copies of this b exceeds b
        let b = 13.723812683651765;
        let mut t = vec![0.0; 6];
        t.push(1.0);
        t.extend([b; 6]);
        let kv = KnotVector::new(t, 6).unwrap();
        for q in 6..=12 {
            let g = kv.greville(q);
            assert!(g.iter().all(|&x| (0.0..=b).contains(&x)), "q={q}");
        }
        assert_eq!(*kv.greville(6).last().unwrap(), b);
    }

    #[test]
    fn validates_examples() {
        assert_eq!(example_knots().dim(), 14);
        assert_eq!(example_knots().dim_of_order(4), 12);
        let kv = KnotVector::new(vec![0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0], 3).unwrap();
        assert_eq!(kv.dim(), 4);
        assert!(matches!(
            KnotVector::new(vec![0.0, 1.0, 1.0], 2),
            Err(KnotError::EndpointMultiplicity { found: 1, .. })
        ));
    }

    #[test]
    fn rejects_bad_sequences() {
        assert_eq!(KnotVector::new(vec![0.0, 0.0], 0), Err(KnotError::ZeroOrder));
        assert_eq!(KnotVector::new(vec![0.0, 0.0, 1.0, 0.5, 1.0, 1.0], 2), Err(KnotError::NotNonDecreasing(3)));
        assert_eq!(KnotVector::new(vec![1.0, 1.0, 1.0, 1.0], 2), Err(KnotError::TooFewKnots));
        assert_eq!(KnotVector::new(vec![], 2), Err(KnotError::TooFewKnots));
        assert!(matches!(
            KnotVector::new(vec![0.0, 0.0, 0.5, 0.5, 0.5, 1.0, 1.0], 2),
            Err(KnotError::InteriorMultiplicity { found: 3, max: 2, .. })
        ));
        assert!(matches!(KnotVector::new(vec![0.0, 0.0, f64::NAN, 1.0, 1.0], 2), Err(KnotError::NotNonDecreasing(2))));
    }

    #[test]
    fn spans_and_averages() {
        let kv = example_knots();
        assert_eq!(kv.span(0.0), Some(1));
        assert_eq!(kv.span(3.0), Some(4));
        assert_eq!(kv.span(7.5), Some(8));
        assert_eq!(kv.span(8.0), Some(10));
        assert_eq!(kv.span(12.0), Some(13));
        assert_eq!(kv.span(12.5), None);
        assert_eq!(kv.h(2, 0), 0.5);
        assert_eq!(kv.h(3, 7), (8.0 - 6.0) / 3.0);
    }

    #[test]
    fn refine_example() {
        let kv = KnotVector::new(vec![0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0], 3).unwrap();
        let r = kv.refine_uniform(2, &[]).unwrap();
        assert_eq!(r.knots(), &[0.0, 0.0, 0.0, 0.25, 0.5, 0.75, 1.0, 1.0, 1.0]);
        let r1 = kv.refine_uniform(1, &[]).unwrap();
        assert_eq!(r1, kv);
    }

    #[test]
    fn refine_keeps_multiplicity() {
        for m in 3..=6 {
            let mut t = vec![0.0; m];
            t.extend(vec![0.5; m - 1]);
            t.extend(vec![1.0; m]);
            let kv = KnotVector::new(t, m).unwrap();
            let r = kv.refine_uniform(2, &[(0.5, m - 1)]).unwrap();
            assert_eq!(r.multiplicity(0.5), m - 1);
            assert_eq!(r.multiplicity(0.25), 1);
            let bad = kv.refine_uniform(2, &[(0.5, m)]);
            assert!(matches!(bad, Err(KnotError::InvalidMultiplicity { .. })));
        }
    }

    #[test]
    fn select_example() {
        let kv = example_knots();
        let sel = kv.select_coarse(&[(8.0, 2), (3.0, 1)]).unwrap();
        let idx: Vec<_> = sel.entries().iter().map(|e| (e.index + 1, e.mult)).collect();
        assert_eq!(idx, vec![(5, 1), (10, 2)]);
        assert_eq!(sel.r(), 2);
        assert_eq!(sel.r_tilde(), 3);
        assert_eq!(kv.select_coarse(&[(0.0, 1)]), Err(KnotError::NotAnInteriorKnot(0.0)));
        assert_eq!(kv.select_coarse(&[(2.5, 1)]), Err(KnotError::NotAnInteriorKnot(2.5)));
        assert!(matches!(kv.select_coarse(&[(3.0, 2)]), Err(KnotError::MultiplicityExceeded { .. })));
        assert_eq!(kv.select_coarse(&[(3.0, 1), (3.0, 1)]), Err(KnotError::DuplicateSelection(3.0)));
    }

    fn multiset_contains(big: &[f64], small: &[f64]) -> bool {
        small.iter().all(|t| big.iter().filter(|&&s| s == *t).count() >= small.iter().filter(|&&s| s == *t).count())
    }

    proptest! {
        #[test]
        fn refinement_is_nested(m in 2usize..7, n_levels in 1usize..20,
                                interior in proptest::collection::vec(0.01f64..0.99, 0..6)) {
            let mut t = vec![0.0; m];
            let mut inner = interior.clone();
            inner.sort_by(f64::total_cmp);
            inner.dedup();
            t.extend(inner);
            t.extend(vec![1.0; m]);
            let kv = KnotVector::new(t, m).unwrap();
            let r1 = kv.refine_uniform(n_levels, &[]).unwrap();
            let r2 = kv.refine_uniform(2 * n_levels, &[]).unwrap();
            prop_assert!(multiset_contains(r1.knots(), kv.knots()));
            prop_assert!(multiset_contains(r2.knots(), r1.knots()));
        }

        #[test]
        fn selection_survives_refinement(m in 3usize..7, levels in 1usize..10) {
            let mut t = vec![0.0; m];
            t.extend(vec![0.5; m - 1]);
            t.push(0.7);
            t.extend(vec![1.0; m]);
            let kv = KnotVector::new(t, m).unwrap();
            let fine = kv.refine_uniform(levels, &[]).unwrap();
            let sel = fine.select_coarse(&[(0.5, m - 1), (0.7, 1)]).unwrap();
            for e in sel.entries() {
                prop_assert!(fine.is_first_interior(e.index));
                prop_assert_eq!(fine.knot(e.index), e.value);
            }
        }
    }
}
