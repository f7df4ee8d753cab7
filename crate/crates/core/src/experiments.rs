//! Convergence study on a bent interface: a quadratic spline curve through
//! the unit square, the pullbacks of `u(x, y) = sin(3x) sin(2y)` and of its
//! normal derivative, and refinement ladders comparing `K`, `L` and the
//! orthogonal projection.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::bspline::{represent_in, BsplineError, Spline};
use crate::enhanced::{EnhancedDual, EnhancedError, RightInverseMethod};
use crate::gram_dual::{ApproxDual, GramDualError};
use crate::knots::{KnotError, KnotVector};
use crate::projection::{l2_error, ProjectionError, Projector, ProjectorKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("test cases exist for orders 3..=6, got {0}")]
    InvalidOrder(usize),
    #[error("refinement levels must be positive and increasing")]
    InvalidLevels,
    #[error(transparent)]
    Knot(#[from] KnotError),
    #[error(transparent)]
    Bspline(#[from] BsplineError),
    #[error(transparent)]
    GramDual(#[from] GramDualError),
    #[error(transparent)]
    Enhanced(#[from] EnhancedError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseName {
    /// `û = u ∘ X`.
    UHat,
    /// `ĝ = (∇u ∘ X) · n`, with `n` the unit normal of `X`.
    GHat,
}

impl CaseName {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseName::UHat => "u_hat",
            CaseName::GHat => "g_hat",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "u_hat" => Some(CaseName::UHat),
            "g_hat" => Some(CaseName::GHat),
            _ => None,
        }
    }
}

/// Control points of the quadratic interface curve on `{0, 0, 0, 0.5, 1, 1, 1}`.
pub const CONTROL_POINTS: [(f64, f64); 4] = [(0.5, 0.0), (0.6, 0.3), (0.4, 0.7), (0.5, 1.0)];

/// Where the curve bends.
pub const JOINT: f64 = 0.5;

pub fn u(x: f64, y: f64) -> f64 {
    libm::sin(3.0 * x) * libm::sin(2.0 * y)
}

pub fn grad_u(x: f64, y: f64) -> (f64, f64) {
    (3.0 * libm::cos(3.0 * x) * libm::sin(2.0 * y), 2.0 * libm::sin(3.0 * x) * libm::cos(2.0 * y))
}

/// One pullback on one order: the curve re-represented in the order-`m`
/// spline space whose only interior knot is the joint.
#[derive(Debug, Clone)]
pub struct TestCase {
    pub name: CaseName,
    pub m: usize,
    pub curve: (Spline, Spline),
    pub coarse_mult: usize,
    pub breakpoints: Vec<f64>,
}

impl TestCase {
    /// Coarse knot vector `{0^m, 0.5^μ, 1^m}`.
    pub fn coarse_knots(&self) -> &KnotVector {
        self.curve.0.knots()
    }

    pub fn point(&self, t: f64) -> (f64, f64) {
        (eval_or_nan(&self.curve.0, t, 0), eval_or_nan(&self.curve.1, t, 0))
    }

    pub fn tangent(&self, t: f64) -> (f64, f64) {
        (eval_or_nan(&self.curve.0, t, 1), eval_or_nan(&self.curve.1, t, 1))
    }

    /// Unit normal: the tangent turned by +90°.
    pub fn normal(&self, t: f64) -> (f64, f64) {
        let (dx, dy) = self.tangent(t);
        let len = libm::hypot(dx, dy);
        (-dy / len, dx / len)
    }

    /// The pullback at `t`; `NaN` outside `[0, 1]`.
    pub fn pullback(&self, t: f64) -> f64 {
        let (x, y) = self.point(t);
        match self.name {
            CaseName::UHat => u(x, y),
            CaseName::GHat => {
                let (gx, gy) = grad_u(x, y);
                let (nx, ny) = self.normal(t);
                gx * nx + gy * ny
            }
        }
    }

    /// The knot vector `Θ_{h,m}` with `h = 1/(2N)`.
    pub fn refined_knots(&self, n: usize) -> Result<KnotVector, ExperimentError> {
        Ok(self.coarse_knots().refine_uniform(n, &[(JOINT, self.coarse_mult)])?)
    }
}

fn eval_or_nan(s: &Spline, t: f64, deriv: usize) -> f64 {
    s.eval(t, deriv).unwrap_or(f64::NAN)
}

/// The quadratic curve itself, on its own knots.
pub fn quadratic_curve() -> (Spline, Spline) {
    let kv = KnotVector::new(vec![0.0, 0.0, 0.0, JOINT, 1.0, 1.0, 1.0], 3).expect("valid knot vector");
    let xs = CONTROL_POINTS.iter().map(|p| p.0).collect();
    let ys = CONTROL_POINTS.iter().map(|p| p.1).collect();
    (Spline::new(kv.clone(), 3, xs).expect("four control points"), Spline::new(kv, 3, ys).expect("four control points"))
}

pub fn build_case(name: CaseName, m: usize) -> Result<TestCase, ExperimentError> {
    if !(3..=6).contains(&m) {
        return Err(ExperimentError::InvalidOrder(m));
    }
    let coarse_mult = match name {
        CaseName::UHat => m - 2,
        CaseName::GHat => m - 1,
    };
    let mut t = vec![0.0; m];
    t.extend(vec![JOINT; coarse_mult]);
    t.extend(vec![1.0; m]);
    let kv = KnotVector::new(t, m)?;
    let (qx, qy) = quadratic_curve();
    let x = represent_in(&kv, m, |s| qx.eval(s, 0).unwrap_or(f64::NAN))?;
    let y = represent_in(&kv, m, |s| qy.eval(s, 0).unwrap_or(f64::NAN))?;
    Ok(TestCase { name, m, curve: (x, y), coarse_mult, breakpoints: vec![JOINT] })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub m: usize,
    pub case: CaseName,
    pub kernel: ProjectorKind,
    pub n: usize,
    pub h: f64,
    pub l2_error: f64,
    /// `log₂` of the error ratio to the previous level; `None` on the first.
    pub slope: Option<f64>,
}

pub fn kernel_name(kind: ProjectorKind) -> &'static str {
    match kind {
        ProjectorKind::K => "K",
        ProjectorKind::L => "L",
        ProjectorKind::Orthogonal => "ortho",
    }
}

pub fn projector_for(case: &TestCase, kind: ProjectorKind, kv: &KnotVector) -> Result<Projector, ExperimentError> {
    Ok(match kind {
        ProjectorKind::K => Projector::k(&ApproxDual::new(kv)?),
        ProjectorKind::L => {
            let sel = kv.select_coarse(&[(JOINT, case.coarse_mult)])?;
            let dual = EnhancedDual::new(ApproxDual::new(kv)?, sel, RightInverseMethod::default())?;
            Projector::l(&dual)
        }
        ProjectorKind::Orthogonal => Projector::orthogonal(kv)?,
    })
}

/// One rung of the ladder, without a slope.
pub fn run_level(case: &TestCase, kind: ProjectorKind, n: usize) -> Result<ConvergenceRecord, ExperimentError> {
    if n == 0 {
        return Err(ExperimentError::InvalidLevels);
    }
    let kv = case.refined_knots(n)?;
    let projector = projector_for(case, kind, &kv)?;
    let f = |t: f64| case.pullback(t);
    let s = projector.project(f, &case.breakpoints)?;
    let l2_error = l2_error(f, &s, &case.breakpoints)?;
    Ok(ConvergenceRecord {
        m: case.m,
        case: case.name,
        kernel: kind,
        n,
        h: 1.0 / (2 * n) as f64,
        l2_error,
        slope: None,
    })
}

/// Fills in the slopes of records ordered by kernel and then by `N`.
pub fn assign_slopes(records: &mut [ConvergenceRecord]) {
    for i in 1..records.len() {
        let (prev, cur) = (&records[i - 1], &records[i]);
        if prev.kernel == cur.kernel && prev.m == cur.m && prev.case == cur.case {
            let slope = libm::log(prev.l2_error / cur.l2_error) / libm::log(prev.h / cur.h);
            records[i].slope = Some(slope);
        }
    }
}

pub fn check_levels(levels: &[usize]) -> Result<(), ExperimentError> {
    if levels.is_empty() || levels[0] == 0 || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ExperimentError::InvalidLevels);
    }
    Ok(())
}

pub fn run_ladder(
    case: &TestCase,
    kernels: &[ProjectorKind],
    levels: &[usize],
) -> Result<Vec<ConvergenceRecord>, ExperimentError> {
    check_levels(levels)?;
    let mut out = Vec::with_capacity(kernels.len() * levels.len());
    for &kind in kernels {
        for &n in levels {
            out.push(run_level(case, kind, n)?);
        }
    }
    assign_slopes(&mut out);
    Ok(out)
}

/// Default ladder `N ∈ {4, 8, 16, 32, 64}`.
pub const DEFAULT_LEVELS: [usize; 5] = [4, 8, 16, 32, 64];

/// One-sided behaviour of a pullback at the joint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointDiagnostics {
    pub value_jump: f64,
    pub derivative_jump: f64,
    /// Distance between the one-sided unit tangents.
    pub tangent_mismatch: f64,
}

// Quadratic extrapolation of f towards JOINT from the side `dir`.
fn one_sided_limit(f: &impl Fn(f64) -> f64, dir: f64, delta: f64) -> f64 {
    let at = |k: f64| f(JOINT + dir * k * delta);
    3.0 * at(1.0) - 3.0 * at(2.0) + at(3.0)
}

// Second-order one-sided difference quotient, oriented along +t.
fn one_sided_slope(f: &impl Fn(f64) -> f64, dir: f64, delta: f64) -> f64 {
    let at = |k: f64| f(JOINT + dir * k * delta);
    let base = one_sided_limit(f, dir, delta);
    dir * (-3.0 * base + 4.0 * at(1.0) - at(2.0)) / (2.0 * delta)
}

pub fn normal_derivative_check(case: &TestCase) -> JointDiagnostics {
    let g = |t: f64| case.pullback(t);
    let value_jump = libm::fabs(one_sided_limit(&g, 1.0, 1e-6) - one_sided_limit(&g, -1.0, 1e-6));
    let derivative_jump = libm::fabs(one_sided_slope(&g, 1.0, 1e-4) - one_sided_slope(&g, -1.0, 1e-4));
    let unit = |dir: f64| {
        let dx = one_sided_limit(&|t| case.tangent(t).0, dir, 1e-6);
        let dy = one_sided_limit(&|t| case.tangent(t).1, dir, 1e-6);
        let len = libm::hypot(dx, dy);
        (dx / len, dy / len)
    };
    let (r, l) = (unit(1.0), unit(-1.0));
    JointDiagnostics { value_jump, derivative_jump, tangent_mismatch: libm::hypot(r.0 - l.0, r.1 - l.1) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_passes_through_the_documented_points() {
        for m in 3..=6 {
            for name in [CaseName::UHat, CaseName::GHat] {
                let case = build_case(name, m).unwrap();
                let close = |p: (f64, f64), q: (f64, f64)| (p.0 - q.0).abs() + (p.1 - q.1).abs() <= 1e-12;
                assert!(close(case.point(0.0), (0.5, 0.0)));
                assert!(close(case.point(1.0), (0.5, 1.0)));
                assert!(close(case.point(0.5), (0.5, 0.5)));
            }
        }
    }

    #[test]
    fn representation_matches_the_quadratic() {
        let (qx, qy) = quadratic_curve();
        for m in 3..=6 {
            let case = build_case(CaseName::GHat, m).unwrap();
            for i in 0..=400 {
                let t = i as f64 / 400.0;
                let (x, y) = case.point(t);
                assert!((x - qx.eval(t, 0).unwrap()).abs() <= 1e-11);
                assert!((y - qy.eval(t, 0).unwrap()).abs() <= 1e-11);
            }
        }
    }

    #[test]
    fn pullback_vanishes_at_the_start() {
        let case = build_case(CaseName::UHat, 4).unwrap();
        assert!(case.pullback(0.0).abs() <= 1e-15);
        assert!((case.pullback(0.5) - u(0.5, 0.5)).abs() <= 1e-14);
    }

    #[test]
    fn coarse_multiplicities_follow_the_case() {
        assert_eq!(build_case(CaseName::UHat, 5).unwrap().coarse_mult, 3);
        assert_eq!(build_case(CaseName::GHat, 5).unwrap().coarse_mult, 4);
        assert_eq!(build_case(CaseName::UHat, 2).unwrap_err(), ExperimentError::InvalidOrder(2));
        assert_eq!(build_case(CaseName::GHat, 7).unwrap_err(), ExperimentError::InvalidOrder(7));
    }

    #[test]
    fn normal_derivative_is_continuous_with_a_kink() {
        for m in 3..=6 {
            let d = normal_derivative_check(&build_case(CaseName::GHat, m).unwrap());
            assert!(d.value_jump <= 1e-12, "m={m} {d:?}");
            assert!(d.derivative_jump > 1e-3, "m={m} {d:?}");
            assert!(d.tangent_mismatch <= 1e-9, "m={m} {d:?}");
        }
    }

    #[test]
    fn slopes_are_log_ratios() {
        let rec = |n: usize, e: f64| ConvergenceRecord {
            m: 3,
            case: CaseName::UHat,
            kernel: ProjectorKind::K,
            n,
            h: 1.0 / (2 * n) as f64,
            l2_error: e,
            slope: None,
        };
        let mut r = vec![rec(4, 1.0), rec(8, 0.125), rec(16, 0.125 / 16.0)];
        assign_slopes(&mut r);
        assert_eq!(r[0].slope, None);
        assert!((r[1].slope.unwrap() - 3.0).abs() <= 1e-14);
        assert!((r[2].slope.unwrap() - 4.0).abs() <= 1e-14);
    }

    #[test]
    fn levels_are_validated() {
        let case = build_case(CaseName::UHat, 3).unwrap();
        assert!(run_ladder(&case, &[ProjectorKind::K], &[8, 4]).is_err());
        assert!(run_ladder(&case, &[ProjectorKind::K], &[]).is_err());
        assert!(run_ladder(&case, &[ProjectorKind::K], &[0, 4]).is_err());
    }

    #[test]
    fn errors_shrink_along_a_short_ladder() {
        let case = build_case(CaseName::UHat, 3).unwrap();
        let kinds = [ProjectorKind::K, ProjectorKind::L, ProjectorKind::Orthogonal];
        let recs = run_ladder(&case, &kinds, &[4, 8, 16]).unwrap();
        assert_eq!(recs.len(), 9);
        for w in recs.windows(2) {
            if w[0].kernel == w[1].kernel {
                assert!(w[1].l2_error < w[0].l2_error);
            }
        }
    }
}
