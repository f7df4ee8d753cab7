use alloc::borrow::Cow;
use alloc::vec;
use alloc::vec::Vec;

use super::LinalgError;

/// Largest supported point count.
pub const MAX_GAUSS_POINTS: usize = 32;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn points(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (mid + half * x, half * w))
    }

    /// Integrates `f` over `[a, b]`. Mirrored nodes are summed pairwise, so
    /// odd integrands on a symmetric interval integrate to exactly zero.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let p = self.nodes.len();
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        let mut sum = 0.0;
        for i in 0..p / 2 {
            let j = p - 1 - i;
            let pair = f(mid + half * self.nodes[i]) + f(mid + half * self.nodes[j]);
            sum += self.weights[i] * pair;
        }
        if p % 2 == 1 {
            sum += self.weights[p / 2] * f(mid);
        }
        half * sum
    }
}

/// Computes the `p`-point rule by Newton iteration on the Legendre
/// three-term recurrence. Only the non-positive half is iterated; the rest
/// is mirrored so the rule is exactly symmetric.
pub fn gauss_legendre(p: usize) -> Result<QuadratureRule, LinalgError> {
    if p == 0 || p > MAX_GAUSS_POINTS {
        return Err(LinalgError::UnsupportedRule { requested: p, max: MAX_GAUSS_POINTS });
    }
    let mut nodes = vec![0.0; p];
    let mut weights = vec![0.0; p];
    let pf = p as f64;
    for i in 0..p.div_ceil(2) {
        // Tricomi-style initial guess for the i-th largest root
        let mut x = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (pf + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (pn, d) = legendre_with_derivative(p, x);
            dp = d;
            let dx = pn / d;
            x -= dx;
            if libm::fabs(dx) <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(p, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[p - 1 - i] = x;
        weights[i] = w;
        weights[p - 1 - i] = w;
    }
    if p % 2 == 1 {
        nodes[p / 2] = 0.0;
    }
    Ok(QuadratureRule { nodes, weights })
}

fn legendre_with_derivative(p: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=p {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let pf = p as f64;
    (p1, pf * (x * p1 - p0) / (x * x - 1.0))
}

#[cfg(feature = "std")]
fn cache() -> &'static [QuadratureRule] {
    static RULES: std::sync::OnceLock<Vec<QuadratureRule>> = std::sync::OnceLock::new();
    RULES.get_or_init(|| (1..=MAX_GAUSS_POINTS).map(|p| gauss_legendre(p).expect("supported point count")).collect())
}

/// Rule lookup used by the integration routines; cached after first use when
/// `std` is available.
pub(crate) fn rule(p: usize) -> Result<Cow<'static, QuadratureRule>, LinalgError> {
    #[cfg(feature = "std")]
    {
        if (1..=MAX_GAUSS_POINTS).contains(&p) {
            return Ok(Cow::Borrowed(&cache()[p - 1]));
        }
    }
    gauss_legendre(p).map(Cow::Owned)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn one_point() {
        let r = gauss_legendre(1).unwrap();
        assert_eq!(r.nodes(), &[0.0]);
        assert_abs_diff_eq!(r.weights()[0], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn two_points() {
        let r = gauss_legendre(2).unwrap();
        let s = 1.0 / libm::sqrt(3.0);
        assert_abs_diff_eq!(r.nodes()[0], -s, epsilon = 1e-15);
        assert_abs_diff_eq!(r.nodes()[1], s, epsilon = 1e-15);
        assert_abs_diff_eq!(r.weights()[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.weights()[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn exact_for_monomials() {
        for p in 1..=MAX_GAUSS_POINTS {
            let r = gauss_legendre(p).unwrap();
            for d in 0..2 * p {
                let exact = if d % 2 == 1 { 0.0 } else { 2.0 / (d as f64 + 1.0) };
                let got = r.integrate(-1.0, 1.0, |x| libm::pow(x, d as f64));
                assert!(libm::fabs(got - exact) <= 1e-14, "p={p} d={d} err={}", got - exact);
            }
        }
    }

    #[test]
    fn odd_moments_vanish_by_symmetry() {
        for p in 1..=MAX_GAUSS_POINTS {
            let r = gauss_legendre(p).unwrap();
            let q = 2 * p - 1;
            assert_eq!(r.integrate(-1.0, 1.0, |x| libm::pow(x, q as f64)), 0.0, "p={p}");
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(gauss_legendre(0).is_err());
        assert!(gauss_legendre(33).is_err());
    }
}
