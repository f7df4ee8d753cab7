#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::sync::OnceLock;

use aduals_core::experiments::{build_case, run_ladder, CaseName, ConvergenceRecord, DEFAULT_LEVELS};
use aduals_core::ProjectorKind;

const KERNELS: [ProjectorKind; 3] = [ProjectorKind::K, ProjectorKind::L, ProjectorKind::Orthogonal];

fn ladders() -> &'static [ConvergenceRecord] {
    static CELL: OnceLock<Vec<ConvergenceRecord>> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut all = Vec::new();
        for case in [CaseName::UHat, CaseName::GHat] {
            for m in 3..=6 {
                all.extend(run_ladder(&build_case(case, m).unwrap(), &KERNELS, &DEFAULT_LEVELS).unwrap());
            }
        }
        all
    })
}

fn series(case: CaseName, m: usize, kernel: ProjectorKind) -> Vec<&'static ConvergenceRecord> {
    ladders().iter().filter(|r| r.case == case && r.m == m && r.kernel == kernel).collect()
}

#[test]
fn records_cover_every_level() {
    assert_eq!(ladders().len(), 2 * 4 * KERNELS.len() * DEFAULT_LEVELS.len());
    for r in ladders() {
        assert_eq!(r.h, 1.0 / (2 * r.n) as f64);
        assert_eq!(r.slope.is_none(), r.n == DEFAULT_LEVELS[0]);
        assert!(r.l2_error.is_finite() && r.l2_error > 0.0);
    }
}

#[test]
fn errors_decrease_from_the_second_level() {
    let mut failures = Vec::new();
    for case in [CaseName::UHat, CaseName::GHat] {
        for m in 3..=6 {
            for k in KERNELS {
                for w in series(case, m, k).windows(2) {
                    if w[0].n >= 8 && !(w[1].l2_error < w[0].l2_error) {
                        failures.push(format!("{} m={m} {k:?} N={}", case.as_str(), w[1].n));
                    }
                }
            }
        }
    }
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn enhanced_kernel_tracks_the_best_approximation() {
    let mut failures = Vec::new();
    for case in [CaseName::UHat, CaseName::GHat] {
        for m in 3..=6 {
            let l = series(case, m, ProjectorKind::L);
            let o = series(case, m, ProjectorKind::Orthogonal);
            for (a, b) in l.iter().zip(&o) {
                let ratio = a.l2_error / b.l2_error;
                if !(ratio <= 5.0) {
                    failures.push(format!("{} m={m} N={} ratio={ratio:.2}", case.as_str(), a.n));
                }
            }
        }
    }
    assert!(failures.is_empty(), "error(L) > 5 error(ortho): {failures:?}");
}

#[test]
fn orthogonal_projection_is_never_beaten() {
    for r in ladders().iter().filter(|r| r.kernel != ProjectorKind::Orthogonal) {
        let best = series(r.case, r.m, ProjectorKind::Orthogonal).into_iter().find(|o| o.n == r.n).unwrap();
        assert!(best.l2_error <= r.l2_error * (1.0 + 1e-9), "{r:?}");
    }
}

#[test]
fn last_three_slopes_are_stable() {
    let mut failures = Vec::new();
    for case in [CaseName::UHat, CaseName::GHat] {
        for m in 3..=6 {
            for k in KERNELS {
                let slopes: Vec<f64> = series(case, m, k).iter().filter_map(|r| r.slope).collect();
                let tail = &slopes[slopes.len() - 3..];
                let spread =
                    tail.iter().cloned().fold(f64::MIN, f64::max) - tail.iter().cloned().fold(f64::MAX, f64::min);
                if !(spread <= 0.2) {
                    failures.push(format!("{} m={m} {k:?} slopes={tail:.2?}", case.as_str()));
                }
            }
        }
    }
    assert!(failures.is_empty(), "{failures:?}");
}
