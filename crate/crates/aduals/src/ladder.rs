//! Parallel driver for the refinement ladders.

use aduals_core::experiments::{
    assign_slopes, build_case, check_levels, kernel_name, run_level, CaseName, ConvergenceRecord, ExperimentError,
};
use aduals_core::ProjectorKind;
use rayon::prelude::*;

/// Runs every `(m, kernel, N)` level independently and returns the records
/// ordered by `m`, then kernel, then `N`, with slopes filled in.
pub fn run_ladders(
    case: CaseName,
    orders: &[usize],
    kernels: &[ProjectorKind],
    levels: &[usize],
) -> Result<Vec<ConvergenceRecord>, ExperimentError> {
    check_levels(levels)?;
    let cases = orders.iter().map(|&m| build_case(case, m)).collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<_> =
        cases.iter().flat_map(|c| kernels.iter().flat_map(move |&k| levels.iter().map(move |&n| (c, k, n)))).collect();
    let mut records = jobs.into_par_iter().map(|(c, k, n)| run_level(c, k, n)).collect::<Result<Vec<_>, _>>()?;
    assign_slopes(&mut records);
    Ok(records)
}

/// Slope between the last two levels of each `(m, kernel)` series.
pub fn terminal_slopes(records: &[ConvergenceRecord]) -> Vec<(usize, ProjectorKind, f64)> {
    let mut out: Vec<(usize, ProjectorKind, f64)> = Vec::new();
    for r in records {
        let Some(s) = r.slope else { continue };
        match out.last_mut() {
            Some(last) if last.0 == r.m && last.1 == r.kernel => last.2 = s,
            _ => out.push((r.m, r.kernel, s)),
        }
    }
    out
}

/// Plain-text table of terminal slopes, one row per order.
pub fn slope_table(case: CaseName, records: &[ConvergenceRecord], kernels: &[ProjectorKind]) -> String {
    let slopes = terminal_slopes(records);
    let mut out = format!("terminal slopes for {}\n{:>3}", case.as_str(), "m");
    for &k in kernels {
        out.push_str(&format!(" {:>8}", kernel_name(k)));
    }
    out.push('\n');
    let mut orders: Vec<usize> = slopes.iter().map(|s| s.0).collect();
    orders.dedup();
    for m in orders {
        out.push_str(&format!("{m:>3}"));
        for &k in kernels {
            match slopes.iter().find(|s| s.0 == m && s.1 == k) {
                Some(s) => out.push_str(&format!(" {:>8.3}", s.2)),
                None => out.push_str(&format!(" {:>8}", "-")),
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_order_matches_sequential() {
        let kernels = [ProjectorKind::K, ProjectorKind::Orthogonal];
        let levels = [4, 8, 16];
        let par = run_ladders(CaseName::UHat, &[3], &kernels, &levels).unwrap();
        let seq =
            aduals_core::experiments::run_ladder(&build_case(CaseName::UHat, 3).unwrap(), &kernels, &levels).unwrap();
        assert_eq!(par, seq);
        let t = terminal_slopes(&par);
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].2, par[2].slope.unwrap());
        assert!(slope_table(CaseName::UHat, &par, &kernels).contains("ortho"));
    }

    #[test]
    fn rejects_bad_levels() {
        assert!(run_ladders(CaseName::GHat, &[3], &[ProjectorKind::K], &[8, 4]).is_err());
        assert!(run_ladders(CaseName::GHat, &[7], &[ProjectorKind::K], &[4]).is_err());
    }
}
