/// Numerical tolerances used by the internal consistency checks.
///
/// Defaults are the thresholds the library is tested against. Tests may
/// tighten them; the CLI can scale all of them at once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Residual of an exact re-representation, relative to `max |f|`.
    pub represent_residual: f64,
    /// `‖AR − I‖_max` for a right inverse and `‖AU − B‖_max` relative to `‖B‖_max`.
    pub right_inverse: f64,
    /// Entries of `w` that must vanish, relative to their rounding envelope.
    pub zero_pattern: f64,
    /// `w·D⋯D = v`, relative to the rounding envelope of `v`.
    pub strip_consistency: f64,
    /// Least-squares residual of the reproduction system for `S`.
    pub reproduction_system: f64,
    /// Relative spread allowed when the normalisation of `F_ν` is measured.
    pub calibration_scalar: f64,
    /// Agreement of calibration constants between reference knot vectors.
    pub calibration_cross_check: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            represent_residual: 1e-11,
            right_inverse: 1e-10,
            zero_pattern: 1e-9,
            strip_consistency: 1e-10,
            reproduction_system: 1e-10,
            calibration_scalar: 1e-8,
            calibration_cross_check: 1e-10,
        }
    }
}

impl Tolerances {
    /// Every threshold multiplied by `factor`.
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            represent_residual: self.represent_residual * factor,
            right_inverse: self.right_inverse * factor,
            zero_pattern: self.zero_pattern * factor,
            strip_consistency: self.strip_consistency * factor,
            reproduction_system: self.reproduction_system * factor,
            calibration_scalar: self.calibration_scalar * factor,
            calibration_cross_check: self.calibration_cross_check * factor,
        }
    }
}
