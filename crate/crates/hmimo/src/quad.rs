//! Numerical integration of the isotropic wavenumber spectrum over a
//! rectangular cell clipped to the propagation disk.
//!
//! The target is `I(R) = ∬_{R ∩ disk} (κ² − k_x² − k_y²)^{-1/2} dk_x dk_y`
//! for an axis-aligned rectangle `R`. The integrand diverges on the disk rim,
//! but in polar coordinates the radial part is analytic:
//! `∫ r (κ² − r²)^{-1/2} dr = −√(κ² − r²)`, which removes the singularity.
//! What remains is a one-dimensional integral over the ray angle of a bounded
//! piecewise-smooth function, handled by adaptive Simpson quadrature with
//! breakpoints at the rectangle corners and rim crossings.

use std::f64::consts::PI;

use crate::WAVENUMBER;

/// Absolute tolerance of the angular quadrature, applied to the integral
/// normalized by `I(disk) = 2πκ` (i.e. directly to the returned ratio).
pub const CELL_TOLERANCE: f64 = 1e-9;

/// Maximum bisection depth of the adaptive rule.
const MAX_DEPTH: u32 = 48;

/// Axis-aligned rectangle `[a, b] x [c, d]` in wavenumber space.
#[derive(Debug, Clone, Copy)]
pub struct Rect {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Rect {
    /// Squared distance from the origin to the rectangle.
    fn distance2_to_origin(&self) -> f64 {
        let dx = if self.a > 0.0 {
            self.a
        } else if self.b < 0.0 {
            -self.b
        } else {
            0.0
        };
        let dy = if self.c > 0.0 {
            self.c
        } else if self.d < 0.0 {
            -self.d
        } else {
            0.0
        };
        dx * dx + dy * dy
    }

    /// Radial interval `[lo, hi]` of the ray at angle `theta` inside the
    /// rectangle, or `None` when the ray misses it. Rays start at the origin.
    fn radial_section(&self, theta: f64) -> Option<(f64, f64)> {
        let mut lo = 0.0f64;
        let mut hi = f64::INFINITY;
        for (w, lower, upper) in [(theta.cos(), self.a, self.b), (theta.sin(), self.c, self.d)] {
            // `lower ≤ r·w ≤ upper` for r ≥ 0. Division by a zero component
            // produces ±inf/NaN, which f64::max / f64::min absorb correctly.
            if w > 0.0 {
                lo = lo.max(lower / w);
                hi = hi.min(upper / w);
            } else {
                lo = lo.max(upper / w);
                hi = hi.min(lower / w);
            }
        }
        (lo < hi).then_some((lo, hi))
    }
}

/// Fraction of the isotropic spectral mass inside `rect`:
/// `I(rect ∩ disk) / I(disk)` with `I(disk) = 2πκ`. Exactly zero when the
/// rectangle does not reach the open disk; in `[0, 1]` always.
pub fn disk_density_fraction(rect: Rect) -> f64 {
    debug_assert!(rect.a <= rect.b && rect.c <= rect.d);
    let kappa = WAVENUMBER;
    if rect.distance2_to_origin() >= kappa * kappa {
        return 0.0;
    }

    // Angular integrand: radial integral of r(κ²−r²)^{-1/2} over the clipped
    // section, i.e. √(κ²−lo²) − √(κ²−hi²); bounded by κ.
    let g = |theta: f64| -> f64 {
        match rect.radial_section(theta) {
            Some((lo, hi)) if lo < kappa => {
                let hi = hi.min(kappa);
                let inner = (kappa * kappa - lo * lo).max(0.0).sqrt();
                let outer = (kappa * kappa - hi * hi).max(0.0).sqrt();
                inner - outer
            }
            _ => 0.0,
        }
    };

    // Breakpoints: corner angles, rim crossings of the four edge lines, axes.
    let mut cuts = vec![-PI, -PI / 2.0, 0.0, PI / 2.0, PI];
    for (x, y) in [
        (rect.a, rect.c),
        (rect.a, rect.d),
        (rect.b, rect.c),
        (rect.b, rect.d),
    ] {
        cuts.push(y.atan2(x));
    }
    for x in [rect.a, rect.b] {
        let rem = kappa * kappa - x * x;
        if rem > 0.0 {
            let y = rem.sqrt();
            cuts.push(y.atan2(x));
            cuts.push((-y).atan2(x));
        }
    }
    for y in [rect.c, rect.d] {
        let rem = kappa * kappa - y * y;
        if rem > 0.0 {
            let x = rem.sqrt();
            cuts.push(y.atan2(x));
            cuts.push(y.atan2(-x));
        }
    }
    cuts.sort_by(|p, q| p.total_cmp(q));
    cuts.dedup_by(|p, q| (*p - *q).abs() < 1e-13);

    let norm = 2.0 * PI * kappa;
    let tol = CELL_TOLERANCE * norm / cuts.len() as f64;
    let mut total = 0.0;
    for pair in cuts.windows(2) {
        total += adaptive_simpson(&g, pair[0], pair[1], tol);
    }
    (total / norm).clamp(0.0, 1.0)
}

/// Adaptive Simpson quadrature with the standard 1/15 error estimate.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn simpson_handles_smooth_integrands() {
        let exact = 1.0 - (-2.0f64).exp();
        let got = adaptive_simpson(&|x: f64| 2.0 * (-2.0 * x).exp(), 0.0, 1.0, 1e-12);
        assert_relative_eq!(got, exact, max_relative = 1e-10);
        let got = adaptive_simpson(&|x: f64| x.sin(), 0.0, PI, 1e-12);
        assert_relative_eq!(got, 2.0, max_relative = 1e-10);
    }

    #[test]
    fn simpson_handles_square_root_kinks() {
        // |x|^(1/2) has a vertical-tangent kink like the clipped rim terms.
        let got = adaptive_simpson(&|x: f64| x.abs().sqrt(), -1.0, 1.0, 1e-11);
        assert_relative_eq!(got, 4.0 / 3.0, max_relative = 1e-8);
    }

    #[test]
    fn rectangle_enclosing_disk_captures_everything() {
        let k = WAVENUMBER;
        let r = Rect { a: -2.0 * k, b: 2.0 * k, c: -2.0 * k, d: 2.0 * k };
        assert_relative_eq!(disk_density_fraction(r), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn quadrant_captures_a_quarter() {
        let k = WAVENUMBER;
        let r = Rect { a: 0.0, b: 2.0 * k, c: 0.0, d: 2.0 * k };
        assert_relative_eq!(disk_density_fraction(r), 0.25, epsilon = 1e-9);
    }

    #[test]
    fn half_plane_captures_half() {
        let k = WAVENUMBER;
        let r = Rect { a: -2.0 * k, b: 2.0 * k, c: 0.0, d: 2.0 * k };
        assert_relative_eq!(disk_density_fraction(r), 0.5, epsilon = 1e-9);
    }

    #[test]
    fn transverse_band_matches_closed_form() {
        // The integrand is the Jacobian of the hemisphere projection, so a
        // band c ≤ k_y ≤ d spanning the disk holds exactly (d − c)/(2κ) of
        // the mass (hat-box theorem): ∫ dx (κ²−x²−y²)^{-1/2} = π for any |y| < κ.
        let k = WAVENUMBER;
        let r = Rect { a: -2.0 * k, b: 2.0 * k, c: 0.25 * k, d: 0.75 * k };
        assert_relative_eq!(disk_density_fraction(r), 0.25, epsilon = 1e-9);
        let r = Rect { a: -0.4 * k, b: 0.1 * k, c: -2.0 * k, d: 2.0 * k };
        assert_relative_eq!(disk_density_fraction(r), 0.25, epsilon = 1e-9);
    }

    #[test]
    fn outside_cell_is_exactly_zero() {
        let k = WAVENUMBER;
        let r = Rect { a: k, b: 1.2 * k, c: 0.0, d: 0.2 * k };
        assert_eq!(disk_density_fraction(r), 0.0);
        // Touching the rim at a single corner point carries no mass either.
        let corner = 0.5f64.sqrt() * k;
        let r = Rect { a: corner, b: 2.0 * corner, c: corner, d: 2.0 * corner };
        assert_eq!(disk_density_fraction(r), 0.0);
    }
}
