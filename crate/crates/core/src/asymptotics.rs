//! Second-order coefficients of the asymptotic expansion of `log M*(l, ε)`.
//!
//! With `ϱ_k = (V_k / V_k̄)^{1/4}` and `Z_k` independent standard normals, the
//! achievability and converse expansions read
//!
//! ```text
//! C l / (1 − ε) − Ξ_a √l  ≤  log M*(l, ε)  ≤  C l / (1 − ε) − Ξ_c √l
//! ```
//!
//! up to unquantified lower-order remainders, which are not modelled here.

use std::f64::consts::{PI, SQRT_2};

use crate::bound::{BoundCurve, BoundKind, BoundPoint};
use crate::channel::BroadcastPair;
use crate::error::{Error, Result};
use crate::gauss;

/// Standard deviations beyond which the Gaussian integrands are truncated.
const TRUNCATION_SDS: f64 = 40.0;
const QUAD_TOL: f64 = 1e-13;
const ROOT_BRACKET: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticCoefficients {
    pub xi_a: f64,
    pub xi_c: f64,
    pub q_tilde_inv: f64,
    pub rho1: f64,
    pub rho2: f64,
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon {eps} must lie in (0, 1)")));
    }
    Ok(())
}

/// Left-hand side minus one of the defining equation of `Q̃⁻¹`:
/// `Π_k Q(−ϱ_k y) + ε(1 + min_k Q(−ϱ_k y)) − 1`. Increasing in `y`.
fn q_tilde_residual(y: f64, eps: f64, rho1: f64, rho2: f64) -> f64 {
    let a = gauss::cdf(rho1 * y);
    let b = gauss::cdf(rho2 * y);
    a * b + eps * (1.0 + a.min(b)) - 1.0
}

/// Solves `Π_k Q(−ϱ_k y) + ε(1 + min_k Q(−ϱ_k y)) = 1` for `y`.
///
/// For `ϱ₁ = ϱ₂ = 1` the root is `Q⁻¹(ε)`.
pub fn q_tilde_inverse(eps: f64, rho1: f64, rho2: f64) -> Result<f64> {
    check_eps(eps)?;
    if !(rho1 > 0.0 && rho2 > 0.0) {
        return Err(Error::InvalidParameter("rho values must be positive".into()));
    }
    if ((rho1 * rho2) - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidParameter(format!(
            "rho1 * rho2 = {} must equal 1",
            rho1 * rho2
        )));
    }
    let (mut lo, mut hi) = (-ROOT_BRACKET, ROOT_BRACKET);
    let f_lo = q_tilde_residual(lo, eps, rho1, rho2);
    let f_hi = q_tilde_residual(hi, eps, rho1, rho2);
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::BracketFailure(format!(
            "no sign change of the Q-tilde equation on [-40, 40] (f = {f_lo}, {f_hi})"
        )));
    }
    // Bisect down to adjacent floating-point numbers.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if q_tilde_residual(mid, eps, rho1, rho2) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (r_lo, r_hi) = (
        q_tilde_residual(lo, eps, rho1, rho2).abs(),
        q_tilde_residual(hi, eps, rho1, rho2).abs(),
    );
    Ok(if r_lo <= r_hi { lo } else { hi })
}

/// `E[min(c, ϱZ)] = c·Q(c/ϱ) − ϱ·φ(c/ϱ)`.
pub fn e_min_threshold_gauss(c: f64, rho: f64) -> f64 {
    if c == f64::INFINITY {
        return 0.0;
    }
    if c == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let u = c / rho;
    c * gauss::q(u) - rho * gauss::pdf(u)
}

/// `E[min(c, max(ϱ₁Z₁, ϱ₂Z₂))]` for independent standard normals.
///
/// Uses `E[min(c, X)] = ∫_0^{c⁺} (1 − F(z)) dz − ∫_{−∞}^{min(c,0)} F(z) dz`
/// with `F(z) = Φ(z/ϱ₁)Φ(z/ϱ₂)`, which for `c < 0` is `c − ∫_{−∞}^c F`. The
/// infinite limits are truncated at 40 standard deviations.
pub fn e_min_max_gauss(c: f64, rho1: f64, rho2: f64) -> f64 {
    let span = TRUNCATION_SDS * rho1.max(rho2);
    let cdf = |z: f64| gauss::cdf(z / rho1) * gauss::cdf(z / rho2);
    let survival = |z: f64| {
        // 1 − Φ(a)Φ(b) = Q(a) + Q(b) − Q(a)Q(b), accurate for large z.
        let (qa, qb) = (gauss::q(z / rho1), gauss::q(z / rho2));
        qa + qb - qa * qb
    };
    if c <= 0.0 {
        let lower = c.min(0.0) - span;
        return c - gauss::integrate(cdf, lower, c, QUAD_TOL);
    }
    let upper = c.min(span);
    let negative_part = gauss::integrate(cdf, -span, 0.0, QUAD_TOL);
    let positive_part = gauss::integrate(survival, 0.0, upper, QUAD_TOL);
    positive_part - negative_part
}

/// `Ξ_a = √((V₁ + V₂) / (2π(1 − ε)))`.
pub fn xi_a(pair: &BroadcastPair, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    Ok(xi_a_from(pair.v1(), pair.v2(), eps))
}

pub fn xi_a_from(v1: f64, v2: f64, eps: f64) -> f64 {
    ((v1 + v2) / (2.0 * PI * (1.0 - eps))).sqrt()
}

/// Bracketed factor of `Ξ_c` (everything except `√(V/(1−ε)³)`).
pub fn xi_c_bracket(eps: f64, rho1: f64, rho2: f64) -> Result<f64> {
    let y = q_tilde_inverse(eps, rho1, rho2)?;
    let e_max = e_min_max_gauss(y, rho1, rho2);
    let e_single = e_min_threshold_gauss(y, rho1).min(e_min_threshold_gauss(y, rho2));
    Ok(e_max - eps * (2.0 * y - e_single))
}

/// `Ξ_c` from the dispersions directly.
pub fn xi_c_from(v1: f64, v2: f64, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    if !(v1 > 0.0 && v2 > 0.0) {
        return Err(Error::InvalidParameter("Xi_c requires V1, V2 > 0".into()));
    }
    let rho1 = (v1 / v2).powf(0.25);
    let rho2 = 1.0 / rho1;
    let v = (v1 * v2).sqrt();
    Ok((v / (1.0 - eps).powi(3)).sqrt() * xi_c_bracket(eps, rho1, rho2)?)
}

/// Converse second-order coefficient `Ξ_c`.
pub fn xi_c(pair: &BroadcastPair, eps: f64) -> Result<f64> {
    xi_c_from(pair.v1(), pair.v2(), eps)
}

/// Closed-form bracket for equal dispersions:
/// `(1/√π)(1 − Q(√2·Q⁻¹(ε))) + (ε − 2)·φ(Q⁻¹(ε))`.
pub fn symmetric_bracket(eps: f64) -> f64 {
    let y = gauss::q_inverse(eps);
    gauss::FRAC_1_SQRT_PI * (1.0 - gauss::q(SQRT_2 * y)) + (eps - 2.0) * gauss::pdf(y)
}

/// `Ξ_c` for `V₁ = V₂ = v` via the closed form.
pub fn xi_c_symmetric(v: f64, eps: f64) -> f64 {
    (v / (1.0 - eps).powi(3)).sqrt() * symmetric_bracket(eps)
}

/// Root of [`symmetric_bracket`] on `(0.01, 0.5)`: below it the converse
/// carries a strictly positive square-root penalty.
pub fn critical_epsilon_symmetric() -> Result<f64> {
    let (mut lo, mut hi) = (0.01, 0.5);
    let (f_lo, f_hi) = (symmetric_bracket(lo), symmetric_bracket(hi));
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(Error::BracketFailure(format!(
            "symmetric bracket has no sign change on (0.01, 0.5): {f_lo}, {f_hi}"
        )));
    }
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if symmetric_bracket(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn coefficients(pair: &BroadcastPair, eps: f64) -> Result<AsymptoticCoefficients> {
    check_eps(eps)?;
    let (rho1, rho2) = (pair.rho1(), pair.rho2());
    Ok(AsymptoticCoefficients {
        xi_a: xi_a(pair, eps)?,
        xi_c: xi_c(pair, eps)?,
        q_tilde_inv: q_tilde_inverse(eps, rho1, rho2)?,
        rho1,
        rho2,
    })
}

/// The two second-order curves on an `l` grid, plus a warning when the
/// capacities differ (the expansion assumes `C₁ = C₂`).
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticCurves {
    pub lower: BoundCurve,
    pub upper: BoundCurve,
    pub coefficients: AsymptoticCoefficients,
    pub warning: Option<String>,
}

pub fn asymptotic_curves(pair: &BroadcastPair, eps: f64, ls: &[f64]) -> Result<AsymptoticCurves> {
    let coefficients = coefficients(pair, eps)?;
    let c = pair.capacity();
    let curve = |kind_coef: f64| BoundCurve {
        kind: BoundKind::Asymptotic,
        points: ls
            .iter()
            .map(|&l| BoundPoint {
                avg_blocklength: l,
                log_m: c * l / (1.0 - eps) - kind_coef * l.sqrt(),
                kind: BoundKind::Asymptotic,
                certified: false,
            })
            .collect(),
    };
    let mismatch = pair.capacity_mismatch();
    let warning = (mismatch > 1e-6).then(|| {
        format!("capacities differ (relative gap {mismatch:.3e}); the square-root terms assume C1 = C2 and overstate the penalty")
    });
    Ok(AsymptoticCurves {
        lower: curve(coefficients.xi_a),
        upper: curve(coefficients.xi_c),
        coefficients,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn q_tilde_symmetric_is_gaussian_quantile() {
        for &eps in &[0.001, 0.01, 0.05, 0.1, 0.3, 0.5, 0.9] {
            // u² + εu + ε − 1 = 0 has root u = 1 − ε, i.e. y = Φ⁻¹(1 − ε).
            let (a, b, c): (f64, f64, f64) = (1.0, eps, eps - 1.0);
            let u = (-b + ((b * b) - 4.0 * a * c).sqrt()) / (2.0 * a);
            assert_relative_eq!(u, 1.0 - eps, max_relative = 1e-14);
            let y = q_tilde_inverse(eps, 1.0, 1.0).unwrap();
            assert!((y - gauss::q_inverse(eps)).abs() < 1e-10, "eps {eps}: {y}");
            assert!(q_tilde_residual(y, eps, 1.0, 1.0).abs() <= 1e-12);
        }
        assert!(q_tilde_inverse(0.5, 1.0, 1.0).unwrap().abs() < 1e-15);
        assert!(q_tilde_inverse(0.999, 1.0, 1.0).unwrap() < -3.0);
    }

    #[test]
    fn q_tilde_rejects_bad_input() {
        assert!(q_tilde_inverse(0.0, 1.0, 1.0).is_err());
        assert!(q_tilde_inverse(0.2, 2.0, 1.0).is_err());
    }

    #[test]
    fn q_tilde_asymmetric_residual() {
        let rho1 = 1.3f64;
        let y = q_tilde_inverse(0.05, rho1, 1.0 / rho1).unwrap();
        assert!(q_tilde_residual(y, 0.05, rho1, 1.0 / rho1).abs() <= 1e-12);
    }

    #[test]
    fn e_min_threshold_reference() {
        assert_relative_eq!(
            e_min_threshold_gauss(0.0, 1.0),
            -0.398_942_280_401_432_7,
            max_relative = 1e-15
        );
        assert_eq!(e_min_threshold_gauss(f64::INFINITY, 1.0), 0.0);
        assert!(e_min_threshold_gauss(60.0, 1.0).abs() < 1e-300);
        // Quadrature oracle: c − ∫_{−∞}^{c} Φ(z/ϱ) dz.
        for &(c, rho) in &[(0.0, 1.0), (1.2, 0.7), (-0.8, 1.5)] {
            let quad = c - gauss::integrate(|z| gauss::cdf(z / rho), c - 40.0 * rho, c, 1e-14);
            assert!((e_min_threshold_gauss(c, rho) - quad).abs() < 1e-10);
        }
        for &c in &[0.0, 0.5, 2.0] {
            let v = e_min_threshold_gauss(c, 1.0);
            assert!(v <= c && v <= 0.0);
        }
    }

    #[test]
    fn e_min_max_reference() {
        assert_relative_eq!(
            e_min_max_gauss(f64::INFINITY, 1.0, 1.0),
            gauss::FRAC_1_SQRT_PI,
            max_relative = 1e-12
        );
        let direct = -gauss::integrate(|z| gauss::cdf(z).powi(2), -40.0, 0.0, 1e-14);
        assert!((e_min_max_gauss(0.0, 1.0, 1.0) - direct).abs() < 1e-12);
        let mut prev = f64::NEG_INFINITY;
        for i in -40..=40 {
            let v = e_min_max_gauss(i as f64 * 0.1, 1.2, 1.0 / 1.2);
            assert!(v >= prev - 1e-14);
            prev = v;
        }
    }

    #[test]
    fn xi_a_reference() {
        assert_eq!(xi_a_from(0.0, 0.0, 0.3), 0.0);
        assert_relative_eq!(
            xi_a_from(0.42806, 0.42806, 0.05),
            0.378_717_683_880_797,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            xi_a_from(0.8, 0.6, 0.1) * 2f64.sqrt(),
            xi_a_from(1.6, 1.2, 0.1),
            max_relative = 1e-15
        );
    }

    #[test]
    fn xi_c_matches_symmetric_closed_form() {
        for &eps in &[0.001, 0.01, 0.05, 0.1, 0.3, 0.5, 0.9] {
            let general = xi_c_from(0.5, 0.5, eps).unwrap();
            let closed = xi_c_symmetric(0.5, eps);
            assert!((general - closed).abs() < 1e-9, "eps {eps}: {general} vs {closed}");
        }
    }

    #[test]
    fn critical_epsilon() {
        let e = critical_epsilon_symmetric().unwrap();
        assert!((0.1963..=0.1973).contains(&e), "{e}");
        assert!(symmetric_bracket(0.05) > 0.0);
        assert!(symmetric_bracket(0.4) < 0.0);
        // Exactly one sign change on the bracket.
        let signs: Vec<bool> = (0..1000)
            .map(|i| symmetric_bracket(0.01 + 0.49 * i as f64 / 999.0) > 0.0)
            .collect();
        let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(changes, 1);
        assert!(xi_c_from(0.4, 0.4, 0.1968).unwrap().abs() < 1e-3);
    }
}
