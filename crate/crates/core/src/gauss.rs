//! Standard normal distribution functions and adaptive quadrature.
//!
//! `erf`/`erfc` come from `libm` (a port of the FreeBSD msun rational
//! approximations, accurate to about one ulp). The quantile starts from
//! Acklam's rational approximation and is polished with one Halley step
//! against the accurate CDF.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Standard normal density φ(x).
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Standard normal CDF Φ(x).
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Gaussian tail Q(x) = 1 − Φ(x), computed without cancellation.
pub fn q(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// Inverse of Φ. Returns ±∞ at the endpoints and NaN outside `[0, 1]`.
pub fn quantile(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    if p > 0.5 {
        // 1 - p is exact for p in [0.5, 1].
        return -lower_quantile(1.0 - p);
    }
    lower_quantile(p)
}

/// Inverse of Q, i.e. `Q⁻¹(ε) = −Φ⁻¹(ε)`.
pub fn q_inverse(eps: f64) -> f64 {
    -quantile(eps)
}

fn lower_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p <= 0.5);
    let x = acklam(p);
    // Halley refinement; the residual uses erfc so it stays accurate deep in
    // the lower tail.
    let e = cdf(x) - p;
    let u = e * SQRT_2PI * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// `E|x − Z|` for a standard normal `Z`.
pub fn mean_abs_deviation(x: f64) -> f64 {
    2.0 * pdf(x) + x * (2.0 * cdf(x) - 1.0)
}

/// `erf(x/√2)`, the probability `P(|Z| ≤ x)` for `x ≥ 0`.
pub fn erf_scaled(x: f64) -> f64 {
    erf(x / SQRT_2)
}

// Gauss-Kronrod 7/15 nodes and weights (QUADPACK qk15).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let sum = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive Gauss-Kronrod integration of `f` over the finite interval `[a, b]`
/// to absolute tolerance `abs_tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if a > b {
        return -integrate(f, b, a, abs_tol);
    }
    // Start from a few panels so narrow features are not missed.
    let panels = 8;
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let lo = a + width * i as f64;
        let hi = if i + 1 == panels { b } else { lo + width };
        total += adapt(&f, lo, hi, abs_tol / panels as f64, 0);
    }
    total
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (value, err) = gk15(f, a, b);
    if err <= tol || depth >= 48 {
        return value;
    }
    let mid = 0.5 * (a + b);
    adapt(f, a, mid, 0.5 * tol, depth + 1) + adapt(f, mid, b, 0.5 * tol, depth + 1)
}

/// `1/√π`, the mean of the maximum of two independent standard normals.
pub const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// `√(π/2)`.
pub const SQRT_HALF_PI: f64 = 1.253_314_137_315_500_3;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn cdf_reference_values() {
        assert_eq!(cdf(0.0), 0.5);
        assert_relative_eq!(cdf(1.0), 0.841_344_746_068_542_9, max_relative = 1e-15);
        assert_relative_eq!(q(5.0), 2.866_515_718_791_939e-7, max_relative = 1e-13);
        assert_relative_eq!(q(-1.959_963_984_540_054), 0.975, max_relative = 1e-15);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-300, 1e-12, 1e-6, 0.001, 0.02425, 0.1, 0.3, 0.5, 0.7, 0.95, 0.999_999] {
            let x = quantile(p);
            let back = cdf(x);
            assert_relative_eq!(back, p, max_relative = 1e-12);
        }
        assert_eq!(quantile(0.5), 0.0);
        assert_relative_eq!(q_inverse(0.05), 1.644_853_626_951_472_2, max_relative = 1e-14);
        assert_relative_eq!(q_inverse(0.001), 3.090_232_306_167_813_5, max_relative = 1e-14);
    }

    #[test]
    fn quantile_edge_cases() {
        assert_eq!(quantile(0.0), f64::NEG_INFINITY);
        assert_eq!(quantile(1.0), f64::INFINITY);
        assert!(quantile(1.5).is_nan());
        assert!(quantile(f64::NAN).is_nan());
    }

    #[test]
    fn quadrature_known_integrals() {
        assert_relative_eq!(integrate(|x| x * x, 0.0, 1.0, 1e-14), 1.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(integrate(pdf, -40.0, 40.0, 1e-13), 1.0, max_relative = 1e-12);
        assert_relative_eq!(
            integrate(f64::exp, 0.0, 2.0, 1e-13),
            2.0f64.exp() - 1.0,
            max_relative = 1e-13
        );
        assert_relative_eq!(integrate(|x| x, 1.0, 0.0, 1e-14), -0.5, max_relative = 1e-14);
    }

    #[test]
    fn mean_abs_deviation_at_zero() {
        assert_relative_eq!(mean_abs_deviation(0.0), (2.0 / PI).sqrt(), max_relative = 1e-15);
    }
}
