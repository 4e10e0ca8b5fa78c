//! Small numerical utilities shared across modules: compensated summation,
//! torus distances in extended precision, deterministic seeds, Hausdorff
//! distances, and a scaled-complex type for quantities that overflow `f64`.

use crate::C64;

/// Kahan–Babuška compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// SplitMix64 step, used to derive deterministic phase offsets from a seed.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform value in `[0, 1)` derived from a seed.
pub fn seed_unit(seed: u64) -> f64 {
    (splitmix64(seed) >> 11) as f64 / (1u64 << 53) as f64
}

/// Fractional part folded into `[0, 1)`.
#[inline]
pub fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// Distance to the nearest integer, `‖x‖_{R/Z}`.
#[inline]
pub fn torus_norm(x: f64) -> f64 {
    let f = frac(x);
    f.min(1.0 - f)
}

/// `‖k·α‖_{R/Z}` with the product `k·α` formed in double-double precision.
///
/// The rounding error of the plain product `k*α` is on the order of
/// `|kα|·2⁻⁵³`, which can swamp a small divisor once `k` is large; the fused
/// multiply-add recovers the exact low word.
pub fn torus_norm_kalpha(k: i64, alpha: f64) -> f64 {
    let kf = k as f64;
    let hi = kf * alpha;
    let lo = kf.mul_add(alpha, -hi);
    // Reduce hi mod 1 exactly (floor of a finite f64 is exact), then fold in
    // the low word.
    let r = (hi - hi.floor()) + lo;
    let f = frac(r);
    f.min(1.0 - f)
}

/// Two-sided Hausdorff distance between sorted point clouds.
pub fn hausdorff_sorted(a: &[f64], b: &[f64]) -> f64 {
    fn one_sided(from: &[f64], to: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        let mut j = 0usize;
        for &x in from {
            while j + 1 < to.len() && (to[j + 1] - x).abs() <= (to[j] - x).abs() {
                j += 1;
            }
            worst = worst.max((to[j] - x).abs());
        }
        worst
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    one_sided(a, b).max(one_sided(b, a))
}

/// A complex number stored as `mantissa · exp(log_scale)`, for conserved
/// quantities whose natural scale exceeds the `f64` exponent range.
#[derive(Debug, Clone, Copy)]
pub struct ScaledComplex {
    pub mantissa: C64,
    pub log_scale: f64,
}

impl ScaledComplex {
    pub fn new(mantissa: C64, log_scale: f64) -> Self {
        Self { mantissa, log_scale }
    }

    /// Ratio `self / other` collapsed to a plain complex number.
    ///
    /// Valid whenever the two logs are comparable, which is the case for a
    /// conserved pairing compared against its initial value.
    pub fn ratio(&self, other: &ScaledComplex) -> C64 {
        let scale = (self.log_scale - other.log_scale).exp();
        self.mantissa / other.mantissa * C64::new(scale, 0.0)
    }

    /// `ln |value|`, finite even when the value itself overflows.
    pub fn ln_abs(&self) -> f64 {
        self.mantissa.norm().ln() + self.log_scale
    }
}

/// `e^{2πi x}`.
#[inline]
pub fn cis(two_pi_x: f64) -> C64 {
    let (s, c) = two_pi_x.sin_cos();
    C64::new(c, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_small_terms() {
        let mut k = KahanSum::new();
        k.add(1.0e16);
        for _ in 0..1000 {
            k.add(1.0);
        }
        k.add(-1.0e16);
        assert_eq!(k.value(), 1000.0);
    }

    #[test]
    fn torus_norm_matches_integer_arithmetic_for_rationals() {
        // alpha = 3/7, k = 5: ‖15/7‖ = ‖1/7‖ = 1/7.
        let alpha = 3.0 / 7.0;
        let d = torus_norm_kalpha(5, alpha);
        assert!((d - 1.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn hausdorff_basic() {
        let a = [0.0, 1.0, 2.0];
        let b = [0.1, 1.0, 2.5];
        assert!((hausdorff_sorted(&a, &b) - 0.5).abs() < 1e-15);
    }
}
