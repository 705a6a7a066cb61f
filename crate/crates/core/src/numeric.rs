//! Small numeric helpers shared across modules.

/// Compensated (Neumaier) summation.
///
/// Probability vectors here have ~10^4 entries of similar magnitude; plain
/// accumulation loses just enough precision to blur 1e-12-level normalization
/// checks, so sums that feed tolerances go through this instead.
pub(crate) fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut compensation = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

/// Fixed-point Q64.64 representation of an `f64`, used to accumulate
/// log-weight terms.
///
/// Integer addition is exact and associative, so a sum of terms is identical
/// no matter how the terms are grouped — which makes scores add exactly when
/// a count vector is split into disjoint parts, something floating-point
/// accumulation cannot promise. The encoding splits `w` into its nearest
/// integer plus a remainder in `[-0.5, 0.5]`; both halves convert exactly
/// (the remainder times 2^64 is a power-of-two scaling), so the only
/// quantization is the final `round`, bounded by 2^-65 per term.
#[inline]
pub(crate) fn to_fixed(w: f64) -> i128 {
    const TWO_POW64: f64 = 18_446_744_073_709_551_616.0; // 2^64
    debug_assert!(w.is_finite());
    let int_part = w.round();
    let frac_part = w - int_part;
    ((int_part as i128) << 64) + (frac_part * TWO_POW64).round() as i128
}

/// Inverse of [`to_fixed`] up to the final rounding into `f64`.
#[inline]
pub(crate) fn from_fixed(s: i128) -> f64 {
    const TWO_NEG64: f64 = 1.0 / 18_446_744_073_709_551_616.0;
    (s as f64) * TWO_NEG64
}
