//! Wrap-free complex output head.

use num_complex::Complex64 as C64;

/// Constant added to every raw network triple before decoding. A zero
/// network then decodes to `1 + 0j` with the angle away from the atan2
/// singularity, so training starts from unit-gain, zero-phase components.
pub const HEAD_OFFSET: [f64; 3] = [0.0, 0.0, 1.0];

/// `exp(g1) · exp(-j·atan2(g2, g3))`. `atan2(0, 0)` is taken as 0.
pub fn head_decode(g: [f64; 3]) -> C64 {
    C64::from_polar(g[0].exp(), -head_angle(g[1], g[2]))
}

pub fn head_angle(g2: f64, g3: f64) -> f64 {
    g2.atan2(g3)
}

/// Partial derivatives of `atan2(g2, g3)` with respect to `(g2, g3)`; zero at
/// the origin.
pub fn head_angle_grad(g2: f64, g3: f64) -> (f64, f64) {
    let r2 = g2 * g2 + g3 * g3;
    if r2 == 0.0 {
        (0.0, 0.0)
    } else {
        (g3 / r2, -g2 / r2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decode_examples() {
        assert!((head_decode([0.0, 0.0, 1.0]) - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((head_decode([2f64.ln(), 0.0, 1.0]) - C64::new(2.0, 0.0)).norm() < 1e-15);
        assert!((head_decode([0.0, 1.0, 0.0]) - C64::new(0.0, -1.0)).norm() < 1e-15);
        assert_eq!(head_decode([0.0, 0.0, 0.0]), C64::new(1.0, 0.0));
    }

    proptest! {
        #[test]
        fn positive_scaling_invariance(g1 in -5.0..5.0f64, g2 in -3.0..3.0f64, g3 in -3.0..3.0f64, s in 1e-3..1e3f64) {
            prop_assume!(g2.abs() + g3.abs() > 1e-6);
            let a = head_decode([g1, g2, g3]);
            let b = head_decode([g1, s * g2, s * g3]);
            prop_assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0));
        }

        #[test]
        fn magnitude_positive(g1 in -20.0..20.0f64, g2 in -3.0..3.0f64, g3 in -3.0..3.0f64) {
            prop_assert!(head_decode([g1, g2, g3]).norm() > 0.0);
        }
    }
}
