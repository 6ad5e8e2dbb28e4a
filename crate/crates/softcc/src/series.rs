//! Scalar kernels of the constant-curvature geometry with series branches
//! near the straight configuration.
//!
//! Every kernel is analytic on the whole real line but its closed form
//! contains a removable 0/0 at `q = 0`. Below a switch threshold a Taylor
//! expansion is used. The kinematic kernels switch at 1e-4; the chord-length
//! derivative kernels cancel cubically in their numerators and switch at
//! 2e-2, where the closed form still carries ~1e-13 absolute error. The
//! expansions carry enough terms that the two branches agree to better than
//! 1e-12 at each switch point.

/// Switch threshold for [`sinc`], [`cosc`], and [`half_chord`].
pub const SERIES_THRESHOLD: f64 = 1e-4;

/// Switch threshold for [`half_chord_deriv`] and [`half_chord_deriv2`].
pub const DERIV_SERIES_THRESHOLD: f64 = 2e-2;

/// sin(x)/x.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < SERIES_THRESHOLD {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// (1 - cos(x))/x, evaluated as 2 sin²(x/2)/x to avoid cancellation.
#[inline]
pub fn cosc(x: f64) -> f64 {
    if x.abs() < SERIES_THRESHOLD {
        let x2 = x * x;
        x / 2.0 - x * x2 / 24.0
    } else {
        let s = (0.5 * x).sin();
        2.0 * s * s / x
    }
}

/// sin(q/2)/q, the prismatic extension of the equivalent rigid chain per
/// unit segment length (half the chord subtended by a unit arc).
#[inline]
pub fn half_chord(q: f64) -> f64 {
    if q.abs() < SERIES_THRESHOLD {
        let q2 = q * q;
        0.5 - q2 / 48.0 + q2 * q2 / 3840.0
    } else {
        (0.5 * q).sin() / q
    }
}

/// d/dq of [`half_chord`]: (q cos(q/2) - 2 sin(q/2)) / (2 q²).
#[inline]
pub fn half_chord_deriv(q: f64) -> f64 {
    if q.abs() < DERIV_SERIES_THRESHOLD {
        let q2 = q * q;
        q * (-1.0 / 24.0 + q2 / 960.0 - q2 * q2 / 107_520.0)
    } else {
        let h = 0.5 * q;
        (q * h.cos() - 2.0 * h.sin()) / (2.0 * q * q)
    }
}

/// d²/dq² of [`half_chord`]: (-q² sin(q/2) - 4q cos(q/2) + 8 sin(q/2)) / (4 q³).
#[inline]
pub fn half_chord_deriv2(q: f64) -> f64 {
    if q.abs() < DERIV_SERIES_THRESHOLD {
        let q2 = q * q;
        -1.0 / 24.0 + q2 / 320.0 - q2 * q2 / 21_504.0 + q2 * q2 * q2 / 3_317_760.0
    } else {
        let h = 0.5 * q;
        (-q * q * h.sin() - 4.0 * q * h.cos() + 8.0 * h.sin()) / (4.0 * q * q * q)
    }
}
