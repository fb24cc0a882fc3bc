//! Gamma-function helpers and the volume of the Euclidean unit ball.

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln|Γ(x)|. Uses the reflection formula for x < 1/2; poles return +∞.
pub fn ln_gamma(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 && x == x.floor() {
        return f64::INFINITY;
    }
    if x < 0.5 {
        // Γ(x)Γ(1-x) = π / sin(πx)
        let s = (PI * x).sin().abs();
        return PI.ln() - s.ln() - ln_gamma(1.0 - x);
    }
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    let z = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

/// Sign of Γ(x) (0 at poles).
pub fn gamma_sign(x: f64) -> f64 {
    if x > 0.0 {
        return 1.0;
    }
    if x == x.floor() {
        return 0.0;
    }
    if (x.floor() as i64).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn gamma(x: f64) -> f64 {
    gamma_sign(x) * ln_gamma(x).exp()
}

/// ln B(a, b) for positive a, b.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// ln ω_N for real N ≥ 1, with ω_N = π^{N/2} / Γ(N/2 + 1) the volume of the unit ball.
pub fn ln_unit_ball_volume(n: f64) -> f64 {
    let h = n / 2.0;
    h * PI.ln() - ln_gamma(h + 1.0)
}

/// Surface measure of the unit sphere, N ω_N.
pub fn sphere_area(n: f64) -> f64 {
    n * ln_unit_ball_volume(n).exp()
}

/// ln(1 + e^y) without overflow.
pub fn softplus(y: f64) -> f64 {
    if y > 35.0 {
        y + (-y).exp()
    } else if y < -35.0 {
        y.exp()
    } else {
        y.exp().ln_1p()
    }
}

/// 1 / (1 + e^{-y}).
pub fn logistic(y: f64) -> f64 {
    if y >= 0.0 {
        1.0 / (1.0 + (-y).exp())
    } else {
        let e = y.exp();
        e / (1.0 + e)
    }
}
