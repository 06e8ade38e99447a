//! Smooth partition of unity used by the Feshbach maps: chi_1^2 + chibar_1^2 = 1,
//! chi_1 = 1 on [0, 3/4], chi_1 = 0 on [1, inf).

use std::f64::consts::FRAC_PI_2;

fn bump(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

fn bump_deriv(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        bump(t) / (t * t)
    }
}

/// C-infinity step: 0 for t <= 0, 1 for t >= 1.
pub fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = bump(t);
        a / (a + bump(1.0 - t))
    }
}

pub fn smoothstep_deriv(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let a = bump(t);
    let b = bump(1.0 - t);
    (bump_deriv(t) * b + a * bump_deriv(1.0 - t)) / ((a + b) * (a + b))
}

fn phase(x: f64) -> f64 {
    FRAC_PI_2 * smoothstep(4.0 * (x - 0.75))
}

pub fn chi1(x: f64) -> f64 {
    phase(x).cos()
}

pub fn chibar1(x: f64) -> f64 {
    phase(x).sin()
}

pub fn chi1_deriv(x: f64) -> f64 {
    -phase(x).sin() * FRAC_PI_2 * 4.0 * smoothstep_deriv(4.0 * (x - 0.75))
}

pub fn chibar1_deriv(x: f64) -> f64 {
    phase(x).cos() * FRAC_PI_2 * 4.0 * smoothstep_deriv(4.0 * (x - 0.75))
}

/// chi_rho(x) = chi_1(x / rho).
pub fn chi_rho(rho: f64, x: f64) -> f64 {
    chi1(x / rho)
}

pub fn chibar_rho(rho: f64, x: f64) -> f64 {
    chibar1(x / rho)
}
