//! Spin-unpolarized LDA: Slater exchange plus Perdew-Zunger (1981)
//! correlation. Energies are per electron; potentials are `d(rho eps)/d rho`.

use std::f64::consts::PI;

const GAMMA: f64 = -0.1423;
const BETA1: f64 = 1.0529;
const BETA2: f64 = 0.3334;
const A: f64 = 0.0311;
const B: f64 = -0.048;
const C: f64 = 0.0020;
const D: f64 = -0.0116;

/// Wigner-Seitz radius `(3 / (4 pi rho))^{1/3}`.
pub fn wigner_seitz_radius(rho: f64) -> f64 {
    (3.0 / (4.0 * PI * rho)).cbrt()
}

pub fn exchange_energy_density(rho: f64) -> f64 {
    -0.75 * (3.0 / PI).cbrt() * rho.cbrt()
}

pub fn exchange_potential(rho: f64) -> f64 {
    -(3.0 / PI).cbrt() * rho.cbrt()
}

/// Correlation energy per electron as a function of `r_s`.
pub fn correlation_energy(rs: f64) -> f64 {
    if rs >= 1.0 {
        let s = rs.sqrt();
        GAMMA / (1.0 + BETA1 * s + BETA2 * rs)
    } else {
        let l = rs.ln();
        A * l + B + C * rs * l + D * rs
    }
}

/// Correlation potential as a function of `r_s`.
pub fn correlation_potential(rs: f64) -> f64 {
    if rs >= 1.0 {
        let s = rs.sqrt();
        let den = 1.0 + BETA1 * s + BETA2 * rs;
        GAMMA * (1.0 + 7.0 / 6.0 * BETA1 * s + 4.0 / 3.0 * BETA2 * rs) / (den * den)
    } else {
        let l = rs.ln();
        A * l + (B - A / 3.0) + 2.0 / 3.0 * C * rs * l + (2.0 * D - C) / 3.0 * rs
    }
}

/// `(eps_xc, v_xc)` at density `rho`; non-positive densities give zeros.
pub fn lda(rho: f64) -> (f64, f64) {
    if rho <= 0.0 {
        return (0.0, 0.0);
    }
    let rs = wigner_seitz_radius(rho);
    (
        exchange_energy_density(rho) + correlation_energy(rs),
        exchange_potential(rho) + correlation_potential(rs),
    )
}
