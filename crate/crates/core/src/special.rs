//! Log-gamma, digamma and trigamma on the positive reals.
//!
//! `ln Γ` uses the Lanczos approximation (g = 7, 9 terms) in log form below
//! `x = 10` and the Stirling series above; `ψ` and `ψ'` shift the argument up
//! with the recurrence and then apply their asymptotic expansions.

use std::f64::consts::PI;

use thiserror::Error;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("special function argument must be > 0, got {0}")]
pub struct DomainError(pub f64);

const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const ASYMPTOTIC_FROM: f64 = 10.0;

fn ln_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx)
        return (PI / (PI * x).sin()).ln() - ln_gamma_unchecked(1.0 - x);
    }
    if x >= ASYMPTOTIC_FROM {
        let r = 1.0 / x;
        let r2 = r * r;
        let series = r
            * (1.0 / 12.0
                - r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 * (1.0 / 1680.0 - r2 * (1.0 / 1188.0)))));
        return (x - 0.5) * x.ln() - x + LN_SQRT_2PI + series;
    }
    let z = x - 1.0;
    let mut t = LANCZOS[0];
    for (k, c) in LANCZOS.iter().enumerate().skip(1) {
        t += c / (z + k as f64);
    }
    let w = z + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (z + 0.5) * w.ln() - w + t.ln()
}

pub fn log_gamma(x: f64) -> Result<f64, DomainError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(DomainError(x));
    }
    Ok(ln_gamma_unchecked(x))
}

pub fn digamma(x: f64) -> Result<f64, DomainError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(DomainError(x));
    }
    let mut acc = 0.0;
    let mut z = x;
    while z < ASYMPTOTIC_FROM {
        acc -= 1.0 / z;
        z += 1.0;
    }
    let r = 1.0 / z;
    let r2 = r * r;
    // Bernoulli terms B_{2k} / (2k z^{2k}), k = 1..7
    let tail = r2
        * (1.0 / 12.0
            - r2 * (1.0 / 120.0
                - r2 * (1.0 / 252.0
                    - r2 * (1.0 / 240.0 - r2 * (1.0 / 132.0 - r2 * (691.0 / 32760.0 - r2 / 12.0))))));
    Ok(acc + z.ln() - 0.5 * r - tail)
}

pub fn trigamma(x: f64) -> Result<f64, DomainError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(DomainError(x));
    }
    let mut acc = 0.0;
    let mut z = x;
    while z < ASYMPTOTIC_FROM {
        acc += 1.0 / (z * z);
        z += 1.0;
    }
    let r = 1.0 / z;
    let r2 = r * r;
    let tail = r * r2
        * (1.0 / 6.0
            - r2 * (1.0 / 30.0
                - r2 * (1.0 / 42.0 - r2 * (1.0 / 30.0 - r2 * (5.0 / 66.0 - r2 * (691.0 / 2730.0 - r2 * 7.0 / 6.0))))));
    Ok(acc + r + 0.5 * r2 + tail)
}
