//! Special functions backing the distribution module: log-gamma, the
//! regularized incomplete gamma functions, and the standard normal CDF.
//!
//! `ln_gamma` uses the Lanczos approximation (g = 7, 9 coefficients), accurate
//! to ~1e-15 relative error on the positive axis. The incomplete gamma pair is
//! evaluated by the classical series / continued-fraction split at x = a + 1
//! (Press et al., Numerical Recipes §6.2), iterated to `GAMMA_REL_TOL`.

/// Relative tolerance for the incomplete gamma series and continued fraction.
pub const GAMMA_REL_TOL: f64 = 1e-12;

const MAX_ITER: usize = 500;

const LANCZOS_G: f64 = 7.0;
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

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_741_8;

/// Natural log of the gamma function for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < 0.5 {
        // reflection: Γ(x)Γ(1−x) = π / sin(πx)
        let pi = core::f64::consts::PI;
        return libm::log(pi / libm::sin(pi * x)) - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (z + 0.5) * libm::log(t) - t + libm::log(acc)
}

/// Gamma function for x > 0.
pub fn gamma(x: f64) -> f64 {
    libm::exp(ln_gamma(x))
}

/// Regularized lower incomplete gamma P(a, x) = γ(a, x) / Γ(a), a > 0, x ≥ 0.
pub fn reg_lower_gamma(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        lower_series(a, x)
    } else {
        1.0 - upper_cf(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x) = Γ(a, x) / Γ(a) = 1 − P(a, x).
pub fn reg_upper_gamma(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - lower_series(a, x)
    } else {
        upper_cf(a, x)
    }
}

// P(a,x) by the power series γ(a,x) = e^{−x} x^a Σ_n Γ(a)/Γ(a+1+n) x^n.
fn lower_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if libm::fabs(term) < libm::fabs(sum) * GAMMA_REL_TOL {
            break;
        }
    }
    sum * libm::exp(-x + a * libm::log(x) - ln_gamma(a))
}

// Q(a,x) by the Lentz continued fraction.
fn upper_cf(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if libm::fabs(d) < TINY {
            d = TINY;
        }
        c = b + an / c;
        if libm::fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if libm::fabs(del - 1.0) < GAMMA_REL_TOL {
            break;
        }
    }
    h * libm::exp(-x + a * libm::log(x) - ln_gamma(a))
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / core::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        libm::fabs(a - b) <= rel * (1.0 + libm::fabs(b))
    }

    #[test]
    fn ln_gamma_reference_values() {
        // mpmath loggamma at 30 dps
        let cases = [
            (0.1, 2.2527126517342059599),
            (0.5, 0.57236494292470008707),
            (1.0, 0.0),
            (1.5, -0.12078223763524522235),
            (2.0, 0.0),
            (3.7, 1.4280723266653879219),
            (10.3, 13.482036786138356971),
            (24.0, 51.606675567764373570),
            (1e-3, 6.9071788853838536825),
        ];
        for (x, want) in cases {
            let got = ln_gamma(x);
            assert!(
                close(got, want, 1e-13),
                "ln_gamma({x}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn gamma_small_integers() {
        assert!(close(gamma(5.0), 24.0, 1e-13));
        assert!(close(gamma(0.5), libm::sqrt(core::f64::consts::PI), 1e-13));
    }

    #[test]
    fn incomplete_gamma_reference_values() {
        // mpmath gammainc (regularized) at 30 dps
        let cases = [
            (1.5, 0.5, 0.19874804309879919757),
            (2.0, 3.0, 0.80085172652854422808),
            (5.0, 4.5, 0.46789642362528452244),
            (3.0, 0.25, 0.0021614966897625125609),
            (0.7, 1.2, 0.81118509677239218868),
        ];
        for (a, x, p) in cases {
            assert!(
                close(reg_lower_gamma(a, x), p, 1e-12),
                "P({a},{x}) = {}, want {p}",
                reg_lower_gamma(a, x)
            );
            assert!(
                close(reg_upper_gamma(a, x), 1.0 - p, 1e-12),
                "Q({a},{x}) = {}, want {}",
                reg_upper_gamma(a, x),
                1.0 - p
            );
        }
    }

    #[test]
    fn incomplete_gamma_deep_tail() {
        // Tail values far below 1.0 keep relative accuracy.
        let q = reg_upper_gamma(1.5, 100.0);
        let want = 4.2185411071920423377e-43;
        assert!(libm::fabs(q / want - 1.0) < 1e-10, "Q(1.5,100) = {q}");
        let q = reg_upper_gamma(3.0, 58.905);
        let want = 4.6978667709909987375e-23;
        assert!(libm::fabs(q / want - 1.0) < 1e-10, "Q(3,58.905) = {q}");
    }

    #[test]
    fn incomplete_gamma_complementarity() {
        for a in [0.5, 1.0, 1.5, 2.0, 3.0, 5.0] {
            for x in [0.0, 0.1, 0.9, 1.0, 2.5, 7.0, 30.0] {
                let s = reg_lower_gamma(a, x) + reg_upper_gamma(a, x);
                assert!(libm::fabs(s - 1.0) < 1e-12, "P+Q at a={a}, x={x}: {s}");
            }
        }
    }

    #[test]
    fn normal_cdf_reference_values() {
        let cases = [
            (1.0, 0.84134474606854294859),
            (-2.5, 0.0062096653257761351670),
            (0.3, 0.61791142218895263731),
            (0.0, 0.5),
        ];
        for (z, want) in cases {
            assert!(close(normal_cdf(z), want, 1e-14), "Phi({z})");
        }
    }
}
