//! Power sums, the Riemann zeta function on `s > 1`, and the Beta-function
//! closed form used as an independent check on quadrature.

use statrs::function::gamma::ln_gamma;

/// Bernoulli numbers B2, B4, B6, B8, B10 divided by the matching factorial.
const BERNOULLI_OVER_FACT: [f64; 5] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1_209_600.0,
    1.0 / 47_900_160.0,
];

/// Below this starting point a power sum is accumulated term by term before
/// the Euler–Maclaurin expansion takes over.
fn direct_threshold(d: f64) -> f64 {
    32.0 + 4.0 * d.abs()
}

/// `∫_a^b y^{-d} dy`, stable when `b` is close to `a`.
pub fn power_integral(d: f64, a: f64, b: f64) -> f64 {
    power_integral_len(d, a, b - a)
}

/// `∫_a^{a+len} y^{-d} dy`; exact in `len` even when `a + len` rounds to `a`.
pub fn power_integral_len(d: f64, a: f64, len: f64) -> f64 {
    let r = len / a;
    if (d - 1.0).abs() < 1e-15 {
        r.ln_1p()
    } else {
        let e = 1.0 - d;
        a.powf(e) * (e * r.ln_1p()).exp_m1() / e
    }
}

/// Euler–Maclaurin correction terms `Σ_k B_{2k}/(2k)! (f^{(2k-1)}(b) - f^{(2k-1)}(a))`
/// for `f(y) = y^{-d}`.
fn em_corrections(d: f64, a: f64, b: f64) -> f64 {
    let mut total = 0.0;
    // rising factorial d (d+1) ... (d+2k-2)
    let mut rising = d;
    for (k, c) in BERNOULLI_OVER_FACT.iter().enumerate() {
        let p = d + (2 * k + 1) as f64;
        // f^{(2k-1)}(y) = -rising * y^{-p}
        total += c * rising * (a.powf(-p) - b.powf(-p));
        rising *= (d + (2 * k + 1) as f64) * (d + (2 * k + 2) as f64);
    }
    total
}

/// `Σ_{i=0}^{count-1} (a + i)^{-d}` for real `a > 0`.
pub fn power_sum_from(d: f64, a: f64, count: u64) -> f64 {
    if count == 0 {
        return 0.0;
    }
    let threshold = direct_threshold(d);
    let mut direct = 0.0;
    let mut start = a;
    let mut left = count;
    while start < threshold && left > 0 {
        direct += start.powf(-d);
        start += 1.0;
        left -= 1;
    }
    if left == 0 {
        return direct;
    }
    if left <= 8 {
        let mut s = 0.0;
        for i in (0..left).rev() {
            s += (start + i as f64).powf(-d);
        }
        return direct + s;
    }
    let end = start + (left - 1) as f64;
    let em = power_integral_len(d, start, (left - 1) as f64)
        + 0.5 * (start.powf(-d) + end.powf(-d))
        + em_corrections(d, start, end);
    direct + em
}

/// `Σ_{k=1}^{n} (k + x)^{-d}` for real `x ≥ 0`.
pub fn shifted_power_sum(d: f64, x: f64, n: u64) -> f64 {
    power_sum_from(d, x + 1.0, n)
}

/// `Σ_{i≥a} i^{-s}` over `a, a+1, …` for `s > 1`, `a > 0`.
pub fn power_tail(s: f64, a: f64) -> f64 {
    debug_assert!(s > 1.0);
    let threshold = direct_threshold(s);
    let mut direct = 0.0;
    let mut start = a;
    while start < threshold {
        direct += start.powf(-s);
        start += 1.0;
    }
    // Σ_{i≥N} f(i) = ∫_N^∞ f + f(N)/2 - Σ B_{2k}/(2k)! f^{(2k-1)}(N)
    let mut tail = start.powf(1.0 - s) / (s - 1.0) + 0.5 * start.powf(-s);
    let mut rising = s;
    for (k, c) in BERNOULLI_OVER_FACT.iter().enumerate() {
        let p = s + (2 * k + 1) as f64;
        tail += c * rising * start.powf(-p);
        rising *= (s + (2 * k + 1) as f64) * (s + (2 * k + 2) as f64);
    }
    direct + tail
}

/// Riemann zeta on `s > 1`.
pub fn zeta(s: f64) -> f64 {
    power_tail(s, 1.0)
}

/// `B(a, b) = Γ(a)Γ(b)/Γ(a+b)` via log-gamma.
pub fn beta_fn(a: f64, b: f64) -> f64 {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

/// Closed form of `∫_0^∞ x^{-d_s}(x+1)^{-d_t} dx = B(1-d_s, d_s+d_t-1)`.
pub fn c_closed_form(d_s: f64, d_t: f64) -> f64 {
    beta_fn(1.0 - d_s, d_s + d_t - 1.0)
}
