//! Scalar math routed through `libm` so every target computes the same bits.

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[inline]
pub fn pow(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn atan2(y: f64, x: f64) -> f64 {
    libm::atan2(y, x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// Two-sided standard normal tail probability P(|Z| > k).
pub fn normal_two_sided_tail(k: f64) -> f64 {
    libm::erfc(k / core::f64::consts::SQRT_2)
}

/// Euclidean norm of a vector.
pub fn norm2(v: &[f64]) -> f64 {
    let mut s = 0.0;
    for &x in v {
        s += x * x;
    }
    sqrt(s)
}

/// Exponential integral E1(x) = ∫_x^∞ e^(-u)/u du for x > 0.
///
/// Series below 1, continued fraction (modified Lentz) above.
pub fn exp_integral_e1(x: f64) -> f64 {
    assert!(x > 0.0, "E1 requires x > 0");
    if x <= 1.0 {
        // E1(x) = -gamma - ln x + sum_{k>=1} (-1)^{k+1} x^k / (k * k!)
        let mut sum = 0.0;
        let mut p = 1.0; // x^k / k!
        let mut sign = 1.0;
        for k in 1..=60 {
            p *= x / k as f64;
            let term = p / k as f64;
            sum += sign * term;
            sign = -sign;
            if term < 1e-18 {
                break;
            }
        }
        -EULER_GAMMA - ln(x) + sum
    } else {
        // E1(x) = e^{-x} / (x + 1 - 1/(x + 3 - 4/(x + 5 - 9/...)))
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=200u32 {
            let a = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let del = c * d;
            h *= del;
            if abs(del - 1.0) < 1e-16 {
                break;
            }
        }
        h * exp(-x)
    }
}

/// Neumaier compensated sum; deterministic left-to-right order.
pub fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if abs(sum) >= abs(v) {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Ordinary least squares of y on x. Returns (slope, intercept, r_squared).
///
/// R² is defined as 1 when the responses are constant (zero total variance).
pub fn ols_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    assert!(xs.len() >= 2, "OLS needs at least two points");
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
        syy += (y - mean_y) * (y - mean_y);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    let r2 = if syy > 1e-30 { 1.0 - ss_res / syy } else { 1.0 };
    (slope, intercept, r2)
}
