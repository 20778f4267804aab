//! Coordinate-wise, radial, and operator-valued regular variation.
//!
//! A coordinate-wise regularly varying function factors as
//! `f(t) = prod_i t_i^{H_i} * L(t)` with `L` coordinate-wise slowly varying;
//! a radially regularly varying function factors as `f(x) = r^rho * L(x)`
//! with `L` radially slowly varying against the reference direction
//! `e = (d^{-1/2}, ..., d^{-1/2})`. Slowly varying parts are restricted to a
//! closed tagged family (constants, logs, iterated logs, sphere power laws,
//! exponential-integral kernels) so every construction has an analytic limit
//! to test against.
//!
//! Scope notes: the radial calculus fixes the homogeneity index across
//! directions (direction-dependent exponents rho(a_x) have no known
//! application and are not implemented), and only the positive-orthant
//! specialization of the group-indexed limit is supported.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::math;

/// Per-coordinate exponents `H_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentVector(Vec<f64>);

impl ExponentVector {
    pub fn new(h: Vec<f64>) -> Result<Self> {
        if h.is_empty() {
            return Err(Error::Parameter("exponent vector must be non-empty".into()));
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("exponent entries must be finite".into()));
        }
        Ok(ExponentVector(h))
    }

    /// Variant for coordinate-wise regular variation, where exponents are
    /// non-negative.
    pub fn new_nonnegative(h: Vec<f64>) -> Result<Self> {
        if h.iter().any(|v| *v < 0.0) {
            return Err(Error::Parameter(
                "c.r.v.f. exponents must be non-negative".into(),
            ));
        }
        ExponentVector::new(h)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[f64] {
        &self.0
    }

    /// `prod_i t_i^{H_i}`, evaluated in the log domain.
    pub fn power_product(&self, t: &[f64]) -> f64 {
        let mut s = 0.0;
        for (&h, &ti) in self.0.iter().zip(t) {
            if h != 0.0 {
                s += h * math::ln(ti);
            }
        }
        math::exp(s)
    }
}

/// Univariate slowly varying factors, closed under the checks we run.
#[derive(Debug, Clone, PartialEq)]
pub enum UnivariateSvf {
    Constant(f64),
    /// ln(e + x)
    Log,
    /// ln(e + ln(e + x))
    IterLog,
}

impl UnivariateSvf {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            UnivariateSvf::Constant(c) => *c,
            UnivariateSvf::Log => math::ln(core::f64::consts::E + x),
            UnivariateSvf::IterLog => {
                math::ln(core::f64::consts::E + math::ln(core::f64::consts::E + x))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let UnivariateSvf::Constant(c) = self {
            if !(*c > 0.0 && c.is_finite()) {
                return Err(Error::Parameter("constant factor must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Bounded function with a finite limit, `eta(r) = limit + coeff * e^{-r}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaFn {
    pub limit: f64,
    pub coeff: f64,
}

impl EtaFn {
    pub fn constant(c: f64) -> Self {
        EtaFn { limit: c, coeff: 0.0 }
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.limit + self.coeff * math::exp(-r)
    }
}

/// Rapidly decaying function, `eps(u) = coeff * e^{-u}` (or zero), which is
/// o(u^-k) for every k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsFn {
    Zero,
    Exp { coeff: f64 },
}

/// The Karamata-form kernel `K(x) = exp(eta(r_x) + int_a^{r_x} eps(u)/u du)`,
/// with the integral in closed form through the exponential integral.
#[derive(Debug, Clone, PartialEq)]
pub struct KaramataSvf {
    eta: EtaFn,
    eps: EpsFn,
    lower: f64,
}

/// Builds the Karamata kernel; the tags guarantee the defining limits hold.
pub fn build_karamata_svf(eta: EtaFn, eps: EpsFn, lower: f64) -> Result<KaramataSvf> {
    if !(lower > 0.0 && lower.is_finite()) {
        return Err(Error::Parameter("lower limit a must be positive".into()));
    }
    Ok(KaramataSvf { eta, eps, lower })
}

impl KaramataSvf {
    pub fn eval_radius(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Domain("K is defined for positive radius".into()));
        }
        let integral = match self.eps {
            EpsFn::Zero => 0.0,
            EpsFn::Exp { coeff } => {
                coeff * (math::exp_integral_e1(self.lower) - math::exp_integral_e1(r))
            }
        };
        Ok(math::exp(self.eta.eval(r) + integral))
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.eval_radius(math::norm2(x))
    }

    /// The limit of K at infinity, `exp(eta_limit + int_a^inf eps/u)`.
    pub fn limit_at_infinity(&self) -> f64 {
        let integral = match self.eps {
            EpsFn::Zero => 0.0,
            EpsFn::Exp { coeff } => coeff * math::exp_integral_e1(self.lower),
        };
        math::exp(self.eta.limit + integral)
    }
}

/// Functions on the positive part of the unit sphere, normalized so the
/// reference direction maps to 1.
#[derive(Debug, Clone, PartialEq)]
pub enum SphereFn {
    One,
    /// `lambda(a) = prod_i (a_i * sqrt(d))^{w_i}`; equals 1 at e.
    PowerLaw { weights: Vec<f64> },
}

impl SphereFn {
    pub fn eval(&self, direction: &[f64]) -> f64 {
        match self {
            SphereFn::One => 1.0,
            SphereFn::PowerLaw { weights } => {
                let sqrt_d = math::sqrt(direction.len() as f64);
                let mut s = 0.0;
                for (&w, &a) in weights.iter().zip(direction) {
                    if w != 0.0 {
                        s += w * math::ln(a * sqrt_d);
                    }
                }
                math::exp(s)
            }
        }
    }
}

/// Tagged slowly varying functions of several variables.
#[derive(Debug, Clone, PartialEq)]
pub enum SlowVaryingSpec {
    Constant(f64),
    /// `L1(x) = prod_i l_i(x_i)` — coordinate-wise slowly varying.
    Product(Vec<UnivariateSvf>),
    /// `L2(x) = sum_i l_i(x_i)` — coordinate-wise slowly varying.
    Sum(Vec<UnivariateSvf>),
    /// `L3(x) = l(r_x) * lambda(a_x)` — radially slowly varying.
    Radial {
        radial: UnivariateSvf,
        sphere: SphereFn,
    },
    /// Karamata integral-representation kernel.
    Karamata(KaramataSvf),
    /// Pointwise product; keeps the class closed under products.
    Composite(Vec<SlowVaryingSpec>),
}

impl SlowVaryingSpec {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            SlowVaryingSpec::Constant(c) => {
                if !(*c > 0.0 && c.is_finite()) {
                    return Err(Error::Parameter("constant L must be positive".into()));
                }
            }
            SlowVaryingSpec::Product(fs) | SlowVaryingSpec::Sum(fs) => {
                if fs.len() != dim {
                    return Err(Error::Mismatch(format!(
                        "slow part has {} factors for dimension {}",
                        fs.len(),
                        dim
                    )));
                }
                for f in fs {
                    f.validate()?;
                }
            }
            SlowVaryingSpec::Radial { radial, .. } => radial.validate()?,
            SlowVaryingSpec::Karamata(_) => {}
            SlowVaryingSpec::Composite(parts) => {
                for p in parts {
                    p.validate(dim)?;
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: &[f64]) -> Result<f64> {
        Ok(match self {
            SlowVaryingSpec::Constant(c) => *c,
            SlowVaryingSpec::Product(fs) => {
                let mut p = 1.0;
                for (f, &x) in fs.iter().zip(t) {
                    p *= f.eval(x);
                }
                p
            }
            SlowVaryingSpec::Sum(fs) => {
                let mut s = 0.0;
                for (f, &x) in fs.iter().zip(t) {
                    s += f.eval(x);
                }
                s
            }
            SlowVaryingSpec::Radial { radial, sphere } => {
                let r = math::norm2(t);
                if r == 0.0 {
                    return Err(Error::Domain("radial L undefined at the origin".into()));
                }
                let dir: Vec<f64> = t.iter().map(|v| v / r).collect();
                radial.eval(r) * sphere.eval(&dir)
            }
            SlowVaryingSpec::Karamata(k) => k.eval(t)?,
            SlowVaryingSpec::Composite(parts) => {
                let mut p = 1.0;
                for part in parts {
                    p *= part.eval(t)?;
                }
                p
            }
        })
    }
}

/// Coordinate-wise regularly varying function `prod t_i^{H_i} * L(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrvfSpec {
    pub exponents: ExponentVector,
    pub slow_part: SlowVaryingSpec,
}

impl CrvfSpec {
    pub fn new(exponents: ExponentVector, slow_part: SlowVaryingSpec) -> Result<Self> {
        slow_part.validate(exponents.dim())?;
        Ok(CrvfSpec {
            exponents,
            slow_part,
        })
    }

    pub fn dim(&self) -> usize {
        self.exponents.dim()
    }

    pub fn eval(&self, t: &[f64]) -> Result<f64> {
        eval_crvf(self, t)
    }

    /// Product of two c.r.v.f.'s: exponents add, slow parts multiply.
    pub fn product(&self, other: &CrvfSpec) -> Result<CrvfSpec> {
        if self.dim() != other.dim() {
            return Err(Error::Mismatch("dimension mismatch in product".into()));
        }
        let exponents = ExponentVector::new(
            self.exponents
                .entries()
                .iter()
                .zip(other.exponents.entries())
                .map(|(a, b)| a + b)
                .collect(),
        )?;
        let slow_part = SlowVaryingSpec::Composite(vec![
            self.slow_part.clone(),
            other.slow_part.clone(),
        ]);
        Ok(CrvfSpec {
            exponents,
            slow_part,
        })
    }
}

/// Evaluate a c.r.v.f. at a point of the open positive orthant.
pub fn eval_crvf(spec: &CrvfSpec, t: &[f64]) -> Result<f64> {
    if t.len() != spec.dim() {
        return Err(Error::Mismatch(format!(
            "point has dimension {}, spec has {}",
            t.len(),
            spec.dim()
        )));
    }
    if t.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Domain(
            "c.r.v.f. arguments must have strictly positive coordinates".into(),
        ));
    }
    Ok(spec.exponents.power_product(t) * spec.slow_part.eval(t)?)
}

/// Radially regularly varying function `r^rho * L(x)` with a radial slow part.
#[derive(Debug, Clone, PartialEq)]
pub struct RrvfSpec {
    pub rho: f64,
    pub slow_part: SlowVaryingSpec,
}

impl RrvfSpec {
    pub fn new(rho: f64, slow_part: SlowVaryingSpec) -> Result<Self> {
        if !rho.is_finite() {
            return Err(Error::Parameter("rho must be finite".into()));
        }
        match slow_part {
            SlowVaryingSpec::Constant(_)
            | SlowVaryingSpec::Radial { .. }
            | SlowVaryingSpec::Karamata(_) => {}
            _ => {
                return Err(Error::Parameter(
                    "r.r.v.f. slow part must be of radial kind".into(),
                ))
            }
        }
        Ok(RrvfSpec { rho, slow_part })
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Domain(
                "r.r.v.f. arguments lie in the punctured positive orthant".into(),
            ));
        }
        let r = math::norm2(x);
        Ok(math::pow(r, self.rho) * self.slow_part.eval(x)?)
    }

    /// Reference direction e = (d^{-1/2}, ..., d^{-1/2}).
    pub fn reference_direction(dim: usize) -> Vec<f64> {
        let v = 1.0 / math::sqrt(dim as f64);
        vec![v; dim]
    }
}

/// Operator-valued regularly varying function `F(r) = r^D * diag(l_i(r))`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorRvfSpec {
    pub index_matrix: Mat,
    pub slow_diag: Vec<UnivariateSvf>,
}

impl OperatorRvfSpec {
    pub fn new(index_matrix: Mat, slow_diag: Vec<UnivariateSvf>) -> Result<Self> {
        if !index_matrix.is_square() {
            return Err(Error::Parameter("index matrix must be square".into()));
        }
        if slow_diag.len() != index_matrix.rows() {
            return Err(Error::Mismatch(
                "slow diagonal length must match the matrix dimension".into(),
            ));
        }
        for f in &slow_diag {
            f.validate()?;
        }
        Ok(OperatorRvfSpec {
            index_matrix,
            slow_diag,
        })
    }

    pub fn eval(&self, r: f64) -> Result<Mat> {
        let power = matrix_power(&self.index_matrix, r)?;
        let slow: Vec<f64> = self.slow_diag.iter().map(|f| f.eval(r)).collect();
        Ok(power.matmul(&Mat::diag(&slow)))
    }
}

/// `r^D = exp(ln r * D)` for r > 0.
pub fn matrix_power(d: &Mat, r: f64) -> Result<Mat> {
    if !(r > 0.0) {
        return Err(Error::Domain("matrix power needs r > 0".into()));
    }
    if !d.is_square() {
        return Err(Error::Parameter("matrix power needs a square matrix".into()));
    }
    Ok(d.scale(math::ln(r)).expm())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplicativityReport {
    pub max_residual: f64,
    pub pass: bool,
}

/// Checks the limit functional equation `l(a*b) = l(a) l(b)` on given pairs;
/// the residual is relative to `l(a*b)`.
pub fn check_multiplicativity(
    limit_fn: impl Fn(&[f64]) -> f64,
    pairs: &[(Vec<f64>, Vec<f64>)],
    tol: f64,
) -> MultiplicativityReport {
    let mut max_residual = 0.0f64;
    for (a, b) in pairs {
        let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
        let lhs = limit_fn(&ab);
        let rhs = limit_fn(a) * limit_fn(b);
        let res = math::abs(lhs - rhs) / math::abs(lhs).max(1e-300);
        max_residual = max_residual.max(res);
    }
    MultiplicativityReport {
        max_residual,
        pass: max_residual <= tol,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentEstimate {
    pub exponents: Vec<f64>,
    /// Per-axis R² of the slope-sequence fit; 1 means the slopes already
    /// stabilized exactly.
    pub residual_diag: Vec<f64>,
}

/// Limit slope of `ln f` against `ln t`, from a sequence of samples on a
/// geometric grid. Successive slopes are extrapolated in u = 1/ln t
/// (quadratic model), which removes the O(1/ln t) drift that logarithmic
/// slowly varying factors contribute. Returns (slope, fit R²).
fn extrapolated_log_slope(log_ts: &[f64], log_fs: &[f64]) -> Result<(f64, f64)> {
    let n = log_ts.len();
    if n < 3 {
        return Err(Error::Parameter("need at least 3 grid levels".into()));
    }
    let mut slopes = Vec::with_capacity(n - 1);
    let mut us = Vec::with_capacity(n - 1);
    for j in 0..n - 1 {
        let dt = log_ts[j + 1] - log_ts[j];
        slopes.push((log_fs[j + 1] - log_fs[j]) / dt);
        let mid = 0.5 * (log_ts[j] + log_ts[j + 1]);
        us.push(1.0 / mid.max(0.25));
    }
    // Keep the tail of the sequence, where the expansion in u is accurate.
    let start = if slopes.len() >= 8 { slopes.len() / 2 } else { 0 };
    let s = &slopes[start..];
    let u = &us[start..];
    if s.len() < 3 {
        // Too short to fit the drift model; report the last slope.
        return Ok((*slopes.last().unwrap(), 1.0));
    }
    // Least squares for slope ~ h + c1*u + c2*u^2 via normal equations.
    let k = s.len() as f64;
    let (mut su, mut su2, mut su3, mut su4) = (0.0, 0.0, 0.0, 0.0);
    let (mut sy, mut syu, mut syu2) = (0.0, 0.0, 0.0);
    for (&ui, &yi) in u.iter().zip(s) {
        su += ui;
        su2 += ui * ui;
        su3 += ui * ui * ui;
        su4 += ui * ui * ui * ui;
        sy += yi;
        syu += yi * ui;
        syu2 += yi * ui * ui;
    }
    let a = Mat::from_rows(&[&[k, su, su2], &[su, su2, su3], &[su2, su3, su4]]);
    let coeffs = match a.inverse() {
        Ok(inv) => inv.matvec(&[sy, syu, syu2]),
        // Degenerate design (e.g. repeated u); fall back to the mean slope.
        Err(_) => vec![sy / k, 0.0, 0.0],
    };
    let h = coeffs[0];
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    let mean = sy / k;
    for (&ui, &yi) in u.iter().zip(s) {
        let fit = coeffs[0] + coeffs[1] * ui + coeffs[2] * ui * ui;
        ss_res += (yi - fit) * (yi - fit);
        ss_tot += (yi - mean) * (yi - mean);
    }
    let r2 = if ss_tot > 1e-28 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok((h, r2))
}

/// Recovers the exponent vector of a c.r.v.f. from samples along coordinate
/// rays `t_i = anchor_i * base^k`, the other coordinates held at the far
/// corner `anchor * base^levels`.
pub fn estimate_crv_exponents(
    f: impl Fn(&[f64]) -> Result<f64>,
    grid_base: f64,
    levels: usize,
    anchor: &[f64],
) -> Result<ExponentEstimate> {
    if !(grid_base > 1.0) {
        return Err(Error::Parameter("grid base must exceed 1".into()));
    }
    if levels < 3 {
        return Err(Error::Parameter("need at least 3 levels".into()));
    }
    if anchor.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::Domain("anchor must be strictly positive".into()));
    }
    let d = anchor.len();
    let far: Vec<f64> = anchor
        .iter()
        .map(|&a| a * math::pow(grid_base, levels as f64))
        .collect();
    let mut exponents = Vec::with_capacity(d);
    let mut residual_diag = Vec::with_capacity(d);
    for axis in 0..d {
        let mut log_ts = Vec::with_capacity(levels + 1);
        let mut log_fs = Vec::with_capacity(levels + 1);
        for k in 0..=levels {
            let mut point = far.clone();
            point[axis] = anchor[axis] * math::pow(grid_base, k as f64);
            let value = f(&point)?;
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::Numeric(format!(
                    "f must be positive and finite on the grid, got {value}"
                )));
            }
            log_ts.push(math::ln(point[axis]));
            log_fs.push(math::ln(value));
        }
        let (h, r2) = extrapolated_log_slope(&log_ts, &log_fs)?;
        exponents.push(h);
        residual_diag.push(r2);
    }
    Ok(ExponentEstimate {
        exponents,
        residual_diag,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialVariationEstimate {
    /// Ratio f(t x)/f(t e) at the largest grid level: the limit phi(x).
    pub phi: f64,
    /// Homogeneity index recovered from phi(s x) = s^rho phi(x).
    pub rho: f64,
}

/// Estimates the radial limit `phi(x) = lim f(t x)/f(t e)` and the
/// homogeneity index of phi along the ray through x.
pub fn check_radial_variation(
    f: impl Fn(&[f64]) -> Result<f64>,
    x: &[f64],
    t_grid: &[f64],
) -> Result<RadialVariationEstimate> {
    if x.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Domain("x must lie in the open positive orthant".into()));
    }
    if t_grid.len() < 4 || t_grid.windows(2).any(|w| !(w[1] > w[0]) || !(w[0] > 0.0)) {
        return Err(Error::Parameter(
            "t_grid must be at least 4 increasing positive levels".into(),
        ));
    }
    let d = x.len();
    let e = RrvfSpec::reference_direction(d);
    let t_max = *t_grid.last().unwrap();
    let at = |scale: f64, dir: &[f64]| -> Result<f64> {
        let p: Vec<f64> = dir.iter().map(|&v| v * scale).collect();
        let value = f(&p)?;
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::Numeric("f must stay positive on the rays".into()));
        }
        Ok(value)
    };
    let phi = at(t_max, x)? / at(t_max, &e)?;
    // Homogeneity: slope of ln f(t_max * s * x) in ln s; the common factor
    // f(t_max e) cancels from the differences.
    let r_x = math::norm2(x);
    let mut log_ts = Vec::with_capacity(t_grid.len());
    let mut log_fs = Vec::with_capacity(t_grid.len());
    for &s in t_grid {
        log_ts.push(math::ln(t_max * s * r_x));
        log_fs.push(math::ln(at(t_max * s, x)?));
    }
    let (rho, _r2) = extrapolated_log_slope(&log_ts, &log_fs)?;
    Ok(RadialVariationEstimate { phi, rho })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorRegvarReport {
    pub deviation: f64,
    pub pass: bool,
}

/// Checks `F(lambda r) F(r)^{-1} -> lambda^D` in Frobenius norm; the reported
/// deviation is taken at the largest grid level.
pub fn check_operator_regvar(
    spec: &OperatorRvfSpec,
    lambda: f64,
    r_grid: &[f64],
    tol: f64,
) -> Result<OperatorRegvarReport> {
    if !(lambda > 0.0) {
        return Err(Error::Parameter("lambda must be positive".into()));
    }
    if r_grid.is_empty() {
        return Err(Error::Parameter("r_grid must be non-empty".into()));
    }
    let r = *r_grid.last().unwrap();
    let f_r = spec.eval(r)?;
    let f_lr = spec.eval(lambda * r)?;
    let inv = f_r
        .inverse()
        .map_err(|_| Error::Numeric("F(r) is singular on the grid".into()))?;
    let target = matrix_power(&spec.index_matrix, lambda)?;
    let deviation = f_lr.matmul(&inv).sub(&target).frobenius_norm();
    Ok(OperatorRegvarReport {
        deviation,
        pass: deviation <= tol,
    })
}

/// Descriptor used in CLI metadata.
pub fn slow_part_descriptor(spec: &SlowVaryingSpec) -> String {
    match spec {
        SlowVaryingSpec::Constant(c) => format!("constant:{c}"),
        SlowVaryingSpec::Product(_) => "product".into(),
        SlowVaryingSpec::Sum(_) => "sum".into(),
        SlowVaryingSpec::Radial { .. } => "radial".into(),
        SlowVaryingSpec::Karamata(_) => "karamata".into(),
        SlowVaryingSpec::Composite(_) => "composite".into(),
    }
}
