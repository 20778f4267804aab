//! Partial-sum processes of stationary lattice fields and their
//! normalizations.
//!
//! `S_[n.t]` sums the field over the integer box 1..[n_i t_i]; the box is
//! empty (sum 0) as soon as one floor hits zero. The scaling-transition sums
//! `Z_{n,gamma}` take the rectangle (n, floor(n^gamma)). Variances come from
//! the O(nm) weighted-lag identity, summed in a fixed order with compensation
//! so reruns are bit-identical. No centering anywhere: users needing it
//! pre-subtract the mean from their field.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fields::{CovarianceKernel, FieldSample, LatticeGrid, LatticeSampler};
use crate::lamperti::PathOnGrid;
use crate::linalg::Mat;
use crate::math;
use crate::regvar::{matrix_power, CrvfSpec};

/// Normalization rule f(n) for partial sums.
#[derive(Debug, Clone, PartialEq)]
pub enum Normalization {
    /// f(n) = 1.
    None,
    /// f(n) = sqrt(prod n_i), the i.i.d. rate.
    SqrtBoxProduct,
    /// f(n) given by a coordinate-wise regularly varying function.
    Crvf(CrvfSpec),
    /// An explicit per-run value.
    Fixed(f64),
}

impl Normalization {
    pub fn value(&self, n: &[u32]) -> Result<f64> {
        let v = match self {
            Normalization::None => 1.0,
            Normalization::SqrtBoxProduct => {
                math::sqrt(n.iter().map(|&x| x as f64).product())
            }
            Normalization::Crvf(spec) => {
                let t: Vec<f64> = n.iter().map(|&x| x as f64).collect();
                spec.eval(&t)?
            }
            Normalization::Fixed(v) => *v,
        };
        if !(v > 0.0) {
            return Err(Error::Parameter("normalization must be positive".into()));
        }
        Ok(v)
    }
}

/// Configuration of a partial-sum experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SumProcessConfig {
    pub n: Vec<u32>,
    pub t_grid: Vec<Vec<f64>>,
    /// Aspect exponent for the d = 2 scaling-transition mode.
    pub gamma: Option<f64>,
    pub normalization: Normalization,
}

impl SumProcessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n.is_empty() || self.n.contains(&0) {
            return Err(Error::Parameter("lattice sizes must be >= 1".into()));
        }
        for t in &self.t_grid {
            if t.len() != self.n.len() {
                return Err(Error::Mismatch("t-grid dimension mismatch".into()));
            }
            if t.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::Parameter("t-grid points must be positive".into()));
            }
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0) {
                return Err(Error::Parameter("gamma must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Ratio window 0 < c < C for the aspect-ratio condition that rules out a
/// scaling transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioWindow {
    lower: f64,
    upper: f64,
}

impl RatioWindow {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower > 0.0 && upper.is_finite() && lower < upper) {
            return Err(Error::Parameter("ratio window needs 0 < c < C < inf".into()));
        }
        Ok(RatioWindow { lower, upper })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }
}

/// True iff c <= m/n <= C for every pair — the finite-sample surrogate for
/// the liminf/limsup condition.
pub fn check_ratio_condition(pairs: &[(f64, f64)], window: &RatioWindow) -> bool {
    pairs.iter().all(|&(n, m)| {
        let ratio = m / n;
        ratio >= window.lower && ratio <= window.upper
    })
}

fn floored_box(n: &[u32], t: &[f64]) -> Vec<usize> {
    n.iter()
        .zip(t)
        .map(|(&ni, &ti)| math::floor(ni as f64 * ti) as usize)
        .collect()
}

/// In-place multidimensional prefix sums over a row-major array.
fn prefix_sums(data: &mut [f64], sizes: &[usize]) {
    let total: usize = sizes.iter().product();
    debug_assert_eq!(total, data.len());
    let mut stride = 1usize;
    for axis in (0..sizes.len()).rev() {
        let len = sizes[axis];
        let block = stride * len;
        let mut start = 0;
        while start < total {
            for outer in 0..stride {
                let base = start + outer;
                for i in 1..len {
                    data[base + i * stride] += data[base + (i - 1) * stride];
                }
            }
            start += block;
        }
        stride = block;
    }
}

fn prefix_lookup(prefix: &[f64], sizes: &[usize], bounds: &[usize]) -> f64 {
    if bounds.contains(&0) {
        return 0.0;
    }
    let mut idx = 0usize;
    let mut stride = 1usize;
    for axis in (0..sizes.len()).rev() {
        idx += (bounds[axis] - 1) * stride;
        stride *= sizes[axis];
    }
    prefix[idx]
}

/// Per-replicate values of `S_[n.t]` at each grid point. Requires the sample
/// to live on a rectangular unit-step integer lattice (axes 1..=N).
///
/// Returns `out[rep][t_index * m + comp]`.
pub fn partial_sum_field(
    sample: &FieldSample,
    n: &[u32],
    t_grid: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    let grid = sample
        .grid
        .as_ref()
        .ok_or_else(|| Error::Parameter("sample does not carry a lattice grid".into()))?;
    if !grid.is_unit_integer() {
        return Err(Error::Parameter(
            "partial sums need a unit-step integer lattice".into(),
        ));
    }
    let d = grid.dim();
    if n.len() != d {
        return Err(Error::Mismatch("n dimension mismatch".into()));
    }
    let sizes: Vec<usize> = grid.axes().iter().map(|a| a.len()).collect();
    let mut boxes = Vec::with_capacity(t_grid.len());
    for t in t_grid {
        if t.len() != d {
            return Err(Error::Mismatch("t-grid dimension mismatch".into()));
        }
        if t.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Parameter("t-grid points must be positive".into()));
        }
        let b = floored_box(n, t);
        for (axis, (&bi, &size)) in b.iter().zip(&sizes).enumerate() {
            if bi > size {
                return Err(Error::Domain(format!(
                    "box bound {bi} exceeds lattice size {size} on axis {axis}"
                )));
            }
        }
        boxes.push(b);
    }
    let m = sample.m;
    let n_points = sample.n_points();
    let mut out = Vec::with_capacity(sample.n_reps);
    let mut comp_plane = vec![0.0; n_points];
    for rep in 0..sample.n_reps {
        let rep_values = sample.replicate(rep);
        let mut row = vec![0.0; t_grid.len() * m];
        for comp in 0..m {
            for p in 0..n_points {
                comp_plane[p] = rep_values[p * m + comp];
            }
            prefix_sums(&mut comp_plane, &sizes);
            for (ti, b) in boxes.iter().enumerate() {
                row[ti * m + comp] = prefix_lookup(&comp_plane, &sizes, b);
            }
        }
        out.push(row);
    }
    Ok(out)
}

/// Componentwise division of summed values by per-component normalizers.
pub fn normalized_sum(values: &[Vec<f64>], f_n: &[f64]) -> Result<Vec<Vec<f64>>> {
    if f_n.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Parameter("normalizers must be positive".into()));
    }
    let m = f_n.len();
    let mut out = Vec::with_capacity(values.len());
    for row in values {
        if row.len() % m != 0 {
            return Err(Error::Mismatch("value length is not a multiple of m".into()));
        }
        out.push(
            row.iter()
                .enumerate()
                .map(|(i, &v)| v / f_n[i % m])
                .collect(),
        );
    }
    Ok(out)
}

/// Rectangle size (n, floor(n^gamma)) of the scaling-transition scheme.
pub fn gamma_rectangle(n: u32, gamma: f64) -> Result<(u32, u32)> {
    if n == 0 {
        return Err(Error::Parameter("n must be >= 1".into()));
    }
    if !(gamma > 0.0) {
        return Err(Error::Parameter("gamma must be positive".into()));
    }
    let m = math::floor(math::pow(n as f64, gamma));
    if !(1.0..=1e9).contains(&m) {
        return Err(Error::Parameter(format!(
            "floor(n^gamma) = {m} is out of the supported range"
        )));
    }
    Ok((n, m as u32))
}

/// `Z_{n,gamma}(t, s) = S_{(n, floor(n^gamma)).(t,s)}` on a planar lattice.
pub fn scale_transition_sum(
    sample: &FieldSample,
    n: u32,
    gamma: f64,
    ts_grid: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    let (n0, n1) = gamma_rectangle(n, gamma)?;
    partial_sum_field(sample, &[n0, n1], ts_grid)
}

/// Variance of the box sum over an n x m rectangle of a stationary planar
/// field with lag covariance r, through the weighted-lag identity
/// `sum_{|k|<n} sum_{|l|<m} (n-|k|)(m-|l|) r(k,l)`.
pub fn exact_sum_variance_fn(r: impl Fn(i64, i64) -> f64, n: u32, m: u32) -> f64 {
    let (n, m) = (n as i64, m as i64);
    let mut sum = 0.0;
    let mut comp = 0.0;
    for k in -(n - 1)..=(n - 1) {
        let wk = (n - k.abs()) as f64;
        for l in -(m - 1)..=(m - 1) {
            let v = wk * (m - l.abs()) as f64 * r(k, l);
            // Neumaier compensation, fixed iteration order.
            let t = sum + v;
            if math::abs(sum) >= math::abs(v) {
                comp += (sum - t) + v;
            } else {
                comp += (v - t) + sum;
            }
            sum = t;
        }
    }
    sum + comp
}

/// 1-D weighted-lag sum `sum_{|k|<n} (n-|k|) r(k)`, the variance of a length-n
/// partial sum.
pub fn weighted_lag_sum_1d(r: impl Fn(i64) -> f64, n: u32) -> f64 {
    let n = n as i64;
    let mut sum = 0.0;
    for k in -(n - 1)..=(n - 1) {
        sum += (n - k.abs()) as f64 * r(k);
    }
    sum
}

/// Exact box-sum variance for the built-in stationary lattice kernels;
/// separable kernels factor into two 1-D sums.
pub fn exact_sum_variance(kernel: &CovarianceKernel, n: u32, m: u32) -> Result<f64> {
    kernel.validate()?;
    Ok(match kernel {
        CovarianceKernel::WhiteNoise { .. } => n as f64 * m as f64,
        CovarianceKernel::LatticeSeparable { axis0, axis1 } => {
            weighted_lag_sum_1d(|k| axis0.eval(k), n) * weighted_lag_sum_1d(|l| axis1.eval(l), m)
        }
        CovarianceKernel::LatticeIsotropicLrd { q } => {
            let q = *q;
            exact_sum_variance_fn(|i, j| crate::fields::isotropic_lrd_cov(q, i, j), n, m)
        }
        _ => {
            return Err(Error::Parameter(
                "exact sum variance needs a stationary lattice kernel".into(),
            ))
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationFit {
    /// Growth exponent of the normalization A_n: half the log-log slope of
    /// the variance.
    pub exponent: f64,
    pub r_squared: f64,
    /// Set when a fitted exponent is not strictly positive, which the
    /// attraction theory requires.
    pub nonpositive_warning: bool,
}

/// Fits the growth exponent of `Var Z_{n,gamma}(1,1)` over a list of lattice
/// sizes, using the exact variance oracle.
pub fn fit_normalization_exponent(
    kernel: &CovarianceKernel,
    gamma: f64,
    n_list: &[u32],
) -> Result<NormalizationFit> {
    if n_list.len() < 4 {
        return Err(Error::Parameter("need at least 4 lattice sizes".into()));
    }
    let mut xs = Vec::with_capacity(n_list.len());
    let mut ys = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let (n0, n1) = gamma_rectangle(n, gamma)?;
        let var = exact_sum_variance(kernel, n0, n1)?;
        if !(var > 0.0) {
            return Err(Error::Numeric(format!(
                "variance {var} at n = {n} is not positive"
            )));
        }
        xs.push(math::ln(n as f64));
        ys.push(math::ln(var));
    }
    let (slope, _intercept, r2) = math::ols_fit(&xs, &ys);
    let exponent = 0.5 * slope;
    Ok(NormalizationFit {
        exponent,
        r_squared: r2,
        nonpositive_warning: exponent <= 0.0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BreakpointDiagnostic {
    /// Breakpoint location of the best two-segment fit.
    pub gamma0: f64,
    pub left_slope: f64,
    pub right_slope: f64,
    pub sse_single: f64,
    pub sse_two_segment: f64,
    /// Fraction of the single-line SSE removed by the split; near 0 means
    /// no evidence of a transition.
    pub improvement: f64,
}

/// Continuous two-segment least squares of h(gamma) over interior breakpoint
/// candidates. Purely diagnostic: no ground-truth gamma_0 is asserted.
pub fn breakpoint_scan(gammas: &[f64], h_values: &[f64]) -> Result<BreakpointDiagnostic> {
    let k = gammas.len();
    if k != h_values.len() || k < 5 {
        return Err(Error::Parameter(
            "breakpoint scan needs at least 5 (gamma, h) pairs".into(),
        ));
    }
    let (s_slope, s_int, _) = math::ols_fit(gammas, h_values);
    let sse_single: f64 = gammas
        .iter()
        .zip(h_values)
        .map(|(&g, &h)| {
            let e = h - (s_slope * g + s_int);
            e * e
        })
        .sum();
    let mut best: Option<BreakpointDiagnostic> = None;
    for cut in 2..k - 2 {
        let g0 = gammas[cut];
        // Model h = a + b (g - g0)_- + c (g - g0)_+ : linear least squares in
        // (a, b, c) with basis functions built from the hinge at g0.
        let mut ata = Mat::zeros(3, 3);
        let mut aty = [0.0f64; 3];
        for (&g, &h) in gammas.iter().zip(h_values) {
            let row = [1.0, (g - g0).min(0.0), (g - g0).max(0.0)];
            for a in 0..3 {
                for b in 0..3 {
                    ata[(a, b)] += row[a] * row[b];
                }
                aty[a] += row[a] * h;
            }
        }
        let coeffs = match ata.inverse() {
            Ok(inv) => inv.matvec(&aty),
            Err(_) => continue,
        };
        let sse: f64 = gammas
            .iter()
            .zip(h_values)
            .map(|(&g, &h)| {
                let fit = coeffs[0] + coeffs[1] * (g - g0).min(0.0) + coeffs[2] * (g - g0).max(0.0);
                (h - fit) * (h - fit)
            })
            .sum();
        let candidate = BreakpointDiagnostic {
            gamma0: g0,
            left_slope: coeffs[1],
            right_slope: coeffs[2],
            sse_single,
            sse_two_segment: sse,
            improvement: if sse_single > 1e-30 {
                1.0 - sse / sse_single
            } else {
                0.0
            },
        };
        if best.as_ref().is_none_or(|b| sse < b.sse_two_segment) {
            best = Some(candidate);
        }
    }
    best.ok_or_else(|| Error::Numeric("no admissible breakpoint".into()))
}

/// Values `f_r * Y(r^E t)` of the operator-rescaled field, on caller-supplied
/// t whose images `r^E t` lie on the sampled grid (no interpolation).
pub fn operator_scaled_sum(
    path: &PathOnGrid,
    e_matrix: &Mat,
    r: f64,
    f_r: &Mat,
    t_points: &[Vec<f64>],
) -> Result<PathOnGrid> {
    if f_r.rows() != path.m || f_r.cols() != path.m {
        return Err(Error::Mismatch("f_r must be m x m".into()));
    }
    let d = e_matrix.rows();
    let power = matrix_power(e_matrix, r)?;
    let mut values = Vec::with_capacity(t_points.len() * path.m);
    for t in t_points {
        if t.len() != d {
            return Err(Error::Mismatch("t dimension mismatch".into()));
        }
        let image = power.matvec(t);
        let idx = find_point(&path.points, &image).ok_or_else(|| {
            Error::Domain(format!("image point {image:?} is not on the sampled grid"))
        })?;
        let y: Vec<f64> = (0..path.m).map(|c| path.value(idx, c)).collect();
        values.extend(f_r.matvec(&y));
    }
    PathOnGrid::new(t_points.to_vec(), values, path.m, path.frame)
}

fn find_point(points: &[Vec<f64>], target: &[f64]) -> Option<usize> {
    let scale = 1.0 + math::norm2(target);
    points.iter().position(|p| {
        p.len() == target.len()
            && p.iter()
                .zip(target)
                .all(|(a, b)| math::abs(a - b) <= 1e-9 * scale)
    })
}

/// Moments of normalized partial sums at a set of t-points, accumulated one
/// replicate at a time so large lattices never hold all replicates in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct SumExperimentResult {
    pub t_grid: Vec<Vec<f64>>,
    pub n: Vec<u32>,
    pub n_reps: usize,
    pub normalizer: f64,
    pub mean: Vec<f64>,
    /// Raw second moments (mean-zero models).
    pub cov: Mat,
    /// Standard errors of the second-moment estimates.
    pub se: Mat,
}

/// Streams `n_reps` lattice replicates of a stationary kernel, reduces them
/// to normalized partial sums at the t-points, and accumulates first and
/// second moments. Replicate r uses substream (seed, r), so the run is
/// reproducible and replicate-parallelizable.
pub fn run_partial_sum_experiment(
    kernel: &CovarianceKernel,
    n: &[u32],
    t_grid: &[Vec<f64>],
    normalization: &Normalization,
    n_reps: usize,
    seed: u64,
) -> Result<SumExperimentResult> {
    if n.len() != 2 {
        return Err(Error::Parameter("lattice experiments are planar (d = 2)".into()));
    }
    if n_reps < 2 {
        return Err(Error::Parameter("need at least two replicates".into()));
    }
    let config = SumProcessConfig {
        n: n.to_vec(),
        t_grid: t_grid.to_vec(),
        gamma: None,
        normalization: normalization.clone(),
    };
    config.validate()?;
    // Lattice just large enough for the largest box.
    let mut sizes = [1usize; 2];
    let mut boxes = Vec::with_capacity(t_grid.len());
    for t in t_grid {
        let b = floored_box(n, t);
        sizes[0] = sizes[0].max(b[0].max(1));
        sizes[1] = sizes[1].max(b[1].max(1));
        boxes.push(b);
    }
    let grid = LatticeGrid::integer(&[sizes[0], sizes[1]])?;
    let sampler = LatticeSampler::plan(kernel, &grid)?;
    let f_n = normalization.value(n)?;
    let k = t_grid.len();
    let mut mean_acc = vec![0.0; k];
    let mut prod_acc = Mat::zeros(k, k);
    let mut prod_sq_acc = Mat::zeros(k, k);
    let mut sums = vec![0.0; k];
    for rep in 0..n_reps {
        let mut field = sampler.replicate(seed, rep as u64);
        prefix_sums(&mut field, &[sizes[0], sizes[1]]);
        for (ti, b) in boxes.iter().enumerate() {
            sums[ti] = prefix_lookup(&field, &[sizes[0], sizes[1]], b) / f_n;
        }
        for a in 0..k {
            mean_acc[a] += sums[a];
            for b in a..k {
                let p = sums[a] * sums[b];
                prod_acc[(a, b)] += p;
                prod_sq_acc[(a, b)] += p * p;
            }
        }
    }
    let r = n_reps as f64;
    let mut cov = Mat::zeros(k, k);
    let mut se = Mat::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let mean_p = prod_acc[(a, b)] / r;
            let var_p = (prod_sq_acc[(a, b)] / r - mean_p * mean_p).max(0.0);
            let std_err = math::sqrt(var_p / r);
            cov[(a, b)] = mean_p;
            cov[(b, a)] = mean_p;
            se[(a, b)] = std_err;
            se[(b, a)] = std_err;
        }
    }
    Ok(SumExperimentResult {
        t_grid: t_grid.to_vec(),
        n: n.to_vec(),
        n_reps,
        normalizer: f_n,
        mean: mean_acc.iter().map(|&v| v / r).collect(),
        cov,
        se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{sample_stationary_lattice, Covariance1d, Frame, SampleMeta};
    use crate::rng::RandomStream;

    fn constant_sample(value: f64, sizes: &[usize], n_reps: usize) -> FieldSample {
        let grid = LatticeGrid::integer(sizes).unwrap();
        let n = grid.len();
        FieldSample {
            points: grid.points(),
            m: 1,
            n_reps,
            values: vec![value; n * n_reps],
            meta: SampleMeta {
                kernel: "constant".into(),
                seed: 0,
                generator: "deterministic".into(),
                frame: Frame::TimeDomain,
            },
            grid: Some(grid),
        }
    }

    #[test]
    fn counting_box_sum() {
        let sample = constant_sample(1.0, &[10, 10], 2);
        let sums = partial_sum_field(&sample, &[10, 10], &[vec![1.0, 1.0]]).unwrap();
        assert_eq!(sums[0][0], 100.0);
        assert_eq!(sums[1][0], 100.0);
    }

    #[test]
    fn empty_box_rule() {
        // [10 * 0.05] = 0, so the sum is exactly zero.
        let sample = constant_sample(1.0, &[10, 10], 1);
        let sums = partial_sum_field(&sample, &[10, 10], &[vec![0.05, 1.0]]).unwrap();
        assert_eq!(sums[0][0], 0.0);
    }

    #[test]
    fn out_of_range_box_errors() {
        let sample = constant_sample(1.0, &[10, 10], 1);
        assert!(matches!(
            partial_sum_field(&sample, &[10, 10], &[vec![2.0, 1.0]]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn iid_gaussian_sum_variance() {
        let kernel = CovarianceKernel::WhiteNoise { dim: 2 };
        let grid = LatticeGrid::integer(&[12, 12]).unwrap();
        let sample = sample_stationary_lattice(&kernel, &grid, 4000, 5).unwrap();
        let sums = partial_sum_field(&sample, &[12, 12], &[vec![1.0, 1.0]]).unwrap();
        let mut s2 = 0.0;
        for row in &sums {
            s2 += row[0] * row[0];
        }
        let var = s2 / sums.len() as f64;
        let expected = 144.0;
        let band = 3.0 * expected * math::sqrt(2.0 / sums.len() as f64);
        assert!(math::abs(var - expected) < band, "var {var}");
    }

    #[test]
    fn normalized_sum_identity_and_values() {
        let values = vec![vec![4.0, 8.0], vec![-2.0, 0.0]];
        let keep = normalized_sum(&values, &[1.0]).unwrap();
        assert_eq!(keep, values);
        let halved = normalized_sum(&values, &[2.0]).unwrap();
        assert_eq!(halved[0], vec![2.0, 4.0]);
    }

    #[test]
    fn gamma_rectangle_values() {
        assert_eq!(gamma_rectangle(10, 1.0).unwrap(), (10, 10));
        assert_eq!(gamma_rectangle(10, 2.0).unwrap(), (10, 100));
        assert_eq!(gamma_rectangle(32, 0.5).unwrap(), (32, 5));
    }

    #[test]
    fn scale_transition_degenerate_field() {
        let sample = constant_sample(2.5, &[8, 64], 1);
        let z = scale_transition_sum(&sample, 8, 2.0, &[vec![1.0, 1.0]]).unwrap();
        assert_eq!(z[0][0], 2.5 * 8.0 * 64.0);
    }

    #[test]
    fn white_noise_variance_count() {
        assert_eq!(
            exact_sum_variance(&CovarianceKernel::WhiteNoise { dim: 2 }, 5, 5).unwrap(),
            25.0
        );
    }

    #[test]
    fn weighted_lag_hand_case() {
        // r(k, l) = 2^{-|k|} 1_{l=0}, n = 2, m = 1: 2*1 + 2*(1/2) = 3.
        let r = |k: i64, l: i64| {
            if l == 0 {
                math::pow(0.5, math::abs(k as f64))
            } else {
                0.0
            }
        };
        assert!(math::abs(exact_sum_variance_fn(r, 2, 1) - 3.0) < 1e-14);
    }

    #[test]
    fn weighted_lag_equals_quadruple_sum() {
        // Brute-force oracle: the raw quadruple sum over all site pairs.
        let quadruple = |r: &dyn Fn(i64, i64) -> f64, n: i64, m: i64| {
            let mut s = 0.0;
            for i in 1..=n {
                for ip in 1..=n {
                    for j in 1..=m {
                        for jp in 1..=m {
                            s += r(i - ip, j - jp);
                        }
                    }
                }
            }
            s
        };
        let mut rng = RandomStream::new(61);
        for trial in 0..20 {
            // Randomized symmetric lag kernels with geometric decay.
            let a = rng.uniform_in(0.1, 0.9);
            let b = rng.uniform_in(0.1, 0.9);
            let c = rng.uniform_in(-0.5, 0.5);
            let r = move |k: i64, l: i64| {
                c * math::pow(a, math::abs(k as f64)) * math::pow(b, math::abs(l as f64))
                    + if k == 0 && l == 0 { 1.0 } else { 0.0 }
            };
            let n = 1 + (trial % 8) as u32;
            let m = 1 + ((trial * 3) % 8) as u32;
            let fast = exact_sum_variance_fn(r, n, m);
            let slow = quadruple(&r, n as i64, m as i64);
            assert!(
                math::abs(fast - slow) < 1e-10 * math::abs(slow).max(1.0),
                "n={n} m={m}: {fast} vs {slow}"
            );
        }
    }

    #[test]
    fn separable_variance_factors() {
        let kernel = CovarianceKernel::LatticeSeparable {
            axis0: Covariance1d::ExpDecay { rho: 0.5 },
            axis1: Covariance1d::Fgn { hurst: 0.7 },
        };
        for &(n, m) in &[(3u32, 4u32), (6, 2), (8, 8)] {
            let fast = exact_sum_variance(&kernel, n, m).unwrap();
            let direct = exact_sum_variance_fn(
                |k, l| {
                    Covariance1d::ExpDecay { rho: 0.5 }.eval(k)
                        * Covariance1d::Fgn { hurst: 0.7 }.eval(l)
                },
                n,
                m,
            );
            assert!(math::abs(fast - direct) < 1e-9 * math::abs(direct).max(1.0));
        }
    }

    #[test]
    fn fgn_partial_sum_variance_is_exact_power() {
        // Fractional Gaussian noise sums to variance n^{2H} exactly.
        let h = 0.65;
        let v = weighted_lag_sum_1d(|k| Covariance1d::Fgn { hurst: h }.eval(k), 37);
        assert!(math::abs(v - math::pow(37.0, 2.0 * h)) < 1e-8);
    }

    #[test]
    fn white_noise_gamma_exponent() {
        let kernel = CovarianceKernel::WhiteNoise { dim: 2 };
        let n_list: Vec<u32> = (4..=9).map(|k| 1u32 << k).collect();
        for &gamma in &[0.5, 1.0, 2.0] {
            let fit = fit_normalization_exponent(&kernel, gamma, &n_list).unwrap();
            let expected = (1.0 + gamma) / 2.0;
            assert!(
                math::abs(fit.exponent - expected) < 0.02,
                "gamma {gamma}: {} vs {expected}",
                fit.exponent
            );
            assert!(!fit.nonpositive_warning);
        }
    }

    #[test]
    fn separable_lrd_gamma_exponent() {
        let (h1, h2) = (0.8, 0.65);
        let kernel = CovarianceKernel::LatticeSeparable {
            axis0: Covariance1d::Fgn { hurst: h1 },
            axis1: Covariance1d::Fgn { hurst: h2 },
        };
        let n_list: Vec<u32> = (4..=9).map(|k| 1u32 << k).collect();
        for &gamma in &[0.5, 1.0, 2.0] {
            let fit = fit_normalization_exponent(&kernel, gamma, &n_list).unwrap();
            let expected = h1 + gamma * h2;
            assert!(
                math::abs(fit.exponent - expected) < 0.05,
                "gamma {gamma}: {} vs {expected}",
                fit.exponent
            );
        }
    }

    #[test]
    fn ratio_condition_cases() {
        let window = RatioWindow::new(1.0, 3.0).unwrap();
        let doubling: Vec<(f64, f64)> = (1..=20).map(|k| (k as f64, 2.0 * k as f64)).collect();
        assert!(check_ratio_condition(&doubling, &window));
        let wide = RatioWindow::new(0.1, 10.0).unwrap();
        let squares: Vec<(f64, f64)> = (1..=20).map(|k| (k as f64, (k * k) as f64)).collect();
        assert!(!check_ratio_condition(&squares, &wide));
        let gamma_one: Vec<(f64, f64)> = (1..=20)
            .map(|k| {
                let (n, m) = gamma_rectangle(k, 1.0).unwrap();
                (n as f64, m as f64)
            })
            .collect();
        assert!(check_ratio_condition(
            &gamma_one,
            &RatioWindow::new(0.5, 2.0).unwrap()
        ));
    }

    #[test]
    fn breakpoint_scan_recovers_kink() {
        let gammas: Vec<f64> = (0..11).map(|k| 0.25 + 0.25 * k as f64).collect();
        // Continuous piecewise linear with a kink at gamma = 1.5.
        let h: Vec<f64> = gammas
            .iter()
            .map(|&g| 0.8 + if g <= 1.5 { 0.2 * (g - 1.5) } else { 0.8 * (g - 1.5) })
            .collect();
        let diag = breakpoint_scan(&gammas, &h).unwrap();
        assert!(math::abs(diag.gamma0 - 1.5) <= 0.25 + 1e-12, "gamma0 {}", diag.gamma0);
        assert!(diag.improvement > 0.9);
    }

    #[test]
    fn operator_scaled_sum_identity() {
        let points = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        let path = PathOnGrid::new(points.clone(), vec![3.0, 5.0], 1, Frame::TimeDomain).unwrap();
        let out = operator_scaled_sum(
            &path,
            &Mat::identity(2),
            1.0,
            &Mat::identity(1),
            &points,
        )
        .unwrap();
        assert_eq!(out.values, vec![3.0, 5.0]);
    }

    #[test]
    fn operator_scaled_sum_diagonal_time_change() {
        // E = diag(1,2), r = 2: t = (1,1) maps to (2,4).
        let points = vec![vec![1.0, 1.0], vec![2.0, 4.0]];
        let path = PathOnGrid::new(points, vec![3.0, 5.0], 1, Frame::TimeDomain).unwrap();
        let f_r = Mat::from_rows(&[&[0.25]]);
        let out = operator_scaled_sum(
            &path,
            &Mat::diag(&[1.0, 2.0]),
            2.0,
            &f_r,
            &[vec![1.0, 1.0]],
        )
        .unwrap();
        assert!(math::abs(out.values[0] - 0.25 * 5.0) < 1e-12);
    }

    #[test]
    fn operator_scaled_sum_off_grid_errors() {
        let path = PathOnGrid::new(vec![vec![1.0, 1.0]], vec![1.0], 1, Frame::TimeDomain).unwrap();
        assert!(matches!(
            operator_scaled_sum(
                &path,
                &Mat::diag(&[1.0, 1.0]),
                3.0,
                &Mat::identity(1),
                &[vec![1.0, 1.0]]
            ),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn experiment_runner_matches_direct_path() {
        let kernel = CovarianceKernel::WhiteNoise { dim: 2 };
        let res = run_partial_sum_experiment(
            &kernel,
            &[16, 16],
            &[vec![0.5, 0.5], vec![1.0, 1.0]],
            &Normalization::SqrtBoxProduct,
            2000,
            77,
        )
        .unwrap();
        // Var of normalized sum at t: prod [n t] / prod n = 64/256, 256/256.
        assert!(math::abs(res.cov[(0, 0)] - 0.25) < 3.0 * res.se[(0, 0)] + 1e-12);
        assert!(math::abs(res.cov[(1, 1)] - 1.0) < 3.0 * res.se[(1, 1)] + 1e-12);
        // Cross moment: E S(t) S(u) = prod min boxes / prod n = 64/256.
        assert!(math::abs(res.cov[(0, 1)] - 0.25) < 3.0 * res.se[(0, 1)] + 1e-12);
    }
}
