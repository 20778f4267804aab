//! Gaussian field kernels and seeded Monte Carlo samplers.
//!
//! Built-in covariances: the Lévy fractional Brownian field, the fractional
//! Brownian sheet, the stationary polar kernel R on the log-radius/angle
//! plane, two stationary lattice families, white noise, and tabulated Gram
//! matrices. The Lévy kernel carries the minus sign in front of
//! ||t-u||^{2H}; the plus-sign variant is not positive semidefinite and
//! contradicts the polar kernel R under the log-polar substitution, which
//! the `polar_consistency` tests pin down.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fft;
use crate::linalg::Mat;
use crate::math;
use crate::regvar::ExponentVector;
use crate::rng::RandomStream;

/// The m x d exponent matrix of a multi-self-similar field; row j holds the
/// per-coordinate exponents of component j.
#[derive(Debug, Clone, PartialEq)]
pub struct HurstMatrix {
    components: usize,
    dim: usize,
    entries: Vec<f64>,
}

impl HurstMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::Parameter("Hurst matrix must be non-empty".into()));
        }
        let dim = rows[0].len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Parameter("Hurst matrix rows must have equal length".into()));
        }
        let mut entries = Vec::with_capacity(rows.len() * dim);
        for row in &rows {
            for &h in row {
                if !(h.is_finite() && h >= 0.0) {
                    return Err(Error::Parameter(
                        "Hurst exponents must be finite and non-negative".into(),
                    ));
                }
                entries.push(h);
            }
        }
        Ok(HurstMatrix {
            components: rows.len(),
            dim,
            entries,
        })
    }

    pub fn scalar(h: f64) -> Result<Self> {
        HurstMatrix::new(vec![vec![h]])
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.entries[j * self.dim..(j + 1) * self.dim]
    }

    /// `prod_i a_i^{H_i^{(j)}}` in the log domain.
    pub fn scaling_factor(&self, j: usize, a: &[f64]) -> f64 {
        let mut s = 0.0;
        for (&h, &ai) in self.row(j).iter().zip(a) {
            if h != 0.0 {
                s += h * math::ln(ai);
            }
        }
        math::exp(s)
    }
}

/// Tagged stationary covariances on the 1-D integer lattice.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance1d {
    White,
    /// r(k) = rho^|k|, |rho| < 1.
    ExpDecay { rho: f64 },
    /// Fractional Gaussian noise increments: partial sums have variance
    /// exactly n^{2H}.
    Fgn { hurst: f64 },
}

impl Covariance1d {
    pub fn validate(&self) -> Result<()> {
        match self {
            Covariance1d::White => Ok(()),
            Covariance1d::ExpDecay { rho } => {
                if math::abs(*rho) < 1.0 {
                    Ok(())
                } else {
                    Err(Error::Parameter("exp-decay rate must satisfy |rho| < 1".into()))
                }
            }
            Covariance1d::Fgn { hurst } => {
                if *hurst > 0.0 && *hurst < 1.0 {
                    Ok(())
                } else {
                    Err(Error::Parameter("fGn Hurst index must lie in (0, 1)".into()))
                }
            }
        }
    }

    pub fn eval(&self, lag: i64) -> f64 {
        match self {
            Covariance1d::White => {
                if lag == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            Covariance1d::ExpDecay { rho } => math::pow(*rho, math::abs(lag as f64)),
            Covariance1d::Fgn { hurst } => {
                let k = math::abs(lag as f64);
                let two_h = 2.0 * hurst;
                0.5 * (math::pow(k + 1.0, two_h) - 2.0 * math::pow(k, two_h)
                    + math::pow(math::abs(k - 1.0), two_h))
            }
        }
    }

    pub fn descriptor(&self) -> String {
        match self {
            Covariance1d::White => "white".into(),
            Covariance1d::ExpDecay { rho } => format!("exp:{rho}"),
            Covariance1d::Fgn { hurst } => format!("fgn:{hurst}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceKernel {
    WhiteNoise { dim: usize },
    LevyFbm { hurst: f64, dim: usize },
    FbmSheet { hurst: ExponentVector },
    PolarStationary { hurst: f64 },
    LatticeIsotropicLrd { q: f64 },
    LatticeSeparable { axis0: Covariance1d, axis1: Covariance1d },
    Tabulated { gram: Mat },
}

impl CovarianceKernel {
    pub fn validate(&self) -> Result<()> {
        match self {
            CovarianceKernel::WhiteNoise { dim } => {
                if *dim == 0 {
                    return Err(Error::Parameter("dimension must be positive".into()));
                }
            }
            CovarianceKernel::LevyFbm { hurst, dim } => {
                if !(*hurst > 0.0 && *hurst <= 1.0) {
                    return Err(Error::Parameter(
                        format!("Levy fBm requires H in (0, 1], got {hurst}"),
                    ));
                }
                if *dim == 0 {
                    return Err(Error::Parameter("dimension must be positive".into()));
                }
            }
            CovarianceKernel::FbmSheet { hurst } => {
                if hurst.entries().iter().any(|&h| !(h > 0.0 && h <= 1.0)) {
                    return Err(Error::Parameter(
                        "fBm sheet requires every axis exponent in (0, 1]".into(),
                    ));
                }
            }
            CovarianceKernel::PolarStationary { hurst } => {
                if !(*hurst > 0.0 && *hurst <= 1.0) {
                    return Err(Error::Parameter(
                        format!("polar kernel requires H in (0, 1], got {hurst}"),
                    ));
                }
            }
            CovarianceKernel::LatticeIsotropicLrd { q } => {
                if !(*q > 0.0 && *q < 2.0) {
                    return Err(Error::Parameter(
                        format!("isotropic LRD exponent must lie in (0, 2), got {q}"),
                    ));
                }
            }
            CovarianceKernel::LatticeSeparable { axis0, axis1 } => {
                axis0.validate()?;
                axis1.validate()?;
            }
            CovarianceKernel::Tabulated { gram } => {
                if !gram.is_square() || gram.rows() == 0 {
                    return Err(Error::Parameter("tabulated Gram must be square".into()));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            CovarianceKernel::WhiteNoise { dim } => *dim,
            CovarianceKernel::LevyFbm { dim, .. } => *dim,
            CovarianceKernel::FbmSheet { hurst } => hurst.dim(),
            CovarianceKernel::PolarStationary { .. } => 2,
            CovarianceKernel::LatticeIsotropicLrd { .. } => 2,
            CovarianceKernel::LatticeSeparable { .. } => 2,
            CovarianceKernel::Tabulated { .. } => 1,
        }
    }

    /// Stationary kernels depend on coordinate differences only.
    pub fn is_stationary(&self) -> bool {
        matches!(
            self,
            CovarianceKernel::WhiteNoise { .. }
                | CovarianceKernel::PolarStationary { .. }
                | CovarianceKernel::LatticeIsotropicLrd { .. }
                | CovarianceKernel::LatticeSeparable { .. }
        )
    }

    pub fn descriptor(&self) -> String {
        match self {
            CovarianceKernel::WhiteNoise { dim } => format!("white-noise(d={dim})"),
            CovarianceKernel::LevyFbm { hurst, dim } => format!("levy-fbm(H={hurst},d={dim})"),
            CovarianceKernel::FbmSheet { hurst } => {
                let hs: Vec<String> = hurst.entries().iter().map(|h| format!("{h}")).collect();
                format!("fbm-sheet(h={})", hs.join(","))
            }
            CovarianceKernel::PolarStationary { hurst } => format!("polar-stationary(H={hurst})"),
            CovarianceKernel::LatticeIsotropicLrd { q } => format!("lattice-lrd(q={q})"),
            CovarianceKernel::LatticeSeparable { axis0, axis1 } => {
                format!("lattice-separable({},{})", axis0.descriptor(), axis1.descriptor())
            }
            CovarianceKernel::Tabulated { gram } => format!("tabulated(n={})", gram.rows()),
        }
    }
}

fn integer_coord(x: f64) -> Result<i64> {
    if math::floor(x) == x && math::abs(x) < 9e15 {
        Ok(x as i64)
    } else {
        Err(Error::Domain(format!("lattice kernels take integer coordinates, got {x}")))
    }
}

/// Evaluate the kernel at a pair of points.
pub fn covariance(kernel: &CovarianceKernel, t: &[f64], u: &[f64]) -> Result<f64> {
    kernel.validate()?;
    let d = kernel.dim();
    if t.len() != d || u.len() != d {
        return Err(Error::Mismatch(format!(
            "kernel dimension {d} does not match points of dimension {}/{}",
            t.len(),
            u.len()
        )));
    }
    Ok(match kernel {
        CovarianceKernel::WhiteNoise { .. } => {
            if t == u {
                1.0
            } else {
                0.0
            }
        }
        CovarianceKernel::LevyFbm { hurst, .. } => {
            let two_h = 2.0 * hurst;
            let diff: Vec<f64> = t.iter().zip(u).map(|(a, b)| a - b).collect();
            0.5 * (math::pow(math::norm2(t), two_h) + math::pow(math::norm2(u), two_h)
                - math::pow(math::norm2(&diff), two_h))
        }
        CovarianceKernel::FbmSheet { hurst } => {
            let mut prod = 1.0;
            for ((&ti, &ui), &h) in t.iter().zip(u).zip(hurst.entries()) {
                let two_h = 2.0 * h;
                prod *= 0.5
                    * (math::pow(math::abs(ti), two_h) + math::pow(math::abs(ui), two_h)
                        - math::pow(math::abs(ti - ui), two_h));
            }
            prod
        }
        CovarianceKernel::PolarStationary { hurst } => {
            covariance_r(&[u[0] - t[0], u[1] - t[1]], *hurst)?
        }
        CovarianceKernel::LatticeIsotropicLrd { q } => {
            let i = integer_coord(t[0])? - integer_coord(u[0])?;
            let j = integer_coord(t[1])? - integer_coord(u[1])?;
            isotropic_lrd_cov(*q, i, j)
        }
        CovarianceKernel::LatticeSeparable { axis0, axis1 } => {
            let i = integer_coord(t[0])? - integer_coord(u[0])?;
            let j = integer_coord(t[1])? - integer_coord(u[1])?;
            axis0.eval(i) * axis1.eval(j)
        }
        CovarianceKernel::Tabulated { gram } => {
            let i = integer_coord(t[0])?;
            let j = integer_coord(u[0])?;
            if i < 0 || j < 0 || i as usize >= gram.rows() || j as usize >= gram.rows() {
                return Err(Error::Domain("tabulated index out of range".into()));
            }
            gram[(i as usize, j as usize)]
        }
    })
}

pub fn isotropic_lrd_cov(q: f64, i: i64, j: i64) -> f64 {
    math::pow(1.0 + (i * i + j * j) as f64, -q / 2.0)
}

/// Stationary covariance of the log-polar image of the Lévy field:
/// `R(v) = (e^{v1 H} + e^{-v1 H} - (e^{v1} + e^{-v1} - 2 cos v2)^H) / 2`.
pub fn covariance_r(v: &[f64], hurst: f64) -> Result<f64> {
    if !(hurst > 0.0 && hurst <= 1.0) {
        return Err(Error::Parameter(format!(
            "polar kernel requires H in (0, 1], got {hurst}"
        )));
    }
    if v.len() != 2 {
        return Err(Error::Mismatch("R takes a 2-vector".into()));
    }
    let (v1, v2) = (v[0], v[1]);
    let inner = math::exp(v1) + math::exp(-v1) - 2.0 * math::cos(v2);
    Ok(0.5 * (math::exp(v1 * hurst) + math::exp(-v1 * hurst) - math::pow(inner, hurst)))
}

/// Gram matrix of the kernel on a finite point set.
pub fn gram_matrix(kernel: &CovarianceKernel, points: &[Vec<f64>]) -> Result<Mat> {
    let n = points.len();
    let mut g = Mat::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v = covariance(kernel, &points[a], &points[b])?;
            g[(a, b)] = v;
            g[(b, a)] = v;
        }
    }
    Ok(g)
}

/// Rectangular grid given by strictly increasing per-axis coordinates.
/// Points enumerate in row-major order (the last axis varies fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeGrid {
    axes: Vec<Vec<f64>>,
}

impl LatticeGrid {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() || axes.iter().any(|a| a.is_empty()) {
            return Err(Error::Parameter("grid axes must be non-empty".into()));
        }
        for axis in &axes {
            if axis.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::Parameter(
                    "grid coordinates must be strictly increasing".into(),
                ));
            }
        }
        Ok(LatticeGrid { axes })
    }

    /// Integer lattice 1..=n_i on each axis.
    pub fn integer(sizes: &[usize]) -> Result<Self> {
        if sizes.contains(&0) {
            return Err(Error::Parameter("grid sizes must be positive".into()));
        }
        LatticeGrid::new(
            sizes
                .iter()
                .map(|&n| (1..=n).map(|i| i as f64).collect())
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut pts = Vec::with_capacity(self.len());
        let mut idx = vec![0usize; self.dim()];
        loop {
            pts.push(idx.iter().enumerate().map(|(a, &i)| self.axes[a][i]).collect());
            let mut axis = self.dim();
            loop {
                if axis == 0 {
                    return pts;
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < self.axes[axis].len() {
                    break;
                }
                idx[axis] = 0;
            }
        }
    }

    /// True when every axis is 1, 2, ..., n.
    pub fn is_unit_integer(&self) -> bool {
        self.axes
            .iter()
            .all(|axis| axis.iter().enumerate().all(|(i, &x)| x == (i + 1) as f64))
    }
}

/// Coordinate frame of a sampled path or field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    /// Original "time" domain (positive orthant / plane).
    TimeDomain,
    /// Stationary domain after a Lamperti change of variables.
    StationaryDomain,
}

impl Frame {
    pub fn tag(&self) -> &'static str {
        match self {
            Frame::TimeDomain => "time",
            Frame::StationaryDomain => "stationary",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleMeta {
    pub kernel: String,
    pub seed: u64,
    pub generator: String,
    pub frame: Frame,
}

/// Monte Carlo replicates of field values on a finite point set.
///
/// Values are stored replicate-major: `values[rep * n_points * m + p * m + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub points: Vec<Vec<f64>>,
    pub m: usize,
    pub n_reps: usize,
    pub values: Vec<f64>,
    pub meta: SampleMeta,
    /// Present when the points enumerate a rectangular grid in row-major
    /// order; partial-sum routines need the axes.
    pub grid: Option<LatticeGrid>,
}

impl FieldSample {
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn value(&self, rep: usize, point: usize, comp: usize) -> f64 {
        self.values[(rep * self.n_points() + point) * self.m + comp]
    }

    pub fn replicate(&self, rep: usize) -> &[f64] {
        let w = self.n_points() * self.m;
        &self.values[rep * w..(rep + 1) * w]
    }

    /// Multiplies every value of component `c` by `factor`.
    pub fn scale_component(&mut self, comp: usize, factor: f64) {
        let m = self.m;
        for (i, v) in self.values.iter_mut().enumerate() {
            if i % m == comp {
                *v *= factor;
            }
        }
    }
}

const JITTER_BASE: f64 = 1e-10;
const JITTER_ESCALATION: f64 = 100.0;
const JITTER_ATTEMPTS: usize = 3;

/// Cholesky with the jitter policy: on failure add `1e-10 * trace/n` to the
/// diagonal and escalate by 100x up to three times. Distinguishes roundoff
/// from genuinely non-PSD parameterizations. Returns the factor and the
/// number of jitter rounds used.
pub fn factor_gram(gram: &Mat) -> Result<(Mat, usize)> {
    let n = gram.rows();
    let scale = gram.trace() / n.max(1) as f64;
    let pivot_tol = 1e-12 * scale.max(1e-300);
    if let Ok(l) = gram.cholesky_psd(pivot_tol) {
        return Ok((l, 0));
    }
    let mut jitter = JITTER_BASE * scale.max(1e-300);
    for attempt in 1..=JITTER_ATTEMPTS {
        let mut jittered = gram.clone();
        for i in 0..n {
            jittered[(i, i)] += jitter;
        }
        if let Ok(l) = jittered.cholesky_psd(pivot_tol) {
            return Ok((l, attempt));
        }
        jitter *= JITTER_ESCALATION;
    }
    Err(Error::Numeric(
        "Gram matrix is not positive semidefinite after jitter escalation".into(),
    ))
}

/// Draws i.i.d. mean-zero Gaussian replicates with the kernel's Gram
/// covariance on the given points. Deterministic in (seed, build); replicate
/// r uses substream (seed, r).
pub fn sample_gaussian_field(
    kernel: &CovarianceKernel,
    points: &[Vec<f64>],
    n_reps: usize,
    seed: u64,
) -> Result<FieldSample> {
    if n_reps == 0 {
        return Err(Error::Parameter("need at least one replicate".into()));
    }
    let gram = gram_matrix(kernel, points)?;
    sample_from_gram(&gram, points, n_reps, seed, kernel.descriptor())
}

/// Same sampler, starting from an explicit Gram matrix.
pub fn sample_from_gram(
    gram: &Mat,
    points: &[Vec<f64>],
    n_reps: usize,
    seed: u64,
    kernel_descriptor: String,
) -> Result<FieldSample> {
    if gram.rows() != points.len() {
        return Err(Error::Mismatch("Gram size does not match the point count".into()));
    }
    let (l, jitters) = factor_gram(gram)?;
    let n = points.len();
    let mut values = vec![0.0; n_reps * n];
    let mut z = vec![0.0; n];
    for rep in 0..n_reps {
        let mut rng = RandomStream::substream(seed, rep as u64);
        rng.fill_standard_normal(&mut z);
        let row = &mut values[rep * n..(rep + 1) * n];
        for i in 0..n {
            let mut s = 0.0;
            for k in 0..=i {
                s += l[(i, k)] * z[k];
            }
            row[i] = s;
        }
    }
    let generator = if jitters == 0 {
        String::from("dense-cholesky")
    } else {
        format!("dense-cholesky+jitter{jitters}")
    };
    Ok(FieldSample {
        points: points.to_vec(),
        m: 1,
        n_reps,
        values,
        meta: SampleMeta {
            kernel: kernel_descriptor,
            seed,
            generator,
            frame: Frame::TimeDomain,
        },
        grid: None,
    })
}

enum LatticePlan {
    /// Independent draws per site (white noise).
    Direct,
    /// Circulant embedding on an (m0 x m1) torus with the square roots of
    /// the embedding eigenvalues stored spectrally.
    Circulant {
        m0: usize,
        m1: usize,
        sqrt_eig: Vec<f64>,
    },
    /// Dense factorization of the Gram matrix on the grid points.
    Dense { factor: Mat },
}

/// Replicate-at-a-time sampler for stationary kernels on a unit-step integer
/// lattice. Plans the circulant embedding once and falls back to a dense
/// factorization when the embedding is not PSD; the fallback is recorded in
/// the generator tag rather than reported as a failure.
pub struct LatticeSampler {
    grid_sizes: [usize; 2],
    plan: LatticePlan,
    kernel_descriptor: String,
}

fn wrapped_lag(index: usize, period: usize) -> i64 {
    if index <= period / 2 {
        index as i64
    } else {
        index as i64 - period as i64
    }
}

impl LatticeSampler {
    pub fn plan(kernel: &CovarianceKernel, grid: &LatticeGrid) -> Result<Self> {
        kernel.validate()?;
        if !kernel.is_stationary() {
            return Err(Error::Parameter(
                "lattice sampler requires a stationary kernel".into(),
            ));
        }
        if !grid.is_unit_integer() {
            return Err(Error::Parameter(
                "lattice sampler requires unit-step integer axes starting at 1".into(),
            ));
        }
        if grid.dim() != 2 {
            return Err(Error::Parameter("lattice sampler is two-dimensional".into()));
        }
        let n0 = grid.axes()[0].len();
        let n1 = grid.axes()[1].len();
        let descriptor = kernel.descriptor();
        if matches!(kernel, CovarianceKernel::WhiteNoise { .. }) {
            return Ok(LatticeSampler {
                grid_sizes: [n0, n1],
                plan: LatticePlan::Direct,
                kernel_descriptor: descriptor,
            });
        }
        let lag_cov: &dyn Fn(i64, i64) -> f64 = match kernel {
            CovarianceKernel::LatticeIsotropicLrd { q } => {
                let q = *q;
                &move |i, j| isotropic_lrd_cov(q, i, j)
            }
            CovarianceKernel::LatticeSeparable { axis0, axis1 } => {
                let (a0, a1) = (axis0.clone(), axis1.clone());
                &move |i, j| a0.eval(i) * a1.eval(j)
            }
            _ => {
                return Err(Error::Parameter(
                    "no lattice law for this kernel".into(),
                ))
            }
        };
        let m0 = (2 * n0).next_power_of_two();
        let m1 = (2 * n1).next_power_of_two();
        let mut re = vec![0.0; m0 * m1];
        let mut im = vec![0.0; m0 * m1];
        for a in 0..m0 {
            let ka = wrapped_lag(a, m0);
            for b in 0..m1 {
                let kb = wrapped_lag(b, m1);
                re[a * m1 + b] = lag_cov(ka, kb);
            }
        }
        fft::fft2_inplace(&mut re, &mut im, m0, m1, false);
        let max_eig = re.iter().fold(0.0f64, |m, &v| m.max(v));
        let min_eig = re.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        if min_eig >= -1e-9 * max_eig {
            let sqrt_eig: Vec<f64> = re.iter().map(|&v| math::sqrt(v.max(0.0))).collect();
            Ok(LatticeSampler {
                grid_sizes: [n0, n1],
                plan: LatticePlan::Circulant { m0, m1, sqrt_eig },
                kernel_descriptor: descriptor,
            })
        } else {
            let gram = gram_matrix(kernel, &grid.points())?;
            let (factor, _) = factor_gram(&gram)?;
            Ok(LatticeSampler {
                grid_sizes: [n0, n1],
                plan: LatticePlan::Dense { factor },
                kernel_descriptor: descriptor,
            })
        }
    }

    pub fn generator_tag(&self) -> &'static str {
        match self.plan {
            LatticePlan::Direct => "direct",
            LatticePlan::Circulant { .. } => "circulant-embedding",
            LatticePlan::Dense { .. } => "dense-fallback",
        }
    }

    pub fn n_points(&self) -> usize {
        self.grid_sizes[0] * self.grid_sizes[1]
    }

    /// One replicate, row-major over the grid, using substream (seed, rep).
    pub fn replicate(&self, seed: u64, rep: u64) -> Vec<f64> {
        let [n0, n1] = self.grid_sizes;
        let mut rng = RandomStream::substream(seed, rep);
        match &self.plan {
            LatticePlan::Direct => {
                let mut out = vec![0.0; n0 * n1];
                rng.fill_standard_normal(&mut out);
                out
            }
            LatticePlan::Circulant { m0, m1, sqrt_eig } => {
                let (m0, m1) = (*m0, *m1);
                let scale = math::sqrt((m0 * m1) as f64);
                let mut re = vec![0.0; m0 * m1];
                let mut im = vec![0.0; m0 * m1];
                for k in 0..m0 * m1 {
                    let s = sqrt_eig[k];
                    re[k] = s * rng.standard_normal();
                    im[k] = s * rng.standard_normal();
                }
                fft::fft2_inplace(&mut re, &mut im, m0, m1, true);
                let mut out = vec![0.0; n0 * n1];
                for a in 0..n0 {
                    for b in 0..n1 {
                        out[a * n1 + b] = scale * re[a * m1 + b];
                    }
                }
                out
            }
            LatticePlan::Dense { factor } => {
                let n = n0 * n1;
                let mut z = vec![0.0; n];
                rng.fill_standard_normal(&mut z);
                let mut out = vec![0.0; n];
                for i in 0..n {
                    let mut s = 0.0;
                    for k in 0..=i {
                        s += factor[(i, k)] * z[k];
                    }
                    out[i] = s;
                }
                out
            }
        }
    }
}

/// Samples a stationary lattice kernel on a rectangular integer grid.
pub fn sample_stationary_lattice(
    kernel: &CovarianceKernel,
    grid: &LatticeGrid,
    n_reps: usize,
    seed: u64,
) -> Result<FieldSample> {
    if n_reps == 0 {
        return Err(Error::Parameter("need at least one replicate".into()));
    }
    let sampler = LatticeSampler::plan(kernel, grid)?;
    let n = sampler.n_points();
    let descriptor = sampler.kernel_descriptor.clone();
    let mut values = vec![0.0; n_reps * n];
    for rep in 0..n_reps {
        let field = sampler.replicate(seed, rep as u64);
        values[rep * n..(rep + 1) * n].copy_from_slice(&field);
    }
    Ok(FieldSample {
        points: grid.points(),
        m: 1,
        n_reps,
        values,
        meta: SampleMeta {
            kernel: descriptor,
            seed,
            generator: String::from(sampler.generator_tag()),
            frame: Frame::TimeDomain,
        },
        grid: Some(grid.clone()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;

    fn levy(h: f64) -> CovarianceKernel {
        CovarianceKernel::LevyFbm { hurst: h, dim: 2 }
    }

    #[test]
    fn levy_unit_radius_variance() {
        for &h in &[0.2, 0.5, 1.0] {
            let v = covariance(&levy(h), &[1.0, 0.0], &[1.0, 0.0]).unwrap();
            assert!(math::abs(v - 1.0) < 1e-15);
        }
    }

    #[test]
    fn levy_orthogonal_points() {
        // H = 1/2: (1 + 1 - sqrt(2))/2.
        let v = covariance(&levy(0.5), &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        let oracle = 0.5 * (2.0 - math::sqrt(2.0));
        assert!(math::abs(v - oracle) < 1e-15);
        assert!(math::abs(v - 0.29289321881345254) < 1e-15);
    }

    #[test]
    fn levy_rejects_bad_hurst() {
        assert!(covariance(&levy(1.5), &[1.0, 0.0], &[0.0, 1.0]).is_err());
        assert!(covariance(&levy(0.0), &[1.0, 0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn sheet_brownian_case_is_min_product() {
        // h = (1/2, 1/2): per-axis Brownian covariance min(t_i, u_i).
        let kernel = CovarianceKernel::FbmSheet {
            hurst: ExponentVector::new(vec![0.5, 0.5]).unwrap(),
        };
        let v = covariance(&kernel, &[1.0, 1.0], &[2.0, 3.0]).unwrap();
        assert!(math::abs(v - 1.0) < 1e-15);
        let mut rng = RandomStream::new(2);
        for _ in 0..50 {
            let t = [rng.uniform_in(0.1, 5.0), rng.uniform_in(0.1, 5.0)];
            let u = [rng.uniform_in(0.1, 5.0), rng.uniform_in(0.1, 5.0)];
            let v = covariance(&kernel, &t, &u).unwrap();
            let oracle = t[0].min(u[0]) * t[1].min(u[1]);
            assert!(math::abs(v - oracle) < 1e-12);
        }
    }

    #[test]
    fn covariance_r_normalization_and_symmetry() {
        for &h in &[0.1, 0.5, 0.9, 1.0] {
            assert!(math::abs(covariance_r(&[0.0, 0.0], h).unwrap() - 1.0) < 1e-15);
        }
        // Even in both arguments.
        let mut rng = RandomStream::new(4);
        for _ in 0..50 {
            let v1 = rng.uniform_in(-2.0, 2.0);
            let v2 = rng.uniform_in(-6.0, 6.0);
            let r = covariance_r(&[v1, v2], 0.7).unwrap();
            assert!(math::abs(r - covariance_r(&[-v1, v2], 0.7).unwrap()) < 1e-14);
            assert!(math::abs(r - covariance_r(&[v1, -v2], 0.7).unwrap()) < 1e-14);
        }
    }

    #[test]
    fn covariance_r_collapses_to_cosine_at_h_one() {
        let r = covariance_r(&[0.0, core::f64::consts::FRAC_PI_2], 1.0).unwrap();
        assert!(math::abs(r) < 1e-15);
        let r2 = covariance_r(&[0.0, 1.2], 1.0).unwrap();
        assert!(math::abs(r2 - math::cos(1.2)) < 1e-15);
    }

    #[test]
    fn covariance_r_half_value() {
        // H = 1/2, v = (1, 0): (e^{1/2} + e^{-1/2} - (e + 1/e - 2)^{1/2})/2.
        // Cross-check through the polar identity: e^{v1 H} R(v) equals the
        // Levy covariance of t=(1,0), u=(e,0), which is (1 + e - (e-1))/2 = 1,
        // so R = e^{-1/2} exactly.
        let r = covariance_r(&[1.0, 0.0], 0.5).unwrap();
        let oracle = 0.5
            * (math::exp(0.5) + math::exp(-0.5)
                - math::sqrt(math::exp(1.0) + math::exp(-1.0) - 2.0));
        assert!(math::abs(r - oracle) < 1e-15);
        assert!(math::abs(r - math::exp(-0.5)) < 1e-15);
        assert!(math::abs(r - 0.6065306597126334) < 1e-15, "r = {r:.16}");
    }

    #[test]
    fn polar_consistency_identity() {
        // cov_levy(t, u) = rho(t)^H rho(u)^H R(ln rho(u) - ln rho(t),
        // theta(u) - theta(t)) — exact, the regression test for the kernel's
        // sign convention.
        let mut rng = RandomStream::new(8);
        for _ in 0..500 {
            let h = rng.uniform_in(0.05, 1.0);
            let t = [rng.uniform_in(-3.0, 3.0), rng.uniform_in(-3.0, 3.0)];
            let u = [rng.uniform_in(-3.0, 3.0), rng.uniform_in(-3.0, 3.0)];
            let (rt, ru) = (math::norm2(&t), math::norm2(&u));
            if rt < 1e-3 || ru < 1e-3 {
                continue;
            }
            let lhs = covariance(&CovarianceKernel::LevyFbm { hurst: h, dim: 2 }, &t, &u).unwrap();
            let dv = [
                math::ln(ru) - math::ln(rt),
                math::atan2(u[1], u[0]) - math::atan2(t[1], t[0]),
            ];
            let rhs = math::pow(rt, h) * math::pow(ru, h) * covariance_r(&dv, h).unwrap();
            let scale = (math::pow(rt, h) * math::pow(ru, h)).max(math::abs(lhs));
            assert!(
                math::abs(lhs - rhs) <= 1e-12 * scale,
                "H={h} t={t:?} u={u:?}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn gram_white_noise_is_identity() {
        let kernel = CovarianceKernel::WhiteNoise { dim: 2 };
        let pts = vec![vec![1.0, 1.0], vec![1.0, 2.0], vec![5.0, 3.0]];
        let g = gram_matrix(&kernel, &pts).unwrap();
        assert!(g.sub(&Mat::identity(3)).max_abs() < 1e-15);
    }

    #[test]
    fn gram_levy_zero_at_origin() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0]];
        let g = gram_matrix(&levy(0.6), &pts).unwrap();
        for j in 0..3 {
            assert_eq!(g[(0, j)], 0.0);
            assert_eq!(g[(j, 0)], 0.0);
        }
    }

    #[test]
    fn gram_polar_h1_matches_cosines() {
        let kernel = CovarianceKernel::PolarStationary { hurst: 1.0 };
        let pts = vec![vec![0.0, 0.3], vec![0.0, 1.4]];
        let g = gram_matrix(&kernel, &pts).unwrap();
        assert!(math::abs(g[(0, 1)] - math::cos(1.1)) < 1e-14);
    }

    #[test]
    fn mss_scaling_of_sheet_kernel() {
        let hurst = ExponentVector::new(vec![0.3, 0.8]).unwrap();
        let kernel = CovarianceKernel::FbmSheet { hurst: hurst.clone() };
        let mut rng = RandomStream::new(12);
        for _ in 0..200 {
            let a = [rng.uniform_in(0.3, 4.0), rng.uniform_in(0.3, 4.0)];
            let t = [rng.uniform_in(0.1, 3.0), rng.uniform_in(0.1, 3.0)];
            let u = [rng.uniform_in(0.1, 3.0), rng.uniform_in(0.1, 3.0)];
            let lhs = covariance(&kernel, &[a[0] * t[0], a[1] * t[1]], &[a[0] * u[0], a[1] * u[1]])
                .unwrap();
            let factor = hurst.power_product(&a);
            let rhs = factor * factor * covariance(&kernel, &t, &u).unwrap();
            assert!(
                math::abs(lhs - rhs) <= 1e-12 * math::abs(lhs).max(1e-6),
                "a={a:?}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn oss_scaling_of_levy_kernel() {
        let kernel = levy(0.45);
        let mut rng = RandomStream::new(13);
        for _ in 0..200 {
            let r = rng.uniform_in(0.2, 5.0);
            let t = [rng.uniform_in(-3.0, 3.0), rng.uniform_in(-3.0, 3.0)];
            let u = [rng.uniform_in(-3.0, 3.0), rng.uniform_in(-3.0, 3.0)];
            let lhs = covariance(&kernel, &[r * t[0], r * t[1]], &[r * u[0], r * u[1]]).unwrap();
            let rhs = math::pow(r, 0.9) * covariance(&kernel, &t, &u).unwrap();
            assert!(math::abs(lhs - rhs) <= 1e-12 * math::abs(lhs).max(1e-6));
        }
    }

    #[test]
    fn psd_sanity_on_random_point_sets() {
        let mut rng = RandomStream::new(17);
        let continuous = [
            levy(0.3),
            levy(0.9),
            CovarianceKernel::WhiteNoise { dim: 2 },
            CovarianceKernel::FbmSheet {
                hurst: ExponentVector::new(vec![0.4, 0.7]).unwrap(),
            },
            CovarianceKernel::PolarStationary { hurst: 0.6 },
        ];
        let lattice = [
            CovarianceKernel::LatticeIsotropicLrd { q: 1.3 },
            CovarianceKernel::LatticeSeparable {
                axis0: Covariance1d::ExpDecay { rho: -0.6 },
                axis1: Covariance1d::Fgn { hurst: 0.8 },
            },
        ];
        let check = |kernel: &CovarianceKernel, pts: &[Vec<f64>]| {
            let g = gram_matrix(kernel, pts).unwrap();
            let eigs = g.symmetric_eigenvalues();
            let floor = -1e-8 * g.trace() / pts.len() as f64;
            assert!(
                eigs[0] >= floor,
                "min eig {} below floor {} for {}",
                eigs[0],
                floor,
                kernel.descriptor()
            );
        };
        for kernel in &continuous {
            let n = 24 + rng.index(41); // up to 64 points
            let pts: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![rng.uniform_in(0.05, 3.0), rng.uniform_in(0.05, 3.0)])
                .collect();
            check(kernel, &pts);
        }
        for kernel in &lattice {
            // Random distinct integer sites.
            let mut pts: Vec<Vec<f64>> = Vec::new();
            while pts.len() < 48 {
                let p = vec![rng.index(12) as f64, rng.index(12) as f64];
                if !pts.contains(&p) {
                    pts.push(p);
                }
            }
            check(kernel, &pts);
        }
    }

    #[test]
    fn lattice_kernels_on_grids() {
        let sep = CovarianceKernel::LatticeSeparable {
            axis0: Covariance1d::ExpDecay { rho: 0.5 },
            axis1: Covariance1d::ExpDecay { rho: 0.5 },
        };
        assert!(math::abs(covariance(&sep, &[2.0, 3.0], &[1.0, 3.0]).unwrap() - 0.5) < 1e-15);
        assert!(covariance(&sep, &[2.5, 3.0], &[1.0, 3.0]).is_err());
        let lrd = CovarianceKernel::LatticeIsotropicLrd { q: 1.0 };
        let v = covariance(&lrd, &[3.0, 4.0], &[2.0, 2.0]).unwrap();
        assert!(math::abs(v - math::pow(6.0, -0.5)) < 1e-15);
    }

    #[test]
    fn tabulated_scalar_sampling() {
        let kernel = CovarianceKernel::Tabulated {
            gram: Mat::from_rows(&[&[4.0]]),
        };
        let sample = sample_gaussian_field(&kernel, &[vec![0.0]], 40_000, 99).unwrap();
        let mut sumsq = 0.0;
        for rep in 0..sample.n_reps {
            let v = sample.value(rep, 0, 0);
            sumsq += v * v;
        }
        let var = sumsq / sample.n_reps as f64;
        // 3*SE for the variance of a Gaussian: 3 * var * sqrt(2/n).
        let band = 3.0 * 4.0 * math::sqrt(2.0 / sample.n_reps as f64);
        assert!(math::abs(var - 4.0) < band, "var {var}");
    }

    #[test]
    fn sampler_reproducible_and_unit_circle_variance() {
        let pts: Vec<Vec<f64>> = (0..8)
            .map(|k| {
                let ang = 2.0 * core::f64::consts::PI * k as f64 / 8.0;
                vec![math::cos(ang), math::sin(ang)]
            })
            .collect();
        let a = sample_gaussian_field(&levy(0.5), &pts, 5000, 7).unwrap();
        let b = sample_gaussian_field(&levy(0.5), &pts, 5000, 7).unwrap();
        assert_eq!(a.values, b.values);
        for p in 0..8 {
            let mut sumsq = 0.0;
            for rep in 0..a.n_reps {
                let v = a.value(rep, p, 0);
                sumsq += v * v;
            }
            let var = sumsq / a.n_reps as f64;
            let band = 3.0 * math::sqrt(2.0 / a.n_reps as f64);
            assert!(math::abs(var - 1.0) < band, "point {p}: var {var}");
        }
    }

    #[test]
    fn white_noise_lattice_lags() {
        let grid = LatticeGrid::integer(&[64, 64]).unwrap();
        let kernel = CovarianceKernel::WhiteNoise { dim: 2 };
        let sample = sample_stationary_lattice(&kernel, &grid, 400, 3).unwrap();
        assert_eq!(sample.meta.generator, "direct");
        // Lag (0,0) ~ 1 and lag (1,0) ~ 0 within 3*SE across all sites.
        let n1 = 64;
        let (mut s0, mut s1, mut count) = (0.0, 0.0, 0usize);
        for rep in 0..sample.n_reps {
            let row = sample.replicate(rep);
            for a in 0..63 {
                for b in 0..64 {
                    s0 += row[a * n1 + b] * row[a * n1 + b];
                    s1 += row[a * n1 + b] * row[(a + 1) * n1 + b];
                    count += 1;
                }
            }
        }
        let lag0 = s0 / count as f64;
        let lag1 = s1 / count as f64;
        assert!(math::abs(lag0 - 1.0) < 0.01, "lag0 {lag0}");
        assert!(math::abs(lag1) < 0.01, "lag1 {lag1}");
    }

    #[test]
    fn separable_lattice_lag_value() {
        let kernel = CovarianceKernel::LatticeSeparable {
            axis0: Covariance1d::ExpDecay { rho: 0.5 },
            axis1: Covariance1d::ExpDecay { rho: 0.5 },
        };
        let grid = LatticeGrid::integer(&[32, 32]).unwrap();
        let sample = sample_stationary_lattice(&kernel, &grid, 600, 11).unwrap();
        assert_eq!(sample.meta.generator, "circulant-embedding");
        let n1 = 32;
        let (mut s1, mut count) = (0.0, 0usize);
        for rep in 0..sample.n_reps {
            let row = sample.replicate(rep);
            for a in 0..31 {
                for b in 0..32 {
                    s1 += row[a * n1 + b] * row[(a + 1) * n1 + b];
                    count += 1;
                }
            }
        }
        let lag1 = s1 / count as f64;
        assert!(math::abs(lag1 - 0.5) < 0.02, "lag-(1,0) {lag1}");
    }

    #[test]
    fn circulant_matches_kernel_covariance() {
        // Empirical covariance between two fixed sites equals the kernel
        // value within 3*SE.
        let kernel = CovarianceKernel::LatticeIsotropicLrd { q: 1.0 };
        let grid = LatticeGrid::integer(&[16, 16]).unwrap();
        let sample = sample_stationary_lattice(&kernel, &grid, 20_000, 19).unwrap();
        assert_eq!(sample.meta.generator, "circulant-embedding");
        let idx = |i: usize, j: usize| i * 16 + j;
        let pairs = [((3, 3), (3, 3)), ((3, 3), (4, 5)), ((2, 10), (9, 1))];
        for &((ai, aj), (bi, bj)) in &pairs {
            let expected = covariance(
                &kernel,
                &[(ai + 1) as f64, (aj + 1) as f64],
                &[(bi + 1) as f64, (bj + 1) as f64],
            )
            .unwrap();
            let (mut s, mut s2) = (0.0, 0.0);
            for rep in 0..sample.n_reps {
                let row = sample.replicate(rep);
                let p = row[idx(ai, aj)] * row[idx(bi, bj)];
                s += p;
                s2 += p * p;
            }
            let mean = s / sample.n_reps as f64;
            let var = s2 / sample.n_reps as f64 - mean * mean;
            let se = math::sqrt(var / sample.n_reps as f64);
            assert!(
                math::abs(mean - expected) < 3.0 * se + 1e-12,
                "pair ({ai},{aj})-({bi},{bj}): {mean} vs {expected} (se {se})"
            );
        }
    }

    #[test]
    fn grid_enumeration_order() {
        let grid = LatticeGrid::integer(&[2, 3]).unwrap();
        let pts = grid.points();
        assert_eq!(pts[0], vec![1.0, 1.0]);
        assert_eq!(pts[1], vec![1.0, 2.0]);
        assert_eq!(pts[2], vec![1.0, 3.0]);
        assert_eq!(pts[3], vec![2.0, 1.0]);
        assert_eq!(pts.len(), 6);
    }

    #[test]
    fn grid_rejects_nonincreasing_axes() {
        assert!(LatticeGrid::new(vec![vec![1.0, 1.0], vec![1.0, 2.0]]).is_err());
    }
}
