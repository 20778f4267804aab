//! Builds kernels and point sets from config values.

use ssrf_core::fields::{Covariance1d, CovarianceKernel, LatticeGrid};
use ssrf_core::regvar::ExponentVector;

use crate::config::{parse_f64, parse_f64_list, parse_f64_rows, usage, CliError, Config};

pub fn build_kernel(cfg: &Config) -> Result<CovarianceKernel, CliError> {
    let model = cfg.require("model")?;
    let kernel = match model {
        "white-noise" => CovarianceKernel::WhiteNoise { dim: 2 },
        "levy-fbm" => CovarianceKernel::LevyFbm {
            hurst: cfg.f64("hurst")?,
            dim: 2,
        },
        "fbm-sheet" => {
            let h = parse_f64_list(cfg.require("hurst")?, "hurst")?;
            CovarianceKernel::FbmSheet {
                hurst: ExponentVector::new(h).map_err(CliError::from)?,
            }
        }
        "polar-stationary" => CovarianceKernel::PolarStationary {
            hurst: cfg.f64("hurst")?,
        },
        "lattice-lrd" => CovarianceKernel::LatticeIsotropicLrd { q: cfg.f64("q")? },
        "lattice-separable" => CovarianceKernel::LatticeSeparable {
            axis0: parse_covariance_1d(cfg.require("r1")?)?,
            axis1: parse_covariance_1d(cfg.require("r2")?)?,
        },
        other => {
            return usage(format!(
                "unknown model '{other}' (expected white-noise, levy-fbm, fbm-sheet, \
                 polar-stationary, lattice-lrd, or lattice-separable)"
            ))
        }
    };
    // Surface parameter violations as usage errors naming the constraint.
    kernel.validate().map_err(CliError::from)?;
    Ok(kernel)
}

pub fn parse_covariance_1d(spec: &str) -> Result<Covariance1d, CliError> {
    let cov = if spec == "white" {
        Covariance1d::White
    } else if let Some(rho) = spec.strip_prefix("exp:") {
        Covariance1d::ExpDecay {
            rho: parse_f64(rho, "r1/r2")?,
        }
    } else if let Some(h) = spec.strip_prefix("fgn:") {
        Covariance1d::Fgn {
            hurst: parse_f64(h, "r1/r2")?,
        }
    } else {
        return usage(format!(
            "unknown 1-D covariance '{spec}' (expected white, exp:RHO, or fgn:H)"
        ));
    };
    cov.validate().map_err(CliError::from)?;
    Ok(cov)
}

pub enum PointSet {
    Grid(LatticeGrid),
    Explicit(Vec<Vec<f64>>),
}

impl PointSet {
    pub fn points(&self) -> Vec<Vec<f64>> {
        match self {
            PointSet::Grid(g) => g.points(),
            PointSet::Explicit(p) => p.clone(),
        }
    }
}

/// `--grid N1xN2` or `--points circle:K` / `--points "x,y;x,y;..."`.
pub fn build_point_set(cfg: &Config) -> Result<PointSet, CliError> {
    match (cfg.get("grid"), cfg.get("points")) {
        (Some(_), Some(_)) => usage("give either --grid or --points, not both"),
        (Some(grid), None) => {
            let sizes: Vec<usize> = grid
                .split('x')
                .map(|part| {
                    part.parse()
                        .map_err(|_| CliError::Usage(format!("bad grid size '{part}'")))
                })
                .collect::<Result<_, _>>()?;
            if sizes.len() != 2 {
                return usage("--grid takes the form N1xN2");
            }
            Ok(PointSet::Grid(
                LatticeGrid::integer(&sizes).map_err(CliError::from)?,
            ))
        }
        (None, Some(points)) => {
            if let Some(count) = points.strip_prefix("circle:") {
                let k: usize = count
                    .parse()
                    .map_err(|_| CliError::Usage(format!("bad circle count '{count}'")))?;
                if k == 0 {
                    return usage("circle point count must be positive");
                }
                Ok(PointSet::Explicit(
                    (0..k)
                        .map(|i| {
                            let ang = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
                            vec![ang.cos(), ang.sin()]
                        })
                        .collect(),
                ))
            } else {
                let rows = parse_f64_rows(points, "points")?;
                if rows.is_empty() {
                    return usage("--points list is empty");
                }
                Ok(PointSet::Explicit(rows))
            }
        }
        (None, None) => usage("missing --grid or --points"),
    }
}
