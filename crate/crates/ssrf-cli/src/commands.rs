//! Subcommand implementations.

use std::path::Path;

use ssrf_core::attraction::{
    breakpoint_scan, check_ratio_condition, exact_sum_variance, fit_normalization_exponent,
    gamma_rectangle, run_partial_sum_experiment, Normalization, RatioWindow,
};
use ssrf_core::fields::{
    covariance, sample_gaussian_field, sample_stationary_lattice, CovarianceKernel, HurstMatrix,
};
use ssrf_core::lamperti::{
    check_cocycle, check_construction_conditions, check_wmss_shift_equation, transform_field_sample,
    CocycleSpec, DiagonalGroupElement, TimeChange, TransformDirection, TransformExponents,
};
use ssrf_core::regvar::{
    check_radial_variation, estimate_crv_exponents, CrvfSpec, ExponentVector, SlowVaryingSpec,
    UnivariateSvf,
};
use ssrf_core::rng::RandomStream;
use ssrf_core::statcheck::{
    check_self_similarity_kernel, check_stationarity_kernel, points_descriptor, TestReport,
};

use crate::config::{
    parse_f64, parse_f64_list, parse_f64_rows, parse_u32_list, usage, CliError, Config,
};
use crate::csvio::{
    experiment_csv, field_sample_from_csv, field_sample_to_csv, fmt_f64, read_input,
    report_to_json_line, write_output, ExperimentRow,
};
use crate::kernelspec::{build_kernel, build_point_set, PointSet};

const SIMULATE_KEYS: &[&str] = &[
    "model", "hurst", "q", "r1", "r2", "grid", "points", "reps", "seed", "out",
];

pub fn cmd_simulate(args: &[String]) -> Result<(), CliError> {
    let cfg = Config::parse("simulate", args, SIMULATE_KEYS)?;
    let kernel = build_kernel(&cfg)?;
    let point_set = build_point_set(&cfg)?;
    let n_reps = cfg.usize("reps")?;
    let seed = cfg.seed()?;
    let sample = match (&point_set, kernel.is_stationary() && kernel.dim() == 2) {
        (PointSet::Grid(grid), true) => {
            sample_stationary_lattice(&kernel, grid, n_reps, seed).map_err(CliError::from)?
        }
        _ => sample_gaussian_field(&kernel, &point_set.points(), n_reps, seed)
            .map_err(CliError::from)?,
    };
    write_output(cfg.out(), &field_sample_to_csv(&sample, &cfg.echo_lines()))
}

const TRANSFORM_KEYS: &[&str] = &["direction", "hurst", "in", "out"];

pub fn cmd_transform(args: &[String]) -> Result<(), CliError> {
    let cfg = Config::parse("transform", args, TRANSFORM_KEYS)?;
    let direction = match cfg.require("direction")? {
        "mss-fwd" => TransformDirection::MssForward,
        "mss-inv" => TransformDirection::MssInverse,
        "polar-fwd" => TransformDirection::PolarForward,
        "polar-inv" => TransformDirection::PolarInverse,
        "1d-fwd" => TransformDirection::OneDForward,
        "1d-inv" => TransformDirection::OneDInverse,
        other => return usage(format!("unknown direction '{other}'")),
    };
    let hurst_text = cfg.require("hurst")?;
    let exponents = match direction {
        TransformDirection::MssForward | TransformDirection::MssInverse => {
            TransformExponents::Matrix(
                HurstMatrix::new(parse_f64_rows(hurst_text, "hurst")?).map_err(CliError::from)?,
            )
        }
        _ => TransformExponents::Scalar(parse_f64(hurst_text, "hurst")?),
    };
    let input = read_input(Path::new(cfg.require("in")?))?;
    let sample = field_sample_from_csv(&input)?;
    let transformed =
        transform_field_sample(&sample, direction, &exponents).map_err(CliError::from)?;
    write_output(
        cfg.out(),
        &field_sample_to_csv(&transformed, &cfg.echo_lines()),
    )
}

const VERIFY_KEYS: &[&str] = &[
    "check",
    "model",
    "hurst",
    "q",
    "r1",
    "r2",
    "scale",
    "claim-hurst",
    "shift",
    "hurst-matrix",
    "hurst-row",
    "d-const",
    "g1",
    "g2",
    "s",
    "h",
    "pairs",
    "points",
    "grid",
    "tol",
    "seed",
    "out",
];

fn default_orthant_points() -> Vec<Vec<f64>> {
    vec![
        vec![0.5, 1.0],
        vec![1.0, 2.0],
        vec![2.0, 0.7],
        vec![3.0, 3.0],
    ]
}

fn emit_report(cfg: &Config, report: &TestReport) -> Result<(), CliError> {
    let mut out = String::new();
    for line in cfg.echo_lines() {
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str(&report_to_json_line(report));
    out.push('\n');
    write_output(cfg.out(), &out)?;
    if report.pass {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "{} check failed: statistic {} against threshold {}",
            report.check,
            fmt_f64(report.statistic),
            fmt_f64(report.threshold)
        )))
    }
}

pub fn cmd_verify(args: &[String]) -> Result<(), CliError> {
    let cfg = Config::parse("verify", args, VERIFY_KEYS)?;
    let tol = cfg.f64_or("tol", 1e-12)?;
    match cfg.require("check")? {
        "self-similar" => {
            let kernel = build_kernel(&cfg)?;
            let scale = parse_f64_list(cfg.require("scale")?, "scale")?;
            let (a, cocycle_row) = match &kernel {
                CovarianceKernel::FbmSheet { hurst } => {
                    if scale.len() != hurst.dim() {
                        return usage("--scale dimension must match the sheet exponents");
                    }
                    let row = match cfg.get("claim-hurst") {
                        Some(text) => parse_f64_list(text, "claim-hurst")?,
                        None => hurst.entries().to_vec(),
                    };
                    (scale.clone(), row)
                }
                CovarianceKernel::LevyFbm { hurst, dim } => {
                    // Isotropic scaling a = (r, ..., r); the diagonal cocycle
                    // splits H evenly across coordinates.
                    if scale.len() != 1 {
                        return usage("levy-fbm scaling is isotropic: give a single --scale r");
                    }
                    let claimed = match cfg.get("claim-hurst") {
                        Some(text) => parse_f64(text, "claim-hurst")?,
                        None => *hurst,
                    };
                    (
                        vec![scale[0]; *dim],
                        vec![claimed / *dim as f64; *dim],
                    )
                }
                _ => return usage("self-similar check supports fbm-sheet and levy-fbm"),
            };
            let a = DiagonalGroupElement::new(a).map_err(CliError::from)?;
            let cocycle =
                CocycleSpec::new(HurstMatrix::new(vec![cocycle_row]).map_err(CliError::from)?);
            let points = match (cfg.get("points"), cfg.get("grid")) {
                (None, None) => default_orthant_points(),
                _ => build_point_set(&cfg)?.points(),
            };
            let report = check_self_similarity_kernel(&kernel, &a, &cocycle, &points, tol)
                .map_err(CliError::from)?;
            emit_report(&cfg, &report)
        }
        "stationary" => {
            let kernel = build_kernel(&cfg)?;
            let shift = parse_f64_list(cfg.require("shift")?, "shift")?;
            let points = match (cfg.get("points"), cfg.get("grid")) {
                (None, None) => default_orthant_points(),
                _ => build_point_set(&cfg)?.points(),
            };
            let report = check_stationarity_kernel(
                |t, u| covariance(&kernel, t, u),
                &shift,
                &points,
                tol,
            )
            .map_err(CliError::from)?;
            emit_report(&cfg, &report)
        }
        "cocycle" => {
            let hurst = HurstMatrix::new(parse_f64_rows(cfg.require("hurst-matrix")?, "hurst-matrix")?)
                .map_err(CliError::from)?;
            let cocycle = CocycleSpec::new(hurst.clone());
            let residual = match (cfg.get("g1"), cfg.get("g2")) {
                (Some(g1), Some(g2)) => check_cocycle(
                    &cocycle,
                    &DiagonalGroupElement::new(parse_f64_list(g1, "g1")?)
                        .map_err(CliError::from)?,
                    &DiagonalGroupElement::new(parse_f64_list(g2, "g2")?)
                        .map_err(CliError::from)?,
                )
                .map_err(CliError::from)?,
                (None, None) => {
                    // Randomized sweep with an explicit seed.
                    let mut rng = RandomStream::new(cfg.seed()?);
                    let mut worst = 0.0f64;
                    for _ in 0..256 {
                        let sample_el = |rng: &mut RandomStream| {
                            DiagonalGroupElement::new(
                                (0..hurst.dim()).map(|_| rng.uniform_in(0.2, 5.0)).collect(),
                            )
                            .unwrap()
                        };
                        let g1 = sample_el(&mut rng);
                        let g2 = sample_el(&mut rng);
                        worst = worst
                            .max(check_cocycle(&cocycle, &g1, &g2).map_err(CliError::from)?);
                    }
                    worst
                }
                _ => return usage("give both --g1 and --g2, or neither (randomized with --seed)"),
            };
            let mut report = TestReport {
                check: "cocycle".into(),
                statistic: residual,
                threshold: tol,
                p_value: None,
                pass: residual <= tol,
                n_reps: None,
                seed: cfg.get("seed").and_then(|s| s.parse().ok()),
                points: String::new(),
                entries: 0,
                failures: 0,
                notes: vec![],
            };
            report
                .notes
                .push(("hurst-matrix".into(), cfg.require("hurst-matrix")?.to_string()));
            emit_report(&cfg, &report)
        }
        "construction" => {
            let hurst = HurstMatrix::new(parse_f64_rows(cfg.require("hurst-matrix")?, "hurst-matrix")?)
                .map_err(CliError::from)?;
            let dim = hurst.dim();
            let cocycle = CocycleSpec::new(hurst);
            let s = parse_f64_list(cfg.require("s")?, "s")?;
            let h = parse_f64_list(cfg.require("h")?, "h")?;
            let res =
                check_construction_conditions(&cocycle, TimeChange::ExpOrthant { dim }, &h, &s)
                    .map_err(CliError::from)?;
            let worst = res.commutation.max(res.cocycle_compat);
            let report = TestReport {
                check: "construction".into(),
                statistic: worst,
                threshold: tol,
                p_value: None,
                pass: worst <= tol,
                n_reps: None,
                seed: None,
                points: String::new(),
                entries: 0,
                failures: 0,
                notes: vec![
                    ("commutation".into(), fmt_f64(res.commutation)),
                    ("cocycle_compat".into(), fmt_f64(res.cocycle_compat)),
                ],
            };
            emit_report(&cfg, &report)
        }
        "wmss-shift" => {
            let h_row = parse_f64_list(cfg.require("hurst-row")?, "hurst-row")?;
            let d_const = cfg.f64("d-const")?;
            let pairs: Vec<(Vec<f64>, Vec<f64>)> = match cfg.get("pairs") {
                Some(text) => text
                    .split(';')
                    .map(|pair| {
                        let (a, b) = pair.split_once(':').ok_or_else(|| {
                            CliError::Usage(format!("pair '{pair}' is not a:b"))
                        })?;
                        Ok((parse_f64_list(a, "pairs")?, parse_f64_list(b, "pairs")?))
                    })
                    .collect::<Result<_, CliError>>()?,
                None => {
                    let mut rng = RandomStream::new(cfg.seed()?);
                    (0..256)
                        .map(|_| {
                            (
                                (0..h_row.len()).map(|_| rng.uniform_in(0.5, 2.0)).collect(),
                                (0..h_row.len()).map(|_| rng.uniform_in(0.5, 2.0)).collect(),
                            )
                        })
                        .collect()
                }
            };
            let residual =
                check_wmss_shift_equation(&h_row, d_const, &pairs).map_err(CliError::from)?;
            let report = TestReport {
                check: "wmss-shift".into(),
                statistic: residual,
                threshold: tol,
                p_value: None,
                pass: residual <= tol,
                n_reps: None,
                seed: cfg.get("seed").and_then(|s| s.parse().ok()),
                points: format!("{} pairs", pairs.len()),
                entries: 0,
                failures: 0,
                notes: vec![("d-const".into(), fmt_f64(d_const))],
            };
            emit_report(&cfg, &report)
        }
        other => usage(format!(
            "unknown check '{other}' (expected self-similar, stationary, cocycle, construction, \
             or wmss-shift)"
        )),
    }
}

const ESTIMATE_KEYS: &[&str] = &[
    "target", "hurst", "slow", "base", "levels", "anchor", "rho", "x", "model", "q", "r1", "r2",
    "gamma", "n-list", "out",
];

fn parse_slow_spec(text: &str) -> Result<SlowVaryingSpec, CliError> {
    if let Some(c) = text.strip_prefix("const:") {
        return Ok(SlowVaryingSpec::Constant(parse_f64(c, "slow")?));
    }
    let parse_factors = |list: &str| -> Result<Vec<UnivariateSvf>, CliError> {
        list.split(',')
            .map(|tag| match tag.trim() {
                "log" => Ok(UnivariateSvf::Log),
                "iterlog" => Ok(UnivariateSvf::IterLog),
                "const" => Ok(UnivariateSvf::Constant(1.0)),
                other => {
                    if let Some(c) = other.strip_prefix("const:") {
                        Ok(UnivariateSvf::Constant(parse_f64(c, "slow")?))
                    } else {
                        usage(format!("unknown slow factor '{other}'"))
                    }
                }
            })
            .collect()
    };
    if let Some(list) = text.strip_prefix("product:") {
        Ok(SlowVaryingSpec::Product(parse_factors(list)?))
    } else if let Some(list) = text.strip_prefix("sum:") {
        Ok(SlowVaryingSpec::Sum(parse_factors(list)?))
    } else {
        usage(format!(
            "unknown slow part '{text}' (expected const:C, product:..., or sum:...)"
        ))
    }
}

pub fn cmd_estimate(args: &[String]) -> Result<(), CliError> {
    let cfg = Config::parse("estimate", args, ESTIMATE_KEYS)?;
    match cfg.require("target")? {
        "crv" => {
            let h = parse_f64_list(cfg.require("hurst")?, "hurst")?;
            let slow = match cfg.get("slow") {
                Some(text) => parse_slow_spec(text)?,
                None => SlowVaryingSpec::Constant(1.0),
            };
            let spec = CrvfSpec::new(
                ExponentVector::new_nonnegative(h.clone()).map_err(CliError::from)?,
                slow,
            )
            .map_err(CliError::from)?;
            let base = cfg.f64_or("base", 2.0)?;
            let levels = cfg.get("levels").map_or(Ok(16), |v| {
                v.parse::<usize>()
                    .map_err(|_| CliError::Usage("--levels must be an integer".into()))
            })?;
            let anchor = match cfg.get("anchor") {
                Some(text) => parse_f64_list(text, "anchor")?,
                None => vec![1.0; h.len()],
            };
            let est = estimate_crv_exponents(|t| spec.eval(t), base, levels, &anchor)
                .map_err(CliError::from)?;
            let mut rows = Vec::new();
            for (axis, (&hat, &r2)) in est.exponents.iter().zip(&est.residual_diag).enumerate() {
                rows.push(ExperimentRow {
                    n: String::new(),
                    gamma: String::new(),
                    t: format!("{}", axis + 1),
                    s: String::new(),
                    statistic: "h_hat".into(),
                    value: hat,
                    stderr: None,
                });
                rows.push(ExperimentRow {
                    n: String::new(),
                    gamma: String::new(),
                    t: format!("{}", axis + 1),
                    s: String::new(),
                    statistic: "fit_r2".into(),
                    value: r2,
                    stderr: None,
                });
            }
            write_output(
                cfg.out(),
                &experiment_csv("estimate-crv", &cfg.echo_lines(), &rows),
            )
        }
        "radial" => {
            let rho = cfg.f64("rho")?;
            let slow = match cfg.get("slow") {
                Some("log") => UnivariateSvf::Log,
                Some("iterlog") => UnivariateSvf::IterLog,
                Some(other) => {
                    if let Some(c) = other.strip_prefix("const:") {
                        UnivariateSvf::Constant(parse_f64(c, "slow")?)
                    } else {
                        return usage(format!("unknown radial slow factor '{other}'"));
                    }
                }
                None => UnivariateSvf::Constant(1.0),
            };
            let x = parse_f64_list(cfg.require("x")?, "x")?;
            let f = move |p: &[f64]| -> ssrf_core::Result<f64> {
                let r = ssrf_core::math::norm2(p);
                Ok(ssrf_core::math::pow(r, rho) * slow.eval(r))
            };
            let levels = cfg.get("levels").map_or(Ok(16), |v| {
                v.parse::<usize>()
                    .map_err(|_| CliError::Usage("--levels must be an integer".into()))
            })?;
            let base = cfg.f64_or("base", 2.0)?;
            let grid: Vec<f64> = (0..levels)
                .map(|k| ssrf_core::math::pow(base, 16.0 + k as f64))
                .collect();
            let est = check_radial_variation(f, &x, &grid).map_err(CliError::from)?;
            let rows = vec![
                ExperimentRow {
                    n: String::new(),
                    gamma: String::new(),
                    t: String::new(),
                    s: String::new(),
                    statistic: "phi_hat".into(),
                    value: est.phi,
                    stderr: None,
                },
                ExperimentRow {
                    n: String::new(),
                    gamma: String::new(),
                    t: String::new(),
                    s: String::new(),
                    statistic: "rho_hat".into(),
                    value: est.rho,
                    stderr: None,
                },
            ];
            write_output(
                cfg.out(),
                &experiment_csv("estimate-radial", &cfg.echo_lines(), &rows),
            )
        }
        "norm-exponent" => {
            let kernel = build_kernel(&cfg)?;
            let gamma = cfg.f64("gamma")?;
            let n_list = parse_u32_list(cfg.require("n-list")?, "n-list")?;
            let fit =
                fit_normalization_exponent(&kernel, gamma, &n_list).map_err(CliError::from)?;
            let mut rows = vec![
                ExperimentRow {
                    n: String::new(),
                    gamma: format!("{gamma}"),
                    t: String::new(),
                    s: String::new(),
                    statistic: "h_hat".into(),
                    value: fit.exponent,
                    stderr: None,
                },
                ExperimentRow {
                    n: String::new(),
                    gamma: format!("{gamma}"),
                    t: String::new(),
                    s: String::new(),
                    statistic: "fit_r2".into(),
                    value: fit.r_squared,
                    stderr: None,
                },
            ];
            if fit.nonpositive_warning {
                rows.push(ExperimentRow {
                    n: String::new(),
                    gamma: format!("{gamma}"),
                    t: String::new(),
                    s: String::new(),
                    statistic: "warning_nonpositive_exponent".into(),
                    value: 1.0,
                    stderr: None,
                });
            }
            write_output(
                cfg.out(),
                &experiment_csv("estimate-norm-exponent", &cfg.echo_lines(), &rows),
            )
        }
        other => usage(format!(
            "unknown target '{other}' (expected crv, radial, or norm-exponent)"
        )),
    }
}

const SUMFIELD_KEYS: &[&str] = &[
    "model", "hurst", "q", "r1", "r2", "n", "t-grid", "reps", "seed", "normalize", "out",
];

fn parse_normalization(text: Option<&str>) -> Result<Normalization, CliError> {
    Ok(match text {
        None | Some("none") => Normalization::None,
        Some("sqrt-prod") => Normalization::SqrtBoxProduct,
        Some(other) => {
            if let Some(v) = other.strip_prefix("value:") {
                Normalization::Fixed(parse_f64(v, "normalize")?)
            } else {
                return usage(format!(
                    "unknown normalization '{other}' (expected none, sqrt-prod, or value:V)"
                ));
            }
        }
    })
}

pub fn cmd_sumfield(args: &[String]) -> Result<(), CliError> {
    let cfg = Config::parse("sumfield", args, SUMFIELD_KEYS)?;
    let kernel = build_kernel(&cfg)?;
    let n = parse_u32_list(cfg.require("n")?, "n")?;
    let t_grid = parse_f64_rows(cfg.require("t-grid")?, "t-grid")?;
    let n_reps = cfg.usize("reps")?;
    let seed = cfg.seed()?;
    let normalization = parse_normalization(cfg.get("normalize"))?;
    let result = run_partial_sum_experiment(&kernel, &n, &t_grid, &normalization, n_reps, seed)
        .map_err(CliError::from)?;
    let n_string = n
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("x");
    let mut rows = Vec::new();
    for (i, t) in result.t_grid.iter().enumerate() {
        rows.push(ExperimentRow {
            n: n_string.clone(),
            gamma: String::new(),
            t: fmt_f64(t[0]),
            s: fmt_f64(t[1]),
            statistic: "mean".into(),
            value: result.mean[i],
            stderr: None,
        });
        rows.push(ExperimentRow {
            n: n_string.clone(),
            gamma: String::new(),
            t: fmt_f64(t[0]),
            s: fmt_f64(t[1]),
            statistic: "var".into(),
            value: result.cov[(i, i)],
            stderr: Some(result.se[(i, i)]),
        });
    }
    let mut meta = cfg.echo_lines();
    meta.push(format!("# normalizer={}", fmt_f64(result.normalizer)));
    meta.push(format!("# points={}", points_descriptor(&result.t_grid)));
    write_output(cfg.out(), &experiment_csv("sumfield", &meta, &rows))
}

const SCALETRANS_KEYS: &[&str] = &[
    "model", "hurst", "q", "r1", "r2", "gamma-list", "n-list", "ratio-window", "out",
];

pub fn cmd_scaletrans(args: &[String]) -> Result<(), CliError> {
    let cfg = Config::parse("scaletrans", args, SCALETRANS_KEYS)?;
    let kernel = build_kernel(&cfg)?;
    let gammas = parse_f64_list(cfg.require("gamma-list")?, "gamma-list")?;
    let n_list = parse_u32_list(cfg.require("n-list")?, "n-list")?;
    let mut meta = cfg.echo_lines();
    let mut rows = Vec::new();
    let mut h_curve = Vec::with_capacity(gammas.len());
    for &gamma in &gammas {
        for &n in &n_list {
            let (n0, n1) = gamma_rectangle(n, gamma).map_err(CliError::from)?;
            let var = exact_sum_variance(&kernel, n0, n1).map_err(CliError::from)?;
            rows.push(ExperimentRow {
                n: n.to_string(),
                gamma: format!("{gamma}"),
                t: "1".into(),
                s: "1".into(),
                statistic: "exact_var".into(),
                value: var,
                stderr: None,
            });
        }
        let fit = fit_normalization_exponent(&kernel, gamma, &n_list).map_err(CliError::from)?;
        h_curve.push(fit.exponent);
        rows.push(ExperimentRow {
            n: n_list.last().unwrap().to_string(),
            gamma: format!("{gamma}"),
            t: String::new(),
            s: String::new(),
            statistic: "h_hat".into(),
            value: fit.exponent,
            stderr: None,
        });
        rows.push(ExperimentRow {
            n: n_list.last().unwrap().to_string(),
            gamma: format!("{gamma}"),
            t: String::new(),
            s: String::new(),
            statistic: "fit_r2".into(),
            value: fit.r_squared,
            stderr: None,
        });
        if fit.nonpositive_warning {
            meta.push(format!("# warning=nonpositive-exponent gamma={gamma}"));
        }
    }
    if gammas.len() >= 5 {
        if let Ok(diag) = breakpoint_scan(&gammas, &h_curve) {
            meta.push(format!("# breakpoint_gamma0={}", fmt_f64(diag.gamma0)));
            meta.push(format!(
                "# breakpoint_improvement={}",
                fmt_f64(diag.improvement)
            ));
            meta.push(format!(
                "# breakpoint_slopes={},{}",
                fmt_f64(diag.left_slope),
                fmt_f64(diag.right_slope)
            ));
        }
    }
    if let Some(window_text) = cfg.get("ratio-window") {
        let bounds = parse_f64_list(window_text, "ratio-window")?;
        if bounds.len() != 2 {
            return usage("--ratio-window takes c,C");
        }
        let window = RatioWindow::new(bounds[0], bounds[1]).map_err(CliError::from)?;
        for &gamma in &gammas {
            let pairs: Vec<(f64, f64)> = n_list
                .iter()
                .map(|&n| {
                    let (n0, n1) = gamma_rectangle(n, gamma).unwrap();
                    (n0 as f64, n1 as f64)
                })
                .collect();
            if !check_ratio_condition(&pairs, &window) {
                let warning = format!("ratio-condition-violated gamma={gamma}");
                meta.push(format!("# warning={warning}"));
                eprintln!(
                    "warning: aspect-ratio condition violated for gamma={gamma}; \
                     limits along this schedule may exhibit a scaling transition"
                );
            }
        }
    }
    write_output(cfg.out(), &experiment_csv("scaletrans", &meta, &rows))
}
