//! File formats: field-sample CSV, experiment CSV, and test-report JSON
//! lines. Floats print with 17 significant digits so parsing them back
//! reproduces the exact f64 bits. Output files are written atomically
//! (temp file + rename); `-` streams to standard output.

use std::fs;
use std::io::Write;
use std::path::Path;

use ssrf_core::fields::{FieldSample, Frame, LatticeGrid, SampleMeta};
use ssrf_core::statcheck::TestReport;

use crate::config::CliError;

/// 17 significant digits: enough to round-trip any f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    if x == x.floor() && x.abs() < 1e15 {
        // Integral values print plainly; they re-parse to the same bits.
        format!("{x:.0}")
    } else {
        format!("{x:.16e}")
    }
}

pub fn write_output(path: &str, content: &str) -> Result<(), CliError> {
    if path == "-" {
        print!("{content}");
        std::io::stdout()
            .flush()
            .map_err(|e| CliError::Numeric(format!("stdout write failed: {e}")))?;
        return Ok(());
    }
    let tmp = format!("{path}.tmp.{}", std::process::id());
    fs::write(&tmp, content)
        .map_err(|e| CliError::Numeric(format!("cannot write '{tmp}': {e}")))?;
    fs::rename(&tmp, path)
        .map_err(|e| CliError::Numeric(format!("cannot move output into '{path}': {e}")))?;
    Ok(())
}

/// Serializes a sample: `# key=value` metadata, a header row, then one row
/// per (replicate, point).
pub fn field_sample_to_csv(sample: &FieldSample, extra_meta: &[String]) -> String {
    let d = sample.points.first().map_or(0, |p| p.len());
    let mut out = String::new();
    out.push_str(&format!("# kernel={}\n", sample.meta.kernel));
    out.push_str(&format!("# seed={}\n", sample.meta.seed));
    out.push_str(&format!("# generator={}\n", sample.meta.generator));
    out.push_str(&format!("# frame={}\n", sample.meta.frame.tag()));
    out.push_str(&format!("# m={}\n", sample.m));
    out.push_str(&format!("# reps={}\n", sample.n_reps));
    if let Some(grid) = &sample.grid {
        let dims: Vec<String> = grid.axes().iter().map(|a| a.len().to_string()).collect();
        out.push_str(&format!("# grid={}\n", dims.join("x")));
    }
    for line in extra_meta {
        out.push_str(line);
        out.push('\n');
    }
    out.push_str("rep");
    for i in 1..=d {
        out.push_str(&format!(",coord_{i}"));
    }
    for c in 1..=sample.m {
        out.push_str(&format!(",value_{c}"));
    }
    out.push('\n');
    for rep in 0..sample.n_reps {
        for (p, point) in sample.points.iter().enumerate() {
            out.push_str(&rep.to_string());
            for &x in point {
                out.push(',');
                out.push_str(&fmt_f64(x));
            }
            for c in 0..sample.m {
                out.push(',');
                out.push_str(&fmt_f64(sample.value(rep, p, c)));
            }
            out.push('\n');
        }
    }
    out
}

/// Parses the format written by `field_sample_to_csv`. Rows must be grouped
/// by replicate in order, with an identical point sequence per replicate.
pub fn field_sample_from_csv(text: &str) -> Result<FieldSample, CliError> {
    let mut kernel = String::from("unknown");
    let mut seed = 0u64;
    let mut generator = String::from("unknown");
    let mut frame = Frame::TimeDomain;
    let mut m = 1usize;
    let mut grid_sizes: Option<Vec<usize>> = None;
    let mut header: Option<Vec<String>> = None;
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut n_reps = 0usize;
    let mut row_in_rep = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let meta = meta.trim();
            if let Some((k, v)) = meta.split_once('=') {
                match k.trim() {
                    "kernel" => kernel = v.trim().to_string(),
                    "seed" => {
                        seed = v.trim().parse().map_err(|_| {
                            CliError::Usage(format!("bad seed metadata '{v}'"))
                        })?
                    }
                    "generator" => generator = v.trim().to_string(),
                    "frame" => {
                        frame = match v.trim() {
                            "time" => Frame::TimeDomain,
                            "stationary" => Frame::StationaryDomain,
                            other => {
                                return Err(CliError::Usage(format!(
                                    "unknown frame '{other}'"
                                )))
                            }
                        }
                    }
                    "m" => {
                        m = v.trim().parse().map_err(|_| {
                            CliError::Usage(format!("bad m metadata '{v}'"))
                        })?
                    }
                    "grid" => {
                        grid_sizes = Some(
                            v.trim()
                                .split('x')
                                .map(|part| {
                                    part.parse().map_err(|_| {
                                        CliError::Usage(format!("bad grid metadata '{v}'"))
                                    })
                                })
                                .collect::<Result<_, _>>()?,
                        )
                    }
                    _ => {}
                }
            }
            continue;
        }
        if header.is_none() {
            header = Some(line.split(',').map(|s| s.to_string()).collect());
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let cols = header.as_ref().unwrap().len();
        if fields.len() != cols {
            return Err(CliError::Usage(format!(
                "line {}: expected {cols} fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let rep: usize = fields[0]
            .parse()
            .map_err(|_| CliError::Usage(format!("line {}: bad replicate index", lineno + 1)))?;
        let d = cols - 1 - m;
        let coords: Vec<f64> = fields[1..1 + d]
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::Usage(format!("line {}: bad coordinate", lineno + 1)))?;
        // Rows must be grouped by replicate, in order 0, 1, 2, ...
        if rep + 1 != n_reps {
            if rep != n_reps {
                return Err(CliError::Usage(format!(
                    "line {}: replicate {rep} out of order",
                    lineno + 1
                )));
            }
            if n_reps > 0 && row_in_rep != points.len() {
                return Err(CliError::Usage(format!(
                    "line {}: replicate {} has {} rows, expected {}",
                    lineno + 1,
                    n_reps - 1,
                    row_in_rep,
                    points.len()
                )));
            }
            n_reps += 1;
            row_in_rep = 0;
        }
        if rep == 0 {
            points.push(coords);
        } else {
            // Coordinates must repeat the replicate-0 point sequence.
            if points.get(row_in_rep).map(|p| p.as_slice()) != Some(coords.as_slice()) {
                return Err(CliError::Usage(format!(
                    "line {}: point sequence differs from replicate 0",
                    lineno + 1
                )));
            }
        }
        for s in &fields[1 + d..] {
            values.push(s.parse::<f64>().map_err(|_| {
                CliError::Usage(format!("line {}: bad value", lineno + 1))
            })?);
        }
        row_in_rep += 1;
    }
    if points.is_empty() {
        return Err(CliError::Usage("no data rows in field-sample CSV".into()));
    }
    if values.len() != n_reps * points.len() * m {
        return Err(CliError::Usage(format!(
            "found {} values, expected {} reps x {} points x {m}",
            values.len(),
            n_reps,
            points.len()
        )));
    }
    // Rebuild the integer lattice when the metadata declares one and the
    // point enumeration actually matches it.
    let grid = grid_sizes
        .and_then(|sizes| LatticeGrid::integer(&sizes).ok())
        .filter(|g| g.points() == points);
    Ok(FieldSample {
        points,
        m,
        n_reps,
        values,
        meta: SampleMeta {
            kernel,
            seed,
            generator,
            frame,
        },
        grid,
    })
}

fn json_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// One JSON object per line; field order is fixed so identical reports
/// serialize to identical bytes.
pub fn report_to_json_line(report: &TestReport) -> String {
    let mut out = String::from("{");
    out.push_str(&format!("\"check\":\"{}\"", json_escape(&report.check)));
    out.push_str(&format!(",\"statistic\":{}", fmt_f64(report.statistic)));
    out.push_str(&format!(",\"threshold\":{}", fmt_f64(report.threshold)));
    match report.p_value {
        Some(p) => out.push_str(&format!(",\"p_value\":{}", fmt_f64(p))),
        None => out.push_str(",\"p_value\":null"),
    }
    out.push_str(&format!(",\"pass\":{}", report.pass));
    match report.n_reps {
        Some(n) => out.push_str(&format!(",\"n_reps\":{n}")),
        None => out.push_str(",\"n_reps\":null"),
    }
    match report.seed {
        Some(s) => out.push_str(&format!(",\"seed\":{s}")),
        None => out.push_str(",\"seed\":null"),
    }
    out.push_str(&format!(",\"points\":\"{}\"", json_escape(&report.points)));
    out.push_str(&format!(",\"entries\":{}", report.entries));
    out.push_str(&format!(",\"failures\":{}", report.failures));
    out.push_str(",\"notes\":{");
    for (i, (k, v)) in report.notes.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format!("\"{}\":\"{}\"", json_escape(k), json_escape(v)));
    }
    out.push_str("}}");
    out
}

/// Experiment CSV rows: `n,gamma,t,s,statistic,value,stderr`.
pub struct ExperimentRow {
    pub n: String,
    pub gamma: String,
    pub t: String,
    pub s: String,
    pub statistic: String,
    pub value: f64,
    pub stderr: Option<f64>,
}

pub fn experiment_csv(
    experiment: &str,
    meta: &[String],
    rows: &[ExperimentRow],
) -> String {
    let mut out = String::new();
    out.push_str(&format!("# experiment={experiment}\n"));
    for line in meta {
        out.push_str(line);
        out.push('\n');
    }
    out.push_str("n,gamma,t,s,statistic,value,stderr\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.n,
            row.gamma,
            row.t,
            row.s,
            row.statistic,
            fmt_f64(row.value),
            row.stderr.map(fmt_f64).unwrap_or_default()
        ));
    }
    out
}

/// Reads a whole input file, or errors as usage.
pub fn read_input(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read '{}': {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ssrf_core::fields::{CovarianceKernel, LatticeGrid};

    #[test]
    fn fmt_f64_round_trips_bits() {
        let values = [
            0.1 + 0.2,
            -1.0 / 3.0,
            6.02214076e23,
            1e-300,
            -0.0,
            42.0,
            f64::MIN_POSITIVE,
        ];
        for &v in &values {
            let parsed: f64 = fmt_f64(v).parse().unwrap();
            assert_eq!(parsed.to_bits(), v.to_bits(), "value {v}");
        }
    }

    #[test]
    fn field_sample_csv_round_trip_is_bit_exact() {
        let kernel = CovarianceKernel::LatticeIsotropicLrd { q: 0.8 };
        let grid = LatticeGrid::integer(&[3, 4]).unwrap();
        let sample =
            ssrf_core::fields::sample_stationary_lattice(&kernel, &grid, 7, 123).unwrap();
        let csv = field_sample_to_csv(&sample, &[]);
        let parsed = field_sample_from_csv(&csv).unwrap();
        assert_eq!(parsed.n_reps, sample.n_reps);
        assert_eq!(parsed.points, sample.points);
        for (a, b) in sample.values.iter().zip(&parsed.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(parsed.meta.kernel, sample.meta.kernel);
        assert_eq!(parsed.meta.seed, sample.meta.seed);
        // Serializing the parsed sample reproduces the bytes.
        assert_eq!(field_sample_to_csv(&parsed, &[]), csv);
    }

    #[test]
    fn field_sample_csv_rejects_ragged_replicates() {
        let kernel = CovarianceKernel::WhiteNoise { dim: 2 };
        let grid = LatticeGrid::integer(&[2, 2]).unwrap();
        let sample =
            ssrf_core::fields::sample_stationary_lattice(&kernel, &grid, 2, 5).unwrap();
        let mut csv = field_sample_to_csv(&sample, &[]);
        csv.push_str("0,1,1,0.5\n"); // a stray out-of-order row
        assert!(field_sample_from_csv(&csv).is_err());
    }
}
