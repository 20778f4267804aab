//! `ssrf` — simulate self-similar Gaussian random fields, apply Lamperti
//! transforms, and verify scaling and stationarity properties numerically.
//!
//! Exit codes: 0 success/pass, 1 verification failure, 2 usage or
//! validation error, 3 numeric failure.

mod commands;
mod config;
mod csvio;
mod kernelspec;

use config::CliError;

const USAGE: &str = "\
ssrf <command> [--flag value ...]

commands:
  simulate    draw seeded Monte Carlo replicates of a field
              --model white-noise|levy-fbm|fbm-sheet|polar-stationary|lattice-lrd|lattice-separable
              [--hurst H|h1,h2] [--q Q] [--r1 SPEC --r2 SPEC]
              --grid N1xN2 | --points circle:K|\"x,y;x,y\"  --reps N --seed S [--out PATH]
  transform   apply a Lamperti transform to a field-sample CSV
              --direction mss-fwd|mss-inv|polar-fwd|polar-inv|1d-fwd|1d-inv
              --hurst H|\"h11,h12;h21,h22\" --in PATH [--out PATH]
  verify      run a property check, exit 0 (pass) or 1 (fail)
              --check self-similar|stationary|cocycle|construction|wmss-shift [...]
  estimate    recover exponents
              --target crv|radial|norm-exponent [...]
  sumfield    normalized partial-sum experiment on a lattice field
              --model ... --n n1,n2 --t-grid \"t,s;t,s\" --reps N --seed S
              [--normalize none|sqrt-prod|value:V] [--out PATH]
  scaletrans  scaling-transition sweep: h_hat(gamma) curve plus breakpoint
              diagnostics
              --model ... --gamma-list 0.5,1,2 --n-list 16,32,... [--ratio-window c,C]

Flags may also come from --config FILE (key=value lines); explicit flags
override the file. Seeds are always explicit. --out - streams to stdout.
";

fn run() -> Result<(), CliError> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(command) = args.first() else {
        return config::usage(format!("missing command\n{USAGE}"));
    };
    let rest = &args[1..];
    match command.as_str() {
        "simulate" => commands::cmd_simulate(rest),
        "transform" => commands::cmd_transform(rest),
        "verify" => commands::cmd_verify(rest),
        "estimate" => commands::cmd_estimate(rest),
        "sumfield" => commands::cmd_sumfield(rest),
        "scaletrans" => commands::cmd_scaletrans(rest),
        "help" | "--help" | "-h" => {
            println!("{USAGE}");
            Ok(())
        }
        other => config::usage(format!("unknown command '{other}'\n{USAGE}")),
    }
}

fn main() {
    match run() {
        Ok(()) => {}
        Err(err) => {
            eprintln!("ssrf: {}", err.message());
            std::process::exit(err.exit_code());
        }
    }
}
