//! `molchanov`: file-based front end to the experiments in `molchanov-core`.
//!
//! Exit status: 0 success, 2 negative verdict (a witness against the
//! condition, a failed hypothesis, a failed block or window), 1 runtime
//! error, 64 invalid invocation or parameters.

mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_NEGATIVE: u8 = 2;
pub const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug, Serialize)]
#[command(name = "molchanov", version, about = "Spectral experiments for Sturm-Liouville operators with complex potentials")]
pub struct Cli {
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Table echoed to stdout after the run.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Window integrals of |q|^w and the Molchanov verdict.
    CheckMolchanov(CheckMolchanov),
    /// Sector fit of arg(q - q0).
    ClassifySector(ClassifySector),
    /// Hypotheses of the sectorial compactness theorem and the ρ-estimate.
    Theorem4Check(Theorem4Check),
    /// Eigenvalues and singular values of the discretized operator.
    Spectrum(Spectrum),
    /// Singular values of the operator or of a resolvent, with Weyl checks.
    Svd(Svd),
    /// Domain-growth compactness diagnostic.
    Diagnose(Diagnose),
    /// Schedule n_k and witnesses for the purely imaginary step potential.
    Counterexample(Counterexample),
    /// Bump functions from restricted Cauchy operators over disjoint windows.
    Cauchy(Cauchy),
    /// Re-run the invocation recorded in a manifest.
    Replay(Replay),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PotentialArgs {
    /// Named potential or path to a potential JSON file.
    #[arg(long)]
    pub potential: String,
    /// Parameters of a named potential.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub params: Vec<f64>,
    /// Domain end for a named potential (default 100 where no other flag sets it).
    #[arg(long)]
    pub domain_end: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
pub struct CheckMolchanov {
    #[command(flatten)]
    pub potential: PotentialArgs,
    /// Window length.
    #[arg(long)]
    pub d: f64,
    /// Number of windows; sets the domain end to K·d for named potentials.
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// Exponent of |q|: 1 or 0.5.
    #[arg(long, default_value_t = 1.0)]
    pub w: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 0.25)]
    pub tail_fraction: f64,
    #[arg(long, default_value_t = 2.0)]
    pub growth_factor: f64,
    /// Also scan shifted window systems.
    #[arg(long)]
    pub search: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct ClassifySector {
    #[command(flatten)]
    pub potential: PotentialArgs,
    /// Candidate vertices `re,im`; repeat the flag for several.
    #[arg(long = "q0", value_parser = parse_complex, allow_hyphen_values = true)]
    pub q0: Vec<[f64; 2]>,
    #[arg(long, default_value_t = 0.0)]
    pub x0: f64,
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct Theorem4Check {
    #[command(flatten)]
    pub potential: PotentialArgs,
    #[arg(long, default_value_t = 0.0)]
    pub x0: f64,
    /// κ in radians.
    #[arg(long)]
    pub kappa: f64,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OperatorArgs {
    #[command(flatten)]
    pub potential: PotentialArgs,
    /// Right end of the truncated interval.
    #[arg(long = "X")]
    pub x_end: f64,
    /// Interior grid nodes.
    #[arg(long = "N")]
    pub n: usize,
    /// `dirichlet`, `neumann`, or `robin:A,B` for `A y(0) + B y'(0) = 0`.
    #[arg(long, default_value = "dirichlet")]
    pub bc: String,
}

#[derive(Args, Debug, Serialize)]
pub struct Spectrum {
    #[command(flatten)]
    pub op: OperatorArgs,
    /// Also write the matrix as (i, j, re, im) triplets with a JSON header.
    #[arg(long)]
    pub export_matrix: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct Svd {
    #[command(flatten)]
    pub op: OperatorArgs,
    /// Use the resolvent at this point `re,im` instead of the operator.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub resolvent: Option<[f64; 2]>,
    /// Number of leading singular values for the resolvent.
    #[arg(long, default_value_t = 5)]
    pub top: usize,
    /// Largest k of the Weyl product check.
    #[arg(long, default_value_t = 3)]
    pub weyl_k: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct Diagnose {
    #[command(flatten)]
    pub potential: PotentialArgs,
    #[arg(long = "X-list", value_delimiter = ',', default_value = "20,30,40")]
    pub x_list: Vec<f64>,
    /// Eigenvalues tracked.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 0.01)]
    pub h: f64,
    #[arg(long, default_value = "dirichlet")]
    pub bc: String,
    #[arg(long, default_value_t = 1e-4)]
    pub drift_tol: f64,
    #[arg(long, default_value_t = -1.5, allow_hyphen_values = true)]
    pub exponent_threshold: f64,
    #[arg(long, default_value_t = 25.0)]
    pub count_radius: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct Counterexample {
    /// Number of blocks.
    #[arg(long = "K")]
    pub k: usize,
    #[arg(long = "N", default_value_t = 2048)]
    pub n: usize,
    /// Largest n tried per block (a power of two).
    #[arg(long, default_value_t = 512)]
    pub cap: u32,
    #[arg(long, default_value_t = 0.0)]
    pub margin: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct Cauchy {
    /// Order n of the expression.
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    /// Window starts: `a,b,c,…` or `first:spacing:count`.
    #[arg(long)]
    pub window_spec: String,
    /// Window length.
    #[arg(long, default_value_t = 1.0)]
    pub d: f64,
    /// Shrink d until η falls below this.
    #[arg(long)]
    pub eta_target: Option<f64>,
    /// The constant coefficient p_1 = C0 as `re,im`.
    #[arg(long, value_parser = parse_complex, default_value = "0,0", allow_hyphen_values = true)]
    pub c0: [f64; 2],
    /// p_2..p_n in order, each a named potential with `name:params` (e.g.
    /// `constant:1,0`) or a JSON file; missing ones are zero.
    #[arg(long = "coeff")]
    pub coeffs: Vec<String>,
    /// Domain end of named coefficients.
    #[arg(long, default_value_t = 1000.0)]
    pub domain_end: f64,
    #[arg(long, default_value_t = 256)]
    pub steps: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct Replay {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
}

fn parse_complex(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    match parts.as_slice() {
        [re] => Ok([num(re)?, 0.0]),
        [re, im] => Ok([num(re)?, num(im)?]),
        _ => Err(format!("expected `re` or `re,im`, got `{s}`")),
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    ExitCode::from(run::main_with(argv))
}
