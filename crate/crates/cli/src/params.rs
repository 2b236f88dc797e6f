//! Parameter blocks: each parses from flags and from the config file.
//!
//! Every field is optional here; commands report missing required keys.

use std::path::PathBuf;
use std::str::FromStr;

use clap::Args;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize};
use zlab_core::TorusSpec;

use crate::invalid;

/// Torus flags plus a command's own parameters.
#[derive(Args, Debug)]
pub struct WithTorus<P: Args> {
    #[command(flatten)]
    pub torus: TorusArgs,
    #[command(flatten)]
    pub params: P,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusArgs {
    /// Dimension (defaults to the length of gamma).
    #[arg(long)]
    pub d: Option<usize>,
    /// Periods, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub gamma: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub alpha: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub beta: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    pub c0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda_re: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda_im: Option<f64>,
}

impl TorusArgs {
    /// Unit constants unless given; `gamma` falls back to `default_gamma`.
    pub fn build(&self, default_gamma: Option<&[f64]>) -> anyhow::Result<TorusSpec> {
        let gamma = match (&self.gamma, default_gamma) {
            (Some(g), _) => g.clone(),
            (None, Some(g)) => g.to_vec(),
            (None, None) => return Err(invalid("missing required key `torus.gamma` (flag --gamma)")),
        };
        let d = self.d.unwrap_or(gamma.len());
        let ones = vec![1.0; d];
        let lambda = Complex64::new(self.lambda_re.unwrap_or(1.0), self.lambda_im.unwrap_or(0.0));
        TorusSpec::new(
            d,
            gamma,
            self.alpha.clone().unwrap_or_else(|| ones.clone()),
            self.beta.clone().unwrap_or(ones),
            self.c0.unwrap_or(1.0),
            lambda,
        )
        .map_err(|e| invalid(format!("config key `torus`: {e}")))
    }
}

pub fn required<T: Clone>(v: &Option<T>, key: &str, flag: &str) -> anyhow::Result<T> {
    v.clone().ok_or_else(|| invalid(format!("missing required key `params.{key}` (flag --{flag})")))
}

/// A number kept as written, so that `1/3` or `0.1` classify exactly.
#[derive(Clone, Debug, Serialize)]
#[serde(transparent)]
pub struct Exact(pub String);

impl FromStr for Exact {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(Exact(s.to_string()))
    }
}

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(serde_json::Number),
            Text(String),
        }
        Ok(Exact(match Raw::deserialize(d)? {
            Raw::Num(n) => n.to_string(),
            Raw::Text(s) => s,
        }))
    }
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyParams {
    #[arg(long, allow_negative_numbers = true)]
    pub s: Option<Exact>,
    #[arg(long, allow_negative_numbers = true)]
    pub l: Option<Exact>,
    #[arg(long)]
    pub d: Option<usize>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonanceParams {
    /// Lattice bound on every axis.
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Wave branch, +1 or -1.
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<i32>,
    /// Bound on `M`: absolute, or the constant `c` of `M < c|k|` with --linear.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub linear: Option<bool>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountParams {
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long = "X", allow_negative_numbers = true)]
    #[serde(rename = "X")]
    pub x: Option<f64>,
    /// Radius of the optional ball.
    #[arg(long = "N0")]
    #[serde(rename = "N0")]
    pub n0: Option<f64>,
    /// Ball centre, comma separated (origin by default).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub center: Option<Vec<f64>>,
    /// Cone angle.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Number of seeded random rotations (identity when 0).
    #[arg(long)]
    pub rotations: Option<usize>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateParams {
    /// Interaction class, e.g. HighLow.
    #[arg(long)]
    pub class: Option<String>,
    /// `N0,N1,N2,L0,L1,L2`.
    #[arg(long = "grid-spec", value_delimiter = ',')]
    #[serde(rename = "grid_spec")]
    pub grid_spec: Option<Vec<u64>>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<i8>,
    /// `committed` runs the built-in sweeps (optionally filtered by class).
    #[arg(long)]
    pub sweeps: Option<String>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InflateParams {
    /// i, ii, iii, iv or bourgain.
    #[arg(long)]
    pub case: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub s: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub l: Option<f64>,
    #[arg(long = "sprime", allow_negative_numbers = true)]
    pub s_prime: Option<f64>,
    #[arg(long = "lprime", allow_negative_numbers = true)]
    pub l_prime: Option<f64>,
    #[arg(long = "Nmin")]
    #[serde(rename = "Nmin")]
    pub n_min: Option<i64>,
    #[arg(long = "Nmax")]
    #[serde(rename = "Nmax")]
    pub n_max: Option<i64>,
    /// Times, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub t: Option<Vec<f64>>,
    /// Largest N also run through the full solver.
    #[arg(long = "solver-nmax")]
    #[serde(rename = "solver_nmax")]
    pub solver_n_max: Option<i64>,
    #[arg(long = "solver-dt")]
    pub solver_dt: Option<f64>,
    /// Bourgain pairing (all when absent).
    #[arg(long)]
    pub which: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub b: Option<f64>,
    /// 1, 2 or inf.
    #[arg(long)]
    pub p: Option<f64>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveParams {
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub t_final: Option<f64>,
    /// exponential or strang.
    #[arg(long)]
    pub scheme: Option<String>,
    /// midpoint or gauss2.
    #[arg(long)]
    pub quadrature: Option<String>,
    #[arg(long)]
    pub sample_every: Option<usize>,
    /// Write full states every this many steps to --snapshots.
    #[arg(long)]
    pub snap_every: Option<usize>,
    #[arg(long)]
    pub snapshots: Option<PathBuf>,
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Size of the seeded random data.
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Initial data as FourierField JSON (random when absent).
    #[arg(long)]
    pub u0: Option<PathBuf>,
    #[arg(long)]
    pub n0: Option<PathBuf>,
    #[arg(long)]
    pub n1: Option<PathBuf>,
    /// Regularities of the norm diagnostics.
    #[arg(long, allow_negative_numbers = true)]
    pub s: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub l: Option<f64>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormsParams {
    /// Field as FourierField JSON (random when absent).
    #[arg(long)]
    pub u: Option<PathBuf>,
    #[arg(long)]
    pub kmax: Option<usize>,
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub s: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub b: Option<f64>,
    /// 1, 2 or inf.
    #[arg(long)]
    pub p: Option<f64>,
    /// Modulation type: S, W+, W- or W.
    #[arg(long = "type")]
    #[serde(rename = "type")]
    pub ty: Option<String>,
    /// Window scale in (0, 1].
    #[arg(long)]
    pub delta: Option<f64>,
    /// json (norms and shell table) or csv (shell table only).
    #[arg(long)]
    pub format: Option<String>,
}
