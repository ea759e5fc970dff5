use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::EigenDecomposition;

/// How many eigenpairs of each separator block enter the truncated inverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationRule {
    /// Smallest rank whose eigenvalues explain more than this fraction of
    /// the trace.
    Fve(f64),
    /// Explicit per-step ranks; a single entry applies to every step.
    Fixed(Vec<usize>),
    /// `N_p = ceil(scale · n^{γ_p / β})` (see [`rate_schedule`]).
    Schedule {
        n: usize,
        alpha: f64,
        beta: f64,
        #[serde(default = "unit_scale")]
        scale: f64,
    },
}

fn unit_scale() -> f64 {
    1.0
}

impl Default for TruncationRule {
    fn default() -> Self {
        TruncationRule::Fve(0.95)
    }
}

impl TruncationRule {
    pub fn validate(&self) -> Result<()> {
        match self {
            TruncationRule::Fve(f) if !(*f > 0.0 && *f < 1.0) => Err(Error::InvalidInput(format!(
                "FVE fraction must lie in (0, 1), got {f}"
            ))),
            TruncationRule::Fixed(ranks) if ranks.is_empty() || ranks.contains(&0) => {
                Err(Error::InvalidInput(
                    "fixed ranks must be a nonempty list of positive integers".into(),
                ))
            }
            TruncationRule::Schedule {
                alpha, beta, scale, ..
            } if !(*alpha > 0.0 && *beta > 0.0 && *scale > 0.0) => Err(Error::InvalidInput(
                "schedule needs alpha, beta and scale > 0".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Requested rank at step `p` (1-based) of an `m`-interval cover, before
    /// clamping to the available spectrum.
    pub fn requested_rank(&self, p: usize, m: usize, eig: &EigenDecomposition) -> Result<usize> {
        match self {
            TruncationRule::Fve(f) => Ok(fve_rank(eig, *f)),
            TruncationRule::Fixed(ranks) => match ranks.len() {
                1 => Ok(ranks[0]),
                len if len == m.saturating_sub(1) => Ok(ranks[p - 1]),
                len => Err(Error::InvalidInput(format!(
                    "{len} fixed ranks given for {} steps",
                    m.saturating_sub(1)
                ))),
            },
            TruncationRule::Schedule {
                n,
                alpha,
                beta,
                scale,
            } => Ok(schedule_rank(*n, *alpha, *beta, *scale, p)),
        }
    }
}

impl fmt::Display for TruncationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TruncationRule::Fve(x) => write!(f, "fve:{x}"),
            TruncationRule::Fixed(r) => {
                let parts: Vec<String> = r.iter().map(|x| x.to_string()).collect();
                write!(f, "fixed:{}", parts.join(","))
            }
            TruncationRule::Schedule { alpha, beta, .. } => write!(f, "schedule:{alpha},{beta}"),
        }
    }
}

/// Parses `fve:<fraction>`, `fixed:<r>[,<r>...]` and `schedule:<alpha>,<beta>`.
/// The schedule's sample count is left at 0 for the caller to fill in.
impl FromStr for TruncationRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("cannot parse truncation rule {s:?}"));
        let (kind, args) = s.split_once(':').ok_or_else(bad)?;
        let nums: Vec<&str> = args.split(',').map(str::trim).collect();
        let rule = match kind.trim() {
            "fve" if nums.len() == 1 => TruncationRule::Fve(nums[0].parse().map_err(|_| bad())?),
            "fixed" => TruncationRule::Fixed(
                nums.iter()
                    .map(|x| x.parse().map_err(|_| bad()))
                    .collect::<Result<_>>()?,
            ),
            "schedule" if nums.len() == 2 => TruncationRule::Schedule {
                n: 0,
                alpha: nums[0].parse().map_err(|_| bad())?,
                beta: nums[1].parse().map_err(|_| bad())?,
                scale: 1.0,
            },
            _ => return Err(bad()),
        };
        rule.validate()?;
        Ok(rule)
    }
}

/// Smallest `r` with `Σ_{k ≤ r} λ_k⁺ > fraction · Σ_k λ_k⁺`.
pub fn fve_rank(eig: &EigenDecomposition, fraction: f64) -> usize {
    let positive: Vec<f64> = eig
        .eigenvalues
        .iter()
        .copied()
        .filter(|&l| l > 0.0)
        .collect();
    let total: f64 = positive.iter().sum();
    let mut acc = 0.0;
    for (k, l) in positive.iter().enumerate() {
        acc += l;
        if acc > fraction * total {
            return k + 1;
        }
    }
    positive.len().max(1)
}

/// Exponent `γ_p` at step `p`: the closed form for the last step of a
/// `(p + 1)`-interval cover,
/// `β / (β + 2α + 3/2) · [β / (β + α + 1/2)]^{p − 1}`.
pub fn schedule_exponent(alpha: f64, beta: f64, p: usize) -> f64 {
    beta / (beta + 2.0 * alpha + 1.5) * (beta / (beta + alpha + 0.5)).powi(p as i32 - 1)
}

fn schedule_rank(n: usize, alpha: f64, beta: f64, scale: f64, p: usize) -> usize {
    let gamma = schedule_exponent(alpha, beta, p);
    ((scale * (n as f64).powf(gamma / beta)).ceil() as usize).max(1)
}

/// Truncation ranks `N_p ∼ n^{γ_p / β}` for `p = 1..m`, proportionality
/// constant 1.
pub fn rate_schedule(n: usize, alpha: f64, beta: f64, m: usize) -> Vec<usize> {
    if m < 2 {
        return Vec::new();
    }
    (1..m)
        .map(|p| schedule_rank(n, alpha, beta, 1.0, p))
        .collect()
}
