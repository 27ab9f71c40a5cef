//! Command-line parsing and the validated run configuration.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;

use capaf::{Profile, Tolerances};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;

pub const DEFAULT_GRID: GridSpec = GridSpec {
    n_rho: 64,
    n_phi: 64,
};
/// The triangulated volume needs a finer mesh to meet its tolerance.
pub const RECONSTRUCT_GRID: GridSpec = GridSpec {
    n_rho: 128,
    n_phi: 128,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridSpec {
    pub n_rho: usize,
    pub n_phi: usize,
}

/// Parses `RxP`, also accepting `X` and `×` as separators.
pub fn parse_grid(s: &str) -> Result<GridSpec, String> {
    let parts: Vec<&str> = s.split(['x', 'X', '×']).collect();
    if parts.len() != 2 {
        return Err(format!("expected RxP, got '{s}'"));
    }
    let n = |p: &str| {
        p.trim()
            .parse::<usize>()
            .map_err(|e| format!("bad grid size '{p}': {e}"))
    };
    Ok(GridSpec {
        n_rho: n(parts[0])?,
        n_phi: n(parts[1])?,
    })
}

#[derive(Debug, Parser)]
#[command(
    name = "capaf",
    version,
    about = "Verification driver for capillary convex bodies on the spherical cap"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Contact angle in (0, pi).
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    /// Grid size as RxP (radial layers x azimuthal nodes).
    #[arg(long, global = true, value_parser = parse_grid)]
    pub grid: Option<GridSpec>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Output directory; reports go to stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, conflicts_with = "csv")]
    pub json: bool,
    #[arg(long, global = true)]
    pub csv: bool,
    #[arg(long = "tolerance-profile", global = true, default_value = "default")]
    pub profile: Profile,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AfFamily {
    /// Random capillary f against random convex f1 and f2.
    Random,
    /// Two caps of different radius against a random f2.
    Cap,
    /// f = a f1 + horizontal linear, the exact equality family.
    Equality,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainFamily {
    Random,
    Cap,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write seeded random bodies as JSON files.
    Gen {
        #[arg(long, default_value_t = 3)]
        count: usize,
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
        #[arg(long = "base-radius", default_value_t = 1.0)]
        base_radius: f64,
        #[arg(long = "mode-cap", default_value_t = 3)]
        mode_cap: usize,
    },
    /// Quermassintegrals of body files.
    Quermass { bodies: Vec<PathBuf> },
    /// Two-function Alexandrov-Fenchel trials.
    Af {
        #[arg(long, value_enum, default_value = "random")]
        family: AfFamily,
        #[arg(long = "mode-cap", default_value_t = 3)]
        mode_cap: usize,
    },
    /// Chained mixed-volume inequalities and the normalized quermassintegral inequalities.
    Chain {
        #[arg(long, value_enum, default_value = "random")]
        family: ChainFamily,
        #[arg(long, default_value_t = 3)]
        m: usize,
        #[arg(long = "mode-cap", default_value_t = 3)]
        mode_cap: usize,
    },
    /// Spectrum of the weighted operator.
    Spectrum {
        /// `ell`, `random`, or a body file.
        #[arg(long, default_value = "ell")]
        reference: String,
        #[arg(long = "how-many", default_value_t = 3)]
        how_many: usize,
        /// Grid sizes n (n x n) for a refinement sweep of |lambda_1 - 1|.
        #[arg(long, value_delimiter = ',')]
        refine: Vec<usize>,
    },
    /// Steiner polynomial of a body.
    Steiner {
        #[arg(long)]
        body: Option<PathBuf>,
        #[arg(long = "t-values", value_delimiter = ',', default_values_t = [0.25, 0.5, 1.0, 1.5, 2.0])]
        t_values: Vec<f64>,
    },
    /// Embed a body, export its mesh and check the boundary geometry.
    Reconstruct {
        #[arg(long)]
        body: Option<PathBuf>,
    },
    /// Summarize report files.
    Report { inputs: Vec<PathBuf> },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Gen { .. } => "gen",
            Command::Quermass { .. } => "quermass",
            Command::Af { .. } => "af",
            Command::Chain { .. } => "chain",
            Command::Spectrum { .. } => "spectrum",
            Command::Steiner { .. } => "steiner",
            Command::Reconstruct { .. } => "reconstruct",
            Command::Report { .. } => "report",
        }
    }

    fn default_trials(&self) -> usize {
        match self {
            Command::Af { .. } => 500,
            Command::Chain { .. } => 100,
            _ => 1,
        }
    }

    fn params(&self) -> BTreeMap<String, Value> {
        let mut p = BTreeMap::new();
        match self {
            Command::Gen {
                count,
                amplitude,
                base_radius,
                mode_cap,
            } => {
                p.insert("count".into(), json!(count));
                p.insert("amplitude".into(), json!(amplitude));
                p.insert("base_radius".into(), json!(base_radius));
                p.insert("mode_cap".into(), json!(mode_cap));
            }
            Command::Quermass { bodies } => {
                p.insert("bodies".into(), json!(paths(bodies)));
            }
            Command::Af { family, mode_cap } => {
                p.insert("family".into(), json!(family));
                p.insert("mode_cap".into(), json!(mode_cap));
            }
            Command::Chain {
                family,
                m,
                mode_cap,
            } => {
                p.insert("family".into(), json!(family));
                p.insert("m".into(), json!(m));
                p.insert("mode_cap".into(), json!(mode_cap));
            }
            Command::Spectrum {
                reference,
                how_many,
                refine,
            } => {
                p.insert("reference".into(), json!(reference));
                p.insert("how_many".into(), json!(how_many));
                p.insert("refine".into(), json!(refine));
            }
            Command::Steiner { body, t_values } => {
                p.insert(
                    "body".into(),
                    json!(body.as_ref().map(|b| b.display().to_string())),
                );
                p.insert("t_values".into(), json!(t_values));
            }
            Command::Reconstruct { body } => {
                p.insert(
                    "body".into(),
                    json!(body.as_ref().map(|b| b.display().to_string())),
                );
            }
            Command::Report { inputs } => {
                p.insert("inputs".into(), json!(paths(inputs)));
            }
        }
        p
    }
}

fn paths(v: &[PathBuf]) -> Vec<String> {
    v.iter().map(|p| p.display().to_string()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Everything that determines a run's output. The output directory and the
/// thread count are deliberately absent so reruns compare byte for byte.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub theta: f64,
    pub n_rho: usize,
    pub n_phi: usize,
    pub seed: u64,
    pub trials: usize,
    pub profile: Profile,
    pub format: Format,
    pub params: BTreeMap<String, Value>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self, CliError> {
        let c = &cli.common;
        let theta = c.theta.unwrap_or(PI / 2.0);
        if !(theta > 0.0 && theta < PI) {
            return Err(CliError::Config(format!(
                "theta must lie in (0, pi), got {theta}"
            )));
        }
        let default_grid = match cli.command {
            Command::Reconstruct { .. } => RECONSTRUCT_GRID,
            _ => DEFAULT_GRID,
        };
        let grid = c.grid.unwrap_or(default_grid);
        if grid.n_rho < capaf::grid::MIN_N_RHO || grid.n_phi < capaf::grid::MIN_N_PHI {
            return Err(CliError::Config(format!(
                "grid {}x{} is below the minimum {}x{}",
                grid.n_rho,
                grid.n_phi,
                capaf::grid::MIN_N_RHO,
                capaf::grid::MIN_N_PHI
            )));
        }
        let trials = c.trials.unwrap_or_else(|| cli.command.default_trials());
        if trials == 0 {
            return Err(CliError::Config("trials must be positive".into()));
        }
        match &cli.command {
            Command::Gen {
                count,
                amplitude,
                base_radius,
                ..
            } => {
                if *count == 0 {
                    return Err(CliError::Config("count must be positive".into()));
                }
                if !(*amplitude >= 0.0 && amplitude.is_finite()) {
                    return Err(CliError::Config(format!(
                        "amplitude must be nonnegative, got {amplitude}"
                    )));
                }
                if !(*base_radius > 0.0 && base_radius.is_finite()) {
                    return Err(CliError::Config(format!(
                        "base radius must be positive, got {base_radius}"
                    )));
                }
                if c.out.is_none() {
                    return Err(CliError::Config("gen needs --out".into()));
                }
            }
            Command::Quermass { bodies } if bodies.is_empty() => {
                return Err(CliError::Config(
                    "quermass needs at least one body file".into(),
                ));
            }
            Command::Chain { m, .. } if !(2..=3).contains(m) => {
                return Err(CliError::Config(format!("m must be 2 or 3, got {m}")));
            }
            Command::Spectrum {
                how_many, refine, ..
            } => {
                if *how_many == 0 {
                    return Err(CliError::Config("how-many must be positive".into()));
                }
                if let Some(n) = refine.iter().find(|&&n| n < capaf::grid::MIN_N_RHO) {
                    return Err(CliError::Config(format!(
                        "refinement size {n} is too small"
                    )));
                }
            }
            Command::Steiner { t_values, .. }
                if t_values.iter().any(|t| !(*t > 0.0 && t.is_finite())) =>
            {
                return Err(CliError::Config("t-values must be positive".into()));
            }
            Command::Report { inputs } if inputs.is_empty() && c.out.is_none() => {
                return Err(CliError::Config("report needs input files or --out".into()));
            }
            _ => {}
        }
        Ok(RunConfig {
            command: cli.command.name().to_string(),
            theta,
            n_rho: grid.n_rho,
            n_phi: grid.n_phi,
            seed: c.seed,
            trials,
            profile: c.profile,
            format: if c.csv { Format::Csv } else { Format::Json },
            params: cli.command.params(),
            out: c.out.clone(),
        })
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances::for_profile(self.profile)
    }

    /// Independent seed for trial `t` and stream `k`.
    pub fn trial_seed(&self, t: usize, k: u64) -> u64 {
        let mut z = self
            .seed
            .wrapping_add((t as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
            .wrapping_add(k.wrapping_mul(0xbf58_476d_1ce4_e5b9));
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(
            parse_grid("32x48").unwrap(),
            GridSpec {
                n_rho: 32,
                n_phi: 48
            }
        );
        assert_eq!(
            parse_grid("16×16").unwrap(),
            GridSpec {
                n_rho: 16,
                n_phi: 16
            }
        );
        assert!(parse_grid("16").is_err());
        assert!(parse_grid("ax4").is_err());
    }

    #[test]
    fn invalid_theta_is_a_config_error() {
        let cli = Cli::try_parse_from(["capaf", "--theta", "0", "af"]).unwrap();
        assert!(matches!(
            RunConfig::from_cli(&cli),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn trial_seeds_are_distinct() {
        let cli = Cli::try_parse_from(["capaf", "af"]).unwrap();
        let cfg = RunConfig::from_cli(&cli).unwrap();
        let mut seeds: Vec<u64> = (0..100)
            .flat_map(|t| (0..3).map(move |k| (t, k)))
            .map(|(t, k)| cfg.trial_seed(t, k))
            .collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 300);
    }
}
