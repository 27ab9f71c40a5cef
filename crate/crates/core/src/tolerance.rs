//! Numerical tolerances, grouped into named profiles.
//!
//! Grid-dependent bounds are stored as constants `C` and evaluated as
//! `C / n_rho^4`, matching the observed order of the radial scheme.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::grid::CapGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Default,
    Strict,
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Default => "default",
            Profile::Strict => "strict",
        })
    }
}

impl FromStr for Profile {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "default" => Ok(Profile::Default),
            "strict" => Ok(Profile::Strict),
            other => Err(format!("unknown tolerance profile '{other}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub profile: Profile,
    /// Scaled Robin residual `max|res| * theta / max|h|` must stay below `robin_constant / n_rho^4`.
    pub robin_constant: f64,
    /// Same scaling for the boundary derivative of a Neumann lift.
    pub neumann_constant: f64,
    /// Convexity requires `min_eig > convexity_floor * max|h|`.
    pub convexity_floor: f64,
    /// Eigenvalues with `|lambda| <= kernel_relative * lambda_1` are kernel modes.
    pub kernel_relative: f64,
    /// Width of the forbidden band `(band, 1 - band)`.
    pub spectral_band: f64,
    pub lambda1: f64,
    pub af_relative: f64,
    pub decomposition: f64,
    /// A gap below this multiple of its error estimate counts as equality.
    pub equality_factor: f64,
    pub quermass_relative: f64,
    pub identity_relative: f64,
    pub mesh_volume_relative: f64,
    pub form_relative: f64,
}

impl Tolerances {
    pub fn default_profile() -> Self {
        Tolerances {
            profile: Profile::Default,
            robin_constant: 50.0,
            neumann_constant: 50.0,
            convexity_floor: 1e-8,
            kernel_relative: 1e-6,
            spectral_band: 0.01,
            lambda1: 1e-3,
            af_relative: 1e-8,
            decomposition: 1e-6,
            equality_factor: 10.0,
            quermass_relative: 1e-6,
            identity_relative: 1e-5,
            mesh_volume_relative: 1e-3,
            form_relative: 1e-6,
        }
    }

    pub fn strict() -> Self {
        Tolerances {
            profile: Profile::Strict,
            robin_constant: 10.0,
            neumann_constant: 10.0,
            lambda1: 1e-4,
            ..Self::default_profile()
        }
    }

    pub fn for_profile(p: Profile) -> Self {
        match p {
            Profile::Default => Self::default_profile(),
            Profile::Strict => Self::strict(),
        }
    }

    pub fn robin_bound(&self, grid: &CapGrid) -> f64 {
        self.robin_constant / (grid.n_rho() as f64).powi(4)
    }

    pub fn neumann_bound(&self, grid: &CapGrid) -> f64 {
        self.neumann_constant / (grid.n_rho() as f64).powi(4)
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::default_profile()
    }
}
