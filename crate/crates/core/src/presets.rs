//! Reference coefficient rows a₁..a₈ for t1 = 4 µs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Coefficients tuned for a ±410 kHz plateau with peak Rabi below 1.5 MHz.
pub const OP1: [f64; 8] = [
    0.0246, -0.8980, 0.0066, 0.3668, -0.0021, -0.1358, -0.0048, 0.0179,
];

/// Coefficients for a ±600 kHz plateau at higher instantaneous Rabi frequency.
pub const OP2: [f64; 8] = [
    -0.5400, -0.1582, 5.7637, 3.9338, -0.6641, -0.6328, -1.9186, -1.5777,
];

/// Gate-pair duration the presets were optimized for.
pub const PRESET_T1_US: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Op1,
    Op2,
}

impl Preset {
    pub fn coeffs(self) -> [f64; 8] {
        match self {
            Preset::Op1 => OP1,
            Preset::Op2 => OP2,
        }
    }

    /// Half-width in kHz of the detuning band the row was designed for.
    pub fn design_band_khz(self) -> f64 {
        match self {
            Preset::Op1 => 410.0,
            Preset::Op2 => 600.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Op1 => "op1",
            Preset::Op2 => "op2",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "op1" => Ok(Preset::Op1),
            "op2" => Ok(Preset::Op2),
            other => Err(Error::InvalidParameter(format!("unknown preset '{other}'"))),
        }
    }
}
