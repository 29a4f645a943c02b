//! Electrical power accounting: map programmed phases to drive voltages via
//! each shifter's `φ = α + β V²` calibration and sum the squared voltages.
//!
//! Power is reported in units where the proportionality constant is 1, i.e.
//! the "power" of a shifter is exactly its V².

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{ChipSpec, PhaseProgram, ShifterCal};

/// Squared drive voltages per shifter and their sum.
///
/// Shifter order: for each MZI in canonical mesh order its internal then
/// external shifter, followed by the `n` output shifters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub total: f64,
    pub per_shifter: Vec<f64>,
}

impl PowerReport {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// The minimal nonnegative V² realizing phase `phi` on a shifter with
/// calibration `cal`: `((φ − α) mod 2π)/β`, using the representative of the
/// phase offset in `[0, 2π)`.
pub fn phase_to_v2(phi: f64, cal: &ShifterCal) -> f64 {
    (phi - cal.alpha).rem_euclid(2.0 * PI) / cal.beta
}

/// Total drive power of a program on a chip: `phase_to_v2` summed over every
/// internal, external, and output phase shifter.
pub fn program_power(program: &PhaseProgram, chip: &ChipSpec) -> Result<PowerReport> {
    program.validate()?;
    chip.validate()?;
    if program.n != chip.n {
        return Err(Error::ShapeMismatch(format!(
            "program drives {} modes but the chip has {}",
            program.n, chip.n
        )));
    }
    let mut per_shifter = Vec::with_capacity(2 * chip.mzis.len() + chip.n);
    for (setting, mzi) in program.settings.iter().zip(&chip.mzis) {
        per_shifter.push(phase_to_v2(setting.phi_i, &mzi.internal));
        per_shifter.push(phase_to_v2(setting.phi_e, &mzi.external));
    }
    for (&phi, cal) in program.output_phases.iter().zip(&chip.output_shifters) {
        per_shifter.push(phase_to_v2(phi, cal));
    }
    let total = per_shifter.iter().sum();
    Ok(PowerReport { total, per_shifter })
}
