//! Granular-aluminum film parameters and the kinetic sheet inductance.
//!
//! Interface units follow the device tables (µΩ·cm, nm, pH/sq, K); every
//! computation converts to SI first.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817_65e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649_000_00e-23;

pub const DEFAULT_TC_K: f64 = 2.2;
/// Resistivity (µΩ·cm) at or below which the weak-coupling gap ratio applies.
pub const GAP_RATIO_BOUNDARY: f64 = 2000.0;
pub const GAP_RATIO_LOW: f64 = 1.76;
pub const GAP_RATIO_HIGH: f64 = 2.1;

/// Superconductor-insulator transition bounds, µΩ·cm.
pub const SIT_WARNING: f64 = 10_000.0;
pub const SIT_REJECT: f64 = 20_000.0;

const UOHM_CM_TO_OHM_M: f64 = 1e-8;
const NM_TO_M: f64 = 1e-9;
const PH: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialSpec {
    /// µΩ·cm
    pub resistivity: f64,
    /// nm
    pub thickness: f64,
    /// K
    #[serde(default = "default_tc")]
    pub critical_temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_ratio_override: Option<f64>,
}

fn default_tc() -> f64 {
    DEFAULT_TC_K
}

impl MaterialSpec {
    pub fn new(resistivity: f64, thickness: f64) -> Result<Self> {
        Self::with_tc(resistivity, thickness, DEFAULT_TC_K)
    }

    pub fn with_tc(resistivity: f64, thickness: f64, critical_temperature: f64) -> Result<Self> {
        let m = MaterialSpec {
            resistivity,
            thickness,
            critical_temperature,
            gap_ratio_override: None,
        };
        m.validate()?;
        Ok(m)
    }

    /// Builds the film whose sheet inductance is `sheet_inductance` (pH/sq)
    /// by inverting the kinetic-inductance relation.
    pub fn from_sheet_inductance(sheet_inductance: f64, thickness: f64, critical_temperature: f64) -> Result<Self> {
        let inv = resistivity_from_sheet_inductance(sheet_inductance, thickness, critical_temperature)?;
        let mut m = Self::with_tc(inv.resistivity, thickness, critical_temperature)?;
        // pin the branch so the forward model reproduces the requested L_sq exactly
        m.gap_ratio_override = Some(inv.gap_ratio);
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.resistivity > 0.0 && self.resistivity.is_finite()) {
            return Err(Error::invalid(format!("resistivity must be positive, got {}", self.resistivity)));
        }
        if !(self.thickness > 0.0 && self.thickness.is_finite()) {
            return Err(Error::invalid(format!("thickness must be positive, got {}", self.thickness)));
        }
        if !(self.critical_temperature > 0.0 && self.critical_temperature.is_finite()) {
            return Err(Error::invalid(format!(
                "critical temperature must be positive, got {}",
                self.critical_temperature
            )));
        }
        if let Some(c) = self.gap_ratio_override {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::invalid(format!("gap ratio must be positive, got {c}")));
            }
        }
        Ok(())
    }

    pub fn gap_ratio(&self) -> f64 {
        self.gap_ratio_override.unwrap_or_else(|| gap_ratio(self.resistivity))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SheetParams {
    /// Ω/sq
    pub sheet_resistance: f64,
    /// pH/sq
    pub sheet_inductance: f64,
    pub gap_ratio: f64,
}

pub fn sheet_params(material: &MaterialSpec) -> Result<SheetParams> {
    Ok(SheetParams {
        sheet_resistance: sheet_resistance(material)?,
        sheet_inductance: sheet_inductance(material)?,
        gap_ratio: material.gap_ratio(),
    })
}

/// Normal-state sheet resistance ρ/t in Ω/sq.
pub fn sheet_resistance(material: &MaterialSpec) -> Result<f64> {
    if !(material.thickness > 0.0) {
        return Err(Error::invalid(format!("thickness must be positive, got {}", material.thickness)));
    }
    if material.resistivity < 0.0 || !material.resistivity.is_finite() {
        return Err(Error::invalid(format!("resistivity must be non-negative, got {}", material.resistivity)));
    }
    Ok(material.resistivity * UOHM_CM_TO_OHM_M / (material.thickness * NM_TO_M))
}

/// Gap ratio Δ(0)/(k_B T_c): 1.76 up to and including 2000 µΩ·cm, 2.1 above.
pub fn gap_ratio(resistivity: f64) -> f64 {
    if resistivity <= GAP_RATIO_BOUNDARY {
        GAP_RATIO_LOW
    } else {
        GAP_RATIO_HIGH
    }
}

/// Kinetic sheet inductance ħR_n/(𝒞 k_B T_c π) in pH/sq.
pub fn sheet_inductance(material: &MaterialSpec) -> Result<f64> {
    let r_n = sheet_resistance(material)?;
    if !(material.critical_temperature > 0.0) {
        return Err(Error::invalid("critical temperature must be positive"));
    }
    Ok(sheet_inductance_from_resistance(r_n, material.gap_ratio(), material.critical_temperature))
}

fn sheet_inductance_from_resistance(r_n: f64, gap_ratio: f64, tc: f64) -> f64 {
    HBAR * r_n / (gap_ratio * K_B * tc * std::f64::consts::PI) / PH
}

fn resistivity_for_branch(sheet_inductance: f64, thickness: f64, tc: f64, gap_ratio: f64) -> f64 {
    let r_n = sheet_inductance * PH * gap_ratio * K_B * tc * std::f64::consts::PI / HBAR;
    r_n * thickness * NM_TO_M / UOHM_CM_TO_OHM_M
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResistivityInversion {
    /// µΩ·cm
    pub resistivity: f64,
    pub gap_ratio: f64,
    /// Both branches were self-consistent; the weak-coupling one was chosen.
    pub ambiguous: bool,
}

/// Inverts [`sheet_inductance`] for the resistivity, choosing the gap-ratio
/// branch whose result lies on its own side of the 2000 µΩ·cm boundary.
pub fn resistivity_from_sheet_inductance(
    sheet_inductance: f64,
    thickness: f64,
    critical_temperature: f64,
) -> Result<ResistivityInversion> {
    for (name, v) in [
        ("sheet inductance", sheet_inductance),
        ("thickness", thickness),
        ("critical temperature", critical_temperature),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!("{name} must be positive, got {v}")));
        }
    }
    let low = resistivity_for_branch(sheet_inductance, thickness, critical_temperature, GAP_RATIO_LOW);
    let high = resistivity_for_branch(sheet_inductance, thickness, critical_temperature, GAP_RATIO_HIGH);
    let low_ok = low <= GAP_RATIO_BOUNDARY;
    let high_ok = high > GAP_RATIO_BOUNDARY;
    match (low_ok, high_ok) {
        (true, ambiguous) => Ok(ResistivityInversion {
            resistivity: low,
            gap_ratio: GAP_RATIO_LOW,
            ambiguous,
        }),
        (false, true) => Ok(ResistivityInversion {
            resistivity: high,
            gap_ratio: GAP_RATIO_HIGH,
            ambiguous: false,
        }),
        (false, false) => Err(Error::AmbiguousBranch {
            low_branch: low,
            high_branch: high,
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SitStatus {
    Ok,
    Warning,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SitReport {
    pub resistivity: f64,
    pub status: SitStatus,
    pub message: String,
}

/// Classifies a resistivity against the superconductor-insulator transition.
pub fn check_sit(resistivity: f64) -> SitReport {
    let (status, message) = if resistivity < SIT_WARNING {
        (SitStatus::Ok, "below the superconductor-insulator transition".to_string())
    } else if resistivity <= SIT_REJECT {
        (
            SitStatus::Warning,
            format!("within the transition region [{SIT_WARNING}, {SIT_REJECT}] µΩ·cm; superconductivity not assured"),
        )
    } else {
        (SitStatus::Reject, format!("above {SIT_REJECT} µΩ·cm; film expected to be insulating"))
    };
    SitReport {
        resistivity,
        status,
        message,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn sheet_resistance_unit_conversion() {
        let m = MaterialSpec::new(860.0, 30.0).unwrap();
        // 860e-8 Ω·m / 30e-9 m
        assert!(rel(sheet_resistance(&m).unwrap(), 286.666_666_666_7) < 1e-12);
        let m = MaterialSpec::new(2546.0, 20.0).unwrap();
        assert!(rel(sheet_resistance(&m).unwrap(), 1273.0) < 1e-12);
    }

    #[test]
    fn zero_thickness_is_rejected() {
        assert!(MaterialSpec::new(860.0, 0.0).is_err());
        let m = MaterialSpec {
            resistivity: 860.0,
            thickness: 0.0,
            critical_temperature: 2.2,
            gap_ratio_override: None,
        };
        assert!(matches!(sheet_resistance(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn gap_ratio_plateaus() {
        assert_eq!(gap_ratio(800.0), 1.76);
        assert_eq!(gap_ratio(2500.0), 2.1);
        assert_eq!(gap_ratio(2000.0), 1.76);
        assert_eq!(gap_ratio(2000.0 + 1e-9), 2.1);
    }

    #[test]
    fn sheet_inductance_matches_table_films() {
        let m = MaterialSpec::new(860.0, 30.0).unwrap();
        let l = sheet_inductance(&m).unwrap();
        assert!((l - 180.0).abs() < 1.0, "{l}");
        let m = MaterialSpec::new(2546.0, 20.0).unwrap();
        let l = sheet_inductance(&m).unwrap();
        assert!((l - 670.0).abs() < 1.0, "{l}");
    }

    #[test]
    fn sheet_inductance_vanishes_with_resistivity() {
        let m = MaterialSpec {
            resistivity: 0.0,
            thickness: 30.0,
            critical_temperature: 2.2,
            gap_ratio_override: None,
        };
        assert_eq!(sheet_inductance(&m).unwrap(), 0.0);
    }

    #[test]
    fn sheet_params_invariant() {
        let m = MaterialSpec::new(1200.0, 25.0).unwrap();
        let s = sheet_params(&m).unwrap();
        let expect = HBAR * s.sheet_resistance / (s.gap_ratio * K_B * 2.2 * std::f64::consts::PI) * 1e12;
        assert!(rel(s.sheet_inductance, expect) < 1e-9);
    }

    #[test]
    fn inversion_selects_branch() {
        let inv = resistivity_from_sheet_inductance(180.0, 30.0, 2.2).unwrap();
        assert_eq!(inv.gap_ratio, 1.76);
        assert!((inv.resistivity - 860.0).abs() / 860.0 < 0.01, "{}", inv.resistivity);
        assert!(!inv.ambiguous);

        let inv = resistivity_from_sheet_inductance(670.0, 20.0, 2.2).unwrap();
        assert_eq!(inv.gap_ratio, 2.1);
        assert!((inv.resistivity - 2546.0).abs() / 2546.0 < 0.005, "{}", inv.resistivity);
        // within 2% of the highest measured film (~2500)
        assert!((inv.resistivity - 2500.0).abs() / 2500.0 < 0.02);
    }

    #[test]
    fn inversion_is_linear_within_branch() {
        let a = resistivity_from_sheet_inductance(100.0, 30.0, 2.2).unwrap();
        let b = resistivity_from_sheet_inductance(200.0, 30.0, 2.2).unwrap();
        assert_eq!(a.gap_ratio, b.gap_ratio);
        assert!(rel(b.resistivity, 2.0 * a.resistivity) < 1e-12);
    }

    #[test]
    fn inversion_flags_overlap_window() {
        // low-branch value 1800 µΩ·cm, high-branch value 1800·2.1/1.76 > 2000
        let l = sheet_inductance(&MaterialSpec::new(1800.0, 20.0).unwrap()).unwrap();
        let inv = resistivity_from_sheet_inductance(l, 20.0, 2.2).unwrap();
        assert!(inv.ambiguous);
        assert_eq!(inv.gap_ratio, 1.76);
        assert!(rel(inv.resistivity, 1800.0) < 1e-9);
    }

    #[test]
    fn from_sheet_inductance_reproduces_target() {
        for lsq in [1200.0, 1500.0, 1800.0] {
            let m = MaterialSpec::from_sheet_inductance(lsq, 20.0, 2.2).unwrap();
            assert!(rel(sheet_inductance(&m).unwrap(), lsq) < 1e-12);
        }
    }

    #[test]
    fn sit_classification() {
        assert_eq!(check_sit(2500.0).status, SitStatus::Ok);
        assert_eq!(check_sit(10_000.0).status, SitStatus::Warning);
        assert_eq!(check_sit(20_000.0).status, SitStatus::Warning);
        assert_eq!(check_sit(50_000.0).status, SitStatus::Reject);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn round_trip_outside_ambiguity_window(
                rho in prop_oneof![10.0f64..1670.0, 2400.0f64..9000.0],
                t in 5.0f64..100.0,
                tc in 0.5f64..4.0,
            ) {
                let m = MaterialSpec::with_tc(rho, t, tc).unwrap();
                let l = sheet_inductance(&m).unwrap();
                let inv = resistivity_from_sheet_inductance(l, t, tc).unwrap();
                prop_assert!((inv.resistivity - rho).abs() / rho < 1e-6);
            }

            #[test]
            fn inverse_in_thickness_and_tc(rho in 10.0f64..1900.0, t in 5.0f64..100.0, tc in 0.5f64..4.0) {
                let base = sheet_inductance(&MaterialSpec::with_tc(rho, t, tc).unwrap()).unwrap();
                let thick = sheet_inductance(&MaterialSpec::with_tc(rho, 2.0 * t, tc).unwrap()).unwrap();
                let warm = sheet_inductance(&MaterialSpec::with_tc(rho, t, 2.0 * tc).unwrap()).unwrap();
                prop_assert!((thick * 2.0 - base).abs() / base < 1e-12);
                prop_assert!((warm * 2.0 - base).abs() / base < 1e-12);
            }

            #[test]
            fn gap_ratio_single_step(a in 1.0f64..30000.0, b in 1.0f64..30000.0) {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                if gap_ratio(lo) != gap_ratio(hi) {
                    prop_assert!(lo <= GAP_RATIO_BOUNDARY && hi > GAP_RATIO_BOUNDARY);
                }
            }
        }
    }
}
