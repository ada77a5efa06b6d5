//! Enthalpy, temperature and phase relations for the PCM and single-phase
//! materials.
//!
//! Units are fixed across the crate: kJ, kg, °C, s, m. Conductivities and
//! convective coefficients are stored in W and converted to kW only when
//! resistances are assembled (see [`crate::geometry`]).

use serde::{Deserialize, Serialize};

use crate::error::{Result, TesError};

/// Phase of a PCM region or section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Solid,
    Liquid,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Solid => "solid",
            Phase::Liquid => "liquid",
        }
    }
}

/// Thermophysical constants of the phase change material.
///
/// The enthalpy datum is the saturated solid (`h = 0`); the saturated liquid
/// sits at `h = h_f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PcmProperties {
    #[serde(rename = "h_f_kj_per_kg")]
    pub h_f: f64,
    #[serde(rename = "t_sat_c")]
    pub t_sat: f64,
    #[serde(rename = "cp_solid_kj_per_kg_c")]
    pub cp_solid: f64,
    #[serde(rename = "cp_liquid_kj_per_kg_c")]
    pub cp_liquid: f64,
    #[serde(rename = "rho_solid_kg_per_m3")]
    pub rho_solid: f64,
    #[serde(rename = "rho_liquid_kg_per_m3")]
    pub rho_liquid: f64,
    #[serde(rename = "k_solid_w_per_m_c")]
    pub k_solid: f64,
    #[serde(rename = "k_liquid_w_per_m_c")]
    pub k_liquid: f64,
}

impl Default for PcmProperties {
    /// Water.
    fn default() -> Self {
        PcmProperties {
            h_f: 334.0,
            t_sat: 0.0,
            cp_solid: 2.11,
            cp_liquid: 4.18,
            rho_solid: 916.0,
            rho_liquid: 1000.0,
            k_solid: 2.3,
            k_liquid: 0.58,
        }
    }
}

impl PcmProperties {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("h_f_kj_per_kg", self.h_f),
            ("cp_solid_kj_per_kg_c", self.cp_solid),
            ("cp_liquid_kj_per_kg_c", self.cp_liquid),
            ("rho_solid_kg_per_m3", self.rho_solid),
            ("rho_liquid_kg_per_m3", self.rho_liquid),
            ("k_solid_w_per_m_c", self.k_solid),
            ("k_liquid_w_per_m_c", self.k_liquid),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(TesError::invalid(name, format!("must be > 0, got {value}")));
            }
        }
        if !self.t_sat.is_finite() {
            return Err(TesError::invalid("t_sat_c", "must be finite"));
        }
        Ok(())
    }

    pub fn cp(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Solid => self.cp_solid,
            Phase::Liquid => self.cp_liquid,
        }
    }

    pub fn rho(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Solid => self.rho_solid,
            Phase::Liquid => self.rho_liquid,
        }
    }

    /// Thermal conductivity in W/(m·°C).
    pub fn k(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Solid => self.k_solid,
            Phase::Liquid => self.k_liquid,
        }
    }
}

/// Constants of a single-phase material (working fluid, pipe walls, air).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialProperties {
    #[serde(rename = "cp_kj_per_kg_c")]
    pub cp: f64,
    #[serde(rename = "rho_kg_per_m3")]
    pub rho: f64,
    #[serde(rename = "k_w_per_m_c")]
    pub k: f64,
    /// Convective coefficient, W/(m²·°C).
    #[serde(
        rename = "h_conv_w_per_m2_c",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub h_conv: Option<f64>,
}

impl MaterialProperties {
    pub fn validate(&self, name: &str) -> Result<()> {
        for (field, value) in [("cp_kj_per_kg_c", self.cp), ("rho_kg_per_m3", self.rho), ("k_w_per_m_c", self.k)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(TesError::invalid(
                    format!("{name}.{field}"),
                    format!("must be > 0, got {value}"),
                ));
            }
        }
        if let Some(h) = self.h_conv {
            if !(h.is_finite() && h > 0.0) {
                return Err(TesError::invalid(
                    format!("{name}.h_conv_w_per_m2_c"),
                    format!("must be > 0, got {h}"),
                ));
            }
        }
        Ok(())
    }
}

/// PCM temperature from specific enthalpy. Pinned at `t_sat` across the
/// mushy band `0 ≤ h ≤ h_f`.
pub fn pcm_temperature(h: f64, props: &PcmProperties) -> f64 {
    if h < 0.0 {
        h / props.cp_solid + props.t_sat
    } else if h <= props.h_f {
        props.t_sat
    } else {
        (h - props.h_f) / props.cp_liquid + props.t_sat
    }
}

/// Phase from temperature: solid strictly below saturation.
pub fn pcm_phase_from_temperature(t: f64, props: &PcmProperties) -> Phase {
    if t < props.t_sat {
        Phase::Solid
    } else {
        Phase::Liquid
    }
}

/// Phase from enthalpy. Mushy states sit at `t_sat` and therefore report
/// [`Phase::Liquid`].
pub fn pcm_phase(h: f64, props: &PcmProperties) -> Phase {
    pcm_phase_from_temperature(pcm_temperature(h, props), props)
}

/// Inverse of [`pcm_temperature`] on the requested branch.
pub fn pcm_enthalpy(t: f64, phase: Phase, props: &PcmProperties) -> Result<f64> {
    match phase {
        Phase::Solid if t <= props.t_sat => Ok(props.cp_solid * (t - props.t_sat)),
        Phase::Liquid if t >= props.t_sat => Ok(props.h_f + props.cp_liquid * (t - props.t_sat)),
        _ => Err(TesError::InconsistentPhase {
            temperature: t,
            phase: phase.as_str(),
        }),
    }
}

pub fn single_phase_temperature(h: f64, props: &MaterialProperties) -> f64 {
    h / props.cp
}

pub fn single_phase_enthalpy(t: f64, props: &MaterialProperties) -> f64 {
    t * props.cp
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn water() -> PcmProperties {
        PcmProperties::default()
    }

    #[test]
    fn temperature_branches() {
        let p = water();
        assert_eq!(pcm_temperature(0.0, &p), 0.0);
        assert_eq!(pcm_temperature(334.0, &p), 0.0);
        assert_relative_eq!(pcm_temperature(-21.1, &p), -10.0, epsilon = 1e-12);
        assert_relative_eq!(pcm_temperature(375.8, &p), 10.0, epsilon = 1e-12);
    }

    #[test]
    fn phase_examples() {
        let p = water();
        assert_eq!(pcm_phase_from_temperature(-5.0, &p), Phase::Solid);
        assert_eq!(pcm_phase_from_temperature(0.0, &p), Phase::Liquid);
        assert_eq!(pcm_phase(0.5 * p.h_f, &p), Phase::Liquid);
        assert_eq!(pcm_phase(-1e-9, &p), Phase::Solid);
    }

    #[test]
    fn enthalpy_examples() {
        let p = water();
        assert_eq!(pcm_enthalpy(0.0, Phase::Solid, &p).unwrap(), 0.0);
        assert_relative_eq!(pcm_enthalpy(18.0, Phase::Liquid, &p).unwrap(), 409.24, epsilon = 1e-9);
        assert_relative_eq!(pcm_enthalpy(-18.0, Phase::Solid, &p).unwrap(), -37.98, epsilon = 1e-9);
        assert!(matches!(
            pcm_enthalpy(5.0, Phase::Solid, &p),
            Err(TesError::InconsistentPhase { .. })
        ));
        assert!(pcm_enthalpy(-5.0, Phase::Liquid, &p).is_err());
    }

    #[test]
    fn single_phase_examples() {
        let wg = MaterialProperties { cp: 3.4, rho: 1090.0, k: 1.0, h_conv: Some(1e4) };
        let cu = MaterialProperties { cp: 0.39, rho: 8960.0, k: 401.0, h_conv: None };
        assert_eq!(single_phase_temperature(0.0, &wg), 0.0);
        assert_relative_eq!(single_phase_temperature(61.2, &wg), 18.0, epsilon = 1e-12);
        assert_relative_eq!(single_phase_temperature(-7.02, &cu), -18.0, epsilon = 1e-12);
    }

    #[test]
    fn continuity_at_band_edges() {
        let p = water();
        for edge in [0.0, p.h_f] {
            for eps in [1e-3, 1e-6, 1e-9] {
                assert!((pcm_temperature(edge + eps, &p) - pcm_temperature(edge, &p)).abs() < eps);
                assert!((pcm_temperature(edge - eps, &p) - pcm_temperature(edge, &p)).abs() < eps);
            }
        }
    }

    #[test]
    fn invalid_props_rejected() {
        let mut p = water();
        p.k_liquid = 0.0;
        assert!(p.validate().is_err());
        assert!(water().validate().is_ok());
    }

    proptest! {
        #[test]
        fn temperature_monotone(a in -500.0..800.0f64, b in -500.0..800.0f64) {
            let p = water();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(pcm_temperature(lo, &p) <= pcm_temperature(hi, &p));
        }

        #[test]
        fn roundtrip_solid(t in -100.0..0.0f64) {
            let p = water();
            let h = pcm_enthalpy(t, Phase::Solid, &p).unwrap();
            let back = pcm_temperature(h, &p);
            prop_assert!((back - t).abs() <= 1e-12 * t.abs().max(1.0));
            if t < p.t_sat {
                prop_assert_eq!(pcm_phase(h, &p), Phase::Solid);
            }
        }

        #[test]
        fn roundtrip_liquid(t in 0.0..100.0f64) {
            let p = water();
            let h = pcm_enthalpy(t, Phase::Liquid, &p).unwrap();
            let back = pcm_temperature(h, &p);
            prop_assert!((back - t).abs() <= 1e-12 * t.abs().max(1.0));
        }
    }
}
