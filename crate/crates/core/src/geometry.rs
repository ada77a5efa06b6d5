//! Concentric-pipe geometry, material set and the wall resistances shared by
//! both plant models.
//!
//! All resistances returned here are in °C/kW so that they divide a
//! temperature difference directly into kW.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TesError};
use crate::thermo::{MaterialProperties, PcmProperties};

/// Radial dimensions of the device. Radii are derived from the inner radius
/// and the layer thicknesses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TesGeometry {
    #[serde(rename = "r1_m")]
    pub r1: f64,
    #[serde(rename = "inner_wall_thickness_m")]
    pub dr_inner_wall: f64,
    #[serde(rename = "pcm_thickness_m")]
    pub dr_pcm: f64,
    #[serde(rename = "outer_wall_thickness_m")]
    pub dr_outer_wall: f64,
    #[serde(rename = "length_m")]
    pub length: f64,
}

impl Default for TesGeometry {
    fn default() -> Self {
        TesGeometry {
            r1: 6.0e-3,
            dr_inner_wall: 0.8e-3,
            dr_pcm: 19.1e-3,
            dr_outer_wall: 6.4e-3,
            length: 1.0,
        }
    }
}

impl TesGeometry {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("r1_m", self.r1),
            ("inner_wall_thickness_m", self.dr_inner_wall),
            ("pcm_thickness_m", self.dr_pcm),
            ("outer_wall_thickness_m", self.dr_outer_wall),
            ("length_m", self.length),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(TesError::invalid(format!("geometry.{name}"), format!("must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Inner-wall mid radius.
    pub fn r_inner_wall_mid(&self) -> f64 {
        self.r1 + 0.5 * self.dr_inner_wall
    }

    /// PCM inner face.
    pub fn r_pcm_inner(&self) -> f64 {
        self.r1 + self.dr_inner_wall
    }

    /// PCM outer face (container inner face).
    pub fn r_pcm_outer(&self) -> f64 {
        self.r_pcm_inner() + self.dr_pcm
    }

    pub fn r_outer_wall_mid(&self) -> f64 {
        self.r_pcm_outer() + 0.5 * self.dr_outer_wall
    }

    pub fn r_outer(&self) -> f64 {
        self.r_pcm_outer() + self.dr_outer_wall
    }

    pub fn annulus_volume(&self, r_in: f64, r_out: f64) -> f64 {
        PI * self.length * (r_out * r_out - r_in * r_in)
    }

    pub fn fluid_volume(&self) -> f64 {
        PI * self.length * self.r1 * self.r1
    }

    pub fn inner_wall_volume(&self) -> f64 {
        self.annulus_volume(self.r1, self.r_pcm_inner())
    }

    pub fn pcm_volume(&self) -> f64 {
        self.annulus_volume(self.r_pcm_inner(), self.r_pcm_outer())
    }

    pub fn outer_wall_volume(&self) -> f64 {
        self.annulus_volume(self.r_pcm_outer(), self.r_outer())
    }

    /// Conduction resistance of the annulus `[r_in, r_out]`, °C/kW.
    pub fn conduction(&self, r_in: f64, r_out: f64, k_w: f64) -> f64 {
        (r_out / r_in).ln() / (2.0 * PI * self.length * k_w * 1e-3)
    }

    /// Convective film resistance at radius `r`, °C/kW.
    pub fn convection(&self, r: f64, h_w: f64) -> f64 {
        1.0 / (2.0 * PI * r * self.length * h_w * 1e-3)
    }
}

/// Equal-volume mid radius of the annulus `[a, b]`.
pub fn equal_volume_mid(a: f64, b: f64) -> f64 {
    (0.5 * (a * a + b * b)).sqrt()
}

/// Geometry plus every material constant a plant model needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TesParameters {
    pub geometry: TesGeometry,
    pub pcm: PcmProperties,
    pub working_fluid: MaterialProperties,
    pub inner_wall: MaterialProperties,
    pub outer_wall: MaterialProperties,
    #[serde(rename = "h_air_w_per_m2_c")]
    pub h_air: f64,
    #[serde(rename = "r_ins_c_per_w")]
    pub r_ins: f64,
    /// Total PCM mass used by the moving-boundary model.
    #[serde(rename = "pcm_mass_kg")]
    pub pcm_mass: f64,
}

impl Default for TesParameters {
    fn default() -> Self {
        TesParameters {
            geometry: TesGeometry::default(),
            pcm: PcmProperties::default(),
            working_fluid: MaterialProperties {
                cp: 3.4,
                rho: 1090.0,
                // Not used: the fluid exchanges heat by convection only.
                k: 0.4,
                h_conv: Some(1.0e4),
            },
            inner_wall: MaterialProperties {
                cp: 0.39,
                rho: 8960.0,
                k: 401.0,
                h_conv: None,
            },
            outer_wall: MaterialProperties {
                cp: 0.88,
                rho: 1350.0,
                k: 0.20,
                h_conv: None,
            },
            h_air: 5.0,
            r_ins: 1.0e14,
            pcm_mass: 1.90,
        }
    }
}

impl TesParameters {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.pcm.validate()?;
        self.working_fluid.validate("working_fluid")?;
        self.inner_wall.validate("inner_wall")?;
        self.outer_wall.validate("outer_wall")?;
        if self.working_fluid.h_conv.is_none() {
            return Err(TesError::invalid("working_fluid.h_conv_w_per_m2_c", "required"));
        }
        for (name, v) in [("h_air_w_per_m2_c", self.h_air), ("pcm_mass_kg", self.pcm_mass)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(TesError::invalid(name, format!("must be > 0, got {v}")));
            }
        }
        if !(self.r_ins.is_finite() && self.r_ins >= 0.0) {
            return Err(TesError::invalid("r_ins_c_per_w", "must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn wall_resistances(&self) -> WallResistances {
        let g = &self.geometry;
        let h_wf = self.working_fluid.h_conv.unwrap_or(f64::NAN);
        WallResistances {
            fluid_film: g.convection(g.r1, h_wf),
            inner_wall_inner_half: g.conduction(g.r1, g.r_inner_wall_mid(), self.inner_wall.k),
            inner_wall_outer_half: g.conduction(g.r_inner_wall_mid(), g.r_pcm_inner(), self.inner_wall.k),
            outer_wall_inner_half: g.conduction(g.r_pcm_outer(), g.r_outer_wall_mid(), self.outer_wall.k),
            outer_wall_outer_half: g.conduction(g.r_outer_wall_mid(), g.r_outer(), self.outer_wall.k),
            insulation: self.r_ins * 1e3,
            air_film: g.convection(g.r_outer(), self.h_air),
        }
    }

    pub fn fluid_mass(&self) -> f64 {
        self.working_fluid.rho * self.geometry.fluid_volume()
    }

    pub fn inner_wall_mass(&self) -> f64 {
        self.inner_wall.rho * self.geometry.inner_wall_volume()
    }

    pub fn outer_wall_mass(&self) -> f64 {
        self.outer_wall.rho * self.geometry.outer_wall_volume()
    }
}

/// Fixed resistances of the fluid film, both walls and the air side, °C/kW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WallResistances {
    pub fluid_film: f64,
    pub inner_wall_inner_half: f64,
    pub inner_wall_outer_half: f64,
    pub outer_wall_inner_half: f64,
    pub outer_wall_outer_half: f64,
    pub insulation: f64,
    pub air_film: f64,
}

impl WallResistances {
    /// Fluid vertex to inner-wall vertex.
    pub fn fluid_to_wall(&self) -> f64 {
        self.fluid_film + self.inner_wall_inner_half
    }

    /// Outer-wall vertex to ambient air.
    pub fn outer_to_air(&self) -> f64 {
        self.outer_wall_outer_half + self.insulation + self.air_film
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn radii_from_thicknesses() {
        let g = TesGeometry::default();
        assert_relative_eq!(g.r_inner_wall_mid(), 6.4e-3, epsilon = 1e-12);
        assert_relative_eq!(g.r_pcm_inner(), 6.8e-3, epsilon = 1e-12);
        assert_relative_eq!(g.r_pcm_outer(), 25.9e-3, epsilon = 1e-12);
        assert_relative_eq!(g.r_outer_wall_mid(), 29.1e-3, epsilon = 1e-12);
        assert_relative_eq!(g.r_outer(), 32.3e-3, epsilon = 1e-12);
    }

    #[test]
    fn fluid_film_resistance() {
        let p = TesParameters::default();
        let r = p.wall_resistances();
        // 2.653e-3 °C/W
        assert_relative_eq!(r.fluid_film, 1e3 / (2.0 * PI * 0.006 * 1.0e4), max_relative = 1e-12);
        assert!((r.fluid_film * 1e-3 - 2.653e-3).abs() < 1e-6);
    }

    #[test]
    fn rejects_non_positive_dimensions() {
        let mut g = TesGeometry::default();
        g.dr_pcm = 0.0;
        assert!(g.validate().is_err());
        let mut p = TesParameters::default();
        p.pcm_mass = -1.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn mid_radius_splits_volume() {
        let (a, b) = (0.01, 0.03);
        let m = equal_volume_mid(a, b);
        assert_relative_eq!(m * m - a * a, b * b - m * m, epsilon = 1e-15);
    }
}
