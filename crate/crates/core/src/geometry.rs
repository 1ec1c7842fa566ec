//! Cylinder kinematics.
//!
//! Volumes are in litres, lengths in millimetres and crank angles in degrees
//! after top dead centre of the compression stroke.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MM3_PER_LITRE: f64 = 1.0e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineGeometry {
    pub bore: f64,
    pub stroke: f64,
    pub rod_length: f64,
    pub compression_ratio: f64,
    pub n_cylinders: usize,
    pub ivo: f64,
    pub ivc: f64,
    pub evo: f64,
    pub evc: f64,
}

impl EngineGeometry {
    /// 12.4 L inline six used throughout the presets.
    pub fn heavy_duty_inline_six() -> Self {
        Self {
            bore: 126.0,
            stroke: 166.0,
            rod_length: 251.0,
            compression_ratio: 17.0,
            n_cylinders: 6,
            ivo: -363.5,
            ivc: -148.5,
            evo: 137.0,
            evc: 389.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.compression_ratio > 1.0) {
            return Err(Error::Domain {
                quantity: "compression_ratio",
                value: self.compression_ratio,
            });
        }
        if !(self.bore > 0.0 && self.stroke > 0.0) {
            return Err(Error::Domain {
                quantity: "bore/stroke",
                value: self.bore.min(self.stroke),
            });
        }
        if !(self.rod_length > self.stroke / 2.0) {
            return Err(Error::Domain {
                quantity: "rod_length",
                value: self.rod_length,
            });
        }
        if self.n_cylinders == 0 {
            return Err(Error::Domain {
                quantity: "n_cylinders",
                value: 0.0,
            });
        }
        Ok(())
    }

    fn piston_area(&self) -> f64 {
        std::f64::consts::FRAC_PI_4 * self.bore * self.bore
    }

    /// Swept volume of one cylinder, litres.
    pub fn displacement_per_cylinder(&self) -> f64 {
        self.piston_area() * self.stroke / MM3_PER_LITRE
    }

    pub fn total_displacement(&self) -> f64 {
        self.displacement_per_cylinder() * self.n_cylinders as f64
    }

    pub fn clearance_volume(&self) -> f64 {
        self.displacement_per_cylinder() / (self.compression_ratio - 1.0)
    }

    /// Slider-crank cylinder volume at crank angle `theta` (CAD aTDC), litres.
    pub fn volume(&self, theta: f64) -> f64 {
        let crank = self.stroke / 2.0;
        let (s, c) = theta.to_radians().sin_cos();
        let pin = crank * c + (self.rod_length.powi(2) - (crank * s).powi(2)).sqrt();
        let displacement = self.rod_length + crank - pin;
        self.clearance_volume() + self.piston_area() * displacement / MM3_PER_LITRE
    }

    pub fn volume_at_ivc(&self) -> f64 {
        self.volume(self.ivc)
    }
}

/// Free-function form of [`EngineGeometry::volume`].
pub fn cylinder_volume(geom: &EngineGeometry, theta: f64) -> f64 {
    geom.volume(theta)
}

impl Default for EngineGeometry {
    fn default() -> Self {
        Self::heavy_duty_inline_six()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn tdc_is_clearance_volume() {
        let g = EngineGeometry::default();
        assert_relative_eq!(g.volume(0.0), g.clearance_volume(), max_relative = 1e-14);
        assert_relative_eq!(
            g.clearance_volume(),
            g.displacement_per_cylinder() / 16.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn bdc_adds_one_displacement() {
        let g = EngineGeometry::default();
        assert_relative_eq!(
            g.volume(180.0),
            g.clearance_volume() + g.displacement_per_cylinder(),
            max_relative = 1e-12
        );
        // bore and stroke give 12.42 L; the nominal rating is 12.4 L
        assert_relative_eq!(
            g.displacement_per_cylinder(),
            12.4 / 6.0,
            max_relative = 5e-3
        );
    }

    #[test]
    fn rejects_short_rod() {
        let g = EngineGeometry {
            rod_length: 80.0,
            ..EngineGeometry::default()
        };
        assert!(g.validate().is_err());
        let g = EngineGeometry {
            compression_ratio: 1.0,
            ..EngineGeometry::default()
        };
        assert!(g.validate().is_err());
    }

    proptest! {
        #[test]
        fn volume_is_symmetric_and_bounded(theta in -720.0f64..720.0) {
            let g = EngineGeometry::default();
            let v = g.volume(theta);
            prop_assert!((v - g.volume(-theta)).abs() <= 1e-12 * v);
            let ratio = v / g.clearance_volume();
            prop_assert!(ratio >= 1.0 - 1e-12);
            prop_assert!(ratio <= g.compression_ratio + 1e-12);
        }

        #[test]
        fn volume_is_periodic(theta in -360.0f64..360.0) {
            let g = EngineGeometry::default();
            prop_assert!((g.volume(theta) - g.volume(theta + 360.0)).abs() < 1e-12);
        }
    }
}
