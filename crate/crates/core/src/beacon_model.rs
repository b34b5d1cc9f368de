//! Quadratic beacon-level model around the satellite direction.
//!
//! Near boresight the received beacon level is approximated by a downward
//! paraboloid in (azimuth, elevation):
//!
//! `L(x, y) = k_x (x - p)^2 + k_y (y - q)^2 + l_pq`
//!
//! Angles are degrees, levels dB, coefficients dB/deg².

use crate::error::{Error, Result};

/// Default elevation curvature, dB/deg².
pub const DEFAULT_K_Y: f64 = -11.4;

/// Smallest coefficient magnitude accepted by the peak recovery, dB/deg².
pub const DEFAULT_KX_FLOOR: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticCoefficients {
    pub k_x: f64,
    pub k_y: f64,
}

impl QuadraticCoefficients {
    pub fn new(k_x: f64, k_y: f64) -> Result<Self> {
        if !(k_x < 0.0 && k_y < 0.0) {
            return Err(Error::Domain(format!(
                "quadratic coefficients must be negative, got k_x={k_x}, k_y={k_y}"
            )));
        }
        Ok(Self { k_x, k_y })
    }

    /// Derives `k_x` from `k_y` at elevation `h0_deg`.
    pub fn from_elevation(k_y: f64, h0_deg: f64) -> Result<Self> {
        let k_x = kx_from_elevation(k_y, h0_deg)?;
        Self::new(k_x, k_y)
    }

    /// Fails if either coefficient is smaller in magnitude than `floor`.
    pub fn check_floor(&self, floor: f64) -> Result<()> {
        for (name, value) in [("k_x", self.k_x), ("k_y", self.k_y)] {
            if !(value.abs() >= floor) {
                return Err(Error::DegenerateCoefficient { name, value, floor });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolaParams {
    pub k_x: f64,
    pub k_y: f64,
    /// Satellite azimuth, deg.
    pub p: f64,
    /// Satellite elevation, deg.
    pub q: f64,
    /// Peak level, dB.
    pub l_pq: f64,
}

impl ParabolaParams {
    pub fn new(coeffs: QuadraticCoefficients, p: f64, q: f64, l_pq: f64) -> Self {
        Self {
            k_x: coeffs.k_x,
            k_y: coeffs.k_y,
            p,
            q,
            l_pq,
        }
    }

    pub fn coefficients(&self) -> QuadraticCoefficients {
        QuadraticCoefficients {
            k_x: self.k_x,
            k_y: self.k_y,
        }
    }
}

/// Ideal beacon level at pointing (`azimuth`, `elevation`).
pub fn beacon_level(params: &ParabolaParams, azimuth: f64, elevation: f64) -> f64 {
    let dx = azimuth - params.p;
    let dy = elevation - params.q;
    params.k_x * dx * dx + params.k_y * dy * dy + params.l_pq
}

/// `k_y * cos²(h0)`. Returns 0 at the zenith; callers that feed the
/// estimators must enforce a magnitude floor.
pub fn kx_from_elevation(k_y: f64, h0_deg: f64) -> Result<f64> {
    if !(0.0..=90.0).contains(&h0_deg) {
        return Err(Error::Domain(format!(
            "elevation {h0_deg} deg outside [0, 90]"
        )));
    }
    if !(k_y < 0.0) {
        return Err(Error::Domain(format!("k_y must be negative, got {k_y}")));
    }
    // cos(90°) is 6e-17 in f64, keep the degenerate end exact
    if h0_deg == 90.0 {
        return Ok(0.0);
    }
    let c = h0_deg.to_radians().cos();
    Ok(k_y * c * c)
}
