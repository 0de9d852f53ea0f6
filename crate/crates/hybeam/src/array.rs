//! Antenna array geometries and steering (array response) vectors.

use num_complex::Complex64;
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::CVector;

/// Element layout of a transmit or receive array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrayKind {
    /// Uniform linear array with `elements` antennas along one axis.
    Ula { elements: usize },
    /// Uniform planar array, flattened row-major (all columns of row 0,
    /// then row 1, ...).
    Upa { rows: usize, cols: usize },
}

/// An antenna array: layout plus element spacing in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    pub kind: ArrayKind,
    /// Element spacing in wavelengths; 0.5 for the usual half-wavelength grid.
    pub spacing: f64,
}

impl ArrayGeometry {
    pub fn ula(elements: usize) -> Self {
        ArrayGeometry {
            kind: ArrayKind::Ula { elements },
            spacing: 0.5,
        }
    }

    pub fn upa(rows: usize, cols: usize) -> Self {
        ArrayGeometry {
            kind: ArrayKind::Upa { rows, cols },
            spacing: 0.5,
        }
    }

    pub fn with_spacing(mut self, spacing: f64) -> Self {
        self.spacing = spacing;
        self
    }

    pub fn n_elements(&self) -> usize {
        match self.kind {
            ArrayKind::Ula { elements } => elements,
            ArrayKind::Upa { rows, cols } => rows * cols,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_elements() == 0 {
            return Err(Error::invalid("array must have at least one element"));
        }
        if !(self.spacing > 0.0) {
            return Err(Error::invalid("element spacing must be positive"));
        }
        Ok(())
    }
}

/// Array response vector for a plane wave at (`azimuth`, `elevation`), both in
/// radians. Entries are unit modulus; no 1/sqrt(N) normalization is applied.
///
/// ULA element m carries phase `2*pi*spacing*m*sin(az)` (elevation ignored).
/// UPA element (r, c) carries phase
/// `2*pi*spacing*(r*sin(el) + c*cos(el)*sin(az))`, flattened row-major.
pub fn steering_vector(geom: &ArrayGeometry, azimuth: f64, elevation: f64) -> Result<CVector> {
    geom.validate()?;
    if !azimuth.is_finite() || !elevation.is_finite() {
        return Err(Error::invalid("steering angles must be finite"));
    }
    let unit = |phase: f64| Complex64::from_polar(1.0, phase);
    let v = match geom.kind {
        ArrayKind::Ula { elements } => {
            let step = TAU * geom.spacing * azimuth.sin();
            CVector::from_iterator(elements, (0..elements).map(|m| unit(step * m as f64)))
        }
        ArrayKind::Upa { rows, cols } => {
            let row_step = TAU * geom.spacing * elevation.sin();
            let col_step = TAU * geom.spacing * elevation.cos() * azimuth.sin();
            CVector::from_iterator(
                rows * cols,
                (0..rows).flat_map(|r| {
                    (0..cols).map(move |c| unit(row_step * r as f64 + col_step * c as f64))
                }),
            )
        }
    };
    Ok(v)
}
