//! Two-component (Jones) field samples and 2x2 polarization transforms.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One complex baseband field sample with horizontal/vertical components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jones {
    pub h: Complex64,
    pub v: Complex64,
}

impl Jones {
    pub const ZERO: Jones = Jones {
        h: Complex64::new(0.0, 0.0),
        v: Complex64::new(0.0, 0.0),
    };

    #[inline]
    pub fn new(h: Complex64, v: Complex64) -> Self {
        Jones { h, v }
    }

    /// Horizontally polarized unit vector (1, 0).
    pub fn horizontal() -> Self {
        Jones::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    }

    /// Total intensity |h|^2 + |v|^2.
    #[inline]
    pub fn intensity(&self) -> f64 {
        self.h.norm_sqr() + self.v.norm_sqr()
    }

    #[inline]
    pub fn scale(&self, s: f64) -> Jones {
        Jones::new(self.h * s, self.v * s)
    }

    #[inline]
    pub fn scale_complex(&self, s: Complex64) -> Jones {
        Jones::new(self.h * s, self.v * s)
    }

    #[inline]
    pub fn add(&self, other: &Jones) -> Jones {
        Jones::new(self.h + other.h, self.v + other.v)
    }

    #[inline]
    pub fn sub(&self, other: &Jones) -> Jones {
        Jones::new(self.h - other.h, self.v - other.v)
    }

    pub fn norm(&self) -> f64 {
        self.intensity().sqrt()
    }
}

/// A 2x2 complex matrix acting on Jones vectors, expected unitary when used
/// as a polarization rotation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JonesMatrix {
    pub m: [[Complex64; 2]; 2],
}

impl JonesMatrix {
    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        JonesMatrix {
            m: [[one, zero], [zero, one]],
        }
    }

    /// Real rotation by `theta` radians between the two components.
    pub fn rotation(theta_rad: f64) -> Self {
        let c = Complex64::new(theta_rad.cos(), 0.0);
        let s = Complex64::new(theta_rad.sin(), 0.0);
        JonesMatrix {
            m: [[c, -s], [s, c]],
        }
    }

    /// Largest absolute deviation of `M^H M` from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..2 {
                    acc += self.m[k][i].conj() * self.m[k][j];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((acc - target).norm());
            }
        }
        worst
    }

    /// Validate unitarity within `tol`.
    pub fn check_unitary(&self, tol: f64) -> Result<()> {
        let defect = self.unitarity_defect();
        if defect > tol {
            return Err(Error::NonUnitaryRotation { defect });
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        *self == JonesMatrix::identity()
    }

    #[inline]
    pub fn apply(&self, x: &Jones) -> Jones {
        Jones::new(
            self.m[0][0] * x.h + self.m[0][1] * x.v,
            self.m[1][0] * x.h + self.m[1][1] * x.v,
        )
    }
}

impl Default for JonesMatrix {
    fn default() -> Self {
        JonesMatrix::identity()
    }
}
