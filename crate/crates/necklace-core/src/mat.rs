//! Small fixed-size matrix helpers used throughout the crate.
//!
//! Everything here is 2x2 or 3x3 with closed-form inverses; the dimensions
//! never change, so no general linear algebra library is pulled in.

use num_complex::Complex64;
use num_traits::Float;

/// Real 2x2 matrix with named entries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2 {
    pub m11: f64,
    pub m12: f64,
    pub m21: f64,
    pub m22: f64,
}

impl Mat2 {
    pub const fn new(m11: f64, m12: f64, m21: f64, m22: f64) -> Self {
        Self { m11, m12, m21, m22 }
    }

    pub const fn identity() -> Self {
        Self::new(1.0, 0.0, 0.0, 1.0)
    }

    pub const fn diagonal(d1: f64, d2: f64) -> Self {
        Self::new(d1, 0.0, 0.0, d2)
    }

    /// Transfer matrix of free propagation over phase `theta`, acting on
    /// Cauchy data (psi, psi'/sigma).
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c, s, -s, c)
    }

    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    pub fn trace(&self) -> f64 {
        self.m11 + self.m22
    }

    /// Squared Hilbert-Schmidt (Frobenius) norm: sum of squared entries.
    pub fn hs_norm_sq(&self) -> f64 {
        self.m11 * self.m11 + self.m12 * self.m12 + self.m21 * self.m21 + self.m22 * self.m22
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.m11, self.m21, self.m12, self.m22)
    }

    pub fn mul(&self, o: &Self) -> Self {
        Self::new(
            self.m11 * o.m11 + self.m12 * o.m21,
            self.m11 * o.m12 + self.m12 * o.m22,
            self.m21 * o.m11 + self.m22 * o.m21,
            self.m21 * o.m12 + self.m22 * o.m22,
        )
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new(
            self.m11 + o.m11,
            self.m12 + o.m12,
            self.m21 + o.m21,
            self.m22 + o.m22,
        )
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self::new(
            self.m11 - o.m11,
            self.m12 - o.m12,
            self.m21 - o.m21,
            self.m22 - o.m22,
        )
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.m11 * s, self.m12 * s, self.m21 * s, self.m22 * s)
    }

    /// Adjugate, so that `self * adjugate = det * I`.
    pub fn adjugate(&self) -> Self {
        Self::new(self.m22, -self.m12, -self.m21, self.m11)
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.m11 * v[0] + self.m12 * v[1],
            self.m21 * v[0] + self.m22 * v[1],
        ]
    }
}

/// Quadratic form <u, M v> for 2-vectors.
pub fn quad2(u: [f64; 2], m: &Mat2, v: [f64; 2]) -> f64 {
    let mv = m.apply(v);
    u[0] * mv[0] + u[1] * mv[1]
}

pub fn dot2(u: [f64; 2], v: [f64; 2]) -> f64 {
    u[0] * v[0] + u[1] * v[1]
}

/// Complex 3x3 matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CMat3 {
    pub e: [[Complex64; 3]; 3],
}

impl CMat3 {
    pub fn zeros() -> Self {
        Self {
            e: [[Complex64::new(0.0, 0.0); 3]; 3],
        }
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..3 {
            m.e[i][i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_real(a: &[[f64; 3]; 3]) -> Self {
        let mut m = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m.e[i][j] = Complex64::new(a[i][j], 0.0);
            }
        }
        m
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut m = *self;
        for row in m.e.iter_mut() {
            for x in row.iter_mut() {
                *x *= s;
            }
        }
        m
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut m = *self;
        for i in 0..3 {
            for j in 0..3 {
                m.e[i][j] += o.e[i][j];
            }
        }
        m
    }

    pub fn sub(&self, o: &Self) -> Self {
        let mut m = *self;
        for i in 0..3 {
            for j in 0..3 {
                m.e[i][j] -= o.e[i][j];
            }
        }
        m
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut m = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..3 {
                    acc += self.e[i][k] * o.e[k][j];
                }
                m.e[i][j] = acc;
            }
        }
        m
    }

    pub fn det(&self) -> Complex64 {
        let e = &self.e;
        e[0][0] * (e[1][1] * e[2][2] - e[1][2] * e[2][1])
            - e[0][1] * (e[1][0] * e[2][2] - e[1][2] * e[2][0])
            + e[0][2] * (e[1][0] * e[2][1] - e[1][1] * e[2][0])
    }

    /// Inverse by cofactor expansion; caller is responsible for checking the
    /// determinant magnitude first.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d.norm() == 0.0 {
            return None;
        }
        let e = &self.e;
        let mut c = Self::zeros();
        // cofactor(i,j) transposed into (j,i)
        c.e[0][0] = e[1][1] * e[2][2] - e[1][2] * e[2][1];
        c.e[1][0] = -(e[1][0] * e[2][2] - e[1][2] * e[2][0]);
        c.e[2][0] = e[1][0] * e[2][1] - e[1][1] * e[2][0];
        c.e[0][1] = -(e[0][1] * e[2][2] - e[0][2] * e[2][1]);
        c.e[1][1] = e[0][0] * e[2][2] - e[0][2] * e[2][0];
        c.e[2][1] = -(e[0][0] * e[2][1] - e[0][1] * e[2][0]);
        c.e[0][2] = e[0][1] * e[1][2] - e[0][2] * e[1][1];
        c.e[1][2] = -(e[0][0] * e[1][2] - e[0][2] * e[1][0]);
        c.e[2][2] = e[0][0] * e[1][1] - e[0][1] * e[1][0];
        Some(c.scale(Complex64::new(1.0, 0.0) / d))
    }

    pub fn conj_transpose(&self) -> Self {
        let mut m = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m.e[i][j] = self.e[j][i].conj();
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        let mut w: f64 = 0.0;
        for row in &self.e {
            for x in row {
                w = w.max(x.norm());
            }
        }
        w
    }
}
