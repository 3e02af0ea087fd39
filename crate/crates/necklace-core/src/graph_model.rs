//! Vertex gluing data, the scattering-matrix/gluing-condition conversion and
//! the frequency/threshold mapping.
//!
//! The vertex condition is a real symmetric 3x3 matrix `A` entering the
//! boundary relation `dpsi/dz = sigma * A * psi` at every degree-3 vertex.
//! Components are ordered (arch of length l1, arch of length l2, straight
//! edge). `A` is related to the unitary symmetric junction scattering matrix
//! `T` by the Cayley-type transform `A = -i (I + T)^-1 (I - T)`.

use crate::mat::{CMat3, Mat2};
use alloc::vec::Vec;
use core::fmt;
use num_complex::Complex64;
use num_traits::Float;

/// Symmetry tolerance for user-supplied vertex conditions.
pub const SYMMETRY_INPUT_TOL: f64 = 1e-12;
/// Unitarity/symmetry tolerance for user-supplied scattering matrices.
/// Kept at 1e-10 so that converted gluing matrices meet their 1e-10
/// imaginary-residue contract.
pub const SCATTERING_INPUT_TOL: f64 = 1e-10;
/// |det(I + T)| below this marks an excluded (exceptional) frequency.
pub const SINGULAR_CONVERSION_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub enum GraphModelError {
    /// Vertex condition matrix is not symmetric at the offending index pair.
    Asymmetric { row: usize, col: usize, defect: f64 },
    /// Scattering matrix input fails unitarity or symmetry.
    NonUnitaryInput { defect: f64 },
    /// det(I + T) is too small; the conversion to a gluing condition is
    /// singular at this frequency.
    SingularConversion { det_magnitude: f64 },
    /// (eps * omega)^2 <= lambda0: no propagating mode.
    BelowThreshold { eps_omega_sq: f64 },
    /// (eps * omega)^2 >= lambda1: more than one propagating mode.
    MultiMode { eps_omega_sq: f64 },
    InvalidWave(&'static str),
    InvalidLengths(&'static str),
    InvalidTable(&'static str),
}

impl fmt::Display for GraphModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Asymmetric { row, col, defect } => write!(
                f,
                "vertex condition not symmetric at ({row},{col}): |a_ij - a_ji| = {defect:e}"
            ),
            Self::NonUnitaryInput { defect } => {
                write!(f, "scattering matrix not unitary symmetric (defect {defect:e})")
            }
            Self::SingularConversion { det_magnitude } => write!(
                f,
                "det(I + T) magnitude {det_magnitude:e} below threshold; exceptional frequency"
            ),
            Self::BelowThreshold { eps_omega_sq } => write!(
                f,
                "(eps*omega)^2 = {eps_omega_sq} at or below lambda0: wave does not propagate"
            ),
            Self::MultiMode { eps_omega_sq } => write!(
                f,
                "(eps*omega)^2 = {eps_omega_sq} at or above lambda1: outside the single-mode window"
            ),
            Self::InvalidWave(msg) | Self::InvalidLengths(msg) | Self::InvalidTable(msg) => {
                write!(f, "{msg}")
            }
        }
    }
}

/// Result of a symmetry check on a candidate 3x3 vertex condition.
#[derive(Clone, Copy, Debug)]
pub struct SymmetryReport {
    pub max_asymmetry: f64,
    pub worst_pair: (usize, usize),
}

impl SymmetryReport {
    pub fn accepted(&self) -> bool {
        self.max_asymmetry <= SYMMETRY_INPUT_TOL
    }
}

/// Reports the largest |a_ij - a_ji| and where it occurs.
pub fn validate_vertex_condition(entries: &[[f64; 3]; 3]) -> SymmetryReport {
    let mut worst = 0.0;
    let mut pair = (0, 1);
    for i in 0..3 {
        for j in (i + 1)..3 {
            let d = (entries[i][j] - entries[j][i]).abs();
            if d > worst {
                worst = d;
                pair = (i, j);
            }
        }
    }
    SymmetryReport {
        max_asymmetry: worst,
        worst_pair: pair,
    }
}

/// Real symmetric 3x3 gluing matrix at a degree-3 vertex.
///
/// Block structure: `[[B, delta], [delta^T, c]]` with B the 2x2 arch block,
/// delta the arch/straight coupling and c the straight-edge coefficient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VertexCondition {
    entries: [[f64; 3]; 3],
}

impl VertexCondition {
    pub fn new(entries: [[f64; 3]; 3]) -> Result<Self, GraphModelError> {
        let report = validate_vertex_condition(&entries);
        if !report.accepted() {
            let (row, col) = report.worst_pair;
            return Err(GraphModelError::Asymmetric {
                row,
                col,
                defect: report.max_asymmetry,
            });
        }
        Ok(Self { entries })
    }

    /// All-zero condition (Kirchhoff-free decoupled derivative condition).
    pub fn zero() -> Self {
        Self {
            entries: [[0.0; 3]; 3],
        }
    }

    /// Convenience constructor from the block data.
    pub fn from_blocks(b: Mat2, delta: [f64; 2], c: f64) -> Result<Self, GraphModelError> {
        Self::new([
            [b.m11, b.m12, delta[0]],
            [b.m21, b.m22, delta[1]],
            [delta[0], delta[1], c],
        ])
    }

    pub fn entries(&self) -> &[[f64; 3]; 3] {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j]
    }

    /// 2x2 arch-arch block B.
    pub fn coupling_block(&self) -> Mat2 {
        Mat2::new(
            self.entries[0][0],
            self.entries[0][1],
            self.entries[1][0],
            self.entries[1][1],
        )
    }

    /// Arch/straight coupling vector delta = (a13, a23).
    pub fn arch_coupling(&self) -> [f64; 2] {
        [self.entries[0][2], self.entries[1][2]]
    }

    /// Straight-edge coefficient c = a33.
    pub fn straight_coefficient(&self) -> f64 {
        self.entries[2][2]
    }

    /// Relabel the two arches (swap components 1 and 2). Physically a pure
    /// renaming; m, n and the Hill discriminant are invariant under it when
    /// the arch lengths are swapped along.
    pub fn swap_arches(&self) -> Self {
        let e = &self.entries;
        Self {
            entries: [
                [e[1][1], e[1][0], e[1][2]],
                [e[0][1], e[0][0], e[0][2]],
                [e[2][1], e[2][0], e[2][2]],
            ],
        }
    }
}

/// Unitary symmetric junction scattering matrix (degree 3).
#[derive(Clone, Copy, Debug)]
pub struct ScatteringMatrixJ {
    t: CMat3,
}

impl ScatteringMatrixJ {
    pub fn new(t: CMat3) -> Result<Self, GraphModelError> {
        let defect = unitarity_defect(&t).max(symmetry_defect(&t));
        if defect > SCATTERING_INPUT_TOL {
            return Err(GraphModelError::NonUnitaryInput { defect });
        }
        Ok(Self { t })
    }

    pub fn matrix(&self) -> &CMat3 {
        &self.t
    }
}

fn unitarity_defect(t: &CMat3) -> f64 {
    let p = t.mul(&t.conj_transpose());
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((p.e[i][j] - want).norm());
        }
    }
    worst
}

fn symmetry_defect(t: &CMat3) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in (i + 1)..3 {
            worst = worst.max((t.e[i][j] - t.e[j][i]).norm());
        }
    }
    worst
}

/// Conversion output: the gluing matrix plus the largest imaginary part
/// discarded when taking the real part (a quality measure of the input).
#[derive(Clone, Copy, Debug)]
pub struct ConversionOutcome {
    pub vc: VertexCondition,
    pub imag_residue: f64,
}

/// `A = -i (I + T)^-1 (I - T)`; real and symmetric for unitary symmetric T.
pub fn vertex_condition_from_scattering(
    t: &ScatteringMatrixJ,
) -> Result<ConversionOutcome, GraphModelError> {
    let i3 = CMat3::identity();
    let sum = i3.add(t.matrix());
    let det_magnitude = sum.det().norm();
    if det_magnitude < SINGULAR_CONVERSION_TOL {
        return Err(GraphModelError::SingularConversion { det_magnitude });
    }
    let inv = sum
        .inverse()
        .ok_or(GraphModelError::SingularConversion { det_magnitude })?;
    let a = inv.mul(&i3.sub(t.matrix())).scale(Complex64::new(0.0, -1.0));
    let mut imag_residue: f64 = 0.0;
    let mut real = [[0.0f64; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            imag_residue = imag_residue.max(a.e[i][j].im.abs());
            real[i][j] = a.e[i][j].re;
        }
    }
    // enforce exact symmetry of the emitted matrix; the averaged correction
    // is within the reported residue scale
    for i in 0..3 {
        for j in (i + 1)..3 {
            let v = 0.5 * (real[i][j] + real[j][i]);
            real[i][j] = v;
            real[j][i] = v;
        }
    }
    let vc = VertexCondition::new(real)?;
    Ok(ConversionOutcome { vc, imag_residue })
}

/// Inverse Cayley map: the unique unitary symmetric T with
/// `-i (I + T)^-1 (I - T) = A`, namely `T = (I - iA)(I + iA)^-1`.
///
/// `I + iA` is invertible for every real symmetric A (eigenvalues `1 + i*l`),
/// so this cannot fail.
pub fn scattering_from_vertex_condition(vc: &VertexCondition) -> ScatteringMatrixJ {
    let a = CMat3::from_real(vc.entries());
    let ia = a.scale(Complex64::new(0.0, 1.0));
    let i3 = CMat3::identity();
    let inv = i3
        .add(&ia)
        .inverse()
        .expect("I + iA is always invertible for real symmetric A");
    let t = i3.sub(&ia).mul(&inv);
    ScatteringMatrixJ { t }
}

/// Thin-fiber context: fiber thickness and the first two cross-section
/// eigenvalues bounding the single-mode window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaveContext {
    pub epsilon: f64,
    pub lambda0: f64,
    pub lambda1: f64,
}

impl WaveContext {
    pub fn new(epsilon: f64, lambda0: f64, lambda1: f64) -> Result<Self, GraphModelError> {
        if !(epsilon > 0.0) {
            return Err(GraphModelError::InvalidWave("epsilon must be positive"));
        }
        if !(lambda0 > 0.0 && lambda1 > lambda0) {
            return Err(GraphModelError::InvalidWave(
                "cross-section eigenvalues must satisfy 0 < lambda0 < lambda1",
            ));
        }
        Ok(Self {
            epsilon,
            lambda0,
            lambda1,
        })
    }
}

/// Effective 1D wavenumber `sigma = sqrt(omega^2 - lambda0 / eps^2)`,
/// defined on the single-mode window `lambda0 < (eps*omega)^2 < lambda1`.
pub fn sigma_from_omega(omega: f64, ctx: &WaveContext) -> Result<f64, GraphModelError> {
    let ew2 = (ctx.epsilon * omega) * (ctx.epsilon * omega);
    if ew2 <= ctx.lambda0 {
        return Err(GraphModelError::BelowThreshold { eps_omega_sq: ew2 });
    }
    if ew2 >= ctx.lambda1 {
        return Err(GraphModelError::MultiMode { eps_omega_sq: ew2 });
    }
    Ok((omega * omega - ctx.lambda0 / (ctx.epsilon * ctx.epsilon)).sqrt())
}

/// Inverse of [`sigma_from_omega`]: `omega = sqrt(sigma^2 + lambda0/eps^2)`.
pub fn omega_from_sigma(sigma: f64, ctx: &WaveContext) -> Result<f64, GraphModelError> {
    if !(sigma > 0.0) {
        return Err(GraphModelError::InvalidWave("sigma must be positive"));
    }
    let omega = (sigma * sigma + ctx.lambda0 / (ctx.epsilon * ctx.epsilon)).sqrt();
    let ew2 = (ctx.epsilon * omega) * (ctx.epsilon * omega);
    if ew2 >= ctx.lambda1 {
        return Err(GraphModelError::MultiMode { eps_omega_sq: ew2 });
    }
    Ok(omega)
}

/// One period of the necklace graph: two arches (l1 >= l2), a straight
/// segment l3, and the shared vertex condition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NecklaceParams {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub vc: VertexCondition,
}

impl NecklaceParams {
    pub fn new(l1: f64, l2: f64, l3: f64, vc: VertexCondition) -> Result<Self, GraphModelError> {
        if !(l2 > 0.0 && l1 >= l2) {
            return Err(GraphModelError::InvalidLengths(
                "arch lengths must satisfy l1 >= l2 > 0",
            ));
        }
        if !(l3 > 0.0) {
            return Err(GraphModelError::InvalidLengths("l3 must be positive"));
        }
        Ok(Self { l1, l2, l3, vc })
    }
}

/// Frequency-dependent vertex condition given as a table of
/// `(eps*omega, A)` rows with piecewise-linear interpolation.
///
/// Entrywise interpolation of symmetric matrices stays symmetric. Outside the
/// table range the nearest row is used. Scan-only: the design procedure works
/// with a constant condition.
#[derive(Clone, Debug)]
pub struct ConditionTable {
    rows: Vec<(f64, VertexCondition)>,
}

impl ConditionTable {
    pub fn new(rows: Vec<(f64, VertexCondition)>) -> Result<Self, GraphModelError> {
        if rows.is_empty() {
            return Err(GraphModelError::InvalidTable("condition table is empty"));
        }
        for w in rows.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(GraphModelError::InvalidTable(
                    "condition table keys must be strictly increasing",
                ));
            }
        }
        Ok(Self { rows })
    }

    pub fn at(&self, eps_omega: f64) -> VertexCondition {
        let rows = &self.rows;
        if eps_omega <= rows[0].0 {
            return rows[0].1;
        }
        if eps_omega >= rows[rows.len() - 1].0 {
            return rows[rows.len() - 1].1;
        }
        let hi = rows.partition_point(|(k, _)| *k < eps_omega);
        let (k0, a0) = rows[hi - 1];
        let (k1, a1) = rows[hi];
        let t = (eps_omega - k0) / (k1 - k0);
        let mut e = [[0.0f64; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                e[i][j] = (1.0 - t) * a0.entry(i, j) + t * a1.entry(i, j);
            }
        }
        VertexCondition { entries: e }
    }
}
