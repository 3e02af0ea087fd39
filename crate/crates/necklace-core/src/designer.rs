//! Parameter design: edge lengths that place a narrow band at a target
//! wavenumber with simultaneous transparency.
//!
//! Given the vertex condition, a target sigma0 and a detuning eps, the
//! procedure fixes the tangent half-angle variables
//! `x = tan(sigma0 l1 / 2) = a11 - a12 d1/d2 + eps`, solves the transparency
//! condition `(m+n)(m-n) + 1 = 0` for y near `a22 - a12 d2/d1`, converts to
//! lengths, and picks l3 so the Hill discriminant vanishes at sigma0. The
//! result is a band of width O(eps^2) around sigma0 with a pole of F at
//! distance O(eps^2), reflection exactly cancelled at sigma0, and group
//! velocity O(eps^2) across the inner passband.

use crate::graph_model::{NecklaceParams, VertexCondition};
use crate::monodromy::{
    hill_discriminant, loop_branches_xy, loop_transfer_from, orthogonality_residual, HillPoint,
    LoopBranches, MonodromyError,
};
use crate::spectrum::{self, SpectrumError};
use crate::truncated_scattering::{
    solve_scattering_oracle, ScatteringError, TruncatedNecklace,
};
use core::fmt;
use num_traits::Float;

/// Residual bound for the transparency equation at the solved (x, y).
pub const RNRN_RESIDUAL_TOL: f64 = 1e-10;
/// Bound for (m+n)(m-n)+1 re-checked at sigma0 after length conversion.
pub const MO1_TOL: f64 = 1e-8;
/// Bound for |F(sigma0)| after choosing l3.
pub const F0_TOL: f64 = 1e-10;
/// sin of the angle between the sigma-motion and the design parabola tangent
/// below which the direction counts as tangent and the branch is retried.
pub const TANGENCY_TOL: f64 = 1e-6;
/// Cell count used for the verification reflection diagnostic.
pub const DIAG_N_CELLS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub enum DesignerError {
    /// delta1 * delta2 = 0: an arch is decoupled, the design equations
    /// degenerate.
    Degenerate,
    /// No real transparency root inside the widened search bracket.
    NoRoot { seed: f64, halfwidth: f64 },
    /// The (l1, l2) direction stayed tangent to the design parabola for
    /// every tried branch offset.
    TangentDirection,
    /// n(sigma0) vanishes: transparency and the pole collide at the target.
    PoleAtSigma0,
    /// No pole of the Hill discriminant found near sigma0.
    PoleNotFound,
    /// An internal post-condition failed (reported value attached).
    PostCheck { what: &'static str, value: f64 },
    /// Recomputed diagnostics disagree with the stored ones.
    VerificationMismatch {
        what: &'static str,
        stored: f64,
        recomputed: f64,
    },
    Spectrum(SpectrumError),
    Scattering(ScatteringError),
    Monodromy(MonodromyError),
}

impl fmt::Display for DesignerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Degenerate => write!(f, "Degenerate: both arch couplings delta1, delta2 must be nonzero"),
            Self::NoRoot { seed, halfwidth } => write!(
                f,
                "no transparency root near y = {seed} (half-width {halfwidth})"
            ),
            Self::TangentDirection => {
                write!(f, "(l1, l2) tangent to the design parabola for all tried branches")
            }
            Self::PoleAtSigma0 => write!(f, "n(sigma0) = 0: degenerate transparency point"),
            Self::PoleNotFound => write!(f, "no Hill-discriminant pole found near sigma0"),
            Self::PostCheck { what, value } => write!(f, "post-check {what} failed: {value:e}"),
            Self::VerificationMismatch {
                what,
                stored,
                recomputed,
            } => write!(
                f,
                "verification mismatch on {what}: stored {stored:e}, recomputed {recomputed:e}"
            ),
            Self::Spectrum(e) => write!(f, "{e}"),
            Self::Scattering(e) => write!(f, "{e}"),
            Self::Monodromy(e) => write!(f, "{e}"),
        }
    }
}

impl From<SpectrumError> for DesignerError {
    fn from(e: SpectrumError) -> Self {
        Self::Spectrum(e)
    }
}

impl From<ScatteringError> for DesignerError {
    fn from(e: ScatteringError) -> Self {
        Self::Scattering(e)
    }
}

impl From<MonodromyError> for DesignerError {
    fn from(e: MonodromyError) -> Self {
        Self::Monodromy(e)
    }
}

/// Input to the design procedure.
#[derive(Clone, Copy, Debug)]
pub struct DesignRequest {
    pub vc: VertexCondition,
    pub sigma0: f64,
    pub eps: f64,
    /// Extra arctangent branch counts for (l1, l2) on top of the smallest
    /// positive choice.
    pub branch_offsets: (u32, u32),
}

impl DesignRequest {
    pub fn new(vc: VertexCondition, sigma0: f64, eps: f64) -> Self {
        Self {
            vc,
            sigma0,
            eps,
            branch_offsets: (0, 0),
        }
    }
}

/// Transparency residual `(m+n)(m-n) + 1` in the tangent variables.
pub fn rnrn_residual(vc: &VertexCondition, x: f64, y: f64) -> f64 {
    let LoopBranches { sum, diff } = loop_branches_xy(vc, x, y);
    sum * diff + 1.0
}

/// 2n in the tangent variables (the pole-equation left-hand side).
pub fn n_residual_xy(vc: &VertexCondition, x: f64, y: f64) -> f64 {
    let LoopBranches { sum, diff } = loop_branches_xy(vc, x, y);
    sum - diff
}

/// Cleared-denominator form of the transparency equation: for fixed x this
/// is a quadratic in y whose genuine roots coincide with those of
/// [`rnrn_residual`]. Continuous in y, hence safe to bracket.
fn transparency_poly(vc: &VertexCondition, x: f64, y: f64) -> f64 {
    let a11 = vc.entry(0, 0);
    let a12 = vc.entry(0, 1);
    let a22 = vc.entry(1, 1);
    let [d1, d2] = vc.arch_coupling();
    let c = vc.straight_coefficient();
    let n1 = (y - a22) * d1 * d1 + (x - a11) * d2 * d2 + 2.0 * a12 * d1 * d2;
    let q1 = (x - a11) * (y - a22) - a12 * a12;
    let xr = 1.0 / x + a11;
    // y * q2 and y * n2 are linear in y
    let yq2 = xr * (1.0 + a22 * y) - a12 * a12 * y;
    let yn2 = d1 * d1 * (1.0 + a22 * y) + (xr * d2 * d2 - 2.0 * a12 * d1 * d2) * y;
    (c * q1 + n1) * (c * yq2 - yn2) + q1 * yq2
}

/// The (x, y) pair and the second-order coefficient of the y(eps) expansion.
#[derive(Clone, Copy, Debug)]
pub struct XySolution {
    pub x: f64,
    pub y: f64,
    pub gamma: f64,
}

/// Solves the transparency equation for y at the requested detuning, and
/// extracts gamma by a Richardson fit against the half-detuning solve.
pub fn design_xy(req: &DesignRequest) -> Result<XySolution, DesignerError> {
    let [d1, d2] = req.vc.arch_coupling();
    if d1 == 0.0 || d2 == 0.0 {
        return Err(DesignerError::Degenerate);
    }
    let y = solve_y(&req.vc, req.eps)?;
    let y_half = solve_y(&req.vc, req.eps / 2.0)?;
    let a22 = req.vc.entry(1, 1);
    let a12 = req.vc.entry(0, 1);
    let y0 = a22 - a12 * d2 / d1;
    let w = (d2 / d1) * (d2 / d1);
    let gamma_est = |eps: f64, y: f64| (y - y0 + w * eps) / (eps * eps);
    let g1 = gamma_est(req.eps, y);
    let g2 = gamma_est(req.eps / 2.0, y_half);
    Ok(XySolution {
        x: design_x(&req.vc, req.eps),
        y,
        gamma: 2.0 * g2 - g1,
    })
}

fn design_x(vc: &VertexCondition, eps: f64) -> f64 {
    let [d1, d2] = vc.arch_coupling();
    vc.entry(0, 0) - vc.entry(0, 1) * d1 / d2 + eps
}

fn solve_y(vc: &VertexCondition, eps: f64) -> Result<f64, DesignerError> {
    let [d1, d2] = vc.arch_coupling();
    let a22 = vc.entry(1, 1);
    let a12 = vc.entry(0, 1);
    let x = design_x(vc, eps);
    let w = (d2 / d1) * (d2 / d1);
    let seed = a22 - a12 * d2 / d1 - w * eps;
    let base_halfwidth = (10.0 * w * eps).max(1e-3);
    for widen in [1.0, 10.0] {
        let halfwidth = base_halfwidth * widen;
        if let Some(root) = bracket_best_root(vc, x, seed, halfwidth) {
            return Ok(root);
        }
    }
    Err(DesignerError::NoRoot {
        seed,
        halfwidth: base_halfwidth * 10.0,
    })
}

/// Scan the cleared quadratic over the bracket, bisect every sign change,
/// and additionally try the closed-form roots of the quadratic itself (the
/// cleared form is exactly degree 2 in y, so its coefficients follow from
/// three evaluations). Keep roots whose fraction-form residual passes;
/// return the one nearest the seed.
fn bracket_best_root(vc: &VertexCondition, x: f64, seed: f64, halfwidth: f64) -> Option<f64> {
    const POINTS: usize = 513;
    let lo = seed - halfwidth;
    let step = 2.0 * halfwidth / (POINTS - 1) as f64;
    let poly = |y: f64| transparency_poly(vc, x, y);
    let mut best: Option<f64> = None;
    let consider = |root: f64, best: &mut Option<f64>| {
        if rnrn_residual(vc, x, root).abs() < RNRN_RESIDUAL_TOL {
            let better = match *best {
                Some(b) => (root - seed).abs() < (b - seed).abs(),
                None => true,
            };
            if better {
                *best = Some(root);
            }
        }
    };

    // closed-form candidates: p(y) = p0 + b (y - seed) + a (y - seed)^2
    let h = halfwidth / 8.0;
    let (pm, p0, pp) = (poly(seed - h), poly(seed), poly(seed + h));
    let a2 = (pp - 2.0 * p0 + pm) / (2.0 * h * h);
    let b1 = (pp - pm) / (2.0 * h);
    if a2 != 0.0 {
        let disc = b1 * b1 - 4.0 * a2 * p0;
        if disc >= 0.0 {
            let q = -0.5 * (b1 + b1.signum() * disc.sqrt());
            for root in [seed + q / a2, seed + p0 / q] {
                if root.is_finite() {
                    // one Newton polish step against rounding in the fit
                    let d = 2.0 * a2 * (root - seed) + b1;
                    let polished = if d != 0.0 { root - poly(root) / d } else { root };
                    consider(polished, &mut best);
                }
            }
        }
    } else if b1 != 0.0 {
        consider(seed - p0 / b1, &mut best);
    }

    let mut prev_y = lo;
    let mut prev = poly(lo);
    for i in 1..POINTS {
        let yv = lo + i as f64 * step;
        let cur = poly(yv);
        let candidate = if prev == 0.0 {
            Some(prev_y)
        } else if prev * cur < 0.0 {
            let mut a = prev_y;
            let mut b = yv;
            let mut fa = prev;
            for _ in 0..128 {
                let mid = 0.5 * (a + b);
                if mid <= a.min(b) || mid >= a.max(b) {
                    break;
                }
                let fm = poly(mid);
                if fm == 0.0 {
                    a = mid;
                    b = mid;
                    break;
                }
                if (fm < 0.0) == (fa < 0.0) {
                    a = mid;
                    fa = fm;
                } else {
                    b = mid;
                }
            }
            Some(0.5 * (a + b))
        } else {
            None
        };
        if let Some(root) = candidate {
            consider(root, &mut best);
        }
        prev_y = yv;
        prev = cur;
    }
    best
}

/// Arch lengths from the tangent variables, smallest positive branch plus
/// the requested offsets. `swapped` reports that the pair was reordered to
/// keep l1 >= l2; the caller must relabel the vertex condition to match.
#[derive(Clone, Copy, Debug)]
pub struct ArchLengths {
    pub l1: f64,
    pub l2: f64,
    pub swapped: bool,
}

pub fn lengths_from_xy(x: f64, y: f64, sigma0: f64, branch_offsets: (u32, u32)) -> ArchLengths {
    let l1 = length_from_tangent(x, sigma0, branch_offsets.0);
    let l2 = length_from_tangent(y, sigma0, branch_offsets.1);
    if l2 > l1 {
        ArchLengths {
            l1: l2,
            l2: l1,
            swapped: true,
        }
    } else {
        ArchLengths {
            l1,
            l2,
            swapped: false,
        }
    }
}

fn length_from_tangent(v: f64, sigma0: f64, extra_branch: u32) -> f64 {
    let mut t = v.atan();
    if t <= 0.0 {
        t += core::f64::consts::PI;
    }
    2.0 * (t + core::f64::consts::PI * extra_branch as f64) / sigma0
}

/// Straight-segment choice making F(sigma0) = 0.
#[derive(Clone, Copy, Debug)]
pub struct L3Choice {
    pub l3: f64,
    /// True when the trace condition held for every l3 (T already traceless
    /// with symmetric off-diagonal); a canonical value was returned.
    pub indeterminate: bool,
}

/// Solves `trace(R(sigma0 l3) T) = 0`:
/// `tan(sigma0 l3) = -(t11 + t22) / (t21 - t12)`, smallest positive root.
pub fn choose_l3(
    vc: &VertexCondition,
    l1: f64,
    l2: f64,
    sigma0: f64,
) -> Result<L3Choice, DesignerError> {
    let br = crate::monodromy::branches_at(vc, l1, l2, sigma0);
    let s = br.scalars();
    let lt = loop_transfer_from(s.m, s.n)?;
    let t = lt.t_mat;
    let num = t.m11 + t.m22;
    let den = t.m21 - t.m12;
    let scale = t.hs_norm_sq().sqrt().max(1.0);
    if num.abs() < 1e-12 * scale && den.abs() < 1e-12 * scale {
        // F(sigma0) vanishes for every l3; return a canonical choice
        return Ok(L3Choice {
            l3: core::f64::consts::FRAC_PI_2 / sigma0,
            indeterminate: true,
        });
    }
    let mut theta = (-num / den).atan();
    if theta <= 0.0 {
        theta += core::f64::consts::PI;
    }
    let l3 = theta / sigma0;
    // post-check against the assembled discriminant
    let params = NecklaceParams {
        l1,
        l2,
        l3,
        vc: *vc,
    };
    match hill_discriminant(&params, sigma0) {
        HillPoint::Value(f) if f.abs() < F0_TOL => Ok(L3Choice {
            l3,
            indeterminate: false,
        }),
        HillPoint::Value(f) => Err(DesignerError::PostCheck {
            what: "F(sigma0) after l3 choice",
            value: f,
        }),
        HillPoint::Pole => Err(DesignerError::PoleAtSigma0),
    }
}

/// Diagnostics attached to a finished design.
#[derive(Clone, Copy, Debug)]
pub struct DesignDiagnostics {
    /// F at the target (should be ~0).
    pub f_at_sigma0: f64,
    /// ||M_sigma0||^2 - 2 (should be ~0).
    pub hs_defect: f64,
    /// Location of the nearest Hill-discriminant pole.
    pub pole_sigma: f64,
    /// |pole_sigma - sigma0|.
    pub pole_distance: f64,
    /// The band containing sigma0.
    pub band: (f64, f64),
    /// Inner passband (sigma0 to the |F| = 1 crossing toward the pole).
    pub passband: (f64, f64),
    /// Minimum |V_g| over the passband (L = l2 + l3).
    pub min_group_velocity: f64,
    /// Oracle reflection magnitude at sigma0 for `n_cells` cells.
    pub oracle_reflection_at_sigma0: f64,
    pub n_cells: usize,
}

/// Output of the full design pipeline.
#[derive(Clone, Copy, Debug)]
pub struct DesignResult {
    pub x: f64,
    pub y: f64,
    pub gamma: f64,
    /// Final necklace; the vertex condition is the relabeled one when
    /// `swapped` is set.
    pub params: NecklaceParams,
    pub swapped: bool,
    pub sigma0: f64,
    pub eps: f64,
    pub diagnostics: DesignDiagnostics,
}

/// Full pipeline: solve (x, y), convert to lengths (retrying branches when
/// the motion direction is tangent to the design parabola), choose l3,
/// verify transparency and collect diagnostics.
pub fn design(req: &DesignRequest) -> Result<DesignResult, DesignerError> {
    if !(req.sigma0 > 0.0) {
        return Err(DesignerError::PostCheck {
            what: "sigma0 positivity",
            value: req.sigma0,
        });
    }
    if !(req.eps > 0.0) {
        return Err(DesignerError::PostCheck {
            what: "eps positivity",
            value: req.eps,
        });
    }
    let xy = design_xy(req)?;
    let [d1, d2] = req.vc.arch_coupling();
    let w = (d2 / d1) * (d2 / d1);

    // branch retries: m1 increments first, then m2
    let mut chosen: Option<(ArchLengths, (u32, u32))> = None;
    'outer: for add2 in 0..4u32 {
        for add1 in 0..4u32 {
            let offsets = (req.branch_offsets.0 + add1, req.branch_offsets.1 + add2);
            let arch = lengths_from_xy(xy.x, xy.y, req.sigma0, offsets);
            // tangency guard in the original (x-arch, y-arch) labels
            let x_arch_len = length_from_tangent(xy.x, req.sigma0, offsets.0);
            let y_arch_len = length_from_tangent(xy.y, req.sigma0, offsets.1);
            let vx = x_arch_len * (1.0 + xy.x * xy.x);
            let vy = y_arch_len * (1.0 + xy.y * xy.y);
            let tx = 1.0;
            let ty = -w + 2.0 * xy.gamma * req.eps;
            let cross = vx * ty - vy * tx;
            let sin_angle =
                cross.abs() / ((vx * vx + vy * vy).sqrt() * (tx * tx + ty * ty).sqrt());
            if sin_angle > TANGENCY_TOL {
                chosen = Some((arch, offsets));
                break 'outer;
            }
        }
    }
    let (arch, _offsets) = chosen.ok_or(DesignerError::TangentDirection)?;
    let vc_eff = if arch.swapped {
        req.vc.swap_arches()
    } else {
        req.vc
    };
    let (x_eff, y_eff) = if arch.swapped {
        (xy.y, xy.x)
    } else {
        (xy.x, xy.y)
    };

    // transparency must hold with nonzero n at sigma0
    let br = crate::monodromy::branches_at(&vc_eff, arch.l1, arch.l2, req.sigma0);
    let s = br.scalars();
    if !s.n.is_finite() || s.n.abs() < 1e-9 * s.m.abs().max(1.0) {
        return Err(DesignerError::PoleAtSigma0);
    }
    let mo1 = br.sum * br.diff + 1.0;
    if mo1.abs() > MO1_TOL {
        return Err(DesignerError::PostCheck {
            what: "(m+n)(m-n)+1 at sigma0",
            value: mo1,
        });
    }

    let l3c = choose_l3(&vc_eff, arch.l1, arch.l2, req.sigma0)?;
    let params = NecklaceParams::new(arch.l1, arch.l2, l3c.l3, vc_eff).map_err(|_| {
        DesignerError::PostCheck {
            what: "length positivity",
            value: arch.l2,
        }
    })?;

    let diagnostics = collect_diagnostics(&params, req.sigma0, req.eps, DIAG_N_CELLS)?;
    Ok(DesignResult {
        x: x_eff,
        y: y_eff,
        gamma: xy.gamma,
        params,
        swapped: arch.swapped,
        sigma0: req.sigma0,
        eps: req.eps,
        diagnostics,
    })
}

fn collect_diagnostics(
    params: &NecklaceParams,
    sigma0: f64,
    eps: f64,
    n_cells: usize,
) -> Result<DesignDiagnostics, DesignerError> {
    let f_at_sigma0 = match hill_discriminant(params, sigma0) {
        HillPoint::Value(f) => f,
        HillPoint::Pole => return Err(DesignerError::PoleAtSigma0),
    };
    let resid = orthogonality_residual(params, sigma0)?;
    let hs_defect = resid * resid;

    let (pole_sigma, _side) = nearest_pole(params, sigma0, eps).ok_or(DesignerError::PoleNotFound)?;
    let pole_distance = (pole_sigma - sigma0).abs();

    let band = spectrum::band_around(params, sigma0)?;
    let passband = inner_passband(params, sigma0, pole_sigma, band)?;
    let min_group_velocity = min_vg_over(params, passband)?;

    let tn = TruncatedNecklace::new(*params, n_cells).expect("n_cells >= 1");
    let oracle = solve_scattering_oracle(&tn, sigma0)?;

    Ok(DesignDiagnostics {
        f_at_sigma0,
        hs_defect,
        pole_sigma,
        pole_distance,
        band,
        passband,
        min_group_velocity,
        oracle_reflection_at_sigma0: oracle.r.norm(),
        n_cells,
    })
}

/// Expanding two-sided search for the zero of n nearest sigma0. Windows grow
/// geometrically from the eps^2 scale; the nearer root wins.
fn nearest_pole(params: &NecklaceParams, sigma0: f64, eps: f64) -> Option<(f64, i8)> {
    let h0 = (eps * eps / 8.0).max(1e-7);
    let cap = (0.75 * sigma0).min(6.0);
    let mut best: Option<(f64, i8)> = None;
    for side in [1.0f64, -1.0] {
        let mut h = h0;
        let mut inner = sigma0 + side * h0 * 1e-6;
        while h <= cap {
            let outer = sigma0 + side * h;
            if outer <= 0.0 {
                break;
            }
            let window = if side > 0.0 {
                (inner, outer)
            } else {
                (outer, inner)
            };
            let found = spectrum::locate_poles(params, window, 4096);
            if let Some(&p) = found
                .iter()
                .min_by(|a, b| {
                    (*a - sigma0)
                        .abs()
                        .partial_cmp(&(*b - sigma0).abs())
                        .unwrap()
                })
            {
                let side_tag = if side > 0.0 { 1 } else { -1 };
                match best {
                    Some((b, _)) if (b - sigma0).abs() <= (p - sigma0).abs() => {}
                    _ => best = Some((p, side_tag)),
                }
                break;
            }
            inner = outer;
            h *= 2.0;
        }
    }
    best
}

/// The interval from sigma0 to the first |F| = 1 crossing toward the pole.
fn inner_passband(
    params: &NecklaceParams,
    sigma0: f64,
    pole_sigma: f64,
    band: (f64, f64),
) -> Result<(f64, f64), DesignerError> {
    let dir = if pole_sigma >= sigma0 { 1.0 } else { -1.0 };
    let edge = if dir > 0.0 { band.1 } else { band.0 };
    let level = |s: f64| match hill_discriminant(params, s) {
        HillPoint::Value(f) => f.abs() - 1.0,
        HillPoint::Pole => f64::INFINITY,
    };
    // march from sigma0 toward the edge until |F| >= 1
    let steps = 4096;
    let mut prev = sigma0;
    let mut crossing = None;
    for i in 1..=steps {
        let s = sigma0 + dir * (edge - sigma0).abs() * i as f64 / steps as f64 * 0.999_999;
        if level(s) >= 0.0 {
            crossing = Some((prev, s));
            break;
        }
        prev = s;
    }
    let (mut lo, mut hi) = crossing.ok_or(DesignerError::PostCheck {
        what: "|F| = 1 crossing inside the band",
        value: edge,
    })?;
    for _ in 0..128 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            break;
        }
        if level(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let sigma_prime = 0.5 * (lo + hi);
    Ok(if dir > 0.0 {
        (sigma0, sigma_prime)
    } else {
        (sigma_prime, sigma0)
    })
}

fn min_vg_over(params: &NecklaceParams, passband: (f64, f64)) -> Result<f64, DesignerError> {
    let (lo, hi) = passband;
    let width = hi - lo;
    let period_length = params.l2 + params.l3;
    let mut min_abs = f64::INFINITY;
    let samples = 33;
    for i in 0..samples {
        let t = (i as f64 + 0.5) / samples as f64;
        let sigma = lo + width * (0.02 + 0.96 * t);
        match spectrum::group_velocity(params, sigma, period_length) {
            Ok(est) => min_abs = min_abs.min(est.vg.abs()),
            Err(SpectrumError::BandEdge { .. }) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    if min_abs.is_finite() {
        Ok(min_abs)
    } else {
        Err(DesignerError::PostCheck {
            what: "group velocity sampling over the passband",
            value: width,
        })
    }
}

/// Recomputes every diagnostic from scratch through the public APIs and
/// compares with the stored ones. `n_cells` selects the reflection check
/// size; the stored reflection is only compared when the sizes match.
pub fn verify_design(
    result: &DesignResult,
    n_cells: usize,
) -> Result<DesignDiagnostics, DesignerError> {
    let fresh = collect_diagnostics(&result.params, result.sigma0, result.eps, n_cells)?;
    let stored = &result.diagnostics;
    let checks: [(&'static str, f64, f64); 5] = [
        ("F(sigma0)", stored.f_at_sigma0, fresh.f_at_sigma0),
        ("||M||^2 - 2", stored.hs_defect, fresh.hs_defect),
        ("pole location", stored.pole_sigma, fresh.pole_sigma),
        ("band left edge", stored.band.0, fresh.band.0),
        ("min |Vg|", stored.min_group_velocity, fresh.min_group_velocity),
    ];
    for (what, a, b) in checks {
        if (a - b).abs() > 1e-8 {
            return Err(DesignerError::VerificationMismatch {
                what,
                stored: a,
                recomputed: b,
            });
        }
    }
    if n_cells == stored.n_cells
        && (stored.oracle_reflection_at_sigma0 - fresh.oracle_reflection_at_sigma0).abs() > 1e-8
    {
        return Err(DesignerError::VerificationMismatch {
            what: "oracle reflection at sigma0",
            stored: stored.oracle_reflection_at_sigma0,
            recomputed: fresh.oracle_reflection_at_sigma0,
        });
    }
    Ok(fresh)
}

/// Least-squares slope of log(q) against log(eps); the scaling-law helper
/// shared by the verification harness and the sweep command.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(eps, q) in points {
        let x = eps.ln();
        let y = q.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}
