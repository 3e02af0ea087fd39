//! Band-gap structure, pole location, dispersion branch and group velocity.
//!
//! Bands are the sigma intervals with |F(sigma)| < 2. F is meromorphic with
//! poles at the zeros of n, so the scan machinery brackets two kinds of
//! features: sign changes of the continuous pole indicator (for the poles)
//! and in-band/out-of-band transitions (for the edges). Every bisection runs
//! to machine-width brackets; the advertised tolerances (1e-10 for edges,
//! 1e-12 for poles) are comfortably exceeded.

use crate::graph_model::{ConditionTable, NecklaceParams, VertexCondition, WaveContext};
use crate::monodromy::{
    self, branches_at, hill_from_branches, HillPoint, LoopBranches, MonodromyError,
};
use alloc::vec::Vec;
use core::fmt;
use num_traits::Float;

/// Pole accepted only if |n| at the bisected root is below this.
pub const POLE_RESIDUAL_TOL: f64 = 1e-10;
/// Cross-check residual bound for the tangent-variable route at a pole.
pub const POLE_XCHECK_TOL: f64 = 1e-8;
/// Degenerate band/gap slivers narrower than this are merged away.
const SLIVER_TOL: f64 = 1e-9;
/// Subdivision factor applied to the scan grid when hunting sign changes.
const SUBSAMPLE: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpectrumError {
    /// Requested sigma lies outside every band.
    OutsideBand { sigma: f64 },
    /// Too close to a band edge for the differentiation stencil.
    BandEdge { sigma: f64 },
    InvalidWindow,
    InvalidGrid,
    Monodromy(MonodromyError),
}

impl fmt::Display for SpectrumError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::OutsideBand { sigma } => write!(f, "sigma = {sigma} is not inside a band"),
            Self::BandEdge { sigma } => {
                write!(f, "sigma = {sigma} too close to a band edge for differentiation")
            }
            Self::InvalidWindow => write!(f, "scan window must be positive and ordered"),
            Self::InvalidGrid => write!(f, "scan grid needs at least 2 points"),
            Self::Monodromy(e) => write!(f, "{e}"),
        }
    }
}

impl From<MonodromyError> for SpectrumError {
    fn from(e: MonodromyError) -> Self {
        Self::Monodromy(e)
    }
}

/// Anything that can answer "what is F at sigma" and "what is the pole
/// indicator at sigma". Lets the scanner run over a constant necklace or a
/// frequency-interpolated vertex condition.
pub trait HillSource {
    fn hill(&self, sigma: f64) -> HillPoint;
    fn pole_indicator(&self, sigma: f64) -> f64;
}

impl HillSource for NecklaceParams {
    fn hill(&self, sigma: f64) -> HillPoint {
        monodromy::hill_discriminant(self, sigma)
    }

    fn pole_indicator(&self, sigma: f64) -> f64 {
        monodromy::pole_indicator(self, sigma)
    }
}

/// Necklace whose vertex condition is looked up per frequency from a
/// `(eps*omega, A)` table. Scan-only.
pub struct TableNecklace<'a> {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub table: &'a ConditionTable,
    pub wave: WaveContext,
}

impl TableNecklace<'_> {
    fn condition_at(&self, sigma: f64) -> VertexCondition {
        // eps*omega = sqrt((eps*sigma)^2 + lambda0)
        let es = self.wave.epsilon * sigma;
        let eps_omega = (es * es + self.wave.lambda0).sqrt();
        self.table.at(eps_omega)
    }
}

impl HillSource for TableNecklace<'_> {
    fn hill(&self, sigma: f64) -> HillPoint {
        let vc = self.condition_at(sigma);
        let br = branches_at(&vc, self.l1, self.l2, sigma);
        hill_from_branches(br, sigma * self.l3)
    }

    fn pole_indicator(&self, sigma: f64) -> f64 {
        let vc = self.condition_at(sigma);
        // same expression as the fixed-condition indicator
        let params = NecklaceParams {
            l1: self.l1,
            l2: self.l2,
            l3: self.l3,
            vc,
        };
        monodromy::pole_indicator(&params, sigma)
    }
}

/// Band-gap decomposition of a scan window.
#[derive(Clone, Debug, Default)]
pub struct BandStructure {
    pub window: (f64, f64),
    /// Maximal intervals with |F| < 2, ordered.
    pub bands: Vec<(f64, f64)>,
    /// Complementary intervals, ordered.
    pub gaps: Vec<(f64, f64)>,
    /// Zeros of n with blow-up of F, ordered.
    pub poles: Vec<f64>,
    /// Original grid cells that contained more than one pole or a band
    /// thinner than the grid step; non-empty means the grid was too coarse
    /// for the structure it found.
    pub coarse_cells: Vec<(f64, f64)>,
}

impl BandStructure {
    pub fn band_containing(&self, sigma: f64) -> Option<(f64, f64)> {
        self.bands
            .iter()
            .copied()
            .find(|&(lo, hi)| lo <= sigma && sigma <= hi)
    }

    pub fn is_grid_adequate(&self) -> bool {
        self.coarse_cells.is_empty()
    }
}

fn in_band(h: HillPoint) -> bool {
    h.in_band()
}

/// Bisect a boolean classifier on [lo, hi] with class(lo) != class(hi),
/// down to machine-width brackets. Returns the midpoint.
fn bisect_class<F: Fn(f64) -> bool>(mut lo: f64, mut hi: f64, class_lo: bool, f: F) -> f64 {
    for _ in 0..128 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            break;
        }
        if f(mid) == class_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Bisect a sign change of a continuous function to machine width.
fn bisect_root<F: Fn(f64) -> f64>(mut lo: f64, mut hi: f64, mut flo: f64, f: F) -> f64 {
    for _ in 0..128 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// n at sigma through the factored branches; infinite at n's own poles.
fn n_value(params: &NecklaceParams, sigma: f64) -> f64 {
    let b = monodromy::loop_branches(params, sigma);
    0.5 * (b.sum - b.diff)
}

/// Scan a window with a fixed-parameter necklace.
pub fn scan_bands(
    params: &NecklaceParams,
    window: (f64, f64),
    grid: usize,
) -> Result<BandStructure, SpectrumError> {
    scan_bands_impl(params, Some(params), window, grid)
}

/// Scan a window with any Hill source (for frequency-dependent conditions).
pub fn scan_bands_source<S: HillSource>(
    src: &S,
    window: (f64, f64),
    grid: usize,
) -> Result<BandStructure, SpectrumError> {
    scan_bands_impl(src, None, window, grid)
}

fn scan_bands_impl<S: HillSource + ?Sized>(
    src: &S,
    params: Option<&NecklaceParams>,
    window: (f64, f64),
    grid: usize,
) -> Result<BandStructure, SpectrumError> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(SpectrumError::InvalidWindow);
    }
    if grid < 2 {
        return Err(SpectrumError::InvalidGrid);
    }
    let step = (hi - lo) / (grid - 1) as f64;

    // fine sample set for feature hunting
    let fine_n = (grid - 1) * SUBSAMPLE + 1;
    let fine_step = (hi - lo) / (fine_n - 1) as f64;
    let mut xs: Vec<f64> = Vec::with_capacity(fine_n);
    for i in 0..fine_n {
        xs.push(if i + 1 == fine_n { hi } else { lo + i as f64 * fine_step });
    }

    // 1. poles: bracket sign changes of the continuous indicator
    let mut poles: Vec<f64> = Vec::new();
    {
        let ind = |s: f64| src.pole_indicator(s);
        let mut prev = ind(xs[0]);
        for i in 1..fine_n {
            let cur = ind(xs[i]);
            if prev == 0.0 {
                maybe_push_pole(src, params, xs[i - 1], &mut poles);
            } else if prev * cur < 0.0 {
                let root = bisect_root(xs[i - 1], xs[i], prev, ind);
                maybe_push_pole(src, params, root, &mut poles);
            }
            prev = cur;
        }
        if prev == 0.0 {
            maybe_push_pole(src, params, hi, &mut poles);
        }
    }
    poles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    poles.dedup_by(|a, b| (*a - *b).abs() < SLIVER_TOL);

    // 2. edges: in/out transitions between consecutive fine samples,
    //    plus flanking edges hunted outward from every pole
    let mut edges: Vec<f64> = Vec::new();
    {
        let classify = |s: f64| in_band(src.hill(s));
        let mut prev_class = classify(xs[0]);
        for i in 1..fine_n {
            let cur_class = classify(xs[i]);
            if cur_class != prev_class {
                edges.push(bisect_class(xs[i - 1], xs[i], prev_class, classify));
            }
            prev_class = cur_class;
        }
        for &p in &poles {
            for dir in [-1.0, 1.0] {
                if let Some(edge) = pole_flank_edge(src, p, dir, fine_step, window) {
                    edges.push(edge);
                }
            }
        }
    }
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    edges.dedup_by(|a, b| (*a - *b).abs() < SLIVER_TOL);

    // 3. assemble intervals split at edges and poles, classify midpoints
    let mut cuts: Vec<f64> = Vec::with_capacity(edges.len() + poles.len() + 2);
    cuts.push(lo);
    cuts.extend(edges.iter().copied());
    cuts.extend(poles.iter().copied());
    cuts.push(hi);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < SLIVER_TOL * 0.1);

    let mut bands: Vec<(f64, f64)> = Vec::new();
    let mut gaps: Vec<(f64, f64)> = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a < SLIVER_TOL {
            continue;
        }
        let mid = 0.5 * (a + b);
        let target = if in_band(src.hill(mid)) {
            &mut bands
        } else {
            &mut gaps
        };
        match target.last_mut() {
            Some(last) if (last.1 - a).abs() < SLIVER_TOL * 2.0 => last.1 = b,
            _ => target.push((a, b)),
        }
    }
    // dropping slivers can leave same-class neighbors split; re-merge
    merge_adjacent(&mut bands);
    merge_adjacent(&mut gaps);

    // 4. coarse-grid advisory
    let mut coarse_cells: Vec<(f64, f64)> = Vec::new();
    for ci in 0..(grid - 1) {
        let c_lo = lo + ci as f64 * step;
        let c_hi = c_lo + step;
        let pole_count = poles.iter().filter(|&&p| p >= c_lo && p < c_hi).count();
        let thin_band = bands
            .iter()
            .any(|&(a, b)| (b - a) < step && b > c_lo && a < c_hi);
        if pole_count > 1 || thin_band {
            coarse_cells.push((c_lo, c_hi));
        }
    }

    Ok(BandStructure {
        window,
        bands,
        gaps,
        poles,
        coarse_cells,
    })
}

fn merge_adjacent(list: &mut Vec<(f64, f64)>) {
    if list.is_empty() {
        return;
    }
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(list.len());
    for &(a, b) in list.iter() {
        match merged.last_mut() {
            Some(last) if a - last.1 < SLIVER_TOL * 2.0 => last.1 = b,
            _ => merged.push((a, b)),
        }
    }
    *list = merged;
}

fn maybe_push_pole<S: HillSource + ?Sized>(
    src: &S,
    params: Option<&NecklaceParams>,
    root: f64,
    poles: &mut Vec<f64>,
) {
    // accept only genuine zeros of n: the indicator also flips sign at
    // odd-order zeros of its determinant factors where n itself blows up
    if let Some(p) = params {
        let n = n_value(p, root);
        if !(n.is_finite() && n.abs() < POLE_RESIDUAL_TOL) {
            return;
        }
    } else {
        // table sources: fall back to checking that F blows up nearby
        let probe = 1e-7 * root.abs().max(1.0);
        let big = |h: HillPoint| match h {
            HillPoint::Pole => true,
            HillPoint::Value(f) => f.abs() > 1e2,
        };
        if !(big(src.hill(root - probe)) || big(src.hill(root + probe))) {
            return;
        }
    }
    poles.push(root);
}

/// March outward from a pole until an in-band sample appears, then bisect
/// the |F| = 2 crossing. Guarantees flanking edges even when the gap around
/// the pole is narrower than the scan resolution.
fn pole_flank_edge<S: HillSource + ?Sized>(
    src: &S,
    pole: f64,
    dir: f64,
    max_reach: f64,
    window: (f64, f64),
) -> Option<f64> {
    let classify = |s: f64| in_band(src.hill(s));
    let mut h = (pole.abs() * 1e-12).max(1e-13);
    let mut prev = pole + dir * h;
    if prev <= window.0 || prev >= window.1 {
        return None;
    }
    if classify(prev) {
        // immediately in-band: gap narrower than the probe; no edge to refine
        return None;
    }
    while h < max_reach {
        h *= 2.0;
        let cur = pole + dir * h;
        if cur <= window.0 || cur >= window.1 {
            return None;
        }
        if classify(cur) {
            let (a, b) = (prev, cur);
            return Some(bisect_class(a, b, false, classify));
        }
        prev = cur;
    }
    None
}

/// All zeros of n inside the window, bracketed on a `grid`-point scan of the
/// continuous indicator and bisected to machine width. Each returned root
/// satisfies |n(root)| < 1e-10 and the tangent-variable cross-check.
pub fn locate_poles(params: &NecklaceParams, window: (f64, f64), grid: usize) -> Vec<f64> {
    scan_poles_only(params, window, grid).unwrap_or_default()
}

fn scan_poles_only(
    params: &NecklaceParams,
    window: (f64, f64),
    grid: usize,
) -> Result<Vec<f64>, SpectrumError> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(SpectrumError::InvalidWindow);
    }
    if grid < 2 {
        return Err(SpectrumError::InvalidGrid);
    }
    let n_pts = (grid - 1) * SUBSAMPLE + 1;
    let step = (hi - lo) / (n_pts - 1) as f64;
    let ind = |s: f64| monodromy::pole_indicator(params, s);
    let mut poles = Vec::new();
    let mut prev_x = lo;
    let mut prev = ind(lo);
    for i in 1..n_pts {
        let x = if i + 1 == n_pts { hi } else { lo + i as f64 * step };
        let cur = ind(x);
        if prev == 0.0 {
            push_verified_pole(params, prev_x, &mut poles);
        } else if prev * cur < 0.0 {
            let root = bisect_root(prev_x, x, prev, ind);
            push_verified_pole(params, root, &mut poles);
        }
        prev_x = x;
        prev = cur;
    }
    if prev == 0.0 {
        push_verified_pole(params, hi, &mut poles);
    }
    poles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    poles.dedup_by(|a, b| (*a - *b).abs() < SLIVER_TOL);
    Ok(poles)
}

fn push_verified_pole(params: &NecklaceParams, root: f64, poles: &mut Vec<f64>) {
    let res = pole_residuals(params, root);
    if res.n_abs < POLE_RESIDUAL_TOL && res.xy_form_abs < POLE_XCHECK_TOL {
        poles.push(root);
    }
}

/// Residuals of a candidate pole: |n| through the matrix route and |2n|
/// through the independent tangent-variable rational form.
#[derive(Clone, Copy, Debug)]
pub struct PoleResiduals {
    pub n_abs: f64,
    pub xy_form_abs: f64,
}

pub fn pole_residuals(params: &NecklaceParams, sigma: f64) -> PoleResiduals {
    let b = monodromy::loop_branches(params, sigma);
    let n_abs = (0.5 * (b.sum - b.diff)).abs();
    let x = (sigma * params.l1 / 2.0).tan();
    let y = (sigma * params.l2 / 2.0).tan();
    let LoopBranches { sum, diff } = monodromy::loop_branches_xy(&params.vc, x, y);
    PoleResiduals {
        n_abs,
        xy_form_abs: (sum - diff).abs(),
    }
}

/// One emitted dispersion sample.
#[derive(Clone, Copy, Debug)]
pub struct DispersionPoint {
    pub sigma: f64,
    /// Bloch phase per period from the principal arccos branch, continuous
    /// on the band and anchored in [0, pi].
    pub k: f64,
    /// Group velocity where the differentiation stencil fits; `None` within
    /// the stencil margin of a band edge.
    pub vg: Option<f64>,
}

/// k(sigma) = arccos(F/2) sampled on `grid` points across `band`, with the
/// group velocity attached away from the edges.
pub fn dispersion_k(
    params: &NecklaceParams,
    band: (f64, f64),
    grid: usize,
    period_length: f64,
) -> Result<Vec<DispersionPoint>, SpectrumError> {
    let (lo, hi) = band;
    if !(lo > 0.0 && hi > lo) {
        return Err(SpectrumError::InvalidWindow);
    }
    if grid < 2 {
        return Err(SpectrumError::InvalidGrid);
    }
    let step = (hi - lo) / (grid - 1) as f64;
    let mut out = Vec::with_capacity(grid);
    for i in 0..grid {
        let sigma = if i + 1 == grid { hi } else { lo + i as f64 * step };
        let f = match params.hill(sigma) {
            HillPoint::Value(f) if f.abs() < 2.0 => f,
            _ => return Err(SpectrumError::OutsideBand { sigma }),
        };
        let k = (f / 2.0).acos();
        let vg = group_velocity(params, sigma, period_length).ok().map(|e| e.vg);
        out.push(DispersionPoint { sigma, k, vg });
    }
    Ok(out)
}

/// Group velocity estimate with a Richardson error bound.
#[derive(Clone, Copy, Debug)]
pub struct VgEstimate {
    pub vg: f64,
    pub error_estimate: f64,
}

/// Maximal band interval containing `sigma`, found by outward marching and
/// boundary bisection. Errors with `OutsideBand` if |F(sigma)| >= 2.
pub fn band_around(params: &NecklaceParams, sigma: f64) -> Result<(f64, f64), SpectrumError> {
    if !in_band(params.hill(sigma)) {
        return Err(SpectrumError::OutsideBand { sigma });
    }
    // reach cap: families like the equal-arm necklace have |F| <= 2 on the
    // whole axis (band edges only as isolated touch points); the local
    // neighborhood is all the differentiation step needs
    let reach = (sigma.abs() * 4.0).max(8.0);
    let classify = |s: f64| s > 0.0 && in_band(params.hill(s));
    let edge = |dir: f64| -> f64 {
        let mut h = (sigma.abs() * 1e-9).max(1e-12);
        let mut inside = sigma;
        loop {
            let probe = sigma + dir * h;
            if probe <= 0.0 || !classify(probe) {
                return bisect_class(inside, probe, true, classify);
            }
            inside = probe;
            if h > reach {
                return probe;
            }
            h *= 2.0;
        }
    };
    Ok((edge(-1.0), edge(1.0)))
}

/// V_g = L / k'(sigma) with k' from a Richardson-extrapolated central
/// difference. The step is h = max(1e-6, 1e-3 * band_width) with the width
/// contribution capped at 1 so effectively unbounded bands keep a sane
/// stencil; points closer than the stencil to a band edge refuse with
/// `BandEdge`.
pub fn group_velocity(
    params: &NecklaceParams,
    sigma: f64,
    period_length: f64,
) -> Result<VgEstimate, SpectrumError> {
    let (lo, hi) = band_around(params, sigma)?;
    let h = (1e-3 * (hi - lo).min(1.0)).max(1e-6);
    if sigma - lo <= h * 1.0001 || hi - sigma <= h * 1.0001 {
        return Err(SpectrumError::BandEdge { sigma });
    }
    let k_at = |s: f64| -> Result<f64, SpectrumError> {
        match params.hill(s) {
            HillPoint::Value(f) if f.abs() < 2.0 => Ok((f / 2.0).acos()),
            _ => Err(SpectrumError::BandEdge { sigma: s }),
        }
    };
    let d_coarse = (k_at(sigma + h)? - k_at(sigma - h)?) / (2.0 * h);
    let d_fine = (k_at(sigma + 0.5 * h)? - k_at(sigma - 0.5 * h)?) / h;
    let k_prime = (4.0 * d_fine - d_coarse) / 3.0;
    let k_err = (d_fine - d_coarse).abs() / 3.0;
    let vg = period_length / k_prime;
    let error_estimate = (period_length * k_err / (k_prime * k_prime)).abs();
    Ok(VgEstimate { vg, error_estimate })
}
