//! Internal FFT workspace: cached plans, d-dimensional transforms and Fourier
//! multiplier application on grid components.
//!
//! Wavenumber conventions used by the whole crate:
//!
//! * even (real, radial) symbols such as |xi|^(2s) act on every bin,
//!   including the Nyquist bin, whose wavenumber is -M/2;
//! * odd (gradient-type) symbols annihilate any bin carrying a Nyquist index
//!   on some axis. The Nyquist mode has no odd discrete derivative that keeps
//!   real data real, and dropping it makes the discrete calculus consistent:
//!   the H^alpha seminorm drops the same bins, so the identity
//!   "norm of grad (-Lap)^((alpha-1)/2) f equals the seminorm" is exact.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::PeriodicGrid;

type C64 = Complex<f64>;

static PLANS: OnceLock<Mutex<HashMap<usize, (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)>>> =
    OnceLock::new();

fn plans(m: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    let cache = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("fft plan cache poisoned");
    map.entry(m)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (
                planner.plan_fft(m, FftDirection::Forward),
                planner.plan_fft(m, FftDirection::Inverse),
            )
        })
        .clone()
}

/// In-place unnormalized transform along every axis.
fn transform_axes(grid: &PeriodicGrid, data: &mut [C64], inverse: bool) {
    let m = grid.nodes_per_axis();
    let d = grid.dim();
    let (fwd, inv) = plans(m);
    let fft = if inverse { inv } else { fwd };
    let mut scratch = vec![C64::default(); fft.get_inplace_scratch_len()];
    let mut line = vec![C64::default(); m];
    for a in 0..d {
        let inner = m.pow((d - 1 - a) as u32);
        let outer = m.pow(a as u32);
        if inner == 1 {
            for o in 0..outer {
                fft.process_with_scratch(&mut data[o * m..(o + 1) * m], &mut scratch);
            }
        } else {
            for o in 0..outer {
                for i in 0..inner {
                    let base = o * m * inner + i;
                    for t in 0..m {
                        line[t] = data[base + t * inner];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for t in 0..m {
                        data[base + t * inner] = line[t];
                    }
                }
            }
        }
    }
}

/// Forward transform of a real component (unnormalized coefficient sums).
pub(crate) fn forward(grid: &PeriodicGrid, comp: &[f64]) -> Vec<C64> {
    debug_assert_eq!(comp.len(), grid.total_points());
    let mut data: Vec<C64> = comp.iter().map(|&v| C64::new(v, 0.0)).collect();
    transform_axes(grid, &mut data, false);
    data
}

/// Inverse transform, normalized by M^-d, returning the real part and
/// checking that the imaginary residue stays below `tol_rel` of `scale`.
pub(crate) fn inverse_real(
    grid: &PeriodicGrid,
    mut spec: Vec<C64>,
    scale: f64,
    tol_rel: f64,
) -> Result<Vec<f64>> {
    transform_axes(grid, &mut spec, true);
    let norm = 1.0 / grid.total_points() as f64;
    let mut max_im: f64 = 0.0;
    let out: Vec<f64> = spec
        .iter()
        .map(|c| {
            max_im = max_im.max((c.im * norm).abs());
            c.re * norm
        })
        .collect();
    let reference = scale.abs().max(f64::MIN_POSITIVE);
    if max_im > tol_rel * reference {
        return Err(Error::ComplexResidue { residue: max_im / reference });
    }
    Ok(out)
}

/// Per-bin context handed to symbol closures.
pub(crate) struct BinCtx<'a> {
    pub idx: &'a [usize],
    pub xi_sq: f64,
    pub any_nyquist: bool,
}

/// Runs `f(flat, ctx)` over every spectral bin.
pub(crate) fn for_each_bin(grid: &PeriodicGrid, mut f: impl FnMut(usize, &BinCtx)) {
    let d = grid.dim();
    let m = grid.nodes_per_axis();
    let mut idx = vec![0usize; d];
    let xi: Vec<f64> = (0..m).map(|k| grid.xi(k)).collect();
    for flat in 0..grid.total_points() {
        grid.decode(flat, &mut idx);
        let mut xi_sq = 0.0;
        let mut nyq = false;
        for &k in idx.iter() {
            let x = xi[k];
            xi_sq += x * x;
            nyq |= grid.is_nyquist(k);
        }
        f(flat, &BinCtx { idx: &idx, xi_sq, any_nyquist: nyq });
    }
}

/// Applies a real radial symbol g(|xi|^2) to a component. The symbol sees the
/// full spectrum (Nyquist included); the zero mode is whatever g(0) returns.
pub(crate) fn apply_radial_symbol(
    grid: &PeriodicGrid,
    comp: &[f64],
    mut g: impl FnMut(f64) -> f64,
) -> Result<Vec<f64>> {
    let mut spec = forward(grid, comp);
    for_each_bin(grid, |flat, ctx| {
        spec[flat] *= g(ctx.xi_sq);
    });
    let scale = comp.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()));
    inverse_real(grid, spec, scale, 1e-10)
}

/// Applies the odd symbol i xi_axis g(|xi|^2). Bins carrying a Nyquist index
/// and the zero mode are annihilated (see module docs).
pub(crate) fn apply_gradient_symbol(
    grid: &PeriodicGrid,
    comp: &[f64],
    axis: usize,
    mut g: impl FnMut(f64) -> f64,
) -> Result<Vec<f64>> {
    debug_assert!(axis < grid.dim());
    let mut spec = forward(grid, comp);
    let m = grid.nodes_per_axis();
    let xi: Vec<f64> = (0..m).map(|k| grid.xi(k)).collect();
    for_each_bin(grid, |flat, ctx| {
        if ctx.any_nyquist || ctx.xi_sq == 0.0 {
            spec[flat] = C64::new(0.0, 0.0);
        } else {
            let mult = C64::new(0.0, xi[ctx.idx[axis]] * g(ctx.xi_sq));
            spec[flat] *= mult;
        }
    });
    let scale = comp.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()));
    inverse_real(grid, spec, scale, 1e-10)
}

/// Parseval sum: (h^d / M^d) sum_k w(ctx) |F_k|^2. With w = 1 this equals the
/// squared L2 norm of the component.
pub(crate) fn weighted_spectral_sum(
    grid: &PeriodicGrid,
    comp: &[f64],
    mut w: impl FnMut(&BinCtx) -> f64,
) -> f64 {
    let spec = forward(grid, comp);
    let mut acc = 0.0;
    for_each_bin(grid, |flat, ctx| {
        acc += w(ctx) * spec[flat].norm_sqr();
    });
    acc * grid.cell_volume() / grid.total_points() as f64
}

/// True on bins kept by the 2/3 dealiasing rule: |k_a| <= floor(M/3) on every
/// axis.
pub(crate) fn dealias_keep(grid: &PeriodicGrid, idx: &[usize]) -> bool {
    let cut = (grid.nodes_per_axis() / 3) as i64;
    idx.iter().all(|&k| grid.signed_freq(k).abs() <= cut)
}
