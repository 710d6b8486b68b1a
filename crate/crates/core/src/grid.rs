//! Uniform periodic grid on the torus [-L/2, L/2)^d.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid geometry: `m` nodes per axis (a power of two), side length `l`.
/// Flat storage is row-major: the last axis is contiguous.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    d: usize,
    m: usize,
    l: f64,
}

impl PeriodicGrid {
    pub fn new(d: usize, m: usize, l: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("grid dimension must be >= 1".into()));
        }
        if m < 4 || !m.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "nodes per axis must be a power of two >= 4, got {m}"
            )));
        }
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::InvalidArgument(format!("side length must be positive, got {l}")));
        }
        // Reject layouts whose flat length overflows usize.
        let mut total: usize = 1;
        for _ in 0..d {
            total = total
                .checked_mul(m)
                .ok_or_else(|| Error::InvalidArgument(format!("grid {m}^{d} overflows")))?;
        }
        Ok(PeriodicGrid { d, m, l })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.m
    }

    pub fn length(&self) -> f64 {
        self.l
    }

    /// Node spacing h = L/M.
    pub fn h(&self) -> f64 {
        self.l / self.m as f64
    }

    /// Total node count M^d.
    pub fn total_points(&self) -> usize {
        self.m.pow(self.d as u32)
    }

    /// Cell volume h^d.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.d as i32)
    }

    /// Coordinate of node index i along one axis: -L/2 + i h.
    pub fn node(&self, i: usize) -> f64 {
        -0.5 * self.l + i as f64 * self.h()
    }

    /// Signed integer frequency for FFT bin k: 0..M/2 then -M/2..-1.
    pub fn signed_freq(&self, k: usize) -> i64 {
        if k <= self.m / 2 {
            k as i64
        } else {
            k as i64 - self.m as i64
        }
    }

    /// Angular wavenumber of FFT bin k: 2 pi k_signed / L.
    pub fn xi(&self, k: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.signed_freq(k) as f64 / self.l
    }

    /// The unpaired highest bin on an even grid.
    pub fn is_nyquist(&self, k: usize) -> bool {
        k == self.m / 2
    }

    /// Largest angular wavenumber represented on the grid (per axis).
    pub fn xi_max(&self) -> f64 {
        std::f64::consts::PI * self.m as f64 / self.l
    }

    /// Decomposes a flat row-major index into per-axis indices.
    pub fn decode(&self, flat: usize, idx: &mut [usize]) {
        debug_assert_eq!(idx.len(), self.d);
        let mut rem = flat;
        for a in (0..self.d).rev() {
            idx[a] = rem % self.m;
            rem /= self.m;
        }
    }

    /// Flat row-major index of per-axis indices.
    pub fn encode(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for &i in idx {
            flat = flat * self.m + i;
        }
        flat
    }

    /// Node coordinates of a flat index.
    pub fn coords(&self, flat: usize, out: &mut [f64]) {
        let mut rem = flat;
        for a in (0..self.d).rev() {
            out[a] = self.node(rem % self.m);
            rem /= self.m;
        }
    }

    /// Wraps a coordinate into [-L/2, L/2).
    pub fn wrap(&self, x: f64) -> f64 {
        let half = 0.5 * self.l;
        let mut y = (x + half).rem_euclid(self.l) - half;
        // rem_euclid can return exactly l for tiny negative inputs.
        if y >= half {
            y -= self.l;
        }
        y
    }

    /// Minimum-image displacement: the representative of dx in [-L/2, L/2).
    pub fn min_image(&self, dx: f64) -> f64 {
        self.wrap(dx)
    }
}
