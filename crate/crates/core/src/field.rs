//! Multi-species scalar fields sampled on a periodic grid.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::PeriodicGrid;

/// `n_species` real fields sharing one grid. Storage is species-major, each
/// species row-major over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: PeriodicGrid,
    n_species: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: PeriodicGrid, n_species: usize) -> Result<Self> {
        if n_species == 0 {
            return Err(Error::InvalidArgument("field needs at least one species".into()));
        }
        let len = grid
            .total_points()
            .checked_mul(n_species)
            .ok_or_else(|| Error::InvalidArgument("field size overflows".into()))?;
        Ok(Field { grid, n_species, data: vec![0.0; len] })
    }

    /// Builds a field by evaluating `f(species, coords)` at every node.
    pub fn from_fn(
        grid: PeriodicGrid,
        n_species: usize,
        mut f: impl FnMut(usize, &[f64]) -> f64,
    ) -> Result<Self> {
        let mut out = Self::zeros(grid, n_species)?;
        let total = grid.total_points();
        let mut x = vec![0.0; grid.dim()];
        for i in 0..n_species {
            for p in 0..total {
                grid.coords(p, &mut x);
                out.data[i * total + p] = f(i, &x);
            }
        }
        out.check_finite("Field::from_fn")?;
        Ok(out)
    }

    /// Wraps raw species components; each slice must have M^d entries.
    pub fn from_components(grid: PeriodicGrid, comps: &[Vec<f64>]) -> Result<Self> {
        let total = grid.total_points();
        if comps.is_empty() || comps.iter().any(|c| c.len() != total) {
            return Err(Error::InvalidArgument(format!(
                "expected nonempty components of length {total}"
            )));
        }
        let mut out = Self::zeros(grid, comps.len())?;
        for (i, c) in comps.iter().enumerate() {
            out.species_mut(i).copy_from_slice(c);
        }
        out.check_finite("Field::from_components")?;
        Ok(out)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn n_species(&self) -> usize {
        self.n_species
    }

    pub fn species(&self, i: usize) -> &[f64] {
        let total = self.grid.total_points();
        &self.data[i * total..(i + 1) * total]
    }

    pub fn species_mut(&mut self, i: usize) -> &mut [f64] {
        let total = self.grid.total_points();
        &mut self.data[i * total..(i + 1) * total]
    }

    pub fn check_finite(&self, context: &str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite { context: context.to_string() })
        }
    }

    /// Total mass of one species: h^d times the node sum.
    pub fn mass(&self, i: usize) -> f64 {
        self.species(i).iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn min_value(&self, i: usize) -> f64 {
        self.species(i).iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self, i: usize) -> f64 {
        self.species(i).iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Pointwise linear combination `self + c * other`.
    pub fn axpy(&self, c: f64, other: &Field) -> Result<Field> {
        if self.grid != other.grid || self.n_species != other.n_species {
            return Err(Error::Misaligned("fields live on different grids".into()));
        }
        let mut out = self.clone();
        for (o, &v) in out.data.iter_mut().zip(other.data.iter()) {
            *o += c * v;
        }
        Ok(out)
    }

    /// Serializes to the flat binary layout documented in the README:
    /// little-endian header (u32 d, u32 M, f64 L, u32 n) followed by
    /// n * M^d IEEE f64 values, species-major then row-major.
    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&(self.grid.dim() as u32).to_le_bytes())?;
        w.write_all(&(self.grid.nodes_per_axis() as u32).to_le_bytes())?;
        w.write_all(&self.grid.length().to_le_bytes())?;
        w.write_all(&(self.n_species as u32).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<Self> {
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let d = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b4)?;
        let m = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b8)?;
        let l = f64::from_le_bytes(b8);
        r.read_exact(&mut b4)?;
        let n = u32::from_le_bytes(b4) as usize;
        let grid = PeriodicGrid::new(d, m, l)?;
        let mut out = Self::zeros(grid, n)?;
        for v in out.data.iter_mut() {
            r.read_exact(&mut b8)?;
            *v = f64::from_le_bytes(b8);
        }
        out.check_finite("Field::read_binary")?;
        Ok(out)
    }

    pub fn write_binary_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_binary(std::io::BufWriter::new(f))
    }

    pub fn read_binary_file(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_binary(std::io::BufReader::new(f))
    }

    /// One-dimensional fields also serialize to CSV: x, u_1, ..., u_n.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        if self.grid.dim() != 1 {
            return Err(Error::UnsupportedDimension {
                d: self.grid.dim(),
                what: "CSV field output".into(),
            });
        }
        let header: Vec<String> = (1..=self.n_species).map(|i| format!("u_{i}")).collect();
        writeln!(w, "x,{}", header.join(","))?;
        for p in 0..self.grid.total_points() {
            let vals: Vec<String> =
                (0..self.n_species).map(|i| format!("{}", self.species(i)[p])).collect();
            writeln!(w, "{},{}", self.grid.node(p), vals.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1() -> PeriodicGrid {
        PeriodicGrid::new(1, 16, 2.0 * std::f64::consts::PI).unwrap()
    }

    #[test]
    fn from_fn_rejects_non_finite() {
        let g = grid1();
        let r = Field::from_fn(g, 1, |_, x| 1.0 / (x[0] - x[0]));
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn mass_is_cell_weighted_sum() {
        let g = grid1();
        let f = Field::from_fn(g, 2, |i, _| if i == 0 { 1.0 } else { 2.0 }).unwrap();
        assert!((f.mass(0) - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!((f.mass(1) - 4.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn binary_roundtrip_is_exact() {
        let g = PeriodicGrid::new(2, 8, 3.5).unwrap();
        let f = Field::from_fn(g, 3, |i, x| (i as f64 + 1.0) * (x[0] + 2.0 * x[1]).sin()).unwrap();
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 8 + 4 + 8 * 3 * 64);
        let back = Field::read_binary(buf.as_slice()).unwrap();
        assert_eq!(f, back);
    }

    #[test]
    fn csv_is_one_dimensional_only() {
        let g = PeriodicGrid::new(2, 8, 1.0).unwrap();
        let f = Field::zeros(g, 1).unwrap();
        let mut buf = Vec::new();
        assert!(f.write_csv(&mut buf).is_err());

        let f1 = Field::from_fn(grid1(), 2, |i, x| i as f64 + x[0]).unwrap();
        let mut buf = Vec::new();
        f1.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,u_1,u_2\n"));
        assert_eq!(text.lines().count(), 17);
    }
}
