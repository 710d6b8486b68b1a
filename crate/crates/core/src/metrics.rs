//! Distances used by the convergence studies: the trajectory norm for
//! field-valued solutions and a bounded-Lipschitz lower bound for measures.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::frac_ops;
use crate::grid::PeriodicGrid;

/// Squared trajectory norm of the difference of two snapshot sequences:
/// sup over snapshots of the summed L2 norms squared plus the trapezoid
/// integral of the summed H^alpha seminorms squared.
pub fn trajectory_distance_sq(
    times: &[f64],
    a: &[Field],
    b: &[Field],
    alpha: f64,
) -> Result<f64> {
    if times.len() != a.len() || a.len() != b.len() || times.len() < 2 {
        return Err(Error::Misaligned(
            "trajectories must share at least two snapshot times".into(),
        ));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Misaligned("snapshot times must increase".into()));
    }
    let mut sup_sq = 0.0_f64;
    let mut sem_sq = Vec::with_capacity(times.len());
    for (fa, fb) in a.iter().zip(b) {
        let diff = fa.axpy(-1.0, fb)?;
        let grid = diff.grid();
        let mut l2 = 0.0;
        let mut sem = 0.0;
        for i in 0..diff.n_species() {
            l2 += frac_ops::l2_norm_sq_comp(grid, diff.species(i));
            sem += frac_ops::h_alpha_seminorm_sq_comp(grid, diff.species(i), alpha);
        }
        sup_sq = sup_sq.max(l2);
        sem_sq.push(sem);
    }
    let mut integral = 0.0;
    for (w, s) in times.windows(2).zip(sem_sq.windows(2)) {
        integral += 0.5 * (w[1] - w[0]) * (s[0] + s[1]);
    }
    Ok(sup_sq + integral)
}

/// A measure on the line supported in the fundamental domain, either an
/// empirical collection of weighted points or a grid density.
pub enum Measure<'a> {
    Points { positions: &'a [f64], weight: f64 },
    Density { grid: &'a PeriodicGrid, comp: &'a [f64] },
}

/// One test function with sup-norm plus Lipschitz constant at most one.
#[derive(Debug, Clone, Copy)]
enum TestFn {
    /// amp sin/cos(xi x), amp = 1/(1 + xi)
    Wave { xi: f64, amp: f64, cosine: bool },
    /// amp max(0, 1 - |x - c|/w), amp = w/(1 + w)
    Tent { center: f64, width: f64, amp: f64 },
    /// clamp((1 - cap)(x - c), -cap, cap); optimal for well-separated pairs
    Ramp { center: f64, cap: f64 },
}

impl TestFn {
    fn eval(&self, x: f64) -> f64 {
        match *self {
            TestFn::Wave { xi, amp, cosine } => {
                if cosine {
                    amp * (xi * x).cos()
                } else {
                    amp * (xi * x).sin()
                }
            }
            TestFn::Tent { center, width, amp } => {
                amp * (1.0 - (x - center).abs() / width).max(0.0)
            }
            TestFn::Ramp { center, cap } => ((1.0 - cap) * (x - center)).clamp(-cap, cap),
        }
    }
}

/// Finite family of bounded-Lipschitz test functions. The supremum of
/// pairings over the family is a certified lower bound on the
/// bounded-Lipschitz distance (it never overestimates); the ramp family
/// makes the bound sharp for separated point masses, where the distance
/// equals 2r/(2+r) at separation r.
pub struct BlDictionary {
    funcs: Vec<TestFn>,
}

impl BlDictionary {
    /// Dictionary adapted to a domain of length `l`: 32 wave numbers (sine
    /// and cosine), tents at 16 centers and 4 widths, and clamped ramps at
    /// 256 centers with 15 cap levels.
    pub fn standard(l: f64) -> Result<BlDictionary> {
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::InvalidArgument(format!("bad domain length {l}")));
        }
        let tau = 2.0 * std::f64::consts::PI;
        let mut funcs = Vec::new();
        for k in 1..=32 {
            let xi = tau * k as f64 / l;
            let amp = 1.0 / (1.0 + xi);
            funcs.push(TestFn::Wave { xi, amp, cosine: false });
            funcs.push(TestFn::Wave { xi, amp, cosine: true });
        }
        for c in 0..16 {
            let center = l * (c as f64 / 16.0 - 0.5);
            for width in [0.25, 0.5, 1.0, 2.0] {
                funcs.push(TestFn::Tent { center, width, amp: width / (1.0 + width) });
            }
        }
        for c in 0..256 {
            let center = l * (c as f64 / 256.0 - 0.5);
            for s in 1..16 {
                funcs.push(TestFn::Ramp { center, cap: s as f64 / 16.0 });
            }
        }
        Ok(BlDictionary { funcs })
    }

    pub fn len(&self) -> usize {
        self.funcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.funcs.is_empty()
    }

    /// Pairing of every test function with the measure. Density pairings use
    /// the node sum, consistent with how grid fields represent measures.
    pub fn pairings(&self, m: &Measure) -> Result<Vec<f64>> {
        match m {
            Measure::Points { positions, weight } => {
                if positions.is_empty() {
                    return Err(Error::InvalidArgument("empty point measure".into()));
                }
                Ok(self
                    .funcs
                    .par_iter()
                    .map(|f| weight * positions.iter().map(|&x| f.eval(x)).sum::<f64>())
                    .collect())
            }
            Measure::Density { grid, comp } => {
                if grid.dim() != 1 || comp.len() != grid.total_points() {
                    return Err(Error::InvalidArgument(
                        "density pairings support matching one-dimensional grids".into(),
                    ));
                }
                let h = grid.h();
                Ok(self
                    .funcs
                    .par_iter()
                    .map(|f| {
                        h * comp
                            .iter()
                            .enumerate()
                            .map(|(p, &v)| v * f.eval(grid.node(p)))
                            .sum::<f64>()
                    })
                    .collect())
            }
        }
    }

    /// Lower bound on the bounded-Lipschitz distance between two measures.
    pub fn lower_bound(&self, a: &Measure, b: &Measure) -> Result<f64> {
        let pa = self.pairings(a)?;
        let pb = self.pairings(b)?;
        Ok(Self::lower_bound_from_pairings(&pa, &pb))
    }

    /// Same bound from precomputed pairings (lets callers reuse one side).
    pub fn lower_bound_from_pairings(pa: &[f64], pb: &[f64]) -> f64 {
        pa.iter().zip(pb).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
    }
}

/// Exact bounded-Lipschitz distance between two unit point masses at
/// separation r.
pub fn dirac_pair_distance(r: f64) -> f64 {
    2.0 * r / (2.0 + r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn trajectory_distance_matches_single_mode_closed_form() {
        let tau = 2.0 * std::f64::consts::PI;
        let grid = PeriodicGrid::new(1, 128, tau).unwrap();
        let f = Field::from_fn(grid, 1, |_, x| x[0].sin()).unwrap();
        let zero = Field::zeros(grid, 1).unwrap();
        let t_end = 0.7;
        let times = [0.0, 0.35, 0.7];
        let a = vec![f.clone(), f.clone(), f];
        let b = vec![zero.clone(), zero.clone(), zero];
        let alpha = 0.85;
        // |sin|_2^2 = pi and the k = 1 seminorm equals the L2 norm
        let want = std::f64::consts::PI * (1.0 + t_end);
        let got = trajectory_distance_sq(&times, &a, &b, alpha).unwrap();
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }

    #[test]
    fn trajectory_distance_requires_aligned_snapshots() {
        let grid = PeriodicGrid::new(1, 32, 4.0).unwrap();
        let f = Field::zeros(grid, 1).unwrap();
        let err = trajectory_distance_sq(&[0.0], &[f.clone()], &[f.clone()], 0.85);
        assert!(matches!(err, Err(Error::Misaligned(_))));
        let err = trajectory_distance_sq(
            &[0.0, 0.0],
            &[f.clone(), f.clone()],
            &[f.clone(), f],
            0.85,
        );
        assert!(matches!(err, Err(Error::Misaligned(_))));
    }

    #[test]
    fn dictionary_bound_is_sharp_for_separated_diracs() {
        let l = 16.0 * std::f64::consts::PI;
        let dict = BlDictionary::standard(l).unwrap();
        for r in [0.1, 1.0, 5.0, 10.0] {
            let mid = 0.37;
            let xa = [mid - 0.5 * r];
            let xb = [mid + 0.5 * r];
            let bound = dict
                .lower_bound(
                    &Measure::Points { positions: &xa, weight: 1.0 },
                    &Measure::Points { positions: &xb, weight: 1.0 },
                )
                .unwrap();
            let exact = dirac_pair_distance(r);
            assert!(bound <= exact * (1.0 + 1e-9), "r = {r}: bound {bound} above {exact}");
            assert!(
                bound >= 0.9 * exact,
                "r = {r}: bound {bound} below 0.9 * {exact}"
            );
        }
    }

    #[test]
    fn dictionary_bound_is_a_pseudometric() {
        let l = 20.0;
        let dict = BlDictionary::standard(l).unwrap();
        let mut rng = RngStream::new(4242);
        for _ in 0..10 {
            let draw = |rng: &mut RngStream| -> Vec<f64> {
                (0..5).map(|_| (rng.uniform() - 0.5) * l).collect()
            };
            let (xa, xb, xc) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
            fn m(p: &[f64]) -> Measure<'_> {
                Measure::Points { positions: p, weight: 0.2 }
            }
            let dab = dict.lower_bound(&m(&xa), &m(&xb)).unwrap();
            let dba = dict.lower_bound(&m(&xb), &m(&xa)).unwrap();
            let dac = dict.lower_bound(&m(&xa), &m(&xc)).unwrap();
            let dcb = dict.lower_bound(&m(&xc), &m(&xb)).unwrap();
            assert_eq!(dab, dba);
            assert!(dab <= dac + dcb + 1e-12);
            assert_eq!(dict.lower_bound(&m(&xa), &m(&xa)).unwrap(), 0.0);
        }
    }

    #[test]
    fn density_and_point_views_of_the_same_mass_agree() {
        // a tight grid bump against a point mass at its center
        let grid = PeriodicGrid::new(1, 4096, 16.0 * std::f64::consts::PI).unwrap();
        let x0 = 1.2345;
        let sigma = 0.02;
        let comp: Vec<f64> = (0..4096)
            .map(|p| {
                let z = (grid.node(p) - x0) / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            })
            .collect();
        let dict = BlDictionary::standard(grid.length()).unwrap();
        let d = dict
            .lower_bound(
                &Measure::Density { grid: &grid, comp: &comp },
                &Measure::Points { positions: &[x0], weight: 1.0 },
            )
            .unwrap();
        assert!(d < 0.05, "narrow bump should be close to its center mass: {d}");
    }
}
