//! Uniform spatial grids and sampled wave fields.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Uniform grid with equal spacing `h` along every axis; the last axis varies fastest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid<const D: usize> {
    #[serde(with = "serde_arrays")]
    pub lo: Vector<f64, D>,
    pub h: f64,
    #[serde(with = "serde_arrays")]
    pub n: Vector<usize, D>,
}

impl<const D: usize> Grid<D> {
    pub fn new(lo: Vector<f64, D>, h: f64, n: Vector<usize, D>) -> Self {
        Grid { lo, h, n }
    }

    /// Grid covering `[lo, hi]` per axis with spacing at most `h_max`.
    pub fn covering(lo: Vector<f64, D>, hi: Vector<f64, D>, h_max: f64) -> Self {
        let span = (0..D).map(|i| hi[i] - lo[i]).fold(0.0, f64::max);
        let cells = (span / h_max).ceil().max(1.0);
        let h = span / cells;
        let n = std::array::from_fn(|i| ((hi[i] - lo[i]) / h).round() as usize + 1);
        Grid { lo, h, n }
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of points along the last axis.
    pub fn row_len(&self) -> usize {
        self.n[D - 1]
    }

    pub fn rows(&self) -> usize {
        self.len() / self.row_len()
    }

    pub fn index_to_multi(&self, mut idx: usize) -> Vector<usize, D> {
        let mut out = [0usize; D];
        for i in (0..D).rev() {
            out[i] = idx % self.n[i];
            idx /= self.n[i];
        }
        out
    }

    pub fn multi_to_index(&self, m: &Vector<usize, D>) -> usize {
        let mut idx = 0;
        for i in 0..D {
            idx = idx * self.n[i] + m[i];
        }
        idx
    }

    pub fn point(&self, idx: usize) -> Vector<f64, D> {
        let m = self.index_to_multi(idx);
        std::array::from_fn(|i| self.lo[i] + self.h * m[i] as f64)
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(D as i32)
    }

    /// Resolution limit for fields oscillating at wavelength `2πε`: 25 points per wavelength.
    pub fn resolution_limit(eps: f64) -> f64 {
        2.0 * std::f64::consts::PI * eps / 25.0
    }

    pub fn check_resolution(&self, eps: f64) -> Result<()> {
        let limit = Self::resolution_limit(eps);
        if self.h > limit * (1.0 + 1e-12) {
            return Err(Error::GridTooCoarse { h: self.h, limit });
        }
        Ok(())
    }
}

/// Complex samples of `u` and `∂_t u` at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveField<const D: usize> {
    pub grid: Grid<D>,
    pub t: f64,
    pub u: Vec<Complex64>,
    pub ut: Vec<Complex64>,
}

impl<const D: usize> WaveField<D> {
    pub fn zeros(grid: Grid<D>, t: f64) -> Self {
        let n = grid.len();
        WaveField { grid, t, u: vec![Complex64::new(0.0, 0.0); n], ut: vec![Complex64::new(0.0, 0.0); n] }
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(self.ut.iter()).all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Pointwise difference on a shared grid.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::InvariantViolation("fields live on different grids".into()));
        }
        Ok(WaveField {
            grid: self.grid,
            t: self.t,
            u: self.u.iter().zip(&other.u).map(|(a, b)| a - b).collect(),
            ut: self.ut.iter().zip(&other.ut).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::InvariantViolation("fields live on different grids".into()));
        }
        for (a, b) in self.u.iter_mut().zip(&other.u) {
            *a += b;
        }
        for (a, b) in self.ut.iter_mut().zip(&other.ut) {
            *a += b;
        }
        Ok(())
    }

    /// Discrete `L²` norm of `u` (trapezoid weights).
    pub fn l2_u(&self) -> f64 {
        l2_trapezoid(&self.grid, &self.u)
    }
}

/// Trapezoid-rule `L²` norm of grid samples.
pub fn l2_trapezoid<const D: usize>(grid: &Grid<D>, v: &[Complex64]) -> f64 {
    let mut s = 0.0;
    for (idx, z) in v.iter().enumerate() {
        s += trapezoid_weight(grid, idx) * z.norm_sqr();
    }
    (s * grid.cell_volume()).sqrt()
}

/// Product trapezoid weight (without the cell volume).
pub fn trapezoid_weight<const D: usize>(grid: &Grid<D>, idx: usize) -> f64 {
    let m = grid.index_to_multi(idx);
    let mut w = 1.0;
    for i in 0..D {
        if m[i] == 0 || m[i] + 1 == grid.n[i] {
            w *= 0.5;
        }
    }
    w
}

/// Fourth-order first derivative of grid samples along `axis`, one-sided at the ends.
pub fn diff4<const D: usize>(grid: &Grid<D>, v: &[Complex64], axis: usize) -> Vec<Complex64> {
    let n = grid.n[axis];
    assert!(n >= 5, "fourth-order differences need at least five points per axis");
    let stride: usize = grid.n[axis + 1..].iter().product();
    let h12 = 12.0 * grid.h;
    (0..v.len())
        .map(|idx| {
            let i = (idx / stride) % n;
            let base = idx - i * stride;
            let f = |k: usize| v[base + k * stride];
            let (start, c): (usize, [f64; 5]) = if i >= 2 && i + 2 < n {
                (i - 2, [1.0, -8.0, 0.0, 8.0, -1.0])
            } else if i == 0 {
                (0, [-25.0, 48.0, -36.0, 16.0, -3.0])
            } else if i == 1 {
                (0, [-3.0, -10.0, 18.0, -6.0, 1.0])
            } else if i + 2 == n {
                (n - 5, [-1.0, 6.0, -18.0, 10.0, 3.0])
            } else {
                (n - 5, [3.0, -16.0, 36.0, -48.0, 25.0])
            };
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, ck) in c.iter().enumerate() {
                acc += f(start + k) * *ck;
            }
            acc / h12
        })
        .collect()
}

mod serde_arrays {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer, T: Serialize, const D: usize>(v: &[T; D], s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, De: Deserializer<'de>, T: Deserialize<'de> + Copy + Default, const D: usize>(
        d: De,
    ) -> Result<[T; D], De::Error> {
        let v: Vec<T> = Vec::deserialize(d)?;
        if v.len() != D {
            return Err(serde::de::Error::custom(format!("expected {D} entries, found {}", v.len())));
        }
        let mut out = [T::default(); D];
        out.copy_from_slice(&v);
        Ok(out)
    }
}
