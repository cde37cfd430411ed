//! Eulerian beams for `n = 1`: level sets and beam data advected on a
//! uniform `(x, p)` grid by a semi-Lagrangian Liouville solver.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam::{BeamState, Order};
use crate::error::{Error, Result};
use crate::field::{Grid, WaveField};
use crate::initial_data::{split_initial_amplitudes, InitialData};
use crate::medium::{Branch, MediumModel};
use crate::synthesis::{superpose, BeamFamily, SuperpositionConfig};

/// Default regularized delta width, in grid cells measured in `w` units.
pub const DEFAULT_ETA_CELLS: f64 = 3.0;
const SINGULAR_GP: f64 = 1e-8;
/// Amplitudes below this fraction of the peak are ignored (interpolation
/// spreads the tails of compactly supported data by a few cells per step).
const AMPLITUDE_FLOOR: f64 = 1e-10;
/// Relative amplitude below which data may leave the grid.
const DOMAIN_FLOOR: f64 = 1e-6;

fn amplitude_floor(a: &[Complex64]) -> f64 {
    AMPLITUDE_FLOOR * a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub x_lo: f64,
    pub x_hi: f64,
    pub p_lo: f64,
    pub p_hi: f64,
    pub nx: usize,
    pub np: usize,
    pub branch: Branch,
}

impl PhaseGrid {
    pub fn new(x: (f64, f64), p: (f64, f64), nx: usize, np: usize, branch: Branch, p_min: f64) -> Result<Self> {
        let g = PhaseGrid { x_lo: x.0, x_hi: x.1, p_lo: p.0, p_hi: p.1, nx, np, branch };
        if !(x.1 > x.0) || !(p.1 > p.0) {
            return Err(Error::Config("phase grid ranges must be increasing".into()));
        }
        if nx < 8 || np < 8 {
            return Err(Error::Config("phase grid needs at least 8 nodes per axis".into()));
        }
        let gap = 10.0 * p_min;
        if !(p.0 >= gap || p.1 <= -gap) {
            return Err(Error::Config(format!("p-range [{}, {}] must exclude |p| < {gap:e}", p.0, p.1)));
        }
        Ok(g)
    }

    pub fn dx(&self) -> f64 {
        (self.x_hi - self.x_lo) / (self.nx - 1) as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_hi - self.p_lo) / (self.np - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.nx * self.np
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major in `x`: `idx = ix·np + ip`.
    pub fn node(&self, idx: usize) -> (f64, f64) {
        let (ix, ip) = (idx / self.np, idx % self.np);
        (self.x_lo + ix as f64 * self.dx(), self.p_lo + ip as f64 * self.dp())
    }

    fn contains(&self, x: f64, p: f64) -> bool {
        x >= self.x_lo && x <= self.x_hi && p >= self.p_lo && p <= self.p_hi
    }

    /// Phase-space velocity `V = (H_p, -H_x)`.
    fn velocity(&self, med: &MediumModel, x: f64, p: f64) -> Result<(f64, f64)> {
        let blk = med.hamiltonian_blocks(self.branch, &[x], &[p])?;
        Ok((blk.hp[0], -blk.hx[0]))
    }
}

/// Advected fields on one branch: `φ₁`, `w = φ₂`, `S̃`, `Ã`.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSetBundle {
    pub grid: PhaseGrid,
    pub t: f64,
    pub phi1: Vec<f64>,
    pub w: Vec<f64>,
    pub s: Vec<f64>,
    pub a: Vec<Complex64>,
}

/// Initial bundle: `φ₁ = x`, `w = p - S'(x)`, `S̃ = S(x)`, `Ã = A±(x)`.
pub fn init_bundle(grid: PhaseGrid, d: &InitialData<1>, med: &MediumModel) -> Result<LevelSetBundle> {
    let n = grid.len();
    let mut b = LevelSetBundle {
        grid,
        t: 0.0,
        phi1: vec![0.0; n],
        w: vec![0.0; n],
        s: vec![0.0; n],
        a: vec![Complex64::new(0.0, 0.0); n],
    };
    for ix in 0..grid.nx {
        let (x, _) = grid.node(ix * grid.np);
        let ph = d.phase_taylor(&[x]);
        let (ap, am) = split_initial_amplitudes(d, med, &[x])?;
        let a = match grid.branch {
            Branch::Plus => ap,
            Branch::Minus => am,
        };
        for ip in 0..grid.np {
            let idx = ix * grid.np + ip;
            let (_, p) = grid.node(idx);
            b.phi1[idx] = x;
            b.w[idx] = p - ph.grad[0];
            b.s[idx] = ph.s;
            b.a[idx] = a;
        }
    }
    Ok(b)
}

/// Fourth-order first derivative along one axis, one-sided near the ends.
fn deriv(f: impl Fn(usize) -> f64, i: usize, n: usize, h: f64) -> f64 {
    if i >= 2 && i + 2 < n {
        (f(i - 2) - 8.0 * f(i - 1) + 8.0 * f(i + 1) - f(i + 2)) / (12.0 * h)
    } else if i < 2 {
        let s = i.min(n - 5);
        let o = i - s;
        let c: [f64; 5] = if o == 0 { [-25.0, 48.0, -36.0, 16.0, -3.0] } else { [-3.0, -10.0, 18.0, -6.0, 1.0] };
        (0..5).map(|k| c[k] * f(s + k)).sum::<f64>() / (12.0 * h)
    } else {
        let s = n - 5;
        let o = i - s;
        let c: [f64; 5] = if o == 4 { [3.0, -16.0, 36.0, -48.0, 25.0] } else { [-1.0, 6.0, -18.0, 10.0, 3.0] };
        (0..5).map(|k| c[k] * f(s + k)).sum::<f64>() / (12.0 * h)
    }
}

fn grad(g: &PhaseGrid, f: &[f64], idx: usize) -> (f64, f64) {
    let (ix, ip) = (idx / g.np, idx % g.np);
    let fx = deriv(|i| f[i * g.np + ip], ix, g.nx, g.dx());
    let fp = deriv(|j| f[ix * g.np + j], ip, g.np, g.dp());
    (fx, fp)
}

/// Cubic Lagrange weights for the 4-node stencil starting at `i0`.
fn stencil(u: f64, n: usize) -> (usize, [f64; 4]) {
    let i0 = (u.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let s = u - i0 as f64;
    let w = [
        -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0,
        s * (s - 2.0) * (s - 3.0) / 2.0,
        -s * (s - 1.0) * (s - 3.0) / 2.0,
        s * (s - 1.0) * (s - 2.0) / 6.0,
    ];
    (i0, w)
}

struct Interp {
    ix: usize,
    wx: [f64; 4],
    ip: usize,
    wp: [f64; 4],
}

impl Interp {
    fn new(g: &PhaseGrid, x: f64, p: f64) -> Self {
        let (ix, wx) = stencil((x - g.x_lo) / g.dx(), g.nx);
        let (ip, wp) = stencil((p - g.p_lo) / g.dp(), g.np);
        Interp { ix, wx, ip, wp }
    }

    fn apply<V>(&self, np: usize, f: &[V]) -> V
    where
        V: Copy + std::ops::Mul<f64, Output = V> + std::ops::Add<Output = V>,
    {
        let mut acc: Option<V> = None;
        for a in 0..4 {
            for b in 0..4 {
                let v = f[(self.ix + a) * np + self.ip + b] * (self.wx[a] * self.wp[b]);
                acc = Some(match acc {
                    Some(s) => s + v,
                    None => v,
                });
            }
        }
        acc.expect("non-empty stencil")
    }
}

/// Largest change of `w` across one cell, over cells adjacent to the zero set.
fn cell_w(g: &PhaseGrid, w: &[f64], idx: usize) -> f64 {
    let (wx, wp) = grad(g, w, idx);
    (wx.abs() * g.dx()).max(wp.abs() * g.dp())
}

fn zero_crossings(g: &PhaseGrid, w: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    for ix in 0..g.nx {
        for ip in 0..g.np {
            let idx = ix * g.np + ip;
            let right = ix + 1 < g.nx && w[idx] * w[idx + g.np] <= 0.0;
            let up = ip + 1 < g.np && w[idx] * w[idx + 1] <= 0.0;
            if right || up {
                out.push(idx);
            }
        }
    }
    out
}

impl LevelSetBundle {
    /// Width of the band around `{w = 0}` that carries beams, in `w` units.
    pub fn active_band(&self) -> f64 {
        let m = zero_crossings(&self.grid, &self.w)
            .into_iter()
            .map(|i| cell_w(&self.grid, &self.w, i))
            .fold(0.0, f64::max);
        let fallback = self.grid.dp().max(self.grid.dx());
        2.0 * DEFAULT_ETA_CELLS * if m > 0.0 { m } else { fallback }
    }

    fn active_mask(&self) -> Vec<bool> {
        let band = self.active_band();
        let floor = amplitude_floor(&self.a);
        self.w.iter().zip(&self.a).map(|(w, a)| w.abs() <= band && a.norm() > floor).collect()
    }

    /// Samples `(S̃, M̃, Ã, w)` at an arbitrary phase-space point.
    pub fn sample(&self, m: &[Complex64], x: f64, p: f64) -> Option<(f64, Complex64, Complex64, f64)> {
        if !self.grid.contains(x, p) {
            return None;
        }
        let it = Interp::new(&self.grid, x, p);
        let np = self.grid.np;
        Some((it.apply(np, &self.s), it.apply(np, m), it.apply(np, &self.a), it.apply(np, &self.w)))
    }

    /// Rows `(x, p, φ₁, w, S̃, Re Ã, Im Ã, Re M̃, Im M̃)` for a snapshot dump.
    pub fn dump_rows(&self) -> Result<Vec<[f64; 9]>> {
        let m = reconstruct_hessian(self)?;
        Ok((0..self.grid.len())
            .map(|i| {
                let (x, p) = self.grid.node(i);
                [x, p, self.phi1[i], self.w[i], self.s[i], self.a[i].re, self.a[i].im, m[i].re, m[i].im]
            })
            .collect())
    }
}

fn hessian_field(g: &PhaseGrid, phi1: &[f64], w: &[f64], active: &[bool]) -> Result<Vec<Complex64>> {
    (0..g.len())
        .into_par_iter()
        .map(|i| {
            let (f1x, f1p) = grad(g, phi1, i);
            let (f2x, f2p) = grad(g, w, i);
            let gx = Complex64::new(f1x, f2x);
            let gp = Complex64::new(f1p, f2p);
            if gp.norm() < SINGULAR_GP {
                if active[i] {
                    let (x, p) = g.node(i);
                    return Err(Error::SingularGp { value: gp.norm(), x, p });
                }
                return Ok(Complex64::new(0.0, 1.0));
            }
            Ok(-gx / gp)
        })
        .collect()
}

/// `M̃ = -g_x / g_p` with `g = φ₁ + iφ₂`, by fourth-order differences.
///
/// Nodes outside the active band with a singular `g_p` get `M̃ = i`.
pub fn reconstruct_hessian(b: &LevelSetBundle) -> Result<Vec<Complex64>> {
    hessian_field(&b.grid, &b.phi1, &b.w, &b.active_mask())
}

/// `Ȧ / A = (H_p H_x + H_p² M - c² M) / (2H)` at one phase-space point.
fn amplitude_rate(med: &MediumModel, branch: Branch, x: f64, p: f64, m: Complex64) -> Result<Complex64> {
    let blk = med.hamiltonian_blocks(branch, &[x], &[p])?;
    let n = Complex64::new(blk.hp[0] * blk.hx[0], 0.0) + m * (blk.hp[0] * blk.hp[0] - blk.c * blk.c);
    Ok(n / (2.0 * blk.h))
}

/// Foot of the characteristic through `(x, p)`: one classical RK4 step of `dX/dt = -V`.
fn backtrace(med: &MediumModel, g: &PhaseGrid, x: f64, p: f64, dt: f64) -> Result<(f64, f64)> {
    let k1 = g.velocity(med, x, p)?;
    let k2 = g.velocity(med, x - 0.5 * dt * k1.0, p - 0.5 * dt * k1.1)?;
    let k3 = g.velocity(med, x - 0.5 * dt * k2.0, p - 0.5 * dt * k2.1)?;
    let k4 = g.velocity(med, x - dt * k3.0, p - dt * k3.1)?;
    Ok((
        x - dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        p - dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    ))
}

/// One semi-Lagrangian step of length `dt`.
///
/// Each node is traced back along `V`, fields are interpolated bicubically at
/// the foot, and `Ã` picks up its source by the trapezoid rule along the
/// characteristic (with `M̃` at both time levels). Feet outside the grid are
/// extrapolated from the nearest stencil, at most one cell out. Data in the
/// delta band reaching the outer ring of the grid, or needing a foot outside
/// it, is an error.
pub fn liouville_step(med: &MediumModel, b: &LevelSetBundle, dt: f64) -> Result<LevelSetBundle> {
    let g = b.grid;
    let m_old = reconstruct_hessian(b)?;
    let band_old = b.active_band();
    let np = g.np;
    let feet: Vec<(f64, f64, bool)> = (0..g.len())
        .into_par_iter()
        .map(|i| {
            let (x, p) = g.node(i);
            let (xf, pf) = backtrace(med, &g, x, p, dt)?;
            let inside = g.contains(xf, pf);
            let (hx, hp) = (g.dx(), g.dp());
            Ok((xf.clamp(g.x_lo - hx, g.x_hi + hx), pf.clamp(g.p_lo - hp, g.p_hi + hp), inside))
        })
        .collect::<Result<_>>()?;

    let mut next = b.clone();
    next.t = b.t + dt;
    let mut a_foot = vec![Complex64::new(0.0, 0.0); g.len()];
    let mut m_foot = a_foot.clone();
    for (i, &(xf, pf, _)) in feet.iter().enumerate() {
        let it = Interp::new(&g, xf, pf);
        next.phi1[i] = it.apply(np, &b.phi1);
        next.w[i] = it.apply(np, &b.w);
        next.s[i] = it.apply(np, &b.s);
        a_foot[i] = it.apply(np, &b.a);
        m_foot[i] = it.apply(np, &m_old);
    }
    // Only data inside the delta band with non-negligible amplitude matters here.
    let floor = DOMAIN_FLOOR / AMPLITUDE_FLOOR * amplitude_floor(&a_foot);
    let eta = DEFAULT_ETA_CELLS / (2.0 * DEFAULT_ETA_CELLS) * band_old;
    for (i, &(_, _, inside)) in feet.iter().enumerate() {
        let (ix, ip) = (i / np, i % np);
        let rim = ix == 0 || ix + 1 == g.nx || ip == 0 || ip + 1 == np;
        if (!inside || rim) && next.w[i].abs() <= eta && a_foot[i].norm() > floor {
            let (x, p) = g.node(i);
            return Err(Error::OutOfDomain { x, p });
        }
    }
    next.a = a_foot.clone();
    let m_new = reconstruct_hessian(&next)?;
    next.a = (0..g.len())
        .into_par_iter()
        .map(|i| {
            if a_foot[i].norm() == 0.0 {
                return Ok(a_foot[i]);
            }
            let (x, p) = g.node(i);
            let (xf, pf, _) = feet[i];
            let q0 = amplitude_rate(med, g.branch, xf, pf, m_foot[i])?;
            let q1 = amplitude_rate(med, g.branch, x, p, m_new[i])?;
            Ok(a_foot[i] * ((q0 + q1) * (0.5 * dt)).exp())
        })
        .collect::<Result<_>>()?;
    if !(next.w.iter().chain(&next.phi1).chain(&next.s).all(|v| v.is_finite())
        && next.a.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    {
        return Err(Error::InvariantViolation(format!("non-finite level-set data at t = {}", next.t)));
    }
    Ok(next)
}

/// Advances to `t_end` with equal steps no longer than `dt_max`.
pub fn advance(med: &MediumModel, b: &LevelSetBundle, t_end: f64, dt_max: f64) -> Result<LevelSetBundle> {
    if !(dt_max > 0.0) {
        return Err(Error::Config("time step must be positive".into()));
    }
    let span = t_end - b.t;
    let steps = (span.abs() / dt_max).ceil() as usize;
    let mut cur = b.clone();
    for k in 0..steps {
        let dt = span / steps as f64;
        cur = liouville_step(med, &cur, dt)?;
        if k + 1 == steps {
            cur.t = t_end;
        }
    }
    Ok(cur)
}

/// Hat profile `δ_η(w) = max(0, 1 - |w|/η) / η`.
pub fn regularized_delta(w: f64, eta: f64) -> f64 {
    (1.0 - (w / eta).abs()).max(0.0) / eta
}

/// Beams carried by the `δ_η(w)` band of one bundle, weighted by `δ_η(w) dx dp`.
pub fn bundle_beams(b: &LevelSetBundle, eta_cells: f64) -> Result<BeamFamily<1>> {
    let g = &b.grid;
    let m = reconstruct_hessian(b)?;
    let crossings = zero_crossings(g, &b.w);
    let mut fam = BeamFamily { branch: g.branch, t: b.t, beams: Vec::new() };
    if crossings.is_empty() {
        return Ok(fam);
    }
    let widths: Vec<f64> = crossings.iter().map(|&i| cell_w(g, &b.w, i)).collect();
    let eta = eta_cells * widths.iter().copied().fold(0.0, f64::max);
    for (&i, &cw) in crossings.iter().zip(&widths) {
        if eta < 2.0 * cw || !(eta > 0.0) {
            let (x, p) = g.node(i);
            return Err(Error::DeltaUnresolved { x, p });
        }
    }
    let cell = g.dx() * g.dp();
    let floor = amplitude_floor(&b.a);
    for i in 0..g.len() {
        let weight = regularized_delta(b.w[i], eta) * cell;
        if weight == 0.0 || b.a[i].norm() <= floor {
            continue;
        }
        let (x, p) = g.node(i);
        fam.beams.push((
            BeamState {
                t: b.t,
                x: [x],
                p: [p],
                s: b.s[i],
                m: [[m[i]]],
                a: b.a[i],
                higher: None,
                branch: g.branch,
                x0: [b.phi1[i]],
            },
            weight,
        ));
    }
    Ok(fam)
}

/// `u = Z(1,ε) Σ± ∫ u±_PGB δ_η(w±) dX` by the midpoint rule over the phase grids.
pub fn eulerian_superpose(
    med: &MediumModel,
    bundles: &[LevelSetBundle],
    cfg: &SuperpositionConfig,
    grid: &Grid<1>,
    eta_cells: f64,
) -> Result<WaveField<1>> {
    if cfg.order != Order::First {
        return Err(Error::Config("Eulerian beams are first order only".into()));
    }
    if cfg.beta != 1.0 {
        return Err(Error::Config("Eulerian beams fix beta = 1".into()));
    }
    if let Some(first) = bundles.first() {
        if bundles.iter().any(|b| b.t != first.t) {
            return Err(Error::InvariantViolation("bundles are at different times".into()));
        }
    }
    let fams = bundles.iter().map(|b| bundle_beams(b, eta_cells)).collect::<Result<Vec<_>>>()?;
    let mut f = superpose(med, &fams, cfg, grid)?;
    if let Some(b) = bundles.first() {
        f.t = b.t;
    }
    Ok(f)
}
