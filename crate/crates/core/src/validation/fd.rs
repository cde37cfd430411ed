//! Leapfrog reference solver for `u_tt = c²u_xx` in 1D.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Grid, WaveField};
use crate::initial_data::InitialData;
use crate::medium::MediumModel;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdOptions {
    pub h: f64,
    pub dt: f64,
    /// Combine the `(h, dt)` and `(h/2, dt/2)` solutions to fourth order.
    #[serde(default)]
    pub richardson: bool,
}

impl FdOptions {
    /// `h = ε/20`, `dt = 0.5 h / c_max`.
    pub fn for_eps(eps: f64, med: &MediumModel) -> Self {
        let h = eps / 20.0;
        FdOptions { h, dt: 0.5 * h / med.c_max(), richardson: false }
    }
}

/// Time step that lands exactly on every requested time, and the step index of each.
fn snapshot_levels(times: &[f64], dt: f64) -> Result<(f64, Vec<usize>)> {
    if times.is_empty() || times.iter().any(|t| !(*t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("snapshot times must be non-negative and ascending".into()));
    }
    let mut gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).filter(|g| *g > 0.0).collect();
    if times[0] > 0.0 {
        gaps.push(times[0]);
    }
    let Some(delta) = gaps.iter().copied().reduce(f64::min) else {
        return Ok((dt, vec![0; times.len()]));
    };
    let dt = delta / (delta / dt - 1e-9).ceil();
    let levels = times
        .iter()
        .map(|t| {
            let l = (t / dt).round();
            if (t - l * dt).abs() > 1e-9 * t.max(1.0) {
                Err(Error::Config("snapshot times must be integer multiples of a common spacing".into()))
            } else {
                Ok(l as usize)
            }
        })
        .collect::<Result<_>>()?;
    Ok((dt, levels))
}

type Snapshot = (Vec<Complex64>, Vec<Complex64>);

#[allow(clippy::too_many_arguments)]
fn run(
    med: &MediumModel,
    d: &InitialData<1>,
    eps: f64,
    times: &[f64],
    window: (f64, f64),
    h: f64,
    dt: f64,
) -> Result<(Vec<f64>, f64, Vec<Snapshot>)> {
    let cmax = med.c_max();
    if dt > 0.9 * h / cmax * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, limit: 0.9 * h / cmax });
    }
    let (dt, levels) = snapshot_levels(times, dt)?;
    let t_end = times[times.len() - 1];
    // Margins wide enough that nothing reaches the (Dirichlet) ends before t_end.
    let reach = cmax * t_end + 20.0 * h;
    let lo = window.0.min(d.support_box.0[0]) - reach;
    let hi = window.1.max(d.support_box.1[0]) + reach;
    // Align nodes with the window's left end.
    let left = ((window.0 - lo) / h).ceil() as usize;
    let n = left + ((hi - window.0) / h).ceil() as usize + 1;
    let x0 = window.0 - left as f64 * h;
    let xs: Vec<f64> = (0..n).map(|i| x0 + i as f64 * h).collect();
    let c2: Vec<f64> = xs.iter().map(|x| med.speed(&[*x]).map(|c| c * c)).collect::<Result<_>>()?;
    let zero = Complex64::new(0.0, 0.0);
    let mut prev = vec![zero; n];
    let mut v0 = prev.clone();
    for (i, x) in xs.iter().enumerate() {
        let (u, v) = d.initial_field(med, eps, &[*x])?;
        prev[i] = u;
        v0[i] = v;
    }
    let mut out = Vec::with_capacity(times.len());
    let mut next_snap = 0;
    while next_snap < levels.len() && levels[next_snap] == 0 {
        out.push((prev.clone(), v0.clone()));
        next_snap += 1;
    }
    let last = levels[levels.len() - 1];
    if last == 0 {
        return Ok((xs, dt, out));
    }
    let r = dt * dt / (h * h);
    let lap = |u: &[Complex64], i: usize| u[i - 1] - u[i] * 2.0 + u[i + 1];
    let mut cur = vec![zero; n];
    for i in 1..n - 1 {
        cur[i] = prev[i] + v0[i] * dt + lap(&prev, i) * (0.5 * r * c2[i]);
    }
    let mut next = vec![zero; n];
    for s in 1..=last {
        for i in 1..n - 1 {
            next[i] = cur[i] * 2.0 - prev[i] + lap(&cur, i) * (r * c2[i]);
        }
        while next_snap < levels.len() && levels[next_snap] == s {
            let ut = (0..n).map(|i| (next[i] - prev[i]) / (2.0 * dt)).collect();
            out.push((cur.clone(), ut));
            next_snap += 1;
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok((xs, dt, out))
}

/// Reference fields at each of `times` on the nodes covering `window`.
///
/// The times must be multiples of a common spacing (they are all hit exactly).
pub fn fd_snapshots(
    med: &MediumModel,
    d: &InitialData<1>,
    eps: f64,
    times: &[f64],
    window: (f64, f64),
    opts: &FdOptions,
) -> Result<Vec<WaveField<1>>> {
    med.validate(1)?;
    let limit = eps / 20.0;
    if opts.h > limit * (1.0 + 1e-12) {
        return Err(Error::GridTooCoarse { h: opts.h, limit });
    }
    let (xs, dt, snaps) = run(med, d, eps, times, window, opts.h, opts.dt)?;
    let locate = |xs: &[f64]| xs.iter().position(|x| (x - window.0).abs() < 1e-9 * opts.h.max(1.0)).expect("window node");
    let start = locate(&xs);
    let m = ((window.1 - window.0) / opts.h + 1e-9).floor() as usize + 1;
    let grid = Grid::new([window.0], opts.h, [m]);
    let mut fields: Vec<WaveField<1>> = snaps
        .iter()
        .zip(times)
        .map(|((u, ut), &t)| {
            let mut f = WaveField::zeros(grid, t);
            f.u.copy_from_slice(&u[start..start + m]);
            f.ut.copy_from_slice(&ut[start..start + m]);
            f
        })
        .collect();
    if opts.richardson {
        let (xf, _, fine) = run(med, d, eps, times, window, 0.5 * opts.h, 0.5 * dt)?;
        let sf = locate(&xf);
        for (f, (uf, utf)) in fields.iter_mut().zip(&fine) {
            for k in 0..m {
                f.u[k] = (uf[sf + 2 * k] * 4.0 - f.u[k]) / 3.0;
                f.ut[k] = (utf[sf + 2 * k] * 4.0 - f.ut[k]) / 3.0;
            }
        }
    }
    Ok(fields)
}

/// Reference field at `t_end` on the nodes covering `window`.
pub fn fd_reference(
    med: &MediumModel,
    d: &InitialData<1>,
    eps: f64,
    t_end: f64,
    window: (f64, f64),
    opts: &FdOptions,
) -> Result<WaveField<1>> {
    Ok(fd_snapshots(med, d, eps, &[t_end], window, opts)?.remove(0))
}
