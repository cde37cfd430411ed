//! Convergence studies, residual norms and the caustic check.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam::Order;
use crate::error::{Error, Result};
use crate::field::{l2_trapezoid, Grid, WaveField};
use crate::initial_data::InitialData;
use crate::linalg::Vector;
use crate::medium::{Branch, MediumModel};
use crate::phase_space::{advance, bundle_beams, init_bundle, LevelSetBundle, PhaseGrid, DEFAULT_ETA_CELLS};
use crate::synthesis::{
    launch_families, propagate_family, residual_field, superpose, superpose_points, BeamFamily, ResidualDecomposition,
    SuperpositionConfig,
};
use crate::validation::energy::{energy_norm, weighted_l2};
use crate::validation::exact::{dalembert_field, RadialProfile};
use crate::validation::fd::{fd_snapshots, FdOptions};

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// `‖c⁻¹ P[u^ε](t, ·)‖_{L²}` of a superposition.
pub fn residual_norm<const D: usize>(
    med: &MediumModel,
    families: &[BeamFamily<D>],
    cfg: &SuperpositionConfig,
    grid: &Grid<D>,
) -> Result<f64> {
    let r = residual_field(med, families, cfg, grid)?;
    weighted_l2(grid, &r, med)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyMode {
    Lagrangian,
    Eulerian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleChoice {
    /// d'Alembert for constant speed, the finite-difference reference otherwise.
    Auto,
    Fd,
    /// Residual norms only.
    None,
}

/// Closed interval used to judge a fitted slope.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

/// Accepted energy-error slope for dimension `n` and order `k`.
pub fn energy_band(n: usize, order: Order) -> Option<Band> {
    match (n, order) {
        (1, Order::First) => Some(Band { lo: 0.4, hi: 0.65 }),
        (1, Order::Second) => Some(Band { lo: 0.85, hi: 1.2 }),
        (2, Order::First) => Some(Band { lo: 0.15, hi: 0.35 }),
        _ => None,
    }
}

/// Accepted residual-norm slope.
pub fn residual_band(n: usize, order: Order) -> Option<Band> {
    match (n, order) {
        (1, Order::First) => Some(Band { lo: -0.65, hi: -0.35 }),
        (1, Order::Second) => Some(Band { lo: -0.15, hi: f64::INFINITY }),
        _ => None,
    }
}

/// Accepted slope of the initial error.
pub const INITIAL_BAND: Band = Band { lo: 0.4, hi: f64::INFINITY };

/// Relative slack allowed in the energy inequality.
pub const LEMMA_SLACK: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerianOptions {
    /// Phase-grid spacing is `√ε / cells_per_sqrt_eps` in both directions.
    pub cells_per_sqrt_eps: f64,
    pub eta_cells: f64,
}

impl Default for EulerianOptions {
    fn default() -> Self {
        EulerianOptions { cells_per_sqrt_eps: 24.0, eta_cells: DEFAULT_ETA_CELLS }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudySetup {
    pub data: InitialData<1>,
    pub medium: MediumModel,
    pub order: Order,
    pub beta: f64,
    pub t_end: f64,
    /// Number of sampled times in `[0, T]`, both ends included.
    pub n_times: usize,
    pub eps_list: Vec<f64>,
    pub mode: StudyMode,
    pub oracle: OracleChoice,
    pub tol: f64,
    pub r_rho: Option<f64>,
    pub eulerian: EulerianOptions,
}

impl StudySetup {
    pub fn validate(&self) -> Result<()> {
        if self.eps_list.len() < 2 || self.eps_list.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::Config("a study needs at least two positive eps values".into()));
        }
        if !(self.t_end >= 0.0) || self.n_times < 2 {
            return Err(Error::Config("a study needs T >= 0 and at least two sampled times".into()));
        }
        if self.mode == StudyMode::Eulerian && self.order != Order::First {
            return Err(Error::Config("Eulerian beams are first order only".into()));
        }
        self.medium.validate(1)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_times).map(|k| self.t_end * k as f64 / (self.n_times - 1) as f64).collect()
    }

    /// Spatial window holding the support of every field up to `T`.
    pub fn window(&self, eps: f64) -> (f64, f64) {
        let reach = self.medium.c_max() * self.t_end + 8.0 * (eps / self.beta.min(1.0)).sqrt() + 0.05;
        (self.data.support_box.0[0] - reach, self.data.support_box.1[0] + reach)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSample {
    pub t: f64,
    pub error_e: Option<f64>,
    pub residual_l2: f64,
    /// `‖e(0)‖_E + ε∫₀ᵗ ‖c⁻¹P[u^ε]‖ dτ` (trapezoid over sampled times).
    pub lemma_rhs: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub eps: f64,
    pub e0_l2: Option<f64>,
    pub e0_e: Option<f64>,
    pub e_t_e: Option<f64>,
    /// Largest residual norm over the sampled times.
    pub residual_l2: f64,
    pub lemma_lhs: Option<f64>,
    pub lemma_rhs: Option<f64>,
    pub lemma_ok: Option<bool>,
    pub samples: Vec<TimeSample>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slopes {
    pub energy: Option<f64>,
    pub initial_l2: Option<f64>,
    pub initial_energy: Option<f64>,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub n: usize,
    pub k: u8,
    pub t_end: f64,
    pub rows: Vec<StudyRow>,
    pub slopes: Slopes,
    pub energy_band: Option<Band>,
    pub residual_band: Option<Band>,
    pub energy_pass: Option<bool>,
    pub residual_pass: Option<bool>,
    pub initial_pass: Option<bool>,
    pub lemma_holds: Option<bool>,
}

fn lagrangian_families(setup: &StudySetup, cfg: &SuperpositionConfig, times: &[f64]) -> Result<Vec<Vec<BeamFamily<1>>>> {
    let launched = launch_families(&setup.data, &setup.medium, cfg)?;
    let per_branch: Vec<Vec<BeamFamily<1>>> =
        launched.iter().map(|f| propagate_family(&setup.medium, f, times, setup.tol)).collect::<Result<_>>()?;
    Ok((0..times.len()).map(|k| per_branch.iter().map(|b| b[k].clone()).collect()).collect())
}

/// Phase grids for the Eulerian mode, sized from the data and the window.
pub fn eulerian_grids(setup: &StudySetup, eps: f64) -> Result<Vec<PhaseGrid>> {
    let (lo, hi) = setup.data.support_box;
    let mut pmin = f64::MAX;
    let mut pmax = f64::MIN;
    for k in 0..=200 {
        let x = lo[0] + (hi[0] - lo[0]) * k as f64 / 200.0;
        if setup.data.a0(&[x]) != 0.0 {
            let p = setup.data.phase_taylor(&[x]).grad[0];
            pmin = pmin.min(p);
            pmax = pmax.max(p);
        }
    }
    if pmin > pmax || pmin * pmax <= 0.0 {
        return Err(Error::Config("Eulerian mode needs a one-signed phase gradient on the support".into()));
    }
    let (cmin, cmax) = speed_range(&setup.medium, setup.window(eps));
    let stretch = cmax / cmin;
    let (a, b) = if pmin > 0.0 { (pmin / stretch, pmax * stretch) } else { (pmin * stretch, pmax / stretch) };
    let h = eps.sqrt() / setup.eulerian.cells_per_sqrt_eps;
    let pad = 8.0 * h + 0.05 * (b - a);
    let (mut p_lo, mut p_hi) = (a - pad, b + pad);
    let gap = 10.0 * setup.medium.p_min + h;
    if pmin > 0.0 {
        p_lo = p_lo.max(gap);
    } else {
        p_hi = p_hi.min(-gap);
    }
    let (x_lo, x_hi) = setup.window(eps);
    let nx = ((x_hi - x_lo) / h).ceil() as usize + 1;
    let np = ((p_hi - p_lo) / h).ceil() as usize + 1;
    Branch::BOTH
        .iter()
        .map(|&b| PhaseGrid::new((x_lo, x_hi), (p_lo, p_hi), nx, np, b, setup.medium.p_min))
        .collect()
}

fn speed_range(med: &MediumModel, window: (f64, f64)) -> (f64, f64) {
    let mut lo = f64::MAX;
    let mut hi = f64::MIN;
    for k in 0..=1000 {
        let x = window.0 + (window.1 - window.0) * k as f64 / 1000.0;
        if let Ok(c) = med.speed(&[x]) {
            lo = lo.min(c);
            hi = hi.max(c);
        }
    }
    (lo, hi)
}

fn eulerian_families(setup: &StudySetup, eps: f64, times: &[f64]) -> Result<Vec<Vec<BeamFamily<1>>>> {
    let grids = eulerian_grids(setup, eps)?;
    let mut bundles: Vec<LevelSetBundle> =
        grids.into_iter().map(|g| init_bundle(g, &setup.data, &setup.medium)).collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        bundles = bundles
            .iter()
            .map(|b| {
                let dt = 0.5 * b.grid.dx().min(b.grid.dp()) / setup.medium.c_max();
                advance(&setup.medium, b, t, dt)
            })
            .collect::<Result<_>>()?;
        out.push(bundles.iter().map(|b| bundle_beams(b, setup.eulerian.eta_cells)).collect::<Result<_>>()?);
    }
    Ok(out)
}

/// Oracle fields at every sampled time, or `None` when no oracle is requested.
fn oracle_fields(setup: &StudySetup, eps: f64, times: &[f64], grid: &Grid<1>) -> Result<Option<Vec<WaveField<1>>>> {
    let use_fd = match setup.oracle {
        OracleChoice::None => return Ok(None),
        OracleChoice::Fd => true,
        OracleChoice::Auto => !setup.medium.is_constant(),
    };
    if !use_fd {
        let fields = times.iter().map(|&t| dalembert_field(&setup.data, &setup.medium, eps, t, grid)).collect::<Result<_>>()?;
        return Ok(Some(fields));
    }
    let opts = FdOptions { h: grid.h, dt: 0.5 * grid.h / setup.medium.c_max(), richardson: true };
    let window = (grid.lo[0], grid.lo[0] + grid.h * (grid.n[0] - 1) as f64);
    let mut fields = fd_snapshots(&setup.medium, &setup.data, eps, times, window, &opts)?;
    for f in &mut fields {
        if f.grid.n != grid.n {
            return Err(Error::InvariantViolation("reference grid does not match the evaluation grid".into()));
        }
        f.grid = *grid;
    }
    Ok(Some(fields))
}

/// Runs the full pipeline for one `ε`.
pub fn study_row(setup: &StudySetup, eps: f64) -> Result<StudyRow> {
    let diam = setup.data.support_box.1[0] - setup.data.support_box.0[0];
    let mut cfg = SuperpositionConfig::with_default_spacing(eps, setup.beta, setup.order, diam)?;
    cfg.r_rho = setup.r_rho;
    if setup.mode == StudyMode::Eulerian {
        cfg.beta = 1.0;
    }
    let times = setup.times();
    let fams = match setup.mode {
        StudyMode::Lagrangian => lagrangian_families(setup, &cfg, &times)?,
        StudyMode::Eulerian => eulerian_families(setup, eps, &times)?,
    };
    let (wlo, whi) = setup.window(eps);
    let grid = Grid::covering([wlo], [whi], eps / 32.0);
    let oracles = oracle_fields(setup, eps, &times, &grid)?;
    let mut samples: Vec<TimeSample> = Vec::with_capacity(times.len());
    let mut e0_l2 = None;
    for (k, &t) in times.iter().enumerate() {
        let u = superpose(&setup.medium, &fams[k], &cfg, &grid)?;
        let residual = residual_norm(&setup.medium, &fams[k], &cfg, &grid)?;
        let error_e = match &oracles {
            Some(ex) => {
                let e = u.difference(&ex[k])?;
                if k == 0 {
                    e0_l2 = Some(l2_trapezoid(&grid, &e.u));
                }
                Some(energy_norm(&e, &setup.medium, eps)?.value)
            }
            None => None,
        };
        let lemma_rhs = error_e.map(|_| {
            let e0 = samples.first().and_then(|s| s.error_e).or(error_e).unwrap_or(0.0);
            let mut integral = 0.0;
            for j in 1..=k {
                let r0 = samples[j - 1].residual_l2;
                let r1 = if j == k { residual } else { samples[j].residual_l2 };
                integral += 0.5 * (times[j] - times[j - 1]) * (r0 + r1);
            }
            e0 + eps * integral
        });
        samples.push(TimeSample { t, error_e, residual_l2: residual, lemma_rhs });
    }
    let last = samples.last().expect("at least two samples");
    let lemma_ok = samples
        .iter()
        .map(|s| s.error_e.zip(s.lemma_rhs).map(|(l, r)| l <= (1.0 + LEMMA_SLACK) * r))
        .collect::<Option<Vec<bool>>>()
        .map(|v| v.into_iter().all(|b| b));
    Ok(StudyRow {
        eps,
        e0_l2,
        e0_e: samples[0].error_e,
        e_t_e: last.error_e,
        residual_l2: samples.iter().map(|s| s.residual_l2).fold(0.0, f64::max),
        lemma_lhs: last.error_e,
        lemma_rhs: last.lemma_rhs,
        lemma_ok,
        samples,
    })
}

/// Runs every `ε` and fits the rates.
pub fn convergence_study(setup: &StudySetup) -> Result<ConvergenceReport> {
    setup.validate()?;
    let mut rows = Vec::with_capacity(setup.eps_list.len());
    for &eps in &setup.eps_list {
        rows.push(study_row(setup, eps)?);
    }
    Ok(report_from_rows(setup, rows))
}

pub fn report_from_rows(setup: &StudySetup, rows: Vec<StudyRow>) -> ConvergenceReport {
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let col = |f: &dyn Fn(&StudyRow) -> Option<f64>| -> Option<f64> {
        let v: Option<Vec<f64>> = rows.iter().map(f).collect();
        v.map(|v| fit_slope(&eps, &v))
    };
    let slopes = Slopes {
        energy: col(&|r| r.e_t_e),
        initial_l2: col(&|r| r.e0_l2),
        initial_energy: col(&|r| r.e0_e),
        residual: fit_slope(&eps, &rows.iter().map(|r| r.residual_l2).collect::<Vec<_>>()),
    };
    let eb = energy_band(1, setup.order);
    let rb = residual_band(1, setup.order);
    let energy_pass = slopes.energy.zip(eb).map(|(s, b)| b.contains(s));
    let residual_pass = rb.map(|b| b.contains(slopes.residual));
    let initial_pass = slopes
        .initial_l2
        .zip(slopes.initial_energy)
        .map(|(a, b)| INITIAL_BAND.contains(a) && INITIAL_BAND.contains(b));
    let lemma_holds = rows.iter().map(|r| r.lemma_ok).collect::<Option<Vec<bool>>>().map(|v| v.into_iter().all(|b| b));
    ConvergenceReport {
        n: 1,
        k: setup.order.k(),
        t_end: setup.t_end,
        rows,
        slopes,
        energy_band: eb,
        residual_band: rb,
        energy_pass,
        residual_pass,
        initial_pass,
        lemma_holds,
    }
}

/// One row of the caustic comparison at the centre of the radial example.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CausticRow {
    pub eps: f64,
    pub beta: f64,
    pub t: f64,
    pub beams: usize,
    pub u_gb: Complex64,
    pub exact: Complex64,
    /// `ε |u_GB(t, 0) - g'(t)|`.
    pub scaled_error: f64,
}

/// Superposition at `x = 0` of the radial example against `u(t, 0) = g'(t)`.
pub fn caustic_point(d: &InitialData<3>, med: &MediumModel, eps: f64, beta: f64, t: f64, tol: f64) -> Result<CausticRow> {
    if !med.is_constant() || med.speed(&[0.0, 0.0, 0.0])? != 1.0 {
        return Err(Error::Config("the radial example needs c = 1".into()));
    }
    let profile = RadialProfile::from_data(d)?;
    let diam = d.support_box.1[0] - d.support_box.0[0];
    let cfg = SuperpositionConfig::with_default_spacing(eps, beta, Order::First, diam)?;
    let launched = launch_families(d, med, &cfg)?;
    let mut fams = Vec::new();
    for f in &launched {
        fams.extend(propagate_family(med, f, &[t], tol)?);
    }
    let beams = fams.iter().map(|f| f.beams.len()).sum();
    let origin: Vector<f64, 3> = [0.0; 3];
    let u_gb = superpose_points(med, &fams, &cfg, &[origin])?[0].0;
    let exact = profile.caustic_value(eps, t);
    Ok(CausticRow { eps, beta, t, beams, u_gb, exact, scaled_error: eps * (u_gb - exact).norm() })
}

/// Monotone decrease by at least `factor` between consecutive rows (ε halving).
pub fn caustic_decreases(rows: &[CausticRow], factor: f64) -> bool {
    rows.windows(2).all(|w| w[1].scaled_error * factor <= w[0].scaled_error)
}

/// Log-log slopes of the maxima of `|c₋₂|` and `|c₋₁|` over spheres `|y - x| = r`.
pub fn coefficient_slopes<const D: usize>(dec: &ResidualDecomposition<D>, radii: &[f64]) -> Result<(f64, f64)> {
    let dirs = sphere_directions::<D>();
    let rows = radii
        .par_iter()
        .map(|&r| {
            let mut m2 = 0.0_f64;
            let mut m1 = 0.0_f64;
            for u in &dirs {
                let y: Vector<f64, D> = std::array::from_fn(|i| dec.state.x[i] + r * u[i]);
                let [cm2, cm1, _] = dec.coefficients(&y)?;
                m2 = m2.max(cm2.norm());
                m1 = m1.max(cm1.norm());
            }
            Ok((m2, m1))
        })
        .collect::<Result<Vec<_>>>()?;
    let m2: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let m1: Vec<f64> = rows.iter().map(|r| r.1).collect();
    Ok((fit_slope(radii, &m2), fit_slope(radii, &m1)))
}

/// Symmetric unit directions: `±e₁` in 1D, 16 angles in 2D, 26 lattice directions in 3D.
fn sphere_directions<const D: usize>() -> Vec<Vector<f64, D>> {
    match D {
        1 => vec![[1.0; D], [-1.0; D]],
        2 => (0..16)
            .map(|k| {
                let a = std::f64::consts::PI * k as f64 / 8.0;
                std::array::from_fn(|i| if i == 0 { a.cos() } else { a.sin() })
            })
            .collect(),
        _ => {
            let mut out = Vec::new();
            let total = 3usize.pow(D as u32);
            for idx in 0..total {
                let mut k = idx;
                let v: Vector<f64, D> = std::array::from_fn(|_| {
                    let j = k % 3;
                    k /= 3;
                    j as f64 - 1.0
                });
                let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
                if n > 0.0 {
                    out.push(v.map(|c| c / n));
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::{make_initial_state, propagate_to, PhaseTaylor};
    use crate::initial_data::{preset_initial_data, PresetParams};
    use crate::linalg::C;
    use crate::synthesis::residual_coefficients;

    #[test]
    fn slope_of_power_law() {
        let x = [0.1, 0.05, 0.025, 0.0125];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(0.7)).collect();
        assert!((fit_slope(&x, &y) - 0.7).abs() < 1e-12);
    }

    fn small_setup(order: Order) -> StudySetup {
        StudySetup {
            data: preset_initial_data::<1>("chirp1d", &PresetParams::default()).unwrap(),
            medium: MediumModel::constant(1.0),
            order,
            beta: 1.0,
            t_end: 0.5,
            n_times: 3,
            eps_list: vec![1.0 / 25.0, 1.0 / 50.0],
            mode: StudyMode::Lagrangian,
            oracle: OracleChoice::Auto,
            tol: 1e-8,
            r_rho: None,
            eulerian: EulerianOptions::default(),
        }
    }

    #[test]
    fn study_produces_consistent_rows() {
        let setup = small_setup(Order::First);
        let rep = convergence_study(&setup).unwrap();
        assert_eq!(rep.rows.len(), 2);
        for r in &rep.rows {
            assert!(r.e0_e.unwrap() > 0.0 && r.e_t_e.unwrap() > 0.0);
            assert!(r.lemma_ok.unwrap(), "{r:?}");
            assert_eq!(r.samples.len(), 3);
        }
        // Errors decrease with ε.
        assert!(rep.rows[1].e_t_e.unwrap() < rep.rows[0].e_t_e.unwrap());
    }

    #[test]
    fn fd_oracle_agrees_with_dalembert_in_constant_speed() {
        let mut setup = small_setup(Order::First);
        setup.eps_list = vec![1.0 / 25.0];
        let a = study_row(&setup, 1.0 / 25.0).unwrap();
        setup.oracle = OracleChoice::Fd;
        let b = study_row(&setup, 1.0 / 25.0).unwrap();
        let (ea, eb) = (a.e_t_e.unwrap(), b.e_t_e.unwrap());
        assert!((ea - eb).abs() < 1e-3 * ea, "{ea} vs {eb}");
    }

    #[test]
    fn eulerian_mode_tracks_lagrangian_errors() {
        let mut setup = small_setup(Order::First);
        setup.data = preset_initial_data::<1>("plane1d", &PresetParams { half_width: Some(0.5), ..Default::default() }).unwrap();
        setup.eulerian.cells_per_sqrt_eps = 16.0;
        let lag = study_row(&setup, 1.0 / 25.0).unwrap();
        setup.mode = StudyMode::Eulerian;
        let eul = study_row(&setup, 1.0 / 25.0).unwrap();
        let (a, b) = (lag.e_t_e.unwrap(), eul.e_t_e.unwrap());
        assert!((a - b).abs() < 0.1 * a, "{a} vs {b}");
    }

    #[test]
    fn coefficient_orders_first_and_second() {
        let med = MediumModel::bump(0.2, 0.6, vec![0.1, 0.2]);
        for (order, k) in [(Order::First, 1.0), (Order::Second, 2.0)] {
            let cfg = SuperpositionConfig::new(0.05, 1.0, order, 0.05).unwrap();
            let ph = PhaseTaylor { s: 0.0, grad: [0.8, 0.6], hess: [[0.3, 0.1], [0.1, -0.2]], third: [[[0.1; 2]; 2]; 2] };
            let s0 = make_initial_state(&ph, C::new(1.0, 0.2), [C::new(0.3, 0.0), C::new(-0.1, 0.1)], [-0.2, 0.0], order, 1.0, Branch::Plus, 1e-8)
                .unwrap();
            let s = propagate_to(&med, &s0, 0.4, 1e-10).unwrap();
            let dec = residual_coefficients(&med, &s, &cfg).unwrap();
            let radii: Vec<f64> = (0..5).map(|j| 0.02 * 0.5_f64.powi(j)).collect();
            let (s2, s1) = coefficient_slopes(&dec, &radii).unwrap();
            assert!(s2 >= k + 2.0 - 0.1 && s1 >= k - 0.1, "{order:?}: {s2} {s1}");
        }
    }

    #[test]
    fn caustic_value_is_close_at_moderate_eps() {
        let d = preset_initial_data::<3>("radial3d", &PresetParams::default()).unwrap();
        let med = MediumModel::constant(1.0);
        let row = caustic_point(&d, &med, 1.0 / 25.0, 8.0, 0.5, 1e-8).unwrap();
        assert!(row.beams > 0);
        assert!(row.scaled_error < 0.5 * (row.exact.norm() * row.eps), "{row:?}");
    }
}
