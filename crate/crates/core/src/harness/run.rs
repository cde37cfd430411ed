//! Command dispatch and artifact writing.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::Grid;
use crate::harness::config::{Command, RunConfig};
use crate::harness::output::{axis_columns, columns, num, opt, OutDir};
use crate::initial_data::{preset_initial_data, InitialData};
use crate::linalg::{min_eig_im, Vector};
use crate::phase_space::{advance, eulerian_superpose, init_bundle, LevelSetBundle, PhaseGrid};
use crate::synthesis::{launch_families, propagate_family, superpose, SuperpositionConfig};
use crate::validation::study::{
    caustic_decreases, caustic_point, convergence_study, eulerian_grids, EulerianOptions, StudySetup,
};

/// Echo of a finished run, written as `manifest.json`.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub command: &'static str,
    pub version: &'static str,
    pub config: RunConfig,
    pub threads: usize,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
}

/// Runs one command with a resolved configuration.
pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Manifest> {
    let start = Instant::now();
    cfg.validate(cmd)?;
    let mut out = OutDir::create(Path::new(&cfg.out))?;
    let dim = cfg.dimension()?;
    match (cmd, dim) {
        (Command::Propagate, 1) => propagate_cmd::<1>(cfg, &mut out)?,
        (Command::Propagate, 2) => propagate_cmd::<2>(cfg, &mut out)?,
        (Command::Propagate, 3) => propagate_cmd::<3>(cfg, &mut out)?,
        (Command::Superpose, 1) => superpose_cmd::<1>(cfg, &mut out)?,
        (Command::Superpose, 2) => superpose_cmd::<2>(cfg, &mut out)?,
        (Command::Superpose, 3) => superpose_cmd::<3>(cfg, &mut out)?,
        (Command::Eulerian, _) => eulerian_cmd(cfg, &mut out)?,
        (Command::Convergence, _) => convergence_cmd(cfg, &mut out)?,
        (Command::SphericalExample, _) => spherical_cmd(cfg, &mut out)?,
        (_, n) => return Err(Error::Config(format!("unsupported dimension n = {n}"))),
    }
    let mut manifest = Manifest {
        command: cmd.name(),
        version: env!("CARGO_PKG_VERSION"),
        config: cfg.clone(),
        threads: rayon::current_num_threads(),
        wall_time_s: 0.0,
        outputs: out.files().to_vec(),
    };
    manifest.outputs.push("manifest.json".into());
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    out.write_json("manifest.json", &manifest)?;
    Ok(manifest)
}

fn eps_of(cfg: &RunConfig) -> Result<f64> {
    cfg.eps.ok_or_else(|| Error::Config("eps is required".into()))
}

fn times_of(cfg: &RunConfig) -> Vec<f64> {
    cfg.times.clone().unwrap_or_else(|| vec![cfg.t_end.unwrap_or(0.0)])
}

fn superposition_config<const D: usize>(cfg: &RunConfig, d: &InitialData<D>, eps: f64) -> Result<SuperpositionConfig> {
    let diam = (0..D).map(|i| d.support_box.1[i] - d.support_box.0[i]).fold(0.0, f64::max);
    let mut s = SuperpositionConfig::with_default_spacing(eps, cfg.beta.unwrap_or(1.0), cfg.order()?, diam)?;
    s.r_rho = cfg.r_rho;
    Ok(s)
}

/// Explicit grid, or in 1D the window reached by the support up to the last time.
fn spatial_grid<const D: usize>(cfg: &RunConfig, d: &InitialData<D>, eps: f64) -> Result<Grid<D>> {
    if let Some(g) = &cfg.grid {
        let lo: Vector<f64, D> = std::array::from_fn(|i| g.lo[i]);
        let hi: Vector<f64, D> = std::array::from_fn(|i| g.hi[i]);
        return Ok(Grid::covering(lo, hi, g.h));
    }
    if D != 1 {
        return Err(Error::Config("an explicit `grid` is required for n >= 2".into()));
    }
    let t_max = times_of(cfg).into_iter().fold(0.0, |a: f64, t| a.max(t.abs()));
    let beta = cfg.beta.unwrap_or(1.0);
    let reach = cfg.medium.c_max() * t_max + 8.0 * (eps / beta.min(1.0)).sqrt() + 0.05;
    let lo = std::array::from_fn(|i| d.support_box.0[i] - reach);
    let hi = std::array::from_fn(|i| d.support_box.1[i] + reach);
    Ok(Grid::covering(lo, hi, eps / 32.0))
}

fn propagate_cmd<const D: usize>(cfg: &RunConfig, out: &mut OutDir) -> Result<()> {
    let d = preset_initial_data::<D>(cfg.preset_name(), &cfg.preset_params)?;
    let eps = eps_of(cfg)?;
    let scfg = superposition_config(cfg, &d, eps)?;
    let times = times_of(cfg);
    let mut rows = Vec::new();
    for fam in launch_families(&d, &cfg.medium, &scfg)? {
        let h0: Vec<f64> = fam.beams.iter().map(|(s, _)| s.hamiltonian(&cfg.medium)).collect::<Result<_>>()?;
        for snap in propagate_family(&cfg.medium, &fam, &times, cfg.tol)? {
            for (j, (s, w)) in snap.beams.iter().enumerate() {
                let mut r = vec![fam.branch.label().to_string(), j.to_string(), num(*w), num(s.t)];
                r.extend(s.x0.iter().map(|v| num(*v)));
                r.extend(s.x.iter().map(|v| num(*v)));
                r.extend(s.p.iter().map(|v| num(*v)));
                r.push(num(s.s));
                r.extend(s.m.iter().flatten().map(|z| num(z.re)));
                r.extend(s.m.iter().flatten().map(|z| num(z.im)));
                r.push(num(s.a.re));
                r.push(num(s.a.im));
                r.push(num(s.hamiltonian(&cfg.medium)? - h0[j]));
                r.push(num(min_eig_im(&s.m)));
                rows.push(r);
            }
        }
    }
    let mut header = columns(&["branch", "index", "weight", "t"]);
    header.extend(axis_columns("x0", D));
    header.extend(axis_columns("x", D));
    header.extend(axis_columns("p", D));
    header.push("s".into());
    let pairs: Vec<String> = (1..=D).flat_map(|i| (1..=D).map(move |j| format!("{i}{j}"))).collect();
    header.extend(pairs.iter().map(|ij| format!("m_re_{ij}")));
    header.extend(pairs.iter().map(|ij| format!("m_im_{ij}")));
    header.extend(columns(&["a_re", "a_im", "hamiltonian_drift", "min_eig_im_m"]));
    out.write_csv("beams.csv", &header, rows)
}

fn field_header(dim: usize) -> Vec<String> {
    let mut h = columns(&["t"]);
    h.extend(axis_columns("x", dim));
    h.extend(columns(&["u_re", "u_im", "ut_re", "ut_im"]));
    h
}

fn superpose_cmd<const D: usize>(cfg: &RunConfig, out: &mut OutDir) -> Result<()> {
    let d = preset_initial_data::<D>(cfg.preset_name(), &cfg.preset_params)?;
    let eps = eps_of(cfg)?;
    let scfg = superposition_config(cfg, &d, eps)?;
    let grid = spatial_grid(cfg, &d, eps)?;
    let times = times_of(cfg);
    let per_branch = launch_families(&d, &cfg.medium, &scfg)?
        .iter()
        .map(|f| propagate_family(&cfg.medium, f, &times, cfg.tol))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        let fams: Vec<_> = per_branch.iter().map(|b| b[k].clone()).collect();
        let f = superpose(&cfg.medium, &fams, &scfg, &grid)?;
        for i in 0..grid.len() {
            let mut r = vec![num(t)];
            r.extend(grid.point(i).iter().map(|v| num(*v)));
            r.extend([num(f.u[i].re), num(f.u[i].im), num(f.ut[i].re), num(f.ut[i].im)]);
            rows.push(r);
        }
    }
    out.write_csv("field.csv", &field_header(D), rows)
}

fn study_setup(cfg: &RunConfig) -> Result<StudySetup> {
    Ok(StudySetup {
        data: preset_initial_data::<1>(cfg.preset_name(), &cfg.preset_params)?,
        medium: cfg.medium.clone(),
        order: cfg.order()?,
        beta: cfg.beta.unwrap_or(1.0),
        t_end: cfg.t_end.unwrap_or(0.0),
        n_times: cfg.n_times,
        eps_list: cfg.eps_list.clone().or_else(|| cfg.eps.map(|e| vec![e])).unwrap_or_default(),
        mode: cfg.mode,
        oracle: cfg.oracle,
        tol: cfg.tol,
        r_rho: cfg.r_rho,
        eulerian: EulerianOptions { cells_per_sqrt_eps: cfg.cells_per_sqrt_eps, eta_cells: cfg.eta_cells },
    })
}

fn eulerian_cmd(cfg: &RunConfig, out: &mut OutDir) -> Result<()> {
    let setup = study_setup(cfg)?;
    let eps = eps_of(cfg)?;
    let med = &cfg.medium;
    let mut scfg = superposition_config(cfg, &setup.data, eps)?;
    scfg.beta = 1.0;
    let grids = match &cfg.phase_grid {
        Some(g) => crate::medium::Branch::BOTH
            .iter()
            .map(|&b| PhaseGrid::new((g.x[0], g.x[1]), (g.p[0], g.p[1]), g.nx, g.np, b, med.p_min))
            .collect::<Result<Vec<_>>>()?,
        None => eulerian_grids(&setup, eps)?,
    };
    let mut cfg_grid = cfg.clone();
    cfg_grid.beta = Some(1.0);
    let grid = spatial_grid(&cfg_grid, &setup.data, eps)?;
    let mut bundles: Vec<LevelSetBundle> = grids.into_iter().map(|g| init_bundle(g, &setup.data, med)).collect::<Result<_>>()?;
    let mut field_rows = Vec::new();
    let mut level_rows = Vec::new();
    for t in times_of(cfg) {
        bundles = bundles
            .iter()
            .map(|b| advance(med, b, t, 0.5 * b.grid.dx().min(b.grid.dp()) / med.c_max()))
            .collect::<Result<_>>()?;
        let f = eulerian_superpose(med, &bundles, &scfg, &grid, cfg.eta_cells)?;
        for i in 0..grid.len() {
            field_rows.push(vec![
                num(t),
                num(grid.point(i)[0]),
                num(f.u[i].re),
                num(f.u[i].im),
                num(f.ut[i].re),
                num(f.ut[i].im),
            ]);
        }
        for b in &bundles {
            for row in b.dump_rows()? {
                let mut r = vec![num(t), b.grid.branch.label().to_string()];
                r.extend(row.iter().map(|v| num(*v)));
                level_rows.push(r);
            }
        }
    }
    out.write_csv("eulerian_field.csv", &field_header(1), field_rows)?;
    let header = columns(&["t", "branch", "x", "p", "phi1", "w", "s", "a_re", "a_im", "m_re", "m_im"]);
    out.write_csv("level_set.csv", &header, level_rows)
}

fn convergence_cmd(cfg: &RunConfig, out: &mut OutDir) -> Result<()> {
    let setup = study_setup(cfg)?;
    let rep = convergence_study(&setup)?;
    let header = columns(&["eps", "e0_E", "eT_E", "residual_L2", "lemma31_lhs", "lemma31_rhs", "e0_L2", "lemma31_ok"]);
    let rows = rep.rows.iter().map(|r| {
        vec![
            num(r.eps),
            opt(r.e0_e),
            opt(r.e_t_e),
            num(r.residual_l2),
            opt(r.lemma_lhs),
            opt(r.lemma_rhs),
            opt(r.e0_l2),
            r.lemma_ok.map(|b| b.to_string()).unwrap_or_default(),
        ]
    });
    out.write_csv("conv_report.csv", &header, rows)?;
    let sample_rows = rep.rows.iter().flat_map(|r| {
        r.samples.iter().map(move |s| vec![num(r.eps), num(s.t), opt(s.error_e), num(s.residual_l2), opt(s.lemma_rhs)])
    });
    out.write_csv("conv_samples.csv", &columns(&["eps", "t", "error_E", "residual_L2", "lemma31_rhs"]), sample_rows)?;
    out.write_json("summary.json", &rep)
}

#[derive(Serialize)]
struct CausticSummary {
    t: f64,
    beta: f64,
    rows: usize,
    decreases_by_factor_two: bool,
}

fn spherical_cmd(cfg: &RunConfig, out: &mut OutDir) -> Result<()> {
    let d = preset_initial_data::<3>(cfg.preset_name(), &cfg.preset_params)?;
    let t = cfg.t_end.unwrap_or(0.5);
    let beta = cfg.beta.unwrap_or(8.0);
    let eps_list = cfg.eps_list.clone().or_else(|| cfg.eps.map(|e| vec![e])).unwrap_or_default();
    let rows = eps_list.iter().map(|&e| caustic_point(&d, &cfg.medium, e, beta, t, cfg.tol)).collect::<Result<Vec<_>>>()?;
    let header = columns(&["eps", "beta", "t", "beams", "u_gb_re", "u_gb_im", "exact_re", "exact_im", "scaled_error"]);
    let csv_rows = rows.iter().map(|r| {
        vec![
            num(r.eps),
            num(r.beta),
            num(r.t),
            r.beams.to_string(),
            num(r.u_gb.re),
            num(r.u_gb.im),
            num(r.exact.re),
            num(r.exact.im),
            num(r.scaled_error),
        ]
    });
    out.write_csv("caustic_table.csv", &header, csv_rows)?;
    let summary = CausticSummary { t, beta, rows: rows.len(), decreases_by_factor_two: caustic_decreases(&rows, 2.0) };
    out.write_json("summary.json", &summary)
}
