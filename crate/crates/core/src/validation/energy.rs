use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{diff4, l2_trapezoid, trapezoid_weight, Grid, WaveField};
use crate::medium::MediumModel;

/// `‖e‖_E = sqrt(2E)` with `E = (ε²/2)∫ c⁻²|e_t|² + |∇e|² dx`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyNorm {
    pub value: f64,
    pub eps: f64,
}

/// Energy norm of a sampled field; gradients by fourth-order differences,
/// integral by the trapezoid rule.
pub fn energy_norm<const D: usize>(e: &WaveField<D>, med: &MediumModel, eps: f64) -> Result<EnergyNorm> {
    let g = &e.grid;
    g.check_resolution(eps)?;
    let grads: Vec<Vec<Complex64>> = (0..D).map(|a| diff4(g, &e.u, a)).collect();
    let mut sum = 0.0;
    for idx in 0..g.len() {
        let c = med.speed(&g.point(idx))?;
        let mut dens = e.ut[idx].norm_sqr() / (c * c);
        for ga in &grads {
            dens += ga[idx].norm_sqr();
        }
        sum += trapezoid_weight(g, idx) * dens;
    }
    let value = eps * (sum * g.cell_volume()).sqrt();
    if !value.is_finite() {
        return Err(Error::InvariantViolation("energy norm is not finite".into()));
    }
    Ok(EnergyNorm { value, eps })
}

/// `‖c⁻¹ r‖_{L²}` for samples `r` on `grid`.
pub fn weighted_l2<const D: usize>(grid: &Grid<D>, r: &[Complex64], med: &MediumModel) -> Result<f64> {
    let scaled = r
        .iter()
        .enumerate()
        .map(|(i, z)| Ok(z / med.speed(&grid.point(i))?))
        .collect::<Result<Vec<_>>>()?;
    Ok(l2_trapezoid(grid, &scaled))
}
