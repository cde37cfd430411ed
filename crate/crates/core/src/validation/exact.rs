//! Closed-form reference solutions for constant speed.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scalar::Real;
use crate::error::{Error, Result};
use crate::field::{Grid, WaveField};
use crate::initial_data::{bump, AmplitudeProfile, InitialData, VelocityData};
use crate::medium::MediumModel;
use crate::scalar::Jet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExactKind {
    Dalembert1d,
    Spherical3d,
    FdReference,
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK_WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gk15(f: &impl Fn(f64) -> Complex64, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * GK_WK[7];
    let mut g = fc * GK_WG[3];
    for j in 0..7 {
        let s = f(c - h * GK_NODES[j]) + f(c + h * GK_NODES[j]);
        k += s * GK_WK[j];
        if j % 2 == 1 {
            g += s * GK_WG[j / 2];
        }
    }
    (k * h, ((k - g) * h).norm())
}

/// Adaptive Gauss–Kronrod (7, 15) quadrature of a complex integrand.
pub fn integrate(f: impl Fn(f64) -> Complex64, a: f64, b: f64, tol: f64) -> Complex64 {
    fn rec(f: &impl Fn(f64) -> Complex64, a: f64, b: f64, tol: f64, depth: u32) -> Complex64 {
        let (v, err) = gk15(f, a, b);
        if err <= tol.max(1e-15 * v.norm()) || depth == 0 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth - 1) + rec(f, m, b, 0.5 * tol, depth - 1)
    }
    if a == b {
        return Complex64::new(0.0, 0.0);
    }
    rec(&f, a, b, tol, 40)
}

fn constant_speed(med: &MediumModel) -> Result<f64> {
    if !med.is_constant() {
        return Err(Error::Config("the closed-form oracle needs a constant speed".into()));
    }
    med.speed(&[0.0])
}

/// `(u₀, u₀')` of the initial data at `x`.
fn initial_u_with_slope(d: &InitialData<1>, med: &MediumModel, eps: f64, x: f64) -> Result<(Complex64, Complex64, Complex64)> {
    let (u, v) = d.initial_field(med, eps, &[Jet::variable(x)])?;
    Ok((Complex64::new(u.re.v, u.im.v), Complex64::new(u.re.d1, u.im.d1), Complex64::new(v.re.v, v.im.v)))
}

/// d'Alembert's formula for constant speed in 1D.
///
/// `u = ½[u₀(x+ct) + u₀(x-ct)] + (1/2c)∫ v₀`, with the integral by adaptive
/// quadrature to `1e-10` when `v₀ ≠ 0`.
pub fn exact_dalembert(d: &InitialData<1>, med: &MediumModel, eps: f64, t: f64, x: f64) -> Result<(Complex64, Complex64)> {
    let c = constant_speed(med)?;
    let (xp, xm) = (x + c * t, x - c * t);
    let (up, dup, vp) = initial_u_with_slope(d, med, eps, xp)?;
    let (um, dum, vm) = initial_u_with_slope(d, med, eps, xm)?;
    let mut u = (up + um) * 0.5;
    let ut = (dup - dum) * (0.5 * c) + (vp + vm) * 0.5;
    if d.velocity != VelocityData::Zero && t != 0.0 {
        let (lo, hi) = (d.support_box.0[0], d.support_box.1[0]);
        let (a, b) = (xm.min(xp).max(lo), xm.max(xp).min(hi));
        if a < b {
            let v0 = |s: f64| d.initial_field(med, eps, &[s]).map(|(_, v)| v).unwrap_or_default();
            u += integrate(v0, a, b, 1e-10) * (t.signum() / (2.0 * c));
        }
    }
    Ok((u, ut))
}

/// d'Alembert solution sampled on a grid.
pub fn dalembert_field(d: &InitialData<1>, med: &MediumModel, eps: f64, t: f64, grid: &Grid<1>) -> Result<WaveField<1>> {
    let vals = (0..grid.len())
        .into_par_iter()
        .map(|i| exact_dalembert(d, med, eps, t, grid.point(i)[0]))
        .collect::<Result<Vec<_>>>()?;
    let mut f = WaveField::zeros(*grid, t);
    for (i, (u, ut)) in vals.into_iter().enumerate() {
        f.u[i] = u;
        f.ut[i] = ut;
    }
    Ok(f)
}

/// Radial profile `f(s) = χ((s - r0)/half_width)` of the spherical example.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub r0: f64,
    pub half_width: f64,
}

impl RadialProfile {
    pub fn from_data(d: &InitialData<3>) -> Result<Self> {
        match d.amplitude {
            AmplitudeProfile::ShellOverR { r0, half_width } => Ok(RadialProfile { r0, half_width }),
            _ => Err(Error::Config("the spherical oracle needs an f(|x|)/|x| amplitude".into())),
        }
    }

    fn f(&self, s: Jet<f64>) -> Jet<f64> {
        bump((s - Jet::constant(self.r0)) / Jet::constant(self.half_width))
    }

    /// `g(s) = f(s)e^{is/ε}` for `s ≥ 0`, oddly extended by `g(-s) = -f(s)e^{is/ε}`,
    /// with first and second derivatives.
    fn g(&self, eps: f64, s: f64) -> [Complex64; 3] {
        let (sign, r) = if s >= 0.0 { (1.0, s) } else { (-1.0, -s) };
        let rj = Jet::variable(r);
        let f = self.f(rj);
        let ph = rj / Jet::constant(eps);
        let (re, im) = (f * ph.cos(), f * ph.sin());
        // d/ds = sign · d/dr, d²/ds² = d²/dr².
        [
            Complex64::new(re.v, im.v) * sign,
            Complex64::new(re.d1, im.d1),
            Complex64::new(re.d2, im.d2) * sign,
        ]
    }

    /// `u(t, 0) = g'(t)`.
    pub fn caustic_value(&self, eps: f64, t: f64) -> Complex64 {
        self.g(eps, t)[1]
    }
}

/// Exact solution `u = (g(t+r) - g(t-r)) / (2r)` of the radial example, with
/// the limit `g'(t)` near the centre.
pub fn exact_spherical(f: &RadialProfile, eps: f64, t: f64, x: &[f64; 3]) -> (Complex64, Complex64) {
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    if r < 1e-5 * eps {
        let g = f.g(eps, t);
        return (g[1], g[2]);
    }
    let gp = f.g(eps, t + r);
    let gm = f.g(eps, t - r);
    ((gp[0] - gm[0]) / (2.0 * r), (gp[1] - gm[1]) / (2.0 * r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial_data::{preset_initial_data, PresetParams};
    use crate::medium::Branch;

    #[test]
    fn quadrature_of_oscillatory_integrand() {
        let eps = 0.01;
        let v = integrate(|s| Complex64::new(0.0, s / eps).exp(), 0.0, 1.0, 1e-12);
        let expect = (Complex64::new(0.0, 1.0 / eps).exp() - 1.0) / Complex64::new(0.0, 1.0 / eps);
        assert!((v - expect).norm() < 1e-11);
    }

    #[test]
    fn dalembert_reproduces_initial_data() {
        let med = MediumModel::constant(1.0);
        let d = preset_initial_data::<1>("chirp1d", &PresetParams::default()).unwrap();
        for x in [-1.2, -0.7, 0.3, 1.0] {
            let (u, ut) = exact_dalembert(&d, &med, 0.02, 0.0, x).unwrap();
            let (u0, v0) = d.initial_field(&med, 0.02, &[x]).unwrap();
            assert!((u - u0).norm() < 1e-14);
            assert!((ut - v0).norm() < 1e-12);
        }
    }

    #[test]
    fn even_data_form() {
        let med = MediumModel::constant(1.0);
        let eps = 0.02;
        let d = preset_initial_data::<1>("chirp1d", &PresetParams::default()).unwrap();
        let (t, x) = (0.4, 0.9);
        let (u, _) = exact_dalembert(&d, &med, eps, t, x).unwrap();
        let a = d.initial_field(&med, eps, &[x + t]).unwrap().0;
        let b = d.initial_field(&med, eps, &[x - t]).unwrap().0;
        assert!((u - (a + b) * 0.5).norm() < 1e-13);
    }

    fn check_wave_equation(d: &InitialData<1>, eps: f64) {
        let med = MediumModel::constant(1.0);
        let h = 1e-3;
        let u = |t: f64, x: f64| exact_dalembert(d, &med, eps, t, x).unwrap().0;
        for (t, x) in [(0.3, 0.2), (0.5, -0.9), (0.8, 1.1)] {
            let utt = (u(t + h, x) - u(t, x) * 2.0 + u(t - h, x)) / (h * h);
            let uxx = (u(t, x + h) - u(t, x) * 2.0 + u(t, x - h)) / (h * h);
            // Truncation ~ h²/12 · 2/ε⁴ relative to the size of u_tt.
            let scale = utt.norm().max(1.0);
            assert!((utt - uxx).norm() < 1e-3 * scale, "{utt} vs {uxx}");
        }
    }

    #[test]
    fn dalembert_solves_wave_equation() {
        let eps = 0.1;
        check_wave_equation(&preset_initial_data::<1>("chirp1d", &PresetParams::default()).unwrap(), eps);
        let one = PresetParams { velocity: Some(VelocityData::OneBranch(Branch::Plus)), ..Default::default() };
        check_wave_equation(&preset_initial_data::<1>("plane1d", &one).unwrap(), eps);
    }

    #[test]
    fn one_branch_data_travels_one_way() {
        // B = -i c|S'|A with S = x excites the right-moving wave up to O(ε): u(t,x) ≈ u₀(x - t).
        let med = MediumModel::constant(1.0);
        let eps = 0.01;
        let one = PresetParams { velocity: Some(VelocityData::OneBranch(Branch::Plus)), ..Default::default() };
        let d = preset_initial_data::<1>("plane1d", &one).unwrap();
        for x in [-0.3, 0.4, 0.9] {
            let (u, _) = exact_dalembert(&d, &med, eps, 0.5, x).unwrap();
            let u0 = d.initial_field(&med, eps, &[x - 0.5]).unwrap().0;
            assert!((u - u0).norm() < 3.0 * eps, "{u} vs {u0}");
            // The velocity integral against a fine midpoint sum.
            let (a, b) = (x - 0.5, x + 0.5);
            let n = 200_000;
            let h = (b - a) / n as f64;
            let mut s = Complex64::new(0.0, 0.0);
            for k in 0..n {
                s += d.initial_field(&med, eps, &[a + (k as f64 + 0.5) * h]).unwrap().1 * h;
            }
            let even = (d.initial_field(&med, eps, &[b]).unwrap().0 + u0) * 0.5;
            assert!((u - even - s * 0.5).norm() < 1e-8);
        }
    }

    #[test]
    fn spherical_initial_data_and_limit() {
        let d = preset_initial_data::<3>("radial3d", &PresetParams::default()).unwrap();
        let f = RadialProfile::from_data(&d).unwrap();
        let eps = 0.02;
        let med = MediumModel::constant(1.0);
        for x in [[0.3, 0.2, 0.1], [0.0, 0.5, 0.1]] {
            let (u, ut) = exact_spherical(&f, eps, 0.0, &x);
            let (u0, _) = d.initial_field(&med, eps, &x).unwrap();
            assert!((u - u0).norm() < 1e-12 * (1.0 + u0.norm()));
            assert!(ut.norm() < 1e-9);
        }
        let t = 0.45;
        let lim = f.caustic_value(eps, t);
        let (near, _) = exact_spherical(&f, eps, t, &[1e-8, 0.0, 0.0]);
        assert!((near - lim).norm() < 1e-6 * lim.norm());
        let (mid, _) = exact_spherical(&f, eps, t, &[0.0, 0.0, 1e-3]);
        assert!((mid - lim).norm() < 1e-2 * lim.norm());
        // |u(t, 0)| ≈ f(t)/ε.
        let ft = bump((t - 0.5) / 0.2);
        assert!((lim.norm() * eps / ft - 1.0).abs() < 0.1);
    }

    #[test]
    fn spherical_solves_wave_equation() {
        let d = preset_initial_data::<3>("radial3d", &PresetParams::default()).unwrap();
        let f = RadialProfile::from_data(&d).unwrap();
        let eps = 0.1;
        let h = 1e-3;
        let u = |t: f64, x: [f64; 3]| exact_spherical(&f, eps, t, &x).0;
        for (t, x) in [(0.2, [0.3, 0.2, 0.1]), (0.4, [0.1, -0.2, 0.25])] {
            let utt = (u(t + h, x) - u(t, x) * 2.0 + u(t - h, x)) / (h * h);
            let mut lap = Complex64::new(0.0, 0.0);
            for a in 0..3 {
                let (mut xp, mut xm) = (x, x);
                xp[a] += h;
                xm[a] -= h;
                lap += (u(t, xp) - u(t, x) * 2.0 + u(t, xm)) / (h * h);
            }
            assert!((utt - lap).norm() < 1e-3 * utt.norm().max(1.0), "{utt} vs {lap}");
        }
    }
}
