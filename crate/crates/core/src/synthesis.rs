//! Gaussian beam evaluation, initial matching and Lagrangian superposition.

use num_complex::{Complex, Complex64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam::{lift_constant, lift_time, propagate, rates, second_rate, BeamState, Order};
use crate::error::{Error, Result};
use crate::field::{Grid, WaveField};
use crate::initial_data::{split_amplitude_gradients, split_initial_amplitudes, InitialData};
use crate::linalg::{ccubic, cquad, min_eig_im, Vector, C};
use crate::medium::{Branch, MediumModel};
use crate::scalar::{cexp, Jet, Real};

/// Beams are skipped where `Im Φ / ε` exceeds this value (`|e^{iΦ/ε}| < e⁻⁵⁰`).
pub const TAIL_CLAMP: f64 = 50.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperpositionConfig {
    pub eps: f64,
    pub beta: f64,
    pub order: Order,
    /// Quadrature spacing over the initial manifold.
    pub h0: f64,
    /// Cutoff radius for second order beams; chosen per beam when absent.
    pub r_rho: Option<f64>,
}

impl SuperpositionConfig {
    pub fn new(eps: f64, beta: f64, order: Order, h0: f64) -> Result<Self> {
        let cfg = SuperpositionConfig { eps, beta, order, h0, r_rho: None };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Uses the default spacing `h₀ = min(√(ε/max(β,1)), diam/16)`.
    pub fn with_default_spacing(eps: f64, beta: f64, order: Order, diam: f64) -> Result<Self> {
        Self::new(eps, beta, order, default_h0(eps, beta, diam))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::Config(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::Config(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.h0 > 0.0) || self.h0 > self.eps.sqrt() * (1.0 + 1e-12) {
            return Err(Error::Config(format!("h0 = {} must lie in (0, sqrt(eps)]", self.h0)));
        }
        if let Some(r) = self.r_rho {
            if !(r > 0.0) {
                return Err(Error::Config("r_rho must be positive".into()));
            }
        }
        Ok(())
    }

    /// `Z(n, ε) = (β / (2πε))^{n/2}`.
    pub fn z(&self, n: usize) -> f64 {
        (self.beta / (2.0 * std::f64::consts::PI * self.eps)).powf(n as f64 / 2.0)
    }
}

pub fn default_h0(eps: f64, beta: f64, diam: f64) -> f64 {
    (eps / beta.max(1.0)).sqrt().min(diam / 16.0)
}

/// `Φ(y) = S + p·d + ½ dᵀ M d (+ ⅙ T[d,d,d])` with `d = y - x`.
pub fn taylor_phase<T: Real, const D: usize>(s: &BeamState<T, D>, y: &Vector<T, D>) -> C<T> {
    let d: Vector<T, D> = std::array::from_fn(|i| y[i] - s.x[i]);
    let mut lin = s.s;
    for i in 0..D {
        lin += s.p[i] * d[i];
    }
    let mut phi = Complex::new(lin, T::zero()) + cquad(&s.m, &d) * T::lit(0.5);
    if let Some(h) = &s.higher {
        phi += ccubic(&h.phi3, &d) * T::lit(1.0 / 6.0);
    }
    phi
}

/// `A` for first order beams, `A + g·d` for second order beams.
pub fn taylor_amplitude<T: Real, const D: usize>(s: &BeamState<T, D>, y: &Vector<T, D>) -> C<T> {
    let mut a = s.a;
    if let Some(h) = &s.higher {
        for i in 0..D {
            a += h.grad_a[i] * (y[i] - s.x[i]);
        }
    }
    a
}

fn smooth_step<T: Real>(s: T) -> T {
    let f = |v: T| if v > T::zero() { (-T::one() / v).exp() } else { T::zero() };
    let a = f(s);
    let b = f(T::one() - s);
    a / (a + b)
}

/// Smooth cutoff `ρ` in terms of `|d|²`: one for `|d| ≤ r/2`, zero for `|d| ≥ r`.
pub fn cutoff<T: Real>(d2: T, r: f64) -> T {
    let half = 0.5 * r;
    if d2 <= T::lit(half * half) {
        return T::one();
    }
    if d2 >= T::lit(r * r) {
        return T::zero();
    }
    T::one() - smooth_step((d2.sqrt() - T::lit(half)) / T::lit(half))
}

fn unit_directions<const D: usize>() -> Vec<Vector<f64, D>> {
    let m: usize = match D {
        1 => 3,
        2 => 41,
        _ => 9,
    };
    let total = m.pow(D as u32);
    let mut out = Vec::new();
    for idx in 0..total {
        let mut k = idx;
        let v: Vector<f64, D> = std::array::from_fn(|_| {
            let j = k % m;
            k /= m;
            -1.0 + 2.0 * j as f64 / (m - 1) as f64
        });
        let n = crate::linalg::norm(&v);
        if n > 1e-12 {
            out.push(v.map(|c| c / n));
        }
    }
    out
}

/// Radius beyond which `Im Φ / ε > 50` for the quadratic phase.
pub fn tail_radius<const D: usize>(s: &BeamState<f64, D>, eps: f64) -> Result<f64> {
    let lam = min_eig_im(&s.m);
    if !(lam > 0.0) {
        return Err(Error::LostPositivity { min_eig: lam, t: s.t });
    }
    Ok((2.0 * TAIL_CLAMP * eps / lam).sqrt())
}

/// Cutoff radius for a second order beam.
///
/// Starts from the configured radius (default twice the tail radius) and
/// shrinks it until `Im Φ ≥ ¼ λ_min(Im M)|d|²` holds on the support of `ρ`.
/// At `t = 0` this is the condition `Im Φ ≥ (β/4)|d|²`.
pub fn cutoff_radius<const D: usize>(s: &BeamState<f64, D>, cfg: &SuperpositionConfig) -> Result<f64> {
    let tail = tail_radius(s, cfg.eps)?;
    let mut r = cfg.r_rho.unwrap_or(2.0 * tail);
    let lam = min_eig_im(&s.m);
    if let Some(h) = &s.higher {
        for u in unit_directions::<D>() {
            let a = 0.5 * cquad(&s.m, &u).im - 0.25 * lam;
            let b = ccubic(&h.phi3, &u).im / 6.0;
            if b < 0.0 {
                r = r.min(0.9 * a / (-b));
            }
        }
    }
    Ok(r)
}

/// Checks the cutoff condition `Im Φ ≥ ¼ λ_min |d|²` on sampled points of `supp ρ`.
pub fn cutoff_condition_holds<const D: usize>(s: &BeamState<f64, D>, r: f64) -> bool {
    let lam = min_eig_im(&s.m);
    unit_directions::<D>().iter().all(|u| {
        (1..=20).all(|k| {
            let rr = r * k as f64 / 20.0;
            let y: Vector<f64, D> = std::array::from_fn(|i| s.x[i] + rr * u[i]);
            taylor_phase(s, &y).im >= 0.25 * lam * rr * rr * (1.0 - 1e-12)
        })
    })
}

/// A propagated beam with cached time jet, ready for repeated evaluation.
#[derive(Clone, Debug)]
pub struct PreparedBeam<const D: usize> {
    pub state: BeamState<f64, D>,
    pub weight: f64,
    pub radius: f64,
    pub r_rho: Option<f64>,
    lifted: BeamState<Jet<f64>, D>,
}

impl<const D: usize> PreparedBeam<D> {
    pub fn new(med: &MediumModel, state: &BeamState<f64, D>, weight: f64, cfg: &SuperpositionConfig) -> Result<Self> {
        let rate = rates(med, state)?;
        let lifted = lift_time(state, &rate, None);
        let (radius, r_rho) = match state.order() {
            Order::First => (tail_radius(state, cfg.eps)?, None),
            Order::Second => {
                let r = cutoff_radius(state, cfg)?;
                (r, Some(r))
            }
        };
        Ok(PreparedBeam { state: *state, weight, radius, r_rho, lifted })
    }

    /// `(u, ∂_t u)` of this beam at `y`; zero outside the tail clamp or the cutoff.
    pub fn eval(&self, y: &Vector<f64, D>, eps: f64) -> (Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        let yj = y.map(Jet::constant);
        let phi = taylor_phase(&self.lifted, &yj);
        if phi.im.v / eps > TAIL_CLAMP {
            return (zero, zero);
        }
        let mut a = taylor_amplitude(&self.lifted, &yj);
        if let Some(r) = self.r_rho {
            let mut d2 = Jet::constant(0.0);
            for i in 0..D {
                let di = yj[i] - self.lifted.x[i];
                d2 += di * di;
            }
            let rho = cutoff(d2, r);
            if rho.v == 0.0 {
                return (zero, zero);
            }
            a = a * rho;
        }
        let inv = Jet::constant(1.0 / eps);
        let e = cexp(Complex::new(-phi.im * inv, phi.re * inv));
        let u = a * e;
        (Complex64::new(u.re.v, u.im.v), Complex64::new(u.re.d1, u.im.d1))
    }
}

/// Value and time derivative of one beam at `y`.
pub fn beam_value<const D: usize>(
    med: &MediumModel,
    s: &BeamState<f64, D>,
    y: &Vector<f64, D>,
    cfg: &SuperpositionConfig,
) -> Result<(Complex64, Complex64)> {
    if s.order() != cfg.order {
        return Err(Error::Config("beam order differs from the superposition order".into()));
    }
    Ok(PreparedBeam::new(med, s, 1.0, cfg)?.eval(y, cfg.eps))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManifoldNode<const D: usize> {
    pub x0: Vector<f64, D>,
    pub weight: f64,
}

/// Midpoint lattice of spacing `h0` centred on the support box; nodes where
/// both branch amplitudes vanish are dropped.
pub fn build_initial_manifold<const D: usize>(
    d: &InitialData<D>,
    med: &MediumModel,
    h0: f64,
) -> Result<Vec<ManifoldNode<D>>> {
    if !(h0 > 0.0) {
        return Err(Error::Config("h0 must be positive".into()));
    }
    let lattice = midpoint_lattice(d.support_box.0, d.support_box.1, h0);
    let mut out = Vec::new();
    for x0 in lattice {
        let (ap, am) = split_initial_amplitudes(d, med, &x0)?;
        if ap.norm() > 0.0 || am.norm() > 0.0 {
            out.push(ManifoldNode { x0, weight: h0.powi(D as i32) });
        }
    }
    if out.is_empty() {
        return Err(Error::EmptySupport);
    }
    Ok(out)
}

/// Cell centres of a lattice with spacing `h0` centred on `[lo, hi]`.
pub fn midpoint_lattice<const D: usize>(lo: Vector<f64, D>, hi: Vector<f64, D>, h0: f64) -> Vec<Vector<f64, D>> {
    let counts: Vector<usize, D> = std::array::from_fn(|i| (((hi[i] - lo[i]) / h0) - 1e-9).ceil().max(1.0) as usize);
    let starts: Vector<f64, D> =
        std::array::from_fn(|i| 0.5 * (lo[i] + hi[i]) - 0.5 * counts[i] as f64 * h0);
    let total: usize = counts.iter().product();
    (0..total)
        .map(|idx| {
            let mut k = idx;
            let mut m = [0usize; D];
            for i in (0..D).rev() {
                m[i] = k % counts[i];
                k /= counts[i];
            }
            std::array::from_fn(|i| starts[i] + (m[i] as f64 + 0.5) * h0)
        })
        .collect()
}

/// Beams of one branch with their quadrature weights, all at the same time.
#[derive(Clone, Debug)]
pub struct BeamFamily<const D: usize> {
    pub branch: Branch,
    pub t: f64,
    pub beams: Vec<(BeamState<f64, D>, f64)>,
}

/// Initial beams for both branches; a branch whose amplitude vanishes identically is empty.
pub fn launch_families<const D: usize>(
    d: &InitialData<D>,
    med: &MediumModel,
    cfg: &SuperpositionConfig,
) -> Result<[BeamFamily<D>; 2]> {
    cfg.validate()?;
    let nodes = build_initial_manifold(d, med, cfg.h0)?;
    let mut fams = [
        BeamFamily { branch: Branch::Plus, t: 0.0, beams: Vec::new() },
        BeamFamily { branch: Branch::Minus, t: 0.0, beams: Vec::new() },
    ];
    for node in nodes {
        let (ap, am) = split_initial_amplitudes(d, med, &node.x0)?;
        let (gp, gm) = match cfg.order {
            Order::First => ([C::new(0.0, 0.0); D], [C::new(0.0, 0.0); D]),
            Order::Second => split_amplitude_gradients(d, med, &node.x0)?,
        };
        let phase = d.phase_taylor(&node.x0);
        for (fam, a, g) in [(0usize, ap, gp), (1usize, am, gm)] {
            let active = a.norm() > 0.0 || g.iter().any(|z| z.norm() > 0.0);
            if !active {
                continue;
            }
            let b = fams[fam].branch;
            let s = crate::beam::make_initial_state(&phase, a, g, node.x0, cfg.order, cfg.beta, b, med.p_min)?;
            fams[fam].beams.push((s, node.weight));
        }
    }
    Ok(fams)
}

/// Propagates every beam of a family to each of `times` (in parallel, order preserved).
pub fn propagate_family<const D: usize>(
    med: &MediumModel,
    fam: &BeamFamily<D>,
    times: &[f64],
    tol: f64,
) -> Result<Vec<BeamFamily<D>>> {
    let runs: Vec<Vec<BeamState<f64, D>>> =
        fam.beams.par_iter().map(|(s, _)| propagate(med, s, times, tol)).collect::<Result<_>>()?;
    Ok(times
        .iter()
        .enumerate()
        .map(|(k, &t)| BeamFamily {
            branch: fam.branch,
            t,
            beams: runs.iter().zip(&fam.beams).map(|(r, (_, w))| (r[k], *w)).collect(),
        })
        .collect())
}

fn prepare_all<const D: usize>(
    med: &MediumModel,
    families: &[BeamFamily<D>],
    cfg: &SuperpositionConfig,
) -> Result<(f64, Vec<PreparedBeam<D>>)> {
    let t = families.first().map(|f| f.t).unwrap_or(0.0);
    if families.iter().any(|f| f.t != t) {
        return Err(Error::InvariantViolation("beam families are at different times".into()));
    }
    let all: Vec<(BeamState<f64, D>, f64)> = families.iter().flat_map(|f| f.beams.iter().copied()).collect();
    if all.iter().any(|(s, _)| s.order() != cfg.order) {
        return Err(Error::Config("beam order differs from the superposition order".into()));
    }
    let prepared = all
        .par_iter()
        .map(|(s, w)| PreparedBeam::new(med, s, *w, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok((t, prepared))
}

fn within<const D: usize>(b: &PreparedBeam<D>, y: &Vector<f64, D>) -> bool {
    let mut d2 = 0.0;
    for i in 0..D {
        let d = y[i] - b.state.x[i];
        d2 += d * d;
    }
    d2 <= b.radius * b.radius
}

/// `u(y) = Z(n,ε) Σ_j w_j [u⁺_GB(y; x₀ⱼ) + u⁻_GB(y; x₀ⱼ)]`, and the same for `∂_t u`.
///
/// Rows of the grid are processed in parallel; within a row beams are summed
/// in a fixed order, so results do not depend on the thread count.
pub fn superpose<const D: usize>(
    med: &MediumModel,
    families: &[BeamFamily<D>],
    cfg: &SuperpositionConfig,
    grid: &Grid<D>,
) -> Result<WaveField<D>> {
    grid.check_resolution(cfg.eps)?;
    let (t, prepared) = prepare_all(med, families, cfg)?;
    let z = cfg.z(D);
    let row_len = grid.row_len();
    let rows: Vec<Vec<(Complex64, Complex64)>> = (0..grid.rows())
        .into_par_iter()
        .map(|r| {
            let first = grid.point(r * row_len);
            let cands: Vec<&PreparedBeam<D>> = prepared
                .iter()
                .filter(|b| (0..D - 1).all(|i| (first[i] - b.state.x[i]).abs() <= b.radius))
                .collect();
            (0..row_len)
                .map(|j| {
                    let y = grid.point(r * row_len + j);
                    let mut u = Complex64::new(0.0, 0.0);
                    let mut ut = u;
                    for b in &cands {
                        if within(b, &y) {
                            let (bu, but) = b.eval(&y, cfg.eps);
                            u += bu * b.weight;
                            ut += but * b.weight;
                        }
                    }
                    (u * z, ut * z)
                })
                .collect()
        })
        .collect();
    let mut field = WaveField::zeros(*grid, t);
    for (k, (u, ut)) in rows.into_iter().flatten().enumerate() {
        field.u[k] = u;
        field.ut[k] = ut;
    }
    if !field.is_finite() {
        return Err(Error::InvariantViolation("superposed field is not finite".into()));
    }
    Ok(field)
}

/// Superposition at scattered points (no resolution requirement).
pub fn superpose_points<const D: usize>(
    med: &MediumModel,
    families: &[BeamFamily<D>],
    cfg: &SuperpositionConfig,
    points: &[Vector<f64, D>],
) -> Result<Vec<(Complex64, Complex64)>> {
    let (_, prepared) = prepare_all(med, families, cfg)?;
    let z = cfg.z(D);
    Ok(points
        .par_iter()
        .map(|y| {
            // Parallel partial sums in fixed chunks keep the reduction order deterministic.
            let parts: Vec<(Complex64, Complex64)> = prepared
                .par_chunks(1024)
                .map(|chunk| {
                    let mut u = Complex64::new(0.0, 0.0);
                    let mut ut = u;
                    for b in chunk {
                        if within(b, y) {
                            let (bu, but) = b.eval(y, cfg.eps);
                            u += bu * b.weight;
                            ut += but * b.weight;
                        }
                    }
                    (u, ut)
                })
                .collect();
            let (u, ut) = parts
                .into_iter()
                .fold((Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)), |acc, p| (acc.0 + p.0, acc.1 + p.1));
            (u * z, ut * z)
        })
        .collect())
}

/// Coefficients of `P[u_beam] = (ε⁻² c₋₂ + ε⁻¹ c₋₁ + c₀) e^{iΦ/ε}` for one beam.
///
/// With `a` the (cut off) Taylor amplitude and `G = Φ_t² - c²∇Φ·∇Φ`:
/// `c₋₂ = -G a`, `c₋₁ = i(2 a_t Φ_t - 2c² ∇a·∇Φ + a P[Φ])`, `c₀ = P[a]`.
/// Time derivatives come from a second-order time jet of the beam state,
/// spatial ones from one forward jet per axis.
#[derive(Clone, Debug)]
pub struct ResidualDecomposition<const D: usize> {
    pub state: BeamState<f64, D>,
    pub r_rho: Option<f64>,
    timed: BeamState<Jet<f64>, D>,
    frozen: BeamState<Jet<f64>, D>,
    med: MediumModel,
}

pub fn residual_coefficients<const D: usize>(
    med: &MediumModel,
    s: &BeamState<f64, D>,
    cfg: &SuperpositionConfig,
) -> Result<ResidualDecomposition<D>> {
    let r1 = rates(med, s)?;
    let r2 = second_rate(med, s, &r1)?;
    let r_rho = match s.order() {
        Order::First => None,
        Order::Second => Some(cutoff_radius(s, cfg)?),
    };
    Ok(ResidualDecomposition {
        state: *s,
        r_rho,
        timed: lift_time(s, &r1, Some(&r2)),
        frozen: lift_constant(s),
        med: med.clone(),
    })
}

fn split(z: C<Jet<f64>>) -> (Complex64, Complex64, Complex64) {
    (Complex64::new(z.re.v, z.im.v), Complex64::new(z.re.d1, z.im.d1), Complex64::new(z.re.d2, z.im.d2))
}

impl<const D: usize> ResidualDecomposition<D> {
    fn phase_amp(&self, s: &BeamState<Jet<f64>, D>, y: &Vector<Jet<f64>, D>) -> (C<Jet<f64>>, C<Jet<f64>>) {
        let phi = taylor_phase(s, y);
        let mut a = taylor_amplitude(s, y);
        if let Some(r) = self.r_rho {
            let mut d2 = Jet::constant(0.0);
            for i in 0..D {
                let di = y[i] - s.x[i];
                d2 += di * di;
            }
            a = a * cutoff(d2, r);
        }
        (phi, a)
    }

    /// `Φ(t, y)` of the beam.
    pub fn phase(&self, y: &Vector<f64, D>) -> Complex64 {
        taylor_phase(&self.state, y)
    }

    /// `[c₋₂, c₋₁, c₀]` at `y`.
    pub fn coefficients(&self, y: &Vector<f64, D>) -> Result<[Complex64; 3]> {
        let c = self.med.speed(y)?;
        let c2 = c * c;
        let yc = y.map(Jet::constant);
        let (phi_t, a_t) = self.phase_amp(&self.timed, &yc);
        let (_, phit, phitt) = split(phi_t);
        let (a, at, att) = split(a_t);
        let mut grad_dot = Complex64::new(0.0, 0.0);
        let mut grad_sq = Complex64::new(0.0, 0.0);
        let mut lap_phi = Complex64::new(0.0, 0.0);
        let mut lap_a = Complex64::new(0.0, 0.0);
        for i in 0..D {
            let yi: Vector<Jet<f64>, D> =
                std::array::from_fn(|k| if k == i { Jet::variable(y[k]) } else { Jet::constant(y[k]) });
            let (p, aa) = self.phase_amp(&self.frozen, &yi);
            let (_, px, pxx) = split(p);
            let (_, ax, axx) = split(aa);
            grad_sq += px * px;
            grad_dot += ax * px;
            lap_phi += pxx;
            lap_a += axx;
        }
        let g = phit * phit - grad_sq * c2;
        let i = Complex64::new(0.0, 1.0);
        let cm2 = -g * a;
        let cm1 = i * (at * phit * 2.0 - grad_dot * (2.0 * c2) + a * (phitt - lap_phi * c2));
        let c0 = att - lap_a * c2;
        Ok([cm2, cm1, c0])
    }

    /// `P[u_beam](y)`, zero beyond the tail clamp.
    pub fn apply(&self, y: &Vector<f64, D>, eps: f64) -> Result<Complex64> {
        let phi = self.phase(y);
        if phi.im / eps > TAIL_CLAMP {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let [cm2, cm1, c0] = self.coefficients(y)?;
        let e = (Complex64::new(0.0, 1.0) * phi / eps).exp();
        Ok((cm2 / (eps * eps) + cm1 / eps + c0) * e)
    }
}

/// `Z Σ_j w_j P[u_beam_j]` sampled on a grid.
pub fn residual_field<const D: usize>(
    med: &MediumModel,
    families: &[BeamFamily<D>],
    cfg: &SuperpositionConfig,
    grid: &Grid<D>,
) -> Result<Vec<Complex64>> {
    grid.check_resolution(cfg.eps)?;
    let all: Vec<(BeamState<f64, D>, f64)> = families.iter().flat_map(|f| f.beams.iter().copied()).collect();
    let decs = all
        .par_iter()
        .map(|(s, w)| {
            let r = residual_coefficients(med, s, cfg)?;
            let radius = match r.r_rho {
                Some(rr) => rr,
                None => tail_radius(s, cfg.eps)?,
            };
            Ok((r, *w, radius))
        })
        .collect::<Result<Vec<_>>>()?;
    let z = cfg.z(D);
    let row_len = grid.row_len();
    let rows = (0..grid.rows())
        .into_par_iter()
        .map(|r| {
            let first = grid.point(r * row_len);
            let cands: Vec<_> = decs
                .iter()
                .filter(|(d, _, rad)| (0..D - 1).all(|i| (first[i] - d.state.x[i]).abs() <= *rad))
                .collect();
            (0..row_len)
                .map(|j| {
                    let y = grid.point(r * row_len + j);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (d, w, rad) in &cands {
                        let d2: f64 = (0..D).map(|i| (y[i] - d.state.x[i]).powi(2)).sum();
                        if d2 <= rad * rad {
                            acc += d.apply(&y, cfg.eps)? * *w;
                        }
                    }
                    Ok(acc * z)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::{make_initial_state, propagate_to, PhaseTaylor};
    use crate::initial_data::{preset_initial_data, PresetParams};

    fn plane_beam(x0: f64, order: Order) -> BeamState<f64, 1> {
        let ph = PhaseTaylor { s: x0, grad: [1.0], hess: [[0.0]], third: [[[0.0]]] };
        make_initial_state(&ph, C::new(1.0, 0.0), [C::new(0.0, 0.0)], [x0], order, 1.0, Branch::Plus, 1e-8).unwrap()
    }

    #[test]
    fn taylor_phase_examples() {
        let s = plane_beam(0.0, Order::First);
        let mut s0 = s;
        s0.s = 0.0;
        assert_eq!(taylor_phase(&s0, &[0.0]), C::new(0.0, 0.0));
        let phi = taylor_phase(&s0, &[0.3]);
        assert!((phi - C::new(0.3, 0.045)).norm() < 1e-15);
    }

    #[test]
    fn radial_phase_matches_closed_form_at_t0() {
        let d = preset_initial_data::<3>("radial3d", &PresetParams::default()).unwrap();
        let y = [0.2, 0.3, -0.35];
        let beta = 1.5;
        let s = make_initial_state(&d.phase_taylor(&y), C::new(1.0, 0.0), [C::new(0.0, 0.0); 3], y, Order::First, beta, Branch::Plus, 1e-8)
            .unwrap();
        let x = [0.25, 0.27, -0.3];
        let r = crate::linalg::norm(&y);
        let dd: [f64; 3] = std::array::from_fn(|i| x[i] - y[i]);
        let pd: f64 = (0..3).map(|i| dd[i] * y[i] / r).sum();
        let quad_re = (crate::linalg::dot(&dd, &dd) - pd * pd) / r;
        let expect = C::new(r + pd + 0.5 * quad_re, 0.5 * beta * crate::linalg::dot(&dd, &dd));
        assert!((taylor_phase(&s, &x) - expect).norm() < 1e-14);
    }

    #[test]
    fn beam_value_examples() {
        let med = MediumModel::constant(1.0);
        let cfg = SuperpositionConfig::new(0.01, 1.0, Order::First, 0.05).unwrap();
        let s = plane_beam(0.2, Order::First);
        let (u, _) = beam_value(&med, &s, &[0.2], &cfg).unwrap();
        assert!((u - (C::new(0.0, 0.2 / 0.01)).exp()).norm() < 1e-12);
        for y in [0.25, 0.3, 0.1] {
            let (u, _) = beam_value(&med, &s, &[y], &cfg).unwrap();
            let expect = (-(y - 0.2_f64).powi(2) / (2.0 * 0.01)).exp();
            assert!((u.norm() - expect).abs() < 1e-12);
        }
        let (u, ut) = beam_value(&med, &s, &[1.3], &cfg).unwrap();
        assert_eq!((u, ut), (C::new(0.0, 0.0), C::new(0.0, 0.0)));
    }

    #[test]
    fn time_derivative_matches_propagated_difference() {
        let med = MediumModel::sin1d(0.1, 1.0);
        let cfg = SuperpositionConfig::new(0.05, 1.0, Order::Second, 0.05).unwrap();
        let mut s0 = plane_beam(0.3, Order::Second);
        s0.higher.as_mut().unwrap().grad_a[0] = C::new(0.4, -0.2);
        let s = propagate_to(&med, &s0, 0.6, 1e-12).unwrap();
        let h = 1e-5;
        let sp = propagate_to(&med, &s0, 0.6 + h, 1e-12).unwrap();
        let sm = propagate_to(&med, &s0, 0.6 - h, 1e-12).unwrap();
        for y in [0.85, 0.9, 1.0] {
            let (_, ut) = beam_value(&med, &s, &[y], &cfg).unwrap();
            let (up, _) = beam_value(&med, &sp, &[y], &cfg).unwrap();
            let (um, _) = beam_value(&med, &sm, &[y], &cfg).unwrap();
            let fd = (up - um) / (2.0 * h);
            assert!((fd - ut).norm() < 1e-5 * (1.0 + ut.norm()), "{fd} vs {ut}");
        }
    }

    #[test]
    fn cutoff_profile() {
        assert_eq!(cutoff(0.0_f64, 1.0), 1.0);
        assert_eq!(cutoff(0.24_f64, 1.0), 1.0);
        assert_eq!(cutoff(1.0_f64, 1.0), 0.0);
        let mid = cutoff(0.75_f64 * 0.75, 1.0);
        assert!((mid - 0.5).abs() < 1e-12);
        let mut prev = 1.0;
        for k in 0..=100 {
            let r = 0.5 + 0.5 * k as f64 / 100.0;
            let v = cutoff(r * r, 1.0);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn cutoff_radius_satisfies_condition() {
        let med = MediumModel::sin1d(0.2, 2.0);
        let mut s0 = plane_beam(0.3, Order::Second);
        s0.higher.as_mut().unwrap().phi3[0][0][0] = C::new(2.0, 0.0);
        let s = propagate_to(&med, &s0, 1.2, 1e-10).unwrap();
        let cfg = SuperpositionConfig::new(0.04, 1.0, Order::Second, 0.04).unwrap();
        let r = cutoff_radius(&s, &cfg).unwrap();
        assert!(r > 0.0);
        assert!(cutoff_condition_holds(&s, r));
    }

    #[test]
    fn manifold_midpoints() {
        let d = preset_initial_data::<1>(
            "plane1d",
            &PresetParams { r0: Some(0.5), half_width: Some(0.5), ..Default::default() },
        )
        .unwrap();
        let lat = midpoint_lattice(d.support_box.0, d.support_box.1, 0.25);
        let xs: Vec<f64> = lat.iter().map(|v| v[0]).collect();
        assert_eq!(xs, vec![0.125, 0.375, 0.625, 0.875]);
        let nodes = build_initial_manifold(&d, &MediumModel::constant(1.0), 0.25).unwrap();
        assert_eq!(nodes.len(), 4);
        assert!(nodes.iter().all(|n| n.weight == 0.25));
        let total: f64 = nodes.iter().map(|n| n.weight).sum();
        assert!((total - 1.0).abs() <= 0.25);
    }

    #[test]
    fn manifold_prunes_outside_support() {
        let d = preset_initial_data::<1>(
            "plane1d",
            &PresetParams { r0: Some(0.5), half_width: Some(0.1), ..Default::default() },
        )
        .unwrap();
        let nodes = build_initial_manifold(&d, &MediumModel::constant(1.0), 0.01).unwrap();
        assert!(nodes.iter().all(|n| n.x0[0] > 0.4 && n.x0[0] < 0.6));
    }

    #[test]
    fn singleton_family_reproduces_the_beam() {
        let med = MediumModel::constant(1.0);
        let eps = 0.01;
        let cfg = SuperpositionConfig::new(eps, 1.0, Order::First, 0.1).unwrap();
        let s = plane_beam(0.0, Order::First);
        let fam = BeamFamily { branch: Branch::Plus, t: 0.0, beams: vec![(s, 1.0 / cfg.z(1))] };
        let grid = Grid::covering([-0.5], [0.5], eps / 32.0);
        let f = superpose(&med, &[fam], &cfg, &grid).unwrap();
        for k in (0..grid.len()).step_by(97) {
            let (u, ut) = beam_value(&med, &s, &grid.point(k), &cfg).unwrap();
            assert!((f.u[k] - u).norm() < 1e-12 && (f.ut[k] - ut).norm() < 1e-12);
        }
    }

    #[test]
    fn superposition_is_linear_in_families() {
        let med = MediumModel::sin1d(0.1, 1.0);
        let d = preset_initial_data::<1>("chirp1d", &PresetParams::default()).unwrap();
        let eps = 0.02;
        let cfg = SuperpositionConfig::with_default_spacing(eps, 1.0, Order::First, 2.9).unwrap();
        let fams = launch_families(&d, &med, &cfg).unwrap();
        let grid = Grid::covering([-2.0], [2.0], eps / 8.0);
        let both = superpose(&med, &fams, &cfg, &grid).unwrap();
        let mut sep = superpose(&med, &fams[..1], &cfg, &grid).unwrap();
        sep.add_assign(&superpose(&med, &fams[1..], &cfg, &grid).unwrap()).unwrap();
        for k in 0..grid.len() {
            assert!((both.u[k] - sep.u[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_velocity_data_is_even_in_time() {
        let med = MediumModel::constant(1.0);
        let d = preset_initial_data::<1>("plane1d", &PresetParams { half_width: Some(0.5), ..Default::default() }).unwrap();
        let eps = 0.02;
        let cfg = SuperpositionConfig::with_default_spacing(eps, 1.0, Order::Second, 1.0).unwrap();
        let grid = Grid::covering([-1.2], [1.2], eps / 32.0);
        let field_at = |t: f64| {
            let mut fams = Vec::new();
            for f in launch_families(&d, &med, &cfg).unwrap() {
                fams.extend(propagate_family(&med, &f, &[t], 1e-11).unwrap());
            }
            superpose(&med, &fams, &cfg, &grid).unwrap()
        };
        let (fwd, bwd) = (field_at(0.4), field_at(-0.4));
        let scale = fwd.u.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(scale > 0.1);
        for k in 0..grid.len() {
            assert!((fwd.u[k] - bwd.u[k]).norm() < 1e-8 * scale);
            assert!((fwd.ut[k] + bwd.ut[k]).norm() < 1e-8 * scale / eps);
        }
    }

    #[test]
    fn coarse_grid_rejected() {
        let med = MediumModel::constant(1.0);
        let cfg = SuperpositionConfig::new(0.01, 1.0, Order::First, 0.1).unwrap();
        let grid = Grid::covering([-0.5], [0.5], 0.01);
        assert!(matches!(superpose::<1>(&med, &[], &cfg, &grid), Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn residual_vanishes_on_ray_and_for_exact_beams() {
        let med = MediumModel::sin1d(0.1, 1.0);
        let cfg = SuperpositionConfig::new(0.02, 1.0, Order::First, 0.1).unwrap();
        let s = propagate_to(&med, &plane_beam(0.1, Order::First), 0.5, 1e-10).unwrap();
        let r = residual_coefficients(&med, &s, &cfg).unwrap();
        let [cm2, _, _] = r.coefficients(&s.x).unwrap();
        assert!(cm2.norm() < 1e-12);
        // Linear phase in 1D constant speed: eikonal holds off the ray as well.
        let one = MediumModel::constant(1.0);
        let s = plane_beam(0.0, Order::First);
        let r = residual_coefficients(&one, &s, &cfg).unwrap();
        for y in [-0.3, 0.1, 0.4] {
            let c = r.coefficients(&[y]).unwrap();
            assert!(c.iter().all(|z| z.norm() < 1e-12));
        }
    }

    #[test]
    fn residual_matches_finite_difference_wave_operator() {
        // P[u] = u_tt - c² Δu for one beam, by central differences in t and y.
        let med = MediumModel::bump(0.2, 0.6, vec![0.1, 0.2]);
        let eps = 0.1;
        for order in [Order::First, Order::Second] {
            let cfg = SuperpositionConfig::new(eps, 1.0, order, 0.1).unwrap();
            let ph = PhaseTaylor { s: 0.0, grad: [0.8, 0.6], hess: [[0.3, 0.1], [0.1, -0.2]], third: [[[0.1; 2]; 2]; 2] };
            let s0 = make_initial_state(&ph, C::new(1.0, 0.2), [C::new(0.3, 0.0), C::new(-0.1, 0.1)], [-0.2, 0.0], order, 1.0, Branch::Plus, 1e-8)
                .unwrap();
            let t = 0.4;
            let ht = 5e-4;
            let states: Vec<_> = [-ht, 0.0, ht].iter().map(|dt| propagate_to(&med, &s0, t + dt, 1e-13).unwrap()).collect();
            let r = residual_coefficients(&med, &states[1], &cfg).unwrap();
            let hy = 5e-4;
            for y in [[0.2, 0.25], [0.3, 0.3], [0.25, 0.15]] {
                let val = |s: &BeamState<f64, 2>, yy: [f64; 2]| beam_value(&med, s, &yy, &cfg).unwrap().0;
                let utt = (val(&states[2], y) - 2.0 * val(&states[1], y) + val(&states[0], y)) / (ht * ht);
                let mut lap = C::new(0.0, 0.0);
                for i in 0..2 {
                    let (mut a, mut b) = (y, y);
                    a[i] += hy;
                    b[i] -= hy;
                    lap += (val(&states[1], a) - 2.0 * val(&states[1], y) + val(&states[1], b)) / (hy * hy);
                }
                let c = med.speed(&y).unwrap();
                let fd = utt - lap * c * c;
                let an = r.apply(&y, eps).unwrap();
                assert!((fd - an).norm() < 1e-3 * (1.0 + an.norm()), "{order:?} {y:?}: {fd} vs {an}");
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn superposition_is_linear_in_weights(w1 in -2.0..2.0f64, w2 in -2.0..2.0f64, x1 in -0.3..0.3f64, x2 in -0.3..0.3f64) {
            let med = MediumModel::constant(1.0);
            let eps = 0.02;
            let cfg = SuperpositionConfig::new(eps, 1.0, Order::First, 0.1).unwrap();
            let grid = Grid::covering([-0.5], [0.5], eps / 8.0);
            let fam = |beams| BeamFamily { branch: Branch::Plus, t: 0.0, beams };
            let (b1, b2) = (plane_beam(x1, Order::First), plane_beam(x2, Order::First));
            let joint = superpose(&med, &[fam(vec![(b1, w1), (b2, w2)])], &cfg, &grid).unwrap();
            let f1 = superpose(&med, &[fam(vec![(b1, 1.0)])], &cfg, &grid).unwrap();
            let f2 = superpose(&med, &[fam(vec![(b2, 1.0)])], &cfg, &grid).unwrap();
            for k in 0..grid.len() {
                let lin = f1.u[k] * w1 + f2.u[k] * w2;
                proptest::prop_assert!((joint.u[k] - lin).norm() < 1e-9 * (1.0 + lin.norm()));
            }
        }
    }
}
