//! Lagrangian beam data along one ray and its time evolution.
//!
//! The phase Taylor coefficients obey
//! `ẋ = H_p`, `ṗ = -H_x`, `Ṡ = 0`,
//! `Ṁ = -(H_xx + H_xp M + M H_px + M H_pp M)` and
//! `Ȧ = A/(2H) [H_p·H_x + H_p M H_p - c² Tr M]`.
//!
//! For second order beams the third phase derivative `T` and the amplitude
//! gradient `g` are carried as well. Their equations follow from applying
//! one more spatial derivative to the eikonal and transport equations
//! written for fields `Φ(t, y)`, `a(t, y)` and evaluating on the ray, where
//! the transport term `H_p·∇` cancels against the motion of the ray.
//! See `docs/higher_order.md` for the expanded index form.

use num_complex::Complex;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cinv, complexify, cmatmul, ctrace, ctzeros, czeros, cmzeros, min_eig_im, skew_norm, symmetrize,
    symmetrize3, Matrix, Tensor3, Vector, C};
use crate::medium::{Branch, HamBlocks, HamBlocks3, MediumModel};
use crate::ode::{integrate, OdeOptions};
use crate::scalar::{Jet, Real};

/// Beam order `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Order {
    First,
    Second,
}

impl Order {
    pub fn k(self) -> u8 {
        match self {
            Order::First => 1,
            Order::Second => 2,
        }
    }
}

impl TryFrom<u8> for Order {
    type Error = String;
    fn try_from(k: u8) -> std::result::Result<Self, String> {
        match k {
            1 => Ok(Order::First),
            2 => Ok(Order::Second),
            _ => Err(format!("unsupported beam order k = {k}; supported orders are 1 and 2")),
        }
    }
}

impl From<Order> for u8 {
    fn from(o: Order) -> u8 {
        o.k()
    }
}

/// Third phase derivative and amplitude gradient carried by second order beams.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HigherOrder<T, const D: usize> {
    pub phi3: Tensor3<C<T>, D>,
    pub grad_a: Vector<C<T>, D>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamState<T, const D: usize> {
    pub t: T,
    pub x: Vector<T, D>,
    pub p: Vector<T, D>,
    pub s: T,
    pub m: Matrix<C<T>, D>,
    pub a: C<T>,
    pub higher: Option<HigherOrder<T, D>>,
    pub branch: Branch,
    pub x0: Vector<f64, D>,
}

/// Time derivative of a [`BeamState`] (the phase constant has zero rate).
#[derive(Clone, Copy, Debug)]
pub struct BeamRate<T, const D: usize> {
    pub dx: Vector<T, D>,
    pub dp: Vector<T, D>,
    pub dm: Matrix<C<T>, D>,
    pub da: C<T>,
    pub higher: Option<HigherOrder<T, D>>,
}

/// Taylor data of a real phase at one point.
#[derive(Clone, Copy, Debug)]
pub struct PhaseTaylor<T, const D: usize> {
    pub s: T,
    pub grad: Vector<T, D>,
    pub hess: Matrix<T, D>,
    pub third: Tensor3<T, D>,
}

impl<T: Real, const D: usize> BeamState<T, D> {
    pub fn order(&self) -> Order {
        if self.higher.is_some() {
            Order::Second
        } else {
            Order::First
        }
    }

    pub fn min_eig_im_m(&self) -> f64 {
        min_eig_im(&self.m)
    }

    fn len(&self) -> usize {
        let base = 2 * D + 2 * D * D + 2;
        if self.higher.is_some() {
            base + 2 * D * D * D + 2 * D
        } else {
            base
        }
    }

    /// Flattens the evolving components into a real vector.
    pub fn pack(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.x);
        v.extend_from_slice(&self.p);
        for row in &self.m {
            for z in row {
                v.push(z.re);
                v.push(z.im);
            }
        }
        v.push(self.a.re);
        v.push(self.a.im);
        if let Some(h) = &self.higher {
            for a in &h.phi3 {
                for b in a {
                    for z in b {
                        v.push(z.re);
                        v.push(z.im);
                    }
                }
            }
            for z in &h.grad_a {
                v.push(z.re);
                v.push(z.im);
            }
        }
        v
    }

    /// Inverse of [`pack`](Self::pack), using `self` for the non-evolving fields.
    pub fn unpack(&self, t: T, v: &[T]) -> Self {
        let mut it = v.iter().copied();
        let mut next = || it.next().expect("state vector length");
        let mut out = *self;
        out.t = t;
        for i in 0..D {
            out.x[i] = next();
        }
        for i in 0..D {
            out.p[i] = next();
        }
        for i in 0..D {
            for j in 0..D {
                out.m[i][j] = Complex::new(next(), next());
            }
        }
        out.a = Complex::new(next(), next());
        if let Some(h) = out.higher.as_mut() {
            for i in 0..D {
                for j in 0..D {
                    for k in 0..D {
                        h.phi3[i][j][k] = Complex::new(next(), next());
                    }
                }
            }
            for i in 0..D {
                h.grad_a[i] = Complex::new(next(), next());
            }
        }
        out
    }

    /// Hamiltonian value at the current phase-space point.
    pub fn hamiltonian(&self, m: &MediumModel) -> Result<T> {
        m.hamiltonian(self.branch, &self.x, &self.p)
    }

    fn symmetrize_in_place(&mut self) {
        symmetrize(&mut self.m);
        if let Some(h) = self.higher.as_mut() {
            h.phi3 = symmetrize3(&h.phi3);
        }
    }
}

impl<T: Real, const D: usize> BeamRate<T, D> {
    pub fn pack(&self) -> Vec<T> {
        let tmpl = BeamState {
            t: T::zero(),
            x: self.dx,
            p: self.dp,
            s: T::zero(),
            m: self.dm,
            a: self.da,
            higher: self.higher,
            branch: Branch::Plus,
            x0: [0.0; D],
        };
        tmpl.pack()
    }
}

/// Builds the initial beam at `x0` from the phase Taylor data there.
///
/// `M = ∂²S_in + iβI`; for second order beams `T = ∂³S_in` and the
/// amplitude gradient is taken from `grad_a`.
#[allow(clippy::too_many_arguments)]
pub fn make_initial_state<T: Real, const D: usize>(
    phase: &PhaseTaylor<T, D>,
    a_init: C<T>,
    grad_a: Vector<C<T>, D>,
    x0: Vector<T, D>,
    order: Order,
    beta: T,
    branch: Branch,
    p_min: f64,
) -> Result<BeamState<T, D>> {
    let np = crate::linalg::norm(&phase.grad);
    if !(np.val() >= p_min) {
        return Err(Error::ZeroGradientPhase { x0: x0.iter().map(|v| v.val()).collect() });
    }
    let mut m = complexify(&phase.hess);
    for (i, row) in m.iter_mut().enumerate() {
        row[i].im += beta;
    }
    let higher = match order {
        Order::First => None,
        Order::Second => Some(HigherOrder {
            phi3: std::array::from_fn(|i| {
                std::array::from_fn(|j| std::array::from_fn(|k| Complex::new(phase.third[i][j][k], T::zero())))
            }),
            grad_a,
        }),
    };
    Ok(BeamState {
        t: T::zero(),
        x: x0,
        p: phase.grad,
        s: phase.s,
        m,
        a: a_init,
        higher,
        branch,
        x0: x0.map(|v| v.val()),
    })
}

/// Right-hand side of the beam system without the positivity check.
pub fn rates<T: Real, const D: usize>(med: &MediumModel, s: &BeamState<T, D>) -> Result<BeamRate<T, D>> {
    let (blk, b3) = med.hamiltonian_blocks3(s.branch, &s.x, &s.p)?;
    let m = &s.m;
    let hxp = complexify(&blk.hxp);
    let hpp = complexify(&blk.hpp);
    let hpx = crate::linalg::transpose(&hxp);
    let xm = cmatmul(&hxp, m);
    let mx = cmatmul(m, &hpx);
    let mpm = cmatmul(&cmatmul(m, &hpp), m);
    let mut dm = cmzeros();
    for i in 0..D {
        for j in 0..D {
            dm[i][j] = -(Complex::new(blk.hxx[i][j], T::zero()) + xm[i][j] + mx[i][j] + mpm[i][j]);
        }
    }
    let n_val = transport_numerator(&blk, m);
    let rr = n_val / (T::lit(2.0) * blk.h);
    let da = s.a * rr;
    let higher = match &s.higher {
        None => None,
        Some(h) => Some(higher_rates(&blk, &b3, m, h, s.a, rr)),
    };
    Ok(BeamRate { dx: blk.hp, dp: blk.hx.map(|v| -v), dm, da, higher })
}

/// `H_p·H_x + H_p M H_p - c² Tr M`.
fn transport_numerator<T: Real, const D: usize>(blk: &HamBlocks<T, D>, m: &Matrix<C<T>, D>) -> C<T> {
    let mut q = C::<T>::zero();
    for i in 0..D {
        q += Complex::new(blk.hp[i] * blk.hx[i], T::zero());
        for j in 0..D {
            q += m[i][j] * (blk.hp[i] * blk.hp[j]);
        }
    }
    q - ctrace(m) * (blk.c * blk.c)
}

fn higher_rates<T: Real, const D: usize>(
    blk: &HamBlocks<T, D>,
    b3: &HamBlocks3<T, D>,
    m: &Matrix<C<T>, D>,
    h: &HigherOrder<T, D>,
    a: C<T>,
    rr: C<T>,
) -> HigherOrder<T, D> {
    let tt = &h.phi3;
    let re = |v: T| Complex::new(v, T::zero());

    // U[i][a][k] = hxxp[i][k][a] + Σ_c hxpp[i][a][c] M[c][k]  (∂_k of H_{x_i p_a} along the field)
    let mut u: Tensor3<C<T>, D> = ctzeros();
    // W[a][b][k] = hxpp[k][a][b] + Σ_c hppp[a][b][c] M[c][k]  (∂_k of H_{p_a p_b})
    let mut w: Tensor3<C<T>, D> = ctzeros();
    // V[a][k] = hxp[k][a] + Σ_c hpp[a][c] M[c][k]  (∂_k of H_{p_a})
    let mut v: Matrix<C<T>, D> = cmzeros();
    for i in 0..D {
        for aa in 0..D {
            for k in 0..D {
                let mut su = re(b3.hxxp[i][k][aa]);
                let mut sw = re(b3.hxpp[k][i][aa]);
                for c in 0..D {
                    su += m[c][k] * b3.hxpp[i][aa][c];
                    sw += m[c][k] * b3.hppp[i][aa][c];
                }
                u[i][aa][k] = su;
                w[i][aa][k] = sw;
            }
            let mut sv = re(blk.hxp[aa][i]);
            for c in 0..D {
                sv += m[c][aa] * blk.hpp[i][c];
            }
            v[i][aa] = sv;
        }
    }

    let mut dt: Tensor3<C<T>, D> = ctzeros();
    for i in 0..D {
        for j in 0..D {
            for k in 0..D {
                let mut acc = re(b3.hxxx[i][j][k]);
                for c in 0..D {
                    acc += m[c][k] * b3.hxxp[i][j][c];
                }
                for b in 0..D {
                    acc += u[i][b][k] * m[b][j] + tt[b][j][k] * blk.hxp[i][b];
                    acc += u[j][b][k] * m[b][i] + tt[b][i][k] * blk.hxp[j][b];
                    acc += v[b][k] * tt[b][i][j];
                    for aa in 0..D {
                        acc += w[aa][b][k] * m[b][j] * m[aa][i];
                        acc += (tt[b][j][k] * m[aa][i] + m[b][j] * tt[aa][i][k]) * blk.hpp[aa][b];
                    }
                }
                dt[i][j][k] = -acc;
            }
        }
    }
    let dt = symmetrize3(&dt);

    // Gradient of the transport rate R = N / (2H) along the field.
    let two = T::lit(2.0);
    let hval = blk.h;
    let fvec: Vector<C<T>, D> = std::array::from_fn(|aa| {
        let mut s = re(blk.hx[aa]);
        for b in 0..D {
            s += m[b][aa] * blk.hp[b];
        }
        s
    });
    let n_val = transport_numerator(blk, m);
    let trm = ctrace(m);
    let mut grad_r: Vector<C<T>, D> = czeros();
    for i in 0..D {
        let mut dq = C::<T>::zero();
        for aa in 0..D {
            let mut fai = re(blk.hxx[aa][i]);
            for b in 0..D {
                fai += m[b][i] * blk.hxp[aa][b] + m[b][aa] * blk.hxp[i][b] + tt[b][aa][i] * blk.hp[b];
                for c in 0..D {
                    fai += m[b][aa] * m[c][i] * blk.hpp[b][c];
                }
            }
            dq += v[aa][i] * fvec[aa] + fai * blk.hp[aa];
        }
        let mut tr_t = C::<T>::zero();
        for j in 0..D {
            tr_t += tt[j][j][i];
        }
        let dn = dq - trm * (two * blk.c * blk.grad_c[i]) - tr_t * (blk.c * blk.c);
        grad_r[i] = dn / (two * hval) - n_val * fvec[i] / (two * hval * hval);
    }

    let g = &h.grad_a;
    let dg: Vector<C<T>, D> = std::array::from_fn(|i| {
        let mut s = g[i] * rr + a * grad_r[i];
        for j in 0..D {
            s -= v[j][i] * g[j];
        }
        s
    });
    HigherOrder { phi3: dt, grad_a: dg }
}

/// Right-hand side of the beam system.
pub fn beam_rhs<T: Real, const D: usize>(med: &MediumModel, s: &BeamState<T, D>) -> Result<BeamRate<T, D>> {
    let min_eig = s.min_eig_im_m();
    if !(min_eig > 0.0) {
        return Err(Error::LostPositivity { min_eig, t: s.t.val() });
    }
    rates(med, s)
}

/// Second time derivative of the state, obtained by pushing a first-order
/// time jet through the right-hand side.
pub fn second_rate<T: Real, const D: usize>(
    med: &MediumModel,
    s: &BeamState<T, D>,
    ds: &BeamRate<T, D>,
) -> Result<BeamRate<T, D>> {
    let lifted = lift_time(s, ds, None);
    let r = rates(med, &lifted)?;
    Ok(BeamRate {
        dx: r.dx.map(|v| v.d1),
        dp: r.dp.map(|v| v.d1),
        dm: r.dm.map(|row| row.map(|z| Complex::new(z.re.d1, z.im.d1))),
        da: Complex::new(r.da.re.d1, r.da.im.d1),
        higher: r.higher.map(|h| HigherOrder {
            phi3: h.phi3.map(|a| a.map(|b| b.map(|z| Complex::new(z.re.d1, z.im.d1)))),
            grad_a: h.grad_a.map(|z| Complex::new(z.re.d1, z.im.d1)),
        }),
    })
}

/// Embeds a state into time jets with first derivative `ds` and optional second derivative `dds`.
pub fn lift_time<T: Real, const D: usize>(
    s: &BeamState<T, D>,
    ds: &BeamRate<T, D>,
    dds: Option<&BeamRate<T, D>>,
) -> BeamState<Jet<T>, D> {
    let z = T::zero();
    let j = |v: T, d1: T, d2: T| Jet::new(v, d1, d2);
    let cj = |v: C<T>, d1: C<T>, d2: C<T>| Complex::new(j(v.re, d1.re, d2.re), j(v.im, d1.im, d2.im));
    let czero = C::<T>::zero();
    let higher = s.higher.as_ref().map(|h| {
        let dh = ds.higher.as_ref().expect("rate order matches state order");
        let ddh = dds.and_then(|r| r.higher.as_ref());
        HigherOrder {
            phi3: std::array::from_fn(|a| {
                std::array::from_fn(|b| {
                    std::array::from_fn(|c| {
                        cj(h.phi3[a][b][c], dh.phi3[a][b][c], ddh.map_or(czero, |d| d.phi3[a][b][c]))
                    })
                })
            }),
            grad_a: std::array::from_fn(|a| cj(h.grad_a[a], dh.grad_a[a], ddh.map_or(czero, |d| d.grad_a[a]))),
        }
    });
    BeamState {
        t: Jet::variable(s.t),
        x: std::array::from_fn(|i| j(s.x[i], ds.dx[i], dds.map_or(z, |d| d.dx[i]))),
        p: std::array::from_fn(|i| j(s.p[i], ds.dp[i], dds.map_or(z, |d| d.dp[i]))),
        s: Jet::constant(s.s),
        m: std::array::from_fn(|a| {
            std::array::from_fn(|b| cj(s.m[a][b], ds.dm[a][b], dds.map_or(czero, |d| d.dm[a][b])))
        }),
        a: cj(s.a, ds.da, dds.map_or(czero, |d| d.da)),
        higher,
        branch: s.branch,
        x0: s.x0,
    }
}

/// Embeds a state as constant jets (no time dependence).
pub fn lift_constant<T: Real, const D: usize>(s: &BeamState<T, D>) -> BeamState<Jet<T>, D> {
    let cj = |v: C<T>| Complex::new(Jet::constant(v.re), Jet::constant(v.im));
    BeamState {
        t: Jet::constant(s.t),
        x: s.x.map(Jet::constant),
        p: s.p.map(Jet::constant),
        s: Jet::constant(s.s),
        m: s.m.map(|r| r.map(cj)),
        a: cj(s.a),
        higher: s.higher.as_ref().map(|h| HigherOrder {
            phi3: h.phi3.map(|a| a.map(|b| b.map(cj))),
            grad_a: h.grad_a.map(cj),
        }),
        branch: s.branch,
        x0: s.x0,
    }
}

/// Checks the structural invariants of an output state.
pub fn check_invariants<T: Real, const D: usize>(
    med: &MediumModel,
    s: &BeamState<T, D>,
    h0: f64,
    tol: f64,
) -> Result<()> {
    let skew = skew_norm(&s.m);
    if skew > 1e-10 {
        return Err(Error::InvariantViolation(format!("M not symmetric: skew {skew:e} at t = {}", s.t)));
    }
    let min_eig = s.min_eig_im_m();
    if !(min_eig > 0.0) {
        return Err(Error::LostPositivity { min_eig, t: s.t.val() });
    }
    let h = s.hamiltonian(med)?.val();
    let drift = (h - h0).abs();
    if drift > 10.0 * tol * (1.0 + h0.abs()) {
        return Err(Error::InvariantViolation(format!(
            "Hamiltonian drift {drift:e} exceeds 10·tol at t = {}",
            s.t
        )));
    }
    Ok(())
}

/// Integrates one beam and returns the states at the requested output times.
///
/// Output times are visited in the given order starting from `s0.t`, so
/// negative and non-monotone sequences are allowed.
pub fn propagate<const D: usize>(
    med: &MediumModel,
    s0: &BeamState<f64, D>,
    times: &[f64],
    tol: f64,
) -> Result<Vec<BeamState<f64, D>>> {
    let h0 = s0.hamiltonian(med)?;
    // Run the integrator tighter than the requested invariant tolerance so
    // that accumulated drift stays within the 10·tol budget.
    let opts = OdeOptions::with_tol(tol * 0.05);
    let mut cur = *s0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let tmpl = cur;
        let y = integrate(
            |_, y: &[f64]| {
                let st = tmpl.unpack(0.0, y);
                Ok(rates(med, &st)?.pack())
            },
            cur.t,
            &cur.pack(),
            t,
            &opts,
            |y| {
                let mut st = tmpl.unpack(0.0, y);
                st.symmetrize_in_place();
                *y = st.pack();
            },
        )?;
        cur = tmpl.unpack(t, &y);
        cur.symmetrize_in_place();
        check_invariants(med, &cur, h0, tol)?;
        out.push(cur);
    }
    Ok(out)
}

/// Convenience wrapper returning only the final state.
pub fn propagate_to<const D: usize>(
    med: &MediumModel,
    s0: &BeamState<f64, D>,
    t_end: f64,
    tol: f64,
) -> Result<BeamState<f64, D>> {
    Ok(propagate(med, s0, &[t_end], tol)?.remove(0))
}

/// Linearized flow `∂(x, p)/∂(x₀, p₀)` along one ray.
#[derive(Clone, Debug, PartialEq)]
pub struct VariationalFrame {
    /// `n × 2n`, columns ordered `(x₀, p₀)`.
    pub jx: Vec<Vec<f64>>,
    pub jp: Vec<Vec<f64>>,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

impl VariationalFrame {
    /// Determinant of the stacked `2n × 2n` matrix.
    pub fn determinant(&self) -> f64 {
        let mut full = self.jx.clone();
        full.extend(self.jp.iter().cloned());
        crate::linalg::det(&full)
    }

    /// `(C' + D' M₀)(C + D M₀)⁻¹` with `C = ∂x/∂x₀`, `D = ∂x/∂p₀`, `C' = ∂p/∂x₀`, `D' = ∂p/∂p₀`.
    pub fn mobius<const D: usize>(&self, m0: &Matrix<C<f64>, D>) -> Result<Matrix<C<f64>, D>> {
        let blk = |j: &Vec<Vec<f64>>, off: usize| -> Matrix<C<f64>, D> {
            std::array::from_fn(|r| std::array::from_fn(|c| Complex::new(j[r][off + c], 0.0)))
        };
        let (cc, dd, cp, dp) = (blk(&self.jx, 0), blk(&self.jx, D), blk(&self.jp, 0), blk(&self.jp, D));
        let add = |a: &Matrix<C<f64>, D>, b: &Matrix<C<f64>, D>| -> Matrix<C<f64>, D> {
            std::array::from_fn(|r| std::array::from_fn(|c| a[r][c] + b[r][c]))
        };
        let num = add(&cp, &cmatmul(&dp, m0));
        let den = add(&cc, &cmatmul(&dd, m0));
        let inv = cinv(&den).ok_or_else(|| Error::InvariantViolation("singular C + D M0".into()))?;
        Ok(cmatmul(&num, &inv))
    }
}

/// Integrates the ray together with its variational equations.
pub fn propagate_variational<const D: usize>(
    med: &MediumModel,
    x0: Vector<f64, D>,
    p0: Vector<f64, D>,
    b: Branch,
    t_end: f64,
    tol: f64,
) -> Result<VariationalFrame> {
    med.hamiltonian(b, &x0, &p0)?;
    let n2 = 2 * D;
    let mut y0 = Vec::with_capacity(n2 + n2 * n2);
    y0.extend_from_slice(&x0);
    y0.extend_from_slice(&p0);
    for r in 0..n2 {
        for c in 0..n2 {
            y0.push(if r == c { 1.0 } else { 0.0 });
        }
    }
    let rhs = |_: f64, y: &[f64]| -> Result<Vec<f64>> {
        let x: Vector<f64, D> = std::array::from_fn(|i| y[i]);
        let p: Vector<f64, D> = std::array::from_fn(|i| y[D + i]);
        let blk = med.hamiltonian_blocks(b, &x, &p)?;
        // Linearized vector field: [[H_px, H_pp], [-H_xx, -H_xp]].
        let mut a = vec![vec![0.0; n2]; n2];
        for i in 0..D {
            for j in 0..D {
                a[i][j] = blk.hxp[j][i];
                a[i][D + j] = blk.hpp[i][j];
                a[D + i][j] = -blk.hxx[i][j];
                a[D + i][D + j] = -blk.hxp[i][j];
            }
        }
        let mut out = Vec::with_capacity(y.len());
        out.extend_from_slice(&blk.hp);
        out.extend(blk.hx.iter().map(|v| -v));
        let jm = &y[n2..];
        for r in 0..n2 {
            for c in 0..n2 {
                let mut s = 0.0;
                for k in 0..n2 {
                    s += a[r][k] * jm[k * n2 + c];
                }
                out.push(s);
            }
        }
        Ok(out)
    };
    let y = integrate(rhs, 0.0, &y0, t_end, &OdeOptions::with_tol(tol), |_| {})?;
    let jm = &y[n2..];
    let row = |r: usize| (0..n2).map(|c| jm[r * n2 + c]).collect::<Vec<f64>>();
    Ok(VariationalFrame {
        jx: (0..D).map(row).collect(),
        jp: (D..n2).map(row).collect(),
        x: y[..D].to_vec(),
        p: y[D..n2].to_vec(),
    })
}

/// Closed-form free-space Hessian for radial data `S = |x|` with `M₀ = (I - P)/|y| + iβI`.
///
/// Along the `±` ray from `y`, `M(t) = iβP + b₀/(1 ± b₀t) (I - P)` with `b₀ = 1/|y| + iβ`.
pub fn radial_free_space_m<const D: usize>(y: &Vector<f64, D>, beta: f64, t: f64, b: Branch) -> Matrix<C<f64>, D> {
    let r = crate::linalg::norm(y);
    let sg = b.sign::<f64>();
    let b0 = Complex::new(1.0 / r, beta);
    let tr = b0 / (C::<f64>::one() + b0 * (sg * t));
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let pij = y[i] * y[j] / (r * r);
            let id = if i == j { 1.0 } else { 0.0 };
            Complex::new(0.0, beta * pij) + tr * (id - pij)
        })
    })
}

/// Closed-form free-space amplitude for the same data: `A(t) = A₀|y| / (|y| ± t(1 + iβ|y|))`.
pub fn radial_free_space_a(r: f64, beta: f64, t: f64, b: Branch, a0: C<f64>) -> C<f64> {
    let sg = b.sign::<f64>();
    a0 * r / (Complex::new(r, 0.0) + Complex::new(1.0, beta * r) * (sg * t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn radial_phase(y: [f64; 3]) -> PhaseTaylor<f64, 3> {
        let r = crate::linalg::norm(&y);
        let u = y.map(|v| v / r);
        let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        PhaseTaylor {
            s: r,
            grad: u,
            hess: std::array::from_fn(|i| std::array::from_fn(|j| (d(i, j) - u[i] * u[j]) / r)),
            third: std::array::from_fn(|i| {
                std::array::from_fn(|j| {
                    std::array::from_fn(|k| {
                        (3.0 * u[i] * u[j] * u[k] - d(i, j) * u[k] - d(i, k) * u[j] - d(j, k) * u[i]) / (r * r)
                    })
                })
            }),
        }
    }

    fn plane_phase_1d(x0: f64) -> PhaseTaylor<f64, 1> {
        PhaseTaylor { s: x0, grad: [1.0], hess: [[0.0]], third: [[[0.0]]] }
    }

    fn one() -> C<f64> {
        Complex::new(1.0, 0.0)
    }

    #[test]
    fn initial_state_examples() {
        let s = make_initial_state(&plane_phase_1d(0.0), one(), [C::zero()], [0.0], Order::First, 1.0, Branch::Plus, 1e-8)
            .unwrap();
        assert_eq!((s.p[0], s.m[0][0], s.s), (1.0, Complex::new(0.0, 1.0), 0.0));
        let q = PhaseTaylor { s: -0.5, grad: [-1.0], hess: [[-1.0]], third: [[[0.0]]] };
        let s = make_initial_state(&q, one(), [C::zero()], [1.0], Order::First, 1.0, Branch::Plus, 1e-8).unwrap();
        assert_eq!((s.p[0], s.m[0][0]), (-1.0, Complex::new(-1.0, 1.0)));
        let flat = PhaseTaylor { s: 0.0, grad: [0.0], hess: [[1.0]], third: [[[0.0]]] };
        assert!(matches!(
            make_initial_state(&flat, one(), [C::zero()], [0.0], Order::First, 1.0, Branch::Plus, 1e-8),
            Err(Error::ZeroGradientPhase { .. })
        ));
        let y = [0.6, 0.0, 0.8];
        let s = make_initial_state(&radial_phase(y), one(), [C::zero(); 3], y, Order::First, 1.0, Branch::Plus, 1e-8)
            .unwrap();
        let expect = radial_free_space_m(&y, 1.0, 0.0, Branch::Plus);
        for i in 0..3 {
            for j in 0..3 {
                assert!((s.m[i][j] - expect[i][j]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn rhs_examples() {
        let med = MediumModel::constant(1.0);
        let s = make_initial_state(&plane_phase_1d(0.0), one(), [C::zero()], [0.0], Order::First, 1.0, Branch::Plus, 1e-8)
            .unwrap();
        let r = beam_rhs(&med, &s).unwrap();
        assert_eq!(r.dm[0][0], C::zero());
        assert_eq!(r.da, C::zero());
        let sin = MediumModel::sin1d(0.1, 1.0);
        let r = beam_rhs(&sin, &s).unwrap();
        assert!((r.dp[0] + 0.1).abs() < 1e-15);
    }

    #[test]
    fn rhs_rejects_lost_positivity() {
        let med = MediumModel::constant(1.0);
        let mut s = make_initial_state(&plane_phase_1d(0.0), one(), [C::zero()], [0.0], Order::First, 1.0, Branch::Plus, 1e-8)
            .unwrap();
        s.m[0][0].im = -0.1;
        assert!(matches!(beam_rhs(&med, &s), Err(Error::LostPositivity { .. })));
    }

    #[test]
    fn straight_rays_in_free_space() {
        let med = MediumModel::constant(1.0);
        let y = [0.3, -0.4, 1.2];
        let s0 = make_initial_state(&radial_phase(y), one(), [C::zero(); 3], y, Order::First, 1.0, Branch::Minus, 1e-8)
            .unwrap();
        let r = beam_rhs(&med, &s0).unwrap();
        assert_eq!(r.dp, [0.0; 3]);
        let s = propagate_to(&med, &s0, 0.7, 1e-8).unwrap();
        let u = y.map(|v| v / crate::linalg::norm(&y));
        for i in 0..3 {
            assert!((s.x[i] - (y[i] - 0.7 * u[i])).abs() < 1e-10);
        }
    }

    #[test]
    fn radial_closed_forms_unit_radius() {
        let med = MediumModel::constant(1.0);
        let y = [0.0, 0.6, 0.8];
        let s0 = make_initial_state(&radial_phase(y), one(), [C::zero(); 3], y, Order::First, 1.0, Branch::Plus, 1e-8)
            .unwrap();
        let s = propagate_to(&med, &s0, 1.0, 1e-10).unwrap();
        let pm = |i: usize, j: usize| y[i] * y[j];
        let tr = Complex::new(1.0, 1.0) / Complex::new(2.0, 1.0);
        for i in 0..3 {
            for j in 0..3 {
                let id = if i == j { 1.0 } else { 0.0 };
                let expect = Complex::new(0.0, pm(i, j)) + tr * (id - pm(i, j));
                assert!((s.m[i][j] - expect).norm() < 1e-8);
            }
        }
        let a_expect = one() / Complex::new(2.0, 1.0);
        assert!((s.a - a_expect).norm() < 1e-8);
    }

    #[test]
    fn radial_closed_forms_general_radius() {
        let med = MediumModel::constant(1.0);
        for (y, beta, t, b) in [
            ([0.5, 0.0, 0.0], 2.0, 0.4, Branch::Plus),
            ([0.1, 0.2, -0.25], 1.0, 0.9, Branch::Minus),
            ([1.5, -1.0, 0.5], 0.5, 1.3, Branch::Minus),
        ] {
            let s0 = make_initial_state(&radial_phase(y), one(), [C::zero(); 3], y, Order::First, beta, b, 1e-8).unwrap();
            let s = propagate_to(&med, &s0, t, 1e-10).unwrap();
            let m = radial_free_space_m(&y, beta, t, b);
            for i in 0..3 {
                for j in 0..3 {
                    assert!((s.m[i][j] - m[i][j]).norm() < 1e-8);
                }
            }
            let a = radial_free_space_a(crate::linalg::norm(&y), beta, t, b, one());
            assert!((s.a - a).norm() < 1e-8, "{:?} vs {:?}", s.a, a);
        }
    }

    fn sin_beam(order: Order) -> BeamState<f64, 1> {
        // Chirped data S = -x²/2 + 0.3 x³/6 at x0 = 0.8 so all Taylor blocks are active.
        let x0 = 0.8;
        let ph = PhaseTaylor { s: -x0 * x0 / 2.0 + 0.05 * x0.powi(3), grad: [-x0 + 0.15 * x0 * x0], hess: [[-1.0 + 0.3 * x0]], third: [[[0.3]]] };
        make_initial_state(&ph, Complex::new(0.7, 0.2), [Complex::new(-0.3, 0.1)], [x0], order, 1.0, Branch::Plus, 1e-8)
            .unwrap()
    }

    #[test]
    fn riccati_matches_variational_mobius() {
        let med = MediumModel::sin1d(0.1, 1.0);
        let s0 = sin_beam(Order::First);
        for t in [0.5, 1.0, 2.0] {
            let s = propagate_to(&med, &s0, t, 1e-10).unwrap();
            let fr = propagate_variational(&med, s0.x, s0.p, Branch::Plus, t, 1e-11).unwrap();
            let mm = fr.mobius(&s0.m).unwrap();
            assert!((mm[0][0] - s.m[0][0]).norm() < 1e-6);
            assert!((fr.determinant() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn variational_frame_free_space() {
        let med = MediumModel::constant(1.0);
        let fr = propagate_variational(&med, [0.3], [1.0], Branch::Plus, 2.0, 1e-10).unwrap();
        assert!((fr.jx[0][0] - 1.0).abs() < 1e-12 && fr.jx[0][1].abs() < 1e-12);
        assert!(fr.jp[0][0].abs() < 1e-12 && (fr.jp[0][1] - 1.0).abs() < 1e-12);
        let fr2 = propagate_variational(&med, [0.3, 0.1], [0.6, 0.8], Branch::Minus, 1.7, 1e-10).unwrap();
        assert!((fr2.determinant() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn one_dimensional_constant_speed_freezes_hessian_and_amplitude() {
        let med = MediumModel::constant(1.0);
        let s0 = sin_beam(Order::First);
        let s = propagate_to(&med, &s0, 1.5, 1e-8).unwrap();
        assert!((s.m[0][0] - s0.m[0][0]).norm() < 1e-12);
        assert!((s.a - s0.a).norm() < 1e-12);
    }

    #[test]
    fn time_reversal_round_trip() {
        let tol = 1e-8;
        let med = MediumModel::sin1d(0.1, 1.0);
        let s0 = sin_beam(Order::Second);
        let states = propagate(&med, &s0, &[1.5, 0.0], tol).unwrap();
        let back = states[1].pack();
        let init = s0.pack();
        for (a, b) in back.iter().zip(init.iter()) {
            assert!((a - b).abs() < 100.0 * tol);
        }
        let bump = MediumModel::bump(0.2, 0.6, vec![0.1, 0.3]);
        let ph = PhaseTaylor { s: 0.0, grad: [0.8, 0.6], hess: [[0.1, 0.0], [0.0, -0.2]], third: [[[0.0; 2]; 2]; 2] };
        let s2 = make_initial_state(&ph, one(), [C::zero(); 2], [-0.5, -0.2], Order::Second, 1.0, Branch::Minus, 1e-8)
            .unwrap();
        let st = propagate(&bump, &s2, &[-1.0, 0.0], tol).unwrap();
        for (a, b) in st[1].pack().iter().zip(s2.pack().iter()) {
            assert!((a - b).abs() < 100.0 * tol);
        }
    }

    /// For real data (`β = 0`) the beam quantities coincide with derivatives of
    /// the classical field along the ray family: `T = ∂ₓ₀M / ∂ₓ₀x` and
    /// `g = ∂ₓ₀A / ∂ₓ₀x` before caustics.
    #[test]
    fn higher_order_rates_match_ray_family_differences() {
        let med = MediumModel::sin1d(0.15, 1.3);
        let state = |x0: f64| {
            let ph = PhaseTaylor {
                s: 0.4 * x0 + 0.1 * x0 * x0,
                grad: [0.4 + 0.2 * x0],
                hess: [[0.2]],
                third: [[[0.0]]],
            };
            let amp = Complex::new((x0 * 1.1).cos(), 0.3 * x0);
            let damp = Complex::new(-1.1 * (x0 * 1.1).sin(), 0.3);
            make_initial_state(&ph, amp, [damp], [x0], Order::Second, 0.0, Branch::Plus, 1e-8).unwrap()
        };
        let run = |x0: f64| {
            let s0 = state(x0);
            let opts = OdeOptions::with_tol(1e-12);
            let y = integrate(|_, y: &[f64]| Ok(rates(&med, &s0.unpack(0.0, y))?.pack()), 0.0, &s0.pack(), 0.8, &opts, |_| {})
                .unwrap();
            s0.unpack(0.8, &y)
        };
        let (x0, h) = (0.3, 1e-4);
        let c = run(x0);
        let (sp, sm) = (run(x0 + h), run(x0 - h));
        let dx = (sp.x[0] - sm.x[0]) / (2.0 * h);
        let dm = (sp.m[0][0] - sm.m[0][0]) / (2.0 * h);
        let da = (sp.a - sm.a) / (2.0 * h);
        let hi = c.higher.unwrap();
        assert!((hi.phi3[0][0][0] - dm / dx).norm() < 1e-6, "{:?} vs {:?}", hi.phi3[0][0][0], dm / dx);
        assert!((hi.grad_a[0] - da / dx).norm() < 1e-6, "{:?} vs {:?}", hi.grad_a[0], da / dx);
        // The field Hessian is ∂p/∂x along the family.
        let dp = (sp.p[0] - sm.p[0]) / (2.0 * h);
        assert!((c.m[0][0].re - dp / dx).abs() < 1e-6);
    }

    /// Same family check in two dimensions on a variable medium, covering all tensor blocks.
    #[test]
    fn higher_order_rates_match_ray_family_in_2d() {
        let med = MediumModel::bump(0.25, 0.8, vec![0.3, -0.2]);
        let phase = |x: [f64; 2]| -> PhaseTaylor<f64, 2> {
            // S = 0.9 x₁ + 0.2 x₂ + 0.1 x₁² - 0.05 x₁x₂ + 0.02 x₂³
            PhaseTaylor {
                s: 0.9 * x[0] + 0.2 * x[1] + 0.1 * x[0] * x[0] - 0.05 * x[0] * x[1] + 0.02 * x[1].powi(3),
                grad: [0.9 + 0.2 * x[0] - 0.05 * x[1], 0.2 - 0.05 * x[0] + 0.06 * x[1] * x[1]],
                hess: [[0.2, -0.05], [-0.05, 0.12 * x[1]]],
                third: {
                    let mut t = [[[0.0; 2]; 2]; 2];
                    t[1][1][1] = 0.12;
                    t
                },
            }
        };
        let amp = |x: [f64; 2]| Complex::new(1.0 + 0.3 * x[0] * x[1], 0.2 * x[0]);
        let gamp = |x: [f64; 2]| [Complex::new(0.3 * x[1], 0.2), Complex::new(0.3 * x[0], 0.0)];
        let t_end = 0.6;
        let run = |x0: [f64; 2]| {
            let s0 = make_initial_state(&phase(x0), amp(x0), gamp(x0), x0, Order::Second, 0.0, Branch::Minus, 1e-8)
                .unwrap();
            let opts = OdeOptions::with_tol(1e-12);
            let y = integrate(|_, y: &[f64]| Ok(rates(&med, &s0.unpack(0.0, y))?.pack()), 0.0, &s0.pack(), t_end, &opts, |_| {})
                .unwrap();
            s0.unpack(t_end, &y)
        };
        let x0 = [0.1, 0.25];
        let h = 1e-4;
        let c = run(x0);
        // Jacobian ∂x/∂x₀ and derivatives of M, A along x₀.
        let mut jx = [[0.0; 2]; 2];
        let mut dm = [[[C::zero(); 2]; 2]; 2];
        let mut da = [C::zero(); 2];
        for l in 0..2 {
            let (mut a, mut b) = (x0, x0);
            a[l] += h;
            b[l] -= h;
            let (sa, sb) = (run(a), run(b));
            for i in 0..2 {
                jx[i][l] = (sa.x[i] - sb.x[i]) / (2.0 * h);
                for j in 0..2 {
                    dm[i][j][l] = (sa.m[i][j] - sb.m[i][j]) / (2.0 * h);
                }
            }
            da[l] = (sa.a - sb.a) / (2.0 * h);
        }
        let det = jx[0][0] * jx[1][1] - jx[0][1] * jx[1][0];
        let inv = [[jx[1][1] / det, -jx[0][1] / det], [-jx[1][0] / det, jx[0][0] / det]];
        let hi = c.higher.unwrap();
        for k in 0..2 {
            // ∂/∂y_k = Σ_l ∂/∂x0_l · (∂x0_l/∂y_k)
            let g: C<f64> = (0..2).map(|l| da[l] * inv[l][k]).sum();
            assert!((hi.grad_a[k] - g).norm() < 1e-6, "g[{k}]: {:?} vs {:?}", hi.grad_a[k], g);
            for i in 0..2 {
                for j in 0..2 {
                    let t: C<f64> = (0..2).map(|l| dm[i][j][l] * inv[l][k]).sum();
                    assert!((hi.phi3[i][j][k] - t).norm() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn second_rate_matches_difference_of_rates() {
        let med = MediumModel::sin1d(0.1, 1.0);
        let s = sin_beam(Order::Second);
        let r = rates(&med, &s).unwrap();
        let rr = second_rate(&med, &s, &r).unwrap();
        let h = 1e-5;
        let step = |sg: f64| {
            let y: Vec<f64> = s.pack().iter().zip(r.pack()).map(|(a, b)| a + sg * h * b).collect();
            rates(&med, &s.unpack(0.0, &y)).unwrap().pack()
        };
        let (fp, fm) = (step(1.0), step(-1.0));
        for ((a, b), c) in fp.iter().zip(fm.iter()).zip(rr.pack()) {
            assert!(((a - b) / (2.0 * h) - c).abs() < 1e-7);
        }
    }

    proptest! {
        #[test]
        fn symmetry_and_positivity_preserved(
            x1 in -1.0f64..1.0, x2 in -1.0f64..1.0, th in 0.0f64..6.28, beta in 0.3f64..3.0, m01 in -0.5f64..0.5
        ) {
            let med = MediumModel::bump(0.3, 0.5, vec![0.0, 0.0]);
            let ph = PhaseTaylor { s: 0.0, grad: [th.cos(), th.sin()], hess: [[0.2, m01], [m01, -0.3]], third: [[[0.0; 2]; 2]; 2] };
            let s0 = make_initial_state(&ph, Complex::new(1.0, 0.0), [C::zero(); 2], [x1, x2], Order::First, beta, Branch::Plus, 1e-8).unwrap();
            let tol = 1e-8;
            let out = propagate(&med, &s0, &[0.5, 1.0, 2.0, -1.0], tol).unwrap();
            let h0 = s0.hamiltonian(&med).unwrap();
            for s in out {
                prop_assert!(skew_norm(&s.m) < 1e-10);
                prop_assert!(s.min_eig_im_m() > 0.0);
                prop_assert!((s.hamiltonian(&med).unwrap() - h0).abs() <= 10.0 * tol * (1.0 + h0.abs()));
                prop_assert_eq!(s.s, s0.s);
            }
        }
    }
}
