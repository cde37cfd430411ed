//! Oscillatory initial data `u(0) = A e^{iS/ε}`, `u_t(0) = ε⁻¹ B e^{iS/ε}`.
//!
//! Amplitudes are built from the compact bump `χ(s) = exp(1 - 1/(1 - s²))`
//! for `|s| < 1` (and `0` otherwise), which has `χ(0) = 1`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::beam::PhaseTaylor;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Vector, C};
use crate::medium::{Branch, MediumModel};
use crate::scalar::{cexp, Jet, Real};

/// Smooth compactly supported bump on `(-1, 1)`.
pub fn bump<T: Real>(s: T) -> T {
    let one = T::one();
    if s.abs() >= one {
        return T::zero();
    }
    (one - one / (one - s * s)).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseProfile {
    /// `S = x₁`.
    Linear,
    /// `S = -|x|²/2`.
    Focusing,
    /// `S = |x|`.
    Radial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeProfile {
    /// `χ(|x - center| / half_width)`.
    Ball { center: Vec<f64>, half_width: f64 },
    /// `χ((|x| - r0) / half_width)`.
    Shell { r0: f64, half_width: f64 },
    /// `χ((|x| - r0) / half_width) / |x|`.
    ShellOverR { r0: f64, half_width: f64 },
}

/// Leading-order velocity data `B⁽⁻¹⁾`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityData {
    /// `B⁽⁻¹⁾ = 0`: both branches carry half of the amplitude.
    Zero,
    /// `B⁽⁻¹⁾ = ∓ i c|∇S| A⁽⁰⁾`: only the given branch is excited.
    OneBranch(Branch),
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitialData<const D: usize> {
    pub name: String,
    pub phase: PhaseProfile,
    pub amplitude: AmplitudeProfile,
    pub velocity: VelocityData,
    pub support_box: (Vector<f64, D>, Vector<f64, D>),
}

impl<const D: usize> InitialData<D> {
    pub fn new(name: &str, phase: PhaseProfile, amplitude: AmplitudeProfile, velocity: VelocityData) -> Result<Self> {
        let support_box = match &amplitude {
            AmplitudeProfile::Ball { center, half_width } => {
                if center.len() != D {
                    return Err(Error::DimensionMismatch { expected: D, found: center.len() });
                }
                (std::array::from_fn(|i| center[i] - half_width), std::array::from_fn(|i| center[i] + half_width))
            }
            AmplitudeProfile::Shell { r0, half_width } | AmplitudeProfile::ShellOverR { r0, half_width } => {
                if *half_width >= *r0 && matches!(amplitude, AmplitudeProfile::ShellOverR { .. }) {
                    return Err(Error::Config("shell_over_r amplitude needs half_width < r0".into()));
                }
                let r = r0 + half_width;
                ([-r; D], [r; D])
            }
        };
        let d = InitialData { name: name.to_string(), phase, amplitude, velocity, support_box };
        d.validate()?;
        Ok(d)
    }

    /// Phase value and derivatives through third order.
    pub fn phase_taylor<T: Real>(&self, x: &Vector<T, D>) -> PhaseTaylor<T, D> {
        let z = T::zero();
        let mut out = PhaseTaylor { s: z, grad: [z; D], hess: [[z; D]; D], third: [[[z; D]; D]; D] };
        match self.phase {
            PhaseProfile::Linear => {
                out.s = x[0];
                out.grad[0] = T::one();
            }
            PhaseProfile::Focusing => {
                out.s = -dot(x, x) * T::lit(0.5);
                for i in 0..D {
                    out.grad[i] = -x[i];
                    out.hess[i][i] = -T::one();
                }
            }
            PhaseProfile::Radial => {
                let r = norm(x);
                let u: Vector<T, D> = std::array::from_fn(|i| x[i] / r);
                let d = |i: usize, j: usize| if i == j { T::one() } else { T::zero() };
                out.s = r;
                for i in 0..D {
                    out.grad[i] = u[i];
                    for j in 0..D {
                        out.hess[i][j] = (d(i, j) - u[i] * u[j]) / r;
                        for k in 0..D {
                            out.third[i][j][k] = (T::lit(3.0) * u[i] * u[j] * u[k]
                                - d(i, j) * u[k]
                                - d(i, k) * u[j]
                                - d(j, k) * u[i])
                                / (r * r);
                        }
                    }
                }
            }
        }
        out
    }

    /// `A⁽⁰⁾_in(x)` (real valued for all shipped profiles).
    pub fn a0<T: Real>(&self, x: &Vector<T, D>) -> T {
        match &self.amplitude {
            AmplitudeProfile::Ball { center, half_width } => {
                let d: Vector<T, D> = std::array::from_fn(|i| x[i] - T::lit(center[i]));
                let r2 = dot(&d, &d);
                let hw2 = T::lit(half_width * half_width);
                if r2 >= hw2 {
                    T::zero()
                } else {
                    // χ written in r² so derivatives stay finite at the centre.
                    let one = T::one();
                    (one - one / (one - r2 / hw2)).exp()
                }
            }
            AmplitudeProfile::Shell { r0, half_width } => bump((norm(x) - T::lit(*r0)) / T::lit(*half_width)),
            AmplitudeProfile::ShellOverR { r0, half_width } => {
                let r = norm(x);
                let v = bump((r - T::lit(*r0)) / T::lit(*half_width));
                if v == T::zero() {
                    v
                } else {
                    v / r
                }
            }
        }
    }

    /// `B⁽⁻¹⁾_in(x)`.
    pub fn b_m1<T: Real>(&self, med: &MediumModel, x: &Vector<T, D>) -> Result<C<T>> {
        match self.velocity {
            VelocityData::Zero => Ok(C::new(T::zero(), T::zero())),
            VelocityData::OneBranch(b) => {
                let a = self.a0(x);
                if a == T::zero() {
                    return Ok(C::new(T::zero(), T::zero()));
                }
                let c = med.speed(x)?;
                let np = norm(&self.phase_taylor(x).grad);
                // -i s c|∇S| A
                Ok(C::new(T::zero(), -b.sign::<T>() * c * np * a))
            }
        }
    }

    /// Exact initial field `(u, u_t)` at `x`.
    pub fn initial_field<T: Real>(&self, med: &MediumModel, eps: f64, x: &Vector<T, D>) -> Result<(C<T>, C<T>)> {
        let a = self.a0(x);
        let s = self.phase_taylor(x).s;
        let e = cexp(C::new(T::zero(), s / T::lit(eps)));
        let b = self.b_m1(med, x)?;
        Ok((e * a, e * b / T::lit(eps)))
    }

    fn validate(&self) -> Result<()> {
        // ∇S must stay away from zero where the amplitude lives; amplitudes must vanish on the box boundary.
        let (lo, hi) = self.support_box;
        let n = 41usize;
        let total = n.pow(D as u32);
        for idx in 0..total {
            let mut k = idx;
            let mut on_boundary = false;
            let x: Vector<f64, D> = std::array::from_fn(|i| {
                let j = k % n;
                k /= n;
                if j == 0 || j == n - 1 {
                    on_boundary = true;
                }
                lo[i] + (hi[i] - lo[i]) * j as f64 / (n - 1) as f64
            });
            let a = self.a0(&x);
            if on_boundary && a.abs() > 1e-12 {
                return Err(Error::Config(format!("amplitude of `{}` does not vanish on the support box", self.name)));
            }
            if a != 0.0 && norm(&self.phase_taylor(&x).grad) < 1e-6 {
                return Err(Error::ZeroGradientPhase { x0: x.to_vec() });
            }
        }
        Ok(())
    }
}

/// `A± = ½(A⁽⁰⁾ ± i B⁽⁻¹⁾ / (c|∇S|))` at `x0`.
pub fn split_initial_amplitudes<T: Real, const D: usize>(
    d: &InitialData<D>,
    m: &MediumModel,
    x0: &Vector<T, D>,
) -> Result<(C<T>, C<T>)> {
    let a = d.a0(x0);
    let b = d.b_m1(m, x0)?;
    let zero = C::new(T::zero(), T::zero());
    if a == T::zero() && b == zero {
        return Ok((zero, zero));
    }
    let np = norm(&d.phase_taylor(x0).grad);
    if !(np.val() >= m.p_min) {
        return Err(Error::ZeroGradientPhase { x0: x0.iter().map(|v| v.val()).collect() });
    }
    let c = m.speed(x0)?;
    let ib = C::new(-b.im, b.re) / (c * np);
    let half = T::lit(0.5);
    let ac = C::new(a, T::zero());
    Ok(((ac + ib) * half, (ac - ib) * half))
}

/// Gradients of `A±` at `x0`, one forward jet per axis.
pub fn split_amplitude_gradients<const D: usize>(
    d: &InitialData<D>,
    m: &MediumModel,
    x0: &Vector<f64, D>,
) -> Result<(Vector<C<f64>, D>, Vector<C<f64>, D>)> {
    let mut gp = [Complex::new(0.0, 0.0); D];
    let mut gm = gp;
    for i in 0..D {
        let xj: Vector<Jet<f64>, D> =
            std::array::from_fn(|k| if k == i { Jet::variable(x0[k]) } else { Jet::constant(x0[k]) });
        let (ap, am) = split_initial_amplitudes(d, m, &xj)?;
        gp[i] = Complex::new(ap.re.d1, ap.im.d1);
        gm[i] = Complex::new(am.re.d1, am.im.d1);
    }
    Ok((gp, gm))
}

/// Named initial-data presets and their spatial dimension.
pub fn preset_dimension(name: &str) -> Result<usize> {
    match name {
        "plane1d" | "chirp1d" => Ok(1),
        "focus2d" => Ok(2),
        "radial3d" => Ok(3),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

/// Optional overrides for preset amplitudes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetParams {
    /// Shell radius or ball center offset along the first axis.
    #[serde(default)]
    pub r0: Option<f64>,
    #[serde(default)]
    pub half_width: Option<f64>,
    #[serde(default)]
    pub velocity: Option<VelocityData>,
}

/// Builds a preset.
///
/// * `plane1d`: `S = x`, `A = χ(x / 1)` on `[-1, 1]`.
/// * `chirp1d`: `S = -x²/2`, `A = χ((|x| - 1)/0.45)`, supported on `0.55 ≤ |x| ≤ 1.45`;
///   rays of the `+` branch cross at times in `(0.55, 1.45)` for `c ≡ 1`.
/// * `focus2d`: `S = -|x|²/2`, `A = χ((|x| - 1)/0.45)` (an annulus focusing at the origin).
/// * `radial3d`: `S = |x|`, `A = f(|x|)/|x|` with `f(r) = χ((r - 0.5)/0.2)` on `[0.3, 0.7]`.
pub fn preset_initial_data<const D: usize>(name: &str, params: &PresetParams) -> Result<InitialData<D>> {
    let dim = preset_dimension(name)?;
    if dim != D {
        return Err(Error::DimensionMismatch { expected: dim, found: D });
    }
    let velocity = params.velocity.unwrap_or(VelocityData::Zero);
    let (phase, amplitude) = match name {
        "plane1d" => (
            PhaseProfile::Linear,
            AmplitudeProfile::Ball { center: vec![params.r0.unwrap_or(0.0); D], half_width: params.half_width.unwrap_or(1.0) },
        ),
        "chirp1d" | "focus2d" => (
            PhaseProfile::Focusing,
            AmplitudeProfile::Shell { r0: params.r0.unwrap_or(1.0), half_width: params.half_width.unwrap_or(0.45) },
        ),
        _ => (
            PhaseProfile::Radial,
            AmplitudeProfile::ShellOverR { r0: params.r0.unwrap_or(0.5), half_width: params.half_width.unwrap_or(0.2) },
        ),
    };
    if let Some(hw) = params.half_width {
        if !(hw > 0.0) {
            return Err(Error::Config("half_width must be positive".into()));
        }
    }
    InitialData::new(name, phase, amplitude, velocity)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> MediumModel {
        MediumModel::constant(1.0)
    }

    #[test]
    fn split_examples() {
        let plane = preset_initial_data::<1>("plane1d", &PresetParams::default()).unwrap();
        let (ap, am) = split_initial_amplitudes(&plane, &unit(), &[0.0]).unwrap();
        assert!((ap - Complex::new(0.5, 0.0)).norm() < 1e-15 && (am - Complex::new(0.5, 0.0)).norm() < 1e-15);

        let one = preset_initial_data::<1>(
            "plane1d",
            &PresetParams { velocity: Some(VelocityData::OneBranch(Branch::Plus)), ..Default::default() },
        )
        .unwrap();
        let (ap, am) = split_initial_amplitudes(&one, &MediumModel::constant(2.0), &[0.3]).unwrap();
        assert!((ap.re - one.a0(&[0.3])).abs() < 1e-15 && ap.im.abs() < 1e-15);
        assert!(am.norm() < 1e-15);
    }

    #[test]
    fn split_direct_formula() {
        // A = 1, B = 1, c = 1, |∇S| = 1 → (½(1 + i), ½(1 - i))
        let a = C::new(1.0_f64, 0.0);
        let b = C::new(1.0_f64, 0.0);
        let ib = C::new(-b.im, b.re);
        assert_eq!(((a + ib) * 0.5, (a - ib) * 0.5), (C::new(0.5, 0.5), C::new(0.5, -0.5)));
    }

    #[test]
    fn presets_have_expected_phases() {
        let p = preset_initial_data::<1>("plane1d", &PresetParams::default()).unwrap();
        assert_eq!(p.phase_taylor(&[0.37]).grad, [1.0]);
        let c = preset_initial_data::<1>("chirp1d", &PresetParams::default()).unwrap();
        let t = c.phase_taylor(&[0.8]);
        assert!((t.s + 0.32).abs() < 1e-15 && t.grad[0] == -0.8 && t.hess[0][0] == -1.0);
        assert_eq!(c.a0(&[0.0]), 0.0);
        assert_eq!(c.a0(&[1.0]), 1.0);
        let r = preset_initial_data::<3>("radial3d", &PresetParams::default()).unwrap();
        assert!((r.a0(&[0.5, 0.0, 0.0]) - 2.0).abs() < 1e-15);
        assert!(matches!(preset_initial_data::<1>("nope", &PresetParams::default()), Err(Error::UnknownPreset(_))));
        assert!(matches!(preset_initial_data::<2>("chirp1d", &PresetParams::default()), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn chirp_rays_focus_inside_window() {
        // Plus branch: x(t) = x0 - t sign(x0) reaches the origin at t = |x0|.
        let c = preset_initial_data::<1>("chirp1d", &PresetParams::default()).unwrap();
        let (lo, hi) = c.support_box;
        assert!((lo[0] + 1.45).abs() < 1e-15 && (hi[0] - 1.45).abs() < 1e-15);
        for x0 in [0.56, 1.0, 1.44] {
            let p: f64 = c.phase_taylor(&[x0]).grad[0];
            assert!(p < 0.0 && (x0 + p.signum() * x0).abs() < 1e-15);
        }
    }

    #[test]
    fn radial_matches_exact_initial_data() {
        let r = preset_initial_data::<3>("radial3d", &PresetParams::default()).unwrap();
        let eps = 0.02;
        let x = [0.1, 0.3, -0.35];
        let rr = norm(&x);
        let (u, ut) = r.initial_field(&unit(), eps, &x).unwrap();
        let f = bump((rr - 0.5) / 0.2);
        assert!((u - Complex::new(0.0, rr / eps).exp() * (f / rr)).norm() < 1e-13);
        assert_eq!(ut, Complex::new(0.0, 0.0));
    }

    #[test]
    fn amplitude_gradients_match_differences() {
        let d = preset_initial_data::<2>(
            "focus2d",
            &PresetParams { velocity: Some(VelocityData::OneBranch(Branch::Minus)), ..Default::default() },
        )
        .unwrap();
        let med = MediumModel::bump(0.2, 0.5, vec![0.3, 0.0]);
        let x = [0.7, 0.5];
        let (gp, gm) = split_amplitude_gradients(&d, &med, &x).unwrap();
        let h = 1e-6;
        for i in 0..2 {
            let (mut a, mut b) = (x, x);
            a[i] += h;
            b[i] -= h;
            let (pa, ma) = split_initial_amplitudes(&d, &med, &a).unwrap();
            let (pb, mb) = split_initial_amplitudes(&d, &med, &b).unwrap();
            assert!(((pa - pb) / (2.0 * h) - gp[i]).norm() < 1e-7);
            assert!(((ma - mb) / (2.0 * h) - gm[i]).norm() < 1e-7);
        }
    }
}
