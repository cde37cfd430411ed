//! Sound-speed models and the Hamiltonians `H = ±c(x)|p|`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, mzeros, norm, Matrix, Tensor3, Vector};
use crate::scalar::Real;

pub const DEFAULT_P_MIN: f64 = 1e-8;

fn default_p_min() -> f64 {
    DEFAULT_P_MIN
}

/// Analytic sound-speed profile.
#[derive(Clone, Debug, PartialEq)]
pub enum MediumKind {
    /// `c ≡ c0`.
    Constant { c0: f64 },
    /// `c = 1 + a sin(k x₁)`.
    Sin1d { amplitude: f64, wavenumber: f64 },
    /// `c = 1 + a exp(-|x - x_c|² / (2 w²))`.
    Bump { amplitude: f64, width: f64, center: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMedium", into = "RawMedium")]
pub struct MediumModel {
    pub kind: MediumKind,
    pub p_min: f64,
}

/// Flat JSON form: `{"kind": "sin1d", "amplitude": 0.1, "wavenumber": 1.0}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMedium {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    c0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wavenumber: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    center: Option<Vec<f64>>,
    #[serde(default = "default_p_min")]
    p_min: f64,
}

impl TryFrom<RawMedium> for MediumModel {
    type Error = String;

    fn try_from(r: RawMedium) -> std::result::Result<Self, String> {
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| format!("medium `{}` requires `{name}`", r.kind));
        let present = [
            ("c0", r.c0.is_some()),
            ("amplitude", r.amplitude.is_some()),
            ("wavenumber", r.wavenumber.is_some()),
            ("width", r.width.is_some()),
            ("center", r.center.is_some()),
        ];
        let (kind, allowed): (MediumKind, &[&str]) = match r.kind.as_str() {
            "constant" => (MediumKind::Constant { c0: need(r.c0, "c0")? }, &["c0"]),
            "sin1d" => (
                MediumKind::Sin1d { amplitude: need(r.amplitude, "amplitude")?, wavenumber: need(r.wavenumber, "wavenumber")? },
                &["amplitude", "wavenumber"],
            ),
            "bump" => (
                MediumKind::Bump {
                    amplitude: need(r.amplitude, "amplitude")?,
                    width: need(r.width, "width")?,
                    center: r.center.clone().ok_or("medium `bump` requires `center`")?,
                },
                &["amplitude", "width", "center"],
            ),
            other => return Err(format!("unknown medium kind `{other}` (expected constant, sin1d or bump)")),
        };
        if let Some((name, _)) = present.iter().find(|(n, p)| *p && !allowed.contains(n)) {
            return Err(format!("key `{name}` is not valid for medium `{}`", r.kind));
        }
        Ok(MediumModel { kind, p_min: r.p_min })
    }
}

impl From<MediumModel> for RawMedium {
    fn from(m: MediumModel) -> Self {
        let mut r = RawMedium {
            kind: String::new(),
            c0: None,
            amplitude: None,
            wavenumber: None,
            width: None,
            center: None,
            p_min: m.p_min,
        };
        match m.kind {
            MediumKind::Constant { c0 } => {
                r.kind = "constant".into();
                r.c0 = Some(c0);
            }
            MediumKind::Sin1d { amplitude, wavenumber } => {
                r.kind = "sin1d".into();
                r.amplitude = Some(amplitude);
                r.wavenumber = Some(wavenumber);
            }
            MediumKind::Bump { amplitude, width, center } => {
                r.kind = "bump".into();
                r.amplitude = Some(amplitude);
                r.width = Some(width);
                r.center = Some(center);
            }
        }
        r
    }
}

impl MediumModel {
    pub fn new(kind: MediumKind) -> Self {
        MediumModel { kind, p_min: DEFAULT_P_MIN }
    }

    pub fn constant(c0: f64) -> Self {
        Self::new(MediumKind::Constant { c0 })
    }

    pub fn sin1d(amplitude: f64, wavenumber: f64) -> Self {
        Self::new(MediumKind::Sin1d { amplitude, wavenumber })
    }

    pub fn bump(amplitude: f64, width: f64, center: Vec<f64>) -> Self {
        Self::new(MediumKind::Bump { amplitude, width, center })
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, MediumKind::Constant { .. })
    }

    /// Checks parameters for the requested dimension.
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.p_min > 0.0) {
            return Err(Error::Config("medium.p_min must be positive".into()));
        }
        match &self.kind {
            MediumKind::Constant { c0 } if !(*c0 > 0.0) => {
                Err(Error::Config(format!("constant medium needs c0 > 0, got {c0}")))
            }
            MediumKind::Sin1d { amplitude, wavenumber } if !(amplitude.abs() < 1.0) || !wavenumber.is_finite() => {
                Err(Error::Config("sin1d medium needs |amplitude| < 1 and a finite wavenumber".into()))
            }
            MediumKind::Bump { amplitude, width, center } => {
                if center.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: center.len() });
                }
                if !(*width > 0.0) || !(*amplitude > -1.0) {
                    return Err(Error::Config("bump medium needs width > 0 and amplitude > -1".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Upper bound of `c` over all space.
    pub fn c_max(&self) -> f64 {
        match &self.kind {
            MediumKind::Constant { c0 } => *c0,
            MediumKind::Sin1d { amplitude, .. } => 1.0 + amplitude.abs(),
            MediumKind::Bump { amplitude, .. } => 1.0 + amplitude.max(0.0),
        }
    }

    /// Speed and its derivatives up to third order.
    pub fn eval_speed3<T: Real, const D: usize>(&self, x: &Vector<T, D>) -> Result<SpeedJet<T, D>> {
        let mut out = SpeedJet {
            c: T::one(),
            grad: [T::zero(); D],
            hess: mzeros(),
            third: [[[T::zero(); D]; D]; D],
        };
        match &self.kind {
            MediumKind::Constant { c0 } => out.c = T::lit(*c0),
            MediumKind::Sin1d { amplitude, wavenumber } => {
                let a = T::lit(*amplitude);
                let k = T::lit(*wavenumber);
                let (s, co) = ((k * x[0]).sin(), (k * x[0]).cos());
                out.c = T::one() + a * s;
                out.grad[0] = a * k * co;
                out.hess[0][0] = -a * k * k * s;
                out.third[0][0][0] = -a * k * k * k * co;
            }
            MediumKind::Bump { amplitude, width, center } => {
                if center.len() != D {
                    return Err(Error::DimensionMismatch { expected: D, found: center.len() });
                }
                let a = T::lit(*amplitude);
                let inv_w2 = T::lit(1.0 / (width * width));
                let d: Vector<T, D> = std::array::from_fn(|i| x[i] - T::lit(center[i]));
                let q: Vector<T, D> = std::array::from_fn(|i| d[i] * inv_w2);
                let g = a * (-(dot(&d, &d) * inv_w2) * T::lit(0.5)).exp();
                out.c = T::one() + g;
                for i in 0..D {
                    out.grad[i] = -q[i] * g;
                    for j in 0..D {
                        let dij = if i == j { inv_w2 } else { T::zero() };
                        out.hess[i][j] = (q[i] * q[j] - dij) * g;
                        for k in 0..D {
                            let mut s = -q[i] * q[j] * q[k];
                            if i == j {
                                s += q[k] * inv_w2;
                            }
                            if i == k {
                                s += q[j] * inv_w2;
                            }
                            if j == k {
                                s += q[i] * inv_w2;
                            }
                            out.third[i][j][k] = s * g;
                        }
                    }
                }
            }
        }
        if !(out.c > T::zero()) {
            return Err(Error::NonPositiveSpeed { c: out.c.val(), x: x.iter().map(|v| v.val()).collect() });
        }
        Ok(out)
    }

    /// `(c, ∇c, ∇²c)` at `x`.
    pub fn eval_speed<T: Real, const D: usize>(
        &self,
        x: &Vector<T, D>,
    ) -> Result<(T, Vector<T, D>, Matrix<T, D>)> {
        let s = self.eval_speed3(x)?;
        Ok((s.c, s.grad, s.hess))
    }

    pub fn speed<T: Real, const D: usize>(&self, x: &Vector<T, D>) -> Result<T> {
        Ok(self.eval_speed3(x)?.c)
    }

    fn check_momentum<T: Real, const D: usize>(&self, p: &Vector<T, D>) -> Result<T> {
        let np = norm(p);
        if !(np.val() >= self.p_min) {
            return Err(Error::MomentumUnderflow { norm: np.val(), p_min: self.p_min });
        }
        Ok(np)
    }

    /// `H(x, p) = sign · c(x)|p|`.
    pub fn hamiltonian<T: Real, const D: usize>(
        &self,
        b: Branch,
        x: &Vector<T, D>,
        p: &Vector<T, D>,
    ) -> Result<T> {
        let np = self.check_momentum(p)?;
        Ok(b.sign::<T>() * self.speed(x)? * np)
    }

    /// First and second derivative blocks of `H`.
    pub fn hamiltonian_blocks<T: Real, const D: usize>(
        &self,
        b: Branch,
        x: &Vector<T, D>,
        p: &Vector<T, D>,
    ) -> Result<HamBlocks<T, D>> {
        Ok(self.hamiltonian_blocks3(b, x, p)?.0)
    }

    /// First, second and third derivative blocks of `H`.
    pub fn hamiltonian_blocks3<T: Real, const D: usize>(
        &self,
        b: Branch,
        x: &Vector<T, D>,
        p: &Vector<T, D>,
    ) -> Result<(HamBlocks<T, D>, HamBlocks3<T, D>)> {
        let np = self.check_momentum(p)?;
        let sp = self.eval_speed3(x)?;
        let s = b.sign::<T>();
        let ph: Vector<T, D> = std::array::from_fn(|i| p[i] / np);
        let inv = T::one() / np;
        let delta = |i: usize, j: usize| if i == j { T::one() } else { T::zero() };

        let mut blk = HamBlocks {
            h: s * sp.c * np,
            c: sp.c,
            grad_c: sp.grad,
            hess_c: sp.hess,
            hx: [T::zero(); D],
            hp: [T::zero(); D],
            hxx: mzeros(),
            hxp: mzeros(),
            hpp: mzeros(),
        };
        let mut b3 = HamBlocks3 {
            hxxx: [[[T::zero(); D]; D]; D],
            hxxp: [[[T::zero(); D]; D]; D],
            hxpp: [[[T::zero(); D]; D]; D],
            hppp: [[[T::zero(); D]; D]; D],
        };
        let three = T::lit(3.0);
        for i in 0..D {
            blk.hx[i] = s * np * sp.grad[i];
            blk.hp[i] = s * sp.c * ph[i];
            for j in 0..D {
                blk.hxx[i][j] = s * np * sp.hess[i][j];
                blk.hxp[i][j] = s * sp.grad[i] * ph[j];
                blk.hpp[i][j] = s * sp.c * (delta(i, j) - ph[i] * ph[j]) * inv;
                for k in 0..D {
                    b3.hxxx[i][j][k] = s * np * sp.third[i][j][k];
                    b3.hxxp[i][j][k] = s * sp.hess[i][j] * ph[k];
                    b3.hxpp[i][j][k] = s * sp.grad[i] * (delta(j, k) - ph[j] * ph[k]) * inv;
                    b3.hppp[i][j][k] = s * sp.c * inv * inv
                        * (three * ph[i] * ph[j] * ph[k]
                            - delta(i, j) * ph[k]
                            - delta(i, k) * ph[j]
                            - delta(j, k) * ph[i]);
                }
            }
        }
        Ok((blk, b3))
    }
}

/// `c` with derivatives through third order.
#[derive(Clone, Copy, Debug)]
pub struct SpeedJet<T, const D: usize> {
    pub c: T,
    pub grad: Vector<T, D>,
    pub hess: Matrix<T, D>,
    pub third: Tensor3<T, D>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub const BOTH: [Branch; 2] = [Branch::Plus, Branch::Minus];

    #[inline]
    pub fn sign<T: Real>(self) -> T {
        match self {
            Branch::Plus => T::one(),
            Branch::Minus => -T::one(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Branch::Plus => "plus",
            Branch::Minus => "minus",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseSpacePoint<T, const D: usize> {
    pub x: Vector<T, D>,
    pub p: Vector<T, D>,
}

/// `H` together with its first and second derivative blocks; also carries `c`, `∇c`, `∇²c`.
#[derive(Clone, Copy, Debug)]
pub struct HamBlocks<T, const D: usize> {
    pub h: T,
    pub c: T,
    pub grad_c: Vector<T, D>,
    pub hess_c: Matrix<T, D>,
    pub hx: Vector<T, D>,
    pub hp: Vector<T, D>,
    pub hxx: Matrix<T, D>,
    /// `hxp[i][j] = ∂²H/∂x_i∂p_j`.
    pub hxp: Matrix<T, D>,
    pub hpp: Matrix<T, D>,
}

/// Third derivative blocks of `H`; index order is x-indices first, then p-indices.
#[derive(Clone, Copy, Debug)]
pub struct HamBlocks3<T, const D: usize> {
    pub hxxx: Tensor3<T, D>,
    pub hxxp: Tensor3<T, D>,
    pub hxpp: Tensor3<T, D>,
    pub hppp: Tensor3<T, D>,
}
