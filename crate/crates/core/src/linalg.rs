//! Small fixed-size vectors, matrices and rank-3 tensors.

use num_complex::Complex;
use num_traits::Zero;

use crate::scalar::{cabs, Real};

pub type Vector<T, const D: usize> = [T; D];
pub type Matrix<T, const D: usize> = [[T; D]; D];
pub type Tensor3<T, const D: usize> = [[[T; D]; D]; D];

pub type C<T> = Complex<T>;

#[inline]
pub fn zeros<T: Real, const D: usize>() -> Vector<T, D> {
    [T::zero(); D]
}

#[inline]
pub fn mzeros<T: Real, const D: usize>() -> Matrix<T, D> {
    [[T::zero(); D]; D]
}

#[inline]
pub fn czeros<T: Real, const D: usize>() -> Vector<C<T>, D> {
    [C::zero(); D]
}

#[inline]
pub fn cmzeros<T: Real, const D: usize>() -> Matrix<C<T>, D> {
    [[C::zero(); D]; D]
}

#[inline]
pub fn ctzeros<T: Real, const D: usize>() -> Tensor3<C<T>, D> {
    [[[C::zero(); D]; D]; D]
}

#[inline]
pub fn identity<T: Real, const D: usize>() -> Matrix<T, D> {
    let mut m = mzeros();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = T::one();
    }
    m
}

#[inline]
pub fn dot<T: Real, const D: usize>(a: &Vector<T, D>, b: &Vector<T, D>) -> T {
    let mut s = T::zero();
    for i in 0..D {
        s += a[i] * b[i];
    }
    s
}

#[inline]
pub fn norm<T: Real, const D: usize>(a: &Vector<T, D>) -> T {
    dot(a, a).sqrt()
}

#[inline]
pub fn sub<T: Real, const D: usize>(a: &Vector<T, D>, b: &Vector<T, D>) -> Vector<T, D> {
    std::array::from_fn(|i| a[i] - b[i])
}

/// Lifts a real matrix into complex arithmetic.
#[inline]
pub fn complexify<T: Real, const D: usize>(m: &Matrix<T, D>) -> Matrix<C<T>, D> {
    std::array::from_fn(|i| std::array::from_fn(|j| C::new(m[i][j], T::zero())))
}

#[inline]
pub fn cmatmul<T: Real, const D: usize>(a: &Matrix<C<T>, D>, b: &Matrix<C<T>, D>) -> Matrix<C<T>, D> {
    let mut r = cmzeros();
    for i in 0..D {
        for k in 0..D {
            let aik = a[i][k];
            for j in 0..D {
                r[i][j] += aik * b[k][j];
            }
        }
    }
    r
}

#[inline]
pub fn transpose<S: Copy, const D: usize>(a: &[[S; D]; D]) -> [[S; D]; D] {
    std::array::from_fn(|i| std::array::from_fn(|j| a[j][i]))
}

#[inline]
pub fn ctrace<T: Real, const D: usize>(a: &Matrix<C<T>, D>) -> C<T> {
    let mut s = C::zero();
    for (i, row) in a.iter().enumerate() {
        s += row[i];
    }
    s
}

/// Quadratic form `vᵀ M v` for real `v`.
#[inline]
pub fn cquad<T: Real, const D: usize>(m: &Matrix<C<T>, D>, v: &Vector<T, D>) -> C<T> {
    let mut s = C::zero();
    for i in 0..D {
        for j in 0..D {
            s += m[i][j] * v[i] * v[j];
        }
    }
    s
}

/// Cubic form `T[v, v, v]` for real `v`.
#[inline]
pub fn ccubic<T: Real, const D: usize>(t: &Tensor3<C<T>, D>, v: &Vector<T, D>) -> C<T> {
    let mut s = C::zero();
    for i in 0..D {
        for j in 0..D {
            for k in 0..D {
                s += t[i][j][k] * (v[i] * v[j] * v[k]);
            }
        }
    }
    s
}

/// Replaces `M` by `(M + Mᵀ)/2`.
pub fn symmetrize<T: Real, const D: usize>(m: &mut Matrix<C<T>, D>) {
    let half = T::lit(0.5);
    for i in 0..D {
        for j in (i + 1)..D {
            let s = (m[i][j] + m[j][i]) * half;
            m[i][j] = s;
            m[j][i] = s;
        }
    }
}

/// Averages a rank-3 tensor over all index permutations.
pub fn symmetrize3<T: Real, const D: usize>(t: &Tensor3<C<T>, D>) -> Tensor3<C<T>, D> {
    let sixth = T::one() / T::lit(6.0);
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            std::array::from_fn(|k| {
                (t[i][j][k] + t[i][k][j] + t[j][i][k] + t[j][k][i] + t[k][i][j] + t[k][j][i]) * sixth
            })
        })
    })
}

/// Largest entrywise modulus of `M − Mᵀ`.
pub fn skew_norm<T: Real, const D: usize>(m: &Matrix<C<T>, D>) -> f64 {
    let mut s = 0.0_f64;
    for i in 0..D {
        for j in 0..D {
            s = s.max(cabs(m[i][j] - m[j][i]).val());
        }
    }
    s
}

/// Inverse of a complex matrix by Gauss-Jordan elimination with partial pivoting.
pub fn cinv<T: Real, const D: usize>(a: &Matrix<C<T>, D>) -> Option<Matrix<C<T>, D>> {
    let mut m = *a;
    let mut inv = complexify(&identity::<T, D>());
    for col in 0..D {
        let mut piv = col;
        let mut best = cabs(m[col][col]).val();
        for r in (col + 1)..D {
            let v = cabs(m[r][col]).val();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return None;
        }
        m.swap(col, piv);
        inv.swap(col, piv);
        let d = C::<T>::new(T::one(), T::zero()) / m[col][col];
        for j in 0..D {
            m[col][j] = m[col][j] * d;
            inv[col][j] = inv[col][j] * d;
        }
        for r in 0..D {
            if r != col {
                let f = m[r][col];
                for j in 0..D {
                    let mc = m[col][j];
                    let ic = inv[col][j];
                    m[r][j] -= f * mc;
                    inv[r][j] -= f * ic;
                }
            }
        }
    }
    Some(inv)
}

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn sym_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[i][j] * m[i][j];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Smallest eigenvalue of `Im M` (symmetrized).
pub fn min_eig_im<T: Real, const D: usize>(m: &Matrix<C<T>, D>) -> f64 {
    let a: Vec<Vec<f64>> = (0..D)
        .map(|i| (0..D).map(|j| 0.5 * (m[i][j].im.val() + m[j][i].im.val())).collect())
        .collect();
    sym_eigenvalues(&a)[0]
}

/// Determinant of a dense square matrix by LU with partial pivoting.
pub fn det(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut m = a.to_vec();
    let mut d = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap_or(col);
        if m[piv][col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            m.swap(piv, col);
            d = -d;
        }
        d *= m[col][col];
        for r in (col + 1)..n {
            let f = m[r][col] / m[col][col];
            for j in col..n {
                m[r][j] -= f * m[col][j];
            }
        }
    }
    d
}
