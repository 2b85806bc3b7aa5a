//! Dense complex linear algebra for small qudit operators.
//!
//! Everything here is generic over [`Real`] so the same kernels serve `f32`
//! and `f64`. Matrices are `nalgebra::DMatrix<Complex<T>>`; the dimension of
//! every operator in this crate is at most 24 (the full hyperfine manifold),
//! so dense storage and a Hermitian eigensolver are all that is needed.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub type CMatrix<T> = DMatrix<Complex<T>>;
pub type CVector<T> = DVector<Complex<T>>;

#[inline]
pub fn cplx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

/// `|z|`
#[inline]
pub fn modulus<T: Real>(z: &Complex<T>) -> T {
    z.norm_sqr().sqrt()
}

/// `e^{i x}`
#[inline]
pub fn phase<T: Real>(x: T) -> Complex<T> {
    Complex::new(x.cos(), x.sin())
}

pub fn identity<T: Real>(d: usize) -> CMatrix<T> {
    CMatrix::<T>::identity(d, d)
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> T {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in max_abs_diff");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| modulus(&(*x - *y)))
        .fold(T::zero(), |m, v| if v > m { v } else { m })
}

pub fn is_square<T: Real>(m: &CMatrix<T>) -> bool {
    m.nrows() == m.ncols()
}

pub fn is_hermitian<T: Real>(m: &CMatrix<T>, tol: T) -> bool {
    is_square(m) && max_abs_diff(m, &m.adjoint()) <= tol
}

pub fn is_unitary<T: Real>(m: &CMatrix<T>, tol: T) -> bool {
    is_square(m) && max_abs_diff(&(m.adjoint() * m), &identity(m.nrows())) <= tol
}

pub fn is_diagonal<T: Real>(m: &CMatrix<T>, tol: T) -> bool {
    if !is_square(m) {
        return false;
    }
    let n = m.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || modulus(&m[(i, j)]) <= tol))
}

pub fn is_finite<T: Real>(m: &CMatrix<T>) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// `A B - B A`
pub fn commutator<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a * b - b * a
}

/// `Tr(U† V)` without forming the product.
pub fn trace_overlap<T: Real>(u: &CMatrix<T>, v: &CMatrix<T>) -> Complex<T> {
    u.iter()
        .zip(v.iter())
        .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| {
            acc + a.conj() * *b
        })
}

/// Diagonal matrix from real entries.
pub fn real_diagonal<T: Real>(entries: &[T]) -> CMatrix<T> {
    let d = entries.len();
    let mut m = CMatrix::<T>::zeros(d, d);
    for (i, &x) in entries.iter().enumerate() {
        m[(i, i)] = cplx(x, T::zero());
    }
    m
}

/// Angular-momentum matrices of an effective spin `j = (d-1)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinOperators<T: Real> {
    pub x: CMatrix<T>,
    pub y: CMatrix<T>,
    pub z: CMatrix<T>,
}

impl<T: Real> SpinOperators<T> {
    pub fn d(&self) -> usize {
        self.z.nrows()
    }

    /// `j(j+1)` for this representation.
    pub fn casimir(&self) -> T {
        let j = T::lit((self.d() as f64 - 1.0) / 2.0);
        j * (j + T::one())
    }

    /// Raising operator `J₊ = Jx + iJy`.
    pub fn raising(&self) -> CMatrix<T> {
        &self.x + &self.y * cplx(T::zero(), T::one())
    }
}

/// Assigned `Jz` eigenvalue of qudit level `i`: `-(d-1)/2 + i`.
pub fn jz_value(d: usize, i: usize) -> f64 {
    -(d as f64 - 1.0) / 2.0 + i as f64
}

/// Spin-`(d-1)/2` operators in the basis `|0⟩..|d-1⟩` ordered by ascending
/// `Jz` eigenvalue.
pub fn spin_operators<T: Real>(d: usize) -> Result<SpinOperators<T>> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let j = (d as f64 - 1.0) / 2.0;
    let mut x = CMatrix::<T>::zeros(d, d);
    let mut y = CMatrix::<T>::zeros(d, d);
    let mut z = CMatrix::<T>::zeros(d, d);
    let half = T::lit(0.5);
    for i in 0..d {
        let m = jz_value(d, i);
        z[(i, i)] = cplx(T::lit(m), T::zero());
        if i + 1 < d {
            // ⟨m+1|J₊|m⟩ sits at (i+1, i).
            let c = T::lit((j * (j + 1.0) - m * (m + 1.0)).sqrt()) * half;
            x[(i + 1, i)] = cplx(c, T::zero());
            x[(i, i + 1)] = cplx(c, T::zero());
            y[(i + 1, i)] = cplx(T::zero(), -c);
            y[(i, i + 1)] = cplx(T::zero(), c);
        }
    }
    Ok(SpinOperators { x, y, z })
}

/// Spectral decomposition `H = V diag(λ) V†` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen<T: Real> {
    pub values: Vec<T>,
    pub vectors: CMatrix<T>,
}

impl<T: Real> HermitianEigen<T> {
    pub fn new(h: &CMatrix<T>, tol: T) -> Result<Self> {
        if !is_square(h) {
            return Err(Error::Contract(format!(
                "expected a square matrix, got {}x{}",
                h.nrows(),
                h.ncols()
            )));
        }
        let scale = h.iter().map(|z| modulus(z)).fold(T::one(), |m, v| if v > m { v } else { m });
        if !is_finite(h) || max_abs_diff(h, &h.adjoint()) > tol * scale {
            return Err(Error::Contract("generator is not Hermitian".into()));
        }
        // Symmetrize so the solver sees an exactly Hermitian input.
        let sym = (h + h.adjoint()) * cplx(T::lit(0.5), T::zero());
        let eig = SymmetricEigen::new(sym);
        Ok(Self {
            values: eig.eigenvalues.iter().copied().collect(),
            vectors: eig.eigenvectors,
        })
    }

    /// `V diag(f(λ)) V†`
    pub fn map(&self, f: impl Fn(T) -> Complex<T>) -> CMatrix<T> {
        let d = self.values.len();
        let mut scaled = self.vectors.clone();
        for (k, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            for r in 0..d {
                scaled[(r, k)] *= w;
            }
        }
        scaled * self.vectors.adjoint()
    }

    /// `exp(-i H t)`
    pub fn propagator(&self, t: T) -> CMatrix<T> {
        self.map(|lam| phase(-lam * t))
    }
}

/// `exp(-i H t)` for Hermitian `H`, via eigendecomposition.
pub fn propagate<T: Real>(h: &CMatrix<T>, t: T) -> Result<CMatrix<T>> {
    propagate_with_tol(h, t, T::default_tol())
}

pub fn propagate_with_tol<T: Real>(h: &CMatrix<T>, t: T, tol: T) -> Result<CMatrix<T>> {
    Ok(HermitianEigen::new(h, tol)?.propagator(t))
}

fn check_same_dim<T: Real>(u: &CMatrix<T>, v: &CMatrix<T>) -> Result<()> {
    if u.shape() != v.shape() || !is_square(u) {
        return Err(Error::DimensionMismatch {
            expected: u.nrows(),
            actual: v.nrows(),
        });
    }
    Ok(())
}

/// Phase-insensitive overlap `|Tr(U†V)| / d`.
pub fn unitary_fidelity<T: Real>(u: &CMatrix<T>, v: &CMatrix<T>) -> Result<T> {
    check_same_dim(u, v)?;
    let d = T::lit(u.nrows() as f64);
    let f = modulus(&trace_overlap(u, v)) / d;
    Ok(if f > T::one() { T::one() } else { f })
}

/// Normalized pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T: Real> {
    amps: CVector<T>,
}

impl<T: Real> StateVector<T> {
    /// Wraps `amps`, which must already have unit norm.
    pub fn new(amps: CVector<T>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        let n = amps.norm();
        if (n - T::one()).abs() > T::default_tol() {
            return Err(Error::Contract(format!("state norm {} != 1", n.as_f64())));
        }
        Ok(Self { amps })
    }

    /// Rescales `amps` to unit norm.
    pub fn normalized(amps: CVector<T>) -> Result<Self> {
        let n = amps.norm();
        if amps.is_empty() || !(n > T::zero()) {
            return Err(Error::Contract("cannot normalize a zero vector".into()));
        }
        Ok(Self { amps: amps.unscale(n) })
    }

    pub fn basis(d: usize, k: usize) -> Result<Self> {
        if k >= d {
            return Err(Error::LevelOutOfRange { index: k, d });
        }
        let mut v = CVector::<T>::zeros(d);
        v[k] = cplx(T::one(), T::zero());
        Ok(Self { amps: v })
    }

    /// Equal superposition `(1/√d) Σ|k⟩`.
    pub fn uniform(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension(0));
        }
        let a = T::one() / T::lit(d as f64).sqrt();
        Ok(Self {
            amps: CVector::from_element(d, cplx(a, T::zero())),
        })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &CVector<T> {
        &self.amps
    }

    /// `|⟨self|other⟩|²`
    pub fn overlap_sq(&self, other: &Self) -> T {
        self.amps.dotc(&other.amps).norm_sqr()
    }

    pub fn evolve(&self, u: &CMatrix<T>) -> Result<Self> {
        if u.ncols() != self.dim() || !is_square(u) {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: u.ncols(),
            });
        }
        Ok(Self { amps: u * &self.amps })
    }

    pub fn density(&self) -> CMatrix<T> {
        &self.amps * self.amps.adjoint()
    }

    pub fn probabilities(&self) -> ProbabilityDistribution<T> {
        ProbabilityDistribution {
            probs: self.amps.iter().map(|a| a.norm_sqr()).collect(),
        }
    }
}

/// Measurement outcome distribution over qudit levels.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(transparent)]
pub struct ProbabilityDistribution<T: Real> {
    probs: Vec<T>,
}

impl<T: Real> ProbabilityDistribution<T> {
    pub fn new(probs: Vec<T>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        let tol = T::lit(1e-9).max(T::default_tol());
        let mut sum = T::zero();
        for &p in &probs {
            if !(p >= -tol && p <= T::one() + tol) {
                return Err(Error::Contract(format!("probability {} outside [0,1]", p.as_f64())));
            }
            sum += p;
        }
        if (sum - T::one()).abs() > tol {
            return Err(Error::Contract(format!("probabilities sum to {}", sum.as_f64())));
        }
        Ok(Self { probs })
    }

    /// Diagonal of a density matrix, clamped at zero.
    pub fn from_density(rho: &CMatrix<T>) -> Result<Self> {
        Self::new((0..rho.nrows()).map(|i| rho[(i, i)].re.max(T::zero())).collect())
    }

    pub fn uniform(d: usize) -> Result<Self> {
        Self::new(vec![T::one() / T::lit(d as f64); d])
    }

    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn get(&self, k: usize) -> T {
        self.probs[k]
    }
}

/// Squared statistical overlap `(Σ_k √(e_k p_k))²`.
pub fn sso<T: Real>(e: &ProbabilityDistribution<T>, p: &ProbabilityDistribution<T>) -> Result<T> {
    if e.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: e.dim(),
            actual: p.dim(),
        });
    }
    let s = e
        .probs
        .iter()
        .zip(&p.probs)
        .map(|(&a, &b)| (a.max(T::zero()) * b.max(T::zero())).sqrt())
        .fold(T::zero(), |acc, x| acc + x);
    Ok((s * s).min(T::one()))
}
