//! Haar-random unitaries, Gaussian Hermitian generators and the analytic
//! twofold Haar average.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Result};
use crate::tensor::{adjoint, matmul, DenseTensor, C64, ONE, ZERO};

/// Max |U†U − I| entry accepted for a unitary.
pub const UNITARY_TOL: f64 = 1e-12;
/// Max |H − H†| entry accepted for a Hermitian matrix.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitaryMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl UnitaryMatrix {
    pub fn new(dim: usize, data: Vec<C64>) -> Result<Self> {
        Self::with_tolerance(dim, data, UNITARY_TOL)
    }

    pub fn with_tolerance(dim: usize, data: Vec<C64>, tol: f64) -> Result<Self> {
        if dim == 0 {
            return invalid("unitary dimension must be positive");
        }
        if data.len() != dim * dim {
            return shape(format!("{dim}x{dim} unitary needs {} entries", dim * dim));
        }
        let u = Self { dim, data };
        let defect = u.unitarity_defect();
        if !(defect <= tol) {
            return invalid(format!("matrix is not unitary (defect {defect:.3e})"));
        }
        Ok(u)
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![ZERO; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = ONE;
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    pub fn adjoint(&self) -> Self {
        Self { dim: self.dim, data: adjoint(&self.data, self.dim, self.dim) }
    }

    /// `self · other`; the product of unitaries is unitary.
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self { dim: self.dim, data: matmul(&self.data, &other.data, self.dim, self.dim, self.dim) }
    }

    /// Max entry of |U†U − I|.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim;
        let prod = matmul(&adjoint(&self.data, n, n), &self.data, n, n, n);
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((prod[i * n + j] - target).norm());
            }
        }
        worst
    }

    pub fn to_tensor(&self) -> DenseTensor {
        DenseTensor::from_parts(vec![self.dim, self.dim], self.data.clone())
    }
}

/// Square Hermitian matrix, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HermitianMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl HermitianMatrix {
    pub fn new(dim: usize, data: Vec<C64>) -> Result<Self> {
        if dim == 0 {
            return invalid("matrix dimension must be positive");
        }
        if data.len() != dim * dim {
            return shape(format!("{dim}x{dim} matrix needs {} entries", dim * dim));
        }
        let h = Self { dim, data };
        let defect = h.hermiticity_defect();
        if !(defect <= HERMITIAN_TOL) {
            return invalid(format!("matrix is not Hermitian (defect {defect:.3e})"));
        }
        Ok(h)
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut data = vec![ZERO; n * n];
        for (i, &v) in diag.iter().enumerate() {
            data[i * n + i] = C64::new(v, 0.0);
        }
        Self { dim: n, data }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_real_diagonal(&vec![1.0; dim])
    }

    /// `|v⟩⟨v|`.
    pub fn projector(v: &[C64]) -> Self {
        let n = v.len();
        let data = (0..n * n).map(|k| v[k / n] * v[k % n].conj()).collect();
        Self { dim: n, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.data[i * n + j] - self.data[j * n + i].conj()).norm());
            }
        }
        worst
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    /// `tr(H²)`, real for Hermitian H.
    pub fn trace_of_square(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| *z == ZERO)
    }

    /// Eigenvalues (ascending order not guaranteed) and the column eigenvector
    /// matrix, row-major.
    pub fn eigh(&self) -> (Vec<f64>, Vec<C64>) {
        let n = self.dim;
        let m = DMatrix::from_fn(n, n, |i, j| self.data[i * n + j]);
        let eig = SymmetricEigen::new(m);
        let vals = eig.eigenvalues.iter().copied().collect();
        let vecs = (0..n * n).map(|k| eig.eigenvectors[(k / n, k % n)]).collect();
        (vals, vecs)
    }

    /// `exp(−iθH)` and its θ-derivative `−iH·exp(−iθH)`.
    pub fn exp_neg_i(&self, theta: f64) -> (Vec<C64>, Vec<C64>) {
        let n = self.dim;
        let (vals, vecs) = self.eigh();
        let vh = adjoint(&vecs, n, n);
        let mut scaled = vecs.clone();
        let mut dscaled = vecs.clone();
        for i in 0..n {
            for (j, &lam) in vals.iter().enumerate() {
                let phase = C64::from_polar(1.0, -theta * lam);
                scaled[i * n + j] = vecs[i * n + j] * phase;
                dscaled[i * n + j] = vecs[i * n + j] * phase * C64::new(0.0, -lam);
            }
        }
        (matmul(&scaled, &vh, n, n, n), matmul(&dscaled, &vh, n, n, n))
    }
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * scale, im * scale)
}

/// Haar-distributed unitary: Ginibre matrix orthonormalized column by column.
///
/// Modified Gram–Schmidt yields the QR factor whose R has a positive real
/// diagonal, which is exactly the phase fix that makes Q Haar.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<UnitaryMatrix> {
    if dim == 0 {
        return invalid("haar_unitary: dim must be at least 1");
    }
    let n = dim;
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    // columns[j][i] = entry (i, j)
    let mut columns: Vec<Vec<C64>> = (0..n).map(|_| (0..n).map(|_| complex_gaussian(rng, scale)).collect()).collect();
    for j in 0..n {
        let (done, rest) = columns.split_at_mut(j);
        let v = &mut rest[0];
        // two passes keep the loss of orthogonality at round-off level
        for _ in 0..2 {
            for q in done.iter() {
                let r: C64 = q.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= r * qi;
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for vi in v.iter_mut() {
            *vi /= norm;
        }
    }
    let data = (0..n * n).map(|k| columns[k % n][k / n]).collect();
    UnitaryMatrix::new(n, data)
}

/// Gaussian Hermitian matrix `(A + A†)/2` with i.i.d. standard complex
/// Gaussian entries in `A`.
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<HermitianMatrix> {
    if dim == 0 {
        return invalid("random_hermitian: dim must be at least 1");
    }
    let a: Vec<C64> = (0..dim * dim).map(|_| complex_gaussian(rng, 1.0)).collect();
    let mut data = vec![ZERO; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            data[i * dim + j] = (a[i * dim + j] + a[j * dim + i].conj()) * 0.5;
        }
    }
    Ok(HermitianMatrix { dim, data })
}

/// Weingarten weights of the twofold Haar average on `U(N)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondMomentWeights {
    pub dim: usize,
    /// Weight when the two pairings agree: `1/(N²−1)`.
    pub w_same: f64,
    /// Weight when they differ: `−1/(N(N²−1))`.
    pub w_cross: f64,
}

impl SecondMomentWeights {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return invalid("second-moment weights need N >= 2");
        }
        let n = dim as f64;
        Ok(Self { dim, w_same: 1.0 / (n * n - 1.0), w_cross: -1.0 / (n * (n * n - 1.0)) })
    }

    /// Weights for a site unitary of size `D²d`.
    pub fn for_site(bond_dim: usize, phys_dim: usize) -> Result<Self> {
        Self::new(bond_dim * bond_dim * phys_dim)
    }
}

/// `∫dU (U⊗U) X (U⊗U)†` for an operator `X` on two copies of `C^N`.
///
/// `input[i1, i2, j1, j2] = ⟨i1 i2|X|j1 j2⟩`. The average is
/// `c_I·I + c_S·SWAP` with `c_I = w_same·tr X + w_cross·tr(SX)` and
/// `c_S = w_cross·tr X + w_same·tr(SX)`.
pub fn second_moment_channel(weights: &SecondMomentWeights, input: &DenseTensor) -> Result<DenseTensor> {
    let n = weights.dim;
    if input.shape() != [n, n, n, n] {
        return shape(format!("second_moment_channel expects four legs of extent {n}, got {:?}", input.shape()));
    }
    let x = input.data();
    let at = |i1: usize, i2: usize, j1: usize, j2: usize| x[((i1 * n + i2) * n + j1) * n + j2];
    let mut tr = ZERO;
    let mut tr_swap = ZERO;
    for a in 0..n {
        for b in 0..n {
            tr += at(a, b, a, b);
            tr_swap += at(b, a, a, b);
        }
    }
    let c_id = tr * weights.w_same + tr_swap * weights.w_cross;
    let c_swap = tr * weights.w_cross + tr_swap * weights.w_same;
    let mut out = DenseTensor::zeros(vec![n, n, n, n]);
    for a in 0..n {
        for b in 0..n {
            let id = [a, b, a, b];
            out.set(&id, out.get(&id) + c_id);
            let sw = [a, b, b, a];
            out.set(&sw, out.get(&sw) + c_swap);
        }
    }
    Ok(out)
}
