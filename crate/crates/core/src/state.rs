//! Unitarily embedded random tensor-network states on the torus.
//!
//! Each site carries a `D²d × D²d` unitary `U = U₋ · exp(−iθG) · U₊` applied to
//! the reference input `|0⟩`. The resulting local tensor has legs
//! `(up, left, down, right, phys)`: up/left are the inputs coming from the
//! neighbours above and to the left, down/right feed the neighbours below and
//! to the right.

use std::f64::consts::TAU;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::haar::{haar_unitary, random_hermitian, HermitianMatrix, UnitaryMatrix};
use crate::tensor::{matmul, DenseTensor, C64};

/// Largest dense state vector (number of amplitudes) we will build.
pub const DEFAULT_AMPLITUDE_CAP: u64 = 1 << 24;
/// Largest ring dimension `D^(2·min(L1, L2))` for bra-ket contractions.
pub const RING_DIM_CAP: u64 = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub rows: usize,
    pub cols: usize,
    pub bond_dim: usize,
    pub phys_dim: usize,
}

impl LatticeSpec {
    pub fn new(rows: usize, cols: usize, bond_dim: usize, phys_dim: usize) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return invalid(format!("lattice must be at least 2x2, got {rows}x{cols}"));
        }
        if bond_dim < 2 || phys_dim < 2 {
            return invalid(format!("need D >= 2 and d >= 2, got D={bond_dim}, d={phys_dim}"));
        }
        Ok(Self { rows, cols, bond_dim, phys_dim })
    }

    pub fn n_sites(&self) -> usize {
        self.rows * self.cols
    }

    /// `D²d`.
    pub fn unitary_dim(&self) -> usize {
        self.bond_dim * self.bond_dim * self.phys_dim
    }

    pub fn site_index(&self, x: usize, y: usize) -> usize {
        (x % self.rows) * self.cols + (y % self.cols)
    }

    pub fn coords(&self, site: usize) -> (usize, usize) {
        (site / self.cols, site % self.cols)
    }

    /// `d^V`, saturating.
    pub fn amplitudes(&self) -> u64 {
        (self.phys_dim as u64).saturating_pow(self.n_sites() as u32)
    }

    pub fn ring_dim(&self) -> u64 {
        let d2 = (self.bond_dim * self.bond_dim) as u64;
        d2.saturating_pow(self.rows.min(self.cols) as u32)
    }

    pub fn check_caps(&self, amplitude_cap: u64) -> Result<()> {
        if self.amplitudes() > amplitude_cap {
            return Err(Error::ResourceLimit(format!(
                "{}x{} lattice with d={} has {} amplitudes, cap is {}",
                self.rows,
                self.cols,
                self.phys_dim,
                self.amplitudes(),
                amplitude_cap
            )));
        }
        if self.ring_dim() > RING_DIM_CAP {
            return Err(Error::ResourceLimit(format!("ring dimension {} exceeds {}", self.ring_dim(), RING_DIM_CAP)));
        }
        Ok(())
    }

    /// Toric Manhattan distance: `min(|Δx|, L1−|Δx|) + min(|Δy|, L2−|Δy|)`.
    pub fn toric_distance(&self, a: usize, b: usize) -> usize {
        let (ax, ay) = self.coords(a);
        let (bx, by) = self.coords(b);
        let dx = ax.abs_diff(bx);
        let dy = ay.abs_diff(by);
        dx.min(self.rows - dx) + dy.min(self.cols - dy)
    }
}

impl std::fmt::Display for LatticeSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{} (D={}, d={})", self.rows, self.cols, self.bond_dim, self.phys_dim)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteParameterization {
    pub u_minus: UnitaryMatrix,
    pub u_plus: UnitaryMatrix,
    pub generator: HermitianMatrix,
    pub theta: f64,
}

impl SiteParameterization {
    pub fn new(u_minus: UnitaryMatrix, u_plus: UnitaryMatrix, generator: HermitianMatrix, theta: f64) -> Result<Self> {
        let n = u_minus.dim();
        if u_plus.dim() != n || generator.dim() != n {
            return crate::error::shape("site unitaries and generator must share a dimension");
        }
        if !theta.is_finite() {
            return invalid("theta must be finite");
        }
        Ok(Self { u_minus, u_plus, generator, theta })
    }

    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Self> {
        let u_minus = haar_unitary(dim, rng)?;
        let u_plus = haar_unitary(dim, rng)?;
        let generator = random_hermitian(dim, rng)?;
        let theta = rng.random::<f64>() * TAU;
        Ok(Self { u_minus, u_plus, generator, theta })
    }

    /// Identity embedding with zero generator.
    pub fn identity(dim: usize) -> Self {
        Self {
            u_minus: UnitaryMatrix::identity(dim),
            u_plus: UnitaryMatrix::identity(dim),
            generator: HermitianMatrix::from_real_diagonal(&vec![0.0; dim]),
            theta: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.u_minus.dim()
    }

    /// `U₋ exp(−iθG) U₊` and `∂θ` of it, `U₋ (−iG) exp(−iθG) U₊`.
    pub fn unitary_and_derivative(&self) -> (Vec<C64>, Vec<C64>) {
        let n = self.dim();
        let (e, de) = self.generator.exp_neg_i(self.theta);
        let left = |m: &[C64]| {
            let t = matmul(self.u_minus.as_slice(), m, n, n, n);
            matmul(&t, self.u_plus.as_slice(), n, n, n)
        };
        (left(&e), left(&de))
    }

    pub fn unitary(&self) -> Result<UnitaryMatrix> {
        UnitaryMatrix::with_tolerance(self.dim(), self.unitary_and_derivative().0, 1e-10)
    }

    /// Replace `U₋` by `W·U₋`.
    pub fn left_multiplied(&self, w: &UnitaryMatrix) -> Self {
        Self { u_minus: w.compose(&self.u_minus), ..self.clone() }
    }
}

/// Local tensor `A[α, β, γ, λ, j] = U[(γ, λ, j), (α, β, 0)]` from a row-major
/// `D²d × D²d` matrix.
pub fn tensor_from_matrix(u: &[C64], bond_dim: usize, phys_dim: usize) -> Result<DenseTensor> {
    let (bd, pd) = (bond_dim, phys_dim);
    let n = bd * bd * pd;
    if u.len() != n * n {
        return crate::error::shape(format!("expected a {n}x{n} matrix for D={bd}, d={pd}"));
    }
    let shape = vec![bd, bd, bd, bd, pd];
    Ok(DenseTensor::from_fn(shape, |i| {
        let (a, b, g, l, j) = (i[0], i[1], i[2], i[3], i[4]);
        let row = (g * bd + l) * pd + j;
        let col = (a * bd + b) * pd;
        u[row * n + col]
    }))
}

pub fn local_tensor(site: &SiteParameterization, bond_dim: usize, phys_dim: usize) -> Result<DenseTensor> {
    if site.dim() != bond_dim * bond_dim * phys_dim {
        return crate::error::shape("site unitary dimension is not D²d");
    }
    tensor_from_matrix(&site.unitary_and_derivative().0, bond_dim, phys_dim)
}

/// Variational state: immutable after construction; local tensors and their
/// θ-derivatives are cached.
#[derive(Clone, Debug)]
pub struct TNState {
    spec: LatticeSpec,
    sites: Vec<SiteParameterization>,
    seed: Option<u64>,
    tensors: Vec<DenseTensor>,
    derivatives: Vec<DenseTensor>,
}

impl PartialEq for TNState {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.sites == other.sites
    }
}

impl TNState {
    pub fn from_sites(spec: LatticeSpec, sites: Vec<SiteParameterization>) -> Result<Self> {
        if sites.len() != spec.n_sites() {
            return invalid(format!("{} sites for a lattice of {}", sites.len(), spec.n_sites()));
        }
        let (mut tensors, mut derivatives) = (Vec::new(), Vec::new());
        for s in &sites {
            if s.dim() != spec.unitary_dim() {
                return crate::error::shape("site unitary dimension is not D²d");
            }
            let (u, du) = s.unitary_and_derivative();
            tensors.push(tensor_from_matrix(&u, spec.bond_dim, spec.phys_dim)?);
            derivatives.push(tensor_from_matrix(&du, spec.bond_dim, spec.phys_dim)?);
        }
        Ok(Self { spec, sites, seed: None, tensors, derivatives })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn sites(&self) -> &[SiteParameterization] {
        &self.sites
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn tensor(&self, site: usize) -> &DenseTensor {
        &self.tensors[site]
    }

    pub fn derivative_tensor(&self, site: usize) -> &DenseTensor {
        &self.derivatives[site]
    }

    pub fn with_theta(&self, site: usize, theta: f64) -> Result<Self> {
        let mut sites = self.sites.clone();
        sites.get_mut(site).ok_or_else(|| Error::InvalidArgument(format!("site {site} out of range")))?.theta = theta;
        let mut s = Self::from_sites(self.spec, sites)?;
        s.seed = self.seed;
        Ok(s)
    }

    pub fn map_sites(&self, f: impl Fn(&SiteParameterization) -> SiteParameterization) -> Result<Self> {
        Self::from_sites(self.spec, self.sites.iter().map(f).collect())
    }
}

/// Independent Haar `U₋`, `U₊`, Gaussian Hermitian `G` and uniform `θ ∈ [0, 2π)`
/// per site, in row-major site order.
pub fn build_state<R: Rng + ?Sized>(spec: LatticeSpec, rng: &mut R) -> Result<TNState> {
    spec.check_caps(DEFAULT_AMPLITUDE_CAP)?;
    build_state_uncapped(spec, rng)
}

pub(crate) fn build_state_uncapped<R: Rng + ?Sized>(spec: LatticeSpec, rng: &mut R) -> Result<TNState> {
    let n = spec.unitary_dim();
    let sites = (0..spec.n_sites()).map(|_| SiteParameterization::random(n, rng)).collect::<Result<Vec<_>>>()?;
    TNState::from_sites(spec, sites)
}

/// `build_state` driven by a fresh ChaCha stream for `seed`; the seed is kept
/// for serialization.
pub fn build_state_seeded(spec: LatticeSpec, seed: u64) -> Result<TNState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = build_state(spec, &mut rng)?;
    s.seed = Some(seed);
    Ok(s)
}

/// Independent random source for sample `index` of a run seeded with `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

const STATE_MAGIC: &[u8; 8] = b"TNSTATE\0";
const STATE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct StateHeader {
    version: u32,
    spec: LatticeSpec,
    seed: Option<u64>,
    unitary_dim: usize,
    n_sites: usize,
}

/// Binary state file: magic, u32 LE header length, JSON header, then per site
/// `U₋`, `U₊`, `G` as little-endian `(re, im)` f64 pairs and `θ` as f64.
pub fn write_state<W: Write>(state: &TNState, mut w: W) -> Result<()> {
    let header = StateHeader {
        version: STATE_VERSION,
        spec: state.spec,
        seed: state.seed,
        unitary_dim: state.spec.unitary_dim(),
        n_sites: state.spec.n_sites(),
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(STATE_MAGIC)?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    let put = |w: &mut W, xs: &[C64]| -> std::io::Result<()> {
        for z in xs {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    };
    for s in &state.sites {
        put(&mut w, s.u_minus.as_slice())?;
        put(&mut w, s.u_plus.as_slice())?;
        put(&mut w, s.generator.as_slice())?;
        w.write_all(&s.theta.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_state<R: Read>(mut r: R) -> Result<TNState> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != STATE_MAGIC {
        return invalid("not a tensor-network state file");
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut json)?;
    let header: StateHeader = serde_json::from_slice(&json)?;
    if header.version != STATE_VERSION {
        return invalid(format!("unsupported state file version {}", header.version));
    }
    let spec = LatticeSpec::new(header.spec.rows, header.spec.cols, header.spec.bond_dim, header.spec.phys_dim)?;
    let n = spec.unitary_dim();
    if header.unitary_dim != n || header.n_sites != spec.n_sites() {
        return invalid("state header is inconsistent with its lattice");
    }
    let mut f64_buf = [0u8; 8];
    let mut get_f64 = |r: &mut R| -> std::io::Result<f64> {
        r.read_exact(&mut f64_buf)?;
        Ok(f64::from_le_bytes(f64_buf))
    };
    let mut sites = Vec::with_capacity(spec.n_sites());
    for _ in 0..spec.n_sites() {
        let mut mats = Vec::with_capacity(3);
        for _ in 0..3 {
            let mut m = Vec::with_capacity(n * n);
            for _ in 0..n * n {
                let re = get_f64(&mut r)?;
                let im = get_f64(&mut r)?;
                m.push(C64::new(re, im));
            }
            mats.push(m);
        }
        let theta = get_f64(&mut r)?;
        let g = mats.pop().unwrap();
        let up = mats.pop().unwrap();
        let um = mats.pop().unwrap();
        sites.push(SiteParameterization::new(
            UnitaryMatrix::new(n, um)?,
            UnitaryMatrix::new(n, up)?,
            HermitianMatrix::new(n, g)?,
            theta,
        )?);
    }
    let mut s = TNState::from_sites(spec, sites)?;
    s.seed = header.seed;
    Ok(s)
}
