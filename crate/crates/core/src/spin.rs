//! Spin representation of the twofold Haar average.
//!
//! After averaging, each site carries a permutation of two copies on its
//! input side (upper spin, ↓ = identity, ↑ = swap) and one on its output side
//! (lower spin). Summing the lower spins leaves a single-layer model whose
//! site weight depends on the site's spin and the spins of its successors
//! `(x, y+1)` and `(x+1, y)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::network::norm_squared;
use crate::state::{build_state, sample_rng, LatticeSpec};
use crate::stats::{mean, standard_error_of_mean};
use crate::tensor::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Spin {
    Down,
    Up,
}

impl Spin {
    pub const BOTH: [Spin; 2] = [Spin::Down, Spin::Up];

    /// ↓ → +1, ↑ → −1.
    pub fn sign(self) -> f64 {
        match self {
            Spin::Down => 1.0,
            Spin::Up => -1.0,
        }
    }

    pub fn is_up(self) -> bool {
        self == Spin::Up
    }

    fn bit(self) -> usize {
        self as usize
    }
}

impl From<bool> for Spin {
    fn from(up: bool) -> Self {
        if up {
            Spin::Up
        } else {
            Spin::Down
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    /// Second moment of the norm: physical legs traced.
    NormF,
    /// Global fidelity loss: physical legs projected on a product target.
    GlobalG,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightTable {
    pub bond_dim: usize,
    pub phys_dim: usize,
    pub kind: TableKind,
    /// Indexed by `4·σ1 + 2·σ2 + σ3` with ↑ = 1.
    entries: [f64; 8],
}

impl WeightTable {
    pub fn get(&self, s1: Spin, s2: Spin, s3: Spin) -> f64 {
        self.entries[4 * s1.bit() + 2 * s2.bit() + s3.bit()]
    }

    pub fn entries(&self) -> &[f64; 8] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = ((Spin, Spin, Spin), f64)> + '_ {
        (0..8).map(|i| {
            let s = (Spin::from(i & 4 != 0), Spin::from(i & 2 != 0), Spin::from(i & 1 != 0));
            (s, self.entries[i])
        })
    }

    pub fn is_symmetric(&self) -> bool {
        Spin::BOTH.iter().all(|&a| self.get(a, Spin::Down, Spin::Up) == self.get(a, Spin::Up, Spin::Down))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn check_dims(bond_dim: usize, phys_dim: usize) -> Result<()> {
    if bond_dim < 2 || phys_dim < 2 {
        return invalid(format!("need D >= 2 and d >= 2, got D={bond_dim}, d={phys_dim}"));
    }
    Ok(())
}

/// Weingarten sum for one site, scaled by `N(N²−1)` so it is an integer:
/// `Σ_σ Wg(σ·τ) · d^{c(σ)} · D^{c(σ·τ_right)} · D^{c(σ·τ_down)}`.
fn scaled_entry(kind: TableKind, bond_dim: i128, phys_dim: i128, t: [Spin; 3]) -> i128 {
    let n = bond_dim * bond_dim * phys_dim;
    // S₂ is abelian: product is xor, and c(e) = 2, c(swap) = 1.
    let cycles = |a: usize, b: usize| if a ^ b == 0 { 2u32 } else { 1 };
    [0usize, 1]
        .iter()
        .map(|&sigma| {
            let wg = if sigma == t[0].bit() { n } else { -1 };
            let phys = match kind {
                TableKind::NormF => phys_dim.pow(cycles(sigma, 0)),
                TableKind::GlobalG => 1,
            };
            wg * phys * bond_dim.pow(cycles(sigma, t[1].bit())) * bond_dim.pow(cycles(sigma, t[2].bit()))
        })
        .sum()
}

fn build_table(kind: TableKind, bond_dim: usize, phys_dim: usize) -> Result<WeightTable> {
    check_dims(bond_dim, phys_dim)?;
    let (bd, pd) = (bond_dim as i128, phys_dim as i128);
    let n = bd * bd * pd;
    let denom = (n * (n * n - 1)) as f64;
    let mut entries = [0.0; 8];
    for (i, e) in entries.iter_mut().enumerate() {
        let t = [Spin::from(i & 4 != 0), Spin::from(i & 2 != 0), Spin::from(i & 1 != 0)];
        *e = scaled_entry(kind, bd, pd, t) as f64 / denom;
    }
    Ok(WeightTable { bond_dim, phys_dim, kind, entries })
}

pub fn f_table(bond_dim: usize, phys_dim: usize) -> Result<WeightTable> {
    build_table(TableKind::NormF, bond_dim, phys_dim)
}

pub fn g_table(bond_dim: usize, phys_dim: usize) -> Result<WeightTable> {
    build_table(TableKind::GlobalG, bond_dim, phys_dim)
}

/// Two-layer Ising couplings for one table kind.
///
/// `site_norm` multiplies the bottom-layer sum of one site; its `V`-th power
/// is the global normalization constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingCouplings {
    pub j1: C64,
    pub j2: C64,
    pub h_z: f64,
    pub site_norm: C64,
}

impl IsingCouplings {
    pub fn new(kind: TableKind, bond_dim: usize, phys_dim: usize) -> Result<Self> {
        check_dims(bond_dim, phys_dim)?;
        let (bd, pd) = (bond_dim as f64, phys_dim as f64);
        let n = bd * bd * pd;
        let j1 = C64::new(bd.ln(), 0.0);
        let j2 = C64::new(n.ln(), std::f64::consts::PI);
        let (h_z, site_norm) = match kind {
            TableKind::NormF => (pd.ln(), C64::new(0.0, -n / (n * n - 1.0))),
            TableKind::GlobalG => (0.0, C64::new(0.0, -bd * bd / (pd.sqrt() * (n * n - 1.0)))),
        };
        Ok(Self { j1, j2, h_z, site_norm })
    }

    /// `C = site_norm^V`.
    pub fn normalization(&self, n_sites: usize) -> C64 {
        self.site_norm.powu(n_sites as u32)
    }
}

/// `exp(−H)` for one site with `H = −½[J2 σ1σ2 + J1 σ1(σ3 + σ4) + h_z σ1]`,
/// where σ1 is the lower spin, σ2 the upper spin, and σ3, σ4 the upper spins
/// of the two successors.
pub fn two_layer_site_weight(c: &IsingCouplings, s1: Spin, s2: Spin, s3: Spin, s4: Spin) -> C64 {
    let (a, b, x, y) = (s1.sign(), s2.sign(), s3.sign(), s4.sign());
    let minus_h = (c.j2 * (a * b) + c.j1 * (a * (x + y)) + c.h_z * a) * 0.5;
    minus_h.exp()
}

/// Normalized sum over the lower spin; reproduces the weight table entry.
pub fn bottom_layer_sum(c: &IsingCouplings, s2: Spin, s3: Spin, s4: Spin) -> C64 {
    c.site_norm * Spin::BOTH.iter().map(|&s1| two_layer_site_weight(c, s1, s2, s3, s4)).sum::<C64>()
}

/// Upper-layer configuration on an `L1 × L2` torus; `true` is ↑.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinConfig {
    rows: usize,
    cols: usize,
    up: Vec<bool>,
}

impl SpinConfig {
    pub fn new(rows: usize, cols: usize, up: Vec<bool>) -> Result<Self> {
        if rows == 0 || cols == 0 || up.len() != rows * cols {
            return crate::error::shape(format!("{} spins for a {rows}x{cols} torus", up.len()));
        }
        Ok(Self { rows, cols, up })
    }

    pub fn all_down(rows: usize, cols: usize) -> Self {
        Self { rows, cols, up: vec![false; rows * cols] }
    }

    pub fn all_up(rows: usize, cols: usize) -> Self {
        Self { rows, cols, up: vec![true; rows * cols] }
    }

    /// Bit `x·L2 + y` of `bits` is the spin at `(x, y)`.
    pub fn from_bits(rows: usize, cols: usize, bits: u64) -> Self {
        Self { rows, cols, up: (0..rows * cols).map(|i| bits >> i & 1 == 1).collect() }
    }

    pub fn from_cells(rows: usize, cols: usize, cells: &[(usize, usize)]) -> Self {
        let mut c = Self::all_down(rows, cols);
        for &(x, y) in cells {
            c.up[(x % rows) * cols + y % cols] = true;
        }
        c
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_up(&self, x: usize, y: usize) -> bool {
        self.up[(x % self.rows) * self.cols + y % self.cols]
    }

    pub fn spin(&self, x: usize, y: usize) -> Spin {
        self.is_up(x, y).into()
    }

    pub fn up_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.rows * self.cols).filter(|&i| self.up[i]).map(|i| (i / self.cols, i % self.cols))
    }

    pub fn count_up(&self) -> usize {
        self.up.iter().filter(|&&u| u).count()
    }

    /// Number of unequal nearest-neighbour pairs on the torus.
    pub fn perimeter(&self) -> usize {
        let mut p = 0;
        for x in 0..self.rows {
            for y in 0..self.cols {
                p += usize::from(self.is_up(x, y) != self.is_up(x + 1, y));
                p += usize::from(self.is_up(x, y) != self.is_up(x, y + 1));
            }
        }
        p
    }

    /// `#{(x, y) : (x, y) empty and (x+1, y) occupied}` on the torus.
    pub fn upper_perimeter(&self) -> usize {
        let mut n = 0;
        for x in 0..self.rows {
            for y in 0..self.cols {
                n += usize::from(!self.is_up(x, y) && self.is_up(x + 1, y));
            }
        }
        n
    }
}

/// `Π_{x,y} table(σ_{x,y}, σ_{x,y+1}, σ_{x+1,y})`.
pub fn config_amplitude(config: &SpinConfig, table: &WeightTable) -> f64 {
    let mut a = 1.0;
    for x in 0..config.rows {
        for y in 0..config.cols {
            a *= table.get(config.spin(x, y), config.spin(x, y + 1), config.spin(x + 1, y));
        }
    }
    a
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigClass {
    Ground,
    Valid,
    Zero,
}

pub fn classify_config(config: &SpinConfig) -> ConfigClass {
    let mut any_up = false;
    for (x, y) in config.up_cells() {
        any_up = true;
        if !config.is_up(x + 1, y) && !config.is_up(x, y + 1) {
            return ConfigClass::Zero;
        }
    }
    if any_up {
        ConfigClass::Valid
    } else {
        ConfigClass::Ground
    }
}

/// Largest lattice for the exhaustive sum.
pub const MAX_ENUMERATION_SITES: usize = 25;
/// Largest lattice for the two-layer (4^V term) sum.
pub const MAX_TWO_LAYER_SITES: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionFunction {
    pub l1: usize,
    pub l2: usize,
    pub bond_dim: usize,
    pub phys_dim: usize,
    pub kind: TableKind,
    pub z: f64,
    /// Sum over every configuration except all-↓.
    pub z_minus_ground: f64,
    pub ground: f64,
    pub n_nonzero: u64,
    pub n_configs: u64,
}

/// Brute-force sum of `config_amplitude` over all `2^(L1·L2)` upper-layer
/// configurations.
pub fn exact_partition_function(l1: usize, l2: usize, table: &WeightTable) -> Result<PartitionFunction> {
    if l1 < 1 || l2 < 1 {
        return invalid("lattice dimensions must be positive");
    }
    let v = l1 * l2;
    if v > MAX_ENUMERATION_SITES {
        return Err(Error::ResourceLimit(format!(
            "{l1}x{l2} has 2^{v} configurations, cap is 2^{MAX_ENUMERATION_SITES}"
        )));
    }
    // Rows run along the shorter side when the table allows transposition.
    let (rows, cols) = if l2 > l1 && table.is_symmetric() { (l2, l1) } else { (l1, l2) };
    let width = 1usize << cols;
    // pair[r·width + r'] = Π_y t(r_y, r_{y+1}, r'_y) for row r above row r'
    let pair: Vec<f64> = (0..width * width)
        .map(|k| {
            let (r, rn) = (k / width, k % width);
            (0..cols)
                .map(|y| {
                    let s = |row: usize, y: usize| Spin::from(row >> (y % cols) & 1 == 1);
                    table.get(s(r, y), s(r, y + 1), s(rn, y))
                })
                .product()
        })
        .collect();

    struct Acc {
        z: f64,
        nonzero: u64,
    }
    fn descend(pair: &[f64], width: usize, rows_left: usize, first: usize, prev: usize, partial: f64, acc: &mut Acc) {
        if rows_left == 0 {
            let a = partial * pair[prev * width + first];
            acc.z += a;
            acc.nonzero += u64::from(a != 0.0);
            return;
        }
        for r in 0..width {
            descend(pair, width, rows_left - 1, first, r, partial * pair[prev * width + r], acc);
        }
    }
    let parts: Vec<Acc> = (0..width)
        .into_par_iter()
        .map(|first| {
            let mut acc = Acc { z: 0.0, nonzero: 0 };
            descend(&pair, width, rows - 1, first, first, 1.0, &mut acc);
            acc
        })
        .collect();
    let ground = config_amplitude(&SpinConfig::all_down(l1, l2), table);
    let z: f64 = parts.iter().map(|a| a.z).sum();
    let z_rest: f64 = parts[1..].iter().map(|a| a.z).sum::<f64>() + (parts[0].z - ground);
    Ok(PartitionFunction {
        l1,
        l2,
        bond_dim: table.bond_dim,
        phys_dim: table.phys_dim,
        kind: table.kind,
        z,
        z_minus_ground: z_rest,
        ground,
        n_nonzero: parts.iter().map(|a| a.nonzero).sum(),
        n_configs: 1u64 << v,
    })
}

/// Sum of `C · Π exp(−H)` over both layers (`4^V` terms) in complex
/// arithmetic. The imaginary part must cancel.
pub fn two_layer_partition_function(l1: usize, l2: usize, couplings: &IsingCouplings) -> Result<f64> {
    let v = l1 * l2;
    if v > MAX_TWO_LAYER_SITES {
        return Err(Error::ResourceLimit(format!("two-layer sum capped at {MAX_TWO_LAYER_SITES} sites")));
    }
    let norm = couplings.normalization(v);
    let total: C64 = (0u64..1 << v)
        .into_par_iter()
        .map(|upper| {
            let upper = SpinConfig::from_bits(l1, l2, upper);
            (0u64..1 << v)
                .map(|lower| {
                    let mut w = norm;
                    for x in 0..l1 {
                        for y in 0..l2 {
                            let s1 = Spin::from(lower >> (x * l2 + y) & 1 == 1);
                            w *= two_layer_site_weight(
                                couplings,
                                s1,
                                upper.spin(x, y),
                                upper.spin(x, y + 1),
                                upper.spin(x + 1, y),
                            );
                        }
                    }
                    w
                })
                .sum::<C64>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    if total.im.abs() > 1e-10 * total.re.abs().max(1.0) {
        return Err(Error::Internal(format!("two-layer sum has imaginary part {}", total.im)));
    }
    Ok(total.re)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub n_samples: usize,
    /// Sample mean of `⟨Ψ|Ψ⟩`.
    pub mean_norm: f64,
    pub se_mean_norm: f64,
    /// Sample mean of `⟨Ψ|Ψ⟩²`.
    pub second_moment: f64,
    pub se_second_moment: f64,
}

/// Norm samples `⟨Ψ|Ψ⟩` of independent states; sample `i` uses
/// `sample_rng(seed, i)`.
pub fn norm_samples(spec: LatticeSpec, n_samples: usize, seed: u64) -> Result<Vec<f64>> {
    spec.check_caps(crate::state::DEFAULT_AMPLITUDE_CAP)?;
    (0..n_samples as u64).into_par_iter().map(|i| norm_squared(&build_state(spec, &mut sample_rng(seed, i))?)).collect()
}

pub fn mc_second_moment(spec: LatticeSpec, n_samples: usize, seed: u64) -> Result<MomentEstimate> {
    if n_samples < 2 {
        return invalid("need at least two samples");
    }
    let norms = norm_samples(spec, n_samples, seed)?;
    let squares: Vec<f64> = norms.iter().map(|z| z * z).collect();
    Ok(MomentEstimate {
        n_samples,
        mean_norm: mean(&norms),
        se_mean_norm: standard_error_of_mean(&norms)?,
        second_moment: mean(&squares),
        se_second_moment: standard_error_of_mean(&squares)?,
    })
}
