//! Directed polyominoes in the plane and on the torus, and the bridge
//! transformation that maps toric excitations to plane shapes.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spin::{classify_config, ConfigClass, SpinConfig};

pub type Cell = (i32, i32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Frame {
    Plane,
    Toric(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Polyomino {
    cells: BTreeSet<Cell>,
    frame: Frame,
    root: Option<Cell>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolyominoStats {
    /// Area.
    pub m: usize,
    /// Unequal nearest-neighbour pairs.
    pub p: usize,
    /// Upper perimeter: empty `(x, y)` above an occupied `(x+1, y)`.
    pub n: usize,
}

impl Polyomino {
    pub fn plane(cells: impl IntoIterator<Item = Cell>) -> Result<Self> {
        let cells: BTreeSet<Cell> = cells.into_iter().collect();
        if cells.is_empty() {
            return invalid("polyomino needs at least one cell");
        }
        Ok(Self { cells, frame: Frame::Plane, root: None })
    }

    pub fn toric(l: usize, cells: impl IntoIterator<Item = Cell>) -> Result<Self> {
        if l == 0 {
            return invalid("torus size must be positive");
        }
        let li = l as i32;
        let cells: BTreeSet<Cell> = cells.into_iter().map(|(x, y)| (x.rem_euclid(li), y.rem_euclid(li))).collect();
        if cells.is_empty() {
            return invalid("polyomino needs at least one cell");
        }
        Ok(Self { cells, frame: Frame::Toric(l), root: None })
    }

    pub fn with_root(mut self, root: Cell) -> Result<Self> {
        if !self.cells.contains(&root) {
            return invalid(format!("root {root:?} is not a cell"));
        }
        self.root = Some(root);
        Ok(self)
    }

    pub fn cells(&self) -> &BTreeSet<Cell> {
        &self.cells
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn root(&self) -> Option<Cell> {
        self.root
    }

    fn wrap(&self, (x, y): Cell) -> Cell {
        match self.frame {
            Frame::Plane => (x, y),
            Frame::Toric(l) => (x.rem_euclid(l as i32), y.rem_euclid(l as i32)),
        }
    }

    pub fn contains(&self, c: Cell) -> bool {
        self.cells.contains(&self.wrap(c))
    }

    /// Every non-root cell has a successor `(x+1, y)` or `(x, y+1)` in the set.
    pub fn is_directed(&self) -> bool {
        self.cells
            .iter()
            .filter(|&&c| Some(c) != self.root)
            .all(|&(x, y)| self.contains((x + 1, y)) || self.contains((x, y + 1)))
    }

    pub fn stats(&self) -> PolyominoStats {
        let m = self.cells.len();
        let (mut p, mut n) = (0, 0);
        let probe: BTreeSet<Cell> = match self.frame {
            Frame::Toric(l) => {
                let l = l as i32;
                (0..l).flat_map(|x| (0..l).map(move |y| (x, y))).collect()
            }
            // Only cells adjacent to the shape can contribute.
            Frame::Plane => self.cells.iter().flat_map(|&(x, y)| [(x, y), (x - 1, y), (x, y - 1)]).collect(),
        };
        for &(x, y) in &probe {
            let here = self.contains((x, y));
            p += usize::from(here != self.contains((x + 1, y)));
            p += usize::from(here != self.contains((x, y + 1)));
            n += usize::from(!here && self.contains((x + 1, y)));
        }
        PolyominoStats { m, p, n }
    }

    /// `#` for cells, `.` for empty, rows top to bottom.
    pub fn render_ascii(&self) -> String {
        let (x0, x1, y0, y1) = match self.frame {
            Frame::Toric(l) => (0, l as i32 - 1, 0, l as i32 - 1),
            Frame::Plane => (
                self.cells.iter().map(|c| c.0).min().unwrap_or(0),
                self.cells.iter().map(|c| c.0).max().unwrap_or(0),
                self.cells.iter().map(|c| c.1).min().unwrap_or(0),
                self.cells.iter().map(|c| c.1).max().unwrap_or(0),
            ),
        };
        let mut s = String::new();
        for x in x0..=x1 {
            for y in y0..=y1 {
                s.push(match (self.contains((x, y)), self.root == Some((x, y))) {
                    (true, true) => '@',
                    (true, false) => '#',
                    _ => '.',
                });
            }
            s.push('\n');
        }
        s
    }
}

/// Counts `D_{m,n}` indexed `[m][n]` for `0 ≤ m ≤ m_max`, `0 ≤ n ≤ n_max`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolyominoCounts {
    pub m_max: usize,
    pub n_max: usize,
    counts: Vec<Vec<u64>>,
}

impl PolyominoCounts {
    fn zeros(m_max: usize, n_max: usize) -> Self {
        Self { m_max, n_max, counts: vec![vec![0; n_max + 1]; m_max + 1] }
    }

    pub fn get(&self, m: usize, n: usize) -> u64 {
        self.counts.get(m).and_then(|r| r.get(n)).copied().unwrap_or(0)
    }

    pub fn total(&self, m: usize) -> u64 {
        self.counts.get(m).map(|r| r.iter().sum()).unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.counts.iter().enumerate().flat_map(|(m, r)| r.iter().enumerate().map(move |(n, &c)| (m, n, c)))
    }

    fn merge(mut self, other: &Self) -> Self {
        for (m, n, c) in other.iter() {
            self.counts[m][n] += c;
        }
        self
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("m,n,count\n");
        for (m, n, c) in self.iter().filter(|&(m, _, _)| m >= 1) {
            let _ = writeln!(s, "{m},{n},{c}");
        }
        s
    }
}

pub const MAX_ENUMERATION_AREA: usize = 12;

struct Redelmeier<'a> {
    m_max: usize,
    cells: Vec<Cell>,
    marked: HashSet<Cell>,
    counts: &'a mut PolyominoCounts,
}

impl Redelmeier<'_> {
    fn record(&mut self) {
        let set: HashSet<Cell> = self.cells.iter().copied().collect();
        let n = self.cells.iter().filter(|&&(x, y)| !set.contains(&(x - 1, y))).count();
        self.counts.counts[self.cells.len()][n] += 1;
    }

    fn grow(&mut self, mut untried: Vec<Cell>) {
        while let Some(c) = untried.pop() {
            self.place(c, untried.clone());
        }
    }

    fn place(&mut self, c: Cell, mut untried: Vec<Cell>) {
        self.cells.push(c);
        self.record();
        if self.cells.len() < self.m_max {
            let fresh: Vec<Cell> =
                [(c.0 - 1, c.1), (c.0, c.1 - 1)].into_iter().filter(|nb| self.marked.insert(*nb)).collect();
            untried.extend(&fresh);
            self.grow(untried);
            for nb in fresh {
                self.marked.remove(&nb);
            }
        }
        self.cells.pop();
    }
}

/// Exact `D_{m,n}` for directed polyominoes rooted at `(0, 0)` (all cells in
/// the quadrant `x ≤ 0, y ≤ 0`), by Redelmeier growth along predecessor
/// edges `(x−1, y)`, `(x, y−1)`.
pub fn enumerate_directed(m_max: usize) -> Result<PolyominoCounts> {
    if m_max > MAX_ENUMERATION_AREA {
        return Err(Error::ResourceLimit(format!("exhaustive enumeration is capped at area {MAX_ENUMERATION_AREA}")));
    }
    let mut total = PolyominoCounts::zeros(m_max, m_max);
    if m_max == 0 {
        return Ok(total);
    }
    // The root is always present; its two predecessors split the search.
    let root = (0, 0);
    let first = [(-1, 0), (0, -1)];
    total.counts[1][1] = 1;
    if m_max == 1 {
        return Ok(total);
    }
    let branches: Vec<PolyominoCounts> = (0..first.len())
        .into_par_iter()
        .map(|i| {
            let mut counts = PolyominoCounts::zeros(m_max, m_max);
            let mut r = Redelmeier {
                m_max,
                cells: vec![root],
                marked: [root, first[0], first[1]].into_iter().collect(),
                counts: &mut counts,
            };
            // Same state as the i-th pop of the root's untried list.
            r.place(first[first.len() - 1 - i], first[..first.len() - 1 - i].to_vec());
            counts
        })
        .collect();
    for b in &branches {
        total = total.merge(b);
    }
    Ok(total)
}

/// Denominator `1 − q(2+p) + q²(1−p)` of the generating function.
fn gen_fun_denominator(q: f64, p: f64) -> f64 {
    1.0 - q * (2.0 + p) + q * q * (1.0 - p)
}

/// `G(q, p) = p/2 · (√[(1+q)(1+q−qp) / (1 − q(2+p) + q²(1−p))] − 1)`.
///
/// Valid for `q, p ≥ 0` with `q` below the first zero of the denominator.
pub fn gen_fun_g(q: f64, p: f64) -> Result<f64> {
    if !(q.is_finite() && p.is_finite()) || q < 0.0 || p < 0.0 {
        return Err(Error::Domain(format!("G({q}, {p}) needs finite q, p >= 0")));
    }
    let den = gen_fun_denominator(q, p);
    // smallest positive root of (1−p)q² − (2+p)q + 1
    let (a, b) = (1.0 - p, -(2.0 + p));
    let q_star = if a.abs() < 1e-15 {
        -1.0 / b
    } else {
        let disc = b * b - 4.0 * a;
        let r1 = (-b - disc.sqrt()) / (2.0 * a);
        let r2 = (-b + disc.sqrt()) / (2.0 * a);
        [r1, r2].into_iter().filter(|r| *r > 0.0).fold(f64::INFINITY, f64::min)
    };
    if den <= 0.0 || q >= q_star {
        return Err(Error::Domain(format!("G({q}, {p}): outside the convergence region (denominator {den})")));
    }
    let radicand = (1.0 + q) * (1.0 + q - q * p) / den;
    if radicand <= 0.0 {
        return Err(Error::Domain(format!("G({q}, {p}): radicand {radicand} is not positive")));
    }
    Ok(p / 2.0 * (radicand.sqrt() - 1.0))
}

pub const MAX_SERIES_AREA: usize = 40;

mod series {
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::{One, Zero};

    /// Truncated bivariate polynomial, `c[i][j]` multiplies `q^i p^j`.
    #[derive(Clone)]
    pub struct Poly<T> {
        pub c: Vec<Vec<T>>,
    }

    impl<T: Clone + Zero + One> Poly<T>
    where
        for<'a> &'a T: std::ops::Mul<&'a T, Output = T>,
    {
        pub fn zero(mq: usize, mp: usize) -> Self {
            Self { c: vec![vec![T::zero(); mp + 1]; mq + 1] }
        }

        pub fn one(mq: usize, mp: usize) -> Self {
            let mut s = Self::zero(mq, mp);
            s.c[0][0] = T::one();
            s
        }

        fn dims(&self) -> (usize, usize) {
            (self.c.len() - 1, self.c[0].len() - 1)
        }

        pub fn mul(&self, other: &Self) -> Self {
            let (mq, mp) = self.dims();
            let mut out = Self::zero(mq, mp);
            for (i, row) in self.c.iter().enumerate() {
                for (j, a) in row.iter().enumerate().filter(|(_, a)| !a.is_zero()) {
                    for (k, orow) in other.c.iter().enumerate().take(mq + 1 - i) {
                        for (l, b) in orow.iter().enumerate().take(mp + 1 - j) {
                            if !b.is_zero() {
                                out.c[i + k][j + l] = out.c[i + k][j + l].clone() + a * b;
                            }
                        }
                    }
                }
            }
            out
        }

        pub fn add(&self, other: &Self) -> Self {
            let mut out = self.clone();
            for (i, row) in other.c.iter().enumerate() {
                for (j, b) in row.iter().enumerate() {
                    out.c[i][j] = out.c[i][j].clone() + b.clone();
                }
            }
            out
        }
    }

    pub fn from_terms(mq: usize, mp: usize, terms: &[(usize, usize, i64)]) -> Poly<BigInt> {
        let mut p = Poly::zero(mq, mp);
        for &(i, j, v) in terms {
            if i <= mq && j <= mp {
                p.c[i][j] += BigInt::from(v);
            }
        }
        p
    }

    /// `binom(1/2, j)`.
    pub fn half_binomial(j: usize) -> BigRational {
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        let mut b = BigRational::one();
        for i in 0..j {
            b = b * (half.clone() - BigRational::from_integer(BigInt::from(i)))
                / BigRational::from_integer(BigInt::from(i + 1));
        }
        b
    }

    pub fn to_rational(p: &Poly<BigInt>) -> Poly<BigRational> {
        Poly { c: p.c.iter().map(|r| r.iter().map(|v| BigRational::from_integer(v.clone())).collect()).collect() }
    }
}

/// Exact coefficients of `G(q, p)` up to `q^m_max p^n_max`, by the binomial
/// series of the square root over the rationals.
pub fn series_coefficients(m_max: usize, n_max: usize) -> Result<PolyominoCounts> {
    use num_bigint::BigInt;
    use num_traits::{Signed, ToPrimitive, Zero};
    use series::*;

    if m_max > MAX_SERIES_AREA {
        return Err(Error::ResourceLimit(format!("series expansion is capped at order {MAX_SERIES_AREA}")));
    }
    let mut out = PolyominoCounts::zeros(m_max, n_max);
    if n_max == 0 {
        return Ok(out);
    }
    // √R − 1 is needed up to p^(n_max − 1) because of the p/2 prefactor.
    let (mq, mp) = (m_max, n_max - 1);
    // R = num / den, num = (1+q)(1+q−qp) = 1 + 2q − qp + q² − q²p,
    // den = 1 − u with u = 2q + qp − q² + q²p.
    let num = from_terms(mq, mp, &[(0, 0, 1), (1, 0, 2), (1, 1, -1), (2, 0, 1), (2, 1, -1)]);
    let u = from_terms(mq, mp, &[(1, 0, 2), (1, 1, 1), (2, 0, -1), (2, 1, 1)]);
    let mut inv_den = Poly::<BigInt>::one(mq, mp);
    let mut u_pow = Poly::<BigInt>::one(mq, mp);
    for _ in 0..mq {
        u_pow = u_pow.mul(&u);
        inv_den = inv_den.add(&u_pow);
    }
    let mut x = num.mul(&inv_den);
    x.c[0][0] -= BigInt::from(1);
    let xr = to_rational(&x);
    let mut acc = Poly::<num_rational::BigRational>::zero(mq, mp);
    let mut x_pow = to_rational(&Poly::<BigInt>::one(mq, mp));
    for j in 1..=mq {
        x_pow = x_pow.mul(&xr);
        let b = half_binomial(j);
        for (i, row) in x_pow.c.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                if !v.is_zero() {
                    acc.c[i][k] = acc.c[i][k].clone() + v * &b;
                }
            }
        }
    }
    for m in 0..=m_max {
        for n in 1..=n_max {
            let v = acc.c[m][n - 1].clone() / num_rational::BigRational::from_integer(BigInt::from(2));
            if !v.is_integer() {
                return Err(Error::Internal(format!("coefficient of q^{m} p^{n} is {v}, not an integer")));
            }
            let v = v.to_integer();
            if v.is_negative() {
                return Err(Error::Internal(format!("coefficient of q^{m} p^{n} is negative ({v})")));
            }
            out.counts[m][n] =
                v.to_u64().ok_or_else(|| Error::Internal(format!("coefficient of q^{m} p^{n} overflows u64")))?;
        }
    }
    Ok(out)
}

pub const MAX_TORIC_SIZE: usize = 4;

/// All valid (non-ground, nonzero) upper-layer configurations on an `L × L`
/// torus.
pub fn enumerate_toric(l: usize) -> Result<Vec<SpinConfig>> {
    if l > MAX_TORIC_SIZE {
        return Err(Error::ResourceLimit(format!("toric scan is capped at L = {MAX_TORIC_SIZE}")));
    }
    if l == 0 {
        return invalid("torus size must be positive");
    }
    Ok((0u64..1 << (l * l))
        .into_par_iter()
        .map(|b| SpinConfig::from_bits(l, l, b))
        .filter(|c| classify_config(c) == ConfigClass::Valid)
        .collect())
}

/// Out-edge of an ↑-cell: down if `(x+1, y)` is ↑, otherwise right.
fn out_edge(config: &SpinConfig, (x, y): (usize, usize)) -> ((usize, usize), bool) {
    let (r, c) = (config.rows(), config.cols());
    if config.is_up(x + 1, y) {
        (((x + 1) % r, y), true)
    } else {
        ((x, (y + 1) % c), false)
    }
}

/// Weakly connected components of the out-edge graph, each with its cycle
/// vertices sorted lexicographically.
fn components(config: &SpinConfig) -> Vec<(Vec<(usize, usize)>, Vec<(usize, usize)>)> {
    let cells: Vec<(usize, usize)> = config.up_cells().collect();
    let cols = config.cols();
    let idx = |(x, y): (usize, usize)| x * cols + y;
    let mut parent: Vec<usize> = (0..config.rows() * cols).collect();
    fn find(p: &mut [usize], mut a: usize) -> usize {
        while p[a] != a {
            p[a] = p[p[a]];
            a = p[a];
        }
        a
    }
    for &c in &cells {
        let (t, _) = out_edge(config, c);
        let (a, b) = (find(&mut parent, idx(c)), find(&mut parent, idx(t)));
        parent[a] = b;
    }
    let mut groups: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for &c in &cells {
        let r = find(&mut parent, idx(c));
        groups.entry(r).or_default().push(c);
    }
    groups
        .into_values()
        .map(|members| {
            // Walking |members| steps from any vertex lands on the cycle.
            let mut v = members[0];
            for _ in 0..members.len() {
                v = out_edge(config, v).0;
            }
            let mut cycle = vec![v];
            let mut w = out_edge(config, v).0;
            while w != v {
                cycle.push(w);
                w = out_edge(config, w).0;
            }
            cycle.sort();
            let mut members = members;
            members.sort();
            (members, cycle)
        })
        .collect()
}

/// Bridge transformation with the root of each component taken as the
/// `root_index`-th cycle vertex (mod cycle length) in lexicographic order.
pub fn bridge_transform_with_root(config: &SpinConfig, root_index: usize) -> Result<Vec<Polyomino>> {
    if config.rows() != config.cols() {
        return invalid("bridge transformation needs a square torus");
    }
    if classify_config(config) != ConfigClass::Valid {
        return invalid("bridge transformation needs a valid excited configuration");
    }
    components(config)
        .into_iter()
        .map(|(members, cycle)| {
            let root = cycle[root_index % cycle.len()];
            let plane = members.iter().map(|&v| {
                let (mut w, mut down, mut right) = (v, 0i32, 0i32);
                while w != root {
                    let (t, is_down) = out_edge(config, w);
                    if is_down {
                        down += 1;
                    } else {
                        right += 1;
                    }
                    w = t;
                }
                (-down, -right)
            });
            Polyomino::plane(plane)?.with_root((0, 0))
        })
        .collect()
}

/// Bridge transformation with the lexicographically smallest cycle vertex as
/// root.
pub fn bridge_transform(config: &SpinConfig) -> Result<Vec<Polyomino>> {
    bridge_transform_with_root(config, 0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeViolation {
    pub config: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeReport {
    pub l: usize,
    pub n_valid: usize,
    pub max_pieces: usize,
    pub violations: Vec<BridgeViolation>,
}

impl BridgeReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn check_bridge(config: &SpinConfig) -> (usize, Vec<String>) {
    let l = config.rows();
    let toric_m = config.count_up();
    let toric_n = config.upper_perimeter();
    let pieces = match bridge_transform(config) {
        Ok(p) => p,
        Err(e) => return (0, vec![e.to_string()]),
    };
    let k = pieces.len();
    let stats: Vec<PolyominoStats> = pieces.iter().map(Polyomino::stats).collect();
    let sum_m: usize = stats.iter().map(|s| s.m).sum();
    let sum_n: usize = stats.iter().map(|s| s.n).sum();
    let mut bad = Vec::new();
    if k * l > toric_m || toric_m > l * l {
        bad.push(format!("k = {k} violates k <= m/L <= L with m = {toric_m}"));
    }
    if let Some(s) = stats.iter().find(|s| s.m < l) {
        bad.push(format!("piece of area {} < L", s.m));
    }
    if sum_m != toric_m {
        bad.push(format!("areas sum to {sum_m}, expected {toric_m}"));
    }
    if sum_n < toric_n || sum_n > toric_n + k {
        bad.push(format!("upper perimeters sum to {sum_n}, outside [{toric_n}, {}]", toric_n + k));
    }
    if let Some(p) = pieces.iter().find(|p| !p.is_directed()) {
        bad.push(format!("piece is not directed:\n{}", p.render_ascii()));
    }
    (k, bad)
}

/// Exhaustive check of the bridge-transformation output over every valid
/// configuration on the `L × L` torus.
pub fn verify_bridge_lemma(l: usize) -> Result<BridgeReport> {
    let configs = enumerate_toric(l)?;
    let results: Vec<(usize, Vec<BridgeViolation>)> = configs
        .par_iter()
        .map(|c| {
            let (k, bad) = check_bridge(c);
            let art = Polyomino::toric(l, c.up_cells().map(|(x, y)| (x as i32, y as i32)))
                .map(|p| p.render_ascii())
                .unwrap_or_default();
            (k, bad.into_iter().map(|reason| BridgeViolation { config: art.clone(), reason }).collect())
        })
        .collect();
    Ok(BridgeReport {
        l,
        n_valid: configs.len(),
        max_pieces: results.iter().map(|r| r.0).max().unwrap_or(0),
        violations: results.into_iter().flat_map(|r| r.1).collect(),
    })
}

/// `Σ_k Σ_{c ≤ k} Σ_{ordered m_i ≥ L, Σm_i = m, Σn_i = n + c} Π L² D_{m_i, n_i}`,
/// the bound on the number of toric configurations with area `m` and upper
/// perimeter `n`. `plane` must cover area `m` and upper perimeter `n + m/L`.
pub fn toric_count_bound(l: usize, m: usize, n: usize, plane: &PolyominoCounts) -> Result<u128> {
    if l == 0 {
        return invalid("torus size must be positive");
    }
    let k_max = m / l;
    let n_top = n + k_max;
    if plane.m_max < m || plane.n_max < n_top {
        return invalid("plane counts do not cover the requested range");
    }
    let l2 = (l * l) as u128;
    // piece[m'][n'] = L² D_{m',n'} for m' ≥ L
    let piece = |mm: usize, nn: usize| {
        if mm >= l {
            l2 * plane.get(mm, nn) as u128
        } else {
            0
        }
    };
    let overflow = || Error::ResourceLimit("toric count bound overflows u128".into());
    // conv[m'][n']: number of ordered k-tuples so far
    let mut conv = vec![vec![0u128; n_top + 1]; m + 1];
    conv[0][0] = 1;
    let mut total = 0u128;
    for k in 1..=k_max {
        let mut next = vec![vec![0u128; n_top + 1]; m + 1];
        for (a, row) in conv.iter().enumerate() {
            for (b, &v) in row.iter().enumerate().filter(|(_, v)| **v != 0) {
                for mm in l..=m - a {
                    for nn in 0..=n_top - b {
                        let w = piece(mm, nn);
                        if w != 0 {
                            let add = v.checked_mul(w).ok_or_else(overflow)?;
                            next[a + mm][b + nn] = next[a + mm][b + nn].checked_add(add).ok_or_else(overflow)?;
                        }
                    }
                }
            }
        }
        conv = next;
        for c in 0..=k {
            total = total.checked_add(conv[m][n + c]).ok_or_else(overflow)?;
        }
    }
    Ok(total)
}
