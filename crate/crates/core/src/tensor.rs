//! Dense complex tensors and label-based contraction.
//!
//! Everything here is exact and dense. A [`DenseTensor`] is a row-major block of
//! `Complex64` values with a shape; [`contract`] evaluates a full sum over
//! repeated labels by a sequence of pairwise matrix products.

use std::collections::HashMap;
use std::fmt::Debug;
use std::hash::Hash;

use ndarray::ArrayView2;
use num_complex::Complex64;

use crate::error::{invalid, shape, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl DenseTensor {
    /// Checked constructor: every extent positive, `data.len()` equal to the
    /// product of the shape, all entries finite.
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        if shape.contains(&0) {
            return shape_err_zero(&shape);
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return crate::error::shape(format!("shape {:?} needs {} entries, got {}", shape, len, data.len()));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return invalid("tensor entries must be finite");
        }
        Ok(Self { shape, data })
    }

    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<C64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self { shape, data: vec![ZERO; len] }
    }

    pub fn scalar(value: C64) -> Self {
        Self { shape: Vec::new(), data: vec![value] }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(vec![n, n]);
        for i in 0..n {
            t.data[i * n + i] = ONE;
        }
        t
    }

    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..len {
            data.push(f(&idx));
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Self { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    fn offset(&self, idx: &[usize]) -> usize {
        assert_eq!(idx.len(), self.shape.len(), "index rank mismatch");
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &e)| {
            assert!(i < e, "index {i} out of range for extent {e}");
            acc * e + i
        })
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: C64) {
        let o = self.offset(idx);
        self.data[o] = value;
    }

    /// The single entry of a rank-0 (or one-element) tensor.
    pub fn into_scalar(self) -> Result<C64> {
        if self.data.len() != 1 {
            return shape(format!("expected a scalar, got shape {:?}", self.shape));
        }
        Ok(self.data[0])
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return crate::error::shape(format!("cannot reshape {:?} into {:?}", self.shape, shape));
        }
        Ok(Self { shape, data: self.data })
    }

    /// Transpose axes: output axis `i` is input axis `axes[i]`.
    pub fn permute(&self, axes: &[usize]) -> Self {
        let rank = self.shape.len();
        assert_eq!(axes.len(), rank, "permutation rank mismatch");
        if axes.iter().enumerate().all(|(i, &a)| i == a) {
            return self.clone();
        }
        let mut in_strides = vec![1usize; rank];
        for ax in (0..rank.saturating_sub(1)).rev() {
            in_strides[ax] = in_strides[ax + 1] * self.shape[ax + 1];
        }
        let out_shape: Vec<usize> = axes.iter().map(|&a| self.shape[a]).collect();
        let strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        if rank == 0 {
            return self.clone();
        }
        // Innermost output axis is walked in a tight loop.
        let inner_ext = out_shape[rank - 1];
        let inner_stride = strides[rank - 1];
        let outer = self.data.len() / inner_ext;
        let mut idx = vec![0usize; rank - 1];
        let mut base = 0usize;
        for _ in 0..outer {
            let mut o = base;
            for _ in 0..inner_ext {
                data.push(self.data[o]);
                o += inner_stride;
            }
            for ax in (0..rank - 1).rev() {
                idx[ax] += 1;
                base += strides[ax];
                if idx[ax] < out_shape[ax] {
                    break;
                }
                base -= strides[ax] * out_shape[ax];
                idx[ax] = 0;
            }
        }
        Self { shape: out_shape, data }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|z| z * c).collect() }
    }

    pub fn conj(&self) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Full inner product `Σ conj(self) · other` over matching shapes.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.shape != other.shape {
            return shape(format!("inner product of {:?} and {:?}", self.shape, other.shape));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape, other.shape, "shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

fn shape_err_zero<T>(s: &[usize]) -> Result<T> {
    shape(format!("zero extent in shape {s:?}"))
}

/// Row-major product of an `m×k` and a `k×n` matrix.
pub fn matmul(a: &[C64], b: &[C64], m: usize, k: usize, n: usize) -> Vec<C64> {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    if m == 0 || n == 0 {
        return Vec::new();
    }
    if k == 0 {
        return vec![ZERO; m * n];
    }
    let av = ArrayView2::from_shape((m, k), a).expect("lhs shape");
    let bv = ArrayView2::from_shape((k, n), b).expect("rhs shape");
    let c = av.dot(&bv);
    if c.is_standard_layout() {
        c.into_raw_vec_and_offset().0
    } else {
        c.iter().copied().collect()
    }
}

/// Conjugate transpose of a row-major `m×n` matrix.
pub fn adjoint(a: &[C64], m: usize, n: usize) -> Vec<C64> {
    let mut out = vec![ZERO; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a[i * n + j].conj();
        }
    }
    out
}

/// `Σ_ij a[i,j] · b[j,i]` for square row-major matrices of size `n`.
pub fn trace_of_product(a: &[C64], b: &[C64], n: usize) -> C64 {
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += a[i * n + j] * b[j * n + i];
        }
    }
    acc
}

/// How [`contract_with_order`] chooses the next pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContractionOrder {
    /// Repeatedly contract the pair with the smallest intermediate (ties by
    /// flop count, then by position).
    Greedy,
    /// Always fold the running result with the next input, in input order.
    LeftToRight,
}

/// Sum over every label that appears twice; keep labels that appear once, in
/// the order given by `output`.
pub fn contract<L>(tensors: &[&DenseTensor], labels: &[&[L]], output: &[L]) -> Result<DenseTensor>
where
    L: Copy + Eq + Hash + Debug,
{
    contract_with_order(tensors, labels, output, ContractionOrder::Greedy)
}

pub fn contract_with_order<L>(
    tensors: &[&DenseTensor],
    labels: &[&[L]],
    output: &[L],
    order: ContractionOrder,
) -> Result<DenseTensor>
where
    L: Copy + Eq + Hash + Debug,
{
    if tensors.is_empty() {
        return invalid("contract needs at least one tensor");
    }
    if tensors.len() != labels.len() {
        return invalid(format!("{} tensors but {} label lists", tensors.len(), labels.len()));
    }
    let mut extent: HashMap<L, usize> = HashMap::new();
    let mut count: HashMap<L, usize> = HashMap::new();
    for (t, ls) in tensors.iter().zip(labels) {
        if t.rank() != ls.len() {
            return shape(format!("tensor of rank {} given {} labels", t.rank(), ls.len()));
        }
        for (&l, &e) in ls.iter().zip(t.shape()) {
            *count.entry(l).or_default() += 1;
            match extent.get(&l) {
                Some(&prev) if prev != e => {
                    return shape(format!("label {l:?} has extents {prev} and {e}"));
                }
                _ => {
                    extent.insert(l, e);
                }
            }
        }
    }
    for (i, l) in output.iter().enumerate() {
        match count.get(l) {
            None => return invalid(format!("output label {l:?} absent from inputs")),
            Some(&c) if c != 1 => return invalid(format!("output label {l:?} appears {c} times in inputs")),
            _ => {}
        }
        if output[..i].contains(l) {
            return invalid(format!("output label {l:?} repeated"));
        }
    }
    for (l, &c) in &count {
        if c > 2 {
            return invalid(format!("label {l:?} appears {c} times"));
        }
        if c == 1 && !output.contains(l) {
            return invalid(format!("label {l:?} appears once but is not an output label"));
        }
    }

    let mut work: Vec<(DenseTensor, Vec<L>)> =
        tensors.iter().zip(labels).map(|(t, ls)| trace_repeated((*t).clone(), ls.to_vec())).collect();

    while work.len() > 1 {
        let (i, j) = match order {
            ContractionOrder::LeftToRight => (0, 1),
            ContractionOrder::Greedy => pick_pair(&work, &extent),
        };
        let (b, lb) = work.remove(j);
        let (a, la) = work.remove(i);
        let merged = contract_pair(&a, &la, &b, &lb);
        work.insert(i, merged);
    }
    let (t, ls) = work.pop().expect("one tensor left");
    let axes: Vec<usize> =
        output.iter().map(|l| ls.iter().position(|x| x == l).expect("output label present")).collect();
    Ok(t.permute(&axes))
}

fn pick_pair<L: Copy + Eq + Hash>(work: &[(DenseTensor, Vec<L>)], extent: &HashMap<L, usize>) -> (usize, usize) {
    let mut best: Option<((bool, usize, usize), (usize, usize))> = None;
    for i in 0..work.len() {
        for j in i + 1..work.len() {
            let (la, lb) = (&work[i].1, &work[j].1);
            let shared: usize = la.iter().filter(|l| lb.contains(l)).map(|l| extent[l]).product();
            let connected = la.iter().any(|l| lb.contains(l));
            let out: usize = la
                .iter()
                .filter(|l| !lb.contains(l))
                .chain(lb.iter().filter(|l| !la.contains(l)))
                .map(|l| extent[l])
                .product();
            let key = (!connected, out, out.saturating_mul(shared));
            if best.as_ref().is_none_or(|(k, _)| key < *k) {
                best = Some((key, (i, j)));
            }
        }
    }
    best.expect("at least two tensors").1
}

fn trace_repeated<L: Copy + Eq>(mut t: DenseTensor, mut ls: Vec<L>) -> (DenseTensor, Vec<L>) {
    loop {
        let dup = (0..ls.len()).find_map(|i| (i + 1..ls.len()).find(|&j| ls[j] == ls[i]).map(|j| (i, j)));
        let Some((i, j)) = dup else { return (t, ls) };
        let rest: Vec<usize> = (0..ls.len()).filter(|&a| a != i && a != j).collect();
        let mut axes = rest.clone();
        axes.push(i);
        axes.push(j);
        let p = t.permute(&axes);
        let e = t.shape[i];
        let outer: usize = rest.iter().map(|&a| t.shape[a]).product();
        let mut data = vec![ZERO; outer];
        for (o, slot) in data.iter_mut().enumerate() {
            let base = o * e * e;
            *slot = (0..e).map(|k| p.data[base + k * e + k]).sum();
        }
        let shape: Vec<usize> = rest.iter().map(|&a| t.shape[a]).collect();
        ls = rest.iter().map(|&a| ls[a]).collect();
        t = DenseTensor::from_parts(shape, data);
    }
}

fn contract_pair<L: Copy + Eq>(a: &DenseTensor, la: &[L], b: &DenseTensor, lb: &[L]) -> (DenseTensor, Vec<L>) {
    let shared: Vec<L> = la.iter().copied().filter(|l| lb.contains(l)).collect();
    let pos = |ls: &[L], l: &L| ls.iter().position(|x| x == l).unwrap();
    let free_a: Vec<usize> = (0..la.len()).filter(|&i| !shared.contains(&la[i])).collect();
    let free_b: Vec<usize> = (0..lb.len()).filter(|&i| !shared.contains(&lb[i])).collect();
    let sh_a: Vec<usize> = shared.iter().map(|l| pos(la, l)).collect();
    let sh_b: Vec<usize> = shared.iter().map(|l| pos(lb, l)).collect();

    let axes_a: Vec<usize> = free_a.iter().chain(&sh_a).copied().collect();
    let axes_b: Vec<usize> = sh_b.iter().chain(&free_b).copied().collect();
    let pa = a.permute(&axes_a);
    let pb = b.permute(&axes_b);
    let m: usize = free_a.iter().map(|&i| a.shape[i]).product();
    let k: usize = sh_a.iter().map(|&i| a.shape[i]).product();
    let n: usize = free_b.iter().map(|&i| b.shape[i]).product();
    let data = matmul(&pa.data, &pb.data, m, k, n);
    let shape: Vec<usize> = free_a.iter().map(|&i| a.shape[i]).chain(free_b.iter().map(|&i| b.shape[i])).collect();
    let labels: Vec<L> = free_a.iter().map(|&i| la[i]).chain(free_b.iter().map(|&i| lb[i])).collect();
    (DenseTensor::from_parts(shape, data), labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> DenseTensor {
        DenseTensor::from_fn(shape, |_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    #[test]
    fn new_rejects_bad_input() {
        assert!(matches!(DenseTensor::new(vec![2, 2], vec![ONE; 3]), Err(Error::Shape(_))));
        assert!(matches!(DenseTensor::new(vec![0], vec![]), Err(Error::Shape(_))));
        let nan = C64::new(f64::NAN, 0.0);
        assert!(matches!(DenseTensor::new(vec![1], vec![nan]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn trace_of_identity() {
        let id = DenseTensor::identity(8);
        let t = contract(&[&id], &[&['a', 'a']], &[]).unwrap();
        assert_eq!(t.into_scalar().unwrap(), C64::new(8.0, 0.0));
    }

    #[test]
    fn permute_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = random_tensor(vec![2, 3, 4, 5], &mut rng);
        let p = t.permute(&[2, 0, 3, 1]);
        assert_eq!(p.shape(), &[4, 2, 5, 3]);
        assert_eq!(p.get(&[3, 1, 4, 2]), t.get(&[1, 2, 3, 4]));
        let back = p.permute(&[1, 3, 0, 2]);
        assert_eq!(back, t);
    }

    #[test]
    fn matrix_product_matches_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_tensor(vec![3, 4], &mut rng);
        let b = random_tensor(vec![4, 5], &mut rng);
        let c = contract(&[&a, &b], &[&[0, 1], &[1, 2]], &[0, 2]).unwrap();
        for i in 0..3 {
            for j in 0..5 {
                let want: C64 = (0..4).map(|k| a.get(&[i, k]) * b.get(&[k, j])).sum();
                assert!((c.get(&[i, j]) - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn orders_agree_on_a_triangle_network() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_tensor(vec![3, 4, 2], &mut rng);
        let b = random_tensor(vec![4, 5, 3], &mut rng);
        let c = random_tensor(vec![5, 3, 6], &mut rng);
        let ls: [&[char]; 3] = [&['i', 'j', 'x'], &['j', 'k', 'y'], &['k', 'i', 'z']];
        let out = ['x', 'y', 'z'];
        let g = contract_with_order(&[&a, &b, &c], &ls, &out, ContractionOrder::Greedy).unwrap();
        let l = contract_with_order(&[&a, &b, &c], &ls, &out, ContractionOrder::LeftToRight).unwrap();
        let ls2: [&[char]; 3] = [ls[2], ls[0], ls[1]];
        let r = contract_with_order(&[&c, &a, &b], &ls2, &out, ContractionOrder::LeftToRight).unwrap();
        let scale = g.max_abs();
        assert!(g.max_abs_diff(&l) <= 1e-10 * scale);
        assert!(g.max_abs_diff(&r) <= 1e-10 * scale);
    }

    #[test]
    fn label_errors() {
        let a = DenseTensor::zeros(vec![2, 3]);
        let b = DenseTensor::zeros(vec![4, 2]);
        assert!(matches!(contract(&[&a, &b], &[&[0, 1], &[1, 0]], &[]), Err(Error::Shape(_))));
        assert!(matches!(contract(&[&a], &[&[0, 1]], &[0, 1, 2]), Err(Error::InvalidArgument(_))));
        assert!(matches!(contract(&[&a], &[&[0, 1]], &[0]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn partial_trace_inside_one_tensor() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = random_tensor(vec![3, 2, 3], &mut rng);
        let r = contract(&[&t], &[&['a', 'b', 'a']], &['b']).unwrap();
        for b in 0..2 {
            let want: C64 = (0..3).map(|a| t.get(&[a, b, a])).sum();
            assert!((r.get(&[b]) - want).norm() < 1e-14);
        }
    }

    #[test]
    fn outer_product_when_disconnected() {
        let a = DenseTensor::new(vec![2], vec![ONE, C64::new(2.0, 0.0)]).unwrap();
        let b = DenseTensor::new(vec![2], vec![C64::new(0.0, 1.0), ONE]).unwrap();
        let r = contract(&[&a, &b], &[&[0], &[1]], &[1, 0]).unwrap();
        assert_eq!(r.get(&[0, 1]), C64::new(0.0, 2.0));
    }

    proptest::proptest! {
        #[test]
        fn contraction_is_multilinear(seed in 0u64..1000, re in -3.0f64..3.0, im in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_tensor(vec![2, 3], &mut rng);
            let b = random_tensor(vec![3, 4, 2], &mut rng);
            let c = C64::new(re, im);
            let ls: [&[u8]; 2] = [&[0, 1], &[1, 2, 0]];
            let base = contract(&[&a, &b], &ls, &[2]).unwrap();
            let scaled = contract(&[&a.scale(c), &b], &ls, &[2]).unwrap();
            let expect = base.scale(c);
            proptest::prop_assert!(scaled.max_abs_diff(&expect) <= 1e-12 * (1.0 + expect.max_abs()));
        }
    }
}
