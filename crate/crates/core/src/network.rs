//! Contractions of the toric network.
//!
//! The torus is cut into a ring of slices along its longer axis. Every slice
//! is itself a ring of sites along the shorter axis and is contracted into a
//! transfer operator acting on the bonds that cross between slices. Values
//! are traces of the product of these operators, and gradients come from the
//! slice environments.

use crate::error::{invalid, Error, Result};
use crate::haar::HermitianMatrix;
use crate::state::{LatticeSpec, TNState};
use crate::tensor::{adjoint, contract, contract_with_order, matmul, ContractionOrder, DenseTensor, C64, ONE, ZERO};

const NORM_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SliceAxis {
    Columns,
    Rows,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Geometry {
    pub axis: SliceAxis,
    pub n_slices: usize,
    pub slice_len: usize,
}

impl Geometry {
    pub fn of(spec: &LatticeSpec) -> Self {
        if spec.cols >= spec.rows {
            Self { axis: SliceAxis::Columns, n_slices: spec.cols, slice_len: spec.rows }
        } else {
            Self { axis: SliceAxis::Rows, n_slices: spec.rows, slice_len: spec.cols }
        }
    }

    pub fn site(&self, spec: &LatticeSpec, slice: usize, pos: usize) -> usize {
        match self.axis {
            SliceAxis::Columns => spec.site_index(pos, slice),
            SliceAxis::Rows => spec.site_index(slice, pos),
        }
    }

    /// `[up, left, down, right]` → `[cross_in, inner_in, inner_out, cross_out]`.
    fn axes(&self, rank: usize) -> Vec<usize> {
        let mut a = match self.axis {
            SliceAxis::Columns => vec![1, 0, 2, 3],
            SliceAxis::Rows => vec![0, 1, 3, 2],
        };
        a.extend(4..rank);
        a
    }

    pub fn canonical(&self, t: &DenseTensor) -> DenseTensor {
        t.permute(&self.axes(t.rank()))
    }
}

const A: u32 = 0;
const B: u32 = 1000;
const P: u32 = 2000;
const R: u32 = 3000;

fn site_labels(i: usize, s: usize, phys: bool) -> Vec<u32> {
    let i32_ = i as u32;
    let prev = ((i + s - 1) % s) as u32;
    let mut l = vec![A + i32_, R + prev, R + i32_, B + i32_];
    if phys {
        l.push(P + i32_);
    }
    l
}

/// One slice as an operator stack `[p_0..p_{s−1}, a_0..a_{s−1}, b_0..b_{s−1}]`.
struct SliceOp {
    n_phys: usize,
    k: usize,
    data: Vec<C64>,
}

fn slice_operator(tensors: &[&DenseTensor]) -> Result<SliceOp> {
    let s = tensors.len();
    let phys = tensors[0].rank() == 5;
    let labels: Vec<Vec<u32>> = (0..s).map(|i| site_labels(i, s, phys)).collect();
    let label_refs: Vec<&[u32]> = labels.iter().map(|l| l.as_slice()).collect();
    let mut out: Vec<u32> = Vec::new();
    if phys {
        out.extend((0..s as u32).map(|i| P + i));
    }
    out.extend((0..s as u32).map(|i| A + i));
    out.extend((0..s as u32).map(|i| B + i));
    let t = contract_with_order(tensors, &label_refs, &out, ContractionOrder::LeftToRight)?;
    let k: usize = tensors.iter().map(|t| t.shape()[0]).product();
    let n_phys = if phys { tensors.iter().map(|t| t.shape()[4]).product() } else { 1 };
    Ok(SliceOp { n_phys, k, data: t.into_data() })
}

/// `Tr(M_0 ⋯ M_{S−1})` and, per slice, `E_c` with `Tr(M_c E_c)` equal to it.
fn ring_environments(ms: &[Vec<C64>], k: usize) -> (C64, Vec<Vec<C64>>) {
    let n = ms.len();
    let eye = DenseTensor::identity(k).into_data();
    let mut prefix = vec![eye.clone()];
    for m in &ms[..n - 1] {
        let last = prefix.last().unwrap();
        prefix.push(matmul(last, m, k, k, k));
    }
    let mut envs = vec![Vec::new(); n];
    let mut suffix = eye;
    for c in (0..n).rev() {
        envs[c] = matmul(&suffix, &prefix[c], k, k, k);
        suffix = matmul(&ms[c], &suffix, k, k, k);
    }
    let value = trace_product(&ms[0], &envs[0], k);
    (value, envs)
}

fn trace_product(a: &[C64], b: &[C64], k: usize) -> C64 {
    crate::tensor::trace_of_product(a, b, k)
}

fn ring_trace(ms: &[Vec<C64>], k: usize) -> C64 {
    let mut acc = ms[0].clone();
    for m in &ms[1..ms.len() - 1] {
        acc = matmul(&acc, m, k, k, k);
    }
    trace_product(&acc, &ms[ms.len() - 1], k)
}

/// Rank-4 ring of canonical site tensors.
struct Ring<'a> {
    spec: &'a LatticeSpec,
    geom: Geometry,
    canon: Vec<DenseTensor>,
}

impl<'a> Ring<'a> {
    fn new(spec: &'a LatticeSpec, tensors: Vec<DenseTensor>) -> Self {
        let geom = Geometry::of(spec);
        let canon = tensors.iter().map(|t| geom.canonical(t)).collect();
        Self { spec, geom, canon }
    }

    fn slice_tensors(&self, c: usize) -> Vec<&DenseTensor> {
        (0..self.geom.slice_len).map(|i| &self.canon[self.geom.site(self.spec, c, i)]).collect()
    }

    fn slice_ops(&self) -> Result<(Vec<Vec<C64>>, usize)> {
        let mut k = 0;
        let mut ms = Vec::with_capacity(self.geom.n_slices);
        for c in 0..self.geom.n_slices {
            let op = slice_operator(&self.slice_tensors(c))?;
            k = op.k;
            ms.push(op.data);
        }
        Ok((ms, k))
    }

    fn value(&self) -> Result<C64> {
        let (ms, k) = self.slice_ops()?;
        Ok(ring_trace(&ms, k))
    }

    /// Value and, for every site, the environment tensor in canonical leg
    /// order, so that `value = Σ env ⊙ T` for each site.
    fn value_and_environments(&self) -> Result<(C64, Vec<DenseTensor>)> {
        let (ms, k) = self.slice_ops()?;
        let (value, envs) = ring_environments(&ms, k);
        let s = self.geom.slice_len;
        let ext = self.canon[0].shape()[0];
        let mut site_envs = vec![DenseTensor::scalar(ZERO); self.spec.n_sites()];
        for (c, env) in envs.into_iter().enumerate() {
            let env_t = DenseTensor::new(vec![ext; 2 * s], env)?;
            let mut env_labels: Vec<u32> = (0..s as u32).map(|i| B + i).collect();
            env_labels.extend((0..s as u32).map(|i| A + i));
            let tensors = self.slice_tensors(c);
            let labels: Vec<Vec<u32>> = (0..s).map(|i| site_labels(i, s, false)).collect();
            for i in 0..s {
                let mut ts = vec![&env_t];
                let mut ls: Vec<&[u32]> = vec![&env_labels];
                for j in (0..s).filter(|&j| j != i) {
                    ts.push(tensors[j]);
                    ls.push(&labels[j]);
                }
                let e = contract(&ts, &ls, &labels[i])?;
                site_envs[self.geom.site(self.spec, c, i)] = e;
            }
        }
        Ok((value, site_envs))
    }
}

fn pairing(env: &DenseTensor, t: &DenseTensor) -> C64 {
    env.data().iter().zip(t.data()).map(|(a, b)| a * b).sum()
}

/// `E[(αα'), (ββ'), (γγ'), (λλ')] = Σ ket[α,β,γ,λ,j] O[j',j] conj(bra[α',β',γ',λ',j'])`.
pub(crate) fn double_tensor(ket: &DenseTensor, bra: &DenseTensor, op: Option<&HermitianMatrix>) -> DenseTensor {
    let bd = ket.shape()[0];
    let pd = ket.shape()[4];
    let m = bd.pow(4);
    let ko = match op {
        Some(o) => {
            let ot = adjoint(o.as_slice(), pd, pd).iter().map(|z| z.conj()).collect::<Vec<_>>();
            matmul(ket.data(), &ot, m, pd, pd)
        }
        None => ket.data().to_vec(),
    };
    let bra_dag = adjoint(bra.data(), m, pd);
    let e = matmul(&ko, &bra_dag, m, pd, m);
    DenseTensor::new(vec![bd; 8], e)
        .expect("consistent shape")
        .permute(&[0, 4, 1, 5, 2, 6, 3, 7])
        .reshape(vec![bd * bd; 4])
        .expect("consistent shape")
}

/// `B[α,β,γ,λ] = Σ_j A[α,β,γ,λ,j] conj(φ_j)`.
fn project_phys(a: &DenseTensor, phi: &[C64]) -> DenseTensor {
    let pd = phi.len();
    let data = a.data().chunks(pd).map(|c| c.iter().zip(phi).map(|(x, p)| x * p.conj()).sum()).collect();
    let mut shape = a.shape().to_vec();
    shape.pop();
    DenseTensor::new(shape, data).expect("consistent shape")
}

fn check_op_site(state: &TNState, site: usize, op: &HermitianMatrix) -> Result<()> {
    if site >= state.spec().n_sites() {
        return invalid(format!("site {site} out of range"));
    }
    if op.dim() != state.spec().phys_dim {
        return crate::error::shape(format!(
            "observable has dimension {}, expected d={}",
            op.dim(),
            state.spec().phys_dim
        ));
    }
    if !op.hermiticity_defect().is_finite() || op.hermiticity_defect() > 1e-12 {
        return invalid("observable is not Hermitian");
    }
    Ok(())
}

fn double_ring<'a>(state: &'a TNState, op: Option<(usize, &HermitianMatrix)>) -> Result<Ring<'a>> {
    let spec = state.spec();
    if let Some((site, o)) = op {
        check_op_site(state, site, o)?;
    }
    let tensors = (0..spec.n_sites())
        .map(|i| {
            let o = op.and_then(|(s, o)| (s == i).then_some(o));
            double_tensor(state.tensor(i), state.tensor(i), o)
        })
        .collect();
    Ok(Ring::new(spec, tensors))
}

/// `⟨ψ|O_site|ψ⟩` (or `⟨ψ|ψ⟩` without an operator), unnormalized.
pub fn sandwich(state: &TNState, op: Option<(usize, &HermitianMatrix)>) -> Result<f64> {
    Ok(double_ring(state, op)?.value()?.re)
}

/// Unnormalized `⟨ψ|O_site|ψ⟩` and its derivative with respect to every `θ_k`.
pub fn sandwich_with_gradient(state: &TNState, op: Option<(usize, &HermitianMatrix)>) -> Result<(f64, Vec<f64>)> {
    let ring = double_ring(state, op)?;
    let (value, envs) = ring.value_and_environments()?;
    let grads = (0..state.spec().n_sites())
        .map(|i| {
            let o = op.and_then(|(s, o)| (s == i).then_some(o));
            let (a, da) = (state.tensor(i), state.derivative_tensor(i));
            let mut d = double_tensor(da, a, o);
            let other = double_tensor(a, da, o);
            d = DenseTensor::new(d.shape().to_vec(), d.data().iter().zip(other.data()).map(|(x, y)| x + y).collect())
                .expect("same shape");
            pairing(&envs[i], &ring.geom.canonical(&d)).re
        })
        .collect();
    Ok((value.re, grads))
}

pub fn norm_squared(state: &TNState) -> Result<f64> {
    sandwich(state, None)
}

/// Unnormalized `⟨ψ|O_site|ψ⟩`.
pub fn local_expectation(state: &TNState, site: usize, observable: &HermitianMatrix) -> Result<f64> {
    sandwich(state, Some((site, observable)))
}

/// `⟨ψ|O_site|ψ⟩ / ⟨ψ|ψ⟩`.
pub fn normalized_expectation(state: &TNState, site: usize, observable: &HermitianMatrix) -> Result<f64> {
    let z = norm_squared(state)?;
    if z <= 0.0 || !z.is_finite() {
        return Err(Error::DegenerateState(format!("norm squared is {z}")));
    }
    Ok(local_expectation(state, site, observable)? / z)
}

fn check_product_state(state: &TNState, phi: &[Vec<C64>]) -> Result<()> {
    let spec = state.spec();
    if phi.len() != spec.n_sites() {
        return invalid(format!("{} product-state factors for {} sites", phi.len(), spec.n_sites()));
    }
    for (i, f) in phi.iter().enumerate() {
        if f.len() != spec.phys_dim {
            return crate::error::shape(format!("factor {i} has length {}, expected {}", f.len(), spec.phys_dim));
        }
        let n: f64 = f.iter().map(|z| z.norm_sqr()).sum();
        if (n - 1.0).abs() > NORM_TOL {
            return invalid(format!("factor {i} has norm squared {n}"));
        }
    }
    Ok(())
}

/// `⟨φ₁ ⊗ ⋯ ⊗ φ_V | ψ⟩` for a normalized product state.
pub fn overlap(state: &TNState, phi: &[Vec<C64>]) -> Result<C64> {
    check_product_state(state, phi)?;
    let tensors = (0..state.spec().n_sites()).map(|i| project_phys(state.tensor(i), &phi[i])).collect();
    Ring::new(state.spec(), tensors).value()
}

/// Overlap and its derivative with respect to every `θ_k`.
pub fn overlap_with_gradient(state: &TNState, phi: &[Vec<C64>]) -> Result<(C64, Vec<C64>)> {
    check_product_state(state, phi)?;
    let n = state.spec().n_sites();
    let tensors = (0..n).map(|i| project_phys(state.tensor(i), &phi[i])).collect();
    let ring = Ring::new(state.spec(), tensors);
    let (value, envs) = ring.value_and_environments()?;
    let grads = (0..n)
        .map(|i| pairing(&envs[i], &ring.geom.canonical(&project_phys(state.derivative_tensor(i), &phi[i]))))
        .collect();
    Ok((value, grads))
}

/// `[nx, K, K] × [ny, K, K] → [nx·ny, K, K]` with entry `(i, j)` equal to `X_i Y_j`.
fn stack_product(x: &[C64], nx: usize, y: Vec<C64>, ny: usize, k: usize) -> Vec<C64> {
    let yt = DenseTensor::new(vec![ny, k, k], y).expect("stack shape").permute(&[1, 0, 2]);
    let r = matmul(x, yt.data(), nx * k, k, ny * k);
    DenseTensor::new(vec![nx, k, ny, k], r).expect("stack shape").permute(&[0, 2, 1, 3]).into_data()
}

fn half_product(ops: Vec<SliceOp>) -> (Vec<C64>, usize, usize) {
    let mut it = ops.into_iter();
    let first = it.next().expect("non-empty half");
    let k = first.k;
    let (mut acc, mut n) = (first.data, first.n_phys);
    for op in it {
        acc = stack_product(&acc, n, op.data, op.n_phys, k);
        n *= op.n_phys;
    }
    (acc, n, k)
}

/// Dense amplitudes `ψ[j_0, …, j_{V−1}]` in row-major site order.
pub fn to_statevector(state: &TNState) -> Result<DenseTensor> {
    let spec = *state.spec();
    spec.check_caps(crate::state::DEFAULT_AMPLITUDE_CAP)?;
    let geom = Geometry::of(&spec);
    let canon: Vec<DenseTensor> = (0..spec.n_sites()).map(|i| geom.canonical(state.tensor(i))).collect();
    let mut ops = Vec::with_capacity(geom.n_slices);
    for c in 0..geom.n_slices {
        let ts: Vec<&DenseTensor> = (0..geom.slice_len).map(|i| &canon[geom.site(&spec, c, i)]).collect();
        ops.push(slice_operator(&ts)?);
    }
    let right_ops = ops.split_off(geom.n_slices / 2);
    let (left, nl, k) = half_product(ops);
    let (right, nr, _) = half_product(right_ops);
    // Tr(L R) = Σ_{a,b} L[a,b] R[b,a]
    let rt = DenseTensor::new(vec![nr, k, k], right)?.permute(&[2, 1, 0]);
    let psi = matmul(&left, rt.data(), nl, k * k, nr);
    let v = spec.n_sites();
    let t = DenseTensor::new(vec![spec.phys_dim; v], psi)?;
    Ok(match geom.axis {
        SliceAxis::Rows => t,
        SliceAxis::Columns => {
            // axis y·rows + x holds site (x, y)
            let axes: Vec<usize> = (0..v)
                .map(|s| {
                    let (x, y) = spec.coords(s);
                    y * spec.rows + x
                })
                .collect();
            t.permute(&axes)
        }
    })
}

/// Contract the whole network as one generic tensor expression. Slow; meant
/// as an independent reference for small lattices.
pub fn reference_statevector(state: &TNState, order: ContractionOrder) -> Result<DenseTensor> {
    let spec = *state.spec();
    let v = spec.n_sites();
    let vert = |x: usize, y: usize| spec.site_index(x, y) as u32;
    let horiz = |x: usize, y: usize| 10_000 + spec.site_index(x, y) as u32;
    let labels: Vec<Vec<u32>> = (0..v)
        .map(|s| {
            let (x, y) = spec.coords(s);
            let (xu, yl) = ((x + spec.rows - 1) % spec.rows, (y + spec.cols - 1) % spec.cols);
            vec![vert(xu, y), horiz(x, yl), vert(x, y), horiz(x, y), 20_000 + s as u32]
        })
        .collect();
    let ts: Vec<&DenseTensor> = (0..v).map(|i| state.tensor(i)).collect();
    let ls: Vec<&[u32]> = labels.iter().map(|l| l.as_slice()).collect();
    let out: Vec<u32> = (0..v as u32).map(|s| 20_000 + s).collect();
    contract_with_order(&ts, &ls, &out, order)
}

/// Amplitude of one computational basis configuration.
pub fn amplitude(state: &TNState, config: &[usize]) -> Result<C64> {
    let d = state.spec().phys_dim;
    if config.iter().any(|&j| j >= d) {
        return invalid("basis index out of range");
    }
    let phi: Vec<Vec<C64>> =
        config.iter().map(|&j| (0..d).map(|i| if i == j { ONE } else { ZERO }).collect()).collect();
    overlap(state, &phi)
}
