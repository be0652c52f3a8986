//! Losses, their θ-gradients, and Monte-Carlo gradient-variance scans.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Error, Result};
use crate::haar::HermitianMatrix;
use crate::network::{overlap, overlap_with_gradient, sandwich, sandwich_with_gradient};
use crate::state::{build_state, sample_rng, LatticeSpec, TNState};
use crate::stats::{jackknife_variance_se, linear_fit, mean, standard_error_of_mean, variance, LinearFit};
use crate::tensor::{C64, ONE, ZERO};

/// Below this `Z` the normalized losses are undefined.
pub const MIN_NORM: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `1 − |⟨φ|Ψ⟩|²`.
    GlobalPure,
    /// `1 − |⟨φ|Ψ⟩|² / Z`.
    GlobalNormalized,
    /// `⟨Ψ|O_i|Ψ⟩`.
    LocalUnnormalized,
    /// `⟨Ψ|O_i|Ψ⟩ / Z`.
    LocalNormalized,
}

impl LossKind {
    pub const ALL: [LossKind; 4] =
        [LossKind::GlobalPure, LossKind::GlobalNormalized, LossKind::LocalUnnormalized, LossKind::LocalNormalized];

    pub fn is_local(self) -> bool {
        matches!(self, LossKind::LocalUnnormalized | LossKind::LocalNormalized)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossTarget {
    Product(Vec<Vec<C64>>),
    Local { site: usize, observable: HermitianMatrix },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    kind: LossKind,
    target: LossTarget,
    theory_mode: bool,
}

impl LossSpec {
    pub fn global(kind: LossKind, product: Vec<Vec<C64>>) -> Result<Self> {
        if kind.is_local() {
            return invalid("global target given to a local loss kind");
        }
        Ok(Self { kind, target: LossTarget::Product(product), theory_mode: false })
    }

    /// Local loss; in theory mode the observable must be traceless.
    pub fn local(kind: LossKind, site: usize, observable: HermitianMatrix, theory_mode: bool) -> Result<Self> {
        if !kind.is_local() {
            return invalid("local target given to a global loss kind");
        }
        if theory_mode && observable.trace().norm() > 1e-12 {
            return invalid("theory-mode observables must be traceless");
        }
        Ok(Self { kind, target: LossTarget::Local { site, observable }, theory_mode })
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn target(&self) -> &LossTarget {
        &self.target
    }

    pub fn theory_mode(&self) -> bool {
        self.theory_mode
    }

    pub fn observable_site(&self) -> Option<usize> {
        match &self.target {
            LossTarget::Local { site, .. } => Some(*site),
            LossTarget::Product(_) => None,
        }
    }

    fn product(&self) -> &[Vec<C64>] {
        match &self.target {
            LossTarget::Product(p) => p,
            LossTarget::Local { .. } => unreachable!("global kinds carry a product target"),
        }
    }

    fn local_target(&self) -> (usize, &HermitianMatrix) {
        match &self.target {
            LossTarget::Local { site, observable } => (*site, observable),
            LossTarget::Product(_) => unreachable!("local kinds carry an observable"),
        }
    }
}

/// `|+⟩ = d^{-1/2} Σ_j |j⟩`.
pub fn plus_vector(d: usize) -> Vec<C64> {
    vec![C64::new(1.0 / (d as f64).sqrt(), 0.0); d]
}

pub fn plus_product_state(n_sites: usize, d: usize) -> Vec<Vec<C64>> {
    vec![plus_vector(d); n_sites]
}

/// `|+⟩⟨+|`.
pub fn plus_projector(d: usize) -> HermitianMatrix {
    HermitianMatrix::projector(&plus_vector(d))
}

/// `diag(1, −1, 0, …)`: traceless with `tr O² = 2`.
pub fn traceless_observable(d: usize) -> HermitianMatrix {
    let mut diag = vec![0.0; d];
    diag[0] = 1.0;
    diag[1] = -1.0;
    HermitianMatrix::from_real_diagonal(&diag)
}

/// Global loss against `|+⟩^{⊗V}`.
pub fn global_loss(kind: LossKind, spec: &LatticeSpec) -> Result<LossSpec> {
    LossSpec::global(kind, plus_product_state(spec.n_sites(), spec.phys_dim))
}

fn checked_norm(z: f64) -> Result<f64> {
    if !(z >= MIN_NORM) {
        return Err(Error::DegenerateState(format!("normalization Z = {z:e} is below {MIN_NORM:e}")));
    }
    Ok(z)
}

pub fn loss_value(state: &TNState, loss: &LossSpec) -> Result<f64> {
    match loss.kind {
        LossKind::GlobalPure => Ok(1.0 - overlap(state, loss.product())?.norm_sqr()),
        LossKind::GlobalNormalized => {
            let z = checked_norm(sandwich(state, None)?)?;
            Ok(1.0 - overlap(state, loss.product())?.norm_sqr() / z)
        }
        LossKind::LocalUnnormalized => sandwich(state, Some(loss.local_target())),
        LossKind::LocalNormalized => {
            let z = checked_norm(sandwich(state, None)?)?;
            Ok(sandwich(state, Some(loss.local_target()))? / z)
        }
    }
}

fn shifted(o: &HermitianMatrix, shift: f64) -> Result<HermitianMatrix> {
    let d = o.dim();
    let data = (0..d * d).map(|i| o.as_slice()[i] - if i / d == i % d { C64::new(shift, 0.0) } else { ZERO }).collect();
    HermitianMatrix::new(d, data)
}

/// Loss value and `∂L/∂θ_k` for every site `k`.
pub fn loss_and_gradients(state: &TNState, loss: &LossSpec) -> Result<(f64, Vec<f64>)> {
    match loss.kind {
        LossKind::GlobalPure => {
            let (s, ds) = overlap_with_gradient(state, loss.product())?;
            let g = ds.iter().map(|d| -2.0 * (s.conj() * d).re).collect();
            Ok((1.0 - s.norm_sqr(), g))
        }
        LossKind::GlobalNormalized => {
            let (s, ds) = overlap_with_gradient(state, loss.product())?;
            let (z, dz) = sandwich_with_gradient(state, None)?;
            let z = checked_norm(z)?;
            let f = s.norm_sqr();
            let g = ds.iter().zip(&dz).map(|(d, dzk)| -(2.0 * (s.conj() * d).re - f / z * dzk) / z).collect();
            Ok((1.0 - f / z, g))
        }
        LossKind::LocalUnnormalized => sandwich_with_gradient(state, Some(loss.local_target())),
        LossKind::LocalNormalized => {
            let (site, o) = loss.local_target();
            let z = checked_norm(sandwich(state, None)?)?;
            let value = sandwich(state, Some((site, o)))? / z;
            // ∂(⟨O⟩/Z) = ∂⟨O − L·I⟩ / Z
            let (_, g) = sandwich_with_gradient(state, Some((site, &shifted(o, value)?)))?;
            Ok((value, g.into_iter().map(|x| x / z).collect()))
        }
    }
}

pub fn analytic_gradient(state: &TNState, site: usize, loss: &LossSpec) -> Result<f64> {
    if site >= state.spec().n_sites() {
        return invalid(format!("site {site} out of range"));
    }
    Ok(loss_and_gradients(state, loss)?.1[site])
}

/// Central difference in `θ_site`.
pub fn finite_difference_gradient(state: &TNState, site: usize, loss: &LossSpec, step: f64) -> Result<f64> {
    let t = state.sites().get(site).ok_or_else(|| Error::InvalidArgument(format!("site {site} out of range")))?.theta;
    let plus = loss_value(&state.with_theta(site, t + step)?, loss)?;
    let minus = loss_value(&state.with_theta(site, t - step)?, loss)?;
    Ok((plus - minus) / (2.0 * step))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteVariance {
    pub site: usize,
    pub x: usize,
    pub y: usize,
    pub variance: f64,
    /// Jackknife standard error; absent below three samples.
    pub std_error: Option<f64>,
    pub mean: f64,
    pub se_mean: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub spec: LatticeSpec,
    pub loss: LossSpec,
    pub seed: u64,
    pub n_requested: usize,
    pub n_failed: usize,
    pub sites: Vec<SiteVariance>,
    pub wall_time_s: f64,
}

impl VarianceReport {
    pub fn mean_variance(&self) -> f64 {
        mean(&self.sites.iter().map(|s| s.variance).collect::<Vec<_>>())
    }

    /// Combined standard error of `mean_variance`, treating sites as
    /// independent.
    pub fn mean_variance_se(&self) -> f64 {
        let ses: f64 = self.sites.iter().map(|s| s.std_error.unwrap_or(f64::NAN).powi(2)).sum();
        ses.sqrt() / self.sites.len() as f64
    }

    pub fn max_variance(&self) -> &SiteVariance {
        self.sites.iter().max_by(|a, b| a.variance.total_cmp(&b.variance)).expect("report has sites")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("site_x,site_y,variance,std_error,n\n");
        for v in &self.sites {
            let se = v.std_error.map(|e| format!("{e:e}")).unwrap_or_default();
            let _ = writeln!(s, "{},{},{:e},{},{}", v.x, v.y, v.variance, se, v.n);
        }
        s
    }
}

/// Gradient samples `[sample][site]` for independent states; sample `i` is
/// built from `sample_rng(seed, i)`. Failed samples are returned separately.
pub fn gradient_samples(
    spec: LatticeSpec,
    loss: &LossSpec,
    n_samples: usize,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, Vec<Error>)> {
    spec.check_caps(crate::state::DEFAULT_AMPLITUDE_CAP)?;
    let results: Vec<Result<Vec<f64>>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let state = build_state(spec, &mut sample_rng(seed, i))?;
            Ok(loss_and_gradients(&state, loss)?.1)
        })
        .collect();
    let (mut ok, mut failed) = (Vec::new(), Vec::new());
    for r in results {
        match r {
            Ok(g) => ok.push(g),
            Err(e @ (Error::ResourceLimit(_) | Error::InvalidArgument(_) | Error::Shape(_))) => return Err(e),
            Err(e) => failed.push(e),
        }
    }
    Ok((ok, failed))
}

/// Per-site variance of `∂L/∂θ_k` over `n_samples` independent states.
pub fn variance_scan(spec: LatticeSpec, loss: &LossSpec, n_samples: usize, seed: u64) -> Result<VarianceReport> {
    if n_samples < 2 {
        return invalid("variance scan needs at least two samples");
    }
    let start = Instant::now();
    let (samples, failed) = gradient_samples(spec, loss, n_samples, seed)?;
    let mut report = VarianceReport::from_samples(spec, loss, seed, &samples, failed.len())?;
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

impl VarianceReport {
    /// Per-site statistics of gradient samples laid out as `[sample][site]`.
    pub fn from_samples(
        spec: LatticeSpec,
        loss: &LossSpec,
        seed: u64,
        samples: &[Vec<f64>],
        n_failed: usize,
    ) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::DegenerateState(format!(
                "only {} of {} samples succeeded",
                samples.len(),
                samples.len() + n_failed
            )));
        }
        if let Some(g) = samples.iter().find(|g| g.len() != spec.n_sites()) {
            return shape(format!("gradient sample has {} entries, lattice has {} sites", g.len(), spec.n_sites()));
        }
        let sites = (0..spec.n_sites())
            .map(|k| {
                let xs: Vec<f64> = samples.iter().map(|g| g[k]).collect();
                let (x, y) = spec.coords(k);
                Ok(SiteVariance {
                    site: k,
                    x,
                    y,
                    variance: variance(&xs)?,
                    std_error: jackknife_variance_se(&xs).ok(),
                    mean: mean(&xs),
                    se_mean: standard_error_of_mean(&xs)?,
                    n: xs.len(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(VarianceReport {
            spec,
            loss: loss.clone(),
            seed,
            n_requested: samples.len() + n_failed,
            n_failed,
            sites,
            wall_time_s: 0.0,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceGroup {
    pub distance: usize,
    pub n_sites: usize,
    pub mean_variance: f64,
    pub std_error: f64,
}

/// Mean variance grouped by toric Manhattan distance to the observable site.
pub fn distance_profile(report: &VarianceReport) -> Result<Vec<DistanceGroup>> {
    let origin = report
        .loss
        .observable_site()
        .ok_or_else(|| Error::InvalidArgument("distance profile needs a local loss".into()))?;
    let mut groups: BTreeMap<usize, Vec<&SiteVariance>> = BTreeMap::new();
    for s in &report.sites {
        groups.entry(report.spec.toric_distance(origin, s.site)).or_default().push(s);
    }
    Ok(groups
        .into_iter()
        .map(|(distance, g)| {
            let n = g.len() as f64;
            DistanceGroup {
                distance,
                n_sites: g.len(),
                mean_variance: g.iter().map(|s| s.variance).sum::<f64>() / n,
                std_error: g.iter().map(|s| s.std_error.unwrap_or(f64::NAN).powi(2)).sum::<f64>().sqrt() / n,
            }
        })
        .collect())
}

/// Least-squares fit of `ln(variance)` against distance.
pub fn fit_log_profile(profile: &[DistanceGroup]) -> Result<LinearFit> {
    let pts: Vec<(f64, f64)> =
        profile.iter().filter(|g| g.mean_variance > 0.0).map(|g| (g.distance as f64, g.mean_variance.ln())).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    linear_fit(&xs, &ys)
}

/// Nonincreasing up to `slack` combined standard errors between neighbours.
pub fn is_nonincreasing(profile: &[DistanceGroup], slack: f64) -> bool {
    profile.windows(2).all(|w| {
        let se = (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt();
        w[1].mean_variance <= w[0].mean_variance + slack * se
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnsiteEntry {
    pub spec: LatticeSpec,
    pub variance: f64,
    pub std_error: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnsiteFloorReport {
    pub kind: LossKind,
    pub entries: Vec<OnsiteEntry>,
    /// `max / min` over sizes.
    pub band_ratio: f64,
    pub band_ok: bool,
    /// Every variance exceeds three standard errors.
    pub positive: bool,
}

pub const ONSITE_BAND: f64 = 3.0;

/// On-site gradient variance of a local loss across lattice sizes, with the
/// observable and derivative both on site 0.
pub fn onsite_floor_check(
    sizes: &[LatticeSpec],
    kind: LossKind,
    observable: &HermitianMatrix,
    n_samples: usize,
    seed: u64,
) -> Result<OnsiteFloorReport> {
    if sizes.is_empty() {
        return invalid("need at least one lattice size");
    }
    let entries = sizes
        .iter()
        .map(|&spec| {
            let loss = LossSpec::local(kind, 0, observable.clone(), false)?;
            let r = variance_scan(spec, &loss, n_samples, seed)?;
            let s = &r.sites[0];
            Ok(OnsiteEntry { spec, variance: s.variance, std_error: s.std_error.unwrap_or(f64::NAN), n: s.n })
        })
        .collect::<Result<Vec<_>>>()?;
    let max = entries.iter().map(|e| e.variance).fold(f64::NEG_INFINITY, f64::max);
    let min = entries.iter().map(|e| e.variance).fold(f64::INFINITY, f64::min);
    let band_ratio = if max == 0.0 { 1.0 } else { max / min };
    Ok(OnsiteFloorReport {
        kind,
        band_ok: band_ratio <= ONSITE_BAND,
        positive: entries.iter().all(|e| e.variance > 3.0 * e.std_error),
        band_ratio,
        entries,
    })
}

/// Product state with a single basis vector per site.
pub fn basis_product_state(config: &[usize], d: usize) -> Vec<Vec<C64>> {
    config.iter().map(|&j| (0..d).map(|i| if i == j { ONE } else { ZERO }).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::build_state_seeded;

    fn losses(spec: &LatticeSpec) -> Vec<LossSpec> {
        let d = spec.phys_dim;
        vec![
            global_loss(LossKind::GlobalPure, spec).unwrap(),
            global_loss(LossKind::GlobalNormalized, spec).unwrap(),
            LossSpec::local(LossKind::LocalUnnormalized, 1, traceless_observable(d), true).unwrap(),
            LossSpec::local(LossKind::LocalNormalized, 1, plus_projector(d), false).unwrap(),
        ]
    }

    #[test]
    fn gradients_match_finite_differences() {
        let spec = LatticeSpec::new(2, 3, 2, 2).unwrap();
        let s = build_state_seeded(spec, 21).unwrap();
        for loss in losses(&spec) {
            let (_, g) = loss_and_gradients(&s, &loss).unwrap();
            for k in 0..spec.n_sites() {
                let fd = finite_difference_gradient(&s, k, &loss, 1e-5).unwrap();
                assert!((g[k] - fd).abs() <= 1e-6 * g[k].abs().max(1e-12) + 1e-9, "{:?} site {k}", loss.kind());
            }
        }
    }

    #[test]
    fn theory_mode_requires_traceless() {
        assert!(LossSpec::local(LossKind::LocalUnnormalized, 0, plus_projector(2), true).is_err());
        assert!(LossSpec::local(LossKind::GlobalPure, 0, traceless_observable(2), false).is_err());
    }

    #[test]
    fn loss_ranges() {
        let spec = LatticeSpec::new(2, 2, 2, 2).unwrap();
        for seed in 0..5 {
            let s = build_state_seeded(spec, seed).unwrap();
            let l = losses(&spec);
            let g = loss_value(&s, &l[1]).unwrap();
            assert!((0.0..=1.0).contains(&g));
            let p = loss_value(&s, &l[3]).unwrap();
            assert!((-1e-12..=1.0 + 1e-12).contains(&p));
        }
    }

    #[test]
    fn report_is_reproducible() {
        let spec = LatticeSpec::new(2, 2, 2, 2).unwrap();
        let loss = global_loss(LossKind::GlobalPure, &spec).unwrap();
        let a = variance_scan(spec, &loss, 2, 7).unwrap();
        let b = variance_scan(spec, &loss, 2, 7).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert!(a.sites.iter().all(|s| s.std_error.is_none()));
    }

    #[test]
    fn profile_needs_local_loss() {
        let spec = LatticeSpec::new(2, 2, 2, 2).unwrap();
        let loss = global_loss(LossKind::GlobalPure, &spec).unwrap();
        let r = variance_scan(spec, &loss, 3, 7).unwrap();
        assert!(distance_profile(&r).is_err());
    }
}
