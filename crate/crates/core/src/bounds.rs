//! Closed-form concentration and gradient bounds, checked against exact
//! enumeration and sampled quantities.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::gradient::{
    distance_profile, fit_log_profile, global_loss, onsite_floor_check, plus_projector, traceless_observable,
    variance_scan, LossKind, LossSpec,
};
use crate::polyomino::{enumerate_toric, gen_fun_g, series_coefficients, toric_count_bound};
use crate::spin::{config_amplitude, exact_partition_function, f_table, g_table, Spin};
use crate::state::LatticeSpec;

/// Rate used to peel `η^L` off the plane sum over areas `m ≥ L`.
pub const ETA: f64 = 25.0 / 26.0;
/// Headline norm-concentration rate.
pub const KAPPA: f64 = 0.97;
/// Off-site decay rate of the local-loss gradient variance.
pub const KAPPA_LOCAL: f64 = 0.93;

/// JSON has no infinities; non-finite values travel as `"inf"`, `"-inf"` or
/// `"nan"`.
mod extended_float {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        match *x {
            x if x.is_finite() => s.serialize_f64(x),
            x if x.is_nan() => s.serialize_str("nan"),
            x if x > 0.0 => s.serialize_str("inf"),
            _ => s.serialize_str("-inf"),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    #[serde(with = "extended_float")]
    pub bound: f64,
    #[serde(with = "extended_float")]
    pub compared: f64,
    /// `compared ≤ bound` (or `≥` for floors), with the statistical slack
    /// already folded into `bound`.
    pub satisfied: bool,
    /// `bound / compared` for ceilings, `compared / bound` for floors.
    #[serde(with = "extended_float")]
    pub slack: f64,
}

impl BoundReport {
    pub fn ceiling(name: &str, params: &[(&str, f64)], bound: f64, compared: f64) -> Self {
        Self {
            name: name.into(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            bound,
            compared,
            satisfied: compared <= bound,
            slack: bound / compared,
        }
    }

    pub fn floor(name: &str, params: &[(&str, f64)], bound: f64, compared: f64) -> Self {
        Self {
            name: name.into(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            bound,
            compared,
            satisfied: compared >= bound,
            slack: compared / bound,
        }
    }
}

pub fn render_table(reports: &[BoundReport]) -> String {
    let mut s = format!("{:<6} {:<34} {:>14} {:>14} {:>10}  params\n", "status", "bound", "value", "compared", "slack");
    for r in reports {
        let params: Vec<String> = r.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let _ = writeln!(
            s,
            "{:<6} {:<34} {:>14.6e} {:>14.6e} {:>10.3e}  {}",
            if r.satisfied { "PASS" } else { "FAIL" },
            r.name,
            r.bound,
            r.compared,
            r.slack,
            params.join(" ")
        );
    }
    s
}

/// Single-site parameters of the norm model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaPerimeterWeights {
    /// `f(↑,↑,↑)`.
    pub q_a: f64,
    /// `f(↓,↓,↑)`.
    pub q_p: f64,
    /// `q_p²`.
    pub q_u: f64,
}

impl AreaPerimeterWeights {
    pub fn new(bond_dim: usize, phys_dim: usize) -> Result<Self> {
        let f = f_table(bond_dim, phys_dim)?;
        let q_a = f.get(Spin::Up, Spin::Up, Spin::Up);
        let q_p = f.get(Spin::Down, Spin::Down, Spin::Up);
        Ok(Self { q_a, q_p, q_u: q_p * q_p })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Chain {
    pub l: usize,
    pub bond_dim: usize,
    pub phys_dim: usize,
    pub weights: AreaPerimeterWeights,
    /// `η^L · G(q_a/η, p_u)`, the bound on `Σ_{m≥L,n} D_{m,n} q_a^m p_u^n`.
    pub tail: f64,
    /// `L/(1−p_u) · max_{k≤L} (L² p_u^{-1} · tail)^k`.
    pub bound: f64,
    /// Exact `Z − 1` when the lattice is small enough to enumerate.
    pub exact_z_minus_one: Option<f64>,
    /// `Σ_{valid σ} q_a^m q_u^n` over toric configurations.
    pub toric_sum: Option<f64>,
    /// `Σ_{m,n} [plane-count bound on toric configurations] q_a^m p_u^n`.
    pub lemma_sum: Option<f64>,
    pub reports: Vec<BoundReport>,
}

/// Largest `L` for which the chain is compared with exact enumeration.
pub const MAX_EXACT_L: usize = 4;

pub fn theorem1_chain(l: usize, bond_dim: usize, phys_dim: usize) -> Result<Theorem1Chain> {
    if l < 2 {
        return invalid("need L >= 2");
    }
    let w = AreaPerimeterWeights::new(bond_dim, phys_dim)?;
    let p_u = w.q_u;
    let lf = l as f64;
    let tail = ETA.powi(l as i32) * gen_fun_g(w.q_a / ETA, p_u)?;
    let inner = lf * lf / p_u * tail;
    let bound = lf / (1.0 - p_u) * (1..=l).map(|k| inner.powi(k as i32)).fold(f64::NEG_INFINITY, f64::max);
    let params = [("L", lf), ("D", bond_dim as f64), ("d", phys_dim as f64)];
    let mut reports = Vec::new();
    let (mut exact, mut toric_sum, mut lemma_sum) = (None, None, None);
    if l <= MAX_EXACT_L {
        let f = f_table(bond_dim, phys_dim)?;
        let z1 = exact_partition_function(l, l, &f)?.z_minus_ground;
        let configs = enumerate_toric(l)?;
        let mut ts = 0.0;
        let mut counts: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        let mut lemma3_ok = true;
        for c in &configs {
            let (m, n) = (c.count_up(), c.upper_perimeter());
            let cap = w.q_a.powi(m as i32) * w.q_u.powi(n as i32);
            lemma3_ok &= config_amplitude(c, &f) <= cap * (1.0 + 1e-12);
            ts += cap;
            *counts.entry((m, n)).or_default() += 1;
        }
        let area = l * l;
        let plane = series_coefficients(area, area + l)?;
        let mut ls = 0.0;
        let mut counts_ok = true;
        for m in l..=area {
            for n in 0..=area {
                let b = toric_count_bound(l, m, n, &plane)?;
                counts_ok &= counts.get(&(m, n)).copied().unwrap_or(0) as u128 <= b;
                ls += b as f64 * w.q_a.powi(m as i32) * p_u.powi(n as i32);
            }
        }
        reports.push(BoundReport::ceiling("z_minus_one<=toric_sum", &params, ts, z1));
        reports.push(BoundReport::ceiling("toric_sum<=plane_count_sum", &params, ls, ts));
        reports.push(BoundReport::ceiling("plane_count_sum<=chain_bound", &params, bound, ls));
        reports.push(BoundReport::ceiling(
            "amplitude<=qa^m*qu^n",
            &params,
            1.0,
            if lemma3_ok { 1.0 } else { f64::INFINITY },
        ));
        reports.push(BoundReport::ceiling(
            "toric_counts<=plane_count_bound",
            &params,
            1.0,
            if counts_ok { 1.0 } else { f64::INFINITY },
        ));
        exact = Some(z1);
        toric_sum = Some(ts);
        lemma_sum = Some(ls);
    }
    if bond_dim == 2 && phys_dim == 2 {
        reports.push(BoundReport::ceiling("q_a<=1/2", &params, 0.5, w.q_a));
        reports.push(BoundReport::ceiling("p_u<=1/4", &params, 0.25, p_u));
    }
    Ok(Theorem1Chain {
        l,
        bond_dim,
        phys_dim,
        weights: w,
        tail,
        bound,
        exact_z_minus_one: exact,
        toric_sum,
        lemma_sum,
        reports,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Bound {
    pub n_sites: usize,
    /// `2·g(↓,↓,↓) = 2(D⁴ − 1/d)/((D²d)² − 1)`.
    pub per_site_ratio: f64,
    /// `2^V · g(↓,↓,↓)^(V−1)`, the bound without its constant.
    pub shape: f64,
}

pub fn theorem2_bound(n_sites: usize, bond_dim: usize, phys_dim: usize) -> Result<Theorem2Bound> {
    if n_sites == 0 {
        return invalid("need at least one site");
    }
    let g = g_table(bond_dim, phys_dim)?.get(Spin::Down, Spin::Down, Spin::Down);
    Ok(Theorem2Bound {
        n_sites,
        per_site_ratio: 2.0 * g,
        shape: 2f64.powi(n_sites as i32) * g.powi(n_sites as i32 - 1),
    })
}

/// `κ_l^Δ / D²`.
pub fn theorem3_profile(deltas: &[usize], bond_dim: usize) -> Vec<f64> {
    let d2 = (bond_dim * bond_dim) as f64;
    deltas.iter().map(|&d| KAPPA_LOCAL.powi(d as i32) / d2).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem4Floor {
    /// `D²(1 − 1/d) / ((D²d)² − 1)`.
    pub prefactor: f64,
    /// `D²(tr O² − (tr O)²/d) / ((D²d)² − 1)`.
    pub operator_prefactor: f64,
}

pub fn theorem4_floor(bond_dim: usize, phys_dim: usize, tr_o: f64, tr_o2: f64) -> Result<Theorem4Floor> {
    if bond_dim < 2 || phys_dim < 2 {
        return invalid("need D >= 2 and d >= 2");
    }
    if !(tr_o2 > 0.0) {
        return invalid("tr(O^2) must be positive");
    }
    let (bd, pd) = (bond_dim as f64, phys_dim as f64);
    let n = bd * bd * pd;
    let den = n * n - 1.0;
    Ok(Theorem4Floor {
        prefactor: bd * bd * (1.0 - 1.0 / pd) / den,
        operator_prefactor: bd * bd * (tr_o2 - tr_o * tr_o / pd) / den,
    })
}

/// Smallest `L` at which `L² p_u^{-1} η^L G(q_a/η, p_u) < 1`, so that the
/// chain bound decays like `η^L` from there on.
pub fn chain_decay_onset(bond_dim: usize, phys_dim: usize) -> Result<usize> {
    let w = AreaPerimeterWeights::new(bond_dim, phys_dim)?;
    let g = gen_fun_g(w.q_a / ETA, w.q_u)?;
    (2..100_000)
        .find(|&l| {
            let lf = l as f64;
            lf * lf / w.q_u * ETA.powi(l as i32) * g < 1.0
        })
        .ok_or_else(|| crate::Error::Domain("chain bound never decays".into()))
}

/// Settings of [`bound_suite`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub bond_dim: usize,
    pub phys_dim: usize,
    /// Torus sizes compared with exact enumeration.
    pub chain_sizes: Vec<usize>,
    pub n_samples: usize,
    pub seed: u64,
}

impl SuiteConfig {
    pub fn new(bond_dim: usize, phys_dim: usize, n_samples: usize, seed: u64) -> Self {
        Self { bond_dim, phys_dim, chain_sizes: vec![2, 3, 4], n_samples, seed }
    }
}

/// Name of the report comparing the local-loss decay per unit distance with
/// the lower edge of the allowed window.
pub const LOCAL_DECAY_WINDOW: &str = "local_decay_per_step>=kappa_l/e";

/// Every closed-form bound next to the exact or sampled quantity it
/// controls.
pub fn bound_suite(cfg: &SuiteConfig) -> Result<Vec<BoundReport>> {
    let (bd, pd) = (cfg.bond_dim, cfg.phys_dim);
    let with = |extra: &[(&'static str, f64)]| -> Vec<(&'static str, f64)> {
        extra.iter().copied().chain([("D", bd as f64), ("d", pd as f64)]).collect()
    };
    let mut out = Vec::new();

    // norm concentration
    for &l in &cfg.chain_sizes {
        let chain = theorem1_chain(l, bd, pd)?;
        if let Some(z1) = chain.exact_z_minus_one {
            let p = with(&[("L", l as f64)]);
            out.push(BoundReport::ceiling("z_minus_one<=chain_bound", &p, chain.bound, z1));
        }
        out.extend(chain.reports.into_iter().filter(|r| !r.name.starts_with("q_a") && !r.name.starts_with("p_u")));
    }
    let w = AreaPerimeterWeights::new(bd, pd)?;
    if bd == 2 && pd == 2 {
        out.push(BoundReport::ceiling("q_a<=1/2", &with(&[]), 0.5, w.q_a));
        out.push(BoundReport::ceiling("p_u<=1/4", &with(&[]), 0.25, w.q_u));
        out.push(BoundReport::ceiling("G(0.54,0.25)<=2.9", &with(&[]), 2.9, gen_fun_g(0.54, 0.25)?));
        out.push(BoundReport::ceiling(
            "G(qa/eta,pu)<=G(0.54,0.25)",
            &with(&[]),
            gen_fun_g(0.54, 0.25)?,
            gen_fun_g(w.q_a / ETA, w.q_u)?,
        ));
    }
    let onset = chain_decay_onset(bd, pd)?;
    let (b0, b1) = (theorem1_chain(onset, bd, pd)?.bound, theorem1_chain(onset + 1, bd, pd)?.bound);
    let poly = ((onset + 1) as f64 / onset as f64).powi(3);
    let p = with(&[("L", onset as f64)]);
    out.push(BoundReport::ceiling("chain_ratio<=kappa*poly", &p, KAPPA * poly, b1 / b0));

    // global loss
    for d1 in [2, 3, 4] {
        for d2 in [2, 3, 4] {
            let t = theorem2_bound(4, d1, d2)?;
            let p = [("D", d1 as f64), ("d", d2 as f64)];
            out.push(BoundReport::ceiling("theorem2_ratio<1", &p, 1.0, t.per_site_ratio));
        }
    }
    let (small, large) = (LatticeSpec::new(2, 2, bd, pd)?, LatticeSpec::new(3, 3, bd, pd)?);
    let v_small = variance_scan(small, &global_loss(LossKind::GlobalPure, &small)?, cfg.n_samples, cfg.seed)?;
    let v_large = variance_scan(large, &global_loss(LossKind::GlobalPure, &large)?, cfg.n_samples, cfg.seed)?;
    let ratio = theorem2_bound(4, bd, pd)?.per_site_ratio;
    let p = with(&[("V_small", 4.0), ("V_large", 9.0), ("samples", cfg.n_samples as f64)]);
    out.push(BoundReport::ceiling(
        "global_variance_ratio<=10*ratio^5",
        &p,
        10.0 * ratio.powi(5),
        v_large.mean_variance() / v_small.mean_variance(),
    ));

    // local loss, off-site decay
    let spec = LatticeSpec::new(4, 5, bd, pd)?;
    let kinds = [
        (LossKind::LocalUnnormalized, LossSpec::local(LossKind::LocalUnnormalized, 0, traceless_observable(pd), true)?),
        (LossKind::LocalNormalized, LossSpec::local(LossKind::LocalNormalized, 0, plus_projector(pd), false)?),
    ];
    for (kind, loss) in kinds {
        let report = variance_scan(spec, &loss, cfg.n_samples, cfg.seed)?;
        let profile = distance_profile(&report)?;
        let fit = fit_log_profile(&profile)?;
        let step = fit.slope.exp();
        let normalized = f64::from(u8::from(kind == LossKind::LocalNormalized));
        let p = with(&[("rows", 4.0), ("cols", 5.0), ("normalized", normalized), ("samples", cfg.n_samples as f64)]);
        out.push(BoundReport::ceiling("local_decay_per_step<=1", &p, 1.0, step));
        out.push(BoundReport::floor(LOCAL_DECAY_WINDOW, &p, KAPPA_LOCAL * (-1.0f64).exp(), step));
        if kind == LossKind::LocalUnnormalized {
            // constant fixed at the nearest off-site shell
            let shape = |delta: usize| theorem3_profile(&[delta], bd)[0];
            if let Some(first) = profile.iter().find(|g| g.distance >= 1) {
                let c = first.mean_variance / shape(first.distance);
                for g in profile.iter().filter(|g| g.distance > first.distance) {
                    let p = with(&[("delta", g.distance as f64), ("samples", cfg.n_samples as f64)]);
                    out.push(BoundReport::ceiling(
                        "local_profile<=c*kappa_l^delta/D^2",
                        &p,
                        c * shape(g.distance) + 2.0 * g.std_error,
                        g.mean_variance,
                    ));
                }
            }
        }
    }

    // local loss, on-site floor
    let obs = traceless_observable(pd);
    let floor = theorem4_floor(bd, pd, 0.0, obs.trace_of_square())?;
    out.push(BoundReport::floor("theorem4_prefactor>0", &with(&[]), 0.0, floor.prefactor));
    let sizes = [LatticeSpec::new(2, 3, bd, pd)?, LatticeSpec::new(3, 3, bd, pd)?, LatticeSpec::new(3, 4, bd, pd)?];
    let onsite = onsite_floor_check(&sizes, LossKind::LocalUnnormalized, &obs, cfg.n_samples, cfg.seed)?;
    for e in &onsite.entries {
        let p = with(&[("rows", e.spec.rows as f64), ("cols", e.spec.cols as f64), ("samples", e.n as f64)]);
        out.push(BoundReport::floor("onsite_variance>3se", &p, 3.0 * e.std_error, e.variance));
    }
    let p = with(&[("samples", cfg.n_samples as f64)]);
    out.push(BoundReport::ceiling("onsite_band_ratio<=3", &p, crate::gradient::ONSITE_BAND, onsite.band_ratio));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_at_two() {
        let w = AreaPerimeterWeights::new(2, 2).unwrap();
        assert!(w.q_a <= 0.5 && w.q_u <= 0.25);
    }

    #[test]
    fn chain_small() {
        for l in 2..=3 {
            let c = theorem1_chain(l, 2, 2).unwrap();
            assert!(c.reports.iter().all(|r| r.satisfied), "{:?}", c.reports);
        }
    }

    #[test]
    fn infinite_slack_roundtrips() {
        let r = BoundReport::ceiling("x<=1", &[], 1.0, 0.0);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"inf\""));
        assert_eq!(serde_json::from_str::<BoundReport>(&json).unwrap(), r);
    }

    #[test]
    fn floor_prefactors() {
        let f = theorem4_floor(2, 2, 0.0, 2.0).unwrap();
        assert!((f.prefactor - 2.0 / 63.0).abs() < 1e-15);
        assert!((f.operator_prefactor - 8.0 / 63.0).abs() < 1e-15);
        assert!(theorem4_floor(2, 2, 0.0, 0.0).is_err());
    }

    #[test]
    fn decay_onset_at_two() {
        let l = chain_decay_onset(2, 2).unwrap();
        assert!(l > 4);
        let c = theorem1_chain(l, 2, 2).unwrap();
        assert!(c.bound.is_finite());
    }

    #[test]
    fn theorem2_ratio() {
        let b = theorem2_bound(4, 2, 2).unwrap();
        assert!((b.per_site_ratio - 31.0 / 63.0).abs() < 1e-15);
    }
}
