use serde::Serialize;

use tnlab::bounds::{bound_suite, render_table, BoundReport, SuiteConfig, MAX_EXACT_L};
use tnlab::gradient::{
    global_loss, gradient_samples, plus_projector, traceless_observable, LossKind, LossSpec, VarianceReport,
};
use tnlab::polyomino::{
    enumerate_directed, series_coefficients, verify_bridge_lemma, BridgeViolation, Polyomino, MAX_TORIC_SIZE,
};
use tnlab::spin::{exact_partition_function, f_table, mc_second_moment};
use tnlab::stats::{mean, standard_error_of_mean};
use tnlab::{Error, Result};

use crate::config::{Format, RunConfig, Size};
use crate::output::{write_json, write_table};
use crate::{LossArg, ObservableArg};

/// Agreement threshold between an estimate and its exact value.
const SIGMAS: f64 = 3.0;

/// Outcome of a command that ran to completion.
pub struct Verdict {
    pub failures: Vec<String>,
}

impl Verdict {
    fn from(failures: Vec<String>) -> Self {
        Self { failures }
    }
}

#[derive(Serialize)]
struct NormRow {
    size: String,
    n_samples: usize,
    mean_norm: f64,
    se_mean_norm: f64,
    second_moment: f64,
    se_second_moment: f64,
    exact_z: f64,
    z_sigmas: f64,
    agrees: bool,
}

pub fn norm_stats(cfg: &RunConfig) -> Result<Verdict> {
    cfg.require_samples(2)?;
    let table = f_table(cfg.bond_dim, cfg.phys_dim)?;
    let mut rows = Vec::new();
    for spec in cfg.lattices()? {
        let exact = exact_partition_function(spec.rows, spec.cols, &table)?;
        let mc = mc_second_moment(spec, cfg.n_samples, cfg.seed)?;
        let z_sigmas = (mc.second_moment - exact.z).abs() / mc.se_second_moment;
        let mean_ok = (mc.mean_norm - 1.0).abs() <= SIGMAS * mc.se_mean_norm;
        rows.push(NormRow {
            size: format!("{}x{}", spec.rows, spec.cols),
            n_samples: mc.n_samples,
            mean_norm: mc.mean_norm,
            se_mean_norm: mc.se_mean_norm,
            second_moment: mc.second_moment,
            se_second_moment: mc.se_second_moment,
            exact_z: exact.z,
            z_sigmas,
            agrees: z_sigmas <= SIGMAS && mean_ok,
        });
    }
    write_table(cfg, "norm_stats", "rows", &rows)?;
    for r in &rows {
        println!(
            "{:>5}  E<Psi|Psi>={:.4}±{:.4}  E<Psi|Psi>^2={:.4}±{:.4}  Z={:.4}  {}",
            r.size,
            r.mean_norm,
            r.se_mean_norm,
            r.second_moment,
            r.se_second_moment,
            r.exact_z,
            if r.agrees { "ok" } else { "MISMATCH" }
        );
    }
    Ok(Verdict::from(
        rows.iter()
            .filter(|r| !r.agrees)
            .map(|r| format!("{}: sampled moments disagree with exact Z={} beyond {SIGMAS} SE", r.size, r.exact_z))
            .collect(),
    ))
}

#[derive(Serialize)]
struct ScanSummary {
    loss: LossKind,
    size: String,
    n_sites: usize,
    /// `mean` over sites for global losses, `max` for local ones.
    statistic: &'static str,
    value: f64,
    std_error: f64,
    argmax_site: Option<usize>,
    site_avg_gradient: f64,
    site_avg_gradient_se: f64,
    n_failed: usize,
}

fn build_loss(kind: LossKind, spec: &tnlab::state::LatticeSpec, site: usize, obs: ObservableArg) -> Result<LossSpec> {
    if !kind.is_local() {
        return global_loss(kind, spec);
    }
    if site >= spec.n_sites() {
        return Err(Error::InvalidArgument(format!("--site {site} is outside a {}-site lattice", spec.n_sites())));
    }
    match obs {
        ObservableArg::Plus => LossSpec::local(kind, site, plus_projector(spec.phys_dim), false),
        ObservableArg::Traceless => LossSpec::local(kind, site, traceless_observable(spec.phys_dim), true),
    }
}

pub fn var_scan(cfg: &RunConfig, losses: &[LossArg], site: usize, obs: ObservableArg) -> Result<Verdict> {
    cfg.require_samples(3)?;
    let specs = cfg.lattices()?;
    // build every loss first so a bad --site fails before anything is written
    let jobs = losses
        .iter()
        .flat_map(|&arg| cfg.sizes.iter().zip(&specs).map(move |(&size, &spec)| (arg, size, spec)))
        .map(|(arg, size, spec)| Ok((arg, size, spec, build_loss(arg.into(), &spec, site, obs)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut summary = Vec::new();
    let mut failures = Vec::new();
    for (arg, size, spec, loss) in jobs {
        let kind = LossKind::from(arg);
        let (samples, failed) = gradient_samples(spec, &loss, cfg.n_samples, cfg.seed)?;
        let report = VarianceReport::from_samples(spec, &loss, cfg.seed, &samples, failed.len())?;
        write_table(cfg, &format!("var_scan_{}_{size}", arg.stem()), "sites", &report.sites)?;

        // the site-averaged gradient has zero mean for every loss
        let averaged: Vec<f64> = samples.iter().map(|g| mean(g)).collect();
        let (avg, avg_se) = (mean(&averaged), standard_error_of_mean(&averaged)?);
        if avg.abs() > SIGMAS * avg_se {
            failures.push(format!("{kind:?} {size}: mean gradient {avg:e} beyond {SIGMAS} SE ({avg_se:e})"));
        }
        summary.push(summarize(kind, size, &report, avg, avg_se));
    }
    write_table(cfg, "var_scan_summary", "summary", &summary)?;
    for s in &summary {
        println!(
            "{:<20} {:>5}  {} variance {:.4e} ± {:.1e}",
            format!("{:?}", s.loss),
            s.size,
            s.statistic,
            s.value,
            s.std_error
        );
    }
    Ok(Verdict::from(failures))
}

fn summarize(kind: LossKind, size: Size, report: &VarianceReport, avg: f64, avg_se: f64) -> ScanSummary {
    let (statistic, value, std_error, argmax_site) = if kind.is_local() {
        let m = report.max_variance();
        ("max", m.variance, m.std_error.unwrap_or(f64::NAN), Some(m.site))
    } else {
        ("mean", report.mean_variance(), report.mean_variance_se(), None)
    };
    ScanSummary {
        loss: kind,
        size: size.to_string(),
        n_sites: report.sites.len(),
        statistic,
        value,
        std_error,
        argmax_site,
        site_avg_gradient: avg,
        site_avg_gradient_se: avg_se,
        n_failed: report.n_failed,
    }
}

/// Largest area compared between direct enumeration and the series.
pub const POLYOMINO_AREA: usize = 10;

#[derive(Serialize)]
struct CountRow {
    m: usize,
    n: usize,
    enumerated: u64,
    series: u64,
    agrees: bool,
}

#[derive(Serialize)]
struct BridgeRow {
    l: usize,
    n_valid: usize,
    max_pieces: usize,
    violations: usize,
}

#[derive(Serialize)]
struct ShapeRow {
    name: &'static str,
    m: usize,
    p: usize,
    n: usize,
    ascii: String,
}

#[derive(Serialize)]
struct PolyominoDoc<'a> {
    counts: &'a [CountRow],
    bridge: &'a [BridgeRow],
    violations: Vec<(usize, &'a BridgeViolation)>,
    shapes: &'a [ShapeRow],
}

pub fn polyomino(cfg: &RunConfig) -> Result<Verdict> {
    let tori = cfg.tori(MAX_TORIC_SIZE, "toric enumeration")?;
    let enumerated = enumerate_directed(POLYOMINO_AREA)?;
    let series = series_coefficients(POLYOMINO_AREA, POLYOMINO_AREA)?;
    let counts: Vec<CountRow> = (1..=POLYOMINO_AREA)
        .flat_map(|m| (1..=m).map(move |n| (m, n)))
        .map(|(m, n)| {
            let (e, s) = (enumerated.get(m, n), series.get(m, n));
            CountRow { m, n, enumerated: e, series: s, agrees: e == s }
        })
        .filter(|r| r.enumerated != 0 || r.series != 0)
        .collect();
    let reports = tori.iter().map(|&l| verify_bridge_lemma(l)).collect::<Result<Vec<_>>>()?;
    let bridge: Vec<BridgeRow> = reports
        .iter()
        .map(|r| BridgeRow { l: r.l, n_valid: r.n_valid, max_pieces: r.max_pieces, violations: r.violations.len() })
        .collect();
    let figure = Polyomino::plane([(-2, -2), (-1, -2), (-1, 0), (0, -2), (0, -1), (0, 0)])?.with_root((0, 0))?;
    let st = figure.stats();
    let shapes = [ShapeRow { name: "reference_shape", m: st.m, p: st.p, n: st.n, ascii: figure.render_ascii() }];

    let mut failures: Vec<String> = counts
        .iter()
        .filter(|r| !r.agrees)
        .map(|r| format!("count mismatch at m={} n={}: {} vs {}", r.m, r.n, r.enumerated, r.series))
        .collect();
    failures.extend(
        bridge.iter().filter(|b| b.violations > 0).map(|b| format!("L={}: {} bridge violations", b.l, b.violations)),
    );

    match cfg.format {
        Format::Json => write_json(
            cfg,
            "polyomino",
            PolyominoDoc {
                counts: &counts,
                bridge: &bridge,
                violations: reports.iter().flat_map(|r| r.violations.iter().map(move |v| (r.l, v))).collect(),
                shapes: &shapes,
            },
        )?,
        Format::Csv => {
            write_table(cfg, "polyomino_counts", "counts", &counts)?;
            write_table(cfg, "polyomino_bridge", "bridge", &bridge)?;
            write_table(cfg, "polyomino_shapes", "shapes", &shapes)?;
        }
    }
    println!(
        "m<={POLYOMINO_AREA}: {} (m,n) cells, {} mismatches",
        counts.len(),
        counts.iter().filter(|r| !r.agrees).count()
    );
    for b in &bridge {
        println!(
            "L={}: {} valid configurations, at most {} pieces, {} violations",
            b.l, b.n_valid, b.max_pieces, b.violations
        );
    }
    println!("reference shape: m={} p={} n={}", st.m, st.p, st.n);
    Ok(Verdict::from(failures))
}

#[derive(Serialize)]
struct BoundRow<'a> {
    name: &'a str,
    params: String,
    bound: f64,
    compared: f64,
    slack: f64,
    satisfied: bool,
}

pub fn bounds(cfg: &RunConfig) -> Result<Verdict> {
    cfg.require_samples(3)?;
    let chain_sizes = cfg.tori(MAX_EXACT_L, "exact chain comparison")?;
    let suite = SuiteConfig { chain_sizes, ..SuiteConfig::new(cfg.bond_dim, cfg.phys_dim, cfg.n_samples, cfg.seed) };
    let reports = bound_suite(&suite)?;
    match cfg.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Doc<'a> {
                reports: &'a [BoundReport],
            }
            write_json(cfg, "bounds", Doc { reports: &reports })?;
        }
        Format::Csv => {
            let rows: Vec<BoundRow> = reports
                .iter()
                .map(|r| BoundRow {
                    name: &r.name,
                    params: r.params.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";"),
                    bound: r.bound,
                    compared: r.compared,
                    slack: r.slack,
                    satisfied: r.satisfied,
                })
                .collect();
            write_table(cfg, "bounds", "reports", &rows)?;
        }
    }
    print!("{}", render_table(&reports));
    Ok(Verdict::from(reports.iter().filter(|r| !r.satisfied).map(|r| format!("{} does not hold", r.name)).collect()))
}
