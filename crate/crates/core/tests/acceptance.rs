//! One pass/fail line per acceptance criterion. Exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tnlab::bounds::{theorem1_chain, AreaPerimeterWeights};
use tnlab::gradient::{
    analytic_gradient, distance_profile, finite_difference_gradient, fit_log_profile, global_loss, is_nonincreasing,
    onsite_floor_check, traceless_observable, variance_scan, LossKind, LossSpec,
};
use tnlab::haar::{haar_unitary, random_hermitian, second_moment_channel, SecondMomentWeights};
use tnlab::polyomino::{enumerate_directed, gen_fun_g, series_coefficients, verify_bridge_lemma, Polyomino};
use tnlab::spin::{
    bottom_layer_sum, classify_config, config_amplitude, exact_partition_function, f_table, g_table, mc_second_moment,
    ConfigClass, IsingCouplings, SpinConfig, TableKind,
};
use tnlab::state::{build_state, sample_rng, LatticeSpec};
use tnlab::stats::linear_fit;
use tnlab::tensor::{DenseTensor, C64, ZERO};
use tnlab::Result;

type Outcome = Result<(bool, String)>;

fn lattice(rows: usize, cols: usize) -> LatticeSpec {
    LatticeSpec::new(rows, cols, 2, 2).expect("valid lattice")
}

fn within(elapsed: Duration, minutes: u64) -> bool {
    elapsed <= Duration::from_secs(60 * minutes)
}

fn random_unit_vector(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    use rand_distr::{Distribution, StandardNormal};
    let v: Vec<C64> = (0..n).map(|_| C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

/// `(U⊗U) v` for `v` on two copies of `C^n`.
fn apply_twice(u: &[C64], v: &[C64], n: usize) -> Vec<C64> {
    let mut half = vec![ZERO; n * n];
    for i1 in 0..n {
        for a in 0..n {
            let c = u[i1 * n + a];
            for b in 0..n {
                half[i1 * n + b] += c * v[a * n + b];
            }
        }
    }
    let mut out = vec![ZERO; n * n];
    for i1 in 0..n {
        for i2 in 0..n {
            out[i1 * n + i2] = (0..n).map(|b| u[i2 * n + b] * half[i1 * n + b]).sum();
        }
    }
    out
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let n = 8;
    let samples = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // rank-one input |a⟩⟨b| with generic traces against I and SWAP
    let a = random_unit_vector(n * n, &mut rng);
    let b = random_unit_vector(n * n, &mut rng);
    let input = DenseTensor::from_fn(vec![n, n, n, n], |i| a[i[0] * n + i[1]] * b[i[2] * n + i[3]].conj());
    let exact = second_moment_channel(&SecondMomentWeights::new(n)?, &input)?;
    let mut acc = vec![ZERO; n.pow(4)];
    for _ in 0..samples {
        let u = haar_unitary(n, &mut rng)?;
        let ua = apply_twice(u.as_slice(), &a, n);
        let ub = apply_twice(u.as_slice(), &b, n);
        for (r, x) in ua.iter().enumerate() {
            for (c, y) in ub.iter().enumerate() {
                acc[r * n * n + c] += x * y.conj();
            }
        }
    }
    let mc = DenseTensor::new(vec![n, n, n, n], acc.into_iter().map(|z| z / samples as f64).collect())?;
    let err = exact.max_abs_diff(&mc);
    let t = start.elapsed();
    Ok((err <= 5e-3 && within(t, 2), format!("max entry error {err:.2e} (tol 5e-3), {:.1}s", t.as_secs_f64())))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let f = f_table(2, 2)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for (r, c) in [(2, 2), (2, 3), (3, 3)] {
        let exact = exact_partition_function(r, c, &f)?.z;
        let mc = mc_second_moment(lattice(r, c), 5000, 2)?;
        let z_ok = (mc.second_moment - exact).abs() <= 3.0 * mc.se_second_moment;
        let norm_ok = (mc.mean_norm - 1.0).abs() <= 3.0 * mc.se_mean_norm;
        ok &= z_ok && norm_ok;
        parts.push(format!(
            "{r}x{c}: Z={exact:.4} mc={:.4}±{:.4} mean={:.4}±{:.4}",
            mc.second_moment, mc.se_second_moment, mc.mean_norm, mc.se_mean_norm
        ));
    }
    let t = start.elapsed();
    Ok((ok && within(t, 10), format!("{}; {:.1}s", parts.join("; "), t.as_secs_f64())))
}

fn criterion_3() -> Outcome {
    let f = f_table(2, 2)?;
    let mut prev = f64::INFINITY;
    let mut ok = true;
    let mut parts = Vec::new();
    for l in 2..=4 {
        let z1 = exact_partition_function(l, l, &f)?.z - 1.0;
        let bound = theorem1_chain(l, 2, 2)?.bound;
        ok &= z1 < prev && z1 <= bound;
        prev = z1;
        parts.push(format!("L={l}: Z-1={z1:.4e} bound={bound:.3e}"));
    }
    Ok((ok, parts.join("; ")))
}

fn criterion_4() -> Outcome {
    let mut worst = 0.0f64;
    for bd in [2, 3] {
        for pd in [2, 3] {
            for (kind, table) in [(TableKind::NormF, f_table(bd, pd)?), (TableKind::GlobalG, g_table(bd, pd)?)] {
                let c = IsingCouplings::new(kind, bd, pd)?;
                for ((s1, s2, s3), v) in table.iter() {
                    let sum = bottom_layer_sum(&c, s1, s2, s3);
                    worst = worst.max((sum - C64::new(v, 0.0)).norm());
                }
            }
        }
    }
    Ok((worst <= 1e-12, format!("worst entry deviation {worst:.2e} over 64 entries (tol 1e-12)")))
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let enumerated = enumerate_directed(10)?;
    let series = series_coefficients(10, 10)?;
    let counts_ok = enumerated.iter().all(|(m, n, c)| series.get(m, n) == c)
        && series.iter().all(|(m, n, c)| enumerated.get(m, n) == c);
    let shape = Polyomino::plane([(-2, -2), (-1, -2), (-1, 0), (0, -2), (0, -1), (0, 0)])?.with_root((0, 0))?;
    let s = shape.stats();
    let g = gen_fun_g(0.54, 0.25)?;
    let t = start.elapsed();
    let ok = counts_ok && (s.m, s.p, s.n) == (6, 14, 3) && g > 2.8 && g <= 2.9 && within(t, 5);
    Ok((
        ok,
        format!(
            "counts agree: {counts_ok}; shape (m,p,n)=({},{},{}); G(0.54,0.25)={g:.4}; {:.1}s",
            s.m,
            s.p,
            s.n,
            t.as_secs_f64()
        ),
    ))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let r3 = verify_bridge_lemma(3)?;
    let r4 = verify_bridge_lemma(4)?;
    let t = start.elapsed();
    let ok = r3.violations.is_empty() && r4.violations.is_empty() && within(t, 5);
    Ok((
        ok,
        format!(
            "L=3: {} valid, {} violations; L=4: {} valid, {} violations; {:.1}s",
            r3.n_valid,
            r3.violations.len(),
            r4.n_valid,
            r4.violations.len(),
            t.as_secs_f64()
        ),
    ))
}

fn criterion_7() -> Outcome {
    let spec = lattice(2, 2);
    let step = 1e-5;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for i in 0..100u64 {
        let kind = LossKind::ALL[i as usize % 4];
        let mut rng = sample_rng(7, i);
        let state = build_state(spec, &mut rng)?;
        let loss = if kind.is_local() {
            let obs = random_hermitian(spec.phys_dim, &mut rng)?;
            LossSpec::local(kind, (i as usize / 4) % spec.n_sites(), obs, false)?
        } else {
            global_loss(kind, &spec)?
        };
        for k in 0..spec.n_sites() {
            let a = analytic_gradient(&state, k, &loss)?;
            let fd = finite_difference_gradient(&state, k, &loss, step)?;
            let scale = a.abs().max(1e-12);
            worst = worst.max((a - fd).abs() / scale);
            checked += 1;
        }
    }
    Ok((worst <= 1e-6, format!("{checked} derivatives on 100 instances, worst relative error {worst:.2e} (tol 1e-6)")))
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let sizes = [(2, 2), (2, 3), (2, 4), (3, 3), (3, 4), (4, 4)];
    let mut ok = true;
    let mut parts = Vec::new();
    for kind in [LossKind::GlobalPure, LossKind::GlobalNormalized] {
        let mut vars = Vec::new();
        for (r, c) in sizes {
            let spec = lattice(r, c);
            vars.push(variance_scan(spec, &global_loss(kind, &spec)?, 400, 8)?.mean_variance());
        }
        let decreasing = vars.windows(2).all(|w| w[1] < w[0]);
        let xs: Vec<f64> = sizes.iter().map(|(r, c)| (r * c) as f64).collect();
        let ys: Vec<f64> = vars.iter().map(|v| v.ln()).collect();
        let fit = linear_fit(&xs, &ys)?;
        ok &= decreasing && fit.slope < 0.0 && fit.r_squared >= 0.9;
        let listed: Vec<String> = vars.iter().map(|v| format!("{v:.2e}")).collect();
        parts.push(format!("{kind:?} [{}] slope={:.3} R2={:.3}", listed.join(", "), fit.slope, fit.r_squared));
    }
    let t = start.elapsed();
    Ok((ok && within(t, 30), format!("{}; {:.1}s", parts.join("; "), t.as_secs_f64())))
}

fn criterion_9() -> Outcome {
    let spec = LatticeSpec::new(4, 5, 2, 2)?;
    let loss = LossSpec::local(LossKind::LocalUnnormalized, 0, traceless_observable(2), true)?;
    let report = variance_scan(spec, &loss, 500, 3)?;
    let profile = distance_profile(&report)?;
    let fit = fit_log_profile(&profile)?;
    let peak = report.max_variance().site;
    let monotone = is_nonincreasing(&profile, 2.0);
    let listed: Vec<String> = profile.iter().map(|g| format!("{}:{:.2e}", g.distance, g.mean_variance)).collect();
    Ok((
        peak == 0 && monotone && fit.slope < 0.0,
        format!(
            "peak at site {peak}; profile [{}]; nonincreasing {monotone}; slope {:.3}",
            listed.join(", "),
            fit.slope
        ),
    ))
}

fn criterion_10() -> Outcome {
    let sizes = [lattice(2, 3), lattice(3, 3), lattice(3, 4)];
    let r = onsite_floor_check(&sizes, LossKind::LocalUnnormalized, &traceless_observable(2), 1000, 4)?;
    let listed: Vec<String> = r
        .entries
        .iter()
        .map(|e| format!("{}x{}:{:.3}±{:.3}", e.spec.rows, e.spec.cols, e.variance, e.std_error))
        .collect();
    Ok((
        r.band_ok && r.positive,
        format!("[{}] band ratio {:.2} (max 3), positive {}", listed.join(", "), r.band_ratio, r.positive),
    ))
}

fn criterion_11() -> Outcome {
    let f = f_table(2, 2)?;
    let w = AreaPerimeterWeights::new(2, 2)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for l in 2..=4usize {
        let (mut zero, mut valid) = (0u64, 0u64);
        for bits in 0..1u64 << (l * l) {
            let c = SpinConfig::from_bits(l, l, bits);
            let amp = config_amplitude(&c, &f);
            let class = classify_config(&c);
            ok &= (amp == 0.0) == (class == ConfigClass::Zero);
            if class == ConfigClass::Zero {
                zero += 1;
            } else {
                valid += 1;
                let cap = w.q_a.powi(c.count_up() as i32) * w.q_u.powi(c.upper_perimeter() as i32);
                ok &= amp <= cap * (1.0 + 1e-12);
            }
        }
        parts.push(format!("L={l}: {zero} zero, {valid} nonzero"));
    }
    Ok((ok, parts.join("; ")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("second-moment channel vs Haar Monte Carlo", criterion_1),
        ("norm statistics vs exact partition function", criterion_2),
        ("concentration trend and chain bound", criterion_3),
        ("f/g tables from the two-layer model", criterion_4),
        ("directed polyomino counts", criterion_5),
        ("bridge transformation", criterion_6),
        ("gradient oracle", criterion_7),
        ("global-loss barren plateau", criterion_8),
        ("local-loss distance structure", criterion_9),
        ("on-site variance floor", criterion_10),
        ("zero-amplitude classification", criterion_11),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (ok, detail) = run().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!ok);
        println!("{} criterion {}: {name}: {detail}", if ok { "PASS" } else { "FAIL" }, i + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
