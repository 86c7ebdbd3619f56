//! Acceptance gate: every criterion at its stated scale and tolerance.
//! Prints one line per criterion and exits non-zero if any fails.

use std::path::Path as FsPath;
use std::time::{Duration, Instant};

use qwalk_core::coeffs::{Variant, WalkSpec};
use qwalk_core::diffusion::{fractal_dimension_streaming, weak_convergence_test, ReferenceLaw};
use qwalk_core::equivalence::coupled_distance;
use qwalk_core::estimators::{
    equiprobability_test, estimate_decomposition, heisenberg_check, residual_moments_true, DecompositionOptions,
};
use qwalk_core::markov::{markov_test, PastFunctional, Verdict};
use qwalk_core::scale::{QuantumScale, TolerancePolicy};
use qwalk_core::walk::{
    quadratic_variation, sample_sign, simulate_ensemble, simulate_path, simulate_with_signs, EnsembleSummary,
};

type Outcome = Result<(bool, String), String>;
type Criterion<'a> = (&'static str, Duration, Box<dyn Fn() -> Outcome + 'a>);

fn brownian() -> WalkSpec {
    WalkSpec::new("0", "1").unwrap()
}

fn ou(theta: f64) -> WalkSpec {
    WalkSpec::with_params("-theta*x", "0.5", &[("theta", theta)]).unwrap()
}

fn scale(n_q: u64) -> QuantumScale {
    QuantumScale::new(n_q).unwrap()
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn c1_quadratic_variation() -> Outcome {
    let spec = brownian();
    let mut worst: f64 = 0.0;
    for n_q in [1u64 << 8, 1 << 12, 1 << 16] {
        for seed in 0..5 {
            let path = simulate_path(&spec, &scale(n_q), seed, 0).map_err(e)?;
            worst = worst.max((quadratic_variation(&path) - 1.0).abs());
        }
    }
    Ok((worst <= 1e-9, format!("max |QV - 1| = {worst:.2e}")))
}

fn c2_heisenberg() -> Outcome {
    let sc = scale(1024);
    let policy = TolerancePolicy::for_scale(&sc);
    let (b, flat) = (brownian(), WalkSpec::new("0", "0").unwrap());
    let (mut b_fail, mut flat_fail) = (0, 0);
    for seed in 0..1000 {
        let p = simulate_path(&b, &sc, seed, 0).map_err(e)?;
        b_fail += usize::from(!heisenberg_check(&p, &policy).map_err(e)?.pass);
        let p = simulate_path(&flat, &sc, seed, 0).map_err(e)?;
        flat_fail += usize::from(!heisenberg_check(&p, &policy).map_err(e)?.pass);
    }
    Ok((
        b_fail == 0 && flat_fail == 1000,
        format!("brownian failures {b_fail}/1000, sigma=0 failures {flat_fail}/1000"),
    ))
}

fn c3_equiprobability() -> Outcome {
    const N: u64 = 10_000_000;
    let signs: Vec<i8> = (0..N).map(|k| sample_sign(0, 0, k)).collect();
    let full = equiprobability_test(&signs, 0.001, 8).map_err(e)?;
    let sub_failures = signs
        .chunks(signs.len() / 100)
        .map(|c| equiprobability_test(c, 0.001, 8).map(|r| !r.pass))
        .collect::<Result<Vec<_>, _>>()
        .map_err(e)?
        .into_iter()
        .filter(|&f| f)
        .count();
    Ok((
        full.pass && sub_failures <= 3,
        format!(
            "10^7 stream pass={} (z={:.3}), failing sub-streams {sub_failures}/100",
            full.pass, full.freq_stat
        ),
    ))
}

fn c4_decomposition() -> Outcome {
    let ens = simulate_ensemble(&ou(1.0), &scale(1000), 0, 100_000).map_err(e)?;
    let rep = estimate_decomposition(&ens, DecompositionOptions::default()).map_err(e)?;
    let (mut ok, mut total) = (0usize, 0usize);
    for c in rep.cells.iter().filter(|c| c.reliable) {
        let (Some(d), Some(dse), Some(s), Some(sse)) = (c.drift_est, c.drift_se, c.vol_est, c.vol_se) else {
            continue;
        };
        total += 1;
        // b = -x is 1-Lipschitz, so the in-cell drift average is within half a cell width of -x_center.
        let bias = 0.5 * (c.x_hi - c.x_lo);
        if (d + c.x_center).abs() <= 3.0 * dse + bias && (s - 0.5).abs() <= 3.0 * sse {
            ok += 1;
        }
    }
    let frac = ok as f64 / total.max(1) as f64;
    Ok((total > 0 && frac >= 0.95, format!("{ok}/{total} reliable cells within bounds ({:.2}%)", 100.0 * frac)))
}

fn c5_true_residuals() -> Outcome {
    let ens = simulate_ensemble(&ou(1.0), &scale(1000), 0, 1000).map_err(e)?;
    let r = residual_moments_true(&ens).map_err(e)?;
    let tol = 3.0 / (r.pooled.steps_used as f64).sqrt();
    Ok((
        r.max_path_second_moment_dev <= 1e-10 && r.pooled.mean_eta.abs() <= tol,
        format!(
            "max path |m2 - 1| = {:.2e}, pooled mean {:.2e} (tol {tol:.2e})",
            r.max_path_second_moment_dev, r.pooled.mean_eta
        ),
    ))
}

fn c6_fourth_moment() -> Outcome {
    let n = 10u64;
    let sc = scale(n);
    let spec = brownian();
    let mut m4 = 0.0;
    for bits in 0u32..(1 << n) {
        let signs: Vec<i8> = (0..n).map(|k| if bits >> k & 1 == 1 { 1 } else { -1 }).collect();
        let x1 = *simulate_with_signs(&spec, &sc, 0.0, &signs).map_err(e)?.last().unwrap();
        m4 += x1.powi(4);
    }
    m4 /= (1u64 << n) as f64;
    let exact_ok = (m4 - 2.8).abs() <= 1e-12;

    let ens = simulate_ensemble(&spec, &scale(1 << 12), 0, 100_000).map_err(e)?;
    let mc = EnsembleSummary::from_summaries(0, 1 << 12, &ens.summaries).terminal.m4;
    let centre = 3.0 - 2f64.powi(-11);
    let mc_ok = (mc - centre).abs() <= 0.08;
    Ok((exact_ok && mc_ok, format!("enumerated m4 = {m4:.15}, Monte Carlo m4 = {mc:.4} (target {centre:.4} +- 0.08)")))
}

fn run_cli(args: &[&str]) -> Result<i32, String> {
    let mut argv = vec!["qwalk".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    Ok(qwalk_core::cli::run(argv))
}

fn write_spec(dir: &FsPath, name: &str, spec: &WalkSpec) -> String {
    let p = dir.join(name);
    std::fs::write(&p, spec.canonical_json()).unwrap();
    p.display().to_string()
}

fn c7_weak_convergence(work: &FsPath) -> Outcome {
    let spec = write_spec(work, "brownian.json", &brownian());
    let out = work.join("weak-t1");
    let code = run_cli(&[
        "--threads", "1", "verify", "diffusion", "--spec", &spec, "--ref", "brownian:1", "--nq-ladder",
        "256,1024,4096", "--paths", "100000", "--seed", "0", "--out", out.to_str().unwrap(),
    ])?;
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).map_err(e)?).map_err(e)?;
    let rungs = report["report"]["weak_convergence"]["rungs"].as_array().ok_or("missing rungs")?;
    let naive: Vec<f64> = rungs.iter().map(|r| r["ks_naive"].as_f64().unwrap()).collect();
    let corrected: Vec<f64> = rungs.iter().map(|r| r["ks_stat"].as_f64().unwrap()).collect();
    let decreasing = naive.windows(2).all(|w| w[1] < w[0]);
    let last = *corrected.last().unwrap();

    // Exact OU variance from v_{k+1} = (1 - theta dt)^2 v_k + sigma^2 dt.
    let weak = weak_convergence_test(&ou(1.0), ReferenceLaw::Ou { theta: 1.0, sigma0: 0.5 }, &[256, 1024, 4096], 100_000, 0, 0.01)
        .map_err(e)?;
    let mut ou_ok = true;
    let mut ou_z = Vec::new();
    for r in &weak.rungs {
        let dt = 1.0 / r.n_q as f64;
        let a = 1.0 - dt;
        let v = (0..r.n_q).fold(0.0, |v, _| a * a * v + 0.25 * dt);
        let z = (r.var - v) / r.var_se;
        ou_ok &= z.abs() <= 3.0;
        ou_z.push(format!("{z:+.2}"));
    }
    Ok((
        code == 0 && decreasing && last <= 0.0075 && ou_ok,
        format!(
            "exit {code}; KS {naive:.4?} (lattice-corrected {corrected:.4?}), final {last:.4}; OU variance z {}",
            ou_z.join(" ")
        ),
    ))
}

fn c8_markov() -> Outcome {
    let sc = scale(64);
    let past = PastFunctional::RunningMaxIndicator { threshold: 0.5 };
    let variant = brownian().with_variant(Variant::RunningMax { threshold: 0.5, boost: 1.0 }).map_err(e)?;
    let (mut level_pass, mut power_fail) = (0, 0);
    for seed in 0..100 {
        let ens = simulate_ensemble(&brownian(), &sc, seed, 10_000).map_err(e)?;
        level_pass += usize::from(markov_test(&ens, past, 0.75, 10, 0.01).map_err(e)?.verdict == Verdict::Pass);
        let ens = simulate_ensemble(&variant, &sc, seed, 10_000).map_err(e)?;
        power_fail += usize::from(markov_test(&ens, past, 0.75, 10, 0.01).map_err(e)?.verdict == Verdict::Fail);
    }
    Ok((
        level_pass >= 98 && power_fail >= 95,
        format!("markov walk passes {level_pass}/100, running-max variant fails {power_fail}/100"),
    ))
}

fn c9_equivalence() -> Outcome {
    let sc = scale(10_000);
    let full = coupled_distance(&ou(1.0), &ou(1.001), &sc, 0, 1000).map_err(e)?;
    let half = coupled_distance(&ou(1.0), &ou(1.0005), &sc, 0, 1000).map_err(e)?;
    let same = coupled_distance(&ou(1.0), &ou(1.0), &sc, 0, 1000).map_err(e)?;
    let ratio = half.mean_sup_diff / full.mean_sup_diff;
    let zero = same.sup_path_diff.iter().all(|d| d.to_bits() == 0) && same.mean_sup_diff.to_bits() == 0;
    Ok((
        full.mean_sup_diff <= full.bound_used && (0.4..=0.6).contains(&ratio) && zero,
        format!(
            "mean sup {:.3e} <= bound {:.3e}; halving ratio {ratio:.4}; identical specs zero = {zero}",
            full.mean_sup_diff, full.bound_used
        ),
    ))
}

fn c10_fractal() -> Outcome {
    let sc = scale(1_000_000);
    let lambdas: Vec<f64> = (3..=7).rev().map(|k| 2f64.powi(-k)).collect();
    let line = WalkSpec::new("1", "0").map_err(e)?;
    let mut first = None;
    let mut line_d = Vec::new();
    let mut ordered = 0;
    for seed in 0..20 {
        let b = fractal_dimension_streaming(&brownian(), &sc, seed, 32, &lambdas).map_err(e)?.d_hat;
        let l = fractal_dimension_streaming(&line, &sc, seed, 32, &lambdas).map_err(e)?.d_hat;
        first.get_or_insert(b);
        line_d.push(l);
        ordered += usize::from(l < b);
    }
    let b0 = first.unwrap();
    let line_ok = line_d.iter().all(|d| (0.98..=1.02).contains(d));
    Ok((
        (1.85..=2.15).contains(&b0) && line_ok && ordered == 20,
        format!("brownian D = {b0:.4}, line D = {:.4}, ordered on {ordered}/20 seeds", line_d[0]),
    ))
}

fn read(p: &FsPath) -> Result<Vec<u8>, String> {
    std::fs::read(p).map_err(|err| format!("{}: {err}", p.display()))
}

/// Manifest with the fields that legitimately differ between runs removed.
fn manifest_inputs(p: &FsPath) -> Result<serde_json::Value, String> {
    let mut v: serde_json::Value = serde_json::from_slice(&read(p)?).map_err(e)?;
    let obj = v.as_object_mut().ok_or("manifest is not an object")?;
    obj.remove("duration_secs");
    obj.remove("command_line");
    Ok(v)
}

fn c11_reproducibility(work: &FsPath) -> Outcome {
    let spec = write_spec(work, "brownian.json", &brownian());
    let mut compared = 0;
    let mut diffs = Vec::new();
    for n_q in ["256", "4096", "65536"] {
        let mut dirs = Vec::new();
        for threads in ["1", "4"] {
            let out = work.join(format!("sim-{n_q}-{threads}"));
            let code = run_cli(&[
                "--threads", threads, "simulate", "--spec", &spec, "--nq", n_q, "--paths", "8", "--seed", "3",
                "--out", out.to_str().unwrap(),
            ])?;
            if code != 0 {
                return Ok((false, format!("simulate exited {code}")));
            }
            dirs.push(out);
        }
        for f in ["paths.csv", "summary.json"] {
            compared += 1;
            if read(&dirs[0].join(f))? != read(&dirs[1].join(f))? {
                diffs.push(format!("simulate n_q={n_q} {f}"));
            }
        }
        compared += 1;
        if manifest_inputs(&dirs[0].join("manifest.json"))? != manifest_inputs(&dirs[1].join("manifest.json"))? {
            diffs.push(format!("simulate n_q={n_q} manifest"));
        }
    }

    let out = work.join("weak-t4");
    run_cli(&[
        "--threads", "4", "verify", "diffusion", "--spec", &spec, "--ref", "brownian:1", "--nq-ladder",
        "256,1024,4096", "--paths", "100000", "--seed", "0", "--out", out.to_str().unwrap(),
    ])?;
    compared += 2;
    if read(&work.join("weak-t1/report.json"))? != read(&out.join("report.json"))? {
        diffs.push("diffusion report.json".into());
    }
    if manifest_inputs(&work.join("weak-t1/manifest.json"))? != manifest_inputs(&out.join("manifest.json"))? {
        diffs.push("diffusion manifest".into());
    }
    Ok((
        diffs.is_empty(),
        if diffs.is_empty() {
            format!("{compared} artifacts byte-identical between --threads 1 and --threads 4")
        } else {
            format!("differing: {}", diffs.join(", "))
        },
    ))
}

fn main() {
    let work = tempfile::tempdir().expect("temp dir");
    let w = work.path();
    let criteria: Vec<Criterion> = vec![
        ("1 exact quadratic variation", Duration::from_secs(1), Box::new(c1_quadratic_variation)),
        ("2 heisenberg condition", Duration::from_secs(10), Box::new(c2_heisenberg)),
        ("3 equiprobability/independence", Duration::from_secs(10), Box::new(c3_equiprobability)),
        ("4 decomposition recovery", Duration::from_secs(60), Box::new(c4_decomposition)),
        ("5 residuals with true coefficients", Duration::from_secs(5), Box::new(c5_true_residuals)),
        ("6 fourth-moment law", Duration::from_secs(60), Box::new(c6_fourth_moment)),
        ("7 weak convergence ladder", Duration::from_secs(300), Box::new(|| c7_weak_convergence(w))),
        ("8 markov level and power", Duration::from_secs(600), Box::new(c8_markov)),
        ("9 coupled response", Duration::from_secs(60), Box::new(c9_equivalence)),
        ("10 fractal dimension", Duration::from_secs(300), Box::new(c10_fractal)),
        // Reruns criterion 7 with more threads; its budget is the rerun itself.
        ("11 reproducibility across threads", Duration::from_secs(300), Box::new(|| c11_reproducibility(w))),
    ];

    let mut failed = 0;
    for (name, budget, run) in &criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok((ok, detail)) => (ok && elapsed <= *budget, detail),
            Err(err) => (false, format!("error: {err}")),
        };
        failed += usize::from(!ok);
        println!(
            "[{}] criterion {name}: {detail} ({:.2}s of {}s)",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
