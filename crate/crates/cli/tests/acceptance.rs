//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::process::{Command, ExitCode};
use std::time::Instant;

use pmc_core::densities::{gauss_kl, gauss_logpdf, loggamma_logpdf};
use pmc_core::harness::{repeat_study, run_pipeline, RunConfig, RunSummary, StudySummary};
use pmc_core::hclust::{cluster, refit, regroup};
use pmc_core::patching::integer_partition;
use pmc_core::pmc::{ess, evidence, importance_sample, perplexity, pmc_update, responsibilities};
use pmc_core::quad::integrate;
use pmc_core::targets::{heavytail_evidence, heavytail_factor, shell_evidence, ShellSpec};
use pmc_core::{make_target, rng, CovarianceFactor, MixtureComponent, MixtureDensity, Target, TargetSpec};
use rand::Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn study(config: &RunConfig, runs: usize) -> Result<(StudySummary, Vec<RunSummary>), String> {
    let s = repeat_study(config, runs).map_err(|e| e.to_string())?;
    ensure(s.n_failed == 0, format!("{} failed runs", s.n_failed))?;
    let runs = s.runs.iter().filter_map(|r| r.summary.clone()).collect();
    Ok((s, runs))
}

fn ratios(runs: &[RunSummary], z: f64) -> Vec<f64> {
    runs.iter().map(|r| r.z_hat / z).collect()
}

fn fmt(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

fn shells_d2() -> Check {
    let config = RunConfig::shells(2).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let (s, runs) = study(&config, 10)?;
    let elapsed = start.elapsed().as_secs_f64();
    let mean = s.all.mean_z.unwrap() / 8.726e-2;
    let rel_sigma = s.all.mean_rel_sigma.unwrap();
    let t_max = runs.iter().map(|r| r.t_final).max().unwrap();
    let detail = format!(
        "E[Z]/Z = {mean:.4}, E[dZ/Z] = {rel_sigma:.4}, converged {}/10, max t = {t_max}, {elapsed:.1} s",
        s.all.converged
    );
    ensure((mean - 1.0).abs() <= 0.03, format!("mean off: {detail}"))?;
    ensure(rel_sigma <= 0.03, format!("uncertainty: {detail}"))?;
    ensure(s.all.converged == 10 && t_max <= 20, format!("convergence: {detail}"))?;
    ensure(elapsed <= 120.0, format!("runtime: {detail}"))?;
    Ok(detail)
}

fn shells_d10() -> Check {
    let (_, runs) = study(&RunConfig::shells(10).map_err(|e| e.to_string())?, 3)?;
    let r = ratios(&runs, 2.304e-7);
    let p: Vec<f64> = runs.iter().map(|r| r.perplexity).collect();
    let detail = format!("Z/Z = {}, P = {}", fmt(&r), fmt(&p));
    ensure(r.iter().all(|x| (x - 1.0).abs() <= 0.10), detail.clone())?;
    ensure(p.iter().all(|&x| x >= 0.15), detail.clone())?;
    Ok(detail)
}

fn tails_d2() -> Check {
    let (_, runs) = study(&RunConfig::tails(2).map_err(|e| e.to_string())?, 10)?;
    let z = 60f64.powi(-2);
    let found: Vec<&RunSummary> = runs.iter().filter(|r| r.modes_found == Some(4)).collect();
    let missing: Vec<&RunSummary> = runs.iter().filter(|r| r.modes_found != Some(4)).collect();
    let rf: Vec<f64> = found.iter().map(|r| r.z_hat / z).collect();
    let rm: Vec<f64> = missing.iter().map(|r| r.z_hat / z).collect();
    let detail = format!("{}/10 all modes, Z/Z = {}, mode-missing Z/Z = {}", found.len(), fmt(&rf), fmt(&rm));
    ensure(found.len() >= 8, detail.clone())?;
    ensure(rf.iter().all(|x| (x - 1.0).abs() <= 0.05), detail.clone())?;
    ensure(rm.iter().all(|x| (0.70..=0.80).contains(x)), detail.clone())?;
    Ok(detail)
}

fn tails_d10() -> Check {
    let (_, runs) = study(&RunConfig::tails(10).map_err(|e| e.to_string())?, 2)?;
    let good: Vec<&RunSummary> = runs.iter().filter(|r| r.converged && r.modes_found == Some(4)).collect();
    let r: Vec<f64> = good.iter().map(|r| r.z_hat / 1.654e-18).collect();
    let p: Vec<f64> = runs.iter().map(|r| r.perplexity).collect();
    let detail = format!("{}/2 converged with all modes, Z/Z = {}, P = {}", good.len(), fmt(&r), fmt(&p));
    ensure(!good.is_empty(), detail.clone())?;
    ensure(r.iter().all(|x| (x - 1.0).abs() <= 0.10), detail.clone())?;
    ensure(p.iter().all(|&x| x >= 0.5), detail.clone())?;
    Ok(detail)
}

/// Agreement to 4 significant digits: relative difference below 5e-4.
fn four_digits(value: f64, reference: f64) -> bool {
    (value / reference - 1.0).abs() < 5e-4
}

fn oracles() -> Check {
    let mut lines = Vec::new();
    for (d, shells, tails) in [(2, 8.726e-2, 2.778e-4), (10, 2.304e-7, 1.654e-18), (20, 1.064e-16, 2.735e-36)] {
        let s = shell_evidence(&ShellSpec::standard(d), 6.0);
        let t = heavytail_evidence(d);
        ensure(four_digits(s, shells), format!("shells d={d}: {s:e} vs {shells:e}"))?;
        ensure(four_digits(t, tails), format!("tails d={d}: {t:e} vs {tails:e}"))?;
        ensure(t == 60f64.powi(-(d as i32)), format!("tails d={d} is not 60^-d"))?;
        for spec in [TargetSpec::shells(d), TargetSpec::tails(d)] {
            let z = make_target(&spec).map_err(|e| e.to_string())?.evidence();
            ensure(z.is_some(), format!("no oracle for {spec:?}"))?;
        }
        lines.push(format!("d={d}: {s:.4e} / {t:.4e}"));
    }
    // in two dimensions each thin ring integrates to its circumference
    let s2 = shell_evidence(&ShellSpec::standard(2), 6.0);
    ensure((s2 / (std::f64::consts::PI / 36.0) - 1.0).abs() < 1e-9, format!("shells d=2: {s2} vs pi/36"))?;
    Ok(lines.join(", "))
}

fn gauss(mean: Vec<f64>, cov: &[f64]) -> MixtureComponent {
    let d = mean.len();
    MixtureComponent::gaussian(mean, CovarianceFactor::from_covariance(cov, d).unwrap()).unwrap()
}

fn random_mixture<R: Rng>(r: &mut R, k: usize) -> MixtureDensity {
    let comps = (0..k)
        .map(|_| {
            let (a, b, rho) = (r.random_range(0.05..3.0), r.random_range(0.05..3.0), r.random_range(-0.8..0.8));
            let c = rho * f64::sqrt(a * b);
            gauss(vec![r.random_range(-10.0..10.0), r.random_range(-10.0..10.0)], &[a, c, c, b])
        })
        .collect();
    let w = (0..k).map(|_| r.random_range(0.01..1.0)).collect();
    MixtureDensity::new(comps, w).unwrap()
}

fn mixture_mean(q: &MixtureDensity) -> [f64; 2] {
    q.live().fold([0.0; 2], |m, (_, w, c)| [m[0] + w * c.mean()[0], m[1] + w * c.mean()[1]])
}

fn properties() -> Check {
    let mut n = 0;
    for parts in 1..=50 {
        for total in parts..=500 {
            let p = integer_partition(total, parts).map_err(|e| e.to_string())?;
            let ok = p.len() == parts && p.iter().sum::<usize>() == total && p[0] - p[parts - 1] <= 1;
            ensure(ok && p.windows(2).all(|w| w[0] >= w[1]), format!("partition {total}/{parts}: {p:?}"))?;
        }
    }
    n += 1;

    let mut r = rng::stream(2024, &[]);
    for _ in 0..20 {
        let (m1, v1) = (r.random_range(-3.0..3.0), r.random_range(0.1..4.0));
        let (m2, v2) = (r.random_range(-3.0..3.0), r.random_range(0.1..4.0));
        let (p, q) = (gauss(vec![m1], &[v1]), gauss(vec![m2], &[v2]));
        let s = f64::sqrt(v1);
        let quad = integrate(
            |x| {
                let lp = gauss_logpdf(&[x], &p).unwrap();
                lp.exp() * (lp - gauss_logpdf(&[x], &q).unwrap())
            },
            m1 - 15.0 * s,
            m1 + 15.0 * s,
            1e-12,
            1e-14,
        );
        let kl = gauss_kl(&p, &q);
        ensure((kl - quad).abs() < 1e-6, format!("KL {kl} vs quadrature {quad}"))?;
    }
    n += 1;

    let hand = [
        (vec![2.0, 1.0, 1.0], 2f64.powf(1.5) / 3.0, 8.0 / 9.0),
        (vec![1.0, 0.0, 0.0, 0.0], 0.25, 0.25),
        (vec![3.0, 3.0], 1.0, 1.0),
    ];
    for (w, p, e) in &hand {
        let (pp, ee) = (perplexity(w).unwrap(), ess(w).unwrap());
        ensure((pp - p).abs() < 1e-12 && (ee - e).abs() < 1e-12, format!("{w:?}: P {pp}, ESS {ee}"))?;
    }
    n += 1;

    let e = evidence(&[1.0, 2.0, 3.0]);
    ensure(e.z_hat == 2.0 && e.variance_hat == 1.0 / 3.0, format!("{e:?}"))?;
    let e = evidence(&[0.0, 4.0]);
    ensure(e.z_hat == 2.0 && e.variance_hat == 4.0, format!("{e:?}"))?;
    n += 1;

    let tol = |prev: f64| prev * (1.0 + 1e-12) + 1e-12;
    for i in 0..50 {
        let k = 10 + i % 21;
        let q_in = random_mixture(&mut r, k);
        let picks: Vec<MixtureComponent> =
            (0..3 + i % 4).map(|_| q_in.components()[r.random_range(0..k)].clone()).collect();
        let q0 = MixtureDensity::equal_weights(picks).unwrap();
        let out = cluster(&q_in, &q0, 1e-4, 1000).map_err(|e| e.to_string())?;
        let mut prev = out.initial_distance;
        for row in &out.trace {
            ensure(row.distance <= tol(prev), format!("instance {i}: {} > {prev}", row.distance))?;
            prev = row.distance;
        }
        ensure(out.final_distance <= tol(out.initial_distance), format!("instance {i}: final above initial"))?;
        let q1 = refit(&q_in, &regroup(&q_in, &q0)).map_err(|e| e.to_string())?;
        let (a, b) = (mixture_mean(&q_in), mixture_mean(&q1));
        ensure(
            (a[0] - b[0]).abs() < 1e-10 && (a[1] - b[1]).abs() < 1e-10,
            format!("instance {i}: refit moved the mean {a:?} -> {b:?}"),
        )?;
    }
    n += 2;

    let target = make_target(&TargetSpec::shells(2)).unwrap();
    let ring: Vec<MixtureComponent> = (0..20)
        .map(|k| {
            let phi = (k % 10) as f64 * std::f64::consts::TAU / 10.0;
            let cx = if k < 10 { -3.5 } else { 3.5 };
            gauss(vec![cx + 2.0 * phi.cos(), 2.0 * phi.sin()], &[0.3, 0.0, 0.0, 0.3])
        })
        .collect();
    let q = MixtureDensity::equal_weights(ring).unwrap();
    let s = importance_sample(&target, &q, 4000, &mut rng::stream(3, &[]));
    let rho = responsibilities(&q, &s).map_err(|e| e.to_string())?;
    for (i, row) in rho.chunks(q.live_count()).enumerate() {
        let sum: f64 = row.iter().sum();
        let want = if s.weights[i] > 0.0 { 1.0 } else { 0.0 };
        ensure((sum - want).abs() < 1e-12, format!("responsibility row {i} sums to {sum}"))?;
    }
    let u = pmc_update(&q, &s).map_err(|e| e.to_string())?;
    let wsum: f64 = u.weights().iter().sum();
    ensure((wsum - 1.0).abs() < 1e-12, format!("updated weights sum to {wsum}"))?;
    n += 1;

    let lg = integrate(|x| loggamma_logpdf(x, 10.0, 1.0, 1.0).exp(), -60.0, 20.0, 1e-12, 0.0);
    ensure((lg - 1.0).abs() < 1e-6, format!("LogGamma mass {lg}"))?;
    for d in [2, 10, 20] {
        for i in 0..d {
            let m = integrate(|x| heavytail_factor(x, i, d).exp(), -60.0, 60.0, 1e-12, 0.0);
            ensure((m - 1.0).abs() < 1e-6, format!("tails d={d} factor {i} mass {m}"))?;
        }
    }
    n += 1;
    Ok(format!("{n} property groups"))
}

fn clustering_compression() -> Check {
    let a = run_pipeline(&RunConfig::shells(2).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let k0 = a.q0_hc.live_count();
    let discarded = k0 - a.clustering.mixture.live_count();
    let (d0, d1) = (a.clustering.initial_distance, a.clustering.final_distance);
    let detail = format!("{k0} -> {} components ({discarded} discarded), distance {d0:.4} -> {d1:.4}", k0 - discarded);
    ensure(k0 == 30, detail.clone())?;
    ensure((5..=15).contains(&discarded), detail.clone())?;
    ensure(d1 <= d0, detail.clone())?;
    Ok(detail)
}

fn reproducible_study() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("shells.toml");
    std::fs::write(&config, RunConfig::shells(2).unwrap().to_toml()).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_pmc"))
            .args(["study", "--runs", "3", "--seed", "11", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), String::from_utf8_lossy(&status.stderr).into_owned())?;
        outputs.push(std::fs::read(out.join("study_summary.json")).map_err(|e| e.to_string())?);
    }
    ensure(outputs[0] == outputs[1], "summaries differ")?;
    Ok(format!("{} identical bytes", outputs[0].len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("shells d=2: evidence, uncertainty, convergence, runtime", shells_d2),
        ("shells d=10: evidence and perplexity", shells_d10),
        ("tails d=2: mode finding and evidence", tails_d2),
        ("tails d=10: evidence and perplexity", tails_d10),
        ("evidence oracles", oracles),
        ("property suite", properties),
        ("clustering compression", clustering_compression),
        ("study reproducibility", reproducible_study),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
