//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so that every line is printed; exits non-zero if any fails.

use std::f64::consts::FRAC_PI_3;
use std::process::ExitCode;
use std::time::Instant;

use phase_collapse::analysis::{
    birthday_oracle, born_density_test, discrete_region_test, kinematics_checks, linear_relative_error,
    mean_empty_closed_form, overlap_fraction_exact, overlap_fraction_linear, Binning, SectionConvention,
};
use phase_collapse::cli::{main_with_args, manifest_without_timestamps};
use phase_collapse::collapse::{ensemble_run, ensemble_until_registered, Constants, CoverageMode, ScanPolicy};
use phase_collapse::config::ScenarioConfig;
use phase_collapse::legacy_grid::{legacy_sample, Grid, GridConfig, GridPattern};
use phase_collapse::scenarios::{
    build_double_slit, build_stern_gerlach, instantiate, run_wigner_chain, DoubleSlitParams, WignerParams,
};
use phase_collapse::{SeededStream, SpotRecord};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Spots gathered by the other criteria for the post-hoc witness check.
#[derive(Default)]
struct Witnesses {
    runs: Vec<(Constants<f64>, Vec<SpotRecord>)>,
}

const C1_SEEDS: u64 = 100;
const C1_TRIALS: u64 = 200_000;
const C1_BINS: usize = 40;
/// Registered spots per bin required by the born test; 2·10⁵ trials cannot
/// reach the default of 10 (see README).
const C1_MIN_PER_BIN: usize = 5;

fn born_continuous(w: &mut Witnesses) -> Outcome {
    let config = build_double_slit(DoubleSlitParams::default()).expect("default geometry");
    let mut passed = 0;
    let mut spots = 0u64;
    let mut min_bins = usize::MAX;
    let mut failures = Vec::new();
    for seed in 0..C1_SEEDS {
        let s = instantiate(&config, seed).expect("scenario");
        let run = ensemble_run(&s.apparatus, C1_TRIALS, seed, None).expect("ensemble");
        spots += run.summary.registered;
        match born_density_test(&run.records, s.psi(), Binning::EqualProbability(C1_BINS), C1_MIN_PER_BIN) {
            Ok(r) => {
                min_bins = min_bins.min(r.bins.len());
                if r.p_value >= 0.001 && r.bins.len() >= C1_BINS {
                    passed += 1;
                } else {
                    failures.push(format!("seed {seed}: p={:.2e} bins={}", r.p_value, r.bins.len()));
                }
            }
            Err(e) => failures.push(format!("seed {seed}: {e}")),
        }
        if seed < 5 {
            w.runs.push((*s.apparatus.constants(), run.records));
        }
    }
    outcome(
        passed >= 95,
        format!(
            "{passed}/{C1_SEEDS} seeds pass at 0.001 (need 95); mean {:.1} registered spots per run, min merged bins {min_bins}; {}",
            spots as f64 / C1_SEEDS as f64,
            if failures.is_empty() { "no failures".to_string() } else { failures.join("; ") }
        ),
    )
}

fn born_discrete(w: &mut Witnesses) -> Outcome {
    let config = build_stern_gerlach(FRAC_PI_3, 2e-5, 1e-6).expect("geometry");
    let s = instantiate(&config, 2024).expect("scenario");
    let run = ensemble_until_registered(&s.apparatus, 10_000, 100_000_000, 2024, None).expect("ensemble");
    let (regions, _) = s.regions.as_ref().expect("region map");
    let r = discrete_region_test(&run.records, regions, &s.region_coefficients().unwrap()).expect("regions");
    let up = &r.regions[0];
    let pass = r.total == 10_000 && (up.frequency - 0.75).abs() <= 0.013;
    w.runs.push((*s.apparatus.constants(), run.records));
    outcome(
        pass,
        format!(
            "{} spots over {} trials; up frequency {:.4} (expected 0.75 ± 0.013, z = {:+.2})",
            r.total, run.summary.trials, up.frequency, up.z_score
        ),
    )
}

fn legacy() -> Outcome {
    let pattern = GridPattern::DoubleSlit {
        fringes: 8.0,
        envelope: 1.2,
    };
    let config = GridConfig::new(400, 200, 0.7, &pattern);
    let expected = 0.7 * Grid::new(&config).unwrap().mean_ratio();
    let draws = 1_000_000;
    let accepted = legacy_sample(&config, &mut SeededStream::new(3, 0), draws).unwrap();
    let rate = accepted as f64 / draws as f64;
    let rel = (rate - expected).abs() / expected;
    let dark = GridConfig::new(400, 200, 0.0, &pattern);
    let none = legacy_sample(&dark, &mut SeededStream::new(3, 0), draws).unwrap();
    outcome(
        rel <= 0.02 && none == 0,
        format!("rate {rate:.5} vs eta*mean ratio {expected:.5} ({:.2}% off); eta = 0 accepted {none}", rel * 100.0),
    )
}

fn appendix() -> Outcome {
    let c = Constants::<f64>::rounded();
    let mut ok = (overlap_fraction_linear(1, &c, SectionConvention::Sections) - 1.0 / 861.0).abs() < 1e-15;
    let mut parts = vec![format!("linear(1) = 1/{:.1}", 1.0 / overlap_fraction_linear(1, &c, SectionConvention::Sections))];
    let root = SeededStream::new(4, 0);
    for n in [1u64, 10, 90, 500] {
        let est = birthday_oracle(861, n, 100_000, &root.substream(n));
        let exact = overlap_fraction_exact(n, &c);
        let rel = (est.mean_occupied_fraction - exact).abs() / exact;
        ok &= rel <= 0.01;
        parts.push(format!("n={n}: {:.3}% off", rel * 100.0));
    }
    let crossing = (1..1000u64).find(|&n| linear_relative_error(n, &c, SectionConvention::Sections) > 0.05);
    ok &= matches!(crossing, Some(n) if (80..=95).contains(&n));
    parts.push(format!("5% crossing at n={crossing:?}"));
    let days = birthday_oracle(365, 50, 100_000, &root.substream(365));
    let closed = mean_empty_closed_form(365, 50);
    let rel = (days.mean_empty - closed).abs() / closed;
    ok &= rel <= 0.005;
    parts.push(format!("mean empty {:.2} vs {closed:.2} ({:.3}% off)", days.mean_empty, rel * 100.0));
    outcome(ok, parts.join(", "))
}

fn wigner() -> Outcome {
    let params = WignerParams::default();
    let r = run_wigner_chain(&params, 10, None).expect("chain");
    let mut ok = r.stages.len() == 10;
    let mut parts = Vec::new();
    for s in &r.stages[1..] {
        let n = (s.plus + s.minus) as f64;
        let entropy_sigma = 3.0 * (0.25 / n).sqrt();
        ok &= (s.frequency_plus - 0.5).abs() <= 0.015;
        // H(p) ≥ 1 - (2/ln 2)(p - ½)² near p = ½; 3σ in p bounds the entropy.
        ok &= 1.0 - s.entropy_bits <= 2.0 / std::f64::consts::LN_2 * entropy_sigma * entropy_sigma;
        parts.push(format!("{:.4}", s.frequency_plus));
    }
    outcome(
        ok,
        format!(
            "stage 1 up {:.4}; stages 2-10 up frequencies [{}]; {} of {} particles lost",
            r.stages[0].frequency_plus,
            parts.join(", "),
            r.lost,
            params.trials
        ),
    )
}

fn kinematics() -> Outcome {
    let r = kinematics_checks();
    let parts: Vec<String> = r
        .checks
        .iter()
        .map(|c| format!("{} = {:.4} ({})", c.name, c.value, if c.pass { "ok" } else { "off" }))
        .collect();
    outcome(r.all_pass(), parts.join(", "))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let root = dir.path();
    let scenario = root.join("double_slit.toml");
    let config = build_double_slit(DoubleSlitParams {
        half_width: 1e-5,
        rho: 1e18,
        ..DoubleSlitParams::default()
    })
    .unwrap();
    std::fs::write(&scenario, config.to_toml()).unwrap();
    let sg = root.join("sg.toml");
    std::fs::write(&sg, build_stern_gerlach(FRAC_PI_3, 2e-5, 1e-6).unwrap().to_toml()).unwrap();
    let s = |p: &std::path::Path| p.to_str().unwrap().to_string();
    let commands: Vec<(&str, Vec<String>)> = vec![
        ("run", vec!["run".into(), s(&scenario), "--trials".into(), "300000".into(), "--seed".into(), "42".into()]),
        ("run-sg", vec!["run".into(), s(&sg), "--trials".into(), "50000000".into(), "--registered".into(), "500".into(), "--seed".into(), "7".into()]),
        ("legacy", vec!["legacy".into(), "--points".into(), "2000".into(), "--seed".into(), "5".into(), "--eta".into(), "0.8".into()]),
        ("appendix", vec!["appendix".into(), "--trials".into(), "20000".into(), "--seed".into(), "9".into()]),
        ("wigner", vec!["wigner".into(), "--trials".into(), "500".into(), "--stages".into(), "4".into(), "--seed".into(), "3".into()]),
        ("sample", vec!["sample".into(), s(&scenario), "--spots".into(), "1000".into(), "--seed".into(), "1".into()]),
        ("kinematics", vec!["kinematics".into()]),
    ];
    let mut compared = 0usize;
    let mut mismatches = Vec::new();
    for (name, args) in &commands {
        let mut trees = Vec::new();
        for (k, threads) in [None, Some("1"), Some("3")].into_iter().enumerate() {
            let out = root.join(format!("{name}-{k}"));
            let mut argv = vec!["phase-collapse".to_string()];
            argv.extend(args.iter().cloned());
            argv.extend(["--out".to_string(), s(&out)]);
            if let Some(t) = threads {
                if ["run", "appendix", "wigner"].contains(&argv[1].as_str()) {
                    argv.extend(["--threads".to_string(), t.to_string()]);
                }
            }
            let code = main_with_args(&argv);
            if code != 0 {
                mismatches.push(format!("{name} exited {code}"));
            }
            trees.push(out);
        }
        let files = list_files(&trees[0]);
        for f in &files {
            let read = |t: &std::path::Path| std::fs::read(t.join(f)).unwrap_or_default();
            let first = read(&trees[0]);
            for t in &trees[1..] {
                let other = read(t);
                let same = if f.ends_with("manifest.json") {
                    let a = manifest_without_timestamps(std::str::from_utf8(&first).unwrap()).unwrap();
                    let b = manifest_without_timestamps(std::str::from_utf8(&other).unwrap()).unwrap();
                    a == b
                } else {
                    first == other
                };
                compared += 1;
                if !same {
                    mismatches.push(format!("{name}/{f}"));
                }
            }
        }
        if files.is_empty() {
            mismatches.push(format!("{name} wrote nothing"));
        }
    }
    // Reading analysis outputs back through the analyze command.
    let spots = root.join("sample-0").join("spots.csv");
    for k in 0..2 {
        let out = root.join(format!("analyze-{k}"));
        let argv = ["phase-collapse", "analyze", &s(&spots), &s(&scenario), "--report", "born", "--out", &s(&out)];
        if main_with_args(argv) != 0 {
            mismatches.push("analyze failed".into());
        }
    }
    let a = std::fs::read(root.join("analyze-0/report.json")).unwrap_or_default();
    let b = std::fs::read(root.join("analyze-1/report.json")).unwrap_or_default();
    compared += 1;
    if a != b || a.is_empty() {
        mismatches.push("analyze/report.json".into());
    }
    outcome(
        mismatches.is_empty(),
        format!(
            "{compared} file comparisons across reruns and --threads (default, 1, 3); manifests compared without timestamp fields; {}",
            if mismatches.is_empty() { "all identical".to_string() } else { format!("differences: {}", mismatches.join(", ")) }
        ),
    )
}

fn list_files(root: &std::path::Path) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).into_iter().flatten().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_str().unwrap().to_string());
            }
        }
    }
    out.sort();
    out
}

fn witnesses(mut w: Witnesses) -> Outcome {
    // Policies, coverage modes and refresh modes not used above.
    let small = build_double_slit(DoubleSlitParams {
        half_width: 5e-6,
        rho: 5e17,
        sigma_cl: 3e-9,
        eta: 0.5,
        ..DoubleSlitParams::default()
    })
    .unwrap();
    for (policy, coverage, refresh) in [
        (ScanPolicy::StopAtFirstMatch, CoverageMode::Pointwise, phase_collapse::collapse::PhaseRefresh::Dense),
        (ScanPolicy::Continue, CoverageMode::Exact, phase_collapse::collapse::PhaseRefresh::Sparse),
        (ScanPolicy::StopAtFirstMatch, CoverageMode::Exact, phase_collapse::collapse::PhaseRefresh::Sparse),
    ] {
        let mut c: ScenarioConfig = small.clone();
        c.run.scan_policy = policy;
        c.run.coverage = coverage;
        c.run.phase_refresh = refresh;
        c.constants.convention = phase_collapse::config::Convention::Codata;
        c.screen.tilt = [0.2, 0.0];
        let s = instantiate(&c, 77).unwrap();
        let run = ensemble_run(&s.apparatus, 100_000, 77, None).unwrap();
        w.runs.push((*s.apparatus.constants(), run.records));
    }
    let mut total = 0usize;
    let mut bad = 0usize;
    let mut repeated = 0usize;
    for (constants, records) in &w.runs {
        total += records.len();
        bad += records.iter().filter(|r| !r.witnesses_hold(constants)).count();
        repeated += records.windows(2).filter(|p| p[0].trial_id >= p[1].trial_id).count();
    }
    outcome(
        total > 0 && bad == 0 && repeated == 0,
        format!(
            "{total} contractions from {} runs: {bad} violate a criterion inequality, {repeated} trials with more than one contraction",
            w.runs.len()
        ),
    )
}

fn main() -> ExitCode {
    let mut w = Witnesses::default();
    let mut all = true;
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        println!(
            "criterion {n} [{name}]: {} ({:.1}s) {}",
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
        all &= o.pass;
    };
    report(1, "born rule, continuous", &mut || born_continuous(&mut w));
    report(2, "born rule, discrete", &mut || born_discrete(&mut w));
    report(3, "legacy algorithm", &mut legacy);
    report(4, "occupancy formulas", &mut appendix);
    report(5, "wigner chain", &mut wigner);
    report(6, "kinematics", &mut kinematics);
    report(7, "determinism", &mut determinism);
    let mut gathered = std::mem::take(&mut w);
    report(8, "criterion witnesses", &mut || witnesses(std::mem::take(&mut gathered)));
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
