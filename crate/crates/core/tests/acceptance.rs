//! End-to-end acceptance checks. Runs as a plain binary (no libtest harness),
//! prints one PASS/FAIL line per check and exits nonzero if any fail.
//!
//! `cargo test -p studperm --test acceptance --release` takes a few minutes on
//! a single core; most of that is the Monte Carlo rejection grids.

mod support;

use std::collections::HashSet;
use std::io::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use studperm::classic::chi_square_upper_tail;
use studperm::data::{load_returns, portmanteau_pipeline, PortmanteauConfig};
use studperm::harness::{
    ks_distance, local_power_curve, rejection_grid, ExperimentSpec, PowerSettings, TestKind,
};
use studperm::multiple;
use studperm::perm::{
    permutation_distribution, Autocorrelation, PermutationDistribution, PermutationScheme,
    StudentizedAutocorrelation,
};
use studperm::process::{InnovationLaw, ProcessSpec};
use studperm::rng;
use studperm::studentizer::{variance_components, BandwidthRule, StudentizerConfig};
use support::{naive_components, normal_cdf, rel_diff};

const SEED: u64 = 7;
const Z95: f64 = 1.644_853_626_951_472;

type Outcome = (bool, String);
type Check = (&'static str, fn() -> Outcome);

fn grid_cell(process: ProcessSpec, n: usize, tests: Vec<TestKind>, r: usize, b: usize) -> Vec<f64> {
    let spec = ExperimentSpec {
        replications: r,
        permutations: b,
        seed: SEED,
        ..ExperimentSpec::new(process, vec![n], tests)
    };
    rejection_grid(&spec)
        .expect("experiment runs")
        .rows
        .iter()
        .map(|row| row.cells[0].frequency)
        .collect()
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn exactness_under_iid() -> Outcome {
    let sims = 20_000;
    let stat = Autocorrelation { lag: 1 };
    let (phi05, phi10) = (0..sims)
        .into_par_iter()
        .map(|s| {
            let mut r = rng::stream(SEED, &[1, s as u64]);
            let x: Vec<f64> = (0..6).map(|_| r.random_range(-1.0..1.0)).collect();
            let d = permutation_distribution(&x, &stat, &PermutationScheme::full_enumeration())
                .expect("enumeration");
            let a = d.randomized_test(0.05).expect("test").decision.phi();
            let b = d.randomized_test(0.10).expect("test").decision.phi();
            (a, b)
        })
        .reduce(|| (0.0, 0.0), |x, y| (x.0 + y.0, x.1 + y.1));
    let e05 = phi05 / sims as f64;
    let e10 = phi10 / sims as f64;
    (
        within(e05, 0.05, 0.005) && within(e10, 0.10, 0.007),
        format!("E[phi] = {e05:.4} (0.05 +- 0.005), {e10:.4} (0.10 +- 0.007)"),
    )
}

fn iid_studentized_size() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for n in [100, 500] {
        let f = grid_cell(
            ProcessSpec::MDependentProduct { m: 0, power: 1 },
            n,
            vec![TestKind::StudentizedPerm],
            2000,
            500,
        )[0];
        ok &= (0.035..=0.065).contains(&f);
        detail.push(format!("n={n}: {f:.4}"));
    }
    (ok, format!("{} in [0.035, 0.065]", detail.join(", ")))
}

fn unstudentized_overrejects() -> Outcome {
    let f = grid_cell(
        ProcessSpec::MDependentProduct { m: 1, power: 1 },
        1000,
        vec![TestKind::UnstudentizedPerm],
        2000,
        500,
    )[0];
    let asymptote = 1.0 - normal_cdf(Z95 / 3f64.sqrt());
    (
        within(f, 0.1749, 0.02) && within(f, asymptote, 0.02),
        format!("{f:.4} vs 0.1749 and asymptote {asymptote:.4} (+- 0.02)"),
    )
}

fn ar2_studentized_and_ljung_box() -> Outcome {
    let f = grid_cell(
        ProcessSpec::ar2(0.0, 0.5, InnovationLaw::Gaussian),
        500,
        vec![TestKind::StudentizedPerm, TestKind::LjungBox],
        2000,
        500,
    );
    (
        within(f[0], 0.0464, 0.015) && f[1] > 0.20,
        format!("studentized {:.4} (0.0464 +- 0.015), Ljung-Box {:.4} (> 0.20)", f[0], f[1]),
    )
}

fn ar2_autocovariance_test() -> Outcome {
    let f = grid_cell(
        ProcessSpec::ar2(0.0, 0.5, InnovationLaw::Gaussian),
        500,
        vec![TestKind::CovPerm],
        2000,
        500,
    )[0];
    (within(f, 0.0453, 0.015), format!("{f:.4} (0.0453 +- 0.015)"))
}

fn local_power() -> Outcome {
    let settings = PowerSettings {
        replications: 2000,
        permutations: 500,
        seed: SEED,
        ..PowerSettings::default()
    };
    let hs = [0.5, 1.0, 2.0];
    let curve = local_power_curve(&hs, 1000, &settings).expect("power curve");
    let mut ok = true;
    let mut detail = Vec::new();
    for (p, printed) in curve.iter().zip([0.1261, 0.2595, 0.6388]) {
        let oracle = 1.0 - normal_cdf(Z95 - p.h);
        ok &= within(oracle, printed, 1e-4) && within(p.frequency, oracle, 0.03);
        detail.push(format!("h={}: {:.4} vs {oracle:.4}", p.h, p.frequency));
    }
    (ok, format!("{} (+- 0.03)", detail.join(", ")))
}

/// All non-identity orderings of `0..n`, collected by repeated shuffling.
fn coupon_collected(n: usize, seed: u64) -> Vec<Vec<usize>> {
    let total: usize = (1..=n).product();
    let identity: Vec<usize> = (0..n).collect();
    let mut seen = HashSet::from([identity.clone()]);
    let mut out = Vec::with_capacity(total - 1);
    let mut r = rng::stream(seed, &[]);
    while seen.len() < total {
        let mut p = identity.clone();
        p.shuffle(&mut r);
        if seen.insert(p.clone()) {
            out.push(p);
        }
    }
    out
}

fn enumeration_equivalence() -> Outcome {
    let stat = Autocorrelation { lag: 1 };
    let mut worst: f64 = 0.0;
    for n in 3..=7 {
        let mut r = rng::stream(SEED, &[7, n as u64]);
        let x: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
        let full = permutation_distribution(&x, &stat, &PermutationScheme::full_enumeration())
            .expect("enumeration");
        let sampled = PermutationDistribution::from_permutations(&x, &stat, coupon_collected(n, n as u64))
            .expect("sampled");
        if full.len() != sampled.len() {
            return (false, format!("n={n}: sizes {} vs {}", full.len(), sampled.len()));
        }
        for &t in full.values().iter().chain([&full.observed()]) {
            let a = full.p_values(t);
            let b = sampled.p_values(t);
            worst = worst
                .max((a.greater - b.greater).abs())
                .max((a.less - b.less).abs())
                .max((a.two_sided - b.two_sided).abs())
                .max((full.cdf(t) - sampled.cdf(t)).abs());
        }
    }
    (worst <= 1e-12, format!("max p-value/CDF gap {worst:.1e} over n = 3..7"))
}

fn studentizer_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    for case in 0..100u64 {
        let mut r = rng::stream(SEED, &[8, case]);
        let n = r.random_range(25..=200);
        let k = r.random_range(1..=3);
        let law = [InnovationLaw::Gaussian, InnovationLaw::Uniform][case as usize % 2];
        let x = ProcessSpec::Arma {
            ar: vec![r.random_range(-0.5..0.5)],
            ma: vec![r.random_range(-0.5..0.5)],
            innovation: law,
            burn_in: 50,
        }
        .simulate(n, case)
        .expect("series");
        let cfg = StudentizerConfig::default().with_lag(k);
        let (b, _) = cfg.effective_bandwidth(n).expect("bandwidth");
        let fast = variance_components(x.values(), &cfg).expect("components");
        let slow = naive_components(x.values(), k, b);
        let expected = slow.gamma_sq_raw.max(cfg.epsilon);
        for (a, e) in [
            (fast.kappa_sq, slow.kappa_sq),
            (fast.tau_sq, slow.tau_sq),
            (fast.nu, slow.nu),
            (fast.gamma_sq, expected),
        ] {
            worst = worst.max(rel_diff(a, e));
        }
    }
    (worst <= 1e-10, format!("max relative gap {worst:.1e} over 100 series"))
}

fn permutation_distribution_normality() -> Outcome {
    let x = ProcessSpec::ar2(0.0, 0.5, InnovationLaw::Gaussian)
        .simulate(1000, SEED)
        .expect("series");
    let cfg = StudentizerConfig {
        bandwidth: BandwidthRule::CubeRoot,
        ..StudentizerConfig::default()
    };
    let d = permutation_distribution(
        x.values(),
        &StudentizedAutocorrelation(cfg),
        &PermutationScheme::monte_carlo(2000, SEED),
    )
    .expect("distribution");
    let ks = ks_distance(d.values(), normal_cdf);
    (ks < 0.06, format!("KS = {ks:.4} (< 0.06)"))
}

fn chi_square_tail() -> Outcome {
    let mut worst: f64 = 0.0;
    for df in 1..=20 {
        let oracle = ChiSquared::new(df as f64).expect("df");
        for i in 1..=500 {
            let q = i as f64 / 10.0;
            let ours = chi_square_upper_tail(q, df).expect("tail");
            worst = worst.max((ours - (1.0 - oracle.cdf(q))).abs());
        }
    }
    let s1 = chi_square_upper_tail(3.8415, 1).expect("tail");
    let s10 = chi_square_upper_tail(18.307, 10).expect("tail");
    (
        worst <= 1e-8 && within(s1, 0.05, 1e-3) && within(s10, 0.05, 1e-3),
        format!("max gap {worst:.1e}; spot {s1:.5}, {s10:.5}"),
    )
}

fn multiple_testing() -> Outcome {
    let mut r = rng::stream(SEED, &[11]);
    let mut violations = 0;
    for _ in 0..10_000 {
        let len = r.random_range(1..=12);
        let p: Vec<f64> = (0..len)
            .map(|_| {
                let u: f64 = r.random();
                if r.random_bool(0.5) {
                    u * 0.02
                } else {
                    u
                }
            })
            .collect();
        let bonf = multiple::bonferroni(&p, 0.05).expect("bonferroni");
        let holm = multiple::holm(&p, 0.05).expect("holm");
        let sidak = multiple::sidak(&p, 0.05).expect("sidak");
        if bonf
            .rejected
            .iter()
            .any(|l| !holm.rejected.contains(l) || !sidak.rejected.contains(l))
        {
            violations += 1;
        }
    }

    let reps = 5000;
    let cfg = PortmanteauConfig {
        lags: 5,
        permutations: 199,
        alpha: 0.05,
        ..PortmanteauConfig::default()
    };
    let rejections: usize = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let x = ProcessSpec::iid_gaussian()
                .simulate(200, rng::derive_seed(SEED, &[11, rep]))
                .expect("series");
            let c = PortmanteauConfig {
                seed: rng::derive_seed(SEED, &[12, rep]),
                ..cfg
            };
            portmanteau_pipeline(&x, &c).expect("pipeline").global_reject as usize
        })
        .sum();
    let fwer = rejections as f64 / reps as f64;
    (
        violations == 0 && fwer <= 0.06,
        format!("{violations} nesting violations in 10000 vectors; Bonferroni FWER {fwer:.4} (<= 0.06)"),
    )
}

fn pipeline_determinism_and_calibration() -> Outcome {
    let mut file = tempfile::NamedTempFile::new().expect("temp file");
    let shocks = ProcessSpec::iid_gaussian().simulate(400, SEED).expect("series");
    writeln!(file, "Date,Close").expect("write");
    let mut price = 50.0;
    for (i, s) in shocks.values().iter().enumerate() {
        price *= (0.01 * s).exp();
        writeln!(file, "d{i:04},{price}").expect("write");
    }
    file.flush().expect("flush");
    let cfg = PortmanteauConfig {
        permutations: 399,
        seed: SEED,
        ..PortmanteauConfig::default()
    };
    let report = || {
        let r = load_returns(file.path(), "Date", "Close").expect("returns");
        portmanteau_pipeline(&r.returns, &cfg).expect("pipeline").to_json()
    };
    let identical = report() == report();

    let runs = 1000u64;
    let rejections: usize = (0..runs)
        .into_par_iter()
        .map(|run| {
            let x = ProcessSpec::iid_gaussian()
                .simulate(250, rng::derive_seed(SEED, &[13, run]))
                .expect("series");
            let c = PortmanteauConfig {
                seed: rng::derive_seed(SEED, &[14, run]),
                ..cfg
            };
            portmanteau_pipeline(&x, &c).expect("pipeline").global_reject as usize
        })
        .sum();
    let rate = rejections as f64 / runs as f64;
    (
        identical && within(rate, 0.05, 0.02),
        format!("byte-identical: {identical}; global rejection {rate:.4} (0.05 +- 0.02)"),
    )
}

fn main() {
    let checks: [Check; 12] = [
        ("exact level under iid (n=6, full enumeration)", exactness_under_iid),
        ("studentized size, iid, n in {100, 500}", iid_studentized_size),
        ("unstudentized over-rejection, m=1, n=1000", unstudentized_overrejects),
        ("AR(2) studentized size and Ljung-Box failure, n=500", ar2_studentized_and_ljung_box),
        ("AR(2) autocovariance test size, n=500", ar2_autocovariance_test),
        ("local power at n=1000", local_power),
        ("sampled scheme covering all orderings equals enumeration", enumeration_equivalence),
        ("studentizer equals naive term-by-term sums", studentizer_oracle),
        ("permutation distribution close to N(0,1)", permutation_distribution_normality),
        ("chi-square upper tail", chi_square_tail),
        ("multiple-testing nesting and FWER", multiple_testing),
        ("pipeline determinism and null calibration", pipeline_determinism_and_calibration),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = check();
        if !ok {
            failed += 1;
        }
        println!(
            "[{}] {:>2}. {name}: {detail} ({:.1}s)",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
