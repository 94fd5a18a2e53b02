//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line. Run with `cargo test -p varswap-cli --test acceptance -- --nocapture`.

use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use varswap::closed_form::{
    bs_gap, dufresne_moment, explosion_time, gamma_fn, kummer_m, laplace_transform_32,
    q_transform, theorem3_constant,
};
use varswap::experiments::{
    convergence_study, integrated_variance_samples, q_rescue_experiment, rate_fit,
    tail_diagnostic, TailVerdict,
};
use varswap::models::{
    classify_finiteness, BlackScholes, Finiteness, ModelSpec, ThreeHalves, VolOfVol,
};
use varswap::payoffs::mc_estimate;
use varswap::sde_sim::{path_rng, sample_cir_exact, Scheme};

fn criterion<F: FnOnce()>(number: u32, name: &str, f: F) {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(()) => println!("ACCEPTANCE {number} ({name}): PASS"),
        Err(e) => {
            println!("ACCEPTANCE {number} ({name}): FAIL");
            resume_unwind(e);
        }
    }
}

fn three_halves() -> ThreeHalves {
    ThreeHalves { s0: 100.0, v0: 0.04, p: 0.1, q: -1.0, epsilon: 1.0 }
}

fn vol_of_vol_example() -> VolOfVol {
    // kappa = 0.5, eta = 1, rho = 1: T* = 2 ln 2; the w-level parameters
    // are large enough that the power tail expresses itself at 1e5 paths.
    VolOfVol { s0: 100.0, v0: 0.04, w0: 1.0, kappa: 0.5, theta: 1.0, eta: 1.0, rho: 1.0, corr_bw: 0.0
        }
}

#[test]
fn criterion_01_black_scholes_gap_reproduction() {
    criterion(1, "Black-Scholes gap vs sigma^4 T^2/(4n), rate slope", || {
        let start = Instant::now();
        let spec = ModelSpec::BlackScholes(BlackScholes { s0: 100.0, sigma: 0.2 });
        let table = convergence_study(
            &spec,
            1.0,
            &[4, 16, 64, 256],
            1,
            200_000,
            11,
            Scheme::ExactWhereAvailable,
            false,
        )
        .unwrap();
        for row in &table.rows {
            let oracle = bs_gap(0.2, 1.0, row.n as u32);
            assert!(
                (row.gap - oracle).abs() <= 3.0 * row.gap_se,
                "n {}: paired gap {} vs oracle {oracle} (se {})",
                row.n,
                row.gap,
                row.gap_se
            );
        }
        let fit = rate_fit(&table).unwrap();
        assert!(
            (-1.15..=-0.85).contains(&fit.slope),
            "slope {} outside [-1.15, -0.85]",
            fit.slope
        );
        let elapsed = start.elapsed();
        assert!(elapsed.as_secs() < 60, "took {elapsed:?}, budget 60 s");
    });
}

#[test]
fn criterion_02_three_halves_laplace_transform() {
    criterion(2, "3/2 Laplace transform vs Monte Carlo", || {
        let m = three_halves();
        assert!((laplace_transform_32(0.0, &m, 1.0).unwrap() - 1.0).abs() <= 1e-12);
        let iv = integrated_variance_samples(
            &ModelSpec::ThreeHalves(m),
            1.0,
            512,
            200_000,
            7,
            Scheme::ExactWhereAvailable,
        )
        .unwrap();
        for lam in [0.5, 1.0, 2.0] {
            let closed = laplace_transform_32(lam, &m, 1.0).unwrap();
            let samples: Vec<f64> = iv.iter().map(|&x| (-lam * x).exp()).collect();
            let est = mc_estimate(&samples, "mc").unwrap();
            assert!(
                (est.mean - closed).abs() <= 3.0 * est.std_error,
                "lambda {lam}: closed {closed} vs mc {} (se {})",
                est.mean,
                est.std_error
            );
        }
    });
}

#[test]
fn criterion_03_dufresne_moments_cross_check() {
    criterion(3, "square-root process moments vs exact sampler", || {
        let cir = three_halves().reciprocal_cir();
        assert_eq!(cir.vbar(), 4.0);
        let t = 1.0;
        let n = 200_000;
        let mut v1 = Vec::with_capacity(n);
        let mut v2 = Vec::with_capacity(n);
        for i in 0..n {
            let mut rng = path_rng(99, i as u64);
            let r = sample_cir_exact(&cir, t, &mut rng);
            v1.push(1.0 / r);
            v2.push(1.0 / (r * r));
        }
        for (ord, samples) in [(1.0, &v1), (2.0, &v2)] {
            let closed = dufresne_moment(ord, &cir, t).unwrap().finite().unwrap();
            let est = mc_estimate(samples, "mc").unwrap();
            assert!(
                (est.mean - closed).abs() <= 3.0 * est.std_error,
                "order {ord}: closed {closed} vs mc {} (se {})",
                est.mean,
                est.std_error
            );
        }
        // The finite/infinite verdict flips exactly at the threshold.
        assert!(dufresne_moment(4.0, &cir, t).unwrap().is_infinite());
        assert!(dufresne_moment(4.0 - 1e-9, &cir, t).unwrap().finite().is_some());
        assert!(dufresne_moment(3.0, &cir, t).unwrap().finite().is_some());
    });
}

#[test]
fn criterion_04_explosion_time_values_and_continuity() {
    criterion(4, "explosion time branches", || {
        let r = explosion_time(0.5, 1.0, 1.0).unwrap();
        assert!(
            (r.tstar - 2.0 * std::f64::consts::LN_2).abs() <= 1e-10,
            "tstar {}",
            r.tstar
        );
        // Continuity across delta = 0 at fixed chi.
        for sign in [1.0f64, -1.0] {
            let delta = sign * 1e-8;
            let chi = (2.0 + delta).sqrt();
            let kappa = 2.0 - chi; // eta = 1, rho = 1
            let t = explosion_time(kappa, 1.0, 1.0).unwrap().tstar;
            assert!(
                (t - 2.0 / chi).abs() <= 1e-6,
                "delta {delta}: {t} vs {}",
                2.0 / chi
            );
        }
        let never = explosion_time(1.0, 0.1, 0.0).unwrap();
        assert!(never.tstar.is_infinite());
    });
}

#[test]
fn criterion_05_example11_tail_property() {
    criterion(5, "integrated-variance tails across the explosion time", || {
        let spec = ModelSpec::VolOfVol(vol_of_vol_example());
        let tstar = explosion_time(0.5, 1.0, 1.0).unwrap().tstar;
        assert!((tstar - 1.386).abs() < 1e-3);

        // Beyond T*: second moment diverges, the tail index drops below 2.
        let heavy = integrated_variance_samples(
            &spec,
            2.0,
            512,
            100_000,
            31,
            Scheme::ExactWhereAvailable,
        )
        .unwrap();
        let heavy_report = tail_diagnostic(&heavy, 0.05).unwrap();
        assert_eq!(
            heavy_report.verdict,
            TailVerdict::SecondMomentLikelyInfinite,
            "T = 2.0: index {} ci ({}, {})",
            heavy_report.index,
            heavy_report.ci_low,
            heavy_report.ci_high
        );

        // Well inside T*: moments up to ~4.5 exist, the tail looks light.
        let light = integrated_variance_samples(
            &spec,
            0.5,
            128,
            100_000,
            31,
            Scheme::ExactWhereAvailable,
        )
        .unwrap();
        let light_report = tail_diagnostic(&light, 0.05).unwrap();
        assert_eq!(
            light_report.verdict,
            TailVerdict::MeanLikelyFinite,
            "T = 0.5: index {} ci ({}, {})",
            light_report.index,
            light_report.ci_low,
            light_report.ci_high
        );

        // Calibration control: exact Pareto(1.5) recovers its index.
        let mut rng = path_rng(13, 0);
        let pareto: Vec<f64> =
            (0..100_000).map(|_| rng.random::<f64>().powf(-1.0 / 1.5)).collect();
        let control = tail_diagnostic(&pareto, 0.05).unwrap();
        assert!(
            (control.index - 1.5).abs() <= 0.1,
            "Pareto control index {}",
            control.index
        );
        assert_eq!(control.verdict, TailVerdict::SecondMomentLikelyInfinite);
    });
}

#[test]
fn criterion_06_measure_change_rescue() {
    criterion(6, "measure change kills the explosion and restores convergence", || {
        let model = VolOfVol { rho: 0.99, ..vol_of_vol_example() };
        let report = q_rescue_experiment(
            &model,
            2.0,
            &[4, 16, 64],
            8,
            100_000,
            17,
            Scheme::ExactWhereAvailable,
        )
        .unwrap();
        // Transformed parameters no longer explode.
        let after = explosion_time(report.transform.kappa_q, model.eta, model.rho).unwrap();
        assert!(after.tstar.is_infinite(), "tstar after = {}", after.tstar);
        assert!(report.tstar_after.is_infinite());

        // Post-transform gaps decrease across n: strictly on the
        // conditional column, within one paired standard error on the raw
        // paired column.
        let rows = &report.after.rows;
        for pair in rows.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            assert!(
                b.cond_gap.unwrap() < a.cond_gap.unwrap(),
                "conditional gaps not decreasing: {:?}",
                rows.iter().map(|r| r.cond_gap).collect::<Vec<_>>()
            );
            assert!(
                b.gap < a.gap || (b.gap - a.gap) <= a.gap_se.max(b.gap_se),
                "paired gap rose beyond noise: {} (se {}) -> {} (se {})",
                a.gap,
                a.gap_se,
                b.gap,
                b.gap_se
            );
        }
    });
}

#[test]
fn criterion_07_uniform_bound_dominates_measured_gaps() {
    criterion(7, "uniform-in-n bound C = 0.0084 dominates all gaps", || {
        // Exact Black-Scholes inputs: A_T = sigma^2 T/2 = 0.02.
        let c = theorem3_constant(0.0004, 0.04, 0.0).unwrap();
        assert!((c - 0.0084).abs() <= 1e-15, "C = {c}");

        let spec = ModelSpec::BlackScholes(BlackScholes { s0: 100.0, sigma: 0.2 });
        let table = convergence_study(
            &spec,
            1.0,
            &[1, 4, 16, 64, 256],
            1,
            50_000,
            23,
            Scheme::ExactWhereAvailable,
            false,
        )
        .unwrap();
        for row in &table.rows {
            assert!(
                row.gap.abs() <= c,
                "n {}: measured |gap| {} exceeds C {c}",
                row.n,
                row.gap.abs()
            );
            assert!(row.cond_gap.unwrap().abs() <= c);
            assert!(bs_gap(0.2, 1.0, row.n as u32) <= c);
        }
    });
}

#[test]
fn criterion_08_special_function_identities() {
    criterion(8, "gamma recurrence and Kummer identities", || {
        let grid = [
            -29.3, -10.7, -3.3, -0.7, 0.1, 0.5, 1.5, 3.7, 10.2, 25.0, 50.5, 100.3, 140.7, 169.5,
        ];
        for &x in &grid {
            let lhs = gamma_fn(x + 1.0).unwrap();
            let rhs = x * gamma_fn(x).unwrap();
            assert!(
                ((lhs - rhs) / lhs).abs() < 1e-12,
                "gamma recurrence residual at x = {x}"
            );
        }
        let vals = [0.5, 1.0, 2.5];
        for &a in &vals {
            for iz in -20..=20 {
                let z = iz as f64;
                // M(a, a, z) = e^z.
                let m = kummer_m(a, a, z).unwrap();
                assert!(
                    ((m - z.exp()) / z.exp()).abs() < 1e-9,
                    "M({a},{a},{z}) = {m} vs {}",
                    z.exp()
                );
            }
        }
        for &a in &vals {
            for &b in &vals {
                for iz in -20..=20 {
                    let z = iz as f64;
                    let lhs = kummer_m(a, b, z).unwrap();
                    let rhs = z.exp() * kummer_m(b - a, b, -z).unwrap();
                    let denom = lhs.abs().max(f64::MIN_POSITIVE);
                    assert!(
                        ((lhs - rhs) / denom).abs() < 1e-9,
                        "transformation residual at a={a} b={b} z={z}"
                    );
                }
            }
        }
    });
}

#[test]
fn criterion_09_byte_identical_csv_across_thread_counts() {
    criterion(9, "converge reruns byte-identically at 1 and 8 threads", || {
        let dir = tempfile::tempdir().unwrap();
        let config_path = dir.path().join("run.toml");
        std::fs::write(
            &config_path,
            r#"
[model]
family = "vol_of_vol"
s0 = 100.0
v0 = 0.04
w0 = 0.09
kappa = 1.0
theta = 0.04
eta = 0.3
rho = -0.5

[grid]
horizon = 1.0
n_list = [4, 16, 64]
substeps = 4

[mc]
paths = 20000
seed = 42
scheme = "exact"
"#,
        )
        .unwrap();
        // Identical resolved config across runs (same out dir); files are
        // captured between runs because each run overwrites them.
        let out = dir.path().join("out");
        let run = |threads: &str| {
            let status = Command::new(env!("CARGO_BIN_EXE_varswap"))
                .arg("converge")
                .arg(&config_path)
                .arg("--out")
                .arg(&out)
                .env("RAYON_NUM_THREADS", threads)
                .output()
                .unwrap();
            assert!(
                status.status.success(),
                "varswap converge failed: {}",
                String::from_utf8_lossy(&status.stderr)
            );
            (
                std::fs::read(out.join("converge.csv")).unwrap(),
                std::fs::read(out.join("converge.json")).unwrap(),
            )
        };
        let (csv_a, json_a) = run("1");
        let (csv_b, json_b) = run("8");
        let (csv_c, json_c) = run("8");
        assert_eq!(csv_a, csv_b, "CSV differs between 1 and 8 worker threads");
        assert_eq!(csv_b, csv_c, "CSV differs between reruns");
        assert_eq!(json_a, json_b);
        assert_eq!(json_b, json_c);
    });
}

#[test]
fn criterion_10_classifier_agrees_with_explosion_time() {
    criterion(10, "finiteness classifier vs explosion time on random grid", || {
        let mut rng = path_rng(2024, 0);
        let mut checked = 0;
        while checked < 20 {
            let kappa = 0.05 + 3.95 * rng.random::<f64>();
            let eta = 0.05 + 2.95 * rng.random::<f64>();
            let rho = -1.0 + 2.0 * rng.random::<f64>();
            let horizon = 0.05 + 4.95 * rng.random::<f64>();
            let tstar = explosion_time(kappa, eta, rho).unwrap().tstar;
            if (horizon - tstar).abs() < 1e-9 {
                continue; // the boundary itself is classified Unknown
            }
            let spec = ModelSpec::VolOfVol(VolOfVol {
                s0: 100.0,
                v0: 0.04,
                w0: 0.04,
                kappa,
                theta: 0.04,
                eta,
                rho, corr_bw: 0.0,
        })
            .validate()
            .unwrap();
            let verdict = classify_finiteness(&spec, horizon, 16).unwrap();
            let want =
                if horizon > tstar { Finiteness::Infinite } else { Finiteness::Finite };
            assert_eq!(
                verdict.ep_discrete, want,
                "kappa {kappa} eta {eta} rho {rho} horizon {horizon} tstar {tstar}"
            );
            assert_eq!(verdict.tstar.unwrap(), tstar);
            checked += 1;
        }

        // The measure change stays consistent with the classifier too.
        let q = q_transform(0.5, 1.0, 1.0, 0.99, None).unwrap();
        assert!(explosion_time(q.kappa_q, 1.0, 0.99).unwrap().tstar.is_infinite());
    });
}
