//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.
//!
//!     cargo test -p voa-core --test acceptance

use std::collections::HashSet;
use std::time::Instant;

use chrono::{Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voa_core::analytics::{self, bot_tables, Impression, Snapshot};
use voa_core::model::{self, ModelParams};
use voa_core::optimizer;
use voa_core::simulator::{self, AccessSchedule, SimConfig, SweepSource};
use voa_core::trace_io;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn params(lambda: f64, mu: f64, k: f64) -> ModelParams {
    ModelParams::new(lambda, mu, k, 0.0).unwrap()
}

fn optimal_rate() -> Check {
    let k2 = optimizer::optimal_access_rate(4.487, 2, 1.0).map_err(err)?.mu_star;
    let k20 = optimizer::optimal_access_rate(4.487, 20, 1.0).map_err(err)?.mu_star;
    ensure((k2 - 1.1663).abs() <= 5e-4, format!("K=2 gives {k2}"))?;
    ensure((k20 - 0.688).abs() <= 5e-4, format!("K=20 gives {k20}"))?;
    Ok(format!("mu*(K=2)={k2:.6}, mu*(K=20)={k20:.6}"))
}

fn closed_form_vs_monte_carlo() -> Check {
    let p = params(4.487, 1.0, 10.0);
    let model = model::voa_exponential(&p).map_err(err)?.mean;
    let (rounds, per_round) = (20, 10_000);
    let stats =
        simulator::simulate_synthetic(&p, per_round, rounds, 2024, AccessSchedule::ExponentialClock).map_err(err)?;
    let se = stats.standard_error();
    let z = (stats.mean - model) / se;
    ensure((model - 3.8869).abs() < 1e-4, format!("model value {model}"))?;
    ensure(
        z.abs() <= 3.0,
        format!("sim {} vs model {model}: {z:.2} SE", stats.mean),
    )?;
    Ok(format!(
        "{} accesses, sim {:.4} +/- {:.4}, model {model:.4}, z={z:.2}",
        rounds * per_round,
        stats.mean,
        se
    ))
}

fn trace_driven_sweep() -> Check {
    let lambda = 4.487;
    let start = Utc.with_ymd_and_hms(2018, 9, 1, 0, 0, 0).unwrap();
    let posts = simulator::poisson_trace(lambda, 336.0, 336, start).map_err(err)?;
    let inverse_mu: Vec<f64> = (1..=24).map(f64::from).collect();
    let config = SimConfig {
        k: 10,
        sample_interval_hours: 1.0,
        period_hours: 336.0,
        rounds: 30,
        seed: 7,
        access_schedule: AccessSchedule::ExponentialClock,
    };
    let curve = simulator::sweep_inverse_mu(
        &SweepSource::Trace {
            posts: &posts,
            config,
            lambda,
        },
        &inverse_mu,
    )
    .map_err(err)?;
    let mut worst = (0.0f64, 0.0);
    for pt in &curve.points {
        let rel = (pt.mean_voa - pt.model_voa).abs() / pt.model_voa;
        if rel > worst.0 {
            worst = (rel, pt.abscissa);
        }
    }
    let at24 = curve.points.last().unwrap().model_voa;

    let rr_config = SimConfig {
        access_schedule: AccessSchedule::RandomReference,
        ..config
    };
    let rr = simulator::sweep_inverse_mu(
        &SweepSource::Trace {
            posts: &posts,
            config: rr_config,
            lambda,
        },
        &inverse_mu,
    )
    .map_err(err)?;
    let rr_worst = rr
        .points
        .iter()
        .map(|p| (p.mean_voa - p.model_voa) / p.model_voa)
        .fold(0.0f64, |a, r| if r.abs() > a.abs() { r } else { a });
    println!(
        "    info: {} posts; random-reference sampling deviates up to {:+.1}% from the model on the same trace",
        posts.len(),
        100.0 * rr_worst
    );

    ensure((at24 - 9.508).abs() <= 1e-3, format!("model at 1/mu=24 is {at24}"))?;
    ensure(
        worst.0 <= 0.05,
        format!("1/mu={} deviates {:.2}% from the model", worst.1, 100.0 * worst.0),
    )?;
    Ok(format!(
        "24 points, worst deviation {:.2}% at 1/mu={}, model(24)={at24:.4}",
        100.0 * worst.0,
        worst.1
    ))
}

fn oracle_equivalence() -> Check {
    let mut worst_sum = 0.0f64;
    let mut worst_quad = 0.0f64;
    for &lambda in &[0.1, 1.0, 4.487] {
        for &mu in &[0.04, 0.5, 1.0] {
            for &k in &[1.0, 5.0, 10.0, 50.0] {
                let p = params(lambda, mu, k);
                let closed = model::voa_exponential(&p).map_err(err)?.mean;
                let quad = model::voa_quadrature_oracle(&p).map_err(err)?;
                worst_quad = worst_quad.max((closed - quad).abs());
            }
            for k in (1..=1000).step_by(37).chain([1000]) {
                let p = params(lambda, mu, f64::from(k));
                let closed = model::voa_exponential(&p).map_err(err)?.mean;
                let sum = model::voa_summation_oracle(&p).map_err(err)?;
                worst_sum = worst_sum.max((closed - sum).abs() / closed);
            }
        }
    }
    ensure(worst_sum <= 1e-9, format!("summation rel error {worst_sum:e}"))?;
    ensure(worst_quad <= 1e-6, format!("quadrature abs error {worst_quad:e}"))?;
    Ok(format!(
        "summation rel {worst_sum:.1e}, quadrature abs {worst_quad:.1e}"
    ))
}

fn overlap_fixtures() -> Check {
    let mut min_cov = f64::INFINITY;
    let mut h_r1 = f64::NAN;
    for (name, table) in &bot_tables::HIGH_VS_REGULAR {
        let c = analytics::coverage_fraction(table).map_err(err)?;
        if *name == "R1" {
            h_r1 = c;
        }
        min_cov = min_cov.min(c);
    }
    let pairwise: Vec<f64> = bot_tables::REGULAR_PAIRS
        .iter()
        .map(|(_, _, t)| analytics::pairwise_overlap_of(t))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let lo = pairwise.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = pairwise.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ensure(min_cov >= 0.80, format!("lowest coverage {min_cov}"))?;
    ensure((h_r1 - 0.9265).abs() <= 1e-4, format!("H/R1 coverage {h_r1}"))?;
    ensure(
        (lo - 0.74).abs() <= 0.01 && (hi - 0.89).abs() <= 0.01,
        format!("pairwise range [{lo:.4}, {hi:.4}]"),
    )?;
    Ok(format!(
        "min coverage {min_cov:.4}, H/R1 {h_r1:.4}, pairwise [{lo:.4}, {hi:.4}]"
    ))
}

fn optimizer_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_grad = 0.0f64;
    let mut worst_rel = 0.0f64;
    for _ in 0..50 {
        let lambda = rng.random_range(0.1..10.0);
        let k: u32 = rng.random_range(2..=50);
        let cost = rng.random_range(0.05..f64::from(k) * 0.9);
        let r = optimizer::optimal_access_rate(lambda, k, cost).map_err(err)?;
        ensure(!r.clamped, "unexpected clamp")?;
        let grad = optimizer::utility_gradient(&ModelParams {
            lambda,
            mu: r.mu_star,
            k: f64::from(k),
            cost,
        })
        .map_err(err)?;
        worst_grad = worst_grad.max(grad.abs());
        let numeric = optimizer::optimal_access_rate_numeric(lambda, k, cost, 100.0 * lambda).map_err(err)?;
        worst_rel = worst_rel.max((numeric - r.mu_star).abs() / r.mu_star);
    }
    let base = optimizer::optimal_access_rate(1.0, 7, 2.0).map_err(err)?.mu_star;
    let mut worst_scale = 0.0f64;
    for s in [0.5, 2.0, 3.0, 4.487, 10.0, 1000.0] {
        let scaled = optimizer::optimal_access_rate(s, 7, 2.0).map_err(err)?.mu_star;
        worst_scale = worst_scale.max((scaled - s * base).abs() / (s * base));
    }
    ensure(worst_grad <= 1e-9, format!("gradient at mu* {worst_grad:e}"))?;
    ensure(worst_rel <= 1e-4, format!("numeric vs closed {worst_rel:e}"))?;
    ensure(
        worst_scale <= 4.0 * f64::EPSILON,
        format!("lambda scaling {worst_scale:e}"),
    )?;
    Ok(format!(
        "|grad| {worst_grad:.1e}, numeric rel {worst_rel:.1e}, scaling rel {worst_scale:.1e}"
    ))
}

fn random_snapshots(rng: &mut ChaCha8Rng, user: &str) -> Vec<Snapshot> {
    let t0 = Utc.with_ymd_and_hms(2018, 9, 1, 0, 0, 0).unwrap();
    (0..rng.random_range(1..10))
        .map(|s| {
            let taken_at = t0 + Duration::hours(100 + s);
            let mut ids: Vec<u32> = (0..30).collect();
            let n = rng.random_range(1..12);
            for i in 0..n {
                let j = rng.random_range(i..ids.len());
                ids.swap(i, j);
            }
            let impressions = ids[..n]
                .iter()
                .enumerate()
                .map(|(pos, &id)| Impression {
                    post_id: format!("p{id}"),
                    publisher: "pub".into(),
                    published_at: t0 + Duration::minutes(i64::from(id) * 13),
                    impressed_at: taken_at,
                    position: pos as u32 + 1,
                })
                .collect();
            Snapshot::new(user, taken_at, impressions).unwrap().0
        })
        .collect()
}

fn property_suites() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let cases = 300;
    for _ in 0..cases {
        let snaps = random_snapshots(&mut rng, "u");
        let full = analytics::voa_from_snapshots(&snaps, None).map_err(err)?;
        let union: HashSet<&str> = snaps.iter().flat_map(|s| s.post_ids(None)).collect();
        ensure(full.per_snapshot.iter().sum::<usize>() == union.len(), "conservation")?;

        let mut prev = 0.0;
        for k in 1..=12 {
            let m = analytics::voa_from_snapshots(&snaps, Some(k)).map_err(err)?.mean;
            ensure(m + 1e-12 >= prev && m <= full.mean + 1e-12, "truncation monotonicity")?;
            prev = m;
        }

        for s in &snaps {
            let once = analytics::reorder_fifo(s);
            ensure(analytics::reorder_fifo(&once) == once, "reorder_fifo idempotence")?;
        }

        let sets: Vec<HashSet<u32>> = (0..rng.random_range(1..6))
            .map(|_| (0..rng.random_range(1..20)).map(|_| rng.random_range(0..40)).collect())
            .collect();
        let ecdf = analytics::viewer_ecdf(&sets).map_err(err)?;
        ensure(
            ecdf.points.windows(2).all(|w| w[0].1 < w[1].1) && ecdf.points.last().unwrap().1 == 1.0,
            "ECDF monotonicity",
        )?;

        let universe: HashSet<u32> = sets.iter().flatten().copied().collect();
        let t = analytics::overlap_table(&sets[0], sets.last().unwrap(), &universe).map_err(err)?;
        ensure(
            t.both + t.only_x + t.only_y + t.neither == t.universe_size,
            "cell-sum identity",
        )?;
    }

    let start = Utc.with_ymd_and_hms(2018, 9, 1, 0, 0, 0).unwrap();
    let posts = simulator::poisson_trace(4.487, 48.0, 3, start).map_err(err)?;
    let config = SimConfig {
        k: 10,
        sample_interval_hours: 1.0,
        period_hours: 48.0,
        rounds: 8,
        seed: 99,
        access_schedule: AccessSchedule::RandomReference,
    };
    let render = || -> Result<Vec<u8>, String> {
        let source = SweepSource::Trace {
            posts: &posts,
            config,
            lambda: 4.487,
        };
        let curve = simulator::sweep_inverse_mu(&source, &[1.0, 2.0, 4.0, 8.0]).map_err(err)?;
        let mut out = Vec::new();
        trace_io::write_curve_csv(&mut out, &curve).map_err(err)?;
        Ok(out)
    };
    ensure(render()? == render()?, "re-runs differ")?;
    Ok(format!("{cases} random cases per property, re-runs byte-identical"))
}

fn variants() -> Check {
    let mut worst = 0.0f64;
    for &alpha in &[0.5, 1.0, 3.0, 10.0, 25.0, 50.0] {
        for &(lambda, mu) in &[(4.487, 1.0), (1.0, 0.04), (0.1, 2.0)] {
            let closed = model::voa_poisson_k(lambda, mu, alpha).map_err(err)?;
            let mut pmf = (-alpha).exp();
            let mut mixture = 0.0;
            for k in 1..=400u32 {
                pmf *= alpha / f64::from(k);
                mixture += pmf * model::voa_summation_oracle(&params(lambda, mu, f64::from(k))).map_err(err)?;
            }
            worst = worst.max((closed - mixture).abs() / closed);
        }
    }
    let det = model::voa_deterministic(1.0, 1.0, 2).map_err(err)?;
    let det_err = (det - (2.0 - 3.0 * (-1.0f64).exp())).abs();
    ensure(worst <= 1e-9, format!("poisson-K mixture rel {worst:e}"))?;
    ensure(det_err <= 1e-12, format!("deterministic error {det_err:e}"))?;
    Ok(format!("mixture rel {worst:.1e}, deterministic abs {det_err:.1e}"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("optimal access rate", optimal_rate),
        ("closed form vs monte carlo", closed_form_vs_monte_carlo),
        ("trace-driven sweep", trace_driven_sweep),
        ("oracle equivalence", oracle_equivalence),
        ("overlap fixtures", overlap_fixtures),
        ("optimizer properties", optimizer_properties),
        ("property suites", property_suites),
        ("poisson-K and deterministic variants", variants),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name} ({detail}) [{secs:.2}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({why}) [{secs:.2}s]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
