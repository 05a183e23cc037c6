use permchain_netsim::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

fn poisson_arrivals(rate: f64, horizon: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exp = Exp::new(rate).unwrap();
    let mut t = 0.0;
    let mut out = Vec::new();
    loop {
        t += exp.sample(&mut rng);
        if t >= horizon {
            return out;
        }
        out.push(t);
    }
}

fn legacy(n: usize) -> SimConfig {
    SimConfig {
        n_nodes: n,
        delta_seconds: 2.0,
        client_rate: 10.0,
        duration: 600.0,
        mode: Mode::Legacy,
        rs_service_rate: 1e6,
        seed: 11,
        ..SimConfig::default()
    }
}

#[test]
fn legacy_meets_lower_bound_at_desk_scale() {
    let r = run_simulation(&legacy(32)).unwrap();
    let bound = predicted_amplification(10.0, 32.0, 2.0).unwrap();
    assert!(
        r.rs_rps_mean >= bound * 0.85,
        "{} < {}",
        r.rs_rps_mean,
        bound
    );
    assert!(r.consensus_converged);
    assert_eq!(r.rs_drops, 0);
}

#[test]
fn proposed_load_tracks_client_rate_independent_of_n() {
    let reports = run_sweep_with(
        &SimConfig {
            mode: Mode::Proposed,
            ..legacy(4)
        },
        "n_nodes",
        &[4.0, 8.0, 16.0, 32.0],
        false,
    )
    .unwrap();
    let base = reports[0].rs_rps_mean;
    for r in &reports {
        assert!((r.rs_rps_mean - 10.0).abs() <= 1.5, "{}", r.rs_rps_mean);
        assert!((r.amplification_measured - 1.0).abs() <= 0.15);
        assert!((r.rs_rps_mean - base).abs() / base < 0.05);
        assert_eq!(r.rs_requests_total, r.client_requests);
    }
}

#[test]
fn legacy_amplification_increases_with_n() {
    let reports = run_sweep(&legacy(4), "n_nodes", &[4.0, 8.0, 16.0, 32.0]).unwrap();
    for w in reports.windows(2) {
        assert!(w[1].amplification_measured > w[0].amplification_measured);
    }
}

#[test]
fn sweep_is_reproducible() {
    let a = run_sweep(&legacy(4), "delta_seconds", &[1.0, 2.0]).unwrap();
    let b = run_sweep(&legacy(4), "delta_seconds", &[1.0, 2.0]).unwrap();
    assert_eq!(a, b);
    assert_eq!(a[0].config.seed, cell_seed(11, 0));
}

#[test]
fn identical_config_gives_identical_json() {
    let cfg = SimConfig {
        duration: 200.0,
        ..legacy(8)
    };
    let a = run_simulation(&cfg).unwrap().to_json();
    let b = run_simulation(&cfg).unwrap().to_json();
    assert_eq!(a, b);
    let other = run_simulation(&SimConfig { seed: 12, ..cfg })
        .unwrap()
        .to_json();
    assert_ne!(a, other);
}

#[test]
fn overload_drops_fall_as_buffer_grows() {
    let base = SimConfig {
        rs_service_rate: 100.0,
        validation_waits_for_rs: false,
        ..legacy(32)
    };
    let reports = run_sweep_with(
        &base,
        "rs_buffer",
        &[0.0, 10.0, 100.0, 1000.0, 10000.0],
        false,
    )
    .unwrap();
    assert!(reports.iter().all(|r| r.rs_drops > 0));
    for w in reports.windows(2) {
        assert!(w[1].rs_drops <= w[0].rs_drops);
    }
}

#[test]
fn conservation_holds_under_overload() {
    for wait in [true, false] {
        let r = run_simulation(&SimConfig {
            rs_service_rate: 50.0,
            rs_buffer: 20,
            duration: 200.0,
            validation_waits_for_rs: wait,
            ..legacy(8)
        })
        .unwrap();
        assert_eq!(
            r.rs_requests_total,
            r.rs_served + r.rs_drops + r.rs_in_flight
        );
    }
}

#[test]
fn rejecting_on_failure_can_stall_consensus() {
    let r = run_simulation(&SimConfig {
        rs_service_rate: 20.0,
        rs_buffer: 5,
        rs_timeout: 1.0,
        duration: 200.0,
        settle_limit: 100.0,
        reject_on_rs_failure: true,
        ..legacy(8)
    })
    .unwrap();
    assert!(r.rs_drops > 0);
    // Nodes drop blocks they cannot check, so the chain barely grows.
    let healthy = run_simulation(&SimConfig {
        duration: 200.0,
        ..legacy(8)
    })
    .unwrap();
    assert!(
        r.final_height < healthy.final_height / 2,
        "{} vs {}",
        r.final_height,
        healthy.final_height
    );
}

#[test]
fn every_node_converges_across_seeds() {
    for seed in 0..5 {
        let r = run_simulation(&SimConfig {
            duration: 300.0,
            seed,
            ..legacy(16)
        })
        .unwrap();
        assert!(r.consensus_converged, "seed {seed}");
        assert!(r.max_gossip_delay <= 2.0);
    }
}

#[test]
fn double_rate_sheds_half() {
    // With no waiting room the loss is Erlang's rho / (1 + rho) instead.
    let arrivals = poisson_arrivals(200.0, 2000.0, 9);
    let acc = model_rs(&arrivals, 100.0, 0);
    assert!((acc.dropped as f64 / acc.arrived as f64 - 2.0 / 3.0).abs() < 0.01);
    for buffer in [1usize, 5, 50] {
        let arrivals = poisson_arrivals(200.0, 2000.0, buffer as u64);
        let acc = model_rs(&arrivals, 100.0, buffer);
        let frac = acc.dropped as f64 / acc.arrived as f64;
        let expected = overload_drop_fraction(200.0, 100.0);
        assert!(
            (frac - expected).abs() <= 0.1 * expected,
            "B={buffer}: {frac}"
        );
    }
}

#[test]
fn stable_large_buffer_drops_nothing() {
    let arrivals = poisson_arrivals(50.0, 1000.0, 3);
    assert_eq!(model_rs(&arrivals, 100.0, 10_000).dropped, 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn queue_conserves(seed in any::<u64>(), rate in 1.0f64..50.0, buffer in 0usize..20, timeout in 0.01f64..2.0) {
        let arrivals = poisson_arrivals(rate, 50.0, seed);
        let mut q = RsQueue::new(10.0, buffer, timeout);
        for &t in &arrivals {
            q.arrive(t);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let at = rng.gen_range(0.0..60.0);
        let a = q.accounting_at(at);
        prop_assert_eq!(a.arrived, a.served + a.dropped + a.in_flight);
        let all = q.accounting();
        prop_assert_eq!(all.arrived as usize, arrivals.len());
    }

    #[test]
    fn more_buffer_never_more_drops(seed in any::<u64>(), rate in 5.0f64..60.0, buffer in 0usize..30, timeout in 0.05f64..5.0) {
        let arrivals = poisson_arrivals(rate, 40.0, seed);
        let drops = |b| {
            let mut q = RsQueue::new(10.0, b, timeout);
            for &t in &arrivals {
                q.arrive(t);
            }
            q.accounting().dropped
        };
        prop_assert!(drops(buffer + 1) <= drops(buffer));
    }

    #[test]
    fn exact_and_float_models_agree(k in 0i64..1000, n in 1i64..50_000, d in 1i64..100) {
        let exact = LoadModelExact::new(k.into(), n.into(), d.into()).unwrap().rs_rate();
        let float = LoadModelF64::new(k as f64, n as f64, d as f64).unwrap().rs_rate();
        let exact_f = *exact.numer() as f64 / *exact.denom() as f64;
        prop_assert!((exact_f - float).abs() <= 1e-9 * float.max(1.0));
    }
}
