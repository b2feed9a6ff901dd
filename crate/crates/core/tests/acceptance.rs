//! Acceptance suite: one check per criterion, each printing a PASS/FAIL line.
//!
//! Runs without the libtest harness so every line is printed in order; the
//! process exits non-zero when any criterion fails.

use std::collections::{BTreeSet, HashMap};
use std::panic::catch_unwind;
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pic_core::amplification::{amplify_closed_form, invert_amplify, max_local_epsilon, min_population, InversionStatus};
use pic_core::envelope::{shuffle, KeyEntropy, KeyRng, PublicKey};
use pic_core::geometry::sample_uniform;
use pic_core::harness::{
    run_crowdsourcing, run_rates, run_single_report, run_social, ExperimentConfig, MetricRow, Scenario,
};
use pic_core::protocol::{run_round, server_setup, user_prepare, user_retrieve, RoundOptions, UserState};
use pic_core::randomizers::{
    minkowski_debias, minkowski_density, minkowski_mse_analytic, minkowski_sample, MinkowskiParams, RadiusMode,
};
use pic_core::tasks::{
    cosine_utility, max_matching_within_radius, min_weight_full_matching, shapley_exact, shapley_monte_carlo,
    BipartiteInstance, IdentityTask, TaskId, TaskOutput,
};
use pic_core::{DomainSpec, LocalRandomizer, Mechanism, Vector};

static FAILURES: AtomicUsize = AtomicUsize::new(0);

fn verdict(criterion: u32, title: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("criterion {criterion:>2} [{tag}] {title}: {detail}");
    if !pass {
        FAILURES.fetch_add(1, Ordering::Relaxed);
    }
}

fn config(scenario: Scenario, pairs: &[(&str, &str)]) -> ExperimentConfig {
    let p: Vec<(String, String)> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    ExperimentConfig::from_pairs(scenario, &p).unwrap()
}

fn lookup(rows: &[MetricRow], mechanism: &str, eps: f64, metric: &str) -> f64 {
    rows.iter()
        .find(|r| r.mechanism == mechanism && r.eps == eps && r.metric == metric)
        .unwrap_or_else(|| panic!("missing {mechanism} eps={eps} {metric}"))
        .value
}

fn criterion_01_randomizer_table() {
    let start = std::time::Instant::now();
    let cfg = config(
        Scenario::SingleReport,
        &[("mechanism", "minkowski,laplace,planar_laplace"), ("eps", "1,2,5,10"), ("trials", "10000")],
    );
    let rows = run_single_report(&cfg).unwrap();
    let targets = [
        ("laplace", 1.0, 6.56, 0.05),
        ("laplace", 10.0, 0.64, 0.05),
        ("planar_laplace", 1.0, 5.63, 0.05),
        ("minkowski", 1.0, 4.50, 0.08),
        ("minkowski", 2.0, 1.78, 0.08),
        ("minkowski", 5.0, 0.39, 0.08),
        ("minkowski", 10.0, 0.074, 0.08),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (mech, eps, want, tol) in targets {
        let got = lookup(&rows, mech, eps, "mean_l2_error");
        let rel = (got - want).abs() / want;
        pass &= rel <= tol;
        detail.push(format!("{mech}@{eps}={got:.4} ({:+.1}%)", 100.0 * (got - want) / want));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 60.0;
    verdict(1, "randomizer table", pass, &format!("{}; {secs:.1}s", detail.join(", ")));
}

fn criterion_02_ldp_certification() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for d in 1..=3 {
        let domain = DomainSpec::unit_cube(d);
        for eps in [0.8, 1.0, 2.0, 5.0] {
            let p = MinkowskiParams::new(eps, domain, RadiusMode::Searched).unwrap();
            let mut xs = vec![Vector::zeros(d), domain.extreme_point()];
            while xs.len() < 20 {
                xs.push(sample_uniform(&domain.region(), &mut rng));
            }
            // half the outputs inside caps, half anywhere in the support
            let mut ys: Vec<Vector> = xs.iter().take(10).map(|x| sample_uniform(&p.cap(x), &mut rng)).collect();
            while ys.len() < 20 {
                ys.push(sample_uniform(&p.support(), &mut rng));
            }
            for y in &ys {
                let dens: Vec<f64> = xs.iter().map(|x| minkowski_density(x, y, &p).unwrap()).collect();
                for a in &dens {
                    for b in &dens {
                        if *b == 0.0 {
                            pass &= *a == 0.0;
                            continue;
                        }
                        let ratio = a / b;
                        worst = worst.max(ratio.ln() / eps);
                        pass &= ratio <= eps.exp() * (1.0 + 1e-9);
                    }
                }
            }
        }
    }
    verdict(2, "eps-LDP certification", pass, &format!("max ln(ratio)/eps = {worst:.12} over 12 x 20^3 triples"));
}

fn criterion_03_unbiased_and_mse() {
    let start = std::time::Instant::now();
    let p = MinkowskiParams::new(17f64.ln(), DomainSpec::unit_ball(2), RadiusMode::Formula).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let zero = Vector::zeros(2);
    let analytic = minkowski_mse_analytic(&zero, &p).unwrap();
    let trials = 1_000_000;
    let mut sq = 0.0;
    for _ in 0..trials {
        let est = minkowski_debias(&minkowski_sample(&zero, &p, &mut rng).unwrap(), &p);
        sq += est.norm_squared();
    }
    let mse = sq / trials as f64;
    let mut pass = (analytic - 1.25).abs() < 1e-12 && (mse - analytic).abs() / analytic <= 0.01;
    let mut detail = format!("mse={mse:.5} analytic={analytic}");
    for x in [[0.0, 0.0], [0.5, -0.3], [0.0, 0.99]] {
        let x = Vector::new(x.to_vec()).unwrap();
        let n = 200_000;
        let mut sum = [0.0; 2];
        let mut sum_sq = [0.0; 2];
        for _ in 0..n {
            let est = minkowski_debias(&minkowski_sample(&x, &p, &mut rng).unwrap(), &p);
            for k in 0..2 {
                sum[k] += est[k];
                sum_sq[k] += est[k] * est[k];
            }
        }
        for k in 0..2 {
            let mean = sum[k] / n as f64;
            let se = ((sum_sq[k] / n as f64 - mean * mean) / n as f64).sqrt();
            let z = (mean - x[k]) / se;
            pass &= z.abs() <= 4.0;
            detail.push_str(&format!(", z={z:+.2}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 60.0;
    verdict(3, "unbiasedness and analytic MSE", pass, &format!("{detail}; {secs:.1}s"));
}

fn criterion_04_amplification_suite() {
    let delta = 1e-6;
    let n = 100_000u64;
    let ceiling = max_local_epsilon(delta, n);
    let grid: Vec<f64> = (1..=200).map(|i| ceiling * i as f64 / 200.0).collect();
    let amp: Vec<f64> = grid.iter().map(|&e| amplify_closed_form(e, delta, n).unwrap()).collect();
    let increasing_eps = amp.windows(2).all(|w| w[0] < w[1]);
    let below = grid.iter().zip(&amp).all(|(e, a)| a < e);
    let ns: Vec<u64> = (0..200).map(|i| 50_000 + 1_000 * i).collect();
    let by_n: Vec<f64> = ns.iter().map(|&m| amplify_closed_form(2.0, delta, m).unwrap()).collect();
    let decreasing_n = by_n.windows(2).all(|w| w[0] > w[1]);
    let deltas: Vec<f64> = (0..200).map(|i| 1e-9 * 1.05f64.powi(i)).collect();
    let by_delta: Vec<f64> = deltas.iter().map(|&dl| amplify_closed_form(1.0, dl, n).unwrap()).collect();
    let decreasing_delta = by_delta.windows(2).all(|w| w[0] > w[1]);

    let mut round_trip: f64 = 0.0;
    for (&e, &a) in grid.iter().zip(&amp) {
        let inv = invert_amplify(a, delta, n).unwrap();
        if inv.status == InversionStatus::Exact {
            round_trip = round_trip.max((inv.epsilon - e).abs());
        }
    }

    // population boundary: ceil(min) feasible, one fewer rejected; same for the budget boundary
    let eps = 1.5;
    let min = min_population(eps, delta);
    let at = min.ceil() as u64;
    let boundary_n = amplify_closed_form(eps, delta, at).is_ok() && amplify_closed_form(eps, delta, at - 1).is_err();
    let edge = max_local_epsilon(delta, n);
    let boundary_eps =
        amplify_closed_form(edge - 1e-9, delta, n).is_ok() && amplify_closed_form(edge + 1e-9, delta, n).is_err();

    let pass = increasing_eps
        && below
        && decreasing_n
        && decreasing_delta
        && round_trip <= 1e-8
        && boundary_n
        && boundary_eps;
    verdict(
        4,
        "amplification suite",
        pass,
        &format!(
            "monotone eps/n/delta={increasing_eps}/{decreasing_n}/{decreasing_delta}, amplify<eps={below}, \
             round-trip={round_trip:.2e}, boundaries n/eps={boundary_n}/{boundary_eps}"
        ),
    );
}

fn criterion_05_scaling_law() {
    let start = std::time::Instant::now();
    let cfg = config(Scenario::Rates, &[("eps-central", "1"), ("delta", "1e-6"), ("trials", "20000")]);
    let rows = run_rates(&cfg).unwrap();
    let value = |m: &str| rows.iter().find(|r| r.metric == m).map(|r| r.value);
    let slope = value("loglog_slope_empirical").unwrap();
    let mut under = true;
    let mut checked = 0;
    for k in 10..=17 {
        let n = 1usize << k;
        if let (Some(ub), Some(emp)) =
            (value(&format!("upper_bound[n={n}]")), value(&format!("empirical_sq_error[n={n}]")))
        {
            checked += 1;
            under &= emp <= ub;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = (slope + 0.5).abs() <= 0.1 && under && checked > 0 && secs < 300.0;
    verdict(
        5,
        "scaling law",
        pass,
        &format!("slope={slope:.3} (want -0.5 +/- 0.1), below upper curve at {checked} feasible n={under}; {secs:.1}s"),
    );
}

fn brute_min_cost(a: &[Vector], b: &[Vector]) -> f64 {
    // assign every point of the smaller side to a distinct point of the larger side
    let (small, large, swap) = if a.len() <= b.len() { (a, b, false) } else { (b, a, true) };
    fn go(i: usize, small: &[Vector], large: &[Vector], used: &mut Vec<bool>, swap: bool, acc: &mut Vec<(usize, usize)>, best: &mut f64) {
        if i == small.len() {
            let mut pairs: Vec<(usize, usize)> = acc.iter().map(|&(s, l)| if swap { (l, s) } else { (s, l) }).collect();
            pairs.sort_unstable();
            let cost = pairs
                .iter()
                .map(|&(x, y)| if swap { large[x].distance(&small[y]) } else { small[x].distance(&large[y]) })
                .sum::<f64>();
            *best = best.min(cost);
            return;
        }
        for j in 0..large.len() {
            if !used[j] {
                used[j] = true;
                acc.push((i, j));
                go(i + 1, small, large, used, swap, acc, best);
                acc.pop();
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(0, small, large, &mut vec![false; large.len()], swap, &mut Vec::new(), &mut best);
    best
}

fn brute_max_card(a: &[Vector], b: &[Vector], tau: f64) -> usize {
    fn go(i: usize, a: &[Vector], b: &[Vector], tau: f64, used: &mut Vec<bool>) -> usize {
        if i == a.len() {
            return 0;
        }
        let mut best = go(i + 1, a, b, tau, used);
        for j in 0..b.len() {
            if !used[j] && a[i].distance(&b[j]) <= tau {
                used[j] = true;
                best = best.max(1 + go(i + 1, a, b, tau, used));
                used[j] = false;
            }
        }
        best
    }
    go(0, a, b, tau, &mut vec![false; b.len()])
}

fn criterion_06_matching_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut cost_ok = 0;
    let mut card_ok = 0;
    let instances = 100;
    for _ in 0..instances {
        let na = rng.gen_range(1..=8);
        let nb = rng.gen_range(1..=8);
        let mut pts = |n: usize| -> Vec<Vector> {
            (0..n).map(|_| Vector::new(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).unwrap()).collect()
        };
        let a = pts(na);
        let b = pts(nb);
        let tau = 0.6;
        let m = min_weight_full_matching(&BipartiteInstance::new(a.clone(), b.clone(), None).unwrap()).unwrap();
        if m.pairs.len() == na.min(nb) && m.total_cost == brute_min_cost(&a, &b) {
            cost_ok += 1;
        }
        let mm = max_matching_within_radius(&BipartiteInstance::new(a.clone(), b.clone(), Some(tau)).unwrap()).unwrap();
        if mm.pairs.len() == brute_max_card(&a, &b, tau) {
            card_ok += 1;
        }
    }
    verdict(
        6,
        "matching oracles",
        cost_ok == instances && card_ok == instances,
        &format!("min-weight {cost_ok}/{instances}, max-cardinality {card_ok}/{instances}"),
    );
}

fn criterion_07_task_orderings() {
    let start = std::time::Instant::now();
    let ldp = run_crowdsourcing(&config(Scenario::Crowdsourcing, &[("eps", "1,2,3,inf")])).unwrap();
    let pic = run_crowdsourcing(&config(Scenario::Crowdsourcing, &[("eps-central", "1,2,3")])).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for m in Mechanism::ALL {
        for eps in [1.0, 2.0, 3.0] {
            let (sl, sp) = (lookup(&ldp, m.id(), eps, "success_ratio"), lookup(&pic, m.id(), eps, "success_ratio"));
            let (cl, cp) = (lookup(&ldp, m.id(), eps, "travel_cost"), lookup(&pic, m.id(), eps, "travel_cost"));
            let ok = sp > sl && cp < cl;
            pass &= ok;
            if !ok {
                detail.push(format!("{m}@{eps}: success {sp:.4} vs {sl:.4}, cost {cp:.1} vs {cl:.1}"));
            }
        }
        let clear = lookup(&ldp, m.id(), f64::INFINITY, "success_ratio");
        pass &= clear == 1.0;
        if clear != 1.0 {
            detail.push(format!("{m}@inf: success {clear}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 120.0;
    let summary = if detail.is_empty() { "all orderings hold".to_string() } else { detail.join("; ") };
    verdict(7, "task orderings", pass, &format!("{summary}; {secs:.1}s"));
}

fn criterion_08_social_f1() {
    let start = std::time::Instant::now();
    let clear = run_social(&config(Scenario::Social, &[("eps", "inf"), ("trials", "1")])).unwrap();
    let f1_clear = lookup(&clear, "minkowski", f64::INFINITY, "f1");
    let pic = run_social(&config(Scenario::Social, &[("eps-central", "3"), ("n", "10000"), ("tau", "0.2")])).unwrap();
    let f1 = lookup(&pic, "minkowski", 3.0, "f1");
    let eps_local = pic.iter().find(|r| r.metric == "f1").and_then(|r| r.eps_local).unwrap();
    let secs = start.elapsed().as_secs_f64();
    verdict(
        8,
        "social F1",
        f1_clear == 1.0 && f1 >= 0.8 && secs < 120.0,
        &format!("clear F1={f1_clear}, PIC F1={f1:.4} at local eps {eps_local:.3} (want >= 0.8); {secs:.1}s"),
    );
}

fn criterion_09_shapley() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut within = 0;
    let mut comparisons = 0;
    let mut efficiency: f64 = 0.0;
    for i in 0..50 {
        let n = 1 + i % 6;
        let mut v = || Vector::new((0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let grads: Vec<Vector> = (0..n).map(|_| v()).collect();
        let val = v();
        let exact = shapley_exact(&grads, &val).unwrap();
        let all: Vec<usize> = (0..n).collect();
        let total = cosine_utility(&all, &grads, &val).unwrap();
        efficiency = efficiency.max((exact.values.iter().sum::<f64>() - total).abs());
        let mc = shapley_monte_carlo(&grads, &val, 5_000, &mut rng).unwrap();
        let se = mc.std_errors.unwrap();
        for k in 0..n {
            comparisons += 1;
            if (mc.values[k] - exact.values[k]).abs() <= 3.0 * se[k] + 1e-12 {
                within += 1;
            }
        }
    }
    let two = shapley_exact(
        &[Vector::new(vec![1.0, 0.0]).unwrap(), Vector::new(vec![0.0, 1.0]).unwrap()],
        &Vector::new(vec![1.0, 0.0]).unwrap(),
    )
    .unwrap();
    let example = (two.values[0] - 0.8536).abs() <= 1e-4 && (two.values[1] + 0.1464).abs() <= 1e-4;
    verdict(
        9,
        "Shapley correctness",
        within == comparisons && efficiency <= 1e-12 && example,
        &format!(
            "MC within 3 SE {within}/{comparisons}, efficiency gap {efficiency:.1e}, n=2 example ({:.4}, {:.4})",
            two.values[0], two.values[1]
        ),
    );
}

fn criterion_10_protocol_round_trip() {
    let start = std::time::Instant::now();
    let domain = DomainSpec::unit_cube(2);
    let randomizer = LocalRandomizer::build(Mechanism::Minkowski, domain, 4.0).unwrap();
    let mut setup_rng = KeyRng::new(KeyEntropy::Deterministic(10));
    let (params, server_keys) =
        server_setup(&["a", "b"], &[randomizer.clone(), randomizer], TaskId::Identity, &mut setup_rng).unwrap();
    let mut data_rng = ChaCha8Rng::seed_from_u64(10);
    let mut users: Vec<UserState> =
        (0..50).map(|i| UserState::new(i % 2, sample_uniform(&domain.region(), &mut data_rng))).collect();

    let mut delivered = 0;
    let mut leakage_ok = true;
    let mut keys_disjoint = true;
    let mut previous: BTreeSet<PublicKey> = BTreeSet::new();
    for round in 0..100u64 {
        let mut rng = KeyRng::new(KeyEntropy::Deterministic(1000 + round));
        let mut envelopes = vec![Vec::new(), Vec::new()];
        let mut members: Vec<Vec<usize>> = vec![Vec::new(), Vec::new()];
        for (i, u) in users.iter_mut().enumerate() {
            envelopes[u.group_index].push(user_prepare(u, &params, &mut rng).unwrap());
            members[u.group_index].push(i);
        }
        let current: BTreeSet<PublicKey> = users.iter().map(|u| *u.public_key().unwrap()).collect();
        keys_disjoint &= current.len() == users.len() && current.is_disjoint(&previous);
        previous = current;

        // 20% of each group corrupted
        let corrupted: Vec<BTreeSet<usize>> = members
            .iter()
            .map(|m| {
                let mut set = BTreeSet::new();
                while set.len() < m.len() / 5 {
                    set.insert(data_rng.gen_range(0..m.len()));
                }
                set
            })
            .collect();
        let (bulletin, transcript) = run_round(
            &envelopes,
            &params,
            &server_keys,
            &IdentityTask,
            &corrupted,
            RoundOptions { retain_view: true },
            &mut rng,
        )
        .unwrap();
        let view = transcript.view.unwrap();
        for g in 0..2 {
            let leaked: BTreeSet<usize> = view.leakage[g].iter().map(|&(orig, _)| orig).collect();
            leakage_ok &= leaked == corrupted[g];
            for &(orig, pos) in &view.leakage[g] {
                let owner = &users[members[g][orig]];
                leakage_ok &= view.lists[g][pos].public_key == owner.public_key().unwrap().as_bytes();
            }
        }
        for u in users.iter_mut() {
            if let Ok(TaskOutput::Report(v)) = user_retrieve(&bulletin, u) {
                if Some(&v) == u.submitted.as_ref() {
                    delivered += 1;
                }
            }
        }
    }
    let delivery = delivered as f64 / (100.0 * users.len() as f64);

    // chi-square over the 24 permutations of four senders
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let trials = 100_000;
    let mut counts: HashMap<Vec<u8>, u64> = HashMap::new();
    for _ in 0..trials {
        let out = shuffle(vec![0u8, 1, 2, 3], &BTreeSet::new(), &mut rng).unwrap();
        *counts.entry(out.permuted).or_default() += 1;
    }
    let expected = trials as f64 / 24.0;
    let chi2: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // upper 0.1% point of chi-square with 23 degrees of freedom
    let critical = 49.728;
    let uniform = counts.len() == 24 && chi2 < critical;

    let secs = start.elapsed().as_secs_f64();
    verdict(
        10,
        "protocol round-trip",
        delivery == 1.0 && uniform && leakage_ok && keys_disjoint && secs < 60.0,
        &format!(
            "delivery={:.1}%, chi2={chi2:.2} (< {critical}), leakage sound+minimal={leakage_ok}, \
             keys disjoint={keys_disjoint}; {secs:.1}s",
            100.0 * delivery
        ),
    );
}

fn main() -> ExitCode {
    let criteria: [(u32, fn()); 10] = [
        (1, criterion_01_randomizer_table),
        (2, criterion_02_ldp_certification),
        (3, criterion_03_unbiased_and_mse),
        (4, criterion_04_amplification_suite),
        (5, criterion_05_scaling_law),
        (6, criterion_06_matching_oracles),
        (7, criterion_07_task_orderings),
        (8, criterion_08_social_f1),
        (9, criterion_09_shapley),
        (10, criterion_10_protocol_round_trip),
    ];
    for (n, check) in criteria {
        if catch_unwind(check).is_err() {
            println!("criterion {n:>2} [FAIL] panicked before reaching a verdict");
            FAILURES.fetch_add(1, Ordering::Relaxed);
        }
    }
    let failed = FAILURES.load(Ordering::Relaxed);
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
