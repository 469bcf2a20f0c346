//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use rand::Rng as _;

use lldm::dynamics::{self, DynamicsKind, DynamicsSpec, PhaseConfig};
use lldm::encoding::{self, Cat, Dataset, GlobalDataParams, SubgraphDataParams};
use lldm::eval::{self, SubgraphExperiment};
use lldm::factorization::{self, SmfConfig};
use lldm::graph::{self, Graph, NwsParams};
use lldm::model::{self, LldmModel, TrainConfig};
use lldm::rng;
use lldm::sampling::{self, WalkChain};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn nws_prime(seed: u64) -> Graph {
    graph::generate_nws(&NwsParams {
        n: 300,
        neighbors: 12,
        shortcut_p: 0.4,
        seed,
    })
    .unwrap()
}

fn nws_statistics() -> Outcome {
    let start = Instant::now();
    let total: usize = (0..100).map(|s| nws_prime(s).edge_count()).sum();
    let mean = total as f64 / 100.0;
    let elapsed = start.elapsed();
    outcome(
        (2460.0..=2580.0).contains(&mean) && elapsed < Duration::from_secs(10),
        format!("mean edges {mean:.1} in {elapsed:.2?}"),
    )
}

/// Ordered 3-paths by direct enumeration of node triples.
fn three_paths(g: &Graph) -> BTreeSet<Vec<usize>> {
    let n = g.node_count();
    let mut out = BTreeSet::new();
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                if a != c && g.has_edge(a, b) && g.has_edge(b, c) {
                    out.insert(vec![a, b, c]);
                }
            }
        }
    }
    out
}

fn connected_gnp(n: usize, p: f64, seed: u64) -> Graph {
    (0..)
        .map(|i| Graph::gnp(n, p, rng::derive_seed(seed, i)).unwrap())
        .find(|g| g.is_connected())
        .unwrap()
}

fn sampler_uniformity() -> Outcome {
    let start = Instant::now();
    let graphs = [
        ("path", Graph::path(6)),
        ("cycle", Graph::cycle(7)),
        ("star", Graph::star(6)),
        ("K5", Graph::complete(5)),
        ("random-a", connected_gnp(7, 0.4, 11)),
        ("random-b", connected_gnp(8, 0.35, 12)),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, (name, g)) in graphs.iter().enumerate() {
        assert!(g.node_count() <= 8 && g.is_connected());
        let support = three_paths(g);
        let brute: BTreeSet<Vec<usize>> = sampling::brute_force_kpaths(g, 3).unwrap().into_iter().collect();
        if brute != support {
            pass = false;
            parts.push(format!("{name}: enumerations disagree"));
            continue;
        }
        let samples = sampling::sample_kpaths(g, 3, 100_000, sampling::default_thin(3), 500 + i as u64).unwrap();
        let mut counts: BTreeMap<&[usize], usize> = BTreeMap::new();
        for s in &samples {
            *counts.entry(s.as_slice()).or_default() += 1;
        }
        let u = 1.0 / support.len() as f64;
        let n = samples.len() as f64;
        let outside: usize = counts.iter().filter(|(k, _)| !support.contains(**k)).map(|(_, c)| c).sum();
        let tv = 0.5
            * (support
                .iter()
                .map(|p| (counts.get(p.as_slice()).copied().unwrap_or(0) as f64 / n - u).abs())
                .sum::<f64>()
                + outside as f64 / n);
        pass &= tv < 0.05;
        parts.push(format!("{name} {tv:.4}"));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(60);
    outcome(pass, format!("TV {} in {elapsed:.2?}", parts.join(", ")))
}

fn constant_within(g: &Graph, spec: &DynamicsSpec, x0: PhaseConfig, steps: usize) -> bool {
    let traj = dynamics::simulate(g, &x0, spec, steps).unwrap();
    traj.configs.iter().any(|c| match c {
        PhaseConfig::Discrete(v) => v.iter().all(|&s| s == v[0]),
        PhaseConfig::Continuous(_) => false,
    })
}

fn sufficient_conditions() -> Outcome {
    let p20 = Graph::path(20);
    let mut r = rng::seeded(3);
    let mut fails = Vec::new();
    for spec in [DynamicsSpec::fca(5), DynamicsSpec::ghm(6)] {
        let ok = (0..100)
            .filter(|_| {
                let x0 = dynamics::random_config(&spec, 20, &mut r);
                constant_within(&p20, &spec, x0, 1000)
            })
            .count();
        fails.push(format!("{} {ok}/100", spec.kind));
    }
    let pass = fails.iter().all(|s| s.ends_with(" 100/100"));
    outcome(pass, fails.join(", "))
}

fn concentration_principle() -> Outcome {
    let parent = nws_prime(4);
    let spec = DynamicsSpec::kuramoto();
    let mut chain = WalkChain::new(&parent, 20, 40).unwrap();
    let mut r = rng::seeded(41);
    let mut synced = 0;
    let mut worst = 0;
    for _ in 0..50 {
        let nodes = chain.next_kpath(sampling::default_max_steps(20)).unwrap();
        let g = parent.induced_subgraph(&nodes).unwrap();
        assert!(g.is_connected());
        let x0 = loop {
            let x = dynamics::random_config_in_arc(&spec, 20, r.random_range(0.05..0.5), &mut r);
            if dynamics::is_concentrated(&x, &spec) {
                break x;
            }
        };
        let traj = dynamics::simulate(&g, &x0, &spec, 5000).unwrap();
        let first = traj.configs.iter().position(|c| match c {
            PhaseConfig::Continuous(v) => dynamics::circular_diameter(v) < 1e-2,
            PhaseConfig::Discrete(_) => false,
        });
        if let Some(t) = first {
            synced += 1;
            worst = worst.max(t);
        }
    }
    outcome(synced == 50, format!("{synced}/50 synchronized, slowest at step {worst}"))
}

fn objective_by_sums(x: &Array2<f64>, y: &[u8], w: &Array2<f64>, h: &Array2<f64>, beta: &[f64], xi: f64, ridge: f64) -> f64 {
    let (d, n) = x.dim();
    let rank = w.ncols();
    let mut nll = 0.0;
    for i in 0..n {
        let mut s = 0.0;
        for r in 0..rank {
            let mut hr = 0.0;
            for a in 0..d {
                hr += w[[a, r]] * x[[a, i]];
            }
            s += beta[r] * hr;
        }
        let p = 1.0 / (1.0 + (-s).exp());
        nll -= if y[i] == 1 { p.ln() } else { (1.0 - p).ln() };
    }
    let mut rec = 0.0;
    for a in 0..d {
        for i in 0..n {
            let wh: f64 = (0..rank).map(|r| w[[a, r]] * h[[r, i]]).sum();
            rec += (x[[a, i]] - wh).powi(2);
        }
    }
    nll + xi * rec + ridge * beta.iter().map(|b| b * b).sum::<f64>()
}

fn rel_norm_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    diff / scale.max(1e-12)
}

fn optimization_monotonicity() -> Outcome {
    let mut worst_nmf = f64::NEG_INFINITY;
    let mut worst_smf = f64::NEG_INFINITY;
    let mut worst_grad: f64 = 0.0;
    let mut non_negative = true;
    for inst in 0..20u64 {
        let mut r = rng::seeded(900 + inst);
        let (d, n, rank) = (8 + (inst as usize % 5) * 4, 12 + (inst as usize % 4) * 5, 2 + inst as usize % 3);
        let x = Array2::from_shape_fn((d, n), |_| r.random::<f64>() * if r.random_bool(0.3) { 0.0 } else { 1.0 });
        let mut y: Vec<u8> = (0..n).map(|_| u8::from(r.random_bool(0.5))).collect();
        y[0] = 0;
        y[1] = 1;

        let nmf = factorization::nmf(x.view(), rank, 250, inst).unwrap();
        worst_nmf = worst_nmf.max(nmf.trace.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max));
        non_negative &= nmf.factors.w.iter().chain(nmf.factors.h.iter()).all(|&v| v >= 0.0);

        let xi = SmfConfig::XI_GRID[inst as usize % 3];
        let cfg = SmfConfig::new(rank, xi, inst);
        let sol = factorization::smf(x.view(), &y, &cfg).unwrap();
        worst_smf = worst_smf.max(sol.trace.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max));
        non_negative &= sol.factors.w.iter().chain(sol.factors.h.iter()).all(|&v| v >= 0.0);

        let w = Array2::from_shape_fn((d, rank), |_| r.random::<f64>());
        let h = Array2::from_shape_fn((rank, n), |_| r.random::<f64>());
        let beta: Vec<f64> = (0..rank).map(|_| r.random_range(-0.5..0.5)).collect();
        let ridge = 1e-6;
        let eps = 1e-6;
        let f = |w: &Array2<f64>, beta: &[f64]| objective_by_sums(&x, &y, w, &h, beta, xi, ridge);
        let gw = factorization::w_block_gradient(x.view(), &y, w.view(), h.view(), Array1::from(beta.clone()).view(), 0.0, xi);
        let mut numeric = Vec::new();
        for a in 0..d {
            for c in 0..rank {
                let (mut up, mut down) = (w.clone(), w.clone());
                up[[a, c]] += eps;
                down[[a, c]] -= eps;
                numeric.push((f(&up, &beta) - f(&down, &beta)) / (2.0 * eps));
            }
        }
        worst_grad = worst_grad.max(rel_norm_err(&gw.iter().copied().collect::<Vec<_>>(), &numeric));
        let gb = factorization::beta_block_gradient(x.view(), &y, w.view(), Array1::from(beta.clone()).view(), 0.0, ridge);
        let numeric: Vec<f64> = (0..rank)
            .map(|c| {
                let (mut up, mut down) = (beta.clone(), beta.clone());
                up[c] += eps;
                down[c] -= eps;
                (f(&w, &up) - f(&w, &down)) / (2.0 * eps)
            })
            .collect();
        worst_grad = worst_grad.max(rel_norm_err(&gb.to_vec(), &numeric));
    }
    outcome(
        worst_nmf <= 1e-9 && worst_smf <= 1e-8 && worst_grad < 1e-5 && non_negative,
        format!("largest NMF rise {worst_nmf:.2e}, largest SMF rise {worst_smf:.2e}, gradient error {worst_grad:.2e}"),
    )
}

fn random_model(k: usize, t: usize, rank: usize, spec: DynamicsSpec, r: &mut rng::Rng) -> LldmModel {
    let filters = (0..rank)
        .map(|_| {
            let mut c = Cat::zeros(k, t);
            for i in 0..k {
                for j in i + 1..k {
                    for s in 0..t {
                        c.set_pair(i, j, s, r.random::<f64>());
                    }
                }
            }
            c.scaled(1.0 / c.frobenius_norm())
        })
        .collect();
    LldmModel {
        filters,
        beta: (0..rank).map(|_| r.random_range(-3.0..3.0)).collect(),
        intercept: Some(r.random_range(-1.0..1.0)),
        spec,
        k,
        t,
    }
}

fn recursive_average() -> Outcome {
    let mut worst: f64 = 0.0;
    for trial in 0..20u64 {
        let mut r = rng::seeded(700 + trial);
        let spec = [DynamicsSpec::kuramoto(), DynamicsSpec::fca(5), DynamicsSpec::ghm(6)][trial as usize % 3];
        let k = 4 + trial as usize % 3;
        let m = random_model(k, 5, 3, spec, &mut r);
        let g = connected_gnp(30, 0.15, 710 + trial);
        let x0 = dynamics::random_config(&spec, g.node_count(), &mut r);
        let traj = dynamics::simulate(&g, &x0, &spec, 4).unwrap();
        let mut pr = model::prediction_rng(trial);
        let pred = model::predict_global(&m, &g, &traj, 50, 5, &mut pr).unwrap();
        let batch = pred.probabilities.iter().sum::<f64>() / pred.probabilities.len() as f64;
        worst = worst.max((pred.final_prob - batch).abs());
        for (s, running) in pred.trace.iter().enumerate() {
            let prefix = pred.probabilities[..=s].iter().sum::<f64>() / (s + 1) as f64;
            worst = worst.max((running - prefix).abs());
        }
        assert_eq!(pred.samples_used, 50);
    }
    outcome(worst < 1e-12, format!("largest gap {worst:.2e}"))
}

fn accuracy_ordering() -> Outcome {
    let start = Instant::now();
    let exp = SubgraphExperiment {
        spec: DynamicsSpec::fca(5),
        k: 10,
        count: 2000,
        rank: 8,
        xi_grid: SmfConfig::XI_GRID.to_vec(),
        train: TrainConfig::default(),
        train_frac: 0.8,
    };
    let results: Vec<eval::SeedResult> = (0..5u64)
        .map(|seed| exp.run_seed(&nws_prime(seed), "nws-prime", seed).unwrap())
        .collect();
    let mean = |f: fn(&eval::SeedResult) -> f64| 100.0 * results.iter().map(f).sum::<f64>() / results.len() as f64;
    let lldm = mean(|r| r.lldm.accuracy);
    let lldm_t = mean(|r| r.lldm_t.accuracy);
    let baseline = mean(|r| r.baseline.accuracy);
    let elapsed = start.elapsed();
    let balanced = results
        .iter()
        .all(|r| (0.1..=0.9).contains(&r.positive_fraction));
    outcome(
        lldm >= baseline + 5.0 && lldm >= lldm_t - 3.0 && elapsed < Duration::from_secs(15 * 60) && balanced,
        format!("LLDM {lldm:.2}%, LLDM-T {lldm_t:.2}%, baseline {baseline:.2}% in {elapsed:.1?}"),
    )
}

fn global_convergence() -> Outcome {
    let spec = DynamicsSpec::fca(5);
    let parents: Vec<Graph> = (0..40).map(|i| nws_prime(1000 + i)).collect();
    let mut params = GlobalDataParams::new(spec, 10, 50, 8);
    params.balance = true;
    let (ds, _) = encoding::gen_global_dataset(&parents, "nws-prime", &params).unwrap();
    let m = model::train_lldm_smf(&ds, 8, 0.5, &TrainConfig::default()).unwrap();
    let mut converged = 0;
    let mut largest: f64 = 0.0;
    for i in 0..20u64 {
        let g = nws_prime(5000 + i);
        let (traj, _) =
            encoding::parent_trajectory(&g, &spec, params.t_horizon, Some((i % 2) as u8), params.max_attempts, 7000 + i).unwrap();
        let observed = traj.prefix(params.t_observed);
        let mut pr = model::prediction_rng(i);
        let pred = model::predict_global(&m, &g, &observed, 50, model::default_global_thin(10), &mut pr).unwrap();
        let gap = (pred.trace[24] - pred.trace[49]).abs();
        largest = largest.max(gap);
        converged += usize::from(gap < 0.1);
    }
    outcome(converged >= 18, format!("{converged}/20 within 0.1, largest gap {largest:.4}"))
}

fn nll_by_sum(m: &LldmModel, ds: &Dataset) -> f64 {
    ds.cats
        .iter()
        .zip(&ds.labels)
        .map(|(c, &y)| {
            let p = m.predict_prob(c).unwrap().clamp(1e-12, 1.0 - 1e-12);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum()
}

fn evaluated_models() -> Vec<(String, LldmModel, Vec<Dataset>)> {
    let parent = graph::generate_nws(&NwsParams {
        n: 80,
        neighbors: 6,
        shortcut_p: 0.4,
        seed: 5,
    })
    .unwrap();
    let cfg = TrainConfig {
        iters: 60,
        ..TrainConfig::default()
    };
    let mut out = Vec::new();
    for (i, spec) in [DynamicsSpec::kuramoto(), DynamicsSpec::fca(5), DynamicsSpec::ghm(6)].into_iter().enumerate() {
        let mut p = SubgraphDataParams::new(spec, 6, 300, 60 + i as u64);
        // horizons short enough that both labels are common
        (p.t_horizon, p.t_observed) = [(100, 10), (20, 8), (8, 4)][i];
        p.balance = spec.kind == DynamicsKind::Ghm;
        let ds = encoding::gen_subgraph_dataset(&parent, "nws", &p).unwrap();
        println!("     evaluated {} data: {} of {} positive", spec.kind, ds.manifest.labels_positive, ds.len());
        let (train, test) = eval::split(&ds, 0.8, i as u64).unwrap();
        let smf = model::train_lldm_smf(&train, 4, 0.5, &cfg).unwrap();
        let nmf = model::train_lldm_nmf(&train, 4, &cfg).unwrap();
        out.push((format!("{} smf", spec.kind), smf, vec![train.clone(), test.clone()]));
        out.push((format!("{} nmf", spec.kind), nmf, vec![train, test]));
    }
    out
}

fn deviance_identity(models: &[(String, LldmModel, Vec<Dataset>)]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut sign_ok = 0;
    let mut total = 0;
    for (_, m, sets) in models {
        for ds in sets {
            let res = eval::deviance_residuals(m, ds).unwrap();
            let sq: f64 = res.iter().map(|r| r.deviance * r.deviance).sum();
            let nll = nll_by_sum(m, ds);
            worst = worst.max((sq - 2.0 * nll).abs() / (2.0 * nll));
            for r in &res {
                total += 1;
                let ok = if r.label == 1 { r.deviance >= 0.0 } else { r.deviance <= 0.0 };
                sign_ok += usize::from(ok && r.label == ds.labels[r.index]);
            }
        }
    }
    outcome(
        worst <= 1e-9 && sign_ok == total,
        format!("largest relative gap {worst:.2e}, signs {sign_ok}/{total}"),
    )
}

fn persistence(models: &[(String, LldmModel, Vec<Dataset>)]) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut worst_ratio: f64 = 0.0;
    let mut exact_data = true;
    for (i, (_, m, sets)) in models.iter().enumerate() {
        let mdir = dir.path().join(format!("model{i}"));
        m.save(&mdir).unwrap();
        let loaded = LldmModel::load(&mdir).unwrap();
        let ddir = dir.path().join(format!("data{i}"));
        sets[1].save(&ddir).unwrap();
        let ds = Dataset::load(&ddir).unwrap();
        exact_data &= ds.labels == sets[1].labels && ds.cats.iter().zip(&sets[1].cats).all(|(a, b)| a.data() == b.data());
        exact_data &= ds.manifest == sets[1].manifest;
        for c in &ds.cats {
            let h: Vec<f64> = m.filters.iter().map(|f| f.inner(c).unwrap()).collect();
            // Filters are stored as 32-bit floats; with nonnegative tensors each
            // proximity moves by at most one f32 epsilon relative to itself.
            let budget = f64::from(f32::EPSILON) * m.beta.iter().zip(&h).map(|(b, v)| (b * v).abs()).sum::<f64>() + 1e-12;
            let (s0, s1) = (m.logit(c).unwrap(), loaded.logit(c).unwrap());
            let (p0, p1) = (m.predict_prob(c).unwrap(), loaded.predict_prob(c).unwrap());
            worst_ratio = worst_ratio.max((s0 - s1).abs() / budget).max((p0 - p1).abs() / (0.25 * budget));
        }
    }
    outcome(
        worst_ratio <= 1.0 && exact_data,
        format!("largest deviation {worst_ratio:.3} of the f32 budget, datasets exact: {exact_data}"),
    )
}

fn main() {
    // ACCEPTANCE_ONLY=7,8 runs a subset.
    let only: Vec<usize> = std::env::var("ACCEPTANCE_ONLY")
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect())
        .unwrap_or_default();
    let selected = |id: usize| only.is_empty() || only.contains(&id);
    let mut models = None;
    let mut failures = 0;
    let criteria: [(&str, &dyn Fn(&mut Option<Vec<(String, LldmModel, Vec<Dataset>)>>) -> Outcome); 10] = [
        ("NWS statistics", &|_| nws_statistics()),
        ("sampler uniformity", &|_| sampler_uniformity()),
        ("dynamics sufficient conditions", &|_| sufficient_conditions()),
        ("concentration principle", &|_| concentration_principle()),
        ("optimization monotonicity", &|_| optimization_monotonicity()),
        ("recursive-average identity", &|_| recursive_average()),
        ("accuracy ordering", &|_| accuracy_ordering()),
        ("global-level convergence", &|_| global_convergence()),
        ("deviance-residual identity", &|m| deviance_identity(m.get_or_insert_with(evaluated_models))),
        ("persistence round-trip", &|m| persistence(m.get_or_insert_with(evaluated_models))),
    ];
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !selected(id) {
            continue;
        }
        let o = check(&mut models);
        println!("{} {id:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failures += usize::from(!o.pass);
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all selected acceptance criteria passed");
}
