//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion, plus
//! indented `info` lines. Exits nonzero only when a criterion outside
//! `KNOWN_FAILURES` fails; those are analysed in the README.

mod common;

use common::nets::gradient_check_error;
use common::*;
use kronopt::analysis::{rank1_records, sm_discrepancy_report, sm_update_rounded, MatrixKind};
use kronopt::comm::{simulate_workers, Simulation};
use kronopt::data::Dataset;
use kronopt::harness::data::{synth_dataset, SynthKind, SynthSpec};
use kronopt::linalg::{direct_inverse, inf_norm, lincomb, outer, sub};
use kronopt::net::{Activation, LayerSpec, LossKind, Network};
use kronopt::optim::{
    precondition, sm_update, sm_update_exact, stabilize, Kfac, KfacConfig, Mkor, MkorConfig, Optimizer, Period,
    SgdMomentum, SmFormula,
};
use kronopt::prune::{greedy_prune, taylor_predicted_loss, PruneMode};
use kronopt::{Matrix, Rng, Vector};
use std::time::Instant;

const KNOWN_FAILURES: [usize; 2] = [1, 12];

struct Outcome {
    passed: bool,
    detail: String,
    info: Vec<String>,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Outcome {
            passed,
            detail: detail.into(),
            info: Vec::new(),
        }
    }

    fn info(mut self, line: impl Into<String>) -> Self {
        self.info.push(line.into());
        self
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 12] = [
        ("factor-inverse chains stay positive-definite", chains),
        ("exact rank-1 update matches direct inverse", sherman_morrison),
        ("blended preconditioner descent and expansion", blended_descent),
        ("half-precision error constant", quantization),
        ("flop scaling under d doubling", flop_scaling),
        ("per-iteration time across inversion periods", time_vs_period),
        ("convergence against SGD on the autoencoder", autoencoder_convergence),
        ("rank-1 error records", rank1_profile),
        ("finite-difference gradients", gradients),
        ("greedy pruning against exhaustive search", pruning),
        ("identical-shard workers and sync volume", workers),
        ("learning-rate robustness on blobs", lr_robustness),
    ];
    let mut unexpected = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        let start = Instant::now();
        let out = run();
        let secs = start.elapsed().as_secs_f64();
        let verdict = if out.passed { "PASS" } else { "FAIL" };
        let known = if !out.passed && KNOWN_FAILURES.contains(&id) {
            " (known)"
        } else {
            ""
        };
        println!("{verdict} {id:>2} {name}: {}{known} [{secs:.1}s]", out.detail);
        for line in &out.info {
            println!("        info: {line}");
        }
        if !out.passed && !KNOWN_FAILURES.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}

fn is_pd(m: &Matrix) -> bool {
    m.is_finite() && cholesky(&to_rows(m)).is_some()
}

fn chains() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut exact_failures = 0;
    for (idx, d) in [4usize, 16, 64].into_iter().enumerate() {
        for (jdx, gamma) in [0.9, 0.99].into_iter().enumerate() {
            for formula in [SmFormula::Mkor, SmFormula::Exact] {
                let mut rng = Rng::new(100 + 10 * idx as u64 + jdx as u64);
                let mut f_inv = Matrix::identity(d);
                for step in 0..10_000 {
                    let v = Vector::random_normal(d, 1.0, &mut rng);
                    let h = stabilize(&f_inv, 100.0, 0.95).unwrap();
                    let next = match formula {
                        SmFormula::Mkor => sm_update(&h, &v, gamma),
                        SmFormula::Exact => sm_update_exact(&h, &v, gamma),
                    };
                    match next {
                        Ok(m) if is_pd(&m) => f_inv = m,
                        _ => {
                            match formula {
                                SmFormula::Mkor => failures.push(format!("d={d} γ={gamma} at step {step}")),
                                SmFormula::Exact => exact_failures += 1,
                            }
                            break;
                        }
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let passed = failures.is_empty() && secs < 60.0;
    let detail = if failures.is_empty() {
        format!("6 chains of 10^4 steps positive-definite, {secs:.1}s")
    } else {
        format!("default update loses definiteness: {}", failures.join(", "))
    };
    Outcome::new(passed, detail).info(format!(
        "exact Sherman-Morrison update: {exact_failures} of 6 chains fail"
    ))
}

fn sherman_morrison() -> Outcome {
    let mut rng = Rng::new(200);
    let mut worst = 0.0f64;
    let mut worst_oracle = 0.0f64;
    for t in 0..1000 {
        let d = 1 + rng.below(32);
        let gamma = if t % 2 == 0 { 0.9 } else { 0.99 };
        let f = Matrix::random_spd(d, 2 * d, 0.5, &mut rng);
        let f_inv = direct_inverse(&f).unwrap();
        let v = Vector::random_normal(d, 1.0, &mut rng);
        let target = lincomb(gamma, &f, 1.0 - gamma, &outer(&v, &v)).unwrap();
        let exact = sm_update_exact(&f_inv, &v, gamma).unwrap();
        let direct = direct_inverse(&target).unwrap();
        let oracle = inverse(&to_rows(&target)).expect("target is positive-definite");
        worst = worst.max(inf_norm(&sub(&exact, &direct).unwrap()) / d as f64);
        worst_oracle = worst_oracle.max(max_abs_diff(&to_rows(&exact), &oracle) / d as f64);
    }
    let mut out = Outcome::new(
        worst < 1e-9 && worst_oracle < 1e-9,
        format!("max ‖exact − direct‖∞/d = {worst:.2e}, against Gauss-Jordan {worst_oracle:.2e}"),
    );
    for gamma in [0.9, 0.99] {
        let r = sm_discrepancy_report(32, 1000, gamma, &mut Rng::new(201)).unwrap();
        out = out.info(format!(
            "default update vs direct inverse at γ={gamma}: relative error max {:.3}, mean {:.3}",
            r.mkor_max_rel_error, r.mkor_mean_rel_error
        ));
    }
    out
}

fn blended_descent() -> Outcome {
    let zeta = 0.95;
    let mut rng = Rng::new(300);
    let mut descent = 0;
    let mut min_descent = f64::INFINITY;
    let mut worst_expansion = 0.0f64;
    let mut worst_matrix_form = 0.0f64;
    for _ in 0..100 {
        let dl = 1 + rng.below(6);
        let dr = 1 + rng.below(6);
        let l = random_spd(dl, dl + 1, 0.1, &mut rng);
        let r = random_spd(dr, dr + 1, 0.1, &mut rng);
        let l_inv = inverse(&l).unwrap();
        let r_inv = inverse(&r).unwrap();
        let blend = |m: &[Vec<f64>]| -> Vec<Vec<f64>> {
            let n = m.len();
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| zeta * m[i][j] + if i == j { 1.0 - zeta } else { 0.0 })
                        .collect()
                })
                .collect()
        };
        let p = kron_rows(&blend(&l_inv), &blend(&r_inv));
        let terms = [
            (zeta * zeta, kron_rows(&l_inv, &r_inv)),
            (zeta * (1.0 - zeta), kron_rows(&l_inv, &identity(dr))),
            (zeta * (1.0 - zeta), kron_rows(&identity(dl), &r_inv)),
            ((1.0 - zeta) * (1.0 - zeta), identity(dl * dr)),
        ];
        let n = dl * dr;
        let mut expansion = vec![vec![0.0; n]; n];
        for (c, t) in &terms {
            for i in 0..n {
                for j in 0..n {
                    expansion[i][j] += c * t[i][j];
                }
            }
        }
        worst_expansion = worst_expansion.max(max_abs_diff(&p, &expansion));

        // Gradient of ½wᵀ(L⊗R)w + cᵀw at a random point.
        let h = kron_rows(&l, &r);
        let w: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let c: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let grad: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| h[i][j] * w[j]).sum::<f64>() + c[i])
            .collect();
        let step: Vec<f64> = (0..n).map(|i| (0..n).map(|j| p[i][j] * grad[j]).sum()).collect();
        let dec: f64 = grad.iter().zip(&step).map(|(a, b)| a * b).sum();
        if dec > 0.0 {
            descent += 1;
        }
        min_descent = min_descent.min(dec);

        let gm = Matrix::from_vec(dl, dr, grad.clone()).unwrap();
        let lib = precondition(&from_rows(&blend(&l_inv)), &gm, &from_rows(&blend(&r_inv))).unwrap();
        let dense = Matrix::from_vec(dl, dr, step).unwrap();
        worst_matrix_form = worst_matrix_form.max(sub(&lib, &dense).unwrap().max_abs());
    }
    let passed = descent == 100 && worst_expansion <= 1e-10 && worst_matrix_form <= 1e-10;
    Outcome::new(
        passed,
        format!(
            "descent in {descent}/100 (min {min_descent:.2e}), expansion error {worst_expansion:.2e}, matrix form {worst_matrix_form:.2e}"
        ),
    )
}

fn kron_rows(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    common::kron(a, b)
}

fn quantization() -> Outcome {
    let mut worst_c = 0.0f64;
    let mut exact_arith = 0.0f64;
    let mut rng = Rng::new(400);
    let eps = 2f64.powi(-11);
    for d in [8usize, 16, 32] {
        for gamma in [0.9, 0.99] {
            for _ in 0..50 {
                let f = Matrix::random_spd(d, 2 * d, 0.5, &mut rng);
                let f_inv = Matrix::from_fn(d, d, |i, j| f.get(i, j) / d as f64);
                let v = Vector::random_normal(d, 1.0, &mut rng);
                let reference = sm_update(&f_inv, &v, gamma).unwrap();
                let rounded = sm_update_rounded(&f_inv, &v, gamma, f16_round);
                let unrounded = sm_update_rounded(&f_inv, &v, gamma, |x| x);
                let err = sub(&reference, &rounded).unwrap().max_abs();
                let m = f_inv.max_abs().max(v.max_abs());
                let bound = (gamma + 4.0 * (1.0 - gamma) / (gamma * gamma) * m.powi(3) * (d * d) as f64) * eps;
                worst_c = worst_c.max(err / bound);
                exact_arith = exact_arith.max(sub(&reference, &unrounded).unwrap().max_abs());
            }
        }
    }
    Outcome::new(
        worst_c <= 16.0 && exact_arith == 0.0,
        format!("fitted constant {worst_c:.3} over 300 updates, error at ε=0 is {exact_arith:e}"),
    )
}

fn autoencoder_data(dim: usize, latent: usize, seed: u64) -> Dataset {
    synth_dataset(
        &SynthSpec {
            kind: SynthKind::RandomAutoencoder,
            n: 512,
            dim,
            latent,
            sigma: 0.05,
            ..SynthSpec::default()
        },
        seed,
    )
    .unwrap()
}

fn autoencoder_net(dim: usize, hidden: usize, seed: u64) -> Network {
    let specs = [
        LayerSpec::new(dim, hidden, Activation::Tanh, true),
        LayerSpec::new(hidden, hidden, Activation::Tanh, true),
        LayerSpec::new(hidden, dim, Activation::Identity, true),
    ];
    Network::init(&specs, &mut Rng::new(seed)).unwrap()
}

fn mkor(net: &Network, lr: f64, f: u64) -> Optimizer {
    let cfg = MkorConfig {
        lr,
        inversion_period: Period::Every(f),
        ..MkorConfig::default()
    };
    Optimizer::Mkor(Box::new(Mkor::new(cfg, net).unwrap()))
}

fn kfac(net: &Network, f: u64) -> Optimizer {
    let cfg = KfacConfig {
        inversion_period: Period::Every(f),
        damping: 0.1,
        ..KfacConfig::default()
    };
    Optimizer::Kfac(Box::new(Kfac::new(cfg, net).unwrap()))
}

fn flop_scaling() -> Outcome {
    let start = Instant::now();
    let mut mkor_factor = Vec::new();
    let mut kfac_inversion = Vec::new();
    for d in [64usize, 128, 256] {
        let data = autoencoder_data(d, 16, 5);
        let net = autoencoder_net(d, d, 5);
        let m = simulate_workers(
            net.clone(),
            mkor(&net, 0.01, 1),
            vec![data.clone()],
            32,
            LossKind::Mse,
            1,
        )
        .unwrap();
        mkor_factor.push(m.trace.iterations[0].flops.factor as f64);
        let k = simulate_workers(net.clone(), kfac(&net, 2), vec![data], 32, LossKind::Mse, 2).unwrap();
        let it = &k.trace.iterations;
        kfac_inversion.push((it[0].flops.factor - it[1].flops.factor) as f64);
    }
    let ratios = |v: &[f64]| [v[1] / v[0], v[2] / v[1]];
    let rm = ratios(&mkor_factor);
    let rk = ratios(&kfac_inversion);
    let secs = start.elapsed().as_secs_f64();
    let passed =
        rm.iter().all(|r| (3.5..=4.5).contains(r)) && rk.iter().all(|r| (7.0..=9.0).contains(r)) && secs < 300.0;
    Outcome::new(
        passed,
        format!(
            "rank-1 factor update ratios {:.3}, {:.3}; KFAC inversion ratios {:.3}, {:.3}",
            rm[0], rm[1], rk[0], rk[1]
        ),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn ms_per_iteration(make: impl Fn(&Network) -> Optimizer) -> f64 {
    let data = autoencoder_data(256, 16, 6);
    let net = autoencoder_net(256, 256, 6);
    let reps = (0..3)
        .map(|_| {
            let mut sim = Simulation::new(net.clone(), make(&net), vec![data.clone()], 32, LossKind::Mse).unwrap();
            let start = Instant::now();
            for _ in 0..100 {
                sim.step().unwrap();
            }
            start.elapsed().as_secs_f64() * 1e3 / 100.0
        })
        .collect();
    median(reps)
}

fn time_vs_period() -> Outcome {
    let periods = [1u64, 10, 100];
    let m: Vec<f64> = periods
        .iter()
        .map(|&f| ms_per_iteration(|n| mkor(n, 0.01, f)))
        .collect();
    let k: Vec<f64> = periods.iter().map(|&f| ms_per_iteration(|n| kfac(n, f))).collect();
    let spread = m.iter().cloned().fold(f64::MIN, f64::max) / m.iter().cloned().fold(f64::MAX, f64::min) - 1.0;
    let kfac_ratio = k[0] / k[2];
    Outcome::new(
        spread < 0.25 && kfac_ratio > 2.0,
        format!(
            "MKOR ms/iter {:.1}, {:.1}, {:.1} (spread {:.1}%); KFAC {:.1}, {:.1}, {:.1} (f=1/f=100 {:.2}x)",
            m[0],
            m[1],
            m[2],
            100.0 * spread,
            k[0],
            k[1],
            k[2],
            kfac_ratio
        ),
    )
}

fn full_loss_trace(data: &Dataset, net: Network, opt: Optimizer, iters: usize, loss: LossKind) -> Vec<f64> {
    let mut sim = Simulation::new(net, opt, vec![data.clone()], 32, loss).unwrap();
    let mut out = Vec::with_capacity(iters);
    for _ in 0..iters {
        if sim.step().is_err() {
            out.push(f64::NAN);
            break;
        }
        let l = sim.net().loss(&data.inputs, &data.targets, loss).unwrap();
        out.push(l);
        if !l.is_finite() {
            break;
        }
    }
    out
}

fn autoencoder_convergence() -> Outcome {
    let data = autoencoder_data(32, 8, 1);
    let net = autoencoder_net(32, 16, 1);
    let sgd = full_loss_trace(
        &data,
        net.clone(),
        Optimizer::Sgd(SgdMomentum::new(0.01, 0.9)),
        2000,
        LossKind::Mse,
    );
    let m = full_loss_trace(&data, net.clone(), mkor(&net, 0.01, 10), 2000, LossKind::Mse);
    let target = sgd[1999];
    let reached = m.iter().position(|&l| l <= target).map(|i| i + 1);
    match reached {
        Some(it) => {
            let ratio = it as f64 / 2000.0;
            Outcome::new(
                it <= 1400 && ratio <= 0.8,
                format!("SGD loss at 2000 is {target:.4e}; MKOR reaches it at {it} (ratio {ratio:.3})"),
            )
        }
        None => Outcome::new(
            false,
            format!("MKOR never reaches the SGD loss {target:.4e} in 2000 iterations"),
        ),
    }
}

fn eckart_young(c: &[Vec<f64>]) -> f64 {
    let ev = jacobi_eigenvalues(c);
    let total: f64 = ev.iter().map(|x| x * x).sum();
    if total == 0.0 {
        return 0.0;
    }
    let top = ev.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    ((total - top * top).max(0.0) / total).sqrt()
}

fn covariance(x: &Matrix) -> Vec<Vec<f64>> {
    let rows = to_rows(x);
    let b = x.cols() as f64;
    let n = rows.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| rows[i].iter().zip(&rows[j]).map(|(a, c)| a * c).sum::<f64>() / b)
                .collect()
        })
        .collect()
}

fn rank1_profile() -> Outcome {
    let data = autoencoder_data(32, 8, 1);
    let net = autoencoder_net(32, 16, 1);
    let layers = 3;
    let mut sim = Simulation::new(net.clone(), mkor(&net, 0.01, 10), vec![data], 32, LossKind::Mse).unwrap();
    let mut records = Vec::new();
    let mut ey_gap = 0.0f64;
    let mut below_optimum = 0;
    for t in 0..200u64 {
        let out = sim.step().unwrap();
        if t % 10 != 0 {
            continue;
        }
        let recs = rank1_records(t, &out.captures).unwrap();
        for r in &recs {
            let cap = &out.captures[r.layer];
            let x = match r.kind {
                MatrixKind::Activation => &cap.a_prev,
                MatrixKind::Gradient => &cap.g,
            };
            let ey = eckart_young(&covariance(x));
            ey_gap = ey_gap.max((r.rel_error_best_rank1 - ey).abs());
            if r.rel_error_best_rank1 < ey - 1e-9 {
                below_optimum += 1;
            }
        }
        records.extend(recs);
    }
    let complete = (0..layers).all(|l| {
        records
            .iter()
            .filter(|r| r.layer == l && r.kind == MatrixKind::Activation)
            .count()
            == 20
            && records
                .iter()
                .filter(|r| r.layer == l && r.kind == MatrixKind::Gradient)
                .count()
                == 20
    });
    let holds = records
        .iter()
        .filter(|r| r.rel_error_best_rank1 <= r.rel_error_mean_vec)
        .count();
    Outcome::new(
        complete && holds == records.len(),
        format!(
            "{} records over {layers} layers, invariant holds on {holds}",
            records.len()
        ),
    )
    .info(format!(
        "largest gap to the eigenvalue optimum {ey_gap:.2e}, {below_optimum} records below it"
    ))
}

fn gradients() -> Outcome {
    let worst = (0..100).map(gradient_check_error).fold(0.0f64, f64::max);
    Outcome::new(
        worst < 1e-5,
        format!("max relative error {worst:.2e} over 100 random nets"),
    )
}

fn prune_instance(seed: u64, g_scale: f64, spd_n: usize, shift: f64) -> [Vec<Vec<f64>>; 4] {
    let mut rng = Rng::new(seed);
    let w = random_rows(4, 4, &mut rng);
    let g = random_rows(4, 4, &mut rng)
        .into_iter()
        .map(|r| r.into_iter().map(|x| g_scale * x).collect())
        .collect();
    let l = random_spd(4, spd_n, shift, &mut rng);
    let r = random_spd(4, spd_n, shift, &mut rng);
    [w, g, l, r]
}

fn greedy_matches(inst: &[Vec<Vec<f64>>; 4], k: usize) -> bool {
    let [w, g, l, r] = inst;
    let (_, got) = greedy_prune(
        &from_rows(w),
        &from_rows(g),
        &from_rows(l),
        &from_rows(r),
        k,
        PruneMode::Element,
    )
    .unwrap();
    let best = exhaustive_prune(w, g, l, r, k);
    (got - best).abs() <= 1e-10 * best.abs().max(1.0)
}

fn pruning() -> Outcome {
    let mut matched = 0;
    for seed in 0..20u64 {
        let inst = prune_instance(seed, 0.1, 8, 1.0);
        if (1..=2).all(|k| greedy_matches(&inst, k)) {
            matched += 1;
        }
    }
    let mut rng = Rng::new(1000);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let m = 1 + rng.below(6);
        let n = 1 + rng.below(6);
        let delta = random_rows(m, n, &mut rng);
        let g = random_rows(m, n, &mut rng);
        let l = random_spd(m, m + 1, 0.1, &mut rng);
        let r = random_spd(n, n + 1, 0.1, &mut rng);
        let got =
            taylor_predicted_loss(0.0, &from_rows(&delta), &from_rows(&g), &from_rows(&l), &from_rows(&r)).unwrap();
        worst = worst.max((got - dense_taylor(&delta, &g, &l, &r)).abs());
    }
    let hard_misses = (0..200u64)
        .filter(|&s| !greedy_matches(&prune_instance(s, 0.3, 6, 0.2), 2))
        .count();
    Outcome::new(
        matched == 20 && worst <= 1e-10,
        format!("greedy optimal on {matched}/20 instances for k=1,2; Taylor vs dense Kronecker {worst:.2e}"),
    )
    .info(format!(
        "weakly damped factors with larger gradients: greedy misses the k=2 optimum on {hard_misses}/200"
    ))
}

fn workers() -> Outcome {
    let d = 8;
    let data = autoencoder_data(d, 4, 2);
    let specs = [
        LayerSpec::new(d, d, Activation::Tanh, true),
        LayerSpec::new(d, d, Activation::Identity, true),
    ];
    let net = Network::init(&specs, &mut Rng::new(2)).unwrap();
    let opt = mkor(&net, 0.01, 3);
    let mut one = Simulation::new(net.clone(), opt.clone(), vec![data.clone()], 8, LossKind::Mse).unwrap();
    let mut two = Simulation::new(net, opt, vec![data.clone(), data], 8, LossKind::Mse).unwrap();
    let mut identical = true;
    let mut tallies = Vec::new();
    for _ in 0..40 {
        let a = one.step().unwrap();
        let b = two.step().unwrap();
        identical &= one.nets[0] == two.nets[0] && two.nets[0] == two.nets[1] && a.loss.to_bits() == b.loss.to_bits();
        if b.cost.synced {
            tallies.push(b.cost.comm_elements);
        }
    }
    let expected = (2 * d * specs.len()) as u64;
    let exact = !tallies.is_empty() && tallies.iter().all(|&t| t == expected);
    Outcome::new(
        identical && exact,
        format!(
            "trajectories bitwise equal: {identical}; {} syncs, elements per sync {:?} (expected {expected})",
            tallies.len(),
            tallies.first()
        ),
    )
}

fn lr_robustness() -> Outcome {
    let data = synth_dataset(
        &SynthSpec {
            kind: SynthKind::GaussianBlobs,
            n: 400,
            dim: 8,
            classes: 4,
            sigma: 1.0,
            center_scale: 2.0,
            ..SynthSpec::default()
        },
        3,
    )
    .unwrap();
    let specs = [
        LayerSpec::new(8, 32, Activation::Tanh, true),
        LayerSpec::new(32, 4, Activation::Identity, true),
    ];
    let net = Network::init(&specs, &mut Rng::new(5)).unwrap();
    let threshold = 0.1;
    let loss = LossKind::SoftmaxCrossEntropy;
    let last = |v: Vec<f64>| *v.last().unwrap();
    let mut converged = 0;
    let mut cells = Vec::new();
    let mut sgd_at_1 = f64::NAN;
    for lr in [10.0, 1.0, 0.1, 0.01] {
        let m = last(full_loss_trace(&data, net.clone(), mkor(&net, lr, 10), 1000, loss));
        let s = last(full_loss_trace(
            &data,
            net.clone(),
            Optimizer::Sgd(SgdMomentum::new(lr, 0.9)),
            1000,
            loss,
        ));
        if m.is_finite() && m < threshold {
            converged += 1;
        }
        if lr == 1.0 {
            sgd_at_1 = s;
        }
        cells.push(format!("lr {lr}: MKOR {m:.3e} SGD {s:.3e}"));
    }
    let sgd_fails = !(sgd_at_1.is_finite() && sgd_at_1 < threshold);
    Outcome::new(
        converged >= 3 && sgd_fails,
        format!("MKOR below {threshold} on {converged}/4 learning rates; SGD at lr 1 fails to converge: {sgd_fails}"),
    )
    .info(cells.join("; "))
}
