//! Acceptance criteria, one line each. Runs under its own harness so every
//! line is printed; the process fails if any criterion fails.

mod common;

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use awtv::operators::{
    balanced_pixel_size, dot, grad_adjoint_into, grad_into, operator_norm, FanBeamGeometry,
    FanBeamOperator, GradientField, Image, Sinogram,
};
use awtv::pipelines::{
    noise_stability_sweep, preset, reconstructor_stability_sweep, run_method, Experiment,
    MethodKind, Perturbation, SweepReport,
};
use awtv::simulation::{make_phantom, relative_error, NoiseSpec, PhantomSpec};
use awtv::solver::{prox_fidelity_dual, prox_tv_dual, solve_global_tv, SolverConfig};
use awtv::weights::{adaptive_weight, WeightField};

use common::{grad_loops, instance, smoothed_tv_oracle, Dense};

type Outcome = Result<String, String>;

struct Suite {
    failures: usize,
    feasibility_violations: usize,
    solves: usize,
}

impl Suite {
    fn run(&mut self, name: &str, limit: Duration, f: impl FnOnce(&mut Suite) -> Outcome) {
        let t = Instant::now();
        let outcome = f(self);
        let elapsed = t.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= limit => (true, d),
            Ok(d) => (false, format!("{d}; over the time limit")),
            Err(d) => (false, d),
        };
        if !ok {
            self.failures += 1;
        }
        println!(
            "{} {name}: {detail} [{:.1} s / {} s]",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }

    fn record(&mut self, violations: usize) {
        self.feasibility_violations += violations;
        self.solves += 1;
    }

    fn record_sweep(&mut self, s: &SweepReport) {
        self.feasibility_violations += s.feasibility_violations;
        self.solves += s.points.iter().filter(|p| p.level > 0.0).count() + 1;
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn adjoint_suite(_: &mut Suite) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let side = 128;
    let mut worst_k: f64 = 0.0;
    for views in [45, 90] {
        let g = FanBeamGeometry::for_image(side, side, 1.0, views).map_err(|e| e.to_string())?;
        let op = FanBeamOperator::new(g.clone(), side, side, 1.0).map_err(|e| e.to_string())?;
        for _ in 0..100 {
            let x = Image::new(side, side, random_vec(&mut rng, side * side), 1.0).unwrap();
            let y = Sinogram::new(g.clone(), random_vec(&mut rng, g.num_measurements())).unwrap();
            let a = dot(op.project(&x).unwrap().data(), y.data());
            let b = dot(x.data(), op.backproject(&y).unwrap().data());
            worst_k = worst_k.max((a - b).abs() / a.abs().max(b.abs()));
        }
    }
    let n = side * side;
    let mut worst_d: f64 = 0.0;
    for _ in 0..100 {
        let x = random_vec(&mut rng, n);
        let (qh, qv) = (random_vec(&mut rng, n), random_vec(&mut rng, n));
        let (mut dh, mut dv, mut dtq) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        grad_into(&x, side, side, &mut dh, &mut dv);
        grad_adjoint_into(&qh, &qv, side, side, &mut dtq);
        let a = dot(&dh, &qh) + dot(&dv, &qv);
        let b = dot(&x, &dtq);
        worst_d = worst_d.max((a - b).abs() / a.abs().max(b.abs()));
    }
    let detail = format!("K/K^T worst {worst_k:.1e} (< 1e-6), D/D^T worst {worst_d:.1e} (< 1e-10)");
    ensure(worst_k < 1e-6 && worst_d < 1e-10, || detail.clone())?;
    Ok(detail)
}

fn norm_oracle(_: &mut Suite) -> Outcome {
    let (side, views) = (16, 10);
    let g = FanBeamGeometry::for_image(side, side, 1.0, views).unwrap();
    let op = FanBeamOperator::new(g, side, side, 1.0).unwrap();
    let n = side * side;
    let k = Dense::of(&op);
    let mut m = DMatrix::<f64>::zeros(k.rows + 2 * n, n);
    for c in 0..n {
        for r in 0..k.rows {
            m[(r, c)] = k.a[r * n + c];
        }
        let mut e = vec![0.0; n];
        e[c] = 1.0;
        let (dh, dv) = grad_loops(&e, side, side);
        for i in 0..n {
            m[(k.rows + i, c)] = dh[i];
            m[(k.rows + n + i, c)] = dv[i];
        }
    }
    let exact = m.singular_values().max();
    let est = operator_norm(&op, 500, 0);
    let rel = (est - exact).abs() / exact;
    let detail = format!("power {est:.6} vs SVD {exact:.6}, rel {rel:.1e} (< 1e-3)");
    ensure(rel < 1e-3, || detail.clone())?;
    Ok(detail)
}

fn weight_law(_: &mut Suite) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for i in 0..10_000 {
        let eta = 10f64.powf(rng.random_range(-6.0..0.0));
        let p = rng.random_range(0.0..1.0);
        let g = if i % 10 == 0 { 0.0 } else { eta * 10f64.powf(rng.random_range(-3.0..3.0)) };
        let w = adaptive_weight(g, eta, p);
        ensure(w > 0.0 && w <= 1.0, || format!("w = {w} outside (0, 1] at g={g}, eta={eta}, p={p}"))?;
        ensure((w == 1.0) == (g == 0.0), || format!("w = 1 iff g = 0 violated at g={g}, eta={eta}, p={p}"))?;
        let g2 = g * 1.5 + eta * 1e-3;
        let w2 = adaptive_weight(g2, eta, p);
        ensure(w2 < w, || format!("not strictly decreasing: w({g})={w}, w({g2})={w2}, eta={eta}, p={p}"))?;
    }
    let eta = 2e-5;
    let w = adaptive_weight(eta * 3f64.sqrt(), eta, 0.3);
    let err = (w - 0.5f64.powf(0.7)).abs();
    ensure(err < 1e-12, || format!("closed form off by {err:e}"))?;
    Ok(format!("10^4 triples ok; w(eta*sqrt3) - 0.5^0.7 = {err:.1e} (< 1e-12)"))
}

fn prox(_: &mut Suite) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let len = rng.random_range(1..50);
        let v = random_vec(&mut rng, len);
        let y: Vec<f64> = random_vec(&mut rng, len).iter().map(|a| 10.0 * a).collect();
        let sigma = 10f64.powf(rng.random_range(-3.0..3.0));
        let p = prox_fidelity_dual(&v, sigma, &y);
        // p minimises sigma (<p, y> + |p|^2 / 2) + |p - v|^2 / 2.
        for i in 0..len {
            let r = (p[i] - v[i]) + sigma * (y[i] + p[i]);
            let scale = v[i].abs() + sigma * y[i].abs() + 1.0;
            worst = worst.max(r.abs() / scale);
        }
    }
    ensure(worst < 1e-12, || format!("fidelity residual {worst:e}"))?;

    let n = 64;
    for _ in 0..1000 {
        let w = WeightField::from_values(8, 8, (0..n).map(|_| rng.random_range(1e-6..1.0)).collect()).unwrap();
        let lambda = 10f64.powf(rng.random_range(-3.0..1.0));
        let q: Vec<f64> = random_vec(&mut rng, 2 * n).iter().map(|a| a * 3.0).collect();
        let dx = GradientField::zeros(8, 8, 1.0);
        let out = prox_tv_dual(&q, 0.5, &w, lambda, &dx).unwrap();
        for i in 0..n {
            let mag = out[i].hypot(out[n + i]);
            ensure(mag <= lambda * w.data()[i] * (1.0 + 1e-15), || format!("|q_i| = {mag} > {}", lambda * w.data()[i]))?;
        }
    }
    let w = WeightField::ones(1, 1);
    let out = prox_tv_dual(&[3.0, 4.0], 1.0, &w, 1.0, &GradientField::zeros(1, 1, 1.0)).unwrap();
    let err = (out[0] - 0.6).abs().max((out[1] - 0.8).abs());
    ensure(err < 1e-12, || format!("3-4-5 case off by {err:e}"))?;
    Ok(format!("fidelity residual {worst:.1e} (< 1e-12); disks respected; 3-4-5 error {err:.1e}"))
}

fn solver_oracle(s: &mut Suite) -> Outcome {
    let inst = instance(&PhantomSpec::disk(32, 0.6), 20, 500);
    let lambda = 0.01;
    let zero = Image::zeros(32, 32, inst.gt.pixel_size());
    let cfg = SolverConfig::new(lambda, inst.norm).with_stop_tol(0.0);
    let a = solve_global_tv(&inst.op, &inst.y, &cfg, &zero, None).map_err(|e| e.to_string())?;
    let long = cfg.clone().with_max_iters(10 * cfg.max_iters);
    let b = solve_global_tv(&inst.op, &inst.y, &long, &zero, None).map_err(|e| e.to_string())?;
    s.record(a.feasibility_violations);
    s.record(b.feasibility_violations);
    let (fa, fb) = (a.final_objective().unwrap(), b.final_objective().unwrap());
    let rel = (fa - fb).abs() / fb;
    let dense = Dense::of(&inst.op);
    let x = smoothed_tv_oracle(&dense, inst.y.data(), 32, 32, lambda, &[1e-2, 1e-3, 1e-4, 1e-5]);
    let re = relative_error(&a.image, &inst.gt.with_data(x).unwrap()).unwrap();
    let detail = format!(
        "objective vs {}-iteration run rel {rel:.1e} (< 1e-4); RE to smoothed-TV oracle {re:.1e} (< 1e-3)",
        long.max_iters
    );
    ensure(rel < 1e-4 && re < 1e-3, || detail.clone())?;
    Ok(detail)
}

fn synthetic_experiment(side: usize, views: usize) -> Experiment {
    let ps = balanced_pixel_size(side, side, views, 0).unwrap();
    let gt = make_phantom(&PhantomSpec::synthetic(side)).unwrap().with_pixel_size(ps).unwrap();
    let g = FanBeamGeometry::for_image(side, side, ps, views).unwrap();
    Experiment::new(gt, g, 0).unwrap()
}

fn table1(s: &mut Suite) -> Outcome {
    let exp = synthetic_experiment(256, 45);
    let mut lines = Vec::new();
    let mut ok = true;
    for name in ["synthetic-nu005", "synthetic-nu02"] {
        let p = preset(name).map_err(|e| e.to_string())?;
        let noise = NoiseSpec::new(p.nu, 1).unwrap();
        let mut run = |kind: MethodKind| -> Result<_, String> {
            let m = p.method(kind);
            let cfg = exp.solver_config(m.lambda.unwrap());
            let r = run_method(&m, &exp, &noise, &cfg).map_err(|e| e.to_string())?;
            s.record(r.result.feasibility_violations);
            Ok(r.final_metrics)
        };
        let gt = run(MethodKind::GtWl1)?;
        let fbp = run(MethodKind::FbpWl1)?;
        let tv = run(MethodKind::GlobalTv)?;
        ok &= gt.ssim >= 0.99 && gt.re < fbp.re && gt.re < tv.re;
        lines.push(format!(
            "nu={}: GT-Wl1 SSIM {:.4} RE {:.4}, FBP-Wl1 RE {:.4}, global TV RE {:.4}",
            p.nu, gt.ssim, gt.re, fbp.re, tv.re
        ));
    }
    let detail = lines.join("; ");
    ensure(ok, || detail.clone())?;
    Ok(detail)
}

fn theorem3(s: &mut Suite) -> Outcome {
    let exp = synthetic_experiment(128, 45);
    let p = preset("synthetic-nu02").unwrap();
    let m = p.method(MethodKind::GtWl1);
    let cfg = exp.solver_config(m.lambda.unwrap()).with_stop_tol(0.0);
    let nus = [0.02, 0.01, 0.005, 0.0025, 0.0];
    let sweep = noise_stability_sweep(&exp, &m, &nus, 1, &cfg).map_err(|e| e.to_string())?;
    s.record_sweep(&sweep);
    let pts: Vec<(f64, f64)> = sweep.points.iter().filter(|q| q.level > 0.0).map(|q| (q.level, q.distance)).collect();
    let decreasing = pts.windows(2).all(|w| w[1].1 < 1.1 * w[0].1);
    // Least-squares line through (nu, distance), evaluated at nu = 0.
    let k = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / k, sy / k);
    let slope = pts.iter().map(|&(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / pts.iter().map(|&(x, _)| (x - mx) * (x - mx)).sum::<f64>();
    let intercept = my - slope * mx;
    let largest = pts.iter().map(|q| q.1).fold(0.0, f64::max);
    let dists: Vec<String> = pts.iter().map(|q| format!("{:.2e}", q.1)).collect();
    let detail = format!(
        "distances [{}]; nu->0 extrapolation {intercept:.2e} vs 0.5 x largest {:.2e}",
        dists.join(", "),
        0.5 * largest
    );
    ensure(decreasing && intercept.abs() < 0.5 * largest, || detail.clone())?;
    Ok(detail)
}

fn theorem4(s: &mut Suite) -> Outcome {
    let exp = synthetic_experiment(128, 45);
    let p = preset("synthetic-nu02").unwrap();
    let cfg = exp.solver_config(p.lambda_weighted).with_stop_tol(0.0);
    let noise = NoiseSpec::new(p.nu, 1).unwrap();
    let eps = [0.2, 0.1, 0.05, 0.01];
    let mut lines = Vec::new();
    let mut ok = true;
    for kind in [Perturbation::Image, Perturbation::Gradient] {
        let sweep = reconstructor_stability_sweep(&exp, &noise, p.eta, p.p, &eps, kind, 2, &cfg)
            .map_err(|e| e.to_string())?;
        s.record_sweep(&sweep);
        let d: Vec<f64> = sweep.points.iter().map(|q| q.distance).collect();
        ok &= d.windows(2).all(|w| w[1] <= 1.1 * w[0]);
        let ds: Vec<String> = d.iter().map(|v| format!("{v:.2e}")).collect();
        lines.push(format!("{kind:?} [{}]", ds.join(", ")));
    }
    let detail = lines.join("; ");
    ensure(ok, || detail.clone())?;
    Ok(detail)
}

fn determinism(_: &mut Suite) -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "seed = 5\n[phantom]\nkind = \"synthetic\"\nsize = 64\n[geometry]\nviews = 45\n[noise]\nnu = 0.02\n\
         [method]\nkind = \"fbp-wl1\"\nlambda = 3e-3\neta = 2e-5\np = 0.3\n[solver]\nmax_iters = 200\n",
    )
    .unwrap();
    let run = |cmd: &str, out: &str| -> Result<(), String> {
        let o = Command::new(env!("CARGO_BIN_EXE_awtv"))
            .args([cmd, "--config", cfg.to_str().unwrap(), "--seed", "9", "--out", out])
            .current_dir(dir.path())
            .output()
            .map_err(|e| e.to_string())?;
        ensure(o.status.success(), || String::from_utf8_lossy(&o.stderr).into_owned())
    };
    for out in ["a", "b"] {
        run("simulate", out)?;
        run("reconstruct", out)?;
    }
    let mut names: Vec<_> = fs::read_dir(dir.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    for name in &names {
        let read = |d: &str| fs::read(Path::new(dir.path()).join(d).join(name)).unwrap();
        ensure(read("a") == read("b"), || format!("{} differs", name.to_string_lossy()))?;
    }
    Ok(format!("{} files byte-identical across two seeded runs", names.len()))
}

fn main() {
    let mut suite = Suite {
        failures: 0,
        feasibility_violations: 0,
        solves: 0,
    };
    let min = |m: u64| Duration::from_secs(60 * m);
    suite.run("adjoint suite (128x128, 45/90 views)", Duration::from_secs(30), adjoint_suite);
    suite.run("operator norm vs dense SVD (16x16, 10 views)", Duration::from_secs(10), norm_oracle);
    suite.run("weight law", Duration::from_secs(1), weight_law);
    suite.run("prox correctness", Duration::from_secs(5), prox);
    suite.run("solver oracle (32x32 disk, 20 views)", min(2), solver_oracle);
    suite.run("table 1 ordering (256x256 synthetic, 45 views)", min(15), table1);
    suite.run("noise stability sweep (128x128)", min(15), theorem3);
    suite.run("reconstructor stability sweeps (128x128)", min(15), theorem4);
    suite.run("determinism (CLI)", min(5), determinism);
    let (v, n) = (suite.feasibility_violations, suite.solves);
    suite.run("primal/dual feasibility at recorded iterations", Duration::from_secs(1), |_| {
        let detail = format!("{v} violations over {n} solves");
        ensure(v == 0 && n > 0, || detail.clone())?;
        Ok(detail)
    });
    println!("acceptance: {} failed", suite.failures);
    if suite.failures > 0 {
        std::process::exit(1);
    }
}
