//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use nonsmooth::blowup::{
    critical_root, directional_blowup, polar_directional_check, r_region_scan, reduced_rhs, PolarSample, RClass,
};
use nonsmooth::ccomb::{c_classify, c_persistence_sweep, CKind, ContinuousCombination, LambdaSeed};
use nonsmooth::equilibria::{
    eigenvalues_small, find_periodic_orbit, hausdorff, newton_solve, persistence_sweep_delta, Direction, NewtonOptions,
    PeriodicOptions, Section,
};
use nonsmooth::expr::{parse, Func};
use nonsmooth::flow::{integrate_filippov, integrate_smooth, Mode, OdeOptions};
use nonsmooth::nsff::NonsmoothSlowFast;
use nonsmooth::psys::{classify_point, scan_sigma, sliding_vf, PiecewiseField, PiecewiseSystem, Segment, SigmaKind};
use nonsmooth::regularize::{builtin_psi, st_regularize, PhiKind, Transition};
use num_complex::Complex64;
use rand::{rngs::StdRng, Rng, SeedableRng};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn exblow() -> PiecewiseSystem {
    PiecewiseSystem::new(&["x2-1", "-1"], &["x2", "1"], "x1").unwrap()
}

fn saddle_system() -> PiecewiseSystem {
    PiecewiseSystem::new(&["0", "-1"], &["x1", "-x2+1"], "x2").unwrap()
}

fn spiral_system() -> PiecewiseSystem {
    PiecewiseSystem::new(
        &["0", "2*x1+2*x2*(sqrt(x1^2+x2^2)-1)", "-1"],
        &["-2*x2+2*x1*(sqrt(x1^2+x2^2)-1)", "0", "1"],
        "x3",
    )
    .unwrap()
}

fn ex2() -> NonsmoothSlowFast {
    NonsmoothSlowFast::new(&["x2-1", "-1+eps"], &["x1+x2+eps", "x2+1-eps"], "y", "x1").unwrap()
}

fn ex1() -> ContinuousCombination {
    ContinuousCombination::new(
        &["x2-1+eps", "-1+eps"],
        &["x2+eps", "1+eps"],
        &["lambda^2*(x2+eps)-(lambda+1)/2", "lambda^2-lambda-1+eps"],
        Some("y"),
    )
    .unwrap()
}

fn cubic() -> Transition {
    Transition::Monotone(PhiKind::Cubic)
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn ensure(ok: bool, msg: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn c1_sliding_formulas() -> Outcome {
    let s = exblow();
    let mut worst_a = 0.0f64;
    for i in 0..200 {
        let x2 = (i as f64 + 0.5) / 200.0;
        let v = sliding_vf(&s, &[0.0, x2]).map_err(e)?;
        worst_a = worst_a.max(norm_diff(&v, &[0.0, 1.0 - 2.0 * x2]));
    }
    let s = saddle_system();
    let mut worst_b = 0.0f64;
    for i in 0..200 {
        let x = -1.0 + 2.0 * (i as f64 + 0.5) / 200.0;
        let v = sliding_vf(&s, &[x, 0.0]).map_err(e)?;
        worst_b = worst_b.max(norm_diff(&v, &[x / 2.0, 0.0]));
    }
    ensure(
        worst_a <= 1e-12 && worst_b <= 1e-12,
        format!("errors {worst_a:e}, {worst_b:e}"),
    )?;
    Ok(format!("max errors {worst_a:.1e}, {worst_b:.1e}"))
}

fn sliding_ends(sys: &dyn PiecewiseField, seg: &Segment, k: usize) -> Result<(f64, f64), String> {
    let scan = scan_sigma(sys, seg, 300).map_err(e)?;
    let sl: Vec<_> = scan.intervals.iter().filter(|i| i.kind.is_sliding()).collect();
    ensure(sl.len() == 1, format!("{} sliding intervals", sl.len()))?;
    Ok((sl[0].start[k], sl[0].end[k]))
}

fn c2_region_geometry() -> Outcome {
    let seg = Segment::along(&[0.0, 0.0], 1, -1.0, 2.0);
    let (a, b) = sliding_ends(&exblow(), &seg, 1)?;
    ensure(
        a.abs() <= 1e-8 && (b - 1.0).abs() <= 1e-8,
        format!("exblow ends {a}, {b}"),
    )?;
    let red = ex2().reduce(0.0);
    let (c, d) = sliding_ends(&red, &seg, 1)?;
    ensure(
        c.abs() <= 1e-8 && (d - 1.0).abs() <= 1e-8,
        format!("ex2 folds {c}, {d}"),
    )?;
    Ok(format!("exblow ({a:.2e}, {b:.12}); ex2 folds ({c:.2e}, {d:.12})"))
}

fn c3_persistence_delta() -> Outcome {
    let rows = persistence_sweep_delta(&saddle_system(), cubic(), &[0.0, 0.0], &[1e-1, 1e-2, 1e-3]).map_err(e)?;
    for row in rows {
        let d = row.param;
        let rep = row.outcome.map_err(e)?;
        let y0 = rep.point[1];
        let resid = (PhiKind::Cubic.eval(y0 / d) - y0 / (y0 - 2.0)).abs();
        ensure(rep.point[0].abs() <= 1e-12, format!("delta {d}: x1 = {}", rep.point[0]))?;
        ensure(resid <= 1e-10, format!("delta {d}: transition residual {resid:e}"))?;
        let half = rep
            .eigenvalues
            .iter()
            .any(|l| (l.re - 0.5).abs() <= 1e-9 && l.im.abs() <= 1e-9);
        let neg = rep.eigenvalues.iter().any(|l| l.re < 0.0);
        ensure(half && neg, format!("delta {d}: eigenvalues {:?}", rep.eigenvalues))?;
        ensure(rep.is_saddle(), format!("delta {d}: not a saddle"))?;
        let norm = rep.point.iter().map(|v| v * v).sum::<f64>().sqrt();
        ensure(norm <= d, format!("delta {d}: |Q| = {norm}"))?;
    }
    Ok("saddle with eigenvalue 1/2 at every delta".into())
}

fn c4_persistence_eps() -> Outcome {
    let p0 = [0.0, (5f64.sqrt() - 1.0) / 2.0, 0.0];
    let rows = ex2().persistence_sweep_eps(&p0, &[0.1, 0.05, 0.01]).map_err(e)?;
    let mut worst = 0.0f64;
    for row in rows {
        let eps = row.param;
        let rep = row.outcome.map_err(e)?;
        let closed = (-1.0 + 2.0 * eps + (5.0 - 12.0 * eps + 8.0 * eps * eps).sqrt()) / 2.0;
        let err = (rep.point[1] - closed).abs();
        worst = worst.max(err);
        ensure(err <= 1e-10, format!("eps {eps}: error {err:e}"))?;
        let shift = (rep.point[1] - p0[1]).abs();
        ensure(shift <= 0.5 * eps, format!("eps {eps}: shift {shift}"))?;
    }
    Ok(format!("max error {worst:.1e}"))
}

fn c5_c_sliding() -> Outcome {
    let cc = ex1();
    let closed = |eps: f64, sign: f64| {
        (-4.0 * eps.powi(3) + 8.0 * eps * eps - 5.0 * eps + 2.0 + sign * (5.0 * eps * eps - 4.0 * eps.powi(3)).sqrt())
            / (4.0 * (eps * eps - 2.0 * eps + 1.0))
    };
    let p0 = [0.0, 0.5, 0.0];
    let mut worst = 0.0f64;
    for (seed, sign) in [
        (LambdaSeed::Branch(0), 1.0),
        (LambdaSeed::Value((1.0 + 5f64.sqrt()) / 2.0), -1.0),
    ] {
        for row in c_persistence_sweep(&cc, &p0, seed, &[0.1, 0.01]).map_err(e)? {
            let ce = row.outcome.map_err(e)?;
            let err = (ce.report.point[1] - closed(row.param, sign)).abs();
            worst = worst.max(err);
            ensure(err <= 1e-9, format!("eps {}: error {err:e}", row.param))?;
        }
    }
    let cl = c_classify(&cc, &[0.0, 1.0], 0.0, 0.0).map_err(e)?;
    let l: Vec<f64> = cl.branches.iter().map(|b| b.lambda).collect();
    ensure(
        l.len() == 2 && (l[0] - 1.0).abs() <= 1e-10 && (l[1] + 0.5).abs() <= 1e-10,
        format!("branches at x2 = 1: {l:?}"),
    )?;
    Ok(format!("max error {worst:.1e}; branches {{1, -1/2}}"))
}

fn c6_reduced_equals_sliding() -> Outcome {
    let sys = exblow();
    let mut worst = 0.0f64;
    for phi in PhiKind::ALL {
        let fam = st_regularize(exblow(), Transition::Monotone(phi)).map_err(e)?;
        let sfs = directional_blowup(&fam, 0).map_err(e)?;
        for i in 0..100 {
            let x2 = (i as f64 + 0.5) / 100.0;
            let want = sliding_vf(&sys, &[0.0, x2]).map_err(e)?;
            let roots = critical_root(&sfs, &[x2]).map_err(e)?;
            ensure(roots.len() == 1, format!("{} roots at x2 = {x2}", roots.len()))?;
            let got = reduced_rhs(&sfs, &roots[0]).map_err(e)?;
            worst = worst.max((got[0] - want[1]).abs());
        }
    }
    ensure(worst <= 1e-10, format!("mismatch {worst:e}"))?;
    Ok(format!("max mismatch {worst:.1e}"))
}

fn c7_inclusions() -> Outcome {
    let sys = exblow();
    let seg = Segment::along(&[0.0, 0.0], 1, -1.0, 2.0);
    let mut violations = 0;
    let mut undetermined = 0;
    for psi in [cubic(), builtin_psi(0.0, -2.0, 1).map_err(e)?] {
        for s in r_region_scan(exblow(), psi, &seg, 300).map_err(e)? {
            let f = classify_point(&sys, &s.point).map_err(e)?.kind;
            if s.class == RClass::RSewing && f != SigmaKind::Sewing {
                violations += 1;
            }
            if f.is_sliding() && s.class != RClass::RSliding {
                violations += 1;
            }
            if s.class == RClass::Undetermined {
                undetermined += 1;
            }
        }
    }
    let cc = ex1();
    let ends = cc.slice(0.0, 0.0);
    let fil = ends.endpoint_system();
    for i in 0..300 {
        let p = [0.0, -1.0 + 3.0 * (i as f64 + 0.5) / 300.0];
        let f = classify_point(fil, &p).map_err(e)?.kind;
        let c = c_classify(&cc, &p, 0.0, 0.0).map_err(e)?.kind;
        if c == CKind::CSewing && f != SigmaKind::Sewing {
            violations += 1;
        }
        if f.is_sliding() && c != CKind::CSliding {
            violations += 1;
        }
    }
    ensure(violations == 0, format!("{violations} violations"))?;
    Ok(format!("0 violations ({undetermined} undetermined r-samples)"))
}

fn c8_blowup_identity() -> Outcome {
    let mut rng = StdRng::seed_from_u64(42);
    let samples: Vec<PolarSample> = (0..1000)
        .map(|_| PolarSample {
            x: (0..2).map(|_| rng.gen_range(-5.0..5.0)).collect(),
            theta: rng.gen_range(1e-3..PI - 1e-3),
            r: rng.gen_range(0.0..1.0),
        })
        .collect();
    let worst = polar_directional_check(&samples).map_err(e)?;
    ensure(worst <= 1e-14, format!("max error {worst:e}"))?;
    Ok(format!("max error {worst:.1e}"))
}

fn c9_filippov_dynamics() -> Outcome {
    let tr = integrate_filippov(&exblow(), &[-0.5, 0.2], (0.0, 20.0), &OdeOptions::default()).map_err(e)?;
    let end = tr.final_state().ok_or("empty trajectory")?;
    ensure(
        (end[1] - 0.5).abs() <= 1e-6 && end[0].abs() <= 1e-9,
        format!("end state ({}, {})", end[0], end[1]),
    )?;
    let modes = tr.modes();
    ensure(
        modes == [Mode::FlowMinus, Mode::Sliding],
        format!(
            "end state ({:.3e}, {:.9}) reached; mode sequence {:?}, expected [FlowMinus, Sliding]",
            end[0], end[1], modes
        ),
    )?;
    Ok("pseudo-equilibrium reached with modes [FlowMinus, Sliding]".into())
}

fn c10_convergence() -> Outcome {
    let sys = exblow();
    let fam = st_regularize(exblow(), cubic()).map_err(e)?;
    let opts = OdeOptions::tol(1e-9, 1e-12);
    let mut report = vec![];
    for delta in [1e-1, 1e-2, 1e-3] {
        let f = |p: &[f64]| fam.eval(p, delta);
        let step = delta / 4.0;
        let n = (1.0 / step).round() as usize;
        let mut band = vec![];
        for i in 0..=n {
            let x2 = i as f64 * step;
            let tr = integrate_smooth(&f, &[0.0, x2], (0.0, 4.0 * delta), &opts).map_err(e)?;
            let end = tr.final_state().ok_or("empty trajectory")?.to_vec();
            if (0.3..=0.7).contains(&end[1]) {
                band.push(end);
            }
        }
        let m = (0.4 / step).round() as usize;
        let sigma: Vec<Vec<f64>> = (0..=m).map(|i| vec![0.0, 0.3 + i as f64 * step]).collect();
        let d = hausdorff(&band, &sigma).map_err(e)?;
        ensure(d <= delta, format!("delta {delta}: Hausdorff {d:e}"))?;
        report.push(format!("{delta:e}: {d:.2e}"));
    }
    let delta = 1e-3;
    let f = |p: &[f64]| fam.eval(p, delta);
    let reg = integrate_smooth(&f, &[-0.5, 0.2], (0.0, 20.0), &opts).map_err(e)?;
    let fil = integrate_filippov(&sys, &[-0.5, 0.2], (0.0, 20.0), &OdeOptions::default()).map_err(e)?;
    let gap = norm_diff(reg.final_state().ok_or("empty")?, fil.final_state().ok_or("empty")?);
    ensure(gap <= 5e-2, format!("endpoint gap {gap:e}"))?;
    Ok(format!("Hausdorff {}; endpoint gap {gap:.2e}", report.join(", ")))
}

fn c11_periodic_orbit() -> Outcome {
    let fam = st_regularize(spiral_system(), cubic()).map_err(e)?;
    let f = |p: &[f64]| fam.eval(p, 1e-3);
    let sec = Section {
        coord: 1,
        value: 0.0,
        direction: Direction::Increasing,
    };
    let rep = find_periodic_orbit(&f, sec, &[1.1, 0.0, 0.0], &PeriodicOptions::default()).map_err(e)?;
    let r = rep.fixed_point[0].hypot(0.0);
    ensure((r - 1.0).abs() <= 0.1, format!("radius {r}"))?;
    Ok(format!(
        "radius {r:.9}, period {:.6}, residual {:.1e}",
        rep.return_time, rep.residual
    ))
}

fn random_expr(rng: &mut StdRng, depth: u32) -> String {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..3) {
            0 => format!("x{}", rng.gen_range(1..4)),
            1 => format!("{}", rng.gen_range(0..20)),
            _ => format!("{:.3}", rng.gen_range(0.0..10.0)),
        };
    }
    let a = random_expr(rng, depth - 1);
    match rng.gen_range(0..8) {
        0 => format!("-{a}"),
        1 => format!("{}({a})", Func::ALL[rng.gen_range(0..Func::ALL.len())].name()),
        k => {
            let b = random_expr(rng, depth - 1);
            let op = ["+", "-", "*", "/", "^", "+"][k - 2];
            if rng.gen_bool(0.5) {
                format!("({a}){op}({b})")
            } else {
                format!("{a}{op}{b}")
            }
        }
    }
}

fn c12_properties() -> Outcome {
    let mut rng = StdRng::seed_from_u64(42);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(2..=4);
        let a: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect())
            .collect();
        let ev = eigenvalues_small(&a).map_err(e)?;
        let trace: f64 = (0..n).map(|i| a[i][i]).sum();
        let sum: Complex64 = ev.iter().sum();
        let scale = 1.0 + a.iter().flatten().map(|v| v.abs()).sum::<f64>();
        worst = worst.max((sum.re - trace).abs() / scale).max(sum.im.abs() / scale);
        for l in &ev {
            let m: Vec<Vec<Complex64>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| Complex64::new(a[i][j], 0.0) - if i == j { *l } else { Complex64::new(0.0, 0.0) })
                        .collect()
                })
                .collect();
            worst = worst.max(complex_det(m).norm() / scale.powi(n as i32));
        }
    }
    ensure(worst <= 1e-10, format!("eigen residual {worst:e}"))?;

    let g = |x: &[f64]| Ok(vec![1.0 - x[0] - x[0] * x[0]]);
    let r = newton_solve(&g, &[0.5], &NewtonOptions::default()).map_err(e)?;
    let root = (5f64.sqrt() - 1.0) / 2.0;
    let errs: Vec<f64> = r
        .history
        .iter()
        .map(|x| (x[0] - root).abs())
        .filter(|v| *v > 1e-15)
        .collect();
    ensure(errs.len() >= 2, "too few Newton iterates".into())?;
    let (a, b) = (errs[errs.len() - 2], errs[errs.len() - 1]);
    ensure(b <= 10.0 * a * a, format!("Newton tail {a:e} -> {b:e}"))?;

    for _ in 0..300 {
        let src = random_expr(&mut rng, 4);
        let tree = parse(&src).map_err(|err| format!("{src}: {err}"))?;
        let again = parse(&tree.to_string()).map_err(|err| format!("{tree}: {err}"))?;
        ensure(again == tree, format!("round trip changed {src}"))?;
    }

    for args in [
        vec!["nonsmooth", "classify", "ex-exblow"],
        vec!["nonsmooth", "sweep-eps", "ex-ex2"],
        vec!["nonsmooth", "check", "ex-ex1"],
    ] {
        let a = nonsmooth::cli::run(args.clone());
        let b = nonsmooth::cli::run(args.clone());
        ensure(a.code == 0, format!("{args:?} exited with {}: {}", a.code, a.stderr))?;
        ensure(a.stdout == b.stdout, format!("{args:?} output differs between runs"))?;
    }
    Ok(format!(
        "eigen residual {worst:.1e}; Newton tail {a:.1e} -> {b:.1e}; 300 parser round trips; CLI byte-identical"
    ))
}

fn complex_det(mut m: Vec<Vec<Complex64>>) -> Complex64 {
    let n = m.len();
    let mut det = Complex64::new(1.0, 0.0);
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| m[i][c].norm().total_cmp(&m[j][c].norm()))
            .unwrap();
        if m[p][c].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        det *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            let pivot = m[c].clone();
            for (x, v) in m[r].iter_mut().zip(pivot).skip(c) {
                *x -= f * v;
            }
        }
    }
    det
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("sliding-field formulas", c1_sliding_formulas),
        ("region geometry", c2_region_geometry),
        ("persistence in delta", c3_persistence_delta),
        ("persistence in eps", c4_persistence_eps),
        ("c-sliding persistence", c5_c_sliding),
        ("reduced flow equals sliding flow", c6_reduced_equals_sliding),
        ("region inclusions", c7_inclusions),
        ("blow-up identity", c8_blowup_identity),
        ("Filippov dynamics", c9_filippov_dynamics),
        ("regularized-to-Filippov convergence", c10_convergence),
        ("periodic-orbit persistence", c11_periodic_orbit),
        ("property suites", c12_properties),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.2}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
