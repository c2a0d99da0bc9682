//! Invariant checks run by the `check` command.

use rand::{rngs::StdRng, Rng, SeedableRng};

use super::commands::{classify, family, num, samples, view, Csv, Loaded};
use super::config::{load_str, BuiltSystem};
use super::{CliError, OutputFile, RangeArgs, SliceArgs};
use crate::blowup::{critical_root, directional_blowup, reduced_rhs};
use crate::ccomb::{c_classify, c_sliding_vf, CKind};
use crate::expr::parse;
use crate::linalg::{dist, dot, norm2};
use crate::psys::{classify_point, convex_coefficient, sliding_vf, PiecewiseField, PiecewiseSystem, SigmaKind};
use crate::regularize::{st_regularize, PhiKind, Transition};

struct Table {
    csv: Csv,
    pass: usize,
    fail: usize,
}

impl Table {
    fn record(&mut self, name: &str, ok: bool, detail: String) {
        if ok {
            self.pass += 1;
        } else {
            self.fail += 1;
        }
        self.csv.row(vec![
            name.into(),
            if ok { "PASS" } else { "FAIL" }.into(),
            detail.replace([',', '\n'], ";"),
        ]);
    }

    fn result(&mut self, name: &str, r: std::result::Result<String, String>) {
        match r {
            Ok(d) => self.record(name, true, d),
            Err(d) => self.record(name, false, d),
        }
    }
}

type Check = std::result::Result<String, String>;

fn bound(name: &str, value: f64, limit: f64) -> Check {
    if value <= limit {
        Ok(format!("{name} = {} <= {}", num(value), num(limit)))
    } else {
        Err(format!("{name} = {} > {}", num(value), num(limit)))
    }
}

pub(crate) fn run_checks(l: &Loaded, range: &RangeArgs, seed: u64) -> Result<(OutputFile, usize, usize), CliError> {
    let mut t = Table {
        csv: Csv::new(&["check".into(), "status".into(), "detail".into()]),
        pass: 0,
        fail: 0,
    };
    let mut rng = StdRng::seed_from_u64(seed);
    let (_, pts) = samples(range, &l.config, 200)?;
    let v = view(&l.system, 0.0, 0.0);

    t.result(
        "config-roundtrip",
        match load_str(&l.text) {
            Ok(c) if c == l.config => Ok("reloaded config is identical".into()),
            Ok(_) => Err("reloaded config differs".into()),
            Err(e) => Err(e.to_string()),
        },
    );
    t.result("expression-roundtrip", expr_roundtrip(l));
    t.result("determinism", {
        let a = classify(l, range, &SliceArgs::default());
        let b = classify(l, range, &SliceArgs::default());
        match (a, b) {
            (Ok(a), Ok(b)) if a == b => Ok("classify output is byte-identical".into()),
            (Ok(_), Ok(_)) => Err("classify output differs between runs".into()),
            _ => Err("classify failed".into()),
        }
    });

    let sliding: Vec<Vec<f64>> = pts
        .iter()
        .filter(|p| {
            classify_point(v.as_ref(), p)
                .map(|c| c.kind.is_sliding())
                .unwrap_or(false)
        })
        .cloned()
        .collect();
    t.result("sliding-tangency", tangency(v.as_ref(), &sliding));
    t.result("convex-coefficient", convexity(v.as_ref(), &sliding));
    if let BuiltSystem::Piecewise(p) = &l.system {
        t.result("sliding-antisymmetry", antisymmetry(p, &sliding));
    }
    t.result("regularization-saturation", saturation(l, &pts, &mut rng));
    if v.aligned_coord().is_some() {
        t.result("reduced-equals-sliding", reduced_equals_sliding(v.clone(), &sliding));
    }
    match &l.system {
        BuiltSystem::Nsff(s) => {
            t.result("critical-manifold", {
                let red = s.reduce(0.0);
                let mut worst = 0.0f64;
                let mut err = None;
                for p in &pts {
                    match red.y_of(p).and_then(|y| s.fast_at(p, y, 0.0)) {
                        Ok(h) => worst = worst.max(h.abs()),
                        Err(e) => err = Some(e.to_string()),
                    }
                }
                match err {
                    Some(e) => Err(e),
                    None => bound("max |H(x, y(x), 0)|", worst, 1e-10),
                }
            });
            t.result("reduced-of-sliding-commutes", {
                let red = s.reduce(0.0);
                let mut worst = 0.0f64;
                for p in &sliding {
                    let mut q = p.clone();
                    q[0] = 0.0;
                    if let (Ok(y), Ok(want)) = (red.y_of(&q), crate::psys::sliding_formula(&red, &q)) {
                        if let Ok((xd, _)) = s.sliding_vf_eps(&q, y, 0.0) {
                            worst = worst.max(dist(&xd[1..], &want[1..]));
                        }
                    }
                }
                bound("max mismatch", worst, 1e-10)
            });
        }
        BuiltSystem::Ccomb(c) => {
            t.result("c-sliding-tangency", {
                let mut worst = 0.0f64;
                for p in &pts {
                    if p[0] != 0.0 {
                        continue;
                    }
                    if let Ok(cl) = c_classify(c, p, 0.0, 0.0) {
                        for b in cl.interior().filter(|b| !b.degenerate) {
                            if let Ok(w) = c_sliding_vf(c, p, 0.0, 0.0, b) {
                                worst = worst.max(w[0].abs() / (1.0 + norm2(&w)));
                            }
                        }
                    }
                }
                bound("max |v.grad h|/(1+|v|)", worst, 1e-10)
            });
            t.result("c-inclusions", {
                let mut bad = 0;
                for p in &pts {
                    if p[0] != 0.0 {
                        continue;
                    }
                    let (Ok(f), Ok(cl)) = (classify_point(v.as_ref(), p), c_classify(c, p, 0.0, 0.0)) else {
                        continue;
                    };
                    if f.kind.is_sliding() && cl.kind != CKind::CSliding {
                        bad += 1;
                    }
                    if cl.kind == CKind::CSewing && f.kind != SigmaKind::Sewing {
                        bad += 1;
                    }
                }
                if bad == 0 {
                    Ok("no violations".into())
                } else {
                    Err(format!("{bad} violations"))
                }
            });
        }
        BuiltSystem::Piecewise(_) => {}
    }
    let (pass, fail) = (t.pass, t.fail);
    Ok((t.csv.file("check.csv"), pass, fail))
}

fn expr_roundtrip(l: &Loaded) -> Check {
    let c = &l.config;
    let all = c
        .xplus
        .iter()
        .chain(&c.xminus)
        .chain(&c.xtilde)
        .chain(std::iter::once(&c.h))
        .chain(c.fast.iter());
    for s in all {
        let e = parse(s).map_err(|e| e.to_string())?;
        let again = parse(&e.to_string()).map_err(|e| e.to_string())?;
        if again != e {
            return Err(format!("\"{s}\" does not survive printing"));
        }
    }
    Ok("all expressions reparse to the same tree".into())
}

fn tangency(v: &dyn PiecewiseField, pts: &[Vec<f64>]) -> Check {
    let mut worst = 0.0f64;
    for p in pts {
        let w = sliding_vf(v, p).map_err(|e| e.to_string())?;
        let g = v.switching_grad(p).map_err(|e| e.to_string())?;
        worst = worst.max(dot(&w, &g).abs() / (1.0 + norm2(&w)));
    }
    bound("max |X.grad h|/(1+|X|)", worst, 1e-10)
}

fn convexity(v: &dyn PiecewiseField, pts: &[Vec<f64>]) -> Check {
    for p in pts {
        let s = convex_coefficient(v, p).map_err(|e| e.to_string())?;
        let c = classify_point(v, p).map_err(|e| e.to_string())?;
        if c.kind == SigmaKind::SlidingAttracting && !(0.0..=1.0).contains(&s) {
            return Err(format!("s = {} outside [0, 1]", num(s)));
        }
    }
    Ok(format!("{} sliding samples", pts.len()))
}

fn antisymmetry(p: &PiecewiseSystem, pts: &[Vec<f64>]) -> Check {
    let m = p.mirrored();
    let mut worst = 0.0f64;
    for q in pts {
        let a = sliding_vf(p, q).map_err(|e| e.to_string())?;
        let b = sliding_vf(&m, q).map_err(|e| e.to_string())?;
        worst = worst.max(dist(&a, &b) / (1.0 + norm2(&a)));
    }
    bound("max mirrored mismatch", worst, 1e-12)
}

fn saturation(l: &Loaded, pts: &[Vec<f64>], rng: &mut StdRng) -> Check {
    let fam = family(l, 0.0, 0.0).map_err(|e| format!("{e:?}"))?;
    let sys = fam.system();
    let delta = 0.1;
    let mut count = 0;
    for _ in 0..100 {
        let base = &pts[rng.gen_range(0..pts.len())];
        let p: Vec<f64> = base.iter().map(|x| x + rng.gen_range(-1.0..1.0)).collect();
        let Ok(h) = sys.switching(&p) else { continue };
        if h.abs() < delta {
            continue;
        }
        let (Ok(got), Ok(want)) = (fam.eval(&p, delta), if h > 0.0 { sys.plus(&p) } else { sys.minus(&p) }) else {
            continue;
        };
        if got != want {
            return Err(format!("X^delta differs from the one-sided field at {p:?}"));
        }
        count += 1;
    }
    Ok(format!("{count} points outside the band match exactly"))
}

fn reduced_equals_sliding(v: std::sync::Arc<dyn PiecewiseField>, pts: &[Vec<f64>]) -> Check {
    let k = v.aligned_coord().expect("aligned");
    let mut worst = 0.0f64;
    for phi in PhiKind::ALL {
        let fam = st_regularize(v.clone(), Transition::Monotone(phi)).map_err(|e| e.to_string())?;
        let sfs = directional_blowup(&fam, k).map_err(|e| e.to_string())?;
        for p in pts {
            let c = classify_point(v.as_ref(), p).map_err(|e| e.to_string())?;
            if c.kind != SigmaKind::SlidingAttracting {
                continue;
            }
            let (x, _) = sfs.project(p);
            let want = sliding_vf(v.as_ref(), p).map_err(|e| e.to_string())?;
            let mut want_slow = want.clone();
            want_slow.remove(k);
            for r in critical_root(&sfs, &x).map_err(|e| e.to_string())? {
                if r.hyperbolic && r.ybar.abs() < 1.0 {
                    let got = reduced_rhs(&sfs, &r).map_err(|e| e.to_string())?;
                    worst = worst.max(dist(&got, &want_slow));
                }
            }
        }
    }
    bound("max |reduced - sliding|", worst, 1e-10)
}
