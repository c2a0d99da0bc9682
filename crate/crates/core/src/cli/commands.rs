use std::sync::Arc;

use super::config::{BuiltSystem, SystemConfig, TransitionSpec, Value};
use super::registry::{self, EXAMPLES};
use super::{check, usage, CliError, Command, ExamplesAction, Outcome, OutputFile, RangeArgs, SliceArgs};
use crate::blowup::{directional_blowup, r_classify};
use crate::ccomb::{c_classify, c_persistence_sweep, LambdaSeed};
use crate::equilibria::{persistence_sweep_delta, sliding_equilibrium_check, EquilibriumReport};
use crate::error::Error;
use crate::flow::{integrate_filippov, integrate_smooth, OdeOptions, Trajectory};
use crate::psys::{classify_point, convex_coefficient, scan_sigma, sliding_formula, PiecewiseField, Segment};
use crate::regularize::{nonlinear_regularize, r_regularize, st_regularize, SmoothFamily, Transition};

type CliResult<T> = std::result::Result<T, CliError>;

/// Fixed 17-significant-digit formatting.
pub(crate) fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.16e}")
    }
}

pub(crate) struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[String]) -> Self {
        Csv {
            text: format!("{}\n", header.join(",")),
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn file(self, name: &str) -> OutputFile {
        OutputFile {
            name: name.into(),
            content: self.text,
        }
    }
}

pub(crate) fn coord_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn cells(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| num(*x)).collect()
}

fn clean(msg: &str) -> String {
    msg.replace([',', '\n'], ";")
}

pub(crate) struct Loaded {
    pub config: SystemConfig,
    pub system: BuiltSystem,
    pub text: String,
}

pub(crate) fn resolve(name: &str) -> CliResult<Loaded> {
    let config = match registry::find(name) {
        Some(ex) => (ex.config)(),
        None => {
            let path = std::path::Path::new(name);
            if !path.exists() {
                return Err(usage(format!(
                    "`{name}` is neither an example name nor an existing file"
                )));
            }
            super::config::load_config(path).map_err(|e| usage(e.to_string()))?
        }
    };
    let system = config.build().map_err(|e| usage(e.to_string()))?;
    let text = config.to_text();
    Ok(Loaded { config, system, text })
}

pub(crate) fn parse_list(s: &str, what: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("invalid number `{t}` in --{what}")))
        })
        .collect()
}

/// Comma list or `start:stop:count`.
pub(crate) fn parse_grid(s: &str, what: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let a: f64 = parts[0]
            .trim()
            .parse()
            .map_err(|_| usage(format!("invalid --{what}")))?;
        let b: f64 = parts[1]
            .trim()
            .parse()
            .map_err(|_| usage(format!("invalid --{what}")))?;
        let n: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| usage(format!("invalid count in --{what}")))?;
        return Ok(Segment::params(n).into_iter().map(|u| a + u * (b - a)).collect());
    }
    parse_list(s, what)
}

fn exp_text(cfg: &SystemConfig, key: &str) -> Option<String> {
    cfg.experiment.get(key).and_then(Value::as_text)
}

fn exp_list(cfg: &SystemConfig, key: &str) -> Option<Vec<f64>> {
    cfg.experiment.get(key).and_then(Value::as_f64_list)
}

fn exp_num(cfg: &SystemConfig, key: &str) -> Option<f64> {
    cfg.experiment.get(key).and_then(Value::as_f64)
}

fn vector_arg(flag: &Option<String>, cfg: &SystemConfig, key: &str, n: usize) -> CliResult<Vec<f64>> {
    let v = match flag {
        Some(s) => parse_list(s, key)?,
        None => exp_list(cfg, key).ok_or_else(|| usage(format!("--{key} is required")))?,
    };
    if v.len() != n {
        return Err(usage(format!("--{key} needs {n} components, got {}", v.len())));
    }
    Ok(v)
}

fn grid_arg(flag: &Option<String>, cfg: &SystemConfig, key: &str) -> CliResult<Vec<f64>> {
    match flag {
        Some(s) => parse_grid(s, key),
        None => match cfg.experiment.get(key) {
            Some(Value::Str(s)) => parse_grid(s, key),
            Some(v) => v
                .as_f64_list()
                .ok_or_else(|| usage(format!("experiment key `{key}` is not a grid"))),
            None => Err(usage(format!("--{key} is required"))),
        },
    }
}

/// Samples of a segment `xK=a:b` through a base point.
pub(crate) fn samples(args: &RangeArgs, cfg: &SystemConfig, default_n: usize) -> CliResult<(Segment, Vec<Vec<f64>>)> {
    let dim = cfg.dim;
    let spec = args
        .range
        .clone()
        .or_else(|| exp_text(cfg, "range"))
        .ok_or_else(|| usage("--range is required"))?;
    let (var, span) = spec
        .split_once('=')
        .ok_or_else(|| usage(format!("range `{spec}` must look like x2=-1:2")))?;
    let k: usize = var
        .trim()
        .strip_prefix('x')
        .and_then(|d| d.parse().ok())
        .filter(|k| (1..=dim).contains(k))
        .ok_or_else(|| usage(format!("unknown coordinate `{var}` in --range")))?;
    let (a, b) = span
        .split_once(':')
        .and_then(|(a, b)| Some((a.trim().parse::<f64>().ok()?, b.trim().parse::<f64>().ok()?)))
        .ok_or_else(|| usage(format!("range `{spec}` must look like x2=-1:2")))?;
    let base = match &args.base {
        Some(s) => parse_list(s, "base")?,
        None => exp_list(cfg, "base").unwrap_or_else(|| vec![0.0; dim]),
    };
    if base.len() != dim {
        return Err(usage(format!("--base needs {dim} components")));
    }
    let n = args
        .n
        .or_else(|| exp_num(cfg, "n").map(|v| v as usize))
        .unwrap_or(default_n);
    if n < 2 {
        return Err(usage("--n must be at least 2"));
    }
    let seg = Segment::along(&base, k - 1, a, b);
    let pts = Segment::params(n).into_iter().map(|u| seg.point(u)).collect();
    Ok((seg, pts))
}

fn slice_of(s: &SliceArgs, cfg: &SystemConfig) -> (f64, f64) {
    (s.y.or_else(|| exp_num(cfg, "y")).unwrap_or(0.0), s.eps.unwrap_or(0.0))
}

/// The piecewise system seen by Filippov-level commands.
pub(crate) fn view(sys: &BuiltSystem, y: f64, eps: f64) -> Arc<dyn PiecewiseField> {
    match sys {
        BuiltSystem::Piecewise(p) => Arc::new(p.clone()),
        BuiltSystem::Nsff(n) => Arc::new(n.reduce(y)),
        BuiltSystem::Ccomb(c) => Arc::new(c.slice(y, eps).endpoint_system().clone()),
    }
}

pub(crate) fn family(loaded: &Loaded, y: f64, eps: f64) -> CliResult<SmoothFamily> {
    let t = loaded.config.transition.build().map_err(|e| usage(e.to_string()))?;
    Ok(match &loaded.system {
        BuiltSystem::Ccomb(c) => nonlinear_regularize(c.slice(y, eps), t)?,
        other => {
            let v = view(other, y, eps);
            match t {
                Transition::Monotone(_) => st_regularize(v, t)?,
                Transition::NonMonotone(_) => r_regularize(v, t),
            }
        }
    })
}

fn outcome(files: Vec<OutputFile>, loaded: Option<&Loaded>) -> Outcome {
    Outcome {
        files,
        pass: 0,
        fail: 0,
        config_text: loaded.map(|l| l.text.clone()),
    }
}

pub(crate) fn execute(cmd: &Command, seed: u64) -> CliResult<Outcome> {
    match cmd {
        Command::Examples { action } => examples(action),
        Command::Classify { sys, range, slice } => {
            let l = resolve(&sys.system)?;
            Ok(outcome(classify(&l, range, slice)?, Some(&l)))
        }
        Command::Slide { sys, range, slice } => {
            let l = resolve(&sys.system)?;
            Ok(outcome(slide(&l, range, slice)?, Some(&l)))
        }
        Command::Regularize {
            sys,
            range,
            slice,
            delta,
        } => {
            let l = resolve(&sys.system)?;
            Ok(outcome(regularize(&l, range, slice, *delta)?, Some(&l)))
        }
        Command::Blowup { sys, range, slice } => {
            let l = resolve(&sys.system)?;
            Ok(outcome(blowup(&l, range, slice)?, Some(&l)))
        }
        Command::Integrate {
            sys,
            slice,
            x0,
            t0,
            t1,
            delta,
            rtol,
            atol,
        } => {
            let l = resolve(&sys.system)?;
            let (y, eps) = slice_of(slice, &l.config);
            let x0 = vector_arg(x0, &l.config, "x0", l.config.dim)?;
            let t0 = t0.or_else(|| exp_num(&l.config, "t0")).unwrap_or(0.0);
            let t1 = t1
                .or_else(|| exp_num(&l.config, "t1"))
                .ok_or_else(|| usage("--t1 is required"))?;
            let opts = OdeOptions::tol(*rtol, *atol);
            let traj = match delta {
                Some(d) => {
                    let fam = family(&l, y, eps)?;
                    let d = *d;
                    let f = move |p: &[f64]| fam.eval(p, d);
                    integrate_smooth(&f, &x0, (t0, t1), &opts)?
                }
                None => integrate_filippov(view(&l.system, y, eps).as_ref(), &x0, (t0, t1), &opts)?,
            };
            Ok(outcome(trajectory_files(&traj, l.config.dim), Some(&l)))
        }
        Command::Equilibria { sys, slice, at } => {
            let l = resolve(&sys.system)?;
            let (y, eps) = slice_of(slice, &l.config);
            let p = vector_arg(at, &l.config, "at", l.config.dim)?;
            let rep = sliding_equilibrium_check(view(&l.system, y, eps).as_ref(), &p)?;
            let mut header = coord_names("x", l.config.dim);
            header.extend(report_header());
            let mut csv = Csv::new(&header);
            let mut row = cells(&p);
            row.extend(report_cells(&rep));
            csv.row(row);
            Ok(outcome(vec![csv.file("equilibria.csv")], Some(&l)))
        }
        Command::SweepDelta { sys, slice, at, deltas } => {
            let l = resolve(&sys.system)?;
            let (y, eps) = slice_of(slice, &l.config);
            let n = l.config.dim;
            let p = vector_arg(at, &l.config, "at", n)?;
            let grid = grid_arg(deltas, &l.config, "deltas")?;
            let phi = match &l.config.transition {
                TransitionSpec::Phi(_) => l.config.transition.build()?,
                TransitionSpec::Psi { .. } => return Err(usage("sweep-delta needs a monotone phi transition")),
            };
            let rows = persistence_sweep_delta(&view(&l.system, y, eps), phi, &p, &grid)?;
            let mut header = vec!["delta".to_string(), "status".into()];
            header.extend(coord_names("x", n));
            header.push("distance".into());
            header.extend(report_header());
            let mut csv = Csv::new(&header);
            for r in rows {
                let mut row = vec![num(r.param)];
                match &r.outcome {
                    Ok(rep) => {
                        row.push("ok".into());
                        row.extend(cells(&rep.point));
                        row.push(num(rep.distance.unwrap_or(f64::NAN)));
                        row.extend(report_cells(rep));
                    }
                    Err(e) => row.push(clean(&e.to_string())),
                }
                csv.row(row);
            }
            Ok(outcome(vec![csv.file("sweep_delta.csv")], Some(&l)))
        }
        Command::SweepEps {
            sys,
            at,
            eps,
            branch,
            lambda,
        } => {
            let l = resolve(&sys.system)?;
            let n = l.config.dim;
            let p0 = vector_arg(at, &l.config, "at", n + 1)?;
            let grid = grid_arg(eps, &l.config, "eps")?;
            let mut header = vec!["eps".to_string(), "status".into()];
            let file = match &l.system {
                BuiltSystem::Nsff(s) => {
                    let rows = s.persistence_sweep_eps(&p0, &grid)?;
                    header.extend(coord_names("x", n));
                    header.extend(["y".to_string(), "distance".into()]);
                    header.extend(report_header());
                    let mut csv = Csv::new(&header);
                    for r in rows {
                        let mut row = vec![num(r.param)];
                        match &r.outcome {
                            Ok(rep) => {
                                row.push("ok".into());
                                row.extend(cells(&rep.point));
                                row.push(num(rep.distance.unwrap_or(f64::NAN)));
                                row.extend(report_cells(rep));
                            }
                            Err(e) => row.push(clean(&e.to_string())),
                        }
                        csv.row(row);
                    }
                    csv.file("sweep_eps.csv")
                }
                BuiltSystem::Ccomb(c) => {
                    let seed = match (lambda, branch) {
                        (Some(v), _) => LambdaSeed::Value(*v),
                        (None, Some(b)) => LambdaSeed::Branch(*b),
                        (None, None) => match exp_num(&l.config, "lambda") {
                            Some(v) => LambdaSeed::Value(v),
                            None => LambdaSeed::Branch(exp_num(&l.config, "branch").unwrap_or(0.0) as usize),
                        },
                    };
                    let rows = c_persistence_sweep(c, &p0, seed, &grid)?;
                    header.extend(["lambda".to_string(), "interior".into()]);
                    header.extend(coord_names("x", n));
                    header.extend(["y".to_string(), "distance".into()]);
                    header.extend(report_header());
                    let mut csv = Csv::new(&header);
                    for r in rows {
                        let mut row = vec![num(r.param)];
                        match &r.outcome {
                            Ok(ce) => {
                                row.push("ok".into());
                                row.push(num(ce.lambda));
                                row.push(ce.interior.to_string());
                                row.extend(cells(&ce.report.point));
                                row.push(num(ce.report.distance.unwrap_or(f64::NAN)));
                                row.extend(report_cells(&ce.report));
                            }
                            Err(e) => row.push(clean(&e.to_string())),
                        }
                        csv.row(row);
                    }
                    csv.file("sweep_eps.csv")
                }
                BuiltSystem::Piecewise(_) => return Err(usage("sweep-eps needs an nsff or ccomb system")),
            };
            Ok(outcome(vec![file], Some(&l)))
        }
        Command::Csliding { sys, range, slice } => {
            let l = resolve(&sys.system)?;
            Ok(outcome(csliding(&l, range, slice)?, Some(&l)))
        }
        Command::Check { sys, range } => {
            let l = resolve(&sys.system)?;
            let (file, pass, fail) = check::run_checks(&l, range, seed)?;
            Ok(Outcome {
                files: vec![file],
                pass,
                fail,
                config_text: Some(l.text.clone()),
            })
        }
    }
}

fn examples(action: &ExamplesAction) -> CliResult<Outcome> {
    let file = match action {
        ExamplesAction::List => {
            let mut s = String::new();
            for e in EXAMPLES {
                s.push_str(&format!("{}\t{}\n", e.name, e.description));
            }
            OutputFile {
                name: "examples.txt".into(),
                content: s,
            }
        }
        ExamplesAction::Show { name } => {
            let e = registry::find(name).ok_or_else(|| usage(Error::UnknownExample(name.clone()).to_string()))?;
            OutputFile {
                name: format!("{name}.conf"),
                content: format!(
                    "# {}\n# expected: {}\n{}",
                    e.description,
                    e.expected,
                    (e.config)().to_text()
                ),
            }
        }
    };
    Ok(outcome(vec![file], None))
}

fn report_header() -> Vec<String> {
    ["residual", "n_stable", "n_unstable", "n_center", "eigenvalues"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn report_cells(rep: &EquilibriumReport) -> Vec<String> {
    let eig: Vec<String> = rep
        .eigenvalues
        .iter()
        .map(|z| format!("{} {}", num(z.re), num(z.im)))
        .collect();
    vec![
        num(rep.residual),
        rep.n_stable.to_string(),
        rep.n_unstable.to_string(),
        rep.n_center.to_string(),
        eig.join(";"),
    ]
}

pub(crate) fn classify(l: &Loaded, range: &RangeArgs, slice: &SliceArgs) -> CliResult<Vec<OutputFile>> {
    let (y, eps) = slice_of(slice, &l.config);
    let n = l.config.dim;
    let (seg, pts) = samples(range, &l.config, 300)?;
    let v = view(&l.system, y, eps);
    let mut header = coord_names("x", n);
    if let BuiltSystem::Ccomb(c) = &l.system {
        header.extend(["filippov", "class", "branches", "lambdas"].map(String::from));
        let mut csv = Csv::new(&header);
        for p in &pts {
            let f = classify_point(v.as_ref(), p)?;
            let cl = c_classify(c, p, y, eps)?;
            let mut row = cells(p);
            row.push(f.kind.name().into());
            row.push(cl.kind.name().into());
            row.push(cl.branches.len().to_string());
            row.push(cl.branches.iter().map(|b| num(b.lambda)).collect::<Vec<_>>().join(";"));
            csv.row(row);
        }
        return Ok(vec![csv.file("classify.csv")]);
    }
    let scan = scan_sigma(v.as_ref(), &seg, pts.len())?;
    header.extend(["h", "lplus", "lminus", "class"].map(String::from));
    let mut csv = Csv::new(&header);
    for s in &scan.samples {
        let mut row = cells(&s.point);
        row.push(num(v.switching(&s.point)?));
        row.push(num(s.class.lplus));
        row.push(num(s.class.lminus));
        row.push(s.class.kind.name().into());
        csv.row(row);
    }
    let mut ih = vec!["class".to_string()];
    ih.extend(coord_names("start_x", n));
    ih.extend(coord_names("end_x", n));
    let mut icsv = Csv::new(&ih);
    for i in &scan.intervals {
        let mut row = vec![i.kind.name().to_string()];
        row.extend(cells(&i.start));
        row.extend(cells(&i.end));
        icsv.row(row);
    }
    Ok(vec![csv.file("classify.csv"), icsv.file("intervals.csv")])
}

fn slide(l: &Loaded, range: &RangeArgs, slice: &SliceArgs) -> CliResult<Vec<OutputFile>> {
    if matches!(l.system, BuiltSystem::Ccomb(_)) {
        return csliding(l, range, slice);
    }
    let (y, eps) = slice_of(slice, &l.config);
    let n = l.config.dim;
    let (_, pts) = samples(range, &l.config, 300)?;
    let v = view(&l.system, y, eps);
    let mut header = coord_names("x", n);
    header.extend(["class".to_string(), "s".into()]);
    header.extend(coord_names("v", n));
    let mut csv = Csv::new(&header);
    for p in &pts {
        let c = classify_point(v.as_ref(), p)?;
        if !c.kind.is_sliding() {
            continue;
        }
        let s = convex_coefficient(v.as_ref(), p)?;
        let vf = sliding_formula(v.as_ref(), p)?;
        let mut row = cells(p);
        row.push(c.kind.name().into());
        row.push(num(s));
        row.extend(cells(&vf));
        csv.row(row);
    }
    Ok(vec![csv.file("slide.csv")])
}

fn regularize(l: &Loaded, range: &RangeArgs, slice: &SliceArgs, delta: Option<f64>) -> CliResult<Vec<OutputFile>> {
    let (y, eps) = slice_of(slice, &l.config);
    let n = l.config.dim;
    let delta = delta
        .or_else(|| exp_num(&l.config, "delta"))
        .ok_or_else(|| usage("--delta is required"))?;
    let (_, pts) = samples(range, &l.config, 300)?;
    let fam = family(l, y, eps)?;
    let mut header = coord_names("x", n);
    header.extend(coord_names("v", n));
    let mut csv = Csv::new(&header);
    for p in &pts {
        let mut row = cells(p);
        row.extend(cells(&fam.eval(p, delta)?));
        csv.row(row);
    }
    Ok(vec![csv.file("regularize.csv")])
}

fn blowup(l: &Loaded, range: &RangeArgs, slice: &SliceArgs) -> CliResult<Vec<OutputFile>> {
    let (y, eps) = slice_of(slice, &l.config);
    let n = l.config.dim;
    let (_, pts) = samples(range, &l.config, 300)?;
    let fam = family(l, y, eps)?;
    let k = fam
        .system()
        .aligned_coord()
        .ok_or_else(|| CliError::Domain(Error::NotAligned("blow-up needs h equal to a coordinate".into())))?;
    let sfs = directional_blowup(&fam, k)?;
    let mut header = coord_names("x", n);
    header.extend(["class", "roots", "ybar", "dbeta"].map(String::from));
    let mut csv = Csv::new(&header);
    for p in &pts {
        let (x, _) = sfs.project(p);
        let (class, roots) = r_classify(&sfs, &x)?;
        let mut row = cells(p);
        row.push(class.name().into());
        row.push(roots.len().to_string());
        row.push(roots.iter().map(|r| num(r.ybar)).collect::<Vec<_>>().join(";"));
        row.push(roots.iter().map(|r| num(r.dbeta)).collect::<Vec<_>>().join(";"));
        csv.row(row);
    }
    Ok(vec![csv.file("blowup.csv")])
}

fn trajectory_files(traj: &Trajectory, n: usize) -> Vec<OutputFile> {
    let mut header = vec!["t".to_string(), "mode".into()];
    header.extend(coord_names("x", n));
    let mut csv = Csv::new(&header);
    for (t, mode, y) in traj.samples() {
        let mut row = vec![num(t), mode.name().into()];
        row.extend(cells(y));
        csv.row(row);
    }
    let mut eh = vec!["t".to_string(), "kind".into()];
    eh.extend(coord_names("x", n));
    let mut ecsv = Csv::new(&eh);
    for e in &traj.events {
        let mut row = vec![num(e.t), e.kind.name().into()];
        row.extend(cells(&e.state));
        ecsv.row(row);
    }
    vec![csv.file("trajectory.csv"), ecsv.file("events.csv")]
}

fn csliding(l: &Loaded, range: &RangeArgs, slice: &SliceArgs) -> CliResult<Vec<OutputFile>> {
    let BuiltSystem::Ccomb(c) = &l.system else {
        return Err(usage("csliding needs a ccomb system"));
    };
    let (y, eps) = slice_of(slice, &l.config);
    let n = l.config.dim;
    let (_, pts) = samples(range, &l.config, 60)?;
    let mut header = coord_names("x", n);
    header.extend(["eps", "branch", "lambda", "dk", "status"].map(String::from));
    header.extend(coord_names("v", n));
    let mut csv = Csv::new(&header);
    for p in &pts {
        let cl = c_classify(c, p, y, eps)?;
        for b in cl.interior() {
            let mut row = cells(p);
            row.extend([num(eps), b.id.to_string(), num(b.lambda), num(b.dk)]);
            match crate::ccomb::c_sliding_vf(c, p, y, eps, b) {
                Ok(v) => {
                    row.push("ok".into());
                    row.extend(cells(&v));
                }
                Err(e) => row.push(clean(&e.to_string())),
            }
            csv.row(row);
        }
    }
    Ok(vec![csv.file("csliding.csv")])
}
