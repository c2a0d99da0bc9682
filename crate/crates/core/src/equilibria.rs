//! Newton's method, eigenvalues of small matrices, stability reports, δ-sweeps of
//! regularized equilibria, periodic orbits via return maps, and Hausdorff distances.

use num_complex::Complex64;

use crate::blowup::{critical_root, directional_blowup};
use crate::error::{Error, Result};
use crate::flow::{integrate_with_events, EventRule, EventSpec, Mode, OdeOptions, VectorField};
use crate::linalg::{condition, dist, norm2, norm_inf_mat, Lu, Matrix};
use crate::psys::{classify_point, sliding_vf, PiecewiseField, SigmaKind};
use crate::regularize::{st_regularize, Transition};

/// Real parts within this band count as center directions.
pub const STABILITY_BAND: f64 = 1e-8;

pub type VecMap<'a> = dyn Fn(&[f64]) -> Result<Vec<f64>> + 'a;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub fd_scale: f64,
    pub cond_limit: f64,
    /// When the line search stalls, a residual at or below this still counts as converged.
    pub accept: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-12,
            max_iter: 50,
            max_halvings: 20,
            fd_scale: 1e-6,
            cond_limit: 1e12,
            accept: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonResult {
    pub root: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    /// Iterates, starting with the initial guess.
    pub history: Vec<Vec<f64>>,
}

/// Central-difference Jacobian with steps `scale·max(1, |x_j|)`.
pub fn jacobian_fd(f: &VecMap, x: &[f64], scale: f64) -> Result<Matrix> {
    let mut buf = x.to_vec();
    let mut cols = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        let s = scale * x[j].abs().max(1.0);
        buf[j] = x[j] + s;
        let fp = f(&buf)?;
        buf[j] = x[j] - s;
        let fm = f(&buf)?;
        buf[j] = x[j];
        cols.push(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * s)).collect::<Vec<_>>());
    }
    let m = cols.first().map_or(0, Vec::len);
    Ok((0..m).map(|i| cols.iter().map(|c| c[i]).collect()).collect())
}

/// Newton's method with finite-difference Jacobian and backtracking by halving.
pub fn newton_solve(f: &VecMap, x0: &[f64], opts: &NewtonOptions) -> Result<NewtonResult> {
    let mut x = x0.to_vec();
    let mut fx = f(&x)?;
    if fx.len() != x.len() {
        return Err(Error::Dimension(format!(
            "Newton needs a square system, got {} equations in {} unknowns",
            fx.len(),
            x.len()
        )));
    }
    let mut r = norm2(&fx);
    let mut history = vec![x.clone()];
    for it in 0..=opts.max_iter {
        if r <= opts.tol {
            return Ok(NewtonResult {
                root: x,
                residual: r,
                iterations: it,
                history,
            });
        }
        if it == opts.max_iter {
            break;
        }
        let j = jacobian_fd(f, &x, opts.fd_scale)?;
        let cond = condition(&j);
        if !(cond <= opts.cond_limit) {
            return Err(Error::SingularJacobian { cond });
        }
        let lu = Lu::new(&j).ok_or(Error::SingularJacobian { cond: f64::INFINITY })?;
        let d = lu.solve(&fx.iter().map(|v| -v).collect::<Vec<_>>());
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            if let Ok(ft) = f(&trial) {
                let rt = norm2(&ft);
                if rt < r || rt <= opts.tol {
                    accepted = Some((trial, ft, rt));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((xt, ft, rt)) => {
                x = xt;
                fx = ft;
                r = rt;
                history.push(x.clone());
            }
            None if r <= opts.accept => {
                return Ok(NewtonResult {
                    root: x,
                    residual: r,
                    iterations: it,
                    history,
                });
            }
            None => {
                return Err(Error::NoConvergence {
                    iterations: it,
                    residual: r,
                })
            }
        }
    }
    if r <= opts.accept {
        return Ok(NewtonResult {
            root: x,
            residual: r,
            iterations: opts.max_iter,
            history,
        });
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: r,
    })
}

/// Characteristic polynomial coefficients `c[0] + c[1]λ + … + λⁿ` by Faddeev–LeVerrier.
pub fn char_poly(a: &Matrix) -> Vec<f64> {
    let n = a.len();
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let mut m = vec![vec![0.0; n]; n];
    for k in 1..=n {
        let mut next = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                next[i][j] = (0..n).map(|l| a[i][l] * m[l][j]).sum::<f64>();
            }
            next[i][i] += c[n - k + 1];
        }
        m = next;
        let tr: f64 = (0..n).map(|i| (0..n).map(|l| a[i][l] * m[l][i]).sum::<f64>()).sum();
        c[n - k] = -tr / k as f64;
    }
    c
}

fn poly_eval(c: &[f64], z: Complex64) -> (Complex64, f64) {
    let mut v = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for (k, ck) in c.iter().enumerate().rev() {
        v = v * z + ck;
        scale += ck.abs() * z.norm().powi(k as i32);
    }
    (v, scale)
}

fn poly_deriv(c: &[f64], z: Complex64) -> Complex64 {
    let mut v = Complex64::new(0.0, 0.0);
    for (k, ck) in c.iter().enumerate().skip(1).rev() {
        v = v * z + ck * k as f64;
    }
    v
}

fn det_shifted(a: &Matrix, lambda: Complex64) -> Complex64 {
    let n = a.len();
    let mut m: Vec<Vec<Complex64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Complex64::new(a[i][j], 0.0) - if i == j { lambda } else { Complex64::new(0.0, 0.0) })
                .collect()
        })
        .collect();
    let mut det = Complex64::new(1.0, 0.0);
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| m[i][k].norm().total_cmp(&m[j][k].norm()))
            .unwrap();
        if m[p][k].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if p != k {
            m.swap(p, k);
            det = -det;
        }
        det *= m[k][k];
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            for j in k..n {
                let v = m[k][j];
                m[i][j] -= f * v;
            }
        }
    }
    det
}

pub const EIGEN_MAX_DIM: usize = 6;
const DK_MAX_ITER: usize = 500;

/// Eigenvalues of a real `n × n` matrix, `1 ≤ n ≤ 6`, sorted by real then imaginary part.
pub fn eigenvalues_small(a: &Matrix) -> Result<Vec<Complex64>> {
    let n = a.len();
    if n == 0 || n > EIGEN_MAX_DIM {
        return Err(Error::MatrixTooLarge(n));
    }
    if a.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension("matrix is not square".into()));
    }
    let c = char_poly(a);
    let bound = 1.0 + c[..n].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let r0 = bound.min(1e6).max(0.5);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(r0, 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4))
        .collect();
    for _ in 0..DK_MAX_ITER {
        let mut worst = 0.0f64;
        for i in 0..n {
            let (p, _) = poly_eval(&c, z[i]);
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if j != i {
                    den *= z[i] - z[j];
                }
            }
            if den.norm() == 0.0 {
                den = Complex64::new(1e-300, 0.0);
            }
            let step = p / den;
            z[i] -= step;
            worst = worst.max(step.norm() / (1.0 + z[i].norm()));
        }
        if worst <= 1e-15 {
            break;
        }
    }
    for zi in z.iter_mut() {
        for _ in 0..3 {
            let (p, _) = poly_eval(&c, *zi);
            let d = poly_deriv(&c, *zi);
            if d.norm() == 0.0 {
                break;
            }
            let cand = *zi - p / d;
            if poly_eval(&c, cand).0.norm() < p.norm() {
                *zi = cand;
            } else {
                break;
            }
        }
        if zi.im.abs() <= 1e-14 * (1.0 + zi.re.abs()) {
            zi.im = 0.0;
        }
    }
    for zi in &z {
        let (p, scale) = poly_eval(&c, *zi);
        if !(p.norm() <= 1e-10 * scale.max(1.0)) {
            return Err(Error::EigenNoConvergence);
        }
    }
    let bound = 1e-8 * norm_inf_mat(a).max(1.0).powi(n as i32);
    if z.iter().any(|zi| !(det_shifted(a, *zi).norm() <= bound)) {
        return Err(Error::EigenNoConvergence);
    }
    z.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(z)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    pub point: Vec<f64>,
    pub eigenvalues: Vec<Complex64>,
    pub n_stable: usize,
    pub n_unstable: usize,
    pub n_center: usize,
    pub residual: f64,
    pub context: String,
    /// Sweep parameter (δ or ε) the report belongs to.
    pub param: f64,
    /// Distance to the unperturbed point, when known.
    pub distance: Option<f64>,
}

impl EquilibriumReport {
    pub fn is_saddle(&self) -> bool {
        self.n_stable > 0 && self.n_unstable > 0 && self.n_center == 0
    }
}

pub fn stability_counts(eigs: &[Complex64]) -> (usize, usize, usize) {
    let s = eigs.iter().filter(|e| e.re < -STABILITY_BAND).count();
    let u = eigs.iter().filter(|e| e.re > STABILITY_BAND).count();
    (s, u, eigs.len() - s - u)
}

/// Eigen-analysis of `f` at `point`.
pub fn equilibrium_report(f: &VecMap, point: &[f64], context: &str, param: f64) -> Result<EquilibriumReport> {
    let residual = norm2(&f(point)?);
    let j = jacobian_fd(f, point, 1e-6)?;
    let eigenvalues = eigenvalues_small(&j)?;
    let (n_stable, n_unstable, n_center) = stability_counts(&eigenvalues);
    Ok(EquilibriumReport {
        point: point.to_vec(),
        eigenvalues,
        n_stable,
        n_unstable,
        n_center,
        residual,
        context: context.to_string(),
        param,
        distance: None,
    })
}

/// Outcome at one grid value of a sweep; failures do not stop the sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub param: f64,
    pub outcome: std::result::Result<EquilibriumReport, Error>,
}

/// Equilibrium and linearization of the sliding field restricted to Σ (`h = x_k`).
pub fn sliding_equilibrium_check<S: PiecewiseField + ?Sized>(sys: &S, p: &[f64]) -> Result<EquilibriumReport> {
    let k = sys
        .aligned_coord()
        .ok_or_else(|| Error::NotAligned("sliding equilibrium checks need h equal to a coordinate".into()))?;
    let class = classify_point(sys, p)?;
    if class.kind != SigmaKind::SlidingAttracting {
        return Err(Error::NotSliding {
            class: class.kind.to_string(),
        });
    }
    let reduce = |q: &[f64]| -> Result<Vec<f64>> {
        let mut full = q.to_vec();
        full.insert(k, 0.0);
        let mut v = sliding_vf(sys, &full)?;
        v.remove(k);
        Ok(v)
    };
    let mut q = p.to_vec();
    q.remove(k);
    let rep = equilibrium_report(&reduce, &q, "sliding", 0.0)?;
    if rep.residual > 1e-8 {
        return Err(Error::Assumption(format!(
            "point is not an equilibrium of the sliding field (|X^S| = {:e})",
            rep.residual
        )));
    }
    if rep.n_center > 0 {
        return Err(Error::Assumption("sliding equilibrium is not hyperbolic".into()));
    }
    Ok(rep)
}

/// Equilibria `Q_δ` of the ST-regularized field near a hyperbolic sliding equilibrium `p`.
///
/// The first δ is seeded at `p` lifted to the attracting critical height `h = δ·ȳ₀`;
/// each further δ reuses the previous root's slow part and blown-up height `h/δ`.
pub fn persistence_sweep_delta<S: PiecewiseField + Clone + 'static>(
    sys: &S,
    phi: Transition,
    p: &[f64],
    deltas: &[f64],
) -> Result<Vec<SweepRow>> {
    sliding_equilibrium_check(sys, p)?;
    let k = sys.aligned_coord().expect("checked above");
    let fam = st_regularize(sys.clone(), phi)?;
    let sfs = directional_blowup(&fam, k)?;
    let (x, _) = sfs.project(p);
    let roots = critical_root(&sfs, &x)?;
    let y0 = roots
        .iter()
        .find(|r| r.hyperbolic && r.attracting)
        .ok_or_else(|| Error::Assumption("no attracting hyperbolic critical root above p".into()))?
        .ybar;
    let mut seed_slow = x;
    let mut seed_ybar = y0;
    let mut rows = Vec::new();
    for &delta in deltas {
        let f = |q: &[f64]| fam.eval(q, delta);
        let seed = sfs.lift(&seed_slow, seed_ybar, delta);
        let outcome = newton_solve(&f, &seed, &NewtonOptions::default()).and_then(|res| {
            let mut rep = equilibrium_report(&f, &res.root, "st-regularized", delta)?;
            rep.residual = res.residual;
            rep.distance = Some(dist(&res.root, p));
            Ok(rep)
        });
        if let Ok(rep) = &outcome {
            let (xs, h) = sfs.project(&rep.point);
            seed_slow = xs;
            seed_ybar = h / delta;
        }
        rows.push(SweepRow { param: delta, outcome });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Increasing,
    Decreasing,
}

/// Hyperplane `x[coord] = value` crossed in a given direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section {
    pub coord: usize,
    pub value: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicOptions {
    pub max_time: f64,
    pub ode: OdeOptions,
    pub newton: NewtonOptions,
    /// Backward return-map iterations tried when the forward orbit of the seed does not return.
    pub backward_iterations: usize,
}

impl Default for PeriodicOptions {
    fn default() -> Self {
        PeriodicOptions {
            max_time: 100.0,
            ode: OdeOptions::tol(1e-10, 1e-12),
            newton: NewtonOptions {
                tol: 1e-9,
                accept: 1e-7,
                ..Default::default()
            },
            backward_iterations: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicOrbitReport {
    pub section: Section,
    pub fixed_point: Vec<f64>,
    pub return_time: f64,
    /// Eigenvalues of the linearized return map.
    pub multipliers: Vec<Complex64>,
    /// Largest multiplier modulus.
    pub radial_multiplier: f64,
    pub residual: f64,
}

fn section_state(section: &Section, z: &[f64]) -> Vec<f64> {
    let mut s = z.to_vec();
    s.insert(section.coord, section.value);
    s
}

fn return_once(
    f: &VecMap,
    section: &Section,
    z: &[f64],
    backward: bool,
    opts: &PeriodicOptions,
) -> Result<(Vec<f64>, f64)> {
    let sign = match section.direction {
        Direction::Increasing => 1.0,
        Direction::Decreasing => -1.0,
    };
    let field = |y: &[f64]| -> Result<Vec<f64>> {
        let v = f(y)?;
        Ok(if backward {
            v.into_iter().map(|c| -c).collect()
        } else {
            v
        })
    };
    let g = |y: &[f64]| Ok(sign * (y[section.coord] - section.value) * if backward { -1.0 } else { 1.0 });
    let ev = [EventSpec {
        g: &g,
        rule: if backward {
            EventRule::SignChange
        } else {
            EventRule::Rising
        },
        tol: 1e-12,
    }];
    let vf: &VectorField = &field;
    let start = section_state(section, z);
    let mut t0 = 0.0;
    let mut y = start;
    // Backward returns: skip the crossing in the wrong direction.
    for _ in 0..4 {
        let run = integrate_with_events(vf, &y, t0, opts.max_time, &opts.ode, Mode::Smooth, &ev, None)?;
        let Some((_, t, state)) = run.stop else {
            return Err(Error::NoReturn(opts.max_time));
        };
        let v = f(&state)?[section.coord] * sign;
        if !backward || v > 0.0 {
            let mut out = state;
            out.remove(section.coord);
            return Ok((out, t));
        }
        t0 = t;
        y = state;
        y[section.coord] = section.value;
        let nudge = field(&y)?;
        let dt = 1e-9;
        for (yi, vi) in y.iter_mut().zip(&nudge) {
            *yi += dt * vi;
        }
    }
    Err(Error::NoReturn(opts.max_time))
}

/// Periodic orbit through the section near `seed` (full state; the section coordinate is overwritten).
///
/// Newton is applied to `P(z) − z`, `P` the forward return map. If the forward orbit of the
/// seed does not return (repelling cycles), the seed is first moved by iterating the backward
/// return map.
pub fn find_periodic_orbit(
    f: &VecMap,
    section: Section,
    seed: &[f64],
    opts: &PeriodicOptions,
) -> Result<PeriodicOrbitReport> {
    if section.coord >= seed.len() {
        return Err(Error::Dimension("section coordinate out of range".into()));
    }
    let mut z: Vec<f64> = seed.to_vec();
    z.remove(section.coord);
    let forward_ok = return_once(f, &section, &z, false, opts);
    if let Err(first_err) = forward_ok {
        let mut moved = false;
        for _ in 0..opts.backward_iterations {
            match return_once(f, &section, &z, true, opts) {
                Ok((next, _)) => {
                    let step = dist(&next, &z);
                    z = next;
                    moved = true;
                    if step <= 1e-9 {
                        break;
                    }
                }
                Err(_) => break,
            }
        }
        if !moved {
            return Err(first_err);
        }
    }
    let map = |q: &[f64]| -> Result<Vec<f64>> {
        let (p, _) = return_once(f, &section, q, false, opts)?;
        Ok(p.iter().zip(q).map(|(a, b)| a - b).collect())
    };
    let sol = newton_solve(&map, &z, &opts.newton)?;
    let (_, return_time) = return_once(f, &section, &sol.root, false, opts)?;
    let mut jac = jacobian_fd(&map, &sol.root, opts.newton.fd_scale)?;
    for (i, row) in jac.iter_mut().enumerate() {
        row[i] += 1.0;
    }
    let multipliers = if jac.is_empty() {
        vec![]
    } else {
        eigenvalues_small(&jac)?
    };
    let radial_multiplier = multipliers.iter().map(|m| m.norm()).fold(0.0, f64::max);
    Ok(PeriodicOrbitReport {
        section,
        fixed_point: section_state(&section, &sol.root),
        return_time,
        multipliers,
        radial_multiplier,
        residual: sol.residual,
    })
}

/// Symmetric Hausdorff distance between finite point sets.
pub fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let directed = |p: &[Vec<f64>], q: &[Vec<f64>]| {
        p.iter()
            .map(|x| q.iter().map(|y| dist(x, y)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Ok(directed(a, b).max(directed(b, a)))
}
