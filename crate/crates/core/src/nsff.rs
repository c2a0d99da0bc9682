//! Non-smooth slow-fast systems `ẋ = F` on `x1 > 0`, `ẋ = G` on `x1 < 0`, `ε·ẏ = H`.

use crate::equilibria::{
    eigenvalues_small, jacobian_fd, newton_solve, stability_counts, EquilibriumReport, NewtonOptions, SweepRow,
};
use crate::error::{Error, Result};
use crate::expr::{parse, CompiledExpr, Expr, FD_SCALE};
use crate::linalg::dist;
use crate::psys::{compile_all, eval_all, sliding_formula, state_names, PiecewiseField, Tolerances};
use crate::regularize::Transition;

const Y_TOL: f64 = 1e-12;
const HY_TOL: f64 = 1e-8;

/// Variable layout `x1..xn, y, eps`.
pub fn nsff_names(n: usize) -> Vec<String> {
    let mut v = state_names(n);
    v.push("y".into());
    v.push("eps".into());
    v
}

#[derive(Debug, Clone)]
pub struct NonsmoothSlowFast {
    n: usize,
    f: Vec<CompiledExpr>,
    g: Vec<CompiledExpr>,
    fast: CompiledExpr,
    h: Expr,
}

impl NonsmoothSlowFast {
    pub fn new(f: &[&str], g: &[&str], fast: &str, h: &str) -> Result<Self> {
        let pf = f.iter().map(|s| parse(s)).collect::<std::result::Result<Vec<_>, _>>()?;
        let pg = g.iter().map(|s| parse(s)).collect::<std::result::Result<Vec<_>, _>>()?;
        Self::from_exprs(pf, pg, parse(fast)?, parse(h)?)
    }

    pub fn from_exprs(f: Vec<Expr>, g: Vec<Expr>, fast: Expr, h: Expr) -> Result<Self> {
        let n = f.len();
        if n < 2 {
            return Err(Error::Dimension(format!("slow dimension must be at least 2, got {n}")));
        }
        if g.len() != n {
            return Err(Error::Dimension(format!("F has {n} components but G has {}", g.len())));
        }
        if h.as_var() != Some("x1") {
            return Err(Error::NotCanonical(format!(
                "h = {h}; the switching function must be x1. Under a regular switching manifold a local \
                 change of coordinates straightens h to x1 without loss of generality"
            )));
        }
        let names = nsff_names(n);
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        Ok(NonsmoothSlowFast {
            n,
            f: compile_all(&f, &refs)?,
            g: compile_all(&g, &refs)?,
            fast: fast.compile(&refs)?,
            h,
        })
    }

    pub fn slow_dim(&self) -> usize {
        self.n
    }

    pub fn f_exprs(&self) -> Vec<Expr> {
        self.f.iter().map(|c| c.source().clone()).collect()
    }

    pub fn g_exprs(&self) -> Vec<Expr> {
        self.g.iter().map(|c| c.source().clone()).collect()
    }

    pub fn fast_expr(&self) -> &Expr {
        self.fast.source()
    }

    pub fn h_expr(&self) -> &Expr {
        &self.h
    }

    fn slot(&self, x: &[f64], y: f64, eps: f64) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::Dimension(format!(
                "expected {} slow components, got {}",
                self.n,
                x.len()
            )));
        }
        let mut v = x.to_vec();
        v.push(y);
        v.push(eps);
        Ok(v)
    }

    pub fn f_at(&self, x: &[f64], y: f64, eps: f64) -> Result<Vec<f64>> {
        eval_all(&self.f, &self.slot(x, y, eps)?)
    }

    pub fn g_at(&self, x: &[f64], y: f64, eps: f64) -> Result<Vec<f64>> {
        eval_all(&self.g, &self.slot(x, y, eps)?)
    }

    pub fn fast_at(&self, x: &[f64], y: f64, eps: f64) -> Result<f64> {
        Ok(self.fast.eval(&self.slot(x, y, eps)?)?)
    }

    /// `∂H/∂y`.
    pub fn fast_dy(&self, x: &[f64], y: f64, eps: f64) -> Result<f64> {
        Ok(self.fast.diff(self.n, &self.slot(x, y, eps)?, FD_SCALE)?)
    }

    /// Root of `H(x, ·, 0)` by Newton from `seed`.
    pub fn solve_y(&self, x: &[f64], seed: f64) -> Result<f64> {
        let mut y = seed;
        for it in 0..50 {
            let hv = self.fast_at(x, y, 0.0)?;
            let hy = self.fast_dy(x, y, 0.0)?;
            if hy.abs() < HY_TOL {
                return Err(Error::Assumption(format!(
                    "dH/dy = {hy:e} vanishes at y = {y}; the critical manifold is not a graph over x"
                )));
            }
            let step = hv / hy;
            y -= step;
            if step.abs() <= Y_TOL * (1.0 + y.abs()) {
                let res = self.fast_at(x, y, 0.0)?;
                if res.abs() <= 1e-10 {
                    return Ok(y);
                }
            }
            if it == 49 {
                break;
            }
        }
        Err(Error::NoConvergence {
            iterations: 50,
            residual: self.fast_at(x, y, 0.0)?.abs(),
        })
    }

    /// The reduced piecewise system on the critical manifold.
    pub fn reduce(&self, y_seed: f64) -> ReducedNonsmooth {
        ReducedNonsmooth {
            sys: self.clone(),
            y_seed,
        }
    }

    /// Sliding field at `(0, x2..xn, y)`: the slow part `ẋ` (with `ẋ1 = 0`) and `H`.
    pub fn sliding_vf_eps(&self, x: &[f64], y: f64, eps: f64) -> Result<(Vec<f64>, f64)> {
        let mut p = x.to_vec();
        if let Some(first) = p.first_mut() {
            *first = 0.0;
        }
        let f = self.f_at(&p, y, eps)?;
        let g = self.g_at(&p, y, eps)?;
        let den = f[0] - g[0];
        if den.abs() < 1e-12 {
            return Err(Error::SmallDenominator { value: den });
        }
        let xdot = (0..self.n)
            .map(|i| if i == 0 { 0.0 } else { (f[0] * g[i] - g[0] * f[i]) / den })
            .collect();
        Ok((xdot, self.fast_at(&p, y, eps)?))
    }

    fn check_assumptions(&self, x: &[f64], y: f64) -> Result<()> {
        let hy = self.fast_dy(x, y, 0.0)?;
        if hy.abs() <= HY_TOL {
            return Err(Error::Assumption(format!(
                "dH/dy = {hy:e} at p0; without normal hyperbolicity of the critical manifold sliding regions need not persist"
            )));
        }
        let f = self.f_at(x, y, 0.0)?;
        let g = self.g_at(x, y, 0.0)?;
        if (f[0] - g[0]).abs() <= 1e-12 {
            return Err(Error::Assumption(
                "F1 = G1 at p0; the sliding field is undefined".into(),
            ));
        }
        Ok(())
    }

    /// Equilibria `p_ε` of the sliding field near `p0 = (0, x2..xn, y)`, one row per ε.
    pub fn persistence_sweep_eps(&self, p0: &[f64], eps_grid: &[f64]) -> Result<Vec<SweepRow>> {
        let n = self.n;
        if p0.len() != n + 1 {
            return Err(Error::Dimension(format!("p0 needs {} components (x1..x{n}, y)", n + 1)));
        }
        let (x0, y0) = (&p0[..n], p0[n]);
        if x0[0].abs() > 1e-12 {
            return Err(Error::NotOnSigma { h: x0[0] });
        }
        self.check_assumptions(x0, y0)?;
        let red = self.reduce(y0);
        let restricted = |u: &[f64]| -> Result<Vec<f64>> {
            let mut full = vec![0.0];
            full.extend_from_slice(u);
            let mut v = sliding_formula(&red, &full)?;
            v.remove(0);
            Ok(v)
        };
        let u0: Vec<f64> = x0[1..].to_vec();
        let r = restricted(&u0)?;
        if crate::linalg::norm2(&r) > 1e-8 {
            return Err(Error::Assumption(format!(
                "p0 is not an equilibrium of the reduced sliding field (residual {:e})",
                crate::linalg::norm2(&r)
            )));
        }
        if !u0.is_empty() {
            let eig = eigenvalues_small(&jacobian_fd(&restricted, &u0, 1e-6)?)?;
            if stability_counts(&eig).2 > 0 {
                return Err(Error::Assumption(
                    "p0 is not hyperbolic for the reduced sliding field".into(),
                ));
            }
        }
        let mut seed: Vec<f64> = p0[1..].to_vec();
        let mut rows = Vec::new();
        for &eps in eps_grid {
            let split = |u: &[f64]| -> (Vec<f64>, f64) {
                let mut x = vec![0.0];
                x.extend_from_slice(&u[..n - 1]);
                (x, u[n - 1])
            };
            let eqs = |u: &[f64]| -> Result<Vec<f64>> {
                let (x, y) = split(u);
                let (xdot, hv) = self.sliding_vf_eps(&x, y, eps)?;
                let mut out = xdot[1..].to_vec();
                out.push(hv);
                Ok(out)
            };
            let outcome = newton_solve(&eqs, &seed, &NewtonOptions::default()).and_then(|sol| {
                let scaled = |u: &[f64]| -> Result<Vec<f64>> {
                    let mut v = eqs(u)?;
                    if eps > 0.0 {
                        let last = v.len() - 1;
                        v[last] /= eps;
                    }
                    Ok(v)
                };
                let eigenvalues = eigenvalues_small(&jacobian_fd(&scaled, &sol.root, 1e-6)?)?;
                let (n_stable, n_unstable, n_center) = stability_counts(&eigenvalues);
                let mut point = vec![0.0];
                point.extend_from_slice(&sol.root);
                let distance = dist(&point, p0);
                Ok(EquilibriumReport {
                    point,
                    eigenvalues,
                    n_stable,
                    n_unstable,
                    n_center,
                    residual: sol.residual,
                    context: "nsff-sliding".into(),
                    param: eps,
                    distance: Some(distance),
                })
            });
            if let Ok(rep) = &outcome {
                seed = rep.point[1..].to_vec();
            }
            rows.push(SweepRow { param: eps, outcome });
        }
        Ok(rows)
    }

    /// The three-scale system obtained from r-regularizing with `psi` and blowing up `x1 = δ·x̄1`.
    pub fn three_scale_blowup(&self, psi: Transition) -> ThreeScaleSystem {
        ThreeScaleSystem { sys: self.clone(), psi }
    }
}

/// `F̃(x) = F(x, y(x), 0)`, `G̃(x) = G(x, y(x), 0)`, split by `x1`.
#[derive(Debug, Clone)]
pub struct ReducedNonsmooth {
    sys: NonsmoothSlowFast,
    y_seed: f64,
}

impl ReducedNonsmooth {
    /// Height of the critical manifold over `x`.
    pub fn y_of(&self, x: &[f64]) -> Result<f64> {
        self.sys.solve_y(x, self.y_seed)
    }
}

impl PiecewiseField for ReducedNonsmooth {
    fn dim(&self) -> usize {
        self.sys.n
    }

    fn plus(&self, p: &[f64]) -> Result<Vec<f64>> {
        let y = self.y_of(p)?;
        self.sys.f_at(p, y, 0.0)
    }

    fn minus(&self, p: &[f64]) -> Result<Vec<f64>> {
        let y = self.y_of(p)?;
        self.sys.g_at(p, y, 0.0)
    }

    fn switching(&self, p: &[f64]) -> Result<f64> {
        if p.len() != self.sys.n {
            return Err(Error::Dimension(format!(
                "expected {} components, got {}",
                self.sys.n,
                p.len()
            )));
        }
        Ok(p[0])
    }

    fn aligned_coord(&self) -> Option<usize> {
        Some(0)
    }

    fn tolerances(&self) -> Tolerances {
        Tolerances::default()
    }
}

/// `δ·ẋ̄1 = α1`, `ẋi = αi`, `ε·ẏ = H̄` with `αi` the ψ-blend of `F`, `G` at `(δx̄1, x2..xn, y, ε)`.
#[derive(Debug, Clone)]
pub struct ThreeScaleSystem {
    sys: NonsmoothSlowFast,
    psi: Transition,
}

impl ThreeScaleSystem {
    pub fn state_dim(&self) -> usize {
        self.sys.n + 1
    }

    /// `(α, H̄)` at `x̄1` and `p = (x2..xn, y)`.
    pub fn rhs(&self, xbar1: f64, p: &[f64], eps: f64, delta: f64) -> Result<(Vec<f64>, f64)> {
        let n = self.sys.n;
        if p.len() != n {
            return Err(Error::Dimension(format!("p needs {n} components (x2..x{n}, y)")));
        }
        let mut x = vec![delta * xbar1];
        x.extend_from_slice(&p[..n - 1]);
        let y = p[n - 1];
        let fv = self.sys.f_at(&x, y, eps)?;
        let alpha = if xbar1 >= 1.0 {
            fv
        } else {
            let gv = self.sys.g_at(&x, y, eps)?;
            if xbar1 <= -1.0 {
                gv
            } else {
                let mut amb = x.clone();
                amb.push(y);
                let w = self.psi.eval(&amb, xbar1);
                fv.iter()
                    .zip(&gv)
                    .map(|(a, b)| ((1.0 + w) * a + (1.0 - w) * b) / 2.0)
                    .collect()
            }
        };
        Ok((alpha, self.sys.fast_at(&x, y, eps)?))
    }

    /// The vector field in the fastest time `τ = t/(δε)` on states `(x̄1, x2..xn, y)`.
    pub fn fast_time_field(&self, eps: f64, delta: f64) -> impl Fn(&[f64]) -> Result<Vec<f64>> + '_ {
        move |s: &[f64]| {
            let (alpha, hb) = self.rhs(s[0], &s[1..], eps, delta)?;
            let mut out = Vec::with_capacity(s.len());
            out.push(eps * alpha[0]);
            out.extend(alpha[1..].iter().map(|a| delta * eps * a));
            out.push(delta * hb);
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::newton_solve;
    use crate::psys::{classify_point, SigmaKind};
    use crate::regularize::{builtin_phi, builtin_psi};

    fn ex2() -> NonsmoothSlowFast {
        NonsmoothSlowFast::new(&["x2-1", "-1+eps"], &["x1+x2+eps", "x2+1-eps"], "y", "x1").unwrap()
    }

    fn closed(eps: f64) -> f64 {
        (-1.0 + 2.0 * eps + (5.0 - 12.0 * eps + 8.0 * eps * eps).sqrt()) / 2.0
    }

    #[test]
    fn canonical_form_enforced() {
        assert!(matches!(
            NonsmoothSlowFast::new(&["1", "1"], &["1", "1"], "y", "x2"),
            Err(Error::NotCanonical(_))
        ));
        assert!(matches!(
            NonsmoothSlowFast::new(&["1", "1"], &["1", "1"], "y", "x1+0"),
            Err(Error::NotCanonical(_))
        ));
        assert!(NonsmoothSlowFast::new(&["1", "z"], &["1", "1"], "y", "x1").is_err());
    }

    #[test]
    fn reduce_examples() {
        let red = ex2().reduce(0.0);
        assert_eq!(red.y_of(&[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(red.plus(&[0.3, 0.7]).unwrap(), vec![0.7 - 1.0, -1.0]);
        assert_eq!(red.minus(&[0.0, 0.7]).unwrap(), vec![0.7, 1.7]);
        let s = NonsmoothSlowFast::new(&["y", "1"], &["1", "y*y"], "y-x2", "x1").unwrap();
        let r = s.reduce(0.0);
        assert!((r.y_of(&[0.0, 0.8]).unwrap() - 0.8).abs() < 1e-12);
        assert!((r.plus(&[0.0, 0.8]).unwrap()[0] - 0.8).abs() < 1e-12);
        let flat = NonsmoothSlowFast::new(&["1", "1"], &["1", "1"], "y*y", "x1").unwrap();
        assert!(matches!(flat.reduce(0.0).y_of(&[0.0, 0.0]), Err(Error::Assumption(_))));
    }

    #[test]
    fn reduced_sliding_folds() {
        let red = ex2().reduce(0.0);
        assert_eq!(
            classify_point(&red, &[0.0, 0.5]).unwrap().kind,
            SigmaKind::SlidingAttracting
        );
        assert_eq!(classify_point(&red, &[0.0, 1.5]).unwrap().kind, SigmaKind::Sewing);
    }

    #[test]
    fn sliding_vf_eps_examples() {
        let s = ex2();
        for &eps in &[0.0, 0.05, 0.3] {
            for &x2 in &[-0.4, 0.2, 0.9] {
                let (xd, hv) = s.sliding_vf_eps(&[0.0, x2], 0.25, eps).unwrap();
                let want = (-x2 * x2 + 2.0 * eps * x2 - x2 + eps * eps - 2.0 * eps + 1.0) / (eps + 1.0);
                assert!((xd[1] - want).abs() < 1e-12);
                assert_eq!(xd[0], 0.0);
                assert_eq!(hv, 0.25);
            }
        }
        let sym = NonsmoothSlowFast::new(&["-1", "x2+3"], &["1", "x2+3"], "y", "x1").unwrap();
        assert_eq!(sym.sliding_vf_eps(&[0.0, 2.0], 0.0, 0.0).unwrap().0, vec![0.0, 5.0]);
        let bad = NonsmoothSlowFast::new(&["1", "0"], &["1", "1"], "y", "x1").unwrap();
        assert!(matches!(
            bad.sliding_vf_eps(&[0.0, 0.0], 0.0, 0.0),
            Err(Error::SmallDenominator { .. })
        ));
    }

    #[test]
    fn reduced_of_sliding_commutes() {
        let s = NonsmoothSlowFast::new(&["x2-1+y", "-1+y*x2"], &["x2+y*y", "x2+1"], "y-x2*x2/4", "x1").unwrap();
        let red = s.reduce(0.0);
        for i in 0..21 {
            let x2 = -0.5 + 0.05 * i as f64;
            let y = red.y_of(&[0.0, x2]).unwrap();
            let (xd, _) = s.sliding_vf_eps(&[0.0, x2], y, 0.0).unwrap();
            let want = sliding_formula(&red, &[0.0, x2]).unwrap();
            assert!((xd[1] - want[1]).abs() <= 1e-10);
        }
    }

    #[test]
    fn eps_sweep_matches_closed_form() {
        let s = ex2();
        let p0 = [0.0, (5f64.sqrt() - 1.0) / 2.0, 0.0];
        let rows = s.persistence_sweep_eps(&p0, &[0.1, 0.05, 0.01]).unwrap();
        let mut last = f64::INFINITY;
        for row in rows {
            let rep = row.outcome.unwrap();
            assert!((rep.point[1] - closed(row.param)).abs() <= 1e-10);
            let d = rep.distance.unwrap();
            assert!(d <= 0.5 * row.param && d < last);
            last = d;
        }
    }

    #[test]
    fn eps_sweep_gates() {
        let s = NonsmoothSlowFast::new(&["x2-1", "-1"], &["x2", "1"], "y*y", "x1").unwrap();
        assert!(matches!(
            s.persistence_sweep_eps(&[0.0, 0.5, 0.0], &[0.1]),
            Err(Error::Assumption(_))
        ));
        assert!(matches!(
            ex2().persistence_sweep_eps(&[0.0, 0.3, 0.0], &[0.1]),
            Err(Error::Assumption(_))
        ));
    }

    #[test]
    fn three_scale_examples() {
        let s = ex2();
        let psi = builtin_psi(0.0, -2.0, 1).unwrap();
        let ts = s.three_scale_blowup(psi);
        let (xb, x2, y, eps, delta) = (0.3, 0.4, 0.1, 0.02, 0.05);
        let (a, hb) = ts.rhs(xb, &[x2, y], eps, delta).unwrap();
        let w = psi.eval(&[delta * xb, x2, y], xb);
        let want = (-1.0 + delta * xb + 2.0 * x2 + eps - (delta * xb + eps + 1.0) * w) / 2.0;
        assert!((a[0] - want).abs() < 1e-14);
        assert_eq!(hb, y);
        let (a, _) = ts.rhs(1.5, &[x2, y], eps, delta).unwrap();
        assert_eq!(a, s.f_at(&[delta * 1.5, x2], y, eps).unwrap());

        // δ = ε = 0: the constraints α1 = 0, H̄ = 0 reproduce the reduced r-regularization.
        let phi = builtin_phi("cubic").unwrap();
        let tc = s.three_scale_blowup(phi);
        let x2 = 0.3;
        let g = |u: &[f64]| {
            Ok(vec![
                tc.rhs(u[0], &[x2, u[1]], 0.0, 0.0).map(|(a, h)| (a[0], h))?.0,
                u[1],
            ])
        };
        let sol = newton_solve(&g, &[0.0, 0.0], &Default::default()).unwrap();
        let (a, hb) = tc.rhs(sol.root[0], &[x2, sol.root[1]], 0.0, 0.0).unwrap();
        assert!(a[0].abs() < 1e-12 && hb.abs() < 1e-12);
        let red = s.reduce(0.0);
        let want = sliding_formula(&red, &[0.0, x2]).unwrap();
        assert!((a[1] - want[1]).abs() < 1e-10);

        let field = tc.fast_time_field(0.1, 0.1);
        let v = field(&[0.2, 0.3, 0.05]).unwrap();
        let (a, hb) = tc.rhs(0.2, &[0.3, 0.05], 0.1, 0.1).unwrap();
        assert!((v[0] - 0.1 * a[0]).abs() < 1e-15 && (v[2] - 0.1 * hb).abs() < 1e-15);
    }
}
