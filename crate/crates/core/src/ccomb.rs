//! Continuous (non-convex) combinations `X̃(λ, p)` of `X⁺` and `X⁻`: c-sewing and c-sliding,
//! λ-branches, c-sliding fields, ε-persistence and the link with nonlinear regularization.

use rand::{rngs::StdRng, Rng, SeedableRng};

use crate::blowup::{critical_root, directional_blowup, scan_roots};
use crate::equilibria::{
    eigenvalues_small, jacobian_fd, newton_solve, stability_counts, EquilibriumReport, NewtonOptions,
};
use crate::error::{Error, Result};
use crate::expr::{parse, CompiledExpr, Expr, FD_SCALE};
use crate::linalg::{dist, norm2};
use crate::nsff::nsff_names;
use crate::psys::{compile_all, eval_all, PiecewiseField, Tolerances};
use crate::regularize::{nonlinear_regularize, Combination, PhiKind, Transition};

/// Subintervals of `[−1, 1]` scanned for λ-roots.
pub const LAMBDA_SCAN: usize = 400;
/// `|∂K/∂λ|` at or below this marks a degenerate branch.
pub const BRANCH_TOL: f64 = 1e-8;
const ENDPOINT_SAMPLES: usize = 50;
const ENDPOINT_SEED: u64 = 42;

/// Variable layout `lambda, x1..xn, y, eps`.
pub fn ccomb_names(n: usize) -> Vec<String> {
    let mut v = vec!["lambda".to_string()];
    v.extend(nsff_names(n));
    v
}

/// `X̃(λ, x, y, ε)` with endpoints `X⁺ = F`, `X⁻ = G`, switching function `x1` and optional `ε·ẏ = H`.
#[derive(Debug, Clone)]
pub struct ContinuousCombination {
    n: usize,
    xplus: Vec<CompiledExpr>,
    xminus: Vec<CompiledExpr>,
    xtilde: Vec<CompiledExpr>,
    fast: Option<CompiledExpr>,
}

impl ContinuousCombination {
    pub fn new(xplus: &[&str], xminus: &[&str], xtilde: &[&str], fast: Option<&str>) -> Result<Self> {
        let p = |v: &[&str]| v.iter().map(|s| parse(s)).collect::<std::result::Result<Vec<_>, _>>();
        let fast = fast.map(parse).transpose()?;
        Self::from_exprs(p(xplus)?, p(xminus)?, p(xtilde)?, fast)
    }

    pub fn from_exprs(xplus: Vec<Expr>, xminus: Vec<Expr>, xtilde: Vec<Expr>, fast: Option<Expr>) -> Result<Self> {
        let n = xplus.len();
        if n < 2 {
            return Err(Error::Dimension(format!("dimension must be at least 2, got {n}")));
        }
        if xminus.len() != n || xtilde.len() != n {
            return Err(Error::Dimension(format!(
                "xplus has {n} components, xminus {}, xtilde {}",
                xminus.len(),
                xtilde.len()
            )));
        }
        let names = nsff_names(n);
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let cnames = ccomb_names(n);
        let crefs: Vec<&str> = cnames.iter().map(String::as_str).collect();
        let cc = ContinuousCombination {
            n,
            xplus: compile_all(&xplus, &refs)?,
            xminus: compile_all(&xminus, &refs)?,
            xtilde: compile_all(&xtilde, &crefs)?,
            fast: fast.map(|e| e.compile(&refs)).transpose()?,
        };
        cc.check_endpoints()?;
        Ok(cc)
    }

    fn check_endpoints(&self) -> Result<()> {
        let mut rng = StdRng::seed_from_u64(ENDPOINT_SEED);
        for _ in 0..ENDPOINT_SAMPLES {
            let x: Vec<f64> = (0..self.n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let y = rng.gen_range(-1.0..1.0);
            let eps = rng.gen_range(0.0..0.5);
            for (lambda, side) in [(1.0, true), (-1.0, false)] {
                let (Ok(t), Ok(e)) = (self.xtilde_at(lambda, &x, y, eps), self.endpoint(side, &x, y, eps)) else {
                    continue;
                };
                let gap = dist(&t, &e);
                if gap > 1e-10 * (1.0 + norm2(&e)) {
                    return Err(Error::Assumption(format!(
                        "xtilde({lambda}, p) differs from x{} by {gap:e} at x = {x:?}",
                        if side { "plus" } else { "minus" }
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn has_fast(&self) -> bool {
        self.fast.is_some()
    }

    pub fn xplus_exprs(&self) -> Vec<Expr> {
        self.xplus.iter().map(|c| c.source().clone()).collect()
    }

    pub fn xminus_exprs(&self) -> Vec<Expr> {
        self.xminus.iter().map(|c| c.source().clone()).collect()
    }

    pub fn xtilde_exprs(&self) -> Vec<Expr> {
        self.xtilde.iter().map(|c| c.source().clone()).collect()
    }

    pub fn fast_expr(&self) -> Option<&Expr> {
        self.fast.as_ref().map(CompiledExpr::source)
    }

    fn slot(&self, x: &[f64], y: f64, eps: f64) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::Dimension(format!(
                "expected {} components, got {}",
                self.n,
                x.len()
            )));
        }
        let mut v = x.to_vec();
        v.push(y);
        v.push(eps);
        Ok(v)
    }

    fn endpoint(&self, plus: bool, x: &[f64], y: f64, eps: f64) -> Result<Vec<f64>> {
        let v = self.slot(x, y, eps)?;
        eval_all(if plus { &self.xplus } else { &self.xminus }, &v)
    }

    pub fn xtilde_at(&self, lambda: f64, x: &[f64], y: f64, eps: f64) -> Result<Vec<f64>> {
        let mut v = vec![lambda];
        v.extend(self.slot(x, y, eps)?);
        eval_all(&self.xtilde, &v)
    }

    /// `K(λ, p) = X̃(λ, p)·∇h = X̃₁`.
    pub fn k(&self, lambda: f64, x: &[f64], y: f64, eps: f64) -> Result<f64> {
        let mut v = vec![lambda];
        v.extend(self.slot(x, y, eps)?);
        Ok(self.xtilde[0].eval(&v)?)
    }

    pub fn dk_dlambda(&self, lambda: f64, x: &[f64], y: f64, eps: f64) -> Result<f64> {
        let mut v = vec![lambda];
        v.extend(self.slot(x, y, eps)?);
        Ok(self.xtilde[0].diff(0, &v, FD_SCALE)?)
    }

    pub fn fast_at(&self, x: &[f64], y: f64, eps: f64) -> Result<Option<f64>> {
        match &self.fast {
            Some(f) => Ok(Some(f.eval(&self.slot(x, y, eps)?)?)),
            None => Ok(None),
        }
    }

    /// The combination with `(y, ε)` frozen, as a function of `x` alone.
    pub fn slice(&self, y: f64, eps: f64) -> CombinationSlice {
        CombinationSlice {
            ends: EndpointSlice {
                cc: self.clone(),
                y,
                eps,
            },
        }
    }
}

/// `X⁺`, `X⁻` at fixed `(y, ε)` with switching function `x1`.
#[derive(Debug, Clone)]
pub struct EndpointSlice {
    cc: ContinuousCombination,
    y: f64,
    eps: f64,
}

impl PiecewiseField for EndpointSlice {
    fn dim(&self) -> usize {
        self.cc.n
    }
    fn plus(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.cc.endpoint(true, p, self.y, self.eps)
    }
    fn minus(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.cc.endpoint(false, p, self.y, self.eps)
    }
    fn switching(&self, p: &[f64]) -> Result<f64> {
        if p.len() != self.cc.n {
            return Err(Error::Dimension(format!(
                "expected {} components, got {}",
                self.cc.n,
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

#[derive(Debug, Clone)]
pub struct CombinationSlice {
    ends: EndpointSlice,
}

impl CombinationSlice {
    pub fn endpoint_system(&self) -> &EndpointSlice {
        &self.ends
    }
}

impl Combination for CombinationSlice {
    fn dim(&self) -> usize {
        self.ends.cc.n
    }
    fn blend(&self, lambda: f64, p: &[f64]) -> Result<Vec<f64>> {
        self.ends.cc.xtilde_at(lambda, p, self.ends.y, self.ends.eps)
    }
    fn endpoints(&self) -> &dyn PiecewiseField {
        &self.ends
    }
}

/// A root `λ*` of `K(·, p)` in `[−1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaBranch {
    pub lambda: f64,
    pub dk: f64,
    /// Position in order of decreasing λ.
    pub id: usize,
    /// `|λ*| < 1`.
    pub interior: bool,
    /// `|∂K/∂λ| ≤ 1e-8`.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CKind {
    CSewing,
    CSliding,
}

impl CKind {
    pub fn name(self) -> &'static str {
        match self {
            CKind::CSewing => "c-sewing",
            CKind::CSliding => "c-sliding",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CClassification {
    pub kind: CKind,
    /// All roots on the closed interval, boundary roots included.
    pub branches: Vec<LambdaBranch>,
}

impl CClassification {
    pub fn interior(&self) -> impl Iterator<Item = &LambdaBranch> {
        self.branches.iter().filter(|b| b.interior)
    }
}

fn touching_roots(g: &dyn Fn(f64) -> Result<f64>, n: usize, found: &[f64]) -> Result<Vec<f64>> {
    let nodes: Vec<f64> = (0..=n).map(|i| -1.0 + 2.0 * i as f64 / n as f64).collect();
    let vals: Vec<f64> = nodes.iter().map(|&t| g(t)).collect::<Result<_>>()?;
    let spacing = 2.0 / n as f64;
    let mut out = Vec::new();
    for i in 1..n {
        let (a, b, c) = (vals[i - 1], vals[i], vals[i + 1]);
        if (a < 0.0) != (c < 0.0) || b == 0.0 || (a < 0.0) != (b < 0.0) {
            continue;
        }
        if b.abs() > a.abs() || b.abs() > c.abs() {
            continue;
        }
        let (mut lo, mut hi) = (nodes[i - 1], nodes[i + 1]);
        let gr = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let m1 = hi - gr * (hi - lo);
            let m2 = lo + gr * (hi - lo);
            if g(m1)?.abs() <= g(m2)?.abs() {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let t = 0.5 * (lo + hi);
        if g(t)?.abs() <= 1e-10 && found.iter().all(|r| (r - t).abs() > spacing) {
            out.push(t);
        }
    }
    Ok(out)
}

/// λ-roots of `K(·, p)` on `[−1, 1]` at a point `p = (0, x2..xn)` of Σ.
pub fn c_classify(cc: &ContinuousCombination, p: &[f64], y: f64, eps: f64) -> Result<CClassification> {
    if p.len() != cc.n {
        return Err(Error::Dimension(format!(
            "expected {} components, got {}",
            cc.n,
            p.len()
        )));
    }
    if p[0].abs() > 1e-9 {
        return Err(Error::NotOnSigma { h: p[0] });
    }
    let g = |l: f64| cc.k(l, p, y, eps);
    let mut roots = scan_roots(&g, -1.0, 1.0, LAMBDA_SCAN)?;
    let extra = touching_roots(&g, LAMBDA_SCAN, &roots)?;
    roots.extend(extra);
    roots.sort_by(|a, b| b.total_cmp(a));
    let branches: Vec<LambdaBranch> = roots
        .into_iter()
        .enumerate()
        .map(|(id, lambda)| {
            let dk = cc.dk_dlambda(lambda, p, y, eps)?;
            Ok(LambdaBranch {
                lambda,
                dk,
                id,
                interior: lambda.abs() < 1.0,
                degenerate: dk.abs() <= BRANCH_TOL,
            })
        })
        .collect::<Result<_>>()?;
    let kind = if branches.iter().any(|b| b.interior) {
        CKind::CSliding
    } else {
        CKind::CSewing
    };
    Ok(CClassification { kind, branches })
}

/// `X̃(λ*, p)` along a non-degenerate branch.
pub fn c_sliding_vf(
    cc: &ContinuousCombination,
    p: &[f64],
    y: f64,
    eps: f64,
    branch: &LambdaBranch,
) -> Result<Vec<f64>> {
    if branch.degenerate {
        return Err(Error::DegenerateBranch {
            lambda: branch.lambda,
            derivative: branch.dk,
        });
    }
    let v = cc.xtilde_at(branch.lambda, p, y, eps)?;
    if v[0].abs() > 1e-10 * (1.0 + norm2(&v)) {
        return Err(Error::Assumption(format!(
            "lambda = {} is not a root of K at this point (K = {:e})",
            branch.lambda, v[0]
        )));
    }
    Ok(v)
}

/// How the starting λ of a sweep is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaSeed {
    /// Branch `id` of `c_classify` at `p0`, `ε = 0`.
    Branch(usize),
    /// An explicit starting value, possibly outside `[−1, 1]`.
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CEquilibrium {
    pub lambda: f64,
    pub interior: bool,
    pub report: EquilibriumReport,
}

#[derive(Debug, Clone)]
pub struct CSweepRow {
    pub param: f64,
    pub outcome: std::result::Result<CEquilibrium, Error>,
}

/// Equilibria of the c-sliding field near `p0 = (0, x2..xn, y)`, jointly solving
/// `K = 0`, `X̃ᵢ = 0` (i ≥ 2) and `H = 0` for `(λ, x2..xn, y)` at each ε.
pub fn c_persistence_sweep(
    cc: &ContinuousCombination,
    p0: &[f64],
    seed: LambdaSeed,
    eps_grid: &[f64],
) -> Result<Vec<CSweepRow>> {
    let n = cc.n;
    if p0.len() != n + 1 {
        return Err(Error::Dimension(format!("p0 needs {} components (x1..x{n}, y)", n + 1)));
    }
    let (x0, y0) = (&p0[..n], p0[n]);
    let lambda0 = match seed {
        LambdaSeed::Value(l) => l,
        LambdaSeed::Branch(id) => {
            let cl = c_classify(cc, x0, y0, 0.0)?;
            cl.branches
                .iter()
                .find(|b| b.id == id)
                .ok_or_else(|| Error::Assumption(format!("no lambda branch with id {id} at p0")))?
                .lambda
        }
    };
    if let Some(f) = &cc.fast {
        let hy = f.diff(n, &cc.slot(x0, y0, 0.0)?, FD_SCALE)?;
        if hy.abs() <= BRANCH_TOL {
            return Err(Error::Assumption(format!("dH/dy = {hy:e} at p0")));
        }
    }
    let dq = cc.dk_dlambda(lambda0, x0, y0, 0.0)?;
    if dq.abs() <= BRANCH_TOL {
        return Err(Error::DegenerateBranch {
            lambda: lambda0,
            derivative: dq,
        });
    }
    let fast = cc.fast.is_some();
    let unpack = |u: &[f64]| -> (f64, Vec<f64>, f64) {
        let mut x = vec![0.0];
        x.extend_from_slice(&u[1..n]);
        let y = if fast { u[n] } else { y0 };
        (u[0], x, y)
    };
    let system = |u: &[f64], eps: f64| -> Result<Vec<f64>> {
        let (l, x, y) = unpack(u);
        let mut out = cc.xtilde_at(l, &x, y, eps)?;
        if let Some(h) = cc.fast_at(&x, y, eps)? {
            out.push(h);
        }
        Ok(out)
    };
    let mut u: Vec<f64> = vec![lambda0];
    u.extend_from_slice(&x0[1..]);
    if fast {
        u.push(y0);
    }
    let r0 = norm2(&system(&u, 0.0)?);
    if r0 > 1e-8 {
        return Err(Error::Assumption(format!(
            "p0 is not an equilibrium of the c-sliding field (residual {r0:e})"
        )));
    }
    let mut rows = Vec::new();
    for &eps in eps_grid {
        let f = |v: &[f64]| system(v, eps);
        let outcome = newton_solve(&f, &u, &NewtonOptions::default()).and_then(|sol| {
            let lambda = sol.root[0];
            let (_, x, y) = unpack(&sol.root);
            let reduced = |w: &[f64]| -> Result<Vec<f64>> {
                let mut v = vec![lambda];
                v.extend_from_slice(w);
                let (l, xx, yy) = unpack(&v);
                let mut l = l;
                for _ in 0..30 {
                    let k = cc.k(l, &xx, yy, eps)?;
                    let d = cc.dk_dlambda(l, &xx, yy, eps)?;
                    if d == 0.0 {
                        break;
                    }
                    l -= k / d;
                    if (k / d).abs() < 1e-14 {
                        break;
                    }
                }
                let mut out = cc.xtilde_at(l, &xx, yy, eps)?[1..].to_vec();
                if let Some(h) = cc.fast_at(&xx, yy, eps)? {
                    out.push(if eps > 0.0 { h / eps } else { h });
                }
                Ok(out)
            };
            let w = sol.root[1..].to_vec();
            let eigenvalues = if w.is_empty() {
                vec![]
            } else {
                eigenvalues_small(&jacobian_fd(&reduced, &w, 1e-6)?)?
            };
            let (n_stable, n_unstable, n_center) = stability_counts(&eigenvalues);
            let mut point = x.clone();
            point.push(y);
            Ok(CEquilibrium {
                lambda,
                interior: lambda.abs() < 1.0,
                report: EquilibriumReport {
                    distance: Some(dist(&point, p0)),
                    point,
                    eigenvalues,
                    n_stable,
                    n_unstable,
                    n_center,
                    residual: sol.residual,
                    context: "c-sliding".into(),
                    param: eps,
                },
            })
        });
        if let Ok(ce) = &outcome {
            u = vec![ce.lambda];
            u.extend_from_slice(&ce.report.point[1..n]);
            if fast {
                u.push(ce.report.point[n]);
            }
        }
        rows.push(CSweepRow { param: eps, outcome });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub samples: usize,
    /// Largest `|φ(x̄₁*) − λ*|` over matched roots.
    pub max_root_mismatch: f64,
    /// Largest relative gap between `∂s₁/∂x̄₁` and `φ′(x̄₁*)·∂K/∂λ`.
    pub max_deriv_mismatch: f64,
    /// Samples where the two root sets have different sizes.
    pub count_mismatches: usize,
    pub max_branches: usize,
    pub passed: bool,
}

/// Compares the c-sliding roots with the slow manifold of the blown-up nonlinear regularization
/// at `n` points of the segment `x2 ∈ [a, b]` (other slow coordinates from `base`).
pub fn nonlinear_equivalence_check(
    cc: &ContinuousCombination,
    phi: PhiKind,
    base: &[f64],
    coord: usize,
    range: (f64, f64),
    n: usize,
    y: f64,
    eps: f64,
) -> Result<EquivalenceReport> {
    if base.len() != cc.n || coord == 0 || coord >= cc.n {
        return Err(Error::Dimension(
            "base point or sampling coordinate out of range".into(),
        ));
    }
    let slice = cc.slice(y, eps);
    let fam = nonlinear_regularize(slice, Transition::Monotone(phi))?;
    let sfs = directional_blowup(&fam, 0)?;
    let mut rep = EquivalenceReport {
        samples: 0,
        max_root_mismatch: 0.0,
        max_deriv_mismatch: 0.0,
        count_mismatches: 0,
        max_branches: 0,
        passed: true,
    };
    for i in 0..n {
        let mut p = base.to_vec();
        p[0] = 0.0;
        p[coord] = if n == 1 {
            range.0
        } else {
            range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64
        };
        let cl = c_classify(cc, &p, y, eps)?;
        if let Some(b) = cl.interior().find(|b| b.degenerate) {
            return Err(Error::DegenerateBranch {
                lambda: b.lambda,
                derivative: b.dk,
            });
        }
        let lam: Vec<&LambdaBranch> = cl.interior().collect();
        let slow: Vec<_> = critical_root(&sfs, &p[1..])?
            .into_iter()
            .filter(|s| s.ybar.abs() < 1.0)
            .collect();
        rep.samples += 1;
        rep.max_branches = rep.max_branches.max(lam.len());
        if lam.len() != slow.len() {
            rep.count_mismatches += 1;
            continue;
        }
        let mut mapped: Vec<(f64, f64, f64)> = slow
            .iter()
            .map(|s| (phi.eval(s.ybar), s.dbeta, phi.deriv(s.ybar)))
            .collect();
        mapped.sort_by(|a, b| b.0.total_cmp(&a.0));
        for (b, (l, ds, dphi)) in lam.iter().zip(&mapped) {
            rep.max_root_mismatch = rep.max_root_mismatch.max((b.lambda - l).abs());
            let want = dphi * b.dk;
            rep.max_deriv_mismatch = rep.max_deriv_mismatch.max((ds - want).abs() / (1.0 + want.abs()));
        }
    }
    rep.passed = rep.count_mismatches == 0 && rep.max_root_mismatch <= 1e-8 && rep.max_deriv_mismatch <= 1e-5;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psys::{classify_point, sliding_vf, PiecewiseSystem, SigmaKind};

    pub(crate) fn ex1() -> ContinuousCombination {
        ContinuousCombination::new(
            &["x2-1+eps", "-1+eps"],
            &["x2+eps", "1+eps"],
            &["lambda^2*(x2+eps)-(lambda+1)/2", "lambda^2-lambda-1+eps"],
            Some("y"),
        )
        .unwrap()
    }

    fn linear() -> ContinuousCombination {
        ContinuousCombination::new(
            &["x2-1", "-1"],
            &["x2", "1"],
            &[
                "((1+lambda)*(x2-1)+(1-lambda)*x2)/2",
                "((1+lambda)*(-1)+(1-lambda)*1)/2",
            ],
            None,
        )
        .unwrap()
    }

    fn p_closed(eps: f64, sign: f64) -> f64 {
        let e = eps;
        (-4.0 * e.powi(3) + 8.0 * e * e - 5.0 * e + 2.0 + sign * (5.0 * e * e - 4.0 * e.powi(3)).sqrt())
            / (4.0 * (e * e - 2.0 * e + 1.0))
    }

    #[test]
    fn endpoints_are_checked() {
        assert!(matches!(
            ContinuousCombination::new(&["1", "1"], &["2", "2"], &["lambda", "1"], None),
            Err(Error::Assumption(_))
        ));
    }

    #[test]
    fn ex1_branches() {
        let cc = ex1();
        let cl = c_classify(&cc, &[0.0, 3.0], 0.0, 0.0).unwrap();
        let l: Vec<f64> = cl.branches.iter().map(|b| b.lambda).collect();
        assert_eq!(cl.kind, CKind::CSliding);
        assert!((l[0] - 0.5).abs() < 1e-10 && (l[1] + 1.0 / 3.0).abs() < 1e-10, "{l:?}");
        let cl = c_classify(&cc, &[0.0, 1.0], 0.0, 0.0).unwrap();
        let l: Vec<f64> = cl.branches.iter().map(|b| b.lambda).collect();
        assert!((l[0] - 1.0).abs() < 1e-10 && (l[1] + 0.5).abs() < 1e-10, "{l:?}");
        assert!(!cl.branches[0].interior && cl.branches[1].interior);
        let cl = c_classify(&cc, &[0.0, 0.5], 0.0, 0.0).unwrap();
        assert_eq!(cl.branches.len(), 1);
        assert!((cl.branches[0].lambda - (1.0 - 5f64.sqrt()) / 2.0).abs() < 1e-10);
        assert_eq!(c_classify(&cc, &[0.0, -0.1], 0.0, 0.0).unwrap().kind, CKind::CSewing);
        assert!(matches!(
            c_classify(&cc, &[0.1, 0.5], 0.0, 0.0),
            Err(Error::NotOnSigma { .. })
        ));
    }

    #[test]
    fn linear_combination_on_sewing_point() {
        let cc = ContinuousCombination::new(
            &["2", "x2"],
            &["1", "1"],
            &["(3+lambda)/2", "((1+lambda)*x2+(1-lambda))/2"],
            None,
        )
        .unwrap();
        assert_eq!(c_classify(&cc, &[0.0, 0.4], 0.0, 0.0).unwrap().kind, CKind::CSewing);
    }

    #[test]
    fn ex1_reduced_c_sliding_field() {
        let cc = ex1();
        for i in 1..40 {
            let x2 = 0.05 * i as f64;
            let cl = c_classify(&cc, &[0.0, x2], 0.0, 0.0).unwrap();
            let b = cl.interior().last().unwrap();
            let v = c_sliding_vf(&cc, &[0.0, x2], 0.0, 0.0, b).unwrap();
            let want = (2.0 * x2 - 1.0) * (-4.0 * x2 + (8.0 * x2 + 1.0).sqrt() - 1.0) / (8.0 * x2 * x2);
            assert!((v[1] - want).abs() < 1e-9, "{x2} {} {want}", v[1]);
            assert!(v[0].abs() <= 1e-10 * (1.0 + norm2(&v)));
        }
        let cl = c_classify(&cc, &[0.0, 0.5], 0.0, 0.0).unwrap();
        assert!(c_sliding_vf(&cc, &[0.0, 0.5], 0.0, 0.0, &cl.branches[0]).unwrap()[1].abs() < 1e-10);
    }

    #[test]
    fn linear_matches_filippov() {
        let cc = linear();
        let sys = PiecewiseSystem::new(&["x2-1", "-1"], &["x2", "1"], "x1").unwrap();
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..20 {
            let p = [0.0, rng.gen_range(0.01..0.99)];
            let cl = c_classify(&cc, &p, 0.0, 0.0).unwrap();
            let v = c_sliding_vf(&cc, &p, 0.0, 0.0, &cl.branches[0]).unwrap();
            assert!(dist(&v, &sliding_vf(&sys, &p).unwrap()) < 1e-10);
        }
    }

    #[test]
    fn c_sweep_matches_closed_form() {
        let cc = ex1();
        let p0 = [0.0, 0.5, 0.0];
        let rows = c_persistence_sweep(&cc, &p0, LambdaSeed::Branch(0), &[0.1, 0.01]).unwrap();
        for r in &rows {
            let ce = r.outcome.as_ref().unwrap();
            assert!((ce.report.point[1] - p_closed(r.param, 1.0)).abs() < 1e-9);
            assert!(ce.interior);
        }
        // Both roots of λ² − λ − 1 give the equilibrium x2 = 1/2 at ε = 0.
        let seed = LambdaSeed::Value((1.0 + 5f64.sqrt()) / 2.0);
        let rows = c_persistence_sweep(&cc, &p0, seed, &[0.1, 0.01]).unwrap();
        for r in &rows {
            let ce = r.outcome.as_ref().unwrap();
            assert!((ce.report.point[1] - p_closed(r.param, -1.0)).abs() < 1e-9);
            assert!(!ce.interior);
        }
    }

    #[test]
    fn inclusions_on_ex1() {
        let cc = ex1();
        let ends = cc.slice(0.0, 0.0);
        let sys = ends.endpoint_system();
        for i in 0..300 {
            let x2 = -1.0 + 3.0 * (i as f64 + 0.5) / 300.0;
            let p = [0.0, x2];
            let f = classify_point(sys, &p).unwrap().kind;
            let c = c_classify(&cc, &p, 0.0, 0.0).unwrap().kind;
            if f.is_sliding() {
                assert_eq!(c, CKind::CSliding, "x2 = {x2}");
            }
            if c == CKind::CSewing {
                assert_eq!(f, SigmaKind::Sewing, "x2 = {x2}");
            }
        }
    }

    #[test]
    fn equivalence_with_nonlinear_regularization() {
        let rep =
            nonlinear_equivalence_check(&ex1(), PhiKind::Cubic, &[0.0, 0.0], 1, (0.2, 0.9), 50, 0.0, 0.0).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert_eq!(rep.max_branches, 1);
        let rep =
            nonlinear_equivalence_check(&linear(), PhiKind::Cubic, &[0.0, 0.0], 1, (0.1, 0.9), 30, 0.0, 0.0).unwrap();
        assert!(rep.passed, "{rep:?}");
        let degenerate = ContinuousCombination::new(&["1", "1"], &["1", "1"], &["lambda^2", "1"], None).unwrap();
        let cl = c_classify(&degenerate, &[0.0, 0.3], 0.0, 0.0).unwrap();
        assert!(cl.branches.iter().any(|b| b.degenerate && b.lambda.abs() < 1e-4));
        assert!(matches!(
            c_sliding_vf(&degenerate, &[0.0, 0.3], 0.0, 0.0, &cl.branches[0]),
            Err(Error::DegenerateBranch { .. })
        ));
        assert!(matches!(
            nonlinear_equivalence_check(&degenerate, PhiKind::Cubic, &[0.0, 0.0], 1, (0.1, 0.9), 5, 0.0, 0.0),
            Err(Error::DegenerateBranch { .. })
        ));
    }
}
