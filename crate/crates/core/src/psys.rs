//! Piecewise-smooth systems `X = X⁺` on `{h > 0}`, `X = X⁻` on `{h < 0}`, classification of points
//! of the switching manifold `Σ = {h = 0}` and the Filippov sliding vector field.

use std::fmt;

use crate::error::{Error, Result};
use crate::expr::{parse, CompiledExpr, Expr, FD_SCALE};
use crate::linalg::{dot, norm2};

pub const TOL_ON_SIGMA: f64 = 1e-9;
pub const TOL_TANGENT: f64 = 1e-9;
/// Gradients of `h` shorter than this are treated as vanishing.
pub const GRAD_TOL: f64 = 1e-12;
/// Smallest admissible `|(X⁺ - X⁻)·∇h|` in the sliding formula.
pub const DENOM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub on_sigma: f64,
    pub tangent: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            on_sigma: TOL_ON_SIGMA,
            tangent: TOL_TANGENT,
        }
    }
}

/// Anything that provides the data of a piecewise system.
///
/// Implemented by [`PiecewiseSystem`] and by reduced systems on critical manifolds.
pub trait PiecewiseField: Send + Sync {
    fn dim(&self) -> usize;
    fn plus(&self, p: &[f64]) -> Result<Vec<f64>>;
    fn minus(&self, p: &[f64]) -> Result<Vec<f64>>;
    fn switching(&self, p: &[f64]) -> Result<f64>;

    /// Index `k` when `h(p) = p[k]` identically.
    fn aligned_coord(&self) -> Option<usize> {
        None
    }

    fn switching_grad(&self, p: &[f64]) -> Result<Vec<f64>> {
        if let Some(k) = self.aligned_coord() {
            let mut g = vec![0.0; self.dim()];
            g[k] = 1.0;
            return Ok(g);
        }
        let mut buf = p.to_vec();
        let mut g = Vec::with_capacity(p.len());
        for i in 0..p.len() {
            let s = FD_SCALE * p[i].abs().max(1.0);
            buf[i] = p[i] + s;
            let fp = self.switching(&buf)?;
            buf[i] = p[i] - s;
            let fm = self.switching(&buf)?;
            buf[i] = p[i];
            g.push((fp - fm) / (2.0 * s));
        }
        Ok(g)
    }

    fn tolerances(&self) -> Tolerances {
        Tolerances::default()
    }
}

impl<T: PiecewiseField + ?Sized> PiecewiseField for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn plus(&self, p: &[f64]) -> Result<Vec<f64>> {
        (**self).plus(p)
    }
    fn minus(&self, p: &[f64]) -> Result<Vec<f64>> {
        (**self).minus(p)
    }
    fn switching(&self, p: &[f64]) -> Result<f64> {
        (**self).switching(p)
    }
    fn aligned_coord(&self) -> Option<usize> {
        (**self).aligned_coord()
    }
    fn switching_grad(&self, p: &[f64]) -> Result<Vec<f64>> {
        (**self).switching_grad(p)
    }
    fn tolerances(&self) -> Tolerances {
        (**self).tolerances()
    }
}

impl<T: PiecewiseField + ?Sized> PiecewiseField for std::sync::Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn plus(&self, p: &[f64]) -> Result<Vec<f64>> {
        (**self).plus(p)
    }
    fn minus(&self, p: &[f64]) -> Result<Vec<f64>> {
        (**self).minus(p)
    }
    fn switching(&self, p: &[f64]) -> Result<f64> {
        (**self).switching(p)
    }
    fn aligned_coord(&self) -> Option<usize> {
        (**self).aligned_coord()
    }
    fn switching_grad(&self, p: &[f64]) -> Result<Vec<f64>> {
        (**self).switching_grad(p)
    }
    fn tolerances(&self) -> Tolerances {
        (**self).tolerances()
    }
}

/// State variable names `x1..xn`.
pub fn state_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

/// Index of the coordinate if `e` is a bare variable from `names`.
pub(crate) fn coord_of(e: &Expr, names: &[String]) -> Option<usize> {
    e.as_var().and_then(|v| names.iter().position(|n| n == v))
}

pub(crate) fn compile_all(exprs: &[Expr], names: &[&str]) -> Result<Vec<CompiledExpr>> {
    exprs.iter().map(|e| Ok(e.compile(names)?)).collect()
}

pub(crate) fn eval_all(exprs: &[CompiledExpr], values: &[f64]) -> Result<Vec<f64>> {
    exprs.iter().map(|e| Ok(e.eval(values)?)).collect()
}

/// A piecewise system defined by expressions in `x1..xn`.
#[derive(Debug, Clone)]
pub struct PiecewiseSystem {
    dim: usize,
    xplus: Vec<CompiledExpr>,
    xminus: Vec<CompiledExpr>,
    h: CompiledExpr,
    aligned: Option<usize>,
    tol: Tolerances,
}

impl PiecewiseSystem {
    pub fn new(xplus: &[&str], xminus: &[&str], h: &str) -> Result<Self> {
        let p = xplus
            .iter()
            .map(|s| parse(s))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let m = xminus
            .iter()
            .map(|s| parse(s))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::from_exprs(p, m, parse(h)?)
    }

    pub fn from_exprs(xplus: Vec<Expr>, xminus: Vec<Expr>, h: Expr) -> Result<Self> {
        let dim = xplus.len();
        if dim < 2 {
            return Err(Error::Dimension(format!("piecewise systems need dim >= 2, got {dim}")));
        }
        if xminus.len() != dim {
            return Err(Error::Dimension(format!(
                "xplus has {dim} components but xminus has {}",
                xminus.len()
            )));
        }
        let names = state_names(dim);
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let aligned = coord_of(&h, &names);
        Ok(PiecewiseSystem {
            dim,
            xplus: compile_all(&xplus, &refs)?,
            xminus: compile_all(&xminus, &refs)?,
            h: h.compile(&refs)?,
            aligned,
            tol: Tolerances::default(),
        })
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    /// The same system with `X⁺`, `X⁻` exchanged and `h` negated.
    pub fn mirrored(&self) -> Self {
        let neg_h = Expr::Neg(Box::new(self.h.source().clone()));
        let mut out =
            Self::from_exprs(self.xminus_exprs(), self.xplus_exprs(), neg_h).expect("mirroring a valid system");
        out.tol = self.tol;
        out
    }

    pub fn xplus_exprs(&self) -> Vec<Expr> {
        self.xplus.iter().map(|c| c.source().clone()).collect()
    }

    pub fn xminus_exprs(&self) -> Vec<Expr> {
        self.xminus.iter().map(|c| c.source().clone()).collect()
    }

    pub fn h_expr(&self) -> &Expr {
        self.h.source()
    }
}

impl PiecewiseField for PiecewiseSystem {
    fn dim(&self) -> usize {
        self.dim
    }

    fn plus(&self, p: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, p)?;
        eval_all(&self.xplus, p)
    }

    fn minus(&self, p: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, p)?;
        eval_all(&self.xminus, p)
    }

    fn switching(&self, p: &[f64]) -> Result<f64> {
        check_dim(self.dim, p)?;
        Ok(self.h.eval(p)?)
    }

    fn aligned_coord(&self) -> Option<usize> {
        self.aligned
    }

    fn switching_grad(&self, p: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, p)?;
        if let Some(k) = self.aligned {
            let mut g = vec![0.0; self.dim];
            g[k] = 1.0;
            return Ok(g);
        }
        (0..self.dim).map(|i| Ok(self.h.diff(i, p, FD_SCALE)?)).collect()
    }

    fn tolerances(&self) -> Tolerances {
        self.tol
    }
}

pub(crate) fn check_dim(n: usize, p: &[f64]) -> Result<()> {
    if p.len() != n {
        return Err(Error::Dimension(format!(
            "expected a point in R^{n}, got {} components",
            p.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SigmaKind {
    Sewing,
    SlidingAttracting,
    SlidingRepelling,
    TangencyPlus,
    TangencyMinus,
}

impl SigmaKind {
    pub fn is_sliding(self) -> bool {
        matches!(self, SigmaKind::SlidingAttracting | SigmaKind::SlidingRepelling)
    }

    pub fn is_tangency(self) -> bool {
        matches!(self, SigmaKind::TangencyPlus | SigmaKind::TangencyMinus)
    }

    pub fn name(self) -> &'static str {
        match self {
            SigmaKind::Sewing => "sewing",
            SigmaKind::SlidingAttracting => "sliding-attracting",
            SigmaKind::SlidingRepelling => "sliding-repelling",
            SigmaKind::TangencyPlus => "tangency-plus",
            SigmaKind::TangencyMinus => "tangency-minus",
        }
    }
}

impl fmt::Display for SigmaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Classification of a point of Σ with the Lie derivatives `X⁺h`, `X⁻h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaClass {
    pub kind: SigmaKind,
    pub lplus: f64,
    pub lminus: f64,
}

/// Sign logic shared by all classifications; tangencies take precedence.
pub fn classify_derivatives(lplus: f64, lminus: f64, tangent: f64) -> SigmaKind {
    if lplus.abs() <= tangent {
        SigmaKind::TangencyPlus
    } else if lminus.abs() <= tangent {
        SigmaKind::TangencyMinus
    } else if lplus * lminus > 0.0 {
        SigmaKind::Sewing
    } else if lplus < 0.0 {
        SigmaKind::SlidingAttracting
    } else {
        SigmaKind::SlidingRepelling
    }
}

/// `(X⁺·∇h, X⁻·∇h, X⁺, X⁻)` at `p`, with the gradient checked for degeneracy.
pub fn lie_derivatives<S: PiecewiseField + ?Sized>(sys: &S, p: &[f64]) -> Result<(f64, f64, Vec<f64>, Vec<f64>)> {
    let grad = sys.switching_grad(p)?;
    let norm = norm2(&grad);
    if !(norm > GRAD_TOL) {
        return Err(Error::DegenerateGradient { norm });
    }
    let xp = sys.plus(p)?;
    let xm = sys.minus(p)?;
    Ok((dot(&xp, &grad), dot(&xm, &grad), xp, xm))
}

pub fn classify_point<S: PiecewiseField + ?Sized>(sys: &S, p: &[f64]) -> Result<SigmaClass> {
    let tol = sys.tolerances();
    let h = sys.switching(p)?;
    if h.abs() > tol.on_sigma {
        return Err(Error::NotOnSigma { h });
    }
    let (lplus, lminus, _, _) = lie_derivatives(sys, p)?;
    Ok(SigmaClass {
        kind: classify_derivatives(lplus, lminus, tol.tangent),
        lplus,
        lminus,
    })
}

/// Filippov formula without the on-Σ and sliding checks; used inside integrators,
/// where stage points sit slightly off Σ.
pub fn sliding_formula<S: PiecewiseField + ?Sized>(sys: &S, p: &[f64]) -> Result<Vec<f64>> {
    let (lp, lm, xp, xm) = lie_derivatives(sys, p)?;
    let denom = lp - lm;
    if denom.abs() < DENOM_TOL {
        return Err(Error::SmallDenominator { value: denom });
    }
    Ok(xp.iter().zip(&xm).map(|(a, b)| (lp * b - lm * a) / denom).collect())
}

fn sliding_data<S: PiecewiseField + ?Sized>(sys: &S, p: &[f64]) -> Result<(SigmaClass, Vec<f64>, Vec<f64>)> {
    let tol = sys.tolerances();
    let h = sys.switching(p)?;
    if h.abs() > tol.on_sigma {
        return Err(Error::NotOnSigma { h });
    }
    let (lplus, lminus, xp, xm) = lie_derivatives(sys, p)?;
    let class = SigmaClass {
        kind: classify_derivatives(lplus, lminus, tol.tangent),
        lplus,
        lminus,
    };
    if !class.kind.is_sliding() {
        return Err(Error::NotSliding {
            class: class.kind.to_string(),
        });
    }
    let denom = lplus - lminus;
    if denom.abs() < DENOM_TOL {
        return Err(Error::SmallDenominator { value: denom });
    }
    Ok((class, xp, xm))
}

/// Filippov sliding vector field `(X⁺h·X⁻ − X⁻h·X⁺) / ((X⁺ − X⁻)·h)`.
pub fn sliding_vf<S: PiecewiseField + ?Sized>(sys: &S, p: &[f64]) -> Result<Vec<f64>> {
    let (c, xp, xm) = sliding_data(sys, p)?;
    let denom = c.lplus - c.lminus;
    Ok(xp
        .iter()
        .zip(&xm)
        .map(|(a, b)| (c.lplus * b - c.lminus * a) / denom)
        .collect())
}

/// Weight `s` with `X^Σ = (1 − s)X⁺ + sX⁻`.
pub fn convex_coefficient<S: PiecewiseField + ?Sized>(sys: &S, p: &[f64]) -> Result<f64> {
    let (c, _, _) = sliding_data(sys, p)?;
    Ok(c.lplus / (c.lplus - c.lminus))
}

/// Straight segment `p(u) = start + u·(end − start)`, `u ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: Vec<f64>,
    pub end: Vec<f64>,
}

impl Segment {
    pub fn new(start: Vec<f64>, end: Vec<f64>) -> Self {
        Segment { start, end }
    }

    /// Segment along coordinate `k` from `a` to `b`, other coordinates taken from `base`.
    pub fn along(base: &[f64], k: usize, a: f64, b: f64) -> Self {
        let mut start = base.to_vec();
        let mut end = base.to_vec();
        start[k] = a;
        end[k] = b;
        Segment { start, end }
    }

    pub fn point(&self, u: f64) -> Vec<f64> {
        self.start.iter().zip(&self.end).map(|(a, b)| a + u * (b - a)).collect()
    }

    pub fn length(&self) -> f64 {
        crate::linalg::dist(&self.start, &self.end)
    }

    /// `n` equispaced parameters including both ends.
    pub fn params(n: usize) -> Vec<f64> {
        match n {
            0 => vec![],
            1 => vec![0.0],
            _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSample {
    pub u: f64,
    pub point: Vec<f64>,
    pub class: SigmaClass,
}

/// A point where `X⁺h` (`Plus`) or `X⁻h` (`Minus`) vanishes.
#[derive(Debug, Clone, PartialEq)]
pub struct Boundary {
    pub u: f64,
    pub point: Vec<f64>,
    pub kind: SigmaKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub kind: SigmaKind,
    pub u_start: f64,
    pub u_end: f64,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaScan {
    pub samples: Vec<ScanSample>,
    pub boundaries: Vec<Boundary>,
    pub intervals: Vec<Interval>,
}

impl SigmaScan {
    pub fn intervals_of(&self, kind: SigmaKind) -> impl Iterator<Item = &Interval> {
        self.intervals.iter().filter(move |i| i.kind == kind)
    }
}

/// Classifies `n` samples of a segment lying on Σ and splits it into runs of equal class.
///
/// Run boundaries are the zeros of `X⁺h` or `X⁻h` between samples, located by bisection
/// until the bracket is shorter than `1e-12` in state space.
pub fn scan_sigma<S: PiecewiseField + ?Sized>(sys: &S, seg: &Segment, n: usize) -> Result<SigmaScan> {
    if n < 2 {
        return Err(Error::Dimension("scan_sigma needs at least two samples".into()));
    }
    let tol = sys.tolerances();
    let samples: Vec<ScanSample> = Segment::params(n)
        .into_iter()
        .map(|u| {
            let point = seg.point(u);
            let class = classify_point(sys, &point)?;
            Ok(ScanSample { u, point, class })
        })
        .collect::<Result<_>>()?;

    let len = seg.length().max(f64::MIN_POSITIVE);
    let lie = |u: f64, which: bool| -> Result<f64> {
        let (lp, lm, _, _) = lie_derivatives(sys, &seg.point(u))?;
        Ok(if which { lp } else { lm })
    };
    let mut boundaries = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        if s.class.kind.is_tangency() {
            boundaries.push(Boundary {
                u: s.u,
                point: s.point.clone(),
                kind: s.class.kind,
            });
            continue;
        }
        let Some(next) = samples.get(i + 1) else { break };
        if next.class.kind.is_tangency() {
            continue;
        }
        for (which, kind) in [(true, SigmaKind::TangencyPlus), (false, SigmaKind::TangencyMinus)] {
            let (a, b) = if which {
                (s.class.lplus, next.class.lplus)
            } else {
                (s.class.lminus, next.class.lminus)
            };
            if a * b >= 0.0 {
                continue;
            }
            let (mut lo, mut hi, mut flo) = (s.u, next.u, a);
            while (hi - lo) * len > 1e-12 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let fm = lie(mid, which)?;
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            let u = 0.5 * (lo + hi);
            boundaries.push(Boundary {
                u,
                point: seg.point(u),
                kind,
            });
        }
    }
    boundaries.sort_by(|a, b| a.u.total_cmp(&b.u));

    let mut cuts: Vec<f64> = vec![0.0];
    cuts.extend(boundaries.iter().map(|b| b.u));
    cuts.push(1.0);
    cuts.dedup();
    let mut intervals: Vec<Interval> = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let kind = match samples
            .iter()
            .find(|s| s.u > a && s.u < b && !s.class.kind.is_tangency())
        {
            Some(s) => s.class.kind,
            None => {
                let (lp, lm, _, _) = lie_derivatives(sys, &seg.point(0.5 * (a + b)))?;
                classify_derivatives(lp, lm, tol.tangent)
            }
        };
        match intervals.last_mut() {
            Some(last) if last.kind == kind && last.u_end == a && !boundaries.iter().any(|bd| bd.u == a) => {
                last.u_end = b;
                last.end = seg.point(b);
            }
            _ => intervals.push(Interval {
                kind,
                u_start: a,
                u_end: b,
                start: seg.point(a),
                end: seg.point(b),
            }),
        }
    }
    Ok(SigmaScan {
        samples,
        boundaries,
        intervals,
    })
}
