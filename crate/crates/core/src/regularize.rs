//! Transition functions and the smooth families built from them:
//! ST-regularization, r-regularization and nonlinear regularization.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::psys::{PiecewiseField, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiKind {
    Cubic,
    Quintic,
    Sine,
}

impl PhiKind {
    pub const ALL: [PhiKind; 3] = [PhiKind::Cubic, PhiKind::Quintic, PhiKind::Sine];

    pub fn name(self) -> &'static str {
        match self {
            PhiKind::Cubic => "cubic",
            PhiKind::Quintic => "quintic",
            PhiKind::Sine => "sine",
        }
    }

    pub fn from_name(name: &str) -> Option<PhiKind> {
        PhiKind::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn eval(self, t: f64) -> f64 {
        if t >= 1.0 {
            return 1.0;
        }
        if t <= -1.0 {
            return -1.0;
        }
        match self {
            PhiKind::Cubic => (3.0 * t - t * t * t) / 2.0,
            PhiKind::Quintic => {
                let t2 = t * t;
                t * (15.0 - 10.0 * t2 + 3.0 * t2 * t2) / 8.0
            }
            PhiKind::Sine => (PI * t / 2.0).sin(),
        }
    }

    pub fn deriv(self, t: f64) -> f64 {
        if t.abs() >= 1.0 {
            return 0.0;
        }
        match self {
            PhiKind::Cubic => 1.5 * (1.0 - t * t),
            PhiKind::Quintic => {
                let u = 1.0 - t * t;
                15.0 * u * u / 8.0
            }
            PhiKind::Sine => PI / 2.0 * (PI * t / 2.0).cos(),
        }
    }

    /// Inverse on `(-1, 1)` by bisection.
    pub fn inverse(self, v: f64) -> f64 {
        if v >= 1.0 {
            return 1.0;
        }
        if v <= -1.0 {
            return -1.0;
        }
        let (mut lo, mut hi) = (-1.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid) < v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// State-dependent transition with a single critical point.
///
/// `ψ(p, t) = −1 + 2·I(p, t)/I(p, 1)` where
/// `I(p, t) = ∫₋₁ᵗ (3/2)(1 − s²)·[(1 − w(p)) + w(p)(s − a0)²] ds` and
/// `w(p) = amp·(1 − ((p[coord] − b0)/width)²)²` inside the bump, `0` outside.
/// For `amp = 1` the t-derivative vanishes only at `(t, p[coord]) = (a0, b0)`;
/// for `amp = 0` it is the cubic φ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpPsi {
    pub a0: f64,
    pub b0: f64,
    /// Zero-based coordinate index the bump depends on.
    pub coord: usize,
    pub amp: f64,
    pub width: f64,
}

impl BumpPsi {
    pub fn new(a0: f64, b0: f64, coord: usize) -> Self {
        BumpPsi {
            a0,
            b0,
            coord,
            amp: 1.0,
            width: 1.0,
        }
    }

    pub fn weight_at(&self, v: f64) -> f64 {
        let u = (v - self.b0) / self.width;
        if u.abs() >= 1.0 {
            0.0
        } else {
            let b = 1.0 - u * u;
            self.amp * b * b
        }
    }

    pub fn weight(&self, p: &[f64]) -> f64 {
        self.weight_at(p.get(self.coord).copied().unwrap_or(0.0))
    }

    fn coeffs(&self, w: f64) -> (f64, f64, f64) {
        (1.0 - w + w * self.a0 * self.a0, -2.0 * w * self.a0, w)
    }

    fn primitive(c: (f64, f64, f64), s: f64) -> f64 {
        let (c0, c1, c2) = c;
        let s2 = s * s;
        1.5 * (c0 * s + c1 * s2 / 2.0 + (c2 - c0) * s2 * s / 3.0 - c1 * s2 * s2 / 4.0 - c2 * s2 * s2 * s / 5.0)
    }

    pub fn eval_w(&self, w: f64, t: f64) -> f64 {
        if t >= 1.0 {
            return 1.0;
        }
        if t <= -1.0 {
            return -1.0;
        }
        let c = self.coeffs(w);
        let base = Self::primitive(c, -1.0);
        let total = Self::primitive(c, 1.0) - base;
        (-1.0 + 2.0 * (Self::primitive(c, t) - base) / total).clamp(-1.0, 1.0)
    }

    pub fn dt_w(&self, w: f64, t: f64) -> f64 {
        if t.abs() >= 1.0 {
            return 0.0;
        }
        let c = self.coeffs(w);
        let total = Self::primitive(c, 1.0) - Self::primitive(c, -1.0);
        let q = c.0 + c.1 * t + c.2 * t * t;
        2.0 * 1.5 * (1.0 - t * t) * q / total
    }

    pub fn eval(&self, p: &[f64], t: f64) -> f64 {
        self.eval_w(self.weight(p), t)
    }

    pub fn dt(&self, p: &[f64], t: f64) -> f64 {
        self.dt_w(self.weight(p), t)
    }
}

/// Outcome of the grid check performed by [`bump_psi`].
#[derive(Debug, Clone, PartialEq)]
pub struct PsiVerification {
    /// Smallest `∂ψ/∂t / φ_cubic′(t)` over the grid.
    pub min_rate: f64,
    /// Centers `(t, p[coord])` of connected grid regions where that ratio drops below 0.1.
    pub low_regions: Vec<(f64, f64)>,
}

pub const PSI_GRID: usize = 200;

pub fn verify_psi(psi: &BumpPsi) -> PsiVerification {
    let n = PSI_GRID;
    let ts: Vec<f64> = (0..n).map(|i| -1.0 + (2 * i + 1) as f64 / n as f64).collect();
    let (lo, hi) = (psi.b0 - 2.0 * psi.width, psi.b0 + 2.0 * psi.width);
    let vs: Vec<f64> = (0..n).map(|j| lo + (hi - lo) * j as f64 / (n - 1) as f64).collect();
    let mut rate = vec![vec![0.0; n]; n];
    let mut min_rate = f64::INFINITY;
    for (j, v) in vs.iter().enumerate() {
        let w = psi.weight_at(*v);
        for (i, t) in ts.iter().enumerate() {
            let r = psi.dt_w(w, *t) / (1.5 * (1.0 - t * t));
            rate[j][i] = r;
            min_rate = min_rate.min(r);
        }
    }
    let mut seen = vec![vec![false; n]; n];
    let mut low_regions = Vec::new();
    for j0 in 0..n {
        for i0 in 0..n {
            if seen[j0][i0] || rate[j0][i0] >= 0.1 {
                continue;
            }
            let mut stack = vec![(j0, i0)];
            seen[j0][i0] = true;
            let (mut st, mut sv, mut count) = (0.0, 0.0, 0.0);
            while let Some((j, i)) = stack.pop() {
                st += ts[i];
                sv += vs[j];
                count += 1.0;
                let nbrs = [(j.wrapping_sub(1), i), (j + 1, i), (j, i.wrapping_sub(1)), (j, i + 1)];
                for (a, b) in nbrs {
                    if a < n && b < n && !seen[a][b] && rate[a][b] < 0.1 {
                        seen[a][b] = true;
                        stack.push((a, b));
                    }
                }
            }
            low_regions.push((st / count, sv / count));
        }
    }
    PsiVerification { min_rate, low_regions }
}

/// Transition function driving a regularization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transition {
    Monotone(PhiKind),
    NonMonotone(BumpPsi),
}

/// A point `t = a0` at `p[coord] = b0` where `∂ψ/∂t` vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPoint {
    pub t: f64,
    pub coord: usize,
    pub value: f64,
}

impl Transition {
    pub fn eval(&self, p: &[f64], t: f64) -> f64 {
        match self {
            Transition::Monotone(k) => k.eval(t),
            Transition::NonMonotone(b) => b.eval(p, t),
        }
    }

    pub fn dt(&self, p: &[f64], t: f64) -> f64 {
        match self {
            Transition::Monotone(k) => k.deriv(t),
            Transition::NonMonotone(b) => b.dt(p, t),
        }
    }

    pub fn is_monotone(&self) -> bool {
        matches!(self, Transition::Monotone(_))
    }

    pub fn critical_set(&self) -> Vec<CriticalPoint> {
        match self {
            Transition::NonMonotone(b) if (b.amp - 1.0).abs() < 1e-12 => vec![CriticalPoint {
                t: b.a0,
                coord: b.coord,
                value: b.b0,
            }],
            _ => vec![],
        }
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transition::Monotone(k) => write!(f, "phi={}", k.name()),
            Transition::NonMonotone(b) => write!(
                f,
                "psi(a0={}, b0={}, coord={}, amp={}, width={})",
                b.a0,
                b.b0,
                b.coord + 1,
                b.amp,
                b.width
            ),
        }
    }
}

pub fn builtin_phi(name: &str) -> Result<Transition> {
    PhiKind::from_name(name)
        .map(Transition::Monotone)
        .ok_or_else(|| Error::InvalidTransition(format!("unknown phi `{name}` (expected cubic, quintic or sine)")))
}

/// Bump transition with unit amplitude and width, critical point at `(a0, b0)`.
pub fn builtin_psi(a0: f64, b0: f64, coord_index: usize) -> Result<Transition> {
    bump_psi(BumpPsi::new(a0, b0, coord_index))
}

/// Validates parameters and runs the grid verification.
pub fn bump_psi(psi: BumpPsi) -> Result<Transition> {
    if !(psi.a0.abs() < 1.0) {
        return Err(Error::InvalidTransition(format!("|a0| must be < 1, got {}", psi.a0)));
    }
    if !(psi.width > 0.0) || !psi.width.is_finite() {
        return Err(Error::InvalidTransition(format!(
            "width must be positive, got {}",
            psi.width
        )));
    }
    if !(psi.amp >= 0.0) || !psi.b0.is_finite() {
        return Err(Error::InvalidTransition(format!(
            "amp must be non-negative, got {}",
            psi.amp
        )));
    }
    let v = verify_psi(&psi);
    if v.min_rate < -1e-12 {
        return Err(Error::TransitionVerification(format!(
            "dpsi/dt changes sign on the verification grid (min normalized rate {:e})",
            v.min_rate
        )));
    }
    if v.low_regions.len() > 1 {
        return Err(Error::TransitionVerification(format!(
            "{} separate low-rate regions of dpsi/dt, expected at most one",
            v.low_regions.len()
        )));
    }
    Ok(Transition::NonMonotone(psi))
}

/// A continuous combination `X̃(λ, p)` with `X̃(1, ·) = X⁺`, `X̃(−1, ·) = X⁻`.
pub trait Combination: Send + Sync {
    fn dim(&self) -> usize;
    fn blend(&self, lambda: f64, p: &[f64]) -> Result<Vec<f64>>;
    /// The piecewise system of the endpoints.
    fn endpoints(&self) -> &dyn PiecewiseField;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    St,
    R,
    Nonlinear,
}

#[derive(Clone)]
enum Source {
    Convex(Arc<dyn PiecewiseField>),
    Nonlinear(Arc<dyn Combination>),
}

/// The map `(p, δ) ↦ X^δ(p)`.
#[derive(Clone)]
pub struct SmoothFamily {
    kind: FamilyKind,
    source: Source,
    transition: Transition,
}

impl fmt::Debug for SmoothFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothFamily")
            .field("kind", &self.kind)
            .field("transition", &self.transition)
            .finish()
    }
}

pub fn st_regularize<S: PiecewiseField + 'static>(sys: S, phi: Transition) -> Result<SmoothFamily> {
    if !phi.is_monotone() {
        return Err(Error::InvalidTransition(
            "ST-regularization needs a monotone phi".into(),
        ));
    }
    Ok(SmoothFamily {
        kind: FamilyKind::St,
        source: Source::Convex(Arc::new(sys)),
        transition: phi,
    })
}

pub fn r_regularize<S: PiecewiseField + 'static>(sys: S, psi: Transition) -> SmoothFamily {
    SmoothFamily {
        kind: FamilyKind::R,
        source: Source::Convex(Arc::new(sys)),
        transition: psi,
    }
}

pub fn nonlinear_regularize<C: Combination + 'static>(cc: C, phi: Transition) -> Result<SmoothFamily> {
    if !phi.is_monotone() {
        return Err(Error::InvalidTransition(
            "nonlinear regularization needs a monotone phi".into(),
        ));
    }
    Ok(SmoothFamily {
        kind: FamilyKind::Nonlinear,
        source: Source::Nonlinear(Arc::new(cc)),
        transition: phi,
    })
}

impl SmoothFamily {
    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn transition(&self) -> &Transition {
        &self.transition
    }

    /// The underlying piecewise system (endpoints for a nonlinear family).
    pub fn system(&self) -> &dyn PiecewiseField {
        match &self.source {
            Source::Convex(s) => s.as_ref(),
            Source::Nonlinear(c) => c.endpoints(),
        }
    }

    pub fn dim(&self) -> usize {
        self.system().dim()
    }

    /// Field with the transition value `w ∈ [−1, 1]` given explicitly.
    pub fn blend(&self, p: &[f64], w: f64) -> Result<Vec<f64>> {
        match &self.source {
            Source::Convex(s) => {
                let xp = s.plus(p)?;
                let xm = s.minus(p)?;
                let (a, b) = ((1.0 + w) / 2.0, (1.0 - w) / 2.0);
                Ok(xp.iter().zip(&xm).map(|(u, v)| a * u + b * v).collect())
            }
            Source::Nonlinear(c) => c.blend(w, p),
        }
    }

    /// `X^δ(p)`; equal to `X⁺(p)` on `{h ≥ δ}` and `X⁻(p)` on `{h ≤ −δ}` exactly.
    pub fn eval(&self, p: &[f64], delta: f64) -> Result<Vec<f64>> {
        if !(delta > 0.0) {
            return Err(Error::Semantic {
                field: "delta".into(),
                message: format!("must be positive, got {delta}"),
            });
        }
        let sys = self.system();
        let t = sys.switching(p)? / delta;
        self.eval_at(p, t)
    }

    /// Field at the blown-up height `t = h/δ`.
    pub fn eval_at(&self, p: &[f64], t: f64) -> Result<Vec<f64>> {
        let sys = self.system();
        if t >= 1.0 {
            return sys.plus(p);
        }
        if t <= -1.0 {
            return sys.minus(p);
        }
        self.blend(p, self.transition.eval(p, t))
    }

    pub fn tolerances(&self) -> Tolerances {
        self.system().tolerances()
    }
}
