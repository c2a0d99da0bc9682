//! Directional blow-up `h = δ·ȳ` of a regularized family into slow-fast form,
//! critical manifolds, reduced flows and the r-sewing / r-sliding classification.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::psys::{PiecewiseField, Segment};
use crate::regularize::{r_regularize, SmoothFamily, Transition};

/// Subintervals of `[−1, 1]` scanned for critical roots.
pub const ROOT_SCAN: usize = 400;
/// `|∂β/∂ȳ|` below this is not normally hyperbolic.
pub const HYPERBOLIC_TOL: f64 = 1e-8;
const ROOT_TOL: f64 = 1e-12;
const DERIV_STEP: f64 = 1e-6;

/// `ẋ = α(x, ȳ, δ)`, `δ·ẏ̄ = β(x, ȳ, δ)` obtained from a smooth family.
#[derive(Debug, Clone)]
pub struct SlowFastSystem {
    family: SmoothFamily,
    split: usize,
    n: usize,
}

/// Blow-up of `fam` along coordinate `split`, which must be the switching function.
pub fn directional_blowup(fam: &SmoothFamily, split: usize) -> Result<SlowFastSystem> {
    let sys = fam.system();
    match sys.aligned_coord() {
        Some(k) if k == split => Ok(SlowFastSystem {
            family: fam.clone(),
            split,
            n: sys.dim(),
        }),
        _ => Err(Error::NotAligned(format!(
            "h must equal x{} identically; change coordinates so that the switching manifold is a coordinate plane",
            split + 1
        ))),
    }
}

impl SlowFastSystem {
    pub fn slow_dim(&self) -> usize {
        self.n - 1
    }

    pub fn full_dim(&self) -> usize {
        self.n
    }

    pub fn split(&self) -> usize {
        self.split
    }

    pub fn family(&self) -> &SmoothFamily {
        &self.family
    }

    /// The point `(x, δȳ)` of the original space.
    pub fn lift(&self, x: &[f64], ybar: f64, delta: f64) -> Vec<f64> {
        let mut p = x.to_vec();
        p.insert(self.split, delta * ybar);
        p
    }

    /// Splits a point of the original space into `(x, h)`.
    pub fn project(&self, p: &[f64]) -> (Vec<f64>, f64) {
        let mut x = p.to_vec();
        let y = x.remove(self.split);
        (x, y)
    }

    /// `(α, β)` at `(x, ȳ, δ)`.
    pub fn fields(&self, x: &[f64], ybar: f64, delta: f64) -> Result<(Vec<f64>, f64)> {
        if x.len() != self.slow_dim() {
            return Err(Error::Dimension(format!(
                "slow point needs {} components, got {}",
                self.slow_dim(),
                x.len()
            )));
        }
        let p = self.lift(x, ybar, delta);
        let mut v = self.family.eval_at(&p, ybar)?;
        let beta = v.remove(self.split);
        Ok((v, beta))
    }

    pub fn alpha(&self, x: &[f64], ybar: f64, delta: f64) -> Result<Vec<f64>> {
        Ok(self.fields(x, ybar, delta)?.0)
    }

    pub fn beta(&self, x: &[f64], ybar: f64, delta: f64) -> Result<f64> {
        Ok(self.fields(x, ybar, delta)?.1)
    }

    /// `(g₁, g₂)`: normal components of `X⁺`, `X⁻` at `(x, δȳ)`.
    pub fn normal_components(&self, x: &[f64], ybar: f64, delta: f64) -> Result<(f64, f64)> {
        let p = self.lift(x, ybar, delta);
        let sys = self.family.system();
        Ok((sys.plus(&p)?[self.split], sys.minus(&p)?[self.split]))
    }

    /// `ψ′(ȳ)·(g₁ − g₂)/2` at `δ = 0`, the closed form of `∂β/∂ȳ`.
    pub fn dbeta_formula(&self, x: &[f64], ybar: f64) -> Result<f64> {
        let (g1, g2) = self.normal_components(x, ybar, 0.0)?;
        let p = self.lift(x, ybar, 0.0);
        Ok(self.family.transition().dt(&p, ybar) * (g1 - g2) / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalSample {
    pub x: Vec<f64>,
    pub ybar: f64,
    pub dbeta: f64,
    pub hyperbolic: bool,
    pub attracting: bool,
}

fn dbeta_fd(sfs: &SlowFastSystem, x: &[f64], y: f64) -> Result<f64> {
    let s = DERIV_STEP;
    Ok((sfs.beta(x, y + s, 0.0)? - sfs.beta(x, y - s, 0.0)?) / (2.0 * s))
}

fn sample(sfs: &SlowFastSystem, x: &[f64], ybar: f64) -> Result<CriticalSample> {
    let dbeta = dbeta_fd(sfs, x, ybar)?;
    Ok(CriticalSample {
        x: x.to_vec(),
        ybar,
        dbeta,
        hyperbolic: dbeta.abs() > HYPERBOLIC_TOL,
        attracting: dbeta < 0.0,
    })
}

/// Sign-change scan of `g` on `n` subintervals of `[a, b]`, bisection to `1e-12` and one
/// Newton polish. Exact zeros at grid nodes are roots too.
pub(crate) fn scan_roots(g: &dyn Fn(f64) -> Result<f64>, a: f64, b: f64, n: usize) -> Result<Vec<f64>> {
    let nodes: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    let vals: Vec<f64> = nodes.iter().map(|&t| g(t)).collect::<Result<_>>()?;
    let mut roots = Vec::new();
    for i in 0..=n {
        if vals[i] == 0.0 {
            roots.push(nodes[i]);
            continue;
        }
        if i == n || vals[i + 1] == 0.0 || (vals[i] < 0.0) == (vals[i + 1] < 0.0) {
            continue;
        }
        let (mut lo, mut hi, mut glo) = (nodes[i], nodes[i + 1], vals[i]);
        let mut exact = None;
        while hi - lo > ROOT_TOL {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let gm = g(mid)?;
            if gm == 0.0 {
                exact = Some(mid);
                break;
            }
            if (gm < 0.0) == (glo < 0.0) {
                lo = mid;
                glo = gm;
            } else {
                hi = mid;
            }
        }
        let root = match exact {
            Some(r) => r,
            None => {
                let mid = 0.5 * (lo + hi);
                let gm = g(mid)?;
                let s = 1e-7 * mid.abs().max(1.0);
                let d = (g(mid + s)? - g(mid - s)?) / (2.0 * s);
                let polished = if d != 0.0 { mid - gm / d } else { mid };
                if polished >= nodes[i] && polished <= nodes[i + 1] && g(polished)?.abs() <= gm.abs() {
                    polished
                } else {
                    mid
                }
            }
        };
        roots.push(root);
    }
    Ok(roots)
}

/// All roots `ȳ ∈ [−1, 1]` of `β(x, ȳ, 0) = 0`.
pub fn critical_root(sfs: &SlowFastSystem, x: &[f64]) -> Result<Vec<CriticalSample>> {
    let g = |y: f64| sfs.beta(x, y, 0.0);
    scan_roots(&g, -1.0, 1.0, ROOT_SCAN)?
        .into_iter()
        .map(|y| sample(sfs, x, y))
        .collect()
}

/// Slow velocity `α(x, ȳ, 0)` on the critical manifold.
pub fn reduced_rhs(sfs: &SlowFastSystem, s: &CriticalSample) -> Result<Vec<f64>> {
    if !s.hyperbolic {
        return Err(Error::NonHyperbolic { derivative: s.dbeta });
    }
    sfs.alpha(&s.x, s.ybar, 0.0)
}

/// Maps `G(x, θ, r) = (x, cot θ, r sin θ)`.
pub fn polar_to_directional(x: &[f64], theta: f64, r: f64) -> (Vec<f64>, f64, f64) {
    (x.to_vec(), theta.cos() / theta.sin(), r * theta.sin())
}

/// `Γ(x, ȳ, δ) = (x, δȳ, δ)`.
pub fn directional_to_original(x: &[f64], ybar: f64, delta: f64) -> (Vec<f64>, f64, f64) {
    (x.to_vec(), delta * ybar, delta)
}

/// `Φ(x, θ, r) = (x, r cos θ, r sin θ)`.
pub fn polar_to_original(x: &[f64], theta: f64, r: f64) -> (Vec<f64>, f64, f64) {
    (x.to_vec(), r * theta.cos(), r * theta.sin())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarSample {
    pub x: Vec<f64>,
    pub theta: f64,
    pub r: f64,
}

/// Largest componentwise `|Γ(G(x, θ, r)) − Φ(x, θ, r)|`.
pub fn polar_directional_check(samples: &[PolarSample]) -> Result<f64> {
    let mut worst = 0.0f64;
    for s in samples {
        if !(s.theta > 1e-3 && s.theta < PI - 1e-3) {
            return Err(Error::ThetaOutOfRange { theta: s.theta });
        }
        let (x, yb, d) = polar_to_directional(&s.x, s.theta, s.r);
        let (x1, y1, d1) = directional_to_original(&x, yb, d);
        let (x2, y2, d2) = polar_to_original(&s.x, s.theta, s.r);
        for (a, b) in x1.iter().zip(&x2) {
            worst = worst.max((a - b).abs());
        }
        worst = worst.max((y1 - y2).abs()).max((d1 - d2).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RClass {
    RSewing,
    RSliding,
    Undetermined,
}

impl RClass {
    pub fn name(self) -> &'static str {
        match self {
            RClass::RSewing => "r-sewing",
            RClass::RSliding => "r-sliding",
            RClass::Undetermined => "undetermined",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RSample {
    pub point: Vec<f64>,
    pub class: RClass,
    pub roots: Vec<CriticalSample>,
}

/// Classifies one slow point from its critical roots and the sign of `β` across `[−1, 1]`.
pub fn r_classify(sfs: &SlowFastSystem, x: &[f64]) -> Result<(RClass, Vec<CriticalSample>)> {
    let roots = critical_root(sfs, x)?;
    if roots.iter().any(|r| !r.hyperbolic) {
        return Ok((RClass::Undetermined, roots));
    }
    if roots.iter().any(|r| r.ybar.abs() < 1.0) {
        return Ok((RClass::RSliding, roots));
    }
    if roots.is_empty() {
        let mut sign = 0.0f64;
        for i in 0..=ROOT_SCAN {
            let y = -1.0 + 2.0 * i as f64 / ROOT_SCAN as f64;
            let b = sfs.beta(x, y, 0.0)?;
            if b == 0.0 || (sign != 0.0 && b.signum() != sign) {
                return Ok((RClass::Undetermined, roots));
            }
            sign = b.signum();
        }
        return Ok((RClass::RSewing, roots));
    }
    Ok((RClass::Undetermined, roots))
}

/// r-classification of `n` samples of a segment on Σ for the r-regularization of `sys` by `psi`.
pub fn r_region_scan<S: PiecewiseField + 'static>(
    sys: S,
    psi: Transition,
    seg: &Segment,
    n: usize,
) -> Result<Vec<RSample>> {
    let split = sys
        .aligned_coord()
        .ok_or_else(|| Error::NotAligned("r_region_scan needs h equal to a coordinate".into()))?;
    let sfs = directional_blowup(&r_regularize(sys, psi), split)?;
    r_region_scan_blown(&sfs, seg, n)
}

pub fn r_region_scan_blown(sfs: &SlowFastSystem, seg: &Segment, n: usize) -> Result<Vec<RSample>> {
    Segment::params(n)
        .into_iter()
        .map(|u| {
            let point = seg.point(u);
            let h = sfs.family().system().switching(&point)?;
            let tol = sfs.family().tolerances().on_sigma;
            if h.abs() > tol {
                return Err(Error::NotOnSigma { h });
            }
            let (x, _) = sfs.project(&point);
            let (class, roots) = r_classify(sfs, &x)?;
            Ok(RSample { point, class, roots })
        })
        .collect()
}
