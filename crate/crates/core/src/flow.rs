//! Adaptive Dormand–Prince 5(4) integration with event location, the hybrid Filippov
//! integrator, and slow-fast integration in the fast time scale.

use std::fmt;

use crate::blowup::{critical_root, SlowFastSystem};
use crate::error::{Error, Result};
use crate::psys::{classify_point, lie_derivatives, sliding_formula, PiecewiseField, SigmaKind};

/// Autonomous vector field.
pub type VectorField<'a> = dyn Fn(&[f64]) -> Result<Vec<f64>> + 'a;
/// Scalar function of the state.
pub type ScalarField<'a> = dyn Fn(&[f64]) -> Result<f64> + 'a;

pub const MAX_EVENTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub h_max: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-8,
            atol: 1e-10,
            max_steps: 2_000_000,
            h_max: f64::INFINITY,
        }
    }
}

impl OdeOptions {
    pub fn tol(rtol: f64, atol: f64) -> Self {
        OdeOptions {
            rtol,
            atol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Smooth,
    FlowPlus,
    FlowMinus,
    Sliding,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Smooth => "smooth",
            Mode::FlowPlus => "flow-plus",
            Mode::FlowMinus => "flow-minus",
            Mode::Sliding => "sliding",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Crossing,
    HitSigma,
    SlideEnter,
    SlideExit,
    TangencyStop,
    RepellingHit,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::Crossing => "crossing",
            EventKind::HitSigma => "hit-sigma",
            EventKind::SlideEnter => "slide-enter",
            EventKind::SlideExit => "slide-exit",
            EventKind::TangencyStop => "tangency-stop",
            EventKind::RepellingHit => "repelling-hit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub state: Vec<f64>,
}

/// Accepted steps of one mode, with derivatives for Hermite interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSegment {
    pub mode: Mode,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    derivs: Vec<Vec<f64>>,
}

impl FlowSegment {
    fn new(mode: Mode) -> Self {
        FlowSegment {
            mode,
            times: vec![],
            states: vec![],
            derivs: vec![],
        }
    }

    fn push(&mut self, t: f64, y: Vec<f64>, dy: Vec<f64>) {
        self.times.push(t);
        self.states.push(y);
        self.derivs.push(dy);
    }

    pub fn first(&self) -> Option<(f64, &[f64])> {
        Some((*self.times.first()?, self.states.first()?))
    }

    pub fn last(&self) -> Option<(f64, &[f64])> {
        Some((*self.times.last()?, self.states.last()?))
    }

    /// Cubic Hermite interpolation between accepted steps.
    pub fn interpolate(&self, t: f64) -> Option<Vec<f64>> {
        let n = self.times.len();
        if n == 0 || t < self.times[0] || t > self.times[n - 1] {
            return None;
        }
        let i = match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => return Some(self.states[i].clone()),
            Err(i) => i - 1,
        };
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        Some(
            (0..self.states[i].len())
                .map(|k| {
                    h00 * self.states[i][k]
                        + h10 * h * self.derivs[i][k]
                        + h01 * self.states[i + 1][k]
                        + h11 * h * self.derivs[i + 1][k]
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub segments: Vec<FlowSegment>,
    pub events: Vec<Event>,
    /// Set when integration stopped before the end of the time span.
    pub halted: bool,
}

impl Trajectory {
    pub fn final_state(&self) -> Option<&[f64]> {
        self.segments.iter().rev().find_map(|s| s.last().map(|(_, y)| y))
    }

    pub fn final_time(&self) -> Option<f64> {
        self.segments.iter().rev().find_map(|s| s.last().map(|(t, _)| t))
    }

    pub fn modes(&self) -> Vec<Mode> {
        self.segments.iter().map(|s| s.mode).collect()
    }

    /// Samples `(t, mode, state)` in time order.
    pub fn samples(&self) -> impl Iterator<Item = (f64, Mode, &[f64])> {
        self.segments.iter().flat_map(|s| {
            s.times
                .iter()
                .zip(&s.states)
                .map(move |(t, y)| (*t, s.mode, y.as_slice()))
        })
    }

    pub fn interpolate(&self, t: f64) -> Option<Vec<f64>> {
        self.segments.iter().find_map(|s| s.interpolate(t))
    }
}

/// When an event function fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventRule {
    /// `g ≥ 0` is the allowed side: fires when `g` becomes negative after having been
    /// positive, or drops below `−1e-10` when starting from zero.
    Leave,
    /// Any change of strict sign.
    SignChange,
    /// Fires when `g` goes from negative to non-negative.
    Rising,
}

const LEAVE_SLACK: f64 = 1e-10;

impl EventRule {
    fn fires(self, prev: f64, new: f64) -> bool {
        match self {
            EventRule::Leave => new < 0.0 && (prev > 0.0 || new < -LEAVE_SLACK),
            EventRule::SignChange => (prev > 0.0 && new <= 0.0) || (prev < 0.0 && new >= 0.0),
            EventRule::Rising => prev < 0.0 && new >= 0.0,
        }
    }
}

pub struct EventSpec<'a> {
    pub g: &'a ScalarField<'a>,
    pub rule: EventRule,
    /// Localization stops once `|g| ≤ tol`.
    pub tol: f64,
}

/// Result of [`integrate_with_events`].
#[derive(Debug, Clone)]
pub struct Run {
    pub segment: FlowSegment,
    /// Index of the event function that fired, time and state at the event.
    pub stop: Option<(usize, f64, Vec<f64>)>,
}

/// In-place correction applied after every accepted step (e.g. projection onto Σ).
pub type Projection<'a> = dyn Fn(&mut Vec<f64>) -> Result<()> + 'a;

// Dormand–Prince 5(4): nodes 1/5, 3/10, 4/5, 8/9, 1, 1.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy(y: &[f64], h: f64, terms: &[(f64, &[f64])]) -> Vec<f64> {
    (0..y.len())
        .map(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
        .collect()
}

/// One Dormand–Prince step: `(y_{n+1}, f(y_{n+1}), error estimate)`.
fn dp_step(f: &VectorField, y: &[f64], k1: &[f64], h: f64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let k2 = f(&axpy(y, h, &[(A21, k1)]))?;
    let k3 = f(&axpy(y, h, &[(A31, k1), (A32, &k2)]))?;
    let k4 = f(&axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]))?;
    let k5 = f(&axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
    let k6 = f(&axpy(
        y,
        h,
        &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
    ))?;
    let y5 = axpy(y, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = f(&y5)?;
    let err = (0..y.len())
        .map(|i| h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]))
        .collect();
    Ok((y5, k7, err))
}

fn err_norm(err: &[f64], y0: &[f64], y1: &[f64], o: &OdeOptions) -> f64 {
    let n = err.len().max(1) as f64;
    (err.iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = o.atol + o.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum::<f64>()
        / n)
        .sqrt()
}

fn initial_step(f: &VectorField, y0: &[f64], f0: &[f64], span: f64, o: &OdeOptions) -> Result<f64> {
    let sc: Vec<f64> = y0.iter().map(|y| o.atol + o.rtol * y.abs()).collect();
    let n = y0.len().max(1) as f64;
    let rms = |v: &[f64]| (v.iter().zip(&sc).map(|(x, s)| (x / s).powi(2)).sum::<f64>() / n).sqrt();
    let d0 = rms(y0);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1 = axpy(y0, h0, &[(1.0, f0)]);
    let f1 = f(&y1)?;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(span).min(o.h_max))
}

/// Integrates `ẏ = f(y)` on `[t0, t1]` until one of the event functions fires.
///
/// Events are located by bisection on the step length: the state at a trial time is
/// obtained with a fresh Dormand–Prince step from the start of the accepted step.
pub fn integrate_with_events(
    f: &VectorField,
    y0: &[f64],
    t0: f64,
    t1: f64,
    opts: &OdeOptions,
    mode: Mode,
    events: &[EventSpec],
    project: Option<&Projection>,
) -> Result<Run> {
    if !(t1 >= t0) {
        return Err(Error::Semantic {
            field: "t_span".into(),
            message: format!("end {t1} before start {t0}"),
        });
    }
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(Error::Semantic {
            field: "tolerances".into(),
            message: "rtol and atol must be positive".into(),
        });
    }
    let span = t1 - t0;
    let mut seg = FlowSegment::new(mode);
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = f(&y)?;
    seg.push(t, y.clone(), k1.clone());
    if span == 0.0 {
        return Ok(Run {
            segment: seg,
            stop: None,
        });
    }
    let mut g_prev: Vec<f64> = events.iter().map(|e| (e.g)(&y)).collect::<Result<_>>()?;
    let mut h = initial_step(f, &y, &k1, span, opts)?;
    let mut steps = 0usize;

    loop {
        if steps >= opts.max_steps {
            return Err(Error::MaxSteps(opts.max_steps));
        }
        steps += 1;
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        let (mut y_new, mut k_new, err) = dp_step(f, &y, &k1, h)?;
        let en = err_norm(&err, &y, &y_new, opts);
        if en <= 1.0 {
            if let Some(p) = project {
                p(&mut y_new)?;
                k_new = f(&y_new)?;
            }
            let g_new: Vec<f64> = events.iter().map(|e| (e.g)(&y_new)).collect::<Result<_>>()?;
            let fired = events
                .iter()
                .enumerate()
                .filter(|(i, e)| e.rule.fires(g_prev[*i], g_new[*i]))
                .map(|(i, _)| i)
                .collect::<Vec<_>>();
            if !fired.is_empty() {
                let (idx, tau, ye) = locate(f, &y, &k1, h, events, &g_prev, &fired, project)?;
                let te = t + tau;
                let ke = f(&ye)?;
                seg.push(te, ye.clone(), ke);
                return Ok(Run {
                    segment: seg,
                    stop: Some((idx, te, ye)),
                });
            }
            t = if last { t1 } else { t + h };
            y = y_new;
            k1 = k_new;
            g_prev = g_new;
            seg.push(t, y.clone(), k1.clone());
            if last {
                return Ok(Run {
                    segment: seg,
                    stop: None,
                });
            }
        }
        let factor = if en == 0.0 {
            5.0
        } else {
            (0.9 * en.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = (h * if en <= 1.0 { factor } else { factor.min(1.0) }).min(opts.h_max);
        if h < 1e-14 * span {
            return Err(Error::StepUnderflow { t, h });
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn locate(
    f: &VectorField,
    y: &[f64],
    k1: &[f64],
    h: f64,
    events: &[EventSpec],
    g_prev: &[f64],
    fired: &[usize],
    project: Option<&Projection>,
) -> Result<(usize, f64, Vec<f64>)> {
    let state_at = |tau: f64| -> Result<Vec<f64>> {
        let (mut s, _, _) = dp_step(f, y, k1, tau)?;
        if let Some(p) = project {
            p(&mut s)?;
        }
        Ok(s)
    };
    // Earliest event among those that fired.
    let mut best: Option<(usize, f64, Vec<f64>)> = None;
    for &i in fired {
        let e = &events[i];
        let (mut lo, mut hi) = (0.0, h);
        let mut hi_state = state_at(h)?;
        let mut found = None;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let s = state_at(mid)?;
            let g = (e.g)(&s)?;
            if e.rule.fires(g_prev[i], g) {
                if g.abs() <= e.tol {
                    found = Some((mid, s));
                    break;
                }
                hi = mid;
                hi_state = s;
            } else {
                if g.abs() <= e.tol && e.rule != EventRule::Rising {
                    found = Some((mid, s));
                    break;
                }
                lo = mid;
            }
        }
        let (tau, s) = found.unwrap_or((hi, hi_state));
        if best.as_ref().is_none_or(|b| tau < b.1) {
            best = Some((i, tau, s));
        }
    }
    Ok(best.expect("at least one fired event"))
}

/// Single-segment integration of a smooth field.
pub fn integrate_smooth(f: &VectorField, x0: &[f64], t_span: (f64, f64), opts: &OdeOptions) -> Result<Trajectory> {
    let run = integrate_with_events(f, x0, t_span.0, t_span.1, opts, Mode::Smooth, &[], None)?;
    Ok(Trajectory {
        segments: vec![run.segment],
        events: vec![],
        halted: false,
    })
}

/// First sign change of `h` along the flow of `f`, located to `|h| ≤ 1e-12`.
pub fn detect_crossing(
    f: &VectorField,
    h: &ScalarField,
    x0: &[f64],
    t_span: (f64, f64),
    opts: &OdeOptions,
) -> Result<Option<Event>> {
    let ev = [EventSpec {
        g: h,
        rule: EventRule::SignChange,
        tol: 1e-12,
    }];
    let run = integrate_with_events(f, x0, t_span.0, t_span.1, opts, Mode::Smooth, &ev, None)?;
    Ok(run.stop.map(|(_, t, state)| Event {
        t,
        kind: EventKind::Crossing,
        state,
    }))
}

#[allow(clippy::ptr_arg)]
fn project_onto_sigma<S: PiecewiseField + ?Sized>(sys: &S, p: &mut Vec<f64>) -> Result<()> {
    if let Some(k) = sys.aligned_coord() {
        p[k] = 0.0;
        return Ok(());
    }
    for _ in 0..4 {
        let h = sys.switching(p)?;
        if h == 0.0 {
            break;
        }
        let g = sys.switching_grad(p)?;
        let nn: f64 = g.iter().map(|x| x * x).sum();
        if nn == 0.0 {
            return Err(Error::DegenerateGradient { norm: 0.0 });
        }
        for (pi, gi) in p.iter_mut().zip(&g) {
            *pi -= h * gi / nn;
        }
    }
    Ok(())
}

/// Filippov trajectory from `x0`: smooth segments of `X⁺`/`X⁻` joined through sewing
/// points, sliding segments along attracting sliding regions.
pub fn integrate_filippov<S: PiecewiseField + ?Sized>(
    sys: &S,
    x0: &[f64],
    t_span: (f64, f64),
    opts: &OdeOptions,
) -> Result<Trajectory> {
    let tol = sys.tolerances();
    let mut traj = Trajectory {
        segments: vec![],
        events: vec![],
        halted: false,
    };
    let mut y = x0.to_vec();
    let h0 = sys.switching(&y)?;
    let mut mode = if h0 > tol.on_sigma {
        Mode::FlowPlus
    } else if h0 < -tol.on_sigma {
        Mode::FlowMinus
    } else {
        project_onto_sigma(sys, &mut y)?;
        let c = classify_point(sys, &y)?;
        match c.kind {
            SigmaKind::Sewing if c.lplus > 0.0 => Mode::FlowPlus,
            SigmaKind::Sewing => Mode::FlowMinus,
            SigmaKind::SlidingAttracting => Mode::Sliding,
            SigmaKind::SlidingRepelling => return Err(Error::RepellingStart),
            SigmaKind::TangencyPlus | SigmaKind::TangencyMinus => return Err(Error::TangencyStart),
        }
    };
    let mut t = t_span.0;
    let plus = |p: &[f64]| sys.plus(p);
    let minus = |p: &[f64]| sys.minus(p);
    let slide = |p: &[f64]| sliding_formula(sys, p);
    let h_pos = |p: &[f64]| sys.switching(p);
    let h_neg = |p: &[f64]| Ok(-sys.switching(p)?);
    let exit_plus = |p: &[f64]| Ok(-lie_derivatives(sys, p)?.0);
    let exit_minus = |p: &[f64]| Ok(lie_derivatives(sys, p)?.1);
    let proj = |p: &mut Vec<f64>| project_onto_sigma(sys, p);

    loop {
        if traj.events.len() > MAX_EVENTS {
            return Err(Error::TooManyEvents(MAX_EVENTS));
        }
        let run = match mode {
            Mode::FlowPlus | Mode::Smooth => {
                let ev = [EventSpec {
                    g: &h_pos,
                    rule: EventRule::Leave,
                    tol: 1e-12,
                }];
                integrate_with_events(&plus, &y, t, t_span.1, opts, Mode::FlowPlus, &ev, None)?
            }
            Mode::FlowMinus => {
                let ev = [EventSpec {
                    g: &h_neg,
                    rule: EventRule::Leave,
                    tol: 1e-12,
                }];
                integrate_with_events(&minus, &y, t, t_span.1, opts, Mode::FlowMinus, &ev, None)?
            }
            Mode::Sliding => {
                let ev = [
                    EventSpec {
                        g: &exit_plus,
                        rule: EventRule::Leave,
                        tol: 1e-10,
                    },
                    EventSpec {
                        g: &exit_minus,
                        rule: EventRule::Leave,
                        tol: 1e-10,
                    },
                ];
                integrate_with_events(&slide, &y, t, t_span.1, opts, Mode::Sliding, &ev, Some(&proj))?
            }
        };
        let seg_mode = run.segment.mode;
        traj.segments.push(run.segment);
        let Some((idx, te, mut ye)) = run.stop else {
            return Ok(traj);
        };
        t = te;
        if seg_mode == Mode::Sliding {
            traj.events.push(Event {
                t,
                kind: EventKind::SlideExit,
                state: ye.clone(),
            });
            mode = if idx == 0 { Mode::FlowPlus } else { Mode::FlowMinus };
            y = ye;
            continue;
        }
        project_onto_sigma(sys, &mut ye)?;
        if let Some(last) = traj.segments.last_mut() {
            if let Some(s) = last.states.last_mut() {
                *s = ye.clone();
            }
        }
        let c = classify_point(sys, &ye)?;
        let (kind, next) = match c.kind {
            SigmaKind::Sewing => (
                EventKind::HitSigma,
                Some(if c.lplus > 0.0 { Mode::FlowPlus } else { Mode::FlowMinus }),
            ),
            SigmaKind::SlidingAttracting => (EventKind::SlideEnter, Some(Mode::Sliding)),
            SigmaKind::SlidingRepelling => (EventKind::RepellingHit, None),
            SigmaKind::TangencyPlus | SigmaKind::TangencyMinus => (EventKind::TangencyStop, None),
        };
        traj.events.push(Event {
            t,
            kind,
            state: ye.clone(),
        });
        match next {
            Some(m) => {
                mode = m;
                y = ye;
            }
            None => {
                traj.halted = true;
                return Ok(traj);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SlowFastRun {
    /// States `(x, ȳ)` against fast time.
    pub trajectory: Trajectory,
    /// `min |ȳ − ȳ*|` over hyperbolic critical roots at the final slow point.
    pub distance: Option<f64>,
    pub near_critical: bool,
}

/// Integrates `x′ = δα`, `ȳ′ = β` in the fast time; `c` scales the closeness test `distance ≤ c·δ`.
pub fn integrate_slowfast(
    sfs: &SlowFastSystem,
    delta: f64,
    x0: &[f64],
    ybar0: f64,
    t_span: (f64, f64),
    opts: &OdeOptions,
    c: f64,
) -> Result<SlowFastRun> {
    if !(delta >= 0.0) {
        return Err(Error::Semantic {
            field: "delta".into(),
            message: format!("must be non-negative, got {delta}"),
        });
    }
    let m = sfs.slow_dim();
    let f = |s: &[f64]| -> Result<Vec<f64>> {
        let (a, b) = sfs.fields(&s[..m], s[m], delta)?;
        let mut out: Vec<f64> = a.into_iter().map(|v| delta * v).collect();
        out.push(b);
        Ok(out)
    };
    let mut s0 = x0.to_vec();
    s0.push(ybar0);
    let trajectory = integrate_smooth(&f, &s0, t_span, opts)?;
    let end = trajectory.final_state().expect("non-empty trajectory").to_vec();
    let roots = critical_root(sfs, &end[..m])?;
    let distance = roots
        .iter()
        .filter(|r| r.hyperbolic)
        .map(|r| (r.ybar - end[m]).abs())
        .min_by(f64::total_cmp);
    let near_critical = distance.is_some_and(|d| d <= c * delta);
    Ok(SlowFastRun {
        trajectory,
        distance,
        near_critical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blowup::directional_blowup;
    use crate::psys::{sliding_vf, PiecewiseSystem};
    use crate::regularize::{st_regularize, PhiKind, Transition};

    fn exblow() -> PiecewiseSystem {
        PiecewiseSystem::new(&["x2-1", "-1"], &["x2", "1"], "x1").unwrap()
    }

    #[test]
    fn exponential_and_circle() {
        let f = |y: &[f64]| Ok(vec![y[0]]);
        let tr = integrate_smooth(&f, &[1.0], (0.0, 1.0), &OdeOptions::default()).unwrap();
        assert!((tr.final_state().unwrap()[0] - std::f64::consts::E).abs() < 1e-7);
        let g = |y: &[f64]| Ok(vec![-y[1], y[0]]);
        let tr = integrate_smooth(
            &g,
            &[1.0, 0.0],
            (0.0, 2.0 * std::f64::consts::PI),
            &OdeOptions::default(),
        )
        .unwrap();
        let e = tr.final_state().unwrap();
        assert!((e[0] - 1.0).abs() < 1e-6 && e[1].abs() < 1e-6);
        let mid = tr.interpolate(std::f64::consts::PI / 2.0).unwrap();
        assert!(mid[0].abs() < 1e-5 && (mid[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn tighter_tolerance_changes_little() {
        let g = |y: &[f64]| Ok(vec![y[1], -y[0] + 0.3 * (1.0 - y[0] * y[0]) * y[1]]);
        let a = integrate_smooth(&g, &[1.0, 0.0], (0.0, 5.0), &OdeOptions::tol(1e-8, 1e-10)).unwrap();
        let b = integrate_smooth(&g, &[1.0, 0.0], (0.0, 5.0), &OdeOptions::tol(5e-9, 5e-11)).unwrap();
        let (ya, yb) = (a.final_state().unwrap(), b.final_state().unwrap());
        for i in 0..2 {
            assert!((ya[i] - yb[i]).abs() < 10.0 * 1e-8 * (1.0 + ya[i].abs()));
        }
    }

    #[test]
    fn crossing_examples() {
        let f = |_: &[f64]| Ok(vec![0.0, -1.0]);
        let h = |y: &[f64]| Ok(y[1]);
        let e = detect_crossing(&f, &h, &[0.0, 1.0], (0.0, 3.0), &OdeOptions::default())
            .unwrap()
            .unwrap();
        assert!((e.t - 1.0).abs() < 1e-12 && e.state[1].abs() <= 1e-12);
        let decay = |y: &[f64]| Ok(vec![1.0, -y[1]]);
        assert!(
            detect_crossing(&decay, &h, &[0.0, 1.0], (0.0, 10.0), &OdeOptions::default())
                .unwrap()
                .is_none()
        );
        let sys = exblow();
        let fm = |y: &[f64]| sys.minus(y);
        let hx = |y: &[f64]| Ok(y[0]);
        let e = detect_crossing(&fm, &hx, &[-0.5, 0.2], (0.0, 5.0), &OdeOptions::default())
            .unwrap()
            .unwrap();
        // x2 = 0.2 + t, x1 = −0.5 + 0.2t + t²/2 vanishes at t = −0.2 + √1.04.
        let t_star = -0.2 + 1.04f64.sqrt();
        assert!((e.t - t_star).abs() < 1e-9);
        assert!((e.state[1] - (0.2 + t_star)).abs() < 1e-9);
        assert!(e.state[0].abs() <= 1e-12);
    }

    #[test]
    fn filippov_exblow_reaches_pseudo_equilibrium() {
        let sys = exblow();
        let tr = integrate_filippov(&sys, &[-0.5, 0.2], (0.0, 20.0), &OdeOptions::default()).unwrap();
        let end = tr.final_state().unwrap();
        assert!(end[0].abs() <= 1e-9);
        assert!((end[1] - 0.5).abs() <= 1e-6);
        assert_eq!(tr.modes(), vec![Mode::FlowMinus, Mode::FlowPlus, Mode::Sliding]);
        assert_eq!(
            tr.events.iter().map(|e| e.kind).collect::<Vec<_>>(),
            vec![EventKind::HitSigma, EventKind::SlideEnter]
        );
        check_invariants(&sys, &tr);
    }

    fn check_invariants(sys: &PiecewiseSystem, tr: &Trajectory) {
        for w in tr.segments.windows(2) {
            let a = w[0].last().unwrap().1;
            let b = w[1].first().unwrap().1;
            assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9));
        }
        for (_, mode, y) in tr.samples() {
            let h = sys.switching(y).unwrap();
            match mode {
                Mode::FlowPlus => assert!(h >= -1e-9),
                Mode::FlowMinus => assert!(h <= 1e-9),
                Mode::Sliding => {
                    assert!(h.abs() <= 1e-9);
                    let (lp, lm, _, _) = lie_derivatives(sys, y).unwrap();
                    let s = lp / (lp - lm);
                    assert!((-1e-6..=1.0 + 1e-6).contains(&s));
                }
                Mode::Smooth => {}
            }
        }
    }

    #[test]
    fn filippov_sewing_start_above_sliding() {
        let sys = exblow();
        let tr = integrate_filippov(&sys, &[-0.5, 1.5], (0.0, 1.5), &OdeOptions::default()).unwrap();
        assert!(!tr.modes().contains(&Mode::Sliding));
        let hit = &tr.events[0];
        assert_eq!(hit.kind, EventKind::HitSigma);
        assert!(hit.state[1] > 1.0);
        check_invariants(&sys, &tr);
    }

    #[test]
    fn filippov_starting_at_pseudo_equilibrium() {
        let sys = exblow();
        let tr = integrate_filippov(&sys, &[0.0, 0.5], (0.0, 5.0), &OdeOptions::default()).unwrap();
        assert_eq!(tr.modes(), vec![Mode::Sliding]);
        for (_, _, y) in tr.samples() {
            assert_eq!(y, &[0.0, 0.5]);
        }
        assert_eq!(sliding_vf(&sys, &[0.0, 0.5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn filippov_slide_exit() {
        // Sliding field (0, 1) on x1 = 0 for x2 < 1; X⁺ normal component x2 − 1 vanishes at x2 = 1.
        let sys = PiecewiseSystem::new(&["x2-1", "1"], &["1", "1"], "x1").unwrap();
        let tr = integrate_filippov(&sys, &[0.0, 0.0], (0.0, 3.0), &OdeOptions::default()).unwrap();
        assert_eq!(tr.modes(), vec![Mode::Sliding, Mode::FlowPlus]);
        let exit = &tr.events[0];
        assert_eq!(exit.kind, EventKind::SlideExit);
        assert!((exit.state[1] - 1.0).abs() < 1e-9);
        assert!((exit.t - 1.0).abs() < 1e-9);
        check_invariants(&sys, &tr);
    }

    #[test]
    fn filippov_errors() {
        let sys = exblow();
        let rep = PiecewiseSystem::new(&["1", "0"], &["-1", "0"], "x1").unwrap();
        assert!(matches!(
            integrate_filippov(&rep, &[0.0, 0.3], (0.0, 1.0), &OdeOptions::default()),
            Err(Error::RepellingStart)
        ));
        assert!(matches!(
            integrate_filippov(&sys, &[0.0, 1.0], (0.0, 1.0), &OdeOptions::default()),
            Err(Error::TangencyStart)
        ));
        let tr = integrate_filippov(&rep, &[0.5, 0.3], (0.0, 1.0), &OdeOptions::default()).unwrap();
        assert!(!tr.halted);
        let into = PiecewiseSystem::new(&["-1", "0"], &["-1", "0"], "x1").unwrap();
        let tr = integrate_filippov(&into, &[0.5, 0.3], (0.0, 1.0), &OdeOptions::default()).unwrap();
        assert_eq!(tr.modes(), vec![Mode::FlowPlus, Mode::FlowMinus]);
    }

    #[test]
    fn slowfast_relaxes_to_critical_manifold() {
        let ex1 = PiecewiseSystem::new(&["0", "-1"], &["x1", "-x2+1"], "x2").unwrap();
        let fam = st_regularize(ex1, Transition::Monotone(PhiKind::Cubic)).unwrap();
        let sfs = directional_blowup(&fam, 1).unwrap();
        let delta = 1e-2;
        let run = integrate_slowfast(&sfs, delta, &[1.0], 0.9, (0.0, 20.0), &OdeOptions::default(), 10.0).unwrap();
        let end = run.trajectory.final_state().unwrap();
        assert!(end[1].abs() < 1e-3);
        assert!(run.near_critical);
        // slow drift x' = δ·x/2 over τ = 20
        assert!((end[0] - (delta * 20.0 / 2.0f64).exp()).abs() < 1e-2);
        let frozen = integrate_slowfast(&sfs, 0.0, &[1.0], 0.9, (0.0, 5.0), &OdeOptions::default(), 10.0).unwrap();
        assert!(frozen.trajectory.samples().all(|(_, _, y)| y[0] == 1.0));
    }
}
