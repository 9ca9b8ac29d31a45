//! Complex-path integration of the hierarchy with pole detection.
//!
//! The equation is compiled to the first-order system `y_j' = y_{j+1}`,
//! `y_{2n}' = rhs(y, x)` and integrated with the Dormand-Prince 5(4) pair
//! along piecewise paths (segments and circular arcs) parameterized by
//! arclength.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{FormalSeries, Truncation, XPoint};
use crate::diffpoly::{rational_to_f64, JetPolynomial};
use crate::error::{Error, Result};
use crate::hierarchy::HierarchyEquation;

/// Polynomial compiled to flat complex terms.
#[derive(Clone, Debug)]
pub struct CompiledPoly {
    /// `(coefficient, power of x, [(jet index, power)])`.
    terms: Vec<(Complex64, u32, Vec<(usize, u32)>)>,
}

impl CompiledPoly {
    pub fn new(p: &JetPolynomial, alpha: Complex64) -> Self {
        let terms = p
            .terms()
            .map(|(m, c)| {
                let coef = rational_to_f64(c) * alpha.powu(m.alpha_exp());
                let jets = m
                    .jet_exps()
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| **e > 0)
                    .map(|(i, e)| (i, *e))
                    .collect();
                (coef, m.x_exp(), jets)
            })
            .collect();
        CompiledPoly { terms }
    }

    pub fn eval(&self, y: &[Complex64], x: Complex64) -> Complex64 {
        let mut sum = Complex64::zero();
        for (c, xe, jets) in &self.terms {
            let mut t = *c;
            if *xe > 0 {
                t *= x.powu(*xe);
            }
            for &(i, e) in jets {
                t *= y[i].powu(e);
            }
            sum += t;
        }
        sum
    }
}

/// First-order form of one hierarchy member.
#[derive(Clone, Debug)]
pub struct ODESystem {
    pub n: u32,
    pub alpha: Complex64,
    rhs: CompiledPoly,
    /// `d rhs / d y_j`, `j = 0..2n-1`.
    gradient: Vec<CompiledPoly>,
}

/// Right-hand side `dy/dx = F(y, x)` of a first-order complex system.
pub trait VectorField: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, y: &[Complex64], x: Complex64, out: &mut [Complex64]);
}

impl VectorField for ODESystem {
    fn dim(&self) -> usize {
        2 * self.n as usize
    }

    fn eval(&self, y: &[Complex64], x: Complex64, out: &mut [Complex64]) {
        let d = self.dim();
        out[..d - 1].copy_from_slice(&y[1..d]);
        out[d - 1] = self.rhs.eval(y, x);
    }
}

impl ODESystem {
    pub fn f(&self, y: &[Complex64], x: Complex64) -> Vec<Complex64> {
        let mut out = vec![Complex64::zero(); self.dim()];
        self.eval(y, x, &mut out);
        out
    }

    /// Last row of the Jacobian of `f`.
    pub fn gradient(&self, y: &[Complex64], x: Complex64) -> Vec<Complex64> {
        self.gradient.iter().map(|g| g.eval(y, x)).collect()
    }
}

pub fn compile_system(eq: &HierarchyEquation, alpha: Complex64) -> ODESystem {
    let full = eq.full_rhs();
    let gradient = (0..eq.order())
        .map(|j| CompiledPoly::new(&full.partial_jet(j), alpha))
        .collect();
    ODESystem {
        n: eq.n,
        alpha,
        rhs: CompiledPoly::new(&full, alpha),
        gradient,
    }
}

/// One piece of a path in the `x`-plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Segment {
    /// Straight line to `to = [re, im]`.
    Line { to: [f64; 2] },
    /// Arc about `center` through `sweep` radians (positive counterclockwise).
    Arc { center: [f64; 2], sweep: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub start: [f64; 2],
    pub segments: Vec<Segment>,
}

fn cx(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

/// Resolved segment with arclength parameterization.
#[derive(Clone, Copy, Debug)]
enum Piece {
    Line { a: Complex64, dir: Complex64, len: f64 },
    Arc { c: Complex64, r: f64, theta0: f64, sign: f64, len: f64 },
}

impl Piece {
    fn len(&self) -> f64 {
        match *self {
            Piece::Line { len, .. } | Piece::Arc { len, .. } => len,
        }
    }

    fn at(&self, s: f64) -> (Complex64, Complex64) {
        match *self {
            Piece::Line { a, dir, .. } => (a + dir * s, dir),
            Piece::Arc { c, r, theta0, sign, .. } => {
                let th = theta0 + sign * s / r;
                let e = Complex64::from_polar(1.0, th);
                (c + r * e, Complex64::new(0.0, sign) * e)
            }
        }
    }
}

impl PathSpec {
    pub fn line(from: Complex64, to: Complex64) -> Self {
        PathSpec {
            start: [from.re, from.im],
            segments: vec![Segment::Line { to: [to.re, to.im] }],
        }
    }

    pub fn end(&self) -> Complex64 {
        self.pieces().map_or(cx(self.start), |ps| {
            ps.last().map_or(cx(self.start), |p| p.at(p.len()).0)
        })
    }

    fn pieces(&self) -> Result<Vec<Piece>> {
        let mut cur = cx(self.start);
        let mut out = Vec::new();
        for seg in &self.segments {
            match *seg {
                Segment::Line { to } => {
                    let to = cx(to);
                    let d = to - cur;
                    let len = d.norm();
                    if len > 0.0 {
                        // closest approach to the origin
                        let dir = d / len;
                        let t = (-(cur.conj() * dir).re).clamp(0.0, len);
                        if (cur + dir * t).norm() < 1e-12 {
                            return Err(Error::Validation("path passes through x = 0".into()));
                        }
                        out.push(Piece::Line { a: cur, dir, len });
                    }
                    cur = to;
                }
                Segment::Arc { center, sweep } => {
                    let c = cx(center);
                    let r = (cur - c).norm();
                    if r == 0.0 {
                        return Err(Error::Validation("arc of zero radius".into()));
                    }
                    let theta0 = (cur - c).arg();
                    if c.norm() <= r + 1e-12 && c.norm() >= r - 1e-12 {
                        let ang = (-c).arg() - theta0;
                        let ang = if sweep >= 0.0 {
                            ang.rem_euclid(2.0 * PI)
                        } else {
                            -(-ang).rem_euclid(2.0 * PI)
                        };
                        if ang.abs() <= sweep.abs() {
                            return Err(Error::Validation("arc passes through x = 0".into()));
                        }
                    }
                    let len = r * sweep.abs();
                    if len > 0.0 {
                        out.push(Piece::Arc {
                            c,
                            r,
                            theta0,
                            sign: sweep.signum(),
                            len,
                        });
                    }
                    cur = c + Complex64::from_polar(r, theta0 + sweep);
                }
            }
        }
        Ok(out)
    }

    pub fn length(&self) -> Result<f64> {
        Ok(self.pieces()?.iter().map(Piece::len).sum())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sample {
    /// Arclength from the start of the path.
    pub s: f64,
    pub x: Complex64,
    pub y: Vec<Complex64>,
    /// Local error estimate of the step that produced this sample.
    pub err: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Status {
    Completed,
    PoleDetected,
    ToleranceFailure,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Trigger {
    MagnitudeBlowup,
    StepCollapse,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PoleEvent {
    /// Where detection fired.
    pub x_detect: Complex64,
    /// Extrapolated pole location.
    pub x_pole: Complex64,
    pub trigger: Trigger,
    pub last_abs: f64,
    /// Fitted exponent in `|V| ~ C |x - x_p|^{-q}`.
    pub q: f64,
    pub magnitude_threshold: f64,
    pub halvings: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub status: Status,
    pub pole_event: Option<PoleEvent>,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has a start sample")
    }
}

/// Integration controls.
#[derive(Clone, Debug, PartialEq)]
pub struct Options {
    pub tol: f64,
    /// Minimum arclength between stored samples; `None` stores every step.
    pub sample_spacing: Option<f64>,
    pub blowup_threshold: f64,
    pub halvings: usize,
    /// Step floor relative to `|x|`.
    pub step_floor: f64,
    pub max_steps: usize,
}

impl Options {
    pub fn with_tol(tol: f64) -> Self {
        Options {
            tol,
            sample_spacing: None,
            blowup_threshold: 1e8,
            halvings: 3,
            step_floor: 1e-12,
            max_steps: 2_000_000,
        }
    }
}

// Dormand-Prince 5(4).
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct Stepper<'a, F: VectorField + ?Sized> {
    sys: &'a F,
    k: Vec<Vec<Complex64>>,
    tmp: Vec<Complex64>,
}

impl<'a, F: VectorField + ?Sized> Stepper<'a, F> {
    fn new(sys: &'a F) -> Self {
        let d = sys.dim();
        Stepper {
            sys,
            k: vec![vec![Complex64::zero(); d]; 7],
            tmp: vec![Complex64::zero(); d],
        }
    }

    fn rhs(&mut self, piece: &Piece, s: f64, y: &[Complex64], stage: usize) {
        let (x, dxds) = piece.at(s);
        self.sys.eval(y, x, &mut self.k[stage]);
        for v in self.k[stage].iter_mut() {
            *v *= dxds;
        }
    }

    /// One step; returns the 5th-order state and the scaled error norm.
    fn step(&mut self, piece: &Piece, s: f64, y: &[Complex64], h: f64, tol: f64) -> (Vec<Complex64>, f64) {
        let d = y.len();
        self.rhs(piece, s, y, 0);
        for i in 1..7 {
            for j in 0..d {
                let mut acc = y[j];
                for (m, a) in A[i].iter().enumerate().take(i) {
                    acc += h * a * self.k[m][j];
                }
                self.tmp[j] = acc;
            }
            let t = self.tmp.clone();
            self.rhs(piece, s + C[i] * h, &t, i);
        }
        let mut y5 = vec![Complex64::zero(); d];
        let mut err: f64 = 0.0;
        for j in 0..d {
            let mut s5 = Complex64::zero();
            let mut s4 = Complex64::zero();
            for i in 0..7 {
                s5 += B5[i] * self.k[i][j];
                s4 += B4[i] * self.k[i][j];
            }
            y5[j] = y[j] + h * s5;
            let e = (h * (s5 - s4)).norm();
            let scale = tol * y[j].norm().max(y5[j].norm()).max(1.0);
            err = err.max(e / scale);
        }
        (y5, err)
    }
}

/// Fits `|y| ~ C |x - x_p|^{-q}` on the tail of the samples.
fn fit_pole<F: VectorField + ?Sized>(sys: &F, samples: &[Sample]) -> (Complex64, f64) {
    let last = samples.last().expect("non-empty");
    let y = &last.y;
    let mut f = vec![Complex64::zero(); y.len()];
    sys.eval(y, last.x, &mut f);
    let y0 = y[0];
    let y1 = y[1];
    let y2 = if y.len() > 2 { y[2] } else { f[1] };
    let l1 = y1 / y0;
    let l2 = y2 / y0;
    // y = C (x_p - x)^{-q}: l1 = q/(x_p - x), l2 - l1^2 = q/(x_p - x)^2
    let denom = l2 - l1 * l1;
    let q_local = if denom.norm() > 0.0 { (l1 * l1 / denom).re } else { 1.0 };
    let x_pole = if l1.norm() > 0.0 {
        last.x + q_local / l1
    } else {
        last.x
    };
    let tail = &samples[samples.len().saturating_sub(10)..];
    let pts: Vec<(f64, f64)> = tail
        .iter()
        .filter(|s| (s.x - x_pole).norm() > 0.0 && s.y[0].norm() > 0.0)
        .map(|s| ((s.x - x_pole).norm().ln(), s.y[0].norm().ln()))
        .collect();
    if pts.len() < 2 {
        return (x_pole, q_local);
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let q = if sxx > 0.0 { -sxy / sxx } else { q_local };
    (x_pole, q)
}

fn validate_tol(tol: f64) -> Result<()> {
    if !(1e-13..=1e-6).contains(&tol) {
        return Err(Error::Validation(format!(
            "tolerance {tol:e} outside [1e-13, 1e-6]"
        )));
    }
    Ok(())
}

/// Adaptive integration of `y0` along `path`.
pub fn integrate_path<F: VectorField + ?Sized>(
    sys: &F,
    y0: &[Complex64],
    path: &PathSpec,
    opts: &Options,
) -> Result<Trajectory> {
    validate_tol(opts.tol)?;
    if y0.len() != sys.dim() {
        return Err(Error::Validation(format!(
            "initial state has length {} but the system has dimension {}",
            y0.len(),
            sys.dim()
        )));
    }
    if y0.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Validation("initial state is not finite".into()));
    }
    let pieces = path.pieces()?;
    let mut stepper = Stepper::new(sys);
    let x_start = cx(path.start);
    let mut y = y0.to_vec();
    let mut samples = vec![Sample {
        s: 0.0,
        x: x_start,
        y: y.clone(),
        err: 0.0,
    }];
    let mut tail: Vec<Sample> = samples.clone();
    let mut s_total = 0.0;
    let mut h = opts.tol.powf(0.2) * 0.1;
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut shrinks = 0usize;
    let mut last_h = f64::INFINITY;
    let mut last_stored = 0.0;
    for piece in &pieces {
        let len = piece.len();
        let mut s = 0.0;
        while s < len {
            if accepted + rejected > opts.max_steps {
                return Err(Error::ToleranceFailure {
                    x: format!("{}", piece.at(s).0),
                    floor: opts.step_floor,
                });
            }
            let x_here = piece.at(s).0;
            let floor = opts.step_floor * x_here.norm().max(1.0);
            let hh = h.min(len - s);
            let (y_new, err) = stepper.step(piece, s, &y, hh, opts.tol);
            let finite = y_new.iter().all(|v| v.re.is_finite() && v.im.is_finite());
            if err <= 1.0 && finite {
                s += hh;
                y = y_new;
                accepted += 1;
                if hh < 0.999 * last_h && hh < len - (s - hh) {
                    shrinks += 1;
                } else {
                    shrinks = 0;
                }
                last_h = hh;
                let sample = Sample {
                    s: s_total + s,
                    x: piece.at(s).0,
                    y: y.clone(),
                    err: err * opts.tol,
                };
                tail.push(sample.clone());
                if tail.len() > 12 {
                    tail.remove(0);
                }
                let store = opts
                    .sample_spacing
                    .is_none_or(|d| s_total + s - last_stored >= d || s >= len);
                if store {
                    last_stored = s_total + s;
                    samples.push(sample);
                }
                if y[0].norm() > opts.blowup_threshold && shrinks >= opts.halvings {
                    let (x_pole, q) = fit_pole(sys, &tail);
                    if samples.last().map(|v| v.s) != tail.last().map(|v| v.s) {
                        samples.push(tail.last().unwrap().clone());
                    }
                    return Ok(Trajectory {
                        samples,
                        status: Status::PoleDetected,
                        pole_event: Some(PoleEvent {
                            x_detect: piece.at(s).0,
                            x_pole,
                            trigger: Trigger::MagnitudeBlowup,
                            last_abs: y[0].norm(),
                            q,
                            magnitude_threshold: opts.blowup_threshold,
                            halvings: opts.halvings,
                        }),
                        steps_accepted: accepted,
                        steps_rejected: rejected,
                    });
                }
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h = hh * fac;
            } else {
                rejected += 1;
                let fac = if finite { (0.9 * err.powf(-0.2)).clamp(0.1, 0.5) } else { 0.25 };
                h = hh * fac;
                if h < floor {
                    // Growing tail is the blow-up signature.
                    let growing = tail.len() >= 3
                        && tail.windows(2).rev().take(2).all(|w| w[1].y[0].norm() > w[0].y[0].norm())
                        && y[0].norm() > 1e3;
                    if growing {
                        let (x_pole, q) = fit_pole(sys, &tail);
                        return Ok(Trajectory {
                            samples,
                            status: Status::PoleDetected,
                            pole_event: Some(PoleEvent {
                                x_detect: x_here,
                                x_pole,
                                trigger: Trigger::StepCollapse,
                                last_abs: y[0].norm(),
                                q,
                                magnitude_threshold: opts.blowup_threshold,
                                halvings: opts.halvings,
                            }),
                            steps_accepted: accepted,
                            steps_rejected: rejected,
                        });
                    }
                    return Err(Error::ToleranceFailure {
                        x: format!("{x_here}"),
                        floor,
                    });
                }
            }
        }
        s_total += len;
    }
    Ok(Trajectory {
        samples,
        status: Status::Completed,
        pole_event: None,
        steps_accepted: accepted,
        steps_rejected: rejected,
    })
}

/// Fixed-step run of the 5th-order formula, used for order checks.
pub fn integrate_fixed<F: VectorField + ?Sized>(
    sys: &F,
    y0: &[Complex64],
    path: &PathSpec,
    steps_per_piece: usize,
) -> Result<Vec<Complex64>> {
    let mut stepper = Stepper::new(sys);
    let mut y = y0.to_vec();
    for piece in path.pieces()? {
        let h = piece.len() / steps_per_piece as f64;
        for i in 0..steps_per_piece {
            let (y_new, _) = stepper.step(&piece, i as f64 * h, &y, h, 1.0);
            y = y_new;
        }
    }
    Ok(y)
}

/// End state at `tol` and an estimate of its global error from a run at
/// `tol / 100`.
pub fn integrate_with_estimate<F: VectorField + ?Sized>(
    sys: &F,
    y0: &[Complex64],
    path: &PathSpec,
    tol: f64,
) -> Result<(Trajectory, f64)> {
    let coarse = integrate_path(sys, y0, path, &Options::with_tol(tol))?;
    let fine_tol = (tol / 100.0).max(1e-13);
    let fine = integrate_path(sys, y0, path, &Options::with_tol(fine_tol))?;
    if coarse.status != Status::Completed || fine.status != Status::Completed {
        return Ok((coarse, f64::INFINITY));
    }
    let est = coarse
        .last()
        .y
        .iter()
        .zip(&fine.last().y)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    Ok((coarse, est))
}

/// State `(V, V', ..., V^{(2n-1)})` from the optimally truncated series.
pub fn seed_from_series(series: &FormalSeries, x0: &XPoint) -> Result<(Vec<Complex64>, f64)> {
    let ev = series.evaluate(x0, Truncation::Optimal)?;
    let (jets, _) = series.jets(x0, 2 * series.n as usize, Truncation::Optimal)?;
    Ok((jets, ev.error_estimate))
}

/// Outcome for one ray of a pole scan.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RayResult {
    pub angle: f64,
    pub pole_radius: Option<f64>,
    pub trigger: Option<Trigger>,
    pub seed_error: f64,
    /// `|V - series|` where the ray ends, when it completed.
    pub end_deviation: Option<f64>,
    /// Largest `|V|` met on the ray.
    pub max_abs: f64,
    pub error: Option<String>,
}

/// Rays of a scan: seeded at `r_seed` from the series, integrated radially
/// to `r_end`.
#[derive(Clone, Debug, PartialEq)]
pub struct Fan {
    pub angles: Vec<f64>,
    pub r_seed: f64,
    pub r_end: f64,
}

impl Fan {
    /// `count` equally spaced angles covering `[center - half, center + half]`.
    pub fn centered(center: f64, half_width: f64, count: usize, r_seed: f64, r_end: f64) -> Self {
        let angles = if count <= 1 {
            vec![center]
        } else {
            (0..count)
                .map(|i| center - half_width + 2.0 * half_width * i as f64 / (count - 1) as f64)
                .collect()
        };
        Fan {
            angles,
            r_seed,
            r_end,
        }
    }
}

/// Seeds each ray on the arc `|x| = r_seed` (argument equal to the ray
/// angle, so rays past `pi` continue the branch) and integrates along it.
pub fn pole_map(sys: &ODESystem, series: &FormalSeries, fan: &Fan, tol: f64) -> Vec<RayResult> {
    let mut out: Vec<RayResult> = fan
        .angles
        .par_iter()
        .map(|&angle| {
            let x0 = XPoint::polar(fan.r_seed, angle);
            let seed = seed_from_series(series, &x0);
            let (y0, seed_error) = match seed {
                Ok(v) => v,
                Err(e) => {
                    return RayResult {
                        angle,
                        pole_radius: None,
                        trigger: None,
                        seed_error: f64::NAN,
                        end_deviation: None,
                        max_abs: f64::NAN,
                        error: Some(e.to_string()),
                    }
                }
            };
            let path = PathSpec::line(x0.value, Complex64::from_polar(fan.r_end, angle));
            match integrate_path(sys, &y0, &path, &Options::with_tol(tol)) {
                Ok(t) => {
                    let end_deviation = (t.status == Status::Completed)
                        .then(|| {
                            series
                                .evaluate(&XPoint::polar(fan.r_end, angle), Truncation::Optimal)
                                .ok()
                                .map(|ev| (t.last().y[0] - ev.value).norm())
                        })
                        .flatten();
                    RayResult {
                        angle,
                        pole_radius: t.pole_event.as_ref().map(|p| p.x_detect.norm()),
                        trigger: t.pole_event.as_ref().map(|p| p.trigger),
                        seed_error,
                        end_deviation,
                        max_abs: t.samples.iter().map(|s| s.y[0].norm()).fold(0.0, f64::max),
                        error: None,
                    }
                }
                Err(e) => RayResult {
                    angle,
                    pole_radius: None,
                    trigger: None,
                    seed_error,
                    end_deviation: None,
                    max_abs: f64::NAN,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    out.sort_by(|a, b| a.angle.total_cmp(&b.angle));
    out
}

pub fn pole_map_csv(results: &[RayResult]) -> String {
    let mut s = String::from("angle,pole_radius,trigger,seed_error,end_deviation,max_abs,error\n");
    for r in results {
        let radius = r.pole_radius.map_or("-".to_string(), |v| format!("{v:.12e}"));
        let trig = match r.trigger {
            Some(Trigger::MagnitudeBlowup) => "MagnitudeBlowup",
            Some(Trigger::StepCollapse) => "StepCollapse",
            None => "-",
        };
        let err = r.error.clone().unwrap_or_else(|| "-".into()).replace(',', ";");
        let dev = r.end_deviation.map_or("-".to_string(), |v| format!("{v:.6e}"));
        let _ = writeln!(
            s,
            "{:.12e},{radius},{trig},{:.6e},{dev},{:.6e},{err}",
            r.angle, r.seed_error, r.max_abs
        );
    }
    s
}

pub fn trajectory_csv(t: &Trajectory) -> String {
    let dim = t.samples.first().map_or(0, |s| s.y.len());
    let mut s = String::from("re_x,im_x");
    for j in 1..=dim {
        let _ = write!(s, ",re_y{j},im_y{j}");
    }
    s.push_str(",err\n");
    for smp in &t.samples {
        let _ = write!(s, "{:.17e},{:.17e}", smp.x.re, smp.x.im);
        for v in &smp.y {
            let _ = write!(s, ",{:.17e},{:.17e}", v.re, v.im);
        }
        let _ = writeln!(s, ",{:.6e}", smp.err);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::build_p2n;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn compiled_values() {
        let s1 = compile_system(&build_p2n(1).unwrap(), c(0.0, 0.0));
        assert_eq!(s1.f(&[c(1.0, 0.0), c(0.0, 0.0)], c(0.0, 0.0)), vec![c(0.0, 0.0), c(2.0, 0.0)]);
        let s2 = compile_system(&build_p2n(2).unwrap(), c(0.0, 0.0));
        let y = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        assert_eq!(s2.f(&y, c(0.0, 0.0))[3], c(-6.0, 0.0));
    }

    #[test]
    fn zero_length_path_keeps_state() {
        let sys = compile_system(&build_p2n(1).unwrap(), c(0.3, 0.0));
        let y0 = vec![c(0.2, 0.1), c(-0.4, 0.0)];
        let p = PathSpec::line(c(1.0, 1.0), c(1.0, 1.0));
        let t = integrate_path(&sys, &y0, &p, &Options::with_tol(1e-10)).unwrap();
        assert_eq!(t.last().y, y0);
        assert_eq!(t.status, Status::Completed);
    }

    #[test]
    fn linear_test_problem_on_arc() {
        // With alpha = 0 and V small, V'' ~ x V is Airy; compare against a
        // tight reference along an arc and back along a chord.
        let sys = compile_system(&build_p2n(1).unwrap(), c(0.0, 0.0));
        let y0 = vec![c(1e-3, 0.0), c(0.0, 1e-3)];
        let arc = PathSpec {
            start: [1.0, 0.0],
            segments: vec![Segment::Arc { center: [0.0, 0.0], sweep: PI / 2.0 }],
        };
        let chord = PathSpec::line(c(1.0, 0.0), c(0.0, 1.0));
        let a = integrate_path(&sys, &y0, &arc, &Options::with_tol(1e-12)).unwrap();
        let b = integrate_path(&sys, &y0, &chord, &Options::with_tol(1e-12)).unwrap();
        assert!((a.last().x - c(0.0, 1.0)).norm() < 1e-14);
        for (u, v) in a.last().y.iter().zip(&b.last().y) {
            assert!((u - v).norm() < 1e-12);
        }
    }

    #[test]
    fn path_through_origin_is_rejected() {
        let p = PathSpec::line(c(-1.0, 0.0), c(1.0, 0.0));
        assert!(p.length().is_err());
    }

    #[test]
    fn tolerance_range_is_enforced() {
        let sys = compile_system(&build_p2n(1).unwrap(), c(0.0, 0.0));
        let p = PathSpec::line(c(1.0, 0.0), c(2.0, 0.0));
        let r = integrate_path(&sys, &[c(0.0, 0.0), c(0.0, 0.0)], &p, &Options::with_tol(1e-3));
        assert!(matches!(r, Err(Error::Validation(_))));
    }
}
