//! Adaptive Dormand–Prince 5(4) integrator with continuous output.
//!
//! The driver hands every accepted step to an observer together with its
//! dense-output polynomial; the observer decides whether to continue.
//! Event location is done by the caller with [`Step::locate`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type State<const D: usize> = [f64; D];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Smallest admissible step before [`Error::StepFailure`].
    pub h_min: f64,
    /// Largest admissible step (infinite means unlimited).
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-10,
            atol: 1e-12,
            h_min: 1e-300,
            h_max: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

impl Tolerances {
    pub fn with_rtol(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    /// Both tolerances divided by `factor`.
    pub fn tightened(mut self, factor: f64) -> Self {
        self.rtol /= factor;
        self.atol /= factor;
        self
    }
}

// Butcher tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// Error estimate coefficients (fifth minus fourth order).
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Dense output.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step with its continuous extension.
#[derive(Debug, Clone)]
pub struct Step<const D: usize> {
    pub t0: f64,
    pub t1: f64,
    pub y0: State<D>,
    pub y1: State<D>,
    /// Derivative at both ends.
    pub dy0: State<D>,
    pub dy1: State<D>,
    rcont: [State<D>; 5],
}

impl<const D: usize> Step<D> {
    pub fn h(&self) -> f64 {
        self.t1 - self.t0
    }

    /// Fourth-order continuous interpolant on `[t0, t1]`.
    pub fn eval(&self, t: f64) -> State<D> {
        let theta = (t - self.t0) / self.h();
        let theta1 = 1.0 - theta;
        let mut out = [0.0; D];
        for i in 0..D {
            let r = &self.rcont;
            out[i] = r[0][i]
                + theta * (r[1][i] + theta1 * (r[2][i] + theta * (r[3][i] + theta1 * r[4][i])));
        }
        out
    }

    /// Finds the first root of `g` on the step by sign-change bisection
    /// on the dense output, given that `g(t0)` and `g(t1)` have opposite
    /// signs. Returns the right end of the final bracket.
    pub fn locate<G>(&self, mut g: G, t_tol: f64) -> f64
    where
        G: FnMut(&State<D>) -> f64,
    {
        let mut lo = self.t0;
        let mut hi = self.t1;
        let g_lo = g(&self.y0);
        let sign_lo = g_lo > 0.0;
        for _ in 0..200 {
            if (hi - lo).abs() <= t_tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            let gm = g(&self.eval(mid));
            if (gm > 0.0) == sign_lo && gm != 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

/// Observer verdict after each accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Control {
    Continue,
    Stop,
}

/// Why the driver returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    ReachedEnd,
    Stopped,
    MaxSteps,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

fn axpy<const D: usize>(y: &State<D>, h: f64, terms: &[(f64, &State<D>)]) -> State<D> {
    let mut out = *y;
    for i in 0..D {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

fn finite<const D: usize>(y: &State<D>) -> bool {
    y.iter().all(|v| v.is_finite())
}

fn error_norm<const D: usize>(
    tol: &Tolerances,
    y0: &State<D>,
    y1: &State<D>,
    err: &State<D>,
) -> f64 {
    let mut acc = 0.0;
    for i in 0..D {
        let sc = tol.atol + tol.rtol * y0[i].abs().max(y1[i].abs());
        acc += (err[i] / sc).powi(2);
    }
    (acc / D as f64).sqrt()
}

fn initial_step<const D: usize, F>(
    rhs: &F,
    t0: f64,
    y0: &State<D>,
    f0: &State<D>,
    dir: f64,
    tol: &Tolerances,
) -> f64
where
    F: Fn(f64, &State<D>) -> State<D>,
{
    let sc = |i: usize, y: &State<D>| tol.atol + tol.rtol * y[i].abs();
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..D {
        d0 += (y0[i] / sc(i, y0)).powi(2);
        d1 += (f0[i] / sc(i, y0)).powi(2);
    }
    d0 = (d0 / D as f64).sqrt();
    d1 = (d1 / D as f64).sqrt();
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h0 = h0.min(tol.h_max);
    let y1 = axpy(y0, dir * h0, &[(1.0, f0)]);
    let f1 = rhs(t0 + dir * h0, &y1);
    let mut d2 = 0.0;
    for i in 0..D {
        d2 += ((f1[i] - f0[i]) / sc(i, y0)).powi(2);
    }
    d2 = (d2 / D as f64).sqrt() / h0;
    let h1 = if !d2.is_finite() {
        h0 * 1e-3
    } else if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(tol.h_max).max(tol.h_min)
}

/// Integrates `y' = rhs(t, y)` from `t0` towards `t_end`, calling
/// `observer` after every accepted step.
///
/// Steps that produce non-finite stages are rejected and retried with a
/// smaller step, so the right-hand side may return NaN outside its domain.
pub fn integrate<const D: usize, F, O>(
    rhs: F,
    t0: f64,
    y0: State<D>,
    t_end: f64,
    tol: &Tolerances,
    mut observer: O,
) -> Result<(Outcome, Stats)>
where
    F: Fn(f64, &State<D>) -> State<D>,
    O: FnMut(&Step<D>) -> Control,
{
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let mut stats = Stats::default();
    let mut t = t0;
    let mut y = y0;
    let mut k1 = rhs(t, &y);
    stats.evaluations += 1;
    if !finite(&k1) || !finite(&y) {
        return Err(Error::StepFailure { at: t, h: 0.0 });
    }
    let mut h = initial_step(&rhs, t, &y, &k1, dir, tol);
    stats.evaluations += 1;
    let mut last_rejected = false;

    loop {
        if stats.accepted >= tol.max_steps {
            return Ok((Outcome::MaxSteps, stats));
        }
        if (t_end - t) * dir <= 0.0 {
            return Ok((Outcome::ReachedEnd, stats));
        }
        if h < tol.h_min {
            return Err(Error::StepFailure { at: t, h });
        }
        let mut hs = h.min(tol.h_max);
        let mut hit_end = false;
        if (t + dir * hs - t_end) * dir >= 0.0 {
            hs = (t_end - t).abs();
            hit_end = true;
        }
        let hd = dir * hs;

        let k2 = rhs(t + C2 * hd, &axpy(&y, hd, &[(A21, &k1)]));
        let k3 = rhs(t + C3 * hd, &axpy(&y, hd, &[(A31, &k1), (A32, &k2)]));
        let k4 = rhs(
            t + C4 * hd,
            &axpy(&y, hd, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
        );
        let k5 = rhs(
            t + C5 * hd,
            &axpy(&y, hd, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let y6 = axpy(
            &y,
            hd,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        );
        let k6 = rhs(t + hd, &y6);
        let y_new = axpy(
            &y,
            hd,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let k7 = rhs(t + hd, &y_new);
        stats.evaluations += 6;

        let ok = [&k2, &k3, &k4, &k5, &k6, &k7].iter().all(|k| finite(k)) && finite(&y_new);
        if !ok {
            stats.rejected += 1;
            h = hs * 0.25;
            last_rejected = true;
            continue;
        }

        let err_vec = axpy(
            &[0.0; D],
            hd,
            &[
                (E1, &k1),
                (E3, &k3),
                (E4, &k4),
                (E5, &k5),
                (E6, &k6),
                (E7, &k7),
            ],
        );
        let err = error_norm(tol, &y, &y_new, &err_vec);

        if err <= 1.0 {
            let t_new = if hit_end { t_end } else { t + hd };
            let mut rcont = [[0.0; D]; 5];
            for i in 0..D {
                let ydiff = y_new[i] - y[i];
                let bspl = hd * k1[i] - ydiff;
                rcont[0][i] = y[i];
                rcont[1][i] = ydiff;
                rcont[2][i] = bspl;
                rcont[3][i] = ydiff - hd * k7[i] - bspl;
                rcont[4][i] = hd
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let step = Step {
                t0: t,
                t1: t_new,
                y0: y,
                y1: y_new,
                dy0: k1,
                dy1: k7,
                rcont,
            };
            stats.accepted += 1;
            t = t_new;
            y = y_new;
            k1 = k7;
            if observer(&step) == Control::Stop {
                return Ok((Outcome::Stopped, stats));
            }
            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 10.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h = hs * fac;
            last_rejected = false;
        } else {
            stats.rejected += 1;
            let fac = (0.9 * err.powf(-0.2)).max(0.2);
            h = hs * fac;
            last_rejected = true;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth() {
        let tol = Tolerances::default();
        let mut last = None;
        let (out, _) = integrate(
            |_, y: &[f64; 1]| [y[0]],
            0.0,
            [1.0],
            3.0,
            &tol,
            |s| {
                last = Some(s.clone());
                Control::Continue
            },
        )
        .unwrap();
        assert_eq!(out, Outcome::ReachedEnd);
        let s = last.unwrap();
        assert_eq!(s.t1, 3.0);
        assert!((s.y1[0] - 3f64.exp()).abs() < 1e-8 * 3f64.exp());
    }

    #[test]
    fn dense_output_is_accurate_inside_steps() {
        // Harmonic oscillator, compare the interpolant at interior points.
        let tol = Tolerances::default().with_rtol(1e-9, 1e-12);
        let mut worst: f64 = 0.0;
        integrate(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [0.0, 1.0],
            10.0,
            &tol,
            |s| {
                for k in 1..8 {
                    let t = s.t0 + s.h() * k as f64 / 8.0;
                    let y = s.eval(t);
                    worst = worst
                        .max((y[0] - t.sin()).abs())
                        .max((y[1] - t.cos()).abs());
                }
                Control::Continue
            },
        )
        .unwrap();
        assert!(worst < 1e-8, "dense output error {worst}");
    }

    #[test]
    fn backward_integration_and_event() {
        // y' = -1 from y(0) = 1 backwards: y(t) = 1 - t, root of y - 2 at t = -1.
        let tol = Tolerances::default();
        let mut root = None;
        integrate(
            |_, _y: &[f64; 1]| [-1.0],
            0.0,
            [1.0],
            -5.0,
            &tol,
            |s| {
                if (s.y0[0] - 2.0) * (s.y1[0] - 2.0) <= 0.0 {
                    root = Some(s.locate(|y| y[0] - 2.0, 1e-13));
                    return Control::Stop;
                }
                Control::Continue
            },
        )
        .unwrap();
        assert!((root.unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn nan_stages_are_rejected() {
        // sqrt blows up (NaN) for y < 0; the solution y = (1 - t/2)^2 touches zero at t = 2.
        let tol = Tolerances::default();
        let res = integrate(
            |_, y: &[f64; 1]| [-y[0].sqrt()],
            0.0,
            [1.0],
            1.9,
            &tol,
            |_| Control::Continue,
        );
        assert!(res.is_ok());
    }

    #[test]
    fn step_failure_on_singularity() {
        // y' = y^2 blows up at t = 1.
        let tol = Tolerances {
            h_min: 1e-14,
            ..Tolerances::default()
        };
        let res = integrate(
            |_, y: &[f64; 1]| [y[0] * y[0]],
            0.0,
            [1.0],
            2.0,
            &tol,
            |_| Control::Continue,
        );
        assert!(matches!(res, Err(Error::StepFailure { .. })));
    }
}
