//! The profile equation
//!
//! ```text
//! (f^m)'' + (N-1)/ξ (f^m)' - α f + β ξ f' + ξ^σ f^p = 0
//! ```
//!
//! written as a first-order system in `(f, w)` with `w = (f^m)'`, its
//! local expansions at the origin, at an interface and at infinity, and
//! the shooting integration of the orbit leaving the origin.
//!
//! The orbit is integrated in the autonomous phase variables
//! `X = m ξ^{-2} f^{m-1}`, `Y = w/(ξ f)` with clock `dη = ξ dξ / (m f^{m-1})`
//! and state `(ln X, Y, ln ξ)`. This clock stays regular where `f → 0`,
//! which is exactly where the classification is decided.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, Control, Step, Tolerances};
use crate::params::Params;
use crate::phase;

/// One sample `(ξ, f, (f^m)')` of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub xi: f64,
    pub f: f64,
    pub w: f64,
}

impl ProfilePoint {
    pub fn new(xi: f64, f: f64, w: f64) -> Self {
        ProfilePoint { xi, f, w }
    }

    /// f' = w / (m f^{m-1}).
    pub fn slope(&self, m: f64) -> f64 {
        self.w / (m * self.f.powf(m - 1.0))
    }
}

/// Fate of the orbit leaving the origin with `f(0) > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OrbitClass {
    /// f reaches zero with nonzero flux (orbit enters Q3).
    CrossesZero,
    /// f attains a positive minimum and grows afterwards (orbit enters P0).
    TurnsUp,
    /// f and its flux vanish together (orbit enters P1).
    Interface,
    Inconclusive,
}

impl std::fmt::Display for OrbitClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            OrbitClass::CrossesZero => "CrossesZero",
            OrbitClass::TurnsUp => "TurnsUp",
            OrbitClass::Interface => "Interface",
            OrbitClass::Inconclusive => "Inconclusive",
        };
        f.write_str(s)
    }
}

/// Numerical knobs of a profile integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileOptions {
    pub tol: Tolerances,
    /// Relative size of the dropped origin correction at the handoff radius.
    pub series_delta: f64,
    /// f floor relative to f(0) used to stop orbits heading to Q3.
    pub f_floor_rel: f64,
    /// Accuracy of event location in η.
    pub event_tol: f64,
    /// Maximal spacing of recorded points in ln ξ.
    pub max_log_spacing: f64,
    /// Closest approach to P1 (scaled variables) below which an orbit is
    /// accepted as the interface connection.
    pub interface_dist: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            // Near P0 the flux variable Y lives on the scale of X, far below
            // any fixed absolute tolerance, so control is purely relative.
            tol: Tolerances::default().with_rtol(1e-10, 1e-300),
            series_delta: 1e-8,
            f_floor_rel: 1e-10,
            event_tol: 1e-12,
            max_log_spacing: 0.02,
            interface_dist: 1e-2,
        }
    }
}

/// What the integration is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Stop at the first decisive event; no points kept.
    Classify,
    /// Record the orbit and stop at the first decisive event.
    Record,
    /// Record the orbit near α*, truncated at its closest approach to P1.
    Interface,
    /// Record the orbit through its minimum and on to `xi_max`.
    Global,
}

/// A computed profile with its classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileGrid {
    pub points: Vec<ProfilePoint>,
    pub classification: OrbitClass,
    /// Interface (or zero crossing) location.
    pub xi0: Option<f64>,
    /// Flux `(f^m)'` measured at a zero crossing.
    pub crossing_flux: Option<f64>,
    /// Position of the minimum of f for profiles that turn up.
    pub xi_min: Option<f64>,
    /// Origin normalisation, f(0) = K^{1/(m-p)}.
    #[serde(rename = "K")]
    pub k: f64,
    pub params: Params,
    pub options: ProfileOptions,
    /// Closest distance of the orbit to P1 in scaled phase variables.
    pub p1_distance: f64,
}

impl ProfileGrid {
    pub fn f0(&self) -> f64 {
        origin_value(&self.params, self.k)
    }

    pub fn last(&self) -> &ProfilePoint {
        self.points.last().expect("profile grids are never empty")
    }

    /// Minimum of f over the grid.
    pub fn min_f(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.f)
            .fold(f64::INFINITY, f64::min)
    }
}

/// `(f', w')` of the profile equation at a point with `ξ > 0`, `f > 0`.
pub fn rhs_profile(pt: &ProfilePoint, params: &Params) -> Result<(f64, f64)> {
    if !(pt.xi > 0.0) || !(pt.f > 0.0) {
        return Err(Error::DegenerateState { xi: pt.xi, f: pt.f });
    }
    let Params {
        m,
        p,
        alpha,
        beta,
        sigma,
        ..
    } = *params;
    let n = params.dim();
    let df = pt.w / (m * pt.f.powf(m - 1.0));
    let dw = -(n - 1.0) * pt.w / pt.xi + alpha * pt.f
        - beta * pt.xi * df
        - pt.xi.powf(sigma) * pt.f.powf(p);
    Ok((df, dw))
}

/// f(0) = K^{1/(m-p)}.
pub fn origin_value(params: &Params, k: f64) -> f64 {
    k.powf(1.0 / (params.m - params.p))
}

/// Coefficient c = (m-1)² / (2m[N(m-1) - 2(p-1)]) of the origin expansion.
pub fn origin_coefficient(params: &Params) -> f64 {
    let (m, p, n) = (params.m, params.p, params.dim());
    (m - 1.0).powi(2) / (2.0 * m * (n * (m - 1.0) - 2.0 * (p - 1.0)))
}

/// Radius where the origin correction `c ξ^{2(m-p)/(m-1)}` equals `delta · K`.
pub fn series_handoff_radius(params: &Params, k: f64, delta: f64) -> f64 {
    (delta * k / origin_coefficient(params)).powf(1.0 / params.origin_exponent())
}

/// Origin expansion `f = [K - c ξ^{2(m-p)/(m-1)}]^{1/(m-p)}` and its exact flux.
pub fn series_origin(params: &Params, k: f64, xi: f64) -> Result<ProfilePoint> {
    if !(k > 0.0) || !(xi >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "series_origin needs K > 0 and xi >= 0 (K = {k}, xi = {xi})"
        )));
    }
    let (m, p) = (params.m, params.p);
    let s = params.origin_exponent();
    let c = origin_coefficient(params);
    let bracket = k - c * xi.powf(s);
    if bracket <= 0.0 {
        return Err(Error::SeriesOutOfRange { xi, bracket });
    }
    let f = bracket.powf(1.0 / (m - p));
    // f^m = B^{m/(m-p)}, (f^m)' = m/(m-p) B^{p/(m-p)} B'.
    let w = if xi == 0.0 {
        0.0
    } else {
        -m / (m - p) * bracket.powf(p / (m - p)) * c * s * xi.powf(s - 1.0)
    };
    Ok(ProfilePoint { xi, f, w })
}

/// Interface law `f^{m-1} = β(m-1)(ξ0² - ξ²)/(2m)` for `0 ≤ ξ ≤ ξ0`, zero beyond.
pub fn series_interface(params: &Params, xi0: f64, xi: f64) -> ProfilePoint {
    let (m, beta) = (params.m, params.beta);
    let pressure = (beta * (m - 1.0) * (xi0 * xi0 - xi * xi) / (2.0 * m)).max(0.0);
    let f = pressure.powf(1.0 / (m - 1.0));
    // (f^m)' = f · (m/(m-1)) (f^{m-1})' = -f β ξ.
    let w = if pressure > 0.0 { -f * beta * xi } else { 0.0 };
    ProfilePoint { xi, f, w }
}

/// Interface location implied by the interface law through one point.
pub fn interface_from_point(params: &Params, pt: &ProfilePoint) -> f64 {
    let m = params.m;
    (pt.xi * pt.xi + 2.0 * m * pt.f.powf(m - 1.0) / (params.beta * (m - 1.0))).sqrt()
}

/// Far-field constant of `f ~ C ξ^{2/(m-1)} (log ξ)^{-1/(p-1)}` as stated
/// for the centre-manifold coefficient `-m`:
/// `C = (α(m-1)/(2(p-1)))^{1/(p-1)} m^{-(m+p-2)/[(m-1)(p-1)]}`.
pub fn farfield_constant(params: &Params) -> f64 {
    let (m, p, alpha) = (params.m, params.p, params.alpha);
    (alpha * (m - 1.0) / (2.0 * (p - 1.0))).powf(1.0 / (p - 1.0))
        * m.powf(-(m + p - 2.0) / ((m - 1.0) * (p - 1.0)))
}

/// Far-field constant from the leading balance `β ξ g' = -g^p` of the
/// profile equation with `f = g ξ^{2/(m-1)}`: `C = (β/(p-1))^{1/(p-1)}`.
///
/// This is what the reaction coefficient `m^{(1-p)/(m-1)}` of the phase
/// system gives on the P0 centre manifold; it differs from
/// [`farfield_constant`] by the factor `m^{(m+p-2)/[(m-1)(p-1)]}`.
pub fn farfield_constant_leading_balance(params: &Params) -> f64 {
    (params.beta / (params.p - 1.0)).powf(1.0 / (params.p - 1.0))
}

/// `f(ξ) ξ^{-2/(m-1)} (log ξ)^{1/(p-1)}`, which tends to the far-field constant.
pub fn farfield_quantity(params: &Params, pt: &ProfilePoint) -> f64 {
    pt.f * pt.xi.powf(-params.growth_exponent()) * pt.xi.ln().powf(params.log_exponent())
}

/// Natural length scale of a profile with origin value `f0`: the interface
/// radius the leading interface law would give for `f^{m-1} = f0^{m-1}`.
pub fn length_scale(params: &Params, k: f64) -> f64 {
    let f0 = origin_value(params, k);
    (2.0 * params.m * f0.powf(params.m - 1.0) / ((params.m - 1.0) * params.beta)).sqrt()
}

/// Default integration limit for classification: 10³ natural length scales.
pub fn default_xi_max(params: &Params, k: f64) -> f64 {
    1e3 * length_scale(params, k)
}

/// Phase state `(ln X, Y, ln ξ)` to profile variables.
pub fn phase_to_point(params: &Params, y: &[f64; 3]) -> ProfilePoint {
    let m = params.m;
    let xi = y[2].exp();
    // f^{m-1} = X ξ² / m, computed in logs to survive X ~ 1e15.
    let f = ((y[0] + 2.0 * y[2] - m.ln()) / (m - 1.0)).exp();
    ProfilePoint {
        xi,
        f,
        w: y[1] * xi * f,
    }
}

fn point_to_phase(params: &Params, pt: &ProfilePoint) -> [f64; 3] {
    let m = params.m;
    let ln_x = m.ln() - 2.0 * pt.xi.ln() + (m - 1.0) * pt.f.ln();
    [ln_x, pt.w / (pt.xi * pt.f), pt.xi.ln()]
}

/// True once the orbit provably runs into Q3: with `K = -Y/β > 1`,
/// `(K² - K) β² > (α + N K β) X` keeps Y decreasing and X decreasing forever.
fn crosses_zero_certified(params: &Params, x: f64, y: f64) -> bool {
    let kk = -y / params.beta;
    kk > 1.0
        && (kk * kk - kk) * params.beta * params.beta
            > (params.alpha + params.dim() * kk * params.beta) * x
}

struct Recorder {
    points: Vec<ProfilePoint>,
    states: Vec<[f64; 3]>,
}

impl Recorder {
    fn push(&mut self, params: &Params, y: [f64; 3]) {
        let pt = phase_to_point(params, &y);
        if let Some(last) = self.points.last() {
            if !(pt.xi > last.xi * (1.0 + 1e-13)) {
                return;
            }
        }
        self.points.push(pt);
        self.states.push(y);
    }

    fn push_step(&mut self, params: &Params, step: &Step<3>, until: f64, max_ds: f64) {
        let y_end = step.eval(until);
        let ds = y_end[2] - step.y0[2];
        let n = (ds / max_ds).ceil().max(1.0) as usize;
        if n > 1 {
            // Sample the step uniformly in ln ξ through the dense output.
            let mut lo = step.t0;
            for j in 1..n {
                let target = step.y0[2] + ds * j as f64 / n as f64;
                let mut hi = until;
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if step.eval(mid)[2] < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                self.push(params, step.eval(hi));
                lo = hi;
            }
        }
        self.push(params, y_end);
    }
}

/// Integrates the orbit leaving the origin with normalisation `K`.
///
/// Termination: a zero of the flux with f > 0 crossing from negative to
/// positive (TurnsUp), a certified escape to `Y → -∞` (CrossesZero),
/// `ξ ≥ xi_max` (Inconclusive, or the end of a `Global` run). In
/// `Interface` mode the recorded orbit is cut at its closest approach to
/// `P1 = (0, -β)` and the interface is fitted from the local law there.
pub fn integrate_profile(
    params: &Params,
    k: f64,
    xi_max: f64,
    mode: Mode,
    opts: &ProfileOptions,
) -> Result<ProfileGrid> {
    if !(k > 0.0) {
        return Err(Error::InvalidInput(format!("K must be positive (K = {k})")));
    }
    let xi_init = series_handoff_radius(params, k, opts.series_delta);
    if !(xi_max > xi_init) {
        return Err(Error::InvalidInput(format!(
            "xi_max = {xi_max} must exceed the series handoff radius {xi_init}"
        )));
    }
    let start = series_origin(params, k, xi_init)?;
    let y0 = point_to_phase(params, &start);
    let s_max = xi_max.ln();
    let f_floor = opts.f_floor_rel * origin_value(params, k);
    let record = mode != Mode::Classify;

    let mut rec = Recorder {
        points: Vec::new(),
        states: Vec::new(),
    };
    if record {
        rec.points.push(start);
        rec.states.push(y0);
    }

    let mut class = OrbitClass::Inconclusive;
    let mut xi_min = None;
    let mut crossing = false;
    let p = *params;

    let rhs = move |_eta: f64, y: &[f64; 3]| phase::rhs_phase_log(&p, y);
    let observer = |step: &Step<3>| {
        let (y0s, y1s) = (step.y0, step.y1);

        if crossing {
            // Past the Q3 certificate: follow f towards zero for the record.
            if record {
                rec.push_step(params, step, step.t1, opts.max_log_spacing);
            }
            let pt = phase_to_point(params, &y1s);
            if pt.f <= f_floor || y1s[1] <= -1e12 * params.beta {
                return Control::Stop;
            }
            return Control::Continue;
        }

        // Flux changes sign upwards: the profile has its minimum here.
        if class != OrbitClass::TurnsUp && y0s[1] < 0.0 && y1s[1] >= 0.0 {
            let eta = step.locate(|y| y[1], opts.event_tol);
            let ys = step.eval(eta);
            xi_min = Some(ys[2].exp());
            class = OrbitClass::TurnsUp;
            if mode != Mode::Global {
                if record {
                    rec.push_step(params, step, eta, opts.max_log_spacing);
                }
                return Control::Stop;
            }
        }

        if class != OrbitClass::TurnsUp && crosses_zero_certified(params, y1s[0].exp(), y1s[1]) {
            class = OrbitClass::CrossesZero;
            if record {
                rec.push_step(params, step, step.t1, opts.max_log_spacing);
            }
            if mode == Mode::Record || mode == Mode::Global {
                crossing = true;
                return Control::Continue;
            }
            return Control::Stop;
        }

        if y1s[2] >= s_max {
            let eta = step.locate(|y| y[2] - s_max, opts.event_tol);
            if record {
                rec.push_step(params, step, eta, opts.max_log_spacing);
            }
            return Control::Stop;
        }
        if record {
            rec.push_step(params, step, step.t1, opts.max_log_spacing);
        }
        Control::Continue
    };

    // Running out of steps leaves the class as it stands (Inconclusive
    // unless an event was already seen).
    ode::integrate(rhs, 0.0, y0, f64::INFINITY, &opts.tol, observer)?;

    let mut grid = ProfileGrid {
        points: rec.points,
        classification: class,
        xi0: None,
        crossing_flux: None,
        xi_min,
        k,
        params: *params,
        options: *opts,
        p1_distance: f64::INFINITY,
    };

    if record {
        grid.p1_distance = closest_p1(params, &rec.states).1;
    }

    match mode {
        Mode::Interface => {
            let (idx, dist) = closest_p1(params, &rec.states);
            if dist <= opts.interface_dist {
                grid.points.truncate(idx + 1);
                let last = *grid.last();
                grid.xi0 = Some(interface_from_point(params, &last));
                grid.classification = OrbitClass::Interface;
            }
        }
        Mode::Record | Mode::Global if class == OrbitClass::CrossesZero => {
            let last = *grid.last();
            // f^m is linear in ξ through a transversal zero.
            grid.xi0 = Some(last.xi + last.f.powf(params.m) / last.w.abs());
            grid.crossing_flux = Some(last.w);
        }
        _ => {}
    }
    Ok(grid)
}

/// Index and value of the smallest distance `hypot(X/β, Y/β + 1)` to P1.
fn closest_p1(params: &Params, states: &[[f64; 3]]) -> (usize, f64) {
    let beta = params.beta;
    states
        .iter()
        .enumerate()
        .map(|(i, y)| (i, (y[0].exp() / beta).hypot(y[1] / beta + 1.0)))
        .fold(
            (0, f64::INFINITY),
            |acc, cur| if cur.1 < acc.1 { cur } else { acc },
        )
}

/// Pointwise residual of a tabulated profile: for interior samples,
/// the mismatch between the three-point derivative of `f^m` and `w`, and
/// between the derivative of `w` and the equation, both relative to the
/// local size of the terms.
pub fn tabulated_residual(params: &Params, points: &[ProfilePoint]) -> Vec<(f64, f64, f64)> {
    let m = params.m;
    let mut out = Vec::new();
    for win in points.windows(3) {
        let (a, b, c) = (win[0], win[1], win[2]);
        if !(a.f > 0.0 && b.f > 0.0 && c.f > 0.0) {
            continue;
        }
        let (h1, h2) = (b.xi - a.xi, c.xi - b.xi);
        let d = |ya: f64, yb: f64, yc: f64| {
            (-h2 / (h1 * (h1 + h2))) * ya
                + ((h2 - h1) / (h1 * h2)) * yb
                + (h1 / (h2 * (h1 + h2))) * yc
        };
        let dfm = d(a.f.powf(m), b.f.powf(m), c.f.powf(m));
        let dw = d(a.w, b.w, c.w);
        let Ok((_, rhs_w)) = rhs_profile(&b, params) else {
            continue;
        };
        let n = params.dim();
        let scale_w = (n - 1.0) * (b.w / b.xi).abs()
            + params.alpha * b.f
            + params.beta * b.xi * b.slope(m).abs()
            + b.xi.powf(params.sigma) * b.f.powf(params.p);
        let r1 = (dfm - b.w).abs() / (b.w.abs() + b.f.powf(m) / b.xi);
        let r2 = (dw - rhs_w).abs() / scale_w;
        out.push((b.xi, r1, r2));
    }
    out
}
