//! Autonomous phase-plane form of the profile equation.
//!
//! With `X = m ξ^{-2} f^{m-1}`, `Y = w/(ξ f)` and `dη = ξ dξ / (m f^{m-1})`:
//!
//! ```text
//! X' = X[(m-1)Y - 2X]
//! Y' = -Y² - βY + αX - NXY - m^{(1-p)/(m-1)} X^{(m+p-2)/(m-1)}
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, Control, Tolerances};
use crate::params::Params;
use crate::profile::ProfilePoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    #[serde(rename = "X")]
    pub x: f64,
    #[serde(rename = "Y")]
    pub y: f64,
    pub eta: f64,
}

impl PhaseState {
    pub fn new(x: f64, y: f64) -> Self {
        PhaseState { x, y, eta: 0.0 }
    }
}

/// Profile sample to phase variables; η is left at zero.
pub fn to_phase(pt: &ProfilePoint, params: &Params) -> Result<PhaseState> {
    if !(pt.xi > 0.0) || !(pt.f > 0.0) {
        return Err(Error::DegenerateState { xi: pt.xi, f: pt.f });
    }
    let m = params.m;
    Ok(PhaseState::new(
        m * pt.f.powf(m - 1.0) / (pt.xi * pt.xi),
        pt.w / (pt.xi * pt.f),
    ))
}

/// Vector field of the finite chart.
pub fn rhs_phase(st: &PhaseState, params: &Params) -> (f64, f64) {
    let (x, y) = (st.x, st.y);
    let dx = x * ((params.m - 1.0) * y - 2.0 * x);
    let dy = -y * y - params.beta * y + params.alpha * x
        - params.dim() * x * y
        - params.reaction_coefficient() * x.max(0.0).powf(params.reaction_exponent());
    (dx, dy)
}

/// Field on `(ln X, Y, ln ξ)`; the third component is `dξ/ξ = X dη`.
pub fn rhs_phase_log(params: &Params, s: &[f64; 3]) -> [f64; 3] {
    let x = s[0].exp();
    let y = s[1];
    let dy = -y * y - params.beta * y + params.alpha * x
        - params.dim() * x * y
        - params.reaction_coefficient() * (params.reaction_exponent() * s[0]).exp();
    [(params.m - 1.0) * y - 2.0 * x, dy, x]
}

/// Field in `(X/β, Y/β)` with clock `β η`.
pub fn rhs_phase_scaled(st: &PhaseState, params: &Params) -> (f64, f64) {
    let (x, y) = (st.x, st.y);
    let m = params.m;
    let dx = x * ((m - 1.0) * y - 2.0 * x);
    let c = params.reaction_coefficient() / params.beta.powf((m - params.p) / (m - 1.0));
    let dy = -y * y - y + params.alpha / params.beta * x
        - params.dim() * x * y
        - c * x.max(0.0).powf(params.reaction_exponent());
    (dx, dy)
}

/// Chart at infinity dominated by X: `y = Y/X`, `w = X^{-(m-p)/(m-1)}`.
pub fn rhs_infinity_chart(y: f64, w: f64, params: &Params) -> (f64, f64) {
    let (m, p) = (params.m, params.p);
    let n = params.dim();
    let wq = w.max(0.0).powf((m - 1.0) / (m - p));
    let dy = -(n - 2.0) * y - m * y * y - params.beta * y * wq + params.alpha * wq
        - params.reaction_coefficient() * w;
    let dw = (m - p) / (m - 1.0) * (2.0 * w - (m - 1.0) * y * w);
    (dy, dw)
}

/// Flow of the scaled system across the isocline `(m-1)𝒴 = 2𝒳`:
/// `H = -(m-1)𝒴² - N(m-1)𝒳𝒴 - (m-1) c 𝒳^{(m+p-2)/(m-1)}`.
pub fn isocline_flow(x: f64, y: f64, params: &Params) -> f64 {
    let m = params.m;
    let c = params.reaction_coefficient() / params.beta.powf((m - params.p) / (m - 1.0));
    -(m - 1.0) * y * y
        - params.dim() * (m - 1.0) * x * y
        - (m - 1.0) * c * x.powf(params.reaction_exponent())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    #[serde(rename = "saddle")]
    Saddle,
    #[serde(rename = "stable node")]
    StableNode,
    #[serde(rename = "unstable node")]
    UnstableNode,
    #[serde(rename = "saddle-node")]
    SaddleNode,
    #[serde(rename = "non-hyperbolic-center-direction")]
    CenterDirection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chart {
    /// `(X, Y)`.
    Finite,
    /// `(y, w) = (Y/X, X^{-(m-p)/(m-1)})`.
    InfinityX,
    /// `(x, z) = (X/Y, 1/Y)`.
    InfinityY,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointReport {
    pub name: String,
    pub chart: Chart,
    pub location: [f64; 2],
    pub jacobian: [[f64; 2]; 2],
    pub eigenvalues: [f64; 2],
    pub eigenvectors: [[f64; 2]; 2],
    pub stability: Stability,
}

impl CriticalPointReport {
    /// Largest `‖J v - λ v‖ / ‖J‖` over both eigenpairs.
    pub fn eigen_defect(&self) -> f64 {
        let j = &self.jacobian;
        let norm = j
            .iter()
            .flatten()
            .map(|a| a * a)
            .sum::<f64>()
            .sqrt()
            .max(f64::MIN_POSITIVE);
        (0..2)
            .map(|k| {
                let (v, l) = (self.eigenvectors[k], self.eigenvalues[k]);
                let r0 = j[0][0] * v[0] + j[0][1] * v[1] - l * v[0];
                let r1 = j[1][0] * v[0] + j[1][1] * v[1] - l * v[1];
                r0.hypot(r1) / norm
            })
            .fold(0.0, f64::max)
    }
}

fn unit(v: [f64; 2]) -> [f64; 2] {
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

/// Eigenpairs of `[[a, b], [0, d]]`.
fn upper_triangular(a: f64, b: f64, d: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    let e2 = if b == 0.0 && a == d {
        [0.0, 1.0]
    } else {
        unit([b, d - a])
    };
    ([a, d], [[1.0, 0.0], e2])
}

/// Eigenpairs of `[[a, 0], [c, d]]`.
fn lower_triangular(a: f64, c: f64, d: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    let e1 = if c == 0.0 && a == d {
        [1.0, 0.0]
    } else {
        unit([a - d, c])
    };
    ([a, d], [e1, [0.0, 1.0]])
}

fn report(
    name: &str,
    chart: Chart,
    location: [f64; 2],
    jacobian: [[f64; 2]; 2],
    pairs: ([f64; 2], [[f64; 2]; 2]),
    stability: Stability,
) -> CriticalPointReport {
    CriticalPointReport {
        name: name.to_string(),
        chart,
        location,
        jacobian,
        eigenvalues: pairs.0,
        eigenvectors: pairs.1,
        stability,
    }
}

/// All critical points of the compactified phase plane with their linearizations.
///
/// Labels of the non-hyperbolic points are fixed by the local analysis,
/// not read off the eigenvalues: P0 has a centre direction along which
/// orbits with `X > 0` enter it, and for `N = 2` the points Q1 and Q4
/// merge into a single saddle-node.
pub fn critical_points(params: &Params) -> Vec<CriticalPointReport> {
    let (m, p, beta, alpha) = (params.m, params.p, params.beta, params.alpha);
    let n = params.dim();
    let c = params.reaction_coefficient();
    let mut out = Vec::with_capacity(6);

    let j = [[0.0, 0.0], [alpha, -beta]];
    out.push(report(
        "P0",
        Chart::Finite,
        [0.0, 0.0],
        j,
        lower_triangular(0.0, alpha, -beta),
        Stability::CenterDirection,
    ));
    let (a, cc, d) = (-(m - 1.0) * beta, alpha + n * beta, beta);
    out.push(report(
        "P1",
        Chart::Finite,
        [0.0, -beta],
        [[a, 0.0], [cc, d]],
        lower_triangular(a, cc, d),
        Stability::Saddle,
    ));

    let q1_d = 2.0 * (m - p) / (m - 1.0);
    let q4_d = (m - p) * (m * n - n + 2.0) / (m * (m - 1.0));
    let q1 = |stab| {
        report(
            "Q1",
            Chart::InfinityX,
            [0.0, 0.0],
            [[-(n - 2.0), -c], [0.0, q1_d]],
            upper_triangular(-(n - 2.0), -c, q1_d),
            stab,
        )
    };
    let q4 = |stab| {
        report(
            "Q4",
            Chart::InfinityX,
            [-(n - 2.0) / m, 0.0],
            [[n - 2.0, -c], [0.0, q4_d]],
            upper_triangular(n - 2.0, -c, q4_d),
            stab,
        )
    };
    match params.n {
        1 => {
            out.push(q1(Stability::UnstableNode));
            out.push(q4(Stability::Saddle));
        }
        2 => {
            let mut merged = q1(Stability::SaddleNode);
            merged.name = "Q1=Q4".to_string();
            out.push(merged);
        }
        _ => {
            out.push(q1(Stability::Saddle));
            out.push(q4(Stability::UnstableNode));
        }
    }

    out.push(report(
        "Q2",
        Chart::InfinityY,
        [0.0, 0.0],
        [[m, 0.0], [0.0, 1.0]],
        ([m, 1.0], [[1.0, 0.0], [0.0, 1.0]]),
        Stability::UnstableNode,
    ));
    out.push(report(
        "Q3",
        Chart::InfinityY,
        [0.0, 0.0],
        [[-m, 0.0], [0.0, -1.0]],
        ([-m, -1.0], [[1.0, 0.0], [0.0, 1.0]]),
        Stability::StableNode,
    ));
    out
}

/// Least-squares fit of `V = βY - αX ≈ a X^{(m+p-2)/(m-1)}` on an orbit tail entering P0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterManifoldFit {
    pub coefficient: f64,
    pub samples: usize,
    pub x_threshold: f64,
    /// `-m^{(1-p)/(m-1)}`, the value the linearization along the centre direction gives.
    pub leading_balance: f64,
    /// Leading coefficient of the two-term fit `a X^r + b X²`, which absorbs
    /// the first correction to the centre manifold.
    pub coefficient_two_term: f64,
}

pub const MIN_TAIL_SAMPLES: usize = 20;

/// Fits the centre-manifold coefficient on the samples with `0 < X < x_threshold`.
pub fn center_manifold_check(
    trajectory: &[PhaseState],
    params: &Params,
    x_threshold: f64,
) -> Result<CenterManifoldFit> {
    let r = params.reaction_exponent();
    let tail: Vec<(f64, f64)> = trajectory
        .iter()
        .filter(|s| s.x > 0.0 && s.x < x_threshold)
        .map(|s| (s.x, params.beta * s.y - params.alpha * s.x))
        .collect();
    let n = tail.len();
    if n < MIN_TAIL_SAMPLES {
        return Err(Error::InsufficientTail {
            found: n,
            needed: MIN_TAIL_SAMPLES,
        });
    }
    // Normal equations; columns scaled by the threshold for conditioning.
    let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, v) in &tail {
        let (u1, u2) = ((x / x_threshold).powf(r), (x / x_threshold).powi(2));
        s11 += u1 * u1;
        s12 += u1 * u2;
        s22 += u2 * u2;
        b1 += u1 * v;
        b2 += u2 * v;
    }
    let scale = x_threshold.powf(r);
    let one_term = b1 / s11 / scale;
    let det = s11 * s22 - s12 * s12;
    let two_term = (b1 * s22 - b2 * s12) / det / scale;
    Ok(CenterManifoldFit {
        coefficient: one_term,
        samples: n,
        x_threshold,
        leading_balance: -params.reaction_coefficient(),
        coefficient_two_term: two_term,
    })
}

/// Phase states along a tabulated profile, with η from trapezoidal
/// quadrature of `ξ / (m f^{m-1})` starting at `η(0) = 0`.
pub fn profile_to_phase(points: &[ProfilePoint], params: &Params) -> Result<Vec<PhaseState>> {
    let m = params.m;
    let g = |pt: &ProfilePoint| pt.xi / (m * pt.f.powf(m - 1.0));
    let mut out = Vec::with_capacity(points.len());
    let mut eta = match points.first() {
        // Near the origin f is flat, so ∫_0^ξ ζ/(m f^{m-1}) ≈ ξ g(ξ)/2.
        Some(first) => 0.5 * first.xi * g(first),
        None => return Ok(out),
    };
    for (i, pt) in points.iter().enumerate() {
        if i > 0 {
            let prev = &points[i - 1];
            eta += 0.5 * (pt.xi - prev.xi) * (g(prev) + g(pt));
        }
        let mut st = to_phase(pt, params)?;
        st.eta = eta;
        out.push(st);
    }
    Ok(out)
}

/// A trajectory of the finite chart started from an arbitrary seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: usize,
    pub states: Vec<PhaseState>,
}

/// Integrates the finite chart forward from `seed` for `eta_max`, stopping
/// early once `|X|` or `|Y|` exceeds `bound`. X is integrated in logs so the
/// invariant line `X = 0` is never crossed.
pub fn trajectory(
    params: &Params,
    seed: PhaseState,
    eta_max: f64,
    bound: f64,
    tol: &Tolerances,
) -> Result<Vec<PhaseState>> {
    if !(seed.x > 0.0) {
        // The line X = 0 is invariant: Y' = -Y(Y + β) in closed form.
        return Ok(vec![seed]);
    }
    let p = *params;
    let rhs = move |_t: f64, s: &[f64; 2]| {
        let x = s[0].exp();
        let (dx, dy) = rhs_phase(&PhaseState::new(x, s[1]), &p);
        [dx / x, dy]
    };
    let mut states = vec![seed];
    let t0 = seed.eta;
    ode::integrate(rhs, t0, [seed.x.ln(), seed.y], t0 + eta_max, tol, |step| {
        let st = PhaseState {
            x: step.y1[0].exp(),
            y: step.y1[1],
            eta: step.t1,
        };
        states.push(st);
        if st.x > bound || st.y.abs() > bound {
            Control::Stop
        } else {
            Control::Continue
        }
    })?;
    Ok(states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pm(m: f64, p: f64, n: i64, alpha: f64) -> Params {
        Params::new(m, p, n, alpha).unwrap()
    }

    #[test]
    fn to_phase_examples() {
        let q = pm(2.0, 1.5, 3, 1.0);
        let s = to_phase(&ProfilePoint::new(1.0, 1.0, 0.0), &q).unwrap();
        assert_eq!((s.x, s.y), (2.0, 0.0));
        let s = to_phase(&ProfilePoint::new(2.0, 1.0, -2.0), &q).unwrap();
        assert_eq!((s.x, s.y), (0.5, -1.0));
        assert!(matches!(
            to_phase(&ProfilePoint::new(1.0, 0.0, 0.0), &q),
            Err(Error::DegenerateState { .. })
        ));
    }

    #[test]
    fn rhs_examples() {
        let q = pm(2.0, 1.5, 3, 1.0);
        assert_eq!(rhs_phase(&PhaseState::new(0.0, -q.beta), &q), (0.0, 0.0));
        assert_eq!(rhs_phase(&PhaseState::new(0.0, 1.0), &q), (0.0, -1.5));
        let (dx, dy) = rhs_phase(&PhaseState::new(1.0, 0.0), &q);
        assert_eq!(dx, -2.0);
        assert_relative_eq!(dy, 1.0 - 2f64.powf(-0.5), epsilon = 1e-15);
        assert_relative_eq!(dy, 0.29289321881345254, epsilon = 1e-15);
    }

    #[test]
    fn scaled_examples() {
        let q = pm(2.0, 1.5, 3, 1.0);
        assert_eq!(
            rhs_phase_scaled(&PhaseState::new(0.0, -1.0), &q),
            (0.0, 0.0)
        );
        let (dx, dy) = rhs_phase_scaled(&PhaseState::new(1.0, 1.0), &q);
        assert_eq!(dx, -1.0);
        assert_relative_eq!(dy, -4.0, epsilon = 1e-14);
    }

    #[test]
    fn infinity_examples() {
        let q = pm(2.0, 1.5, 3, 1.0);
        assert_eq!(rhs_infinity_chart(0.0, 0.0, &q), (0.0, 0.0));
        let (dy, dw) = rhs_infinity_chart(-0.5, 0.0, &q);
        assert_eq!((dy, dw), (0.0, 0.0));
        assert_eq!(rhs_infinity_chart(1.0, 0.0, &q), (-3.0, 0.0));
    }

    #[test]
    fn critical_point_examples() {
        let q = pm(2.0, 1.5, 3, 1.0);
        let pts = critical_points(&q);
        assert_eq!(pts.len(), 6);
        let get = |name: &str| pts.iter().find(|c| c.name == name).unwrap();
        assert_eq!(get("P1").eigenvalues, [-0.5, 0.5]);
        assert_eq!(get("Q1").eigenvalues, [-1.0, 1.0]);
        assert_eq!(get("Q4").eigenvalues, [1.0, 1.25]);
        assert_eq!(get("Q1").stability, Stability::Saddle);
        assert_eq!(get("Q4").stability, Stability::UnstableNode);
        assert_eq!(get("P0").stability, Stability::CenterDirection);
        assert_eq!(get("Q3").stability, Stability::StableNode);

        let pts = critical_points(&pm(2.0, 1.5, 2, 1.0));
        assert_eq!(pts.len(), 5);
        let merged = pts.iter().find(|c| c.name == "Q1=Q4").unwrap();
        assert_eq!(merged.stability, Stability::SaddleNode);
        assert_eq!(merged.eigenvalues[0], 0.0);

        let pts = critical_points(&pm(3.0, 1.5, 1, 1.0));
        let get = |name: &str| pts.iter().find(|c| c.name == name).unwrap();
        assert_eq!(get("Q1").stability, Stability::UnstableNode);
        assert_eq!(get("Q4").stability, Stability::Saddle);
        assert!(get("Q4").eigenvalues[0] < 0.0 && get("Q4").eigenvalues[1] > 0.0);
    }

    #[test]
    fn unstable_direction_of_q1_matches_closed_form() {
        let q = pm(2.5, 1.6, 3, 0.7);
        let q1 = critical_points(&q)
            .into_iter()
            .find(|c| c.name == "Q1")
            .unwrap();
        let (m, p, n) = (q.m, q.p, q.dim());
        let e = [
            (m - 1.0) * q.reaction_coefficient(),
            -(n * (m - 1.0) - 2.0 * (p - 1.0)),
        ];
        let v = q1.eigenvectors[1];
        assert_relative_eq!(v[0] * e[1] - v[1] * e[0], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn center_manifold_exact_data() {
        let q = pm(2.0, 1.5, 3, 1.0);
        let traj: Vec<_> = (1..=40)
            .map(|k| {
                let x = 1e-5 * k as f64;
                let v = -2.0 * x.powf(1.5);
                PhaseState::new(x, (v + q.alpha * x) / q.beta)
            })
            .collect();
        let fit = center_manifold_check(&traj, &q, 1e-3).unwrap();
        assert_relative_eq!(fit.coefficient, -2.0, max_relative = 1e-12);
        assert_relative_eq!(fit.coefficient_two_term, -2.0, max_relative = 1e-9);
        assert_eq!(fit.samples, 40);
        assert!(matches!(
            center_manifold_check(&traj[..5], &q, 1e-3),
            Err(Error::InsufficientTail {
                found: 5,
                needed: 20
            })
        ));
    }

    #[test]
    fn trajectory_on_axis_stays_there() {
        let q = pm(2.0, 1.5, 3, 1.0);
        let t = trajectory(
            &q,
            PhaseState::new(0.0, 0.3),
            5.0,
            1e6,
            &Tolerances::default(),
        )
        .unwrap();
        assert_eq!(t.len(), 1);
        let t = trajectory(
            &q,
            PhaseState::new(0.1, -0.3),
            20.0,
            1e6,
            &Tolerances::default(),
        )
        .unwrap();
        assert!(t.iter().all(|s| s.x > 0.0));
    }

    #[test]
    fn trajectories_stay_below_isocline() {
        let q = pm(2.0, 1.5, 3, 1.0);
        for &(x, y) in &[(0.5, -0.2), (2.0, 0.5), (0.01, -0.6)] {
            let seed = PhaseState::new(x, y);
            assert!((q.m - 1.0) * y - 2.0 * x < 0.0);
            let t = trajectory(&q, seed, 50.0, 1e6, &Tolerances::default()).unwrap();
            for s in &t {
                assert!((q.m - 1.0) * s.y - 2.0 * s.x < 1e-12, "{s:?}");
            }
        }
    }

    proptest! {
        #[test]
        fn axis_is_invariant(y in -50.0f64..50.0, alpha in 0.01f64..10.0) {
            let q = pm(2.0, 1.5, 3, alpha);
            prop_assert_eq!(rhs_phase(&PhaseState::new(0.0, y), &q).0, 0.0);
        }

        #[test]
        fn scaled_is_rescaled_finite(
            x in 0.0f64..5.0, y in -5.0f64..5.0, alpha in 0.05f64..5.0,
            m in 1.2f64..4.0, frac in 0.05f64..0.95, n in 2i64..6,
        ) {
            let q = pm(m, 1.0 + frac * (m - 1.0), n, alpha);
            let b = q.beta;
            let (dx, dy) = rhs_phase(&PhaseState::new(x, y), &q);
            let (sx, sy) = rhs_phase_scaled(&PhaseState::new(x / b, y / b), &q);
            let scale = 1.0 + dx.abs() + dy.abs();
            prop_assert!((b * b * sx - dx).abs() <= 1e-12 * scale);
            prop_assert!((b * b * sy - dy).abs() <= 1e-12 * scale);
        }

        #[test]
        fn eigenpairs_reproduce_jacobians(
            m in 1.2f64..5.0, frac in 0.05f64..0.95, n in 1i64..7, alpha in 0.01f64..50.0,
        ) {
            let p = 1.0 + frac * (m - 1.0);
            prop_assume!(n > 1 || p < (m + 1.0) / 2.0);
            let q = pm(m, p, n, alpha);
            let pts = critical_points(&q);
            prop_assert_eq!(pts.len(), if n == 2 { 5 } else { 6 });
            for c in &pts {
                prop_assert!(c.eigen_defect() <= 1e-12, "{} {}", c.name, c.eigen_defect());
            }
        }

        #[test]
        fn isocline_flow_is_negative(
            x in 1e-6f64..1e3, m in 1.2f64..5.0, frac in 0.05f64..0.95, n in 2i64..7,
            alpha in 0.01f64..50.0,
        ) {
            let q = pm(m, 1.0 + frac * (m - 1.0), n, alpha);
            let y = 2.0 * x / (m - 1.0);
            let h = isocline_flow(x, y, &q);
            prop_assert!(h < 0.0);
            // H is the derivative of (m-1)𝒴 - 2𝒳 along the scaled flow on the isocline.
            let (dx, dy) = rhs_phase_scaled(&PhaseState::new(x, y), &q);
            let direct = (m - 1.0) * dy - 2.0 * dx;
            prop_assert!((direct - h).abs() <= 1e-9 * (1.0 + h.abs()));
        }
    }
}
