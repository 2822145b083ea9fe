//! Browser bindings. Every export takes plain numbers and returns a JSON
//! string; errors become JS exceptions carrying the core error message.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use eternal::pde::{self, InitialData, OuterBoundary, RunSpec};
use eternal::phase::{self, PhaseState};
use eternal::profile::{self, Mode, ProfileOptions};
use eternal::selfsim::SelfSimilarSolution;
use eternal::shooter::{self, ShooterOptions};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Plotted curves are thinned to about this many points.
const PLOT_POINTS: usize = 400;

fn thin<T: Copy>(xs: &[T]) -> Vec<T> {
    let stride = xs.len().div_ceil(PLOT_POINTS).max(1);
    let mut out: Vec<T> = xs.iter().step_by(stride).copied().collect();
    if let Some(&last) = xs.last() {
        if !(xs.len() - 1).is_multiple_of(stride) {
            out.push(last);
        }
    }
    out
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

fn exponents(n: i64) -> Result<i64, String> {
    if (1..=10).contains(&n) {
        Ok(n)
    } else {
        Err(format!("dimension {n} outside 1..=10"))
    }
}

#[derive(Serialize)]
struct AlphaStarView {
    alpha_star: f64,
    beta_star: f64,
    sigma: f64,
    xi0: f64,
    evaluations: usize,
    /// (ξ, f) pairs of the interface profile.
    profile: Vec<[f64; 2]>,
}

pub fn alpha_star(m: f64, p: f64, n: i64) -> Result<String, String> {
    let res = shooter::find_alpha_star(m, p, exponents(n)?, &ShooterOptions::default())
        .map_err(|e| e.to_string())?;
    let pts: Vec<[f64; 2]> = res.profile.points.iter().map(|q| [q.xi, q.f]).collect();
    to_json(&AlphaStarView {
        alpha_star: res.alpha_star,
        beta_star: res.beta_star,
        sigma: res.params.sigma,
        xi0: res.xi0,
        evaluations: res.log.len(),
        profile: thin(&pts),
    })
}

#[derive(Serialize)]
struct PointView {
    name: String,
    x: f64,
    y: f64,
    stability: String,
}

#[derive(Serialize)]
struct PortraitView {
    alpha: f64,
    beta: f64,
    points: Vec<PointView>,
    /// Trajectory 0 is the profile orbit; the rest start from a seed fan.
    trajectories: Vec<Vec<[f64; 2]>>,
}

/// Phase portrait at `alpha = alpha_factor * α*`.
pub fn phase_portrait(m: f64, p: f64, n: i64, alpha_factor: f64) -> Result<String, String> {
    if !(alpha_factor > 0.0) {
        return Err("alpha factor must be positive".into());
    }
    let star = shooter::find_alpha_star(m, p, exponents(n)?, &ShooterOptions::default())
        .map_err(|e| e.to_string())?;
    let q = star
        .params
        .with_alpha(alpha_factor * star.alpha_star)
        .map_err(|e| e.to_string())?;
    let opts = ProfileOptions::default();
    let mode = if alpha_factor == 1.0 {
        Mode::Interface
    } else {
        Mode::Record
    };
    let xi_max = profile::default_xi_max(&q, 1.0);
    let grid =
        profile::integrate_profile(&q, 1.0, xi_max, mode, &opts).map_err(|e| e.to_string())?;
    let b = q.beta;
    let mut trajectories =
        vec![phase::profile_to_phase(&grid.points, &q).map_err(|e| e.to_string())?];
    for k in 1..=6 {
        let x = 0.3 * b * k as f64;
        for y in [-1.5 * b, 0.5 * b] {
            let t = phase::trajectory(&q, PhaseState::new(x, y), 60.0, 50.0, &opts.tol)
                .map_err(|e| e.to_string())?;
            trajectories.push(t);
        }
    }
    let trajectories = trajectories
        .iter()
        .map(|t| thin(&t.iter().map(|s| [s.x, s.y]).collect::<Vec<_>>()))
        .collect();
    let points = phase::critical_points(&q)
        .into_iter()
        .filter(|c| matches!(c.chart, phase::Chart::Finite))
        .map(|c| PointView {
            name: c.name,
            x: c.location[0],
            y: c.location[1],
            stability: format!("{:?}", c.stability),
        })
        .collect();
    to_json(&PortraitView {
        alpha: q.alpha,
        beta: b,
        points,
        trajectories,
    })
}

#[derive(Serialize)]
struct FrameView {
    t: f64,
    u: Vec<f64>,
    barrier: Vec<f64>,
}

#[derive(Serialize)]
struct SimulationView {
    tau0: f64,
    r: Vec<f64>,
    frames: Vec<FrameView>,
    max_violation: f64,
}

/// Regularized run from a unit bump of radius 1, compared against the
/// interface solution shifted by τ0.
pub fn simulate(
    m: f64,
    p: f64,
    n: i64,
    eps: f64,
    cells: usize,
    t_end: f64,
) -> Result<String, String> {
    if !(16..=2048).contains(&cells) {
        return Err(format!("cells {cells} outside 16..=2048"));
    }
    let star = shooter::find_alpha_star(m, p, exponents(n)?, &ShooterOptions::default())
        .map_err(|e| e.to_string())?;
    let u = SelfSimilarSolution::new(star.profile.clone()).map_err(|e| e.to_string())?;
    let u0 = InitialData::Bump {
        height: 1.0,
        radius: 1.0,
    };
    let tau0 = pde::tau0_for(&u0, &u, 1.0).map_err(|e| e.to_string())?;
    let r_max = 1.5 * star.xi0 * (star.beta_star * (t_end + tau0)).exp();
    let mut spec = RunSpec::new(cells, r_max, t_end);
    spec.boundary = OuterBoundary::ZeroFlux;
    let run = pde::run(&star.params, &u0, eps, &spec, Some(&u)).map_err(|e| e.to_string())?;
    let report = pde::compare_barrier(&run, &u, tau0).map_err(|e| e.to_string())?;
    let stride = cells.div_ceil(PLOT_POINTS).max(1);
    let r: Vec<f64> = run.centers.iter().step_by(stride).copied().collect();
    let frames = run
        .snapshots
        .iter()
        .map(|s| {
            let barrier = r
                .iter()
                .map(|&ri| u.eval(ri, s.t + tau0))
                .collect::<eternal::Result<Vec<_>>>()?;
            Ok(FrameView {
                t: s.t,
                u: s.u.iter().step_by(stride).copied().collect(),
                barrier,
            })
        })
        .collect::<eternal::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    to_json(&SimulationView {
        tau0,
        r,
        frames,
        max_violation: report.max_violation,
    })
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = alphaStar)]
pub fn alpha_star_js(m: f64, p: f64, n: i32) -> Result<String, JsError> {
    js(alpha_star(m, p, n as i64))
}

#[wasm_bindgen(js_name = phasePortrait)]
pub fn phase_portrait_js(m: f64, p: f64, n: i32, alpha_factor: f64) -> Result<String, JsError> {
    js(phase_portrait(m, p, n as i64, alpha_factor))
}

#[wasm_bindgen(js_name = simulate)]
pub fn simulate_js(
    m: f64,
    p: f64,
    n: i32,
    eps: f64,
    cells: u32,
    t_end: f64,
) -> Result<String, JsError> {
    js(simulate(m, p, n as i64, eps, cells as usize, t_end))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(s: Result<String, String>) -> Value {
        serde_json::from_str(&s.unwrap()).unwrap()
    }

    #[test]
    fn thinning_keeps_ends() {
        let xs: Vec<usize> = (0..1001).collect();
        let t = thin(&xs);
        assert!(t.len() <= PLOT_POINTS + 1);
        assert_eq!(t[0], 0);
        assert_eq!(*t.last().unwrap(), 1000);
        assert_eq!(thin(&[1, 2, 3]), vec![1, 2, 3]);
    }

    #[test]
    fn alpha_star_view() {
        let v = parse(alpha_star(2.0, 1.5, 3));
        assert!((v["alpha_star"].as_f64().unwrap() - 0.108072878606).abs() < 1e-9);
        assert!(v["profile"].as_array().unwrap().len() <= PLOT_POINTS + 1);
        assert!(alpha_star(2.0, 1.8, 1).unwrap_err().contains("p < (m+1)/2"));
        assert!(alpha_star(2.0, 1.5, 0).is_err());
    }

    #[test]
    fn portrait_view() {
        let v = parse(phase_portrait(2.0, 1.5, 3, 1.0));
        assert_eq!(v["trajectories"].as_array().unwrap().len(), 13);
        assert!(!v["points"].as_array().unwrap().is_empty());
        assert!(phase_portrait(2.0, 1.5, 3, 0.0).is_err());
    }

    #[test]
    fn simulation_stays_below_barrier() {
        let v = parse(simulate(2.0, 1.5, 3, 0.5, 128, 0.3));
        assert!(v["max_violation"].as_f64().unwrap() <= 0.0);
        let frames = v["frames"].as_array().unwrap();
        let r = v["r"].as_array().unwrap().len();
        assert!(frames.iter().all(|f| f["u"].as_array().unwrap().len() == r));
        assert!(simulate(2.0, 1.5, 3, 0.5, 4, 0.3).is_err());
    }
}
