//! Radial explicit finite-volume solver for the regularized problem
//!
//! ```text
//! u_t = Δ u^m + (|x| + ε)^σ u^p,   x ∈ R^N, ε ∈ (0, 1]
//! ```
//!
//! and the barrier, ε-ordering and scaling checks built on it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Params;
use crate::selfsim::{Kind, SelfSimilarSolution};

/// Cells with `u > SUPPORT_THRESHOLD · max u` count as support. The
/// explicit scheme leaves a super-exponentially small precursor ahead of
/// the front which would otherwise reach the boundary.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

/// Floor of `u` in the degenerate diffusion CFL bound.
pub const CFL_FLOOR: f64 = 1e-12;

/// Bound on `Δt (r+ε)^σ u^{p-1}` per step.
pub const REACTION_BOUND: f64 = 0.1;

/// Radial initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum InitialData {
    Zero,
    Constant {
        value: f64,
    },
    /// `height · min(1, 2 - |4r/radius - 2|)₊`: a trapezoid on `[0, radius]`
    /// with plateau on `[radius/4, 3 radius/4]`.
    Bump {
        height: f64,
        radius: f64,
    },
    Gaussian {
        height: f64,
        width: f64,
    },
    /// Piecewise linear through `(r, u)`, zero beyond the last node.
    Tabulated {
        r: Vec<f64>,
        u: Vec<f64>,
    },
}

/// What is known about the data for barrier purposes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BoundKind {
    Bounded { sup: f64 },
    CompactSupport { sup: f64, radius: f64 },
}

impl InitialData {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        match self {
            InitialData::Zero => Ok(()),
            InitialData::Constant { value } if !(*value >= 0.0 && value.is_finite()) => {
                bad(format!("constant data must be nonnegative, got {value}"))
            }
            InitialData::Bump { height, radius }
            | InitialData::Gaussian {
                height,
                width: radius,
            } if !(*height >= 0.0 && height.is_finite() && *radius > 0.0 && radius.is_finite()) => {
                bad(format!(
                    "need height >= 0 and a positive length, got {height}, {radius}"
                ))
            }
            InitialData::Tabulated { r, u } => {
                if r.len() != u.len() || r.is_empty() {
                    return bad("tabulated data needs equally many r and u values".into());
                }
                if r.windows(2).any(|w| !(w[1] > w[0])) || r[0] < 0.0 {
                    return bad("tabulated r must start at r >= 0 and increase".into());
                }
                if u.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return bad("tabulated u must be finite and nonnegative".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        match self {
            InitialData::Zero => 0.0,
            InitialData::Constant { value } => *value,
            InitialData::Bump { height, radius } => {
                height * (2.0 - (4.0 * r / radius - 2.0).abs()).clamp(0.0, 1.0)
            }
            InitialData::Gaussian { height, width } => height * (-(r / width).powi(2)).exp(),
            InitialData::Tabulated { r: rs, u } => {
                if r <= rs[0] {
                    return u[0];
                }
                let j = rs.partition_point(|&x| x < r);
                if j >= rs.len() {
                    return 0.0;
                }
                let s = (r - rs[j - 1]) / (rs[j] - rs[j - 1]);
                u[j - 1] + s * (u[j] - u[j - 1])
            }
        }
    }

    pub fn bound(&self) -> BoundKind {
        match self {
            InitialData::Zero => BoundKind::CompactSupport {
                sup: 0.0,
                radius: 0.0,
            },
            InitialData::Constant { value } => BoundKind::Bounded { sup: *value },
            InitialData::Bump { height, radius } => BoundKind::CompactSupport {
                sup: *height,
                radius: *radius,
            },
            InitialData::Gaussian { height, .. } => BoundKind::Bounded { sup: *height },
            InitialData::Tabulated { r, u } => {
                let sup = u.iter().copied().fold(0.0, f64::max);
                let last = u
                    .iter()
                    .rposition(|&v| v > 0.0)
                    .map_or(0.0, |j| r[(j + 1).min(r.len() - 1)]);
                BoundKind::CompactSupport { sup, radius: last }
            }
        }
    }

    /// Data of the ε = 1 problem equivalent to this data at ε:
    /// `ũ0(y) = ε^{-2/(m-1)} u0(ε y)`.
    pub fn rescaled(&self, eps: f64, m: f64) -> InitialData {
        let a = eps.powf(-2.0 / (m - 1.0));
        match self {
            InitialData::Zero => InitialData::Zero,
            InitialData::Constant { value } => InitialData::Constant { value: a * value },
            InitialData::Bump { height, radius } => InitialData::Bump {
                height: a * height,
                radius: radius / eps,
            },
            InitialData::Gaussian { height, width } => InitialData::Gaussian {
                height: a * height,
                width: width / eps,
            },
            InitialData::Tabulated { r, u } => InitialData::Tabulated {
                r: r.iter().map(|x| x / eps).collect(),
                u: u.iter().map(|v| a * v).collect(),
            },
        }
    }
}

/// `max{(1/α) ln(‖u0‖/f_min), 0}`.
pub fn tau0_bounded(sup: f64, f_min: f64, alpha: f64) -> f64 {
    if sup <= 0.0 {
        return 0.0;
    }
    ((sup / f_min).ln() / alpha).max(0.0)
}

/// `max{(1/α) ln(‖u0‖/Q), (1/β) ln(2R/ξ0), 0}` with `Q = inf f` on `(0, ξ0/2)`.
pub fn tau0_compact(sup: f64, q: f64, alpha: f64, radius: f64, xi0: f64, beta: f64) -> f64 {
    if sup <= 0.0 {
        return 0.0;
    }
    let a = (sup / q).ln() / alpha;
    let b = if radius > 0.0 {
        (2.0 * radius / xi0).ln() / beta
    } else {
        0.0
    };
    a.max(b).max(0.0)
}

/// Time shift τ0 with `u0 ≤ U(·, τ0)`, certified on a grid of 4096 radii.
///
/// Compactly supported data may use the compact barrier; bounded data needs
/// a global one. A failed certification doubles τ0 at most twice.
pub fn tau0_for(u0: &InitialData, barrier: &SelfSimilarSolution, check_radius: f64) -> Result<f64> {
    let (alpha, beta) = (barrier.alpha(), barrier.beta());
    let (mut tau, radius) = match (u0.bound(), barrier.kind) {
        (BoundKind::Bounded { sup }, Kind::Global) => {
            let (_, fmin) = barrier.minimum().expect("global barrier has a minimum");
            (tau0_bounded(sup, fmin, alpha), check_radius)
        }
        (BoundKind::CompactSupport { sup, radius }, Kind::CompactSupport) => {
            let xi0 = barrier.xi0().expect("compact barrier");
            let q = barrier.profile_value(0.5 * xi0)?;
            (tau0_compact(sup, q, alpha, radius, xi0, beta), radius)
        }
        (BoundKind::CompactSupport { sup, radius }, Kind::Global) => {
            let (_, fmin) = barrier.minimum().expect("global barrier has a minimum");
            (tau0_bounded(sup, fmin, alpha), radius)
        }
        (BoundKind::Bounded { .. }, Kind::CompactSupport) => {
            return Err(Error::InvalidInput(
                "bounded data without compact support needs a global barrier".into(),
            ))
        }
    };
    const CHECKS: usize = 4096;
    for attempt in 0..3 {
        let mut worst = None;
        for j in 0..=CHECKS {
            let r = radius * j as f64 / CHECKS as f64;
            let (v, b) = (u0.value(r), barrier.eval(r, tau)?);
            if v > b {
                worst = Some((r, v, b));
                break;
            }
        }
        match worst {
            None => return Ok(tau),
            Some((r, v, b)) if attempt == 2 => {
                return Err(Error::BarrierTooLow {
                    r,
                    u0: v,
                    barrier: b,
                    tau0: tau,
                })
            }
            Some(_) => tau = (2.0 * tau).max(std::f64::consts::LN_2 / alpha),
        }
    }
    unreachable!("loop returns on its last attempt")
}

/// Condition at the outer face `r = R_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OuterBoundary {
    ZeroFlux,
    /// Ghost value taken from the barrier `U(r, t + tau0)`.
    Barrier {
        tau0: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub cells: usize,
    pub r_max: f64,
    pub t_end: f64,
    pub cfl: f64,
    pub snapshots: Vec<f64>,
    pub dt_min: f64,
    pub boundary: OuterBoundary,
}

impl RunSpec {
    /// `cells` cells on `[0, r_max]` with eleven equispaced snapshots.
    pub fn new(cells: usize, r_max: f64, t_end: f64) -> Self {
        RunSpec {
            cells,
            r_max,
            t_end,
            cfl: 0.45,
            snapshots: (0..=10).map(|k| t_end * k as f64 / 10.0).collect(),
            dt_min: 1e-14,
            boundary: OuterBoundary::ZeroFlux,
        }
    }

    pub fn dr(&self) -> f64 {
        self.r_max / self.cells as f64
    }
}

/// Current solution on a uniform radial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeState {
    pub r_faces: Vec<f64>,
    pub u: Vec<f64>,
    pub t: f64,
    pub eps: f64,
    pub params: Params,
    volumes: Vec<f64>,
    areas: Vec<f64>,
    weights: Vec<f64>,
}

impl PdeState {
    /// Cell averages of `u0` (four-point Gauss rule per cell).
    pub fn new(
        params: &Params,
        u0: &InitialData,
        eps: f64,
        cells: usize,
        r_max: f64,
    ) -> Result<Self> {
        u0.validate()?;
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "eps must lie in (0, 1], got {eps}"
            )));
        }
        if cells < 2 || !(r_max > 0.0) {
            return Err(Error::InvalidInput(format!(
                "need at least two cells and r_max > 0 (cells = {cells}, r_max = {r_max})"
            )));
        }
        let n = params.dim();
        let dr = r_max / cells as f64;
        let r_faces: Vec<f64> = (0..=cells).map(|i| i as f64 * dr).collect();
        let centers: Vec<f64> = (0..cells).map(|i| (i as f64 + 0.5) * dr).collect();
        let volumes: Vec<f64> = r_faces
            .windows(2)
            .map(|w| (w[1].powf(n) - w[0].powf(n)) / n)
            .collect();
        let areas = r_faces.iter().map(|r| r.powf(n - 1.0)).collect();
        let weights = centers
            .iter()
            .map(|r| (r + eps).powf(params.sigma))
            .collect();
        let u = r_faces
            .windows(2)
            .zip(&volumes)
            .map(|(w, vol)| cell_average(u0, w[0], w[1], n) / vol)
            .collect();
        Ok(PdeState {
            r_faces,
            u,
            t: 0.0,
            eps,
            params: *params,
            volumes,
            areas,
            weights,
        })
    }

    pub fn dr(&self) -> f64 {
        self.r_faces[1]
    }

    pub fn centers(&self) -> Vec<f64> {
        self.r_faces
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect()
    }

    pub fn max_u(&self) -> f64 {
        self.u.iter().copied().fold(0.0, f64::max)
    }

    /// `Σ u_i |cell_i|` without the sphere constant.
    pub fn mass(&self) -> f64 {
        self.u.iter().zip(&self.volumes).map(|(u, v)| u * v).sum()
    }

    /// Outer face of the last cell above the support threshold.
    pub fn support_radius(&self) -> f64 {
        let cut = SUPPORT_THRESHOLD * self.max_u();
        self.u
            .iter()
            .rposition(|&v| v > cut && v > 0.0)
            .map_or(0.0, |i| self.r_faces[i + 1])
    }

    /// Largest stable step from the diffusion and reaction bounds.
    pub fn stable_dt(&self, cfl: f64) -> f64 {
        let Params { m, p, .. } = self.params;
        let umax = self.max_u().max(CFL_FLOOR);
        let dr = self.dr();
        let diffusion = cfl * dr * dr / (2.0 * self.params.dim() * m * umax.powf(m - 1.0));
        let rate = self
            .u
            .iter()
            .zip(&self.weights)
            .map(|(u, w)| w * u.powf(p - 1.0))
            .fold(0.0, f64::max);
        if rate > 0.0 {
            diffusion.min(REACTION_BOUND / rate)
        } else {
            diffusion
        }
    }

    /// One explicit step of length `dt`; `ghost` is the value outside the
    /// last cell for a Dirichlet-type outer face, `None` for zero flux.
    pub fn step(&mut self, dt: f64, ghost: Option<f64>) {
        let Params { m, p, .. } = self.params;
        let dr = self.dr();
        let cells = self.u.len();
        let g: Vec<f64> = self.u.iter().map(|u| u.powf(m)).collect();
        // Outward flux through each face, weighted by the face area.
        let mut flux = vec![0.0; cells + 1];
        for i in 1..cells {
            flux[i] = -self.areas[i] * (g[i] - g[i - 1]) / dr;
        }
        if let Some(b) = ghost {
            flux[cells] = -self.areas[cells] * (b.powf(m) - g[cells - 1]) / dr;
        }
        for i in 0..cells {
            let div = (flux[i] - flux[i + 1]) / self.volumes[i];
            let react = self.weights[i] * self.u[i].powf(p);
            self.u[i] = (self.u[i] + dt * (div + react)).max(0.0);
        }
        self.t += dt;
    }
}

/// `∫ u0 r^{N-1} dr` over `[a, b]`.
fn cell_average(u0: &InitialData, a: f64, b: f64, n: f64) -> f64 {
    const NODES: [(f64, f64); 4] = [
        (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
        (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
        (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
        (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    ];
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    NODES
        .iter()
        .map(|&(x, w)| {
            let r = mid + half * x;
            w * u0.value(r) * r.powf(n - 1.0)
        })
        .sum::<f64>()
        * half
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
    pub mass: f64,
    pub support: f64,
    pub max: f64,
}

/// A completed run: grid, ε and the requested snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeRun {
    pub params: Params,
    pub eps: f64,
    pub spec: RunSpec,
    pub centers: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub steps: usize,
    pub min_value: f64,
}

impl PdeRun {
    pub fn dr(&self) -> f64 {
        self.spec.dr()
    }
}

fn snapshot(state: &PdeState) -> Snapshot {
    Snapshot {
        t: state.t,
        u: state.u.clone(),
        mass: state.mass(),
        support: state.support_radius(),
        max: state.max_u(),
    }
}

/// Integrates to `spec.t_end`, landing exactly on each snapshot time.
///
/// A barrier outer boundary needs `barrier`. On zero-flux runs the support
/// must stay off the last cell, otherwise [`Error::DomainTooSmall`].
pub fn run(
    params: &Params,
    u0: &InitialData,
    eps: f64,
    spec: &RunSpec,
    barrier: Option<&SelfSimilarSolution>,
) -> Result<PdeRun> {
    if !(spec.t_end > 0.0) || !(spec.cfl > 0.0 && spec.cfl <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "need T > 0 and cfl in (0, 1] (T = {}, cfl = {})",
            spec.t_end, spec.cfl
        )));
    }
    let mut state = PdeState::new(params, u0, eps, spec.cells, spec.r_max)?;
    let ghost_r = spec.r_max + 0.5 * state.dr();
    let ghost = |t: f64| -> Result<Option<f64>> {
        match (spec.boundary, barrier) {
            (OuterBoundary::ZeroFlux, _) => Ok(None),
            (OuterBoundary::Barrier { tau0 }, Some(u)) => Ok(Some(u.eval(ghost_r, t + tau0)?)),
            (OuterBoundary::Barrier { .. }, None) => Err(Error::InvalidInput(
                "a barrier boundary needs a self-similar solution".into(),
            )),
        }
    };
    let mut times: Vec<f64> = spec
        .snapshots
        .iter()
        .copied()
        .filter(|t| (0.0..=spec.t_end).contains(t))
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();

    let mut snaps = Vec::with_capacity(times.len());
    let mut steps = 0usize;
    let mut min_value = state.u.iter().copied().fold(f64::INFINITY, f64::min);
    let last_cell = spec.cells - 1;
    for &target in &times {
        while state.t < target {
            let dt_stable = state.stable_dt(spec.cfl);
            if dt_stable < spec.dt_min {
                return Err(Error::CflFailure {
                    dt: dt_stable,
                    dt_min: spec.dt_min,
                    t: state.t,
                });
            }
            let remaining = target - state.t;
            // Stretch the step slightly rather than leave a sliver before the snapshot.
            let dt = if remaining <= dt_stable * (1.0 + 1e-9) {
                remaining
            } else {
                dt_stable
            };
            let g = ghost(state.t)?;
            state.step(dt, g);
            if dt == remaining {
                state.t = target;
            }
            steps += 1;
            min_value = state.u.iter().copied().fold(min_value, f64::min);
            if spec.boundary == OuterBoundary::ZeroFlux
                && state.u[last_cell] > SUPPORT_THRESHOLD * state.max_u()
                && state.u[last_cell] > 0.0
            {
                return Err(Error::DomainTooSmall {
                    r_max: spec.r_max,
                    t: state.t,
                });
            }
        }
        snaps.push(snapshot(&state));
    }
    Ok(PdeRun {
        params: *params,
        eps,
        centers: state.centers(),
        spec: spec.clone(),
        snapshots: snaps,
        steps,
        min_value,
    })
}

/// Runs the same data and grid for several ε, concurrently when enabled.
pub fn run_many(
    params: &Params,
    u0: &InitialData,
    eps_list: &[f64],
    spec: &RunSpec,
    barrier: Option<&SelfSimilarSolution>,
) -> Result<Vec<PdeRun>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        eps_list
            .par_iter()
            .map(|&e| run(params, u0, e, spec, barrier))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        eps_list
            .iter()
            .map(|&e| run(params, u0, e, spec, barrier))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierReport {
    pub eps: f64,
    pub tau0: f64,
    /// `max (u - U(r, t + τ0))` over snapshots and cells.
    pub max_violation: f64,
    pub at_t: f64,
    pub at_r: f64,
    /// `max (support(t) - ξ0 e^{β(t+τ0)})`; `None` for global barriers.
    pub support_excess: Option<f64>,
    pub max_u: f64,
    pub max_barrier: f64,
}

pub fn compare_barrier(
    run: &PdeRun,
    barrier: &SelfSimilarSolution,
    tau0: f64,
) -> Result<BarrierReport> {
    let mut rep = BarrierReport {
        eps: run.eps,
        tau0,
        max_violation: f64::NEG_INFINITY,
        at_t: 0.0,
        at_r: 0.0,
        support_excess: barrier.xi0().map(|_| f64::NEG_INFINITY),
        max_u: 0.0,
        max_barrier: 0.0,
    };
    for snap in &run.snapshots {
        for (&r, &u) in run.centers.iter().zip(&snap.u) {
            let b = barrier.eval(r, snap.t + tau0)?;
            if u - b > rep.max_violation {
                rep.max_violation = u - b;
                rep.at_t = snap.t;
                rep.at_r = r;
            }
            rep.max_barrier = rep.max_barrier.max(b);
        }
        rep.max_u = rep.max_u.max(snap.max);
        if let (Some(ex), Some(edge)) = (
            rep.support_excess.as_mut(),
            barrier.support_radius(snap.t + tau0),
        ) {
            *ex = ex.max(snap.support - edge);
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsPair {
    /// Larger ε of the pair.
    pub eps_hi: f64,
    pub eps_lo: f64,
    /// `min (u_{eps_lo} - u_{eps_hi})`; the ordering predicts ≥ 0.
    pub min_margin: f64,
    /// `max |u_{eps_lo} - u_{eps_hi}|`.
    pub cauchy_increment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsReport {
    pub eps: Vec<f64>,
    pub pairs: Vec<EpsPair>,
}

/// Pairwise ordering of runs listed by strictly decreasing ε on a common grid.
pub fn eps_monotonicity(runs: &[PdeRun]) -> Result<EpsReport> {
    if runs.windows(2).any(|w| !(w[1].eps < w[0].eps)) {
        return Err(Error::InvalidInput(
            "eps list must be strictly decreasing".into(),
        ));
    }
    if runs.windows(2).any(|w| w[0].spec != w[1].spec) {
        return Err(Error::InvalidInput(
            "runs must share grid and snapshots".into(),
        ));
    }
    let pairs = runs
        .windows(2)
        .map(|w| {
            let (hi, lo) = (&w[0], &w[1]);
            let (min_margin, inc) = hi
                .snapshots
                .iter()
                .zip(&lo.snapshots)
                .flat_map(|(a, b)| a.u.iter().zip(&b.u).map(|(x, y)| y - x))
                .fold((f64::INFINITY, 0.0f64), |(mn, mx), d| {
                    (mn.min(d), mx.max(d.abs()))
                });
            EpsPair {
                eps_hi: hi.eps,
                eps_lo: lo.eps,
                min_margin: if min_margin.is_finite() {
                    min_margin
                } else {
                    0.0
                },
                cauchy_increment: inc,
            }
        })
        .collect();
    Ok(EpsReport {
        eps: runs.iter().map(|r| r.eps).collect(),
        pairs,
    })
}

/// Max over common snapshots of `|fine - coarse|` after averaging pairs of
/// fine cells onto the coarse grid (volume-weighted).
pub fn refinement_difference(coarse: &PdeRun, fine: &PdeRun) -> Result<f64> {
    if fine.centers.len() != 2 * coarse.centers.len() || fine.spec.r_max != coarse.spec.r_max {
        return Err(Error::InvalidInput(
            "fine grid must split each coarse cell in two".into(),
        ));
    }
    let n = coarse.params.dim();
    let dr = fine.dr();
    let vol = |i: usize| (((i + 1) as f64 * dr).powf(n) - (i as f64 * dr).powf(n)) / n;
    let mut worst = 0.0f64;
    for (a, b) in coarse.snapshots.iter().zip(&fine.snapshots) {
        if (a.t - b.t).abs() > 1e-12 * (1.0 + a.t.abs()) {
            return Err(Error::InvalidInput("snapshot times differ".into()));
        }
        for (i, &uc) in a.u.iter().enumerate() {
            let (v0, v1) = (vol(2 * i), vol(2 * i + 1));
            let avg = (b.u[2 * i] * v0 + b.u[2 * i + 1] * v1) / (v0 + v1);
            worst = worst.max((avg - uc).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn q() -> Params {
        Params::new(2.0, 1.5, 3, 1.0).unwrap()
    }

    #[test]
    fn tau0_formula_examples() {
        assert_relative_eq!(
            tau0_compact(1.0, 0.5, 1.0, 1.0, 2.0, 0.5),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
        assert_eq!(tau0_compact(0.0, 0.5, 1.0, 1.0, 2.0, 0.5), 0.0);
        assert_eq!(tau0_bounded(0.3, 0.5, 1.0), 0.0);
        assert_relative_eq!(
            tau0_bounded(1.0, 0.5, 2.0),
            0.5 * std::f64::consts::LN_2,
            epsilon = 1e-15
        );
    }

    #[test]
    fn bump_shape() {
        let b = InitialData::Bump {
            height: 1.0,
            radius: 1.0,
        };
        assert_eq!(b.value(0.0), 0.0);
        assert_eq!(b.value(0.5), 1.0);
        assert_eq!(b.value(0.125), 0.5);
        assert_eq!(b.value(1.0), 0.0);
        assert_eq!(b.value(2.0), 0.0);
        assert_eq!(
            b.bound(),
            BoundKind::CompactSupport {
                sup: 1.0,
                radius: 1.0
            }
        );
    }

    #[test]
    fn data_validation() {
        assert!(InitialData::Constant { value: -1.0 }.validate().is_err());
        assert!(InitialData::Bump {
            height: 1.0,
            radius: 0.0
        }
        .validate()
        .is_err());
        assert!(InitialData::Tabulated {
            r: vec![0.0, 1.0],
            u: vec![1.0]
        }
        .validate()
        .is_err());
        assert!(InitialData::Tabulated {
            r: vec![0.0, 0.0],
            u: vec![1.0, 1.0]
        }
        .validate()
        .is_err());
        let t = InitialData::Tabulated {
            r: vec![0.0, 1.0, 2.0],
            u: vec![2.0, 1.0, 0.0],
        };
        assert!(t.validate().is_ok());
        assert_eq!(t.value(0.5), 1.5);
        assert_eq!(t.value(3.0), 0.0);
        assert_eq!(
            t.bound(),
            BoundKind::CompactSupport {
                sup: 2.0,
                radius: 2.0
            }
        );
    }

    #[test]
    fn zero_stays_zero() {
        let spec = RunSpec::new(64, 2.0, 0.5);
        let run = run(&q(), &InitialData::Zero, 0.5, &spec, None).unwrap();
        assert!(run.snapshots.iter().all(|s| s.u.iter().all(|&v| v == 0.0)));
        assert_eq!(run.snapshots.len(), 11);
    }

    #[test]
    fn constant_data_follows_pure_reaction() {
        let params = q();
        let eps = 0.5;
        let c = 0.2;
        let mut st =
            PdeState::new(&params, &InitialData::Constant { value: c }, eps, 32, 1.0).unwrap();
        let dt = 0.5 * st.stable_dt(0.45);
        st.step(dt, None);
        for (r, u) in st.centers().iter().zip(&st.u) {
            let expect = c + dt * (r + eps).powf(params.sigma) * c.powf(params.p);
            assert_relative_eq!(*u, expect, max_relative = 1e-13);
        }
    }

    #[test]
    fn json_shape_of_data() {
        let s = serde_json::to_string(&InitialData::Bump {
            height: 1.0,
            radius: 1.0,
        })
        .unwrap();
        assert_eq!(s, r#"{"kind":"bump","params":{"height":1.0,"radius":1.0}}"#);
        let z: InitialData = serde_json::from_str(r#"{"kind":"zero"}"#).unwrap();
        assert_eq!(z, InitialData::Zero);
    }

    #[test]
    fn nonnegative_and_mass_nondecreasing() {
        let spec = RunSpec::new(128, 3.0, 0.3);
        let u0 = InitialData::Bump {
            height: 1.0,
            radius: 1.0,
        };
        let r = run(&q(), &u0, 0.5, &spec, None).unwrap();
        assert!(r.min_value >= 0.0);
        for w in r.snapshots.windows(2) {
            assert!(w[1].mass >= w[0].mass * (1.0 - 1e-13));
        }
    }

    #[test]
    fn domain_too_small_and_cfl_failure() {
        let u0 = InitialData::Bump {
            height: 1.0,
            radius: 1.0,
        };
        let spec = RunSpec::new(64, 1.05, 0.5);
        assert!(matches!(
            run(&q(), &u0, 0.5, &spec, None),
            Err(Error::DomainTooSmall { .. })
        ));
        let mut spec = RunSpec::new(64, 3.0, 0.5);
        spec.dt_min = 1.0;
        assert!(matches!(
            run(&q(), &u0, 0.5, &spec, None),
            Err(Error::CflFailure { .. })
        ));
    }

    #[test]
    fn eps_ordering_and_degenerate_lists() {
        let spec = RunSpec::new(128, 3.0, 0.3);
        let u0 = InitialData::Bump {
            height: 1.0,
            radius: 1.0,
        };
        let runs = run_many(&q(), &u0, &[1.0, 0.5, 0.25], &spec, None).unwrap();
        let rep = eps_monotonicity(&runs).unwrap();
        assert_eq!(rep.pairs.len(), 2);
        assert!(rep.pairs.iter().all(|p| p.min_margin >= 0.0));
        assert!(eps_monotonicity(&runs[..1]).unwrap().pairs.is_empty());
        let rev: Vec<_> = runs.iter().rev().cloned().collect();
        assert!(eps_monotonicity(&rev).is_err());
        let zero = run_many(&q(), &InitialData::Zero, &[1.0, 0.5], &spec, None).unwrap();
        let rep = eps_monotonicity(&zero).unwrap();
        assert_eq!(rep.pairs[0].min_margin, 0.0);
        assert_eq!(rep.pairs[0].cauchy_increment, 0.0);
    }

    #[test]
    fn ordered_data_give_ordered_solutions() {
        let spec = RunSpec::new(128, 3.0, 0.3);
        let a = run(
            &q(),
            &InitialData::Bump {
                height: 0.5,
                radius: 1.0,
            },
            0.5,
            &spec,
            None,
        )
        .unwrap();
        let b = run(
            &q(),
            &InitialData::Bump {
                height: 1.0,
                radius: 1.2,
            },
            0.5,
            &spec,
            None,
        )
        .unwrap();
        for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
            for (x, y) in sa.u.iter().zip(&sb.u) {
                assert!(x <= y);
            }
        }
    }
}
