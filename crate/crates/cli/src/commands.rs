use std::path::{Path, PathBuf};

use eternal::io::{self, fmt_f64};
use eternal::pde::{self, BarrierReport, BoundKind, EpsReport, OuterBoundary, RunSpec};
use eternal::phase::{self, CriticalPointReport, PhaseState};
use eternal::profile::{self, Mode, OrbitClass, ProfileGrid, ProfileOptions, ProfilePoint};
use eternal::selfsim::SelfSimilarSolution;
use eternal::shooter::{self, AlphaStarResult, ShooterOptions};
use eternal::{Error, Params};
use serde::Serialize;

use crate::config::{
    AlphaStarConfig, Command, PortraitConfig, ProfileConfig, SimulateConfig, VerifyConfig,
};
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::FindAlphaStar(a) => {
            let (c, out) = a.merge()?;
            find_alpha_star(&c, &out)
        }
        Command::Profile(a) => {
            let (c, out) = a.merge()?;
            profile_cmd(&c, &out)
        }
        Command::PhasePortrait(a) => {
            let (c, out) = a.merge()?;
            phase_portrait(&c, &out)
        }
        Command::Simulate(a) => {
            let (c, out) = a.merge()?;
            simulate(&c, &out)
        }
        Command::Verify(a) => {
            let (c, out) = a.merge()?;
            verify(&c, &out)
        }
    }
}

/// Files of one command, written only after everything has been computed.
#[derive(Default)]
struct Outputs(Vec<(PathBuf, String)>);

impl Outputs {
    fn json<T: Serialize>(&mut self, dir: &Path, name: &str, value: &T) -> Result<()> {
        self.0.push((dir.join(name), io::json_string(value)?));
        Ok(())
    }

    fn csv<R, I>(&mut self, dir: &Path, name: &str, header: &[&str], rows: R)
    where
        R: IntoIterator<Item = I>,
        I: IntoIterator<Item = f64>,
    {
        self.0.push((dir.join(name), io::csv_string(header, rows)));
    }

    fn commit(self) -> Result<()> {
        for (path, text) in &self.0 {
            io::atomic_write(path, text.as_bytes())?;
            println!("wrote {}", path.display());
        }
        Ok(())
    }
}

fn profile_rows(points: &[ProfilePoint]) -> impl Iterator<Item = [f64; 3]> + '_ {
    points.iter().map(|p| [p.xi, p.f, p.w])
}

fn alpha_star(m: f64, p: f64, n: i64) -> Result<AlphaStarResult> {
    Ok(shooter::find_alpha_star(
        m,
        p,
        n,
        &ShooterOptions::default(),
    )?)
}

fn find_alpha_star(c: &AlphaStarConfig, out: &Path) -> Result<()> {
    let opts = ShooterOptions {
        tol_alpha: c.tol,
        k: c.k,
        xi_max: c.xi_max,
        ..Default::default()
    };
    let res = shooter::find_alpha_star(c.m, c.p, c.n, &opts)?;
    println!(
        "alpha* = {}  beta* = {}  xi0 = {}  ({} evaluations)",
        fmt_f64(res.alpha_star),
        fmt_f64(res.beta_star),
        fmt_f64(res.xi0),
        res.log.len()
    );
    let mut files = Outputs::default();
    files.json(out, "config.json", c)?;
    files.json(out, "alpha_star.json", &res)?;
    files.csv(
        out,
        "profile.csv",
        &["xi", "f", "w"],
        profile_rows(&res.profile.points),
    );
    files.commit()
}

#[derive(Debug, Serialize)]
struct InterfaceDiagnostics {
    params: Params,
    classification: OrbitClass,
    f0: f64,
    xi0: f64,
    /// Range of `f^{m-1} / [β(m-1)(ξ0²-ξ²)/(2m)]` for `1e-3 ≤ 1 - ξ/ξ0 ≤ 1e-2`.
    interface_ratio: (f64, f64),
}

#[derive(Debug, Serialize)]
struct GlobalDiagnostics {
    params: Params,
    classification: OrbitClass,
    f0: f64,
    xi_min: Option<f64>,
    f_min: f64,
    farfield_constant: f64,
    farfield_constant_leading_balance: f64,
    last_xi: f64,
    last_ratio: f64,
    last_ratio_leading_balance: f64,
}

/// `α` and exponents from an `alpha_star.json`.
fn read_alpha_star(path: &Path) -> Result<Params> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let v: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let bad = || CliError::Config(format!("{}: not an alpha_star.json", path.display()));
    let alpha = v["alpha_star"].as_f64().ok_or_else(bad)?;
    let prm = &v["params"];
    let (m, p, n) = (
        prm["m"].as_f64().ok_or_else(bad)?,
        prm["p"].as_f64().ok_or_else(bad)?,
        prm["N"].as_i64().ok_or_else(bad)?,
    );
    Ok(Params::new(m, p, n, alpha)?)
}

fn interface_ratio(grid: &ProfileGrid) -> Result<(f64, f64)> {
    let u = SelfSimilarSolution::new(grid.clone())?;
    let q = u.params;
    let xi0 = u
        .xi0()
        .ok_or_else(|| CliError::Config("profile has no interface".into()))?;
    let mut range = (f64::INFINITY, 0.0f64);
    for k in 0..=50 {
        let xi = xi0 * (1.0 - 10f64.powf(-3.0 + k as f64 / 50.0));
        let law = q.beta * (q.m - 1.0) * (xi0 * xi0 - xi * xi) / (2.0 * q.m);
        let r = u.profile_value(xi)?.powf(q.m - 1.0) / law;
        range = (range.0.min(r), range.1.max(r));
    }
    Ok(range)
}

fn profile_cmd(c: &ProfileConfig, out: &Path) -> Result<()> {
    let opts = ProfileOptions::default();
    let mut files = Outputs::default();
    files.json(out, "config.json", c)?;
    let star = match (c.alpha, &c.alpha_star_file) {
        (Some(a), _) => {
            let q = Params::new(c.m, c.p, c.n, a)?;
            let xi_max = c.xi_max.unwrap_or(1e6);
            let grid = shooter::global_profile(&q, 1.0, xi_max, &opts)?;
            let (c_st, c_lb) = (
                profile::farfield_constant(&q),
                profile::farfield_constant_leading_balance(&q),
            );
            let last = *grid.last();
            let diag = GlobalDiagnostics {
                params: q,
                classification: grid.classification,
                f0: grid.f0(),
                xi_min: grid.xi_min,
                f_min: grid.min_f(),
                farfield_constant: c_st,
                farfield_constant_leading_balance: c_lb,
                last_xi: last.xi,
                last_ratio: profile::farfield_quantity(&q, &last) / c_st,
                last_ratio_leading_balance: profile::farfield_quantity(&q, &last) / c_lb,
            };
            println!(
                "alpha = {}: {} profile, f(xi = {:.3e}) ratio to far-field constant {:.4}",
                fmt_f64(a),
                grid.classification,
                last.xi,
                diag.last_ratio
            );
            files.json(out, "diagnostics.json", &diag)?;
            let rows = grid.points.iter().map(|p| {
                let (q1, ok) = (profile::farfield_quantity(&q, p), p.xi > 1.0);
                let (r, rl) = if ok {
                    (q1 / c_st, q1 / c_lb)
                } else {
                    (f64::NAN, f64::NAN)
                };
                [p.xi, p.f, p.w, r, rl]
            });
            files.csv(
                out,
                "profile.csv",
                &[
                    "xi",
                    "f",
                    "w",
                    "farfield_ratio",
                    "farfield_ratio_leading_balance",
                ],
                rows,
            );
            return files.commit();
        }
        (None, Some(path)) => read_alpha_star(path)?,
        (None, None) => alpha_star(c.m, c.p, c.n)?.params,
    };
    let xi_max = c
        .xi_max
        .unwrap_or_else(|| profile::default_xi_max(&star, 1.0));
    let grid = profile::integrate_profile(&star, 1.0, xi_max, Mode::Interface, &opts)?;
    let xi0 = match (grid.classification, grid.xi0) {
        (OrbitClass::Interface, Some(x)) => x,
        (found, _) => {
            return Err(Error::WrongRegime {
                alpha: star.alpha,
                found: found.to_string(),
                expected: OrbitClass::Interface.to_string(),
            }
            .into())
        }
    };
    let diag = InterfaceDiagnostics {
        params: star,
        classification: grid.classification,
        f0: grid.f0(),
        xi0,
        interface_ratio: interface_ratio(&grid)?,
    };
    println!(
        "alpha* = {}: interface at xi0 = {}",
        fmt_f64(star.alpha),
        fmt_f64(xi0)
    );
    files.json(out, "diagnostics.json", &diag)?;
    files.csv(
        out,
        "profile.csv",
        &["xi", "f", "w"],
        profile_rows(&grid.points),
    );
    files.commit()
}

#[derive(Debug, Serialize)]
struct CriticalPoints {
    params: Params,
    points: Vec<CriticalPointReport>,
}

fn phase_portrait(c: &PortraitConfig, out: &Path) -> Result<()> {
    let q = match c.alpha {
        Some(a) => Params::new(c.m, c.p, c.n, a)?,
        None => alpha_star(c.m, c.p, c.n)?.params,
    };
    let opts = ProfileOptions::default();
    let b = q.beta;
    let seeds: Vec<[f64; 2]> = if c.seeds.is_empty() {
        vec![[b, -0.5 * b], [0.2 * b, 0.5 * b], [2.0 * b, -2.0 * b]]
    } else {
        c.seeds.clone()
    };
    // Orbit 0 is the profile orbit leaving Q1 (or Q4 in dimension one).
    let mode = if c.alpha.is_none() {
        Mode::Interface
    } else {
        Mode::Record
    };
    let grid = profile::integrate_profile(&q, 1.0, profile::default_xi_max(&q, 1.0), mode, &opts)?;
    let mut trajs = vec![phase::profile_to_phase(&grid.points, &q)?];
    for s in &seeds {
        trajs.push(phase::trajectory(
            &q,
            PhaseState::new(s[0], s[1]),
            c.eta_max,
            c.bound,
            &opts.tol,
        )?);
    }
    let rows = trajs
        .iter()
        .enumerate()
        .flat_map(|(id, t)| t.iter().map(move |s| [id as f64, s.eta, s.x, s.y]));
    let points = phase::critical_points(&q);
    println!(
        "{} critical points, {} trajectories",
        points.len(),
        trajs.len()
    );
    let mut files = Outputs::default();
    files.json(out, "config.json", c)?;
    files.json(
        out,
        "critical_points.json",
        &CriticalPoints { params: q, points },
    )?;
    files.csv(out, "portrait.csv", &["traj_id", "eta", "X", "Y"], rows);
    files.commit()
}

#[derive(Debug, Serialize)]
struct SnapshotSummary {
    file: String,
    t: f64,
    mass: f64,
    support: f64,
    max: f64,
}

#[derive(Debug, Serialize)]
struct RunSummary {
    eps: f64,
    steps: usize,
    dr: f64,
    min_value: f64,
    snapshots: Vec<SnapshotSummary>,
    barrier: Option<BarrierReport>,
}

#[derive(Debug, Serialize)]
struct SimulateReport {
    params: Params,
    barrier_alpha: f64,
    barrier_kind: &'static str,
    tau0: f64,
    r_max: f64,
    cells: usize,
    boundary: OuterBoundary,
    runs: Vec<RunSummary>,
    eps_monotonicity: Option<EpsReport>,
}

fn simulate(c: &SimulateConfig, out: &Path) -> Result<()> {
    let star = alpha_star(c.m, c.p, c.n)?;
    let bounded = matches!(c.u0.bound(), BoundKind::Bounded { .. });
    let barrier = if bounded {
        let q = star.params.with_alpha(2.0 * star.alpha_star)?;
        let xi_max = profile::default_xi_max(&q, 1.0);
        SelfSimilarSolution::new(shooter::global_profile(
            &q,
            1.0,
            xi_max,
            &ProfileOptions::default(),
        )?)?
    } else {
        SelfSimilarSolution::new(star.profile.clone())?
    };
    let (tau0, r_max, boundary) = match (c.u0.bound(), c.r_max) {
        (BoundKind::Bounded { .. }, None) => {
            return Err(CliError::Config(
                "data without compact support need an explicit R_max".into(),
            ))
        }
        (BoundKind::Bounded { .. }, Some(r)) => {
            let tau0 = pde::tau0_for(&c.u0, &barrier, r)?;
            (tau0, r, OuterBoundary::Barrier { tau0 })
        }
        (BoundKind::CompactSupport { radius, .. }, r) => {
            let tau0 = pde::tau0_for(&c.u0, &barrier, radius)?;
            let xi0 = barrier.xi0().expect("compact barrier");
            let r = r.unwrap_or(1.5 * xi0 * (barrier.beta() * (c.t_end + tau0)).exp());
            (tau0, r, OuterBoundary::ZeroFlux)
        }
    };
    let mut spec = RunSpec::new(c.cells, r_max, c.t_end);
    spec.cfl = c.cfl;
    spec.boundary = boundary;
    if let Some(s) = &c.snapshots {
        spec.snapshots = s.clone();
    }
    let params = star.params;
    let runs = pde::run_many(&params, &c.u0, &c.eps, &spec, Some(&barrier))?;

    let mut files = Outputs::default();
    files.json(out, "config.json", c)?;
    let mut summaries = Vec::with_capacity(runs.len());
    for (i, run) in runs.iter().enumerate() {
        let barrier_rep = if c.barrier {
            Some(pde::compare_barrier(run, &barrier, tau0)?)
        } else {
            None
        };
        let mut snaps = Vec::with_capacity(run.snapshots.len());
        for (k, s) in run.snapshots.iter().enumerate() {
            let name = format!("snapshots/eps{i:02}_t{k:03}.csv");
            files.csv(
                out,
                &name,
                &["r", "u"],
                run.centers.iter().zip(&s.u).map(|(&r, &u)| [r, u]),
            );
            snaps.push(SnapshotSummary {
                file: name,
                t: s.t,
                mass: s.mass,
                support: s.support,
                max: s.max,
            });
        }
        summaries.push(RunSummary {
            eps: run.eps,
            steps: run.steps,
            dr: run.dr(),
            min_value: run.min_value,
            snapshots: snaps,
            barrier: barrier_rep,
        });
    }
    let strictly_decreasing = c.eps.windows(2).all(|w| w[1] < w[0]);
    let eps_monotonicity = if strictly_decreasing {
        Some(pde::eps_monotonicity(&runs)?)
    } else {
        None
    };
    for s in &summaries {
        let viol = s.barrier.map_or(String::new(), |b| {
            format!(", barrier violation {:.3e}", b.max_violation)
        });
        println!("eps = {}: {} steps{viol}", s.eps, s.steps);
    }
    let report = SimulateReport {
        params,
        barrier_alpha: barrier.alpha(),
        barrier_kind: if bounded { "global" } else { "compact" },
        tau0,
        r_max,
        cells: c.cells,
        boundary,
        runs: summaries,
        eps_monotonicity,
    };
    files.json(out, "report.json", &report)?;
    files.commit()
}

#[derive(Debug, Serialize)]
struct Check {
    name: String,
    pass: bool,
    value: f64,
    tolerance: f64,
    detail: String,
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    m: f64,
    p: f64,
    #[serde(rename = "N")]
    n: i64,
    pass: bool,
    checks: Vec<Check>,
}

fn check_eigenvalues(q: &Params) -> Check {
    let (m, p, n, b) = (q.m, q.p, q.dim(), q.beta);
    let mut worst = 0.0f64;
    for c in phase::critical_points(q) {
        let want = match c.name.as_str() {
            "P0" => [-b, 0.0],
            "P1" => [-(m - 1.0) * b, b],
            "Q1" | "Q1=Q4" => [-(n - 2.0), 2.0 * (m - p) / (m - 1.0)],
            "Q4" => [n - 2.0, (m - p) * (m * n - n + 2.0) / (m * (m - 1.0))],
            "Q2" => [m, 1.0],
            "Q3" => [-m, -1.0],
            _ => continue,
        };
        let rel = |a: f64, e: f64| (a - e).abs() / e.abs().max(1.0);
        let sorted = |mut v: [f64; 2]| {
            v.sort_by(f64::total_cmp);
            v
        };
        let (got, want) = (sorted(c.eigenvalues), sorted(want));
        worst = worst
            .max(rel(got[0], want[0]))
            .max(rel(got[1], want[1]))
            .max(c.eigen_defect());
    }
    Check {
        name: "eigenvalues".into(),
        pass: worst <= 1e-12,
        value: worst,
        tolerance: 1e-12,
        detail: "closed-form eigenvalues and eigenpair defect at all critical points".into(),
    }
}

fn check_rescaling(u: &SelfSimilarSolution) -> Result<Check> {
    let xi0 = u.xi0().expect("compact solution");
    let (mut worst, mut scale) = (0.0f64, 0.0f64);
    for t0 in [-1.0, 1.0] {
        let v = u.rescale((u.alpha() * t0).exp())?;
        for it in 0..50 {
            let t = -2.0 + 4.0 * it as f64 / 49.0;
            let top = 1.2 * xi0 * (u.beta() * (t + t0)).exp();
            for ir in 0..50 {
                let r = top * ir as f64 / 49.0;
                let b = u.eval(r, t + t0)?;
                worst = worst.max((v.eval(r, t)? - b).abs());
                scale = scale.max(b);
            }
        }
    }
    Ok(Check {
        name: "rescaling".into(),
        pass: worst <= 1e-8 * scale,
        value: worst / scale,
        tolerance: 1e-8,
        detail: "rescale by e^{alpha t0} against a time shift by t0 = ±1".into(),
    })
}

fn check_mass(u: &SelfSimilarSolution) -> Result<Check> {
    let m0 = u.mass(0.0, None, 1e-11)?;
    let rate = u.alpha() + u.params.dim() * u.beta();
    let mut worst = 0.0f64;
    for t in [-1.0, 0.5, 2.0] {
        worst = worst.max((u.mass(t, None, 1e-11)? / m0 / (rate * t).exp() - 1.0).abs());
    }
    Ok(Check {
        name: "mass-law".into(),
        pass: worst <= 1e-6,
        value: worst,
        tolerance: 1e-6,
        detail: "mass(t)/mass(0) against e^{(alpha + N beta) t}".into(),
    })
}

fn check_residual_convergence(u: &SelfSimilarSolution) -> Result<Check> {
    let xi0 = u.xi0().expect("compact solution");
    let mut maxes = Vec::with_capacity(4);
    for j in 0..4 {
        let h = 0.04 * xi0 / 2f64.powi(j);
        maxes.push(
            u.pde_residual((0.2 * xi0, 0.7 * xi0), (0.0, 0.5), h, 11, 3)?
                .max,
        );
    }
    let worst = maxes
        .windows(2)
        .map(|w| w[0] / w[1])
        .fold(f64::INFINITY, f64::min);
    Ok(Check {
        name: "residual".into(),
        pass: worst >= 3.5,
        value: worst,
        tolerance: 3.5,
        detail: "smallest residual reduction factor over three grid halvings".into(),
    })
}

/// Tolerance on the relative residual of a tabulated profile.
const TABLE_RESIDUAL_TOL: f64 = 1e-3;

fn check_residual_table(path: &Path, q: &Params) -> Result<Check> {
    let (header, rows) = io::read_csv(path)?;
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Config(format!("{}: no column {name}", path.display())))
    };
    let (ix, jf, jw) = (col("xi")?, col("f")?, col("w")?);
    let points: Vec<ProfilePoint> = rows
        .iter()
        .map(|r| ProfilePoint::new(r[ix], r[jf], r[jw]))
        .collect();
    let res = profile::tabulated_residual(q, &points);
    let (worst, at) = res
        .iter()
        .map(|&(xi, r1, r2)| {
            (
                if r1.is_nan() || r2.is_nan() {
                    f64::INFINITY
                } else {
                    r1.max(r2)
                },
                xi,
            )
        })
        .fold((0.0f64, f64::NAN), |a, b| if b.0 > a.0 { b } else { a });
    let pass = !res.is_empty() && worst <= TABLE_RESIDUAL_TOL;
    Ok(Check {
        name: "residual".into(),
        pass,
        value: worst,
        tolerance: TABLE_RESIDUAL_TOL,
        detail: format!(
            "{} interior samples of {}, worst at xi = {at}",
            res.len(),
            path.display()
        ),
    })
}

fn verify(c: &VerifyConfig, out: &Path) -> Result<()> {
    if let Some(bad) = c
        .checks
        .iter()
        .find(|s| !crate::config::ALL_CHECKS.contains(&s.as_str()))
    {
        return Err(CliError::Config(format!(
            "unknown check {bad:?}; expected one of {}",
            crate::config::ALL_CHECKS.join(", ")
        )));
    }
    let mut star: Option<SelfSimilarSolution> = None;
    let mut solution = || -> Result<SelfSimilarSolution> {
        if star.is_none() {
            star = Some(SelfSimilarSolution::new(
                alpha_star(c.m, c.p, c.n)?.profile,
            )?);
        }
        Ok(star.clone().expect("just set"))
    };
    let mut checks = Vec::with_capacity(c.checks.len());
    for name in &c.checks {
        let check = match name.as_str() {
            "eigenvalues" => check_eigenvalues(&solution()?.params),
            "rescaling" => check_rescaling(&solution()?)?,
            "mass-law" => check_mass(&solution()?)?,
            _ => match &c.profile {
                Some(path) => {
                    let q = match c.alpha {
                        Some(a) => Params::new(c.m, c.p, c.n, a)?,
                        None => solution()?.params,
                    };
                    check_residual_table(path, &q)?
                }
                None => check_residual_convergence(&solution()?)?,
            },
        };
        println!(
            "{:<12} {}  value {:.3e}",
            check.name,
            if check.pass { "pass" } else { "FAIL" },
            check.value
        );
        checks.push(check);
    }
    let failed = checks.iter().filter(|k| !k.pass).count();
    let report = VerifyReport {
        m: c.m,
        p: c.p,
        n: c.n,
        pass: failed == 0,
        checks,
    };
    let total = report.checks.len();
    let mut files = Outputs::default();
    files.json(out, "config.json", c)?;
    files.json(out, "verify.json", &report)?;
    files.commit()?;
    if failed > 0 {
        return Err(CliError::VerifyFailed { failed, total });
    }
    Ok(())
}
