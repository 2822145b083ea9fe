//! Shooting on α: the orbit leaving the origin crosses zero for α < α*,
//! turns up for α > α*, and at α* itself ends at an interface with zero flux.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode;
use crate::params::Params;
use crate::phase::{self, PhaseState};
use crate::profile::{self, Mode, OrbitClass, ProfileGrid, ProfileOptions};

pub const ALPHA_MIN: f64 = 1e-6;
pub const ALPHA_MAX: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShooterOptions {
    /// Relative bracket width at which bisection stops.
    pub tol_alpha: f64,
    /// Origin normalisation of the shot profiles.
    #[serde(rename = "K")]
    pub k: f64,
    /// Classification limit; `None` means [`profile::default_xi_max`].
    pub xi_max: Option<f64>,
    /// Relative width to which the bracket is narrowed further before
    /// the interface profile is integrated.
    pub refine_rel: f64,
    pub profile: ProfileOptions,
}

impl Default for ShooterOptions {
    fn default() -> Self {
        ShooterOptions {
            tol_alpha: 1e-8,
            k: 1.0,
            xi_max: None,
            refine_rel: 1e-13,
            profile: ProfileOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Expand,
    Bisect,
    Refine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub stage: Stage,
    pub alpha: f64,
    pub class: OrbitClass,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaStarResult {
    pub params: Params,
    pub alpha_star: f64,
    pub beta_star: f64,
    /// `(alpha_lo, alpha_hi)` classifying as CrossesZero and TurnsUp.
    pub bracket: (f64, f64),
    pub xi0: f64,
    pub options: ShooterOptions,
    pub log: Vec<Evaluation>,
    #[serde(skip_serializing)]
    pub profile: ProfileGrid,
}

/// Classification limit used for `params` and `k`.
pub fn xi_limit(params: &Params, opts: &ShooterOptions) -> f64 {
    opts.xi_max
        .unwrap_or_else(|| profile::default_xi_max(params, opts.k))
}

/// Fate of the orbit at `params.alpha`; never returns `Interface`.
pub fn classify(params: &Params, k: f64, xi_max: f64, opts: &ProfileOptions) -> Result<OrbitClass> {
    Ok(profile::integrate_profile(params, k, xi_max, Mode::Classify, opts)?.classification)
}

/// Classification with one retry at ten times the limit before giving up.
fn decide(base: &Params, alpha: f64, opts: &ShooterOptions) -> Result<OrbitClass> {
    let q = base.with_alpha(alpha)?;
    let xi_max = xi_limit(&q, opts);
    match classify(&q, opts.k, xi_max, &opts.profile)? {
        OrbitClass::Inconclusive => match classify(&q, opts.k, 10.0 * xi_max, &opts.profile)? {
            OrbitClass::Inconclusive => Err(Error::Inconclusive {
                alpha,
                xi_max: 10.0 * xi_max,
            }),
            c => Ok(c),
        },
        c => Ok(c),
    }
}

fn decide_batch(base: &Params, alphas: &[f64], opts: &ShooterOptions) -> Vec<Result<OrbitClass>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        alphas.par_iter().map(|&a| decide(base, a, opts)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        alphas.iter().map(|&a| decide(base, a, opts)).collect()
    }
}

/// Fails on any `α_a < α_b` with `α_a` turning up and `α_b` crossing zero.
pub fn check_monotone(log: &[Evaluation]) -> Result<()> {
    let mut sorted: Vec<&Evaluation> = log.iter().collect();
    sorted.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    let mut lowest_turn: Option<f64> = None;
    for e in sorted {
        match e.class {
            OrbitClass::TurnsUp if lowest_turn.is_none() => lowest_turn = Some(e.alpha),
            OrbitClass::CrossesZero => {
                if let Some(t) = lowest_turn {
                    return Err(Error::NonMonotoneWitness {
                        turns_up: t,
                        crosses_zero: e.alpha,
                    });
                }
            }
            _ => {}
        }
    }
    Ok(())
}

/// Brackets α* from the seed `2/(m-1)` by doubling or halving, in batches.
fn expand(base: &Params, opts: &ShooterOptions, log: &mut Vec<Evaluation>) -> Result<(f64, f64)> {
    const BATCH: usize = 4;
    let seed = 2.0 / (base.m - 1.0);
    let first = decide(base, seed, opts)?;
    log.push(Evaluation {
        stage: Stage::Expand,
        alpha: seed,
        class: first,
    });
    let (factor, wanted) = match first {
        OrbitClass::CrossesZero => (2.0_f64, OrbitClass::TurnsUp),
        _ => (0.5, OrbitClass::CrossesZero),
    };
    let mut last = seed;
    loop {
        let batch: Vec<f64> = (1..=BATCH)
            .map(|j| last * factor.powi(j as i32))
            .take_while(|a| (ALPHA_MIN..=ALPHA_MAX).contains(a))
            .collect();
        if batch.is_empty() {
            return Err(Error::BracketFailure {
                lo: ALPHA_MIN,
                hi: ALPHA_MAX,
            });
        }
        let results = decide_batch(base, &batch, opts);
        for (&alpha, res) in batch.iter().zip(results) {
            let class = res?;
            log.push(Evaluation {
                stage: Stage::Expand,
                alpha,
                class,
            });
            if class == wanted {
                return Ok(if factor > 1.0 {
                    (last, alpha)
                } else {
                    (alpha, last)
                });
            }
            last = alpha;
        }
    }
}

fn bisect(
    base: &Params,
    opts: &ShooterOptions,
    mut lo: f64,
    mut hi: f64,
    rel: f64,
    stage: Stage,
    log: &mut Vec<Evaluation>,
) -> Result<(f64, f64)> {
    while hi - lo > rel * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let class = decide(base, mid, opts)?;
        log.push(Evaluation {
            stage,
            alpha: mid,
            class,
        });
        match class {
            OrbitClass::CrossesZero => lo = mid,
            _ => hi = mid,
        }
    }
    Ok((lo, hi))
}

/// Locates α* for the exponents `(m, p, N)`.
///
/// The bracket is narrowed to `tol_alpha` relative width with a monotonicity
/// check on every evaluation; it is then narrowed further to `refine_rel`
/// and the interface profile is integrated at the final midpoint, which is
/// reported as α*.
pub fn find_alpha_star(m: f64, p: f64, n: i64, opts: &ShooterOptions) -> Result<AlphaStarResult> {
    if !(opts.tol_alpha > 0.0) {
        return Err(Error::InvalidInput(format!(
            "tol_alpha must be positive (got {})",
            opts.tol_alpha
        )));
    }
    let base = Params::new(m, p, n, 2.0 / (m - 1.0).max(f64::MIN_POSITIVE))?;
    let mut log = Vec::new();
    let (lo, hi) = expand(&base, opts, &mut log)?;
    let (lo, hi) = bisect(&base, opts, lo, hi, opts.tol_alpha, Stage::Bisect, &mut log)?;
    check_monotone(&log)?;

    let mut fine = Vec::new();
    let (flo, fhi) = bisect(
        &base,
        opts,
        lo,
        hi,
        opts.refine_rel,
        Stage::Refine,
        &mut fine,
    )?;
    log.extend(fine);
    let alpha_star = 0.5 * (flo + fhi);
    let q = base.with_alpha(alpha_star)?;
    let xi_max = xi_limit(&q, opts);
    let grid = profile::integrate_profile(&q, opts.k, xi_max, Mode::Interface, &opts.profile)?;
    let xi0 = match (grid.classification, grid.xi0) {
        (OrbitClass::Interface, Some(x)) => x,
        _ => {
            return Err(Error::Inconclusive {
                alpha: alpha_star,
                xi_max,
            })
        }
    };
    Ok(AlphaStarResult {
        params: q,
        alpha_star,
        beta_star: q.beta,
        bracket: (lo, hi),
        xi0,
        options: *opts,
        log,
        profile: grid,
    })
}

/// Profile for `α > α*`: positive, with a minimum, integrated to `xi_max`.
pub fn global_profile(
    params: &Params,
    k: f64,
    xi_max: f64,
    opts: &ProfileOptions,
) -> Result<ProfileGrid> {
    let class = classify(params, k, profile::default_xi_max(params, k), opts)?;
    if class != OrbitClass::TurnsUp {
        return Err(Error::WrongRegime {
            alpha: params.alpha,
            found: class.to_string(),
            expected: OrbitClass::TurnsUp.to_string(),
        });
    }
    profile::integrate_profile(params, k, xi_max, Mode::Global, opts)
}

/// Phase states of the orbit entering P0, followed in η until `X < x_stop`.
///
/// Far-field profiles only reach small X at astronomically large ξ
/// (`X ~ (ln ξ)^{-(m-1)/(p-1)}`), so the tail is continued in the phase
/// plane rather than in ξ. States are kept once X has dropped below
/// `x_record`, thinned to one per 0.1% decrease of X.
pub fn p0_tail(
    params: &Params,
    k: f64,
    x_record: f64,
    x_stop: f64,
    opts: &ProfileOptions,
) -> Result<Vec<PhaseState>> {
    let grid = global_profile(params, k, 10.0 * profile::length_scale(params, k), opts)?;
    let start = phase::to_phase(grid.last(), params)?;
    let p = *params;
    let rhs = move |_t: f64, s: &[f64; 2]| {
        let x = s[0].exp();
        let (dx, dy) = phase::rhs_phase(&PhaseState::new(x, s[1]), &p);
        [dx / x, dy]
    };
    let mut out: Vec<PhaseState> = Vec::new();
    let mut tol = opts.tol;
    tol.max_steps = tol.max_steps.max(20_000_000);
    ode::integrate(
        rhs,
        0.0,
        [start.x.ln(), start.y],
        f64::INFINITY,
        &tol,
        |step| {
            let st = PhaseState {
                x: step.y1[0].exp(),
                y: step.y1[1],
                eta: step.t1,
            };
            let keep = st.x < x_record && out.last().is_none_or(|l| st.x < 0.999 * l.x);
            if keep {
                out.push(st);
            }
            if st.x < x_stop {
                ode::Control::Stop
            } else {
                ode::Control::Continue
            }
        },
    )?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_extremes() {
        let opts = ProfileOptions::default();
        let q = Params::new(2.0, 1.5, 3, 0.01).unwrap();
        assert_eq!(
            classify(&q, 1.0, profile::default_xi_max(&q, 1.0), &opts).unwrap(),
            OrbitClass::CrossesZero
        );
        let q = q.with_alpha(100.0).unwrap();
        assert_eq!(
            classify(&q, 1.0, profile::default_xi_max(&q, 1.0), &opts).unwrap(),
            OrbitClass::TurnsUp
        );
        assert!(matches!(q.with_alpha(-1.0), Err(Error::RangeViolation(_))));
    }

    #[test]
    fn monotone_check() {
        let e = |alpha, class| Evaluation {
            stage: Stage::Bisect,
            alpha,
            class,
        };
        let ok = [
            e(1.0, OrbitClass::CrossesZero),
            e(3.0, OrbitClass::TurnsUp),
            e(2.0, OrbitClass::CrossesZero),
        ];
        assert!(check_monotone(&ok).is_ok());
        let bad = [
            e(1.0, OrbitClass::CrossesZero),
            e(2.0, OrbitClass::TurnsUp),
            e(3.0, OrbitClass::CrossesZero),
        ];
        assert_eq!(
            check_monotone(&bad),
            Err(Error::NonMonotoneWitness {
                turns_up: 2.0,
                crosses_zero: 3.0
            })
        );
    }

    #[test]
    fn alpha_star_contract() {
        let res = find_alpha_star(2.0, 1.5, 3, &ShooterOptions::default()).unwrap();
        let (lo, hi) = res.bracket;
        assert!(lo < res.alpha_star && res.alpha_star <= hi);
        assert!(hi - lo <= 1e-8 * hi);
        assert_eq!(res.beta_star, 0.5 * res.alpha_star);
        assert_eq!(res.profile.classification, OrbitClass::Interface);
        let opts = ProfileOptions::default();
        let q = res.params;
        let c = |a: f64| {
            let qa = q.with_alpha(a).unwrap();
            classify(&qa, 1.0, profile::default_xi_max(&qa, 1.0), &opts).unwrap()
        };
        assert_eq!(c(res.alpha_star * (1.0 - 1e-7)), OrbitClass::CrossesZero);
        assert_eq!(c(res.alpha_star * (1.0 + 1e-7)), OrbitClass::TurnsUp);
    }

    #[test]
    fn alpha_star_does_not_depend_on_normalisation() {
        let base = find_alpha_star(3.0, 2.0, 2, &ShooterOptions::default()).unwrap();
        for k in [0.25, 4.0] {
            let opts = ShooterOptions {
                k,
                ..ShooterOptions::default()
            };
            let res = find_alpha_star(3.0, 2.0, 2, &opts).unwrap();
            approx::assert_relative_eq!(res.alpha_star, base.alpha_star, max_relative = 1e-10);
        }
    }

    #[test]
    fn out_of_range_exponents() {
        assert!(matches!(
            find_alpha_star(2.0, 1.8, 1, &ShooterOptions::default()),
            Err(Error::RangeViolation(_))
        ));
        let bad = ShooterOptions {
            tol_alpha: 0.0,
            ..Default::default()
        };
        assert!(find_alpha_star(2.0, 1.5, 3, &bad).is_err());
    }

    #[test]
    fn wrong_regime_below_alpha_star() {
        let q = Params::new(2.0, 1.5, 3, 0.05).unwrap();
        assert!(matches!(
            global_profile(&q, 1.0, 100.0, &ProfileOptions::default()),
            Err(Error::WrongRegime { .. })
        ));
    }

    #[test]
    fn global_profile_has_a_positive_minimum() {
        let q = Params::new(2.0, 1.5, 3, 0.3).unwrap();
        let g = global_profile(&q, 1.0, 1e3, &ProfileOptions::default()).unwrap();
        let xi_min = g.xi_min.unwrap();
        let fmin = g.min_f();
        assert!(fmin > 0.0);
        assert!(g.last().f > fmin);
        assert!((g.last().xi - 1e3).abs() < 1e-6 * 1e3);
        for pt in &g.points {
            if pt.xi < xi_min * 0.999 {
                assert!(pt.w < 0.0);
            } else if pt.xi > xi_min * 1.001 {
                assert!(pt.w > 0.0);
            }
        }
    }
}
