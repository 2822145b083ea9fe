//! Space-time solutions `U(r, t) = e^{αt} f(r e^{-βt})` built on a profile.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Params;
use crate::profile::{self, OrbitClass, ProfileGrid, ProfilePoint};
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kind {
    /// α = α*: support `|x| ≤ ξ0 e^{βt}`.
    CompactSupport,
    /// α > α*: positive everywhere, growing at infinity.
    Global,
}

/// `F = f^{m-1}` and its first two derivatives at a grid node.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Node {
    xi: f64,
    v: f64,
    d1: f64,
    d2: f64,
}

/// Surface measure of the unit sphere in `R^N`: `2 π^{N/2} / Γ(N/2)`.
pub fn sphere_measure(n: u32) -> f64 {
    let h = n as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(h) / statrs::function::gamma::gamma(h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfSimilarSolution {
    pub params: Params,
    pub profile: ProfileGrid,
    pub kind: Kind,
    /// Use the logarithmic far-field law beyond the grid of a global profile.
    pub extrapolate: bool,
    nodes: Vec<Node>,
}

fn node(params: &Params, pt: &ProfilePoint) -> Result<Node> {
    let m = params.m;
    let (df, dw) = profile::rhs_profile(pt, params)?;
    let k = (m - 1.0) / m;
    Ok(Node {
        xi: pt.xi,
        v: pt.f.powf(m - 1.0),
        d1: k * pt.w / pt.f,
        d2: k * (dw / pt.f - pt.w * df / (pt.f * pt.f)),
    })
}

/// Quintic Hermite interpolation between two nodes.
fn hermite(a: &Node, b: &Node, x: f64) -> f64 {
    let h = b.xi - a.xi;
    let s = (x - a.xi) / h;
    let (s2, s3) = (s * s, s * s * s);
    let t = 1.0 - s;
    let (t2, t3) = (t * t, t * t * t);
    // Values, slopes and curvatures at each end, symmetric under s ↔ 1 - s.
    let h0 = t3 * (1.0 + 3.0 * s + 6.0 * s2);
    let h1 = s * t3 * (1.0 + 3.0 * s);
    let h2 = 0.5 * s2 * t3;
    let g0 = s3 * (1.0 + 3.0 * t + 6.0 * t2);
    let g1 = -t * s3 * (1.0 + 3.0 * t);
    let g2 = 0.5 * t2 * s3;
    a.v * h0 + h * a.d1 * h1 + h * h * a.d2 * h2 + b.v * g0 + h * b.d1 * g1 + h * h * b.d2 * g2
}

impl SelfSimilarSolution {
    /// Wraps an interface profile (CompactSupport) or a global profile
    /// integrated past its minimum (Global).
    pub fn new(profile: ProfileGrid) -> Result<Self> {
        let kind = match (profile.classification, profile.xi0, profile.xi_min) {
            (OrbitClass::Interface, Some(_), _) => Kind::CompactSupport,
            (OrbitClass::TurnsUp, _, Some(_)) => Kind::Global,
            (c, _, _) => {
                return Err(Error::WrongRegime {
                    alpha: profile.params.alpha,
                    found: c.to_string(),
                    expected: "Interface or TurnsUp".into(),
                })
            }
        };
        let params = profile.params;
        let nodes = profile
            .points
            .iter()
            .map(|pt| node(&params, pt))
            .collect::<Result<Vec<_>>>()?;
        Ok(SelfSimilarSolution {
            params,
            profile,
            kind,
            extrapolate: true,
            nodes,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.params.alpha
    }

    pub fn beta(&self) -> f64 {
        self.params.beta
    }

    pub fn f0(&self) -> f64 {
        self.profile.f0()
    }

    /// Interface of the profile (CompactSupport only).
    pub fn xi0(&self) -> Option<f64> {
        match self.kind {
            Kind::CompactSupport => self.profile.xi0,
            Kind::Global => None,
        }
    }

    /// Radius of the support at time t (CompactSupport only).
    pub fn support_radius(&self, t: f64) -> Option<f64> {
        self.xi0().map(|x| x * (self.beta() * t).exp())
    }

    /// Minimum of the profile and where it sits (Global only).
    pub fn minimum(&self) -> Option<(f64, f64)> {
        self.profile.xi_min.map(|x| (x, self.profile.min_f()))
    }

    /// The profile f(ξ) for ξ ≥ 0.
    pub fn profile_value(&self, xi: f64) -> Result<f64> {
        let xi = xi.abs();
        let m = self.params.m;
        let first = &self.nodes[0];
        let last = self.nodes.last().expect("nonempty profile");
        if xi <= first.xi {
            return Ok(profile::series_origin(&self.params, self.profile.k, xi)?.f);
        }
        if xi <= last.xi {
            let j = self
                .nodes
                .partition_point(|n| n.xi < xi)
                .clamp(1, self.nodes.len() - 1);
            let v = hermite(&self.nodes[j - 1], &self.nodes[j], xi);
            return Ok(v.max(0.0).powf(1.0 / (m - 1.0)));
        }
        match self.kind {
            Kind::CompactSupport => {
                let xi0 = self.profile.xi0.expect("interface profile");
                Ok(profile::series_interface(&self.params, xi0, xi).f)
            }
            Kind::Global if self.extrapolate => {
                // f = g ξ^{2/(m-1)} with β ξ g' = -g^p, started from the last node.
                let p = self.params.p;
                let ge = self.params.growth_exponent();
                let pt = self.profile.last();
                let g_last = pt.f * pt.xi.powf(-ge);
                let base = g_last.powf(1.0 - p) + (p - 1.0) / self.beta() * (xi / pt.xi).ln();
                Ok(xi.powf(ge) * base.powf(-1.0 / (p - 1.0)))
            }
            Kind::Global => Err(Error::ExtrapolationError { xi, last: last.xi }),
        }
    }

    /// `U(r, t) = e^{αt} f(r e^{-βt})`.
    pub fn eval(&self, r: f64, t: f64) -> Result<f64> {
        Ok((self.alpha() * t).exp() * self.profile_value(r * (-self.beta() * t).exp())?)
    }

    /// The solution built on `f_λ(ξ) = λ f(λ^{-(m-1)/2} ξ)`; equal to a time
    /// shift by `ln λ / α`.
    pub fn rescale(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidInput(format!(
                "lambda must be positive (got {lambda})"
            )));
        }
        let m = self.params.m;
        let sx = lambda.powf((m - 1.0) / 2.0);
        let sw = lambda.powf(m) / sx;
        let mut grid = self.profile.clone();
        for pt in &mut grid.points {
            pt.xi *= sx;
            pt.f *= lambda;
            pt.w *= sw;
        }
        grid.k *= lambda.powf(m - self.params.p);
        grid.xi0 = grid.xi0.map(|x| x * sx);
        grid.xi_min = grid.xi_min.map(|x| x * sx);
        grid.crossing_flux = grid.crossing_flux.map(|w| w * sw);
        let mut out = SelfSimilarSolution::new(grid)?;
        out.extrapolate = self.extrapolate;
        Ok(out)
    }

    /// `∫ U(x, t) dx` over `|x| < radius` (the whole support when `None`).
    pub fn mass(&self, t: f64, radius: Option<f64>, rel_tol: f64) -> Result<f64> {
        let radius = match (radius, self.support_radius(t)) {
            (Some(r), _) => r,
            (None, Some(r)) => r,
            (None, None) => {
                return Err(Error::InvalidInput(
                    "a global solution has infinite mass; pass a radius".into(),
                ))
            }
        };
        let stretch = (self.beta() * t).exp();
        let n = self.params.dim();
        let mut breaks: Vec<f64> = std::iter::once(0.0)
            .chain(self.nodes.iter().step_by(16).map(|nd| nd.xi * stretch))
            .chain(std::iter::once(
                self.nodes.last().expect("nonempty").xi * stretch,
            ))
            .filter(|&r| r < radius)
            .collect();
        breaks.push(radius);
        breaks.dedup();
        let integrand = |r: f64| self.eval(r, t).unwrap_or(f64::NAN) * r.powf(n - 1.0);
        let total: f64 = breaks
            .windows(2)
            .map(|w| quad::integrate(integrand, w[0], w[1], rel_tol, 0.0))
            .sum();
        if !total.is_finite() {
            return Err(Error::ExtrapolationError {
                xi: radius / stretch,
                last: self.nodes.last().expect("nonempty").xi,
            });
        }
        Ok(sphere_measure(self.params.n) * total)
    }

    /// Residual of `U_t = r^{1-N}(r^{N-1}(U^m)_r)_r + r^σ U^p` by centred,
    /// conservative differences with spacing `h` in r and `h` in t, sampled
    /// on an `nr × nt` lattice of the window.
    pub fn pde_residual(
        &self,
        r_range: (f64, f64),
        t_range: (f64, f64),
        h: f64,
        nr: usize,
        nt: usize,
    ) -> Result<ResidualField> {
        let Params { m, p, sigma, .. } = self.params;
        let n = self.params.dim();
        let um = |r: f64, t: f64| self.eval(r, t).map(|u| u.powf(m));
        let lattice = |lo: f64, hi: f64, k: usize, i: usize| {
            if k <= 1 {
                lo
            } else {
                lo + (hi - lo) * i as f64 / (k - 1) as f64
            }
        };
        let mut samples = Vec::with_capacity(nr * nt);
        for it in 0..nt {
            let t = lattice(t_range.0, t_range.1, nt, it);
            for ir in 0..nr {
                let r = lattice(r_range.0, r_range.1, nr, ir);
                let ut = (self.eval(r, t + h)? - self.eval(r, t - h)?) / (2.0 * h);
                let (rp, rm) = (r + 0.5 * h, r - 0.5 * h);
                let gc = um(r, t)?;
                let flux_p = rp.powf(n - 1.0) * (um(r + h, t)? - gc) / h;
                let flux_m = rm.powf(n - 1.0) * (gc - um(r - h, t)?) / h;
                let lap = (flux_p - flux_m) / (h * r.powf(n - 1.0));
                let reaction = r.powf(sigma) * self.eval(r, t)?.powf(p);
                samples.push((r, t, ut - lap - reaction));
            }
        }
        let max = samples.iter().map(|s| s.2.abs()).fold(0.0, f64::max);
        Ok(ResidualField { h, samples, max })
    }

    /// `(t, r, U)` rows over a tensor lattice.
    pub fn table(&self, rs: &[f64], ts: &[f64]) -> Result<Vec<[f64; 3]>> {
        ts.iter()
            .flat_map(|&t| rs.iter().map(move |&r| (t, r)))
            .map(|(t, r)| Ok([t, r, self.eval(r, t)?]))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualField {
    pub h: f64,
    /// `(r, t, residual)`.
    pub samples: Vec<(f64, f64, f64)>,
    pub max: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shooter::{find_alpha_star, global_profile, ShooterOptions};
    use approx::assert_relative_eq;
    use std::sync::OnceLock;

    fn compact() -> &'static SelfSimilarSolution {
        static U: OnceLock<SelfSimilarSolution> = OnceLock::new();
        U.get_or_init(|| {
            let res = find_alpha_star(2.0, 1.5, 3, &ShooterOptions::default()).unwrap();
            SelfSimilarSolution::new(res.profile).unwrap()
        })
    }

    #[test]
    fn sphere_constants() {
        assert_relative_eq!(sphere_measure(1), 2.0, epsilon = 1e-14);
        assert_relative_eq!(
            sphere_measure(2),
            2.0 * std::f64::consts::PI,
            epsilon = 1e-13
        );
        assert_relative_eq!(
            sphere_measure(3),
            4.0 * std::f64::consts::PI,
            epsilon = 1e-13
        );
    }

    #[test]
    fn hermite_reproduces_quintics() {
        let f = |x: f64| 1.0 + x - 2.0 * x.powi(3) + 0.5 * x.powi(5);
        let d1 = |x: f64| 1.0 - 6.0 * x * x + 2.5 * x.powi(4);
        let d2 = |x: f64| -12.0 * x + 10.0 * x.powi(3);
        let nd = |x| Node {
            xi: x,
            v: f(x),
            d1: d1(x),
            d2: d2(x),
        };
        let (a, b) = (nd(0.3), nd(1.1));
        for j in 0..=10 {
            let x = 0.3 + 0.08 * j as f64;
            assert_relative_eq!(hermite(&a, &b, x), f(x), epsilon = 1e-13);
        }
    }

    #[test]
    fn eval_examples() {
        let u = compact();
        assert_relative_eq!(u.eval(0.0, 0.0).unwrap(), 1.0, epsilon = 1e-15);
        let xi0 = u.xi0().unwrap();
        for &t in &[-2.0, 0.0, 3.0] {
            let edge = u.support_radius(t).unwrap();
            assert_eq!(u.eval(2.0 * edge, t).unwrap(), 0.0);
            assert_relative_eq!(edge, xi0 * (u.beta() * t).exp(), max_relative = 1e-15);
            assert_relative_eq!(
                u.eval(0.0, t).unwrap(),
                (u.alpha() * t).exp(),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn profile_is_continuous_across_regions() {
        let u = compact();
        let first = u.profile.points[0].xi;
        let last = u.profile.last().xi;
        for &x in &[first, last] {
            let lo = u.profile_value(x * (1.0 - 1e-12)).unwrap();
            let hi = u.profile_value(x * (1.0 + 1e-12)).unwrap();
            assert!((lo - hi).abs() <= 1e-9 * u.f0(), "{x}: {lo} {hi}");
        }
    }

    #[test]
    fn nonnegative_and_monotone_in_r() {
        let u = compact();
        let xi0 = u.xi0().unwrap();
        let mut prev = f64::INFINITY;
        for j in 0..=2000 {
            let v = u.profile_value(1.2 * xi0 * j as f64 / 2000.0).unwrap();
            assert!(v >= 0.0);
            assert!(v <= prev + 1e-12);
            prev = v;
        }
    }

    #[test]
    fn rescale_identity_and_support() {
        let u = compact();
        let same = u.rescale(1.0).unwrap();
        for &(r, t) in &[(0.0, 0.0), (1.0, 0.5), (3.0, -1.0)] {
            assert_eq!(same.eval(r, t).unwrap(), u.eval(r, t).unwrap());
        }
        let lam = 4.0f64;
        let v = u.rescale(lam).unwrap();
        assert_relative_eq!(
            v.xi0().unwrap(),
            lam.powf(0.5) * u.xi0().unwrap(),
            max_relative = 1e-14
        );
        assert!(u.rescale(0.0).is_err());
    }

    #[test]
    fn mass_grows_exponentially() {
        let u = compact();
        let m0 = u.mass(0.0, None, 1e-11).unwrap();
        assert!(m0 > 0.0 && m0.is_finite());
        let rate = u.alpha() + u.params.dim() * u.beta();
        let mut prev = 0.0;
        for &t in &[-1.0, 0.5, 2.0] {
            let mt = u.mass(t, None, 1e-11).unwrap();
            assert_relative_eq!(mt / m0, (rate * t).exp(), max_relative = 1e-8);
            assert!(mt > prev);
            prev = mt;
        }
    }

    #[test]
    fn global_solution_extension() {
        let q = Params::new(2.0, 1.5, 3, 0.3).unwrap();
        let g = global_profile(&q, 1.0, 100.0, &Default::default()).unwrap();
        let mut u = SelfSimilarSolution::new(g).unwrap();
        assert_eq!(u.kind, Kind::Global);
        let far = u.profile_value(1e4).unwrap();
        assert!(far > u.profile_value(100.0).unwrap());
        assert!(u.mass(0.0, None, 1e-8).is_err());
        assert!(u.mass(0.0, Some(10.0), 1e-8).unwrap() > 0.0);
        u.extrapolate = false;
        assert!(matches!(
            u.profile_value(1e4),
            Err(Error::ExtrapolationError { .. })
        ));
        // Eternal: finite at the origin for times of either sign.
        for &t in &[-50.0 / q.alpha, 50.0 / q.alpha] {
            assert!(u.eval(0.0, t).unwrap().is_finite());
        }
    }

    #[test]
    fn residual_converges_at_second_order() {
        let u = compact();
        let xi0 = u.xi0().unwrap();
        let maxes: Vec<f64> = (0..4)
            .map(|j| {
                let h = 0.04 * xi0 / 2f64.powi(j);
                u.pde_residual((0.2 * xi0, 0.7 * xi0), (0.0, 0.5), h, 11, 3)
                    .unwrap()
                    .max
            })
            .collect();
        for w in maxes.windows(2) {
            assert!(w[0] / w[1] >= 3.5, "{maxes:?}");
        }
    }

    #[test]
    fn wrong_regime_is_rejected() {
        let q = Params::new(2.0, 1.5, 3, 0.01).unwrap();
        let g =
            profile::integrate_profile(&q, 1.0, 1e3, profile::Mode::Record, &Default::default())
                .unwrap();
        assert!(matches!(
            SelfSimilarSolution::new(g),
            Err(Error::WrongRegime { .. })
        ));
    }
}
