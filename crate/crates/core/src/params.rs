//! Exponent regime and derived constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Validated exponent tuple.
///
/// Only `m`, `p`, `n` and `alpha` are free; `sigma`, `beta` and the
/// criticality constant `l` are always derived, so the identities
/// `σ = -2(p-1)/(m-1)`, `β = (m-1)α/2` and `σ(m-1) + 2(p-1) = 0` hold
/// exactly by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct Params {
    pub m: f64,
    pub p: f64,
    pub n: u32,
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub l: f64,
}

/// On-disk form: only the free exponents, derived fields are recomputed on load.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RawParams {
    pub m: f64,
    pub p: f64,
    #[serde(rename = "N")]
    pub n: u32,
    pub alpha: f64,
}

impl TryFrom<RawParams> for Params {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        Params::new(raw.m, raw.p, raw.n as i64, raw.alpha)
    }
}

impl From<Params> for RawParams {
    fn from(p: Params) -> Self {
        RawParams {
            m: p.m,
            p: p.p,
            n: p.n,
            alpha: p.alpha,
        }
    }
}

/// Checks the exponent range without fixing α.
pub fn validate_exponents(m: f64, p: f64, n: i64) -> Result<()> {
    if !m.is_finite() || !p.is_finite() {
        return Err(Error::RangeViolation("m and p must be finite".into()));
    }
    if m <= 1.0 {
        return Err(Error::RangeViolation(format!("m > 1 violated (m = {m})")));
    }
    if p <= 1.0 || p >= m {
        return Err(Error::RangeViolation(format!(
            "1 < p < m violated (p = {p}, m = {m})"
        )));
    }
    if n < 1 {
        return Err(Error::RangeViolation(format!("N >= 1 violated (N = {n})")));
    }
    if n == 1 && p >= (m + 1.0) / 2.0 {
        return Err(Error::RangeViolation(format!(
            "p < (m+1)/2 violated in dimension N = 1 (p = {p}, (m+1)/2 = {})",
            (m + 1.0) / 2.0
        )));
    }
    Ok(())
}

/// Critical potential exponent σ* = -2(p-1)/(m-1).
pub fn critical_sigma(m: f64, p: f64) -> f64 {
    -2.0 * (p - 1.0) / (m - 1.0)
}

impl Params {
    /// Validates `(m, p, N, α)` and derives σ, β and L.
    pub fn new(m: f64, p: f64, n: i64, alpha: f64) -> Result<Self> {
        validate_exponents(m, p, n)?;
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::RangeViolation(format!(
                "alpha > 0 violated (alpha = {alpha})"
            )));
        }
        let sigma = critical_sigma(m, p);
        let beta = (m - 1.0) * alpha / 2.0;
        // L = σ(m-1) + 2(p-1); evaluated as the exact cancellation it is.
        let l = -2.0 * (p - 1.0) + 2.0 * (p - 1.0);
        Ok(Params {
            m,
            p,
            n: n as u32,
            sigma,
            alpha,
            beta,
            l,
        })
    }

    /// Same exponents, different similarity exponent α.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Params::new(self.m, self.p, self.n as i64, alpha)
    }

    pub fn dim(&self) -> f64 {
        self.n as f64
    }

    /// 2/(m-1), the growth exponent of the far field.
    pub fn growth_exponent(&self) -> f64 {
        2.0 / (self.m - 1.0)
    }

    /// r = (m+p-2)/(m-1), the reaction exponent in phase variables; lies in (1, 2).
    pub fn reaction_exponent(&self) -> f64 {
        (self.m + self.p - 2.0) / (self.m - 1.0)
    }

    /// 2(m-p)/(m-1) = σ + 2, the exponent of the origin correction.
    pub fn origin_exponent(&self) -> f64 {
        2.0 * (self.m - self.p) / (self.m - 1.0)
    }

    /// 1/(p-1).
    pub fn log_exponent(&self) -> f64 {
        1.0 / (self.p - 1.0)
    }

    /// m^{(1-p)/(m-1)}, coefficient of the reaction in phase variables.
    pub fn reaction_coefficient(&self) -> f64 {
        self.m.powf((1.0 - self.p) / (self.m - 1.0))
    }

    /// Structured summary of all exponents.
    pub fn report(&self) -> ExponentReport {
        ExponentReport {
            m: self.m,
            p: self.p,
            n: self.n,
            sigma: self.sigma,
            alpha: self.alpha,
            beta: self.beta,
            l: self.l,
            growth_exponent: self.growth_exponent(),
            reaction_exponent: self.reaction_exponent(),
            origin_exponent: self.origin_exponent(),
            log_exponent: self.log_exponent(),
        }
    }
}

/// Flat record of every exponent used elsewhere in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub m: f64,
    pub p: f64,
    #[serde(rename = "N")]
    pub n: u32,
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "L")]
    pub l: f64,
    /// 2/(m-1)
    pub growth_exponent: f64,
    /// (m+p-2)/(m-1)
    pub reaction_exponent: f64,
    /// 2(m-p)/(m-1)
    pub origin_exponent: f64,
    /// 1/(p-1)
    pub log_exponent: f64,
}

impl std::fmt::Display for ExponentReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "m = {}, p = {}, N = {}", self.m, self.p, self.n)?;
        writeln!(f, "sigma = {}, L = {}", self.sigma, self.l)?;
        writeln!(f, "alpha = {}, beta = {}", self.alpha, self.beta)?;
        writeln!(f, "2/(m-1) = {}", self.growth_exponent)?;
        writeln!(f, "(m+p-2)/(m-1) = {}", self.reaction_exponent)?;
        writeln!(f, "2(m-p)/(m-1) = {}", self.origin_exponent)?;
        write!(f, "1/(p-1) = {}", self.log_exponent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn derives_sigma_and_beta() {
        let p = Params::new(2.0, 1.5, 3, 1.0).unwrap();
        assert_eq!(p.sigma, -1.0);
        assert_eq!(p.beta, 0.5);
        assert_eq!(p.l, 0.0);

        let p = Params::new(3.0, 2.0, 2, 2.0).unwrap();
        assert_eq!(p.sigma, -1.0);
        assert_eq!(p.beta, 2.0);
        assert_eq!(p.l, 0.0);
    }

    #[test]
    fn rejects_out_of_range() {
        let err = Params::new(2.0, 1.8, 1, 1.0).unwrap_err();
        match err {
            Error::RangeViolation(msg) => assert!(msg.contains("p < (m+1)/2"), "{msg}"),
            e => panic!("unexpected {e:?}"),
        }
        assert!(matches!(
            Params::new(1.0, 1.5, 3, 1.0),
            Err(Error::RangeViolation(m)) if m.contains("m > 1")
        ));
        assert!(matches!(
            Params::new(2.0, 2.5, 3, 1.0),
            Err(Error::RangeViolation(m)) if m.contains("1 < p < m")
        ));
        assert!(matches!(
            Params::new(2.0, 1.5, 0, 1.0),
            Err(Error::RangeViolation(m)) if m.contains("N >= 1")
        ));
        assert!(matches!(
            Params::new(2.0, 1.5, 3, 0.0),
            Err(Error::RangeViolation(m)) if m.contains("alpha > 0")
        ));
        assert!(Params::new(f64::NAN, 1.5, 3, 1.0).is_err());
    }

    #[test]
    fn report_exponents() {
        let r = Params::new(2.0, 1.5, 3, 1.0).unwrap().report();
        assert_eq!(r.reaction_exponent, 1.5);
        assert_eq!(r.origin_exponent, 1.0);
        let r = Params::new(3.0, 2.0, 2, 2.0).unwrap().report();
        assert_eq!(r.growth_exponent, 1.0);
        let text = r.to_string();
        assert!(text.contains("2/(m-1) = 1"));
    }

    #[test]
    fn json_recomputes_derived_fields() {
        let p = Params::new(2.0, 1.5, 3, 1.0).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"m":2.0,"p":1.5,"N":3,"alpha":1.0}"#);
        let back: Params = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        // Derived fields on disk are ignored, bad ranges are rejected.
        let tampered = r#"{"m":2.0,"p":1.5,"N":3,"alpha":1.0,"beta":7.0}"#;
        let back: Params = serde_json::from_str(tampered).unwrap();
        assert_eq!(back.beta, 0.5);
        assert!(serde_json::from_str::<Params>(r#"{"m":2.0,"p":1.8,"N":1,"alpha":1.0}"#).is_err());
    }

    proptest! {
        #[test]
        fn valid_params_satisfy_identities(
            m in 1.05f64..6.0,
            frac in 0.02f64..0.98,
            n in 1i64..7,
            alpha in 1e-3f64..1e3,
        ) {
            let p = 1.0 + frac * (m - 1.0);
            let res = Params::new(m, p, n, alpha);
            if n == 1 && p >= (m + 1.0) / 2.0 {
                prop_assert!(res.is_err());
            } else {
                let q = res.unwrap();
                prop_assert_eq!(q.l, 0.0);
                prop_assert!(q.sigma > -2.0 && q.sigma < 0.0);
                prop_assert!((q.alpha - 2.0 * q.beta / (q.m - 1.0)).abs() <= 1e-14 * q.alpha);
                let r = q.reaction_exponent();
                prop_assert!(r > 1.0 && r < 2.0);
                prop_assert_eq!(Params::new(m, p, n, alpha).unwrap(), q);
            }
        }
    }
}
