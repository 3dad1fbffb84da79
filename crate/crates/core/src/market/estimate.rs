use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::MarketError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarketDomain {
    Finance,
    Employment,
    Education,
}

impl MarketDomain {
    pub const ALL: [MarketDomain; 3] = [MarketDomain::Finance, MarketDomain::Employment, MarketDomain::Education];
}

impl FromStr for MarketDomain {
    type Err = MarketError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "finance" => Ok(MarketDomain::Finance),
            "employment" | "hiring" => Ok(MarketDomain::Employment),
            "education" => Ok(MarketDomain::Education),
            other => Err(MarketError::UnknownDomain(other.to_string())),
        }
    }
}

impl fmt::Display for MarketDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MarketDomain::Finance => "finance",
            MarketDomain::Employment => "employment",
            MarketDomain::Education => "education",
        })
    }
}

/// Yearly application volumes and ad benchmarks for one domain. Rejections
/// are priced like search ads, acceptances like display ads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    pub domain: MarketDomain,
    pub rejected: f64,
    pub accepted: f64,
    pub ctr_search: f64,
    pub ctr_display: f64,
    pub cpc_search: f64,
    pub cpc_display: f64,
}

impl MarketParams {
    /// US benchmark figures per domain.
    pub fn builtin(domain: MarketDomain) -> Self {
        match domain {
            // credit-card applications
            MarketDomain::Finance => Self {
                domain,
                rejected: 15.1e6,
                accepted: 60.4e6,
                ctr_search: 0.0256,
                ctr_display: 0.0052,
                cpc_search: 3.44,
                cpc_display: 0.86,
            },
            // job applications at a single large employer
            MarketDomain::Employment => Self {
                domain,
                rejected: 2.98e6,
                accepted: 20e3,
                ctr_search: 0.0242,
                ctr_display: 0.0059,
                cpc_search: 2.04,
                cpc_display: 0.78,
            },
            // college applications
            MarketDomain::Education => Self {
                domain,
                rejected: 24e6,
                accepted: 33e6,
                ctr_search: 0.0378,
                ctr_display: 0.0053,
                cpc_search: 2.40,
                cpc_display: 0.47,
            },
        }
    }

    fn validate(&self) -> Result<(), MarketError> {
        let counts_ok = self.rejected >= 0.0 && self.accepted >= 0.0;
        let ctr_ok = [self.ctr_search, self.ctr_display].iter().all(|c| (0.0..=1.0).contains(c));
        let cpc_ok = [self.cpc_search, self.cpc_display].iter().all(|c| *c >= 0.0 && c.is_finite());
        if counts_ok && ctr_ok && cpc_ok {
            Ok(())
        } else {
            Err(MarketError::Rates(format!("invalid market parameters for {}", self.domain)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketEstimate {
    pub params: MarketParams,
    pub rejected_revenue: f64,
    pub accepted_revenue: f64,
    pub total_revenue: f64,
}

/// rejected * ctr_search * cpc_search + accepted * ctr_display * cpc_display.
pub fn estimate_market(params: &MarketParams) -> Result<MarketEstimate, MarketError> {
    params.validate()?;
    let rejected_revenue = params.ctr_search * params.cpc_search * params.rejected;
    let accepted_revenue = params.ctr_display * params.cpc_display * params.accepted;
    Ok(MarketEstimate {
        params: params.clone(),
        rejected_revenue,
        accepted_revenue,
        total_revenue: rejected_revenue + accepted_revenue,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn total(domain: MarketDomain) -> MarketEstimate {
        estimate_market(&MarketParams::builtin(domain)).unwrap()
    }

    #[test]
    fn finance_market() {
        let e = total(MarketDomain::Finance);
        assert!((e.rejected_revenue - 1_329_766.4).abs() < 1e-6);
        assert!((e.accepted_revenue - 270_108.8).abs() < 1e-6);
        assert!((e.total_revenue - 1_599_000.0).abs() <= 2_000.0);
    }

    #[test]
    fn employment_market() {
        let e = total(MarketDomain::Employment);
        assert!((e.rejected_revenue - 147_116.64).abs() < 1e-6);
        assert!(e.accepted_revenue < 100.0);
        assert!((e.total_revenue - 147_000.0).abs() <= 2_000.0);
    }

    #[test]
    fn education_market() {
        let e = total(MarketDomain::Education);
        assert!((e.rejected_revenue - 2_177_280.0).abs() < 1e-6);
        assert!((e.accepted_revenue - 82_203.0).abs() < 1e-6);
        assert!((e.total_revenue - 2_259_000.0).abs() <= 2_000.0);
    }

    #[test]
    fn parses_domains() {
        assert_eq!("Finance".parse::<MarketDomain>().unwrap(), MarketDomain::Finance);
        assert!("retail".parse::<MarketDomain>().is_err());
    }

    #[test]
    fn rejects_negative_counts() {
        let p = MarketParams { rejected: -1.0, ..MarketParams::builtin(MarketDomain::Finance) };
        assert!(estimate_market(&p).is_err());
    }
}
