//! Campaign files: one `[[advertiser]]` table per advertiser.
//!
//! ```toml
//! [[advertiser]]
//! id = "credit-coach"
//! keywords = ["Telephone"]          # exact feature-name matches
//! themes = ["credit repair"]        # broad matches on feature themes
//! contexts = ["finance"]            # empty or omitted: any context
//! valence = "negative"              # negative | positive | any
//! budget = 250.0                    # omitted: unlimited
//! bids = { Telephone = 4.10, "credit repair" = 2.75 }
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;

use super::{Advertiser, Campaign, Registry, ValenceFilter};
use crate::error::ExchangeError;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CampaignFile {
    #[serde(default)]
    advertiser: Vec<AdvertiserEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AdvertiserEntry {
    id: String,
    #[serde(default)]
    keywords: BTreeSet<String>,
    #[serde(default)]
    themes: BTreeSet<String>,
    #[serde(default)]
    contexts: BTreeSet<String>,
    #[serde(default)]
    valence: ValenceFilter,
    bids: BTreeMap<String, f64>,
    budget: Option<f64>,
}

/// Parses and registers every advertiser in file order.
pub fn parse_campaigns(text: &str) -> Result<Registry, ExchangeError> {
    let file: CampaignFile = toml::from_str(text).map_err(|e| ExchangeError::Config(e.to_string()))?;
    let mut registry = Registry::new();
    for e in file.advertiser {
        registry.register(Advertiser {
            id: e.id,
            campaign: Campaign {
                keywords: e.keywords,
                themes: e.themes,
                contexts: e.contexts,
                valence: e.valence,
            },
            bids: e.bids,
            budget: e.budget,
        })?;
    }
    Ok(registry)
}

pub fn load_campaigns(path: &Path) -> Result<Registry, ExchangeError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ExchangeError::Config(format!("{}: {e}", path.display())))?;
    parse_campaigns(&text).map_err(|e| match e {
        ExchangeError::Config(m) => ExchangeError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_example() {
        let r = parse_campaigns(
            r#"
            [[advertiser]]
            id = "credit-coach"
            keywords = ["Telephone"]
            themes = ["credit repair"]
            contexts = ["finance"]
            valence = "negative"
            budget = 250.0
            bids = { Telephone = 4.10, "credit repair" = 2.75 }

            [[advertiser]]
            id = "any"
            themes = ["banking"]
            bids = { banking = 1.0 }
            "#,
        )
        .unwrap();
        assert_eq!(r.len(), 2);
        let a = r.get("credit-coach").unwrap();
        assert_eq!(a.campaign.valence, ValenceFilter::Negative);
        assert_eq!(a.budget, Some(250.0));
        assert_eq!(r.get("any").unwrap().campaign.valence, ValenceFilter::Any);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_campaigns("[[advertiser]]\nid = \"a\"\nbids = {}\nbudgett = 3.0\n").unwrap_err();
        assert!(err.to_string().contains("budgett"), "{err}");
    }

    #[test]
    fn missing_price_is_rejected() {
        let err = parse_campaigns("[[advertiser]]\nid = \"a\"\nkeywords = [\"X\"]\nbids = {}\n").unwrap_err();
        assert!(matches!(err, ExchangeError::InvalidAdvertiser { .. }));
    }
}
