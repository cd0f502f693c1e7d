//! Declarative data fetchers: one HTTP GET per rule, an extractor applied
//! to the body, and the raw text parsed into the rule's type.

use std::collections::BTreeMap;
use std::str::FromStr;
use std::time::Duration;

use osc_core::sdl::{
    Currency, Extractor, FetchRule, Money, PropertyType, ServiceDescription, TypedValue, Unit,
};
use osc_core::Decimal;
use thiserror::Error;
use url::Url;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);
pub const DEFAULT_MAX_BODY: u64 = 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FetchError {
    #[error("host of `{0}` is not on the fetch allowlist")]
    NotAllowed(String),
    #[error("invalid url `{0}`")]
    BadUrl(String),
    #[error("request failed: {0}")]
    Network(String),
    #[error("server answered with status {0}")]
    Status(u16),
    #[error("no match")]
    NoMatch,
    #[error("invalid extractor: {0}")]
    BadExtractor(String),
    #[error("cannot parse `{raw}` as {ty}: {reason}")]
    Parse {
        raw: String,
        ty: String,
        reason: String,
    },
}

/// Hosts the evaluator may contact. Entries are `host`, `host:port` or
/// `*.domain` (any subdomain of `domain`, not the domain itself). An empty
/// list permits nothing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Allowlist {
    entries: Vec<String>,
}

impl Allowlist {
    pub fn new<S: AsRef<str>>(entries: impl IntoIterator<Item = S>) -> Self {
        Allowlist {
            entries: entries
                .into_iter()
                .map(|e| e.as_ref().trim().to_ascii_lowercase())
                .filter(|e| !e.is_empty())
                .collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn permits(&self, url: &str) -> Result<Url, FetchError> {
        let parsed = Url::parse(url).map_err(|_| FetchError::BadUrl(url.into()))?;
        if !matches!(parsed.scheme(), "http" | "https") {
            return Err(FetchError::BadUrl(url.into()));
        }
        let host = parsed
            .host_str()
            .ok_or_else(|| FetchError::BadUrl(url.into()))?
            .to_ascii_lowercase();
        let port = parsed.port_or_known_default().unwrap_or(0);
        let with_port = format!("{host}:{port}");
        let allowed = self.entries.iter().any(|e| {
            if let Some(domain) = e.strip_prefix("*.") {
                host.ends_with(&format!(".{domain}"))
            } else {
                *e == host || *e == with_port
            }
        });
        if allowed {
            Ok(parsed)
        } else {
            Err(FetchError::NotAllowed(url.into()))
        }
    }
}

/// Minimal HTTP capability, so tests can substitute canned responses.
pub trait HttpClient: Send + Sync {
    fn get(&self, url: &Url) -> Result<String, FetchError>;
}

/// Blocking client with a global timeout, a body cap and no redirects
/// (a redirect could leave the allowlist).
pub struct UreqClient {
    agent: ureq::Agent,
    max_body: u64,
}

impl UreqClient {
    pub fn new(timeout: Duration, max_body: u64) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .max_redirects(0)
            .http_status_as_error(false)
            .build()
            .into();
        UreqClient { agent, max_body }
    }
}

impl Default for UreqClient {
    fn default() -> Self {
        UreqClient::new(DEFAULT_TIMEOUT, DEFAULT_MAX_BODY)
    }
}

impl HttpClient for UreqClient {
    fn get(&self, url: &Url) -> Result<String, FetchError> {
        let mut response = self
            .agent
            .get(url.as_str())
            .call()
            .map_err(|e| FetchError::Network(e.to_string()))?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(FetchError::Status(status));
        }
        response
            .body_mut()
            .with_config()
            .limit(self.max_body)
            .read_to_string()
            .map_err(|e| FetchError::Network(e.to_string()))
    }
}

pub fn extract(extractor: &Extractor, body: &str) -> Result<String, FetchError> {
    match extractor {
        Extractor::JsonPointer(pointer) => {
            let doc: serde_json::Value = serde_json::from_str(body)
                .map_err(|e| FetchError::Network(format!("body is not JSON: {e}")))?;
            match doc.pointer(pointer) {
                Some(serde_json::Value::String(s)) => Ok(s.clone()),
                Some(serde_json::Value::Number(n)) => Ok(n.to_string()),
                Some(serde_json::Value::Bool(b)) => Ok(b.to_string()),
                _ => Err(FetchError::NoMatch),
            }
        }
        Extractor::Regex(pattern) => {
            let re =
                regex::Regex::new(pattern).map_err(|e| FetchError::BadExtractor(e.to_string()))?;
            re.captures(body)
                .and_then(|c| c.get(1))
                .map(|m| m.as_str().to_string())
                .ok_or(FetchError::NoMatch)
        }
        Extractor::Css(selector) => {
            let sel = scraper::Selector::parse(selector)
                .map_err(|e| FetchError::BadExtractor(e.to_string()))?;
            let html = scraper::Html::parse_document(body);
            html.select(&sel)
                .next()
                .map(|el| el.text().collect::<String>().trim().to_string())
                .ok_or(FetchError::NoMatch)
        }
    }
}

fn parse_error(raw: &str, ty: &PropertyType, reason: impl Into<String>) -> FetchError {
    FetchError::Parse {
        raw: raw.into(),
        ty: ty.to_string(),
        reason: reason.into(),
    }
}

fn decimal(raw: &str, text: &str, ty: &PropertyType) -> Result<Decimal, FetchError> {
    Decimal::from_str(text).map_err(|_| parse_error(raw, ty, "not a decimal number"))
}

/// Parses extracted text as a value of `ty`. Money without a currency code
/// takes `fallback_currency`; a quantity without a unit takes the declared
/// unit.
pub fn parse_raw(
    raw: &str,
    ty: &PropertyType,
    fallback_currency: Option<&Currency>,
) -> Result<TypedValue, FetchError> {
    let text = raw.trim();
    let mut parts = text.split_whitespace();
    let (first, second, rest) = (parts.next(), parts.next(), parts.next());
    match ty {
        PropertyType::String => Ok(TypedValue::String(text.into())),
        PropertyType::Text => Ok(TypedValue::Text(text.into())),
        PropertyType::Url => {
            if osc_core::sdl::is_http_url(text) {
                Ok(TypedValue::Url(text.into()))
            } else {
                Err(parse_error(raw, ty, "not an http(s) url"))
            }
        }
        PropertyType::Boolean => match text {
            "true" => Ok(TypedValue::Bool(true)),
            "false" => Ok(TypedValue::Bool(false)),
            _ => Err(parse_error(raw, ty, "expected true or false")),
        },
        PropertyType::Integer => text
            .parse::<i64>()
            .map(TypedValue::Integer)
            .map_err(|_| parse_error(raw, ty, "not an integer")),
        PropertyType::Decimal => decimal(raw, text, ty).map(TypedValue::Decimal),
        PropertyType::Money => {
            let (Some(amount), None) = (first, rest) else {
                return Err(parse_error(raw, ty, "expected `<amount> [currency]`"));
            };
            let amount = decimal(raw, amount, ty)?;
            if amount.scale() > osc_core::sdl::MONEY_DIGITS {
                return Err(parse_error(raw, ty, "more than 4 fractional digits"));
            }
            let currency = match second {
                Some(code) => Currency::new(code)
                    .ok_or_else(|| parse_error(raw, ty, "unknown currency code"))?,
                None => fallback_currency
                    .cloned()
                    .ok_or_else(|| parse_error(raw, ty, "no currency given"))?,
            };
            Ok(TypedValue::Money(Money::new(amount, currency)))
        }
        PropertyType::Quantity(declared) => {
            let (Some(magnitude), None) = (first, rest) else {
                return Err(parse_error(raw, ty, "expected `<number> [unit]`"));
            };
            let magnitude = decimal(raw, magnitude, ty)?;
            let unit = match second {
                Some(sym) => {
                    Unit::from_symbol(sym).ok_or_else(|| parse_error(raw, ty, "unknown unit"))?
                }
                None => *declared,
            };
            Ok(TypedValue::Quantity { magnitude, unit })
        }
        PropertyType::Enum(_) => Ok(TypedValue::Enum(text.into())),
        PropertyType::Features(_) => Err(parse_error(raw, ty, "feature lists cannot be fetched")),
    }
}

/// One successfully fetched raw value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fetched {
    pub raw: String,
    pub fetched_at: String,
}

/// Result of running every fetch rule of a description.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FetchOutcome {
    /// Raw values by target property.
    pub snapshot: BTreeMap<String, Fetched>,
    /// Failed rules by target property.
    pub errors: BTreeMap<String, FetchError>,
}

pub fn run_rule(
    rule: &FetchRule,
    client: &dyn HttpClient,
    allowlist: &Allowlist,
) -> Result<String, FetchError> {
    let url = allowlist.permits(&rule.url)?;
    let body = client.get(&url)?;
    extract(&rule.extractor, &body)
}

/// Runs every rule; a failing rule does not affect the others. Values are
/// typed later, when they are applied to the description.
pub fn run_fetchers(
    desc: &ServiceDescription,
    client: &dyn HttpClient,
    allowlist: &Allowlist,
) -> FetchOutcome {
    let mut out = FetchOutcome::default();
    for rule in &desc.fetch_rules {
        let now = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true);
        match run_rule(rule, client, allowlist) {
            Ok(raw) => {
                out.snapshot.insert(
                    rule.target.clone(),
                    Fetched {
                        raw,
                        fetched_at: now,
                    },
                );
            }
            Err(e) => {
                out.errors.insert(rule.target.clone(), e);
            }
        }
    }
    out
}
