//! Recursive-descent parser for vocabularies and service descriptions.
//!
//! Syntax errors abort the parse; semantic problems that do not disturb the
//! token stream (duplicates, out-of-range values, unknown units) are
//! collected so one run reports as many of them as possible.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::str::FromStr;

use rust_decimal::Decimal;

use super::ast::*;
use super::error::{Origin, ParseError};
use super::lexer::{tokenize, Spanned, Token};
use super::units::Unit;
use crate::pricing::{PerUnitPrice, Period, PriceComponent, TierBand, TierMode, TierSchedule};

type PResult<T> = Result<T, ParseError>;

/// Largest number of fractional digits a money amount may carry.
pub const MONEY_DIGITS: u32 = 4;

pub fn is_ident(word: &str) -> bool {
    let mut chars = word.chars();
    chars.next().is_some_and(|c| c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

/// Enum members and feature names may also use uppercase letters
/// (`DE`, `ISO27001`).
pub fn is_member_name(word: &str) -> bool {
    let mut chars = word.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub fn parse_document(src: &str) -> Result<Document, Vec<ParseError>> {
    let mut p = Parser::new(src)?;
    let result = p.document();
    p.finish(result)
}

/// Parses a source holding exactly one vocabulary.
pub fn parse_vocabulary(src: &str) -> Result<Vocabulary, Vec<ParseError>> {
    let mut p = Parser::new(src)?;
    let result = p.vocabulary().and_then(|v| p.expect_eof().map(|_| v));
    p.finish(result)
}

/// Parses a source holding exactly one service description.
pub fn parse_service(src: &str) -> Result<ServiceDescription, Vec<ParseError>> {
    let mut p = Parser::new(src)?;
    let result = p.service().and_then(|s| p.expect_eof().map(|_| s));
    p.finish(result)
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
    errors: Vec<ParseError>,
}

impl Parser {
    fn new(src: &str) -> Result<Self, Vec<ParseError>> {
        let tokens = tokenize(src).map_err(|e| alloc::vec![e])?;
        Ok(Parser {
            tokens,
            pos: 0,
            errors: Vec::new(),
        })
    }

    fn finish<T>(mut self, result: PResult<T>) -> Result<T, Vec<ParseError>> {
        match result {
            Ok(value) if self.errors.is_empty() => Ok(value),
            Ok(_) => Err(self.errors),
            Err(fatal) => {
                self.errors.push(fatal);
                Err(self.errors)
            }
        }
    }

    fn peek(&self) -> &Spanned {
        &self.tokens[self.pos]
    }

    fn origin(&self) -> Origin {
        self.peek().origin
    }

    fn advance(&mut self) -> Spanned {
        let t = self.tokens[self.pos].clone();
        if !matches!(t.token, Token::Eof) {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        let t = self.peek();
        ParseError::error(
            t.origin,
            format!("expected {expected}, found {}", t.token.describe()),
        )
    }

    fn at_word(&self, word: &str) -> bool {
        matches!(&self.peek().token, Token::Word(w) if w == word)
    }

    fn at_punct(&self, c: char) -> bool {
        self.peek().token == Token::Punct(c)
    }

    fn eat_word(&mut self, word: &str) -> bool {
        if self.at_word(word) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if self.at_punct(c) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_word(&mut self, word: &str) -> PResult<Origin> {
        if self.at_word(word) {
            Ok(self.advance().origin)
        } else {
            Err(self.unexpected(&format!("'{word}'")))
        }
    }

    fn expect_punct(&mut self, c: char) -> PResult<Origin> {
        if self.at_punct(c) {
            Ok(self.advance().origin)
        } else {
            Err(self.unexpected(&format!("'{c}'")))
        }
    }

    fn expect_eof(&mut self) -> PResult<()> {
        if matches!(self.peek().token, Token::Eof) {
            Ok(())
        } else {
            Err(self.unexpected("end of input"))
        }
    }

    fn word(&mut self, what: &str) -> PResult<(String, Origin)> {
        match &self.peek().token {
            Token::Word(w) => {
                let w = w.clone();
                Ok((w, self.advance().origin))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, Origin)> {
        let (w, at) = self.word(what)?;
        if !is_ident(&w) {
            return Err(ParseError::error(
                at,
                format!("invalid {what} '{w}': identifiers match [a-z][a-z0-9_]*"),
            ));
        }
        Ok((w, at))
    }

    fn member(&mut self, what: &str) -> PResult<(String, Origin)> {
        let (w, at) = self.word(what)?;
        if !is_member_name(&w) {
            return Err(ParseError::error(at, format!("invalid {what} '{w}'")));
        }
        Ok((w, at))
    }

    fn string(&mut self, what: &str) -> PResult<String> {
        match &self.peek().token {
            Token::Str(s) => {
                let s = s.clone();
                self.advance();
                Ok(s)
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn number(&mut self, what: &str) -> PResult<(Decimal, Origin)> {
        let t = self.peek().clone();
        match &t.token {
            Token::Int(n) | Token::Decimal(n) => {
                self.advance();
                let d = Decimal::from_str_exact(n).map_err(|_| {
                    ParseError::error(t.origin, format!("number {n} is out of range"))
                })?;
                Ok((d, t.origin))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn error(&mut self, at: Origin, message: String) {
        self.errors.push(ParseError::error(at, message));
    }

    // ---- documents -------------------------------------------------------

    fn document(&mut self) -> PResult<Document> {
        let mut doc = Document::default();
        loop {
            if self.at_word("vocabulary") {
                doc.vocabularies.push(self.vocabulary()?);
            } else if self.at_word("service") {
                doc.services.push(self.service()?);
            } else if matches!(self.peek().token, Token::Eof) {
                return Ok(doc);
            } else {
                return Err(self.unexpected("'vocabulary' or 'service'"));
            }
        }
    }

    // ---- vocabularies ----------------------------------------------------

    fn vocabulary(&mut self) -> PResult<Vocabulary> {
        let origin = self.expect_word("vocabulary")?;
        let (id, _) = self.ident("vocabulary name")?;
        self.expect_punct('{')?;
        let mut vocab = Vocabulary {
            id,
            feature_sets: Vec::new(),
            properties: Vec::new(),
            origin,
        };
        while !self.eat_punct('}') {
            if self.at_word("features") {
                let set = self.feature_set()?;
                if vocab.feature_set(&set.name).is_some() {
                    self.error(set.origin, format!("duplicate feature set `{}`", set.name));
                }
                vocab.feature_sets.push(set);
            } else if self.at_word("property") {
                let prop = self.property()?;
                if vocab.property(&prop.name).is_some() {
                    self.error(prop.origin, format!("duplicate property `{}`", prop.name));
                }
                vocab.properties.push(prop);
            } else {
                return Err(self.unexpected("'property', 'features' or '}'"));
            }
        }
        for prop in &vocab.properties {
            if let PropertyType::Features(set) = &prop.ty {
                if vocab.feature_set(set).is_none() {
                    self.errors.push(ParseError::error(
                        prop.origin,
                        format!(
                            "property `{}` references undeclared feature set `{set}`",
                            prop.name
                        ),
                    ));
                }
            }
        }
        Ok(vocab)
    }

    fn feature_set(&mut self) -> PResult<FeatureSet> {
        self.expect_word("features")?;
        let (name, origin) = self.ident("feature set name")?;
        self.expect_punct('{')?;
        let mut features: Vec<String> = Vec::new();
        loop {
            let (f, at) = self.member("feature name")?;
            if features.contains(&f) {
                self.error(at, format!("duplicate feature `{f}` in set `{name}`"));
            }
            features.push(f);
            if self.eat_punct('}') {
                break;
            }
        }
        Ok(FeatureSet {
            name,
            features,
            origin,
        })
    }

    fn property(&mut self) -> PResult<PropertyDef> {
        self.expect_word("property")?;
        let (name, origin) = self.ident("property name")?;
        self.expect_punct(':')?;
        let ty = self.property_type()?;
        self.expect_punct('{')?;
        let mut doc = None;
        let mut relevance = None;
        let mut importance = None;
        let mut importance_invalid = false;
        while !self.eat_punct('}') {
            let at = self.origin();
            let (meta, _) = self.word("'doc', 'relevance', 'importance' or '}'")?;
            match meta.as_str() {
                "doc" => {
                    let text = self.string("documentation string")?;
                    if doc.replace(text).is_some() {
                        self.error(at, format!("duplicate doc for property `{name}`"));
                    }
                }
                "relevance" => {
                    let text = self.string("relevance string")?;
                    if relevance.replace(text).is_some() {
                        self.error(at, format!("duplicate relevance for property `{name}`"));
                    }
                }
                "importance" => {
                    let (value, value_at) = self.number("importance 1..5")?;
                    let level = if value.fract().is_zero()
                        && value >= Decimal::ONE
                        && value <= Decimal::from(5)
                    {
                        u8::try_from(value.mantissa() / 10i128.pow(value.scale())).ok()
                    } else {
                        None
                    };
                    match level {
                        Some(level) => {
                            if importance.replace(level).is_some() {
                                self.error(
                                    at,
                                    format!("duplicate importance for property `{name}`"),
                                );
                            }
                        }
                        None => {
                            importance_invalid = true;
                            self.error(value_at, "importance must be 1..5".into());
                        }
                    }
                }
                other => {
                    return Err(ParseError::error(
                        at,
                        format!(
                            "expected 'doc', 'relevance', 'importance' or '}}', found '{other}'"
                        ),
                    ))
                }
            }
        }
        let doc = doc.unwrap_or_default();
        if doc.trim().is_empty() {
            self.error(origin, format!("property `{name}` needs a non-empty doc"));
        }
        let importance = match importance {
            Some(i) => i,
            None => {
                if !importance_invalid {
                    self.error(origin, format!("property `{name}` needs an importance"));
                }
                3
            }
        };
        Ok(PropertyDef {
            name,
            ty,
            doc,
            relevance: relevance.unwrap_or_default(),
            importance,
            origin,
        })
    }

    fn property_type(&mut self) -> PResult<PropertyType> {
        let (word, at) = self.word("type")?;
        Ok(match word.as_str() {
            "string" => PropertyType::String,
            "text" => PropertyType::Text,
            "boolean" => PropertyType::Boolean,
            "integer" => PropertyType::Integer,
            "decimal" => PropertyType::Decimal,
            "money" => PropertyType::Money,
            "url" => PropertyType::Url,
            "quantity" => {
                self.expect_punct('<')?;
                let (symbol, unit_at) = self.word("unit")?;
                self.expect_punct('>')?;
                match Unit::from_symbol(&symbol) {
                    Some(unit) => PropertyType::Quantity(unit),
                    None => {
                        self.error(unit_at, format!("unknown unit `{symbol}`"));
                        PropertyType::Quantity(Unit::Gigabyte)
                    }
                }
            }
            "enum" => {
                self.expect_punct('(')?;
                let mut members: Vec<String> = Vec::new();
                loop {
                    let (m, m_at) = self.member("enum member")?;
                    if members.contains(&m) {
                        self.error(m_at, format!("duplicate enum member `{m}`"));
                    }
                    members.push(m);
                    if self.eat_punct(')') {
                        break;
                    }
                    self.expect_punct(',')?;
                }
                PropertyType::Enum(members)
            }
            "features" => {
                self.expect_punct('(')?;
                let (set, _) = self.ident("feature set name")?;
                self.expect_punct(')')?;
                PropertyType::Features(set)
            }
            other => {
                return Err(ParseError::error(at, format!("unknown type `{other}`")));
            }
        })
    }

    // ---- services --------------------------------------------------------

    fn service(&mut self) -> PResult<ServiceDescription> {
        let origin = self.expect_word("service")?;
        let (id, _) = self.ident("service name")?;
        self.expect_word("uses")?;
        let (vocabulary_id, _) = self.ident("vocabulary name")?;
        self.expect_punct('{')?;
        let mut service = ServiceDescription {
            id,
            vocabulary_id,
            assignments: Vec::new(),
            dimensions: Vec::new(),
            exclusions: Vec::new(),
            prices: Vec::new(),
            fetch_rules: Vec::new(),
            origin,
        };
        while !self.eat_punct('}') {
            if self.at_word("set") {
                let a = self.assignment()?;
                self.check_unique_assignment(&service.assignments, &a);
                service.assignments.push(a);
            } else if self.at_word("dimension") {
                let d = self.dimension()?;
                if service.dimension(&d.name).is_some() {
                    self.error(d.origin, format!("duplicate dimension `{}`", d.name));
                }
                service.dimensions.push(d);
            } else if self.at_word("exclude") {
                service.exclusions.push(self.exclusion()?);
            } else if self.at_word("price") {
                service.prices.push(self.price()?);
            } else if self.at_word("fetch") {
                service.fetch_rules.push(self.fetch()?);
            } else {
                return Err(
                    self.unexpected("'set', 'dimension', 'exclude', 'price', 'fetch' or '}'")
                );
            }
        }
        Ok(service)
    }

    fn check_unique_assignment(&mut self, existing: &[Assignment], a: &Assignment) {
        if existing.iter().any(|e| e.property == a.property) {
            self.error(
                a.origin,
                format!("property `{}` is assigned more than once", a.property),
            );
        }
    }

    fn assignment(&mut self) -> PResult<Assignment> {
        let origin = self.expect_word("set")?;
        let (property, _) = self.ident("property name")?;
        let value = self.value()?;
        Ok(Assignment {
            property,
            value,
            origin,
        })
    }

    fn value(&mut self) -> PResult<TypedValue> {
        let t = self.peek().clone();
        match &t.token {
            Token::Str(s) => {
                self.advance();
                Ok(TypedValue::String(s.clone()))
            }
            Token::Url(u) => {
                self.advance();
                Ok(TypedValue::Url(u.clone()))
            }
            Token::Int(_) | Token::Decimal(_) => {
                let is_int = matches!(t.token, Token::Int(_));
                let (n, at) = self.number("value")?;
                if let Token::Word(w) = &self.peek().token {
                    if let Some(unit) = Unit::from_symbol(w) {
                        self.advance();
                        return Ok(TypedValue::Quantity { magnitude: n, unit });
                    }
                    if is_currency_code(w) {
                        let currency = Currency::new(w).expect("checked code");
                        self.advance();
                        self.check_money_digits(n, at);
                        return Ok(TypedValue::Money(Money::new(n, currency)));
                    }
                }
                if is_int {
                    match i64::try_from(n.mantissa()) {
                        Ok(i) => Ok(TypedValue::Integer(i)),
                        Err(_) => Err(ParseError::error(at, "integer out of range")),
                    }
                } else {
                    Ok(TypedValue::Decimal(n))
                }
            }
            Token::Word(w) if w == "true" || w == "false" => {
                self.advance();
                Ok(TypedValue::Bool(w == "true"))
            }
            Token::Word(_) => {
                let (m, _) = self.member("value")?;
                Ok(TypedValue::Enum(m))
            }
            Token::Punct('[') => {
                self.advance();
                let mut features = BTreeSet::new();
                if !self.eat_punct(']') {
                    loop {
                        let (f, at) = self.member("feature name")?;
                        if !features.insert(f.clone()) {
                            self.error(at, format!("feature `{f}` listed twice"));
                        }
                        if self.eat_punct(']') {
                            break;
                        }
                        self.expect_punct(',')?;
                    }
                }
                Ok(TypedValue::Features(features))
            }
            _ => Err(self.unexpected("value")),
        }
    }

    fn check_money_digits(&mut self, amount: Decimal, at: Origin) {
        if amount.normalize().scale() > MONEY_DIGITS {
            self.error(
                at,
                format!("money amounts allow at most {MONEY_DIGITS} fractional digits"),
            );
        }
    }

    fn dimension(&mut self) -> PResult<Dimension> {
        let origin = self.expect_word("dimension")?;
        let (name, _) = self.ident("dimension name")?;
        self.expect_punct('{')?;
        let mut options: Vec<VariantOption> = Vec::new();
        while !self.eat_punct('}') {
            let o = self.option()?;
            if options.iter().any(|e| e.id == o.id) {
                self.error(
                    o.origin,
                    format!("duplicate option `{}` in dimension `{name}`", o.id),
                );
            }
            options.push(o);
        }
        if options.is_empty() {
            self.error(
                origin,
                format!("dimension `{name}` needs at least one option"),
            );
        }
        Ok(Dimension {
            name,
            options,
            origin,
        })
    }

    fn option(&mut self) -> PResult<VariantOption> {
        if !self.at_word("option") {
            return Err(self.unexpected("'option' or '}'"));
        }
        let origin = self.expect_word("option")?;
        let (id, _) = self.ident("option name")?;
        self.expect_punct('{')?;
        let mut option = VariantOption {
            id,
            assignments: Vec::new(),
            prices: Vec::new(),
            origin,
        };
        while !self.eat_punct('}') {
            if self.at_word("set") {
                let a = self.assignment()?;
                self.check_unique_assignment(&option.assignments, &a);
                option.assignments.push(a);
            } else if self.at_word("price") {
                option.prices.push(self.price()?);
            } else {
                return Err(self.unexpected("'set', 'price' or '}'"));
            }
        }
        Ok(option)
    }

    fn exclusion(&mut self) -> PResult<Exclusion> {
        let origin = self.expect_word("exclude")?;
        self.expect_punct('{')?;
        let mut bindings = Vec::new();
        loop {
            let (dimension, _) = self.ident("dimension name")?;
            self.expect_punct('=')?;
            let (option, _) = self.ident("option name")?;
            bindings.push((dimension, option));
            if self.eat_punct('}') {
                break;
            }
        }
        Ok(Exclusion { bindings, origin })
    }

    // ---- prices ----------------------------------------------------------

    fn money(&mut self) -> PResult<Money> {
        let (amount, at) = self.number("amount")?;
        let (code, code_at) = self.word("currency code")?;
        let currency = Currency::new(&code).ok_or_else(|| {
            ParseError::error(code_at, format!("expected currency code, found '{code}'"))
        })?;
        self.check_money_digits(amount, at);
        if amount.is_sign_negative() && !amount.is_zero() {
            self.error(at, "prices must not be negative".into());
        }
        Ok(Money::new(amount, currency))
    }

    fn period(&mut self) -> PResult<Period> {
        self.expect_word("per")?;
        let (w, at) = self.word("'hour', 'month' or 'year'")?;
        Period::parse(&w).ok_or_else(|| {
            ParseError::error(
                at,
                format!("expected 'hour', 'month' or 'year', found '{w}'"),
            )
        })
    }

    fn price(&mut self) -> PResult<PriceComponent> {
        self.expect_word("price")?;
        let (kind, at) = self.word("'fixed', 'one_time' or 'per_unit'")?;
        match kind.as_str() {
            "fixed" => {
                let amount = self.money()?;
                let period = self.period()?;
                Ok(PriceComponent::Fixed { amount, period })
            }
            "one_time" => Ok(PriceComponent::OneTime {
                amount: self.money()?,
            }),
            "per_unit" => {
                let (metric, _) = self.ident("metric name")?;
                let unit_price = self.money()?;
                let period = self.period()?;
                let mut included = Decimal::ZERO;
                if self.eat_word("included") {
                    let (q, q_at) = self.number("included quantity")?;
                    if q.is_sign_negative() && !q.is_zero() {
                        self.error(q_at, "included quantity must not be negative".into());
                    }
                    included = q;
                }
                let tiers = if self.at_word("tiers") {
                    Some(self.tiers(&unit_price.currency)?)
                } else {
                    None
                };
                Ok(PriceComponent::PerUnit(PerUnitPrice {
                    metric,
                    unit_price,
                    period,
                    included,
                    tiers,
                }))
            }
            other => Err(ParseError::error(
                at,
                format!("expected 'fixed', 'one_time' or 'per_unit', found '{other}'"),
            )),
        }
    }

    fn tiers(&mut self, currency: &Currency) -> PResult<TierSchedule> {
        let origin = self.expect_word("tiers")?;
        let (mode, mode_at) = self.word("'graduated' or 'volume'")?;
        let mode = match mode.as_str() {
            "graduated" => TierMode::Graduated,
            "volume" => TierMode::Volume,
            other => {
                return Err(ParseError::error(
                    mode_at,
                    format!("expected 'graduated' or 'volume', found '{other}'"),
                ))
            }
        };
        self.expect_punct('{')?;
        let mut bands = Vec::new();
        loop {
            self.expect_word("upto")?;
            let upto = if self.eat_word("inf") {
                None
            } else {
                Some(self.number("tier bound or 'inf'")?.0)
            };
            let at = self.origin();
            let unit_price = self.money()?;
            if &unit_price.currency != currency {
                self.error(
                    at,
                    format!(
                        "tier price currency {} differs from {currency}",
                        unit_price.currency
                    ),
                );
            }
            bands.push(TierBand { upto, unit_price });
            if self.eat_punct('}') {
                break;
            }
        }
        let schedule = TierSchedule { mode, bands };
        if let Err(msg) = schedule.check() {
            self.error(origin, msg);
        }
        Ok(schedule)
    }

    // ---- fetch rules -----------------------------------------------------

    fn fetch(&mut self) -> PResult<FetchRule> {
        let origin = self.expect_word("fetch")?;
        let (target, _) = self.ident("property name")?;
        self.expect_word("from")?;
        let url_at = self.origin();
        let url = match &self.peek().token {
            Token::Str(s) | Token::Url(s) => {
                let s = s.clone();
                self.advance();
                s
            }
            _ => return Err(self.unexpected("url")),
        };
        if !is_http_url(&url) {
            self.error(
                url_at,
                format!("fetch url `{url}` must be absolute http(s)"),
            );
        }
        self.expect_word("extract")?;
        let (kind, kind_at) = self.word("'json_pointer', 'regex' or 'css'")?;
        let expr = self.string("extractor expression")?;
        let extractor = match kind.as_str() {
            "json_pointer" => Extractor::JsonPointer(expr),
            "regex" => Extractor::Regex(expr),
            "css" => Extractor::Css(expr),
            other => {
                return Err(ParseError::error(
                    kind_at,
                    format!("expected 'json_pointer', 'regex' or 'css', found '{other}'"),
                ))
            }
        };
        self.expect_word("as")?;
        let parse_as = self.property_type()?;
        self.expect_word("every")?;
        let (amount, amount_at) = self.number("interval")?;
        let (unit, unit_at) = self.word("'s', 'm' or 'h'")?;
        let factor = match unit.as_str() {
            "s" => 1,
            "m" => 60,
            "h" => 3600,
            other => {
                return Err(ParseError::error(
                    unit_at,
                    format!("expected 's', 'm' or 'h', found '{other}'"),
                ))
            }
        };
        let interval_secs = if amount.fract().is_zero() && !amount.is_sign_negative() {
            u64::try_from(amount.mantissa() / 10i128.pow(amount.scale()))
                .ok()
                .and_then(|n| n.checked_mul(factor))
        } else {
            None
        };
        let interval_secs = match interval_secs {
            Some(s) if s >= MIN_FETCH_INTERVAL_SECS => s,
            _ => {
                self.error(
                    amount_at,
                    format!("fetch interval must be a whole number of at least {MIN_FETCH_INTERVAL_SECS} s"),
                );
                MIN_FETCH_INTERVAL_SECS
            }
        };
        Ok(FetchRule {
            target,
            url,
            extractor,
            parse_as,
            interval_secs,
            origin,
        })
    }
}

pub fn is_http_url(url: &str) -> bool {
    let rest = url
        .strip_prefix("https://")
        .or_else(|| url.strip_prefix("http://"));
    rest.is_some_and(|r| {
        let host = r.split(['/', '?', '#']).next().unwrap_or("");
        !host.is_empty() && !host.contains(char::is_whitespace)
    })
}

impl FromStr for Vocabulary {
    type Err = Vec<ParseError>;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_vocabulary(s)
    }
}

impl FromStr for ServiceDescription {
    type Err = Vec<ParseError>;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_service(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_error(src: &str) -> ParseError {
        let errs = parse_document(src).unwrap_err();
        assert_eq!(errs.len(), 1, "{errs:?}");
        errs.into_iter().next().unwrap()
    }

    #[test]
    fn minimal_vocabulary() {
        let v = parse_vocabulary(
            "vocabulary v { property quota : quantity<GB> { doc \"d\" importance 1 } }",
        )
        .unwrap();
        assert_eq!(v.id, "v");
        assert_eq!(v.properties.len(), 1);
        assert_eq!(v.properties[0].ty, PropertyType::Quantity(Unit::Gigabyte));
        assert_eq!(v.properties[0].importance, 1);
    }

    #[test]
    fn empty_source_expects_vocabulary() {
        let errs = parse_vocabulary("").unwrap_err();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].message.starts_with("expected 'vocabulary'"));
        assert_eq!((errs[0].line, errs[0].column), (1, 1));
    }

    #[test]
    fn importance_out_of_range() {
        let errs =
            parse_vocabulary("vocabulary v { property q : integer { doc \"d\" importance 6 } }")
                .unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].message, "importance must be 1..5");
        assert_eq!((errs[0].line, errs[0].column), (1, 58));
    }

    #[test]
    fn unknown_unit_and_duplicate_property() {
        let errs = parse_vocabulary(
            "vocabulary v {\n property q : quantity<GiB> { doc \"d\" importance 1 }\n property q : integer { doc \"d\" importance 1 }\n}",
        )
        .unwrap_err();
        let messages: Vec<_> = errs.iter().map(|e| e.message.as_str()).collect();
        assert_eq!(messages, ["unknown unit `GiB`", "duplicate property `q`"]);
        assert_eq!(errs[1].line, 3);
    }

    #[test]
    fn undeclared_feature_set() {
        let e =
            single_error("vocabulary v { property f : features(sync) { doc \"d\" importance 2 } }");
        assert!(e.message.contains("undeclared feature set `sync`"));
    }

    #[test]
    fn service_dimensions_and_quantity() {
        let s = parse_service(
            r#"service s uses v {
                set quota 5 GB
                dimension plan { option free { } option pro { set quota 1 TB } }
                dimension region { option eu { } option us { } }
            }"#,
        )
        .unwrap();
        let sizes: Vec<_> = s.dimensions.iter().map(|d| d.options.len()).collect();
        assert_eq!(sizes, [2, 2]);
        assert_eq!(
            s.base_properties().get("quota"),
            Some(&TypedValue::Quantity {
                magnitude: Decimal::from(5),
                unit: Unit::Gigabyte
            })
        );
    }

    #[test]
    fn duplicate_option_is_named() {
        let e =
            single_error("service s uses v { dimension plan { option free { } option free { } } }");
        assert!(
            e.message.contains("duplicate option `free`"),
            "{}",
            e.message
        );
    }

    #[test]
    fn values_of_every_shape() {
        let s = parse_service(
            r#"service s uses v {
                set a "x"
                set b true
                set c 42
                set d 0.5
                set e 9.99 EUR
                set f https://example.com/x
                set g DE
                set h [sync, share]
                set i []
            }"#,
        )
        .unwrap();
        let kinds: Vec<_> = s.assignments.iter().map(|a| a.value.kind_name()).collect();
        assert_eq!(
            kinds,
            [
                "string",
                "boolean",
                "integer",
                "decimal",
                "money",
                "url",
                "identifier",
                "feature list",
                "feature list"
            ]
        );
    }

    #[test]
    fn money_precision_is_limited() {
        let e = single_error("service s uses v { set p 0.12345 EUR }");
        assert!(e.message.contains("at most 4 fractional digits"));
    }

    #[test]
    fn price_productions() {
        let s = parse_service(
            r#"service s uses v {
                price fixed 10 EUR per month
                price one_time 49.5 EUR
                price per_unit storage 0.10 EUR per month included 5
                    tiers graduated { upto 100 0.10 EUR upto inf 0.08 EUR }
            }"#,
        )
        .unwrap();
        assert_eq!(s.prices.len(), 3);
        match &s.prices[2] {
            PriceComponent::PerUnit(p) => {
                assert_eq!(p.included, Decimal::from(5));
                let tiers = p.tiers.as_ref().unwrap();
                assert_eq!(tiers.mode, TierMode::Graduated);
                assert_eq!(tiers.bands.len(), 2);
                assert_eq!(tiers.bands[1].upto, None);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_tier_schedule() {
        let e = single_error(
            "service s uses v { price per_unit x 1 EUR per month tiers volume { upto 10 1 EUR upto 5 1 EUR upto inf 1 EUR } }",
        );
        assert!(e.message.contains("strictly increasing"));
    }

    #[test]
    fn fetch_rule() {
        let s = parse_service(
            r#"service s uses v {
                fetch spot_price from "https://prices.example.com/spot.json"
                    extract json_pointer "/price" as decimal every 5m
            }"#,
        )
        .unwrap();
        let r = &s.fetch_rules[0];
        assert_eq!(r.interval_secs, 300);
        assert_eq!(r.extractor, Extractor::JsonPointer("/price".into()));
        assert_eq!(r.parse_as, PropertyType::Decimal);
    }

    #[test]
    fn fetch_interval_floor() {
        let e = single_error(
            r#"service s uses v { fetch p from "https://x.org" extract regex "(\\d+)" as integer every 30s }"#,
        );
        assert!(e.message.contains("at least 60 s"));
    }

    #[test]
    fn exclusions_and_trailing_garbage() {
        let s =
            parse_service("service s uses v { dimension a { option x { } } exclude { a = x } }")
                .unwrap();
        assert_eq!(s.exclusions[0].bindings, [("a".into(), "x".into())]);
        let errs = parse_service("service s uses v { } service t uses v { }").unwrap_err();
        assert!(errs[0].message.starts_with("expected end of input"));
    }

    #[test]
    fn identifiers_are_lowercase() {
        let e = single_error("service Storage uses v { }");
        assert!(e.message.contains("identifiers match"));
    }
}
