//! Core of the service compendium.
//!
//! Everything in this crate is pure and allocation-only: the service
//! description language (lexer, parser, type checker, printer, exporters),
//! variant expansion, price quotes, matchmaking and facet counting. IO,
//! fetching, persistence and the HTTP surface live in the `osc` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod canonical;
pub mod facets;
pub mod matchmaker;
pub mod pricing;
pub mod sdl;
pub mod variants;

pub use rust_decimal::Decimal;
