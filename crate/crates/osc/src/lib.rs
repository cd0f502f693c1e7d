//! Service compendium: a versioned repository of service descriptions with
//! scheduled fetching, an HTTP/JSON API and a command line front end.

pub mod api;
pub mod cache;
pub mod catalog;
pub mod cli;
pub mod evaluator;
pub mod fetch;
pub mod repository;
pub mod store;
pub mod wire;
