//! The service description language: vocabularies of typed selection
//! criteria and service descriptions written against them.
//!
//! ```text
//! vocabulary cloud_storage {
//!     property quota : quantity<GB> { doc "Included storage." importance 1 }
//! }
//!
//! service box uses cloud_storage {
//!     set quota 5 GB
//!     dimension plan { option free { } option pro { set quota 1 TB } }
//! }
//! ```

mod ast;
mod cheatsheet;
mod error;
mod lexer;
mod parser;
mod printer;
mod units;
mod validate;

pub use ast::*;
pub use cheatsheet::{export_cheatsheet, importance_label};
pub use error::{has_errors, Origin, ParseError, Severity};
pub use parser::{
    is_http_url, is_ident, is_member_name, parse_document, parse_service, parse_vocabulary,
    MONEY_DIGITS,
};
pub use printer::{print_document, print_service, print_vocabulary};
pub use units::{Unit, UnitKind};
pub use validate::{capture_groups, check_service, coerce, validate};
