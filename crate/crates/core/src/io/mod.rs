//! Plain-text input and output: INI configuration, numeric tables and a
//! small pointwise expression language.

mod expr;
mod ini;
mod table;

pub use expr::Expr;
pub use ini::{Ini, IniEntry};
pub use table::{fmt_f64, Table};
