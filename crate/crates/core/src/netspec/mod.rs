pub mod ast;
pub mod elaborate;
pub mod lexer;
pub mod parser;
pub mod printer;

pub use ast::*;
pub use elaborate::{elaborate, Elaborated};
pub use parser::parse_netspec;
pub use printer::print_netspec;
