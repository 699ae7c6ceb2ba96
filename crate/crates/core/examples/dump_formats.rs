//! Print a built-in format as a JSON format-description document, e.g. as
//! a starting point for a custom format file.
//!
//! Usage: cargo run -p s2i-core --example dump_formats -- ntu25

use s2i_core::format::{builtin_format, format_to_document, BuiltinFormat};

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| {
        eprintln!("usage: dump_formats <ntu25|ucla20|toyota13>");
        std::process::exit(2);
    });
    let Some(builtin) = BuiltinFormat::from_id(&name) else {
        eprintln!("unknown builtin '{name}'");
        std::process::exit(2);
    };
    println!("{}", format_to_document(&builtin_format(builtin)));
}
