//! CLI entry point. Filled in alongside the harness commands.

pub fn run() -> i32 {
    0
}
