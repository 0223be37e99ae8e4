fn main() { std::process::exit(alloc_arena::cli::cli_entry(&std::env::args().collect::<Vec<_>>())); }
