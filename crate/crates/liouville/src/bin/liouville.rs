use std::process::exit;

fn main() {
    exit(liouville::cli::run(std::env::args_os()));
}
