use std::process::exit;

fn main() {
    exit(probcast::cli::run(std::env::args_os()));
}
