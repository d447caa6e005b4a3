use std::env;
use std::process;

fn main() {
    process::exit(eqsolve::bench::cli_main(env::args_os()));
}
