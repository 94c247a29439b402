fn main() {
    std::process::exit(dirac_delay::cli::run(std::env::args_os()));
}
