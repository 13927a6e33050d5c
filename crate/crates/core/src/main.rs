fn main() {
    std::process::exit(pwconvex::harness::cli::run(std::env::args_os()));
}
