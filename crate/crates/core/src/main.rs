fn main() {
    std::process::exit(dephasing_sim::cli::run(std::env::args_os()));
}
