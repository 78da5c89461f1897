fn main() {
    std::process::exit(graphon_rd::harness::cli::cli(std::env::args()));
}
