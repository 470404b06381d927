fn main() {
    std::process::exit(stin::harness::cli::run());
}
