fn main() {
    std::process::exit(gaplab::cli::run());
}
