fn main() {
    std::process::exit(georank::cli::run());
}
