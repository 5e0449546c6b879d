fn main() {
    std::process::exit(popnas::cli::run());
}
