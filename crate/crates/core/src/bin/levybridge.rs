fn main() {
    std::process::exit(levybridge::cli::run());
}
