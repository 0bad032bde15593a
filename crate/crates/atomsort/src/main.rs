fn main() {
    std::process::exit(atomsort::cli::run());
}
