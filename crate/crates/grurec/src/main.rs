fn main() {
    std::process::exit(grurec::cli::run());
}
