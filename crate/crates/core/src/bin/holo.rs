fn main() {
    std::process::exit(holo_core::cli::run());
}
