fn main() {
    std::process::exit(alrscan::cli::run());
}
