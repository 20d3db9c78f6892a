fn main() {
    std::process::exit(kparab_cli::run());
}
