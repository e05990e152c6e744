fn main() {
    std::process::exit(semwave::run_cli());
}
