fn main() {
    std::process::exit(adlens::cli::main());
}
