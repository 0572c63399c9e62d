fn main() {
    std::process::exit(fdp_bands::cli::main());
}
