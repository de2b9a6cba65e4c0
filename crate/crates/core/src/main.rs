fn main() {
    std::process::exit(coulomb_chain::cli::main());
}
