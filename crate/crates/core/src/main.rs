fn main() {
    std::process::exit(lieflow::cli::main());
}
