fn main() {
    std::process::exit(condred::cli::main());
}
