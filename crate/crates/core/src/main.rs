fn main() {
    std::process::exit(thermact::cli::main());
}
