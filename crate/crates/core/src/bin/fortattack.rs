fn main() {
    std::process::exit(fortattack::cli::main());
}
