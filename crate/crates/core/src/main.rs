fn main() {
    std::process::exit(paraphrase::cli::main());
}
