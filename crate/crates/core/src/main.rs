fn main() {
    std::process::exit(facetopo::cli::main());
}
