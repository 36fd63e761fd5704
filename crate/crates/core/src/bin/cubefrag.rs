fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(cubefrag::cli::parse_and_execute(&argv));
}
