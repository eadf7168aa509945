fn main() {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    std::process::exit(cwp_core::cli::run_args(&argv));
}
