fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(imrl_cli::run_command(&argv));
}
