fn main() {
    let code = slavc::cli::run(std::env::args_os());
    std::process::exit(code);
}
