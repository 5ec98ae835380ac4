fn main() {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = neural_implicit_cli::run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock());
    std::process::exit(code);
}
