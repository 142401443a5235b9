fn main() {
    std::process::exit(gse_cli::run(std::env::args_os()));
}
