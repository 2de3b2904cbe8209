fn main() {
    std::process::exit(secaudit_cli::cli_main(std::env::args_os()));
}
