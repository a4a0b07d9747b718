fn main() {
    std::process::exit(saddle_cli::cli_main(std::env::args_os()));
}
