fn main() {
    std::process::exit(vomt::cli::cli_main(std::env::args_os().collect()));
}
