fn main() {
    std::process::exit(streetonomics_cli::run(std::env::args_os()));
}
