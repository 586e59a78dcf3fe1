fn main() {
    std::process::exit(hcons::cli::run_command(std::env::args_os()));
}
