fn main() {
    std::process::exit(levy_exit::cli::run(std::env::args_os()));
}
