fn main() {
    std::process::exit(lse_lab::cli::run(std::env::args_os()));
}
