fn main() {
    std::process::exit(lagdnn::cli::run(std::env::args_os()));
}
