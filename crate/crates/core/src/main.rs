fn main() {
    std::process::exit(tensorc::cli::run(std::env::args_os()));
}
