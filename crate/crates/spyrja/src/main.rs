fn main() {
    std::process::exit(spyrja::cli::run(std::env::args_os()));
}
