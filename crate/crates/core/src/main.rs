fn main() {
    std::process::exit(hipose::cli::run(std::env::args_os()));
}
