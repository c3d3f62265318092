fn main() {
    std::process::exit(mentorlens::cli::run(std::env::args_os()));
}
