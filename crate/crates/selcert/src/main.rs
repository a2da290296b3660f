fn main() {
    std::process::exit(selcert::cli::run(std::env::args_os()));
}
