fn main() {
    std::process::exit(riverwatch::cli::main(std::env::args_os()));
}
