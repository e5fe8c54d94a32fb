fn main() {
    std::process::exit(alignclip::cli::run(std::env::args_os()));
}
