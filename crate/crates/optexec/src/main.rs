fn main() {
    std::process::exit(optexec::cli::run());
}
