fn main() {
    std::process::exit(semdisc_cli::run(std::env::args_os()));
}
