fn main() {
    std::process::exit(spikebench_cli::run(std::env::args_os()));
}
