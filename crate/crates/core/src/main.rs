fn main() {
    std::process::exit(choi_bench::cli::run_from(std::env::args_os()));
}
