fn main() {
    std::process::exit(cg_bench::run_cli(std::env::args_os()));
}
