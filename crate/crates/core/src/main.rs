fn main() {
    std::process::exit(absa_gan::harness::cli_main(std::env::args_os()));
}
