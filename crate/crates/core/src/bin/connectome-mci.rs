fn main() {
    env_logger::init();
    std::process::exit(connectome_mci::cli::run(std::env::args_os()));
}
