fn main() {
    std::process::exit(atari_saliency::cli::run(std::env::args_os()));
}
