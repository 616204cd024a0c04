fn main() {
    if let Some(threads) = std::env::var("BRWLD_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if threads > 0 {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().expect("thread pool");
        }
    }
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(brwld::harness::cli::main_with(&argv));
}
