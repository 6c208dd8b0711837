use clap::Parser;

fn main() {
    let cli = stowlab_cli::Cli::parse();
    if let Err(e) = stowlab_cli::run(cli) {
        let body = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
        eprintln!("{body}");
        std::process::exit(1);
    }
}
