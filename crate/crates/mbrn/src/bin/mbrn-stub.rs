//! Local stand-in for the generation and metric services, for trying the
//! pipeline without real endpoints. Serves /generate and /score with
//! deterministic content; see the library's stub module for the behaviour.

use std::sync::atomic::Ordering;

use clap::Parser;

#[derive(Parser)]
#[command(name = "mbrn-stub", version, about = "Deterministic local generation/metric service")]
struct Args {
    /// Hold every response this many milliseconds.
    #[arg(long, default_value_t = 0)]
    delay_ms: u64,
    /// Answer HTTP 500 to the first N requests.
    #[arg(long, default_value_t = 0)]
    fail_first: usize,
}

fn main() {
    let args = Args::parse();
    let server = mbrn::stub::StubServer::start().expect("bind local port");
    server.state().delay_ms.store(args.delay_ms, Ordering::SeqCst);
    server
        .state()
        .fail_first
        .store(args.fail_first, Ordering::SeqCst);
    println!("listening on {}", server.url());
    println!("use it as both --teacher-url and --metric-url; ctrl-c to stop");
    loop {
        std::thread::park();
    }
}
