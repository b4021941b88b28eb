// Scratch instrumentation (not shipped).
use noiseplate::channels::{gram_matrix, standard_channel, ChannelKind};
use noiseplate::solver::*;

fn main() {
    let g = gram_matrix(&standard_channel(ChannelKind::BitFlip, 0.5).unwrap());
    let cfg = SolverConfig { max_outer_iters: 3, ..SolverConfig::default() };
    let t0 = std::time::Instant::now();
    let r = match solve(&g, &cfg) { Ok((_s, r)) => r, Err(e) => { println!("err: {e}"); return; } };
    println!("outer={} f1={:.2e} f2={:.2e} in {:.2?}", r.outer_iters, r.f1_final, r.f2_final, t0.elapsed());
}
