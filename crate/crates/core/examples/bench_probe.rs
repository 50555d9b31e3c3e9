use sglab_core::rng::SeedSpec;
use sglab_core::sk;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let r = sk::heuristic_energy_ensemble(1000, 50, true, SeedSpec::new(7)).unwrap();
    println!(
        "spectral n=1000 x50: {:?} mean {:.5} stderr {:.5}",
        t0.elapsed(),
        r.mean,
        r.stderr
    );
}
