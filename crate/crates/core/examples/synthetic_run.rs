//! Trains on the synthetic dataset and prints the test report.
//!
//! `cargo run --release -p tscl-core --example synthetic_run -- [seed] [ablate] [noise_deg]`

use std::time::Instant;

use tscl::data::{generate_synthetic, SyntheticSpec};
use tscl::training::{run_experiment, Ablation, ExperimentConfig};

fn main() -> tscl::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let seed = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let ablate = args.get(2).map(String::as_str).unwrap_or("none");
    let mut cfg = ExperimentConfig::default();
    cfg.hyper.seed = seed;
    cfg.hyper.ablation = Ablation::from_disabled(ablate)?;
    let noise_std_deg = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(SyntheticSpec::default().noise_std_deg);
    let data = generate_synthetic(&SyntheticSpec {
        seed,
        noise_std_deg,
        ..SyntheticSpec::default()
    })?;
    let t = Instant::now();
    let res = run_experiment(&data.dataset, Some(&data.truth), &cfg)?;
    print!("{}", res.test.to_text());
    for p in &res.log.phases {
        if let (Some(a), Some(b)) = (p.epochs.first(), p.epochs.last()) {
            println!("{:?}: loss {:.4} -> {:.4}", p.phase, a.mean_loss, b.mean_loss);
        }
    }
    println!("seconds = {:.1}", t.elapsed().as_secs_f64());
    Ok(())
}
