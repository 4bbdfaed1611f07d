//! Pushes a 20 Hz command stream through a seeded latency model and prints
//! the delay histogram. Delivery never reorders: a message that samples a
//! short delay waits behind the one before it.
//!
//!     cargo run --example latency_injection -- 150 50 0.02 7

use teleop_core::channel::{inject_latency, LatencyModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let arg = |i: usize, d: f64| args.get(i).copied().unwrap_or(d);
    let model = LatencyModel::new(arg(0, 150.0), arg(1, 50.0), arg(2, 0.0), arg(3, 1.0) as u64)?;

    let stream = (0..2000u64).map(|seq| (seq * 50_000, seq));
    let delivered = inject_latency(stream, model);
    let delays: Vec<f64> = delivered.iter().map(|(t, seq)| (t - seq * 50_000) as f64 / 1e3).collect();
    let mean = delays.iter().sum::<f64>() / delays.len() as f64;
    println!("{} of 2000 delivered, mean delay {mean:.1} ms", delivered.len());

    let mut bins = [0usize; 12];
    for d in &delays {
        bins[((d / 25.0) as usize).min(bins.len() - 1)] += 1;
    }
    for (i, n) in bins.iter().enumerate() {
        println!("{:4}-{:<4} ms {:5} {}", i * 25, i * 25 + 25, n, "#".repeat(n / 10));
    }
    Ok(())
}
