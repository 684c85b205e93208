//! Simulates one transmission block on three nodes and dumps its first slots.

use ook_fusion::{body_channel_model, dbm_to_watts, simulate_frame, FrameConfig, NoiseSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> ook_fusion::Result<()> {
    let nodes = ["d1", "d5", "d8"].map(|m| body_channel_model(m).unwrap()).to_vec();
    let cfg = FrameConfig::new(8, 4, dbm_to_watts(0.0), nodes, NoiseSpec::default())?;
    let frame = simulate_frame(&cfg, &mut ChaCha8Rng::seed_from_u64(1));

    println!("pilots {:?}", &frame.symbols[..frame.np]);
    println!("data   {:?}", frame.data_symbols());
    let mut csv = Vec::new();
    frame.write_csv(&mut csv).expect("in-memory write");
    for line in String::from_utf8_lossy(&csv).lines().take(13) {
        println!("{line}");
    }
    Ok(())
}
