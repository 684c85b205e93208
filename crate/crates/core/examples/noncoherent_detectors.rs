//! Trains every noncoherent detector on one frame's pilots and counts its
//! errors over the frame's data symbols.

use ook_fusion::detectors::{amplitude, detect_elrt, train_references, DetectorId};
use ook_fusion::{body_channel_model, dbm_to_watts, simulate_frame, ElrtConfig, FrameConfig, NoiseSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> ook_fusion::Result<()> {
    let noise = NoiseSpec::default();
    let nodes = ["d1", "d3", "d6"].map(|m| body_channel_model(m).unwrap()).to_vec();
    let cfg = FrameConfig::new(40, 5000, dbm_to_watts(-20.0), nodes, noise)?;
    let frame = simulate_frame(&cfg, &mut ChaCha8Rng::seed_from_u64(3));
    let obs = frame.observation();
    let pilots: Vec<_> = obs.pilots().collect();

    let refs = train_references(&pilots, obs.np())?;
    for (k, n) in refs.nodes.iter().enumerate() {
        println!(
            "node {k}: a1 = {:.3e}, a0 = {:.3e}, a_th = {:.3e}, p11 = {:.3}, p00 = {:.3}",
            n.a1, n.a0, n.a_th, n.p11, n.p00
        );
    }

    let elrt = ElrtConfig::for_noise_power(noise.noise_power_watts())?;
    let weighted = [DetectorId::MWcnde, DetectorId::PWcnde, DetectorId::DWcnde, DetectorId::CWcnde];
    let mut errors = [0usize; 5];
    let (mut y, mut amps) = (Vec::new(), Vec::new());
    for (i, &x) in frame.data_symbols().iter().enumerate() {
        obs.data_slot(i, &mut y);
        amps.clear();
        amps.extend(y.iter().map(|&v| amplitude(v)));
        for (j, &det) in weighted.iter().enumerate() {
            errors[j] += usize::from(refs.detect(det, &amps)?.bit != x);
        }
        errors[4] += usize::from(detect_elrt(&pilots, &y, elrt).bit != x);
    }
    for (name, e) in weighted.iter().map(|d| d.as_str()).chain(["elrt"]).zip(errors) {
        println!("{name:<8} {e:>4} errors in {} symbols", obs.nd());
    }
    Ok(())
}
