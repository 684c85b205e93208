//! Pilot/data framing and forward simulation of `y = sqrt(P) h x + w`.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ComplexSample, GainDistribution, NoiseSpec};
use crate::error::{Error, Result};

/// Transmission block layout and physical parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    /// Pilot length; the first half are ones, the second half zeros.
    pub np: usize,
    /// Number of data symbols following the pilots.
    pub nd: usize,
    pub tx_power_watts: f64,
    /// One squared-gain model per receiving node.
    pub node_dists: Vec<GainDistribution>,
    pub noise: NoiseSpec,
}

impl FrameConfig {
    pub fn new(
        np: usize,
        nd: usize,
        tx_power_watts: f64,
        node_dists: Vec<GainDistribution>,
        noise: NoiseSpec,
    ) -> Result<Self> {
        let cfg = Self {
            np,
            nd,
            tx_power_watts,
            node_dists,
            noise,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_pilot_length(self.np)?;
        if self.nd == 0 {
            return Err(Error::Config("nd must be >= 1".into()));
        }
        if !(self.tx_power_watts.is_finite() && self.tx_power_watts > 0.0) {
            return Err(Error::Config(format!(
                "transmit power must be finite and > 0 W, got {}",
                self.tx_power_watts
            )));
        }
        if self.node_dists.is_empty() {
            return Err(Error::Config("at least one receiving node is required".into()));
        }
        Ok(())
    }

    pub fn k_nodes(&self) -> usize {
        self.node_dists.len()
    }

    pub fn slots(&self) -> usize {
        self.np + self.nd
    }
}

fn check_pilot_length(np: usize) -> Result<()> {
    if np < 2 || !np.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "pilot length np must be even and >= 2 (half ones, half zeros), got {np}"
        )));
    }
    Ok(())
}

/// Pilot sequence: `np/2` ones followed by `np/2` zeros.
pub fn pilot_symbols(np: usize) -> Result<Vec<bool>> {
    check_pilot_length(np)?;
    Ok((0..np).map(|n| n < np / 2).collect())
}

/// One received sample.
pub fn received_sample(
    tx_power_watts: f64,
    h: ComplexSample,
    x: bool,
    w: ComplexSample,
) -> ComplexSample {
    if x {
        h * tx_power_watts.sqrt() + w
    } else {
        w
    }
}

/// A simulated transmission block as seen by the receivers.
///
/// `samples[k][n]` and `true_channels[k][n]` are node-major. The channels are
/// kept only for the coherent baseline; noncoherent detectors receive an
/// [`Observation`], which does not expose them.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedFrame {
    pub np: usize,
    pub symbols: Vec<bool>,
    pub samples: Vec<Vec<ComplexSample>>,
    pub true_channels: Vec<Vec<ComplexSample>>,
}

/// Borrowed view of received samples without channel knowledge.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    np: usize,
    samples: &'a [Vec<ComplexSample>],
}

impl<'a> Observation<'a> {
    pub fn np(&self) -> usize {
        self.np
    }

    pub fn k_nodes(&self) -> usize {
        self.samples.len()
    }

    pub fn nd(&self) -> usize {
        self.samples.first().map_or(0, |s| s.len() - self.np)
    }

    /// Pilot samples of every node.
    pub fn pilots(&self) -> impl Iterator<Item = &'a [ComplexSample]> + 'a {
        let np = self.np;
        self.samples.iter().map(move |s| &s[..np])
    }

    /// Received data sample of node `k` in data slot `i` (0-based after the pilots).
    pub fn data(&self, k: usize, i: usize) -> ComplexSample {
        self.samples[k][self.np + i]
    }

    /// Fills `out` with the K received samples of data slot `i`.
    pub fn data_slot(&self, i: usize, out: &mut Vec<ComplexSample>) {
        out.clear();
        out.extend(self.samples.iter().map(|s| s[self.np + i]));
    }
}

impl ReceivedFrame {
    pub fn observation(&self) -> Observation<'_> {
        Observation {
            np: self.np,
            samples: &self.samples,
        }
    }

    pub fn k_nodes(&self) -> usize {
        self.samples.len()
    }

    pub fn nd(&self) -> usize {
        self.symbols.len() - self.np
    }

    pub fn data_symbols(&self) -> &[bool] {
        &self.symbols[self.np..]
    }

    /// Debug dump with header `slot,node,x,re_y,im_y,re_h,im_h`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "slot,node,x,re_y,im_y,re_h,im_h")?;
        for (n, &x) in self.symbols.iter().enumerate() {
            for k in 0..self.k_nodes() {
                let y = self.samples[k][n];
                let h = self.true_channels[k][n];
                writeln!(
                    out,
                    "{n},{k},{},{:.8e},{:.8e},{:.8e},{:.8e}",
                    u8::from(x),
                    y.re,
                    y.im,
                    h.re,
                    h.im
                )?;
            }
        }
        Ok(())
    }
}

/// Simulates one block.
///
/// Random draws are consumed slot by slot. In each slot the data bit comes
/// first (data slots only), then for each node in order: the gain variate,
/// the phase variate, and the real and imaginary noise components. A fixed
/// seed therefore reproduces the frame exactly.
pub fn simulate_frame<R: Rng + ?Sized>(cfg: &FrameConfig, rng: &mut R) -> ReceivedFrame {
    let k_nodes = cfg.k_nodes();
    let slots = cfg.slots();
    let mut symbols = Vec::with_capacity(slots);
    let mut samples = vec![Vec::with_capacity(slots); k_nodes];
    let mut channels = vec![Vec::with_capacity(slots); k_nodes];
    for n in 0..slots {
        let x = if n < cfg.np { n < cfg.np / 2 } else { rng.random::<bool>() };
        symbols.push(x);
        for (k, dist) in cfg.node_dists.iter().enumerate() {
            let h = dist.sample_channel(rng);
            let w = cfg.noise.sample(rng);
            samples[k].push(received_sample(cfg.tx_power_watts, h, x, w));
            channels[k].push(h);
        }
    }
    ReceivedFrame {
        np: cfg.np,
        symbols,
        samples,
        true_channels: channels,
    }
}
