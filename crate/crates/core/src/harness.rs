//! Reproducible Monte Carlo BER engine.
//!
//! Every frame draws its randomness from its own ChaCha8 stream keyed on
//! `(master_seed, power_dbm, np, frame_index)`. Frames are simulated in
//! parallel batches and then consumed strictly in index order, so a result
//! never depends on how many workers ran or in which order they finished.
//! All detectors at a grid cell consume the same frames.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{dbm_to_watts, ComplexSample};
use crate::detectors::{
    amplitude, detect_elrt, train_references, Decision, DetectorId, ElrtConfig,
};
use crate::error::{Error, Result};
use crate::frames::{simulate_frame, FrameConfig, ReceivedFrame};
use crate::oracle::{detect_mrc, detect_stat_csi, lemma1_gap, StatCsiDetector};

pub const DEFAULT_MIN_ERRORS: u64 = 100;
pub const DEFAULT_MAX_DATA_SYMBOLS: u64 = 10_000_000;
pub const DEFAULT_ND: usize = 1000;
pub const DEFAULT_NP: usize = 40;
pub const DEFAULT_MASTER_SEED: u64 = 0x00C0_FFEE;

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Exact header of the BER sweep CSV.
pub const BER_CSV_HEADER: &str = "detector,power_dbm,np,k_nodes,data_symbols,errors,ber,ci_lo,ci_hi,ties,seed";
/// Exact header of the weight-scatter CSV.
pub const SCATTER_CSV_HEADER: &str = "true_bit,norm_weight_diff,decided_bit";

const FIRST_BATCH: usize = 8;
const MAX_BATCH: usize = 256;

/// A BER sweep over transmit powers and, optionally, pilot lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Frame template. Its `tx_power_watts` is replaced by each grid power and
    /// its `np` by each entry of `np_grid` when present.
    pub frame: FrameConfig,
    pub power_grid_dbm: Vec<f64>,
    pub np_grid: Option<Vec<usize>>,
    pub detectors: Vec<DetectorId>,
    pub min_errors: u64,
    pub max_data_symbols: u64,
    pub master_seed: u64,
    /// Kernel precision of the eLRT; `None` means `1 / (N0 B)`.
    pub kernel_c: Option<f64>,
}

impl SweepConfig {
    /// A sweep with default stopping rule, seed and kernel.
    pub fn new(frame: FrameConfig, power_grid_dbm: Vec<f64>, detectors: Vec<DetectorId>) -> Self {
        Self {
            frame,
            power_grid_dbm,
            np_grid: None,
            detectors,
            min_errors: DEFAULT_MIN_ERRORS,
            max_data_symbols: DEFAULT_MAX_DATA_SYMBOLS,
            master_seed: DEFAULT_MASTER_SEED,
            kernel_c: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.frame.validate()?;
        if self.power_grid_dbm.is_empty() {
            return Err(Error::Config("power grid must not be empty".into()));
        }
        if let Some(p) = self.power_grid_dbm.iter().find(|p| !p.is_finite()) {
            return Err(Error::Config(format!("power grid entries must be finite, got {p}")));
        }
        if let Some(grid) = &self.np_grid {
            if grid.is_empty() {
                return Err(Error::Config("np grid must not be empty when given".into()));
            }
            for &np in grid {
                let mut f = self.frame.clone();
                f.np = np;
                f.validate()?;
            }
        }
        if self.detectors.is_empty() {
            return Err(Error::Config("at least one detector is required".into()));
        }
        if self.min_errors < 1 {
            return Err(Error::Config("min_errors must be >= 1".into()));
        }
        if self.max_data_symbols < self.frame.nd as u64 {
            return Err(Error::Config(format!(
                "max_data_symbols ({}) must be at least one frame of nd = {} data symbols",
                self.max_data_symbols, self.frame.nd
            )));
        }
        if self.detectors.iter().any(|d| d.is_wcnde()) {
            for np in self.np_values() {
                if np < 4 {
                    return Err(Error::Config(format!(
                        "reference-value detectors need np >= 4 so the probability clamp [2/np, 1 - 2/np] is non-empty, got {np}"
                    )));
                }
            }
        }
        self.elrt_config()?;
        Ok(())
    }

    /// Pilot lengths swept, in grid order.
    pub fn np_values(&self) -> Vec<usize> {
        self.np_grid.clone().unwrap_or_else(|| vec![self.frame.np])
    }

    pub fn elrt_config(&self) -> Result<ElrtConfig> {
        match self.kernel_c {
            Some(c) => ElrtConfig::new(c),
            None => ElrtConfig::for_noise_power(self.frame.noise.noise_power_watts()),
        }
    }

    /// Frame configuration at one grid cell.
    pub fn cell_frame_config(&self, power_dbm: f64, np: usize) -> Result<FrameConfig> {
        let mut f = self.frame.clone();
        f.tx_power_watts = dbm_to_watts(power_dbm);
        f.np = np;
        f.validate()?;
        Ok(f)
    }

    /// Grid cells `(power_dbm, np)` in output order: power-major.
    pub fn cells(&self) -> Vec<(f64, usize)> {
        let nps = self.np_values();
        self.power_grid_dbm
            .iter()
            .flat_map(|&p| nps.iter().map(move |&np| (p, np)))
            .collect()
    }
}

/// Result of one (detector, power, np) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub detector: DetectorId,
    pub power_dbm: f64,
    pub np: usize,
    pub k_nodes: usize,
    pub data_symbols: u64,
    pub errors: u64,
    pub ber: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub ties: u64,
    pub seed: u64,
    /// Frames whose training was degenerate for this detector; their symbols
    /// are not counted.
    pub skipped_frames: u64,
}

impl BerPoint {
    /// True when the two 95% intervals share at least one point.
    pub fn overlaps(&self, other: &BerPoint) -> bool {
        self.ci_lo <= other.ci_hi && other.ci_lo <= self.ci_hi
    }
}

/// 95% Wilson score interval for `errors` out of `trials`.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    assert!(trials >= 1 && errors <= trials, "need 0 <= errors <= trials and trials >= 1");
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if errors == 0 { 0.0 } else { (centre - half).clamp(0.0, p) };
    let hi = if errors == trials { 1.0 } else { (centre + half).clamp(p, 1.0) };
    (lo, hi)
}

/// RNG stream of one frame.
pub fn frame_stream(master_seed: u64, power_dbm: f64, np: usize, frame_index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, word) in key
        .chunks_exact_mut(8)
        .zip([master_seed, power_dbm.to_bits(), np as u64, frame_index])
    {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Simulates frame `frame_index` of a grid cell.
pub fn cell_frame(cfg: &SweepConfig, power_dbm: f64, np: usize, frame_index: u64) -> Result<ReceivedFrame> {
    let fc = cfg.cell_frame_config(power_dbm, np)?;
    Ok(simulate_frame(&fc, &mut frame_stream(cfg.master_seed, power_dbm, np, frame_index)))
}

#[derive(Debug, Clone, Copy, Default)]
struct FrameTally {
    errors: u64,
    ties: u64,
    degenerate: bool,
}

/// Everything the detectors at one cell share.
struct Cell {
    frame: FrameConfig,
    elrt: ElrtConfig,
    stat: Option<Vec<StatCsiDetector>>,
}

impl Cell {
    fn new(cfg: &SweepConfig, power_dbm: f64, np: usize, detectors: &[DetectorId]) -> Result<Self> {
        let frame = cfg.cell_frame_config(power_dbm, np)?;
        let stat = if detectors.contains(&DetectorId::Stat) {
            Some(
                frame
                    .node_dists
                    .iter()
                    .map(|d| StatCsiDetector::new(*d, frame.noise, frame.tx_power_watts))
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        Ok(Self {
            elrt: cfg.elrt_config()?,
            frame,
            stat,
        })
    }

    fn evaluate(&self, frame: &ReceivedFrame, detectors: &[DetectorId]) -> Result<Vec<FrameTally>> {
        let obs = frame.observation();
        let np = obs.np();
        let pilots: Vec<&[ComplexSample]> = obs.pilots().collect();
        let refs = if detectors.iter().any(|d| d.is_wcnde()) {
            Some(train_references(&pilots, np)?)
        } else {
            None
        };
        let c_ok = refs.as_ref().is_some_and(|r| r.check_nondegenerate().is_ok());

        let mut tallies = vec![FrameTally::default(); detectors.len()];
        let mut y = Vec::with_capacity(obs.k_nodes());
        let mut h = Vec::with_capacity(obs.k_nodes());
        let mut amps = Vec::with_capacity(obs.k_nodes());
        for (i, &x) in frame.data_symbols().iter().enumerate() {
            obs.data_slot(i, &mut y);
            amps.clear();
            amps.extend(y.iter().map(|&v| amplitude(v)));
            for (tally, &det) in tallies.iter_mut().zip(detectors) {
                let decision = match det {
                    DetectorId::Mrc => {
                        h.clear();
                        h.extend(frame.true_channels.iter().map(|c| c[np + i]));
                        detect_mrc(&h, &y, self.frame.tx_power_watts)
                    }
                    DetectorId::Stat => detect_stat_csi(self.stat.as_deref().expect("built for stat"), &y)?,
                    DetectorId::Elrt => detect_elrt(&pilots, &y, self.elrt),
                    DetectorId::CWcnde if !c_ok => {
                        tally.degenerate = true;
                        continue;
                    }
                    _ => refs.as_ref().expect("trained").detect(det, &amps)?,
                };
                tally.errors += u64::from(decision.bit != x);
                tally.ties += u64::from(decision.tie);
            }
        }
        for t in &mut tallies {
            if t.degenerate {
                *t = FrameTally { degenerate: true, ..Default::default() };
            }
        }
        Ok(tallies)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Accumulator {
    frames: u64,
    skipped: u64,
    errors: u64,
    ties: u64,
    done: bool,
}

/// Runs every configured detector at one grid cell on a shared frame sequence.
///
/// Each detector consumes frames in index order and stops once it has
/// `min_errors` errors or the next frame would take it past
/// `max_data_symbols`. Frames skipped for degenerate training still count
/// against the symbol budget.
pub fn run_cell(cfg: &SweepConfig, power_dbm: f64, np: usize) -> Result<Vec<BerPoint>> {
    cfg.validate()?;
    run_cell_unchecked(cfg, power_dbm, np)
}

fn run_cell_unchecked(cfg: &SweepConfig, power_dbm: f64, np: usize) -> Result<Vec<BerPoint>> {
    let dets = &cfg.detectors;
    let cell = Cell::new(cfg, power_dbm, np, dets)?;
    let nd = cell.frame.nd as u64;
    let frame_budget = cfg.max_data_symbols / nd;
    let mut acc = vec![Accumulator::default(); dets.len()];
    let mut next = 0u64;
    let mut batch = FIRST_BATCH;

    while acc.iter().any(|a| !a.done) {
        let active: Vec<usize> = (0..dets.len()).filter(|&j| !acc[j].done).collect();
        let active_ids: Vec<DetectorId> = active.iter().map(|&j| dets[j]).collect();
        let end = (next + batch as u64).min(frame_budget);
        let results: Vec<Vec<FrameTally>> = (next..end)
            .into_par_iter()
            .map(|f| {
                let frame = simulate_frame(&cell.frame, &mut frame_stream(cfg.master_seed, power_dbm, np, f));
                cell.evaluate(&frame, &active_ids)
            })
            .collect::<Result<_>>()?;

        for tallies in &results {
            for (&j, t) in active.iter().zip(tallies) {
                let a = &mut acc[j];
                if a.done {
                    continue;
                }
                a.frames += 1;
                if t.degenerate {
                    a.skipped += 1;
                } else {
                    a.errors += t.errors;
                    a.ties += t.ties;
                }
                if a.errors >= cfg.min_errors || a.frames >= frame_budget {
                    a.done = true;
                }
            }
        }
        next = end;
        if next >= frame_budget {
            acc.iter_mut().for_each(|a| a.done = true);
        }
        batch = (batch * 2).min(MAX_BATCH);
    }

    dets.iter()
        .zip(&acc)
        .map(|(&detector, a)| {
            let data_symbols = (a.frames - a.skipped) * nd;
            if data_symbols == 0 {
                return Err(Error::Numerical(format!(
                    "{detector} at {power_dbm} dBm, np = {np}: every one of {} frames had degenerate training",
                    a.frames
                )));
            }
            let (ci_lo, ci_hi) = wilson_interval(a.errors, data_symbols);
            Ok(BerPoint {
                detector,
                power_dbm,
                np,
                k_nodes: cell.frame.k_nodes(),
                data_symbols,
                errors: a.errors,
                ber: a.errors as f64 / data_symbols as f64,
                ci_lo,
                ci_hi,
                ties: a.ties,
                seed: cfg.master_seed,
                skipped_frames: a.skipped,
            })
        })
        .collect()
}

/// BER of a single detector at one cell.
pub fn run_ber_point(cfg: &SweepConfig, detector: DetectorId, power_dbm: f64, np: usize) -> Result<BerPoint> {
    let single = SweepConfig {
        detectors: vec![detector],
        ..cfg.clone()
    };
    Ok(run_cell(&single, power_dbm, np)?.remove(0))
}

/// All cells of the sweep, power-major, then np, then detector in config order.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<BerPoint>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for (p, np) in cfg.cells() {
        out.extend(run_cell_unchecked(cfg, p, np)?);
    }
    Ok(out)
}

pub fn write_ber_csv<W: Write>(points: &[BerPoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{BER_CSV_HEADER}")?;
    for p in points {
        writeln!(
            out,
            "{},{:.8e},{},{},{},{},{:.8e},{:.8e},{:.8e},{},{}",
            p.detector, p.power_dbm, p.np, p.k_nodes, p.data_symbols, p.errors, p.ber, p.ci_lo, p.ci_hi, p.ties, p.seed
        )?;
    }
    Ok(())
}

/// One data symbol of the weight-difference diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub true_bit: bool,
    /// Weight difference divided by the batch maximum of its magnitude.
    pub norm_weight_diff: f64,
    pub decided_bit: bool,
}

/// A normalized scatter batch and its divisor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterBatch {
    pub detector: DetectorId,
    pub power_dbm: f64,
    pub divisor: f64,
    pub skipped_frames: u64,
    pub rows: Vec<ScatterRow>,
}

impl ScatterBatch {
    /// Rows whose decision differs from the transmitted bit.
    pub fn misclassified(&self) -> impl Iterator<Item = &ScatterRow> {
        self.rows.iter().filter(|r| r.true_bit != r.decided_bit)
    }
}

/// Weight differences of the first `n_symbols` data symbols at `power_dbm`
/// (pilot length `cfg.frame.np`), normalized by their largest magnitude.
/// Uses the same frames as a sweep at that cell.
pub fn export_scatter(cfg: &SweepConfig, detector: DetectorId, power_dbm: f64, n_symbols: usize) -> Result<ScatterBatch> {
    if !detector.is_wcnde() {
        return Err(Error::Config(format!(
            "scatter export needs a weight-comparing detector (m-wcnde, p-wcnde, d-wcnde, c-wcnde), got {detector}"
        )));
    }
    if n_symbols == 0 {
        return Err(Error::Config("scatter export needs n_symbols >= 1".into()));
    }
    let np = cfg.frame.np;
    let fc = cfg.cell_frame_config(power_dbm, np)?;
    let frames_needed = n_symbols.div_ceil(fc.nd) as u64;

    let per_frame: Vec<Option<Vec<(bool, f64)>>> = (0..frames_needed)
        .into_par_iter()
        .map(|f| {
            let frame = simulate_frame(&fc, &mut frame_stream(cfg.master_seed, power_dbm, np, f));
            let obs = frame.observation();
            let pilots: Vec<&[ComplexSample]> = obs.pilots().collect();
            let refs = train_references(&pilots, np)?;
            if detector == DetectorId::CWcnde && refs.check_nondegenerate().is_err() {
                return Ok(None);
            }
            let mut y = Vec::new();
            let mut amps = Vec::new();
            let rows = frame
                .data_symbols()
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    obs.data_slot(i, &mut y);
                    amps.clear();
                    amps.extend(y.iter().map(|&v| amplitude(v)));
                    Ok((x, refs.weight_difference(detector, &amps)?))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Some(rows))
        })
        .collect::<Result<_>>()?;

    let skipped_frames = per_frame.iter().filter(|f| f.is_none()).count() as u64;
    let raw: Vec<(bool, f64)> = per_frame.into_iter().flatten().flatten().take(n_symbols).collect();
    let divisor = raw.iter().map(|(_, d)| d.abs()).fold(0.0, f64::max);
    if !(divisor > 0.0 && divisor.is_finite()) {
        return Err(Error::Numerical(format!(
            "cannot normalize {detector} weight differences: batch maximum magnitude is {divisor}"
        )));
    }
    let rows = raw
        .into_iter()
        .map(|(true_bit, d)| ScatterRow {
            true_bit,
            norm_weight_diff: d / divisor,
            decided_bit: Decision::from_statistic(d).bit,
        })
        .collect();
    Ok(ScatterBatch {
        detector,
        power_dbm,
        divisor,
        skipped_frames,
        rows,
    })
}

pub fn write_scatter_csv<W: Write>(rows: &[ScatterRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SCATTER_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{:.8e},{}",
            u8::from(r.true_bit),
            r.norm_weight_diff,
            u8::from(r.decided_bit)
        )?;
    }
    Ok(())
}

/// Kernel density convergence experiment at a frozen received sample.
#[derive(Debug, Clone)]
pub struct Lemma1Config {
    pub detector: StatCsiDetector,
    pub y: ComplexSample,
    pub np_grid: Vec<usize>,
    pub kernel_c_grid: Vec<f64>,
    pub seeds: u64,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Row {
    pub np: usize,
    pub kernel_c: f64,
    pub mean_gap: f64,
    /// Sample standard deviation over seeds.
    pub std_gap: f64,
    pub seeds: u64,
}

impl Lemma1Row {
    /// Half-width of the normal-approximation 95% interval of `mean_gap`.
    pub fn ci_half_width(&self) -> f64 {
        Z95 * self.std_gap / (self.seeds as f64).sqrt()
    }
}

/// Stream of one lemma-1 replicate. Independent of the kernel, so every
/// kernel value sees the same pilots.
fn lemma1_stream(master_seed: u64, np: usize, replicate: u64) -> ChaCha8Rng {
    frame_stream(master_seed, f64::NAN, np, replicate)
}

/// Mean and spread of the kernel-density gap over `seeds` replicates for every
/// `(np, kernel_c)` pair, np-major.
pub fn run_lemma1(cfg: &Lemma1Config) -> Result<Vec<Lemma1Row>> {
    if cfg.np_grid.is_empty() || cfg.kernel_c_grid.is_empty() {
        return Err(Error::Config("lemma1 grids must not be empty".into()));
    }
    if cfg.seeds < 2 {
        return Err(Error::Config(format!("lemma1 needs seeds >= 2 for a spread, got {}", cfg.seeds)));
    }
    let kernels = cfg
        .kernel_c_grid
        .iter()
        .map(|&c| ElrtConfig::new(c))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for &np in &cfg.np_grid {
        for kernel in &kernels {
            let gaps = (0..cfg.seeds)
                .into_par_iter()
                .map(|s| lemma1_gap(&cfg.detector, np, *kernel, cfg.y, &mut lemma1_stream(cfg.master_seed, np, s)))
                .collect::<Result<Vec<_>>>()?;
            let n = gaps.len() as f64;
            let mean = gaps.iter().sum::<f64>() / n;
            let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0);
            rows.push(Lemma1Row {
                np,
                kernel_c: kernel.kernel_c(),
                mean_gap: mean,
                std_gap: var.sqrt(),
                seeds: cfg.seeds,
            });
        }
    }
    Ok(rows)
}

pub fn write_lemma1_csv<W: Write>(rows: &[Lemma1Row], mut out: W) -> std::io::Result<()> {
    writeln!(out, "np,kernel_c,mean_gap,std_gap,seeds")?;
    for r in rows {
        writeln!(out, "{},{:.8e},{:.8e},{:.8e},{}", r.np, r.kernel_c, r.mean_gap, r.std_gap, r.seeds)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{body_channel_model, NoiseSpec};
    use crate::detectors::fuse;

    fn sweep(models: &[&str], powers: &[f64], dets: &[DetectorId]) -> SweepConfig {
        let frame = FrameConfig::new(
            DEFAULT_NP,
            DEFAULT_ND,
            1.0,
            models.iter().map(|m| body_channel_model(m).unwrap()).collect(),
            NoiseSpec::default(),
        )
        .unwrap();
        SweepConfig::new(frame, powers.to_vec(), dets.to_vec())
    }

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.036_995).abs() < 1e-5, "{hi}");

        let (lo, hi) = wilson_interval(50, 100);
        assert!(((lo + hi) / 2.0 - 0.5).abs() < 1e-12);
        assert!((lo - 0.403_831).abs() < 1e-5, "{lo}");

        let (lo, hi) = wilson_interval(10, 1000);
        assert!(lo < 0.01 && 0.01 < hi);

        assert_eq!(wilson_interval(7, 7).1, 1.0);
    }

    #[test]
    fn wilson_brackets_estimate() {
        for n in [1u64, 2, 17, 1000, 10_000_000] {
            for e in [0, 1, n / 3, n / 2, n - 1, n] {
                let (lo, hi) = wilson_interval(e, n);
                let p = e as f64 / n as f64;
                assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0, "{e}/{n}: {lo} {hi}");
            }
        }
    }

    #[test]
    fn streams_differ_by_key() {
        use rand::RngCore;
        let a = frame_stream(1, 0.0, 40, 0).next_u64();
        assert_eq!(a, frame_stream(1, 0.0, 40, 0).next_u64());
        for other in [
            frame_stream(2, 0.0, 40, 0),
            frame_stream(1, 10.0, 40, 0),
            frame_stream(1, 0.0, 20, 0),
            frame_stream(1, 0.0, 40, 1),
        ] {
            let mut other = other;
            assert_ne!(a, other.next_u64());
        }
    }

    #[test]
    fn sweep_cardinality_and_order() {
        let mut cfg = sweep(&["d7"], &[-100.0, -90.0, -80.0], &[DetectorId::Mrc, DetectorId::PWcnde]);
        cfg.max_data_symbols = 2000;
        let pts = run_sweep(&cfg).unwrap();
        assert_eq!(pts.len(), 6);
        let order: Vec<(f64, DetectorId)> = pts.iter().map(|p| (p.power_dbm, p.detector)).collect();
        assert_eq!(
            order,
            vec![
                (-100.0, DetectorId::Mrc),
                (-100.0, DetectorId::PWcnde),
                (-90.0, DetectorId::Mrc),
                (-90.0, DetectorId::PWcnde),
                (-80.0, DetectorId::Mrc),
                (-80.0, DetectorId::PWcnde),
            ]
        );
    }

    #[test]
    fn results_do_not_depend_on_detector_set() {
        let mut cfg = sweep(&["d1", "d5"], &[10.0], &[DetectorId::Mrc, DetectorId::PWcnde, DetectorId::Elrt]);
        cfg.max_data_symbols = 20_000;
        cfg.min_errors = 30;
        let all = run_cell(&cfg, 10.0, 40).unwrap();
        for (j, &d) in cfg.detectors.iter().enumerate() {
            assert_eq!(run_ber_point(&cfg, d, 10.0, 40).unwrap(), all[j]);
        }
    }

    #[test]
    fn frames_are_keyed_by_cell() {
        let cfg = sweep(&["d7"], &[0.0], &[DetectorId::Mrc]);
        let a = cell_frame(&cfg, 0.0, 40, 3).unwrap();
        assert_eq!(a, cell_frame(&cfg, 0.0, 40, 3).unwrap());
        assert_ne!(a.symbols, cell_frame(&cfg, 0.0, 40, 4).unwrap().symbols);
        assert_ne!(a.symbols, cell_frame(&cfg, 10.0, 40, 3).unwrap().symbols);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut cfg = sweep(&["d1", "d3"], &[-20.0, 0.0], &[DetectorId::Elrt, DetectorId::CWcnde, DetectorId::MWcnde]);
        cfg.max_data_symbols = 50_000;
        let run = |workers| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap();
            let pts = pool.install(|| run_sweep(&cfg)).unwrap();
            let mut buf = Vec::new();
            write_ber_csv(&pts, &mut buf).unwrap();
            buf
        };
        assert_eq!(run(1), run(8));
    }

    #[test]
    fn raising_the_cap_keeps_the_prefix() {
        let mut cfg = sweep(&["d7"], &[0.0], &[DetectorId::PWcnde]);
        cfg.min_errors = u64::MAX;
        cfg.max_data_symbols = 5000;
        let short = run_cell(&cfg, 0.0, 40).unwrap().remove(0);
        cfg.max_data_symbols = 9000;
        let long = run_cell(&cfg, 0.0, 40).unwrap().remove(0);
        assert_eq!(short.data_symbols, 5000);
        assert_eq!(long.data_symbols, 9000);
        assert!(long.errors >= short.errors);
        // errors of the first five frames, recomputed frame by frame
        let mut sum = 0;
        for f in 0..5 {
            let frame = cell_frame(&cfg, 0.0, 40, f).unwrap();
            let obs = frame.observation();
            let pilots: Vec<_> = obs.pilots().collect();
            let refs = train_references(&pilots, 40).unwrap();
            let mut y = Vec::new();
            for (i, &x) in frame.data_symbols().iter().enumerate() {
                obs.data_slot(i, &mut y);
                let amps: Vec<f64> = y.iter().map(|&v| amplitude(v)).collect();
                sum += u64::from(fuse(&refs.weights_p(&amps)).bit != x);
            }
        }
        assert_eq!(short.errors, sum);
    }

    #[test]
    fn ber_is_one_half_when_signal_vanishes() {
        let dets = [
            DetectorId::Mrc,
            DetectorId::Stat,
            DetectorId::Elrt,
            DetectorId::MWcnde,
            DetectorId::PWcnde,
            DetectorId::DWcnde,
            DetectorId::CWcnde,
        ];
        let cfg = sweep(&["d7"], &[-100.0], &dets);
        for p in run_sweep(&cfg).unwrap() {
            assert!((0.45..=0.55).contains(&p.ber), "{p:?}");
            assert!(p.errors >= cfg.min_errors);
        }
    }

    #[test]
    fn mrc_improves_with_power() {
        let mut cfg = sweep(&["d7"], &[-40.0, -30.0], &[DetectorId::Mrc]);
        cfg.min_errors = 1000;
        let pts = run_sweep(&cfg).unwrap();
        assert!(pts[1].ci_hi < pts[0].ci_lo, "{pts:?}");
    }

    #[test]
    fn scatter_rows_are_normalized() {
        let cfg = sweep(&["d1", "d5", "d8"], &[0.0], &[]);
        for det in [DetectorId::PWcnde, DetectorId::DWcnde, DetectorId::CWcnde, DetectorId::MWcnde] {
            let b = export_scatter(&cfg, det, 0.0, 2500).unwrap();
            assert_eq!(b.rows.len(), 2500);
            assert!(b.rows.iter().all(|r| (-1.0..=1.0).contains(&r.norm_weight_diff)));
            assert!(b.rows.iter().any(|r| r.norm_weight_diff.abs() == 1.0));
            assert!(b.rows.iter().all(|r| r.decided_bit == (r.norm_weight_diff > 0.0)));
        }
        assert!(export_scatter(&cfg, DetectorId::Elrt, 0.0, 10).is_err());
    }

    #[test]
    fn validation() {
        let base = sweep(&["d7"], &[0.0], &[DetectorId::Mrc]);
        let mut c = base.clone();
        c.power_grid_dbm.clear();
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.min_errors = 0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.np_grid = Some(vec![6, 7]);
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.max_data_symbols = 10;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.detectors = vec![DetectorId::PWcnde];
        c.np_grid = Some(vec![2]);
        assert!(c.validate().is_err());
        let mut c = base;
        c.kernel_c = Some(-1.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn csv_format() {
        let p = BerPoint {
            detector: DetectorId::CWcnde,
            power_dbm: -15.0,
            np: 40,
            k_nodes: 3,
            data_symbols: 1000,
            errors: 10,
            ber: 0.01,
            ci_lo: 0.005,
            ci_hi: 0.02,
            ties: 0,
            seed: 7,
            skipped_frames: 0,
        };
        let mut buf = Vec::new();
        write_ber_csv(&[p], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], BER_CSV_HEADER);
        assert_eq!(
            lines[1],
            "c-wcnde,-1.50000000e1,40,3,1000,10,1.00000000e-2,5.00000000e-3,2.00000000e-2,0,7"
        );
    }

    #[test]
    fn lemma1_rows() {
        let det = StatCsiDetector::new(body_channel_model("d7").unwrap(), NoiseSpec::default(), 1e-3).unwrap();
        let y = ComplexSample::new((1e-3 * det.dist().mean().unwrap()).sqrt(), 0.0);
        let n0b = NoiseSpec::default().noise_power_watts();
        let cfg = Lemma1Config {
            detector: det,
            y,
            np_grid: vec![20, 200],
            kernel_c_grid: vec![0.1 / n0b, 1.0 / n0b],
            seeds: 4,
            master_seed: 1,
        };
        let rows = run_lemma1(&cfg).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.mean_gap.is_finite() && r.mean_gap >= 0.0));
        assert_eq!(rows, run_lemma1(&cfg).unwrap());
    }
}
