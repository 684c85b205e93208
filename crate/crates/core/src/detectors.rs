//! Noncoherent detectors: pilot-trained reference values, the weight-comparing
//! fusion family (probability, deviation, combination and majority forms) and
//! the kernel-density empirical likelihood ratio test.
//!
//! Detectors only ever see received samples. Exact ties in any comparison
//! decide 0 and are reported through [`Decision::tie`].

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::ComplexSample;
use crate::error::{Error, Result};
use crate::numerics::LogSumExp;

/// Outcome of a binary decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub bit: bool,
    /// The statistic was exactly zero and the bit defaulted to 0.
    pub tie: bool,
}

impl Decision {
    /// Decides 1 iff `statistic > 0`.
    pub fn from_statistic(statistic: f64) -> Self {
        Self {
            bit: statistic > 0.0,
            tie: statistic == 0.0,
        }
    }
}

/// Detector identifiers used in configs and CSV output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DetectorId {
    Mrc,
    Stat,
    Elrt,
    MWcnde,
    PWcnde,
    DWcnde,
    CWcnde,
}

impl DetectorId {
    pub const ALL: [DetectorId; 7] = [
        DetectorId::Mrc,
        DetectorId::Stat,
        DetectorId::Elrt,
        DetectorId::MWcnde,
        DetectorId::PWcnde,
        DetectorId::DWcnde,
        DetectorId::CWcnde,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DetectorId::Mrc => "mrc",
            DetectorId::Stat => "stat",
            DetectorId::Elrt => "elrt",
            DetectorId::MWcnde => "m-wcnde",
            DetectorId::PWcnde => "p-wcnde",
            DetectorId::DWcnde => "d-wcnde",
            DetectorId::CWcnde => "c-wcnde",
        }
    }

    /// True for the reference-value detectors that fuse per-node weights.
    pub fn is_wcnde(&self) -> bool {
        matches!(
            self,
            DetectorId::MWcnde | DetectorId::PWcnde | DetectorId::DWcnde | DetectorId::CWcnde
        )
    }
}

impl fmt::Display for DetectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetectorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectorId::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| {
                let valid: Vec<&str> = DetectorId::ALL.iter().map(|d| d.as_str()).collect();
                Error::Config(format!(
                    "unknown detector id {s:?}; valid ids are {}",
                    valid.join(", ")
                ))
            })
    }
}

impl TryFrom<String> for DetectorId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DetectorId> for String {
    fn from(d: DetectorId) -> Self {
        d.as_str().to_owned()
    }
}

/// Per-node hypothesis weights `(w1, w0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightPair {
    pub w1: f64,
    pub w0: f64,
}

/// Reference values learned from one node's pilots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeReference {
    /// Threshold amplitude, the mean pilot amplitude.
    pub a_th: f64,
    /// Mean amplitude over the "1" pilots.
    pub a1: f64,
    /// Mean amplitude over the "0" pilots.
    pub a0: f64,
    /// Correctly detected "1" pilots.
    pub g1: usize,
    /// Correctly detected "0" pilots.
    pub g0: usize,
    /// Clamped empirical P(detect 1 | sent 1).
    pub p11: f64,
    /// Clamped empirical P(detect 0 | sent 0).
    pub p00: f64,
}

/// Reference values for all K nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceValues {
    pub np: usize,
    pub nodes: Vec<NodeReference>,
}

/// Envelope `|y|` of a received sample.
pub fn amplitude(y: ComplexSample) -> f64 {
    // plain sqrt: received samples are nowhere near overflow, and hypot is slow
    y.norm_sqr().sqrt()
}

/// Per-node hard decision: 1 iff `amp >= a_th`.
pub fn threshold_detect(amp: f64, a_th: f64) -> bool {
    amp >= a_th
}

/// Empirical conditional probability from a correct-detection count, kept
/// inside `[2/np, 1 - 2/np]`.
pub fn clamped_probability(g: usize, np: usize) -> f64 {
    let step = 2.0 / np as f64;
    if g == 0 {
        step
    } else if g == np / 2 {
        1.0 - step
    } else {
        g as f64 * step
    }
}

fn check_training_length(np: usize) -> Result<()> {
    if !np.is_multiple_of(2) {
        return Err(Error::Config(format!("pilot length must be even, got {np}")));
    }
    if np < 4 {
        return Err(Error::Config(format!(
            "pilot length {np} leaves no room between the probability bounds 2/np and 1 - 2/np; need np >= 4"
        )));
    }
    Ok(())
}

impl NodeReference {
    /// Trains from one node's `np` pilot samples (first half sent as 1).
    pub fn train(pilots: &[ComplexSample]) -> Result<Self> {
        let np = pilots.len();
        check_training_length(np)?;
        let half = np / 2;
        let (on, off) = pilots.split_at(half);
        let a1 = on.iter().map(|&y| amplitude(y)).sum::<f64>() / half as f64;
        let a0 = off.iter().map(|&y| amplitude(y)).sum::<f64>() / half as f64;
        // Mean over all np samples, written as the midpoint of the two half means.
        let a_th = 0.5 * (a1 + a0);
        let g1 = on.iter().filter(|&&y| threshold_detect(amplitude(y), a_th)).count();
        let g0 = off.iter().filter(|&&y| !threshold_detect(amplitude(y), a_th)).count();
        Ok(Self {
            a_th,
            a1,
            a0,
            g1,
            g0,
            p11: clamped_probability(g1, np),
            p00: clamped_probability(g0, np),
        })
    }

    pub fn hard_decision(&self, amp: f64) -> bool {
        threshold_detect(amp, self.a_th)
    }

    pub fn weights_p(&self, amp: f64) -> WeightPair {
        if self.hard_decision(amp) {
            WeightPair {
                w1: self.p11.ln(),
                w0: (1.0 - self.p00).ln(),
            }
        } else {
            WeightPair {
                w1: (1.0 - self.p11).ln(),
                w0: self.p00.ln(),
            }
        }
    }

    pub fn weights_d(&self, amp: f64) -> WeightPair {
        WeightPair {
            w1: amp - self.a1,
            w0: self.a0 - amp,
        }
    }

    /// Combination weights. The probability term `log(P^z)` is evaluated as
    /// `z * log(P)`. Requires `a1, a0, a_th > 0`; see [`Self::check_nondegenerate`].
    pub fn weights_c(&self, amp: f64) -> WeightPair {
        let d = self.weights_d(amp);
        let (d1, d0) = (d.w1 * d.w1, d.w0 * d.w0);
        let (ln1, ln0) = if self.hard_decision(amp) {
            (self.p11.ln(), (1.0 - self.p00).ln())
        } else {
            ((1.0 - self.p11).ln(), self.p00.ln())
        };
        WeightPair {
            w1: -d1 / self.a1 + d1 * ln1 / self.a_th,
            w0: -d0 / self.a0 + d0 * ln0 / self.a_th,
        }
    }

    /// Majority-rule votes expressed as weights: one vote for the hard decision.
    pub fn weights_m(&self, amp: f64) -> WeightPair {
        if self.hard_decision(amp) {
            WeightPair { w1: 1.0, w0: 0.0 }
        } else {
            WeightPair { w1: 0.0, w0: 1.0 }
        }
    }

    /// Errors when an amplitude reference used as a divisor is zero.
    pub fn check_nondegenerate(&self, node: usize) -> Result<()> {
        for (what, v) in [("a1", self.a1), ("a0", self.a0), ("a_th", self.a_th)] {
            if !(v > 0.0) {
                return Err(Error::DegenerateTraining { node, what });
            }
        }
        Ok(())
    }
}

/// Trains reference values for every node. `pilot_samples[k]` holds node k's
/// `np` pilots.
pub fn train_references<P: AsRef<[ComplexSample]>>(
    pilot_samples: &[P],
    np: usize,
) -> Result<ReferenceValues> {
    check_training_length(np)?;
    let nodes = pilot_samples
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let p = p.as_ref();
            if p.len() != np {
                return Err(Error::Domain(format!(
                    "node {k} has {} pilot samples, expected {np}",
                    p.len()
                )));
            }
            NodeReference::train(p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReferenceValues { np, nodes })
}

impl ReferenceValues {
    pub fn k_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn check_nondegenerate(&self) -> Result<()> {
        self.nodes
            .iter()
            .enumerate()
            .try_for_each(|(k, n)| n.check_nondegenerate(k))
    }

    fn check_len(&self, amps: &[f64]) {
        assert_eq!(
            amps.len(),
            self.nodes.len(),
            "one amplitude per trained node is required"
        );
    }

    pub fn weights_p(&self, amps: &[f64]) -> Vec<WeightPair> {
        self.check_len(amps);
        self.nodes.iter().zip(amps).map(|(n, &a)| n.weights_p(a)).collect()
    }

    pub fn weights_d(&self, amps: &[f64]) -> Vec<WeightPair> {
        self.check_len(amps);
        self.nodes.iter().zip(amps).map(|(n, &a)| n.weights_d(a)).collect()
    }

    pub fn weights_c(&self, amps: &[f64]) -> Result<Vec<WeightPair>> {
        self.check_len(amps);
        self.check_nondegenerate()?;
        Ok(self.nodes.iter().zip(amps).map(|(n, &a)| n.weights_c(a)).collect())
    }

    pub fn weights_m(&self, amps: &[f64]) -> Vec<WeightPair> {
        self.check_len(amps);
        self.nodes.iter().zip(amps).map(|(n, &a)| n.weights_m(a)).collect()
    }

    /// Majority rule over the per-node hard decisions.
    pub fn detect_m(&self, amps: &[f64]) -> Decision {
        fuse(&self.weights_m(amps))
    }

    /// `sum(w1) - sum(w0)` under the weights of a weight-comparing detector,
    /// without materializing the per-node pairs. Agrees bit for bit with
    /// [`weight_difference`] over the corresponding `weights_*` vector.
    pub fn weight_difference(&self, detector: DetectorId, amps: &[f64]) -> Result<f64> {
        self.check_len(amps);
        let rule: fn(&NodeReference, f64) -> WeightPair = match detector {
            DetectorId::PWcnde => NodeReference::weights_p,
            DetectorId::DWcnde => NodeReference::weights_d,
            DetectorId::MWcnde => NodeReference::weights_m,
            DetectorId::CWcnde => {
                self.check_nondegenerate()?;
                NodeReference::weights_c
            }
            other => {
                return Err(Error::Config(format!("{other} is not a weight-comparing detector")));
            }
        };
        let (s1, s0) = self
            .nodes
            .iter()
            .zip(amps)
            .fold((0.0, 0.0), |(s1, s0), (n, &a)| {
                let w = rule(n, a);
                (s1 + w.w1, s0 + w.w0)
            });
        Ok(s1 - s0)
    }

    /// Fused decision of a weight-comparing detector.
    pub fn detect(&self, detector: DetectorId, amps: &[f64]) -> Result<Decision> {
        self.weight_difference(detector, amps).map(Decision::from_statistic)
    }
}

/// `sum(w1) - sum(w0)`.
pub fn weight_difference(pairs: &[WeightPair]) -> f64 {
    let (s1, s0) = pairs
        .iter()
        .fold((0.0, 0.0), |(s1, s0), p| (s1 + p.w1, s0 + p.w0));
    s1 - s0
}

/// Fusion rule: 1 iff the weight difference is positive.
pub fn fuse(pairs: &[WeightPair]) -> Decision {
    Decision::from_statistic(weight_difference(pairs))
}

/// Kernel precision of the empirical likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElrtConfig {
    kernel_c: f64,
}

impl ElrtConfig {
    pub fn new(kernel_c: f64) -> Result<Self> {
        if kernel_c.is_finite() && kernel_c > 0.0 {
            Ok(Self { kernel_c })
        } else {
            Err(Error::Config(format!("kernel_c must be finite and > 0, got {kernel_c}")))
        }
    }

    /// `c = 1 / (N0 B)`.
    pub fn for_noise_power(noise_power_watts: f64) -> Result<Self> {
        Self::new(1.0 / noise_power_watts)
    }

    pub fn kernel_c(&self) -> f64 {
        self.kernel_c
    }
}

/// Log of one node's kernel density estimate at `y` over `pilots`:
/// `ln[(1/n) sum_m (c/pi) exp(-c |y - y_m|^2)]`.
pub fn kde_log_density(pilots: &[ComplexSample], y: ComplexSample, cfg: ElrtConfig) -> f64 {
    let c = cfg.kernel_c;
    let mut acc = LogSumExp::default();
    for ym in pilots {
        acc.push(-c * (y - ym).norm_sqr());
    }
    acc.value() + (c / PI).ln() - (pilots.len() as f64).ln()
}

/// Empirical log-likelihoods `(ln L1, ln L0)` of the received vector `y`
/// (one entry per node) given each node's `np` pilots.
pub fn elrt_logliks<P: AsRef<[ComplexSample]>>(
    pilot_samples: &[P],
    y: &[ComplexSample],
    cfg: ElrtConfig,
) -> (f64, f64) {
    assert_eq!(pilot_samples.len(), y.len(), "one received sample per node");
    let mut l1 = 0.0;
    let mut l0 = 0.0;
    for (pilots, &yk) in pilot_samples.iter().zip(y) {
        let pilots = pilots.as_ref();
        let half = pilots.len() / 2;
        l1 += kde_log_density(&pilots[..half], yk, cfg);
        l0 += kde_log_density(&pilots[half..], yk, cfg);
    }
    (l1, l0)
}

/// Empirical likelihood ratio test.
pub fn detect_elrt<P: AsRef<[ComplexSample]>>(
    pilot_samples: &[P],
    y: &[ComplexSample],
    cfg: ElrtConfig,
) -> Decision {
    let (l1, l0) = elrt_logliks(pilot_samples, y, cfg);
    Decision::from_statistic(l1 - l0)
}
