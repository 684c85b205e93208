//! Baselines that use channel knowledge the noncoherent detectors lack.
//!
//! The statistical-CSI density of a received sample integrates the Gaussian
//! observation density over the channel law. With a uniform phase the complex
//! integral collapses to one dimension in `rho = |h|^2`:
//!
//! ```text
//! f(y | x=1) = int f_rho(rho) / (pi s2) exp(-(|y|^2 + P rho)/s2) I0(2 sqrt(P rho) |y| / s2) d rho
//! ```
//!
//! with `s2 = N0 B`, which is evaluated by adaptive quadrature in the log domain.

use std::f64::consts::PI;

use rand::Rng;

use crate::channel::{ComplexSample, GainDistribution, NoiseSpec};
use crate::detectors::{kde_log_density, Decision, ElrtConfig};
use crate::error::{Error, Result};
use crate::numerics::{integrate, log_i0e, Quadrature};

/// Smallest CDF level the quadrature domain must reach.
pub const MIN_TRUNCATION_LEVEL: f64 = 1.0 - 1e-10;

/// Likelihood evaluator for one node with known channel statistics.
#[derive(Debug, Clone)]
pub struct StatCsiDetector {
    dist: GainDistribution,
    noise: NoiseSpec,
    tx_power_watts: f64,
    truncation_level: f64,
    quadrature: Quadrature,
    /// Quantile of `truncation_level`.
    rho_max: f64,
    /// Fixed breakpoints over the bulk of the gain law.
    bulk_points: Vec<f64>,
}

impl StatCsiDetector {
    pub fn new(dist: GainDistribution, noise: NoiseSpec, tx_power_watts: f64) -> Result<Self> {
        Self::with_settings(dist, noise, tx_power_watts, MIN_TRUNCATION_LEVEL, Quadrature::default())
    }

    pub fn with_settings(
        dist: GainDistribution,
        noise: NoiseSpec,
        tx_power_watts: f64,
        truncation_level: f64,
        quadrature: Quadrature,
    ) -> Result<Self> {
        if !(tx_power_watts.is_finite() && tx_power_watts >= 0.0) {
            return Err(Error::Config(format!(
                "transmit power must be finite and >= 0 W, got {tx_power_watts}"
            )));
        }
        if !(MIN_TRUNCATION_LEVEL..1.0).contains(&truncation_level) {
            return Err(Error::Config(format!(
                "truncation level must lie in [1 - 1e-10, 1), got {truncation_level}"
            )));
        }
        let rho_max = dist.quantile(truncation_level)?;
        let bulk_points = [1e-6, 0.01, 0.1, 0.5, 0.9, 0.99, 1.0 - 1e-6]
            .into_iter()
            .map(|u| dist.quantile(u))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dist,
            noise,
            tx_power_watts,
            truncation_level,
            quadrature,
            rho_max,
            bulk_points,
        })
    }

    pub fn dist(&self) -> &GainDistribution {
        &self.dist
    }

    pub fn tx_power_watts(&self) -> f64 {
        self.tx_power_watts
    }

    pub fn truncation_level(&self) -> f64 {
        self.truncation_level
    }

    /// `ln f(y | x)`.
    pub fn conditional_log_density(&self, y: ComplexSample, x: bool) -> Result<f64> {
        let s2 = self.noise.noise_power_watts();
        let noise_only = -(PI * s2).ln() - y.norm_sqr() / s2;
        if !x || self.tx_power_watts == 0.0 {
            return Ok(noise_only);
        }
        self.log_density_on(y.norm()).map_err(|e| match e {
            Error::Numerical(msg) => Error::Numerical(format!(
                "statistical-CSI density at |y| = {:e}, P = {:e} W: {msg}",
                y.norm(),
                self.tx_power_watts
            )),
            other => other,
        })
    }

    fn log_density_on(&self, amp: f64) -> Result<f64> {
        let p = self.tx_power_watts;
        let s2 = self.noise.noise_power_watts();
        let sigma = s2.sqrt();
        let ln_norm = -(PI * s2).ln();
        let dist = self.dist;
        let log_integrand = move |rho: f64| -> f64 {
            if rho <= 0.0 {
                return f64::NEG_INFINITY;
            }
            let s = (p * rho).sqrt();
            let dev = amp - s;
            dist.ln_pdf(rho) + ln_norm - dev * dev / s2 + log_i0e(2.0 * amp * s / s2)
        };

        // The Rician kernel peaks near sqrt(P rho) = |y| with width ~sigma in
        // amplitude, i.e. ~2 |y| sigma / P in rho.
        let peak = amp * amp / p;
        let width = (2.0 * amp * sigma + s2) / p;
        let upper = self.rho_max.max(peak + 12.0 * width);
        let mut points = vec![0.0, upper];
        points.extend(self.bulk_points.iter().copied().filter(|&r| r < upper));
        for m in [-8.0, -3.0, -1.0, 0.0, 1.0, 3.0, 8.0] {
            let r = peak + m * width;
            if r > 0.0 && r < upper {
                points.push(r);
            }
        }
        points.sort_by(f64::total_cmp);
        points.dedup();

        let mut shift = f64::NEG_INFINITY;
        for w in points.windows(2) {
            for t in [0.0, 0.25, 0.5, 0.75] {
                let r = w[0] + t * (w[1] - w[0]);
                shift = shift.max(log_integrand(r));
            }
        }
        if !shift.is_finite() {
            return Err(Error::Numerical(format!(
                "log-integrand has no finite probe value (max {shift})"
            )));
        }
        let result = integrate(
            |rho| (log_integrand(rho) - shift).exp(),
            &points,
            self.quadrature,
        )?;
        if !(result.value > 0.0) {
            return Err(Error::Numerical(format!(
                "integral underflowed: {:e} after shift {shift}",
                result.value
            )));
        }
        Ok(result.value.ln() + shift)
    }
}

/// LRT with statistical CSI: 1 iff `sum_k ln f(y_k|1) > sum_k ln f(y_k|0)`.
pub fn detect_stat_csi(dets: &[StatCsiDetector], y: &[ComplexSample]) -> Result<Decision> {
    assert_eq!(dets.len(), y.len(), "one received sample per node");
    let mut llr = 0.0;
    for (det, &yk) in dets.iter().zip(y) {
        llr += det.conditional_log_density(yk, true)? - det.conditional_log_density(yk, false)?;
    }
    Ok(Decision::from_statistic(llr))
}

/// Coherent maximum-ratio combining with perfect CSI: 1 iff
/// `Re(sum conj(h_k) y_k) > sqrt(P)/2 * sum |h_k|^2`.
pub fn detect_mrc(h: &[ComplexSample], y: &[ComplexSample], tx_power_watts: f64) -> Decision {
    assert_eq!(h.len(), y.len(), "one channel per received sample");
    let (corr, gain) = h
        .iter()
        .zip(y)
        .fold((0.0, 0.0), |(c, g), (hk, yk)| (c + (hk.conj() * yk).re, g + hk.norm_sqr()));
    Decision::from_statistic(corr - 0.5 * tx_power_watts.sqrt() * gain)
}

/// Distance form of the coherent rule; used to cross-check [`detect_mrc`].
pub fn detect_mrc_distance(h: &[ComplexSample], y: &[ComplexSample], tx_power_watts: f64) -> Decision {
    let sp = tx_power_watts.sqrt();
    let (d1, d0) = h
        .iter()
        .zip(y)
        .fold((0.0, 0.0), |(d1, d0), (hk, yk)| (d1 + (yk - hk * sp).norm_sqr(), d0 + yk.norm_sqr()));
    Decision::from_statistic(d0 - d1)
}

/// Relative gap `|L_kde - f(y|1)| / f(y|1)` between one node's kernel density
/// estimate from `np/2` freshly drawn "1" pilots and the statistical-CSI
/// density at the same `y`.
pub fn lemma1_gap<R: Rng + ?Sized>(
    det: &StatCsiDetector,
    np: usize,
    kernel: ElrtConfig,
    y: ComplexSample,
    rng: &mut R,
) -> Result<f64> {
    if np < 2 || !np.is_multiple_of(2) {
        return Err(Error::Config(format!("pilot length must be even and >= 2, got {np}")));
    }
    let sp = det.tx_power_watts.sqrt();
    let pilots: Vec<ComplexSample> = (0..np / 2)
        .map(|_| {
            let h = det.dist.sample_channel(rng);
            let w = det.noise.sample(rng);
            h * sp + w
        })
        .collect();
    let ln_kde = kde_log_density(&pilots, y, kernel);
    let ln_stat = det.conditional_log_density(y, true)?;
    let ratio = (ln_kde - ln_stat).exp();
    Ok((ratio - 1.0).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{body_channel_model, body_channel_models, dbm_to_watts};
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn d7_at(p_dbm: f64) -> StatCsiDetector {
        StatCsiDetector::new(body_channel_model("d7").unwrap(), NoiseSpec::default(), dbm_to_watts(p_dbm))
            .unwrap()
    }

    /// Monte Carlo marginalization: mean of the complex Gaussian density over
    /// channel draws, with its standard error.
    fn mc_density(det: &StatCsiDetector, y: Complex64, n: usize, seed: u64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s2 = det.noise.noise_power_watts();
        let sp = det.tx_power_watts.sqrt();
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..n {
            let h = det.dist.sample_channel(&mut rng);
            let v = (-(y - h * sp).norm_sqr() / s2).exp() / (PI * s2);
            sum += v;
            sum2 += v * v;
        }
        let mean = sum / n as f64;
        let var = (sum2 / n as f64 - mean * mean).max(0.0);
        (mean, (var / n as f64).sqrt())
    }

    #[test]
    fn noise_only_density() {
        let noise = NoiseSpec::new(-20.0, 1e5).unwrap(); // N0 B = 1 W
        assert!((noise.noise_power_watts() - 1.0).abs() < 1e-12);
        let det = StatCsiDetector::new(body_channel_model("d7").unwrap(), noise, 1.0).unwrap();
        let v = det.conditional_log_density(Complex64::new(0.0, 0.0), false).unwrap();
        assert!((v - (1.0 / PI).ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_power_makes_hypotheses_identical() {
        let det = StatCsiDetector::new(body_channel_model("d1").unwrap(), NoiseSpec::default(), 0.0).unwrap();
        for a in [0.0, 3e-7, 1e-6] {
            let y = Complex64::new(a, -0.5 * a);
            assert_eq!(
                det.conditional_log_density(y, true).unwrap(),
                det.conditional_log_density(y, false).unwrap()
            );
            let d = detect_stat_csi(std::slice::from_ref(&det), &[y]).unwrap();
            assert_eq!(d, Decision { bit: false, tie: true });
        }
    }

    #[test]
    fn quadrature_agrees_with_monte_carlo_on_d7() {
        // 0 dBm, y at the mean received amplitude
        let det = d7_at(0.0);
        let amp = (det.tx_power_watts * det.dist.mean().unwrap()).sqrt();
        let y = Complex64::new(0.6 * amp, 0.8 * amp);
        let q = det.conditional_log_density(y, true).unwrap().exp();
        let (mc, se) = mc_density(&det, y, 10_000_000, 77);
        assert!((q - mc).abs() < 3.0 * se, "quadrature {q:e}, monte carlo {mc:e} +- {se:e}");
    }

    #[test]
    fn quadrature_agrees_with_monte_carlo_on_all_models() {
        for m in body_channel_models() {
            for p_dbm in [-15.0, 0.0, 15.0] {
                let det = StatCsiDetector::new(m.dist, NoiseSpec::default(), dbm_to_watts(p_dbm)).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(3);
                // a typical received sample under x = 1
                let h = m.dist.sample_channel(&mut rng);
                let y = h * det.tx_power_watts.sqrt() + det.noise.sample(&mut rng);
                let q = det.conditional_log_density(y, true).unwrap().exp();
                let (mc, se) = mc_density(&det, y, 400_000, 5);
                assert!(
                    (q - mc).abs() < 3.0 * se + 1e-9 * q,
                    "{} at {p_dbm} dBm: quadrature {q:e}, mc {mc:e} +- {se:e}",
                    m.name
                );
            }
        }
    }

    #[test]
    fn conditional_densities_integrate_to_one() {
        // Radial integral over the plane: int 2 pi r f(r) dr.
        for (p_dbm, x) in [(-20.0, true), (0.0, true), (0.0, false)] {
            let det = d7_at(p_dbm);
            let s2 = det.noise.noise_power_watts();
            let reach = (det.tx_power_watts * det.rho_max).sqrt() + 12.0 * s2.sqrt();
            let mut pts: Vec<f64> = (0..=64).map(|i| reach * i as f64 / 64.0).collect();
            pts.dedup();
            let total = integrate(
                |r| {
                    2.0 * PI * r
                        * det
                            .conditional_log_density(Complex64::new(r, 0.0), x)
                            .unwrap()
                            .exp()
                },
                &pts,
                Quadrature { rel_tol: 1e-7, ..Default::default() },
            )
            .unwrap()
            .value;
            assert!((total - 1.0).abs() < 1e-4, "{p_dbm} dBm, x={x}: {total}");
        }
    }

    #[test]
    fn stat_detector_limits() {
        let det = d7_at(0.0);
        let dets = [det];
        assert!(!detect_stat_csi(&dets, &[Complex64::new(0.0, 0.0)]).unwrap().bit);
        let big = 10.0 * (dets[0].tx_power_watts * dets[0].dist.mean().unwrap()).sqrt();
        assert!(detect_stat_csi(&dets, &[Complex64::new(big, 0.0)]).unwrap().bit);
    }

    #[test]
    fn mrc_examples() {
        let one = Complex64::new(1.0, 0.0);
        let j = Complex64::new(0.0, 1.0);
        assert!(detect_mrc(&[one], &[Complex64::new(0.9, 0.0)], 1.0).bit);
        assert!(detect_mrc(&[one, j], &[one, j], 1.0).bit);
        assert!(!detect_mrc(&[one, j], &[Complex64::new(0.0, 0.0); 2], 1.0).bit);
    }

    #[test]
    fn mrc_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = body_channel_model("d4").unwrap();
        let noise = NoiseSpec::default();
        for i in 0..1_000_000 {
            let k = 1 + i % 4;
            let p = dbm_to_watts(rng.random_range(-40.0..10.0));
            let x = rng.random::<bool>();
            let h: Vec<Complex64> = (0..k).map(|_| d.sample_channel(&mut rng)).collect();
            let y: Vec<Complex64> = h
                .iter()
                .map(|hk| if x { hk * p.sqrt() } else { Complex64::new(0.0, 0.0) } + noise.sample(&mut rng))
                .collect();
            assert_eq!(detect_mrc(&h, &y, p).bit, detect_mrc_distance(&h, &y, p).bit);
        }
    }

    #[test]
    fn lemma1_gap_is_finite_and_nonnegative() {
        let det = d7_at(0.0);
        let kernel = ElrtConfig::for_noise_power(det.noise.noise_power_watts()).unwrap();
        let amp = (det.tx_power_watts * det.dist.mean().unwrap()).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for np in [2, 10, 100] {
            let g = lemma1_gap(&det, np, kernel, Complex64::new(amp, 0.0), &mut rng).unwrap();
            assert!(g.is_finite() && g >= 0.0);
        }
        assert!(lemma1_gap(&det, 3, kernel, Complex64::new(amp, 0.0), &mut rng).is_err());
    }

    #[test]
    fn settings_validation() {
        let d = body_channel_model("d7").unwrap();
        let n = NoiseSpec::default();
        assert!(StatCsiDetector::with_settings(d, n, 1.0, 0.999, Quadrature::default()).is_err());
        assert!(StatCsiDetector::new(d, n, -1.0).is_err());
    }
}
