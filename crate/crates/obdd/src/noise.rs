//! Additive circular Gaussian noise and the matching norm bound.

use obdd_core::{Measurement, C64};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::rng::{stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// `f64::INFINITY` for a noiseless measurement; written as `"inf"`.
    #[serde(with = "snr_serde")]
    pub snr_db: f64,
    /// Per-entry noise standard deviation.
    pub sigma_w: f64,
    /// High-probability bound on `||w||_2`.
    pub eta: f64,
}

/// SNR values as JSON numbers, with `"inf"` for the noiseless case.
pub mod snr_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn parse(s: &str) -> Result<f64, String> {
        match s.trim() {
            "inf" | "Inf" | "infinity" | "noiseless" => Ok(f64::INFINITY),
            t => t.parse::<f64>().map_err(|e| format!("invalid SNR {t:?}: {e}")),
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str("inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) => parse(&t).map_err(serde::de::Error::custom),
        }
    }
}

/// `sigma_w^2 = ||y_clean||^2 / (N 10^{snr/10})`.
pub fn noise_sigma(y_clean: &Measurement, snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        return 0.0;
    }
    let n = y_clean.len() as f64;
    (y_clean.norm().powi(2) / (n * 10f64.powf(snr_db / 10.0))).sqrt()
}

/// `eta = sigma_w sqrt(N + sqrt(2 N ln N))`.
pub fn eta_bound(sigma_w: f64, n: usize) -> f64 {
    let n = n as f64;
    sigma_w * (n + (2.0 * n * n.ln()).sqrt()).sqrt()
}

/// Adds noise at the given SNR, drawn from the noise stream of `seed`.
pub fn add_noise(y_clean: &Measurement, snr_db: f64, seed: u64) -> (Measurement, NoiseModel) {
    let sigma_w = noise_sigma(y_clean, snr_db);
    let model = NoiseModel {
        snr_db,
        sigma_w,
        eta: eta_bound(sigma_w, y_clean.len()),
    };
    if sigma_w == 0.0 {
        return (y_clean.clone(), model);
    }
    let mut rng = stream(seed, Stream::Noise);
    let normal = Normal::new(0.0, sigma_w / std::f64::consts::SQRT_2).expect("finite sigma");
    let y = y_clean
        .0
        .iter()
        .map(|v| v + C64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
        .collect();
    (Measurement(y), model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinite_snr_is_noiseless() {
        let y = Measurement(vec![C64::new(1.0, 2.0); 9]);
        let (z, m) = add_noise(&y, f64::INFINITY, 3);
        assert_eq!(z, y);
        assert_eq!((m.sigma_w, m.eta), (0.0, 0.0));
    }

    #[test]
    fn sigma_and_eta_reference_values() {
        // ||y||^2 = 50 over N = 50 at 0 dB gives unit variance
        let y = Measurement(vec![C64::new(1.0, 0.0); 50]);
        assert!((noise_sigma(&y, 0.0) - 1.0).abs() < 1e-15);
        assert!((eta_bound(1.0, 50) - 8.3534).abs() < 1e-4);
    }
}
