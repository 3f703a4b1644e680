//! Random problem instances.

use obdd_core::model::{min_separation, synthesize_direct};
use obdd_core::{CMat, Channel, Codebook, GridSpec, Measurement, Message, Path, C64};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::rng::{stream, Stream};

/// Rejection-sampling budget for delay sets.
pub const MAX_DELAY_DRAWS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSpec {
    /// Message length.
    pub k: usize,
    /// Number of paths.
    pub s: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Constellation {
    /// Complex Gaussian direction, uniform on the unit sphere.
    UnitSphere,
    /// Nonnegative integer symbols below `order`, normalized.
    Ask { order: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeModel {
    /// `|c| = 1`, uniform phase.
    UnitModulus,
    /// `|c|` uniform in `[0.5, 1.5]`, uniform phase.
    LognormalBand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub m: usize,
    pub users: Vec<UserSpec>,
    /// Per-user minimum wrap-around delay gap; `None` means `1 / N`.
    #[serde(default)]
    pub min_sep: Option<f64>,
    #[serde(default = "default_constellation")]
    pub constellation: Constellation,
    #[serde(default = "default_amplitude")]
    pub amplitude_model: AmplitudeModel,
    #[serde(default)]
    pub seed: u64,
}

fn default_constellation() -> Constellation {
    Constellation::UnitSphere
}

fn default_amplitude() -> AmplitudeModel {
    AmplitudeModel::LognormalBand
}

impl InstanceSpec {
    /// Users with the given `(k, s)` pairs and default models.
    pub fn new(m: usize, users: &[(usize, usize)], seed: u64) -> Self {
        Self {
            m,
            users: users.iter().map(|&(k, s)| UserSpec { k, s }).collect(),
            min_sep: None,
            constellation: default_constellation(),
            amplitude_model: default_amplitude(),
            seed,
        }
    }

    pub fn grid(&self) -> Result<GridSpec> {
        Ok(GridSpec::new(self.m)?)
    }

    pub fn min_sep_value(&self) -> f64 {
        self.min_sep.unwrap_or(1.0 / (4 * self.m + 1) as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(HarnessError::InvalidSpec("m must be positive".into()));
        }
        if self.users.is_empty() {
            return Err(HarnessError::InvalidSpec("at least one user is required".into()));
        }
        if self.users.iter().any(|u| u.k == 0 || u.s == 0) {
            return Err(HarnessError::InvalidSpec(
                "every user needs k >= 1 and s >= 1".into(),
            ));
        }
        let sep = self.min_sep_value();
        let smax = self.users.iter().map(|u| u.s).max().unwrap_or(1) as f64;
        if !(sep >= 0.0) || sep * smax >= 0.5 {
            return Err(HarnessError::InvalidSpec(format!(
                "min_sep {sep} too large for {smax} paths"
            )));
        }
        if let Constellation::Ask { order } = self.constellation {
            if order < 2 {
                return Err(HarnessError::InvalidSpec("ASK order must be at least 2".into()));
            }
        }
        Ok(())
    }
}

/// A generated problem with its ground truth.
#[derive(Debug, Clone)]
pub struct Instance {
    pub grid: GridSpec,
    pub codebooks: Vec<Codebook>,
    pub channels: Vec<Channel>,
    pub messages: Vec<Message>,
    /// Transmitted ASK symbols per user.
    pub symbols: Option<Vec<Vec<u32>>>,
    pub y_clean: Measurement,
}

impl Instance {
    /// Sum over users of `sum_k |c_k|`.
    pub fn atomic_norm(&self) -> f64 {
        self.channels
            .iter()
            .zip(&self.messages)
            .map(|(c, f)| obdd_core::model::atomic_norm_of_decomposition(c, f))
            .sum()
    }

    pub fn sparsities(&self) -> Vec<usize> {
        self.channels.iter().map(Channel::s).collect()
    }
}

/// Draws a random instance; identical specs give bit-identical instances.
pub fn gen_instance(spec: &InstanceSpec) -> Result<Instance> {
    spec.validate()?;
    let grid = spec.grid()?;
    let n = grid.n();
    let mut rng = stream(spec.seed, Stream::Instance);
    let sep = spec.min_sep_value();

    let mut codebooks = Vec::with_capacity(spec.users.len());
    let mut channels = Vec::with_capacity(spec.users.len());
    let mut messages = Vec::with_capacity(spec.users.len());
    let mut symbols = Vec::new();
    for (i, u) in spec.users.iter().enumerate() {
        let entries = CMat::from_fn(n, u.k, |_, _| C64::new(StandardNormal.sample(&mut rng), 0.0));
        codebooks.push(Codebook::new(i, entries, grid)?);

        let delays = draw_delays(&mut rng, u.s, sep)?;
        let paths = delays
            .into_iter()
            .map(|delay| {
                let mag = match spec.amplitude_model {
                    AmplitudeModel::UnitModulus => 1.0,
                    AmplitudeModel::LognormalBand => rng.random_range(0.5..=1.5),
                };
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                Path {
                    amplitude: C64::from_polar(mag, phase),
                    delay,
                }
            })
            .collect();
        channels.push(Channel::new(paths)?);

        match spec.constellation {
            Constellation::UnitSphere => {
                let f: Vec<C64> = (0..u.k)
                    .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
                    .collect();
                messages.push(Message::new(f)?);
            }
            Constellation::Ask { order } => {
                let g = draw_ask_symbols(&mut rng, u.k, order);
                messages.push(Message::new(
                    g.iter().map(|&v| C64::new(v as f64, 0.0)).collect(),
                )?);
                symbols.push(g);
            }
        }
    }
    let y_clean = synthesize_direct(&channels, &messages, &codebooks, grid)?;
    Ok(Instance {
        grid,
        codebooks,
        channels,
        messages,
        symbols: matches!(spec.constellation, Constellation::Ask { .. }).then_some(symbols),
        y_clean,
    })
}

/// `s` delays in `[0, 1)` with pairwise wrap-around gaps of at least `sep`.
pub fn draw_delays<R: Rng>(rng: &mut R, s: usize, sep: f64) -> Result<Vec<f64>> {
    for _ in 0..MAX_DELAY_DRAWS {
        let mut d: Vec<f64> = (0..s).map(|_| rng.random::<f64>()).collect();
        if min_separation(&d) >= sep {
            d.sort_by(f64::total_cmp);
            return Ok(d);
        }
    }
    Err(HarnessError::InfeasibleSeparation {
        min_sep: sep,
        draws: MAX_DELAY_DRAWS,
    })
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Uniform over symbol vectors in `{0..order-1}^k` whose nonzero entries have gcd 1.
///
/// A vector and its integer multiples normalize to the same message, so only
/// the primitive representative can be identified from the normalized message.
pub fn draw_ask_symbols<R: Rng>(rng: &mut R, k: usize, order: u32) -> Vec<u32> {
    loop {
        let g: Vec<u32> = (0..k).map(|_| rng.random_range(0..order)).collect();
        if g.iter().fold(0, |a, &b| gcd(a, b)) == 1 {
            return g;
        }
    }
}
