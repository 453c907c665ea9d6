//! Synthetic social-interaction stream generator.
//!
//! Events form a Poisson process. Each node acts with a heavy-tailed (Pareto)
//! activity level normalized to mean one, so the population emits
//! `num_nodes * base_rate` events per bin on average. Targets are drawn by a
//! Zipf-like popularity over a random rank order (never the acting node), and
//! the rate is modulated by a daily sinusoid through thinning. Burst episodes
//! add extra events aimed at a center node: during a burst the center's
//! incoming rate becomes `intensity` times its normal incoming rate, where the
//! normal rate is floored at the population mean (`base_rate` per bin) so that
//! bursts on unpopular nodes remain visible.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{build_graph, Action, InteractionEvent, NodeId, TemporalGraph};
use crate::rng::{self, Rng};
use crate::snapshot::DEFAULT_BIN_WIDTH;

const DAY_SECONDS: f64 = 86_400.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid generator config field `{field}`: {reason}")]
pub struct InvalidConfig {
    pub field: String,
    pub reason: &'static str,
}

fn invalid(field: &str, reason: &'static str) -> InvalidConfig {
    InvalidConfig {
        field: String::from(field),
        reason,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BurstCenter {
    Node(NodeId),
    Random(RandomTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RandomTag {
    Random,
}

impl BurstCenter {
    pub const RANDOM: BurstCenter = BurstCenter::Random(RandomTag::Random);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BurstSpec {
    pub center_node: BurstCenter,
    /// Seconds from the start of the stream.
    pub start: u64,
    pub duration: u64,
    /// Multiplier (> 1) on the center's incoming rate.
    pub intensity: f64,
}

/// Bursts placed at random bin-aligned starts on random centers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomBursts {
    pub count: usize,
    /// Seconds; defaults to one bin.
    #[serde(default)]
    pub duration: Option<u64>,
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub num_nodes: usize,
    /// Seconds covered by the stream.
    pub duration: u64,
    pub bin_width: u64,
    /// Expected events per node per bin.
    pub base_rate: f64,
    /// Pareto shape of per-node activity.
    pub activity_exponent: f64,
    /// Zipf exponent of target popularity.
    pub target_exponent: f64,
    /// Relative amplitude of the daily rate modulation, in `[0, 1]`.
    pub diurnal_amplitude: f64,
    pub bursts: Vec<BurstSpec>,
    pub random_bursts: Option<RandomBursts>,
    pub rng_seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            num_nodes: 1000,
            duration: 200 * DEFAULT_BIN_WIDTH,
            bin_width: DEFAULT_BIN_WIDTH,
            base_rate: 0.5,
            activity_exponent: 1.5,
            target_exponent: 1.2,
            diurnal_amplitude: 0.3,
            bursts: Vec::new(),
            random_bursts: None,
            rng_seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), InvalidConfig> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if self.num_nodes < 2 {
            return Err(invalid("num_nodes", "needs at least two nodes"));
        }
        if self.bin_width == 0 {
            return Err(invalid("bin_width", "must be positive"));
        }
        if !positive(self.base_rate) {
            return Err(invalid("base_rate", "must be positive"));
        }
        if !positive(self.activity_exponent) {
            return Err(invalid("activity_exponent", "must be positive"));
        }
        if !positive(self.target_exponent) {
            return Err(invalid("target_exponent", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.diurnal_amplitude) {
            return Err(invalid("diurnal_amplitude", "must lie in [0, 1]"));
        }
        for b in &self.bursts {
            if !(b.intensity.is_finite() && b.intensity > 1.0) {
                return Err(invalid("bursts.intensity", "must exceed 1"));
            }
            if b.start.checked_add(b.duration).is_none_or(|end| end > self.duration) {
                return Err(invalid("bursts.start", "burst must end within the stream"));
            }
            if let BurstCenter::Node(c) = b.center_node {
                if c >= self.num_nodes as u64 {
                    return Err(invalid("bursts.center_node", "not a generated node"));
                }
            }
        }
        if let Some(rb) = &self.random_bursts {
            if !(rb.intensity.is_finite() && rb.intensity > 1.0) {
                return Err(invalid("random_bursts.intensity", "must exceed 1"));
            }
            let d = rb.duration.unwrap_or(self.bin_width);
            if rb.count > 0 && (d == 0 || d > self.duration) {
                return Err(invalid("random_bursts.duration", "must fit within the stream"));
            }
        }
        Ok(())
    }
}

/// Cumulative-weight sampler (binary search over prefix sums).
struct Cumulative {
    prefix: Vec<f64>,
}

impl Cumulative {
    fn new(weights: &[f64]) -> Self {
        let mut acc = 0.0;
        let prefix = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Cumulative { prefix }
    }

    fn total(&self) -> f64 {
        *self.prefix.last().unwrap_or(&0.0)
    }

    fn sample(&self, rng: &mut Rng) -> usize {
        let u = rng.random::<f64>() * self.total();
        self.prefix
            .partition_point(|&p| p <= u)
            .min(self.prefix.len() - 1)
    }
}

fn exp_gap(rng: &mut Rng, rate: f64) -> f64 {
    // 1 - U lies in (0, 1], so the log is finite
    -libm::log(1.0 - rng.random::<f64>()) / rate
}

fn random_action(rng: &mut Rng) -> Action {
    let u: f64 = rng.random();
    if u < 0.6 {
        Action::Like
    } else if u < 0.85 {
        Action::Comment
    } else {
        Action::Share
    }
}

/// Expands `random_bursts` into concrete bursts (deterministic in the seed).
pub fn resolve_bursts(config: &GeneratorConfig) -> Vec<BurstSpec> {
    let mut rng = rng::seeded(rng::derive_named(config.rng_seed, "bursts"));
    let mut out = Vec::new();
    for b in &config.bursts {
        let center = match b.center_node {
            BurstCenter::Node(c) => c,
            BurstCenter::Random(_) => rng.random_range(0..config.num_nodes as u64),
        };
        out.push(BurstSpec {
            center_node: BurstCenter::Node(center),
            ..*b
        });
    }
    if let Some(rb) = &config.random_bursts {
        let duration = rb.duration.unwrap_or(config.bin_width);
        let slots = (config.duration - duration) / config.bin_width + 1;
        for _ in 0..rb.count {
            let start = rng.random_range(0..slots) * config.bin_width;
            let center = rng.random_range(0..config.num_nodes as u64);
            out.push(BurstSpec {
                center_node: BurstCenter::Node(center),
                start,
                duration,
                intensity: rb.intensity,
            });
        }
    }
    out
}

/// Generates an interaction stream; deterministic in `config.rng_seed`.
pub fn generate(config: &GeneratorConfig) -> Result<TemporalGraph, InvalidConfig> {
    config.validate()?;
    let n = config.num_nodes;
    let universe: Vec<NodeId> = (0..n as u64).collect();
    let mut rng = rng::seeded(config.rng_seed);

    let mut activity: Vec<f64> = (0..n)
        .map(|_| libm::pow(1.0 - rng.random::<f64>(), -1.0 / config.activity_exponent))
        .collect();
    let mean_activity = activity.iter().sum::<f64>() / n as f64;
    activity.iter_mut().for_each(|a| *a /= mean_activity);

    let mut ranks: Vec<usize> = (0..n).collect();
    ranks.shuffle(&mut rng);
    let mut popularity: Vec<f64> = ranks
        .iter()
        .map(|&r| libm::pow((r + 1) as f64, -config.target_exponent))
        .collect();
    let pop_total: f64 = popularity.iter().sum();
    popularity.iter_mut().for_each(|p| *p /= pop_total);

    let sources = Cumulative::new(&activity);
    let targets = Cumulative::new(&popularity);
    let bin = config.bin_width as f64;
    // events per second, population-wide
    let total_rate = n as f64 * config.base_rate / bin;
    let amp = config.diurnal_amplitude;
    let horizon = config.duration as f64;

    let mut events = Vec::new();
    if config.duration > 0 {
        let peak = total_rate * (1.0 + amp);
        let mut t = 0.0;
        loop {
            t += exp_gap(&mut rng, peak);
            if t >= horizon {
                break;
            }
            let modulation = 1.0 + amp * libm::sin(core::f64::consts::TAU * t / DAY_SECONDS);
            if rng.random::<f64>() * (1.0 + amp) >= modulation {
                continue;
            }
            let source = sources.sample(&mut rng);
            let target = loop {
                let c = targets.sample(&mut rng);
                if c != source {
                    break c;
                }
            };
            events.push(InteractionEvent::new(
                source as u64,
                target as u64,
                libm::floor(t) as i64,
                random_action(&mut rng),
            ));
        }
    }

    for burst in resolve_bursts(config) {
        let BurstCenter::Node(center) = burst.center_node else {
            unreachable!("centers are resolved")
        };
        let c = center as usize;
        let normal = total_rate * popularity[c];
        let reference = normal.max(config.base_rate / bin);
        let extra = burst.intensity * reference - normal;
        if extra <= 0.0 || burst.duration == 0 {
            continue;
        }
        let (lo, hi) = (burst.start as f64, (burst.start + burst.duration) as f64);
        let mut t = lo;
        loop {
            t += exp_gap(&mut rng, extra);
            if t >= hi {
                break;
            }
            let source = loop {
                let s = sources.sample(&mut rng);
                if s != c {
                    break s;
                }
            };
            events.push(InteractionEvent::new(
                source as u64,
                center,
                libm::floor(t) as i64,
                random_action(&mut rng),
            ));
        }
    }

    Ok(build_graph(events, Some(&universe)).expect("generated events are valid"))
}
