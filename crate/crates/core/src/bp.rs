//! Block-Poisson estimator of `exp(B)` with `B = -nu * Z(theta)`.
//!
//! The estimator is
//!
//! ```text
//! L = prod_l exp(a/lambda + m) prod_{h <= chi_l} (Bhat_{h,l} - a) / (m lambda),
//! chi_l ~ Poisson(m),  Bhat_{h,l} = -nu * Zhat_{h,l}(theta)
//! ```
//!
//! and is carried around as a sign plus `ln|L|`; the raw product is never formed.
//! The random numbers are grouped per block in a [`BlockRandomStore`] so that a
//! correlated sampler can refresh a single block per iteration.

use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SubstreamKey;

/// Block index reserved for the independent soft-lower-bound draw.
pub const LOWER_BOUND_BLOCK: u64 = u64::MAX;
/// Draw index reserved for the Poisson count of a block.
const CHI_DRAW: u64 = u64::MAX;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BpConfig {
    /// Number of blocks.
    pub lambda: usize,
    /// Poisson mean of the per-block count.
    pub m: f64,
    /// Intended correlation between successive log estimates; informational.
    #[serde(default)]
    pub target_rho: f64,
}

impl BpConfig {
    pub fn new(lambda: usize, m: f64) -> Result<Self> {
        let cfg = Self { lambda, m, target_rho: if lambda > 0 { 1.0 - 1.0 / lambda as f64 } else { 0.0 } };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda == 0 {
            return Err(Error::Config("lambda must be at least 1".into()));
        }
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(Error::Config(format!("m must be positive, got {}", self.m)));
        }
        if !(0.0..1.0).contains(&self.target_rho) {
            return Err(Error::Config(format!("target_rho must lie in [0,1), got {}", self.target_rho)));
        }
        Ok(())
    }

    /// `m * lambda`, the expected number of inner draws.
    pub fn m_lambda(&self) -> f64 {
        self.m * self.lambda as f64
    }
}

/// One block of random numbers: its Poisson count and refresh epoch. The draw
/// substreams are derived from `(master_seed, block, epoch, h)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub chi: u32,
    pub epoch: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockRandomStore {
    master_seed: u64,
    m: f64,
    /// When set every block holds exactly this many draws (no Poisson count).
    fixed_count: Option<u32>,
    blocks: Vec<Block>,
    lower_bound_epoch: u64,
}

fn draw_chi(master: u64, block: usize, epoch: u64, m: f64) -> u32 {
    let mut rng = SubstreamKey::new(master, block as u64, epoch, CHI_DRAW).rng();
    let pois = Poisson::new(m).expect("m validated positive");
    pois.sample(&mut rng) as u32
}

/// Draws a fresh store: `lambda` blocks with `chi_l ~ Poisson(m)`.
pub fn draw_store(config: &BpConfig, master_seed: u64) -> BlockRandomStore {
    BlockRandomStore::from_epochs(config, master_seed, &vec![0; config.lambda], 0)
}

impl BlockRandomStore {
    /// Rebuilds a store from its master seed and per-block epochs.
    pub fn from_epochs(config: &BpConfig, master_seed: u64, epochs: &[u64], lower_bound_epoch: u64) -> Self {
        let blocks = epochs
            .iter()
            .enumerate()
            .map(|(l, &epoch)| Block { chi: draw_chi(master_seed, l, epoch, config.m), epoch })
            .collect();
        Self { master_seed, m: config.m, fixed_count: None, blocks, lower_bound_epoch }
    }

    /// A store whose blocks each hold exactly `count` draws.
    pub fn with_fixed_count(n_blocks: usize, count: u32, master_seed: u64) -> Self {
        Self {
            master_seed,
            m: count as f64,
            fixed_count: Some(count),
            blocks: vec![Block { chi: count, epoch: 0 }; n_blocks],
            lower_bound_epoch: 0,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn epochs(&self) -> Vec<u64> {
        self.blocks.iter().map(|b| b.epoch).collect()
    }

    pub fn lower_bound_epoch(&self) -> u64 {
        self.lower_bound_epoch
    }

    pub fn total_draws(&self) -> usize {
        self.blocks.iter().map(|b| b.chi as usize).sum()
    }

    pub fn draw_key(&self, block: usize, draw: usize) -> SubstreamKey {
        SubstreamKey::new(self.master_seed, block as u64, self.blocks[block].epoch, draw as u64)
    }

    /// Key of the independent draw used for the soft lower bound.
    pub fn lower_bound_key(&self) -> SubstreamKey {
        SubstreamKey::new(self.master_seed, LOWER_BOUND_BLOCK, self.lower_bound_epoch, 0)
    }

    /// Redraws block `index` (new count and substreams) and the lower-bound
    /// substream. Every other block is left untouched.
    pub fn refresh_block(&self, index: usize) -> Result<Self> {
        let epoch = self.blocks.get(index).map_or(0, |b| b.epoch + 1);
        self.refresh_block_at(index, epoch, self.lower_bound_epoch + 1)
    }

    /// Redraws block `index` under an explicit epoch, and the lower-bound
    /// substream under `lower_bound_epoch`. A chain must never reuse an epoch
    /// for a block, or a rejected proposal would be proposed again.
    pub fn refresh_block_at(&self, index: usize, epoch: u64, lower_bound_epoch: u64) -> Result<Self> {
        if index >= self.blocks.len() {
            return Err(Error::BlockOutOfRange { index, lambda: self.blocks.len() });
        }
        let mut next = self.clone();
        let chi = match self.fixed_count {
            Some(c) => c,
            None => draw_chi(self.master_seed, index, epoch, self.m),
        };
        next.blocks[index] = Block { chi, epoch };
        next.lower_bound_epoch = lower_bound_epoch;
        Ok(next)
    }

    /// Redraws every block; used when an initial estimate is degenerate.
    pub fn refresh_all(&self) -> Self {
        let mut next = self.clone();
        for l in 0..self.blocks.len() {
            next = next.refresh_block(l).expect("index in range");
        }
        next
    }

    fn all_keys(&self) -> Vec<(usize, SubstreamKey)> {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(l, b)| (0..b.chi as usize).map(move |h| (l, h)))
            .map(|(l, h)| (l, self.draw_key(l, h)))
            .collect()
    }
}

/// Unbiased estimator of a normalizing function `Z(theta)`.
///
/// Implementations must be deterministic given `(theta, key)` and safe to call
/// concurrently. Model backends return positive values; synthetic test
/// providers may return any real.
pub trait ZHatProvider: Sync {
    fn z_hat(&self, theta: &[f64], key: &SubstreamKey) -> f64;

    /// Evaluates many draws at one `theta`. Backends override this when part of
    /// the work can be shared between draws.
    fn z_hat_batch(&self, theta: &[f64], keys: &[SubstreamKey]) -> Vec<f64> {
        keys.par_iter().map(|k| self.z_hat(theta, k)).collect()
    }
}

/// Sign and log-absolute value of a likelihood estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignedLogEstimate {
    pub sign: i8,
    pub log_abs: f64,
    /// Average of the normalizer draws consumed by the estimate.
    pub z_p_bar: f64,
    pub n_negative_factors: usize,
}

/// All normalizer draws for one `theta` under one store.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockDraws {
    /// `per_block[l][h]` is `Zhat^{(h,l)}`.
    pub per_block: Vec<Vec<f64>>,
    /// Independent draw for the soft lower bound.
    pub independent: f64,
}

impl BlockDraws {
    pub fn total(&self) -> usize {
        self.per_block.iter().map(Vec::len).sum()
    }

    /// Mean of the block draws; falls back to the independent draw when no
    /// block holds any draw.
    pub fn z_p_bar(&self) -> f64 {
        let n = self.total();
        if n == 0 {
            return self.independent;
        }
        self.per_block.iter().flatten().sum::<f64>() / n as f64
    }
}

/// Evaluates every draw addressed by `store` at `theta`, plus the independent
/// lower-bound draw.
pub fn evaluate_draws<P: ZHatProvider + ?Sized>(store: &BlockRandomStore, theta: &[f64], provider: &P) -> BlockDraws {
    let indexed = store.all_keys();
    let mut keys: Vec<SubstreamKey> = indexed.iter().map(|(_, k)| *k).collect();
    keys.push(store.lower_bound_key());
    let mut values = provider.z_hat_batch(theta, &keys);
    let independent = values.pop().expect("lower bound draw present");
    let mut per_block: Vec<Vec<f64>> = store.blocks.iter().map(|b| Vec::with_capacity(b.chi as usize)).collect();
    for ((l, _), v) in indexed.iter().zip(values) {
        per_block[*l].push(v);
    }
    BlockDraws { per_block, independent }
}

/// Soft lower bound `a = -nu * Zhat_indep - m * lambda`.
pub fn soft_lower_bound(z_hat_independent: f64, nu: f64, m: f64, lambda: usize) -> f64 {
    -nu * z_hat_independent - m * lambda as f64
}

/// Combines precomputed draws into the signed log estimate for given `nu` and `a`.
pub fn combine(config: &BpConfig, draws: &BlockDraws, nu: f64, a: f64) -> Result<SignedLogEstimate> {
    let ml = config.m_lambda();
    let mut log_abs = a + ml;
    let mut n_negative = 0usize;
    for (l, block) in draws.per_block.iter().enumerate() {
        for (h, &z) in block.iter().enumerate() {
            let factor = (-nu * z - a) / ml;
            if factor == 0.0 {
                return Err(Error::DegenerateEstimate { block: l, draw: h });
            }
            if factor < 0.0 {
                n_negative += 1;
            }
            log_abs += factor.abs().ln();
        }
    }
    Ok(SignedLogEstimate {
        sign: if n_negative % 2 == 0 { 1 } else { -1 },
        log_abs,
        z_p_bar: draws.z_p_bar(),
        n_negative_factors: n_negative,
    })
}

/// Block-Poisson estimate of `exp(-nu Z(theta))` for a given lower bound `a`.
pub fn estimate<P: ZHatProvider + ?Sized>(
    config: &BpConfig,
    store: &BlockRandomStore,
    theta: &[f64],
    nu: f64,
    a: f64,
    provider: &P,
) -> Result<SignedLogEstimate> {
    let draws = evaluate_draws(store, theta, provider);
    combine(config, &draws, nu, a)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Provider returning a constant.
    struct Constant(f64);
    impl ZHatProvider for Constant {
        fn z_hat(&self, _: &[f64], _: &SubstreamKey) -> f64 {
            self.0
        }
    }

    #[test]
    fn config_validation() {
        assert!(BpConfig::new(0, 1.0).is_err());
        assert!(BpConfig::new(3, 0.0).is_err());
        assert!(BpConfig::new(3, -1.0).is_err());
        let cfg = BpConfig::new(50, 1.0).unwrap();
        assert!((cfg.target_rho - 0.98).abs() < 1e-15);
    }

    #[test]
    fn soft_lower_bound_arithmetic() {
        assert_eq!(soft_lower_bound(2.0, 1.0, 1.0, 10), -12.0);
    }

    #[test]
    fn store_is_reproducible() {
        let cfg = BpConfig::new(20, 1.0).unwrap();
        let a = draw_store(&cfg, 99);
        let b = draw_store(&cfg, 99);
        assert_eq!(a, b);
        let a2 = a.refresh_block(4).unwrap().refresh_block(4).unwrap().refresh_block(7).unwrap();
        let rebuilt = BlockRandomStore::from_epochs(&cfg, 99, &a2.epochs(), a2.lower_bound_epoch());
        assert_eq!(a2, rebuilt);
    }

    #[test]
    fn refresh_is_local() {
        let cfg = BpConfig::new(10, 2.0).unwrap();
        let s = draw_store(&cfg, 5);
        let t = s.refresh_block(3).unwrap();
        for l in 0..10 {
            if l == 3 {
                assert_eq!(t.blocks()[l].epoch, 1);
            } else {
                assert_eq!(t.blocks()[l], s.blocks()[l]);
                for h in 0..s.blocks()[l].chi as usize {
                    assert_eq!(t.draw_key(l, h), s.draw_key(l, h));
                }
            }
        }
        assert_ne!(t.lower_bound_key(), s.lower_bound_key());
        assert!(matches!(s.refresh_block(10), Err(Error::BlockOutOfRange { index: 10, lambda: 10 })));
    }

    #[test]
    fn single_block_refresh_renews_everything() {
        let cfg = BpConfig::new(1, 3.0).unwrap();
        let s = draw_store(&cfg, 1);
        let t = s.refresh_block(0).unwrap();
        if s.blocks()[0].chi > 0 && t.blocks()[0].chi > 0 {
            assert_ne!(s.draw_key(0, 0), t.draw_key(0, 0));
        }
        assert_ne!(s.lower_bound_key(), t.lower_bound_key());
    }

    #[test]
    fn empty_products() {
        let cfg = BpConfig::new(4, 1.0).unwrap();
        let draws = BlockDraws { per_block: vec![vec![]; 4], independent: 2.5 };
        let a = -7.0;
        let est = combine(&cfg, &draws, 1.0, a).unwrap();
        assert_eq!(est.sign, 1);
        assert_eq!(est.log_abs, a + 4.0);
        assert_eq!(est.z_p_bar, 2.5);
    }

    #[test]
    fn sign_parity_and_degenerate_factor() {
        let cfg = BpConfig::new(2, 1.0).unwrap();
        // a = -2, nu = 1: factor = (-z + 2)/2
        let one_negative = BlockDraws { per_block: vec![vec![1.0], vec![3.0]], independent: 0.0 };
        let est = combine(&cfg, &one_negative, 1.0, -2.0).unwrap();
        assert_eq!(est.sign, -1);
        assert_eq!(est.n_negative_factors, 1);
        let expected = -2.0 + 2.0 + (0.5f64).ln() + (0.5f64).ln();
        assert!((est.log_abs - expected).abs() < 1e-15);
        assert_eq!(est.z_p_bar, 2.0);

        let two_negative = BlockDraws { per_block: vec![vec![4.0, 5.0], vec![]], independent: 0.0 };
        assert_eq!(combine(&cfg, &two_negative, 1.0, -2.0).unwrap().sign, 1);

        let zero = BlockDraws { per_block: vec![vec![1.0], vec![2.0]], independent: 0.0 };
        assert!(matches!(
            combine(&cfg, &zero, 1.0, -2.0),
            Err(Error::DegenerateEstimate { block: 1, draw: 0 })
        ));
    }

    #[test]
    fn estimate_matches_manual_product() {
        let cfg = BpConfig::new(3, 1.5).unwrap();
        let store = draw_store(&cfg, 11);
        let provider = Constant(2.0);
        let nu = 0.7;
        let a = soft_lower_bound(2.0, nu, cfg.m, cfg.lambda);
        let est = estimate(&cfg, &store, &[0.0], nu, a, &provider).unwrap();
        // every factor equals (-nu z - a)/(m lambda) = 1, so |L| = exp(a + m lambda)
        assert_eq!(est.sign, 1);
        assert!((est.log_abs - (a + cfg.m_lambda())).abs() < 1e-12);
        assert!((est.log_abs - (-nu * 2.0)).abs() < 1e-12);
    }
}
