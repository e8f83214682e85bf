//! Successive exhaustive Boolean optimisation (SEBO).
//!
//! Maximises an arbitrary objective over `{0,1}^q`:
//!
//! 1. Split the indices into contiguous blocks of `block_size` bits and
//!    replace each block in turn by its best assignment (all `2^J`
//!    candidates, other blocks held fixed). Repeat until a whole cycle makes
//!    no progress or `max_cycles` is reached.
//! 2. Flip random bits of the incumbent, rerun step 1 starting from the block
//!    after the first flipped bit, and keep the result if it is strictly
//!    better. Repeat `flip_rounds` times.
//!
//! Objectives may return `-inf` for infeasible points; `NaN` is read as
//! `-inf`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::antenna_model::AntennaCoder;
use crate::error::{Error, Result};

pub const MAX_BLOCK_SIZE: usize = 20;
pub const MAX_EXHAUSTIVE_BITS: usize = 22;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeboConfig {
    pub block_size: usize,
    pub max_cycles: usize,
    pub flip_rounds: usize,
    pub flips_per_round: usize,
    pub seed: u64,
}

impl Default for SeboConfig {
    fn default() -> Self {
        SeboConfig {
            block_size: 10,
            max_cycles: 50,
            flip_rounds: 20,
            flips_per_round: 1,
            seed: 0,
        }
    }
}

impl SeboConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_block_size(mut self, block_size: usize) -> Self {
        self.block_size = block_size;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_size == 0 || self.block_size > MAX_BLOCK_SIZE {
            return Err(Error::InvalidConfig(format!(
                "block_size must be in 1..={MAX_BLOCK_SIZE}, got {}",
                self.block_size
            )));
        }
        if self.max_cycles == 0 {
            return Err(Error::InvalidConfig("max_cycles must be >= 1".into()));
        }
        if self.flips_per_round == 0 {
            return Err(Error::InvalidConfig("flips_per_round must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRecord {
    pub cycle: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationTrace {
    /// Best value seen so far, recorded each time it improves. The first
    /// record is the starting point at cycle 0.
    pub records: Vec<TraceRecord>,
    pub coder: AntennaCoder,
    pub value: f64,
    pub evaluations: u64,
    pub cycles: usize,
}

impl OptimizationTrace {
    pub fn is_feasible(&self) -> bool {
        self.value > f64::NEG_INFINITY
    }

    /// Fails with [`Error::InfeasibleAll`] when no finite value was found.
    pub fn require_feasible(self) -> Result<Self> {
        if self.is_feasible() {
            Ok(self)
        } else {
            Err(Error::InfeasibleAll)
        }
    }
}

struct Search<'a, F> {
    objective: &'a F,
    blocks: Vec<(usize, usize)>,
    max_cycles: usize,
    evaluations: u64,
    cycles: usize,
}

impl<F: Fn(&[u8]) -> f64> Search<'_, F> {
    fn eval(&mut self, bits: &[u8]) -> f64 {
        self.evaluations += 1;
        let v = (self.objective)(bits);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    /// Step 1 on `x` in place. `on_cycle` sees the value after each cycle.
    fn block_cycles(
        &mut self,
        x: &mut [u8],
        value: &mut f64,
        first_block: usize,
        mut on_cycle: impl FnMut(usize, f64),
    ) {
        let n_blocks = self.blocks.len();
        for _ in 0..self.max_cycles {
            let mut improved = false;
            for offset in 0..n_blocks {
                let (start, len) = self.blocks[(first_block + offset) % n_blocks];
                let incumbent: u64 = read_block(x, start, len);
                let mut best = *value;
                let mut best_assign = incumbent;
                for assign in 0..(1u64 << len) {
                    if assign == incumbent {
                        continue;
                    }
                    write_block(x, start, len, assign);
                    let v = self.eval(x);
                    if v > best {
                        best = v;
                        best_assign = assign;
                    }
                }
                write_block(x, start, len, best_assign);
                if best_assign != incumbent {
                    *value = best;
                    improved = true;
                }
            }
            self.cycles += 1;
            on_cycle(self.cycles, *value);
            if !improved {
                break;
            }
        }
    }
}

fn read_block(x: &[u8], start: usize, len: usize) -> u64 {
    x[start..start + len]
        .iter()
        .fold(0u64, |acc, &b| (acc << 1) | b as u64)
}

fn write_block(x: &mut [u8], start: usize, len: usize, assign: u64) {
    for i in 0..len {
        x[start + i] = ((assign >> (len - 1 - i)) & 1) as u8;
    }
}

/// Runs SEBO from `init` (all zeros when absent).
pub fn sebo_maximize<F>(
    objective: F,
    q: usize,
    config: &SeboConfig,
    init: Option<&AntennaCoder>,
) -> Result<OptimizationTrace>
where
    F: Fn(&[u8]) -> f64,
{
    config.validate()?;
    if q == 0 {
        return Err(Error::InvalidConfig("q must be >= 1".into()));
    }
    let mut x: Vec<u8> = match init {
        Some(c) if c.len() != q => {
            return Err(Error::DimensionMismatch(format!(
                "initial coder has {} bits, expected {q}",
                c.len()
            )))
        }
        Some(c) => c.bits().to_vec(),
        None => vec![0; q],
    };

    let blocks: Vec<(usize, usize)> = (0..q)
        .step_by(config.block_size)
        .map(|s| (s, config.block_size.min(q - s)))
        .collect();
    let single_block = blocks.len() == 1;
    let mut search = Search {
        objective: &objective,
        blocks,
        max_cycles: config.max_cycles,
        evaluations: 0,
        cycles: 0,
    };

    let mut value = search.eval(&x);
    let mut records = vec![TraceRecord { cycle: 0, value }];
    {
        let mut last = value;
        search.block_cycles(&mut x, &mut value, 0, |cycle, v| {
            if v > last {
                records.push(TraceRecord { cycle, value: v });
                last = v;
            }
        });
    }

    // With one block, step 1 already enumerated the whole space.
    if !single_block {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let flips = config.flips_per_round.min(q);
        for _ in 0..config.flip_rounds {
            let mut trial = x.clone();
            let picked = rand::seq::index::sample(&mut rng, q, flips);
            for idx in picked.iter() {
                trial[idx] ^= 1;
            }
            // Sweeping the flipped block first would simply undo the flip, so
            // the sweep starts at the next block.
            let first = (picked.index(0) / config.block_size + 1) % search.blocks.len();
            let mut trial_value = search.eval(&trial);
            search.block_cycles(&mut trial, &mut trial_value, first, |_, _| {});
            if trial_value > value {
                x = trial;
                value = trial_value;
                records.push(TraceRecord {
                    cycle: search.cycles,
                    value,
                });
            }
        }
    }

    Ok(OptimizationTrace {
        records,
        coder: AntennaCoder::new(x).expect("bits stay binary"),
        value,
        evaluations: search.evaluations,
        cycles: search.cycles,
    })
}

/// Global maximum over all `2^q` vectors. Ties go to the lexicographically
/// smallest vector (bit 0 most significant). The value is `-inf` when every
/// point is infeasible.
pub fn exhaustive_maximize<F>(objective: F, q: usize) -> Result<(AntennaCoder, f64)>
where
    F: Fn(&[u8]) -> f64,
{
    if q > MAX_EXHAUSTIVE_BITS {
        return Err(Error::TooLarge {
            q,
            max: MAX_EXHAUSTIVE_BITS,
        });
    }
    if q == 0 {
        return Err(Error::InvalidConfig("q must be >= 1".into()));
    }
    let mut bits = vec![0u8; q];
    let mut best_index = 0u64;
    let mut best = f64::NEG_INFINITY;
    for index in 0..(1u64 << q) {
        write_block(&mut bits, 0, q, index);
        let v = objective(&bits);
        if v > best {
            best = v;
            best_index = index;
        }
    }
    Ok((AntennaCoder::from_index(best_index, q), best))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(bits: &[u8]) -> f64 {
        bits.iter().map(|&b| b as f64).sum()
    }

    fn as_int(bits: &[u8]) -> f64 {
        bits.iter().fold(0.0, |acc, &b| acc * 2.0 + b as f64)
    }

    #[test]
    fn separable_objective_one_cycle() {
        let cfg = SeboConfig::default().with_block_size(3);
        let trace = sebo_maximize(ones, 8, &cfg, None).unwrap();
        assert_eq!(trace.coder.bits(), &[1; 8]);
        assert_eq!(trace.value, 8.0);
        let init = AntennaCoder::new(vec![1, 0, 1, 0, 1, 0, 1, 0]).unwrap();
        let trace = sebo_maximize(ones, 8, &cfg, Some(&init)).unwrap();
        assert_eq!(trace.value, 8.0);
    }

    #[test]
    fn single_block_finds_target() {
        let target = [1u8, 0, 1];
        let f = |b: &[u8]| if b == target { 1.0 } else { 0.0 };
        let cfg = SeboConfig::default().with_block_size(3);
        let trace = sebo_maximize(f, 3, &cfg, None).unwrap();
        assert_eq!(trace.coder.bits(), &target);
        assert_eq!(trace.value, 1.0);
    }

    #[test]
    fn exhaustive_examples() {
        let (c, v) = exhaustive_maximize(|b| -ones(b), 4).unwrap();
        assert_eq!(c.bits(), &[0; 4]);
        assert_eq!(v, 0.0);
        let (c, v) = exhaustive_maximize(|_| 3.5, 4).unwrap();
        assert_eq!(c.bits(), &[0; 4]);
        assert_eq!(v, 3.5);
        let (c, v) = exhaustive_maximize(as_int, 5).unwrap();
        assert_eq!(c.bits(), &[1; 5]);
        assert_eq!(v, 31.0);
    }

    #[test]
    fn exhaustive_guard() {
        assert!(matches!(
            exhaustive_maximize(ones, 23),
            Err(Error::TooLarge { q: 23, .. })
        ));
    }

    #[test]
    fn lexicographic_tie_break() {
        // Maximised by both 0110 and 1001; the smaller index wins.
        let f = |b: &[u8]| if b == [0, 1, 1, 0] || b == [1, 0, 0, 1] { 1.0 } else { 0.0 };
        let (c, _) = exhaustive_maximize(f, 4).unwrap();
        assert_eq!(c.bits(), &[0, 1, 1, 0]);
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            SeboConfig::default().with_block_size(0),
            SeboConfig::default().with_block_size(21),
            SeboConfig {
                max_cycles: 0,
                ..SeboConfig::default()
            },
            SeboConfig {
                flips_per_round: 0,
                ..SeboConfig::default()
            },
        ] {
            assert!(matches!(
                sebo_maximize(ones, 4, &cfg, None),
                Err(Error::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn infeasible_everywhere() {
        let trace = sebo_maximize(|_| f64::NEG_INFINITY, 5, &SeboConfig::default(), None).unwrap();
        assert!(!trace.is_feasible());
        assert!(matches!(trace.require_feasible(), Err(Error::InfeasibleAll)));
    }

    #[test]
    fn nan_is_never_selected() {
        let f = |b: &[u8]| if b[0] == 1 { f64::NAN } else { ones(b) };
        let trace = sebo_maximize(f, 4, &SeboConfig::default().with_block_size(2), None).unwrap();
        assert_eq!(trace.coder.bits(), &[0, 1, 1, 1]);
        assert_eq!(trace.value, 3.0);
    }

    #[test]
    fn incumbent_kept_on_ties() {
        let init = AntennaCoder::new(vec![1, 1, 0]).unwrap();
        let trace = sebo_maximize(|_| 1.0, 3, &SeboConfig::default(), Some(&init)).unwrap();
        assert_eq!(trace.coder, init);
        assert_eq!(trace.records.len(), 1);
    }
}
