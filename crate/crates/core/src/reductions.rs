//! Instance generators: the bin-packing, knapsack and partition
//! embeddings, and a seeded random generator with exact parameter counts.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Instance, Job, Time, Weight};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinPackingInstance {
    pub sizes: Vec<u64>,
    /// Number of bins.
    pub bins: u64,
    pub capacity: u64,
}

impl BinPackingInstance {
    pub fn new(sizes: Vec<u64>, bins: u64, capacity: u64) -> Result<Self> {
        if bins == 0 || capacity == 0 || sizes.contains(&0) {
            return Err(Error::InvalidInstance("bins, capacity and item sizes must be positive".into()));
        }
        Ok(BinPackingInstance { sizes, bins, capacity })
    }
}

/// Items become unit-weight jobs released at 0 and due at `b·B + b - 1`.
/// Between consecutive bins a unit separator job is released at
/// `i·B + i - 1` and due one step later, so it can only run there.
///
/// Every job is early exactly when the items fit into the bins.
pub fn from_bin_packing(bp: &BinPackingInstance) -> Result<Instance> {
    let (b, cap) = (bp.bins, bp.capacity);
    let due = b * cap + b - 1;
    let mut jobs: Vec<Job> = bp.sizes.iter().map(|&s| Job::new(s, 0, due, 1)).collect();
    for i in 1..b {
        let r = i * cap + i - 1;
        jobs.push(Job::new(1, r, r + 1, 1));
    }
    Instance::new(jobs)
}

/// One job per item, all released at 0 and due at `capacity`.
pub fn from_knapsack(values: &[Weight], sizes: &[Time], capacity: Time) -> Result<Instance> {
    if values.len() != sizes.len() {
        return Err(Error::InvalidInstance(format!("{} values but {} sizes", values.len(), sizes.len())));
    }
    Instance::new(values.iter().zip(sizes).map(|(&w, &p)| Job::new(p, 0, capacity, w)).collect())
}

/// Two bins of capacity half the sum.
pub fn from_partition(numbers: &[u64]) -> Result<Instance> {
    let sum: u64 = numbers.iter().sum();
    if sum % 2 == 1 {
        return Err(Error::InvalidInstance(format!("the numbers sum to {sum}, which is odd")));
    }
    from_bin_packing(&BinPackingInstance::new(numbers.to_vec(), 2, sum / 2)?)
}

/// Exhaustive bin-packing feasibility with the usual pruning: largest items
/// first, and an item never tries two bins with the same load.
pub fn bin_packing_feasible(bp: &BinPackingInstance) -> bool {
    let mut items = bp.sizes.clone();
    items.sort_unstable_by(|a, b| b.cmp(a));
    if items.iter().sum::<u64>() > bp.bins * bp.capacity {
        return false;
    }
    let bins = usize::try_from(bp.bins).unwrap_or(usize::MAX).min(items.len().max(1));
    let mut loads = vec![0u64; bins];
    place(&items, &mut loads, bp.capacity)
}

fn place(items: &[u64], loads: &mut [u64], cap: u64) -> bool {
    let Some((&item, rest)) = items.split_first() else { return true };
    for i in 0..loads.len() {
        if loads[i] + item > cap || loads[..i].contains(&loads[i]) {
            continue;
        }
        loads[i] += item;
        let done = place(rest, loads, cap);
        loads[i] -= item;
        if done {
            return true;
        }
    }
    false
}

/// Shape of a random instance: exact numbers of distinct values per field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomSpec {
    pub n: usize,
    pub distinct_p: usize,
    pub distinct_w: usize,
    pub distinct_r: usize,
    pub distinct_d: usize,
    /// Processing times are drawn from `1..=max_p`.
    pub max_p: Time,
    /// Release dates come from `0..horizon`, due dates from `1..=horizon`.
    pub horizon: Time,
}

/// Largest weight the generator draws, unless more distinct weights are requested.
pub const MAX_RANDOM_WEIGHT: u64 = 9;

fn pool(rng: &mut ChaCha8Rng, count: usize, low: u64, high: u64, field: &str) -> Result<Vec<u64>> {
    let span = high.checked_sub(low).map(|s| s + 1).unwrap_or(0);
    if count == 0 || count as u64 > span {
        return Err(Error::InvalidInstance(format!("cannot draw {count} distinct {field} values from {low}..={high}")));
    }
    Ok(index::sample(rng, span as usize, count).into_iter().map(|i| low + i as u64).collect())
}

/// Every pool value at least once, the rest uniform, in random order.
fn assign(rng: &mut ChaCha8Rng, values: &[u64], n: usize) -> Vec<u64> {
    let mut out = values.to_vec();
    while out.len() < n {
        out.push(values[rng.gen_range(0..values.len())]);
    }
    out.shuffle(rng);
    out
}

/// Deterministic in `seed`. Value pools are drawn first and then assigned
/// so that each pool value is used, which makes the distinct counts exact.
pub fn random_instance(seed: u64, spec: &RandomSpec) -> Result<Instance> {
    let counts = [spec.distinct_p, spec.distinct_w, spec.distinct_r, spec.distinct_d];
    if spec.n == 0 || counts.iter().any(|&c| c > spec.n) {
        return Err(Error::InvalidInstance(format!("distinct counts {counts:?} do not fit {} jobs", spec.n)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w_high = MAX_RANDOM_WEIGHT.max(spec.distinct_w as u64);
    let ps = pool(&mut rng, spec.distinct_p, 1, spec.max_p, "processing time")?;
    let ws = pool(&mut rng, spec.distinct_w, 1, w_high, "weight")?;
    let rs = pool(&mut rng, spec.distinct_r, 0, spec.horizon.saturating_sub(1), "release date")?;
    let ds = pool(&mut rng, spec.distinct_d, 1, spec.horizon, "due date")?;
    let p = assign(&mut rng, &ps, spec.n);
    let w = assign(&mut rng, &ws, spec.n);
    let r = assign(&mut rng, &rs, spec.n);
    let d = assign(&mut rng, &ds, spec.n);
    Instance::new((0..spec.n).map(|j| Job::new(p[j], r[j], d[j], w[j])).collect())
}
