use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::CsiSample;

/// How many samples of each class go to each output part.
#[derive(Clone, Debug, PartialEq)]
pub enum Allocation {
    /// Fractions summing to 1 (±1e-9), applied per class.
    Ratios(Vec<f64>),
    /// Exact per-class counts for each part.
    Counts(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitOutcome {
    /// One sample list per allocation entry, class-major.
    pub parts: Vec<Vec<CsiSample>>,
    /// Classes that could not be allocated as requested.
    pub warnings: Vec<String>,
}

/// Largest-remainder apportionment: every count is within 1 of `n·ratio`.
fn apportion(n: usize, ratios: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = n.saturating_sub(counts.iter().sum());
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Split samples class by class. Class membership is shuffled with a
/// ChaCha8 stream per class, so the assignment depends only on `seed`.
pub fn stratified_split(
    samples: Vec<CsiSample>,
    allocation: &Allocation,
    seed: u64,
) -> Result<SplitOutcome> {
    let parts_n = match allocation {
        Allocation::Ratios(r) => {
            if r.is_empty() || r.iter().any(|&x| !(x >= 0.0)) {
                return Err(Error::Config("split ratios must be non-negative".into()));
            }
            let total: f64 = r.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("split ratios sum to {total}, not 1")));
            }
            r.len()
        }
        Allocation::Counts(c) => {
            if c.is_empty() {
                return Err(Error::Config("split counts must not be empty".into()));
            }
            c.len()
        }
    };
    let n_classes = samples.iter().map(|s| s.label + 1).max().unwrap_or(0);
    let mut by_class: Vec<Vec<CsiSample>> = vec![Vec::new(); n_classes];
    for s in samples {
        by_class[s.label].push(s);
    }

    let mut parts: Vec<Vec<CsiSample>> = vec![Vec::new(); parts_n];
    let mut warnings = Vec::new();
    for (class, mut members) in by_class.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(class as u64);
        members.shuffle(&mut rng);
        let n = members.len();
        let counts = match allocation {
            Allocation::Ratios(r) => apportion(n, r),
            Allocation::Counts(c) => {
                let wanted: usize = c.iter().sum();
                if wanted > n {
                    warnings.push(format!(
                        "class {class}: {n} samples for {wanted} requested; later parts are short"
                    ));
                } else if wanted < n {
                    warnings.push(format!("class {class}: {} samples left unassigned", n - wanted));
                }
                let mut left = n;
                c.iter()
                    .map(|&want| {
                        let take = want.min(left);
                        left -= take;
                        take
                    })
                    .collect()
            }
        };
        let mut iter = members.into_iter();
        for (part, &k) in parts.iter_mut().zip(&counts) {
            part.extend(iter.by_ref().take(k));
        }
    }
    Ok(SplitOutcome { parts, warnings })
}
