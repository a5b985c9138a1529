use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const AESTHETIC_DIMENSIONS: [&str; 6] = [
    "color harmony",
    "light and shadow harmony",
    "structural rationality",
    "form fluidity",
    "image completeness",
    "compositional layering",
];

pub const ANNOTATORS: usize = 5;
pub const AGREEMENT: usize = 4;
pub const DEFAULT_SAMPLE_RATE: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationTask {
    pub asset_id: String,
    pub dimension: String,
    pub scores: Vec<u8>,
    /// Expert reference score used by the acceptance check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Annotation {
    Valid(u8),
    Invalid,
}

pub fn aggregate_annotation(task: &AnnotationTask) -> Result<Annotation> {
    if !AESTHETIC_DIMENSIONS.contains(&task.dimension.as_str()) {
        return Err(Error::MalformedTask(format!("unknown dimension {:?}", task.dimension)));
    }
    if task.scores.len() != ANNOTATORS {
        return Err(Error::MalformedTask(format!("{} scores, expected {ANNOTATORS}", task.scores.len())));
    }
    let mut counts = [0usize; 6];
    for &s in &task.scores {
        if !(1..=5).contains(&s) {
            return Err(Error::MalformedTask(format!("score {s} outside 1..5")));
        }
        counts[s as usize] += 1;
    }
    Ok((1..=5u8)
        .find(|&v| counts[v as usize] >= AGREEMENT)
        .map_or(Annotation::Invalid, Annotation::Valid))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceReport {
    pub sampled: usize,
    pub exact: usize,
    pub within_one: usize,
    pub verdict: Verdict,
}

impl AcceptanceReport {
    pub fn exact_frac(&self) -> f64 {
        self.exact as f64 / self.sampled as f64
    }

    pub fn within_one_frac(&self) -> f64 {
        self.within_one as f64 / self.sampled as f64
    }
}

/// Spot-checks `ceil(sample_rate · n)` seeded pairs of (final, reference).
/// Passes when at least 70% match exactly and 95% are within one point.
pub fn acceptance_check(pairs: &[(u8, u8)], sample_rate: f64, seed: u64) -> Result<AcceptanceReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if !(sample_rate > 0.0 && sample_rate <= 1.0) {
        return Err(Error::InvalidParam(format!("sample_rate {sample_rate} outside (0, 1]")));
    }
    let n = ((pairs.len() as f64 * sample_rate).ceil() as usize).clamp(1, pairs.len());
    let mut picked = sample(&mut ChaCha8Rng::seed_from_u64(seed), pairs.len(), n).into_vec();
    picked.sort_unstable();
    let (mut exact, mut within_one) = (0, 0);
    for &i in &picked {
        let (a, b) = pairs[i];
        exact += (a == b) as usize;
        within_one += (a.abs_diff(b) <= 1) as usize;
    }
    let pass = exact * 100 >= 70 * n && within_one * 100 >= 95 * n;
    Ok(AcceptanceReport { sampled: n, exact, within_one, verdict: if pass { Verdict::Pass } else { Verdict::Fail } })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(scores: &[u8]) -> AnnotationTask {
        AnnotationTask { asset_id: "a".into(), dimension: "form fluidity".into(), scores: scores.to_vec(), reference: None }
    }

    fn oracle(scores: &[u8]) -> Annotation {
        for v in 1..=5 {
            if scores.iter().filter(|&&s| s == v).count() >= 4 {
                return Annotation::Valid(v);
            }
        }
        Annotation::Invalid
    }

    #[test]
    fn worked_cases() {
        assert_eq!(aggregate_annotation(&task(&[3, 3, 3, 3, 5])).unwrap(), Annotation::Valid(3));
        assert_eq!(aggregate_annotation(&task(&[2, 2, 3, 3, 4])).unwrap(), Annotation::Invalid);
    }

    #[test]
    fn exhaustive_against_oracle() {
        let mut valid = 0;
        for code in 0..3125u32 {
            let scores: Vec<u8> = (0..5).map(|k| (code / 5u32.pow(k) % 5) as u8 + 1).collect();
            let got = aggregate_annotation(&task(&scores)).unwrap();
            assert_eq!(got, oracle(&scores), "{scores:?}");
            valid += matches!(got, Annotation::Valid(_)) as usize;
        }
        // 5 values × (1 all-same + 5 positions × 4 odd values)
        assert_eq!(valid, 5 * 21);
    }

    #[test]
    fn malformed_tasks() {
        assert!(matches!(aggregate_annotation(&task(&[1, 2, 3, 4])), Err(Error::MalformedTask(_))));
        assert!(matches!(aggregate_annotation(&task(&[1, 2, 3, 4, 6])), Err(Error::MalformedTask(_))));
        let mut t = task(&[1, 1, 1, 1, 1]);
        t.dimension = "vibes".into();
        assert!(matches!(aggregate_annotation(&t), Err(Error::MalformedTask(_))));
    }

    fn batch(exact: usize, off1: usize, off2: usize) -> Vec<(u8, u8)> {
        let mut v = vec![(3, 3); exact];
        v.extend(std::iter::repeat_n((3, 4), off1));
        v.extend(std::iter::repeat_n((1, 3), off2));
        v
    }

    #[test]
    fn boundary_is_inclusive() {
        let r = acceptance_check(&batch(70, 25, 5), 1.0, 0).unwrap();
        assert_eq!((r.sampled, r.exact, r.within_one), (100, 70, 95));
        assert_eq!(r.exact_frac(), 0.70);
        assert_eq!(r.within_one_frac(), 0.95);
        assert_eq!(r.verdict, Verdict::Pass);
        assert_eq!(acceptance_check(&batch(69, 31, 0), 1.0, 0).unwrap().verdict, Verdict::Fail);
        assert_eq!(acceptance_check(&batch(70, 24, 6), 1.0, 0).unwrap().verdict, Verdict::Fail);
    }

    #[test]
    fn identical_pairs_pass_and_empty_fails() {
        let r = acceptance_check(&batch(400, 0, 0), DEFAULT_SAMPLE_RATE, 9).unwrap();
        assert_eq!((r.sampled, r.verdict), (20, Verdict::Pass));
        assert!(matches!(acceptance_check(&[], 0.05, 0), Err(Error::EmptyBatch)));
        assert!(acceptance_check(&batch(1, 0, 0), 0.0, 0).is_err());
    }

    #[test]
    fn sampling_is_seeded() {
        let pairs: Vec<(u8, u8)> = (0..1000).map(|i| ((i % 5 + 1) as u8, (i % 3 + 1) as u8)).collect();
        assert_eq!(acceptance_check(&pairs, 0.05, 4).unwrap(), acceptance_check(&pairs, 0.05, 4).unwrap());
    }
}
