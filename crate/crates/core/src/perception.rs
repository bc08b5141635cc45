//! Statistics for the forced-choice arrow-of-time perception study.
//!
//! Annotators see a forward and a reversed copy of a video and pick the one
//! they believe plays forward. If reversed videos look natural, the number of
//! forward picks out of `n` trials follows `Binomial(n, 0.5)`, approximated
//! by a normal with `σ = √(0.25 / n)` on the proportion. A class counts as
//! reversible when its forward-pick proportion lies within `0.5 ± 3σ`
//! (bounds inclusive, no continuity correction).

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::ClassId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PerceptionError {
    #[error("submission {worker_id:?} has {actual} catch trials, expected {expected}")]
    CatchTrialCount {
        worker_id: String,
        expected: usize,
        actual: usize,
    },
    #[error("a class needs at least one trial")]
    NoTrials,
    #[error("class {class_id} has {forward} forward choices out of only {trials} trials")]
    InvalidTally {
        class_id: ClassId,
        trials: u64,
        forward: u64,
    },
}

/// One annotated video pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairChoice {
    pub class_id: ClassId,
    /// The annotator picked the forward-time video.
    pub chose_forward: bool,
}

/// A single annotator's task submission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubmissionRecord {
    pub worker_id: String,
    pub choices: Vec<PairChoice>,
    /// Outcome of each catch trial (both videos forward; `true` = passed).
    pub catch_trials: Vec<bool>,
}

impl SubmissionRecord {
    pub fn catch_correct(&self) -> usize {
        self.catch_trials.iter().filter(|&&ok| ok).count()
    }
}

/// Keeps submissions that passed at least `min_correct` of their `k` catch trials.
pub fn qc_filter(
    submissions: &[SubmissionRecord],
    k: usize,
    min_correct: usize,
) -> Result<Vec<SubmissionRecord>, PerceptionError> {
    let mut out = Vec::new();
    for s in submissions {
        if s.catch_trials.len() != k {
            return Err(PerceptionError::CatchTrialCount {
                worker_id: s.worker_id.clone(),
                expected: k,
                actual: s.catch_trials.len(),
            });
        }
        if s.catch_correct() >= min_correct {
            out.push(s.clone());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassTally {
    pub class_id: ClassId,
    pub trials: u64,
    pub forward: u64,
}

impl ClassTally {
    pub fn new(class_id: ClassId, trials: u64, forward: u64) -> Result<Self, PerceptionError> {
        if forward > trials {
            return Err(PerceptionError::InvalidTally {
                class_id,
                trials,
                forward,
            });
        }
        Ok(ClassTally {
            class_id,
            trials,
            forward,
        })
    }

    pub fn proportion(&self) -> f64 {
        self.forward as f64 / self.trials as f64
    }
}

/// Per-class tallies of the (non-catch) choices in `submissions`.
pub fn tally(submissions: &[SubmissionRecord]) -> Vec<ClassTally> {
    let mut acc: BTreeMap<ClassId, (u64, u64)> = BTreeMap::new();
    for choice in submissions.iter().flat_map(|s| &s.choices) {
        let e = acc.entry(choice.class_id).or_default();
        e.0 += 1;
        e.1 += u64::from(choice.chose_forward);
    }
    acc.into_iter()
        .map(|(class_id, (trials, forward))| ClassTally {
            class_id,
            trials,
            forward,
        })
        .collect()
}

/// `(0.5 - 3σ, 0.5 + 3σ)` with `σ = √(0.25 / n)`, clamped to `[0, 1]`.
pub fn reversibility_bounds(n: u64) -> Result<(f64, f64), PerceptionError> {
    if n == 0 {
        return Err(PerceptionError::NoTrials);
    }
    let sigma = libm::sqrt(0.25 / n as f64);
    Ok(((0.5 - 3.0 * sigma).max(0.0), (0.5 + 3.0 * sigma).min(1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Reversibility {
    Reversible,
    /// Forward videos were picked more often than chance allows.
    ForwardPreferred,
    /// Reversed videos were picked as forward more often than chance allows.
    ReversedPreferred,
}

impl Reversibility {
    pub fn as_str(self) -> &'static str {
        match self {
            Reversibility::Reversible => "reversible",
            Reversibility::ForwardPreferred => "forward-preferred",
            Reversibility::ReversedPreferred => "reversed-preferred",
        }
    }
}

pub fn classify_reversibility(tally: &ClassTally) -> Result<Reversibility, PerceptionError> {
    let (lower, upper) = reversibility_bounds(tally.trials)?;
    let p = tally.proportion();
    Ok(if p > upper {
        Reversibility::ForwardPreferred
    } else if p < lower {
        Reversibility::ReversedPreferred
    } else {
        Reversibility::Reversible
    })
}
