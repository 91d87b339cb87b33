//! Dataset splits: a stratified holdout for validation and the per-user
//! protocol split (a fixed number of training samples per class for each
//! participant, the rest held out for testing).

use crate::error::{Error, Result};
use crate::rng::{Purpose, SeededRng};
use crate::scalar::Scalar;

use super::Dataset;

#[derive(Debug, Clone)]
pub struct ParticipantSplit<T> {
    pub subject: String,
    pub train: Dataset<T>,
    pub test: Dataset<T>,
}

/// For every participant, pick `t` samples per class for training (seeded,
/// without replacement) and leave the rest as that participant's test set.
/// Subjects keep their first-seen order; both subsets keep the parent
/// vocabulary so class indices line up across participants.
pub fn split_user_dependent<T: Scalar>(
    data: &Dataset<T>,
    t: usize,
    seed: u64,
) -> Result<Vec<ParticipantSplit<T>>> {
    if t == 0 {
        return Err(Error::config("per-class training count must be at least 1"));
    }
    let mut subjects: Vec<String> = Vec::new();
    for s in data.samples() {
        let subj = s
            .subject
            .as_ref()
            .ok_or_else(|| Error::data(format!("sample {:?} has no subject", s.id)))?;
        if !subjects.iter().any(|x| x == subj) {
            subjects.push(subj.clone());
        }
    }

    let label_idx = data.label_indices()?;
    let mut splits = Vec::with_capacity(subjects.len());
    for (si, subject) in subjects.iter().enumerate() {
        let mut train_ids: Vec<usize> = Vec::new();
        let mut all_ids: Vec<usize> = Vec::new();
        for (ci, _class) in data.labels().iter().enumerate() {
            let members: Vec<usize> = data
                .samples()
                .iter()
                .enumerate()
                .filter(|(k, s)| s.subject.as_deref() == Some(subject) && label_idx[*k] == ci)
                .map(|(k, _)| k)
                .collect();
            if members.is_empty() {
                continue;
            }
            if members.len() <= t {
                return Err(Error::data(format!(
                    "subject {subject:?} has only {} samples of class {:?}, needs more than {t}",
                    members.len(),
                    data.labels()[ci]
                )));
            }
            let mut order = members.clone();
            SeededRng::derive(seed, Purpose::Split, si as u64, ci as u64).shuffle(&mut order);
            train_ids.extend_from_slice(&order[..t]);
            all_ids.extend_from_slice(&members);
        }
        if all_ids.is_empty() {
            continue;
        }
        all_ids.sort_unstable();
        train_ids.sort_unstable();
        let train: Vec<_> = train_ids.iter().map(|&k| data.samples()[k].clone()).collect();
        let test: Vec<_> = all_ids
            .iter()
            .filter(|k| !train_ids.contains(k))
            .map(|&k| data.samples()[k].clone())
            .collect();
        splits.push(ParticipantSplit {
            subject: subject.clone(),
            train: Dataset::with_vocab(train, data.labels().to_vec())?,
            test: Dataset::with_vocab(test, data.labels().to_vec())?,
        });
    }
    Ok(splits)
}

/// Hold out roughly `frac` of each class for validation. Every class keeps
/// at least one training sample; classes too small to give anything up
/// contribute nothing. Returns None for the holdout when nothing could be
/// held out.
pub fn stratified_holdout<T: Scalar>(
    data: &Dataset<T>,
    frac: f64,
    seed: u64,
) -> Result<(Dataset<T>, Option<Dataset<T>>)> {
    if !(0.0..1.0).contains(&frac) {
        return Err(Error::config(format!("holdout fraction must be in [0, 1), got {frac}")));
    }
    let label_idx = data.label_indices()?;
    let mut held: Vec<usize> = Vec::new();
    for ci in 0..data.labels().len() {
        let members: Vec<usize> =
            (0..data.len()).filter(|&k| label_idx[k] == ci).collect();
        if members.len() < 2 {
            continue;
        }
        let take = ((members.len() as f64 * frac).floor() as usize).min(members.len() - 1);
        if take == 0 {
            continue;
        }
        let mut order = members;
        SeededRng::derive(seed, Purpose::Split, u64::MAX, ci as u64).shuffle(&mut order);
        held.extend_from_slice(&order[..take]);
    }
    if held.is_empty() {
        return Ok((data.clone(), None));
    }
    held.sort_unstable();
    let train: Vec<_> = (0..data.len())
        .filter(|k| !held.contains(k))
        .map(|k| data.samples()[k].clone())
        .collect();
    let val: Vec<_> = held.iter().map(|&k| data.samples()[k].clone()).collect();
    Ok((
        Dataset::with_vocab(train, data.labels().to_vec())?,
        Some(Dataset::with_vocab(val, data.labels().to_vec())?),
    ))
}
