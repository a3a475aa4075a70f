//! Fold construction for leave-one-subject-out and stratified k-fold.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;

/// One train/test partition. Indices refer to dataset samples and are
/// sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn fold_from_test(n: usize, mut test: Vec<usize>) -> Fold {
    test.sort_unstable();
    let mut in_test = vec![false; n];
    for &i in &test {
        in_test[i] = true;
    }
    let train = (0..n).filter(|&i| !in_test[i]).collect();
    Fold { train, test }
}

/// One fold per subject, in order of each subject's first appearance.
pub fn loso_split<S: AsRef<str>>(subjects: &[S]) -> Result<Vec<Fold>, EvalError> {
    let mut order: Vec<&str> = Vec::new();
    for s in subjects {
        if !order.contains(&s.as_ref()) {
            order.push(s.as_ref());
        }
    }
    if order.len() < 2 {
        return Err(EvalError::TooFewSubjects(order.len()));
    }
    Ok(order
        .iter()
        .map(|&subject| {
            let test = subjects
                .iter()
                .enumerate()
                .filter(|(_, s)| s.as_ref() == subject)
                .map(|(i, _)| i)
                .collect();
            fold_from_test(subjects.len(), test)
        })
        .collect())
}

/// Class-stratified k folds. Each class's members are shuffled with a
/// seeded ChaCha8 stream and dealt round-robin; the starting fold carries
/// over from class to class so total fold sizes also stay within one.
pub fn stratified_kfold_split<L: AsRef<str>>(
    labels: &[L],
    k: usize,
    seed: u64,
) -> Result<Vec<Fold>, EvalError> {
    if k < 2 {
        return Err(EvalError::BadFoldCount(k));
    }
    let mut classes: Vec<&str> = Vec::new();
    for l in labels {
        if !classes.contains(&l.as_ref()) {
            classes.push(l.as_ref());
        }
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes.len()];
    for (i, l) in labels.iter().enumerate() {
        let c = classes.iter().position(|&x| x == l.as_ref()).unwrap();
        members[c].push(i);
    }
    if let Some((c, m)) = classes
        .iter()
        .zip(&members)
        .find(|(_, m)| m.len() < k)
    {
        return Err(EvalError::ClassTooSmall {
            class: c.to_string(),
            count: m.len(),
            k,
        });
    }
    if classes.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tests: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut next = 0;
    for mut m in members {
        m.shuffle(&mut rng);
        for i in m {
            tests[next].push(i);
            next = (next + 1) % k;
        }
    }
    Ok(tests
        .into_iter()
        .map(|t| fold_from_test(labels.len(), t))
        .collect())
}
