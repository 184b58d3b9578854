//! Edit-distance scoring of predicted answers against ground truth.
//!
//! The score of a prediction is `1 - lev(predicted, truth) / max(|predicted|,
//! |truth|)`, a similarity in [0, 1]; a task's score is the mean over its
//! test pairs, and a task set's score is the mean over tasks.

use crate::genotype::Genotype;
use crate::reasoner::Reasoner;
use crate::task::{serialize_grid, ArcTask};

/// Normalized similarity in [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Score(f64);

impl Score {
    /// Callers must pass a value in [0, 1]; out-of-range inputs are a bug.
    pub fn new(value: f64) -> Score {
        debug_assert!((0.0..=1.0).contains(&value), "score {value} outside [0, 1]");
        Score(value)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Levenshtein distance over Unicode scalar values, rolling single-row DP
/// with O(min(|a|, |b|)) working memory.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let long: Vec<char> = a.chars().collect();
    let short: Vec<char> = b.chars().collect();
    let (long, short) = if long.len() >= short.len() { (long, short) } else { (short, long) };
    if short.is_empty() {
        return long.len();
    }
    let mut row: Vec<usize> = (0..=short.len()).collect();
    for (i, &cl) in long.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, &cs) in short.iter().enumerate() {
            let above = row[j + 1];
            let substitute = diag + usize::from(cl != cs);
            row[j + 1] = substitute.min(above + 1).min(row[j] + 1);
            diag = above;
        }
    }
    row[short.len()]
}

/// Similarity of a predicted answer to the truth. Two empty strings are a
/// perfect answer and score 1.
pub fn score(predicted: &str, truth: &str) -> Score {
    let max_len = predicted.chars().count().max(truth.chars().count());
    if max_len == 0 {
        return Score(1.0);
    }
    Score(1.0 - levenshtein(predicted, truth) as f64 / max_len as f64)
}

/// A task evaluation with the reasoner-failure count alongside the score.
#[derive(Clone, Copy, Debug)]
pub struct TaskEvaluation {
    pub score: Score,
    pub failures: u32,
}

/// Score a reasoner on one task: mean similarity over the test pairs, with
/// any reasoner failure contributing 0 for its pair. Failures never abort
/// the evaluation; they are only counted.
pub fn evaluate_detailed(
    reasoner: &dyn Reasoner,
    genotype: &Genotype,
    task: &ArcTask,
) -> TaskEvaluation {
    let mut total = 0.0;
    let mut failures = 0;
    for pair in &task.test {
        match reasoner.predict(genotype, task, &pair.input) {
            Ok(predicted) => total += score(&predicted, &serialize_grid(&pair.output)).value(),
            Err(_) => failures += 1,
        }
    }
    TaskEvaluation {
        score: Score(total / task.test.len() as f64),
        failures,
    }
}

pub fn evaluate(reasoner: &dyn Reasoner, genotype: &Genotype, task: &ArcTask) -> Score {
    evaluate_detailed(reasoner, genotype, task).score
}

/// Mean task score over a non-empty task list, summed in list order.
pub fn meta_score_detailed(
    reasoner: &dyn Reasoner,
    genotype: &Genotype,
    tasks: &[ArcTask],
) -> TaskEvaluation {
    assert!(!tasks.is_empty(), "meta score needs at least one task");
    let mut total = 0.0;
    let mut failures = 0;
    for task in tasks {
        let eval = evaluate_detailed(reasoner, genotype, task);
        total += eval.score.value();
        failures += eval.failures;
    }
    TaskEvaluation {
        score: Score(total / tasks.len() as f64),
        failures,
    }
}

pub fn meta_score(reasoner: &dyn Reasoner, genotype: &Genotype, tasks: &[ArcTask]) -> Score {
    meta_score_detailed(reasoner, genotype, tasks).score
}

#[cfg(test)]
pub(crate) mod oracle {
    /// Textbook recursive definition of edit distance, memoized on the
    /// suffix pair. Kept deliberately independent of the rolling-row
    /// implementation above.
    pub fn levenshtein_recursive(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut memo = vec![vec![usize::MAX; b.len() + 1]; a.len() + 1];
        fn go(a: &[char], b: &[char], i: usize, j: usize, memo: &mut Vec<Vec<usize>>) -> usize {
            if memo[i][j] != usize::MAX {
                return memo[i][j];
            }
            let d = if i == a.len() {
                b.len() - j
            } else if j == b.len() {
                a.len() - i
            } else if a[i] == b[j] {
                go(a, b, i + 1, j + 1, memo)
            } else {
                let substitute = go(a, b, i + 1, j + 1, memo);
                let delete = go(a, b, i + 1, j, memo);
                let insert = go(a, b, i, j + 1, memo);
                1 + substitute.min(delete).min(insert)
            };
            memo[i][j] = d;
            d
        }
        go(&a, &b, 0, 0, &mut memo)
    }

    /// All strings over `alphabet` with length 0..=max_len, shortest first.
    pub fn enumerate_strings(alphabet: &[char], max_len: usize) -> Vec<String> {
        let mut all = vec![String::new()];
        let mut frontier = vec![String::new()];
        for _ in 0..max_len {
            let mut next = Vec::with_capacity(frontier.len() * alphabet.len());
            for s in &frontier {
                for &c in alphabet {
                    let mut t = s.clone();
                    t.push(c);
                    next.push(t);
                }
            }
            all.extend(next.iter().cloned());
            frontier = next;
        }
        all
    }
}
