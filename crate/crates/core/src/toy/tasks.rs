//! Synthetic downstream tasks and pretraining text for the toy model.
//!
//! Token ids: `0` is reserved, `1` is the mask token, `2..VOCAB` are words.
//! The tasks cover every supervised metric kind:
//!
//! | task      | metric   | what decides the label                                |
//! |-----------|----------|-------------------------------------------------------|
//! | `unigram` | accuracy | more words from group A than group B (bag of words)   |
//! | `order`   | F1       | marker 2 appears before marker 3 (needs positions)    |
//! | `density` | Spearman | share of group-A words, bucketed into 5 ordinal bins  |
//! | `bigram`  | Matthews | the bigram `2 3` occurs somewhere (imbalanced)        |

use crate::metrics::MetricKind;
use crate::task::{Example, TaskSpec};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const VOCAB: usize = 32;
pub const MASK_TOKEN: u32 = 1;
pub const FIRST_WORD: u32 = 2;
pub const SEQ_LEN: usize = 16;
pub const EXAMPLES_PER_TASK: usize = 800;
pub const DENSITY_BUCKETS: usize = 5;

const GROUP_A: std::ops::Range<u32> = 2..10;
const GROUP_B: std::ops::Range<u32> = 10..18;

pub const TASK_NAMES: [&str; 4] = ["unigram", "order", "density", "bigram"];

fn word(rng: &mut ChaCha8Rng) -> u32 {
    rng.gen_range(FIRST_WORD..VOCAB as u32)
}

fn unigram(rng: &mut ChaCha8Rng) -> Example {
    loop {
        let tokens: Vec<u32> = (0..SEQ_LEN).map(|_| word(rng)).collect();
        let a = tokens.iter().filter(|t| GROUP_A.contains(t)).count();
        let b = tokens.iter().filter(|t| GROUP_B.contains(t)).count();
        if a != b {
            let label = usize::from(a > b);
            return Example { tokens, label, target: label as f64 };
        }
    }
}

fn order(rng: &mut ChaCha8Rng) -> Example {
    let mut tokens: Vec<u32> = (0..SEQ_LEN).map(|_| rng.gen_range(4..VOCAB as u32)).collect();
    let mut pos: Vec<usize> = (0..SEQ_LEN).collect();
    pos.shuffle(rng);
    tokens[pos[0]] = 2;
    tokens[pos[1]] = 3;
    let label = usize::from(pos[0] < pos[1]);
    Example { tokens, label, target: label as f64 }
}

fn density(rng: &mut ChaCha8Rng) -> Example {
    let share: f64 = rng.gen();
    let tokens: Vec<u32> = (0..SEQ_LEN)
        .map(|_| if rng.gen::<f64>() < share { rng.gen_range(GROUP_A) } else { rng.gen_range(GROUP_B.end..VOCAB as u32) })
        .collect();
    let target = tokens.iter().filter(|t| GROUP_A.contains(t)).count() as f64 / SEQ_LEN as f64;
    let label = ((target * DENSITY_BUCKETS as f64) as usize).min(DENSITY_BUCKETS - 1);
    Example { tokens, label, target }
}

fn has_bigram(tokens: &[u32]) -> bool {
    tokens.windows(2).any(|w| w == [2, 3])
}

fn bigram(rng: &mut ChaCha8Rng) -> Example {
    let positive = rng.gen::<f64>() < 0.35;
    let mut tokens: Vec<u32> = (0..SEQ_LEN).map(|_| word(rng)).collect();
    // break accidental occurrences, then plant one if wanted
    for i in 1..SEQ_LEN {
        if tokens[i - 1] == 2 && tokens[i] == 3 {
            tokens[i] = rng.gen_range(4..VOCAB as u32);
        }
    }
    if positive {
        let at = rng.gen_range(0..SEQ_LEN - 1);
        tokens[at] = 2;
        tokens[at + 1] = 3;
    }
    let label = usize::from(has_bigram(&tokens));
    Example { tokens, label, target: label as f64 }
}

fn build(name: &str, metric: MetricKind, classes: usize, seed: u64, gen: fn(&mut ChaCha8Rng) -> Example) -> TaskSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TaskSpec {
        name: name.to_string(),
        metric,
        num_classes: classes,
        seq_len: SEQ_LEN,
        examples: (0..EXAMPLES_PER_TASK).map(|_| gen(&mut rng)).collect(),
    }
}

/// The four synthetic tasks, fully determined by `seed`.
pub fn make_synthetic_tasks(seed: u64) -> Vec<TaskSpec> {
    let sub = |i: u64| seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i);
    vec![
        build("unigram", MetricKind::Accuracy, 2, sub(1), unigram),
        build("order", MetricKind::F1, 2, sub(2), order),
        build("density", MetricKind::SpearmanCorr, DENSITY_BUCKETS, sub(3), density),
        build("bigram", MetricKind::MatthewsCorr, 2, sub(4), bigram),
    ]
}

/// Unlabelled text from a sparse first-order Markov chain: each word has
/// three preferred successors that together take 80% of the mass.
pub fn pretraining_corpus(seed: u64, sequences: usize) -> Vec<Vec<u32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = FIRST_WORD..VOCAB as u32;
    let successors: Vec<[u32; 3]> = words.clone().map(|_| [word(&mut rng), word(&mut rng), word(&mut rng)]).collect();
    (0..sequences)
        .map(|_| {
            let mut seq = vec![word(&mut rng)];
            while seq.len() < SEQ_LEN {
                let prev = *seq.last().unwrap();
                let next = if rng.gen::<f64>() < 0.8 {
                    successors[(prev - FIRST_WORD) as usize][rng.gen_range(0..3)]
                } else {
                    word(&mut rng)
                };
                seq.push(next);
            }
            seq
        })
        .collect()
}
