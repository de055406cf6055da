//! Synthetic corpora shared by the integration tests.
#![allow(dead_code)]

pub mod grad;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use forumguard::util::seeded_rng;
use rand::seq::SliceRandom;
use rand::Rng;

/// Letters-only word `prefix` + base-26 digits of `i`; never a stopword
/// because every generated word starts with `prefix`.
pub fn word(prefix: &str, i: usize) -> String {
    let mut s = prefix.to_string();
    let mut n = i;
    loop {
        s.push((b'a' + (n % 26) as u8) as char);
        n /= 26;
        if n == 0 {
            break;
        }
    }
    s
}

pub struct Synthetic {
    pub texts: Vec<String>,
    pub labels: Vec<u8>,
    pub vocabulary: Vec<String>,
}

/// `n` comments of 8 to 20 words drawn from `fillers` filler words; exactly
/// `round(n * minority)` of them (label 1) also contain one or two trigger
/// words, placed at random.
pub fn trigger_corpus(n: usize, minority: f64, fillers: usize, seed: u64) -> Synthetic {
    let mut rng = seeded_rng(seed, 40);
    let fillers: Vec<String> = (0..fillers).map(|i| word("qx", i)).collect();
    let triggers: Vec<String> = (0..6).map(|i| word("zv", i)).collect();
    let positives = (n as f64 * minority).round() as usize;
    let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i < positives)).collect();
    labels.shuffle(&mut rng);
    let texts = labels
        .iter()
        .map(|&l| {
            let len = rng.gen_range(8..=20);
            let mut words: Vec<&str> = (0..len).map(|_| fillers[rng.gen_range(0..fillers.len())].as_str()).collect();
            if l == 1 {
                for _ in 0..rng.gen_range(1..=2) {
                    let pos = rng.gen_range(0..=words.len());
                    words.insert(pos, &triggers[rng.gen_range(0..triggers.len())]);
                }
            }
            words.join(" ")
        })
        .collect();
    Synthetic {
        texts,
        labels,
        vocabulary: fillers.into_iter().chain(triggers).collect(),
    }
}

/// Comments whose text carries no label information: both classes draw
/// from the same small word pool.
pub fn uninformative_corpus(majority: usize, minority: usize, seed: u64) -> Synthetic {
    let mut rng = seeded_rng(seed, 41);
    let pool: Vec<String> = (0..25).map(|i| word("pk", i)).collect();
    let mut labels: Vec<u8> = std::iter::repeat(0).take(majority).chain(std::iter::repeat(1).take(minority)).collect();
    labels.shuffle(&mut rng);
    let texts = labels
        .iter()
        .map(|_| {
            let len = rng.gen_range(10..=30);
            (0..len).map(|_| pool[rng.gen_range(0..pool.len())].as_str()).collect::<Vec<_>>().join(" ")
        })
        .collect();
    Synthetic {
        texts,
        labels,
        vocabulary: pool,
    }
}

pub fn write_csv(dir: &Path, name: &str, corpus: &Synthetic) -> PathBuf {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "text", "label"]).unwrap();
    for (i, (t, l)) in corpus.texts.iter().zip(&corpus.labels).enumerate() {
        w.write_record([format!("c{i}"), t.clone(), l.to_string()]).unwrap();
    }
    let path = dir.join(name);
    std::fs::write(&path, w.into_inner().unwrap()).unwrap();
    path
}

/// Random vectors in [-1, 1) for every word, in the whitespace text format.
pub fn write_embeddings(dir: &Path, words: &[String], dim: usize, seed: u64) -> PathBuf {
    let mut rng = seeded_rng(seed, 42);
    let mut out = String::new();
    for w in words {
        out.push_str(w);
        for _ in 0..dim {
            let _ = write!(out, " {:.6}", rng.gen_range(-1.0..1.0));
        }
        out.push('\n');
    }
    let path = dir.join("vectors.txt");
    std::fs::write(&path, out).unwrap();
    path
}
