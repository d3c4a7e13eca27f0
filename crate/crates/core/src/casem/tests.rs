use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::tensor::norm;

fn table(entries: &[(&str, Vec<f64>)]) -> EmbeddingTable {
    let mut t = EmbeddingTable::new(entries[0].1.len());
    for (k, v) in entries {
        t.insert(k, v).unwrap();
    }
    t
}

fn corpus(sentences: &[&[&str]]) -> Corpus {
    Corpus::new(
        sentences
            .iter()
            .map(|s| s.iter().map(|w| w.to_string()).collect())
            .collect(),
    )
}

fn random_vec(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

#[test]
fn counts_include_duplicates() {
    let c = corpus(&[&["a", "b", "a"], &["b"]]);
    assert_eq!(c.word_counts["a"], 2);
    assert_eq!(c.word_counts["b"], 2);
    assert_eq!(c.total_tokens(), 4);
}

#[test]
fn segmented_corpus_uses_phrases() {
    let t = table(&[("new york", vec![1.0]), ("new", vec![2.0])]);
    let raw = vec![vec!["new".to_string(), "york".to_string(), "new".to_string()]];
    let c = Corpus::segmented(&t, &raw);
    assert_eq!(c.sentences[0], vec!["new york", "new"]);
}

#[test]
fn w_prime_cases() {
    assert_eq!(solve_w_prime(&[2.0, 3.0], &[1.0, 0.0]).unwrap(), vec![0.0, 3.0]);
    assert_eq!(solve_w_prime(&[0.0, 3.0], &[1.0, 0.0]).unwrap(), vec![0.0, 3.0]);
    assert_eq!(solve_w_prime(&[4.0, 0.0], &[2.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    assert!(solve_w_prime(&[1.0, 0.0], &[0.0, 0.0]).is_err());
}

#[test]
fn chi_cases() {
    let v0 = [1.0, 0.0];
    let wp = [0.0, 1.0];
    assert_eq!(solve_chi(&v0, &wp, &v0), 1.0);
    assert_eq!(solve_chi(&wp, &wp, &v0), 0.0);
    assert_eq!(solve_chi(&[0.5, 0.5], &wp, &v0), 0.5);
    assert_eq!(solve_chi(&[3.0, 3.0], &v0, &v0), 1.0);
}

fn grid_chi(w: &[f64], wp: &[f64], v0: &[f64]) -> f64 {
    (0..=1000)
        .map(|i| i as f64 / 1000.0)
        .min_by(|&a, &b| residual_sq(w, a, v0, wp).total_cmp(&residual_sq(w, b, v0, wp)))
        .unwrap()
}

#[test]
fn chi_matches_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let v0 = random_vec(5, &mut rng);
        let w = random_vec(5, &mut rng);
        let wp = solve_w_prime(&w, &v0).unwrap();
        let chi = solve_chi(&w, &wp, &v0);
        assert!((chi - grid_chi(&w, &wp, &v0)).abs() <= 1e-3);
    }
}

#[test]
fn v0_exact_fit_examples() {
    let t = table(&[("x", vec![2.0, 0.0])]);
    let c = corpus(&[&["x"]]);
    let mut words = BTreeMap::new();
    words.insert("x".into(), WordState { chi: 1.0, w_prime: vec![0.0, 0.0] });
    assert_eq!(solve_v0(&c, &t, &words).unwrap(), vec![2.0, 0.0]);

    let t = table(&[("x", vec![1.0, 1.0])]);
    words.insert("x".into(), WordState { chi: 0.5, w_prime: vec![0.0, 0.0] });
    assert_eq!(solve_v0(&c, &t, &words).unwrap(), vec![2.0, 2.0]);

    words.insert("x".into(), WordState { chi: 0.0, w_prime: vec![0.0, 0.0] });
    assert!(matches!(solve_v0(&c, &t, &words), Err(CasemError::NoContextSignal)));
}

/// Random vocabulary, counts and per-word states.
fn random_instance(
    vocab: usize,
    d: usize,
    rng: &mut ChaCha8Rng,
) -> (Corpus, EmbeddingTable, BTreeMap<String, WordState>) {
    let mut t = EmbeddingTable::new(d);
    let mut words = BTreeMap::new();
    let names: Vec<String> = (0..vocab).map(|i| format!("w{i}")).collect();
    for n in &names {
        t.insert(n, &random_vec(d, rng)).unwrap();
        words.insert(
            n.clone(),
            WordState {
                chi: rng.gen_range(0.0..1.0),
                w_prime: random_vec(d, rng),
            },
        );
    }
    let sentences = (0..3 * vocab)
        .map(|_| (0..rng.gen_range(1..6)).map(|_| names[rng.gen_range(0..vocab)].clone()).collect())
        .collect();
    (Corpus::new(sentences), t, words)
}

#[test]
fn v0_matches_dense_least_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let d = 4;
    let (c, t, words) = random_instance(10, d, &mut rng);
    // stack √n·χ·I · v0 = √n·(w − (1 − χ)·w′) for every word
    let rows = c.word_counts.len() * d;
    let mut a = nalgebra::DMatrix::zeros(rows, d);
    let mut b = nalgebra::DVector::zeros(rows);
    for (k, (word, &n)) in c.word_counts.iter().enumerate() {
        let s = (n as f64).sqrt();
        let st = &words[word];
        let w = t.get(word).unwrap();
        for i in 0..d {
            a[(k * d + i, i)] = s * st.chi;
            b[k * d + i] = s * (w[i] - (1.0 - st.chi) * st.w_prime[i]);
        }
    }
    let want = a.svd(true, true).solve(&b, 1e-14).unwrap();
    let got = solve_v0(&c, &t, &words).unwrap();
    for i in 0..d {
        assert!((got[i] - want[i]).abs() <= 1e-8);
    }
}

#[test]
fn energy_examples() {
    let t = table(&[("a", vec![1.0, 2.0]), ("b", vec![0.0, -3.0])]);
    let c = corpus(&[&["a", "b", "b"]]);
    let mut m = ReembeddingModel {
        dim: 2,
        v0: vec![0.3, 0.4],
        words: BTreeMap::new(),
        energy_trace: vec![],
    };
    for (k, v) in t.iter() {
        m.words.insert(k.into(), WordState { chi: 0.0, w_prime: v.to_vec() });
    }
    assert_eq!(energy(&c, &t, &m), 0.0);
    m.v0 = vec![0.0, 0.0];
    for st in m.words.values_mut() {
        *st = WordState { chi: 1.0, w_prime: vec![0.0, 0.0] };
    }
    assert_eq!(energy(&c, &t, &m), 5.0 + 2.0 * 9.0);
}

#[test]
fn energy_matches_ungrouped_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (c, t, words) = random_instance(12, 6, &mut rng);
    let m = ReembeddingModel {
        dim: 6,
        v0: random_vec(6, &mut rng),
        words,
        energy_trace: vec![],
    };
    let mut direct = 0.0;
    for s in &c.sentences {
        for w in s {
            let st = &m.words[w];
            let x = t.get(w).unwrap();
            for i in 0..6 {
                let r = x[i] - st.chi * m.v0[i] - (1.0 - st.chi) * st.w_prime[i];
                direct += r * r;
            }
        }
    }
    assert!((energy(&c, &t, &m) - direct).abs() <= 1e-10 * direct.max(1.0));
}

#[test]
fn rank_one_corpus_converges_immediately() {
    let u = [0.6, 0.8, 0.0];
    let t = table(&[
        ("a", u.iter().map(|x| 0.5 * x).collect()),
        ("b", u.iter().map(|x| 0.9 * x).collect()),
        ("c", u.iter().map(|x| 0.2 * x).collect()),
    ]);
    let c = corpus(&[&["a", "b"], &["c", "a", "b"]]);
    let m = run_casem(&c, &t, 100).unwrap();
    assert!(m.energy_trace.len() <= 3);
    assert!(energy(&c, &t, &m) < 1e-20);
}

#[test]
fn identical_vectors_converge_immediately() {
    let t = table(&[("a", vec![3.0, -4.0]), ("b", vec![3.0, -4.0])]);
    let c = corpus(&[&["a", "b", "a"]]);
    let m = run_casem(&c, &t, 100).unwrap();
    assert!(m.energy_trace.len() <= 3);
    assert!(energy(&c, &t, &m) < 1e-20);
}

#[test]
fn oov_only_corpus_is_an_error() {
    let t = table(&[("a", vec![1.0])]);
    let c = corpus(&[&["zz"]]);
    assert!(matches!(run_casem(&c, &t, 10), Err(CasemError::EmptyCorpus)));
}

/// Sentences drawn around a shared common direction plus topic noise.
fn noisy_corpus(seed: u64) -> (Corpus, EmbeddingTable) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = 8;
    let common = random_vec(d, &mut rng);
    let mut t = EmbeddingTable::new(d);
    let names: Vec<String> = (0..30).map(|i| format!("w{i}")).collect();
    for (i, n) in names.iter().enumerate() {
        let share = if i < 5 { 1.5 } else { rng.gen_range(0.0..0.6) };
        let v: Vec<f64> = common
            .iter()
            .map(|c| share * c + rng.gen_range(-0.5..0.5))
            .collect();
        t.insert(n, &v).unwrap();
    }
    let sentences = (0..60)
        .map(|_| {
            let mut s: Vec<String> = (0..4).map(|_| names[rng.gen_range(5..30)].clone()).collect();
            s.push(names[rng.gen_range(0..5)].clone());
            s
        })
        .collect();
    (Corpus::new(sentences), t)
}

#[test]
fn trace_strictly_decreases_and_invariants_hold() {
    for seed in 0..5 {
        let (c, t) = noisy_corpus(seed);
        let m = run_casem(&c, &t, 100).unwrap();
        assert!(m.energy_trace.windows(2).all(|w| w[1] < w[0]), "{:?}", m.energy_trace);
        assert!(m.words.values().all(|s| (0.0..=1.0).contains(&s.chi)));
        assert!(max_orthogonality_error(&m) <= 1e-8);
        let last = *m.energy_trace.last().unwrap();
        assert!((energy(&c, &t, &m) - last).abs() <= 1e-9 * last);
        // not the trivial decomposition
        assert!(m.words.values().any(|s| s.chi > 0.0));
    }
}

#[test]
fn step_one_is_order_independent() {
    let (c, t) = noisy_corpus(2);
    let v0 = vec![0.1, -0.2, 0.3, 0.0, 0.5, 0.1, 0.1, -0.4];
    let forward: Vec<_> = c.word_counts.keys().map(|k| (k.as_str(), t.get(k).unwrap())).collect();
    let a = solve_words(forward.iter().copied(), &v0).unwrap();
    let b = solve_words(forward.iter().rev().copied(), &v0).unwrap();
    assert_eq!(a, b);
}

#[test]
fn deterministic_per_seed() {
    let (c, t) = noisy_corpus(4);
    let cfg = CasemConfig { seed: 3, ..CasemConfig::default() };
    let a = run_casem_with(&c, &t, &cfg).unwrap();
    let b = run_casem_with(&c, &t, &cfg).unwrap();
    assert_eq!(a, b);
}

fn one_word_model(chi: f64, w_prime: Vec<f64>, v0: Vec<f64>) -> ReembeddingModel {
    let mut words = BTreeMap::new();
    words.insert("x".to_string(), WordState { chi, w_prime });
    ReembeddingModel {
        dim: v0.len(),
        v0,
        words,
        energy_trace: vec![],
    }
}

#[test]
fn embed_sentence_examples() {
    let m = one_word_model(0.0, vec![0.0, 2.0], vec![1.0, 1.0]);
    let e = embed_sentence(&["q", "r", "s"], &m);
    assert_eq!((e.vector.clone(), e.oov), (vec![3.0, 3.0], 3));
    assert_eq!(embed_sentence(&["x"], &m).vector, vec![0.0, 2.0]);
    let empty = embed_sentence::<&str>(&[], &m);
    assert!(empty.empty && empty.vector == vec![0.0, 0.0]);
}

#[test]
fn embed_sentence_matches_hand_sum() {
    let mut m = one_word_model(0.3, vec![0.5, -1.0, 2.0], vec![1.0, 0.25, -0.5]);
    m.words.insert("y".into(), WordState { chi: 0.8, w_prime: vec![-2.0, 0.0, 1.0] });
    let got = embed_sentence(&["x", "y"], &m).vector;
    let want: Vec<f64> = (0..3)
        .map(|i| {
            m.v0[i] * 0.3 + 0.7 * m.words["x"].w_prime[i] + m.v0[i] * 0.8 + 0.2 * m.words["y"].w_prime[i]
        })
        .collect();
    for i in 0..3 {
        assert!((got[i] - want[i]).abs() <= 1e-12);
    }
}

#[test]
fn similarity_examples() {
    let mut m = one_word_model(0.0, vec![1.0, 0.0], vec![0.0, 0.0]);
    m.words.insert("y".into(), WordState { chi: 0.0, w_prime: vec![0.0, 3.0] });
    assert!((similarity(&["x", "y"], &["x", "y"], &m).unwrap() - 1.0).abs() < 1e-15);
    assert_eq!(similarity(&["x"], &["y"], &m).unwrap(), 0.0);
    assert!(matches!(similarity(&["q"], &["x"], &m), Err(CasemError::ZeroEmbedding)));
}

#[test]
fn extend_adds_unseen_words() {
    let (c, mut t) = noisy_corpus(1);
    let mut m = run_casem(&c, &t, 20).unwrap();
    t.insert("fresh", &[1.0; 8]).unwrap();
    assert_eq!(m.extend(&t, ["fresh", "w0", "missing"]).unwrap(), 1);
    let st = &m.words["fresh"];
    assert!(dot(&st.w_prime, &m.v0).abs() <= 1e-10 * norm(&m.v0) * norm(&st.w_prime));
}

proptest! {
    #[test]
    fn chi_always_in_unit_interval(
        w in proptest::collection::vec(-10.0f64..10.0, 3),
        wp in proptest::collection::vec(-10.0f64..10.0, 3),
        v0 in proptest::collection::vec(-10.0f64..10.0, 3),
    ) {
        let chi = solve_chi(&w, &wp, &v0);
        prop_assert!((0.0..=1.0).contains(&chi));
    }
}
