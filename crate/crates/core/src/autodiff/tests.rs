use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gradcheck;
use super::*;

fn store_with(values: &[(&str, Tensor)]) -> (ParamStore, Vec<ParamId>) {
    let mut store = ParamStore::new();
    let ids = values
        .iter()
        .map(|(n, t)| store.add(n, t.clone(), Group::Other).unwrap())
        .collect();
    (store, ids)
}

#[test]
fn sigmoid_midpoint_and_tanh_zero() {
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let x = g.input(Tensor::scalar(0.0));
    let s = g.sigmoid(x);
    let t = g.tanh(x);
    assert_eq!(g.value(s).data(), &[0.5]);
    assert_eq!(g.value(t).data(), &[0.0]);
}

#[test]
fn uniform_logits_cross_entropy_is_ln_k() {
    let store = ParamStore::new();
    for k in [2, 5, 10] {
        let mut g = Graph::new(&store);
        let x = g.input(Tensor::filled(&[3, k], 0.7));
        let loss = g.softmax_cross_entropy(x, vec![0, 1, k - 1]).unwrap();
        assert!((g.value(loss).data()[0] - (k as f64).ln()).abs() < 1e-12);
    }
}

#[test]
fn sigmoid_slope_at_zero() {
    let (store, ids) = store_with(&[("x", Tensor::scalar(0.0))]);
    let mut g = Graph::new(&store);
    let x = g.param(ids[0]);
    let s = g.sigmoid(x);
    let grads = g.backward(s).unwrap();
    assert_eq!(grads.get(ids[0]).unwrap().data(), &[0.25]);
}

#[test]
fn quadratic_gradient_via_matmul() {
    let (store, ids) = store_with(&[("x", Tensor::matrix(2, 1, vec![1.0, 2.0]).unwrap())]);
    let mut g = Graph::new(&store);
    let x = g.param(ids[0]);
    let xt = g.reshape(x, &[1, 2]).unwrap();
    let q = g.matmul(xt, x).unwrap();
    let grads = g.backward(q).unwrap();
    assert_eq!(grads.get(ids[0]).unwrap().data(), &[2.0, 4.0]);
}

#[test]
fn non_scalar_root_is_rejected() {
    let (store, ids) = store_with(&[("x", Tensor::vector(vec![1.0, 2.0]))]);
    let mut g = Graph::new(&store);
    let x = g.param(ids[0]);
    let err = g.backward(x).unwrap_err();
    assert!(matches!(err, GraphError::NonScalarRoot { .. }));
}

#[test]
fn shape_error_names_node() {
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let a = g.input(Tensor::zeros(&[2, 3]));
    let b = g.input(Tensor::zeros(&[2, 3]));
    let err = g.matmul(a, b).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("node 2") && msg.contains("matmul"), "{msg}");
}

#[test]
fn duplicate_param_names_fail() {
    let mut store = ParamStore::new();
    store.add_zeros("w", &[2], Group::Other).unwrap();
    assert!(matches!(
        store.add_zeros("w", &[2], Group::Chi),
        Err(GraphError::DuplicateParam(_))
    ));
}

#[test]
fn stop_gradient_blocks_flow() {
    let (store, ids) = store_with(&[("x", Tensor::vector(vec![3.0]))]);
    let mut g = Graph::new(&store);
    let x = g.param(ids[0]);
    let frozen = g.stop_gradient(x);
    let y = g.mul(x, frozen).unwrap();
    let s = g.sum(y);
    let grads = g.backward(s).unwrap();
    assert_eq!(grads.get(ids[0]).unwrap().data(), &[3.0]);
}

#[test]
fn forward_recomputes_after_param_change() {
    let (mut store, ids) = store_with(&[("x", Tensor::vector(vec![1.0, 2.0]))]);
    let before = {
        let mut g = Graph::new(&store);
        let x = g.param(ids[0]);
        let s = g.sum(x);
        g.value(s).data()[0]
    };
    store.get_mut(ids[0]).data_mut()[0] = 5.0;
    let mut g = Graph::new(&store);
    let x = g.param(ids[0]);
    g.sum(x);
    let after = g.forward().unwrap().data()[0];
    assert_eq!((before, after), (3.0, 7.0));
}

#[test]
fn adagrad_zero_gradient_is_noop() {
    let (mut store, ids) = store_with(&[("x", Tensor::vector(vec![0.3]))]);
    let grads = {
        let mut g = Graph::new(&store);
        let x = g.param(ids[0]);
        let z = g.input(Tensor::vector(vec![0.0]));
        let y = g.mul(x, z).unwrap();
        let s = g.sum(y);
        g.backward(s).unwrap()
    };
    let mut opt = OptimizerState::new(0.1);
    opt.step(&mut store, &grads, GroupSet::ALL);
    assert_eq!(store.get(ids[0]).data(), &[0.3]);
    assert_eq!(opt.accumulator(0).unwrap(), &[0.0]);
}

fn unit_grad_step(store: &mut ParamStore, id: ParamId, opt: &mut OptimizerState) {
    let grads = {
        let mut g = Graph::new(store);
        let x = g.param(id);
        let s = g.sum(x);
        g.backward(s).unwrap()
    };
    opt.step(store, &grads, GroupSet::ALL);
}

#[test]
fn adagrad_first_step_moves_by_learning_rate() {
    let (mut store, ids) = store_with(&[("x", Tensor::vector(vec![0.0]))]);
    let mut opt = OptimizerState::new(0.1);
    unit_grad_step(&mut store, ids[0], &mut opt);
    assert!((store.get(ids[0]).data()[0] + 0.1).abs() < 1e-8);
}

#[test]
fn adagrad_two_steps_match_hand_computation() {
    let (mut store, ids) = store_with(&[("x", Tensor::vector(vec![0.5]))]);
    let mut opt = OptimizerState::new(0.1);
    unit_grad_step(&mut store, ids[0], &mut opt);
    unit_grad_step(&mut store, ids[0], &mut opt);
    let (mut p, mut acc) = (0.5_f64, 0.0_f64);
    for _ in 0..2 {
        acc += 1.0;
        p -= 0.1 * 1.0 / (acc.sqrt() + 1e-8);
    }
    assert!((store.get(ids[0]).data()[0] - p).abs() < 1e-12);
}

#[test]
fn inactive_groups_are_frozen() {
    let mut store = ParamStore::new();
    let e = store.add("e", Tensor::vector(vec![1.0]), Group::Embed).unwrap();
    let c = store.add("c", Tensor::vector(vec![1.0]), Group::Chi).unwrap();
    let grads = {
        let mut g = Graph::new(&store);
        let (en, cn) = (g.param(e), g.param(c));
        let y = g.add(en, cn).unwrap();
        let s = g.sum(y);
        g.backward(s).unwrap()
    };
    let mut opt = OptimizerState::new(0.1);
    opt.step(&mut store, &grads, coordinate_schedule(150, 100));
    assert_eq!(store.get(e).data(), &[1.0]);
    assert!(store.get(c).data()[0] < 1.0);
}

#[test]
fn schedule_examples() {
    let embed = GroupSet::of(&[Group::Embed, Group::Other]);
    let chi = GroupSet::of(&[Group::Chi, Group::Other]);
    assert_eq!(coordinate_schedule(50, 100), embed);
    assert_eq!(coordinate_schedule(150, 100), chi);
    for step in [0, 1, 99, 12345] {
        let s = coordinate_schedule(step, 0);
        assert!(s.contains(Group::Embed) && s.contains(Group::Chi));
    }
}

proptest! {
    #[test]
    fn schedule_alternates(em in 1u64..50, start in 0u64..1000) {
        let (mut e, mut c) = (0, 0);
        for step in start..start + 2 * em {
            let s = coordinate_schedule(step, em);
            prop_assert!(s.contains(Group::Other));
            prop_assert!(s.contains(Group::Embed) != s.contains(Group::Chi));
            e += s.contains(Group::Embed) as u64;
            c += s.contains(Group::Chi) as u64;
        }
        prop_assert_eq!((e, c), (em, em));
    }
}

fn rand_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::uniform(shape, -1.0, 1.0, rng)
}

/// Builds a two-parameter store and checks `f(a, b)` reduced to a scalar by a
/// random linear functional, so every output entry gets a distinct weight.
fn check_binary(
    sa: &[usize],
    sb: &[usize],
    seed: u64,
    f: impl Fn(&mut Graph, NodeId, NodeId) -> Result<NodeId>,
) -> gradcheck::Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    store.add("a", rand_tensor(sa, &mut rng), Group::Other).unwrap();
    store.add("b", rand_tensor(sb, &mut rng), Group::Other).unwrap();
    let probe_seed = seed ^ 0x5eed;
    gradcheck::check(&mut store, |g| {
        let a = g.param(ParamId(0));
        let b = g.param(ParamId(1));
        let y = f(g, a, b)?;
        let shape = g.value(y).shape().to_vec();
        let w = g.input(Tensor::uniform(&shape, -1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(probe_seed)));
        let p = g.mul(y, w)?;
        Ok(g.sum(p))
    })
    .unwrap()
}

fn assert_ok(report: gradcheck::Report) {
    assert!(report.passed(), "{:?}", report.mismatches);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn grad_elementwise(seed in 0u64..1000, r in 1usize..4, c in 1usize..4) {
        assert_ok(check_binary(&[r, c], &[r, c], seed, |g, a, b| g.add(a, b)));
        assert_ok(check_binary(&[r, c], &[r, c], seed, |g, a, b| g.sub(a, b)));
        assert_ok(check_binary(&[r, c], &[r, c], seed, |g, a, b| g.mul(a, b)));
    }

    #[test]
    fn grad_broadcast(seed in 0u64..1000, r in 1usize..4, c in 1usize..4) {
        assert_ok(check_binary(&[r, c], &[c], seed, |g, a, b| g.add(a, b)));
        assert_ok(check_binary(&[r, c], &[r, 1], seed, |g, a, b| g.mul(a, b)));
        assert_ok(check_binary(&[1], &[r, c], seed, |g, a, b| g.sub(a, b)));
        assert_ok(check_binary(&[r, 1], &[1, c], seed, |g, a, b| g.mul(a, b)));
    }

    #[test]
    fn grad_matmul(seed in 0u64..1000, m in 1usize..4, k in 1usize..4, n in 1usize..4) {
        assert_ok(check_binary(&[m, k], &[k, n], seed, |g, a, b| g.matmul(a, b)));
    }

    #[test]
    fn grad_concat_slice(seed in 0u64..1000, r in 1usize..4, c in 2usize..5) {
        assert_ok(check_binary(&[r, c], &[r, 2], seed, |g, a, b| g.concat(&[a, b, a])));
        assert_ok(check_binary(&[r, c], &[1], seed, |g, a, _| g.slice_cols(a, 1, c)));
    }

    #[test]
    fn grad_gather_segment(seed in 0u64..1000, c in 1usize..4) {
        assert_ok(check_binary(&[4, c], &[1], seed, |g, a, _| g.gather(a, vec![3, 0, 3, 1])));
        assert_ok(check_binary(&[5, c], &[1], seed, |g, a, _| g.segment_sum(a, vec![0, 2, 0, 1, 2], 3)));
    }

    #[test]
    fn grad_unary(seed in 0u64..1000, r in 1usize..4, c in 1usize..4) {
        assert_ok(check_binary(&[r, c], &[1], seed, |g, a, _| Ok(g.sigmoid(a))));
        assert_ok(check_binary(&[r, c], &[1], seed, |g, a, _| Ok(g.tanh(a))));
        assert_ok(check_binary(&[r, c], &[1], seed, |g, a, _| Ok(g.mean(a))));
        assert_ok(check_binary(&[r, c], &[1], seed, |g, a, _| g.reshape(a, &[r * c])));
        assert_ok(check_binary(&[r, c], &[1], seed, |g, a, _| Ok(g.one_minus(a))));
    }

    #[test]
    fn grad_relu(seed in 0u64..1000) {
        // keep inputs away from the kink
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..6)
            .map(|_| {
                let x: f64 = rand::Rng::gen_range(&mut rng, 0.1..1.0);
                if rand::Rng::gen_bool(&mut rng, 0.5) { x } else { -x }
            })
            .collect();
        let (mut store, _) = store_with(&[("x", Tensor::matrix(2, 3, data).unwrap())]);
        let report = gradcheck::check(&mut store, |g| {
            let x = g.param(ParamId(0));
            let r = g.relu(x);
            let sq = g.mul(r, r)?;
            Ok(g.sum(sq))
        }).unwrap();
        assert_ok(report);
    }

    #[test]
    fn grad_losses(seed in 0u64..1000, r in 1usize..4, k in 2usize..5) {
        assert_ok(check_binary(&[r, k], &[r, k], seed, |g, a, b| g.l2_loss(a, b)));
        assert_ok(check_binary(&[r, k], &[r, k], seed, |g, a, b| {
            let t = g.sigmoid(b);
            g.sigmoid_cross_entropy(a, t)
        }));
        let labels: Vec<usize> = (0..r).map(|i| (i + seed as usize) % k).collect();
        assert_ok(check_binary(&[r, k], &[1], seed, move |g, a, _| {
            g.softmax_cross_entropy(a, labels.clone())
        }));
    }

    #[test]
    fn grad_im2col(seed in 0u64..1000, h in 2usize..6, w in 2usize..6, ch in 1usize..3, k in 1usize..4, s in 1usize..3) {
        prop_assume!(k <= h.max(w));
        let Ok(geom) = ConvGeometry::same(h, w, ch, k, s) else { return Ok(()); };
        assert_ok(check_binary(&[2, h * w * ch], &[1], seed, move |g, a, _| g.im2col(a, geom)));
    }
}

#[test]
fn same_padding_geometry() {
    let g = ConvGeometry::same(28, 28, 1, 8, 1).unwrap();
    assert_eq!((g.out_h, g.out_w, g.pad_top, g.pad_left), (28, 28, 3, 3));
    let g = ConvGeometry::same(5, 5, 1, 3, 2).unwrap();
    assert_eq!((g.out_h, g.pad_top), (3, 1));
    assert!(ConvGeometry::same(5, 5, 1, 0, 1).is_err());
}

#[test]
fn im2col_matches_direct_patch_extraction() {
    let (h, w, c, k) = (4, 5, 2, 3);
    let img: Vec<f64> = (0..h * w * c).map(|i| i as f64).collect();
    let geom = ConvGeometry::same(h, w, c, k, 1).unwrap();
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let x = g.input(Tensor::matrix(1, h * w * c, img.clone()).unwrap());
    let cols = g.im2col(x, geom).unwrap();
    let out = g.value(cols);
    assert_eq!(out.shape(), &[h * w, k * k * c]);
    for oy in 0..h {
        for ox in 0..w {
            for ky in 0..k {
                for kx in 0..k {
                    for ch in 0..c {
                        let y = oy as isize + ky as isize - 1;
                        let x = ox as isize + kx as isize - 1;
                        let expect = if y < 0 || x < 0 || y >= h as isize || x >= w as isize {
                            0.0
                        } else {
                            img[(y as usize * w + x as usize) * c + ch]
                        };
                        assert_eq!(out.at(oy * w + ox, (ky * k + kx) * c + ch), expect);
                    }
                }
            }
        }
    }
}

#[test]
fn training_is_bit_deterministic() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut store = ParamStore::new();
        let w = store.add_weight("w", &[3, 2], Group::Embed, &mut rng).unwrap();
        let b = store.add_zeros("b", &[2], Group::Chi).unwrap();
        let x = Tensor::uniform(&[4, 3], -1.0, 1.0, &mut rng);
        let mut opt = OptimizerState::new(0.1);
        for step in 0..20 {
            let grads = {
                let mut g = Graph::new(&store);
                let xn = g.input(x.clone());
                let y = g.affine(xn, w, b).unwrap();
                let t = g.tanh(y);
                let loss = g.softmax_cross_entropy(t, vec![0, 1, 1, 0]).unwrap();
                g.backward(loss).unwrap()
            };
            opt.step(&mut store, &grads, coordinate_schedule(step, 5));
        }
        store.iter().flat_map(|(_, p)| p.value.data().to_vec()).collect::<Vec<_>>()
    };
    let (a, b) = (run(), run());
    assert_eq!(
        a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
        b.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
    );
}
