use fusioncell::numcore::{
    checkpoint, AdamWConfig, AdamWState, ParamStore, Tape, Tensor, MASK_VALUE,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
    )
    .unwrap()
}

fn loop_matmul(a: &Tensor, b: &Tensor) -> Vec<f64> {
    let (m, k) = a.dims2().unwrap();
    let n = b.dims2().unwrap().1;
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            for t in 0..k {
                out[i * n + j] += a.get2(i, t) * b.get2(t, j);
            }
        }
    }
    out
}

/// Two-layer perceptron with GeLU and LayerNorm; returns the scalar loss.
fn mlp_loss(store: &ParamStore, x: &Tensor, tape: &mut Tape) -> fusioncell::numcore::Var {
    let ids: Vec<_> = store.ids().collect();
    let x = tape.constant(x.clone());
    let w1 = tape.param(store, ids[0]);
    let b1 = tape.param(store, ids[1]);
    let g = tape.param(store, ids[2]);
    let be = tape.param(store, ids[3]);
    let w2 = tape.param(store, ids[4]);
    let h = tape.matmul(x, w1).unwrap();
    let h = tape.add_row(h, b1).unwrap();
    let h = tape.gelu(h).unwrap();
    let h = tape.layer_norm(h, g, be).unwrap();
    let o = tape.matmul(h, w2).unwrap();
    let s = tape.softmax(o).unwrap();
    let sq = tape.mul(s, o).unwrap();
    tape.mean(sq, 1).and_then(|m| tape.sum_all(m)).unwrap()
}

#[test]
fn composite_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut store = ParamStore::new();
    store.insert("w1", random_tensor(&mut rng, &[4, 5]));
    store.insert("b1", random_tensor(&mut rng, &[5]));
    store.insert("g", random_tensor(&mut rng, &[5]));
    store.insert("beta", random_tensor(&mut rng, &[5]));
    store.insert("w2", random_tensor(&mut rng, &[5, 3]));
    let x = random_tensor(&mut rng, &[3, 4]);
    let mut tape = Tape::new();
    let loss = mlp_loss(&store, &x, &mut tape);
    let grads = tape.backward(loss, &store).unwrap();
    let eval = |s: &ParamStore| {
        let mut t = Tape::new();
        let l = mlp_loss(s, &x, &mut t);
        t.value(l).data()[0]
    };
    let h = 1e-5;
    let ids: Vec<_> = store.ids().collect();
    for _ in 0..5 {
        let id = ids[rng.random_range(0..ids.len())];
        let j = rng.random_range(0..store.get(id).numel());
        let orig = store.get(id).data()[j];
        store.get_mut(id).data_mut()[j] = orig + h;
        let plus = eval(&store);
        store.get_mut(id).data_mut()[j] = orig - h;
        let minus = eval(&store);
        store.get_mut(id).data_mut()[j] = orig;
        let n = (plus - minus) / (2.0 * h);
        let a = grads[id.index()].data()[j];
        let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
        assert!(
            rel < 1e-4,
            "{}[{j}]: analytic {a}, numeric {n}",
            store.name(id)
        );
    }
}

#[test]
fn adamw_two_steps_match_hand_computation() {
    let mut store = ParamStore::new();
    store.insert("p", Tensor::scalar(1.0));
    let cfg = AdamWConfig {
        lr: 0.1,
        weight_decay: 0.0,
        ..AdamWConfig::default()
    };
    let mut opt = AdamWState::new(cfg, &store);
    opt.step(&mut store, &[Tensor::scalar(0.2)]).unwrap();
    opt.step(&mut store, &[Tensor::scalar(-0.4)]).unwrap();
    let (b1, b2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut p = 1.0;
    let (mut m, mut v) = (0.0, 0.0);
    for (t, g) in [(1, 0.2), (2, -0.4)] {
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let mh = m / (1.0 - b1.powi(t));
        let vh = v / (1.0 - b2.powi(t));
        p -= 0.1 * mh / (vh.sqrt() + eps);
    }
    assert!((store.values()[0].data()[0] - p).abs() < 1e-14);
}

#[test]
fn dropout_masks_depend_only_on_the_seed() {
    let run = |seed| {
        let mut tape = Tape::training(seed);
        let x = tape.constant(Tensor::full(&[8, 8], 1.0));
        let y = tape.dropout(x, 0.5).unwrap();
        tape.value(y).data().to_vec()
    };
    assert_eq!(run(4), run(4));
    assert_ne!(run(4), run(5));
    assert!(run(4).iter().all(|&v| v == 0.0 || v == 2.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matmul_matches_triple_loop(m in 1usize..6, k in 1usize..6, n in 1usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (random_tensor(&mut rng, &[m, k]), random_tensor(&mut rng, &[k, n]));
        let mut tape = Tape::new();
        let (va, vb) = (tape.constant(a.clone()), tape.constant(b.clone()));
        let c = tape.matmul(va, vb).unwrap();
        let want = loop_matmul(&a, &b);
        for (x, y) in tape.value(c).data().iter().zip(&want) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn masked_softmax_rows(rows in 1usize..6, cols in 1usize..9, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Tensor::new(vec![rows, cols], (0..rows * cols).map(|_| rng.random_range(-30.0..30.0)).collect()).unwrap();
        let mut keep: Vec<bool> = (0..rows * cols).map(|_| rng.random_bool(0.6)).collect();
        for r in 0..rows {
            keep[r * cols + rng.random_range(0..cols)] = true;
        }
        let mut tape = Tape::new();
        let v = tape.constant(x);
        let m = tape.masked_fill(v, &keep).unwrap();
        let s = tape.softmax(m).unwrap();
        let out = tape.value(s).data();
        prop_assert!(tape.value(m).data().iter().zip(&keep).all(|(v, k)| *k || *v == MASK_VALUE));
        for r in 0..rows {
            let row = &out[r * cols..(r + 1) * cols];
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for c in 0..cols {
                if !keep[r * cols + c] {
                    prop_assert!(row[c] < 1e-8);
                }
            }
        }
    }

    #[test]
    fn concat_then_slice_recovers_parts(r in 1usize..5, c1 in 1usize..5, c2 in 1usize..5, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (random_tensor(&mut rng, &[r, c1]), random_tensor(&mut rng, &[r, c2]));
        let mut tape = Tape::new();
        let (va, vb) = (tape.constant(a.clone()), tape.constant(b.clone()));
        let cat = tape.concat(&[va, vb], 1).unwrap();
        let sa = tape.slice(cat, 1, 0, c1).unwrap();
        let sb = tape.slice(cat, 1, c1, c2).unwrap();
        let tt = tape.transpose(cat).unwrap();
        let back = tape.transpose(tt).unwrap();
        prop_assert_eq!(tape.value(sa), &a);
        prop_assert_eq!(tape.value(sb), &b);
        prop_assert_eq!(tape.value(back), tape.value(cat));
    }

    #[test]
    fn checkpoint_roundtrip_is_bit_exact(sizes in proptest::collection::vec(1usize..20, 1..6), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        for (i, n) in sizes.iter().enumerate() {
            let data: Vec<f64> = (0..*n).map(|_| f64::from_bits(rng.random::<u64>() >> 2)).collect();
            store.insert(format!("p{i}"), Tensor::from_vec(data).unwrap());
        }
        let bytes = checkpoint::encode(&store, &serde_json::json!({"seed": seed}));
        let ck = checkpoint::decode(&bytes).unwrap();
        let mut restored = store.clone();
        for id in restored.ids().collect::<Vec<_>>() {
            restored.get_mut(id).data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        ck.restore_into(&mut restored).unwrap();
        for (a, b) in store.values().iter().zip(restored.values()) {
            let (x, y): (Vec<u64>, Vec<u64>) = (a.data().iter().map(|v| v.to_bits()).collect(), b.data().iter().map(|v| v.to_bits()).collect());
            prop_assert_eq!(x, y);
        }
        prop_assert_eq!(ck.meta["seed"].as_u64(), Some(seed));
    }
}
