//! Independent checks of the LSTM against a naive scalar reference.

use lockrnn_core::bits::BitVector;
use lockrnn_core::drnn::{
    batch_gradients, decode_model, encode_model, loss, train_dataset, Dataset, ForwardCache,
    Gradients, LstmNetwork, NetShape, Selection, TrainConfig,
};
use lockrnn_core::rng;
use rand::Rng;

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Scalar reference forward pass written directly from the cell equations.
/// Reads weights only through the public layer accessors.
fn reference_forward(net: &LstmNetwork, x: &[f64]) -> Vec<f64> {
    let shape = net.shape().clone();
    let steps = shape.timesteps();
    let w = shape.chunk_width;
    let mut h: Vec<Vec<f64>> = shape.hidden.iter().map(|&n| vec![0.0; n]).collect();
    let mut c = h.clone();
    for t in 0..steps {
        let mut below: Vec<f64> = (0..w).map(|p| x.get(t * w + p).copied().unwrap_or(0.0)).collect();
        for l in 0..shape.layers() {
            let lp = net.layer(l);
            let hw = shape.hidden[l];
            let mut v = h[l].clone();
            v.extend_from_slice(&below);
            let pre = |gate: usize, j: usize| -> f64 {
                let mut s = lp.bias[gate * hw + j];
                for (k, vk) in v.iter().enumerate() {
                    s += lp.w[k * 4 * hw + gate * hw + j] * vk;
                }
                s
            };
            let mut hn = vec![0.0; hw];
            let mut cn = vec![0.0; hw];
            for j in 0..hw {
                let cp = c[l][j];
                let f = sig(pre(0, j) + lp.peep_f[j] * cp);
                let i = sig(pre(1, j) + lp.peep_i[j] * cp);
                let o = sig(pre(2, j) + lp.peep_o[j] * cp);
                let g = pre(3, j).tanh();
                cn[j] = f * cp + i * g;
                hn[j] = o * cn[j].tanh();
            }
            h[l] = hn.clone();
            c[l] = cn;
            below = hn;
        }
    }
    let (rw, rb) = net.readout();
    let top = h.last().unwrap();
    (0..shape.outputs)
        .map(|q| rb[q] + top.iter().enumerate().map(|(j, hj)| rw[j * shape.outputs + q] * hj).sum::<f64>())
        .collect()
}

fn reference_loss(net: &LstmNetwork, xs: &[Vec<f64>], ds: &[Vec<f64>], mask: Option<&[bool]>) -> f64 {
    xs.iter()
        .zip(ds)
        .map(|(x, d)| {
            let z = reference_forward(net, x);
            z.iter()
                .zip(d)
                .enumerate()
                .filter(|(q, _)| mask.is_none_or(|m| m[*q]))
                .map(|(_, (zq, dq))| (zq - dq) * (zq - dq))
                .sum::<f64>()
        })
        .sum()
}

fn random_instance(seed: u64) -> (LstmNetwork, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut r = rng::seeded(seed);
    let chunk = r.gen_range(1..=4);
    let steps = r.gen_range(1..=3);
    let bits = r.gen_range((steps - 1) * chunk + 1..=steps * chunk);
    let layers = r.gen_range(1..=2);
    let hidden: Vec<usize> = (0..layers).map(|_| r.gen_range(1..=4)).collect();
    let outputs = r.gen_range(1..=4);
    let mut net = LstmNetwork::new(NetShape::new(bits, outputs, &hidden, chunk), seed).unwrap();
    for p in net.params_mut() {
        *p = r.gen_range(-1.0..1.0);
    }
    let batch = r.gen_range(1..=3);
    let xs = (0..batch)
        .map(|_| (0..bits).map(|_| f64::from(r.gen_range(0..2u8))).collect())
        .collect();
    let ds = (0..batch)
        .map(|_| (0..outputs).map(|_| f64::from(r.gen_range(0..2u8))).collect())
        .collect();
    (net, xs, ds)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

#[test]
fn forward_matches_reference() {
    for seed in 0..50 {
        let (net, xs, _) = random_instance(seed);
        let mut cache = ForwardCache::new(&net);
        net.forward_batch(&xs, &mut cache).unwrap();
        for (b, x) in xs.iter().enumerate() {
            let want = reference_forward(&net, x);
            for (a, e) in cache.output(b).iter().zip(&want) {
                assert!((a - e).abs() < 1e-12, "seed {seed}");
            }
        }
    }
}

#[test]
fn parameter_gradients_match_central_differences() {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let (mut net, xs, ds) = random_instance(1000 + seed);
        let mut cache = ForwardCache::new(&net);
        let mut grads = Gradients::zeros_like(&net);
        batch_gradients(&net, &xs, &ds, None, &mut cache, &mut grads).unwrap();
        for i in 0..net.param_count() {
            let orig = net.params()[i];
            net.params_mut()[i] = orig + h;
            let up = reference_loss(&net, &xs, &ds, None);
            net.params_mut()[i] = orig - h;
            let down = reference_loss(&net, &xs, &ds, None);
            net.params_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max(rel_err(grads.as_slice()[i], numeric));
        }
    }
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn input_gradients_match_central_differences() {
    let h = 1e-5;
    for seed in 0..40 {
        let (net, mut xs, ds) = random_instance(5000 + seed);
        let shape = net.shape().clone();
        let (steps, w, o) = (shape.timesteps(), shape.chunk_width, shape.outputs);
        let t_min = seed as usize % steps;
        let mut cache = ForwardCache::new(&net);
        net.forward_batch(&xs, &mut cache).unwrap();
        let mut dz = vec![0.0; xs.len() * o];
        for (b, d) in ds.iter().enumerate() {
            for q in 0..o {
                dz[b * o + q] = 2.0 * (cache.output(b)[q] - d[q]);
            }
        }
        let sentinel = 123.0;
        let mut dx = vec![sentinel; xs.len() * steps * w];
        net.input_gradients(&mut cache, &dz, &mut dx, t_min).unwrap();
        for b in 0..xs.len() {
            for p in 0..xs[b].len() {
                let got = dx[b * steps * w + p];
                if p < t_min * w {
                    assert_eq!(got, sentinel);
                    continue;
                }
                let orig = xs[b][p];
                xs[b][p] = orig + h;
                let up = reference_loss(&net, &xs, &ds, None);
                xs[b][p] = orig - h;
                let down = reference_loss(&net, &xs, &ds, None);
                xs[b][p] = orig;
                let numeric = (up - down) / (2.0 * h);
                assert!(rel_err(got, numeric) < 1e-4, "seed {seed} b {b} p {p}: {got} vs {numeric}");
            }
        }
    }
}

#[test]
fn cached_prefix_resume_matches_full_pass() {
    for seed in 0..20 {
        let (net, xs, _) = random_instance(9000 + seed);
        let steps = net.shape().timesteps();
        if steps < 2 {
            continue;
        }
        let mut full = ForwardCache::new(&net);
        net.forward_batch(&xs, &mut full).unwrap();
        let t0 = steps - 1;
        let mut resumed = ForwardCache::new(&net);
        resumed.prepare(&net, xs.len());
        for b in 0..xs.len() {
            for l in 0..net.shape().layers() {
                let (h, c) = full.state(l, t0 - 1, b);
                let (h, c) = (h.to_vec(), c.to_vec());
                resumed.set_state(l, t0 - 1, b, &h, &c);
            }
        }
        net.forward_from(&xs, &mut resumed, t0).unwrap();
        for b in 0..xs.len() {
            assert_eq!(full.output(b), resumed.output(b));
        }
    }
}

#[test]
fn backward_without_forward_is_an_error() {
    let (net, _, _) = random_instance(3);
    let mut cache = ForwardCache::new(&net);
    let mut g = Gradients::zeros_like(&net);
    assert!(net.backward(&mut cache, &[], &mut g).is_err());
}

#[test]
fn zero_error_gives_zero_gradient() {
    let (net, xs, _) = random_instance(11);
    let mut cache = ForwardCache::new(&net);
    net.forward_batch(&xs, &mut cache).unwrap();
    let exact: Vec<Vec<f64>> = (0..xs.len()).map(|b| cache.output(b).to_vec()).collect();
    let mut g = Gradients::zeros_like(&net);
    batch_gradients(&net, &xs, &exact, None, &mut cache, &mut g).unwrap();
    assert_eq!(g.max_abs(), 0.0);
}

#[test]
fn masked_output_weights_get_no_gradient() {
    let shape = NetShape::new(4, 2, &[3], 2);
    let net = LstmNetwork::new(shape, 5).unwrap();
    let xs = vec![vec![1.0, 0.0, 1.0, 1.0], vec![0.0, 1.0, 0.0, 1.0]];
    let ds = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let mask = [true, false];
    let mut cache = ForwardCache::new(&net);
    let mut g = Gradients::zeros_like(&net);
    batch_gradients(&net, &xs, &ds, Some(&mask), &mut cache, &mut g).unwrap();
    for j in 0..3 {
        assert_eq!(g.as_slice()[net.readout_index(j, 1)], 0.0);
        assert_ne!(g.as_slice()[net.readout_index(j, 0)], 0.0);
    }
    let rb = net.readout_index(0, 0) + 3 * 2 + 1;
    assert_eq!(g.as_slice()[rb], 0.0);
}

#[test]
fn all_zero_network_outputs_readout_bias() {
    let mut net = LstmNetwork::zeros(NetShape::new(13, 3, &[4, 2], 4)).unwrap();
    net.readout_mut().1.copy_from_slice(&[0.25, -1.5, 3.0]);
    let mut r = rng::seeded(1);
    for _ in 0..10 {
        let x = BitVector::random(&mut r, 13);
        assert_eq!(net.forward(&x).unwrap(), vec![0.25, -1.5, 3.0]);
    }
}

#[test]
fn single_step_hand_trace() {
    // H = 1, chunk 2, one timestep, x = (1, 0), c_0 = h_0 = 0.
    let mut net = LstmNetwork::zeros(NetShape::new(2, 1, &[1], 2)).unwrap();
    {
        let l = net.layer_mut(0);
        // rows: k=0 is h_{t-1}, k=1 is x_1, k=2 is x_2; gates f,i,o,c.
        l.w.copy_from_slice(&[
            0.3, -0.2, 0.1, 0.4, //
            0.5, 0.6, -0.7, 0.8, //
            0.9, -1.0, 1.1, -1.2,
        ]);
        l.bias.copy_from_slice(&[0.1, 0.2, 0.3, 0.4]);
        l.peep_f[0] = 0.5;
        l.peep_i[0] = 0.5;
        l.peep_o[0] = 0.5;
    }
    {
        let (w, b) = net.readout_mut();
        w[0] = 2.0;
        b[0] = -0.5;
    }
    // Hand arithmetic: pre-activations use only x_1 = 1 plus bias.
    let f = sig(0.5 + 0.1);
    let i = sig(0.6 + 0.2);
    let o = sig(-0.7 + 0.3);
    let g = (0.8f64 + 0.4).tanh();
    let c = f * 0.0 + i * g;
    let h = o * c.tanh();
    let want = 2.0 * h - 0.5;
    let got = net.forward(&BitVector::parse01("10").unwrap()).unwrap()[0];
    assert!((got - want).abs() < 1e-12);
    assert!((got - -0.083_302_759_409_436).abs() < 1e-12, "{got}");
}

#[test]
fn peepholes_change_the_output() {
    let mut net = LstmNetwork::new(NetShape::new(6, 2, &[3], 2), 8).unwrap();
    for (k, p) in net.params_mut().iter_mut().enumerate() {
        *p = ((k * 7919) % 200) as f64 / 100.0 - 1.0;
    }
    let x = BitVector::parse01("110101").unwrap();
    let with = net.forward(&x).unwrap();
    {
        let l = net.layer_mut(0);
        l.peep_f.fill(0.0);
        l.peep_i.fill(0.0);
        l.peep_o.fill(0.0);
    }
    let without = net.forward(&x).unwrap();
    assert!(with.iter().zip(&without).any(|(a, b)| (a - b).abs() > 1e-6));
}

#[test]
fn wide_input_is_rejected() {
    let net = LstmNetwork::new(NetShape::new(4, 1, &[2], 2), 0).unwrap();
    assert!(net.forward(&BitVector::zeros(5)).is_err());
    assert!(net.forward(&BitVector::zeros(3)).is_ok());
}

#[test]
fn forward_is_deterministic() {
    let net = LstmNetwork::new(NetShape::new(20, 3, &[8, 8], 8), 4).unwrap();
    let x = BitVector::parse01("10110011100011110000").unwrap();
    assert_eq!(net.forward(&x).unwrap(), net.forward(&x).unwrap());
}

/// Error-free transformation summation, used as an extended-precision oracle.
fn two_sum_total(values: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = s + v;
        let bp = t - s;
        comp += (s - (t - bp)) + (v - bp);
        s = t;
    }
    s + comp
}

#[test]
fn loss_agrees_with_compensated_sum() {
    let mut r = rng::seeded(42);
    let preds: Vec<Vec<f64>> = (0..500).map(|_| (0..7).map(|_| r.gen_range(-1.0..2.0)).collect()).collect();
    let targets: Vec<BitVector> = (0..500).map(|_| BitVector::random(&mut r, 7)).collect();
    let got = loss(&preds, &targets).unwrap();
    let want = two_sum_total(preds.iter().zip(&targets).flat_map(|(z, d)| {
        z.iter().enumerate().map(move |(q, zq)| {
            let dq = if d.get(q) { 1.0 } else { 0.0 };
            (zq - dq) * (zq - dq)
        })
    }));
    assert!((got.sum - want).abs() <= 1e-12 * want);
    assert!((got.mse - want / 3500.0).abs() <= 1e-12);
}

#[test]
fn save_load_reproduces_outputs() {
    let net = LstmNetwork::new(NetShape::new(30, 5, &[16, 8], 8), 19).unwrap();
    let back = decode_model(&encode_model(&net)).unwrap();
    let mut r = rng::seeded(2);
    for _ in 0..100 {
        let x = BitVector::random(&mut r, 30);
        assert_eq!(net.forward(&x).unwrap(), back.forward(&x).unwrap());
    }
}

fn random_table_data(inputs: usize, outputs: usize, seed: u64) -> Dataset {
    let mut r = rng::seeded(seed);
    let rows = 1usize << inputs;
    let truth: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..outputs).map(|_| f64::from(r.gen_range(0..2u8))).collect())
        .collect();
    Dataset {
        inputs: (0..rows)
            .map(|v| (0..inputs).map(|i| f64::from(((v >> i) & 1) as u8)).collect())
            .collect(),
        targets: truth,
    }
}

#[test]
fn training_is_deterministic() {
    let data = random_table_data(4, 2, 3);
    let cfg = TrainConfig {
        max_epochs: 5,
        batch_size: 4,
        seed: 9,
        ..TrainConfig::default()
    };
    let shape = NetShape::new(4, 2, &[6], 2);
    let a = train_dataset(LstmNetwork::new(shape.clone(), 1).unwrap(), &data, &cfg).unwrap();
    let b = train_dataset(LstmNetwork::new(shape, 1).unwrap(), &data, &cfg).unwrap();
    assert_eq!(a.net.params(), b.net.params());
    assert_eq!(a.history, b.history);
}

#[test]
fn divergence_is_reported() {
    let data = random_table_data(4, 2, 3);
    let cfg = TrainConfig {
        max_epochs: 50,
        batch_size: 4,
        learning_rate: 1e6,
        ..TrainConfig::default()
    };
    let net = LstmNetwork::new(NetShape::new(4, 2, &[6], 2), 1).unwrap();
    let err = train_dataset(net, &data, &cfg).unwrap_err();
    assert!(matches!(err, lockrnn_core::drnn::DrnnError::Diverged { .. }), "{err:?}");
}

#[test]
fn best_dev_snapshot_is_returned() {
    let data = random_table_data(5, 3, 8);
    let cfg = TrainConfig {
        max_epochs: 40,
        patience: 40,
        batch_size: 4,
        seed: 1,
        ..TrainConfig::default()
    };
    let out = train_dataset(LstmNetwork::new(NetShape::new(5, 3, &[8], 2), 2).unwrap(), &data, &cfg).unwrap();
    let best = out
        .history
        .iter()
        .map(|r| r.dev_mse)
        .fold(out.initial_dev_mse, f64::min);
    assert_eq!(out.best_dev_mse, best);
    let final_cfg = TrainConfig {
        selection: Selection::Final,
        ..cfg
    };
    let fin = train_dataset(LstmNetwork::new(NetShape::new(5, 3, &[8], 2), 2).unwrap(), &data, &final_cfg).unwrap();
    assert_eq!(fin.history.len(), 40);
}
