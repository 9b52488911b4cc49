// SPDX-License-Identifier: Apache-2.0

//! Small differentiable kit with hand-written backward passes: dense
//! layers, an LSTM, 1-D pools, binary cross-entropy and Adam.

mod activation;
mod adam;
pub mod checkpoint;
mod dense;
mod loss;
mod lstm;
mod pool;
mod tensor;

pub use activation::{sigmoid, Activation};
pub use adam::{adam_step, clip_global_norm, AdamState};
pub use dense::{dense_backward, dense_forward, DenseCache, DenseParams};
pub use loss::{bce_logit_grad, bce_loss, PREDICTION_EPS};
pub use lstm::{lstm_backward, lstm_forward, LstmCache, LstmParams};
pub use pool::{avg_pool_1d, avg_pool_backward, max_pool_1d, max_pool_backward};
pub use tensor::Tensor;

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const H: f64 = 1e-4;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / (a.abs() + b.abs()).max(1e-6)
    }

    fn rand_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn dense_identity_and_scalar() {
        let mut p = DenseParams::zeros(3, 3);
        for i in 0..3 {
            p.w.data_mut()[i * 3 + i] = 1.0;
        }
        let (y, _) = dense_forward(&[1.0, -2.0, 0.5], &p, Activation::Identity).unwrap();
        assert_eq!(y, vec![1.0, -2.0, 0.5]);

        let p = DenseParams {
            w: Tensor::from_vec(&[1, 1], vec![2.0]).unwrap(),
            b: Tensor::from_vec(&[1], vec![1.0]).unwrap(),
        };
        assert_eq!(dense_forward(&[3.0], &p, Activation::Identity).unwrap().0, vec![7.0]);
        assert!(dense_forward(&[3.0, 1.0], &p, Activation::Identity).is_err());
    }

    #[test]
    fn dense_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for act in [Activation::Sigmoid, Activation::Tanh, Activation::Identity] {
            let p = DenseParams::init(4, 5, &mut rng);
            let x = rand_vec(&mut rng, 5);
            let weights = rand_vec(&mut rng, 4);
            let loss = |p: &DenseParams, x: &[f64]| -> f64 {
                let (y, _) = dense_forward(x, p, act).unwrap();
                y.iter().zip(&weights).map(|(a, b)| a * b).sum()
            };
            let (_, cache) = dense_forward(&x, &p, act).unwrap();
            let mut grads = p.zeros_like();
            let gx = dense_backward(&weights, &cache, &p, &mut grads);
            for i in 0..x.len() {
                let mut xp = x.clone();
                xp[i] += H;
                let mut xm = x.clone();
                xm[i] -= H;
                let fd = (loss(&p, &xp) - loss(&p, &xm)) / (2.0 * H);
                assert!(rel_err(fd, gx[i]) < 1e-5, "x[{i}] {fd} vs {}", gx[i]);
            }
            for ti in 0..2 {
                for k in 0..p.tensors()[ti].len() {
                    let mut pp = p.clone();
                    pp.tensors_mut()[ti].data_mut()[k] += H;
                    let mut pm = p.clone();
                    pm.tensors_mut()[ti].data_mut()[k] -= H;
                    let fd = (loss(&pp, &x) - loss(&pm, &x)) / (2.0 * H);
                    let an = grads.tensors()[ti].data()[k];
                    assert!(rel_err(fd, an) < 1e-5, "param {ti}/{k}: {fd} vs {an}");
                }
            }
        }
    }

    #[test]
    fn zero_lstm_outputs_zero() {
        let p = LstmParams::zeros(3, 4);
        let (hs, _) = lstm_forward(&[vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 2.0]], &p).unwrap();
        assert!(hs.iter().flatten().all(|&h| h == 0.0));
        assert!(lstm_forward::<Vec<f64>>(&[], &p).is_err());
    }

    #[test]
    fn single_lstm_step_matches_gate_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = LstmParams::init(2, 3, &mut rng);
        let x = [0.3, -0.7];
        let (hs, _) = lstm_forward(&[x], &p).unwrap();
        let hsz = 3;
        for j in 0..hsz {
            let pre = |gate: usize| {
                let row = gate * hsz + j;
                p.b.data()[row] + (0..2).map(|k| p.w_x.data()[row * 2 + k] * x[k]).sum::<f64>()
            };
            let i = 1.0 / (1.0 + (-pre(0)).exp());
            let o = 1.0 / (1.0 + (-pre(2)).exp());
            let g = pre(3).tanh();
            let c = i * g;
            assert!((hs[0][j] - o * c.tanh()).abs() < 1e-12);
        }
    }

    #[test]
    fn lstm_bptt_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = LstmParams::init(3, 4, &mut rng);
        let seq: Vec<Vec<f64>> = (0..3).map(|_| rand_vec(&mut rng, 3)).collect();
        let w: Vec<Vec<f64>> = (0..3).map(|_| rand_vec(&mut rng, 4)).collect();
        let loss = |p: &LstmParams, seq: &[Vec<f64>]| -> f64 {
            let (hs, _) = lstm_forward(seq, p).unwrap();
            hs.iter().zip(&w).map(|(h, w)| h.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()).sum()
        };
        let (_, cache) = lstm_forward(&seq, &p).unwrap();
        let mut grads = p.zeros_like();
        let dxs = lstm_backward(&w, &cache, &p, &mut grads);
        for t in 0..3 {
            for k in 0..3 {
                let mut sp = seq.clone();
                sp[t][k] += H;
                let mut sm = seq.clone();
                sm[t][k] -= H;
                let fd = (loss(&p, &sp) - loss(&p, &sm)) / (2.0 * H);
                assert!(rel_err(fd, dxs[t][k]) < 1e-4);
            }
        }
        for ti in 0..3 {
            for k in 0..p.tensors()[ti].len() {
                let mut pp = p.clone();
                pp.tensors_mut()[ti].data_mut()[k] += H;
                let mut pm = p.clone();
                pm.tensors_mut()[ti].data_mut()[k] -= H;
                let fd = (loss(&pp, &seq) - loss(&pm, &seq)) / (2.0 * H);
                let an = grads.tensors()[ti].data()[k];
                assert!(rel_err(fd, an) < 1e-4, "tensor {ti}[{k}]: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn pool_examples() {
        assert_eq!(avg_pool_1d(&[vec![1.0, 5.0]]).unwrap(), vec![1.0, 5.0]);
        assert_eq!(max_pool_1d(&[vec![1.0, 5.0]]).unwrap().0, vec![1.0, 5.0]);
        let rows = [vec![1.0, 5.0], vec![3.0, 1.0]];
        assert_eq!(avg_pool_1d(&rows).unwrap(), vec![2.0, 3.0]);
        let (mx, arg) = max_pool_1d(&rows).unwrap();
        assert_eq!(mx, vec![3.0, 5.0]);
        assert_eq!(arg, vec![1, 0]);
        assert!(avg_pool_1d::<Vec<f64>>(&[]).is_err());
        assert!(max_pool_1d(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn max_pool_ties_route_to_first_row() {
        let (_, arg) = max_pool_1d(&[vec![2.0], vec![2.0]]).unwrap();
        assert_eq!(arg, vec![0]);
        assert_eq!(max_pool_backward(&[1.5], &arg, 2), vec![vec![1.5], vec![0.0]]);
    }

    #[test]
    fn pools_match_column_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<f64>> = (0..10).map(|_| rand_vec(&mut rng, 8)).collect();
        let avg = avg_pool_1d(&rows).unwrap();
        let (mx, _) = max_pool_1d(&rows).unwrap();
        for c in 0..8 {
            let mut sum = 0.0;
            let mut best = f64::NEG_INFINITY;
            for r in &rows {
                sum += r[c];
                if r[c] > best {
                    best = r[c];
                }
            }
            assert!((avg[c] - sum / 10.0).abs() < 1e-12);
            assert_eq!(mx[c], best);
        }
    }

    #[test]
    fn bce_examples() {
        let (l, _) = bce_loss(&[0.5], &[1.0]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
        let (l, _) = bce_loss(&[1.0, 0.0, 1.0], &[1.0, 0.0, 1.0]).unwrap();
        assert!(l <= 3.0 * (1.0 / (1.0 - 1e-7f64)).ln() + 1e-15);
        assert!(bce_loss(&[0.3], &[0.5]).is_err());
    }

    #[test]
    fn bce_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let preds: Vec<f64> = (0..16).map(|_| rng.gen_range(0.05..0.95)).collect();
        let labels: Vec<f64> = (0..16).map(|_| f64::from(rng.gen_bool(0.5) as u8)).collect();
        let (_, grad) = bce_loss(&preds, &labels).unwrap();
        for i in 0..16 {
            let mut pp = preds.clone();
            pp[i] += H;
            let mut pm = preds.clone();
            pm[i] -= H;
            let fd = (bce_loss(&pp, &labels).unwrap().0 - bce_loss(&pm, &labels).unwrap().0) / (2.0 * H);
            assert!(rel_err(fd, grad[i]) < 1e-6, "{fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn adam_examples() {
        let mut w = Tensor::from_vec(&[2], vec![1.0, -1.0]).unwrap();
        let g = Tensor::zeros(&[2]);
        let mut st = AdamState::new(0.01);
        adam_step(&mut [&mut w], &[&g], &mut st).unwrap();
        assert_eq!(w.data(), &[1.0, -1.0]);
        assert_eq!(st.step, 1);

        let mut w = Tensor::from_vec(&[2], vec![0.0, 0.0]).unwrap();
        let g = Tensor::from_vec(&[2], vec![3.0, -0.2]).unwrap();
        let mut st = AdamState::new(0.01);
        adam_step(&mut [&mut w], &[&g], &mut st).unwrap();
        assert!((w.data()[0] + 0.01).abs() < 1e-6);
        assert!((w.data()[1] - 0.01).abs() < 1e-6);

        let mut w = Tensor::from_vec(&[1], vec![1.0]).unwrap();
        let mut st = AdamState::new(0.1);
        for _ in 0..100 {
            let g = Tensor::from_vec(&[1], vec![2.0 * w.data()[0]]).unwrap();
            adam_step(&mut [&mut w], &[&g], &mut st).unwrap();
        }
        assert!(w.data()[0].abs() < 0.05, "{}", w.data()[0]);

        let bad = Tensor::zeros(&[3]);
        assert!(adam_step(&mut [&mut w], &[&bad], &mut st).is_err());
    }

    #[test]
    fn clipping_bounds_norm() {
        let mut a = Tensor::from_vec(&[2], vec![3.0, 4.0]).unwrap();
        let before = clip_global_norm(&mut [&mut a], 1.0);
        assert_eq!(before, 5.0);
        assert!((a.squared_norm().sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn checkpoint_round_trip_and_corruption() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = Tensor::uniform(&[3, 2], 1.0, &mut rng);
        let b = Tensor::uniform(&[4], 1.0, &mut rng);
        let bytes = checkpoint::encode("kind=test\n", &[&a, &b]);
        let (meta, ts) = checkpoint::decode(&bytes).unwrap();
        assert_eq!(meta, "kind=test\n");
        assert_eq!(ts, vec![a, b]);
        let mut bad = bytes.clone();
        bad[20] ^= 1;
        assert!(checkpoint::decode(&bad).is_err());
        assert!(checkpoint::decode(&bytes[..bytes.len() - 1]).is_err());
    }

    proptest! {
        #[test]
        fn pools_are_permutation_invariant(rows in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 3), 1..7), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut shuffled = rows.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let a = avg_pool_1d(&rows).unwrap();
            let b = avg_pool_1d(&shuffled).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            prop_assert_eq!(max_pool_1d(&rows).unwrap().0, max_pool_1d(&shuffled).unwrap().0);
        }
    }
}
