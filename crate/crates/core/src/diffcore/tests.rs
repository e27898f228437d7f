use std::sync::Arc;

use super::*;
use crate::error::SignaError;

fn random_tensor(shape: &[usize], rng: &mut RngStream) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.normal()).collect()).unwrap()
}

/// `sum(out ⊙ R)` for a fixed random `R`, so every output entry matters.
fn project(tape: &mut Tape, out: Var, seed: u64) -> Var {
    let shape = tape.value(out).shape().to_vec();
    let mut rng = RngStream::new(seed, Purpose::Probe);
    let r = tape.constant(random_tensor(&shape, &mut rng)).unwrap();
    let prod = tape.hadamard(out, r).unwrap();
    tape.sum(prod).unwrap()
}

const H: f64 = 1e-6;
const OP_TOL: f64 = 1e-5;

fn check_op<F>(instances: u64, build: F)
where
    F: Fn(
        &mut RngStream,
    ) -> (
        ParamStore,
        Box<dyn Fn(&mut Tape, &ParamStore) -> crate::Result<Var>>,
    ),
{
    for seed in 0..instances {
        let mut rng = RngStream::new(1000 + seed, Purpose::Init);
        let (mut store, f) = build(&mut rng);
        let report = gradcheck(&mut store, |t, s| f(t, s), H, OP_TOL).unwrap();
        assert!(
            report.passed(),
            "seed {seed}: {:?}",
            report.failures().collect::<Vec<_>>()
        );
    }
}

fn store_with(entries: Vec<(&str, Tensor)>) -> (ParamStore, Vec<ParamId>) {
    let mut store = ParamStore::new(Precision::F64);
    let ids = entries
        .into_iter()
        .map(|(n, t)| store.add(n, t).unwrap())
        .collect();
    (store, ids)
}

#[test]
fn matmul_examples() {
    let mut tape = Tape::new(Precision::F64);
    let a = tape.constant(Tensor::identity(2)).unwrap();
    let b = tape
        .constant(Tensor::from_rows(&[vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap())
        .unwrap();
    let c = tape.matmul(a, b).unwrap();
    assert_eq!(
        tape.value(c).to_rows(),
        vec![vec![3.0, 4.0], vec![5.0, 6.0]]
    );

    let a = tape
        .constant(Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap())
        .unwrap();
    let b = tape
        .constant(Tensor::from_rows(&[vec![3.0], vec![4.0]]).unwrap())
        .unwrap();
    let c = tape.matmul(a, b).unwrap();
    assert_eq!(tape.value(c).to_rows(), vec![vec![11.0]]);
}

#[test]
fn matmul_shape_error_names_both_shapes() {
    let mut tape = Tape::new(Precision::F64);
    let a = tape.constant(Tensor::zeros(&[2, 3])).unwrap();
    let b = tape.constant(Tensor::zeros(&[2, 3])).unwrap();
    let err = tape.matmul(a, b).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("[2, 3]"), "{msg}");
    assert!(matches!(err, SignaError::Dimension { .. }));
}

#[test]
fn matmul_gradients_5x4x3() {
    check_op(20, |rng| {
        let (store, ids) = store_with(vec![
            ("a", random_tensor(&[5, 4], rng)),
            ("b", random_tensor(&[4, 3], rng)),
        ]);
        let f = move |t: &mut Tape, s: &ParamStore| {
            let a = t.param(s, ids[0])?;
            let b = t.param(s, ids[1])?;
            let c = t.matmul(a, b)?;
            Ok(project(t, c, 1))
        };
        (store, Box::new(f))
    });
}

#[test]
fn transpose_and_elementwise_gradients() {
    check_op(20, |rng| {
        let (store, ids) = store_with(vec![
            ("a", random_tensor(&[3, 4], rng)),
            ("b", random_tensor(&[3, 4], rng)),
            ("c", random_tensor(&[4, 3], rng)),
        ]);
        let f = move |t: &mut Tape, s: &ParamStore| {
            let a = t.param(s, ids[0])?;
            let b = t.param(s, ids[1])?;
            let c = t.param(s, ids[2])?;
            let ct = t.transpose(c)?;
            let x = t.add(a, ct)?;
            let y = t.sub(x, b)?;
            let z = t.hadamard(y, a)?;
            let z = t.scalar_mul(z, 0.7)?;
            let z = t.add_scalar(z, 2.0)?;
            let zs = t_scale(t, z)?;
            let e = t.exp(zs)?;
            let m = t.mean(e)?;
            let s2 = project(t, y, 2);
            let total = t.add(m, s2)?;
            Ok(total)
        };
        (store, Box::new(f))
    });
}

fn t_scale(t: &mut Tape, v: Var) -> crate::Result<Var> {
    t.scalar_mul(v, 0.1)
}

#[test]
fn log_sigmoid_clamp_gradients() {
    check_op(20, |rng| {
        let (store, ids) = store_with(vec![("x", random_tensor(&[4, 5], rng))]);
        let f = move |t: &mut Tape, s: &ParamStore| {
            let x = t.param(s, ids[0])?;
            let sg = t.sigmoid(x)?;
            let cl = t.clamp(sg, 1e-7, 1.0 - 1e-7)?;
            let lg = t.log(cl)?;
            Ok(project(t, lg, 3))
        };
        (store, Box::new(f))
    });
}

#[test]
fn add_row_bias_gradients() {
    check_op(20, |rng| {
        let (store, ids) = store_with(vec![
            ("x", random_tensor(&[4, 3], rng)),
            ("b", random_tensor(&[3], rng)),
        ]);
        let f = move |t: &mut Tape, s: &ParamStore| {
            let x = t.param(s, ids[0])?;
            let b = t.param(s, ids[1])?;
            let y = t.add_row_bias(x, b)?;
            Ok(project(t, y, 4))
        };
        (store, Box::new(f))
    });
}

#[test]
fn elementwise_examples() {
    let mut tape = Tape::new(Precision::F64);
    let one = tape.constant(Tensor::scalar(1.0)).unwrap();
    let l = tape.log(one).unwrap();
    assert_eq!(tape.value(l).item().unwrap(), 0.0);
    let v = tape
        .constant(Tensor::new(vec![2], vec![2.0, 4.0]).unwrap())
        .unwrap();
    let m = tape.mean(v).unwrap();
    assert_eq!(tape.value(m).item().unwrap(), 3.0);
}

#[test]
fn log_rejects_non_positive() {
    let mut tape = Tape::new(Precision::F64);
    let v = tape
        .constant(Tensor::new(vec![2], vec![1.0, 0.0]).unwrap())
        .unwrap();
    assert!(matches!(tape.log(v), Err(SignaError::Domain { .. })));
}

#[test]
fn neg_mean_log_composite_gradient() {
    check_op(20, |rng| {
        let x = random_tensor(&[6], rng).map(|v| v.abs() + 0.5);
        let (store, ids) = store_with(vec![("x", x)]);
        let f = move |t: &mut Tape, s: &ParamStore| {
            let x = t.param(s, ids[0])?;
            let l = t.log(x)?;
            let m = t.mean(l)?;
            t.scalar_mul(m, -1.0)
        };
        (store, Box::new(f))
    });
}

#[test]
fn dropout_identity_cases() {
    let mut rng = RngStream::new(5, Purpose::Dropout);
    let x = random_tensor(&[10, 10], &mut rng);
    let mut tape = Tape::new(Precision::F64);
    let v = tape.constant(x.clone()).unwrap();
    let d0 = tape.dropout(v, 0.0, &mut rng, true).unwrap();
    assert_eq!(tape.value(d0), &x);
    let d1 = tape.dropout(v, 0.5, &mut rng, false).unwrap();
    assert_eq!(tape.value(d1).data(), x.data());
    assert!(tape.dropout(v, 1.0, &mut rng, true).is_err());
    assert!(tape.dropout(v, -0.1, &mut rng, true).is_err());
}

#[test]
fn dropout_monte_carlo_statistics() {
    let mut rng = RngStream::new(11, Purpose::Dropout);
    let n = 1_000_000;
    let mut tape = Tape::new(Precision::F64);
    let v = tape.constant(Tensor::ones(&[n])).unwrap();
    let d = tape.dropout(v, 0.4, &mut rng, true).unwrap();
    let out = tape.value(d).data();
    let mean = out.iter().sum::<f64>() / n as f64;
    let zeros = out.iter().filter(|&&x| x == 0.0).count() as f64 / n as f64;
    assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    assert!((zeros - 0.4).abs() < 0.01, "zero fraction {zeros}");
}

#[test]
fn dropout_gradients() {
    check_op(20, |rng| {
        let (store, ids) = store_with(vec![("x", random_tensor(&[5, 4], rng))]);
        let seed = rng.next_u64();
        let f = move |t: &mut Tape, s: &ParamStore| {
            let mut r = RngStream::new(seed, Purpose::Dropout);
            let x = t.param(s, ids[0])?;
            let d = t.dropout(x, 0.3, &mut r, true)?;
            Ok(project(t, d, 5))
        };
        (store, Box::new(f))
    });
}

#[test]
fn layer_norm_examples() {
    let mut tape = Tape::new(Precision::F64);
    let g = tape.constant(Tensor::ones(&[3])).unwrap();
    let b = tape.constant(Tensor::zeros(&[3])).unwrap();
    let x = tape
        .constant(Tensor::from_rows(&[vec![2.5, 2.5, 2.5]]).unwrap())
        .unwrap();
    let y = tape.layer_norm(x, g, b, 1e-5).unwrap();
    assert_eq!(tape.value(y).data(), &[0.0, 0.0, 0.0]);

    let g = tape.constant(Tensor::ones(&[2])).unwrap();
    let b = tape.constant(Tensor::zeros(&[2])).unwrap();
    let x = tape
        .constant(Tensor::from_rows(&[vec![1.0, -1.0]]).unwrap())
        .unwrap();
    let y = tape.layer_norm(x, g, b, 1e-12).unwrap();
    let out = tape.value(y).data();
    assert!((out[0] - 1.0).abs() < 1e-9 && (out[1] + 1.0).abs() < 1e-9);
}

#[test]
fn layer_norm_rows_standardized() {
    let mut rng = RngStream::new(3, Purpose::Init);
    for _ in 0..20 {
        let x = random_tensor(&[5, 7], &mut rng);
        let mut tape = Tape::new(Precision::F64);
        let g = tape.constant(Tensor::ones(&[7])).unwrap();
        let b = tape.constant(Tensor::zeros(&[7])).unwrap();
        let xv = tape.constant(x).unwrap();
        let y = tape.layer_norm(xv, g, b, 1e-12).unwrap();
        for row in tape.value(y).to_rows() {
            let mean = row.iter().sum::<f64>() / 7.0;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 7.0;
            assert!(mean.abs() < 1e-9);
            assert!((var - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn layer_norm_gradients_4x6() {
    check_op(20, |rng| {
        let (store, ids) = store_with(vec![
            ("x", random_tensor(&[4, 6], rng)),
            ("gain", random_tensor(&[6], rng)),
            ("bias", random_tensor(&[6], rng)),
        ]);
        let f = move |t: &mut Tape, s: &ParamStore| {
            let x = t.param(s, ids[0])?;
            let g = t.param(s, ids[1])?;
            let b = t.param(s, ids[2])?;
            let y = t.layer_norm(x, g, b, 1e-5)?;
            Ok(project(t, y, 6))
        };
        (store, Box::new(f))
    });
}

#[test]
fn activation_examples() {
    let mut tape = Tape::new(Precision::F64);
    let x = tape
        .constant(Tensor::new(vec![3], vec![-1.0, 0.0, 2.0]).unwrap())
        .unwrap();
    let r = tape.activation(x, ActivationOp::Relu).unwrap();
    assert_eq!(tape.value(r).data(), &[0.0, 0.0, 2.0]);

    let x = tape
        .constant(Tensor::new(vec![3], vec![0.0, -1.0, -50.0]).unwrap())
        .unwrap();
    let e = tape.activation(x, ActivationOp::Elu).unwrap();
    let out = tape.value(e).data();
    assert_eq!(out[0], 0.0);
    assert!((out[1] - ((-1.0f64).exp() - 1.0)).abs() < 1e-15);
    assert!((out[2] + 1.0).abs() < 1e-15);
}

#[test]
fn activation_gradients() {
    for kind in 0..3 {
        check_op(20, |rng| {
            let (store, ids) = store_with(vec![
                ("x", random_tensor(&[4, 5], rng)),
                ("slope", Tensor::new(vec![1], vec![rng.uniform()]).unwrap()),
            ]);
            let f = move |t: &mut Tape, s: &ParamStore| {
                let x = t.param(s, ids[0])?;
                let slope = t.param(s, ids[1])?;
                let op = match kind {
                    0 => ActivationOp::Elu,
                    1 => ActivationOp::LeakyRelu(0.23),
                    _ => ActivationOp::Prelu(slope),
                };
                let y = t.activation(x, op)?;
                let r = t.activation(y, ActivationOp::Relu)?;
                let total = t.add(y, r)?;
                let p = project(t, total, 7);
                // keep the slope reachable for the non-PReLU kinds
                let sl = t.scalar_mul(slope, 0.0)?;
                let sl = t.sum(sl)?;
                t.add(p, sl)
            };
            (store, Box::new(f))
        });
    }
}

#[test]
fn rows_l2_normalize_examples() {
    let mut tape = Tape::new(Precision::F64);
    let x = tape
        .constant(Tensor::from_rows(&[vec![3.0, 4.0]]).unwrap())
        .unwrap();
    let y = tape.rows_l2_normalize(x).unwrap();
    let out = tape.value(y).data();
    assert!((out[0] - 0.6).abs() < 1e-15 && (out[1] - 0.8).abs() < 1e-15);

    let unit = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
    let x = tape.constant(unit.clone()).unwrap();
    let y = tape.rows_l2_normalize(x).unwrap();
    assert_eq!(tape.value(y), &unit);

    let x = tape
        .constant(Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap())
        .unwrap();
    match tape.rows_l2_normalize(x) {
        Err(SignaError::DegenerateEmbedding { row }) => assert_eq!(row, 1),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn rows_l2_normalize_gradients_6x8() {
    check_op(20, |rng| {
        let (store, ids) = store_with(vec![("x", random_tensor(&[6, 8], rng))]);
        let f = move |t: &mut Tape, s: &ParamStore| {
            let x = t.param(s, ids[0])?;
            let y = t.rows_l2_normalize(x)?;
            Ok(project(t, y, 8))
        };
        (store, Box::new(f))
    });
}

#[test]
fn spmm_and_row_logsumexp_gradients() {
    check_op(20, |rng| {
        let adj = Arc::new(
            CsrMatrix::new(
                3,
                3,
                vec![0, 2, 5, 7],
                vec![0, 1, 0, 1, 2, 1, 2],
                (0..7).map(|_| rng.uniform()).collect(),
            )
            .unwrap(),
        );
        let mask = Tensor::from_rows(&[
            vec![0.0, 1.0, 1.0, 1.0],
            vec![1.0, 0.0, 1.0, 0.0],
            vec![1.0, 1.0, 1.0, 1.0],
        ])
        .unwrap();
        let (store, ids) = store_with(vec![("x", random_tensor(&[3, 4], rng))]);
        let f = move |t: &mut Tape, s: &ParamStore| {
            let x = t.param(s, ids[0])?;
            let y = t.spmm(&adj, x)?;
            let l = t.row_logsumexp_masked(y, &mask)?;
            Ok(project(t, l, 9))
        };
        (store, Box::new(f))
    });
}

#[test]
fn pair_dots_gradients() {
    check_op(20, |rng| {
        let pairs = Arc::new(vec![(0, 1), (1, 2), (2, 2), (3, 0)]);
        let (store, ids) = store_with(vec![("x", random_tensor(&[4, 3], rng))]);
        let f = move |t: &mut Tape, s: &ParamStore| {
            let x = t.param(s, ids[0])?;
            let y = t.pair_dots(x, &pairs)?;
            Ok(project(t, y, 10))
        };
        (store, Box::new(f))
    });
}

#[test]
fn backward_simple_cases() {
    let mut store = ParamStore::new(Precision::F64);
    let w = store
        .add(
            "w",
            Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap(),
        )
        .unwrap();
    let u = store.add("u", Tensor::ones(&[2])).unwrap();
    let mut tape = Tape::new(Precision::F64);
    let wv = tape.param(&store, w).unwrap();
    let _uv = tape.param(&store, u).unwrap();
    let loss = tape.sum(wv).unwrap();
    tape.backward(loss, &mut store).unwrap();
    assert_eq!(store.grad(w), &Tensor::ones(&[2, 2]));
    assert_eq!(store.grad(u), &Tensor::zeros(&[2]));
}

#[test]
fn backward_rejects_non_scalar() {
    let mut store = ParamStore::new(Precision::F64);
    let mut tape = Tape::new(Precision::F64);
    let v = tape.constant(Tensor::zeros(&[2])).unwrap();
    assert!(matches!(
        tape.backward(v, &mut store),
        Err(SignaError::Contract(_))
    ));
}

#[test]
fn input_leaves_receive_gradients() {
    let mut store = ParamStore::new(Precision::F64);
    let mut tape = Tape::new(Precision::F64);
    let x = tape
        .input(Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap())
        .unwrap();
    let y = tape.hadamard(x, x).unwrap();
    let s = tape.sum(y).unwrap();
    let grads = tape.backward(s, &mut store).unwrap();
    assert_eq!(grads.get(x).unwrap().data(), &[2.0, 4.0, 6.0]);
}

#[test]
fn non_finite_results_are_errors() {
    let mut tape = Tape::new(Precision::F64);
    let x = tape.constant(Tensor::scalar(1000.0)).unwrap();
    assert!(matches!(
        tape.exp(x),
        Err(SignaError::NonFinite { op: "exp" })
    ));
}

#[test]
fn f32_tape_rounds_values() {
    let mut tape = Tape::new(Precision::F32);
    let x = tape.constant(Tensor::scalar(1.0 / 3.0)).unwrap();
    assert_eq!(tape.value(x).item().unwrap(), (1.0f32 / 3.0) as f64);
}
