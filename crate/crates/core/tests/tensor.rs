use bisam::rng;
use bisam::tensor::{adam_step, Adam, AdamState, Grads, Mode, Params, Tape, Tensor, TensorError, Var};
use rand::Rng;

fn random(shape: &[usize], seed: u64) -> Tensor {
    let mut r = rng::stream(seed, "tensor-input");
    let n: usize = shape.iter().product();
    // Keep magnitudes away from zero so relu kinks are never straddled.
    let data = (0..n).map(|_| {
        let v: f64 = r.random_range(0.1..1.5);
        if r.random_bool(0.5) {
            v
        } else {
            -v
        }
    });
    Tensor::new(shape.to_vec(), data.collect()).unwrap()
}

/// Projects the output of `f` onto a fixed random direction and compares the
/// tape gradient of every input entry with central differences.
fn gradcheck(inputs: &[Tensor], f: impl Fn(&mut Tape, &[Var]) -> Var) -> f64 {
    let scalar = |tape: &mut Tape, vars: &[Var]| -> Var {
        let out = f(tape, vars);
        let shape = tape.value(out).shape().to_vec();
        let dir = tape.constant(random(&shape, 99));
        let prod = tape.mul(out, dir).unwrap();
        tape.sum(prod).unwrap()
    };
    let eval = |values: &[Tensor]| -> f64 {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.param(t.clone())).collect();
        let loss = scalar(&mut tape, &vars);
        tape.value(loss).data()[0]
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let loss = scalar(&mut tape, &vars);
    tape.backward(loss).unwrap();
    let h = 1e-6;
    let mut worst = 0.0f64;
    for (k, var) in vars.iter().enumerate() {
        let analytic = tape.grad(*var).unwrap_or_else(|| Tensor::zeros(inputs[k].shape()));
        for i in 0..inputs[k].len() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[i] += h;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[i] -= h;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let a = analytic.data()[i];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(err);
        }
    }
    worst
}

fn check(name: &str, inputs: &[Tensor], f: impl Fn(&mut Tape, &[Var]) -> Var) {
    let worst = gradcheck(inputs, f);
    assert!(worst < 1e-6, "{name}: worst relative error {worst:e}");
}

#[test]
fn elementwise_and_linear_ops() {
    let a = random(&[3, 4], 1);
    let b = random(&[4, 5], 2);
    let c = random(&[3, 4], 3);
    let row = random(&[4], 4);
    check("matmul", &[a.clone(), b.clone()], |t, v| t.matmul(v[0], v[1]).unwrap());
    check("add", &[a.clone(), c.clone()], |t, v| t.add(v[0], v[1]).unwrap());
    check("add_row", &[a.clone(), row.clone()], |t, v| t.add_row(v[0], v[1]).unwrap());
    check("mul", &[a.clone(), c.clone()], |t, v| t.mul(v[0], v[1]).unwrap());
    check("mul self", std::slice::from_ref(&a), |t, v| t.mul(v[0], v[0]).unwrap());
    check("scale", std::slice::from_ref(&a), |t, v| t.scale(v[0], -2.5).unwrap());
    check("relu", std::slice::from_ref(&a), |t, v| t.relu(v[0]).unwrap());
    check("transpose", std::slice::from_ref(&a), |t, v| t.transpose(v[0]).unwrap());
    check("mean_rows", std::slice::from_ref(&a), |t, v| t.mean_rows(v[0]).unwrap());
    check("sum", std::slice::from_ref(&a), |t, v| t.sum(v[0]).unwrap());
}

#[test]
fn slicing_and_concatenation() {
    let a = random(&[4, 6], 5);
    let b = random(&[4, 2], 6);
    let c = random(&[3, 6], 7);
    check("slice_cols", std::slice::from_ref(&a), |t, v| t.slice_cols(v[0], 2, 3).unwrap());
    check("slice_rows", std::slice::from_ref(&a), |t, v| t.slice_rows(v[0], 1, 2).unwrap());
    check("hcat", &[a.clone(), b.clone()], |t, v| t.hcat(&[v[0], v[1], v[0]]).unwrap());
    check("vcat", &[a.clone(), c.clone()], |t, v| t.vcat(&[v[1], v[0]]).unwrap());
}

#[test]
fn normalisation_ops() {
    let x = random(&[3, 5], 8);
    let gain = random(&[5], 9);
    let bias = random(&[5], 10);
    check("softmax rows", std::slice::from_ref(&x), |t, v| t.softmax(v[0], 1).unwrap());
    check("softmax cols", std::slice::from_ref(&x), |t, v| t.softmax(v[0], 0).unwrap());
    check("softmax rank 3", &[random(&[2, 3, 4], 11)], |t, v| t.softmax(v[0], 1).unwrap());
    check("layer_norm", &[x.clone(), gain, bias], |t, v| t.layer_norm(v[0], v[1], v[2], 1e-5).unwrap());
}

#[test]
fn dropout_with_fixed_mask() {
    let x = random(&[4, 4], 12);
    check("dropout", &[x], |t, v| {
        let mut r = rng::stream(3, "mask");
        t.dropout(v[0], 0.3, Mode::Train, &mut r).unwrap()
    });
}

#[test]
fn cross_entropy_plain_and_weighted() {
    let logits = random(&[5, 2], 13);
    let labels = [0, 1, 1, 0, 1];
    check("cross_entropy", std::slice::from_ref(&logits), |t, v| t.cross_entropy(v[0], &labels, None).unwrap());
    check("weighted cross_entropy", &[logits], |t, v| t.cross_entropy(v[0], &labels, Some(&[0.7, 2.1])).unwrap());
}

#[test]
fn composite_attention_like_graph() {
    let x = random(&[4, 3], 14);
    let wq = random(&[3, 3], 15);
    let wk = random(&[3, 3], 16);
    check("attention", &[x, wq, wk], |t, v| {
        let q = t.matmul(v[0], v[1]).unwrap();
        let k = t.matmul(v[0], v[2]).unwrap();
        let kt = t.transpose(k).unwrap();
        let s = t.matmul(q, kt).unwrap();
        let s = t.scale(s, 1.0 / 3f64.sqrt()).unwrap();
        let a = t.softmax(s, 1).unwrap();
        t.matmul(a, v[0]).unwrap()
    });
}

#[test]
fn errors_are_reported() {
    let mut t = Tape::new();
    let a = t.param(random(&[2, 3], 1));
    let b = t.param(random(&[2, 3], 2));
    assert!(matches!(t.matmul(a, b), Err(TensorError::Shape { .. })));
    assert!(matches!(t.backward(a), Err(TensorError::NonScalarLoss(_))));
    let s = t.sum(a).unwrap();
    t.backward(s).unwrap();
    assert_eq!(t.backward(s), Err(TensorError::TapeConsumed));
    assert!(Tensor::new(vec![2, 2], vec![1.0; 3]).is_err());
}

/// Textbook Adam with bias correction, written independently of the library.
fn reference_adam(w: &mut [f64], grads: &[Vec<f64>], hp: Adam) {
    let mut m = vec![0.0; w.len()];
    let mut v = vec![0.0; w.len()];
    for (step, g) in grads.iter().enumerate() {
        let t = (step + 1) as i32;
        for i in 0..w.len() {
            m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g[i];
            v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g[i].powi(2);
            let m_hat = m[i] / (1.0 - hp.beta1.powi(t));
            let v_hat = v[i] / (1.0 - hp.beta2.powi(t));
            w[i] -= hp.lr * m_hat / (v_hat.sqrt() + hp.eps);
        }
    }
}

#[test]
fn adam_matches_reference() {
    let hp = Adam { lr: 0.01, beta1: 0.85, beta2: 0.995, eps: 1e-8 };
    let start = random(&[7], 20);
    let mut r = rng::stream(21, "adam-grads");
    let grads: Vec<Vec<f64>> = (0..60).map(|_| (0..7).map(|_| r.random_range(-3.0..3.0)).collect()).collect();
    let mut want = start.data().to_vec();
    reference_adam(&mut want, &grads, hp);

    let mut params = Params::new();
    params.insert("w", start);
    let mut state = AdamState::new();
    for g in &grads {
        let grads: Grads = [("w".to_string(), Tensor::new(vec![7], g.clone()).unwrap())].into_iter().collect();
        adam_step(&mut params, &grads, &mut state, &hp).unwrap();
    }
    assert_eq!(state.t, 60);
    for (a, b) in params.get("w").unwrap().data().iter().zip(&want) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn first_adam_step_moves_by_learning_rate() {
    let hp = Adam { lr: 0.05, ..Adam::default() };
    let mut params = Params::new();
    params.insert("w", Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap());
    let grads: Grads = [("w".to_string(), Tensor::new(vec![3], vec![4.0, -0.25, 1e3]).unwrap())].into_iter().collect();
    adam_step(&mut params, &grads, &mut AdamState::new(), &hp).unwrap();
    let w = params.get("w").unwrap().data();
    for (got, want) in w.iter().zip([0.95, -1.95, 0.45]) {
        assert!((got - want).abs() < 1e-8, "{got} vs {want}");
    }
}
