use qcm_sysid::net::{
    backward, backward_batch, forward, forward_batch, init_network, Activation, NetParams, NetShape, Tensor,
};

fn window(shape: &NetShape, phase: f64) -> Vec<f64> {
    (0..shape.input_size()).map(|i| (0.37 * i as f64 + phase).sin() + 0.2 * (0.11 * i as f64).cos()).collect()
}

/// Scalar probe `c · g(x)` whose gradient is `backward(.., c)`.
fn probe(params: &NetParams<f64>, x: &[f64], c: &[f64]) -> f64 {
    forward(params, x).unwrap().iter().zip(c).map(|(o, w)| o * w).sum()
}

fn check_all_parameters(shape: NetShape, seed: u64) {
    // Biases start at zero; give them values so every path is exercised.
    let mut params = init_network::<f64>(shape, seed).unwrap();
    for (i, v) in params.data.iter_mut().enumerate() {
        *v += 0.05 * (i as f64 * 0.618).sin();
    }
    let x = window(&shape, 0.4);
    let c = [0.7, -1.3];
    let grad = backward(&params, &x, &c).unwrap();

    let step = 1e-5;
    let mut worst = (0.0f64, "");
    for t in Tensor::ALL {
        let off = shape.offset(t);
        for j in 0..shape.tensor_len(t) {
            let mut p = params.clone();
            p.data[off + j] += step;
            let up = probe(&p, &x, &c);
            p.data[off + j] -= 2.0 * step;
            let down = probe(&p, &x, &c);
            let numeric = (up - down) / (2.0 * step);
            let analytic = grad.data[off + j];
            // Floor keeps round-off of near-zero entries from dominating.
            let scale = analytic.abs().max(numeric.abs()).max(1e-6);
            let rel = (analytic - numeric).abs() / scale;
            if rel > worst.0 {
                worst = (rel, t.name());
            }
            assert!(rel < 1e-4, "{}[{j}]: analytic {analytic:e}, numeric {numeric:e}", t.name());
        }
    }
    eprintln!("worst relative gradient error {:.2e} in {}", worst.0, worst.1);
}

#[test]
fn gradients_match_central_differences() {
    check_all_parameters(NetShape::shrunk(), 3);
}

#[test]
fn gradients_match_with_saturating_dense_layers() {
    let shape = NetShape { dense2_activation: Activation::Tanh, ..NetShape::shrunk() };
    check_all_parameters(shape, 4);
}

#[test]
fn batch_equals_individual_forwards() {
    let shape = NetShape::shrunk();
    let params = init_network::<f64>(shape, 5).unwrap();
    let xs: Vec<Vec<f64>> = (0..60).map(|k| window(&shape, k as f64 * 0.3)).collect();
    let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
    let batch = forward_batch(&params, &refs).unwrap();
    for (i, x) in xs.iter().enumerate() {
        let single = forward(&params, x).unwrap();
        for (a, b) in single.iter().zip(batch.output(i)) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn gradient_is_additive_over_windows() {
    let shape = NetShape::shrunk();
    let params = init_network::<f64>(shape, 6).unwrap();
    let (a, b) = (window(&shape, 0.1), window(&shape, 2.0));
    let fwd = forward_batch(&params, &[&a, &b]).unwrap();
    let joint = backward_batch(&params, &fwd, &[1.0, 0.5, -0.3, 2.0]).unwrap();
    let mut sum = backward(&params, &a, &[1.0, 0.5]).unwrap();
    sum.add_assign(&backward(&params, &b, &[-0.3, 2.0]).unwrap());
    for (x, y) in joint.data.iter().zip(&sum.data) {
        assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
    }
}

#[test]
fn outputs_are_nonnegative() {
    let shape = NetShape::shrunk();
    for seed in 0..20 {
        let params = init_network::<f64>(shape, seed).unwrap();
        let x = window(&shape, seed as f64);
        assert!(forward(&params, &x).unwrap().iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn gradient_independent_of_thread_count() {
    let shape = NetShape::shrunk();
    let params = init_network::<f32>(shape, 7).unwrap();
    let xs: Vec<Vec<f32>> = (0..70).map(|k| window(&shape, k as f64).iter().map(|&v| v as f32).collect()).collect();
    let refs: Vec<&[f32]> = xs.iter().map(|x| x.as_slice()).collect();
    let up: Vec<f32> = (0..140).map(|i| (i as f32 * 0.1).sin()).collect();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let fwd = forward_batch(&params, &refs).unwrap();
            backward_batch(&params, &fwd, &up).unwrap()
        })
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
}

#[test]
fn saturating_dense2_caps_the_output_magnitude() {
    // With tanh after dense2 the output can never exceed the dense3 weight
    // mass, however large the input; a linear dense2 has no such ceiling.
    let tanh_shape = NetShape { dense2_activation: Activation::Tanh, ..NetShape::shrunk() };
    let linear_shape = NetShape::shrunk();
    let mut params = init_network::<f64>(tanh_shape, 8).unwrap();
    params.data.iter_mut().for_each(|v| *v *= 3.0);
    let cap: f64 = params.tensor(Tensor::Dense3Weight).iter().map(|w| w.abs()).sum::<f64>()
        + params.tensor(Tensor::Dense3Bias).iter().map(|b| b.abs()).sum::<f64>();
    let linear = NetParams::from_data(linear_shape, params.data.clone()).unwrap();
    let mut exceeded = false;
    for k in 0..20 {
        let x: Vec<f64> = window(&tanh_shape, k as f64).iter().map(|v| v * 1e3).collect();
        assert!(forward(&params, &x).unwrap().iter().all(|&o| o <= cap));
        exceeded |= forward(&linear, &x).unwrap().iter().any(|&o| o > cap);
    }
    assert!(exceeded);
}
