use numcore::{check_params_fn, check_tensor_fn, init, Params, Result, Tape, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-4;
const EPS: f64 = 1e-5;

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    init::normal_matrix(rng, rows, cols, 1.0)
}

/// Runs `build` at 10 random points and returns the worst relative error.
fn worst_over_points(
    rows: usize,
    cols: usize,
    seed: u64,
    build: impl Fn(&mut Tape, Var) -> Result<Var>,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..10)
        .map(|_| check_tensor_fn(&build, &random(&mut rng, rows, cols), EPS).unwrap())
        .fold(0.0, f64::max)
}

#[test]
fn mean_of_wx_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = random(&mut rng, 4, 2);
    let err = worst_over_points(3, 4, 11, |t, w| {
        let xv = t.constant(x.clone());
        let y = t.matmul(w, xv)?;
        t.mean(y)
    });
    assert!(err <= TOL, "{err}");
}

#[test]
fn every_elementwise_primitive_passes() {
    type Build = fn(&mut Tape, Var) -> Result<Var>;
    let cases: Vec<(&str, Build)> = vec![
        ("tanh", |t, x| {
            let y = t.tanh(x)?;
            t.sum(y)
        }),
        ("sigmoid", |t, x| {
            let y = t.sigmoid(x)?;
            t.sum(y)
        }),
        ("softplus", |t, x| {
            let y = t.softplus(x)?;
            t.sum(y)
        }),
        ("exp", |t, x| {
            let y = t.exp(x)?;
            t.mean(y)
        }),
        ("ln", |t, x| {
            let s = t.square(x)?;
            let s = t.add_scalar(s, 0.5)?;
            let y = t.ln(s)?;
            t.sum(y)
        }),
        ("sqrt", |t, x| {
            let s = t.square(x)?;
            let s = t.add_scalar(s, 0.1)?;
            let y = t.sqrt(s)?;
            t.sum(y)
        }),
        ("mul/div", |t, x| {
            let y = t.mul(x, x)?;
            let d = t.exp(x)?;
            let q = t.div(y, d)?;
            t.sum(q)
        }),
        ("scale/sub", |t, x| {
            let y = t.scale(x, -1.7)?;
            let z = t.sub(x, y)?;
            let z = t.square(z)?;
            t.sum(z)
        }),
        ("log_sum_exp", |t, x| {
            let y = t.log_sum_exp_rows(x)?;
            t.sum(y)
        }),
        ("softmax", |t, x| {
            let y = t.softmax_rows(x)?;
            let w = t.constant(Tensor::from_fn(3, 4, |i, j| (i as f64) - 0.5 * j as f64));
            let z = t.mul(y, w)?;
            t.sum(z)
        }),
        ("transpose+matmul", |t, x| {
            let xt = t.transpose(x)?;
            let g = t.matmul(x, xt)?;
            t.mean(g)
        }),
        ("sum_rows/sum_cols", |t, x| {
            let r = t.sum_rows(x)?;
            let r = t.square(r)?;
            let c = t.sum_cols(x)?;
            let c = t.tanh(c)?;
            let a = t.sum(r)?;
            let b = t.sum(c)?;
            t.add(a, b)
        }),
        ("concat", |t, x| {
            let y = t.tanh(x)?;
            let c = t.concat_cols(&[x, y])?;
            let r = t.concat_rows(&[c, c])?;
            let r = t.square(r)?;
            t.mean(r)
        }),
        ("gather/pick", |t, x| {
            let g = t.gather_rows(x, &[2, 0, 2, 1])?;
            let p = t.pick_cols(g, &[0, 3, 1, 1])?;
            let p = t.square(p)?;
            t.sum(p)
        }),
        ("scatter", |t, x| {
            let s = t.scatter_rows(x, &[1, 0, 1], 2)?;
            let s = t.tanh(s)?;
            let g = t.gather_rows(s, &[0, 1, 1])?;
            let g = t.mul(g, x)?;
            t.sum(g)
        }),
        ("mul_col/add_row", |t, x| {
            let col = t.sum_cols(x)?;
            let y = t.mul_col(x, col)?;
            let row = t.sum_rows(x)?;
            let y = t.add_row(y, row)?;
            let y = t.tanh(y)?;
            t.sum(y)
        }),
        ("reshape", |t, x| {
            let y = t.reshape(x, &[4, 3])?;
            let w = t.constant(Tensor::from_fn(3, 2, |i, j| (i + 2 * j) as f64 * 0.3));
            let z = t.matmul(y, w)?;
            let z = t.square(z)?;
            t.sum(z)
        }),
    ];
    for (i, (name, build)) in cases.into_iter().enumerate() {
        let err = worst_over_points(3, 4, 100 + i as u64, build);
        assert!(err <= TOL, "{name}: {err}");
    }
}

#[test]
fn relu_gradient_away_from_zero() {
    let err = worst_over_points(2, 5, 3, |t, x| {
        let y = t.relu(x)?;
        let y = t.square(y)?;
        t.sum(y)
    });
    assert!(err <= TOL, "{err}");
}

#[test]
fn learnable_scalar_factor_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut p = Params::new();
    let s = p.add("s", Tensor::scalar(0.3));
    let w = p.add("w", random(&mut rng, 2, 3));
    let err = check_params_fn(
        |t, b| {
            let y = t.scale_by(b[w], b[s])?;
            let y = t.tanh(y)?;
            t.sum(y)
        },
        &p,
        EPS,
    )
    .unwrap();
    assert!(err <= TOL, "{err}");
}

#[test]
fn replay_is_bitwise_deterministic() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut t = Tape::new();
        let w = t.leaf(random(&mut rng, 4, 4));
        let x = t.constant(random(&mut rng, 3, 4));
        let h = t.matmul(x, w).unwrap();
        let h = t.softmax_rows(h).unwrap();
        let l = t.log_sum_exp_rows(h).unwrap();
        let l = t.mean(l).unwrap();
        let g = t.backward(l).unwrap();
        (t.value(l).data().to_vec(), g.get(&t, w))
    };
    let (a, ga) = run();
    let (b, gb) = run();
    assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    assert_eq!(ga.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), gb.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn affine_tanh_gradient(data in proptest::collection::vec(-2.0f64..2.0, 6)) {
            let x = Tensor::matrix(2, 3, data).unwrap();
            let err = check_tensor_fn(|t, x| {
                let w = t.constant(Tensor::from_fn(3, 2, |i, j| 0.3 * i as f64 - 0.2 * j as f64));
                let b = t.constant(Tensor::row(vec![0.1, -0.4]).unwrap());
                let h = t.affine(x, w, b)?;
                let h = t.tanh(h)?;
                t.sum(h)
            }, &x, EPS).unwrap();
            prop_assert!(err <= TOL);
        }
    }
}
