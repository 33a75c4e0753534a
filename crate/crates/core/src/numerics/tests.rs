use proptest::prelude::*;

use super::Rng;
use super::*;

fn store_with(entries: &[(&str, Tensor)]) -> ParamStore {
    let mut s = ParamStore::new();
    for (n, t) in entries {
        s.insert(*n, t.clone());
    }
    s
}

fn random_matrix(rng: &mut Rng, r: usize, c: usize) -> Tensor {
    Tensor::matrix(r, c, (0..r * c).map(|_| rng.uniform_range(-1.0, 1.0)).collect()).unwrap()
}

#[test]
fn square_gradient() {
    let s = store_with(&[("x", Tensor::scalar(3.0))]);
    let mut g = Graph::new(&s);
    let x = g.param_by_name("x").unwrap();
    let y = g.mul(x, x).unwrap();
    let out = g.sum_all(y);
    let grads = g.backward(out).unwrap();
    assert_eq!(grads.get("x").unwrap().data(), &[6.0]);
}

#[test]
fn softmax_sum_has_zero_gradient() {
    let s = store_with(&[("x", Tensor::row(vec![0.3, -1.2, 2.0, 0.0]))]);
    let mut g = Graph::new(&s);
    let x = g.param_by_name("x").unwrap();
    let p = g.softmax(x);
    let out = g.sum_all(p);
    let grads = g.backward(out).unwrap();
    for v in grads.get("x").unwrap().data() {
        assert!(v.abs() < 1e-15);
    }
}

#[test]
fn non_scalar_output_rejected() {
    let s = store_with(&[("x", Tensor::row(vec![1.0, 2.0]))]);
    let mut g = Graph::new(&s);
    let x = g.param_by_name("x").unwrap();
    let y = g.tanh(x);
    assert!(matches!(g.backward(y), Err(crate::Error::Shape(_))));
}

#[test]
fn unreachable_params_get_zero() {
    let s = store_with(&[("a", Tensor::row(vec![1.0])), ("b", Tensor::row(vec![2.0, 3.0]))]);
    let mut g = Graph::new(&s);
    let a = g.param_by_name("a").unwrap();
    let out = g.sum_all(a);
    let grads = g.backward(out).unwrap();
    assert_eq!(grads.get("b").unwrap().data(), &[0.0, 0.0]);
}

#[test]
fn weight_vector_norm_matches_finite_differences() {
    let mut rng = Rng::new(11);
    let s = store_with(&[("w", random_matrix(&mut rng, 3, 4).reshape(vec![3, 4]).unwrap())]);
    let v = random_matrix(&mut rng, 4, 1);
    let report = fd_check(&s, 1e-5, |g| {
        let w = g.param_by_name("w")?;
        let vc = g.constant(v.clone());
        let wv = g.matmul(w, vc)?;
        let sq = g.mul(wv, wv)?;
        Ok(g.sum_all(sq))
    })
    .unwrap();
    assert!(report.max_rel_error < 1e-6, "{report:?}");
}

#[test]
fn quadratic_form_is_exact() {
    let mut rng = Rng::new(3);
    let a = random_matrix(&mut rng, 4, 4);
    let s = store_with(&[("x", random_matrix(&mut rng, 1, 4))]);
    let report = fd_check(&s, 1e-4, |g| {
        let x = g.param_by_name("x")?;
        let ac = g.constant(a.clone());
        let ax = g.matmul(x, ac)?;
        let xax = g.mul(ax, x)?;
        Ok(g.sum_all(xax))
    })
    .unwrap();
    assert!(report.max_rel_error < 1e-10, "{report:?}");
}

#[test]
fn corrupted_gradient_is_flagged() {
    let mut rng = Rng::new(5);
    let s = store_with(&[("x", random_matrix(&mut rng, 2, 3))]);
    let build = |g: &mut Graph| -> crate::Result<NodeId> {
        let x = g.param_by_name("x")?;
        let t = g.tanh(x);
        let e = g.exp(t);
        Ok(g.sum_all(e))
    };
    let mut analytic = {
        let mut g = Graph::new(&s);
        let out = build(&mut g).unwrap();
        g.backward(out).unwrap()
    };
    analytic.scale(1.01);
    let report = fd_check_with(&s, &analytic, 1e-5, None, |st| {
        let mut g = Graph::new(st);
        let out = build(&mut g)?;
        Ok(g.value(out).item())
    })
    .unwrap();
    assert!(!report.passes(1e-4));
    assert!((report.max_rel_error - 0.01 / 1.01).abs() < 1e-4, "{report:?}");
}

/// One graph per primitive, each reduced to a scalar through a fixed random
/// projection so every output element contributes.
fn primitive_case(name: &str, g: &mut Graph, rng_seed: u64) -> crate::Result<NodeId> {
    let a = g.param_by_name("a")?;
    let b = g.param_by_name("b")?;
    let r = g.param_by_name("r")?;
    let mut rng = Rng::new(rng_seed);
    let y = match name {
        "matmul" => {
            let bt = g.transpose(b);
            g.matmul(a, bt)?
        }
        "add" => g.add(a, b)?,
        "add_broadcast" => g.add(a, r)?,
        "sub" => g.sub(a, b)?,
        "mul" => g.mul(a, b)?,
        "scale" => g.scale(a, -1.7),
        "tanh" => g.tanh(a),
        "sigmoid" => g.sigmoid(a),
        "relu" => g.relu(a),
        "exp" => g.exp(a),
        "log" => {
            let e = g.exp(a);
            let p = g.add_scalar(e, 0.5);
            g.log(p)
        }
        "clamp" => g.clamp(a, -0.5, 0.5),
        "softmax" => g.softmax(a),
        "log_softmax" => g.log_softmax(a),
        "concat_rows" => g.concat_rows(&[a, b])?,
        "concat_cols" => g.concat_cols(&[a, b])?,
        "slice" => g.slice(a, 1, 2, 1, 2)?,
        "sum_rows" => g.sum(a, Axis::Rows),
        "sum_cols" => g.sum(a, Axis::Cols),
        "mean_rows" => g.mean(a, Axis::Rows),
        "mean_cols" => g.mean(a, Axis::Cols),
        "mean_all" => g.mean_all(a),
        "max_rows" => g.max(a, Axis::Rows),
        "max_cols" => g.max(a, Axis::Cols),
        "reshape" => g.reshape(a, 4, 3)?,
        "embedding" => g.embedding(a, &[2, 0, 2, 1], None)?,
        "mul_col" => {
            let col = g.slice(b, 0, 3, 1, 1)?;
            g.mul_col(a, col)?
        }
        "block_max" => {
            let stacked = g.concat_rows(&[a, b])?;
            g.block_max(stacked, 2)?
        }
        "block_sum" => {
            let stacked = g.concat_rows(&[a, b])?;
            g.block_sum(stacked, 2)?
        }
        "gather_rows" => g.gather_rows(a, &[Some(2), None, Some(0), Some(2)])?,
        "reparam" => {
            let eps: Vec<f64> = rng.normals(12);
            g.reparam(a, b, &eps)?
        }
        other => panic!("unknown primitive {other}"),
    };
    let (rows, cols) = g.value(y).dims2();
    let proj = Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.uniform_range(-1.0, 1.0)).collect())?;
    let p = g.constant(proj);
    let m = g.mul(y, p)?;
    Ok(g.sum_all(m))
}

const PRIMITIVES: &[&str] = &[
    "matmul",
    "add",
    "add_broadcast",
    "sub",
    "mul",
    "scale",
    "tanh",
    "sigmoid",
    "relu",
    "exp",
    "log",
    "clamp",
    "softmax",
    "log_softmax",
    "concat_rows",
    "concat_cols",
    "slice",
    "sum_rows",
    "sum_cols",
    "mean_rows",
    "mean_cols",
    "mean_all",
    "max_rows",
    "max_cols",
    "reshape",
    "embedding",
    "reparam",
    "mul_col",
    "block_max",
    "block_sum",
    "gather_rows",
];

#[test]
fn every_primitive_passes_gradient_check() {
    for seed in 0..5u64 {
        let mut rng = Rng::new(100 + seed);
        let s = store_with(&[
            ("a", random_matrix(&mut rng, 3, 4)),
            ("b", random_matrix(&mut rng, 3, 4)),
            ("r", random_matrix(&mut rng, 1, 4)),
        ]);
        for name in PRIMITIVES {
            let report = fd_check(&s, 1e-6, |g| primitive_case(name, g, seed)).unwrap();
            assert!(report.max_rel_error < 1e-6, "{name} seed {seed}: {report:?}");
        }
    }
}

#[test]
fn max_tie_goes_to_first() {
    let s = store_with(&[("x", Tensor::row(vec![1.0, 3.0, 3.0, 0.0]))]);
    let mut g = Graph::new(&s);
    let x = g.param_by_name("x").unwrap();
    let m = g.max(x, Axis::Cols);
    let out = g.sum_all(m);
    let grads = g.backward(out).unwrap();
    assert_eq!(grads.get("x").unwrap().data(), &[0.0, 1.0, 0.0, 0.0]);
}

#[test]
fn frozen_embedding_row_gets_no_gradient() {
    let s = store_with(&[("e", Tensor::matrix(3, 2, vec![0.0, 0.0, 1.0, 2.0, 3.0, 4.0]).unwrap())]);
    let mut g = Graph::new(&s);
    let e = g.param_by_name("e").unwrap();
    let rows = g.embedding(e, &[0, 1, 0, 2, 1], Some(0)).unwrap();
    let out = g.sum_all(rows);
    let grads = g.backward(out).unwrap();
    assert_eq!(grads.get("e").unwrap().data(), &[0.0, 0.0, 2.0, 2.0, 1.0, 1.0]);
}

#[test]
fn reparam_with_zero_noise_is_mean() {
    let s = store_with(&[("m", Tensor::row(vec![0.4, -2.0])), ("v", Tensor::row(vec![3.0, -1.0]))]);
    let mut g = Graph::new(&s);
    let m = g.param_by_name("m").unwrap();
    let v = g.param_by_name("v").unwrap();
    let h = g.reparam(m, v, &[0.0, 0.0]).unwrap();
    assert_eq!(g.value(h).data(), &[0.4, -2.0]);
}

#[test]
fn adadelta_is_bit_reproducible() {
    let run = || {
        let mut rng = Rng::new(9);
        let mut s = store_with(&[("w", random_matrix(&mut rng, 3, 3))]);
        let target = random_matrix(&mut rng, 3, 3);
        for _ in 0..20 {
            let grads = {
                let mut g = Graph::new(&s);
                let w = g.param_by_name("w").unwrap();
                let t = g.constant(target.clone());
                let d = g.sub(w, t).unwrap();
                let sq = g.mul(d, d).unwrap();
                let out = g.sum_all(sq);
                g.backward(out).unwrap()
            };
            AdaDelta::default().step(&mut s, &grads).unwrap();
        }
        s.get("w").unwrap().data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

proptest! {
    #[test]
    fn accumulators_stay_nonnegative(gs in proptest::collection::vec(-1e3f64..1e3, 1..40)) {
        let mut s = store_with(&[("x", Tensor::row(vec![0.0]))]);
        for gv in gs {
            let mut grads = Grads::zeros_like(&s);
            grads.by_id_mut(s.id("x").unwrap()).data_mut()[0] = gv;
            AdaDelta::default().step(&mut s, &grads).unwrap();
            let (eg, edx) = s.accumulators(s.id("x").unwrap());
            prop_assert!(eg.data()[0] >= 0.0);
            prop_assert!(edx.data()[0] >= 0.0);
        }
    }

    #[test]
    fn gradient_of_sum_is_sum_of_gradients(seed in 0u64..1000) {
        let mut rng = Rng::new(seed);
        let s = store_with(&[("a", random_matrix(&mut rng, 2, 3)), ("b", random_matrix(&mut rng, 3, 2))]);
        let f1 = |g: &mut Graph| -> crate::Result<NodeId> {
            let a = g.param_by_name("a")?;
            let b = g.param_by_name("b")?;
            let ab = g.matmul(a, b)?;
            let t = g.tanh(ab);
            Ok(g.sum_all(t))
        };
        let f2 = |g: &mut Graph| -> crate::Result<NodeId> {
            let a = g.param_by_name("a")?;
            let s = g.sigmoid(a);
            let m = g.mul(s, a)?;
            Ok(g.sum_all(m))
        };
        let grads_of = |f: &dyn Fn(&mut Graph) -> crate::Result<NodeId>| {
            let mut g = Graph::new(&s);
            let out = f(&mut g).unwrap();
            g.backward(out).unwrap()
        };
        let both = |g: &mut Graph| -> crate::Result<NodeId> {
            let x = f1(g)?;
            let y = f2(g)?;
            let xy = g.concat_cols(&[x, y])?;
            Ok(g.sum_all(xy))
        };
        let mut sum = grads_of(&f1);
        sum.add(&grads_of(&f2)).unwrap();
        let joint = grads_of(&both);
        for ((_, x), (_, y)) in sum.iter().zip(joint.iter()) {
            for (u, v) in x.data().iter().zip(y.data()) {
                prop_assert!((u - v).abs() <= 1e-12 * (1.0 + u.abs()));
            }
        }
    }
}
