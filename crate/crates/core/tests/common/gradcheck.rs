//! Finite-difference gradient checks shared by the autodiff and acceptance tests.

use std::rc::Rc;

use hydrorad::neural::nets::{bind, Activation, ConvNet, ConvSpec, Dropout, Mlp, MlpSpec};
use hydrorad::neural::{Graph, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FIRST_ORDER_TOL: f64 = 1e-5;
pub const DOUBLE_BACKPROP_TOL: f64 = 1e-4;
pub const STEP: f64 = 1e-6;

pub type Build = dyn Fn(&mut Graph, &[Var]) -> Var;

pub fn random(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// Values away from zero so kinks are never straddled by the stencil.
pub fn away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let mut t = random(rng, shape, 0.1, 1.5);
    for v in &mut t.data {
        if rng.random::<bool>() {
            *v = -*v;
        }
    }
    t
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale < 1e-300 {
        diff
    } else {
        diff / scale
    }
}

/// Scalar probe: Σ w ⊙ f(inputs) with fixed random weights.
pub fn probe(g: &mut Graph, inputs: &[Var], f: &Build, w: &Tensor) -> Var {
    let y = f(g, inputs);
    let wv = g.constant(w.clone());
    let yw = g.mul(y, wv);
    g.sum(yw)
}

pub fn eval(inputs: &[Tensor], f: &Build, w: &Tensor) -> f64 {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let out = probe(&mut g, &vars, f, w);
    g.value(out).item()
}

/// Largest relative error between analytic and central-difference gradients
/// over all inputs.
pub fn first_order_error(inputs: &[Tensor], f: &Build, rng: &mut ChaCha8Rng) -> f64 {
    let out_shape = {
        let mut g = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
        let y = f(&mut g, &vars);
        g.value(y).shape.clone()
    };
    let w = random(rng, &out_shape, -1.0, 1.0);
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let out = probe(&mut g, &vars, f, &w);
    let grads = g.grad(out, &vars).unwrap();
    let mut worst: f64 = 0.0;
    for (k, gv) in grads.iter().enumerate() {
        let analytic = g.value(*gv).data.clone();
        let numeric: Vec<f64> = (0..inputs[k].len())
            .map(|i| {
                let h = STEP * inputs[k].data[i].abs().max(1.0);
                let mut plus = inputs.to_vec();
                plus[k].data[i] += h;
                let mut minus = inputs.to_vec();
                minus[k].data[i] -= h;
                (eval(&plus, f, &w) - eval(&minus, f, &w)) / (2.0 * h)
            })
            .collect();
        worst = worst.max(rel_err(&analytic, &numeric));
    }
    worst
}

/// Checks the gradient of ⟨v, ∇f⟩ against finite differences of ∇f.
pub fn second_order_error(inputs: &[Tensor], f: &Build, rng: &mut ChaCha8Rng) -> f64 {
    let out_shape = {
        let mut g = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
        let y = f(&mut g, &vars);
        g.value(y).shape.clone()
    };
    let w = random(rng, &out_shape, -1.0, 1.0);
    let dirs: Vec<Tensor> = inputs.iter().map(|t| random(rng, &t.shape, -1.0, 1.0)).collect();
    let directional = |ins: &[Tensor]| -> (f64, Vec<Vec<f64>>) {
        let mut g = Graph::new();
        let vars: Vec<Var> = ins.iter().map(|t| g.leaf(t.clone())).collect();
        let out = probe(&mut g, &vars, f, &w);
        let grads = g.grad(out, &vars).unwrap();
        let mut s = None;
        for (gv, d) in grads.iter().zip(&dirs) {
            let dv = g.constant(d.clone());
            let p = g.mul(*gv, dv);
            let p = g.sum(p);
            s = Some(match s {
                None => p,
                Some(prev) => g.add(prev, p),
            });
        }
        let s = s.unwrap();
        let value = g.value(s).item();
        let second = g.grad(s, &vars).unwrap();
        (value, second.iter().map(|v| g.value(*v).data.clone()).collect())
    };
    let (_, analytic) = directional(inputs);
    let mut worst: f64 = 0.0;
    for k in 0..inputs.len() {
        let numeric: Vec<f64> = (0..inputs[k].len())
            .map(|i| {
                let h = STEP * inputs[k].data[i].abs().max(1.0);
                let mut plus = inputs.to_vec();
                plus[k].data[i] += h;
                let mut minus = inputs.to_vec();
                minus[k].data[i] -= h;
                (directional(&plus).0 - directional(&minus).0) / (2.0 * h)
            })
            .collect();
        worst = worst.max(rel_err(&analytic[k], &numeric));
    }
    worst
}

pub struct Case {
    pub name: &'static str,
    pub inputs: Vec<Tensor>,
    pub f: Box<Build>,
    pub smooth: bool,
}

pub fn cases(rng: &mut ChaCha8Rng) -> Vec<Case> {
    let (m, k, n) = (rng.random_range(2..5), rng.random_range(2..5), rng.random_range(2..5));
    let shape = [m, n];
    let pos = |rng: &mut ChaCha8Rng| random(rng, &[m, n], 0.3, 2.0);
    let any = |rng: &mut ChaCha8Rng| random(rng, &[m, n], -1.5, 1.5);
    let gather_idx: Rc<[usize]> = (0..7).map(|_| rng.random_range(0..m * n)).collect();
    let scatter_idx: Rc<[usize]> = (0..m * n).map(|_| rng.random_range(0..3)).collect();
    let mask: Rc<[f64]> = (0..m * n).map(|_| rng.random_range(-2.0..2.0)).collect();
    vec![
        Case {
            name: "matmul",
            inputs: vec![random(rng, &[m, k], -1.0, 1.0), random(rng, &[k, n], -1.0, 1.0)],
            f: Box::new(|g, v| g.matmul(v[0], v[1]).unwrap()),
            smooth: true,
        },
        Case {
            name: "matmul_transposed",
            inputs: vec![random(rng, &[k, m], -1.0, 1.0), random(rng, &[n, k], -1.0, 1.0)],
            f: Box::new(|g, v| g.matmul_t(v[0], v[1], true, true).unwrap()),
            smooth: true,
        },
        Case {
            name: "add",
            inputs: vec![any(rng), any(rng)],
            f: Box::new(|g, v| g.add(v[0], v[1])),
            smooth: true,
        },
        Case {
            name: "sub",
            inputs: vec![any(rng), any(rng)],
            f: Box::new(|g, v| g.sub(v[0], v[1])),
            smooth: true,
        },
        Case {
            name: "mul",
            inputs: vec![any(rng), any(rng)],
            f: Box::new(|g, v| g.mul(v[0], v[1])),
            smooth: true,
        },
        Case {
            name: "scale",
            inputs: vec![any(rng)],
            f: Box::new(|g, v| g.scale(v[0], -1.7)),
            smooth: true,
        },
        Case {
            name: "add_scalar",
            inputs: vec![any(rng)],
            f: Box::new(|g, v| g.add_scalar(v[0], 0.3)),
            smooth: true,
        },
        Case {
            name: "recip",
            inputs: vec![pos(rng)],
            f: Box::new(|g, v| g.recip(v[0])),
            smooth: true,
        },
        Case {
            name: "log",
            inputs: vec![pos(rng)],
            f: Box::new(|g, v| g.log(v[0])),
            smooth: true,
        },
        Case {
            name: "exp",
            inputs: vec![any(rng)],
            f: Box::new(|g, v| g.exp(v[0])),
            smooth: true,
        },
        Case {
            name: "sqrt",
            inputs: vec![pos(rng)],
            f: Box::new(|g, v| g.sqrt(v[0])),
            smooth: true,
        },
        Case {
            name: "tanh",
            inputs: vec![any(rng)],
            f: Box::new(|g, v| g.tanh(v[0])),
            smooth: true,
        },
        Case {
            name: "sigmoid",
            inputs: vec![any(rng)],
            f: Box::new(|g, v| g.sigmoid(v[0])),
            smooth: true,
        },
        Case {
            name: "sum",
            inputs: vec![any(rng)],
            f: Box::new(|g, v| g.sum(v[0])),
            smooth: true,
        },
        Case {
            name: "mean",
            inputs: vec![any(rng)],
            f: Box::new(|g, v| g.mean(v[0])),
            smooth: true,
        },
        Case {
            name: "gather",
            inputs: vec![any(rng)],
            f: Box::new(move |g, v| g.gather(v[0], gather_idx.clone(), vec![7])),
            smooth: true,
        },
        Case {
            name: "scatter_add",
            inputs: vec![any(rng)],
            f: Box::new(move |g, v| g.scatter_add(v[0], scatter_idx.clone(), vec![3])),
            smooth: true,
        },
        Case {
            name: "mask",
            inputs: vec![any(rng)],
            f: Box::new(move |g, v| g.mask(v[0], mask.clone())),
            smooth: true,
        },
        Case {
            name: "reshape",
            inputs: vec![any(rng)],
            f: Box::new(move |g, v| g.reshape(v[0], vec![n, m])),
            smooth: true,
        },
        Case {
            name: "relu",
            inputs: vec![away_from_zero(rng, &shape)],
            f: Box::new(|g, v| g.relu(v[0])),
            smooth: false,
        },
        Case {
            name: "leaky_relu",
            inputs: vec![away_from_zero(rng, &shape)],
            f: Box::new(|g, v| g.leaky_relu(v[0], 0.3)),
            smooth: false,
        },
        Case {
            name: "abs",
            inputs: vec![away_from_zero(rng, &shape)],
            f: Box::new(|g, v| g.abs(v[0])),
            smooth: false,
        },
        Case {
            name: "softplus",
            inputs: vec![away_from_zero(rng, &shape)],
            f: Box::new(|g, v| g.softplus(v[0])),
            smooth: true,
        },
        Case {
            name: "add_row",
            inputs: vec![any(rng), random(rng, &[1, n], -1.0, 1.0)],
            f: Box::new(|g, v| g.add_row(v[0], v[1])),
            smooth: true,
        },
        Case {
            name: "sum_rows",
            inputs: vec![any(rng)],
            f: Box::new(|g, v| g.sum_rows(v[0])),
            smooth: true,
        },
        Case {
            name: "columns",
            inputs: vec![any(rng)],
            f: Box::new(move |g, v| g.columns(v[0], 1, n)),
            smooth: true,
        },
        Case {
            name: "concat_cols",
            inputs: vec![any(rng), random(rng, &[m, k], -1.0, 1.0)],
            f: Box::new(|g, v| g.concat_cols(v[0], v[1])),
            smooth: true,
        },
    ]
}

/// (‖∇ₓ D(x)‖₂ − 1)² averaged over rows, as a function of D's parameters.
pub fn penalty_value(critic: &Mlp, params: &[Tensor], x: &Tensor, mask_seed: u64) -> (Graph, Var, Vec<Var>) {
    let mut g = Graph::new();
    let pv = bind(&mut g, params);
    let xv = g.leaf(x.clone());
    let mut mrng = ChaCha8Rng::seed_from_u64(mask_seed);
    let d = critic
        .forward(
            &mut g,
            &pv,
            xv,
            &mut Dropout::On {
                rate: 0.1,
                rng: &mut mrng,
            },
        )
        .unwrap();
    let s = g.sum(d);
    let gx = g.grad(s, &[xv]).unwrap()[0];
    let sq = g.mul(gx, gx);
    let rows = g.sum_rows(sq);
    let rows = g.add_scalar(rows, 1e-12);
    let norm = g.sqrt(rows);
    let dev = g.add_scalar(norm, -1.0);
    let dev2 = g.mul(dev, dev);
    let pen = g.mean(dev2);
    (g, pen, pv)
}

pub fn penalty_gradient_error(act: Activation) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spec = MlpSpec::new(4, &[6, 5], 1, act, Activation::Identity, 0.1);
    let critic = Mlp::new(spec, &mut rng).unwrap();
    let x = random(&mut rng, &[3, 4], -1.0, 1.0);
    let (mut g, pen, pv) = penalty_value(&critic, &critic.params, &x, 9);
    let grads = g.grad(pen, &pv).unwrap();
    let analytic: Vec<f64> = grads.iter().flat_map(|v| g.value(*v).data.clone()).collect();
    let mut numeric = Vec::new();
    for k in 0..critic.params.len() {
        for i in 0..critic.params[k].len() {
            let h = STEP;
            let mut plus = critic.params.clone();
            plus[k].data[i] += h;
            let mut minus = critic.params.clone();
            minus[k].data[i] -= h;
            let (gp, vp, _) = penalty_value(&critic, &plus, &x, 9);
            let (gm, vm, _) = penalty_value(&critic, &minus, &x, 9);
            numeric.push((gp.value(vp).item() - gm.value(vm).item()) / (2.0 * h));
        }
    }
    rel_err(&analytic, &numeric)
}

pub fn conv_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spec = ConvSpec {
        input_len: 15,
        input_channels: 2,
        channels: vec![3, 4],
        kernel: 3,
        stride: 2,
        slope: 0.3,
        outputs: 2,
    };
    let net = ConvNet::new(spec, &mut rng).unwrap();
    let x = random(&mut rng, &[2, 30], -1.0, 1.0);
    let params = net.params.clone();
    let f: Box<Build> = Box::new(move |g, v| {
        let pv = &v[1..];
        net.forward(g, pv, v[0]).unwrap()
    });
    let mut inputs = vec![x];
    inputs.extend(params);
    first_order_error(&inputs, &f, &mut rng)
}
