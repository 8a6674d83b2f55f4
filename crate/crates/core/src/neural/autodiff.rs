//! Tape-based reverse-mode differentiation.
//!
//! Values are computed eagerly when a node is pushed. `Graph::grad` appends
//! the backward computation to the same tape as ordinary nodes, so gradients
//! are themselves differentiable (needed for the gradient penalty).

use std::rc::Rc;

use super::NeuralError;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, NeuralError> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(NeuralError::ShapeMismatch(format!(
                "shape {shape:?} does not hold {} values",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], v: f64) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![v; shape.iter().product()],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix shape");
        Self {
            shape: vec![rows, cols],
            data,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[1..].iter().product()
    }

    pub fn item(&self) -> f64 {
        self.data[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul {
        a: Var,
        b: Var,
        ta: bool,
        tb: bool,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Recip(Var),
    Log(Var),
    Exp(Var),
    Sqrt(Var),
    Tanh(Var),
    Sigmoid(Var),
    Sum(Var),
    /// out[i] = src[index[i]]
    Gather(Var, Rc<[usize]>),
    /// out[index[i]] += src[i]
    ScatterAdd(Var, Rc<[usize]>),
    /// Elementwise product with a constant.
    Mask(Var, Rc<[f64]>),
    Reshape(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn same_shape(a: &Tensor, b: &Tensor, what: &str) {
    assert!(a.shape == b.shape, "{what}: shape {:?} vs {:?}", a.shape, b.shape);
}

/// C = op(A)·op(B) for row-major A, B where op transposes when the flag is set.
pub fn matmul_values(a: &Tensor, b: &Tensor, ta: bool, tb: bool) -> Result<Tensor, NeuralError> {
    if a.shape.len() != 2 || b.shape.len() != 2 {
        return Err(NeuralError::ShapeMismatch("matmul needs 2-D operands".into()));
    }
    let (ar, ac) = (a.shape[0], a.shape[1]);
    let (br, bc) = (b.shape[0], b.shape[1]);
    let (m, k) = if ta { (ac, ar) } else { (ar, ac) };
    let (k2, n) = if tb { (bc, br) } else { (br, bc) };
    if k != k2 {
        return Err(NeuralError::ShapeMismatch(format!(
            "matmul {:?}{} x {:?}{}",
            a.shape,
            if ta { "ᵀ" } else { "" },
            b.shape,
            if tb { "ᵀ" } else { "" }
        )));
    }
    let mut c = vec![0.0; m * n];
    let (rsa, csa) = if ta { (1, ac as isize) } else { (ac as isize, 1) };
    let (rsb, csb) = if tb { (1, bc as isize) } else { (bc as isize, 1) };
    if m > 0 && n > 0 && k > 0 {
        // SAFETY: the pointers cover m×k, k×n and m×n row-major buffers with
        // the strides computed above; `c` does not alias the inputs.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                a.data.as_ptr(),
                rsa,
                csa,
                b.data.as_ptr(),
                rsb,
                csb,
                0.0,
                c.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }
    Ok(Tensor::matrix(m, n, c))
}

fn map(x: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor {
        shape: x.shape.clone(),
        data: x.data.iter().map(|&v| f(v)).collect(),
    }
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor {
        shape: a.shape.clone(),
        data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].value.shape
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value)
    }

    pub fn matmul_t(&mut self, a: Var, b: Var, ta: bool, tb: bool) -> Result<Var, NeuralError> {
        let value = matmul_values(self.value(a), self.value(b), ta, tb)?;
        Ok(self.push(value, Op::MatMul { a, b, ta, tb }))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NeuralError> {
        self.matmul_t(a, b, false, false)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        same_shape(self.value(a), self.value(b), "add");
        let v = zip(self.value(a), self.value(b), |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        same_shape(self.value(a), self.value(b), "sub");
        let v = zip(self.value(a), self.value(b), |x, y| x - y);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        same_shape(self.value(a), self.value(b), "mul");
        let v = zip(self.value(a), self.value(b), |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = map(self.value(a), |x| c * x);
        self.push(v, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let v = map(self.value(a), |x| x + c);
        self.push(v, Op::AddScalar(a))
    }

    pub fn recip(&mut self, a: Var) -> Var {
        let v = map(self.value(a), |x| 1.0 / x);
        self.push(v, Op::Recip(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        let v = map(self.value(a), f64::ln);
        self.push(v, Op::Log(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = map(self.value(a), f64::exp);
        self.push(v, Op::Exp(a))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let v = map(self.value(a), f64::sqrt);
        self.push(v, Op::Sqrt(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = map(self.value(a), f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = map(self.value(a), |x| {
            if x >= 0.0 {
                1.0 / (1.0 + (-x).exp())
            } else {
                let e = x.exp();
                e / (1.0 + e)
            }
        });
        self.push(v, Op::Sigmoid(a))
    }

    /// Sum of all elements, shape [1].
    pub fn sum(&mut self, a: Var) -> Var {
        let v = Tensor::scalar(self.value(a).data.iter().sum());
        self.push(v, Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    pub fn gather(&mut self, src: Var, index: Rc<[usize]>, shape: Vec<usize>) -> Var {
        assert_eq!(shape.iter().product::<usize>(), index.len(), "gather shape");
        let s = &self.value(src).data;
        let data = index.iter().map(|&i| s[i]).collect();
        self.push(Tensor { shape, data }, Op::Gather(src, index))
    }

    pub fn scatter_add(&mut self, src: Var, index: Rc<[usize]>, shape: Vec<usize>) -> Var {
        assert_eq!(self.value(src).len(), index.len(), "scatter index length");
        let mut data = vec![0.0; shape.iter().product()];
        for (&i, &v) in index.iter().zip(&self.value(src).data) {
            data[i] += v;
        }
        self.push(Tensor { shape, data }, Op::ScatterAdd(src, index))
    }

    pub fn mask(&mut self, src: Var, mask: Rc<[f64]>) -> Var {
        assert_eq!(self.value(src).len(), mask.len(), "mask length");
        let s = self.value(src);
        let data = s.data.iter().zip(mask.iter()).map(|(x, m)| x * m).collect();
        let shape = s.shape.clone();
        self.push(Tensor { shape, data }, Op::Mask(src, mask))
    }

    pub fn reshape(&mut self, src: Var, shape: Vec<usize>) -> Var {
        let s = self.value(src);
        assert_eq!(shape.iter().product::<usize>(), s.len(), "reshape size");
        let data = s.data.clone();
        self.push(Tensor { shape, data }, Op::Reshape(src))
    }

    // Composite operations.

    pub fn relu(&mut self, a: Var) -> Var {
        let m: Rc<[f64]> = self
            .value(a)
            .data
            .iter()
            .map(|&x| if x > 0.0 { 1.0 } else { 0.0 })
            .collect();
        self.mask(a, m)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let m: Rc<[f64]> = self
            .value(a)
            .data
            .iter()
            .map(|&x| if x > 0.0 { 1.0 } else { slope })
            .collect();
        self.mask(a, m)
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let m: Rc<[f64]> = self
            .value(a)
            .data
            .iter()
            .map(|&x| if x >= 0.0 { 1.0 } else { -1.0 })
            .collect();
        self.mask(a, m)
    }

    /// log(1 + eˣ) without overflow: max(x, 0) + log(1 + e^{−|x|}).
    pub fn softplus(&mut self, a: Var) -> Var {
        let pos = self.relu(a);
        let abs = self.abs(a);
        let neg = self.scale(abs, -1.0);
        let e = self.exp(neg);
        let e1 = self.add_scalar(e, 1.0);
        let l = self.log(e1);
        self.add(pos, l)
    }

    /// Row-vector bias [1, n] broadcast over the rows of `x` [m, n].
    pub fn add_row(&mut self, x: Var, row: Var) -> Var {
        let (m, n) = (self.value(x).rows(), self.value(x).cols());
        assert_eq!(self.value(row).len(), n, "bias width");
        let index: Rc<[usize]> = (0..m * n).map(|i| i % n).collect();
        let b = self.gather(row, index, vec![m, n]);
        self.add(x, b)
    }

    /// Per-row sums of a [m, n] matrix, shape [m, 1].
    pub fn sum_rows(&mut self, x: Var) -> Var {
        let (m, n) = (self.value(x).rows(), self.value(x).cols());
        let index: Rc<[usize]> = (0..m * n).map(|i| i / n).collect();
        self.scatter_add(x, index, vec![m, 1])
    }

    /// Columns [start, end) of a [m, n] matrix.
    pub fn columns(&mut self, x: Var, start: usize, end: usize) -> Var {
        let (m, n) = (self.value(x).rows(), self.value(x).cols());
        let w = end - start;
        let index: Rc<[usize]> = (0..m * w).map(|i| (i / w) * n + start + i % w).collect();
        self.gather(x, index, vec![m, w])
    }

    /// Horizontal concatenation of two matrices with equal row counts.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let (m, na) = (self.value(a).rows(), self.value(a).cols());
        let (mb, nb) = (self.value(b).rows(), self.value(b).cols());
        assert_eq!(m, mb, "concat rows");
        let n = na + nb;
        let ia: Rc<[usize]> = (0..m * na).map(|i| (i / na) * n + i % na).collect();
        let ib: Rc<[usize]> = (0..m * nb).map(|i| (i / nb) * n + na + i % nb).collect();
        let pa = self.scatter_add(a, ia, vec![m, n]);
        let pb = self.scatter_add(b, ib, vec![m, n]);
        self.add(pa, pb)
    }

    fn ones_like(&mut self, v: Var) -> Var {
        let shape = self.value(v).shape.clone();
        self.constant(Tensor::filled(&shape, 1.0))
    }

    fn accumulate(&mut self, grads: &mut [Option<Var>], at: Var, g: Var) {
        grads[at.0] = Some(match grads[at.0] {
            Some(prev) => self.add(prev, g),
            None => g,
        });
    }

    /// Gradients of the scalar `out` with respect to `wrt`, as new graph nodes.
    pub fn grad(&mut self, out: Var, wrt: &[Var]) -> Result<Vec<Var>, NeuralError> {
        if self.value(out).len() != 1 {
            return Err(NeuralError::ShapeMismatch(format!(
                "gradient of non-scalar output with shape {:?}",
                self.value(out).shape
            )));
        }
        let n = out.0 + 1;
        let mut needs = vec![false; n];
        for w in wrt {
            if w.0 < n {
                needs[w.0] = true;
            }
        }
        for i in 0..n {
            if needs[i] {
                continue;
            }
            needs[i] = match &self.nodes[i].op {
                Op::Leaf => false,
                Op::MatMul { a, b, .. } | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => needs[a.0] || needs[b.0],
                Op::Scale(a, _)
                | Op::AddScalar(a)
                | Op::Recip(a)
                | Op::Log(a)
                | Op::Exp(a)
                | Op::Sqrt(a)
                | Op::Tanh(a)
                | Op::Sigmoid(a)
                | Op::Sum(a)
                | Op::Gather(a, _)
                | Op::ScatterAdd(a, _)
                | Op::Mask(a, _)
                | Op::Reshape(a) => needs[a.0],
            };
        }
        let mut grads: Vec<Option<Var>> = vec![None; n];
        grads[out.0] = Some(self.ones_like(out));
        for i in (0..n).rev() {
            let Some(g) = grads[i] else { continue };
            if !needs[i] {
                continue;
            }
            let y = Var(i);
            let op = self.nodes[i].op.clone();
            match op {
                Op::Leaf => {}
                Op::MatMul { a, b, ta, tb } => {
                    if needs[a.0] {
                        let ga = if ta {
                            self.matmul_t(b, g, tb, true)?
                        } else {
                            self.matmul_t(g, b, false, !tb)?
                        };
                        self.accumulate(&mut grads, a, ga);
                    }
                    if needs[b.0] {
                        let gb = if tb {
                            self.matmul_t(g, a, true, ta)?
                        } else {
                            self.matmul_t(a, g, !ta, false)?
                        };
                        self.accumulate(&mut grads, b, gb);
                    }
                }
                Op::Add(a, b) => {
                    if needs[a.0] {
                        self.accumulate(&mut grads, a, g);
                    }
                    if needs[b.0] {
                        self.accumulate(&mut grads, b, g);
                    }
                }
                Op::Sub(a, b) => {
                    if needs[a.0] {
                        self.accumulate(&mut grads, a, g);
                    }
                    if needs[b.0] {
                        let gb = self.scale(g, -1.0);
                        self.accumulate(&mut grads, b, gb);
                    }
                }
                Op::Mul(a, b) => {
                    if needs[a.0] {
                        let ga = self.mul(g, b);
                        self.accumulate(&mut grads, a, ga);
                    }
                    if needs[b.0] {
                        let gb = self.mul(g, a);
                        self.accumulate(&mut grads, b, gb);
                    }
                }
                Op::Scale(a, c) => {
                    let ga = self.scale(g, c);
                    self.accumulate(&mut grads, a, ga);
                }
                Op::AddScalar(a) => self.accumulate(&mut grads, a, g),
                Op::Recip(a) => {
                    let yy = self.mul(y, y);
                    let t = self.mul(g, yy);
                    let ga = self.scale(t, -1.0);
                    self.accumulate(&mut grads, a, ga);
                }
                Op::Log(a) => {
                    let r = self.recip(a);
                    let ga = self.mul(g, r);
                    self.accumulate(&mut grads, a, ga);
                }
                Op::Exp(a) => {
                    let ga = self.mul(g, y);
                    self.accumulate(&mut grads, a, ga);
                }
                Op::Sqrt(a) => {
                    let r = self.recip(y);
                    let h = self.scale(r, 0.5);
                    let ga = self.mul(g, h);
                    self.accumulate(&mut grads, a, ga);
                }
                Op::Tanh(a) => {
                    let yy = self.mul(y, y);
                    let neg = self.scale(yy, -1.0);
                    let d = self.add_scalar(neg, 1.0);
                    let ga = self.mul(g, d);
                    self.accumulate(&mut grads, a, ga);
                }
                Op::Sigmoid(a) => {
                    let neg = self.scale(y, -1.0);
                    let one_minus = self.add_scalar(neg, 1.0);
                    let d = self.mul(y, one_minus);
                    let ga = self.mul(g, d);
                    self.accumulate(&mut grads, a, ga);
                }
                Op::Sum(a) => {
                    let shape = self.value(a).shape.clone();
                    let index: Rc<[usize]> = vec![0; shape.iter().product()].into();
                    let ga = self.gather(g, index, shape);
                    self.accumulate(&mut grads, a, ga);
                }
                Op::Gather(a, index) => {
                    let shape = self.value(a).shape.clone();
                    let ga = self.scatter_add(g, index, shape);
                    self.accumulate(&mut grads, a, ga);
                }
                Op::ScatterAdd(a, index) => {
                    let shape = self.value(a).shape.clone();
                    let ga = self.gather(g, index, shape);
                    self.accumulate(&mut grads, a, ga);
                }
                Op::Mask(a, m) => {
                    let ga = self.mask(g, m);
                    self.accumulate(&mut grads, a, ga);
                }
                Op::Reshape(a) => {
                    let shape = self.value(a).shape.clone();
                    let ga = self.reshape(g, shape);
                    self.accumulate(&mut grads, a, ga);
                }
            }
        }
        Ok(wrt
            .iter()
            .map(|w| match grads.get(w.0).copied().flatten() {
                Some(g) => g,
                None => {
                    let shape = self.value(*w).shape.clone();
                    self.constant(Tensor::zeros(&shape))
                }
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_three() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(3.0));
        let y = g.mul(x, x);
        let dx = g.grad(y, &[x]).unwrap()[0];
        assert_eq!(g.value(dx).item(), 6.0);
        // second derivative through the tape
        let d2 = g.grad(dx, &[x]).unwrap()[0];
        assert_eq!(g.value(d2).item(), 2.0);
    }

    #[test]
    fn matmul_transposes() {
        let a = Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = Tensor::matrix(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = matmul_values(&a, &b, false, false).unwrap();
        assert_eq!(c.data, vec![58.0, 64.0, 139.0, 154.0]);
        let at = Tensor::matrix(3, 2, vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        let bt = Tensor::matrix(2, 3, vec![7.0, 9.0, 11.0, 8.0, 10.0, 12.0]);
        assert_eq!(matmul_values(&at, &bt, true, true).unwrap(), c);
        assert!(matmul_values(&a, &a, false, false).is_err());
    }

    #[test]
    fn unused_input_gets_zero_gradient() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(1.0));
        let z = g.leaf(Tensor::matrix(1, 2, vec![1.0, 2.0]));
        let y = g.scale(x, 2.0);
        let grads = g.grad(y, &[x, z]).unwrap();
        assert_eq!(g.value(grads[1]).data, vec![0.0, 0.0]);
    }

    #[test]
    fn non_scalar_output_is_rejected() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::matrix(1, 2, vec![1.0, 2.0]));
        assert!(matches!(g.grad(x, &[x]), Err(NeuralError::ShapeMismatch(_))));
    }
}
