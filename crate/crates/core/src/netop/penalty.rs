//! Per-sample objective `‖y − t‖² + c + λ Σ w_ij (Lᵀ J R − T)_ij²` and its
//! exact weight gradient, where `J = ∂y/∂z` is the network Jacobian.
//!
//! The Jacobian term is differentiated by double backpropagation: a forward
//! tangent sweep builds `M_l = D_l W_l M_{l−1}` from `M_0 = R`, a reverse
//! sweep over the tangents yields the weight gradient together with the
//! sensitivities `g_l` of the activation slopes `D_l`, and those enter the
//! ordinary backward pass through `σ''(s_l) ⊙ g_l`.

use alloc::borrow::Cow;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::mlp::{forward_tape, MlpSpec, NetworkWeights};
use crate::linalg::Matrix;
use crate::{Error, Result};

/// Target of the value term, in network output coordinates, plus a constant
/// added to the loss (e.g. the part of `q` outside a reduced output basis).
#[derive(Clone, Debug)]
pub struct ValueTarget<'a> {
    pub target: Cow<'a, [f64]>,
    pub offset: f64,
}

/// `Σ w_ij (Lᵀ J R − T)_ij²`, with `L` (`n_out × p`) and `R` (`n_in × s`)
/// defaulting to identities.
#[derive(Clone, Debug)]
pub struct JacobianPenalty<'a> {
    pub left: Option<Cow<'a, Matrix>>,
    pub right: Option<Cow<'a, Matrix>>,
    pub target: Cow<'a, Matrix>,
    pub weights: Option<Matrix>,
}

/// Everything needed to evaluate one sample's contribution to the loss.
#[derive(Clone, Debug)]
pub struct SampleObjective<'a> {
    /// Network input (already encoded for reduced-basis models).
    pub input: Cow<'a, [f64]>,
    pub value: Option<ValueTarget<'a>>,
    pub penalty: Option<JacobianPenalty<'a>>,
}

/// One sample's loss terms and weight gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleGrad {
    /// `value + h1_weight · penalty`.
    pub loss: f64,
    pub value: f64,
    pub penalty: f64,
    pub grad: Vec<f64>,
    /// Multiply-adds spent on the Jacobian penalty and its gradient.
    pub penalty_flops: u64,
}

struct Flops(u64);

impl Flops {
    fn mm(&mut self, a: &Matrix, b: &Matrix) -> Matrix {
        self.0 += (a.rows() * a.cols() * b.cols()) as u64;
        a.matmul(b)
    }
    fn tm(&mut self, a: &Matrix, b: &Matrix) -> Matrix {
        self.0 += (a.rows() * a.cols() * b.cols()) as u64;
        a.tr_matmul(b)
    }
    fn mt(&mut self, a: &Matrix, b: &Matrix) -> Matrix {
        self.0 += (a.rows() * a.cols() * b.rows()) as u64;
        a.matmul_tr(b)
    }
    fn scale_rows(&mut self, a: &Matrix, d: &[f64]) -> Matrix {
        self.0 += (a.rows() * a.cols()) as u64;
        let mut out = a.clone();
        for (i, &di) in d.iter().enumerate() {
            out.row_mut(i).iter_mut().for_each(|x| *x *= di);
        }
        out
    }
    fn row_inner(&mut self, a: &Matrix, b: &Matrix) -> Vec<f64> {
        self.0 += (a.rows() * a.cols()) as u64;
        (0..a.rows()).map(|i| a.row(i).iter().zip(b.row(i)).map(|(x, y)| x * y).sum()).collect()
    }
}

impl JacobianPenalty<'_> {
    fn check(&self, spec: &MlpSpec) -> Result<()> {
        let (n_in, n_out) = (spec.input_width(), spec.output_width());
        let p = match &self.left {
            Some(l) if l.rows() != n_out => {
                return Err(Error::invalid(format!("left factor has {} rows, network output is {n_out}", l.rows())))
            }
            Some(l) => l.cols(),
            None => n_out,
        };
        let s = match &self.right {
            Some(r) if r.rows() != n_in => {
                return Err(Error::invalid(format!("right factor has {} rows, network input is {n_in}", r.rows())))
            }
            Some(r) => r.cols(),
            None => n_in,
        };
        if self.target.shape() != (p, s) {
            return Err(Error::invalid(format!("penalty target is {:?}, expected ({p}, {s})", self.target.shape())));
        }
        if let Some(w) = &self.weights {
            if w.shape() != (p, s) {
                return Err(Error::invalid("penalty weights do not match the target shape"));
            }
        }
        Ok(())
    }
}

/// Loss and weight gradient of one sample.
pub fn sample_objective_grad(
    spec: &MlpSpec,
    w: &NetworkWeights,
    obj: &SampleObjective<'_>,
    h1_weight: f64,
) -> Result<SampleGrad> {
    if obj.input.len() != spec.input_width() {
        return Err(Error::invalid(format!(
            "network input has length {}, expected {}",
            obj.input.len(),
            spec.input_width()
        )));
    }
    let layers = spec.layers();
    let tape = forward_tape(spec, w, &obj.input);
    let mut grad = vec![0.0; w.len()];

    let mut value = 0.0;
    let mut da = vec![0.0; spec.output_width()];
    if let Some(v) = &obj.value {
        if v.target.len() != spec.output_width() {
            return Err(Error::invalid("value target does not match the network output width"));
        }
        for ((d, y), t) in da.iter_mut().zip(tape.output()).zip(v.target.iter()) {
            let e = y - t;
            value += e * e;
            *d = 2.0 * e;
        }
        value += v.offset;
    }

    let mut slope_sens: Vec<Vec<f64>> = Vec::new();
    let mut penalty = 0.0;
    let mut flops = Flops(0);
    if let Some(pen) = &obj.penalty {
        pen.check(spec)?;
        let (p, g) = penalty_backward(spec, w, &tape.pre, pen, h1_weight, &mut grad, &mut flops);
        penalty = p;
        slope_sens = g;
    }

    for l in (0..layers).rev() {
        let act = spec.activations[l];
        let (o, i) = w.shape(l);
        let delta: Vec<f64> = (0..o)
            .map(|r| {
                let s = tape.pre[l][r];
                let mut d = act.derivative(s) * da[r];
                if let Some(g) = slope_sens.get(l) {
                    d += h1_weight * act.second_derivative(s) * g[r];
                }
                d
            })
            .collect();
        let off = w.offset(l);
        let a_prev = &tape.post[l];
        for r in 0..o {
            let row = &mut grad[off + r * i..off + (r + 1) * i];
            row.iter_mut().zip(a_prev).for_each(|(gw, a)| *gw += delta[r] * a);
            grad[off + o * i + r] += delta[r];
        }
        if l > 0 {
            let wl = w.weight(l);
            let mut next = vec![0.0; i];
            for r in 0..o {
                next.iter_mut().zip(&wl[r * i..(r + 1) * i]).for_each(|(n, x)| *n += x * delta[r]);
            }
            da = next;
        }
    }

    Ok(SampleGrad { loss: value + h1_weight * penalty, value, penalty, grad, penalty_flops: flops.0 })
}

/// Value of the Jacobian penalty alone at input `z`.
pub fn penalty_value(spec: &MlpSpec, w: &NetworkWeights, z: &[f64], pen: &JacobianPenalty<'_>) -> Result<f64> {
    let obj = SampleObjective { input: Cow::Borrowed(z), value: None, penalty: Some(pen.clone()) };
    Ok(sample_objective_grad(spec, w, &obj, 0.0)?.penalty)
}

/// Computes the penalty, adds `h1_weight · ∂penalty/∂W` into `grad` and
/// returns the per-layer sensitivities `∂penalty/∂D_l` (unscaled).
fn penalty_backward(
    spec: &MlpSpec,
    w: &NetworkWeights,
    pre: &[Vec<f64>],
    pen: &JacobianPenalty<'_>,
    h1_weight: f64,
    grad: &mut [f64],
    fl: &mut Flops,
) -> (f64, Vec<Vec<f64>>) {
    let layers = spec.layers();
    let slopes: Vec<Vec<f64>> = (0..layers)
        .map(|l| pre[l].iter().map(|&s| spec.activations[l].derivative(s)).collect())
        .collect();
    let weights: Vec<Matrix> = (0..layers).map(|l| w.weight_matrix(l)).collect();

    // Forward tangents. `inputs[l]` is the tangent entering layer l (None = identity).
    let mut inputs: Vec<Option<Matrix>> = Vec::with_capacity(layers);
    let mut pre_tangents: Vec<Matrix> = Vec::with_capacity(layers);
    inputs.push(pen.right.as_deref().cloned());
    for l in 0..layers - 1 {
        let n = match &inputs[l] {
            None => weights[l].clone(),
            Some(m) => fl.mm(&weights[l], m),
        };
        let m = fl.scale_rows(&n, &slopes[l]);
        pre_tangents.push(n);
        inputs.push(Some(m));
    }

    let last = layers - 1;
    let w_last = &weights[last];
    let m_last = &inputs[last];
    let folded = pen.left.as_deref().map(|l| {
        let dl = fl.scale_rows(l, &slopes[last]);
        fl.tm(&dl, w_last)
    });
    let mut last_pre_tangent = None;
    let p = match &folded {
        Some(k) => match m_last {
            None => k.clone(),
            Some(m) => fl.mm(k, m),
        },
        None => {
            let n = match m_last {
                None => w_last.clone(),
                Some(m) => fl.mm(w_last, m),
            };
            let p = fl.scale_rows(&n, &slopes[last]);
            last_pre_tangent = Some(n);
            p
        }
    };

    let err = p.sub(&pen.target);
    let (value, g_p) = match &pen.weights {
        None => (err.frobenius_sq(), err.scaled(2.0)),
        Some(wt) => {
            let ge = Matrix::from_fn(err.rows(), err.cols(), |i, j| 2.0 * wt[(i, j)] * err[(i, j)]);
            (err.inner(&ge) * 0.5, ge)
        }
    };
    fl.0 += (err.rows() * err.cols()) as u64;

    let mut sens: Vec<Vec<f64>> = vec![Vec::new(); layers];
    let add_weight_grad = |l: usize, gw: &Matrix, grad: &mut [f64]| {
        let off = w.offset(l);
        grad[off..off + gw.rows() * gw.cols()]
            .iter_mut()
            .zip(gw.as_slice())
            .for_each(|(g, x)| *g += h1_weight * x);
    };

    // Reverse sweep over the last layer.
    let mut g_m = match (&folded, pen.left.as_deref()) {
        (Some(k), Some(l)) => {
            let c = match m_last {
                None => g_p.clone(),
                Some(m) => fl.mt(&g_p, m),
            };
            let f = fl.mm(l, &c);
            sens[last] = fl.row_inner(&f, w_last);
            add_weight_grad(last, &fl.scale_rows(&f, &slopes[last]), grad);
            if last > 0 {
                Some(fl.tm(k, &g_p))
            } else {
                None
            }
        }
        _ => {
            let n = last_pre_tangent.as_ref().unwrap();
            sens[last] = fl.row_inner(&g_p, n);
            let g_n = fl.scale_rows(&g_p, &slopes[last]);
            let gw = match m_last {
                None => g_n.clone(),
                Some(m) => fl.mt(&g_n, m),
            };
            add_weight_grad(last, &gw, grad);
            if last > 0 {
                Some(fl.tm(w_last, &g_n))
            } else {
                None
            }
        }
    };

    for l in (0..last).rev() {
        let gm = g_m.take().unwrap();
        sens[l] = fl.row_inner(&gm, &pre_tangents[l]);
        let g_n = fl.scale_rows(&gm, &slopes[l]);
        let gw = match &inputs[l] {
            None => g_n.clone(),
            Some(m) => fl.mt(&g_n, m),
        };
        add_weight_grad(l, &gw, grad);
        if l > 0 {
            g_m = Some(fl.tm(&weights[l], &g_n));
        }
    }
    (value, sens)
}
