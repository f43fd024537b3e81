//! Single-layer LSTM with a linear head, forward pass and BPTT.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ForecastError;

/// Flat parameter vector laid out as `[W | b | head_w | head_b]`, where `W`
/// is `4u x (N+u)` row-major with gate blocks in the order input, forget,
/// candidate, output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub n_features: usize,
    pub units: usize,
    pub theta: Vec<f64>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `C = A B + beta C` for strided row-major views given as
/// `(data, row_stride, col_stride)`; `A` is `m x k`, `B` is `k x n`.
fn gemm(m: usize, k: usize, n: usize, a: (&[f64], usize, usize), b: (&[f64], usize, usize), beta: f64, c: (&mut [f64], usize, usize)) {
    let last = |rows: usize, cols: usize, rs: usize, cs: usize| (rows - 1) * rs + (cols - 1) * cs;
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    assert!(a.0.len() > last(m, k, a.1, a.2) && b.0.len() > last(k, n, b.1, b.2) && c.0.len() > last(m, n, c.1, c.2));
    // SAFETY: the assertion keeps every strided access in bounds, and `c`
    // is a unique borrow so it cannot alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.0.as_ptr(),
            a.1 as isize,
            a.2 as isize,
            b.0.as_ptr(),
            b.1 as isize,
            b.2 as isize,
            beta,
            c.0.as_mut_ptr(),
            c.1 as isize,
            c.2 as isize,
        );
    }
}

impl LstmParams {
    pub fn len_for(n_features: usize, units: usize) -> usize {
        4 * units * (n_features + units) + 4 * units + units + 1
    }

    pub fn zeros(n_features: usize, units: usize) -> Self {
        Self { n_features, units, theta: vec![0.0; Self::len_for(n_features, units)] }
    }

    /// Glorot-uniform kernels, forget-gate bias 1, zero elsewhere.
    pub fn init<R: Rng>(n_features: usize, units: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(n_features, units);
        let (n, u) = (n_features, units);
        let in_lim = (6.0 / (n + 4 * u) as f64).sqrt();
        let rec_lim = (6.0 / (u + 4 * u) as f64).sqrt();
        let head_lim = (6.0 / (u + 1) as f64).sqrt();
        let stride = n + u;
        for r in 0..4 * u {
            for c in 0..stride {
                let lim = if c < n { in_lim } else { rec_lim };
                p.theta[r * stride + c] = rng.gen_range(-lim..lim);
            }
        }
        let b0 = 4 * u * stride;
        for i in 0..u {
            p.theta[b0 + u + i] = 1.0;
        }
        let h0 = b0 + 4 * u;
        for i in 0..u {
            p.theta[h0 + i] = rng.gen_range(-head_lim..head_lim);
        }
        p
    }

    fn stride(&self) -> usize {
        self.n_features + self.units
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let w = 4 * self.units * self.stride();
        (w, w + 4 * self.units, w + 5 * self.units)
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|v| v.is_finite())
    }

    fn check(&self, window: &[f64], lookback: usize) -> Result<(), ForecastError> {
        if self.theta.len() != Self::len_for(self.n_features, self.units) {
            return Err(ForecastError::Shape(format!(
                "parameter vector has {} entries, expected {}",
                self.theta.len(),
                Self::len_for(self.n_features, self.units)
            )));
        }
        if lookback == 0 || window.len() != lookback * self.n_features {
            return Err(ForecastError::Shape(format!("window has {} values, expected {} x {}", window.len(), lookback, self.n_features)));
        }
        Ok(())
    }

    /// Deterministic prediction with dropout off. `window` is `L x N`
    /// row-major, oldest step first.
    pub fn predict(&self, window: &[f64], lookback: usize) -> Result<f64, ForecastError> {
        self.check(window, lookback)?;
        let mut ws = Workspace::new(self.n_features, self.units, lookback);
        Ok(self.forward(window, lookback, None, &mut ws))
    }

    pub(crate) fn forward(&self, window: &[f64], lookback: usize, mask: Option<&[f64]>, ws: &mut Workspace) -> f64 {
        let mut out = Vec::with_capacity(1);
        self.forward_batch(&[window], lookback, mask, ws, &mut out);
        out[0]
    }

    /// Output and its gradient with respect to `theta`, dropout off.
    pub fn output_gradient(&self, window: &[f64], lookback: usize) -> Result<(f64, Vec<f64>), ForecastError> {
        self.check(window, lookback)?;
        let mut ws = Workspace::new(self.n_features, self.units, lookback);
        let out = self.forward(window, lookback, None, &mut ws);
        let mut grad = vec![0.0; self.theta.len()];
        self.backward_batch(lookback, None, &[1.0], &mut ws, &mut grad);
        Ok((out, grad))
    }

    /// Forward pass over a batch of `L x N` windows. `masks` holds one
    /// dropout multiplier per unit and sample (`B x u`).
    pub(crate) fn forward_batch(&self, windows: &[&[f64]], lookback: usize, masks: Option<&[f64]>, ws: &mut Workspace, out: &mut Vec<f64>) {
        let (n, u) = (self.n_features, self.units);
        let (stride, g4) = (n + u, 4 * u);
        let bsz = windows.len();
        let (b_off, hw_off, hb_off) = self.offsets();
        let w = &self.theta[..b_off];
        let bias = &self.theta[b_off..hw_off];
        ws.ensure(n, u, lookback, bsz);
        ws.batch = bsz;
        for s in 0..lookback {
            let (prev, cur) = ws.steps.split_at_mut(s);
            let st = &mut cur[0];
            let prev = prev.last();
            for (b, win) in windows.iter().enumerate() {
                let v = &mut st.v[b * stride..(b + 1) * stride];
                v[..n].copy_from_slice(&win[s * n..(s + 1) * n]);
                match prev {
                    Some(p) => v[n..].copy_from_slice(&p.h[b * u..(b + 1) * u]),
                    None => v[n..].fill(0.0),
                }
            }
            // Z = V W^T, then the bias
            gemm(bsz, stride, g4, (&st.v, stride, 1), (w, 1, stride), 0.0, (&mut st.z, g4, 1));
            for z in st.z[..bsz * g4].chunks_mut(g4) {
                z.iter_mut().zip(bias).for_each(|(z, b)| *z += b);
            }
            for b in 0..bsz {
                let z = &st.z[b * g4..(b + 1) * g4];
                for k in 0..u {
                    let i = sigmoid(z[k]);
                    let f = sigmoid(z[u + k]);
                    let g = z[2 * u + k].tanh();
                    let o = sigmoid(z[3 * u + k]);
                    let c_prev = prev.map_or(0.0, |p| p.c[b * u + k]);
                    let c = f * c_prev + i * g;
                    let tc = c.tanh();
                    let gates = &mut st.gates[b * g4..(b + 1) * g4];
                    gates[k] = i;
                    gates[u + k] = f;
                    gates[2 * u + k] = g;
                    gates[3 * u + k] = o;
                    st.c[b * u + k] = c;
                    st.tc[b * u + k] = tc;
                    st.h[b * u + k] = o * tc;
                }
            }
        }
        let h_last = &ws.steps[lookback - 1].h;
        let head = &self.theta[hw_off..hb_off];
        out.clear();
        for b in 0..bsz {
            let mut y = self.theta[hb_off];
            for k in 0..u {
                let m = masks.map_or(1.0, |m| m[b * u + k]);
                y += head[k] * h_last[b * u + k] * m;
            }
            out.push(y);
        }
    }

    /// Accumulates `sum_b d_out[b] * d(prediction_b)/d(theta)` into `grad`
    /// for the batch cached by the last `forward_batch`.
    pub(crate) fn backward_batch(&self, lookback: usize, masks: Option<&[f64]>, d_out: &[f64], ws: &mut Workspace, grad: &mut [f64]) {
        let (n, u) = (self.n_features, self.units);
        let (stride, g4) = (n + u, 4 * u);
        let bsz = ws.batch;
        let (b_off, hw_off, hb_off) = self.offsets();
        let w = &self.theta[..b_off];
        {
            let h_last = &ws.steps[lookback - 1].h;
            for b in 0..bsz {
                for k in 0..u {
                    let m = masks.map_or(1.0, |m| m[b * u + k]);
                    grad[hw_off + k] += d_out[b] * h_last[b * u + k] * m;
                    ws.dh[b * u + k] = d_out[b] * self.theta[hw_off + k] * m;
                }
                grad[hb_off] += d_out[b];
            }
        }
        ws.dc[..bsz * u].fill(0.0);
        for s in (0..lookback).rev() {
            let st = &ws.steps[s];
            for b in 0..bsz {
                let gates = &st.gates[b * g4..(b + 1) * g4];
                let dz = &mut ws.dz[b * g4..(b + 1) * g4];
                for k in 0..u {
                    let (i, f, g, o) = (gates[k], gates[u + k], gates[2 * u + k], gates[3 * u + k]);
                    let tc = st.tc[b * u + k];
                    let dh = ws.dh[b * u + k];
                    let dc = ws.dc[b * u + k] + dh * o * (1.0 - tc * tc);
                    let c_prev = if s > 0 { ws.steps[s - 1].c[b * u + k] } else { 0.0 };
                    dz[k] = dc * g * i * (1.0 - i);
                    dz[u + k] = dc * c_prev * f * (1.0 - f);
                    dz[2 * u + k] = dc * i * (1.0 - g * g);
                    dz[3 * u + k] = dh * tc * o * (1.0 - o);
                    ws.dc[b * u + k] = dc * f;
                }
            }
            // dW += dZ^T V and dV = dZ W
            gemm(g4, bsz, stride, (&ws.dz, 1, g4), (&st.v, stride, 1), 1.0, (&mut grad[..b_off], stride, 1));
            gemm(bsz, g4, stride, (&ws.dz, g4, 1), (w, stride, 1), 0.0, (&mut ws.dv, stride, 1));
            for dz in ws.dz[..bsz * g4].chunks(g4) {
                grad[b_off..hw_off].iter_mut().zip(dz).for_each(|(g, d)| *g += d);
            }
            for b in 0..bsz {
                let (dh, dv) = (&mut ws.dh[b * u..(b + 1) * u], &ws.dv[b * stride + n..(b + 1) * stride]);
                dh.copy_from_slice(dv);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Step {
    v: Vec<f64>,
    z: Vec<f64>,
    gates: Vec<f64>,
    c: Vec<f64>,
    tc: Vec<f64>,
    h: Vec<f64>,
}

/// Forward caches and backward scratch for batches of up to `cap` samples.
#[derive(Debug, Clone)]
pub(crate) struct Workspace {
    n: usize,
    u: usize,
    cap: usize,
    batch: usize,
    steps: Vec<Step>,
    dh: Vec<f64>,
    dc: Vec<f64>,
    dz: Vec<f64>,
    dv: Vec<f64>,
}

impl Workspace {
    pub(crate) fn new(n: usize, u: usize, lookback: usize) -> Self {
        let mut ws = Self { n, u, cap: 0, batch: 0, steps: Vec::new(), dh: vec![], dc: vec![], dz: vec![], dv: vec![] };
        ws.ensure(n, u, lookback, 1);
        ws
    }

    fn ensure(&mut self, n: usize, u: usize, lookback: usize, batch: usize) {
        if self.n != n || self.u != u || batch > self.cap {
            let cap = batch.max(self.cap).max(1);
            *self = Self {
                n,
                u,
                cap,
                batch: 0,
                steps: Vec::new(),
                dh: vec![0.0; cap * u],
                dc: vec![0.0; cap * u],
                dz: vec![0.0; cap * 4 * u],
                dv: vec![0.0; cap * (n + u)],
            };
        }
        let cap = self.cap;
        while self.steps.len() < lookback {
            self.steps.push(Step {
                v: vec![0.0; cap * (n + u)],
                z: vec![0.0; cap * 4 * u],
                gates: vec![0.0; cap * 4 * u],
                c: vec![0.0; cap * u],
                tc: vec![0.0; cap * u],
                h: vec![0.0; cap * u],
            });
        }
    }
}
