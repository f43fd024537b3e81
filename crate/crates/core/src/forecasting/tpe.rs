//! Tree-structured Parzen estimator over independent dimensions.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::ForecastError;
use crate::dist::normal_cdf;
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Dim {
    /// Real interval; with `log` the density is modelled on `ln x`.
    Continuous { low: f64, high: f64, log: bool },
    /// Choice among `n` options, represented by its index.
    Categorical { n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TpeConfig {
    pub trials: usize,
    pub startup: usize,
    pub gamma: f64,
    pub candidates: usize,
}

impl Default for TpeConfig {
    fn default() -> Self {
        Self { trials: 75, startup: 15, gamma: 0.25, candidates: 24 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Trial {
    /// One value per dimension; categorical entries hold the index.
    pub point: Vec<f64>,
    /// `None` when the objective failed.
    pub loss: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TpeOutcome {
    pub best: usize,
    pub best_loss: f64,
    pub trials: Vec<Trial>,
}

impl TpeOutcome {
    pub fn best_point(&self) -> &[f64] {
        &self.trials[self.best].point
    }
}

fn to_internal(d: &Dim, v: f64) -> f64 {
    match d {
        Dim::Continuous { log: true, .. } => v.ln(),
        _ => v,
    }
}

fn bounds(d: &Dim) -> (f64, f64) {
    match *d {
        Dim::Continuous { low, high, log } => {
            if log {
                (low.ln(), high.ln())
            } else {
                (low, high)
            }
        }
        Dim::Categorical { n } => (0.0, n as f64),
    }
}

fn sample_prior(d: &Dim, rng: &mut ChaCha8Rng) -> f64 {
    match *d {
        Dim::Continuous { log, .. } => {
            let (lo, hi) = bounds(d);
            let z = rng.gen_range(lo..=hi);
            if log {
                z.exp()
            } else {
                z
            }
        }
        Dim::Categorical { n } => rng.gen_range(0..n) as f64,
    }
}

/// Truncated-Gaussian mixture with one component per observation plus a
/// wide prior component.
#[derive(Debug)]
struct Parzen {
    mus: Vec<f64>,
    sigmas: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl Parzen {
    fn new(obs: &[f64], lo: f64, hi: f64) -> Self {
        let range = hi - lo;
        let mut mus: Vec<f64> = obs.to_vec();
        mus.push(0.5 * (lo + hi));
        let mut idx: Vec<usize> = (0..mus.len()).collect();
        idx.sort_by(|&a, &b| mus[a].total_cmp(&mus[b]));
        let min_sigma = range / (100.0f64).min(1.0 + mus.len() as f64);
        let mut sigmas = vec![range; mus.len()];
        for (rank, &i) in idx.iter().enumerate() {
            let left = if rank > 0 { mus[i] - mus[idx[rank - 1]] } else { mus[i] - lo };
            let right = if rank + 1 < idx.len() { mus[idx[rank + 1]] - mus[i] } else { hi - mus[i] };
            sigmas[i] = left.max(right).clamp(min_sigma, range);
        }
        let prior = mus.len() - 1;
        sigmas[prior] = range;
        Self { mus, sigmas, lo, hi }
    }

    fn log_pdf(&self, x: f64) -> f64 {
        let mut p = 0.0;
        for (&m, &s) in self.mus.iter().zip(&self.sigmas) {
            let mass = normal_cdf((self.hi - m) / s) - normal_cdf((self.lo - m) / s);
            let z = (x - m) / s;
            p += (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt() * mass.max(1e-300));
        }
        (p / self.mus.len() as f64).max(1e-300).ln()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let c = rng.gen_range(0..self.mus.len());
        for _ in 0..100 {
            let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng);
            let x = self.mus[c] + self.sigmas[c] * z;
            if x >= self.lo && x <= self.hi {
                return x;
            }
        }
        rng.gen_range(self.lo..=self.hi)
    }
}

fn categorical_weights(obs: &[f64], n: usize) -> Vec<f64> {
    let mut w = vec![1.0; n];
    for &o in obs {
        w[o as usize] += 1.0;
    }
    let total: f64 = w.iter().sum();
    w.iter().map(|v| v / total).collect()
}

fn sample_categorical(w: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let r: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in w.iter().enumerate() {
        acc += p;
        if r < acc {
            return i;
        }
    }
    w.len() - 1
}

fn propose(space: &[Dim], trials: &[Trial], cfg: &TpeConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut done: Vec<(&Trial, f64)> = trials.iter().filter_map(|t| t.loss.map(|l| (t, l))).collect();
    if done.len() < 2 {
        return space.iter().map(|d| sample_prior(d, rng)).collect();
    }
    done.sort_by(|a, b| a.1.total_cmp(&b.1));
    let n_good = ((cfg.gamma * done.len() as f64).ceil() as usize).clamp(1, done.len() - 1);
    let (good, bad) = done.split_at(n_good);

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut cands: Vec<Vec<f64>> = vec![Vec::with_capacity(space.len()); cfg.candidates.max(1)];
    let mut score = vec![0.0; cands.len()];
    for (j, d) in space.iter().enumerate() {
        let g_obs: Vec<f64> = good.iter().map(|(t, _)| to_internal(d, t.point[j])).collect();
        let b_obs: Vec<f64> = bad.iter().map(|(t, _)| to_internal(d, t.point[j])).collect();
        match *d {
            Dim::Continuous { log, .. } => {
                let (lo, hi) = bounds(d);
                let (l, g) = (Parzen::new(&g_obs, lo, hi), Parzen::new(&b_obs, lo, hi));
                for (c, s) in cands.iter_mut().zip(score.iter_mut()) {
                    let x = l.sample(rng);
                    *s += l.log_pdf(x) - g.log_pdf(x);
                    c.push(if log { x.exp() } else { x });
                }
            }
            Dim::Categorical { n } => {
                let (l, g) = (categorical_weights(&g_obs, n), categorical_weights(&b_obs, n));
                for (c, s) in cands.iter_mut().zip(score.iter_mut()) {
                    let k = sample_categorical(&l, rng);
                    *s += l[k].ln() - g[k].ln();
                    c.push(k as f64);
                }
            }
        }
    }
    for (c, s) in cands.into_iter().zip(score) {
        if best.as_ref().is_none_or(|(b, _)| s > *b) {
            best = Some((s, c));
        }
    }
    best.expect("at least one candidate").1
}

/// Minimises `objective` over `space`. The first `startup` trials sample
/// the prior; later trials pick the best of `candidates` draws from the
/// good-trial density by good/bad density ratio.
pub fn tpe_search<F>(space: &[Dim], mut objective: F, cfg: &TpeConfig, seed: u64) -> Result<TpeOutcome, ForecastError>
where
    F: FnMut(usize, &[f64]) -> Result<f64, String>,
{
    let mut trials: Vec<Trial> = Vec::with_capacity(cfg.trials);
    for i in 0..cfg.trials {
        let mut rng = stream(seed, "tpe", &[i as u64]);
        let point = if i < cfg.startup {
            space.iter().map(|d| sample_prior(d, &mut rng)).collect()
        } else {
            propose(space, &trials, cfg, &mut rng)
        };
        let trial = match objective(i, &point) {
            Ok(l) if l.is_finite() => Trial { point, loss: Some(l), error: None },
            Ok(l) => Trial { point, loss: None, error: Some(format!("non-finite loss {l}")) },
            Err(e) => Trial { point, loss: None, error: Some(e) },
        };
        trials.push(trial);
    }
    let best = trials.iter().enumerate().filter_map(|(i, t)| t.loss.map(|l| (i, l))).min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    match best {
        Some((best, best_loss)) => Ok(TpeOutcome { best, best_loss, trials }),
        None => Err(ForecastError::SearchFailed(trials.len())),
    }
}
