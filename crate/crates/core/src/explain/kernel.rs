//! KernelSHAP over flattened players and an exhaustive Shapley oracle.

use std::collections::HashMap;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, WeightedIndex};
use serde::Serialize;

use super::ExplainError;
use crate::linalg::ols;

/// Rows per call to the model.
const PREDICT_CHUNK: usize = 4096;

/// Attribution of one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Explanation {
    /// Mean model output over the background.
    pub base_value: f64,
    pub prediction: f64,
    pub phi: Vec<f64>,
    /// Distinct coalitions evaluated, excluding the empty and full ones.
    pub coalitions: usize,
    /// True when every coalition was enumerated, making `phi` exact.
    pub exhaustive: bool,
}

impl Explanation {
    pub fn additivity_residual(&self) -> f64 {
        (self.base_value + self.phi.iter().sum::<f64>() - self.prediction).abs()
    }
}

/// Smallest coalition budget accepted for `m` players.
pub fn min_nsamples(m: usize) -> usize {
    2 * m + 2
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn check_inputs(background: &[f64], instance: &[f64]) -> Result<usize, ExplainError> {
    let m = instance.len();
    if m == 0 {
        return Err(ExplainError::Shape("instance has no players".into()));
    }
    if background.is_empty() {
        return Err(ExplainError::EmptyBackground);
    }
    if !background.len().is_multiple_of(m) {
        return Err(ExplainError::Shape(format!("background length {} is not a multiple of {m}", background.len())));
    }
    if instance.iter().chain(background).any(|v| !v.is_finite()) {
        return Err(ExplainError::NonFinite);
    }
    Ok(background.len() / m)
}

/// Evaluates the model on `rows` flat inputs of width `m`.
fn predict_rows<F>(predict: &mut F, rows: &[f64], m: usize) -> Result<Vec<f64>, ExplainError>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let mut out = Vec::with_capacity(rows.len() / m);
    for chunk in rows.chunks(PREDICT_CHUNK * m) {
        let p = predict(chunk);
        if p.len() != chunk.len() / m {
            return Err(ExplainError::Shape(format!("model returned {} outputs for {} inputs", p.len(), chunk.len() / m)));
        }
        out.extend(p);
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(ExplainError::NonFinite);
    }
    Ok(out)
}

/// Expected model output when the players in each mask take the instance
/// values and the rest are drawn from the background.
fn coalition_values<F>(
    predict: &mut F,
    background: &[f64],
    instance: &[f64],
    players: &[usize],
    masks: &[Vec<bool>],
) -> Result<Vec<f64>, ExplainError>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let m = instance.len();
    let b = background.len() / m;
    let per_chunk = (PREDICT_CHUNK / b).max(1);
    let mut values = Vec::with_capacity(masks.len());
    let mut rows = Vec::with_capacity(per_chunk * b * m);
    for group in masks.chunks(per_chunk) {
        rows.clear();
        for mask in group {
            let start = rows.len();
            rows.extend_from_slice(background);
            for row in rows[start..].chunks_mut(m) {
                for (&on, &p) in mask.iter().zip(players) {
                    if on {
                        row[p] = instance[p];
                    }
                }
            }
        }
        let preds = predict_rows(predict, &rows, m)?;
        values.extend(preds.chunks(b).map(|c| c.iter().sum::<f64>() / b as f64));
    }
    Ok(values)
}

/// Coalitions over `m` players with their Shapley-kernel weights. Sizes
/// are enumerated completely, smallest and largest first, while the budget
/// covers them; the rest is sampled in complementary pairs.
fn coalitions<R: Rng>(m: usize, nsamples: usize, rng: &mut R) -> (Vec<Vec<bool>>, Vec<f64>, bool) {
    let n_sizes = m / 2;
    let n_paired = (m - 1) / 2;
    let mut size_weight: Vec<f64> = (1..=n_sizes).map(|s| (m - 1) as f64 / (s * (m - s)) as f64).collect();
    for w in size_weight.iter_mut().take(n_paired) {
        *w *= 2.0;
    }
    let total: f64 = size_weight.iter().sum();
    size_weight.iter_mut().for_each(|w| *w /= total);

    let mut masks = Vec::new();
    let mut weights = Vec::new();
    let mut left = nsamples as f64;
    let mut remaining = size_weight.clone();
    let mut full_sizes = 0;
    for s in 1..=n_sizes {
        let paired = s <= n_paired;
        let count = binom(m, s) * if paired { 2.0 } else { 1.0 };
        if left * remaining[s - 1] / count < 1.0 - 1e-8 {
            break;
        }
        full_sizes += 1;
        left -= count;
        if remaining[s - 1] < 1.0 {
            let r = remaining[s - 1];
            remaining.iter_mut().for_each(|w| *w /= 1.0 - r);
        }
        let w = size_weight[s - 1] / binom(m, s) / if paired { 2.0 } else { 1.0 };
        for_each_combination(m, s, |idx| {
            let mut mask = vec![false; m];
            idx.iter().for_each(|&i| mask[i] = true);
            if paired {
                masks.push(mask.iter().map(|b| !b).collect());
                weights.push(w);
            }
            masks.push(mask);
            weights.push(w);
        });
    }
    if full_sizes == n_sizes {
        return (masks, weights, true);
    }

    let fixed = masks.len();
    let mut sample_weight: Vec<f64> = size_weight.clone();
    for w in sample_weight.iter_mut().take(n_paired) {
        *w /= 2.0;
    }
    let sampler = WeightedIndex::new(&sample_weight[full_sizes..]).expect("positive size weights");
    let mut seen: HashMap<Vec<bool>, usize> = HashMap::new();
    let mut budget = nsamples.saturating_sub(fixed);
    let mut draws = 0;
    let mut add = |mask: Vec<bool>, masks: &mut Vec<Vec<bool>>, weights: &mut Vec<f64>, budget: &mut usize| {
        if let Some(&i) = seen.get(&mask) {
            weights[i] += 1.0;
        } else {
            seen.insert(mask.clone(), masks.len());
            masks.push(mask);
            weights.push(1.0);
            *budget -= 1;
        }
    };
    while budget > 0 && draws < 4 * nsamples {
        draws += 1;
        let s = full_sizes + 1 + sampler.sample(rng);
        let mut mask = vec![false; m];
        for i in sample(rng, m, s) {
            mask[i] = true;
        }
        let complement: Vec<bool> = mask.iter().map(|b| !b).collect();
        add(mask, &mut masks, &mut weights, &mut budget);
        if budget > 0 && s <= n_paired {
            add(complement, &mut masks, &mut weights, &mut budget);
        }
    }
    let weight_left: f64 = size_weight[full_sizes..].iter().sum();
    let drawn: f64 = weights[fixed..].iter().sum();
    weights[fixed..].iter_mut().for_each(|w| *w *= weight_left / drawn);
    (masks, weights, false)
}

fn for_each_combination(m: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + m - k) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Shapley values of `instance` under `predict`, with players replaced by
/// background rows when absent. `background` is `B x M` row-major and
/// `predict` maps `k x M` row-major inputs to `k` outputs.
pub fn kernel_shap<F, R>(
    predict: &mut F,
    background: &[f64],
    instance: &[f64],
    nsamples: usize,
    rng: &mut R,
) -> Result<Explanation, ExplainError>
where
    F: FnMut(&[f64]) -> Vec<f64>,
    R: Rng,
{
    check_inputs(background, instance)?;
    let m = instance.len();
    if nsamples < min_nsamples(m) {
        return Err(ExplainError::BudgetTooSmall { nsamples, min: min_nsamples(m) });
    }
    let base_value = predict_rows(predict, background, m)?.iter().sum::<f64>() / (background.len() / m) as f64;
    let prediction = predict_rows(predict, instance, m)?[0];
    let mut phi = vec![0.0; m];

    // Players equal to the background everywhere cannot change the output.
    let players: Vec<usize> = (0..m).filter(|&p| background.chunks(m).any(|row| row[p] != instance[p])).collect();
    let total = prediction - base_value;
    let out = |phi, coalitions, exhaustive| Explanation { base_value, prediction, phi, coalitions, exhaustive };
    match players.len() {
        0 => return Ok(out(phi, 0, true)),
        1 => {
            phi[players[0]] = total;
            return Ok(out(phi, 0, true));
        }
        _ => {}
    }
    let k = players.len();
    let (masks, weights, exhaustive) = coalitions(k, nsamples, rng);
    let values = coalition_values(predict, background, instance, &players, &masks)?;

    // Efficiency pins the last player: phi_k = total - sum of the others.
    let mut rows = Vec::with_capacity(masks.len() * (k - 1));
    let mut y = Vec::with_capacity(masks.len());
    for ((mask, &w), v) in masks.iter().zip(&weights).zip(&values) {
        let sw = w.sqrt();
        let last = if mask[k - 1] { 1.0 } else { 0.0 };
        rows.extend(mask[..k - 1].iter().map(|&z| sw * ((z as u8 as f64) - last)));
        y.push(sw * (v - base_value - last * total));
    }
    let fit = ols(&rows, k - 1, &y).map_err(|_| ExplainError::Singular { nsamples })?;
    for (i, &p) in players[..k - 1].iter().enumerate() {
        phi[p] = fit.coef[i];
    }
    phi[players[k - 1]] = total - fit.coef.iter().sum::<f64>();
    Ok(out(phi, masks.len(), exhaustive))
}

/// Exact Shapley values by enumerating all `2^M` coalitions.
pub fn exact_shapley<F>(predict: &mut F, background: &[f64], instance: &[f64]) -> Result<Explanation, ExplainError>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    check_inputs(background, instance)?;
    let m = instance.len();
    if m > 20 {
        return Err(ExplainError::Shape(format!("{m} players is too many to enumerate")));
    }
    let players: Vec<usize> = (0..m).collect();
    let masks: Vec<Vec<bool>> = (0..1usize << m).map(|bits| (0..m).map(|i| bits >> i & 1 == 1).collect()).collect();
    let v = coalition_values(predict, background, instance, &players, &masks)?;
    let fact: Vec<f64> = (0..=m)
        .scan(1.0, |acc, i| {
            if i > 0 {
                *acc *= i as f64;
            }
            Some(*acc)
        })
        .collect();
    let mut phi = vec![0.0; m];
    for (i, p) in phi.iter_mut().enumerate() {
        for bits in 0..1usize << m {
            if bits >> i & 1 == 0 {
                let s = bits.count_ones() as usize;
                *p += fact[s] * fact[m - s - 1] / fact[m] * (v[bits | 1 << i] - v[bits]);
            }
        }
    }
    Ok(Explanation { base_value: v[0], prediction: v[(1 << m) - 1], phi, coalitions: (1 << m) - 2, exhaustive: true })
}
