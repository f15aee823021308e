//! Finite-difference checks of every differentiable piece, in f64.

use crate::grid::Action;
use crate::planners::{mvprop_rollout, state_value, vin_rollout, vprop_rollout, HeadVars, VALUE_INPUTS};
use crate::tensor::{grad_check, ConvSpec, DiffArray, GradCheck, Result, Tape, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
pub const GRADCHECK_STEP: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub name: String,
    /// Instances compared (kink instances excluded).
    pub instances: usize,
    /// Instances redrawn because a probe crossed a max/argmax boundary.
    pub kinks: usize,
    pub max_rel_err: f64,
    pub passed: bool,
}

fn random(rng: &mut ChaCha8Rng, shape: Vec<usize>, lo: f64, hi: f64) -> DiffArray<f64> {
    let n = shape.iter().product();
    DiffArray::new(shape, (0..n).map(|_| rng.gen_range(lo..hi)).collect()).expect("non-empty shape")
}

/// Reduces any output to a scalar through fixed random coefficients.
fn project(tape: &mut Tape<f64>, y: Var, rng_seed: u64) -> Result<Var> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let n = tape.value(y).len();
    let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    tape.weighted_sum(y, &c)
}

fn slice(tape: &mut Tape<f64>, x: Var, part: usize, h: usize, w: usize) -> Result<Var> {
    let idx: Vec<Option<usize>> = (part * h * w..(part + 1) * h * w).map(Some).collect();
    let flat = tape.gather(x, &idx)?;
    tape.reshape(flat, vec![h, w])
}

type Case = Box<dyn Fn(&mut ChaCha8Rng) -> Result<GradCheck>>;

fn cases() -> Vec<(&'static str, Case)> {
    vec![
        (
            "conv2d",
            Box::new(|rng| {
                let (c_in, c_out) = (rng.gen_range(1..4), rng.gen_range(1..4));
                let spec = if rng.gen_bool(0.5) {
                    ConvSpec::same3x3(c_in, c_out)
                } else {
                    ConvSpec::pointwise(c_in, c_out)
                };
                let (h, w) = (rng.gen_range(2..6), rng.gen_range(2..6));
                let input = random(rng, vec![c_in, h, w], -1.0, 1.0);
                let weight = random(rng, spec.weight_shape(), -1.0, 1.0);
                let bias = random(rng, vec![c_out], -1.0, 1.0);
                // packed [input | weight | bias] so one check covers all three
                let packed: Vec<f64> = [input.values(), weight.values(), bias.values()].concat();
                let x = DiffArray::new(vec![packed.len()], packed)?;
                let (ni, nw) = (input.len(), weight.len());
                let seed = rng.gen();
                grad_check(&x, GRADCHECK_STEP, |t, v| {
                    let i = t.gather(v, &(0..ni).map(Some).collect::<Vec<_>>())?;
                    let i = t.reshape(i, vec![c_in, h, w])?;
                    let k = t.gather(v, &(ni..ni + nw).map(Some).collect::<Vec<_>>())?;
                    let k = t.reshape(k, spec.weight_shape())?;
                    let b = t.gather(v, &(ni + nw..ni + nw + c_out).map(Some).collect::<Vec<_>>())?;
                    let y = t.conv2d(i, k, Some(b), spec)?;
                    project(t, y, seed)
                })
            }),
        ),
        (
            "sigmoid",
            Box::new(|rng| {
                let n = rng.gen_range(1..20);
                let x = random(rng, vec![n], -4.0, 4.0);
                let seed = rng.gen();
                grad_check(&x, GRADCHECK_STEP, |t, v| {
                    let y = t.sigmoid(v);
                    project(t, y, seed)
                })
            }),
        ),
        (
            "log_softmax",
            Box::new(|rng| {
                let x = random(rng, vec![Action::COUNT], -3.0, 3.0);
                let seed = rng.gen();
                grad_check(&x, GRADCHECK_STEP, |t, v| {
                    let y = t.log_softmax(v)?;
                    project(t, y, seed)
                })
            }),
        ),
        (
            "channel_max",
            Box::new(|rng| {
                let c = rng.gen_range(1..6);
                let x = random(rng, vec![c, 3, 4], -1.0, 1.0);
                let seed = rng.gen();
                grad_check(&x, GRADCHECK_STEP, |t, v| {
                    let y = t.channel_max(v)?;
                    project(t, y, seed)
                })
            }),
        ),
        (
            "mvprop_rollout",
            Box::new(|rng| {
                let (h, w) = (rng.gen_range(2..5), rng.gen_range(2..5));
                let x = random(rng, vec![2, h, w], 0.05, 0.95);
                let k = rng.gen_range(1..5);
                let seed = rng.gen();
                grad_check(&x, GRADCHECK_STEP, |t, v| {
                    let r = slice(t, v, 0, h, w)?;
                    let p = slice(t, v, 1, h, w)?;
                    let y = mvprop_rollout(t, r, p, k)?;
                    project(t, y, seed)
                })
            }),
        ),
        (
            "vprop_rollout",
            Box::new(|rng| {
                let (h, w) = (rng.gen_range(2..5), rng.gen_range(2..5));
                let x = random(rng, vec![3, h, w], 0.05, 0.95);
                let k = rng.gen_range(1..5);
                let seed = rng.gen();
                grad_check(&x, GRADCHECK_STEP, |t, v| {
                    let a = slice(t, v, 0, h, w)?;
                    let b = slice(t, v, 1, h, w)?;
                    let p = slice(t, v, 2, h, w)?;
                    let y = vprop_rollout(t, a, b, p, k)?;
                    project(t, y, seed)
                })
            }),
        ),
        (
            "vin_rollout",
            Box::new(|rng| {
                let (h, w) = (rng.gen_range(2..5), rng.gen_range(2..5));
                let reward = random(rng, vec![1, h, w], -1.0, 1.0);
                let p_r = random(rng, vec![8, 1, 3, 3], -1.0, 1.0);
                let p_v = random(rng, vec![8, 1, 3, 3], -0.3, 0.3);
                let k = rng.gen_range(1..5);
                let seed = rng.gen();
                grad_check(&p_v, GRADCHECK_STEP, |t, v| {
                    let r = t.leaf(&reward);
                    let pr = t.leaf(&p_r);
                    let (y, _) = vin_rollout(t, r, v, pr, k)?;
                    project(t, y, seed)
                })
            }),
        ),
        (
            "value_head",
            Box::new(|rng| {
                let inputs = random(rng, vec![Action::COUNT], -1.0, 1.0);
                let patch: Vec<f64> = (0..VALUE_INPUTS - Action::COUNT)
                    .map(|_| if rng.gen_bool(0.3) { 1.0 } else { 0.0 })
                    .collect();
                let w = random(rng, vec![VALUE_INPUTS], -1.0, 1.0);
                let b = rng.gen_range(-1.0..1.0);
                grad_check(&w, GRADCHECK_STEP, |t, v| {
                    let x = t.leaf(&inputs);
                    let bias = t.constant(vec![1], vec![b])?;
                    let head = HeadVars {
                        log_scale: None,
                        value_w: v,
                        value_b: bias,
                    };
                    let y = state_value(t, x, &patch, &head)?;
                    t.mul(y, y)
                })
            }),
        ),
    ]
}

/// Runs every check on `instances` random non-kink instances.
pub fn gradcheck_suite(instances: usize, seed: u64) -> Result<Vec<CheckSummary>> {
    let mut out = Vec::new();
    for (i, (name, case)) in cases().into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64 * 7919));
        let mut summary = CheckSummary {
            name: name.to_string(),
            instances: 0,
            kinks: 0,
            max_rel_err: 0.0,
            passed: true,
        };
        let mut attempts = 0;
        while summary.instances < instances && attempts < instances * 20 {
            attempts += 1;
            let check = case(&mut rng)?;
            if check.kink {
                summary.kinks += 1;
                continue;
            }
            summary.instances += 1;
            summary.max_rel_err = summary.max_rel_err.max(check.max_rel_err);
        }
        summary.passed = summary.instances == instances && summary.max_rel_err < GRADCHECK_TOLERANCE;
        out.push(summary);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        for s in gradcheck_suite(5, 0).unwrap() {
            assert!(s.passed, "{s:?}");
        }
    }
}
