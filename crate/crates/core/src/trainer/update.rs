use super::{Hyperparams, Transition};
use crate::env::GridObservation;
use crate::grid::{Action, Cell};
use crate::planners::{choose_depth, Planner};
use crate::tensor::{Result, RmsProp, Scalar, Tape, TensorError, Var};
use std::fmt::Write as _;
use std::sync::Arc;
use thiserror::Error;

/// `min(pi / p, cap)`.
pub fn importance_weight(pi: f64, p: f64, cap: f64) -> f64 {
    (pi / p).min(cap)
}

/// `r + gamma * V(s')`, or just `r` when there is no successor.
pub fn td_target(reward: f64, next_value: Option<f64>, gamma: f64) -> f64 {
    reward + next_value.map_or(0.0, |v| gamma * v)
}

/// Per-transition quantities that are held constant while differentiating.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Target {
    /// Capped importance weight.
    pub weight: f64,
    /// Critic target `r + 1[s' exists] gamma V(s')`.
    pub target: f64,
    /// `target - V(s)`.
    pub advantage: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UpdateStats {
    pub loss: f64,
    pub mean_weight: f64,
    pub mean_value: f64,
    pub targets: Vec<Target>,
}

fn depth_of(obs: &GridObservation) -> usize {
    choose_depth(obs.width(), obs.height())
}

fn detached_value<T: Scalar>(planner: &Planner<T>, obs: &GridObservation, agent: Cell) -> Result<f64> {
    let mut tape = Tape::new();
    let vars = planner.bind(&mut tape);
    let plan = planner.plan(&mut tape, &vars, obs, depth_of(obs))?;
    let out = planner.heads(&mut tape, &vars, plan, obs, agent)?;
    Ok(tape.scalar(out.value).as_f64())
}

/// Batch indices grouped by shared observation, in order of first appearance.
fn group_by_observation(batch: &[&Transition]) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, t) in batch.iter().enumerate() {
        match groups
            .iter_mut()
            .find(|g| Arc::ptr_eq(&batch[g[0]].obs, &t.obs))
        {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    groups
}

/// Builds the surrogate whose gradient is the update direction:
///
/// `(1/B) sum_i [ -c A log pi(a) - lambda sum_a' p(a') log pi(a') + eta'/2 c (V - y)^2 ]`
///
/// with `c`, `A` and `y` treated as constants. The recurrence runs once per
/// distinct observation in the batch. With `frozen` the constants are taken
/// from there instead of being computed at the current parameters.
fn surrogate_pass<T: Scalar>(
    planner: &mut Planner<T>,
    batch: &[&Transition],
    hp: &Hyperparams,
    frozen: Option<&[Target]>,
    differentiate: bool,
) -> Result<UpdateStats> {
    let n = batch.len() as f64;
    let mut targets = vec![
        Target {
            weight: 0.0,
            target: 0.0,
            advantage: 0.0,
        };
        batch.len()
    ];
    let (mut loss, mut value_sum) = (0.0, 0.0);
    for group in group_by_observation(batch) {
        let obs = &batch[group[0]].obs;
        let mut tape = Tape::new();
        let vars = planner.bind(&mut tape);
        let plan = planner.plan(&mut tape, &vars, obs, depth_of(obs))?;
        let mut total: Option<Var> = None;
        for &i in &group {
            let t = batch[i];
            let out = planner.heads(&mut tape, &vars, plan, obs, t.agent)?;
            let log_pi: Vec<f64> = tape.value(out.log_probs).iter().map(|x| x.as_f64()).collect();
            let v = tape.scalar(out.value).as_f64();
            value_sum += v;
            let a = t.action.index();
            let tg = match frozen {
                Some(f) => f[i],
                None => {
                    let next = match &t.next {
                        None => None,
                        Some((g, agent)) if Arc::ptr_eq(g, obs) => {
                            let o = planner.heads(&mut tape, &vars, plan, g, *agent)?;
                            Some(tape.scalar(o.value).as_f64())
                        }
                        Some((g, agent)) => Some(detached_value(planner, g, *agent)?),
                    };
                    let y = td_target(t.reward, next, hp.gamma);
                    Target {
                        weight: importance_weight(log_pi[a].exp(), t.behaviour_prob(), hp.importance_cap),
                        target: y,
                        advantage: y - v,
                    }
                }
            };
            targets[i] = tg;

            let mut coeffs: Vec<T> = t
                .probs
                .iter()
                .map(|&p| T::of(-hp.regularizer_weight * p as f64 / n))
                .collect();
            coeffs[a] = coeffs[a] + T::of(-tg.weight * tg.advantage / n);
            let policy = tape.weighted_sum(out.log_probs, &coeffs)?;
            let y = tape.constant(vec![1], vec![T::of(tg.target)])?;
            let err = tape.sub(out.value, y)?;
            let sq = tape.mul(err, err)?;
            let critic = tape.scale(sq, T::of(0.5 * hp.critic_weight * tg.weight / n));
            let term = tape.add(policy, critic)?;
            total = Some(match total {
                Some(acc) => tape.add(acc, term)?,
                None => term,
            });
        }
        let total = total.expect("groups are non-empty");
        loss += tape.scalar(total).as_f64();
        if differentiate {
            let grads = tape.backward(total)?;
            planner.accumulate(&grads, &vars);
        }
    }
    Ok(UpdateStats {
        loss,
        mean_weight: targets.iter().map(|t| t.weight).sum::<f64>() / n,
        mean_value: value_sum / n,
        targets,
    })
}

/// Accumulates the surrogate gradient into the planner's parameters.
pub fn surrogate_gradients<T: Scalar>(
    planner: &mut Planner<T>,
    batch: &[&Transition],
    hp: &Hyperparams,
) -> Result<UpdateStats> {
    surrogate_pass(planner, batch, hp, None, true)
}

/// Value of the surrogate with the given constants, without gradients.
pub fn frozen_surrogate<T: Scalar>(
    planner: &Planner<T>,
    batch: &[&Transition],
    hp: &Hyperparams,
    targets: &[Target],
) -> Result<f64> {
    let mut p = planner.clone();
    Ok(surrogate_pass(&mut p, batch, hp, Some(targets), false)?.loss)
}

#[derive(Debug, Error)]
pub enum UpdateError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("non-finite values after update {update}\n{dump}")]
    NonFinite { update: u64, dump: String },
}

/// Planner parameters together with their optimizer state.
#[derive(Clone, Debug)]
pub struct Learner {
    pub planner: Planner<f32>,
    pub hp: Hyperparams,
    opt: RmsProp<f32>,
    updates: u64,
}

impl Learner {
    pub fn new(planner: Planner<f32>, hp: Hyperparams) -> Self {
        let opt = RmsProp::new(hp.lr as f32, hp.rms_decay as f32, hp.rms_eps as f32);
        Self {
            planner,
            hp,
            opt,
            updates: 0,
        }
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// One RMSProp step on the batch; `Ok(None)` for an empty batch.
    pub fn update(&mut self, batch: &[&Transition]) -> std::result::Result<Option<UpdateStats>, UpdateError> {
        if batch.is_empty() {
            return Ok(None);
        }
        self.planner.zero_grad();
        let stats = surrogate_gradients(&mut self.planner, batch, &self.hp)?;
        self.updates += 1;
        let grads_finite = self
            .planner
            .named_params()
            .iter()
            .all(|(_, p)| p.grad().is_some_and(|g| g.iter().all(|x| x.is_finite())));
        if !stats.loss.is_finite() || !grads_finite {
            return Err(self.non_finite(batch, &stats));
        }
        self.opt.step(&mut self.planner.params_mut())?;
        if !self.planner.all_finite() {
            return Err(self.non_finite(batch, &stats));
        }
        Ok(Some(stats))
    }

    fn non_finite(&self, batch: &[&Transition], stats: &UpdateStats) -> UpdateError {
        let mut dump = format!("loss {:e}, mean weight {:e}\n", stats.loss, stats.mean_weight);
        for (name, p) in self.planner.named_params() {
            let bad = p.values().iter().filter(|x| !x.is_finite()).count();
            let gbad = p.grad().map_or(0, |g| g.iter().filter(|x| !x.is_finite()).count());
            let _ = writeln!(dump, "  {name}: {bad} non-finite values, {gbad} non-finite grads");
        }
        for (t, tg) in batch.iter().zip(&stats.targets) {
            let _ = writeln!(
                dump,
                "  {}x{} agent {} action {} reward {} p {:?} terminal {} -> {:?}",
                t.obs.width(),
                t.obs.height(),
                t.agent,
                Action::short_name(t.action),
                t.reward,
                t.probs,
                t.next.is_none(),
                tg
            );
        }
        UpdateError::NonFinite {
            update: self.updates,
            dump,
        }
    }
}
