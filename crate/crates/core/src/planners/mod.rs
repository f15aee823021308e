//! VIN, VProp and MVProp: an embedding, a weight-shared recurrence of depth
//! K, and policy/value heads reading the result at the agent.

mod heads;
mod rollout;

pub use heads::{greedy_action, policy_logits, state_value, HeadVars, OFF_MAP_LOGIT};
pub use rollout::{choose_depth, embed, mvprop_rollout, vin_rollout, vprop_rollout, EmbedVars, Fields};

use crate::env::{GridObservation, OBS_CHANNELS};
use crate::grid::{Action, Cell};
use crate::tensor::{DiffArray, Gradients, Result, Scalar, Tape, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Inputs of the value head: the policy's 8 inputs and the 3x3 observation patch.
pub const VALUE_INPUTS: usize = Action::COUNT + 9 * OBS_CHANNELS;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Vin,
    VProp,
    MvProp,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Vin, Variant::VProp, Variant::MvProp];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Vin => "vin",
            Variant::VProp => "vprop",
            Variant::MvProp => "mvprop",
        }
    }

    /// Channels produced by the embedding.
    pub fn field_channels(self, d_rew: usize) -> usize {
        match self {
            Variant::Vin => d_rew,
            Variant::VProp => 3,
            Variant::MvProp => 2,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown planner variant `{s}` (expected vin, vprop or mvprop)"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub variant: Variant,
    pub hidden_channels: usize,
    /// Reward channels of the VIN embedding; ignored by the other variants.
    pub d_rew: usize,
}

impl PlannerConfig {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            hidden_channels: 8,
            d_rew: 1,
        }
    }
}

/// Initial log softmax scale of the VProp/MVProp policy head.
const INIT_LOG_SCALE: f64 = 2.3;
/// Pre-sigmoid offsets added to the field biases of VProp/MVProp. Rewards
/// start near sigmoid(-2) = 0.12 and propagation near sigmoid(2) = 0.88,
/// so a reward discovered anywhere is visible from far away.
const INIT_REWARD_BIAS: f64 = -2.0;
const INIT_PROPAGATION_BIAS: f64 = 2.0;
/// Standard deviation of the VIN recurrence kernels at initialisation.
const VIN_INIT_STD: f64 = 0.01;

/// Trainable parameters of one planner.
#[derive(Clone, Debug, PartialEq)]
pub struct Planner<T = f32> {
    config: PlannerConfig,
    pub conv1_w: DiffArray<T>,
    pub conv1_b: DiffArray<T>,
    pub conv2_w: DiffArray<T>,
    pub conv2_b: DiffArray<T>,
    /// VIN only: `[A, 1, 3, 3]`.
    pub p_v: Option<DiffArray<T>>,
    /// VIN only: `[A, d_rew, 3, 3]`.
    pub p_r: Option<DiffArray<T>>,
    /// VProp/MVProp only: log of the positive logit scale.
    pub log_scale: Option<DiffArray<T>>,
    pub value_w: DiffArray<T>,
    pub value_b: DiffArray<T>,
}

/// Parameters recorded on a tape, in the order of [`Planner::named_params`].
#[derive(Clone, Debug)]
pub struct PlannerVars {
    pub embed: EmbedVars,
    pub p_v: Option<Var>,
    pub p_r: Option<Var>,
    pub head: HeadVars,
}

impl PlannerVars {
    fn in_order(&self) -> Vec<Var> {
        let e = &self.embed;
        let mut out = vec![e.conv1_w, e.conv1_b, e.conv2_w, e.conv2_b];
        out.extend(self.p_v);
        out.extend(self.p_r);
        out.extend(self.head.log_scale);
        out.push(self.head.value_w);
        out.push(self.head.value_b);
        out
    }
}

/// Result of the recurrence for one observation.
#[derive(Clone, Copy, Debug)]
pub struct Plan {
    /// `v^K`, shape `[h, w]`.
    pub v: Var,
    /// VIN only: `q^K`, shape `[A, h, w]`.
    pub q: Option<Var>,
}

/// Policy and value read at one agent cell.
#[derive(Clone, Copy, Debug)]
pub struct HeadOutput {
    pub logits: Var,
    pub log_probs: Var,
    pub value: Var,
}

fn uniform<T: Scalar>(rng: &mut impl Rng, shape: Vec<usize>, bound: f64) -> DiffArray<T> {
    let n = shape.iter().product();
    let values = (0..n).map(|_| T::of(rng.gen_range(-bound..=bound))).collect();
    DiffArray::param(shape, values).expect("non-empty parameter shape")
}

impl<T: Scalar> Planner<T> {
    /// Fan-in scaled uniform initialisation; the value head starts at zero.
    pub fn new(config: PlannerConfig, rng: &mut impl Rng) -> Self {
        let hidden = config.hidden_channels;
        let out = config.variant.field_channels(config.d_rew);
        let a = Action::COUNT;
        let b1 = 1.0 / ((OBS_CHANNELS * 9) as f64).sqrt();
        let b2 = 1.0 / (hidden as f64).sqrt();
        let conv1_w = uniform(rng, vec![hidden, OBS_CHANNELS, 3, 3], b1);
        let conv1_b = uniform(rng, vec![hidden], b1);
        let conv2_w = uniform(rng, vec![out, hidden, 1, 1], b2);
        let mut conv2_b = uniform(rng, vec![out], b2);
        if config.variant != Variant::Vin {
            // the propagation field is always the last channel
            let last = out - 1;
            for (i, b) in conv2_b.values_mut().iter_mut().enumerate() {
                let offset = if i == last { INIT_PROPAGATION_BIAS } else { INIT_REWARD_BIAS };
                *b = *b + T::of(offset);
            }
        }
        // uniform on [-s*sqrt(3), s*sqrt(3)] has standard deviation s
        let vin_bound = VIN_INIT_STD * 3f64.sqrt();
        let (p_v, p_r, log_scale) = match config.variant {
            Variant::Vin => (
                Some(uniform(rng, vec![a, 1, 3, 3], vin_bound)),
                Some(uniform(rng, vec![a, config.d_rew, 3, 3], vin_bound)),
                None,
            ),
            _ => (None, None, Some(param_of(vec![1], vec![T::of(INIT_LOG_SCALE)]))),
        };
        Self {
            config,
            conv1_w,
            conv1_b,
            conv2_w,
            conv2_b,
            p_v,
            p_r,
            log_scale,
            value_w: param_of(vec![VALUE_INPUTS], vec![T::zero(); VALUE_INPUTS]),
            value_b: param_of(vec![1], vec![T::zero()]),
        }
    }

    pub fn config(&self) -> PlannerConfig {
        self.config
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    /// Parameters with stable names, in a fixed order.
    pub fn named_params(&self) -> Vec<(&'static str, &DiffArray<T>)> {
        let mut out = vec![
            ("embed.conv1.weight", &self.conv1_w),
            ("embed.conv1.bias", &self.conv1_b),
            ("embed.conv2.weight", &self.conv2_w),
            ("embed.conv2.bias", &self.conv2_b),
        ];
        if let Some(p) = &self.p_v {
            out.push(("vin.p_v", p));
        }
        if let Some(p) = &self.p_r {
            out.push(("vin.p_r", p));
        }
        if let Some(p) = &self.log_scale {
            out.push(("head.log_scale", p));
        }
        out.push(("head.value.weight", &self.value_w));
        out.push(("head.value.bias", &self.value_b));
        out
    }

    /// Mutable parameters in the order of [`Planner::named_params`].
    pub fn params_mut(&mut self) -> Vec<&mut DiffArray<T>> {
        let mut out = vec![
            &mut self.conv1_w,
            &mut self.conv1_b,
            &mut self.conv2_w,
            &mut self.conv2_b,
        ];
        out.extend(self.p_v.as_mut());
        out.extend(self.p_r.as_mut());
        out.extend(self.log_scale.as_mut());
        out.push(&mut self.value_w);
        out.push(&mut self.value_b);
        out
    }

    pub fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, p)| p.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.named_params().iter().all(|(_, p)| p.all_finite())
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(DiffArray::zero_grad);
    }

    pub fn cast<U: Scalar>(&self) -> Planner<U> {
        Planner {
            config: self.config,
            conv1_w: self.conv1_w.cast(),
            conv1_b: self.conv1_b.cast(),
            conv2_w: self.conv2_w.cast(),
            conv2_b: self.conv2_b.cast(),
            p_v: self.p_v.as_ref().map(DiffArray::cast),
            p_r: self.p_r.as_ref().map(DiffArray::cast),
            log_scale: self.log_scale.as_ref().map(DiffArray::cast),
            value_w: self.value_w.cast(),
            value_b: self.value_b.cast(),
        }
    }

    /// Rebuilds a planner from arrays listed in [`Planner::named_params`] order.
    pub fn from_params(config: PlannerConfig, params: Vec<DiffArray<T>>) -> Result<Self> {
        let mut template = Planner::<T>::new(config, &mut rand::rngs::mock::StepRng::new(0, 0));
        let slots = template.params_mut();
        if slots.len() != params.len() {
            return Err(crate::tensor::mismatch(
                "Planner::from_params",
                format!("expected {} arrays, got {}", slots.len(), params.len()),
            ));
        }
        for (i, (slot, p)) in slots.into_iter().zip(params).enumerate() {
            if slot.shape() != p.shape() {
                return Err(crate::tensor::mismatch(
                    "Planner::from_params",
                    format!("array {i}: expected {:?}, got {:?}", slot.shape(), p.shape()),
                ));
            }
            *slot = p.with_grad();
        }
        Ok(template)
    }

    /// Records every parameter on `tape`.
    pub fn bind(&self, tape: &mut Tape<T>) -> PlannerVars {
        PlannerVars {
            embed: EmbedVars {
                conv1_w: tape.leaf(&self.conv1_w),
                conv1_b: tape.leaf(&self.conv1_b),
                conv2_w: tape.leaf(&self.conv2_w),
                conv2_b: tape.leaf(&self.conv2_b),
            },
            p_v: self.p_v.as_ref().map(|p| tape.leaf(p)),
            p_r: self.p_r.as_ref().map(|p| tape.leaf(p)),
            head: HeadVars {
                log_scale: self.log_scale.as_ref().map(|p| tape.leaf(p)),
                value_w: tape.leaf(&self.value_w),
                value_b: tape.leaf(&self.value_b),
            },
        }
    }

    /// Adds the gradients of the bound parameters into their slots.
    pub fn accumulate(&mut self, grads: &Gradients<T>, vars: &PlannerVars) {
        for (param, var) in self.params_mut().into_iter().zip(vars.in_order()) {
            match grads.get(var) {
                Some(g) => param.accumulate_grad(g),
                None => param.accumulate_grad(&vec![T::zero(); param.len()]),
            }
        }
    }

    /// Embedding followed by `depth` recurrence steps.
    pub fn plan(
        &self,
        tape: &mut Tape<T>,
        vars: &PlannerVars,
        obs: &GridObservation,
        depth: usize,
    ) -> Result<Plan> {
        let x = observation_var(tape, obs)?;
        match embed(tape, x, &vars.embed, self.variant())? {
            Fields::Vin { reward } => {
                let p_v = vars.p_v.expect("VIN planner binds p_v");
                let p_r = vars.p_r.expect("VIN planner binds p_r");
                let (v, q) = vin_rollout(tape, reward, p_v, p_r, depth)?;
                Ok(Plan { v, q: Some(q) })
            }
            Fields::VProp { r_in, r_out, p } => Ok(Plan {
                v: vprop_rollout(tape, r_in, r_out, p, depth)?,
                q: None,
            }),
            Fields::MvProp { r, p } => Ok(Plan {
                v: mvprop_rollout(tape, r, p, depth)?,
                q: None,
            }),
        }
    }

    /// Policy log-probabilities and state value at `agent`.
    pub fn heads(
        &self,
        tape: &mut Tape<T>,
        vars: &PlannerVars,
        plan: Plan,
        obs: &GridObservation,
        agent: Cell,
    ) -> Result<HeadOutput> {
        let (logits, inputs) = policy_logits(tape, plan, agent, &vars.head)?;
        let log_probs = tape.log_softmax(logits)?;
        let patch: Vec<T> = obs.patch3x3(agent).iter().map(|&x| T::of(x as f64)).collect();
        let value = state_value(tape, inputs, &patch, &vars.head)?;
        Ok(HeadOutput {
            logits,
            log_probs,
            value,
        })
    }
}

fn param_of<T: Scalar>(shape: Vec<usize>, values: Vec<T>) -> DiffArray<T> {
    DiffArray::param(shape, values).expect("non-empty parameter shape")
}

/// The observation as a constant `[C, h, w]` node.
pub fn observation_var<T: Scalar>(tape: &mut Tape<T>, obs: &GridObservation) -> Result<Var> {
    let data = obs.data().iter().map(|&x| T::of(x as f64)).collect();
    tape.constant(vec![OBS_CHANNELS, obs.height(), obs.width()], data)
}

/// Cached recurrence output for acting without gradients.
#[derive(Clone, Debug)]
pub struct ValueMap {
    pub width: usize,
    pub height: usize,
    pub v: Vec<f32>,
    pub q: Option<Vec<f32>>,
}

/// Action distribution and value from a forward pass without gradients.
#[derive(Clone, Debug)]
pub struct PolicyOutput {
    pub probs: [f32; Action::COUNT],
    pub logits: [f32; Action::COUNT],
    pub value: f32,
}

impl PolicyOutput {
    pub fn greedy(&self) -> Action {
        greedy_action(&self.logits)
    }

    /// Samples an action by inverse CDF.
    pub fn sample(&self, rng: &mut impl Rng) -> Action {
        let u: f32 = rng.gen();
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return Action::from_index(i).expect("index below COUNT");
            }
        }
        // rounding left a sliver of mass above the last bucket
        let last = self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        Action::from_index(last).expect("index below COUNT")
    }
}

impl Planner<f32> {
    /// Runs the recurrence once; the result can be reused for every agent
    /// position while the observation stays the same.
    pub fn value_map(&self, obs: &GridObservation, depth: usize) -> Result<ValueMap> {
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape);
        let plan = self.plan(&mut tape, &vars, obs, depth)?;
        Ok(ValueMap {
            width: obs.width(),
            height: obs.height(),
            v: tape.value(plan.v).to_vec(),
            q: plan.q.map(|q| tape.value(q).to_vec()),
        })
    }

    /// Reads the heads off a cached value map.
    pub fn policy_at(&self, map: &ValueMap, obs: &GridObservation, agent: Cell) -> Result<PolicyOutput> {
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape);
        let plan = Plan {
            v: tape.constant(vec![map.height, map.width], map.v.clone())?,
            q: match &map.q {
                Some(q) => Some(tape.constant(vec![Action::COUNT, map.height, map.width], q.clone())?),
                None => None,
            },
        };
        let out = self.heads(&mut tape, &vars, plan, obs, agent)?;
        let mut res = PolicyOutput {
            probs: [0.0; Action::COUNT],
            logits: [0.0; Action::COUNT],
            value: tape.scalar(out.value),
        };
        res.logits.copy_from_slice(tape.value(out.logits));
        for (p, &lp) in res.probs.iter_mut().zip(tape.value(out.log_probs)) {
            *p = lp.exp();
        }
        Ok(res)
    }

    pub fn act(&self, obs: &GridObservation, agent: Cell, depth: usize) -> Result<PolicyOutput> {
        let map = self.value_map(obs, depth)?;
        self.policy_at(&map, obs, agent)
    }
}

#[cfg(test)]
mod tests;
