use super::Plan;
use crate::grid::{Action, Cell};
use crate::tensor::{Result, Scalar, Tape, Var};

/// Added to the logit of a move that would leave the map.
pub const OFF_MAP_LOGIT: f64 = -10.0;

/// Bound head parameters.
#[derive(Clone, Copy, Debug)]
pub struct HeadVars {
    /// VProp/MVProp: `[1]`, the logit scale is `exp(log_scale)`.
    pub log_scale: Option<Var>,
    pub value_w: Var,
    pub value_b: Var,
}

/// Action logits at `agent`, plus the 8 values they were computed from
/// (which also feed the value head).
///
/// VIN reads `q^K[:, agent]`. VProp/MVProp scale the 8 neighbor values of
/// `v^K` by a positive learned factor; off-map neighbors count as 0 and get
/// [`OFF_MAP_LOGIT`] added.
pub fn policy_logits<T: Scalar>(
    tape: &mut Tape<T>,
    plan: Plan,
    agent: Cell,
    head: &HeadVars,
) -> Result<(Var, Var)> {
    let shape = tape.shape(plan.v).to_vec();
    let (h, w) = (shape[0], shape[1]);
    let at = agent.y * w + agent.x;
    if let Some(q) = plan.q {
        let idx: Vec<Option<usize>> = (0..Action::COUNT).map(|a| Some(a * h * w + at)).collect();
        let inputs = tape.gather(q, &idx)?;
        return Ok((inputs, inputs));
    }
    let mut idx = Vec::with_capacity(Action::COUNT);
    let mut offset = Vec::with_capacity(Action::COUNT);
    for a in Action::ALL {
        match agent.step(a, w, h) {
            Some(n) => {
                idx.push(Some(n.y * w + n.x));
                offset.push(T::zero());
            }
            None => {
                idx.push(None);
                offset.push(T::of(OFF_MAP_LOGIT));
            }
        }
    }
    let inputs = tape.gather(plan.v, &idx)?;
    let log_scale = head.log_scale.expect("propagation heads bind log_scale");
    let scale = tape.exp(log_scale);
    let scale = tape.repeat(scale, Action::COUNT);
    let scale = tape.reshape(scale, vec![Action::COUNT])?;
    let scaled = tape.mul(inputs, scale)?;
    let offset = tape.constant(vec![Action::COUNT], offset)?;
    Ok((tape.add(scaled, offset)?, inputs))
}

/// `V(s) = w . [inputs || patch] + b` where `patch` is the 3x3 observation
/// neighborhood of the agent.
pub fn state_value<T: Scalar>(
    tape: &mut Tape<T>,
    inputs: Var,
    patch: &[T],
    head: &HeadVars,
) -> Result<Var> {
    let patch = tape.constant(vec![patch.len()], patch.to_vec())?;
    let x = tape.concat(&[inputs, patch]);
    let prod = tape.mul(x, head.value_w)?;
    let n = tape.shape(prod)[0];
    let dot = tape.weighted_sum(prod, &vec![T::one(); n])?;
    tape.add(dot, head.value_b)
}

/// Argmax over logits, ties going to the lowest action index.
pub fn greedy_action<T: Scalar>(logits: &[T]) -> Action {
    let mut best = 0;
    for (i, &l) in logits.iter().enumerate() {
        if l > logits[best] {
            best = i;
        }
    }
    Action::from_index(best).expect("logits hold one entry per action")
}
