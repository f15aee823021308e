//! Embedding and the three depth-K recurrences, recorded on a [`Tape`].

use super::Variant;
use crate::grid::NEIGHBORHOOD;
use crate::tensor::{ConvSpec, Result, Scalar, Tape, Var};

/// Recurrence depth for a `width x height` map: enough for the signal to
/// cross any shortest path.
pub fn choose_depth(width: usize, height: usize) -> usize {
    width + height
}

/// Per-cell outputs of the embedding, each a `[h, w]` map.
#[derive(Clone, Copy, Debug)]
pub enum Fields {
    /// Unsquashed reward map `[d_rew, h, w]`.
    Vin { reward: Var },
    VProp { r_in: Var, r_out: Var, p: Var },
    MvProp { r: Var, p: Var },
}

/// Bound embedding parameters.
#[derive(Clone, Copy, Debug)]
pub struct EmbedVars {
    pub conv1_w: Var,
    pub conv1_b: Var,
    pub conv2_w: Var,
    pub conv2_b: Var,
}

fn channel<T: Scalar>(tape: &mut Tape<T>, x: Var, c: usize) -> Result<Var> {
    let (h, w) = (tape.shape(x)[1], tape.shape(x)[2]);
    let idx: Vec<Option<usize>> = (c * h * w..(c + 1) * h * w).map(Some).collect();
    let flat = tape.gather(x, &idx)?;
    tape.reshape(flat, vec![h, w])
}

/// 3x3 padded convolution to the hidden channels, then a pointwise
/// convolution to the field channels. VProp/MVProp fields go through a sigmoid.
pub fn embed<T: Scalar>(
    tape: &mut Tape<T>,
    obs: Var,
    vars: &EmbedVars,
    variant: Variant,
) -> Result<Fields> {
    let c_in = tape.shape(obs)[0];
    let hidden = tape.shape(vars.conv1_w)[0];
    let out = tape.shape(vars.conv2_w)[0];
    let h1 = tape.conv2d(obs, vars.conv1_w, Some(vars.conv1_b), ConvSpec::same3x3(c_in, hidden))?;
    let f = tape.conv2d(h1, vars.conv2_w, Some(vars.conv2_b), ConvSpec::pointwise(hidden, out))?;
    Ok(match variant {
        Variant::Vin => Fields::Vin { reward: f },
        Variant::VProp => {
            let s = tape.sigmoid(f);
            Fields::VProp {
                r_in: channel(tape, s, 0)?,
                r_out: channel(tape, s, 1)?,
                p: channel(tape, s, 2)?,
            }
        }
        Variant::MvProp => {
            let s = tape.sigmoid(f);
            Fields::MvProp {
                r: channel(tape, s, 0)?,
                p: channel(tape, s, 1)?,
            }
        }
    })
}

/// `v0 = r; v_k = max(v_{k-1}, max_{n in N} p * v_{k-1}[n] + r * (1 - p))`,
/// neighbors outside the map counting as value 0.
pub fn mvprop_rollout<T: Scalar>(tape: &mut Tape<T>, r: Var, p: Var, depth: usize) -> Result<Var> {
    let shape = tape.shape(p).to_vec();
    let n = NEIGHBORHOOD.len();
    let ones = tape.constant(shape.clone(), vec![T::one(); shape.iter().product()])?;
    let keep = tape.sub(ones, p)?;
    let base = tape.mul(r, keep)?;
    let p_n = tape.repeat(p, n);
    let base_n = tape.repeat(base, n);
    let mut v = r;
    for _ in 0..depth {
        let nb = tape.shift_stack(v, &NEIGHBORHOOD)?;
        let scaled = tape.mul(p_n, nb)?;
        let cand = tape.add(scaled, base_n)?;
        let best = tape.channel_max(cand)?;
        v = tape.max(v, best)?;
    }
    Ok(v)
}

/// Additive mask that removes off-map neighbors from a max over the
/// neighborhood stack.
fn off_map_mask<T: Scalar>(tape: &mut Tape<T>, h: usize, w: usize) -> Result<Var> {
    let big = T::of(-1e9);
    let mut data = vec![T::zero(); NEIGHBORHOOD.len() * h * w];
    for (k, &(dy, dx)) in NEIGHBORHOOD.iter().enumerate() {
        for y in 0..h {
            for x in 0..w {
                let sy = y as isize + dy;
                let sx = x as isize + dx;
                if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                    data[(k * h + y) * w + x] = big;
                }
            }
        }
    }
    tape.constant(vec![NEIGHBORHOOD.len(), h, w], data)
}

/// `v0 = 0; v_k = max(v_{k-1}, max_{n in N} p * v_{k-1}[n] + r_in[n] - r_out)`
/// over in-map neighbors.
pub fn vprop_rollout<T: Scalar>(
    tape: &mut Tape<T>,
    r_in: Var,
    r_out: Var,
    p: Var,
    depth: usize,
) -> Result<Var> {
    let shape = tape.shape(p).to_vec();
    let (h, w) = (shape[0], shape[1]);
    let n = NEIGHBORHOOD.len();
    let p_n = tape.repeat(p, n);
    let in_n = tape.shift_stack(r_in, &NEIGHBORHOOD)?;
    let out_n = tape.repeat(r_out, n);
    let mask = off_map_mask(tape, h, w)?;
    let gain = tape.sub(in_n, out_n)?;
    let base_n = tape.add(gain, mask)?;
    let mut v = tape.constant(shape, vec![T::zero(); h * w])?;
    for _ in 0..depth {
        let nb = tape.shift_stack(v, &NEIGHBORHOOD)?;
        let scaled = tape.mul(p_n, nb)?;
        let cand = tape.add(scaled, base_n)?;
        let best = tape.channel_max(cand)?;
        v = tape.max(v, best)?;
    }
    Ok(v)
}

/// `v0 = 0; q_k = conv(v_{k-1}; p_v) + conv(r; p_r); v_k = max_a q_k[a]`.
/// Returns `(v_K, q_K)`, with `v_K` as `[h, w]` and `q_K` as `[A, h, w]`.
pub fn vin_rollout<T: Scalar>(
    tape: &mut Tape<T>,
    reward: Var,
    p_v: Var,
    p_r: Var,
    depth: usize,
) -> Result<(Var, Var)> {
    let rshape = tape.shape(reward).to_vec();
    let (d_rew, h, w) = (rshape[0], rshape[1], rshape[2]);
    let actions = tape.shape(p_v)[0];
    let q_r = tape.conv2d(reward, p_r, None, ConvSpec::same3x3(d_rew, actions))?;
    let mut v = tape.constant(vec![1, h, w], vec![T::zero(); h * w])?;
    let mut q = q_r;
    let mut v_flat = tape.reshape(v, vec![h, w])?;
    for _ in 0..depth {
        let q_v = tape.conv2d(v, p_v, None, ConvSpec::same3x3(1, actions))?;
        q = tape.add(q_v, q_r)?;
        v_flat = tape.channel_max(q)?;
        v = tape.reshape(v_flat, vec![1, h, w])?;
    }
    if depth == 0 {
        let zeros = tape.constant(vec![actions, h, w], vec![T::zero(); actions * h * w])?;
        q = zeros;
    }
    Ok((v_flat, q))
}
