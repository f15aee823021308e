use super::{DiffArray, Result, Scalar, Tape, Var};

/// Outcome of comparing analytic gradients with central differences.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheck {
    pub max_rel_err: f64,
    /// Some perturbation crossed a max/argmax decision boundary, so the
    /// comparison is not meaningful at this point.
    pub kink: bool,
}

impl GradCheck {
    pub fn passes(&self, tol: f64) -> bool {
        !self.kink && self.max_rel_err < tol
    }
}

fn eval<T: Scalar>(
    x: &DiffArray<T>,
    f: &impl Fn(&mut Tape<T>, Var) -> Result<Var>,
) -> Result<(T, Vec<u32>)> {
    let mut tape = Tape::new();
    let v = tape.leaf(x);
    let y = f(&mut tape, v)?;
    Ok((tape.scalar(y), tape.decision_signature()))
}

/// Checks the gradient of the scalar function `f` at `x` against central
/// finite differences with step `step`, coordinate by coordinate.
///
/// Relative error is `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn grad_check<T: Scalar>(
    x: &DiffArray<T>,
    step: f64,
    f: impl Fn(&mut Tape<T>, Var) -> Result<Var>,
) -> Result<GradCheck> {
    let x = x.clone().with_grad();
    let mut tape = Tape::new();
    let v = tape.leaf(&x);
    let y = f(&mut tape, v)?;
    let sig = tape.decision_signature();
    let analytic = tape
        .backward(y)?
        .get(v)
        .map(<[T]>::to_vec)
        .unwrap_or_else(|| vec![T::zero(); x.len()]);

    let h = T::of(step);
    let mut out = GradCheck {
        max_rel_err: 0.0,
        kink: false,
    };
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = x.values()[i];
        probe.values_mut()[i] = orig + h;
        let (fp, sp) = eval(&probe, &f)?;
        probe.values_mut()[i] = orig - h;
        let (fm, sm) = eval(&probe, &f)?;
        probe.values_mut()[i] = orig;
        if sp != sig || sm != sig {
            out.kink = true;
        }
        let numeric = (fp - fm).as_f64() / (2.0 * step);
        let a = analytic[i].as_f64();
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        out.max_rel_err = out.max_rel_err.max(err);
    }
    Ok(out)
}
