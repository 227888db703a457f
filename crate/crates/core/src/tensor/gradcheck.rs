use super::{ParamId, ParamStore, Tape, Var};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Largest `|analytic - numeric| / max(1e-8, |analytic| + |numeric|)`.
    pub max_rel_error: f64,
    /// Parameter name and flat index where the maximum occurred.
    pub worst: Option<(String, usize)>,
    /// Analytic and numeric derivative at `worst`.
    pub worst_values: (f64, f64),
    /// [`Tape::kink_margin`] of the unperturbed evaluation.
    pub kink_margin: f64,
    pub coordinates: usize,
    /// Loss at the probe point.
    pub loss: f64,
    /// Smallest nonzero `|analytic|` component, infinite if there is none.
    pub min_nonzero_gradient: f64,
    pub step: f64,
}

impl GradCheckReport {
    /// Whether a one-ulp error in each loss evaluation keeps every nonzero
    /// component's relative error at least 4x below `tol`. Below that the
    /// central difference measures rounding, not the derivative.
    pub fn resolvable(&self, tol: f64) -> bool {
        let noise = f64::EPSILON * self.loss.abs().max(1.0) / self.step;
        2.0 * tol * self.min_nonzero_gradient >= 4.0 * noise
    }
}

/// Compares reverse-mode gradients of `f` against central differences with
/// step `h`, coordinate by coordinate over every parameter in `store`.
///
/// `f` must record a scalar on the tape it is given, reading parameters
/// through [`Tape::param`].
pub fn finite_difference_check<F>(f: F, store: &mut ParamStore, h: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    store.zero_grads();
    let mut tape = Tape::new();
    let out = f(&mut tape, store)?;
    let loss = tape.value(out).item()?;
    tape.backward(out, store)?;
    let kink_margin = tape.kink_margin();
    drop(tape);
    let min_nonzero_gradient = store
        .ids()
        .flat_map(|id| store.grad(id).data().iter().map(|g| g.abs()))
        .filter(|&g| g > 0.0)
        .fold(f64::INFINITY, f64::min);

    let eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let out = f(&mut tape, store)?;
        tape.value(out).item()
    };

    let ids: Vec<ParamId> = store.ids().collect();
    let mut max_rel_error = 0.0f64;
    let mut worst = None;
    let mut worst_values = (0.0, 0.0);
    let mut coordinates = 0;
    for id in ids {
        for i in 0..store.value(id).len() {
            let orig = store.value(id).data()[i];
            store.value_mut(id).data_mut()[i] = orig + h;
            let up = eval(store)?;
            store.value_mut(id).data_mut()[i] = orig - h;
            let down = eval(store)?;
            store.value_mut(id).data_mut()[i] = orig;

            let numeric = (up - down) / (2.0 * h);
            let analytic = store.grad(id).data()[i];
            let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8);
            coordinates += 1;
            if rel > max_rel_error {
                max_rel_error = rel;
                worst = Some((store.name(id).to_string(), i));
                worst_values = (analytic, numeric);
            }
        }
    }
    store.zero_grads();
    Ok(GradCheckReport {
        max_rel_error,
        worst,
        worst_values,
        kink_margin,
        coordinates,
        loss,
        min_nonzero_gradient,
        step: h,
    })
}
