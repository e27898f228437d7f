use super::param::ParamStore;
use super::tape::{Tape, Var};
use super::tensor::Precision;
use crate::error::Result;

/// Largest error observed for one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradError {
    pub name: String,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub params: Vec<ParamGradError>,
    pub tolerance: f64,
}

impl GradcheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.max_rel_err)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_err() < self.tolerance
    }

    pub fn failures(&self) -> impl Iterator<Item = &ParamGradError> {
        self.params
            .iter()
            .filter(|p| p.max_rel_err >= self.tolerance)
    }
}

/// Denominator floor for the relative error, so that near-zero gradients are
/// compared on an absolute scale of `1e-3 · tolerance`.
pub const REL_ERR_FLOOR: f64 = 1e-3;

/// Compares tape gradients against central differences for every scalar of
/// every parameter in `store`.
///
/// `f` must build the same computation on each call; stochastic pieces
/// should recreate their random stream from a fixed seed inside `f`.
/// Relative error is `|analytic − numeric| / max(|analytic|, |numeric|, REL_ERR_FLOOR)`.
pub fn gradcheck<F>(store: &mut ParamStore, f: F, h: f64, tolerance: f64) -> Result<GradcheckReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    store.zero_grads();
    let mut tape = Tape::new(Precision::F64);
    let loss = f(&mut tape, store)?;
    tape.backward(loss, store)?;
    let analytic: Vec<Vec<f64>> = store.iter().map(|p| p.grad.data().to_vec()).collect();
    store.zero_grads();

    let eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new(Precision::F64);
        let loss = f(&mut tape, store)?;
        tape.value(loss).item()
    };

    let ids: Vec<_> = store.ids().collect();
    let mut params = Vec::with_capacity(ids.len());
    for (id, grads) in ids.into_iter().zip(analytic) {
        let mut max_rel: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        for (k, &a) in grads.iter().enumerate() {
            let orig = store.value(id).data()[k];
            store.get_mut(id).value.data_mut()[k] = orig + h;
            let plus = eval(store)?;
            store.get_mut(id).value.data_mut()[k] = orig - h;
            let minus = eval(store)?;
            store.get_mut(id).value.data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(REL_ERR_FLOOR);
            max_rel = max_rel.max(rel);
            max_abs = max_abs.max(abs);
        }
        params.push(ParamGradError {
            name: store.get(id).name.clone(),
            max_rel_err: max_rel,
            max_abs_err: max_abs,
        });
    }
    Ok(GradcheckReport { params, tolerance })
}
