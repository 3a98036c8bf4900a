//! Central-difference gradient verification.

use super::tape::{ParamId, Tape, Var};
use super::{NumericsError, Tensor};

#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    /// max over components of `|analytic − numeric| / max(1, |numeric|)`
    pub max_rel_error: f64,
    /// `(parameter index, component)` of the worst component.
    pub worst: (usize, usize),
    pub components: usize,
}

/// Compares tape gradients of `f` with central differences of step `eps`.
///
/// `f` receives a fresh tape plus one [`Var`] per entry of `params` and must
/// return a scalar. It has to be deterministic in its inputs.
pub fn grad_check<F>(f: F, params: &[Tensor], eps: f64) -> Result<GradCheckReport, NumericsError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, NumericsError>,
{
    let eval = |ps: &[Tensor]| -> Result<(Tape, Vec<Var>, Var), NumericsError> {
        let mut tape = Tape::new();
        let vars = ps
            .iter()
            .enumerate()
            .map(|(i, p)| tape.param(ParamId(i), p))
            .collect::<Result<Vec<_>, _>>()?;
        let loss = f(&mut tape, &vars)?;
        Ok((tape, vars, loss))
    };

    let (mut tape, _, loss) = eval(params)?;
    let analytic = tape.backward(loss)?;

    let mut report = GradCheckReport { max_rel_error: 0.0, worst: (0, 0), components: 0 };
    let mut work = params.to_vec();
    for (pi, p) in params.iter().enumerate() {
        let g = analytic.get(ParamId(pi)).expect("registered parameter");
        for ci in 0..p.len() {
            let orig = p.data()[ci];
            work[pi].data_mut()[ci] = orig + eps;
            let (t, _, l) = eval(&work)?;
            let plus = t.value(l).item();
            work[pi].data_mut()[ci] = orig - eps;
            let (t, _, l) = eval(&work)?;
            let minus = t.value(l).item();
            work[pi].data_mut()[ci] = orig;

            let numeric = (plus - minus) / (2.0 * eps);
            if !numeric.is_finite() {
                return Err(NumericsError::NonFinite("finite difference"));
            }
            let rel = (g.data()[ci] - numeric).abs() / numeric.abs().max(1.0);
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = (pi, ci);
            }
            report.components += 1;
        }
    }
    Ok(report)
}
