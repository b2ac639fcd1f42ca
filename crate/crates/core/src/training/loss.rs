use crate::error::{Error, Result};
use crate::network::{ItsParameters, ParamKind};
use crate::tensor::{Tape, Tensor, Var};
use crate::text::LabelVector;

/// Probabilities are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const EPS: f64 = 1e-12;

/// Mean binary cross-entropy over the sentences of one document.
pub fn label_loss(tape: &mut Tape, scores: Var, labels: &LabelVector) -> Result<Var> {
    let n = tape.value(scores).len();
    if n != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{n} scores but {} labels",
            labels.len()
        )));
    }
    let targets: Vec<f64> = labels.as_slice().iter().map(|&b| f64::from(b)).collect();
    let y = tape.constant(Tensor::new(vec![n], targets.clone())?);
    let not_y = tape.constant(Tensor::new(vec![n], targets.iter().map(|t| 1.0 - t).collect())?);

    let p = tape.clamp(scores, EPS, 1.0 - EPS);
    let log_p = tape.ln(p);
    let q = tape.one_minus(p);
    let log_q = tape.ln(q);
    let pos = tape.mul(y, log_p)?;
    let neg = tape.mul(not_y, log_q)?;
    let ll = tape.add(pos, neg)?;
    let mean = tape.mean_axis(ll, 0)?;
    Ok(tape.scale(mean, -1.0))
}

/// Plain-number version of [`label_loss`].
pub fn loss(scores: &[f64], labels: &LabelVector) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let total: f64 = scores
        .iter()
        .zip(labels.as_slice())
        .map(|(&s, &y)| {
            let p = s.clamp(EPS, 1.0 - EPS);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(total / scores.len() as f64)
}

/// `coef * sum ||w||^2` over every non-bias parameter. `None` when `coef` is 0.
pub fn l2_penalty(tape: &mut Tape, params: &ItsParameters, vars: &[Var], coef: f64) -> Result<Option<Var>> {
    if coef == 0.0 {
        return Ok(None);
    }
    let mut total: Option<Var> = None;
    for id in params.ids() {
        if !params.spec(id).kind.regularized() {
            continue;
        }
        let sq = tape.sum_sq(vars[id.0]);
        total = Some(match total {
            Some(t) => tape.add(t, sq)?,
            None => sq,
        });
    }
    Ok(total.map(|t| tape.scale(t, coef)))
}

/// Names of the parameters the L2 penalty reads.
pub fn regularized_names(params: &ItsParameters) -> Vec<&str> {
    params
        .ids()
        .filter(|&id| params.spec(id).kind != ParamKind::Bias)
        .map(|id| params.spec(id).name.as_str())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(bits: &[u8]) -> LabelVector {
        LabelVector::new(bits.to_vec())
    }

    #[test]
    fn perfect_prediction_is_near_zero() {
        let l = loss(&[1.0 - EPS], &labels(&[1])).unwrap();
        assert!(l < 1e-11, "{l}");
    }

    #[test]
    fn coin_flip_costs_ln_two() {
        let l = loss(&[0.5], &labels(&[1])).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        let l = loss(&[0.5, 0.5], &labels(&[1, 0])).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch_errors() {
        assert!(loss(&[0.5], &labels(&[1, 0])).is_err());
        let mut tape = Tape::new();
        let s = tape.param(Tensor::vector(&[0.5]));
        assert!(label_loss(&mut tape, s, &labels(&[1, 0])).is_err());
    }

    #[test]
    fn taped_loss_matches_plain() {
        let scores = [0.2, 0.9, 0.6];
        let l = labels(&[0, 1, 1]);
        let mut tape = Tape::new();
        let s = tape.param(Tensor::vector(&scores));
        let out = label_loss(&mut tape, s, &l).unwrap();
        let taped = tape.value(out).item().unwrap();
        assert!((taped - loss(&scores, &l).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn clamped_extremes_stay_finite() {
        let l = loss(&[0.0, 1.0], &labels(&[1, 0])).unwrap();
        assert!(l.is_finite() && l > 0.0);
    }
}
