use std::fmt;

use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Central finite-difference settings.
#[derive(Clone, Copy, Debug)]
pub struct GradCheck {
    pub step: f64,
    pub tol: f64,
    /// Lower bound on the relative-error denominator, so coordinates whose
    /// gradient is numerically zero are judged on absolute error.
    pub floor: f64,
}

impl Default for GradCheck {
    fn default() -> Self {
        GradCheck {
            step: 1e-5,
            tol: 1e-6,
            floor: 1e-6,
        }
    }
}

impl GradCheck {
    pub fn relative_error(&self, analytic: f64, numeric: f64) -> f64 {
        let denom = analytic.abs().max(numeric.abs()).max(self.floor);
        (analytic - numeric).abs() / denom
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckRow {
    pub coordinate: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub rows: Vec<GradCheckRow>,
    pub max_rel_err: f64,
    pub tol: f64,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn from_rows(rows: Vec<GradCheckRow>, tol: f64) -> Self {
        let max_rel_err = rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);
        GradCheckReport {
            rows,
            max_rel_err,
            tol,
            passed: max_rel_err < tol,
        }
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>10}  {:>22}  {:>22}  {:>10}",
            "coordinate", "analytic", "numeric", "rel-err"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>10}  {:>22.15e}  {:>22.15e}  {:>10.3e}",
                r.coordinate, r.analytic, r.numeric, r.rel_err
            )?;
        }
        write!(
            f,
            "max rel-err {:.3e} (tol {:.1e}): {}",
            self.max_rel_err,
            self.tol,
            if self.passed { "pass" } else { "FAIL" }
        )
    }
}

/// Compares the tape gradient of a scalar function against central differences.
///
/// `f` builds its graph on the supplied tape from the input variable and
/// returns the scalar output.
pub fn grad_check<F>(f: F, point: &Tensor, settings: GradCheck) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    if settings.step.is_nan() || settings.step <= 0.0 {
        return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
    }
    let mut tape = Tape::new();
    let x = tape.param(point.clone());
    let out = f(&mut tape, x)?;
    if tape.value(out).len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "grad_check needs a scalar function, got shape {:?}",
            tape.value(out).shape()
        )));
    }
    let analytic = if tape.is_taped(out) {
        tape.backward(out)?.wrt(x)
    } else {
        Tensor::zeros(point.shape())
    };

    let eval = |values: Vec<f64>| -> Result<f64> {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_parts(point.shape().to_vec(), values));
        let out = f(&mut tape, x)?;
        tape.value(out).item()
    };

    let mut rows = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        let mut plus = point.to_vec();
        let mut minus = point.to_vec();
        plus[i] += settings.step;
        minus[i] -= settings.step;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * settings.step);
        let a = analytic.data()[i];
        rows.push(GradCheckRow {
            coordinate: i,
            analytic: a,
            numeric,
            rel_err: settings.relative_error(a, numeric),
        });
    }
    Ok(GradCheckReport::from_rows(rows, settings.tol))
}
