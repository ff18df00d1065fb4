//! Finite-difference descent for render-based losses.
//!
//! Renders are piecewise constant in the parameters, so the optimizer uses
//! central differences with a fixed probe step, zeroing coordinates where
//! both probes raise the loss, and takes max-norm normalized
//! steps: the largest coordinate moves by `lr * scale_ref`, others
//! proportionally. A step is accepted only if it strictly lowers the loss;
//! otherwise it is halved up to `MAX_HALVINGS` times, and after a fully
//! rejected iteration the base step stays halved.

use nalgebra::DVector;

use crate::error::{invalid, Result};
use crate::par;

pub const MAX_HALVINGS: usize = 8;
/// Probe step as a fraction of the reference scale (box diagonal).
pub const PROBE_STEP: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DescentConfig {
    pub iters: usize,
    pub lr: f64,
}

impl DescentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iters == 0 {
            return Err(invalid("need at least one iteration"));
        }
        if !(self.lr > 0.0) {
            return Err(invalid("learning rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct DescentReport {
    pub params: DVector<f64>,
    /// Loss at the start and after every accepted step.
    pub losses: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
}

impl DescentReport {
    pub fn final_loss(&self) -> f64 {
        *self
            .losses
            .last()
            .expect("losses start with the initial value")
    }
}

/// Minimizes `loss` starting at `start`.
pub fn descend<F>(
    start: DVector<f64>,
    scale_ref: f64,
    config: &DescentConfig,
    loss: F,
) -> Result<DescentReport>
where
    F: Fn(&DVector<f64>) -> Result<f64> + Sync,
{
    config.validate()?;
    let h = PROBE_STEP * scale_ref;
    let mut current = start;
    let mut current_loss = loss(&current)?;
    let mut losses = vec![current_loss];
    let mut evaluations = 1;
    let mut base = config.lr * scale_ref;
    let min_step = 1e-3 * h;
    let mut iterations = 0;

    while iterations < config.iters {
        iterations += 1;
        if current_loss == 0.0 || base < min_step {
            break;
        }
        let n = current.len();
        let probes = par::map_range(n, |k| -> Result<f64> {
            let mut plus = current.clone();
            plus[k] += h;
            let mut minus = current.clone();
            minus[k] -= h;
            let (up, down) = (loss(&plus)?, loss(&minus)?);
            // a coordinate sitting in a kink: both sides are worse
            if up > current_loss && down > current_loss {
                return Ok(0.0);
            }
            Ok((up - down) / (2.0 * h))
        });
        evaluations += 2 * n;
        let grad = DVector::from_iterator(n, probes.into_iter().collect::<Result<Vec<_>>>()?);
        let gmax = grad.amax();
        if gmax == 0.0 {
            break;
        }
        let direction = grad / gmax;

        let mut step = base;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let trial = &current - &direction * step;
            let trial_loss = loss(&trial)?;
            evaluations += 1;
            if trial_loss < current_loss {
                current = trial;
                current_loss = trial_loss;
                losses.push(current_loss);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            base *= 0.5;
        }
    }
    Ok(DescentReport {
        params: current,
        losses,
        iterations,
        evaluations,
    })
}
