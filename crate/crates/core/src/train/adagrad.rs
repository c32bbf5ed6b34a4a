use ndarray::{Array2, Zip};

use crate::error::{Error, Result};
use crate::localclf::ParamMatrix;

use super::{Objective, TrainConfig};

/// Per-coordinate step sizes from accumulated squared gradients:
/// `theta -= eta * g / (eps + sqrt(sum g^2))`.
#[derive(Clone, Debug)]
pub struct Adagrad {
    eta: f64,
    epsilon: f64,
    accumulator: Array2<f64>,
}

impl Adagrad {
    pub fn new(shape: (usize, usize), eta: f64, epsilon: f64) -> Self {
        Adagrad {
            eta,
            epsilon,
            accumulator: Array2::zeros(shape),
        }
    }

    pub fn step(&mut self, theta: &mut Array2<f64>, grad: &Array2<f64>) {
        let (eta, eps) = (self.eta, self.epsilon);
        Zip::from(theta)
            .and(&mut self.accumulator)
            .and(grad)
            .for_each(|w, acc, &g| {
                *acc += g * g;
                *w -= eta * g / (eps + acc.sqrt());
            });
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub params: ParamMatrix,
    /// Objective value before each step, followed by the final value
    /// (`iterations + 1` entries).
    pub loss_history: Vec<f64>,
}

/// Minimizes `objective` with adagrad from `init`.
pub fn adagrad_fit(
    objective: &dyn Objective,
    init: ParamMatrix,
    config: &TrainConfig,
) -> Result<FitResult> {
    let mut params = init;
    let mut optimizer = Adagrad::new(params.theta().dim(), config.eta, config.epsilon);
    let mut loss_history = Vec::with_capacity(config.iterations + 1);
    for step in 0..config.iterations {
        let (loss, grad) = objective.loss_and_gradient(&params)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { step, loss });
        }
        loss_history.push(loss);
        optimizer.step(params.theta_mut(), &grad);
    }
    let loss = objective.loss(&params)?;
    if !loss.is_finite() {
        return Err(Error::Diverged {
            step: config.iterations,
            loss,
        });
    }
    loss_history.push(loss);
    Ok(FitResult {
        params,
        loss_history,
    })
}
