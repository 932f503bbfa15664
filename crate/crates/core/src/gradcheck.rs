//! Randomized analytic-versus-finite-difference derivative checks.
//!
//! The suite draws random inputs and compares every hand-written derivative
//! in the crate against central differences:
//!
//! - Jacobians of softmax, `S_flat` and `S_exp` for widths 2–16;
//! - gradients of each regression loss, the sign cross-entropy and the joint
//!   loss;
//! - parameter gradients of small two-branch models (< 500 parameters) for
//!   every head mode and each loss that mode accepts.
//!
//! Gradients are compared against the five-point central stencil, whose
//! `O(eps⁴)` error stays below the tolerances even where the loss curves
//! sharply (small `p` under cross-entropy on squares, small `‖O‖` under
//! `S_flat`). Jacobians use the three-point stencil.
//!
//! Draws that sit within [`KINK_MARGIN`] of a non-differentiable point (a
//! ReLU hinge, the smooth-L1 switch, `|p| = 0` for `S_flat`) are redrawn.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::activations::{grad_check, ActivationKind};
use crate::heads::{joint_loss, sign_xent_loss, unit, RegressionLoss, SphereKind};
use crate::network::{MlpModel, Objective, Sample};
use crate::numeric::{fd_gradient5, relative_error, DenseVector, Rng, DEFAULT_FD_EPS};
use crate::{Error, Result};

/// Relative tolerance for activation and loss derivatives.
pub const FUNCTION_TOL: f64 = 1e-6;
/// Relative tolerance for full-model parameter gradients.
pub const MODEL_TOL: f64 = 1e-5;
/// Minimum distance from a kink for a draw to count.
pub const KINK_MARGIN: f64 = 1e-3;
/// Widest activation / loss input drawn.
pub const MAX_DIM: usize = 16;
/// Parameter budget of the models checked.
pub const MAX_PARAMS: usize = 500;

const MODEL_INPUT: usize = 4;
const MODEL_HIDDEN: [usize; 2] = [8, 6];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    /// Accepted draws per check.
    pub trials: usize,
    pub eps: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            trials: 1000,
            eps: DEFAULT_FD_EPS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub trials: usize,
    /// Draws rejected for lying too close to a kink.
    pub skipped: usize,
    pub max_rel_err: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tolerance
    }
}

fn run_check<F>(name: String, tolerance: f64, cfg: &GradCheckConfig, rng: &mut Rng, mut draw: F) -> Result<CheckResult>
where
    F: FnMut(&mut Rng) -> Result<Option<f64>>,
{
    let mut result = CheckResult {
        name,
        trials: 0,
        skipped: 0,
        max_rel_err: 0.0,
        tolerance,
    };
    // Kinks are measure-zero; a check that keeps rejecting is broken.
    let budget = 20 * cfg.trials.max(1);
    while result.trials < cfg.trials {
        if result.skipped > budget {
            return Err(Error::InvalidArgument(format!(
                "{}: too many draws rejected near kinks",
                result.name
            )));
        }
        match draw(rng)? {
            Some(err) => {
                result.trials += 1;
                result.max_rel_err = result.max_rel_err.max(err);
            }
            None => result.skipped += 1,
        }
    }
    Ok(result)
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| relative_error(*x, *y)).fold(0.0, f64::max)
}

fn random_dim(rng: &mut Rng) -> usize {
    2 + rng.below(MAX_DIM - 1)
}

fn abs_unit(rng: &mut Rng, n: usize) -> Result<Vec<f64>> {
    Ok(unit(&rng.normal_vec(n))?.into_iter().map(libm::fabs).collect())
}

fn check_activation(kind: ActivationKind, cfg: &GradCheckConfig, rng: &mut Rng) -> Result<CheckResult> {
    run_check(format!("jacobian/{}", kind.name()), FUNCTION_TOL, cfg, rng, |rng| {
        let n = random_dim(rng);
        let o = DenseVector::new(rng.normal_vec(n))?;
        grad_check(kind, &o, cfg.eps).map(Some)
    })
}

fn check_loss(loss: RegressionLoss, cfg: &GradCheckConfig, rng: &mut Rng) -> Result<CheckResult> {
    run_check(format!("loss/{}", loss.name()), FUNCTION_TOL, cfg, rng, |rng| {
        let n = random_dim(rng);
        let (pred, target) = match loss {
            RegressionLoss::Cosine | RegressionLoss::L2 => (abs_unit(rng, n)?, abs_unit(rng, n)?),
            RegressionLoss::Xent2 => {
                // Strictly positive predictions, bounded away from zero.
                let p: Vec<f64> = rng.normal_vec(n).into_iter().map(libm::exp).collect();
                (unit(&p)?, unit(&rng.normal_vec(n))?)
            }
            RegressionLoss::SmoothL1 => {
                let o: Vec<f64> = rng.normal_vec(n).into_iter().map(|v| 2.0 * v).collect();
                let y = unit(&rng.normal_vec(n))?;
                if o.iter().zip(&y).any(|(o, y)| libm::fabs(libm::fabs(y - o) - 1.0) < KINK_MARGIN) {
                    return Ok(None);
                }
                (o, y)
            }
        };
        let target = DenseVector::new(target)?;
        let analytic = loss.evaluate(&DenseVector::new(pred.clone())?, &target)?.grad_abs.ok_or(Error::Empty)?;
        let fd = fd_gradient5(
            |x| Ok(loss.evaluate(&DenseVector::from_slice(x)?, &target)?.value),
            &pred,
            cfg.eps,
        )?;
        Ok(Some(max_rel(&analytic, &fd)))
    })
}

fn check_sign_xent(cfg: &GradCheckConfig, rng: &mut Rng) -> Result<CheckResult> {
    run_check("loss/sign_xent".into(), FUNCTION_TOL, cfg, rng, |rng| {
        let n = random_dim(rng);
        let logits = rng.normal_vec(n);
        let class = rng.below(logits.len());
        let analytic = sign_xent_loss(&DenseVector::new(logits.clone())?, class)?
            .grad_logits
            .ok_or(Error::Empty)?;
        let fd = fd_gradient5(
            |x| Ok(sign_xent_loss(&DenseVector::from_slice(x)?, class)?.value),
            &logits,
            cfg.eps,
        )?;
        Ok(Some(max_rel(&analytic, &fd)))
    })
}

fn check_joint(cfg: &GradCheckConfig, rng: &mut Rng) -> Result<CheckResult> {
    run_check("loss/joint".into(), FUNCTION_TOL, cfg, rng, |rng| {
        let n = random_dim(rng);
        let classes = random_dim(rng);
        let p = abs_unit(rng, n)?;
        let y = DenseVector::new(abs_unit(rng, n)?)?;
        let class = rng.below(classes);
        let lambda = 2.0 * rng.uniform();
        let mut x = p;
        x.extend(rng.normal_vec(classes));
        let eval = |x: &[f64]| {
            joint_loss(
                &DenseVector::from_slice(&x[..n])?,
                &y,
                &DenseVector::from_slice(&x[n..])?,
                class,
                lambda,
            )
        };
        let value = eval(&x)?;
        let mut analytic = value.grad_abs.ok_or(Error::Empty)?.into_vec();
        analytic.extend_from_slice(&value.grad_logits.ok_or(Error::Empty)?);
        let fd = fd_gradient5(|x| Ok(eval(x)?.value), &x, cfg.eps)?;
        Ok(Some(max_rel(&analytic, &fd)))
    })
}

/// Regression losses each head mode accepts.
pub fn model_cases() -> Vec<(Option<ActivationKind>, RegressionLoss)> {
    let mut cases = Vec::new();
    for loss in [RegressionLoss::SmoothL1, RegressionLoss::L2, RegressionLoss::Cosine] {
        cases.push((None, loss));
    }
    for loss in [RegressionLoss::Cosine, RegressionLoss::L2] {
        cases.push((Some(ActivationKind::SphericalFlat), loss));
    }
    for loss in [RegressionLoss::Cosine, RegressionLoss::L2, RegressionLoss::Xent2] {
        cases.push((Some(ActivationKind::SphericalExp), loss));
    }
    cases
}

fn check_model(
    activation: Option<ActivationKind>,
    loss: RegressionLoss,
    cfg: &GradCheckConfig,
    rng: &mut Rng,
) -> Result<CheckResult> {
    let mode = activation.map_or("direct", ActivationKind::name);
    let name = format!("model/{mode}/{}", loss.name());
    run_check(name, MODEL_TOL, cfg, rng, |rng| {
        let kind = SphereKind::ALL[rng.below(3)];
        let mut model = MlpModel::new(MODEL_INPUT, &MODEL_HIDDEN, kind, activation, rng)?;
        debug_assert!(model.param_count() <= MAX_PARAMS);
        let y = unit(&rng.normal_vec(kind.dims()))?;
        let sample = Sample {
            features: rng.normal_vec(MODEL_INPUT),
            target: match activation {
                None => y,
                Some(_) => y.into_iter().map(libm::fabs).collect(),
            },
            sign_class: rng.below(kind.sign_classes()),
        };
        let objective = Objective {
            loss,
            lambda: if activation.is_some() { 2.0 * rng.uniform() } else { 0.0 },
        };
        if model.relu_margin(&sample.features)? < KINK_MARGIN {
            return Ok(None);
        }
        let out = match model.forward(&DenseVector::from_slice(&sample.features)?) {
            // Every last-layer unit dead under S_flat: O = 0 has no direction.
            Err(Error::DegenerateDirection) => return Ok(None),
            other => other?,
        };
        let near_kink = match activation {
            None if loss == RegressionLoss::SmoothL1 => out
                .o
                .iter()
                .zip(&sample.target)
                .any(|(o, y)| libm::fabs(libm::fabs(y - o) - 1.0) < KINK_MARGIN),
            Some(ActivationKind::SphericalFlat) => {
                out.o.norm() < KINK_MARGIN || out.p.iter().any(|p| libm::fabs(*p) < KINK_MARGIN)
            }
            _ => false,
        };
        if near_kink {
            return Ok(None);
        }
        let (_, grads, _) = model.sample_gradient(&sample, &objective)?;
        let mut probe = model.clone();
        let fd = fd_gradient5(
            |p| {
                probe.set_parameters(p)?;
                probe.sample_loss(&sample, &objective)
            },
            &model.parameters(),
            cfg.eps,
        )?;
        Ok(Some(max_rel(&grads.flatten(), &fd)))
    })
}

/// Runs every check. Each check draws from its own random stream, so
/// results do not depend on which other checks ran.
pub fn run_suite(cfg: &GradCheckConfig) -> Result<Vec<CheckResult>> {
    if !(cfg.eps > 0.0 && cfg.eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {}", cfg.eps)));
    }
    let mut stream = 0;
    let mut next_rng = || {
        stream += 1;
        Rng::with_stream(cfg.seed, stream)
    };
    let mut results = Vec::new();
    for kind in ActivationKind::ALL {
        results.push(check_activation(kind, cfg, &mut next_rng())?);
    }
    for loss in RegressionLoss::ALL {
        results.push(check_loss(loss, cfg, &mut next_rng())?);
    }
    results.push(check_sign_xent(cfg, &mut next_rng())?);
    results.push(check_joint(cfg, &mut next_rng())?);
    for (activation, loss) in model_cases() {
        results.push(check_model(activation, loss, cfg, &mut next_rng())?);
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_suite_passes() {
        let cfg = GradCheckConfig {
            trials: 40,
            ..GradCheckConfig::default()
        };
        let results = run_suite(&cfg).unwrap();
        assert_eq!(results.len(), 3 + 4 + 2 + model_cases().len());
        for r in &results {
            assert_eq!(r.trials, 40);
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn models_fit_the_parameter_budget() {
        for kind in SphereKind::ALL {
            let m = MlpModel::new(MODEL_INPUT, &MODEL_HIDDEN, kind, None, &mut Rng::new(0)).unwrap();
            assert!(m.param_count() <= MAX_PARAMS);
        }
    }

    #[test]
    fn coarse_step_is_caught() {
        let cfg = GradCheckConfig {
            trials: 20,
            eps: 0.1,
            seed: 1,
        };
        let r = check_activation(ActivationKind::SphericalExp, &cfg, &mut Rng::new(1)).unwrap();
        assert!(!r.passed());
    }

    #[test]
    fn bad_step_is_rejected() {
        let cfg = GradCheckConfig {
            eps: 0.0,
            ..GradCheckConfig::default()
        };
        assert!(run_suite(&cfg).is_err());
    }
}
