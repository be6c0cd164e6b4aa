//! Closed-form prox maps, projections onto simple sets, and the Polyak
//! feasibility step.

use log::warn;

use crate::error::{Result, SspError};
use crate::linalg::{axpy, dot, norm, norm_sq};

/// Squared gradient norms below this are treated as zero by [`polyak_step`].
pub const MIN_GRAD_NORM_SQ: f64 = 1e-300;

/// Relative slack used by the membership test of halfspaces and hyperplanes;
/// their projections are not exact in floating point.
const AFFINE_MEMBERSHIP_TOL: f64 = 1e-12;

/// A set with a cheap Euclidean projection.
#[derive(Clone, Debug, PartialEq)]
pub enum SimpleSet {
    WholeSpace,
    NonnegativeOrthant,
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    /// `{x : cᵀx ≤ d}`
    Halfspace {
        c: Vec<f64>,
        d: f64,
    },
    /// `{x : cᵀx = d}`
    Hyperplane {
        c: Vec<f64>,
        d: f64,
    },
    /// `{x : x_i ≥ 0 for i in indices}`, other coordinates free.
    NonnegativeCoords(Vec<usize>),
}

impl SimpleSet {
    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let set = SimpleSet::Box { lower, upper };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SimpleSet::Box { lower, upper } => {
                if lower.len() != upper.len() {
                    return Err(SspError::dimension("box bounds differ in length"));
                }
                if let Some(i) = lower.iter().zip(upper).position(|(l, u)| l > u) {
                    return Err(SspError::config(format!(
                        "box lower bound exceeds upper bound at coordinate {i}"
                    )));
                }
                Ok(())
            }
            SimpleSet::Halfspace { c, .. } | SimpleSet::Hyperplane { c, .. } => {
                if norm_sq(c) == 0.0 {
                    return Err(SspError::config("halfspace/hyperplane normal is zero"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Projects `v` in place.
    pub fn project_in_place(&self, v: &mut [f64]) {
        match self {
            SimpleSet::WholeSpace => {}
            SimpleSet::NonnegativeOrthant => v.iter_mut().for_each(|x| *x = x.max(0.0)),
            SimpleSet::Box { lower, upper } => {
                for ((x, l), u) in v.iter_mut().zip(lower).zip(upper) {
                    *x = x.clamp(*l, *u);
                }
            }
            SimpleSet::Halfspace { c, d } => {
                let excess = dot(c, v) - d;
                if excess > 0.0 {
                    axpy(-excess / norm_sq(c), c, v);
                }
            }
            SimpleSet::Hyperplane { c, d } => {
                let excess = dot(c, v) - d;
                axpy(-excess / norm_sq(c), c, v);
            }
            SimpleSet::NonnegativeCoords(idx) => {
                for &i in idx {
                    v[i] = v[i].max(0.0);
                }
            }
        }
    }

    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        self.project_in_place(&mut out);
        out
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            SimpleSet::WholeSpace => true,
            SimpleSet::NonnegativeOrthant => x.iter().all(|v| *v >= 0.0),
            SimpleSet::Box { lower, upper } => x.iter().zip(lower).zip(upper).all(|((v, l), u)| *v >= *l && *v <= *u),
            SimpleSet::Halfspace { c, d } => dot(c, x) - d <= AFFINE_MEMBERSHIP_TOL * affine_scale(c, x, *d),
            SimpleSet::Hyperplane { c, d } => (dot(c, x) - d).abs() <= AFFINE_MEMBERSHIP_TOL * affine_scale(c, x, *d),
            SimpleSet::NonnegativeCoords(idx) => idx.iter().all(|&i| x[i] >= 0.0),
        }
    }
}

fn affine_scale(c: &[f64], x: &[f64], d: f64) -> f64 {
    1.0 + norm(c) * norm(x) + d.abs()
}

/// Free-function form of [`SimpleSet::project`].
pub fn project(set: &SimpleSet, v: &[f64]) -> Vec<f64> {
    set.project(v)
}

/// Prox of `weight·γ·‖·‖₁`: componentwise shrinkage towards zero.
pub fn soft_threshold(x: &[f64], gamma: f64, weight: f64) -> Vec<f64> {
    let mut out = x.to_vec();
    soft_threshold_in_place(&mut out, gamma * weight);
    out
}

pub fn soft_threshold_in_place(x: &mut [f64], threshold: f64) {
    for v in x.iter_mut() {
        *v = v.signum() * (v.abs() - threshold).max(0.0);
        if *v == 0.0 {
            // normalize -0.0
            *v = 0.0;
        }
    }
}

/// `v − β·h₊/‖g‖²·g`, the identity when `h₊ = 0`.
pub fn polyak_step(v: &[f64], h_plus: f64, grad_h: &[f64], beta: f64) -> Result<Vec<f64>> {
    let mut out = v.to_vec();
    polyak_step_in_place(&mut out, h_plus, grad_h, beta)?;
    Ok(out)
}

pub fn polyak_step_in_place(v: &mut [f64], h_plus: f64, grad_h: &[f64], beta: f64) -> Result<()> {
    if h_plus <= 0.0 {
        return Ok(());
    }
    let g2 = norm_sq(grad_h);
    if g2 == 0.0 {
        return Err(SspError::InconsistentOracle(format!(
            "constraint violated by {h_plus} but its subgradient is zero"
        )));
    }
    if g2 < MIN_GRAD_NORM_SQ {
        warn!("constraint subgradient norm² {g2:e} below guard; skipping feasibility step");
        return Ok(());
    }
    axpy(-beta * h_plus / g2, grad_h, v);
    Ok(())
}

/// One robust-margin constraint: center `z`, label `y`, diagonal shape `q`
/// of the ellipsoid `{z̄ : (z̄−z)ᵀQ(z̄−z) ≤ 1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SocDatum {
    pub z: Vec<f64>,
    pub y: f64,
    pub q_diag: Vec<f64>,
}

impl SocDatum {
    pub fn new(z: Vec<f64>, y: f64, q_diag: Vec<f64>) -> Result<Self> {
        if z.len() != q_diag.len() {
            return Err(SspError::dimension("SOC center and shape differ in length"));
        }
        if q_diag.iter().any(|q| !(*q > 0.0) || !q.is_finite()) {
            return Err(SspError::config("SOC shape diagonal must be strictly positive"));
        }
        Ok(Self { z, y, q_diag })
    }

    /// `‖Q^{-1/2}w‖`
    pub fn scaled_norm(&self, w: &[f64]) -> f64 {
        w.iter()
            .zip(&self.q_diag)
            .map(|(wi, qi)| wi * wi / qi)
            .sum::<f64>()
            .sqrt()
    }
}

/// Value and subgradient of `h = ‖Q^{-1/2}w‖ + 1 − u − y(wᵀz + d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SocEval {
    pub value: f64,
    pub grad_w: Vec<f64>,
    pub grad_d: f64,
    pub grad_u: f64,
}

pub fn soc_eval_subgrad(w: &[f64], d: f64, u: f64, datum: &SocDatum) -> SocEval {
    let s = datum.scaled_norm(w);
    let margin = datum.y * (dot(w, &datum.z) + d);
    let grad_w = w
        .iter()
        .zip(&datum.q_diag)
        .zip(&datum.z)
        .map(|((wi, qi), zi)| {
            // subgradient of the norm at w = 0 is taken as 0
            let norm_part = if s > 0.0 { wi / qi / s } else { 0.0 };
            norm_part - datum.y * zi
        })
        .collect();
    SocEval {
        value: s + 1.0 - u - margin,
        grad_w,
        grad_d: -datum.y,
        grad_u: -1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(&[3.0], 1.0, 1.0), vec![2.0]);
        assert_eq!(soft_threshold(&[0.5], 1.0, 1.0), vec![0.0]);
        assert_eq!(soft_threshold(&[-3.0, 0.2], 0.5, 2.0), vec![-2.0, 0.0]);
    }

    #[test]
    fn projection_examples() {
        assert_eq!(SimpleSet::NonnegativeOrthant.project(&[-1.0, 2.0]), vec![0.0, 2.0]);
        let h = SimpleSet::Halfspace {
            c: vec![1.0, 0.0],
            d: 1.0,
        };
        assert_eq!(h.project(&[3.0, 0.0]), vec![1.0, 0.0]);
        assert_eq!(h.project(&[0.0, 0.0]), vec![0.0, 0.0]);
        let b = SimpleSet::boxed(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(b.project(&[2.0, -3.0]), vec![1.0, 0.0]);
        let p = SimpleSet::Hyperplane {
            c: vec![1.0, 1.0],
            d: 2.0,
        };
        assert_eq!(p.project(&[0.0, 0.0]), vec![1.0, 1.0]);
        let nc = SimpleSet::NonnegativeCoords(vec![1]);
        assert_eq!(nc.project(&[-1.0, -1.0]), vec![-1.0, 0.0]);
    }

    #[test]
    fn inverted_box_is_config_error() {
        assert!(matches!(
            SimpleSet::boxed(vec![1.0], vec![0.0]),
            Err(SspError::Config(_))
        ));
    }

    #[test]
    fn polyak_examples() {
        assert_eq!(polyak_step(&[2.0, 0.0], 2.0, &[1.0, 0.0], 1.0).unwrap(), vec![0.0, 0.0]);
        let z = polyak_step(&[2.0, 0.0], 2.0, &[1.0, 0.0], 1.96).unwrap();
        assert!((z[0] + 1.92).abs() < 1e-15 && z[1] == 0.0);
        assert_eq!(polyak_step(&[5.0, 5.0], 0.0, &[3.0, 1.0], 1.0).unwrap(), vec![5.0, 5.0]);
    }

    #[test]
    fn polyak_zero_gradient_is_an_error() {
        assert!(matches!(
            polyak_step(&[1.0], 1.0, &[0.0], 1.0),
            Err(SspError::InconsistentOracle(_))
        ));
    }

    #[test]
    fn polyak_tiny_gradient_is_identity() {
        assert_eq!(polyak_step(&[1.0], 1.0, &[1e-160], 1.0).unwrap(), vec![1.0]);
    }

    #[test]
    fn soc_examples() {
        let datum = SocDatum::new(vec![2.0, 0.0], 1.0, vec![1.0, 1.0]).unwrap();
        let e = soc_eval_subgrad(&[1.0, 0.0], 0.0, 0.0, &datum);
        assert_eq!(e.value, 0.0);
        assert_eq!(e.grad_w, vec![-1.0, 0.0]);
        assert_eq!((e.grad_d, e.grad_u), (-1.0, -1.0));

        let datum = SocDatum::new(vec![1.0, 1.0], 1.0, vec![1.0, 1.0]).unwrap();
        let e = soc_eval_subgrad(&[0.0, 0.0], 0.0, 0.0, &datum);
        assert_eq!(e.value, 1.0);
        assert_eq!(e.grad_w, vec![-1.0, -1.0]);
    }

    #[test]
    fn soc_rejects_nonpositive_shape() {
        assert!(SocDatum::new(vec![0.0], 1.0, vec![0.0]).is_err());
        assert!(SocDatum::new(vec![0.0], 1.0, vec![-1.0]).is_err());
    }
}
