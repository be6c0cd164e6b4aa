//! Stepsize rules for the stochastic subgradient projection method and a
//! registry that builds them by name.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{Result, SspError};

/// Supremum of admissible `α` with `0 < α ≤ α(2−αL) < 1`.
pub fn stepsize_upper_bound_convex(l: f64) -> f64 {
    if l == 0.0 {
        0.5
    } else {
        (1.0 - (1.0 - l).max(0.0).sqrt()) / l
    }
}

/// `α_k = min(1/L, 8/(μ(k+1)))`, with `1/L = ∞` when `L = 0`.
pub fn stepsize_switching(k: usize, l: f64, mu: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(SspError::config("switching stepsize needs mu > 0"));
    }
    let tail = 8.0 / (mu * (k as f64 + 1.0));
    Ok(if l > 0.0 { tail.min(1.0 / l) } else { tail })
}

/// `k₀ = ⌈8L/μ⌉`, the last iteration of the constant phase.
pub fn switching_k0(l: f64, mu: f64) -> usize {
    (8.0 * l / mu).ceil() as usize
}

/// How iterates are combined into the reported point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AveragingMode {
    /// Weights `α_j(2 − α_j L)`.
    ConvexWeighted {
        l: f64,
    },
    /// Weights `(j+1)²` for `j > k₀`.
    StronglyConvexWeighted {
        k0: usize,
    },
    LastIterate,
}

pub trait StepsizeRule: Send + Sync + Debug {
    fn name(&self) -> &'static str;

    /// Stepsize used at iteration `k ≥ 0`.
    fn alpha(&self, k: usize) -> f64;

    /// Averaging scheme paired with this rule by default.
    fn default_averaging(&self) -> AveragingMode;
}

/// `α_k = α₀/(k+1)^γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialDecay {
    pub alpha0: f64,
    pub gamma: f64,
    pub l: f64,
}

impl PolynomialDecay {
    pub fn new(alpha0: f64, gamma: f64, l: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(SspError::config("gamma must lie in [0, 1)"));
        }
        if !(l >= 0.0) {
            return Err(SspError::config("L must be nonnegative"));
        }
        let ub = stepsize_upper_bound_convex(l);
        if !(alpha0 > 0.0 && alpha0 < ub) {
            return Err(SspError::config(format!(
                "alpha0 = {alpha0} must lie in (0, {ub}) for L = {l}"
            )));
        }
        Ok(Self { alpha0, gamma, l })
    }

    /// `γ = 1/2` and `α₀ = 0.9 × stepsize_upper_bound_convex(L)`.
    pub fn with_defaults(l: f64) -> Result<Self> {
        Self::new(0.9 * stepsize_upper_bound_convex(l), 0.5, l)
    }
}

impl StepsizeRule for PolynomialDecay {
    fn name(&self) -> &'static str {
        "poly"
    }

    fn alpha(&self, k: usize) -> f64 {
        self.alpha0 / (k as f64 + 1.0).powf(self.gamma)
    }

    fn default_averaging(&self) -> AveragingMode {
        AveragingMode::ConvexWeighted { l: self.l }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SwitchingStronglyConvex {
    pub l: f64,
    pub mu: f64,
}

impl SwitchingStronglyConvex {
    pub fn new(l: f64, mu: f64) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(SspError::config("switching stepsize needs mu > 0"));
        }
        if !(l >= 0.0) {
            return Err(SspError::config("L must be nonnegative"));
        }
        Ok(Self { l, mu })
    }

    pub fn k0(&self) -> usize {
        switching_k0(self.l, self.mu)
    }
}

impl StepsizeRule for SwitchingStronglyConvex {
    fn name(&self) -> &'static str {
        "switch"
    }

    fn alpha(&self, k: usize) -> f64 {
        stepsize_switching(k, self.l, self.mu).expect("mu validated at construction")
    }

    fn default_averaging(&self) -> AveragingMode {
        AveragingMode::StronglyConvexWeighted { k0: self.k0() }
    }
}

/// Fixed `α`. With `L` or `μ` given, enforces `α < min(1/L, 4/μ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Constant {
    pub alpha: f64,
}

impl Constant {
    pub fn new(alpha: f64, l: Option<f64>, mu: Option<f64>) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(SspError::config("constant stepsize must be positive"));
        }
        let cap = constant_cap(l, mu);
        if alpha >= cap {
            return Err(SspError::config(format!(
                "constant stepsize {alpha} must be below {cap}"
            )));
        }
        Ok(Self { alpha })
    }
}

fn constant_cap(l: Option<f64>, mu: Option<f64>) -> f64 {
    let by_l = l.filter(|l| *l > 0.0).map_or(f64::INFINITY, |l| 1.0 / l);
    let by_mu = mu.filter(|m| *m > 0.0).map_or(f64::INFINITY, |m| 4.0 / m);
    by_l.min(by_mu)
}

impl StepsizeRule for Constant {
    fn name(&self) -> &'static str {
        "const"
    }

    fn alpha(&self, _k: usize) -> f64 {
        self.alpha
    }

    fn default_averaging(&self) -> AveragingMode {
        AveragingMode::LastIterate
    }
}

/// Inputs from which a named rule is constructed. Unset fields fall back to
/// each rule's defaults.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepsizeParams {
    pub alpha0: Option<f64>,
    pub gamma: Option<f64>,
    pub l: Option<f64>,
    pub mu: Option<f64>,
}

pub type StepsizeCtor = fn(&StepsizeParams) -> Result<Arc<dyn StepsizeRule>>;

/// Name → constructor table for stepsize rules.
#[derive(Clone)]
pub struct StepsizeRegistry {
    entries: BTreeMap<&'static str, StepsizeCtor>,
}

impl StepsizeRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    /// `poly`, `switch` and `const`.
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("poly", build_poly);
        r.register("switch", build_switch);
        r.register("const", build_const);
        r
    }

    pub fn register(&mut self, name: &'static str, ctor: StepsizeCtor) {
        self.entries.insert(name, ctor);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    pub fn build(&self, name: &str, params: &StepsizeParams) -> Result<Arc<dyn StepsizeRule>> {
        let ctor = self.entries.get(name).ok_or_else(|| {
            let known: Vec<_> = self.names().collect();
            SspError::config(format!(
                "unknown stepsize policy '{name}' (known: {})",
                known.join(", ")
            ))
        })?;
        ctor(params)
    }
}

impl Default for StepsizeRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

fn build_poly(p: &StepsizeParams) -> Result<Arc<dyn StepsizeRule>> {
    let l = p.l.unwrap_or(0.0);
    let alpha0 = p.alpha0.unwrap_or(0.9 * stepsize_upper_bound_convex(l));
    Ok(Arc::new(PolynomialDecay::new(alpha0, p.gamma.unwrap_or(0.5), l)?))
}

fn build_switch(p: &StepsizeParams) -> Result<Arc<dyn StepsizeRule>> {
    let mu = p.mu.ok_or_else(|| SspError::config("switch policy needs --mu"))?;
    Ok(Arc::new(SwitchingStronglyConvex::new(p.l.unwrap_or(0.0), mu)?))
}

fn build_const(p: &StepsizeParams) -> Result<Arc<dyn StepsizeRule>> {
    let alpha = match p.alpha0 {
        Some(a) => a,
        None => {
            let cap = constant_cap(p.l, p.mu);
            if cap.is_finite() {
                0.9 * cap
            } else {
                return Err(SspError::config("const policy needs --alpha0, --L or --mu"));
            }
        }
    };
    Ok(Arc::new(Constant::new(alpha, p.l, p.mu)?))
}
