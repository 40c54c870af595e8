use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the micro field `ρ(x, ·)` is reduced to the scalar second argument of `f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    /// `(1/|Y|) ∫_Y ρ(x, y) dy`.
    #[default]
    MeanY,
    /// `(1/|Γ_R|) ∫_{Γ_R} ρ(x, y) dσ_y`.
    TraceMean,
}

type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// User-supplied reaction with declared Lipschitz bounds.
#[derive(Clone)]
pub struct CustomReaction {
    pub f: ScalarFn,
    pub df_ds: ScalarFn,
    pub df_dr: ScalarFn,
    pub c_pi: f64,
    pub c_rho: f64,
}

impl fmt::Debug for CustomReaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomReaction")
            .field("c_pi", &self.c_pi)
            .field("c_rho", &self.c_rho)
            .finish()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReactionKind {
    Zero,
    /// `c_f s (1 - s/θ)² (1 + tanh r)/2` on `0 ≤ s ≤ θ`, zero above `θ`, continued as
    /// `c_f s (1 + tanh r)/2` below zero so that `f` stays C¹.
    Standard {
        c_f: f64,
        theta: f64,
    },
    /// `c0 + c_s s + c_r r`. Violates `f(0, r) = 0` unless `c0 = c_r = 0`; meant for
    /// linear diagnostics.
    Affine {
        c0: f64,
        c_s: f64,
        c_r: f64,
    },
    #[serde(skip)]
    Custom(CustomReaction),
}

/// The reaction term `f(π, g(ρ))` of the macroscopic equation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReactionTerm {
    #[serde(flatten)]
    pub kind: ReactionKind,
    #[serde(default)]
    pub reduction: Reduction,
}

impl ReactionTerm {
    pub fn new(kind: ReactionKind, reduction: Reduction) -> Self {
        Self { kind, reduction }
    }

    pub fn zero() -> Self {
        Self::new(ReactionKind::Zero, Reduction::MeanY)
    }

    pub fn standard(c_f: f64, theta: f64) -> Self {
        Self::new(ReactionKind::Standard { c_f, theta }, Reduction::MeanY)
    }

    pub fn affine(c0: f64, c_s: f64, c_r: f64) -> Self {
        Self::new(ReactionKind::Affine { c0, c_s, c_r }, Reduction::MeanY)
    }

    pub fn with_reduction(mut self, reduction: Reduction) -> Self {
        self.reduction = reduction;
        self
    }

    pub fn is_zero(&self) -> bool {
        match self.kind {
            ReactionKind::Zero => true,
            ReactionKind::Affine { c0, c_s, c_r } => c0 == 0.0 && c_s == 0.0 && c_r == 0.0,
            _ => false,
        }
    }

    /// Whether `f` is independent of its first argument.
    pub fn is_independent_of_s(&self) -> bool {
        match self.kind {
            ReactionKind::Zero => true,
            ReactionKind::Affine { c_s, .. } => c_s == 0.0,
            _ => false,
        }
    }

    pub fn f(&self, s: f64, r: f64) -> f64 {
        match &self.kind {
            ReactionKind::Zero => 0.0,
            ReactionKind::Standard { c_f, theta } => {
                let gate = 0.5 * (1.0 + r.tanh());
                if s < 0.0 {
                    c_f * s * gate
                } else if s <= *theta {
                    c_f * s * (1.0 - s / theta).powi(2) * gate
                } else {
                    0.0
                }
            }
            ReactionKind::Affine { c0, c_s, c_r } => c0 + c_s * s + c_r * r,
            ReactionKind::Custom(c) => (c.f)(s, r),
        }
    }

    pub fn df_ds(&self, s: f64, r: f64) -> f64 {
        match &self.kind {
            ReactionKind::Zero => 0.0,
            ReactionKind::Standard { c_f, theta } => {
                let gate = 0.5 * (1.0 + r.tanh());
                if s < 0.0 {
                    c_f * gate
                } else if s <= *theta {
                    let u = s / theta;
                    c_f * (1.0 - u) * (1.0 - 3.0 * u) * gate
                } else {
                    0.0
                }
            }
            ReactionKind::Affine { c_s, .. } => *c_s,
            ReactionKind::Custom(c) => (c.df_ds)(s, r),
        }
    }

    pub fn df_dr(&self, s: f64, r: f64) -> f64 {
        match &self.kind {
            ReactionKind::Zero => 0.0,
            ReactionKind::Standard { c_f, theta } => {
                let sech2 = 1.0 - r.tanh().powi(2);
                let shape = if s < 0.0 {
                    s
                } else if s <= *theta {
                    s * (1.0 - s / theta).powi(2)
                } else {
                    0.0
                };
                0.5 * c_f * shape * sech2
            }
            ReactionKind::Affine { c_r, .. } => *c_r,
            ReactionKind::Custom(c) => (c.df_dr)(s, r),
        }
    }

    /// Declared bound on `|∂_s f|`.
    pub fn c_pi(&self) -> f64 {
        match &self.kind {
            ReactionKind::Zero => 0.0,
            ReactionKind::Standard { c_f, .. } => c_f.abs(),
            ReactionKind::Affine { c_s, .. } => c_s.abs(),
            ReactionKind::Custom(c) => c.c_pi,
        }
    }

    /// Declared bound on `|∂_r f|` for `s ∈ [0, θ]`: `c_f · max s(1-s/θ)² · ½ = c_f · 2θ/27`.
    pub fn c_rho(&self) -> f64 {
        match &self.kind {
            ReactionKind::Zero => 0.0,
            ReactionKind::Standard { c_f, theta } => c_f.abs() * 2.0 * theta / 27.0,
            ReactionKind::Affine { c_r, .. } => c_r.abs(),
            ReactionKind::Custom(c) => c.c_rho,
        }
    }

    /// Sampled check of the structural assumptions on `f` with cutoff `theta`: `f(0, r) = 0`,
    /// `f(s, r) = 0` for `s > θ`, contraction `c_π < 1`, and difference quotients within
    /// the declared bounds. Samples `s ∈ [0, 2θ]`, `r ∈ [-5, 5]`.
    pub fn validate_sampled(&self, theta: f64, seed: u64) -> Result<()> {
        let fail = |detail: String| {
            Err(Error::Assumption {
                assumption: "A5",
                detail,
            })
        };
        if let ReactionKind::Standard { c_f, theta: t } = self.kind {
            if !(t > 0.0 && t.is_finite() && c_f.is_finite()) {
                return fail(format!("invalid standard reaction constants c_f = {c_f}, theta = {t}"));
            }
        }
        if !(self.c_pi() < 1.0) {
            return fail(format!("c_pi = {} is not a contraction constant", self.c_pi()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..2000 {
            let r = rng.gen_range(-5.0..5.0);
            let s1 = rng.gen_range(0.0..2.0 * theta);
            let s2 = rng.gen_range(0.0..2.0 * theta);
            let r2 = rng.gen_range(-5.0..5.0);
            let f0 = self.f(0.0, r);
            if f0 != 0.0 {
                return fail(format!("f(0, {r}) = {f0} is not zero"));
            }
            let above = theta * (1.0 + rng.gen_range(1e-9..1.0));
            if self.f(above, r) != 0.0 {
                return fail(format!(
                    "f({above}, {r}) = {} is not zero above theta",
                    self.f(above, r)
                ));
            }
            let tol = 1e-9 * (1.0 + self.c_pi() + self.c_rho());
            let (fa, fb) = (self.f(s1, r), self.f(s2, r));
            if (fa - fb).abs() > (self.c_pi() + tol) * (s1 - s2).abs() {
                return fail(format!("|f({s1},{r}) - f({s2},{r})| exceeds c_pi |s1 - s2|"));
            }
            let (ga, gb) = (self.f(s1, r), self.f(s1, r2));
            if (ga - gb).abs() > (self.c_rho() + tol) * (r - r2).abs() {
                return fail(format!("|f({s1},{r}) - f({s1},{r2})| exceeds c_rho |r1 - r2|"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_reaction_passes_sampled_validation() {
        ReactionTerm::standard(0.5, 4.0).validate_sampled(4.0, 1).unwrap();
        ReactionTerm::zero().validate_sampled(4.0, 1).unwrap();
        assert!(ReactionTerm::standard(1.5, 4.0).validate_sampled(4.0, 1).is_err());
        assert!(ReactionTerm::affine(1.0, 0.0, 0.0).validate_sampled(4.0, 1).is_err());
    }

    #[test]
    fn understated_bound_is_detected() {
        let c = CustomReaction {
            f: Arc::new(|s, _| 0.9 * s * (-s).exp()),
            df_ds: Arc::new(|s, _| 0.9 * (1.0 - s) * (-s).exp()),
            df_dr: Arc::new(|_, _| 0.0),
            c_pi: 0.5,
            c_rho: 0.0,
        };
        let t = ReactionTerm::new(ReactionKind::Custom(c), Reduction::MeanY);
        assert!(t.validate_sampled(4.0, 3).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let t = ReactionTerm::standard(0.5, 4.0);
        for &(s, r) in &[(-0.7, 0.3), (0.5, -1.0), (1.3, 2.0), (3.9, 0.0), (2.0, -0.4)] {
            let h = 1e-6;
            let ds = (t.f(s + h, r) - t.f(s - h, r)) / (2.0 * h);
            let dr = (t.f(s, r + h) - t.f(s, r - h)) / (2.0 * h);
            assert!((ds - t.df_ds(s, r)).abs() < 1e-8);
            assert!((dr - t.df_dr(s, r)).abs() < 1e-8);
        }
        // continuity of the derivative at both ends of the support
        assert!((t.df_ds(-1e-12, 0.0) - t.df_ds(1e-12, 0.0)).abs() < 1e-9);
        assert!(t.df_ds(4.0, 0.0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let t = ReactionTerm::standard(0.5, 4.0).with_reduction(Reduction::TraceMean);
        let s = serde_json::to_string(&t).unwrap();
        let back: ReactionTerm = serde_json::from_str(&s).unwrap();
        assert_eq!(back.c_pi(), 0.5);
        assert_eq!(back.reduction, Reduction::TraceMean);
        let z: ReactionTerm = serde_json::from_str(r#"{"kind": "zero"}"#).unwrap();
        assert!(z.is_zero());
    }
}
