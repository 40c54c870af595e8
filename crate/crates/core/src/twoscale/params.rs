use serde::{Deserialize, Serialize};

use super::ReactionTerm;
use crate::error::{Error, Result};

/// Physical parameters of the two-scale model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// Macroscopic permeability.
    #[serde(rename = "A")]
    pub a: f64,
    /// Microscopic diffusivity.
    #[serde(rename = "D")]
    pub d: f64,
    pub kappa: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(alias = "p_F")]
    pub p_f: f64,
    /// Cutoff of the reaction term.
    pub theta: f64,
    /// Final time.
    #[serde(rename = "T")]
    pub t_final: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            a: 1.0,
            d: 1.0,
            kappa: 1.0,
            r: 1.0,
            p_f: 1.0,
            theta: 4.0,
            t_final: 0.5,
        }
    }
}

fn assumption(assumption: &'static str, detail: String) -> Error {
    Error::Assumption { assumption, detail }
}

impl ModelParams {
    /// Checks that the discrete problem is well posed: finite values, positive diffusivities
    /// and `R`, nonnegative transfer coefficient and offset. Degenerate couplings
    /// (`kappa = 0`, `p_f = 0`) pass, they are used by diagnostics.
    pub fn check_structure(&self) -> Result<()> {
        let fields = [
            ("A", self.a),
            ("D", self.d),
            ("kappa", self.kappa),
            ("R", self.r),
            ("p_F", self.p_f),
            ("theta", self.theta),
            ("T", self.t_final),
        ];
        if let Some((name, v)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Validation(format!("parameter {name} = {v} is not finite")));
        }
        for (name, v) in [("A", self.a), ("D", self.d), ("R", self.r)] {
            if v <= 0.0 {
                return Err(Error::Validation(format!("parameter {name} = {v} must be positive")));
            }
        }
        for (name, v) in [("kappa", self.kappa), ("p_F", self.p_f), ("T", self.t_final)] {
            if v < 0.0 {
                return Err(Error::Validation(format!("parameter {name} = {v} must be nonnegative")));
            }
        }
        Ok(())
    }

    /// Full model assumptions, reported under the labels `A2` (every parameter strictly
    /// positive) and `A3` (permeability above the declared Lipschitz constants of `f`).
    pub fn validate(&self, reaction: &ReactionTerm) -> Result<()> {
        self.check_structure()?;
        for (name, v) in [
            ("A", self.a),
            ("D", self.d),
            ("kappa", self.kappa),
            ("R", self.r),
            ("p_F", self.p_f),
            ("theta", self.theta),
            ("T", self.t_final),
        ] {
            if v <= 0.0 {
                return Err(assumption("A2", format!("parameter {name} = {v} must be positive")));
            }
        }
        let bound = reaction.c_pi().max(reaction.c_rho());
        if self.a <= bound {
            return Err(assumption(
                "A3",
                format!(
                    "A = {} must exceed max(c_pi, c_rho) = {bound} of the reaction term",
                    self.a
                ),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_satisfy_the_assumptions() {
        let p = ModelParams::default();
        p.validate(&ReactionTerm::standard(0.5, p.theta)).unwrap();
    }

    #[test]
    fn violations_name_the_assumption() {
        let reaction = ReactionTerm::standard(0.5, 4.0);
        let p = ModelParams {
            kappa: 0.0,
            ..Default::default()
        };
        assert!(p.check_structure().is_ok());
        assert!(matches!(
            p.validate(&reaction),
            Err(Error::Assumption { assumption: "A2", .. })
        ));
        let p = ModelParams {
            a: 0.4,
            ..Default::default()
        };
        assert!(matches!(
            p.validate(&reaction),
            Err(Error::Assumption { assumption: "A3", .. })
        ));
        let p = ModelParams {
            d: -1.0,
            ..Default::default()
        };
        assert!(p.check_structure().is_err());
        let p = ModelParams {
            r: f64::NAN,
            ..Default::default()
        };
        assert!(p.check_structure().is_err());
    }

    #[test]
    fn json_names() {
        let p: ModelParams =
            serde_json::from_str(r#"{"A": 2.0, "D": 1.0, "kappa": 0.5, "R": 1.0, "p_f": 1.0, "theta": 4.0, "T": 1.0}"#)
                .unwrap();
        assert_eq!(p.a, 2.0);
        assert_eq!(p.kappa, 0.5);
    }
}
