use std::f64::consts::E;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{Family, Graph};

/// Which tuning formula to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    /// `sigma * rho * sqrt(2 log(e m / delta)) / n`; needs `rho`.
    TheoremGeneral,
    #[serde(rename = "grid_2d")]
    Grid2D,
    GridHighDim,
    Hypercube,
    Complete,
    Star,
    /// Random graphs with a spectral gap, using the mean degree.
    RandomGap,
    CyclePower,
    Manual,
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RuleKind::TheoremGeneral => "theorem_general",
            RuleKind::Grid2D => "grid_2d",
            RuleKind::GridHighDim => "grid_high_dim",
            RuleKind::Hypercube => "hypercube",
            RuleKind::Complete => "complete",
            RuleKind::Star => "star",
            RuleKind::RandomGap => "random_gap",
            RuleKind::CyclePower => "cycle_power",
            RuleKind::Manual => "manual",
        };
        f.write_str(s)
    }
}

impl FromStr for RuleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s.chars().filter(|c| *c != '_' && *c != '-').collect::<String>().to_lowercase();
        Ok(match norm.as_str() {
            "theoremgeneral" | "theorem" | "general" => RuleKind::TheoremGeneral,
            "grid2d" => RuleKind::Grid2D,
            "gridhighdim" => RuleKind::GridHighDim,
            "hypercube" => RuleKind::Hypercube,
            "complete" => RuleKind::Complete,
            "star" => RuleKind::Star,
            "randomgap" | "random" => RuleKind::RandomGap,
            "cyclepower" => RuleKind::CyclePower,
            "manual" => RuleKind::Manual,
            _ => return Err(Error::invalid(format!("unknown lambda rule '{s}'"))),
        })
    }
}

/// A tuning rule together with its noise level and confidence parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaRule {
    pub rule: RuleKind,
    pub sigma: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_c")]
    pub constant_c: f64,
    /// Only read by [`RuleKind::Manual`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

fn default_delta() -> f64 {
    0.1
}

fn default_c() -> f64 {
    1.0
}

impl LambdaRule {
    pub fn new(rule: RuleKind, sigma: f64, delta: f64) -> Self {
        Self { rule, sigma, delta, constant_c: 1.0, value: None }
    }

    pub fn manual(value: f64) -> Self {
        Self { rule: RuleKind::Manual, sigma: 0.0, delta: default_delta(), constant_c: 1.0, value: Some(value) }
    }

    pub fn with_constant(mut self, c: f64) -> Self {
        self.constant_c = c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.rule == RuleKind::Manual {
            return match self.value {
                Some(v) if v.is_finite() && v >= 0.0 => Ok(()),
                Some(v) => Err(Error::invalid(format!("manual lambda must be finite and nonnegative, got {v}"))),
                None => Err(Error::invalid("manual lambda rule needs a value")),
            };
        }
        // sigma = 0 is accepted so that noiseless runs can be tuned.
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::invalid(format!("sigma must be finite and nonnegative, got {}", self.sigma)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.constant_c.is_finite() && self.constant_c > 0.0) {
            return Err(Error::invalid(format!("constant must be positive, got {}", self.constant_c)));
        }
        Ok(())
    }
}

/// `sigma * rho * sqrt(2 log(e m / delta)) / n` without range checks on
/// `delta`; the logarithm only has to be nonnegative.
pub fn theorem_lambda(sigma: f64, rho: f64, m: usize, n: usize, delta: f64) -> f64 {
    let arg = (E * m as f64 / delta).ln().max(0.0);
    sigma * rho * (2.0 * arg).sqrt() / n as f64
}

/// Evaluates a tuning rule on a graph. `rho` is required by the general rule.
pub fn lambda_value(rule: &LambdaRule, g: &Graph, rho: Option<f64>) -> Result<f64> {
    rule.validate()?;
    let n = g.n() as f64;
    if g.n() == 0 {
        return Err(Error::invalid("empty graph"));
    }
    let c = rule.constant_c;
    let s = rule.sigma;
    let log_en = (E * n / rule.delta).ln();
    let value = match rule.rule {
        RuleKind::Manual => return Ok(rule.value.expect("validated")),
        RuleKind::TheoremGeneral => {
            let rho = rho.ok_or_else(|| Error::invalid("the general rule needs rho"))?;
            if !(rho.is_finite() && rho >= 0.0) {
                return Err(Error::invalid(format!("rho must be finite and nonnegative, got {rho}")));
            }
            c * theorem_lambda(s, rho, g.m(), g.n(), rule.delta)
        }
        RuleKind::Grid2D => c * s * (n.ln() * log_en).sqrt() / n,
        RuleKind::GridHighDim | RuleKind::Hypercube | RuleKind::Star => c * s * log_en.sqrt() / n,
        RuleKind::Complete => c * s * log_en.sqrt() / (n * n),
        RuleKind::RandomGap => {
            let d = 2.0 * g.m() as f64 / n;
            if d <= 0.0 {
                return Err(Error::invalid("graph has no edges"));
            }
            c * s * (E * d * n / rule.delta).ln().sqrt() / (d * n)
        }
        RuleKind::CyclePower => {
            let k = match g.family() {
                Family::CyclePower { k } => *k as f64,
                other => return Err(Error::invalid(format!("cycle-power rule used on {other}"))),
            };
            c * s * log_en.sqrt() / (n.sqrt() * k.powi(3)).min(n)
        }
    };
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{build_complete, build_cycle_power, build_grid, build_path, build_random_regular};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-14 * (1.0 + b.abs())
    }

    #[test]
    fn general_rule_with_unit_log() {
        // m = 9 on a 10-vertex path; delta = m makes log(e m / delta) = 1
        let g = build_path(10).unwrap();
        let v = theorem_lambda(1.0, 1.0, g.m(), g.n(), g.m() as f64);
        assert!(close(v, 2f64.sqrt() / 10.0));
        // inside the validated range
        let rule = LambdaRule::new(RuleKind::TheoremGeneral, 1.0, 0.5);
        let v = lambda_value(&rule, &g, Some(2.0)).unwrap();
        assert!(close(v, 2.0 * (2.0 * (E * 9.0 / 0.5).ln()).sqrt() / 10.0));
    }

    #[test]
    fn grid_rule() {
        let g = build_grid(2, 16).unwrap();
        let n = 256.0f64;
        let rule = LambdaRule::new(RuleKind::Grid2D, 0.5, 0.1);
        let want = 0.5 * (n.ln() * (10.0 * E * n).ln()).sqrt() / n;
        assert!(close(lambda_value(&rule, &g, None).unwrap(), want));
    }

    #[test]
    fn other_rules() {
        let g = build_complete(20).unwrap();
        let rule = LambdaRule::new(RuleKind::Complete, 2.0, 0.1).with_constant(3.0);
        let want = 6.0 * (E * 20.0 / 0.1).ln().sqrt() / 400.0;
        assert!(close(lambda_value(&rule, &g, None).unwrap(), want));

        let g = build_cycle_power(100, 2).unwrap();
        let rule = LambdaRule::new(RuleKind::CyclePower, 1.0, 0.1);
        let want = (E * 1000.0f64).ln().sqrt() / (10.0 * 8.0f64).min(100.0);
        assert!(close(lambda_value(&rule, &g, None).unwrap(), want));

        let g = build_random_regular(50, 4, 1).unwrap();
        let rule = LambdaRule::new(RuleKind::RandomGap, 1.0, 0.1);
        let want = (E * 4.0 * 50.0 / 0.1f64).ln().sqrt() / 200.0;
        assert!(close(lambda_value(&rule, &g, None).unwrap(), want));
    }

    #[test]
    fn manual_and_errors() {
        let g = build_path(5).unwrap();
        assert_eq!(lambda_value(&LambdaRule::manual(0.37), &g, None).unwrap(), 0.37);
        let rule = LambdaRule::new(RuleKind::TheoremGeneral, 1.0, 0.1);
        assert!(matches!(lambda_value(&rule, &g, None), Err(Error::InvalidArgument(_))));
        let bad = LambdaRule::new(RuleKind::Star, 1.0, 1.5);
        assert!(lambda_value(&bad, &g, None).is_err());
        let wrong = LambdaRule::new(RuleKind::CyclePower, 1.0, 0.1);
        assert!(lambda_value(&wrong, &g, None).is_err());
    }

    #[test]
    fn rule_names_round_trip() {
        for k in [RuleKind::TheoremGeneral, RuleKind::Grid2D, RuleKind::RandomGap, RuleKind::Manual] {
            assert_eq!(k.to_string().parse::<RuleKind>().unwrap(), k);
        }
    }
}
