//! Service-rate controls that target a mean response time `s`.
//!
//! Both controls come from fixing a pointwise-stationary heavy-traffic
//! response-time approximation at the target and solving for the service
//! rate:
//!
//! * square-root (SR), from the FCFS approximation
//!   `β/μ + (β/μ)·ρ/(1−ρ)·V_FCFS = s`, the positive root of
//!   `sμ² − β(sλ+1)μ + λβ²(1−V_FCFS) = 0`;
//! * difference-matching (DM), from the PS approximation
//!   `(β/μ)·V_PS/(1−ρ) = s`, i.e. `μ = β(λ + V_PS/s)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(V_FCFS, V_PS)` for arrival-base SCV `ca2` and job-size SCV `cs2`.
pub fn variability_factors(ca2: f64, cs2: f64) -> (f64, f64) {
    ((ca2 + cs2) / 2.0, (ca2 + cs2) / (1.0 + cs2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlKind {
    SquareRoot,
    DifferenceMatching,
    /// A fixed service rate, ignoring the arrival rate.
    Constant(f64),
}

impl ControlKind {
    pub fn name(&self) -> &'static str {
        match self {
            ControlKind::SquareRoot => "sr",
            ControlKind::DifferenceMatching => "dm",
            ControlKind::Constant(_) => "const",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlSpec {
    kind: ControlKind,
    target_s: f64,
    beta: f64,
    ca2: f64,
    cs2: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidControl(format!("{name} must be positive, got {v}")))
    }
}

impl ControlSpec {
    pub fn new(kind: ControlKind, target_s: f64, beta: f64, ca2: f64, cs2: f64) -> Result<Self> {
        positive("target_s", target_s)?;
        positive("beta", beta)?;
        positive("ca2", ca2)?;
        positive("cs2", cs2)?;
        if let ControlKind::Constant(mu) = kind {
            positive("constant service rate", mu)?;
        }
        Ok(ControlSpec {
            kind,
            target_s,
            beta,
            ca2,
            cs2,
        })
    }

    pub fn kind(&self) -> ControlKind {
        self.kind
    }

    pub fn target_s(&self) -> f64 {
        self.target_s
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn ca2(&self) -> f64 {
        self.ca2
    }

    pub fn cs2(&self) -> f64 {
        self.cs2
    }

    pub fn with_kind(&self, kind: ControlKind) -> Result<Self> {
        Self::new(kind, self.target_s, self.beta, self.ca2, self.cs2)
    }

    pub fn with_target(&self, target_s: f64) -> Result<Self> {
        Self::new(self.kind, target_s, self.beta, self.ca2, self.cs2)
    }

    pub fn v_fcfs(&self) -> f64 {
        variability_factors(self.ca2, self.cs2).0
    }

    pub fn v_ps(&self) -> f64 {
        variability_factors(self.ca2, self.cs2).1
    }

    /// Service rate this control assigns when the arrival rate is `lambda_t`.
    pub fn service_rate(&self, lambda_t: f64) -> f64 {
        match self.kind {
            ControlKind::SquareRoot => self.mu_sr(lambda_t),
            ControlKind::DifferenceMatching => self.mu_dm(lambda_t),
            ControlKind::Constant(mu) => mu,
        }
    }

    /// `(sλ+1)²β² + 4sλβ²(V_FCFS−1)`, the SR discriminant.
    pub fn sr_discriminant(&self, lambda_t: f64) -> f64 {
        let (s, beta) = (self.target_s, self.beta);
        let a = (s * lambda_t + 1.0) * beta;
        a * a + 4.0 * s * lambda_t * beta * beta * (self.v_fcfs() - 1.0)
    }

    pub fn mu_sr(&self, lambda_t: f64) -> f64 {
        let (s, beta) = (self.target_s, self.beta);
        if self.sr_is_linear() {
            // perfect-square discriminant
            return beta * (lambda_t + 1.0 / s);
        }
        ((s * lambda_t + 1.0) * beta + self.sr_discriminant(lambda_t).sqrt()) / (2.0 * s)
    }

    /// SR reduces to `β(λ + 1/s)` when `V_FCFS = 1`.
    pub fn sr_is_linear(&self) -> bool {
        self.v_fcfs() == 1.0
    }

    pub fn mu_dm(&self, lambda_t: f64) -> f64 {
        self.beta * (lambda_t + self.v_ps() / self.target_s)
    }

    /// Checks that the control is well defined for every arrival rate in
    /// `[lambda_min, lambda_max]`. The discriminant is a convex quadratic in
    /// λ, so the endpoints plus the vertex cover the interval.
    pub fn check_feasible(&self, lambda_min: f64, lambda_max: f64) -> Result<()> {
        if self.kind != ControlKind::SquareRoot {
            return Ok(());
        }
        let s = self.target_s;
        // vertex of x² + (4V−2)x + 1 with x = sλ
        let vertex = (1.0 - 2.0 * self.v_fcfs()) / s;
        let mut candidates = vec![lambda_min, lambda_max];
        if vertex > lambda_min && vertex < lambda_max {
            candidates.push(vertex);
        }
        for lambda in candidates {
            let d = self.sr_discriminant(lambda);
            if d < 0.0 {
                return Err(Error::InvalidControl(format!(
                    "square-root control has negative discriminant {d} at lambda = {lambda}"
                )));
            }
        }
        Ok(())
    }

    fn rho(&self, mu: f64, lambda_t: f64) -> Result<f64> {
        let rho = lambda_t * self.beta / mu;
        if !(rho < 1.0) || mu <= 0.0 {
            return Err(Error::UnstablePoint { rho });
        }
        Ok(rho)
    }

    /// Pointwise-stationary heavy-traffic FCFS response time at service rate `mu`.
    pub fn predict_response_fcfs(&self, mu: f64, lambda_t: f64) -> Result<f64> {
        let rho = self.rho(mu, lambda_t)?;
        let b = self.beta / mu;
        Ok(b + b * rho / (1.0 - rho) * self.v_fcfs())
    }

    /// Pointwise-stationary heavy-traffic PS response time at service rate `mu`.
    pub fn predict_response_ps(&self, mu: f64, lambda_t: f64) -> Result<f64> {
        let rho = self.rho(mu, lambda_t)?;
        Ok(self.beta / mu / (1.0 - rho) * self.v_ps())
    }

    /// Light-traffic (ρ → 0) limits of the two controls: `(β/s, βV_PS/s)`.
    pub fn light_traffic_constants(&self) -> (f64, f64) {
        (self.beta / self.target_s, self.beta * self.v_ps() / self.target_s)
    }
}

/// Formats `v` with `digits` significant figures, for report tables.
pub fn format_significant(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}
