use serde::{Deserialize, Serialize};

use crate::dsp::{db10, Pchip, C64, ZERO};
use crate::error::{Error, Result};

/// AM/AM and AM/PM curves measured as `(input_db, output_db, phase_deg)`.
///
/// Amplitudes are `10^(db/20)`. Between points the curves are PCHIP
/// interpolated; below the first point the small-signal gain and phase of the
/// first point are held; above the last point the model refuses to extrapolate.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 3]>", into = "Vec<[f64; 3]>")]
pub struct AmTable {
    points: Vec<[f64; 3]>,
    am: Pchip,
    pm: Pchip,
}

impl PartialEq for AmTable {
    fn eq(&self, other: &Self) -> bool {
        self.points == other.points
    }
}

impl TryFrom<Vec<[f64; 3]>> for AmTable {
    type Error = Error;

    fn try_from(points: Vec<[f64; 3]>) -> Result<Self> {
        AmTable::new(points)
    }
}

impl From<AmTable> for Vec<[f64; 3]> {
    fn from(t: AmTable) -> Self {
        t.points
    }
}

impl AmTable {
    pub fn new(mut points: Vec<[f64; 3]>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidTable("need at least two points".into()));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidTable("non-finite entry".into()));
        }
        points.sort_by(|a, b| a[0].total_cmp(&b[0]));
        if points.windows(2).any(|w| w[0][0] == w[1][0]) {
            return Err(Error::InvalidTable("duplicate input level".into()));
        }
        let x: Vec<f64> = points.iter().map(|p| amp(p[0])).collect();
        let a: Vec<f64> = points.iter().map(|p| amp(p[1])).collect();
        let phi: Vec<f64> = points.iter().map(|p| p[2].to_radians()).collect();
        let am = Pchip::new(x.clone(), a).ok_or_else(|| Error::InvalidTable("AM/AM curve".into()))?;
        let pm = Pchip::new(x, phi).ok_or_else(|| Error::InvalidTable("AM/PM curve".into()))?;
        Ok(AmTable { points, am, pm })
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn max_input(&self) -> f64 {
        amp(self.points[self.points.len() - 1][0])
    }

    fn peak(&self) -> [f64; 3] {
        *self
            .points
            .iter()
            .max_by(|a, b| a[1].total_cmp(&b[1]))
            .expect("non-empty")
    }

    fn curve(&self, r: f64) -> Result<(f64, f64)> {
        let (lo, _) = self.am.domain();
        let max = self.max_input();
        if r > max * (1.0 + 1e-12) {
            return Err(Error::AmplitudeOutOfRange { amplitude: r, max });
        }
        if r <= lo {
            let first = self.points[0];
            return Ok((r * amp(first[1] - first[0]), first[2].to_radians()));
        }
        let r = r.min(max);
        Ok((self.am.eval(r).expect("inside domain"), self.pm.eval(r).expect("inside domain")))
    }
}

fn amp(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// Memoryless high-power amplifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HpaModel {
    Bypass,
    Saleh {
        alpha_a: f64,
        beta_a: f64,
        alpha_phi: f64,
        beta_phi: f64,
    },
    Table { points: AmTable },
}

impl Default for HpaModel {
    fn default() -> Self {
        HpaModel::Saleh {
            alpha_a: 2.0,
            beta_a: 1.0,
            alpha_phi: std::f64::consts::FRAC_PI_3,
            beta_phi: 1.0,
        }
    }
}

impl HpaModel {
    pub fn from_table(table: AmTable) -> Self {
        HpaModel::Table { points: table }
    }

    pub fn validate(&self) -> Result<()> {
        if let HpaModel::Saleh {
            alpha_a,
            beta_a,
            alpha_phi,
            beta_phi,
        } = *self
        {
            if !(alpha_a > 0.0 && beta_a > 0.0 && beta_phi >= 0.0 && alpha_phi.is_finite()) {
                return Err(Error::param(
                    "saleh",
                    "alpha_a and beta_a must be positive, beta_phi non-negative",
                ));
            }
        }
        Ok(())
    }

    pub fn is_bypass(&self) -> bool {
        matches!(self, HpaModel::Bypass)
    }

    /// Input amplitude at which the output saturates.
    pub fn input_saturation(&self) -> Option<f64> {
        match self {
            HpaModel::Bypass => None,
            HpaModel::Saleh { beta_a, .. } => Some(beta_a.sqrt().recip()),
            HpaModel::Table { points } => Some(amp(points.peak()[0])),
        }
    }

    /// Saturated output power.
    pub fn saturated_power(&self) -> Option<f64> {
        match self {
            HpaModel::Bypass => None,
            HpaModel::Saleh { alpha_a, beta_a, .. } => Some(alpha_a * alpha_a / (4.0 * beta_a)),
            HpaModel::Table { points } => Some(amp(points.peak()[1]).powi(2)),
        }
    }

    /// Largest input amplitude the model accepts.
    pub fn max_input(&self) -> f64 {
        match self {
            HpaModel::Table { points } => points.max_input(),
            _ => f64::INFINITY,
        }
    }

    /// Output amplitude and phase rotation at input amplitude `r`.
    pub fn am_am_pm(&self, r: f64) -> Result<(f64, f64)> {
        match self {
            HpaModel::Bypass => Ok((r, 0.0)),
            HpaModel::Saleh {
                alpha_a,
                beta_a,
                alpha_phi,
                beta_phi,
            } => {
                let r2 = r * r;
                Ok((alpha_a * r / (1.0 + beta_a * r2), alpha_phi * r2 / (1.0 + beta_phi * r2)))
            }
            HpaModel::Table { points } => points.curve(r),
        }
    }

    pub fn apply_one(&self, v: C64) -> Result<C64> {
        let r = v.norm();
        if r == 0.0 {
            return Ok(ZERO);
        }
        let (a, p) = self.am_am_pm(r)?;
        Ok(v * (a / r) * C64::from_polar(1.0, p))
    }

    /// Apply the nonlinearity sample by sample.
    pub fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        if self.is_bypass() {
            return Ok(x.to_vec());
        }
        x.iter().map(|&v| self.apply_one(v)).collect()
    }

    pub fn describe(&self) -> String {
        match self {
            HpaModel::Bypass => "bypass".into(),
            HpaModel::Saleh { .. } => format!(
                "saleh (psat {:.2} dB)",
                db10(self.saturated_power().unwrap_or(1.0))
            ),
            HpaModel::Table { points } => format!("table ({} points)", points.points().len()),
        }
    }
}
