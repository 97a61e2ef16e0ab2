use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid carbon parameters: {0}")]
pub struct InvalidParams(pub String);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarbonParams {
    pub runtime_h: f64,
    pub power_kw: f64,
    /// Fraction of the hardware's power actually drawn, in (0, 1].
    pub usage_factor: f64,
    /// Power usage effectiveness of the datacenter, at least 1.
    pub pue: f64,
    pub carbon_intensity_g_per_kwh: f64,
}

impl CarbonParams {
    pub fn check(&self) -> Result<(), InvalidParams> {
        let fields = [
            ("runtime_h", self.runtime_h),
            ("power_kw", self.power_kw),
            ("usage_factor", self.usage_factor),
            ("pue", self.pue),
            ("carbon_intensity_g_per_kwh", self.carbon_intensity_g_per_kwh),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(InvalidParams(format!("{name} must be finite")));
            }
        }
        if self.runtime_h < 0.0 {
            return Err(InvalidParams("runtime_h must be >= 0".into()));
        }
        if self.power_kw <= 0.0 {
            return Err(InvalidParams("power_kw must be positive".into()));
        }
        if !(self.usage_factor > 0.0 && self.usage_factor <= 1.0) {
            return Err(InvalidParams("usage_factor must be in (0, 1]".into()));
        }
        if self.pue < 1.0 {
            return Err(InvalidParams("pue must be >= 1".into()));
        }
        if self.carbon_intensity_g_per_kwh <= 0.0 {
            return Err(InvalidParams("carbon_intensity_g_per_kwh must be positive".into()));
        }
        Ok(())
    }
}

/// Grams of CO2: runtime x power x usage x PUE x carbon intensity.
pub fn estimate_carbon(p: &CarbonParams) -> Result<f64, InvalidParams> {
    p.check()?;
    Ok(p.runtime_h * p.power_kw * p.usage_factor * p.pue * p.carbon_intensity_g_per_kwh)
}
