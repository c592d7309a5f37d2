use std::path::Path;

use serde::{Deserialize, Serialize};

use super::regions::Region;
use crate::error::{Error, Result};

pub const SCHEDULE_SCHEMA_VERSION: u32 = 1;

/// Per-region detail weights for one PGT synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionAlphas {
    pub skin: f64,
    pub lip: f64,
    pub eyeshadow: f64,
}

impl RegionAlphas {
    pub fn uniform(alpha: f64) -> Self {
        RegionAlphas { skin: alpha, lip: alpha, eyeshadow: alpha }
    }

    pub fn get(&self, region: Region) -> f64 {
        match region {
            Region::Skin => self.skin,
            Region::Lip => self.lip,
            Region::Eyeshadow => self.eyeshadow,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for r in Region::ALL {
            let a = self.get(r);
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::Contract(format!("{r} alpha {a} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Parses `skin,lip,eyeshadow` or a single value applied to all three.
    pub fn parse(s: &str) -> Result<Self> {
        let vals = s
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad alpha `{v}`"))))
            .collect::<Result<Vec<_>>>()?;
        let a = match vals[..] {
            [a] => Self::uniform(a),
            [skin, lip, eyeshadow] => RegionAlphas { skin, lip, eyeshadow },
            _ => return Err(Error::Config(format!("expected 1 or 3 alphas, got {}", vals.len()))),
        };
        a.validate()?;
        Ok(a)
    }
}

/// Piecewise-linear curve through `(breakpoints[k], values[k])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let p = PiecewiseLinear { breakpoints, values };
        p.validate("curve")?;
        Ok(p)
    }

    fn validate(&self, name: &str) -> Result<()> {
        let (b, v) = (&self.breakpoints, &self.values);
        if b.len() < 2 || b.len() != v.len() {
            return Err(Error::Config(format!(
                "{name}: need at least two breakpoints with one value each ({} breakpoints, {} values)",
                b.len(),
                v.len()
            )));
        }
        if b[0] != 0.0 || b[b.len() - 1] != 1.0 {
            return Err(Error::Config(format!("{name}: breakpoints must start at 0 and end at 1")));
        }
        if b.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config(format!("{name}: breakpoints must be strictly increasing")));
        }
        if v.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::Config(format!("{name}: values must lie in [0, 1]")));
        }
        // Rise, then plateau, then decay: once a value drops, it never climbs again.
        let mut falling = false;
        for w in v.windows(2) {
            if w[1] < w[0] {
                falling = true;
            } else if w[1] > w[0] && falling {
                return Err(Error::Config(format!("{name}: values must rise, plateau, then decay")));
            }
        }
        Ok(())
    }

    pub fn eval(&self, p: f64) -> f64 {
        let (b, v) = (&self.breakpoints, &self.values);
        let k = b.partition_point(|&x| x <= p).clamp(1, b.len() - 1);
        let t = (p - b[k - 1]) / (b[k] - b[k - 1]);
        if t >= 1.0 {
            v[k]
        } else {
            v[k - 1] + t * (v[k] - v[k - 1])
        }
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Annealing curves for the per-region detail weights over training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlendSchedule {
    pub schema_version: u32,
    pub skin: PiecewiseLinear,
    pub lip: PiecewiseLinear,
    pub eyeshadow: PiecewiseLinear,
}

impl Default for BlendSchedule {
    /// Rise over the first 40% of progress, plateau, decay over the last 30%.
    /// These are hand-set defaults, not fitted constants.
    fn default() -> Self {
        let bp = vec![0.0, 0.4, 0.7, 1.0];
        BlendSchedule {
            schema_version: SCHEDULE_SCHEMA_VERSION,
            skin: PiecewiseLinear { breakpoints: bp.clone(), values: vec![0.2, 0.4, 0.4, 0.2] },
            lip: PiecewiseLinear { breakpoints: bp.clone(), values: vec![0.05, 0.2, 0.2, 0.0] },
            eyeshadow: PiecewiseLinear { breakpoints: bp, values: vec![0.6, 0.8, 0.8, 0.4] },
        }
    }
}

impl BlendSchedule {
    pub fn curve(&self, region: Region) -> &PiecewiseLinear {
        match region {
            Region::Skin => &self.skin,
            Region::Lip => &self.lip,
            Region::Eyeshadow => &self.eyeshadow,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEDULE_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schedule schema_version {} is not supported (expected {SCHEDULE_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        for r in Region::ALL {
            self.curve(r).validate(r.name())?;
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let sched: BlendSchedule =
            serde_json::from_str(s).map_err(|e| Error::Config(format!("schedule: {e}")))?;
        sched.validate()?;
        Ok(sched)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::format(path, msg),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }
}

/// Detail weights at training progress `progress ∈ [0, 1]`.
pub fn schedule_eval(s: &BlendSchedule, progress: f64) -> Result<RegionAlphas> {
    if !(0.0..=1.0).contains(&progress) {
        return Err(Error::Contract(format!("progress {progress} outside [0, 1]")));
    }
    Ok(RegionAlphas { skin: s.skin.eval(progress), lip: s.lip.eval(progress), eyeshadow: s.eyeshadow.eval(progress) })
}
