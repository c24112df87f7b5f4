//! Chain geometry: link parameters and joint limits.

use serde::Deserialize;
use std::path::Path;

/// Reasons a chain description is unusable.
#[derive(Debug, thiserror::Error)]
pub enum ChainError {
    #[error("joint {joint}: lower limit {lower} is not below upper limit {upper}")]
    LimitsOutOfOrder { joint: usize, lower: f64, upper: f64 },
    #[error("b5 must be nonzero; with the wrist offset gone the arm degenerates to a wrist-partitioned geometry this solver does not handle")]
    ZeroWristOffset,
    #[error("reading chain file: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing chain JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Link parameters and joint limits of a six-revolute serial chain.
///
/// Lengths `a` and offsets `b` are in meters, twists `alpha` and limits in
/// radians. Index `i` holds the parameters of link `i+1` in the usual
/// one-based numbering.
#[derive(Clone, Debug, PartialEq)]
pub struct DhChain {
    pub a: [f64; 6],
    pub b: [f64; 6],
    pub alpha: [f64; 6],
    pub lower: [f64; 6],
    pub upper: [f64; 6],
}

use std::f64::consts::{FRAC_PI_2, PI};

impl DhChain {
    /// The Gen3 Lite's factory geometry and joint limits.
    pub fn gen3_lite() -> Self {
        let upper_deg = [154.0_f64, 150.0, 150.0, 149.0, 145.0, 149.0];
        let upper = upper_deg.map(f64::to_radians);
        DhChain {
            a: [0.0, 0.28, 0.0, 0.0, 0.0, 0.0],
            b: [0.2433, 0.03, 0.02, 0.245, 0.057, 0.235],
            alpha: [FRAC_PI_2, PI, FRAC_PI_2, FRAC_PI_2, FRAC_PI_2, 0.0],
            lower: upper.map(|u| -u),
            upper,
        }
    }

    /// Checks the structural invariants: ordered limits and a nonzero wrist
    /// offset `b₅` (the solver's standing assumption).
    pub fn validate(&self) -> Result<(), ChainError> {
        for i in 0..6 {
            // partial_cmp: NaN limits must fail too, not slip through a `>=`
            if self.lower[i].partial_cmp(&self.upper[i]) != Some(std::cmp::Ordering::Less) {
                return Err(ChainError::LimitsOutOfOrder {
                    joint: i + 1,
                    lower: self.lower[i],
                    upper: self.upper[i],
                });
            }
        }
        if self.b[4] == 0.0 {
            return Err(ChainError::ZeroWristOffset);
        }
        Ok(())
    }

    /// True when every joint lies within `[lower − tol, upper + tol]`.
    pub fn within_limits(&self, joints: &crate::dh::JointAngles, tol: f64) -> bool {
        (0..6).all(|i| joints.0[i] >= self.lower[i] - tol && joints.0[i] <= self.upper[i] + tol)
    }

    /// Loads a chain from its JSON description:
    /// `{"a": [...], "b": [...], "alpha": [...], "lower_deg": [...], "upper_deg": [...]}`
    /// with lengths in meters, twists in radians and limits in degrees.
    pub fn from_json_str(text: &str) -> Result<Self, ChainError> {
        let raw: ChainFile = serde_json::from_str(text)?;
        let chain = DhChain {
            a: raw.a,
            b: raw.b,
            alpha: raw.alpha,
            lower: raw.lower_deg.map(f64::to_radians),
            upper: raw.upper_deg.map(f64::to_radians),
        };
        chain.validate()?;
        Ok(chain)
    }

    /// Loads a chain from a JSON file; see [`DhChain::from_json_str`].
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, ChainError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

impl Default for DhChain {
    fn default() -> Self {
        Self::gen3_lite()
    }
}

#[derive(Deserialize)]
struct ChainFile {
    a: [f64; 6],
    b: [f64; 6],
    alpha: [f64; 6],
    lower_deg: [f64; 6],
    upper_deg: [f64; 6],
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_matches_factory_values() {
        let c = DhChain::default();
        assert_eq!(c.a[1], 0.28);
        assert_eq!(c.b, [0.2433, 0.03, 0.02, 0.245, 0.057, 0.235]);
        assert_eq!(c.alpha, [FRAC_PI_2, PI, FRAC_PI_2, FRAC_PI_2, FRAC_PI_2, 0.0]);
        assert_eq!(c.upper[0], 154.0_f64.to_radians());
        assert_eq!(c.lower[4], -(145.0_f64.to_radians()));
        c.validate().unwrap();
    }

    #[test]
    fn json_round_trip_and_validation() {
        let text = r#"{
            "a": [0, 0.28, 0, 0, 0, 0],
            "b": [0.2433, 0.03, 0.02, 0.245, 0.057, 0.235],
            "alpha": [1.5707963267948966, 3.141592653589793, 1.5707963267948966,
                      1.5707963267948966, 1.5707963267948966, 0],
            "lower_deg": [-154, -150, -150, -149, -145, -149],
            "upper_deg": [154, 150, 150, 149, 145, 149]
        }"#;
        let c = DhChain::from_json_str(text).unwrap();
        assert_eq!(c, DhChain::gen3_lite());

        let bad = text.replace("0.057", "0.0");
        assert!(matches!(
            DhChain::from_json_str(&bad),
            Err(ChainError::ZeroWristOffset)
        ));

        let inverted = text.replace("\"upper_deg\": [154,", "\"upper_deg\": [-155,");
        assert!(matches!(
            DhChain::from_json_str(&inverted),
            Err(ChainError::LimitsOutOfOrder { joint: 1, .. })
        ));
    }
}
