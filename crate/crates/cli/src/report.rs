use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Error bound serialized as a number, or as the string `"infinite"` when
/// the functional cannot be estimated with bounded error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sigma(pub f64);

impl Serialize for Sigma {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str("infinite")
        }
    }
}

impl<'de> Deserialize<'de> for Sigma {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(Sigma(v)),
            Repr::Text(t) if t == "infinite" => Ok(Sigma(f64::INFINITY)),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("unexpected sigma_hat '{t}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub samples: usize,
    pub empty: bool,
    pub max_dev: f64,
    pub violations: usize,
    /// `|(l, x_c) - estimate|` for the normal-equations centre, when it applies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centre_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TikhonovSummary {
    pub alphas: Vec<f64>,
    /// `|u_{k+1} - u_k|`.
    pub residuals: Vec<f64>,
    /// Normalized representation defect per iterate.
    pub defects: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_ok: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tikhonov: Option<TikhonovSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSummary>,
    /// Realized value of the bounding quadratic form (simulation).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadratic_form: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultReport {
    pub command: String,
    pub mode: Option<String>,
    pub estimate: Option<f64>,
    pub sigma_hat: Option<Sigma>,
    pub feasible: bool,
    #[serde(default)]
    pub diagnostics: Diagnostics,
    #[serde(default)]
    pub timings: Timings,
}

impl ResultReport {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            mode: None,
            estimate: None,
            sigma_hat: None,
            feasible: true,
            diagnostics: Diagnostics::default(),
            timings: Timings::default(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
