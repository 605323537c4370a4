//! The JSON system description read by every command.

use std::fs;
use std::io::Read;

use lurex::exact::{ExactError, QuadRat};
use lurex::lure::{parse_rational, Tolerances};
use num_rational::BigRational;
use serde::Deserialize;

use crate::CliError;

/// A number given either as a JSON number or as an exact literal such as
/// `"-11/2 - 13/2*sqrt(41)"`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Literal {
    Number(f64),
    Text(String),
}

impl Literal {
    /// Decimal text of the literal; JSON numbers use their shortest round-trip form.
    pub fn text(&self) -> String {
        match self {
            Literal::Number(v) => format!("{v:e}"),
            Literal::Text(s) => s.clone(),
        }
    }

    /// Radicand of the first surd in a text literal.
    fn radicand(&self) -> Option<u64> {
        let Literal::Text(s) = self else { return None };
        let rest = if let Some(i) = s.find("sqrt(") {
            &s[i + 5..]
        } else {
            &s[s.find('√')? + '√'.len_utf8()..]
        };
        let rest = rest.trim_start_matches('(');
        let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
        digits.parse().ok()
    }

    pub fn to_f64(&self) -> Result<f64, ExactError> {
        match self {
            Literal::Number(v) => Ok(*v),
            Literal::Text(s) => Ok(QuadRat::parse(s, self.radicand().unwrap_or(2))?.to_f64()),
        }
    }

    pub fn to_rational(&self) -> Result<BigRational, ExactError> {
        parse_rational(&self.text())
    }

    pub fn to_quad(&self, d: u64) -> Result<QuadRat, ExactError> {
        QuadRat::parse(&self.text(), d)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, serde::Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Arithmetic {
    #[default]
    Float,
    Exact,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    pub conv_tol: Option<f64>,
    pub window: Option<usize>,
    pub period_tol: Option<f64>,
    pub offx_tol: Option<f64>,
    pub osc_threshold: Option<f64>,
}

impl ToleranceOverrides {
    pub fn apply(&self, mut t: Tolerances) -> Tolerances {
        if let Some(v) = self.conv_tol {
            t.conv_tol = v;
        }
        if let Some(v) = self.window {
            t.window = Some(v);
        }
        if let Some(v) = self.period_tol {
            t.period_tol = v;
        }
        if let Some(v) = self.offx_tol {
            t.offx_tol = v;
        }
        if let Some(v) = self.osc_threshold {
            t.osc_threshold = v;
        }
        t
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    /// Numerator coefficients, ascending powers.
    pub num: Vec<Literal>,
    /// Denominator coefficients, ascending powers.
    pub den: Vec<Literal>,
    pub alpha: Option<Literal>,
    pub x0: Option<Vec<Literal>>,
    pub horizon: Option<usize>,
    #[serde(default)]
    pub mode: Arithmetic,
    pub exact_d: Option<u64>,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
}

impl SystemSpec {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Parse(format!("invalid system spec: {e}")))
    }

    /// Reads a file, or stdin for `-`.
    pub fn load(path: &str) -> Result<Self, CliError> {
        let text = if path == "-" {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| CliError::Parse(format!("cannot read stdin: {e}")))?;
            s
        } else {
            fs::read_to_string(path).map_err(|e| CliError::Parse(format!("cannot read {path}: {e}")))?
        };
        Self::parse(&text)
    }

    pub fn floats(values: &[Literal]) -> Result<Vec<f64>, CliError> {
        values.iter().map(|v| v.to_f64().map_err(CliError::from)).collect()
    }

    pub fn rationals(values: &[Literal]) -> Result<Vec<BigRational>, CliError> {
        values.iter().map(|v| v.to_rational().map_err(CliError::from)).collect()
    }

    pub fn alpha_f64(&self) -> Result<Option<f64>, CliError> {
        self.alpha.as_ref().map(|a| a.to_f64().map_err(CliError::from)).transpose()
    }
}
