use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Targets with magnitude at or below this are skipped by [`mape`].
pub const MAPE_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Mae,
    #[default]
    Mape,
    Mse,
}

impl Metric {
    pub fn evaluate(self, y: &[f64], pred: &[f64]) -> Result<f64> {
        match self {
            Metric::Mae => mae(y, pred),
            Metric::Mape => mape(y, pred),
            Metric::Mse => mse(y, pred),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Mae => "mae",
            Metric::Mape => "mape",
            Metric::Mse => "mse",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mae" => Ok(Metric::Mae),
            "mape" => Ok(Metric::Mape),
            "mse" => Ok(Metric::Mse),
            other => Err(Error::invalid(format!("unknown metric {other:?}"))),
        }
    }
}

fn check(y: &[f64], pred: &[f64]) -> Result<()> {
    if y.len() != pred.len() {
        return Err(Error::invalid(format!(
            "{} targets but {} predictions",
            y.len(),
            pred.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::invalid("metric over an empty sample"));
    }
    Ok(())
}

pub fn mae(y: &[f64], pred: &[f64]) -> Result<f64> {
    check(y, pred)?;
    Ok(y.iter().zip(pred).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

pub fn mse(y: &[f64], pred: &[f64]) -> Result<f64> {
    check(y, pred)?;
    Ok(y.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64)
}

/// Mean absolute percentage error in percent, over targets with
/// `|y| > 1e-9`.
pub fn mape(y: &[f64], pred: &[f64]) -> Result<f64> {
    check(y, pred)?;
    let (sum, n) = y
        .iter()
        .zip(pred)
        .filter(|(a, _)| a.abs() > MAPE_GUARD)
        .fold((0.0, 0usize), |(s, n), (a, b)| {
            (s + ((a - b) / a).abs(), n + 1)
        });
    if n == 0 {
        return Err(Error::invalid("every target is too close to zero for MAPE"));
    }
    Ok(100.0 * sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[0.0, 10.0], &[1.0, 9.0]).unwrap(), 1.0);
        assert_eq!(mape(&[10.0], &[9.0]).unwrap(), 10.0);
        assert_eq!(mape(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0, 2.0], &[1.0, 0.0]).unwrap(), 2.5);
    }

    #[test]
    fn errors() {
        assert!(mae(&[], &[]).is_err());
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mape(&[0.0, 1e-12], &[1.0, 1.0]).is_err());
        // Near-zero targets are skipped, not divided by.
        assert_eq!(mape(&[0.0, 10.0], &[5.0, 11.0]).unwrap(), 10.0);
    }
}
