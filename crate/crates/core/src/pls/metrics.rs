use super::{PlsError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub pearson_r: f64,
    pub rmse: f64,
}

/// Pearson correlation and RMSE of `yhat` against `y`.
///
/// Zero variance in either argument yields [`PlsError::UndefinedCorrelation`],
/// which still carries the RMSE.
pub fn metrics(y: &[f64], yhat: &[f64]) -> Result<Metrics> {
    if y.len() != yhat.len() {
        return Err(PlsError::LengthMismatch { expected: y.len(), got: yhat.len() });
    }
    let n = y.len();
    if n < 2 {
        return Err(PlsError::TooFewSamples(n));
    }
    let nf = n as f64;
    let sse: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    let rmse = (sse / nf).sqrt();
    let my = y.iter().sum::<f64>() / nf;
    let mh = yhat.iter().sum::<f64>() / nf;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in y.iter().zip(yhat) {
        let (da, db) = (a - my, b - mh);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(PlsError::UndefinedCorrelation { rmse });
    }
    let pearson_r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    Ok(Metrics { pearson_r, rmse })
}
