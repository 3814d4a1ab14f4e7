//! Autocorrelation, effective sample size and a split-trace stationarity check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_TRACE: usize = 50;

/// Sokal's window constant: stop summing once `M >= C * tau(M)`.
const WINDOW_C: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub autocorr_time: f64,
    pub ess: f64,
    pub geweke_z: f64,
    pub stationary: bool,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    (m, v)
}

/// Integrated autocorrelation time `1 + 2 sum_{t=1}^{M} rho_t` with the
/// self-consistent window. `None` for a constant trace.
pub fn integrated_autocorr_time(x: &[f64]) -> Option<f64> {
    let n = x.len();
    let (m, var) = mean_var(x);
    if !(var > 0.0) {
        return None;
    }
    let centered: Vec<f64> = x.iter().map(|v| v - m).collect();
    let mut tau = 1.0;
    for t in 1..n {
        let c: f64 = centered[..n - t].iter().zip(&centered[t..]).map(|(a, b)| a * b).sum::<f64>()
            / (n as f64 * var);
        tau += 2.0 * c;
        if t as f64 >= WINDOW_C * tau {
            break;
        }
    }
    Some(tau.max(1.0 / n as f64))
}

/// Effective sample size `n / tau`; a constant trace counts as one sample.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    match integrated_autocorr_time(x) {
        Some(t) => x.len() as f64 / t,
        None => 1.0,
    }
}

pub fn chain_diagnostics(trace: &[f64]) -> Result<ChainDiagnostics> {
    let n = trace.len();
    if n < MIN_TRACE {
        return Err(Error::InsufficientData { needed: MIN_TRACE, got: n });
    }
    let Some(tau) = integrated_autocorr_time(trace) else {
        return Ok(ChainDiagnostics {
            autocorr_time: n as f64,
            ess: 1.0,
            geweke_z: 0.0,
            stationary: true,
        });
    };
    // first 10% against last 50%, variances inflated by the autocorrelation time
    let head = &trace[..(n / 10).max(2)];
    let tail = &trace[n - n / 2..];
    let (m1, v1) = mean_var(head);
    let (m2, v2) = mean_var(tail);
    let se = (v1 * tau / head.len() as f64 + v2 * tau / tail.len() as f64).sqrt();
    let z = if se > 0.0 { (m1 - m2).abs() / se } else { 0.0 };
    Ok(ChainDiagnostics { autocorr_time: tau, ess: n as f64 / tau, geweke_z: z, stationary: z < 3.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::RngStream;

    #[test]
    fn white_noise() {
        let mut r = RngStream::new(1, 0);
        let x: Vec<f64> = (0..20_000).map(|_| r.normal()).collect();
        let d = chain_diagnostics(&x).unwrap();
        assert!((d.autocorr_time - 1.0).abs() < 0.2, "{d:?}");
        assert!(d.stationary);
    }

    #[test]
    fn ar1() {
        let rho: f64 = 0.9;
        let mut r = RngStream::new(2, 0);
        let mut x = Vec::with_capacity(100_000);
        let mut v = 0.0;
        for _ in 0..100_000 {
            v = rho * v + (1.0 - rho * rho).sqrt() * r.normal();
            x.push(v);
        }
        let d = chain_diagnostics(&x).unwrap();
        let want = (1.0 + rho) / (1.0 - rho);
        assert!((d.autocorr_time - want).abs() < 0.3 * want, "{d:?}");
    }

    #[test]
    fn constant_trace_convention() {
        let d = chain_diagnostics(&[3.0; 80]).unwrap();
        assert_eq!(d.autocorr_time, 80.0);
        assert!(d.stationary);
    }

    #[test]
    fn short_trace_rejected() {
        assert!(matches!(
            chain_diagnostics(&[0.0; 10]),
            Err(Error::InsufficientData { needed: 50, got: 10 })
        ));
    }

    #[test]
    fn drifting_trace_flagged() {
        let x: Vec<f64> = (0..1000).map(|i| i as f64 * 0.01 + ((i * 7919) % 13) as f64 * 0.001).collect();
        assert!(!chain_diagnostics(&x).unwrap().stationary);
    }
}
