//! Shared helpers for the integration suites.

use coloc::harness::{Method, Report, RobotMetrics, Scenario};

/// Chi-square quantile via the Wilson-Hilferty cube approximation,
/// independent of anything in the crate under test. Accurate to ~0.1% for
/// the degrees of freedom used here.
pub fn chi2_quantile(dof: f64, p: f64) -> f64 {
    let z = normal_quantile(p);
    let a = 2.0 / (9.0 * dof);
    dof * (1.0 - a + z * a.sqrt()).powi(3)
}

/// Standard normal quantile (Acklam's rational approximation).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0);
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let p_low = 0.02425;
    if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -normal_quantile(1.0 - p)
    }
}

/// Metrics entry of one method in a report.
pub fn method_metrics<'a>(report: &'a Report, method: Method) -> &'a [RobotMetrics] {
    &report
        .methods
        .iter()
        .find(|m| m.method == method.name())
        .unwrap_or_else(|| panic!("method {} missing from report", method.name()))
        .robots
}

/// Default scenario restricted to the given methods.
pub fn scenario_with(methods: &[Method]) -> Scenario {
    let mut s = coloc::harness::default_scenario();
    s.run.methods = methods.iter().map(|m| m.name().to_string()).collect();
    s
}

/// Perfect-communication variant: always-on link, no transport delay, no
/// loss, and zero-delay centralized corrections.
pub fn perfect_comms(mut s: Scenario) -> Scenario {
    s.link.availability.clear();
    s.link.latency = 0.0;
    s.link.drop_prob = 0.0;
    s.filter.ccl_latency_steps = 0;
    s
}
