//! Numeric forms of the auxiliary inequalities: Grönwall bound, the two
//! recursive-sequence lemmas and the Lebesgue interpolation inequality.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Field;

/// `h(0) e^{ct} + ∫_0^t g(τ) e^{c(t-τ)} dτ` at every grid time, trapezoid rule
/// on the samples `g_samples[i] = g(t_grid[i])`.
pub fn gronwall_bound(h0: f64, c: f64, g_samples: &[f64], t_grid: &[f64]) -> Result<Vec<f64>> {
    if g_samples.len() != t_grid.len() {
        return Err(Error::invalid(format!(
            "{} g samples for {} times",
            g_samples.len(),
            t_grid.len()
        )));
    }
    if t_grid.first().is_some_and(|&t| t != 0.0) {
        return Err(Error::invalid("time grid must start at 0"));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("time grid must be strictly increasing"));
    }
    let mut out = Vec::with_capacity(t_grid.len());
    let mut integral = 0.0;
    for (i, &t) in t_grid.iter().enumerate() {
        if i > 0 {
            let dt = t - t_grid[i - 1];
            let decay = (c * dt).exp();
            integral = integral * decay + 0.5 * dt * (g_samples[i - 1] * decay + g_samples[i]);
        }
        out.push(h0 * (c * t).exp() + integral);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct YnbCheck {
    /// `c^{-1/α} b^{-1/α²}`.
    pub threshold: f64,
    pub sequence: Vec<f64>,
    /// `y_{n_max} < 1e-12`.
    pub converged: bool,
}

/// Iterates the extremal recursion `y_{n+1} = c b^n y_n^{1+α}` from `y0`.
///
/// The recursion is carried in normalized form: with `θ` the threshold,
/// `y_n = θ b^{-n/α} r_n` and `r_{n+1} = r_n^{1+α}`. This is the same
/// sequence, but `r ≡ 1` is an exact fixed point, so starting exactly at the
/// threshold does not drift under rounding.
pub fn ynb_check(c: f64, b: f64, alpha: f64, y0: f64, n_max: usize) -> Result<YnbCheck> {
    if !(b > 1.0 && b.is_finite()) {
        return Err(Error::invalid(format!("b = {b} must exceed 1")));
    }
    if !(c > 0.0 && c.is_finite() && alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid("c and alpha must be positive"));
    }
    if !(y0 >= 0.0 && y0.is_finite()) {
        return Err(Error::invalid(format!("y0 = {y0} must be nonnegative")));
    }
    let threshold = c.powf(-1.0 / alpha) * b.powf(-1.0 / (alpha * alpha));
    let log_theta = threshold.ln();
    let step = b.ln() / alpha;
    let mut log_r = (y0 / threshold).ln();
    let mut sequence = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let y = if n == 0 {
            y0
        } else {
            (log_theta - n as f64 * step + log_r).exp()
        };
        sequence.push(y);
        log_r *= 1.0 + alpha;
    }
    let converged = sequence.last().is_some_and(|&y| y < 1e-12);
    Ok(YnbCheck {
        threshold,
        sequence,
        converged,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmallLemmaCheck {
    /// `2 λ (2 b0)^α < 1`.
    pub hypothesis_ok: bool,
    /// `b0 / (1 - λ (2 b0)^α)`, only when the hypothesis holds.
    pub bound: Option<f64>,
    pub sequence: Vec<f64>,
    pub sequence_max: f64,
    /// Some(true) when the hypothesis holds and the sequence stayed below the bound.
    pub within_bound: Option<bool>,
    /// The sequence overflowed or exceeded 1e150.
    pub diverged: bool,
}

/// Iterates `b_k = b0 + λ b_{k-1}^{1+α}` from `b_0 = b0` for `k_max` steps.
pub fn small_lemma_check(b0: f64, lambda: f64, alpha: f64, k_max: usize) -> Result<SmallLemmaCheck> {
    for (name, v) in [("b0", b0), ("lambda", lambda), ("alpha", alpha)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!("{name} = {v} must be nonnegative")));
        }
    }
    let q = lambda * (2.0 * b0).powf(alpha);
    let hypothesis_ok = 2.0 * q < 1.0;
    let bound = hypothesis_ok.then(|| b0 / (1.0 - q));
    let mut sequence = Vec::with_capacity(k_max + 1);
    let mut b = b0;
    sequence.push(b);
    for _ in 0..k_max {
        b = b0 + lambda * b.powf(1.0 + alpha);
        sequence.push(b);
        if !b.is_finite() {
            break;
        }
    }
    let sequence_max = sequence.iter().copied().fold(0.0, f64::max);
    let diverged = !(sequence_max <= 1e150);
    let within_bound = bound.map(|bd| sequence_max <= bd * (1.0 + 1e-12));
    Ok(SmallLemmaCheck {
        hypothesis_ok,
        bound,
        sequence,
        sequence_max,
        within_bound,
        diverged,
    })
}

/// Discrete `L^p` norm with nodal quadrature weights, scaled to avoid overflow.
pub fn discrete_norm(f: &Field, p: f64) -> f64 {
    let m = f.max_abs();
    if m == 0.0 {
        return 0.0;
    }
    let grid = f.grid();
    let s: f64 = f
        .values()
        .iter()
        .enumerate()
        .map(|(n, v)| grid.weight(n) * (v.abs() / m).powf(p))
        .sum();
    m * s.powf(1.0 / p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InterpolationCheck {
    pub mu: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// `μ = (1/ℓ - 1/q) / (1/q - 1/r)`; infinite when `q = r > ℓ`, zero when `ℓ = q`.
pub fn interpolation_exponent(ell: f64, q: f64, r: f64) -> f64 {
    let num = 1.0 / ell - 1.0 / q;
    if num == 0.0 {
        return 0.0;
    }
    let den = 1.0 / q - 1.0 / r;
    if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Checks `‖f‖_q <= ε ‖f‖_r + ε^{-μ} ‖f‖_ℓ`.
pub fn interpolation_check(f: &Field, ell: f64, q: f64, r: f64, eps: f64) -> Result<InterpolationCheck> {
    if !(1.0 <= ell && ell <= q && q <= r && r.is_finite()) {
        return Err(Error::invalid(format!(
            "need 1 <= ell <= q <= r < inf, got ({ell}, {q}, {r})"
        )));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!("eps = {eps} must be positive")));
    }
    let mu = interpolation_exponent(ell, q, r);
    let weight = if mu.is_infinite() {
        match eps.partial_cmp(&1.0) {
            Some(std::cmp::Ordering::Less) => f64::INFINITY,
            Some(std::cmp::Ordering::Equal) => 1.0,
            _ => 0.0,
        }
    } else {
        eps.powf(-mu)
    };
    let lhs = discrete_norm(f, q);
    let l_norm = discrete_norm(f, ell);
    let tail = if l_norm == 0.0 { 0.0 } else { weight * l_norm };
    let rhs = eps * discrete_norm(f, r) + tail;
    Ok(InterpolationCheck {
        mu,
        lhs,
        rhs,
        ok: lhs <= rhs * (1.0 + 1e-12),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use proptest::prelude::*;

    #[test]
    fn gronwall_closed_forms() {
        let t: Vec<f64> = (0..=1000).map(|k| k as f64 / 1000.0).collect();
        let zeros = vec![0.0; t.len()];
        let b = gronwall_bound(3.0, 0.0, &zeros, &t).unwrap();
        assert!(b.iter().all(|&v| v == 3.0));

        let b = gronwall_bound(2.0, 1.0, &zeros, &t).unwrap();
        assert!((b[1000] - 2.0 * std::f64::consts::E).abs() < 1e-12);

        let ones = vec![1.0; t.len()];
        let b = gronwall_bound(2.0, 1.0, &ones, &t).unwrap();
        let exact = 2.0 * std::f64::consts::E + (std::f64::consts::E - 1.0);
        assert!((b[1000] - exact).abs() < 1e-4);
    }

    #[test]
    fn gronwall_rejects_bad_grids() {
        assert!(gronwall_bound(1.0, 1.0, &[0.0, 0.0], &[0.1, 0.2]).is_err());
        assert!(gronwall_bound(1.0, 1.0, &[0.0, 0.0], &[0.0, 0.0]).is_err());
        assert!(gronwall_bound(1.0, 1.0, &[0.0], &[0.0, 1.0]).is_err());
    }

    /// Raw recursion, used as an independent reference away from the threshold.
    fn raw_recursion(c: f64, b: f64, alpha: f64, y0: f64, n: usize) -> Vec<f64> {
        let mut y = vec![y0];
        for k in 0..n {
            let prev = y[k];
            y.push(c * b.powi(k as i32) * prev.powf(1.0 + alpha));
        }
        y
    }

    #[test]
    fn ynb_threshold_examples() {
        let r = ynb_check(1.0, 2.0, 1.0, 0.5, 60).unwrap();
        assert_eq!(r.threshold, 0.5);
        for (got, want) in r.sequence.iter().zip([0.5, 0.25, 0.125, 0.0625]) {
            assert!((got - want).abs() <= 1e-15 * want);
        }
        assert!(r.converged);

        let r = ynb_check(1.0, 2.0, 1.0, 0.6, 12).unwrap();
        let raw = raw_recursion(1.0, 2.0, 1.0, 0.6, 5);
        assert!((r.sequence[5] - 5.3410).abs() < 1e-3, "{}", r.sequence[5]);
        for k in 0..=5 {
            assert!((r.sequence[k] - raw[k]).abs() <= 1e-12 * raw[k]);
        }
        assert!(!r.converged);

        let r = ynb_check(1.0, 2.0, 1.0, 0.0, 10).unwrap();
        assert!(r.sequence.iter().all(|&y| y == 0.0));
        assert!(r.converged);
    }

    #[test]
    fn ynb_sharpness() {
        let r = ynb_check(1.0, 2.0, 1.0, 0.5, 60).unwrap();
        assert!(r.converged);
        let r = ynb_check(1.0, 2.0, 1.0, 0.5 * 1.001, 60).unwrap();
        assert!(!r.converged);
    }

    #[test]
    fn ynb_argument_errors() {
        assert!(ynb_check(1.0, 1.0, 1.0, 0.1, 5).is_err());
        assert!(ynb_check(0.0, 2.0, 1.0, 0.1, 5).is_err());
        assert!(ynb_check(1.0, 2.0, 1.0, -0.1, 5).is_err());
    }

    #[test]
    fn small_lemma_examples() {
        let r = small_lemma_check(0.1, 1.0, 1.0, 200).unwrap();
        assert!(r.hypothesis_ok);
        assert!((r.bound.unwrap() - 0.125).abs() < 1e-15);
        let fixed = (1.0 - 0.6f64.sqrt()) / 2.0;
        assert!((r.sequence.last().unwrap() - fixed).abs() < 1e-12);
        assert_eq!(r.within_bound, Some(true));

        let r = small_lemma_check(0.0, 3.0, 0.5, 20).unwrap();
        assert_eq!(r.bound, Some(0.0));
        assert!(r.sequence.iter().all(|&b| b == 0.0));
        assert_eq!(r.within_bound, Some(true));

        let r = small_lemma_check(0.5, 1.0, 1.0, 100).unwrap();
        assert!(!r.hypothesis_ok);
        assert_eq!(r.bound, None);
        assert!(r.diverged);
    }

    #[test]
    fn interpolation_examples() {
        assert_eq!(interpolation_exponent(1.0, 2.0, 4.0), 2.0);
        let g = GridSpec::unit_line(9).unwrap();
        let z = Field::zeros(&g);
        let r = interpolation_check(&z, 1.0, 2.0, 4.0, 0.5).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.ok);
        assert!(interpolation_check(&z, 2.0, 1.0, 4.0, 0.5).is_err());
        assert!(interpolation_check(&z, 1.0, 2.0, 4.0, 0.0).is_err());
    }

    #[test]
    fn discrete_norm_of_constant() {
        let g = GridSpec::rect(5, 9, 1.0, 2.0).unwrap();
        let f = Field::constant(&g, 3.0).unwrap();
        // ‖3‖_p over area 2 = 3 * 2^{1/p}
        for p in [1.0, 2.0, 3.5] {
            assert!((discrete_norm(&f, p) - 3.0 * 2f64.powf(1.0 / p)).abs() < 1e-13);
        }
    }

    proptest! {
        #[test]
        fn interpolation_never_fails(
            v in prop::collection::vec(-5.0..5.0f64, 25),
            ell in 1.0..4.0f64,
            dq in 0.0..4.0f64,
            dr in 0.0..6.0f64,
            eps in 0.01..10.0f64,
        ) {
            let g = GridSpec::unit_square(5).unwrap();
            let f = Field::new(g, v).unwrap();
            let r = interpolation_check(&f, ell, ell + dq, ell + dq + dr, eps).unwrap();
            prop_assert!(r.ok, "{:?}", r);
        }

        #[test]
        fn small_lemma_bound_holds_under_hypothesis(b0 in 0.0..2.0f64, lambda in 0.0..5.0f64, alpha in 0.05..3.0f64) {
            let r = small_lemma_check(b0, lambda, alpha, 300).unwrap();
            if r.hypothesis_ok {
                prop_assert_eq!(r.within_bound, Some(true));
            }
        }
    }
}
