//! Conductivity laws `sigma(s)` on `s >= 0`, their derivatives, sampled
//! verification of the growth/decay bounds the existence theory needs, and
//! an empirical A2-weight diagnostic.
//!
//! Built-in default parameters (`c3 = 0.5, c0 = 0.1, beta = 1, gamma = 1`)
//! are artifact choices, not values taken from any analysis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Dim, Field};

/// Monotone piecewise-cubic Hermite interpolant (Fritsch–Butland slopes).
#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneCubic {
    s: Vec<f64>,
    v: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("tabulated conductivity needs at least 2 samples"));
        }
        if points.iter().any(|(s, v)| !s.is_finite() || !v.is_finite()) {
            return Err(Error::invalid("tabulated conductivity samples must be finite"));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::invalid("tabulated s values must be strictly increasing"));
        }
        if points.iter().any(|&(_, v)| v <= 0.0) {
            return Err(Error::invalid("tabulated conductivity values must be positive"));
        }
        let s: Vec<f64> = points.iter().map(|p| p.0).collect();
        let v: Vec<f64> = points.iter().map(|p| p.1).collect();
        let n = s.len();
        let h: Vec<f64> = s.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (v[k + 1] - v[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for k in 1..n - 1 {
                if delta[k - 1] * delta[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
                }
            }
            d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(MonotoneCubic { s, v, d })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.s[0], self.s[self.s.len() - 1])
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.s.iter().copied().zip(self.v.iter().copied())
    }

    fn locate(&self, s: f64) -> Result<(usize, f64, f64)> {
        let (lo, hi) = self.range();
        if !(s >= lo && s <= hi) {
            return Err(Error::Extrapolation { s, lo, hi });
        }
        let k = match self.s.partition_point(|&x| x <= s) {
            0 => 0,
            p => (p - 1).min(self.s.len() - 2),
        };
        let h = self.s[k + 1] - self.s[k];
        Ok((k, h, (s - self.s[k]) / h))
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        let (k, h, t) = self.locate(s)?;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Ok(h00 * self.v[k] + h10 * h * self.d[k] + h01 * self.v[k + 1] + h11 * h * self.d[k + 1])
    }

    /// Exact `max |p'|` over the whole table (the derivative is quadratic on each interval).
    pub fn max_abs_slope(&self) -> f64 {
        let mut best = 0.0f64;
        for k in 0..self.s.len() - 1 {
            let h = self.s[k + 1] - self.s[k];
            let dv = (self.v[k] - self.v[k + 1]) / h;
            let a = 6.0 * dv + 3.0 * self.d[k] + 3.0 * self.d[k + 1];
            let b = -6.0 * dv - 4.0 * self.d[k] - 2.0 * self.d[k + 1];
            let mut cands = vec![self.d[k].abs(), self.d[k + 1].abs()];
            if a != 0.0 {
                let t = -b / (2.0 * a);
                if t > 0.0 && t < 1.0 {
                    cands.push((a * t * t + b * t + self.d[k]).abs());
                }
            }
            best = cands.into_iter().fold(best, f64::max);
        }
        best
    }

    pub fn derivative(&self, s: f64) -> Result<f64> {
        let (k, h, t) = self.locate(s)?;
        let t2 = t * t;
        let dh00 = (6.0 * t2 - 6.0 * t) / h;
        let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
        let dh01 = (-6.0 * t2 + 6.0 * t) / h;
        let dh11 = 3.0 * t2 - 2.0 * t;
        Ok(dh00 * self.v[k] + dh10 * self.d[k] + dh01 * self.v[k + 1] + dh11 * self.d[k + 1])
    }
}

/// Shape-preserving three-point end slope.
fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() || del0 == 0.0 {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConductivityModel {
    Constant {
        value: f64,
    },
    /// `sigma(s) = exp(-rate * s)`.
    ExponentialDecay {
        rate: f64,
    },
    /// `sigma(s) = c3 (1 + sin(exp(gamma s))) + c0 exp(-beta s)`: oscillates
    /// between roughly 0 and `2 c3` as `s` grows.
    OscillatorySine {
        c3: f64,
        c0: f64,
        beta: f64,
        gamma: f64,
    },
    Tabulated(MonotoneCubic),
}

impl Default for ConductivityModel {
    fn default() -> Self {
        ConductivityModel::OscillatorySine {
            c3: 0.5,
            c0: 0.1,
            beta: 1.0,
            gamma: 1.0,
        }
    }
}

fn check_s(s: f64) -> Result<()> {
    if s.is_nan() || s < 0.0 {
        return Err(Error::invalid(format!(
            "conductivity evaluated at s = {s}; laws are defined on [0, inf)"
        )));
    }
    Ok(())
}

impl ConductivityModel {
    pub fn oscillatory(c3: f64, c0: f64, beta: f64, gamma: f64) -> Result<Self> {
        for (name, v) in [("c3", c3), ("c0", c0), ("beta", beta), ("gamma", gamma)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} = {v} must be positive")));
            }
        }
        Ok(ConductivityModel::OscillatorySine { c3, c0, beta, gamma })
    }

    pub fn constant(value: f64) -> Result<Self> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::invalid(format!(
                "constant conductivity {value} must be positive"
            )));
        }
        Ok(ConductivityModel::Constant { value })
    }

    pub fn exponential_decay(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::invalid(format!("decay rate {rate} must be positive")));
        }
        Ok(ConductivityModel::ExponentialDecay { rate })
    }

    pub fn tabulated(points: &[(f64, f64)]) -> Result<Self> {
        Ok(ConductivityModel::Tabulated(MonotoneCubic::new(points)?))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ConductivityModel::Constant { .. } => "constant",
            ConductivityModel::ExponentialDecay { .. } => "exponential_decay",
            ConductivityModel::OscillatorySine { .. } => "oscillatory_sine",
            ConductivityModel::Tabulated(_) => "tabulated",
        }
    }

    pub fn sigma(&self, s: f64) -> Result<f64> {
        check_s(s)?;
        Ok(match self {
            ConductivityModel::Constant { value } => *value,
            ConductivityModel::ExponentialDecay { rate } => (-rate * s).exp(),
            ConductivityModel::OscillatorySine { c3, c0, beta, gamma } => {
                c3 * (1.0 + (gamma * s).exp().sin()) + c0 * (-beta * s).exp()
            }
            ConductivityModel::Tabulated(table) => table.eval(s)?,
        })
    }

    pub fn sigma_prime(&self, s: f64) -> Result<f64> {
        check_s(s)?;
        Ok(match self {
            ConductivityModel::Constant { .. } => 0.0,
            ConductivityModel::ExponentialDecay { rate } => -rate * (-rate * s).exp(),
            ConductivityModel::OscillatorySine { c3, c0, beta, gamma } => {
                let e = (gamma * s).exp();
                c3 * e.cos() * gamma * e - c0 * beta * (-beta * s).exp()
            }
            ConductivityModel::Tabulated(table) => table.derivative(s)?,
        })
    }

    /// Constants for which the bounds hold with the tightest closed form.
    ///
    /// Tabulated laws use the sample range (`c0 = min`, `c1 = max`) and the
    /// exact largest slope of the interpolant, each with a rounding margin.
    pub fn natural_h1(&self) -> H1Constants {
        match self {
            ConductivityModel::Constant { value } => H1Constants {
                c0: *value,
                c1: *value,
                c2: 1.0,
                beta: 1.0,
                gamma: 1.0,
            },
            ConductivityModel::ExponentialDecay { rate } => H1Constants {
                c0: 1.0,
                c1: 1.0,
                c2: *rate,
                beta: *rate,
                gamma: 1.0,
            },
            ConductivityModel::OscillatorySine { c3, c0, beta, gamma } => H1Constants {
                c0: *c0,
                c1: 2.0 * c3 + c0,
                c2: c3 * gamma + c0 * beta,
                beta: *beta,
                gamma: *gamma,
            },
            ConductivityModel::Tabulated(table) => {
                let (lo, hi) = table
                    .points()
                    .fold((f64::INFINITY, 0.0f64), |(lo, hi), (_, v)| (lo.min(v), hi.max(v)));
                H1Constants {
                    c0: lo * (1.0 - 1e-12),
                    c1: hi * (1.0 + 1e-12),
                    c2: (table.max_abs_slope() * (1.0 + 1e-9)).max(f64::MIN_POSITIVE),
                    beta: 1.0,
                    gamma: 1.0,
                }
            }
        }
    }
}

/// Constants of the bounds `c0 e^{-beta s} <= sigma(s) <= c1`, `|sigma'(s)| <= c2 e^{gamma s}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct H1Constants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for H1Constants {
    fn default() -> Self {
        H1Constants {
            c0: 0.1,
            c1: 1.2,
            c2: 1.0,
            beta: 1.0,
            gamma: 1.0,
        }
    }
}

impl H1Constants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c0", self.c0),
            ("c1", self.c1),
            ("c2", self.c2),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("H1 constant {name} = {v} must be positive")));
            }
        }
        Ok(())
    }
}

/// Worst sampled margin of one inequality; `ok` iff `margin >= 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    pub ok: bool,
    pub margin: f64,
    pub worst_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct H1Report {
    pub lower: BoundCheck,
    pub upper: BoundCheck,
    pub deriv: BoundCheck,
}

impl H1Report {
    pub fn lower_ok(&self) -> bool {
        self.lower.ok
    }

    pub fn upper_ok(&self) -> bool {
        self.upper.ok
    }

    pub fn deriv_ok(&self) -> bool {
        self.deriv.ok
    }

    pub fn all_ok(&self) -> bool {
        self.lower.ok && self.upper.ok && self.deriv.ok
    }
}

struct Worst {
    margin: f64,
    s: f64,
}

impl Worst {
    fn new() -> Self {
        Worst {
            margin: f64::INFINITY,
            s: 0.0,
        }
    }

    fn update(&mut self, margin: f64, s: f64) {
        if margin < self.margin {
            self.margin = margin;
            self.s = s;
        }
    }

    fn finish(self) -> BoundCheck {
        BoundCheck {
            ok: self.margin >= 0.0,
            margin: self.margin,
            worst_s: self.s,
        }
    }
}

/// Samples `n_samples` points uniformly on `[0, s_max]` and reports the worst
/// margin of each bound.
pub fn verify_h1(model: &ConductivityModel, consts: &H1Constants, s_max: f64, n_samples: usize) -> Result<H1Report> {
    if !(s_max.is_finite() && s_max > 0.0) {
        return Err(Error::invalid(format!("s_max = {s_max} must be positive")));
    }
    if n_samples < 2 {
        return Err(Error::invalid("n_samples must be at least 2"));
    }
    consts.validate()?;
    let (mut lower, mut upper, mut deriv) = (Worst::new(), Worst::new(), Worst::new());
    for k in 0..n_samples {
        let s = if k == n_samples - 1 {
            s_max
        } else {
            s_max * k as f64 / (n_samples - 1) as f64
        };
        let sig = model.sigma(s)?;
        let dsig = model.sigma_prime(s)?;
        lower.update(sig - consts.c0 * (-consts.beta * s).exp(), s);
        upper.update(consts.c1 - sig, s);
        deriv.update(consts.c2 * (consts.gamma * s).exp() - dsig.abs(), s);
    }
    Ok(H1Report {
        lower: lower.finish(),
        upper: upper.finish(),
        deriv: deriv.finish(),
    })
}

/// Nodal `sigma(u)`.
pub fn sigma_field(model: &ConductivityModel, u: &Field) -> Result<Field> {
    let values = u.values().iter().map(|&s| model.sigma(s)).collect::<Result<Vec<_>>>()?;
    Field::new(u.grid().clone(), values)
}

/// Nodal `sigma'(u)`.
pub fn sigma_prime_field(model: &ConductivityModel, u: &Field) -> Result<Field> {
    let values = u
        .values()
        .iter()
        .map(|&s| model.sigma_prime(s))
        .collect::<Result<Vec<_>>>()?;
    Field::new(u.grid().clone(), values)
}

/// Summed-area table over a 2D (or 1D, one row) array for O(1) block sums.
struct Prefix {
    nx: usize,
    sums: Vec<f64>,
}

impl Prefix {
    fn new(values: &[f64], nx: usize, ny: usize) -> Self {
        let w = nx + 1;
        let mut sums = vec![0.0; w * (ny + 1)];
        for j in 0..ny {
            let mut row = 0.0;
            for i in 0..nx {
                row += values[j * nx + i];
                sums[(j + 1) * w + i + 1] = sums[j * w + i + 1] + row;
            }
        }
        Prefix { nx, sums }
    }

    /// Sum over `i0..i1`, `j0..j1` (half-open).
    fn block(&self, i0: usize, i1: usize, j0: usize, j1: usize) -> f64 {
        let w = self.nx + 1;
        self.sums[j1 * w + i1] - self.sums[j0 * w + i1] - self.sums[j1 * w + i0] + self.sums[j0 * w + i0]
    }
}

/// Largest `(mean sigma) * (mean 1/sigma)` over all axis-aligned node blocks
/// of side `2r` (per radius `r`) that fit in the grid. Always `>= 1`.
pub fn a2_diagnostic(weight: &Field, window_radii: &[usize]) -> Result<f64> {
    let grid = weight.grid();
    if let Some(k) = weight.values().iter().position(|&v| v <= 0.0) {
        return Err(Error::invalid(format!(
            "A2 weight must be positive; node {k} has {}",
            weight.values()[k]
        )));
    }
    if window_radii.is_empty() {
        return Err(Error::invalid("no window radii given"));
    }
    let (nx, ny) = (grid.nx(), grid.ny());
    let recip: Vec<f64> = weight.values().iter().map(|v| 1.0 / v).collect();
    let p = Prefix::new(weight.values(), nx, ny);
    let q = Prefix::new(&recip, nx, ny);
    let mut worst: f64 = 1.0;
    for &r in window_radii {
        let side = 2 * r;
        let side_y = match grid.dim() {
            Dim::One => 1,
            Dim::Two => side,
        };
        if r == 0 || side > nx || side_y > ny {
            return Err(Error::invalid(format!(
                "window radius {r} (side {side} nodes) does not fit a {nx} x {ny} grid"
            )));
        }
        let count = (side * side_y) as f64;
        for j0 in 0..=ny - side_y {
            for i0 in 0..=nx - side {
                let a = p.block(i0, i0 + side, j0, j0 + side_y) / count;
                let b = q.block(i0, i0 + side, j0, j0 + side_y) / count;
                worst = worst.max(a * b);
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use proptest::prelude::*;

    fn osc() -> ConductivityModel {
        ConductivityModel::oscillatory(0.5, 0.1, 1.0, 1.0).unwrap()
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(ConductivityModel::constant(1.0).unwrap().sigma(7.3).unwrap(), 1.0);
        // 0.5 (1 + sin 1) + 0.1, evaluated with 20-digit arithmetic
        let expect = 1.020_735_492_403_948_2;
        assert!((osc().sigma(0.0).unwrap() - expect).abs() < 1e-15);
        assert_eq!(
            ConductivityModel::exponential_decay(2.0).unwrap().sigma(0.0).unwrap(),
            1.0
        );
    }

    #[test]
    fn sigma_prime_examples() {
        let c = ConductivityModel::constant(3.0).unwrap();
        assert_eq!(c.sigma_prime(4.0).unwrap(), 0.0);
        let e = ConductivityModel::exponential_decay(2.0).unwrap();
        assert_eq!(e.sigma_prime(0.0).unwrap(), -2.0);
        // 0.5 cos(1) - 0.1
        let expect = 0.170_151_152_934_069_9;
        assert!((osc().sigma_prime(0.0).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn negative_argument_rejected() {
        assert!(osc().sigma(-1e-3).is_err());
        assert!(osc().sigma_prime(-1.0).is_err());
        assert!(osc().sigma(f64::NAN).is_err());
    }

    #[test]
    fn tabulated_range_and_interpolation() {
        let t = ConductivityModel::tabulated(&[(0.0, 1.0), (1.0, 2.0), (2.0, 2.0), (3.0, 0.5)]).unwrap();
        assert_eq!(t.sigma(1.0).unwrap(), 2.0);
        assert!(matches!(t.sigma(3.5), Err(Error::Extrapolation { .. })));
        // flat segment stays flat, local max has zero slope
        assert_eq!(t.sigma_prime(1.0).unwrap(), 0.0);
        assert!((t.sigma(1.5).unwrap() - 2.0).abs() < 1e-15);
        for k in 0..=300 {
            let s = 3.0 * k as f64 / 300.0;
            let v = t.sigma(s).unwrap();
            assert!(v > 0.0 && v <= 2.0 + 1e-15, "s = {s}, v = {v}");
        }
        assert!(ConductivityModel::tabulated(&[(0.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(ConductivityModel::tabulated(&[(0.0, 1.0), (1.0, -2.0)]).is_err());
    }

    #[test]
    fn tabulated_derivative_matches_finite_difference() {
        let pts: Vec<(f64, f64)> = (0..12)
            .map(|k| {
                let s = k as f64 * 0.5;
                (s, 1.0 + (s * 1.3).sin().powi(2))
            })
            .collect();
        let t = ConductivityModel::tabulated(&pts).unwrap();
        for k in 1..100 {
            let s = 0.05 + 5.4 * k as f64 / 100.0;
            let d = 1e-6;
            let fd = (t.sigma(s + d).unwrap() - t.sigma(s - d).unwrap()) / (2.0 * d);
            assert!((fd - t.sigma_prime(s).unwrap()).abs() < 1e-5, "s = {s}");
        }
    }

    #[test]
    fn verify_h1_examples() {
        let consts = H1Constants {
            c0: 0.5,
            c1: 2.0,
            c2: 1.0,
            beta: 1.0,
            gamma: 1.0,
        };
        let r = verify_h1(&ConductivityModel::constant(1.0).unwrap(), &consts, 10.0, 1001).unwrap();
        assert!(r.all_ok());

        let claimed = H1Constants {
            c1: 1.0,
            ..osc().natural_h1()
        };
        let r = verify_h1(&osc(), &claimed, 10.0, 10_001).unwrap();
        assert!(!r.upper_ok());
        assert!(r.upper.margin < 0.0);

        let e = ConductivityModel::exponential_decay(2.0).unwrap();
        let claimed = H1Constants {
            c0: 1.0,
            beta: 1.0,
            c1: 1.0,
            c2: 2.0,
            gamma: 1.0,
        };
        let r = verify_h1(&e, &claimed, 10.0, 1001).unwrap();
        assert!(!r.lower_ok());
        assert!(r.upper_ok() && r.deriv_ok());
    }

    #[test]
    fn verify_h1_own_constants_pass() {
        for (c3, c0, beta, gamma) in [(0.5, 0.1, 1.0, 1.0), (2.0, 0.3, 0.5, 0.7), (0.1, 1.0, 2.0, 0.3)] {
            let m = ConductivityModel::oscillatory(c3, c0, beta, gamma).unwrap();
            let r = verify_h1(&m, &m.natural_h1(), 20.0, 20_001).unwrap();
            assert!(r.all_ok(), "{r:?}");
        }
    }

    #[test]
    fn verify_h1_argument_errors() {
        let m = osc();
        assert!(verify_h1(&m, &m.natural_h1(), 0.0, 10).is_err());
        assert!(verify_h1(&m, &m.natural_h1(), 1.0, 1).is_err());
    }

    #[test]
    fn a2_constant_and_two_valued() {
        let g = GridSpec::unit_line(8).unwrap();
        let c = Field::constant(&g, 3.0).unwrap();
        assert!((a2_diagnostic(&c, &[1, 2, 3, 4]).unwrap() - 1.0).abs() < 1e-15);

        let g = GridSpec::unit_line(4).unwrap();
        let two = Field::new(g, vec![1.0, 1.0, 4.0, 4.0]).unwrap();
        assert!((a2_diagnostic(&two, &[2]).unwrap() - 1.5625).abs() < 1e-15);
        assert!(a2_diagnostic(&two, &[3]).is_err());
    }

    #[test]
    fn a2_two_valued_2d() {
        let g = GridSpec::unit_square(4).unwrap();
        let f = Field::from_fn(&g, |x, _| if x < 0.5 { 1.0 } else { 4.0 }).unwrap();
        assert!((a2_diagnostic(&f, &[2]).unwrap() - 1.5625).abs() < 1e-15);
    }

    #[test]
    fn a2_grows_with_radius_for_exponential_weight() {
        let g = GridSpec::line(41, 8.0).unwrap();
        let w = Field::from_fn(&g, |x, _| (-x).exp()).unwrap();
        let vals: Vec<f64> = (1..=20).map(|r| a2_diagnostic(&w, &[r]).unwrap()).collect();
        assert!(vals.windows(2).all(|p| p[1] > p[0]), "{vals:?}");
    }

    fn analytic_models() -> Vec<ConductivityModel> {
        vec![
            ConductivityModel::constant(0.7).unwrap(),
            ConductivityModel::exponential_decay(1.5).unwrap(),
            osc(),
            ConductivityModel::oscillatory(1.0, 0.2, 0.5, 0.4).unwrap(),
        ]
    }

    #[test]
    fn builtins_positive_on_0_50() {
        for m in analytic_models() {
            for k in 0..=5000 {
                let s = 50.0 * k as f64 / 5000.0;
                assert!(m.sigma(s).unwrap() > 0.0, "{m:?} at {s}");
            }
        }
    }

    proptest! {
        #[test]
        // sin(e^s) oscillates faster than a 1e-5 stencil resolves beyond s ~ 3.5
        fn derivative_matches_central_difference(s in 1e-4..3.5f64) {
            let delta = 1e-5;
            for m in analytic_models() {
                let fd = (m.sigma(s + delta).unwrap() - m.sigma(s - delta).unwrap()) / (2.0 * delta);
                let d = m.sigma_prime(s).unwrap();
                prop_assert!((d - fd).abs() <= 1e-6 * (1.0 + d.abs()), "{:?}: {} vs {}", m, d, fd);
            }
        }

        #[test]
        fn a2_at_least_one(v in prop::collection::vec(0.01..100.0f64, 49), r in 1usize..4) {
            let g = GridSpec::unit_square(7).unwrap();
            let f = Field::new(g, v).unwrap();
            prop_assert!(a2_diagnostic(&f, &[r]).unwrap() >= 1.0 - 1e-12);
        }
    }
}
