//! The Young function family Φ(t) = t^r (1 + log⁺ t)^δ with r ≥ 1, δ ≥ 0,
//! its inverse, the conjugate weight map w = 1/Φ(v⁻¹), and the power
//! comparison bound Φ(t) ≤ C t^{r+ε} for t ≥ 1.
//!
//! log is the natural logarithm; all the inequalities handled here are
//! base-invariant up to constants, and Φ(e) = 2e is a convenient vector for
//! r = δ = 1.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::GridFunction;
use crate::{Error, Result};

/// Parameter pair of Φ(t) = t^r (1 + log⁺ t)^δ.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct YoungPhi {
    r: f64,
    delta: f64,
}

impl YoungPhi {
    pub fn new(r: f64, delta: f64) -> Result<Self> {
        if !(r.is_finite() && r >= 1.0) {
            return Err(Error::BadParameter(format!("r must be ≥ 1, got {r}")));
        }
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::BadParameter(format!("delta must be ≥ 0, got {delta}")));
        }
        let phi = Self { r, delta };
        phi.spot_check();
        Ok(phi)
    }

    /// φ(t) = t, the linear case: Luxemburg averages become plain averages.
    pub fn linear() -> Self {
        Self { r: 1.0, delta: 0.0 }
    }

    /// Pure power case Φ(t) = t^r.
    pub fn power(r: f64) -> Result<Self> {
        Self::new(r, 0.0)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Numerical sanity: Φ(0)=0, Φ(1)=1, increasing and midpoint-convex on a
    /// sample grid. Run once at construction.
    fn spot_check(&self) {
        assert_eq!(self.eval(0.0), 0.0);
        assert_eq!(self.eval(1.0), 1.0);
        let pts = [0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 8.0, 100.0, 1e6];
        for w in pts.windows(2) {
            assert!(self.eval(w[0]) <= self.eval(w[1]), "Φ not increasing");
        }
        for w in pts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let lhs = self.eval(mid);
            let rhs = 0.5 * (self.eval(w[0]) + self.eval(w[1]));
            assert!(lhs <= rhs * (1.0 + 1e-12), "Φ not midpoint-convex at {mid}");
        }
    }

    /// t^r; the r = 1 case stays exact.
    #[inline]
    pub fn power_r(&self, t: f64) -> f64 {
        if self.r == 1.0 {
            t
        } else {
            t.powf(self.r)
        }
    }

    /// Φ(t) for t ≥ 0. For t ≤ 1 this is exactly t^r (log⁺ vanishes).
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0 && !t.is_nan());
        if t <= 1.0 || self.delta == 0.0 {
            return self.power_r(t);
        }
        let log_factor = 1.0 + t.ln();
        let pow_delta =
            if self.delta == 1.0 { log_factor } else { log_factor.powf(self.delta) };
        self.power_r(t) * pow_delta
    }

    /// Validating wrapper around [`eval`](Self::eval).
    pub fn eval_checked(&self, t: f64) -> Result<f64> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::BadParameter(format!("Φ argument must be finite and ≥ 0, got {t}")));
        }
        Ok(self.eval(t))
    }

    /// Solve Φ(t) = y to 1e−12 relative tolerance.
    ///
    /// y ≤ 1 and δ = 0 are the closed-form regions t = y^{1/r}; otherwise
    /// bisect within [y^{1/(r+δ)}, y^{1/r}], which brackets the root because
    /// t^r ≤ Φ(t) ≤ t^{r+δ} for t ≥ 1.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if !y.is_finite() || y < 0.0 {
            return Err(Error::BadParameter(format!("Φ⁻¹ argument must be finite and ≥ 0, got {y}")));
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        let root_r = if self.r == 1.0 { y } else { y.powf(1.0 / self.r) };
        if y <= 1.0 || self.delta == 0.0 {
            return Ok(root_r);
        }
        let mut lo = y.powf(1.0 / (self.r + self.delta));
        let mut hi = root_r;
        // Float-paranoia guards; the bracket is mathematically valid.
        let mut guard = 0;
        while self.eval(lo) > y && guard < 60 {
            lo *= 0.5;
            guard += 1;
        }
        while self.eval(hi) < y && guard < 120 {
            hi *= 2.0;
            guard += 1;
        }
        let mut iters = 0;
        while hi - lo > 1e-12 * lo && iters < 200 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) <= y {
                lo = mid;
            } else {
                hi = mid;
            }
            iters += 1;
        }
        Ok(0.5 * (lo + hi))
    }
}

impl std::fmt::Display for YoungPhi {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "r={},delta={}", self.r, self.delta)
    }
}

/// Conjugate weight w = 1/Φ(v⁻¹), cellwise.
///
/// Where v ≥ 1 (and always when δ = 0) the log factor vanishes and w = v^r
/// exactly, so those cells are computed directly as v^r.
pub fn conjugate_weight(v: &GridFunction, phi: &YoungPhi) -> Result<GridFunction> {
    let mut out = Vec::with_capacity(v.values().len());
    for (i, &x) in v.values().iter().enumerate() {
        if x == 0.0 {
            return Err(Error::ZeroCell(i));
        }
        let w = if x >= 1.0 || phi.delta() == 0.0 { phi.power_r(x) } else { 1.0 / phi.eval(1.0 / x) };
        out.push(w);
    }
    GridFunction::new(*v.domain(), out)
}

/// The constant C = max{(δ/ε)^δ, 1} with Φ(t) ≤ C t^{r+ε} for every t ≥ 1.
///
/// The bound is re-checked on a sampled grid up to 10^6; a violation would
/// mean corrupted parameters and panics.
pub fn power_bound_constant(phi: &YoungPhi, eps: f64) -> Result<f64> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::BadParameter(format!("eps must be > 0, got {eps}")));
    }
    let c = if phi.delta() == 0.0 { 1.0 } else { (phi.delta() / eps).powf(phi.delta()).max(1.0) };
    let mut t = 1.0f64;
    while t <= 1e6 {
        let bound = c * t.powf(phi.r() + eps);
        assert!(
            phi.eval(t) <= bound * (1.0 + 1e-9),
            "power bound violated at t={t}: Φ(t)={} > {bound}",
            phi.eval(t)
        );
        t = if t < 2.0 { t + 0.5 } else { t * 1.5 };
    }
    Ok(c)
}

/// Outcome of the submultiplicativity sweep Φ(st) ≤ Φ(s)Φ(t).
#[derive(Debug, Clone, serde::Serialize)]
pub struct SubmultReport {
    pub samples: usize,
    pub max_ratio: f64,
    pub worst_pair: (f64, f64),
    pub pass: bool,
}

/// Check Φ(st) ≤ Φ(s)Φ(t) over seeded sample pairs; reports the largest
/// observed ratio Φ(st)/(Φ(s)Φ(t)), which never exceeds 1 for this family.
pub fn check_submultiplicative(phi: &YoungPhi, n_samples: usize, seed: u64) -> SubmultReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_ratio = f64::NEG_INFINITY;
    let mut worst = (1.0, 1.0);
    let probe = |s: f64, t: f64, max_ratio: &mut f64, worst: &mut (f64, f64)| {
        let denom = phi.eval(s) * phi.eval(t);
        if denom == 0.0 || !denom.is_finite() {
            return;
        }
        let ratio = phi.eval(s * t) / denom;
        if ratio > *max_ratio {
            *max_ratio = ratio;
            *worst = (s, t);
        }
    };
    probe(1.0, 1.0, &mut max_ratio, &mut worst);
    for _ in 0..n_samples {
        let s = f64::exp(rng.gen_range(-14.0..14.0));
        let t = f64::exp(rng.gen_range(-14.0..14.0));
        probe(s, t, &mut max_ratio, &mut worst);
    }
    SubmultReport {
        samples: n_samples + 1,
        max_ratio,
        worst_pair: worst,
        pass: max_ratio <= 1.0 + 1e-12,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;

    #[test]
    fn eval_examples() {
        let p20 = YoungPhi::new(2.0, 0.0).unwrap();
        assert_eq!(p20.eval(3.0), 9.0);

        let p11 = YoungPhi::new(1.0, 1.0).unwrap();
        let e = std::f64::consts::E;
        assert!((p11.eval(e) - 2.0 * e).abs() < 1e-14);
        // Φ(2) = 2 (1 + ln 2)
        let expected = 2.0 * (1.0 + std::f64::consts::LN_2);
        assert!((p11.eval(2.0) - expected).abs() < 1e-14);
        assert!((expected - 3.386_294_361_119_89).abs() < 1e-12);
    }

    #[test]
    fn eval_rejects_bad_input() {
        let phi = YoungPhi::linear();
        assert!(phi.eval_checked(-1.0).is_err());
        assert!(phi.eval_checked(f64::NAN).is_err());
        assert!(phi.eval_checked(f64::INFINITY).is_err());
    }

    #[test]
    fn parameter_validation() {
        assert!(YoungPhi::new(0.5, 0.0).is_err());
        assert!(YoungPhi::new(1.0, -0.1).is_err());
        assert!(YoungPhi::new(3.0, 2.5).is_ok());
    }

    #[test]
    fn inverse_examples() {
        let p20 = YoungPhi::new(2.0, 0.0).unwrap();
        assert_eq!(p20.inverse(4.0).unwrap(), 2.0);

        let p11 = YoungPhi::new(1.0, 1.0).unwrap();
        let e = std::f64::consts::E;
        assert!((p11.inverse(2.0 * e).unwrap() - e).abs() < 1e-10);

        // t (1 + ln t) = 10, found independently by coarse scanning
        let mut t_oracle = 0.0;
        let mut best = f64::INFINITY;
        let mut t = 1.0f64;
        while t < 10.0 {
            let miss = (t * (1.0 + t.ln()) - 10.0).abs();
            if miss < best {
                best = miss;
                t_oracle = t;
            }
            t += 1e-6;
        }
        let t_inv = p11.inverse(10.0).unwrap();
        assert!((t_inv - t_oracle).abs() < 1e-5, "{t_inv} vs oracle {t_oracle}");
        assert!((p11.eval(t_inv) - 10.0).abs() < 1e-10 * 10.0);
        assert!((t_inv - 4.133_660_524_288_428).abs() < 1e-9);
    }

    #[test]
    fn inverse_round_trip_over_decades() {
        for (r, delta) in [(1.0, 1.0), (2.0, 1.0), (1.5, 0.5), (3.0, 2.0), (2.0, 0.0)] {
            let phi = YoungPhi::new(r, delta).unwrap();
            for k in -6..=6 {
                let y = 10f64.powi(k);
                let t = phi.inverse(y).unwrap();
                assert!(
                    (phi.eval(t) - y).abs() <= 1e-10 * y,
                    "round trip failed at y={y} for {phi}"
                );
            }
        }
    }

    #[test]
    fn conjugate_weight_examples() {
        let d = Domain::new(1, 0, -1).unwrap();
        let p11 = YoungPhi::new(1.0, 1.0).unwrap();

        let ones = GridFunction::constant(d, 1.0).unwrap();
        assert_eq!(conjugate_weight(&ones, &p11).unwrap().values(), &[1.0, 1.0]);

        let twos = GridFunction::constant(d, 2.0).unwrap();
        assert_eq!(conjugate_weight(&twos, &p11).unwrap().values(), &[2.0, 2.0]);

        let halves = GridFunction::constant(d, 0.5).unwrap();
        let w = conjugate_weight(&halves, &p11).unwrap();
        let expected = 1.0 / (2.0 * (1.0 + std::f64::consts::LN_2));
        assert!((w.value(0) - expected).abs() < 1e-15);
        assert!((expected - 0.295_308_054_574_820_6).abs() < 1e-12);

        let zero = GridFunction::new(d, vec![1.0, 0.0]).unwrap();
        assert!(matches!(conjugate_weight(&zero, &p11), Err(Error::ZeroCell(1))));
    }

    #[test]
    fn conjugate_weight_monotone_and_power_collapse() {
        let d = Domain::new(1, 0, -2).unwrap();
        let phi = YoungPhi::new(2.0, 1.0).unwrap();
        let v1 = GridFunction::new(d, vec![0.3, 0.9, 1.5, 4.0]).unwrap();
        let v2 = GridFunction::new(d, vec![0.4, 1.0, 2.0, 4.0]).unwrap();
        let w1 = conjugate_weight(&v1, &phi).unwrap();
        let w2 = conjugate_weight(&v2, &phi).unwrap();
        for i in 0..4 {
            assert!(w1.value(i) <= w2.value(i));
        }

        let p30 = YoungPhi::new(3.0, 0.0).unwrap();
        let w = conjugate_weight(&v1, &p30).unwrap();
        for i in 0..4 {
            assert_eq!(w.value(i), v1.value(i).powf(3.0));
        }
    }

    #[test]
    fn power_bound_examples() {
        let p10 = YoungPhi::new(1.0, 0.0).unwrap();
        assert_eq!(power_bound_constant(&p10, 0.3).unwrap(), 1.0);

        let p11 = YoungPhi::new(1.0, 1.0).unwrap();
        assert_eq!(power_bound_constant(&p11, 0.5).unwrap(), 2.0);

        let p12 = YoungPhi::new(1.0, 2.0).unwrap();
        assert_eq!(power_bound_constant(&p12, 1.0).unwrap(), 4.0);

        assert!(power_bound_constant(&p11, 0.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn submultiplicative_everywhere(
            r in 1.0f64..4.0,
            delta in 0.0f64..3.0,
            ls in -10.0f64..10.0,
            lt in -10.0f64..10.0,
        ) {
            let phi = YoungPhi::new(r, delta).unwrap();
            let (s, t) = (ls.exp(), lt.exp());
            let bound = phi.eval(s) * phi.eval(t);
            proptest::prop_assert!(phi.eval(s * t) <= bound * (1.0 + 1e-12));
        }

        #[test]
        fn inverse_is_a_right_inverse(
            r in 1.0f64..4.0,
            delta in 0.0f64..3.0,
            ly in -12.0f64..12.0,
        ) {
            let phi = YoungPhi::new(r, delta).unwrap();
            let y = ly.exp();
            let t = phi.inverse(y).unwrap();
            proptest::prop_assert!((phi.eval(t) - y).abs() <= 1e-10 * y);
        }
    }

    #[test]
    fn submultiplicative_examples() {
        let p11 = YoungPhi::new(1.0, 1.0).unwrap();
        let e = std::f64::consts::E;
        let ratio = p11.eval(e * e) / (p11.eval(e) * p11.eval(e));
        assert!((ratio - 0.75).abs() < 1e-14);

        let report = check_submultiplicative(&p11, 10_000, 42);
        assert!(report.pass, "max ratio {}", report.max_ratio);
        assert!(report.max_ratio <= 1.0 + 1e-12);

        for (r, delta) in [(1.0, 0.0), (2.0, 1.0), (1.5, 2.0)] {
            let phi = YoungPhi::new(r, delta).unwrap();
            let rep = check_submultiplicative(&phi, 10_000, 1);
            assert!(rep.pass, "{phi}: {}", rep.max_ratio);
        }
    }
}
