//! Pressure laws, Helmholtz potentials, relative energies and renormalizations.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstitutiveError {
    #[error("relative energy needs a positive reference density, got {0}")]
    NonPositiveReference(f64),
    #[error("gamma must exceed {min}, got {gamma}")]
    Gamma { gamma: f64, min: f64 },
    #[error("pressure coefficient must be positive, got {0}")]
    Coefficient(f64),
    #[error("beta = {beta} outside ({lo}, {hi})")]
    Beta { beta: f64, lo: f64, hi: f64 },
    #[error("omega = {omega} outside ({lo}, {hi})")]
    Omega { omega: f64, lo: f64, hi: f64 },
    #[error("viscosities need mu > 0 and lambda + 2mu/3 > 0 (mu = {mu}, lambda = {lambda})")]
    Viscosity { mu: f64, lambda: f64 },
    #[error("renormalization L_zeta is negative at rho = {rho} (value {value})")]
    NegativeRenormalization { rho: f64, value: f64 },
    #[error("zeta must be positive, got {0}")]
    Zeta(f64),
}

/// Pressure law `p` with `p(0) = 0`, `p' > 0`.
#[derive(Clone)]
pub enum PressureLaw {
    /// `p = a ρ^γ`.
    Isentropic { a: f64, gamma: f64 },
    /// A monotone law given as `ρ ↦ (p(ρ), p'(ρ))` for `ρ > 0`.
    General(Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>),
}

impl fmt::Debug for PressureLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Isentropic { a, gamma } => write!(f, "Isentropic {{ a: {a}, gamma: {gamma} }}"),
            Self::General(_) => write!(f, "General(..)"),
        }
    }
}

/// Helmholtz potential and its derivatives.
pub trait Potential {
    fn pressure(&self, rho: f64) -> f64;
    fn h(&self, rho: f64) -> f64;
    fn dh(&self, rho: f64) -> f64;
    fn d2h(&self, rho: f64) -> f64;

    /// `E(ρ|r) = H(ρ) - H'(r)(ρ - r) - H(r)`.
    fn relative(&self, rho: f64, r: f64) -> Result<f64, ConstitutiveError> {
        if !(r > 0.0) {
            return Err(ConstitutiveError::NonPositiveReference(r));
        }
        Ok(self.h(rho) - self.dh(r) * (rho - r) - self.h(r))
    }
}

#[derive(Debug, Clone)]
pub struct GasModel {
    pub law: PressureLaw,
}

impl GasModel {
    pub fn isentropic(a: f64, gamma: f64) -> Result<Self, ConstitutiveError> {
        if !(a > 0.0) {
            return Err(ConstitutiveError::Coefficient(a));
        }
        if !(gamma > 1.0) {
            return Err(ConstitutiveError::Gamma { gamma, min: 1.0 });
        }
        Ok(Self {
            law: PressureLaw::Isentropic { a, gamma },
        })
    }

    pub fn general(law: impl Fn(f64) -> (f64, f64) + Send + Sync + 'static) -> Self {
        Self {
            law: PressureLaw::General(Arc::new(law)),
        }
    }

    /// Pressure, extended by zero to negative densities.
    pub fn p(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            return 0.0;
        }
        match &self.law {
            PressureLaw::Isentropic { a, gamma } => a * rho.powf(*gamma),
            PressureLaw::General(f) => f(rho).0,
        }
    }

    pub fn dp(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            return 0.0;
        }
        match &self.law {
            PressureLaw::Isentropic { a, gamma } => a * gamma * rho.powf(gamma - 1.0),
            PressureLaw::General(f) => f(rho).1,
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match self.law {
            PressureLaw::Isentropic { gamma, .. } => Some(gamma),
            PressureLaw::General(_) => None,
        }
    }

    /// `∫_1^ρ p(z)/z² dz`, through `z = e^s` for the general law.
    fn pressure_integral(&self, rho: f64) -> f64 {
        match &self.law {
            PressureLaw::Isentropic { a, gamma } => a * (rho.powf(gamma - 1.0) - 1.0) / (gamma - 1.0),
            PressureLaw::General(f) => {
                let upper = rho.ln();
                if upper == 0.0 {
                    return 0.0;
                }
                ::quadrature::double_exponential::integrate(
                    |s: f64| {
                        let z = s.exp();
                        f(z).0 / z
                    },
                    0.0,
                    upper,
                    1e-14,
                )
                .integral
            }
        }
    }
}

impl Potential for GasModel {
    fn pressure(&self, rho: f64) -> f64 {
        self.p(rho)
    }

    /// `H(ρ) = ρ ∫_1^ρ p(z)/z² dz`, `H(0) = 0`.
    fn h(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            return 0.0;
        }
        match &self.law {
            PressureLaw::Isentropic { a, gamma } => a * (rho.powf(*gamma) - rho) / (gamma - 1.0),
            PressureLaw::General(_) => rho * self.pressure_integral(rho),
        }
    }

    fn dh(&self, rho: f64) -> f64 {
        match &self.law {
            PressureLaw::Isentropic { a, gamma } => {
                let r = rho.max(0.0);
                a * (gamma * r.powf(gamma - 1.0) - 1.0) / (gamma - 1.0)
            }
            PressureLaw::General(_) => self.pressure_integral(rho) + self.p(rho) / rho,
        }
    }

    fn d2h(&self, rho: f64) -> f64 {
        self.dp(rho) / rho
    }
}

/// `p_h = p + h^β ρ²` and `H_h = H + h^β ρ²`. With the regularization
/// switched off both coincide with the unregularized law.
#[derive(Debug, Clone)]
pub struct RegularizedPressure {
    pub gas: GasModel,
    /// `h^β`, or zero when switched off.
    pub eps: f64,
}

impl RegularizedPressure {
    pub fn new(gas: GasModel, h: f64, beta: f64, enabled: bool) -> Self {
        let eps = if enabled { h.powf(beta) } else { 0.0 };
        Self { gas, eps }
    }

    pub fn p_h(&self, rho: f64) -> f64 {
        self.gas.p(rho) + self.eps * rho * rho
    }

    pub fn dp_h(&self, rho: f64) -> f64 {
        self.gas.dp(rho) + 2.0 * self.eps * rho
    }
}

impl Potential for RegularizedPressure {
    fn pressure(&self, rho: f64) -> f64 {
        self.p_h(rho)
    }
    fn h(&self, rho: f64) -> f64 {
        self.gas.h(rho) + self.eps * rho * rho
    }
    fn dh(&self, rho: f64) -> f64 {
        self.gas.dh(rho) + 2.0 * self.eps * rho
    }
    fn d2h(&self, rho: f64) -> f64 {
        self.gas.d2h(rho) + 2.0 * self.eps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Theorem,
    Exploratory,
}

/// Validates `(γ, β, ω)` and the viscosities. Returns warnings for
/// exploratory-mode parameters outside the theorem windows.
pub fn validate_parameters(
    gamma: Option<f64>,
    beta: f64,
    omega: f64,
    regularization: bool,
    mu: f64,
    lambda: f64,
    mode: Mode,
) -> Result<Vec<String>, ConstitutiveError> {
    if !(mu > 0.0 && lambda + 2.0 * mu / 3.0 > 0.0) {
        return Err(ConstitutiveError::Viscosity { mu, lambda });
    }
    let mut warnings = Vec::new();
    let beta_hi = |g: f64| f64::min(0.5, (2.0 * g - 6.0) / g);
    match mode {
        Mode::Theorem => {
            let g = gamma.unwrap_or(f64::NAN);
            if !(g > 3.0) {
                return Err(ConstitutiveError::Gamma { gamma: g, min: 3.0 });
            }
            if regularization {
                let hi = beta_hi(g);
                if !(beta > 0.0 && beta < hi) {
                    return Err(ConstitutiveError::Beta { beta, lo: 0.0, hi });
                }
            }
            let hi = if regularization { 1.0 - beta } else { 1.0 };
            if !(omega > 0.0 && omega < hi) {
                return Err(ConstitutiveError::Omega { omega, lo: 0.0, hi });
            }
        }
        Mode::Exploratory => {
            if let Some(g) = gamma {
                if !(g > 1.0) {
                    return Err(ConstitutiveError::Gamma { gamma: g, min: 1.0 });
                }
                if g <= 3.0 {
                    warnings.push(format!("gamma = {g} is outside the convergence theory (needs > 3)"));
                } else if regularization && !(beta > 0.0 && beta < beta_hi(g)) {
                    warnings.push(format!("beta = {beta} is outside the convergence theory window"));
                }
            }
            if !(beta >= 0.0) {
                return Err(ConstitutiveError::Beta { beta, lo: 0.0, hi: f64::INFINITY });
            }
            if !(omega > 0.0) {
                return Err(ConstitutiveError::Omega { omega, lo: 0.0, hi: f64::INFINITY });
            }
            if omega >= 1.0 - if regularization { beta } else { 0.0 } {
                warnings.push(format!("omega = {omega} is outside the convergence theory window"));
            }
        }
    }
    Ok(warnings)
}

/// Renormalization function `B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RenormFunction {
    /// `L_ζ(ρ) = ρ log(ρ + ζ) + aρ + b`.
    LZeta { zeta: f64, a: f64, b: f64 },
    /// `B(ρ) = cρ`.
    Linear { c: f64 },
}

impl RenormFunction {
    /// `L_ζ` with `a = 0`, `b = ζ`.
    pub fn l_zeta(zeta: f64) -> Result<Self, ConstitutiveError> {
        Self::l_zeta_with(zeta, 0.0, zeta)
    }

    /// `L_ζ` with explicit coefficients; nonnegativity on `[0, ∞)` is checked.
    pub fn l_zeta_with(zeta: f64, a: f64, b: f64) -> Result<Self, ConstitutiveError> {
        if !(zeta > 0.0) {
            return Err(ConstitutiveError::Zeta(zeta));
        }
        let f = Self::LZeta { zeta, a, b };
        // L is convex, so its minimum on [0,∞) is at 0 or at the root of
        // B'(ρ) = 0, found by bisection (B' is increasing).
        let mut rho_min = 0.0;
        if f.eval(0.0).1 < 0.0 {
            let (mut lo, mut hi) = (0.0, 1.0);
            while f.eval(hi).1 < 0.0 {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f.eval(mid).1 < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            rho_min = 0.5 * (lo + hi);
        }
        let value = f.eval(rho_min).0;
        if value < -1e-14 * b.abs().max(1.0) {
            return Err(ConstitutiveError::NegativeRenormalization { rho: rho_min, value });
        }
        Ok(f)
    }

    /// `(B(ρ), B'(ρ), ρB'(ρ) - B(ρ))`.
    pub fn eval(&self, rho: f64) -> (f64, f64, f64) {
        match *self {
            Self::LZeta { zeta, a, b } => {
                let l = (rho + zeta).ln();
                let val = rho * l + a * rho + b;
                let d = l + rho / (rho + zeta) + a;
                // ρB' - B = ρ²/(ρ+ζ) - b
                (val, d, rho * rho / (rho + zeta) - b)
            }
            Self::Linear { c } => (c * rho, c, 0.0),
        }
    }

    /// `E_B(x|y) = B(x) - B'(y)(x - y) - B(y)`, in closed form for `L_ζ`.
    pub fn bregman(&self, x: f64, y: f64) -> f64 {
        match *self {
            Self::LZeta { zeta, .. } => {
                let d = (x - y) / (y + zeta);
                let l = d.ln_1p();
                y * (l - d) + d * (y + zeta) * l
            }
            Self::Linear { .. } => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn log_grid() -> impl Iterator<Item = f64> {
        (0..=90).map(|i| 10f64.powf(-6.0 + 9.0 * i as f64 / 90.0))
    }

    #[test]
    fn pressure_examples() {
        let g = GasModel::isentropic(1.0, 2.0).unwrap();
        assert_eq!(g.p(3.0), 9.0);
        assert_eq!(g.p(0.0), 0.0);
        assert_eq!(g.p(-1.0), 0.0);
        let r = RegularizedPressure::new(g, 0.1, 0.5, true);
        assert!((r.p_h(2.0) - (4.0 + 0.1f64.sqrt() * 4.0)).abs() < 1e-14);
        assert!((r.p_h(2.0) - 5.2649).abs() < 1e-4);
        let off = RegularizedPressure::new(r.gas.clone(), 0.1, 0.5, false);
        assert_eq!(off.p_h(2.0), 4.0);
    }

    #[test]
    fn helmholtz_examples() {
        let g2 = GasModel::isentropic(1.0, 2.0).unwrap();
        assert_eq!(g2.h(1.0), 0.0);
        assert!((g2.h(2.0) - 2.0).abs() < 1e-15);
        let g3 = GasModel::isentropic(1.0, 3.0).unwrap();
        assert!((g3.h(2.0) - 3.0).abs() < 1e-15);
        let r = RegularizedPressure::new(g2.clone(), 0.25, 0.5, true);
        assert!((r.h(2.0) - (2.0 + 0.5 * 4.0)).abs() < 1e-15);
    }

    #[test]
    fn relative_energy_examples() {
        let g = GasModel::isentropic(1.0, 2.0).unwrap();
        assert_eq!(g.relative(1.7, 1.7).unwrap().abs(), 0.0);
        assert!((g.relative(2.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((g.relative(0.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(
            g.relative(1.0, 0.0),
            Err(ConstitutiveError::NonPositiveReference(0.0))
        );
    }

    #[test]
    fn renorm_examples() {
        let l = RenormFunction::l_zeta_with(1.0, 0.0, 0.0).unwrap();
        assert_eq!(l.eval(0.0), (0.0, 0.0, 0.0));
        let l1 = RenormFunction::l_zeta_with(1.0, 0.0, 0.0).unwrap();
        let (b, d, r) = l1.eval(1.0);
        let ln2 = 2f64.ln();
        assert!((b - ln2).abs() < 1e-15);
        assert!((d - (ln2 + 0.5)).abs() < 1e-15);
        assert!((r - 0.5).abs() < 1e-15);
        let lin = RenormFunction::Linear { c: 3.0 };
        assert_eq!(lin.eval(2.0).2, 0.0);
        assert_eq!(lin.bregman(5.0, 1.0), 0.0);
    }

    #[test]
    fn l_zeta_default_nonnegativity() {
        assert!(RenormFunction::l_zeta(1.0).is_ok());
        // for small ζ the default b = ζ does not lift the minimum above zero
        assert!(matches!(
            RenormFunction::l_zeta(0.01),
            Err(ConstitutiveError::NegativeRenormalization { .. })
        ));
        assert!(RenormFunction::l_zeta_with(0.01, 0.0, 0.5).is_ok());
        assert!(RenormFunction::l_zeta(-1.0).is_err());
    }

    #[test]
    fn bregman_closed_form_matches_definition() {
        let l = RenormFunction::l_zeta(1.0).unwrap();
        for &(x, y) in &[(0.0, 1.0), (2.0, 0.5), (0.3, 0.31), (7.0, 3.0)] {
            let (bx, _, _) = l.eval(x);
            let (by, dy, _) = l.eval(y);
            let direct = bx - dy * (x - y) - by;
            assert!((l.bregman(x, y) - direct).abs() < 1e-13, "{x} {y}");
            assert!(l.bregman(x, y) >= 0.0);
        }
    }

    #[test]
    fn helmholtz_identity_on_grid() {
        let general = GasModel::general(|r| (r * r + 0.5 * r.powf(3.5), 2.0 * r + 1.75 * r.powf(2.5)));
        for gas in [
            GasModel::isentropic(1.0, 4.0).unwrap(),
            GasModel::isentropic(2.5, 1.4).unwrap(),
            general,
        ] {
            for rho in log_grid() {
                let lhs = rho * gas.dh(rho) - gas.h(rho);
                let p = gas.p(rho);
                assert!((lhs - p).abs() <= 1e-10 * p.abs().max(1e-300) + 1e-15, "{gas:?} {rho}: {lhs} vs {p}");
            }
        }
    }

    #[test]
    fn general_law_matches_closed_form() {
        let iso = GasModel::isentropic(1.5, 4.0).unwrap();
        let gen = GasModel::general(|r| (1.5 * r.powi(4), 6.0 * r.powi(3)));
        for rho in log_grid() {
            assert!((iso.h(rho) - gen.h(rho)).abs() <= 1e-11 * (1.0 + iso.h(rho).abs()));
            assert!((iso.dh(rho) - gen.dh(rho)).abs() <= 1e-11 * (1.0 + iso.dh(rho).abs()));
        }
    }

    #[test]
    fn convexity_and_monotonicity_on_grid() {
        let gas = GasModel::isentropic(1.0, 4.0).unwrap();
        let reg = RegularizedPressure::new(gas.clone(), 0.1, 0.25, true);
        let grid: Vec<f64> = log_grid().collect();
        for w in grid.windows(3) {
            let (a, b, c) = (w[0], w[1], w[2]);
            for pot in [&gas as &dyn Potential, &reg] {
                // second divided difference
                let dd = ((pot.h(c) - pot.h(b)) / (c - b) - (pot.h(b) - pot.h(a)) / (b - a)) / (c - a);
                let scale = (pot.h(a).abs() + pot.h(b).abs() + pot.h(c).abs()) / ((b - a) * (c - b));
                assert!(dd >= -1e-12 * scale, "{a} {dd}");
            }
            assert!(gas.p(b) > gas.p(a));
        }
    }

    #[test]
    fn parameter_windows() {
        let ok = validate_parameters(Some(4.0), 0.25, 0.5, true, 1.0, 0.0, Mode::Theorem);
        assert!(ok.unwrap().is_empty());
        // β window for γ = 4 is (0, min{1/2, 1/2})
        assert!(matches!(
            validate_parameters(Some(4.0), 0.6, 0.3, true, 1.0, 0.0, Mode::Theorem),
            Err(ConstitutiveError::Beta { .. })
        ));
        assert!(matches!(
            validate_parameters(Some(4.0), 0.25, 0.8, true, 1.0, 0.0, Mode::Theorem),
            Err(ConstitutiveError::Omega { .. })
        ));
        assert!(matches!(
            validate_parameters(Some(2.0), 0.25, 0.5, true, 1.0, 0.0, Mode::Theorem),
            Err(ConstitutiveError::Gamma { .. })
        ));
        assert!(validate_parameters(Some(4.0), 0.0, 0.8, false, 1.0, 0.0, Mode::Theorem).is_ok());
        let w = validate_parameters(Some(2.0), 0.25, 0.5, true, 1.0, 0.0, Mode::Exploratory).unwrap();
        assert_eq!(w.len(), 1);
        assert!(matches!(
            validate_parameters(Some(4.0), 0.25, 0.5, true, 1.0, -1.0, Mode::Theorem),
            Err(ConstitutiveError::Viscosity { .. })
        ));
    }

    proptest! {
        #[test]
        fn relative_energy_nonnegative(rho in 0.0f64..50.0, r in 1e-3f64..50.0, gamma in 1.1f64..6.0) {
            let g = GasModel::isentropic(1.0, gamma).unwrap();
            let reg = RegularizedPressure::new(g.clone(), 0.1, 0.3, true);
            let e = g.relative(rho, r).unwrap();
            prop_assert!(e >= -1e-12 * (1.0 + g.h(rho).abs() + g.h(r).abs()));
            if (rho - r).abs() > 1e-3 * r {
                prop_assert!(e > 0.0);
                prop_assert!(reg.relative(rho, r).unwrap() > 0.0);
            }
        }

        #[test]
        fn l_zeta_bregman_nonnegative(x in 0.0f64..100.0, y in 0.0f64..100.0, zeta in 0.05f64..5.0) {
            let l = RenormFunction::LZeta { zeta, a: 0.0, b: 0.0 };
            prop_assert!(l.bregman(x, y) >= -1e-12 * (1.0 + x));
        }
    }
}
