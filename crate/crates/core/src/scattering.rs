//! Closed-form and semi-analytic solution operators for single resonances:
//! the small-frequency rotation, inner/outer interval matrices and their
//! composition, the exact hypergeometric operator, the three-mode model, and
//! the chain-growth predictions.
//!
//! A single resonance in rescaled local time obeys `u'' + c^2/(xi^-2+t^2) u = 0`
//! on `(-1, 1)`. On `|t| < 1/xi` the potential is an almost-constant plateau
//! (rotation regime); outside, it is the scaling-critical `c^2/t^2` with
//! power-law fundamental solutions `|t|^gamma1, |t|^gamma2`. The interplay of
//! the two regimes replaces the naive `xi^1` amplification by `xi^gamma`,
//! `gamma = gamma1 - gamma2 < 1`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::integrator::{integrate_adaptive, IntegratorConfig};
use crate::special::{hypergeom_u_solution, ln_gamma};

/// Which quadratic the exponents come from: the two-mode reduction keeps one
/// neighbour (`1/4 - c^2`), the three-mode reduction both (`1/4 - 2c^2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExponentVariant {
    TwoMode,
    ThreeMode,
}

impl ExponentVariant {
    fn coupling_sq(self, c: f64) -> f64 {
        match self {
            ExponentVariant::TwoMode => c * c,
            ExponentVariant::ThreeMode => 2.0 * c * c,
        }
    }

    pub fn threshold(self) -> f64 {
        match self {
            ExponentVariant::TwoMode => 0.5,
            ExponentVariant::ThreeMode => 0.125f64.sqrt(),
        }
    }
}

/// Power-law exponents of one resonance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents {
    pub gamma1: f64,
    pub gamma2: f64,
    /// `gamma = gamma1 - gamma2`, the per-resonance amplification exponent.
    pub gamma: f64,
    pub variant: ExponentVariant,
}

/// `gamma_{1,2} = 1/2 +- sqrt(1/4 - q)` with `q = c^2` (two-mode)
/// or `2c^2` (three-mode). Errors at or above the oscillatory threshold.
pub fn exponents(c: f64, variant: ExponentVariant) -> Result<Exponents> {
    let disc = 0.25 - variant.coupling_sq(c);
    if disc <= 0.0 {
        return Err(Error::ExponentThreshold {
            c,
            threshold: variant.threshold(),
            variant,
        });
    }
    let root = disc.sqrt();
    Ok(Exponents {
        gamma1: 0.5 + root,
        gamma2: 0.5 - root,
        gamma: 2.0 * root,
        variant,
    })
}

/// Small dense real transfer matrix with its interval and a description tag.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    pub entries: DMatrix<f64>,
    pub interval: (f64, f64),
    pub tag: String,
}

impl TransferMatrix {
    fn from2(m: [[f64; 2]; 2], interval: (f64, f64), tag: &str) -> Self {
        Self {
            entries: DMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]]),
            interval,
            tag: tag.to_string(),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn det(&self) -> f64 {
        self.entries.clone().lu().determinant()
    }

    /// Singular values, descending.
    pub fn singular_values(&self) -> Vec<f64> {
        let svd = self.entries.clone().svd(false, false);
        let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        sv
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let x = nalgebra::DVector::from_column_slice(v);
        (&self.entries * x).iter().copied().collect()
    }
}

/// Plateau-regime solution: rotation by `theta = c * eta * tau / l^2`.
/// Orthogonal, so `u^2 + v^2` is conserved exactly. Accurate as a model of
/// the dynamics only while `eta` is small against `l^2`.
pub fn rotation_solution(c: f64, eta: f64, l: i64, tau: f64) -> TransferMatrix {
    let theta = c * eta * tau / (l * l) as f64;
    let (s, co) = theta.sin_cos();
    TransferMatrix::from2(
        [[co, s], [-s, co]],
        (0.0, tau),
        "plateau rotation",
    )
}

/// Exact solution operator of `u'' + c^2 xi^2 u = 0` across the plateau
/// `(-1/xi, 1/xi)`; determinant exactly `cos^2 + sin^2 = 1`.
pub fn inner_matrix(c: f64, xi: f64) -> Result<TransferMatrix> {
    if !(xi > 0.0) || c == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "inner matrix requires xi > 0 and c != 0, got c = {c}, xi = {xi}"
        )));
    }
    let (s2c, c2c) = (2.0 * c).sin_cos();
    Ok(TransferMatrix::from2(
        [[c2c, s2c / (c * xi)], [-c * xi * s2c, c2c]],
        (-1.0 / xi, 1.0 / xi),
        "inner plateau",
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterSide {
    Left,
    Right,
}

/// Fundamental basis of the scaling-critical problem at time `t`:
/// columns `(|t|^g, sgn(t) g |t|^(g-1))` for `g = gamma1, gamma2`.
fn power_basis(t: f64, e: &Exponents) -> DMatrix<f64> {
    let at = t.abs();
    let sg = if t < 0.0 { -1.0 } else { 1.0 };
    DMatrix::from_row_slice(
        2,
        2,
        &[
            at.powf(e.gamma1),
            at.powf(e.gamma2),
            sg * e.gamma1 * at.powf(e.gamma1 - 1.0),
            sg * e.gamma2 * at.powf(e.gamma2 - 1.0),
        ],
    )
}

fn invert2(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularBasis(what.to_string()))
}

/// Power-law propagation on an outer interval: `Left` maps data at `t = -1`
/// to `t = -1/xi`, `Right` maps data at `t = 1/xi` to `t = 1`.
pub fn outer_matrix(
    c: f64,
    xi: f64,
    side: OuterSide,
    variant: ExponentVariant,
) -> Result<TransferMatrix> {
    if !(xi >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "outer interval requires xi >= 1, got {xi}"
        )));
    }
    let e = exponents(c, variant)?;
    let (entries, interval, tag) = match side {
        OuterSide::Left => (
            power_basis(-1.0 / xi, &e) * invert2(&power_basis(-1.0, &e), "left boundary basis")?,
            (-1.0, -1.0 / xi),
            "outer left",
        ),
        OuterSide::Right => (
            power_basis(1.0, &e) * invert2(&power_basis(1.0 / xi, &e), "right boundary basis")?,
            (1.0 / xi, 1.0),
            "outer right",
        ),
    };
    Ok(TransferMatrix {
        entries,
        interval,
        tag: tag.to_string(),
    })
}

/// Composed single-resonance operator `Right * Inner * Left` mapping
/// `(u, u')(-1)` to `(u, u')(1)`. Leading singular value grows like
/// `xi^gamma`.
pub fn composed_scattering(c: f64, xi: f64, variant: ExponentVariant) -> Result<TransferMatrix> {
    let left = outer_matrix(c, xi, OuterSide::Left, variant)?;
    let inner = inner_matrix(c, xi)?;
    let right = outer_matrix(c, xi, OuterSide::Right, variant)?;
    Ok(TransferMatrix {
        entries: right.entries * inner.entries * left.entries,
        interval: (-1.0, 1.0),
        tag: format!("composed scattering ({variant:?})"),
    })
}

/// Exact scattering operator of `u'' + c^2/(xi^-2 + t^2) u = 0` over
/// `(-1, 1)`, built from the even/odd hypergeometric fundamental pair.
pub fn hypergeom_scattering(c: f64, xi: f64) -> Result<TransferMatrix> {
    let fp = hypergeom_u_solution(c, xi, 1.0)?;
    // Parity gives the boundary basis at t = -1 from the one at t = +1.
    let b1 = DMatrix::from_row_slice(2, 2, &[fp.u_even, fp.u_odd, fp.du_even, fp.du_odd]);
    let bm1 = DMatrix::from_row_slice(2, 2, &[fp.u_even, -fp.u_odd, -fp.du_even, fp.du_odd]);
    Ok(TransferMatrix {
        entries: b1 * invert2(&bm1, "fundamental pair at t = -1")?,
        interval: (-1.0, 1.0),
        tag: "hypergeometric scattering".to_string(),
    })
}

/// Reference solution operator of the same equation by direct integration,
/// assembled column-wise; the cross-check counterpart of
/// [`hypergeom_scattering`].
pub fn schroedinger_operator(c: f64, xi: f64, cfg: &IntegratorConfig) -> Result<TransferMatrix> {
    let mut field = |t: f64, y: &[Complex64], out: &mut [Complex64]| {
        out[0] = y[1];
        out[1] = -y[0] * (c * c / (xi.powi(-2) + t * t));
    };
    let delta = cfg.delta_res(xi);
    let inside = cfg.inside_cap();
    let cap = |t: f64| -> f64 {
        let d = t.abs();
        if d <= delta {
            inside
        } else {
            (d - delta).max(inside)
        }
        .min(cfg.max_step)
    };
    let mut entries = DMatrix::<f64>::zeros(2, 2);
    for (j, y0) in [[1.0, 0.0], [0.0, 1.0]].iter().enumerate() {
        let y0c: Vec<Complex64> = y0.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        let (y, _) = integrate_adaptive(&mut field, -1.0, 1.0, &y0c, cfg, &cap, &mut |_, _| {})?;
        entries[(0, j)] = y[0].re;
        entries[(1, j)] = y[1].re;
    }
    Ok(TransferMatrix {
        entries,
        interval: (-1.0, 1.0),
        tag: "schroedinger reference".to_string(),
    })
}

/// Solution operator of the homogeneous three-mode model around `k0` in the
/// symmetrized variables `u1 = (u(k0-1) - u(k0+1))/2`, `u2 = u(k0)`,
/// `u3 = (u(k0-1) + u(k0+1))/2`, over `interval` within
/// `(-k0/(2(k0+1)), k0/(2(k0-1)))` in rescaled time.
///
/// `u3` is conserved: the operator's third row is exactly `(0, 0, 1)`.
pub fn three_mode_operator(
    c: f64,
    xi: f64,
    k0: i64,
    interval: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<TransferMatrix> {
    if k0 < 2 {
        return Err(Error::InvalidParameter(format!(
            "three-mode model needs k0 >= 2 (finite right endpoint), got {k0}"
        )));
    }
    let (t0, t1) = interval;
    let lo = -0.5 * k0 as f64 / (k0 + 1) as f64;
    let hi = 0.5 * k0 as f64 / (k0 - 1) as f64;
    if t0 < lo - 1e-12 || t1 > hi + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "interval ({t0}, {t1}) outside the resonance block ({lo}, {hi})"
        )));
    }

    let k0f = k0 as f64;
    let rp = (k0f + 1.0) / k0f;
    let rm = (k0f - 1.0) / k0f;
    let xim2 = xi.powi(-2);
    let mut field = move |t: f64, y: &[Complex64], out: &mut [Complex64]| {
        let a0 = c / (xim2 + t * t);
        let ap = c / (xim2 * rp * rp + (1.0 + rp * t).powi(2));
        let am = c / (xim2 * rm * rm + (1.0 - rm * t).powi(2));
        out[0] = y[1] * a0;
        out[1] = -y[0] * (ap + am) + y[2] * (ap - am);
        out[2] = Complex64::new(0.0, 0.0);
    };
    let delta = cfg.delta_res(xi);
    let inside = cfg.inside_cap();
    let cap = |t: f64| -> f64 {
        let d = t.abs();
        if d <= delta {
            inside
        } else {
            (d - delta).max(inside)
        }
        .min(cfg.max_step)
    };

    let mut entries = DMatrix::<f64>::zeros(3, 3);
    for j in 0..3 {
        let mut y0 = vec![Complex64::new(0.0, 0.0); 3];
        y0[j] = Complex64::new(1.0, 0.0);
        let (y, _) = integrate_adaptive(&mut field, t0, t1, &y0, cfg, &cap, &mut |_, _| {})?;
        for i in 0..3 {
            entries[(i, j)] = y[i].re;
        }
    }
    Ok(TransferMatrix {
        entries,
        interval,
        tag: format!("three-mode operator (k0 = {k0})"),
    })
}

/// Full resonance block of mode `k0` in rescaled time.
pub fn resonance_block(k0: i64) -> (f64, f64) {
    let k0f = k0 as f64;
    (-0.5 * k0f / (k0f + 1.0), 0.5 * k0f / (k0f - 1.0))
}

/// Closed-form asymptotic per-resonance gains of the three-mode theorem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainPrediction {
    pub u1_gain: f64,
    pub u2_gain: f64,
    /// False when `xi < 10/c`, outside the asymptotic regime.
    pub in_asymptotic_regime: bool,
}

/// `u1_gain = c^(2-2 gamma2) xi^gamma`, `u2_gain = c^(4-2 gamma2) xi^gamma`.
/// Warns (without erroring) when `xi` is below `10/c`.
pub fn predicted_gain(c: f64, xi: f64, variant: ExponentVariant) -> Result<GainPrediction> {
    let e = exponents(c, variant)?;
    let in_regime = xi >= 10.0 / c;
    if !in_regime {
        log::warn!("predicted_gain: xi = {xi} below 10/c = {}, outside asymptotic regime", 10.0 / c);
    }
    let xg = xi.powf(e.gamma);
    Ok(GainPrediction {
        u1_gain: c.powf(2.0 - 2.0 * e.gamma2) * xg,
        u2_gain: c.powf(4.0 - 2.0 * e.gamma2) * xg,
        in_asymptotic_regime: in_regime,
    })
}

/// Per-step gain law for an iterated chain: each resonance at mode `k`
/// multiplies the cascading amplitude by `c^p * (eta/k^2)^gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChainLaw {
    /// `p = 1, gamma = 1`: the unmodified heuristic `c^k eta^k/(k!)^2`.
    Naive,
    /// `p = 1`, modified exponent: `c^k (eta^k/(k!)^2)^gamma`.
    ModelGrowth(ExponentVariant),
    /// `p = 2 - 2 gamma2`, modified exponent:
    /// `(c^(2-2 gamma2))^k (eta^k/(k!)^2)^gamma`.
    HomogeneousChain(ExponentVariant),
}

impl ChainLaw {
    fn prefactor_exponent_and_gamma(self, c: f64) -> Result<(f64, f64)> {
        Ok(match self {
            ChainLaw::Naive => (1.0, 1.0),
            ChainLaw::ModelGrowth(v) => (1.0, exponents(c, v)?.gamma),
            ChainLaw::HomogeneousChain(v) => {
                let e = exponents(c, v)?;
                (2.0 - 2.0 * e.gamma2, e.gamma)
            }
        })
    }
}

/// Natural log of the predicted total chain gain
/// `(c^p)^k0 (eta^k0/(k0!)^2)^gamma`, evaluated in log space so large
/// chains stay finite.
pub fn chain_growth_prediction(c: f64, eta: f64, k0: i64, law: ChainLaw) -> Result<f64> {
    if k0 < 1 {
        return Err(Error::InvalidParameter(format!("chain needs k0 >= 1, got {k0}")));
    }
    let (p, gamma) = law.prefactor_exponent_and_gamma(c)?;
    let kf = k0 as f64;
    Ok(p * kf * c.ln() + gamma * (kf * eta.ln() - 2.0 * ln_gamma(kf + 1.0)?))
}

/// Integer argmax of [`chain_growth_prediction`] over `k in [1, 2 sqrt(eta)]`,
/// found by local search from the continuous guess `sqrt(c^(1/gamma) eta)`
/// (the log-gain is concave in `k`, so the local maximum is global).
pub fn optimal_k(c: f64, eta: f64, law: ChainLaw) -> Result<i64> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter(format!("eta must be positive, got {eta}")));
    }
    let (p, gamma) = law.prefactor_exponent_and_gamma(c)?;
    let k_hi = ((2.0 * eta.sqrt()).ceil() as i64).max(1);
    let guess = (c.powf(p / gamma) * eta).sqrt().round() as i64;
    let mut k = guess.clamp(1, k_hi);
    let value = |k: i64| chain_growth_prediction(c, eta, k, law).unwrap();
    loop {
        let here = value(k);
        if k + 1 <= k_hi && value(k + 1) > here {
            k += 1;
        } else if k - 1 >= 1 && value(k - 1) > here {
            k -= 1;
        } else {
            return Ok(k);
        }
    }
}
