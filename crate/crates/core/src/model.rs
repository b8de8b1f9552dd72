//! Coefficient functions, resonant times, right-hand sides in both time
//! variables, and the norm/velocity diagnostics of the mode system.
//!
//! The model couples Fourier modes `omega(k)` to their nearest neighbours
//! through a coefficient that peaks when the source mode `l` passes its
//! critical time (`t = eta/l` in original time, `tau = 1/l` after the
//! rescaling `t = tau * eta`). In the rescaled variable the equation reads
//!
//! ```text
//! d/dtau omega(k) = -A(k-1, tau) omega(k-1) + A(k+1, tau) omega(k+1),
//! A(l, tau) = c / (l^2/eta^2 + (1 - l tau)^2),   A(0) := 0,
//! ```
//!
//! so amplitude cascades downward (`k -> k-1`) with a positive sign and
//! upward with a negative one.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Which time variable a state lives in: original `t` or rescaled `tau = t/eta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeVar {
    T,
    Tau,
}

/// Fixed parameters of one simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Coupling amplitude of the low-frequency perturbation, `0 < c < 0.2`.
    pub c: f64,
    /// Frequency parameter, canonicalized to `eta > 0`.
    pub eta: f64,
    /// Lower mode-window bound (inclusive).
    pub k_min: i64,
    /// Upper mode-window bound (inclusive).
    pub k_max: i64,
}

impl ModelParams {
    pub fn new(c: f64, eta: f64, k_min: i64, k_max: i64) -> Result<Self> {
        if !(c > 0.0 && c < 0.2) {
            return Err(Error::InvalidParameter(format!(
                "coupling c must lie in (0, 0.2), got {c}"
            )));
        }
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "eta must be positive and finite, got {eta}"
            )));
        }
        if k_min > k_max {
            return Err(Error::InvalidParameter(format!(
                "empty mode window [{k_min}, {k_max}]"
            )));
        }
        Ok(Self { c, eta, k_min, k_max })
    }

    /// Window `[-2, k0 + m]` sized so that off-chain leakage beyond the margin
    /// stays under `tol_tail`, using the geometric decay `(4c)^distance` of
    /// off-chain amplitudes.
    pub fn chain_window(c: f64, k0: i64, tol_tail: f64) -> (i64, i64) {
        let m = (tol_tail.ln() / (4.0 * c).ln()).ceil() as i64 + 2;
        (-2, k0 + m.max(2))
    }

    pub fn window_len(&self) -> usize {
        (self.k_max - self.k_min + 1) as usize
    }
}

/// Complex mode amplitudes on the window `k_min..=k_max` at a fixed time.
///
/// Out-of-window modes are implicitly zero. The `kind` tag prevents silent
/// `t`/`tau` mixups; conversion between the two is explicit via `t = tau*eta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeVector {
    pub time: f64,
    pub kind: TimeVar,
    pub k_min: i64,
    pub amplitudes: Vec<Complex64>,
}

impl ModeVector {
    pub fn zeros(time: f64, kind: TimeVar, k_min: i64, k_max: i64) -> Self {
        assert!(k_min <= k_max, "empty mode window");
        Self {
            time,
            kind,
            k_min,
            amplitudes: vec![Complex64::new(0.0, 0.0); (k_max - k_min + 1) as usize],
        }
    }

    /// Unit impulse on mode `k`.
    pub fn delta(time: f64, kind: TimeVar, k_min: i64, k_max: i64, k: i64) -> Self {
        let mut v = Self::zeros(time, kind, k_min, k_max);
        v.set(k, Complex64::new(1.0, 0.0));
        v
    }

    pub fn k_max(&self) -> i64 {
        self.k_min + self.amplitudes.len() as i64 - 1
    }

    pub fn get(&self, k: i64) -> Complex64 {
        if k < self.k_min || k > self.k_max() {
            Complex64::new(0.0, 0.0)
        } else {
            self.amplitudes[(k - self.k_min) as usize]
        }
    }

    pub fn set(&mut self, k: i64, value: Complex64) {
        assert!(
            k >= self.k_min && k <= self.k_max(),
            "mode {k} outside window [{}, {}]",
            self.k_min,
            self.k_max()
        );
        self.amplitudes[(k - self.k_min) as usize] = value;
    }

    pub fn modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(i, &a)| (self.k_min + i as i64, a))
    }

    pub fn l2_norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Mode with the largest modulus and that modulus.
    pub fn dominant(&self) -> (i64, f64) {
        let mut best = (self.k_min, 0.0);
        for (k, a) in self.modes() {
            let m = a.norm();
            if m > best.1 {
                best = (k, m);
            }
        }
        best
    }

    pub fn is_finite(&self) -> bool {
        self.amplitudes.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            amplitudes: self.amplitudes.iter().map(|a| a * factor).collect(),
            ..self.clone()
        }
    }
}

/// Coupling coefficient in original time: `c*eta / (k^2 + (eta - k t)^2)`.
///
/// Rejects `k = 0`: the stream-function inversion carries no coupling there
/// and mode 0 has no critical time.
pub fn coefficient_a_t(k: i64, t: f64, p: &ModelParams) -> Result<f64> {
    if k == 0 {
        return Err(Error::ZeroMode);
    }
    let kf = k as f64;
    // eta - k*t evaluated before squaring to avoid cancellation in the square.
    let d = p.eta - kf * t;
    Ok(p.c * p.eta / (kf * kf + d * d))
}

/// Coupling coefficient in rescaled time: `c / (l^2/eta^2 + (1 - l tau)^2)`.
///
/// Peak value `c * eta^2 / l^2` at the critical time `tau = 1/l`.
pub fn coefficient_a_tau(l: i64, tau: f64, p: &ModelParams) -> Result<f64> {
    if l == 0 {
        return Err(Error::ZeroMode);
    }
    let lf = l as f64;
    let a = lf / p.eta;
    let b = 1.0 - lf * tau;
    Ok(p.c / (a * a + b * b))
}

/// Exact mass `integral of coefficient_a_tau(l, .) over [tau0, tau1]`,
/// via the arctangent antiderivative. Tends to `c*pi*eta/l^2` as the
/// interval grows to the whole line.
pub fn coefficient_a_tau_mass(l: i64, tau0: f64, tau1: f64, p: &ModelParams) -> Result<f64> {
    if l == 0 {
        return Err(Error::ZeroMode);
    }
    let lf = l as f64;
    let res = 1.0 / lf;
    let scale = p.c / (lf * lf) * p.eta * lf.signum();
    Ok(scale * ((p.eta * (tau1 - res)).atan() - (p.eta * (tau0 - res)).atan()))
}

/// Like [`coefficient_a_tau`] but returning 0 for `l = 0` and for modes whose
/// amplitude the window treats as zero; used by the right-hand sides.
#[inline]
fn coeff_or_zero(l: i64, tau: f64, p: &ModelParams) -> f64 {
    if l == 0 {
        0.0
    } else {
        let lf = l as f64;
        let a = lf / p.eta;
        let b = 1.0 - lf * tau;
        p.c / (a * a + b * b)
    }
}

/// Right-hand side of the rescaled system,
/// `d omega(k)/dtau = -A(k-1) omega(k-1) + A(k+1) omega(k+1)`.
///
/// Modes couple only to `k +- 1`; exterior modes are treated as zero.
pub fn rhs_tau(state: &ModeVector, tau: f64, p: &ModelParams) -> Result<ModeVector> {
    if state.kind != TimeVar::Tau {
        return Err(Error::TimeVarMismatch {
            expected: TimeVar::Tau,
            found: state.kind,
        });
    }
    let mut out = ModeVector::zeros(tau, TimeVar::Tau, state.k_min, state.k_max());
    rhs_tau_into(&state.amplitudes, tau, state.k_min, p, &mut out.amplitudes);
    Ok(out)
}

/// Allocation-free kernel shared with the integrator.
pub(crate) fn rhs_tau_into(
    amps: &[Complex64],
    tau: f64,
    k_min: i64,
    p: &ModelParams,
    out: &mut [Complex64],
) {
    let n = amps.len();
    debug_assert_eq!(out.len(), n);
    // Coefficient of each source index, evaluated once per mode.
    for (i, slot) in out.iter_mut().enumerate() {
        let k = k_min + i as i64;
        let mut d = Complex64::new(0.0, 0.0);
        if i > 0 {
            d -= amps[i - 1] * coeff_or_zero(k - 1, tau, p);
        }
        if i + 1 < n {
            d += amps[i + 1] * coeff_or_zero(k + 1, tau, p);
        }
        *slot = d;
    }
}

/// Critical time of mode `k`: `1/k` in rescaled time, `eta/k` in original time.
pub fn resonant_time(k: i64, kind: TimeVar, p: &ModelParams) -> Result<f64> {
    if k == 0 {
        return Err(Error::ZeroMode);
    }
    Ok(match kind {
        TimeVar::Tau => 1.0 / k as f64,
        TimeVar::T => p.eta / k as f64,
    })
}

/// Weight family for the mode-space norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormWeight {
    L2,
    /// `rho(k, eta) = (1 + k^2 + eta^2)^(s/2)`.
    Sobolev { s: f64 },
    /// `rho(k, eta) = exp(coef * |eta|^s)`; `s = 1/2` is the Gevrey-2 weight.
    Gevrey { coef: f64, s: f64 },
}

impl NormWeight {
    pub fn gevrey2(coef: f64) -> Self {
        NormWeight::Gevrey { coef, s: 0.5 }
    }

    pub fn rho(&self, k: i64, eta: f64) -> f64 {
        match *self {
            NormWeight::L2 => 1.0,
            NormWeight::Sobolev { s } => {
                let kf = k as f64;
                (1.0 + kf * kf + eta * eta).powf(s / 2.0)
            }
            NormWeight::Gevrey { coef, s } => (coef * eta.abs().powf(s)).exp(),
        }
    }

    /// `C1 = sup over eta of rho(k±1, eta)/rho(k, eta)`, finite for every
    /// weight in this family. The Gevrey weight carries no k-dependence.
    pub fn shift_ratio_bound(&self) -> f64 {
        match *self {
            NormWeight::L2 | NormWeight::Gevrey { .. } => 1.0,
            // Worst case over integer k sits at k = 1, eta = 0:
            // (1 + 4)/(1 + 1) = 5/2, to the power s/2.
            NormWeight::Sobolev { s } => 2.5f64.powf(s.abs() / 2.0),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            NormWeight::L2 => "L2".to_string(),
            NormWeight::Sobolev { s } => format!("H{s}"),
            NormWeight::Gevrey { coef, s } => format!("G[{coef},{s}]"),
        }
    }
}

/// One frequency slice of an eta-grid ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaEntry {
    pub eta: f64,
    pub state: ModeVector,
}

/// Finite eta-grid surrogate for the continuum: per-eta states evolve
/// independently (the system decouples in eta).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EtaEnsemble {
    pub entries: Vec<EtaEntry>,
}

/// Weighted l2 norm over the `(k, eta)` grid:
/// `sqrt( sum |omega(k, eta)|^2 rho(k, eta)^2 )`. Empty grids give 0.
pub fn norm(ensemble: &EtaEnsemble, w: &NormWeight) -> f64 {
    ensemble
        .entries
        .iter()
        .map(|e| norm_single_sq(&e.state, e.eta, w))
        .sum::<f64>()
        .sqrt()
}

/// Weighted norm of a single-eta state.
pub fn norm_single(state: &ModeVector, eta: f64, w: &NormWeight) -> f64 {
    norm_single_sq(state, eta, w).sqrt()
}

fn norm_single_sq(state: &ModeVector, eta: f64, w: &NormWeight) -> f64 {
    state
        .modes()
        .map(|(k, a)| {
            let r = w.rho(k, eta);
            a.norm_sqr() * r * r
        })
        .sum::<f64>()
}

/// Per-mode ratio `|v_hat| / |omega_hat| = 1/sqrt(k^2 + (eta - k t)^2)`,
/// the Fourier symbol of the velocity reconstruction in original time.
pub fn velocity_seminorm_factor(k: i64, eta: f64, t: f64) -> Result<f64> {
    if k == 0 && eta == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    let kf = k as f64;
    Ok(1.0 / f64::hypot(kf, eta - kf * t))
}

/// Velocity-weighted l2 norm of a single-eta state at original time
/// `t = tau * eta` (state must be tau-tagged).
pub fn velocity_norm(state: &ModeVector, eta: f64) -> Result<f64> {
    if state.kind != TimeVar::Tau {
        return Err(Error::TimeVarMismatch {
            expected: TimeVar::Tau,
            found: state.kind,
        });
    }
    let t = state.time * eta;
    let mut sum = 0.0;
    for (k, a) in state.modes() {
        if k == 0 && eta == 0.0 {
            continue;
        }
        let f = velocity_seminorm_factor(k, eta, t)?;
        sum += a.norm_sqr() * f * f;
    }
    Ok(sum.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(c: f64, eta: f64) -> ModelParams {
        ModelParams::new(c, eta, -4, 8).unwrap()
    }

    #[test]
    fn coefficient_t_at_resonance() {
        let p = params(0.1, 100.0);
        // k=1 at t = eta: denominator is exactly k^2.
        assert_eq!(coefficient_a_t(1, 100.0, &p).unwrap(), 10.0);
        let v = coefficient_a_t(2, 0.0, &p).unwrap();
        assert!((v - 10.0 / 10004.0).abs() < 1e-15);
    }

    #[test]
    fn coefficient_t_decays_beyond_resonance() {
        let p = params(0.1, 100.0);
        let mut last = coefficient_a_t(1, 100.0, &p).unwrap();
        for t in [150.0, 300.0, 1000.0, 1e5] {
            let v = coefficient_a_t(1, t, &p).unwrap();
            assert!(v < last && v > 0.0);
            last = v;
        }
    }

    #[test]
    fn coefficient_tau_peak_and_offpeak() {
        let p = params(0.1, 100.0);
        assert!((coefficient_a_tau(1, 1.0, &p).unwrap() - 1000.0).abs() < 1e-9);
        let v = coefficient_a_tau(2, 1.0, &p).unwrap();
        assert!((v - 0.1 / (4.0 * (1e-4 + 0.25))).abs() < 1e-12);
    }

    #[test]
    fn coefficient_mass_tends_to_c_pi_eta_over_l2() {
        let p = params(0.1, 100.0);
        let m = coefficient_a_tau_mass(1, -1e7, 1e7, &p).unwrap();
        assert!((m - 0.1 * std::f64::consts::PI * 100.0).abs() < 1e-4, "m = {m}");
        // Any finite interval carries strictly less mass.
        let part = coefficient_a_tau_mass(1, 0.0, 2.0, &p).unwrap();
        assert!(part < m && part > 0.0);
    }

    #[test]
    fn zero_mode_is_rejected() {
        let p = params(0.1, 100.0);
        assert!(matches!(coefficient_a_t(0, 1.0, &p), Err(Error::ZeroMode)));
        assert!(matches!(coefficient_a_tau(0, 1.0, &p), Err(Error::ZeroMode)));
        assert!(matches!(resonant_time(0, TimeVar::Tau, &p), Err(Error::ZeroMode)));
    }

    #[test]
    fn rhs_single_mode_feeds_only_neighbours() {
        let p = params(0.1, 100.0);
        let state = ModeVector::delta(0.3, TimeVar::Tau, -4, 8, 2);
        let d = rhs_tau(&state, 0.3, &p).unwrap();
        for (k, a) in d.modes() {
            if k == 1 || k == 3 {
                assert!(a.norm() > 0.0, "expected coupling at k = {k}");
            } else {
                assert_eq!(a, Complex64::new(0.0, 0.0), "unexpected coupling at k = {k}");
            }
        }
        // Down-transfer arrives with a positive sign, up-transfer negative.
        assert!(d.get(1).re > 0.0);
        assert!(d.get(3).re < 0.0);
    }

    #[test]
    fn rhs_zero_state_and_peak_value() {
        let p = params(0.1, 100.0);
        let zero = ModeVector::zeros(0.1, TimeVar::Tau, -4, 8);
        let d = rhs_tau(&zero, 0.1, &p).unwrap();
        assert_eq!(d.l2_norm(), 0.0);

        let state = ModeVector::delta(1.0, TimeVar::Tau, -4, 8, 1);
        let d = rhs_tau(&state, 1.0, &p).unwrap();
        assert!((d.get(2).norm() - 1000.0).abs() < 1e-9);
        // Mode 0 receives through its neighbour's coefficient.
        assert!((d.get(0).norm() - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn rhs_rejects_t_tagged_state() {
        let p = params(0.1, 100.0);
        let state = ModeVector::zeros(0.0, TimeVar::T, -4, 8);
        assert!(matches!(
            rhs_tau(&state, 0.0, &p),
            Err(Error::TimeVarMismatch { .. })
        ));
    }

    #[test]
    fn resonant_times() {
        let p = params(0.1, 400.0);
        assert_eq!(resonant_time(5, TimeVar::Tau, &p).unwrap(), 0.2);
        assert_eq!(resonant_time(1, TimeVar::T, &p).unwrap(), 400.0);
        assert!((resonant_time(-3, TimeVar::Tau, &p).unwrap() + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn norm_examples() {
        let mut ens = EtaEnsemble::default();
        let mut st = ModeVector::zeros(0.0, TimeVar::Tau, 0, 2);
        st.set(1, Complex64::new(1.0, 0.0));
        ens.entries.push(EtaEntry { eta: 100.0, state: st.clone() });

        let g = NormWeight::gevrey2(0.5);
        assert!((norm(&ens, &g) - (0.5f64 * 10.0).exp()).abs() < 1e-9);
        assert!((norm(&ens, &NormWeight::L2) - 1.0).abs() < 1e-15);

        let mut ens2 = EtaEnsemble::default();
        ens2.entries.push(EtaEntry { eta: 1.0, state: st });
        let h1 = NormWeight::Sobolev { s: 1.0 };
        assert!((norm(&ens2, &h1) - 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(norm(&EtaEnsemble::default(), &NormWeight::L2), 0.0);
    }

    #[test]
    fn shift_ratio_bounds() {
        assert_eq!(NormWeight::L2.shift_ratio_bound(), 1.0);
        assert_eq!(NormWeight::gevrey2(3.0).shift_ratio_bound(), 1.0);
        let s = NormWeight::Sobolev { s: 1.0 };
        let c1 = s.shift_ratio_bound();
        assert!(c1 >= 1.0);
        // Numerically confirm the sup over a sample of (k, eta).
        for k in -6i64..=6 {
            for eta in [0.0, 0.3, 1.0, 10.0, 500.0] {
                for dk in [-1i64, 1] {
                    let ratio = s.rho(k + dk, eta) / s.rho(k, eta);
                    assert!(ratio <= c1 + 1e-12, "ratio {ratio} > C1 {c1} at k={k}, eta={eta}");
                }
            }
        }
    }

    #[test]
    fn velocity_factor_examples() {
        assert!((velocity_seminorm_factor(1, 0.0, 10.0).unwrap() - 1.0 / 101f64.sqrt()).abs() < 1e-15);
        assert_eq!(velocity_seminorm_factor(1, 10.0, 10.0).unwrap(), 1.0);
        assert!(matches!(velocity_seminorm_factor(0, 0.0, 5.0), Err(Error::ZeroFrequency)));
        // Damping rate ~ 1/(|k| t) for t far beyond the critical time.
        let f = velocity_seminorm_factor(1, 3.0, 1e6).unwrap();
        assert!((f * (1e6 - 3.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn coefficient_identity_t_vs_tau() {
        // a_tau(l, tau) = eta * a_t(l, tau * eta) exactly, for eta > 0.
        let p = params(0.13, 57.0);
        for l in [-3i64, -1, 1, 2, 5] {
            for tau in [-0.4, 0.01, 0.19, 0.5, 1.0, 3.7] {
                let lhs = coefficient_a_tau(l, tau, &p).unwrap();
                let rhs = p.eta * coefficient_a_t(l, tau * p.eta, &p).unwrap();
                assert!(
                    (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0),
                    "l={l} tau={tau}: {lhs} vs {rhs}"
                );
            }
        }
    }

    /// conj-reflection symmetry: R[w](k) := conj(w(-k)) satisfies
    /// rhs(R[w], -tau) = -R[rhs(w, tau)] on a symmetric window.
    fn reflect_conj(w: &ModeVector) -> ModeVector {
        let kmax = w.k_max();
        assert_eq!(-w.k_min, kmax);
        let mut out = ModeVector::zeros(w.time, w.kind, w.k_min, kmax);
        for (k, a) in w.modes() {
            out.set(-k, a.conj());
        }
        out
    }

    proptest! {
        #[test]
        fn prop_reflection_antisymmetry(
            res in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 9),
            tau in -1.5f64..1.5,
            c in 0.01f64..0.19,
            eta in 1.0f64..300.0,
        ) {
            let p = ModelParams::new(c, eta, -4, 4).unwrap();
            let mut w = ModeVector::zeros(tau, TimeVar::Tau, -4, 4);
            for (i, (re, im)) in res.iter().enumerate() {
                w.amplitudes[i] = Complex64::new(*re, *im);
            }
            let lhs = rhs_tau(&reflect_conj(&w), -tau, &p).unwrap();
            let rhs_v = reflect_conj(&rhs_tau(&w, tau, &p).unwrap());
            for k in -4i64..=4 {
                let d = (lhs.get(k) + rhs_v.get(k)).norm();
                prop_assert!(d <= 1e-10 * (1.0 + lhs.get(k).norm()), "k={k}: {d}");
            }
        }

        #[test]
        fn prop_large_time_coefficient_envelope(
            l in prop_oneof![(-40i64..=-1), (1i64..=40)],
            tau in 2.0f64..50.0,
            c in 0.01f64..0.19,
            eta in 0.5f64..1e5,
        ) {
            // For tau >= 2 every coefficient obeys c/(1+(tau-2)^2), any eta, any l.
            let p = ModelParams::new(c, eta, -4, 4).unwrap();
            let v = coefficient_a_tau(l, tau, &p).unwrap();
            let bound = c / (1.0 + (tau - 2.0) * (tau - 2.0));
            prop_assert!(v <= bound * (1.0 + 1e-12), "l={l} tau={tau}: {v} > {bound}");
        }
    }
}
