//! Adaptive Gauss-Kronrod quadrature with piecewise-polynomial
//! antiderivatives, the engine behind the iterated simplex integrals.
//!
//! Each simplex level needs not just the integral of its integrand but the
//! full antiderivative `F(s) = integral from a to s`, because the next level
//! multiplies by it pointwise. A level is therefore integrated adaptively
//! (G7/K15 with bisection), then each accepted panel is resampled at
//! Chebyshev points and stored as the Chebyshev series of its antiderivative,
//! giving O(log panels + 16) evaluation anywhere.

use crate::error::{Error, Result};

// 15-point Kronrod abscissae (positive half) with the embedded 7-point Gauss
// rule on the odd-indexed nodes.
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// One G7/K15 evaluation: (Kronrod integral, |K15 - G7| error indicator).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let dx = half * XGK[i];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kronrod += (f1 + f2) * WGK[i];
        if i % 2 == 1 {
            gauss += (f1 + f2) * WG[i / 2];
        }
    }
    kronrod *= half;
    gauss *= half;
    (kronrod, (kronrod - gauss).abs())
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    integral: f64,
    error: f64,
}

const MAX_PANELS: usize = 20_000;

#[derive(Debug, Clone, Copy)]
struct ByError(Panel);

impl PartialEq for ByError {
    fn eq(&self, other: &Self) -> bool {
        self.0.error == other.0.error
    }
}
impl Eq for ByError {}
impl PartialOrd for ByError {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for ByError {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.error.total_cmp(&other.0.error)
    }
}

/// Adaptively bisect `[a, b]` (optionally pre-split at `seeds`), always
/// splitting the worst panel, until the summed error indicators fall
/// under `tol`.
fn adaptive_panels<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    seeds: &[f64],
    tol: f64,
) -> Result<Vec<Panel>> {
    let mut cuts: Vec<f64> = vec![a, b];
    cuts.extend(seeds.iter().copied().filter(|s| *s > a && *s < b));
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();

    let mut heap: std::collections::BinaryHeap<ByError> = cuts
        .windows(2)
        .map(|w| {
            let (i, e) = gk15(f, w[0], w[1]);
            ByError(Panel { a: w[0], b: w[1], integral: i, error: e })
        })
        .collect();
    let mut total_err: f64 = heap.iter().map(|p| p.0.error).sum();

    while total_err > tol {
        let ByError(p) = heap.pop().expect("non-empty panel heap");
        let width_floor = 64.0 * f64::EPSILON * p.a.abs().max(p.b.abs()).max(1.0);
        if (p.b - p.a) < width_floor {
            return Err(Error::QuadratureNonConvergence(format!(
                "panel [{}, {}] at the width floor with total error {total_err} > {tol}",
                p.a, p.b
            )));
        }
        if heap.len() + 2 > MAX_PANELS {
            return Err(Error::QuadratureNonConvergence(format!(
                "exceeded {MAX_PANELS} panels on [{a}, {b}]"
            )));
        }
        total_err -= p.error;
        let mid = 0.5 * (p.a + p.b);
        for (lo, hi) in [(p.a, mid), (mid, p.b)] {
            let (i, e) = gk15(f, lo, hi);
            total_err += e;
            heap.push(ByError(Panel { a: lo, b: hi, integral: i, error: e }));
        }
    }
    let mut done: Vec<Panel> = heap.into_iter().map(|p| p.0).collect();
    done.sort_by(|x, y| x.a.partial_cmp(&y.a).unwrap());
    Ok(done)
}

const CHEB_N: usize = 16;

/// Piecewise-Chebyshev antiderivative `F(x) = integral_a^x f`, built from the
/// accepted panels of an adaptive pass over `f`.
#[derive(Debug, Clone)]
pub(crate) struct Antiderivative {
    a: f64,
    b: f64,
    /// Left edge of each panel (sorted) plus the right endpoint.
    edges: Vec<f64>,
    /// Chebyshev coefficients of the antiderivative restricted to a panel,
    /// normalized so the value at the panel's left edge is 0.
    coeffs: Vec<[f64; CHEB_N + 1]>,
    /// `F` at each panel's left edge.
    prefix: Vec<f64>,
    /// Sum of panel error indicators.
    pub error_estimate: f64,
}

impl Antiderivative {
    pub fn build<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, seeds: &[f64], tol: f64) -> Result<Self> {
        let panels = adaptive_panels(f, a, b, seeds, tol)?;
        let mut edges = Vec::with_capacity(panels.len() + 1);
        let mut coeffs = Vec::with_capacity(panels.len());
        let mut prefix = Vec::with_capacity(panels.len());
        let mut acc = 0.0;
        let mut err = 0.0;
        for p in &panels {
            edges.push(p.a);
            prefix.push(acc);
            coeffs.push(panel_antiderivative(f, p.a, p.b));
            acc += p.integral;
            err += p.error;
        }
        edges.push(b);
        Ok(Self {
            a,
            b,
            edges,
            coeffs,
            prefix,
            error_estimate: err,
        })
    }

    /// Total integral over `[a, b]`.
    pub fn total(&self) -> f64 {
        self.eval(self.b)
    }

    pub fn eval(&self, x: f64) -> f64 {
        debug_assert!(x >= self.a - 1e-12 && x <= self.b + 1e-12, "x = {x} outside [{}, {}]", self.a, self.b);
        let x = x.clamp(self.a, self.b);
        // Last panel whose left edge is <= x.
        let i = match self.edges[..self.edges.len() - 1]
            .binary_search_by(|e| e.partial_cmp(&x).unwrap())
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        };
        let (lo, hi) = (self.edges[i], self.edges[i + 1]);
        let u = (2.0 * x - lo - hi) / (hi - lo);
        self.prefix[i] + clenshaw(&self.coeffs[i], u)
    }
}

/// Chebyshev coefficients (Clenshaw-Curtis style, degree CHEB_N) of the
/// antiderivative of `f` on `[a, b]`, zero at the left edge.
fn panel_antiderivative<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> [f64; CHEB_N + 1] {
    let n = CHEB_N;
    // Sample at Chebyshev-Lobatto points mapped to [a, b].
    let mut fx = [0.0f64; CHEB_N + 1];
    for (j, slot) in fx.iter_mut().enumerate() {
        let u = (std::f64::consts::PI * j as f64 / n as f64).cos();
        *slot = f(0.5 * (a + b) + 0.5 * (b - a) * u);
    }
    // Interpolation coefficients b_k so that f = sum b_k T_k on the panel.
    let mut bk = [0.0f64; CHEB_N + 1];
    for (k, slot) in bk.iter_mut().enumerate() {
        let mut s = 0.5 * (fx[0] + if k % 2 == 0 { fx[n] } else { -fx[n] });
        for (j, v) in fx.iter().enumerate().take(n).skip(1) {
            s += v * (std::f64::consts::PI * (j * k) as f64 / n as f64).cos();
        }
        *slot = 2.0 * s / n as f64;
    }
    bk[0] *= 0.5;
    bk[n] *= 0.5;

    // Antiderivative series: B_1 = b_0 - b_2/2 and
    // B_k = (b_{k-1} - b_{k+1})/(2k) for k >= 2, scaled by the panel
    // half-width; B_0 fixed so the value at u = -1 vanishes.
    let half = 0.5 * (b - a);
    let mut big = [0.0f64; CHEB_N + 1];
    big[1] = half * (bk[0] - 0.5 * bk[2]);
    for k in 2..=n {
        let prev = bk[k - 1];
        let next = if k + 1 <= n { bk[k + 1] } else { 0.0 };
        big[k] = half * (prev - next) / (2.0 * k as f64);
    }
    let at_minus_one = clenshaw(&big, -1.0);
    big[0] -= at_minus_one;
    big
}

fn clenshaw(coef: &[f64; CHEB_N + 1], u: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &ck in coef.iter().skip(1).rev() {
        let t = 2.0 * u * b1 - b2 + ck;
        b2 = b1;
        b1 = t;
    }
    u * b1 - b2 + coef[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_smooth_function() {
        let f = |x: f64| x.sin();
        let anti = Antiderivative::build(&f, 0.0, 2.0, &[], 1e-12).unwrap();
        assert!((anti.total() - (1.0 - 2.0f64.cos())).abs() < 1e-12);
        for x in [0.0, 0.3, 1.1, 1.9, 2.0] {
            assert!((anti.eval(x) - (1.0 - x.cos())).abs() < 1e-11, "x = {x}");
        }
    }

    #[test]
    fn resolves_narrow_lorentzian_peak() {
        // Same shape as a resonance coefficient: eps/(eps^2 + (x-m)^2).
        let (eps, m) = (1e-5, 0.4);
        let f = move |x: f64| eps / (eps * eps + (x - m) * (x - m));
        let anti = Antiderivative::build(&f, 0.0, 1.0, &[m], 1e-10).unwrap();
        let exact = ((1.0 - m) / eps).atan() - ((0.0 - m) / eps).atan();
        assert!(
            (anti.total() - exact).abs() < 1e-8 * exact,
            "total {} vs {}",
            anti.total(),
            exact
        );
        let at_peak = anti.eval(m);
        let exact_half = 0.0f64.atan() - ((0.0 - m) / eps).atan();
        assert!((at_peak - exact_half).abs() < 1e-8 * exact_half);
    }

    #[test]
    fn antiderivative_is_monotone_for_positive_integrand() {
        let f = |x: f64| 1.0 / (1.0 + x * x);
        let anti = Antiderivative::build(&f, -3.0, 3.0, &[], 1e-12).unwrap();
        let mut last = f64::NEG_INFINITY;
        for i in 0..=100 {
            let x = -3.0 + 6.0 * i as f64 / 100.0;
            let v = anti.eval(x);
            assert!(v >= last - 1e-13);
            last = v;
        }
    }

    #[test]
    fn reports_nonconvergence_on_pathological_budget() {
        // A genuine 1/x singularity cannot meet an absurd tolerance.
        let f = |x: f64| 1.0 / x;
        let res = Antiderivative::build(&f, 0.0, 1.0, &[], 1e-14);
        assert!(matches!(res, Err(Error::QuadratureNonConvergence(_))));
    }
}
