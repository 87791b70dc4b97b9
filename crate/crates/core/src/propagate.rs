//! Initial-value propagation of `-y'' + q y = lambda y` along an edge,
//! with the interior jump applied analytically.
//!
//! The integrator is a fixed fourth-order Magnus method (two Gauss nodes,
//! closed-form matrix exponential). On intervals where `q` is constant the
//! step reduces to the exact trigonometric/hyperbolic propagator, so
//! piecewise-constant potentials integrate to rounding accuracy in one
//! step per piece. Step sizes obey `h <= min(h_max, 0.1/sqrt(1+|lambda|))`
//! so the phase error stays controlled as `lambda` grows; `h_max` comes
//! from the configured tolerance.
//!
//! Breakpoints of `q` and the jump location are always mesh points; the
//! jump itself is the exact 2x2 transfer `(y, y') -> (a y, y'/a + b y)`,
//! never smeared across a step.

use crate::model::{EdgeSpec, JumpSpec, PotentialSpec};
use crate::trig::{cos_like, cosh_like, sin_like, sinhc_like};
use crate::{Error, Result};

use std::f64::consts::PI;

/// Rescale threshold for hyperbolically growing solutions (lambda very
/// negative). Only ratios and signs matter downstream, so the pair
/// `(y, y')` is renormalized and the factor tracked in log space.
const RESCALE_LIMIT: f64 = 1e140;

/// Integrator configuration.
#[derive(Debug, Clone, Copy)]
pub struct Settings {
    /// Target relative accuracy per unit interval. Default 1e-10.
    pub tol_rel: f64,
    /// Cap on phase advance per step: `h <= phase_step / sqrt(1+|lambda|)`.
    pub phase_step: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings { tol_rel: 1e-10, phase_step: 0.1 }
    }
}

impl Settings {
    pub fn with_tolerance(tol_rel: f64) -> Self {
        Settings { tol_rel, ..Settings::default() }
    }

    /// Base step bound for non-constant pieces, scaled so the fourth-order
    /// error lands near `tol_rel` per unit interval.
    fn h_max(&self) -> f64 {
        (1e-3 * (self.tol_rel / 1e-10).powf(0.25)).clamp(1e-5, 5e-2)
    }

    fn step_bound(&self, lambda: f64) -> f64 {
        self.h_max().min(self.phase_step / (1.0 + lambda.abs()).sqrt())
    }
}

/// Pointwise solution data. `y` and `yp` are mantissas: the represented
/// values are `y * exp(log_scale)` and `yp * exp(log_scale)`; `log_scale`
/// is zero except for deeply negative lambda.
#[derive(Debug, Clone, Copy)]
pub struct SolutionState {
    pub x: f64,
    pub y: f64,
    pub yp: f64,
    pub lambda: f64,
    pub log_scale: f64,
}

impl SolutionState {
    pub fn y_value(&self) -> f64 {
        self.y * self.log_scale.exp()
    }

    pub fn yp_value(&self) -> f64 {
        self.yp * self.log_scale.exp()
    }
}

/// Edge endpoint data consumed by the characteristic function.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryData {
    /// Mantissa of `phi(pi, lambda)`.
    pub phi_end: f64,
    /// Mantissa of `phi'(pi, lambda)`.
    pub dphi_end: f64,
    /// `phi_1(d-0, lambda)` (edge 1 only), as a plain value.
    pub phi_at_d_minus: Option<f64>,
    /// Common log-scale of `phi_end` and `dphi_end`.
    pub log_scale: f64,
}

/// One exact step of `y'' = xi y` with constant `xi` over width `h`.
#[inline]
fn constant_step(y: &mut f64, yp: &mut f64, xi: f64, h: f64) {
    let m2 = xi * h * h;
    let c = cosh_like(m2);
    let s = sinhc_like(m2);
    let (y0, yp0) = (*y, *yp);
    *y = c * y0 + h * s * yp0;
    *yp = xi * h * s * y0 + c * yp0;
}

/// One fourth-order Magnus step over `[x0, x0+h]` with `xi(x) = q(x) - lambda`.
#[inline]
fn magnus_step(y: &mut f64, yp: &mut f64, q: &PotentialSpec, lambda: f64, x0: f64, h: f64) {
    const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9; // sqrt(3)/6
    let xi1 = q.eval(x0 + (0.5 - GAUSS_OFFSET) * h) - lambda;
    let xi2 = q.eval(x0 + (0.5 + GAUSS_OFFSET) * h) - lambda;
    let xi_mean = 0.5 * (xi1 + xi2);
    // Commutator correction: Omega = [[delta, h], [h xi_mean, -delta]].
    let delta = 3f64.sqrt() / 12.0 * h * h * (xi1 - xi2);
    let m2 = delta * delta + h * h * xi_mean;
    let c = cosh_like(m2);
    let s = sinhc_like(m2);
    let (y0, yp0) = (*y, *yp);
    *y = (c + s * delta) * y0 + s * h * yp0;
    *yp = s * h * xi_mean * y0 + (c - s * delta) * yp0;
}

struct RawState {
    y: f64,
    yp: f64,
    log_scale: f64,
}

impl RawState {
    fn rescale(&mut self) {
        let m = self.y.abs().max(self.yp.abs());
        if m > RESCALE_LIMIT || (m < 1.0 / RESCALE_LIMIT && m > 0.0) {
            self.y /= m;
            self.yp /= m;
            self.log_scale += m.ln();
        }
    }

    fn value(&self) -> (f64, f64) {
        let f = self.log_scale.exp();
        (self.y * f, self.yp * f)
    }
}

/// Propagate across `[lo, hi]` assumed free of q-breakpoints.
fn advance_smooth(
    st: &mut RawState,
    q: &PotentialSpec,
    lambda: f64,
    lo: f64,
    hi: f64,
    settings: &Settings,
) -> Result<()> {
    let len = hi - lo;
    if len <= 0.0 {
        return Ok(());
    }
    if let Some(qc) = piece_constant_value(q, lo, hi) {
        let xi = qc - lambda;
        // exact at any step size; chunk only so hyperbolic growth stays
        // inside f64 range between rescales
        let n = if xi > 0.0 { (xi.sqrt() * len / 200.0).ceil().max(1.0) as usize } else { 1 };
        let h = len / n as f64;
        for _ in 0..n {
            constant_step(&mut st.y, &mut st.yp, xi, h);
            st.rescale();
        }
        return Ok(());
    }
    let bound = settings.step_bound(lambda);
    let n = (len / bound).ceil() as usize;
    if n > 50_000_000 {
        return Err(Error::IntegratorFailure {
            lambda,
            x: lo,
            detail: format!("step bound {bound:.3e} underflows the interval"),
        });
    }
    let h = len / n as f64;
    for i in 0..n {
        magnus_step(&mut st.y, &mut st.yp, q, lambda, lo + i as f64 * h, h);
        st.rescale();
    }
    Ok(())
}

/// `Some(q)` when the smooth piece containing `[lo, hi]` is exactly constant.
fn piece_constant_value(q: &PotentialSpec, lo: f64, hi: f64) -> Option<f64> {
    let mid = 0.5 * (lo + hi);
    match q {
        PotentialSpec::Zero => Some(0.0),
        PotentialSpec::Constant(c) => Some(*c),
        PotentialSpec::PiecewisePolynomial { .. } => {
            let v = q.eval(mid);
            let row_const = {
                // constant iff all higher coefficients of this piece vanish
                if let PotentialSpec::PiecewisePolynomial { breakpoints, coefficients } = q {
                    let i = match breakpoints
                        .binary_search_by(|g| g.partial_cmp(&mid).unwrap())
                    {
                        Ok(i) => i.min(breakpoints.len() - 2),
                        Err(i) => i.saturating_sub(1).min(breakpoints.len() - 2),
                    };
                    coefficients[i].iter().skip(1).all(|&c| c == 0.0)
                } else {
                    unreachable!()
                }
            };
            row_const.then_some(v)
        }
        PotentialSpec::SampledTable { abscissae, values } => {
            let i = match abscissae.binary_search_by(|g| g.partial_cmp(&mid).unwrap()) {
                Ok(i) => i.min(abscissae.len() - 2),
                Err(i) => i.saturating_sub(1).min(abscissae.len() - 2),
            };
            (values[i] == values[i + 1]).then_some(values[i])
        }
    }
}

/// Values of a solution section at the requested nodes.
pub struct SectionOutput {
    /// `(y, y')` at each node, as plain values.
    pub node_values: Vec<(f64, f64)>,
    /// State at the last node (scaled representation).
    pub end: SolutionState,
}

/// Propagate `-y'' + q y = lambda y` from `(x0, y0, yp0)` through the
/// ascending `nodes` (all > x0; the last node is the section end),
/// recording `(y, y')` at each node. Breakpoints of `q` inside the section
/// become mesh points. The jump is *not* applied here; sections between
/// jump points are the caller's responsibility.
pub fn propagate_q_section(
    q: &PotentialSpec,
    lambda: f64,
    x0: f64,
    y0: f64,
    yp0: f64,
    nodes: &[f64],
    settings: &Settings,
) -> Result<SectionOutput> {
    let xe = *nodes.last().ok_or_else(|| Error::InvalidInput("empty node list".into()))?;
    let mut cuts: Vec<f64> = q
        .interior_breakpoints()
        .into_iter()
        .filter(|&c| c > x0 + 1e-14 && c < xe - 1e-14)
        .collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut st = RawState { y: y0, yp: yp0, log_scale: 0.0 };
    let mut out = Vec::with_capacity(nodes.len());
    let mut x = x0;
    let mut cut_iter = cuts.into_iter().peekable();
    for &node in nodes {
        if node <= x {
            return Err(Error::InvalidInput("nodes must be strictly increasing".into()));
        }
        while let Some(&c) = cut_iter.peek() {
            if c < node - 1e-14 {
                advance_smooth(&mut st, q, lambda, x, c, settings)?;
                x = c;
                cut_iter.next();
            } else {
                break;
            }
        }
        advance_smooth(&mut st, q, lambda, x, node, settings)?;
        x = node;
        out.push(st.value());
    }
    debug_assert!(st.y != 0.0 || st.yp != 0.0, "solution vanished identically");
    Ok(SectionOutput {
        node_values: out,
        end: SolutionState { x: xe, y: st.y, yp: st.yp, lambda, log_scale: st.log_scale },
    })
}

/// Solution of the edge initial-value problem `y(0) = 1, y'(0) = h`
/// evaluated at `stop_at`, ignoring any jump.
pub fn propagate_edge(
    edge: &EdgeSpec,
    lambda: f64,
    stop_at: f64,
    settings: &Settings,
) -> Result<SolutionState> {
    if !(stop_at > 0.0 && stop_at <= PI) {
        return Err(Error::InvalidInput("stop_at must lie in (0, pi]".into()));
    }
    let out = propagate_q_section(&edge.q, lambda, 0.0, 1.0, edge.h, &[stop_at], settings)?;
    Ok(out.end)
}

/// Apply the jump transfer at `d`: `(y, y') -> (a y, y'/a + b y)`.
/// The transfer matrix has unit determinant.
pub fn apply_jump(state: &SolutionState, jump: &JumpSpec) -> SolutionState {
    debug_assert!((state.x - jump.d).abs() < 1e-12, "jump applied away from d");
    let det = jump.a * (1.0 / jump.a);
    debug_assert!((det - 1.0).abs() < 1e-12);
    SolutionState {
        x: state.x,
        y: jump.a * state.y,
        yp: state.yp / jump.a + jump.b * state.y,
        lambda: state.lambda,
        log_scale: state.log_scale,
    }
}

/// Full edge-1 propagation: `[0, d)`, jump, `(d, pi]`. Also records
/// `phi_1(d-0, lambda)`.
pub fn propagate_edge1(
    edge: &EdgeSpec,
    jump: &JumpSpec,
    lambda: f64,
    settings: &Settings,
) -> Result<BoundaryData> {
    let at_d = propagate_edge(edge, lambda, jump.d, settings)?;
    let phi_minus = at_d.y_value();
    let after = apply_jump(&at_d, jump);
    let out = propagate_q_section(
        &edge.q,
        lambda,
        jump.d,
        after.y,
        after.yp,
        &[PI],
        settings,
    )?;
    Ok(BoundaryData {
        phi_end: out.end.y,
        dphi_end: out.end.yp,
        phi_at_d_minus: Some(phi_minus),
        log_scale: out.end.log_scale + after.log_scale,
    })
}

/// Endpoint data for an edge without a jump (edges 2 and 3, and the
/// Dirichlet determinants).
pub fn edge_boundary(edge: &EdgeSpec, lambda: f64, settings: &Settings) -> Result<BoundaryData> {
    let end = propagate_edge(edge, lambda, PI, settings)?;
    Ok(BoundaryData {
        phi_end: end.y,
        dphi_end: end.yp,
        phi_at_d_minus: None,
        log_scale: end.log_scale,
    })
}

/// The unperturbed jump solution (`q = 0`, `h = 0`, `b = 0`):
/// `cos(k x)` left of `d` and
/// `a cos k(x-d) cos kd - (1/a) sin k(x-d) sin kd` right of `d`
/// (right limit at `x = d`), continued through lambda <= 0 via
/// cosh/sinh. Defined for `x` in `[0, 2 pi]`.
pub fn phi0(x: f64, lambda: f64, jump: &JumpSpec) -> f64 {
    if x < jump.d {
        cos_like(x, lambda)
    } else {
        let a = jump.a;
        a * cos_like(x - jump.d, lambda) * cos_like(jump.d, lambda)
            - (1.0 / a) * lambda * sin_like(x - jump.d, lambda) * sin_like(jump.d, lambda)
    }
}
