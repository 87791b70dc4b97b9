//! Characteristic functions of the star problem.
//!
//! `omega(lambda)` is the 3x3 matching determinant whose zeros (with
//! multiplicity) are the eigenvalues; expanded it is
//! `phi_1' phi_2 phi_3 + phi_1 phi_2' phi_3 + phi_1 phi_2 phi_3'` at
//! `x = pi`. The leading model is
//!
//! ```text
//! omega0(lambda) = -(3/2) alpha1 k cos(k pi)
//!                  [sin 2k pi + 3 beta sin 2k(pi-d) + beta sin 2k d]
//! ```
//!
//! with `alpha1 = (a+1/a)/2`, `beta = (a^2-1)/(3(a^2+1))`; the residual
//! `omega - omega0` stays bounded on the real k-axis while `omega` itself
//! grows like `k`. A truncated Hadamard product anchored to `omega0`'s own
//! tail rebuilds `omega` from an enumerated spectrum.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::model::{CharTrace, EdgeSpec, JumpSpec, Provenance, Spectrum, StarProblem};
use crate::propagate::{edge_boundary, propagate_edge1, BoundaryData, Settings};
use crate::trig::{cos_like, sin_like};
use crate::{Error, Result};

/// Value in scaled form: `mantissa * exp(log_scale)`. The scale is zero
/// except for deeply negative lambda where the boundary data grows
/// hyperbolically; signs and zeros are unaffected by the (positive) scale.
#[derive(Debug, Clone, Copy)]
pub struct ScaledReal {
    pub mantissa: f64,
    pub log_scale: f64,
}

impl ScaledReal {
    pub fn value(&self) -> f64 {
        self.mantissa * self.log_scale.exp()
    }

    pub fn sign(&self) -> f64 {
        if self.mantissa == 0.0 { 0.0 } else { self.mantissa.signum() }
    }

    /// Signed log-magnitude comparison key.
    pub fn log_abs(&self) -> f64 {
        self.mantissa.abs().ln() + self.log_scale
    }
}

/// Boundary data for all three edges at one lambda.
pub fn boundary_triple(
    problem: &StarProblem,
    lambda: f64,
    settings: &Settings,
) -> Result<[BoundaryData; 3]> {
    let b1 = propagate_edge1(&problem.edges[0], &problem.jump, lambda, settings)?;
    let b2 = edge_boundary(&problem.edges[1], lambda, settings)?;
    let b3 = edge_boundary(&problem.edges[2], lambda, settings)?;
    Ok([b1, b2, b3])
}

fn omega_from_boundary(bd: &[BoundaryData; 3]) -> ScaledReal {
    let log = bd[0].log_scale + bd[1].log_scale + bd[2].log_scale;
    let [b1, b2, b3] = bd;
    let m = b1.dphi_end * b2.phi_end * b3.phi_end
        + b1.phi_end * b2.dphi_end * b3.phi_end
        + b1.phi_end * b2.phi_end * b3.dphi_end;
    ScaledReal { mantissa: m, log_scale: log }
}

/// Characteristic function in scaled form; use for root scans that may
/// reach deeply negative lambda.
pub fn omega_scaled(
    problem: &StarProblem,
    lambda: f64,
    settings: &Settings,
) -> Result<ScaledReal> {
    Ok(omega_from_boundary(&boundary_triple(problem, lambda, settings)?))
}

/// Characteristic function `omega(lambda)` as a plain value.
pub fn omega(problem: &StarProblem, lambda: f64, settings: &Settings) -> Result<f64> {
    Ok(omega_scaled(problem, lambda, settings)?.value())
}

/// Same determinant evaluated by literal cofactor expansion of
///
/// ```text
/// | phi_1(pi)   -phi_2(pi)    0        |
/// | phi_1(pi)    0           -phi_3(pi)|
/// | phi_1'(pi)   phi_2'(pi)   phi_3'(pi)|
/// ```
///
/// Agrees with [`omega`] to rounding; kept as an independent algebraic
/// route for cross-checks.
pub fn omega_via_determinant(
    problem: &StarProblem,
    lambda: f64,
    settings: &Settings,
) -> Result<f64> {
    let bd = boundary_triple(problem, lambda, settings)?;
    let f = (bd[0].log_scale + bd[1].log_scale + bd[2].log_scale).exp();
    let (p1, dp1) = (bd[0].phi_end, bd[0].dphi_end);
    let (p2, dp2) = (bd[1].phi_end, bd[1].dphi_end);
    let (p3, dp3) = (bd[2].phi_end, bd[2].dphi_end);
    // expand along the first row
    let minor11 = 0.0 * dp3 - (-p3) * dp2;
    let minor12 = p1 * dp3 - (-p3) * dp1;
    Ok((p1 * minor11 + p2 * minor12) * f)
}

/// Leading model `omega0`. On the real k-axis this is the display above;
/// the implementation is entire in lambda (cosh/sinh continuation), which
/// the Hadamard rebuild needs for its reference point at lambda = -1.
pub fn omega0(jump: &JumpSpec, lambda: f64) -> f64 {
    lambda * omega0_reduced(jump, lambda)
}

/// `omega0(lambda) / lambda` (entire; nonzero at lambda = 0).
fn omega0_reduced(jump: &JumpSpec, lambda: f64) -> f64 {
    let alpha1 = jump.alpha1();
    let beta = jump.beta();
    let d = jump.d;
    -1.5 * alpha1
        * cos_like(PI, lambda)
        * (sin_like(2.0 * PI, lambda)
            + 3.0 * beta * sin_like(2.0 * (PI - d), lambda)
            + beta * sin_like(2.0 * d, lambda))
}

/// `omega(lambda) - omega0(lambda)`: bounded on the real k-axis while
/// omega itself grows like k.
pub fn omega_residual(problem: &StarProblem, lambda: f64, settings: &Settings) -> Result<f64> {
    Ok(omega(problem, lambda, settings)? - omega0(&problem.jump, lambda))
}

/// Characteristic function of the edge Dirichlet problem
/// (`y'(0) = h y(0)`, `y(pi) = 0`): just `phi_i(pi, lambda)`.
pub fn dirichlet_charfn(edge: &EdgeSpec, lambda: f64, settings: &Settings) -> Result<f64> {
    Ok(dirichlet_scaled(edge, lambda, settings)?.value())
}

pub fn dirichlet_scaled(edge: &EdgeSpec, lambda: f64, settings: &Settings) -> Result<ScaledReal> {
    let bd = edge_boundary(edge, lambda, settings)?;
    Ok(ScaledReal { mantissa: bd.phi_end, log_scale: bd.log_scale })
}

/// Forward-solve trace of omega on a uniform k-grid.
pub fn forward_trace(
    problem: &StarProblem,
    k_lo: f64,
    k_hi: f64,
    spacing: f64,
    settings: &Settings,
) -> Result<CharTrace> {
    let ks = crate::model::k_grid(k_lo, k_hi, spacing);
    let values: Vec<f64> = ks
        .par_iter()
        .map(|&k| omega(problem, k * k, settings))
        .collect::<Result<_>>()?;
    CharTrace::new(ks, values, Provenance::ForwardSolve)
}

/// Trace of the model omega0 on a uniform k-grid.
pub fn omega0_trace(jump: &JumpSpec, k_lo: f64, k_hi: f64, spacing: f64) -> Result<CharTrace> {
    let ks = crate::model::k_grid(k_lo, k_hi, spacing);
    let values = ks.iter().map(|&k| omega0(jump, k * k)).collect();
    CharTrace::new(ks, values, Provenance::ModelOmega0)
}

/// Truncated Hadamard product anchored to omega0's tail.
///
/// The rebuild is
///
/// ```text
/// normalization * lambda^{m0} * prod_spectrum (1 - lambda/lambda_n)^mult
///               * omega0(lambda) / [lambda * prod_model (1 - lambda/mu_n)^mult]
/// ```
///
/// where the model product runs over omega0's own zeros truncated to the
/// same total multiplicity as the spectrum, so the omitted tails cancel
/// against each other. `model` supplies the jump parameters of the anchor
/// (identity when recovering from a bare spectrum).
pub struct HadamardRebuild {
    spectrum_zeros: Vec<(f64, u32)>,
    model_zeros: Vec<(f64, u32)>,
    jump: JumpSpec,
    zero_eigen_mult: u32,
    trust_k: f64,
}

impl HadamardRebuild {
    pub fn new(spectrum: &Spectrum, model: &JumpSpec) -> Result<Self> {
        if spectrum.entries.is_empty() {
            return Err(Error::InvalidInput("empty spectrum".into()));
        }
        let mut spectrum_zeros = Vec::new();
        let mut zero_eigen_mult = 0;
        for e in &spectrum.entries {
            if e.lambda.abs() < 1e-9 {
                zero_eigen_mult += e.multiplicity;
            } else {
                spectrum_zeros.push((e.lambda, e.multiplicity));
            }
        }
        let total: u32 = zero_eigen_mult + spectrum_zeros.iter().map(|z| z.1).sum::<u32>();

        // omega0's own zeros, to the same total multiplicity. Its zero at
        // lambda = 0 is always simple and handled analytically through
        // omega0(lambda)/lambda.
        let model_spectrum =
            crate::spectrum::enumerate_model_omega0(model, spectrum.k_max + 2.0)?;
        let mut model_zeros = Vec::new();
        let mut acc = 1u32; // the analytic zero at the origin
        let mut saw_origin = false;
        for e in &model_spectrum.entries {
            if e.lambda.abs() < 1e-9 {
                saw_origin = true;
                continue;
            }
            if acc >= total {
                break;
            }
            let take = e.multiplicity.min(total - acc);
            model_zeros.push((e.lambda, take));
            acc += take;
        }
        if !saw_origin || acc < total {
            return Err(Error::InvalidInput(format!(
                "model omega0 zero list too short for truncation index {total}"
            )));
        }
        Ok(HadamardRebuild {
            spectrum_zeros,
            model_zeros,
            jump: *model,
            zero_eigen_mult,
            trust_k: 0.5 * spectrum.truncation_index as f64,
        })
    }

    /// Product form before normalization.
    pub fn eval_unnormalized(&self, lambda: f64) -> Result<f64> {
        if lambda > 0.0 && lambda.sqrt() >= self.trust_k {
            return Err(Error::TrustRegionExceeded { lambda, trust_k: self.trust_k });
        }
        let mut v = omega0_reduced(&self.jump, lambda);
        for &(z, m) in &self.spectrum_zeros {
            v *= (1.0 - lambda / z).powi(m as i32);
        }
        for &(z, m) in &self.model_zeros {
            v /= (1.0 - lambda / z).powi(m as i32);
        }
        v *= lambda.powi(self.zero_eigen_mult as i32);
        Ok(v)
    }

    pub fn eval(&self, normalization: f64, lambda: f64) -> Result<f64> {
        Ok(normalization * self.eval_unnormalized(lambda)?)
    }

    /// Normalization that matches a known omega value at `lambda_ref`
    /// (conventionally -1, which is never a zero since all zeros are real
    /// and the spectrum is bounded below by `lambda_min`).
    pub fn normalization_from(&self, omega_at_ref: f64, lambda_ref: f64) -> Result<f64> {
        let base = self.eval_unnormalized(lambda_ref)?;
        if base == 0.0 || !base.is_finite() {
            return Err(Error::InvalidInput(format!(
                "rebuild degenerate at reference lambda {lambda_ref}"
            )));
        }
        Ok(omega_at_ref / base)
    }

    pub fn trust_k(&self) -> f64 {
        self.trust_k
    }

    /// Rebuilt trace on a uniform k-grid (all points must sit inside the
    /// trust region).
    pub fn trace(&self, normalization: f64, k_lo: f64, k_hi: f64, spacing: f64) -> Result<CharTrace> {
        let ks = crate::model::k_grid(k_lo, k_hi, spacing);
        let values = ks
            .iter()
            .map(|&k| self.eval(normalization, k * k))
            .collect::<Result<Vec<_>>>()?;
        CharTrace::new(ks, values, Provenance::HadamardProduct)
    }
}

/// One-shot form of the rebuild. For trace generation build a
/// [`HadamardRebuild`] once instead.
pub fn hadamard_rebuild(
    spectrum: &Spectrum,
    model: &JumpSpec,
    normalization: f64,
    lambda: f64,
) -> Result<f64> {
    HadamardRebuild::new(spectrum, model)?.eval(normalization, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PotentialSpec, StarProblem};
    use approx::assert_abs_diff_eq;

    fn settings() -> Settings {
        Settings::default()
    }

    /// Closed form for the reference problem.
    fn omega_reference(k: f64) -> f64 {
        -3.0 * k * (k * PI).sin() * (k * PI).cos().powi(2)
    }

    #[test]
    fn reference_problem_closed_form() {
        let p = StarProblem::reference();
        let s = settings();
        // k = 0.25: -0.75 sin(pi/4) cos^2(pi/4)
        let expected = -0.75 * (PI / 4.0).sin() * (PI / 4.0).cos().powi(2);
        assert_abs_diff_eq!(omega(&p, 0.0625, &s).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, -0.265_165_042_944_955_35, epsilon = 1e-15);
        // k = 1: sin(k pi) = 0
        assert!(omega(&p, 1.0, &s).unwrap().abs() < 1e-12);
        for &k in &[0.1, 0.7, 2.3, 9.4] {
            assert_abs_diff_eq!(
                omega(&p, k * k, &s).unwrap(),
                omega_reference(k),
                epsilon = 1e-10 * (1.0 + k)
            );
        }
    }

    #[test]
    fn omega0_identity_jump_collapses() {
        let id = JumpSpec::new(1.0, 0.0, 1.3);
        for &k in &[0.2, 1.1, 4.7] {
            assert_abs_diff_eq!(omega0(&id, k * k), omega_reference(k), epsilon = 1e-11);
        }
        assert_eq!(omega0(&id, 0.0), 0.0);
        assert_eq!(omega0(&JumpSpec::new(2.0, 0.0, 1.0), 0.0), 0.0);
    }

    #[test]
    fn omega0_derived_value() {
        // a=2, d=1, k=1, assembled independently term by term
        let j = JumpSpec::new(2.0, 0.0, 1.0);
        let (alpha1, beta) = (1.25, 0.2);
        let bracket = (2.0 * PI).sin()
            + 3.0 * beta * (2.0 * (PI - 1.0)).sin()
            + beta * 2.0f64.sin();
        let expected = -1.5 * alpha1 * 1.0 * PI.cos() * bracket;
        assert_abs_diff_eq!(omega0(&j, 1.0), expected, epsilon = 1e-13);
        assert_abs_diff_eq!(expected, -0.681_973_070_119_261_7, epsilon = 1e-12);
    }

    #[test]
    fn zero_potential_jump_problem_equals_model() {
        // q = 0, h = 0, b = 0: omega is exactly omega0 for any (a, d)
        let mut p = StarProblem::reference();
        p.jump = JumpSpec::new(2.0, 0.0, 1.0);
        let s = settings();
        for &k in &[0.3, 1.0, 2.6, 7.8, 20.1] {
            assert_abs_diff_eq!(
                omega(&p, k * k, &s).unwrap(),
                omega0(&p.jump, k * k),
                epsilon = 1e-9 * (1.0 + k)
            );
        }
    }

    #[test]
    fn residual_vanishes_for_reference() {
        let p = StarProblem::reference();
        let s = settings();
        for &lam in &[0.0, 0.4, 3.0, 55.0] {
            assert!(omega_residual(&p, lam, &s).unwrap().abs() < 1e-9 * (1.0 + lam.sqrt()));
        }
    }

    #[test]
    fn residual_finite_at_zero() {
        let mut p = StarProblem::reference();
        p.edges[1].q = PotentialSpec::Constant(1.0);
        let r = omega_residual(&p, 0.0, &settings()).unwrap();
        assert!(r.is_finite());
    }

    #[test]
    fn dirichlet_examples() {
        let s = settings();
        // q=0, h=0: phi(pi) = cos(k pi); zero at k=0.5
        let e = EdgeSpec::zero();
        assert!(dirichlet_charfn(&e, 0.25, &s).unwrap().abs() < 1e-12);
        // q=0, h=1, k=1 -> cos(pi) = -1 (the sin term vanishes)
        let e1 = EdgeSpec::new(PotentialSpec::Zero, 1.0);
        assert_abs_diff_eq!(dirichlet_charfn(&e1, 1.0, &s).unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn determinant_route_matches_sum_route() {
        let mut p = StarProblem::reference();
        p.jump = JumpSpec::new(1.7, 0.3, 0.9);
        p.edges[0].q = PotentialSpec::step(0.2, 1.5, 0.6);
        p.edges[1].h = 0.4;
        let s = settings();
        for &lam in &[-2.0, 0.3, 8.0, 44.4] {
            let a = omega(&p, lam, &s).unwrap();
            let b = omega_via_determinant(&p, lam, &s).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-11 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn symmetric_under_edge_swap() {
        let mut p = StarProblem::reference();
        p.edges[1] = EdgeSpec::new(PotentialSpec::Constant(0.7), 0.2);
        p.edges[2] = EdgeSpec::new(PotentialSpec::step(0.1, 2.0, -0.4), -0.3);
        p.jump = JumpSpec::new(1.4, 0.1, 1.2);
        let q = p.swap_edges_23();
        let s = settings();
        for &lam in &[-1.0, 2.2, 17.0] {
            assert_abs_diff_eq!(
                omega(&p, lam, &s).unwrap(),
                omega(&q, lam, &s).unwrap(),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn equal_edges_force_dirichlet_factor() {
        // identity jump, edges 2 and 3 identical: every Dirichlet zero of
        // edge 2 is a zero of omega
        let q2 = PotentialSpec::Constant(0.9);
        let mut p = StarProblem::reference();
        p.edges[1] = EdgeSpec::new(q2.clone(), 0.0);
        p.edges[2] = EdgeSpec::new(q2.clone(), 0.0);
        let s = settings();
        // Dirichlet zeros of q=0.9 const, h=0: lambda = (m-1/2)^2 + 0.9
        for m in 1..=4 {
            let lam = ((m as f64) - 0.5).powi(2) + 0.9;
            assert!(dirichlet_charfn(&p.edges[1], lam, &s).unwrap().abs() < 1e-10);
            assert!(omega(&p, lam, &s).unwrap().abs() < 1e-9);
        }
    }
}
