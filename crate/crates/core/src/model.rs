//! Domain types: potentials, edges, the jump, star problems, spectra and
//! sampled characteristic-function traces.

use std::f64::consts::PI;

use crate::{Error, Result};

/// Tolerance for "equals 0" / "equals pi" checks on breakpoint tables.
const ENDPOINT_TOL: f64 = 1e-9;

/// A real, integrable potential on `[0, pi]`.
///
/// The families are closed under the quadratures used elsewhere: every
/// variant integrates exactly, so potential integrals never add quadrature
/// error to the identities that are checked against them.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    /// `q == 0`.
    Zero,
    /// `q == c`.
    Constant(f64),
    /// Piecewise polynomial. `breakpoints` is strictly increasing with
    /// first 0 and last pi; `coefficients[i]` are the coefficients of the
    /// polynomial on `[breakpoints[i], breakpoints[i+1]]` in ascending
    /// powers of the local variable `x - breakpoints[i]`.
    PiecewisePolynomial {
        breakpoints: Vec<f64>,
        coefficients: Vec<Vec<f64>>,
    },
    /// Table of samples with linear interpolation between abscissae.
    SampledTable { abscissae: Vec<f64>, values: Vec<f64> },
}

impl PotentialSpec {
    /// Piecewise-constant step: `height` on `(lo, hi)`, 0 elsewhere.
    pub fn step(lo: f64, hi: f64, height: f64) -> Self {
        let mut breakpoints = vec![0.0];
        let mut coefficients = Vec::new();
        if lo > 0.0 {
            breakpoints.push(lo);
            coefficients.push(vec![0.0]);
        }
        coefficients.push(vec![height]);
        if hi < PI {
            breakpoints.push(hi);
            coefficients.push(vec![0.0]);
        }
        breakpoints.push(PI);
        PotentialSpec::PiecewisePolynomial { breakpoints, coefficients }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::Constant(c) => *c,
            PotentialSpec::PiecewisePolynomial { breakpoints, coefficients } => {
                let i = piece_index(breakpoints, x);
                let t = x - breakpoints[i];
                // Horner in the local variable.
                coefficients[i].iter().rev().fold(0.0, |acc, &c| acc * t + c)
            }
            PotentialSpec::SampledTable { abscissae, values } => {
                let i = piece_index(abscissae, x);
                let (x0, x1) = (abscissae[i], abscissae[i + 1]);
                let t = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
                values[i] * (1.0 - t) + values[i + 1] * t
            }
        }
    }

    /// Exact integral over `[x0, x1]` (oriented).
    pub fn integral(&self, x0: f64, x1: f64) -> f64 {
        if x1 < x0 {
            return -self.integral(x1, x0);
        }
        match self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::Constant(c) => c * (x1 - x0),
            _ => {
                let mut total = 0.0;
                let cuts = self.interior_breakpoints();
                let mut lo = x0;
                for &c in cuts.iter().filter(|&&c| c > x0 && c < x1) {
                    total += self.piece_integral(lo, c);
                    lo = c;
                }
                total + self.piece_integral(lo, x1)
            }
        }
    }

    /// Integral over `[lo, hi]` assumed to lie within one smooth piece.
    fn piece_integral(&self, lo: f64, hi: f64) -> f64 {
        match self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::Constant(c) => c * (hi - lo),
            PotentialSpec::PiecewisePolynomial { breakpoints, coefficients } => {
                let i = piece_index(breakpoints, 0.5 * (lo + hi));
                let a = breakpoints[i];
                let (ta, tb) = (lo - a, hi - a);
                coefficients[i]
                    .iter()
                    .enumerate()
                    .map(|(p, &c)| {
                        let p1 = (p + 1) as f64;
                        c / p1 * (tb.powi(p as i32 + 1) - ta.powi(p as i32 + 1))
                    })
                    .sum()
            }
            PotentialSpec::SampledTable { .. } => {
                // linear between samples: trapezoid is exact
                0.5 * (self.eval(lo) + self.eval(hi)) * (hi - lo)
            }
        }
    }

    /// Evaluate at `x` using the smooth piece containing `witness`; gives
    /// one-sided values when `x` sits exactly on a piece boundary.
    pub fn eval_in_piece_of(&self, x: f64, witness: f64) -> f64 {
        match self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::Constant(c) => *c,
            PotentialSpec::PiecewisePolynomial { breakpoints, coefficients } => {
                let i = piece_index(breakpoints, witness);
                let t = x - breakpoints[i];
                coefficients[i].iter().rev().fold(0.0, |acc, &c| acc * t + c)
            }
            PotentialSpec::SampledTable { abscissae, values } => {
                let i = piece_index(abscissae, witness);
                let (x0, x1) = (abscissae[i], abscissae[i + 1]);
                let t = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
                values[i] * (1.0 - t) + values[i + 1] * t
            }
        }
    }

    /// Interior points where the definition changes; forced mesh points for
    /// the propagator.
    pub fn interior_breakpoints(&self) -> Vec<f64> {
        match self {
            PotentialSpec::Zero | PotentialSpec::Constant(_) => Vec::new(),
            PotentialSpec::PiecewisePolynomial { breakpoints, .. } => {
                breakpoints[1..breakpoints.len() - 1].to_vec()
            }
            PotentialSpec::SampledTable { abscissae, .. } => {
                abscissae[1..abscissae.len() - 1].to_vec()
            }
        }
    }

    /// True when the potential is constant on each smooth piece, in which
    /// case the propagator's per-piece step is exact.
    pub fn piecewise_constant(&self) -> bool {
        match self {
            PotentialSpec::Zero | PotentialSpec::Constant(_) => true,
            PotentialSpec::PiecewisePolynomial { coefficients, .. } => {
                coefficients.iter().all(|c| c.len() <= 1)
            }
            PotentialSpec::SampledTable { values, .. } => {
                values.windows(2).all(|w| w[0] == w[1])
            }
        }
    }

    /// Crude upper bound for `sup |q|` (exact for piecewise-constant
    /// families, sampled otherwise).
    pub fn max_abs(&self) -> f64 {
        match self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::Constant(c) => c.abs(),
            _ => (0..=256)
                .map(|i| self.eval(PI * i as f64 / 256.0).abs())
                .fold(0.0, f64::max),
        }
    }

    fn validate_into(&self, field: &str, out: &mut Vec<Diagnostic>) {
        let check_grid = |grid: &[f64], out: &mut Vec<Diagnostic>| {
            if grid.len() < 2 {
                out.push(Diagnostic::hard(field, "breakpoint table needs at least two entries"));
                return;
            }
            if (grid[0]).abs() > ENDPOINT_TOL {
                out.push(Diagnostic::hard(field, "first breakpoint must be 0"));
            }
            if (grid[grid.len() - 1] - PI).abs() > ENDPOINT_TOL {
                out.push(Diagnostic::hard(field, "last breakpoint must be pi"));
            }
            if grid.windows(2).any(|w| w[1] <= w[0]) {
                out.push(Diagnostic::hard(field, "breakpoints must be strictly increasing"));
            }
            if grid.iter().any(|v| !v.is_finite()) {
                out.push(Diagnostic::hard(field, "breakpoints must be finite"));
            }
        };
        match self {
            PotentialSpec::Zero => {}
            PotentialSpec::Constant(c) => {
                if !c.is_finite() {
                    out.push(Diagnostic::hard(field, "constant potential must be finite"));
                }
            }
            PotentialSpec::PiecewisePolynomial { breakpoints, coefficients } => {
                check_grid(breakpoints, out);
                if coefficients.len() + 1 != breakpoints.len() {
                    out.push(Diagnostic::hard(
                        field,
                        "need exactly one coefficient row per piece",
                    ));
                }
                if coefficients.iter().flatten().any(|c| !c.is_finite()) {
                    out.push(Diagnostic::hard(field, "coefficients must be finite"));
                }
            }
            PotentialSpec::SampledTable { abscissae, values } => {
                check_grid(abscissae, out);
                if abscissae.len() != values.len() {
                    out.push(Diagnostic::hard(field, "abscissae and values differ in length"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    out.push(Diagnostic::hard(field, "table values must be finite"));
                }
            }
        }
    }
}

/// Index of the piece containing `x` in a sorted grid (clamped).
fn piece_index(grid: &[f64], x: f64) -> usize {
    match grid.binary_search_by(|g| g.partial_cmp(&x).unwrap()) {
        Ok(i) => i.min(grid.len() - 2),
        Err(i) => i.saturating_sub(1).min(grid.len() - 2),
    }
}

/// One edge of the star: potential plus Robin coefficient at the root.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSpec {
    pub q: PotentialSpec,
    /// Robin coefficient: `y'(0) = h * y(0)`.
    pub h: f64,
}

impl EdgeSpec {
    pub fn new(q: PotentialSpec, h: f64) -> Self {
        EdgeSpec { q, h }
    }

    pub fn zero() -> Self {
        EdgeSpec { q: PotentialSpec::Zero, h: 0.0 }
    }
}

/// Jump data at `x = d` on edge 1:
/// `y(d+0) = a y(d-0)`, `y'(d+0) = y'(d-0)/a + b y(d-0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpSpec {
    pub a: f64,
    pub b: f64,
    pub d: f64,
    /// Whether the problem claims a genuine discontinuity. The trivial
    /// jump (a=1, b=0) is legal and marks "no discontinuity"; declaring a
    /// jump that is trivial is flagged by [`validate`].
    pub declared: bool,
}

impl JumpSpec {
    pub fn new(a: f64, b: f64, d: f64) -> Self {
        JumpSpec { a, b, d, declared: true }
    }

    /// Identity jump: no discontinuity (a=1, b=0, undeclared).
    pub fn identity() -> Self {
        JumpSpec { a: 1.0, b: 0.0, d: PI / 2.0, declared: false }
    }

    /// `alpha_1 = (a + 1/a)/2 >= 1`.
    pub fn alpha1(&self) -> f64 {
        0.5 * (self.a + 1.0 / self.a)
    }

    /// `alpha_2 = (a - 1/a)/2`.
    pub fn alpha2(&self) -> f64 {
        0.5 * (self.a - 1.0 / self.a)
    }

    /// `beta = alpha_2 / (3 alpha_1) = (a^2-1)/(3(a^2+1))`, always in
    /// (-1/3, 1/3).
    pub fn beta(&self) -> f64 {
        beta_of(self.a)
    }

    /// The zero-counting guarantee requires `(a^2-1)/(a^2+1) < 3/4`,
    /// i.e. `beta < 1/4`.
    pub fn counting_hypothesis_holds(&self) -> bool {
        self.beta() < 0.25
    }

    pub fn is_trivial(&self) -> bool {
        (self.a - 1.0).abs() + self.b.abs() == 0.0
    }
}

/// `beta(a) = (a^2 - 1) / (3 (a^2 + 1))`.
pub fn beta_of(a: f64) -> f64 {
    (a * a - 1.0) / (3.0 * (a * a + 1.0))
}

/// The full operator: three edges (edge 1 carries the jump) plus the jump.
#[derive(Debug, Clone, PartialEq)]
pub struct StarProblem {
    pub edges: [EdgeSpec; 3],
    pub jump: JumpSpec,
    pub label: String,
}

impl StarProblem {
    pub fn new(edges: [EdgeSpec; 3], jump: JumpSpec, label: impl Into<String>) -> Self {
        StarProblem { edges, jump, label: label.into() }
    }

    /// Zero potentials, `h = 0`, identity jump: the closed-form reference
    /// problem with `omega = -3 k sin(k pi) cos^2(k pi)`.
    pub fn reference() -> Self {
        StarProblem::new(
            [EdgeSpec::zero(), EdgeSpec::zero(), EdgeSpec::zero()],
            JumpSpec::identity(),
            "zero-potential identity-jump reference",
        )
    }

    pub fn max_abs_q(&self) -> f64 {
        self.edges.iter().map(|e| e.q.max_abs()).fold(0.0, f64::max)
    }

    /// Default floor for the negative-eigenvalue scan.
    pub fn default_lambda_min(&self) -> f64 {
        let b = 1.0 + self.max_abs_q();
        -(b * b)
    }

    /// Problem with edges 2 and 3 swapped; the spectrum is invariant.
    pub fn swap_edges_23(&self) -> Self {
        let mut p = self.clone();
        p.edges.swap(1, 2);
        p
    }

    /// Same problem with `c` added to every potential; shifts the whole
    /// spectrum by exactly `c`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut p = self.clone();
        for e in p.edges.iter_mut() {
            e.q = match &e.q {
                PotentialSpec::Zero => PotentialSpec::Constant(c),
                PotentialSpec::Constant(v) => PotentialSpec::Constant(v + c),
                PotentialSpec::PiecewisePolynomial { breakpoints, coefficients } => {
                    let mut coeff = coefficients.clone();
                    for row in coeff.iter_mut() {
                        if row.is_empty() {
                            row.push(c);
                        } else {
                            row[0] += c;
                        }
                    }
                    PotentialSpec::PiecewisePolynomial {
                        breakpoints: breakpoints.clone(),
                        coefficients: coeff,
                    }
                }
                PotentialSpec::SampledTable { abscissae, values } => PotentialSpec::SampledTable {
                    abscissae: abscissae.clone(),
                    values: values.iter().map(|v| v + c).collect(),
                },
            };
        }
        p.label = format!("{} (shifted by {})", p.label, c);
        p
    }
}

/// Severity of a validation finding. Warnings disable specific paper
/// guarantees (counting, uniqueness) without blocking the forward solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    HardError,
    Warning,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    fn hard(field: &str, message: &str) -> Self {
        Diagnostic { severity: Severity::HardError, field: field.into(), message: message.into() }
    }

    fn warn(field: &str, message: &str) -> Self {
        Diagnostic { severity: Severity::Warning, field: field.into(), message: message.into() }
    }
}

/// Check every structural invariant of a problem. Returns an empty list
/// when all hold; findings are data, not errors. Pure and idempotent.
pub fn validate(problem: &StarProblem) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for (i, edge) in problem.edges.iter().enumerate() {
        let field = format!("edges[{}]", i + 1);
        edge.q.validate_into(&format!("{field}.potential"), &mut out);
        if !edge.h.is_finite() {
            out.push(Diagnostic::hard(&format!("{field}.h"), "h must be finite"));
        } else if edge.h == 0.0 {
            out.push(Diagnostic::warn(
                &format!("{field}.h"),
                "h = 0 breaks the standing assumption h != 0 (closed-form guarantees only)",
            ));
        }
    }
    let j = &problem.jump;
    if !(j.a > 0.0) {
        out.push(Diagnostic::hard("jump.a", "a must be positive"));
    }
    if !j.a.is_finite() || !j.b.is_finite() || !j.d.is_finite() {
        out.push(Diagnostic::hard("jump", "jump parameters must be finite"));
    }
    if !(j.d > 0.0 && j.d < PI) {
        out.push(Diagnostic::hard("jump.d", "d must lie strictly inside (0, pi)"));
    }
    if j.declared && j.is_trivial() {
        out.push(Diagnostic::warn(
            "jump",
            "declared jump is trivial: |a-1| + |b| = 0 (no discontinuity present)",
        ));
    }
    if j.a > 0.0 && !j.counting_hypothesis_holds() {
        out.push(Diagnostic::warn(
            "jump.a",
            "(a^2-1)/(a^2+1) >= 3/4 (beta >= 1/4): zero-counting guarantee is off",
        ));
    }
    if j.a > 0.0 && j.d > 0.0 && j.d < PI && !(j.d < PI / 2.0) && (j.a - 1.0).abs() < 1e-12 {
        out.push(Diagnostic::warn(
            "jump.d",
            "d >= pi/2 with a = 1: recovery guarantees need d < pi/2 or a != 1",
        ));
    }
    out
}

/// Eigenvalue class per the asymptotic tracks: within block `n` the first
/// eigenvalue follows `sqrt(lambda) ~ n-1`, the other two `n - 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassLabel {
    C1,
    C2,
    C3,
    Unknown,
}

impl std::fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ClassLabel::C1 => "c1",
            ClassLabel::C2 => "c2",
            ClassLabel::C3 => "c3",
            ClassLabel::Unknown => "unknown",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for ClassLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "c1" => Ok(ClassLabel::C1),
            "c2" => Ok(ClassLabel::C2),
            "c3" => Ok(ClassLabel::C3),
            "unknown" => Ok(ClassLabel::Unknown),
            other => Err(Error::InvalidInput(format!("unknown class label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEntry {
    pub lambda: f64,
    pub multiplicity: u32,
    pub class: ClassLabel,
    /// Block index `n` of the asymptotic track the entry was matched to.
    pub block: usize,
    /// Set when the entry sits nearly halfway between two tracks.
    pub ambiguous: bool,
}

impl SpectrumEntry {
    /// Signed square root: `-sqrt(-lambda)` for negative eigenvalues.
    pub fn signed_k(&self) -> f64 {
        if self.lambda >= 0.0 { self.lambda.sqrt() } else { -(-self.lambda).sqrt() }
    }
}

/// Ordered eigenvalue list with multiplicities and class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub entries: Vec<SpectrumEntry>,
    /// Total multiplicity (the truncation index N).
    pub truncation_index: usize,
    pub k_max: f64,
    pub lambda_min: f64,
    /// Absolute lambda tolerance the roots were refined to.
    pub root_tol: f64,
}

impl Spectrum {
    /// Eigenvalues repeated by multiplicity, ascending.
    pub fn flattened(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.truncation_index);
        for e in &self.entries {
            for _ in 0..e.multiplicity {
                out.push(e.lambda);
            }
        }
        out
    }

    /// Total multiplicity of eigenvalues with `lambda <= bound`.
    pub fn count_below(&self, bound: f64) -> usize {
        self.entries
            .iter()
            .filter(|e| e.lambda <= bound)
            .map(|e| e.multiplicity as usize)
            .sum()
    }
}

/// Where a trace's values came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    ForwardSolve,
    HadamardProduct,
    ModelOmega0,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Provenance::ForwardSolve => "forward-solve",
            Provenance::HadamardProduct => "hadamard-product",
            Provenance::ModelOmega0 => "model-omega0",
        };
        f.write_str(s)
    }
}

/// Fastest oscillation present in a characteristic trace is about `3 pi`
/// in `k`; ten samples per period caps the spacing at `1/15`.
pub const MAX_TRACE_SPACING: f64 = 2.0 / 30.0;

/// Characteristic function sampled on a uniform real-`k` grid
/// (`values[i] = f(k_grid[i]^2)`).
#[derive(Debug, Clone, PartialEq)]
pub struct CharTrace {
    pub k_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl CharTrace {
    pub fn new(k_grid: Vec<f64>, values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if k_grid.len() != values.len() || k_grid.len() < 2 {
            return Err(Error::InvalidInput(
                "trace needs matching k/value arrays with at least two samples".into(),
            ));
        }
        let tr = CharTrace { k_grid, values, provenance };
        let sp = tr.spacing();
        if sp > MAX_TRACE_SPACING * (1.0 + 1e-9) {
            return Err(Error::GridTooCoarse { spacing: sp, max_spacing: MAX_TRACE_SPACING });
        }
        Ok(tr)
    }

    pub fn spacing(&self) -> f64 {
        (self.k_grid[self.k_grid.len() - 1] - self.k_grid[0]) / (self.k_grid.len() - 1) as f64
    }

    pub fn k_lo(&self) -> f64 {
        self.k_grid[0]
    }

    pub fn k_hi(&self) -> f64 {
        self.k_grid[self.k_grid.len() - 1]
    }

    /// Whether `[a, t]` lies inside the sampled range.
    pub fn covers(&self, a: f64, t: f64) -> bool {
        self.k_lo() <= a + 1e-12 && t <= self.k_hi() + 1e-12
    }
}

/// Uniform k-grid `lo, lo+spacing, ..., hi` (endpoint snapped).
pub fn k_grid(lo: f64, hi: f64, spacing: f64) -> Vec<f64> {
    let n = ((hi - lo) / spacing).round().max(1.0) as usize;
    let step = (hi - lo) / n as f64;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_examples() {
        assert_eq!(beta_of(1.0), 0.0);
        assert!((beta_of(2.0) - 0.2).abs() < 1e-15);
        // a=3: (9-1)/(3*10) and the counting hypothesis fails (0.8 >= 3/4)
        assert!((beta_of(3.0) - 8.0 / 30.0).abs() < 1e-15);
        assert!(!JumpSpec::new(3.0, 0.0, 1.0).counting_hypothesis_holds());
        assert!(JumpSpec::new(2.0, 0.0, 1.0).counting_hypothesis_holds());
    }

    #[test]
    fn validate_flags_h_zero_as_warning() {
        let mut p = StarProblem::reference();
        p.jump = JumpSpec::new(2.0, 0.0, 1.0);
        let diags = validate(&p);
        assert!(diags.iter().all(|d| d.severity == Severity::Warning));
        assert_eq!(diags.iter().filter(|d| d.field.contains(".h")).count(), 3);
    }

    #[test]
    fn validate_rejects_negative_a() {
        let mut p = StarProblem::reference();
        p.jump = JumpSpec::new(-1.0, 0.0, 1.0);
        let diags = validate(&p);
        assert!(diags
            .iter()
            .any(|d| d.severity == Severity::HardError && d.field == "jump.a"));
    }

    #[test]
    fn validate_warns_on_declared_trivial_jump() {
        let mut p = StarProblem::reference();
        p.jump = JumpSpec::new(1.0, 0.0, 1.0); // declared, but |a-1|+|b| = 0
        let diags = validate(&p);
        assert!(diags
            .iter()
            .any(|d| d.severity == Severity::Warning && d.field == "jump"));
    }

    #[test]
    fn validate_is_idempotent() {
        let p = StarProblem::reference();
        assert_eq!(validate(&p), validate(&p));
    }

    #[test]
    fn piecewise_polynomial_eval_and_integral() {
        // q = x on [0,1], q = 1 + 2(x-1) on [1,pi]
        let q = PotentialSpec::PiecewisePolynomial {
            breakpoints: vec![0.0, 1.0, PI],
            coefficients: vec![vec![0.0, 1.0], vec![1.0, 2.0]],
        };
        assert!((q.eval(0.5) - 0.5).abs() < 1e-15);
        assert!((q.eval(2.0) - 3.0).abs() < 1e-15);
        // int_0^1 x dx + int_1^2 (1+2(x-1)) dx = 0.5 + 2
        assert!((q.integral(0.0, 2.0) - 2.5).abs() < 1e-14);
        // oriented
        assert!((q.integral(2.0, 0.0) + 2.5).abs() < 1e-14);
    }

    #[test]
    fn step_potential_integral() {
        let q = PotentialSpec::step(0.2, 1.0, 0.8);
        assert_eq!(q.eval(0.5), 0.8);
        assert_eq!(q.eval(0.1), 0.0);
        assert_eq!(q.eval(2.0), 0.0);
        assert!((q.integral(0.0, PI) - 0.8 * 0.8).abs() < 1e-14);
        assert!(q.piecewise_constant());
    }

    #[test]
    fn sampled_table_interpolates() {
        let q = PotentialSpec::SampledTable {
            abscissae: vec![0.0, PI / 2.0, PI],
            values: vec![0.0, 1.0, 0.0],
        };
        assert!((q.eval(PI / 4.0) - 0.5).abs() < 1e-15);
        assert!((q.integral(0.0, PI) - PI / 2.0).abs() < 1e-13);
    }

    #[test]
    fn alpha_identity() {
        for &a in &[0.3, 0.9, 1.0, 1.7, 4.2] {
            let j = JumpSpec::new(a, 0.0, 1.0);
            assert!((j.alpha1() * j.alpha1() - j.alpha2() * j.alpha2() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_rejects_coarse_grid() {
        let ks = k_grid(1.0, 10.0, 0.5);
        let vs = vec![0.0; ks.len()];
        assert!(matches!(
            CharTrace::new(ks, vs, Provenance::ForwardSolve),
            Err(Error::GridTooCoarse { .. })
        ));
    }
}
