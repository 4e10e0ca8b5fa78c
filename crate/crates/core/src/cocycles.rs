//! Matrix cocycles over the irrational rotation: trigonometric-polynomial
//! potentials, step-matrix families (Schrödinger, constant, dual finite-range
//! and its block form), iteration, and finite-volume Lyapunov spectra of
//! complexified cocycles through QR-re-orthonormalized products.

use crate::arithmetic::Frequency;
use crate::linalg::{opnorm_small, QrChain};
use crate::numeric::{cis, frac, seed_unit};
use crate::parallel::par_map_idx;
use crate::{C64, CMatrix, QpError, Result};

use std::f64::consts::TAU;

// ═══════════════════════════════════════════════════════════════════
//  Trigonometric polynomials
// ═══════════════════════════════════════════════════════════════════

/// A real trigonometric polynomial `v(x) = Σ_{|k| ≤ d} v̂_k e^{2πikx}` with
/// the reality constraint `v̂_{-k} = conj(v̂_k)`, extendable to the strip
/// `|Im x| < h`.
#[derive(Debug, Clone)]
pub struct TrigPolynomial {
    /// Coefficients indexed `k = -d..=d`, stored at `k + d`.
    coeffs: Vec<C64>,
    degree: usize,
    strip: f64,
}

impl TrigPolynomial {
    /// Builds from coefficients indexed `k = -d..=d`. Rejects violations of
    /// reality and a vanishing leading coefficient (the declared degree must
    /// be exact).
    pub fn from_coeffs(coeffs: Vec<C64>, strip: f64) -> Result<Self> {
        if coeffs.len() % 2 == 0 || coeffs.is_empty() {
            return Err(QpError::Shape(
                "coefficient list must have odd length 2d+1".into(),
            ));
        }
        if !(strip > 0.0) {
            return Err(QpError::Domain("strip width must be positive".into()));
        }
        let d = coeffs.len() / 2;
        let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
        for k in 1..=d {
            let lo = coeffs[d - k];
            let hi = coeffs[d + k];
            if (lo - hi.conj()).norm() > 1e-12 * scale {
                return Err(QpError::Domain(format!(
                    "reality violated at |k| = {k}: v̂(-k) != conj(v̂(k))"
                )));
            }
        }
        if coeffs[0].im.abs() > 1e-12 * scale && d == 0 {
            return Err(QpError::Domain("constant term must be real".into()));
        }
        if d > 0 && coeffs[2 * d].norm() == 0.0 {
            return Err(QpError::Domain(format!(
                "leading coefficient v̂_{d} vanishes; declared degree is not exact"
            )));
        }
        Ok(Self {
            coeffs,
            degree: d,
            strip,
        })
    }

    /// The zero potential (free operator).
    pub fn zero() -> Self {
        Self {
            coeffs: vec![C64::new(0.0, 0.0)],
            degree: 0,
            strip: f64::INFINITY,
        }
    }

    /// `2λ cos 2πx`, entire; the default strip is 1.
    pub fn cosine(lambda: f64) -> Self {
        Self {
            coeffs: vec![
                C64::new(lambda, 0.0),
                C64::new(0.0, 0.0),
                C64::new(lambda, 0.0),
            ],
            degree: 1,
            strip: 1.0,
        }
    }

    /// `2a cos 2πx + 2b cos 4πx` (generalized Harper data), degree 2.
    pub fn even_pair(a: f64, b: f64) -> Result<Self> {
        Self::from_coeffs(
            vec![
                C64::new(b, 0.0),
                C64::new(a, 0.0),
                C64::new(0.0, 0.0),
                C64::new(a, 0.0),
                C64::new(b, 0.0),
            ],
            1.0,
        )
    }

    pub fn with_strip(mut self, strip: f64) -> Self {
        self.strip = strip;
        self
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn strip(&self) -> f64 {
        self.strip
    }

    /// `v̂_k`, zero outside `|k| ≤ d`.
    pub fn coeff(&self, k: i64) -> C64 {
        let d = self.degree as i64;
        if k.abs() > d {
            C64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + d) as usize]
        }
    }

    pub fn is_constant(&self) -> bool {
        self.degree == 0 || self.coeffs.iter().enumerate().all(|(i, c)| {
            i == self.degree || c.norm() == 0.0
        })
    }

    /// Coefficients rescaled for a fixed imaginary shift:
    /// `v(x+iε) = Σ (v̂_k e^{-2πkε}) e^{2πikx}`.
    pub(crate) fn scaled_coeffs(&self, eps: f64) -> Vec<C64> {
        let d = self.degree as i64;
        (-d..=d)
            .map(|k| self.coeff(k) * C64::new((-TAU * k as f64 * eps).exp(), 0.0))
            .collect()
    }

    /// Evaluation at `x + iε`.
    pub fn eval(&self, x: f64, eps: f64) -> C64 {
        eval_scaled(&self.scaled_coeffs(eps), x)
    }
}

/// Evaluates `Σ c_k e^{2πikx}` for coefficients indexed `k = -d..=d`.
pub(crate) fn eval_scaled(scaled: &[C64], x: f64) -> C64 {
    let d = scaled.len() / 2;
    let z = cis(TAU * x);
    let mut acc = scaled[d];
    let mut zp = C64::new(1.0, 0.0);
    for k in 1..=d {
        zp *= z;
        acc += scaled[d + k] * zp + scaled[d - k] * zp.conj();
    }
    acc
}

// ═══════════════════════════════════════════════════════════════════
//  Cocycle specifications
// ═══════════════════════════════════════════════════════════════════

/// Matrix family of a cocycle step.
#[derive(Debug, Clone)]
pub enum Family {
    /// `S_E(x) = [[E − v(x), −1], [1, 0]]`.
    Schrodinger { v: TrigPolynomial, energy: C64 },
    /// Constant matrix (the base rotation acts trivially).
    Constant { matrix: CMatrix },
    /// `2d`-dimensional transfer step of the finite-range operator with
    /// hopping `v̂` and diagonal `w`.
    DualFiniteRange {
        v: TrigPolynomial,
        w: TrigPolynomial,
        energy: C64,
    },
    /// Product of `d` consecutive finite-range steps in block form; the base
    /// rotation is by `d·α`.
    DualBlock {
        v: TrigPolynomial,
        w: TrigPolynomial,
        energy: C64,
    },
}

/// A cocycle over the rotation `x ↦ x + α` with an imaginary phase shift.
#[derive(Debug, Clone)]
pub struct CocycleSpec {
    pub alpha: Frequency,
    family: Family,
    eps: f64,
    dim: usize,
}

impl CocycleSpec {
    pub fn schrodinger(v: TrigPolynomial, energy: C64, alpha: Frequency, eps: f64) -> Result<Self> {
        if eps.abs() >= v.strip() {
            return Err(QpError::Domain(format!(
                "|eps| = {} not inside the strip of width {}",
                eps.abs(),
                v.strip()
            )));
        }
        Ok(Self {
            alpha,
            family: Family::Schrodinger { v, energy },
            eps,
            dim: 2,
        })
    }

    pub fn constant(matrix: CMatrix, alpha: Frequency) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(QpError::Shape("constant cocycle needs a square matrix".into()));
        }
        let dim = matrix.nrows();
        Ok(Self {
            alpha,
            family: Family::Constant { matrix },
            eps: 0.0,
            dim,
        })
    }

    pub fn dual(
        v: TrigPolynomial,
        w: TrigPolynomial,
        energy: C64,
        alpha: Frequency,
        eps: f64,
    ) -> Result<Self> {
        check_dual_data(&v, &w, eps)?;
        let dim = 2 * v.degree();
        Ok(Self {
            alpha,
            family: Family::DualFiniteRange { v, w, energy },
            eps,
            dim,
        })
    }

    pub fn dual_block(
        v: TrigPolynomial,
        w: TrigPolynomial,
        energy: C64,
        alpha: Frequency,
        eps: f64,
    ) -> Result<Self> {
        check_dual_data(&v, &w, eps)?;
        let dim = 2 * v.degree();
        Ok(Self {
            alpha,
            family: Family::DualBlock { v, w, energy },
            eps,
            dim,
        })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Fiber dimension `m`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Base rotation per step: `α`, or `d·α` for the block family.
    pub fn rotation(&self) -> f64 {
        match &self.family {
            Family::DualBlock { v, .. } => frac(v.degree() as f64 * self.alpha.value()),
            _ => self.alpha.value(),
        }
    }
}

fn check_dual_data(v: &TrigPolynomial, w: &TrigPolynomial, eps: f64) -> Result<()> {
    if v.degree() == 0 || v.is_constant() {
        return Err(QpError::Domain(
            "dual construction needs a non-constant hopping polynomial".into(),
        ));
    }
    let strip = v.strip().min(w.strip());
    if eps.abs() >= strip {
        return Err(QpError::Domain(format!(
            "|eps| = {} not inside the strip of width {strip}",
            eps.abs()
        )));
    }
    Ok(())
}

// ═══════════════════════════════════════════════════════════════════
//  Step construction
// ═══════════════════════════════════════════════════════════════════

/// Writes step matrices into a caller-owned buffer; scratch and templates
/// are prepared once per orbit.
pub(crate) struct Stepper {
    kind: StepperKind,
    dim: usize,
}

enum StepperKind {
    Schrodinger {
        scaled: Vec<C64>,
        energy: C64,
    },
    Constant {
        matrix: CMatrix,
        inverse: Option<CMatrix>,
    },
    Dual {
        template: CMatrix,
        wscaled: Vec<C64>,
        inv_lead: C64,
        shift: C64,
        d: usize,
    },
    Block {
        template: CMatrix,
        cinv: CMatrix,
        wscaled: Vec<C64>,
        v: TrigPolynomial,
        energy: C64,
        alpha: f64,
        d: usize,
        scratch: CMatrix,
    },
}

impl Stepper {
    pub(crate) fn new(spec: &CocycleSpec) -> Result<Self> {
        let dim = spec.dim();
        let kind = match &spec.family {
            Family::Schrodinger { v, energy } => StepperKind::Schrodinger {
                scaled: v.scaled_coeffs(spec.eps),
                energy: *energy,
            },
            Family::Constant { matrix } => StepperKind::Constant {
                inverse: matrix.clone().try_inverse(),
                matrix: matrix.clone(),
            },
            Family::DualFiniteRange { v, w, energy } => {
                let d = v.degree();
                let lead = v.coeff(d as i64);
                let inv_lead = C64::new(1.0, 0.0) / lead;
                let mut template = CMatrix::zeros(2 * d, 2 * d);
                // First row: (-v̂_{d-1}, …, -v̂_1, E − w(θ) − v̂_0, -v̂_{-1}, …, -v̂_{-d}) / v̂_d
                for (col, k) in (1..d).rev().enumerate() {
                    template[(0, col)] = -v.coeff(k as i64) * inv_lead;
                }
                for k in 1..=d {
                    template[(0, d - 1 + k)] = -v.coeff(-(k as i64)) * inv_lead;
                }
                // Shifted identity below.
                for i in 1..2 * d {
                    template[(i, i - 1)] = C64::new(1.0, 0.0);
                }
                StepperKind::Dual {
                    template,
                    wscaled: w.scaled_coeffs(spec.eps),
                    inv_lead,
                    shift: (*energy - v.coeff(0)) * inv_lead,
                    d,
                }
            }
            Family::DualBlock { v, w, energy } => {
                let d = v.degree();
                let c = hopping_upper_triangular(v);
                let cinv = c.clone().try_inverse().ok_or_else(|| {
                    QpError::Conditioning("hopping matrix C is singular".into())
                })?;
                let mut template = CMatrix::zeros(2 * d, 2 * d);
                let minus_cinv_cstar = -(&cinv * c.adjoint());
                template.view_mut((0, d), (d, d)).copy_from(&minus_cinv_cstar);
                for i in 0..d {
                    template[(d + i, i)] = C64::new(1.0, 0.0);
                }
                StepperKind::Block {
                    template,
                    cinv,
                    wscaled: w.scaled_coeffs(spec.eps),
                    v: v.clone(),
                    energy: *energy,
                    alpha: spec.alpha.value(),
                    d,
                    scratch: CMatrix::zeros(d, d),
                }
            }
        };
        Ok(Self { kind, dim })
    }

    pub(crate) fn write(&mut self, x: f64, out: &mut CMatrix) {
        match &mut self.kind {
            StepperKind::Schrodinger { scaled, energy } => {
                let v = eval_scaled(scaled, x);
                out[(0, 0)] = *energy - v;
                out[(0, 1)] = C64::new(-1.0, 0.0);
                out[(1, 0)] = C64::new(1.0, 0.0);
                out[(1, 1)] = C64::new(0.0, 0.0);
            }
            StepperKind::Constant { matrix, .. } => out.copy_from(matrix),
            StepperKind::Dual {
                template,
                wscaled,
                inv_lead,
                shift,
                d,
            } => {
                let w = eval_scaled(wscaled, x);
                out.copy_from(template);
                out[(0, *d - 1)] = *shift - w * *inv_lead;
            }
            StepperKind::Block {
                template,
                cinv,
                wscaled,
                v,
                energy,
                alpha,
                d,
                scratch,
            } => {
                let d = *d;
                out.copy_from(template);
                // scratch ← E·I − B(θ), with B_{ii} = w(θ + (d−1−i)α) and
                // B_{ij} = v̂_{i−j} off the diagonal.
                for i in 0..d {
                    for j in 0..d {
                        scratch[(i, j)] = if i == j {
                            *energy - eval_scaled(wscaled, frac(x + (d - 1 - i) as f64 * *alpha))
                        } else {
                            -v.coeff(i as i64 - j as i64)
                        };
                    }
                }
                let one = C64::new(1.0, 0.0);
                let zero = C64::new(0.0, 0.0);
                out.view_mut((0, 0), (d, d)).gemm(one, cinv, scratch, zero);
            }
        }
    }

    /// Step-matrix inverse; closed form for the Schrödinger block, LU
    /// elsewhere.
    pub(crate) fn write_inverse(&mut self, x: f64, out: &mut CMatrix) -> Result<()> {
        match &mut self.kind {
            StepperKind::Schrodinger { scaled, energy } => {
                let v = eval_scaled(scaled, x);
                out[(0, 0)] = C64::new(0.0, 0.0);
                out[(0, 1)] = C64::new(1.0, 0.0);
                out[(1, 0)] = C64::new(-1.0, 0.0);
                out[(1, 1)] = *energy - v;
                Ok(())
            }
            StepperKind::Constant { inverse, .. } => {
                let inv = inverse
                    .as_ref()
                    .ok_or_else(|| QpError::Conditioning("constant matrix is singular".into()))?;
                out.copy_from(inv);
                Ok(())
            }
            _ => {
                let mut fwd = CMatrix::zeros(self.dim, self.dim);
                self.write(x, &mut fwd);
                let inv = fwd
                    .try_inverse()
                    .ok_or_else(|| QpError::Conditioning("singular step matrix".into()))?;
                out.copy_from(&inv);
                Ok(())
            }
        }
    }
}

/// Upper-triangular Toeplitz hopping matrix built from `v̂_d … v̂_1`.
pub(crate) fn hopping_upper_triangular(v: &TrigPolynomial) -> CMatrix {
    let d = v.degree();
    CMatrix::from_fn(d, d, |i, j| {
        if j >= i {
            v.coeff((d - (j - i)) as i64)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

// ═══════════════════════════════════════════════════════════════════
//  Operations
// ═══════════════════════════════════════════════════════════════════

/// One Schrödinger transfer step `[[E − v(x+iε), −1], [1, 0]]`.
pub fn schrodinger_step(v: &TrigPolynomial, energy: C64, x: f64, eps: f64) -> Result<CMatrix> {
    if eps.abs() >= v.strip() {
        return Err(QpError::Domain(format!(
            "|eps| = {} not inside the strip of width {}",
            eps.abs(),
            v.strip()
        )));
    }
    let mut out = CMatrix::zeros(2, 2);
    let val = v.eval(x, eps);
    out[(0, 0)] = energy - val;
    out[(0, 1)] = C64::new(-1.0, 0.0);
    out[(1, 0)] = C64::new(1.0, 0.0);
    Ok(out)
}

/// Ordered cocycle product `A_n(x₀)`; `n = 0` gives the identity and
/// negative `n` the inverse iterates.
pub fn iterate(spec: &CocycleSpec, x0: f64, n: i64) -> Result<CMatrix> {
    let mut stepper = Stepper::new(spec)?;
    let m = spec.dim();
    let rot = spec.rotation();
    let mut acc = CMatrix::identity(m, m);
    let mut buf = CMatrix::zeros(m, m);
    if n >= 0 {
        for t in 0..n {
            let x = frac(x0 + t as f64 * rot);
            stepper.write(x, &mut buf);
            acc = &buf * &acc;
        }
    } else {
        for j in 1..=(-n) {
            let x = frac(x0 - j as f64 * rot);
            stepper.write_inverse(x, &mut buf)?;
            acc = &buf * &acc;
        }
    }
    Ok(acc)
}

/// Finite-volume Lyapunov estimates.
#[derive(Debug, Clone)]
pub struct LyapunovEstimate {
    /// Top-k exponents, descending, in nats per step.
    pub exponents: Vec<f64>,
    /// Standard error across phases for each reported exponent.
    pub stderr: Vec<f64>,
    pub n_steps: usize,
    pub phase_samples: usize,
    /// False when `n` is below the trustworthy floor.
    pub reliable: bool,
}

/// Deterministic phase lattice `x_j = x₀(seed) + j/P`.
pub fn phase_lattice(p: usize, seed: u64) -> Vec<f64> {
    let x0 = seed_unit(seed);
    (0..p).map(|j| frac(x0 + j as f64 / p as f64)).collect()
}

/// Top-`k` finite-volume Lyapunov exponents of the cocycle, averaged over
/// the given phases, through a per-step re-orthonormalized product.
pub fn lyapunov_spectrum(
    spec: &CocycleSpec,
    n: usize,
    phases: &[f64],
    k: usize,
) -> Result<LyapunovEstimate> {
    let m = spec.dim();
    if k == 0 || k > m {
        return Err(QpError::Domain(format!("k = {k} outside 1..={m}")));
    }
    if phases.is_empty() {
        return Err(QpError::Domain("need at least one phase".into()));
    }
    if n == 0 {
        return Err(QpError::Domain("n must be positive".into()));
    }
    let per_phase: Vec<Result<Vec<f64>>> = par_map_idx(phases.len(), |j| {
        let mut stepper = Stepper::new(spec)?;
        let mut chain = QrChain::new(m);
        let mut buf = CMatrix::zeros(m, m);
        let rot = spec.rotation();
        let x0 = phases[j];
        for t in 0..n {
            let x = frac(x0 + t as f64 * rot);
            stepper.write(x, &mut buf);
            chain.step(&buf);
        }
        Ok(chain.exponents())
    });
    let mut rows = Vec::with_capacity(phases.len());
    for r in per_phase {
        rows.push(r?);
    }
    let p = rows.len();
    let mut mean = vec![0.0; m];
    for row in &rows {
        for (i, &v) in row.iter().enumerate() {
            mean[i] += v;
        }
    }
    for v in &mut mean {
        *v /= p as f64;
    }
    let mut stderr = vec![0.0; m];
    if p > 1 {
        for row in &rows {
            for (i, &v) in row.iter().enumerate() {
                stderr[i] += (v - mean[i]) * (v - mean[i]);
            }
        }
        for s in &mut stderr {
            *s = (*s / (p - 1) as f64).sqrt() / (p as f64).sqrt();
        }
    }
    Ok(LyapunovEstimate {
        exponents: mean[..k].to_vec(),
        stderr: stderr[..k].to_vec(),
        n_steps: n,
        phase_samples: p,
        reliable: n >= 100,
    })
}

/// Per-orbit `ln σ_k` snapshots at the requested step counts (ascending).
pub fn orbit_log_sigmas(
    spec: &CocycleSpec,
    x0: f64,
    checkpoints: &[usize],
) -> Result<Vec<Vec<f64>>> {
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(QpError::Domain("checkpoints must be strictly increasing".into()));
    }
    let m = spec.dim();
    let mut stepper = Stepper::new(spec)?;
    let mut chain = QrChain::new(m);
    let mut buf = CMatrix::zeros(m, m);
    let rot = spec.rotation();
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut t = 0usize;
    for &cp in checkpoints {
        while t < cp {
            let x = frac(x0 + t as f64 * rot);
            stepper.write(x, &mut buf);
            chain.step(&buf);
            t += 1;
        }
        out.push(chain.log_sigmas());
    }
    Ok(out)
}

/// `‖MᴴSM − S‖` in operator norm; a probe, not an assertion.
pub fn symplectic_defect(m: &CMatrix, s: &CMatrix) -> Result<f64> {
    if m.nrows() != m.ncols() || s.nrows() != s.ncols() || m.nrows() != s.nrows() {
        return Err(QpError::Shape(format!(
            "incompatible dimensions {}×{} vs {}×{}",
            m.nrows(),
            m.ncols(),
            s.nrows(),
            s.ncols()
        )));
    }
    let defect = m.adjoint() * s * m - s;
    Ok(opnorm_small(&defect))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn golden() -> Frequency {
        Frequency::golden()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn free_step_is_quarter_rotation() {
        let v = TrigPolynomial::zero();
        let s = schrodinger_step(&v, c(0.0, 0.0), 0.3, 0.0).unwrap();
        assert_abs_diff_eq!(s[(0, 0)].re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s[(0, 1)].re, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s[(1, 0)].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s[(1, 1)].re, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn cosine_step_at_origin() {
        let v = TrigPolynomial::cosine(1.0);
        let s = schrodinger_step(&v, c(1.0, 0.0), 0.0, 0.0).unwrap();
        // v(0) = 2, so the corner entry is 1 − 2 = −1.
        assert_abs_diff_eq!(s[(0, 0)].re, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s[(0, 0)].im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn complexified_cosine_gives_cosh() {
        let v = TrigPolynomial::cosine(1.0);
        let s = schrodinger_step(&v, c(0.0, 0.0), 0.0, 0.1).unwrap();
        let expected = -2.0 * (0.2 * std::f64::consts::PI).cosh();
        assert_abs_diff_eq!(s[(0, 0)].re, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(s[(0, 0)].im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn eps_outside_strip_rejected() {
        let v = TrigPolynomial::cosine(1.0); // strip 1
        assert!(matches!(
            schrodinger_step(&v, c(0.0, 0.0), 0.0, 1.5),
            Err(QpError::Domain(_))
        ));
    }

    #[test]
    fn step_determinant_is_one() {
        let v = TrigPolynomial::cosine(0.7);
        for i in 0..200 {
            let x = i as f64 / 200.0;
            let eps = 0.3 * ((i * 7919 % 200) as f64 / 200.0 - 0.5);
            let s = schrodinger_step(&v, c(0.4, 0.0), x, eps).unwrap();
            let det = s[(0, 0)] * s[(1, 1)] - s[(0, 1)] * s[(1, 0)];
            assert!((det - c(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn free_fourth_power_is_identity() {
        let v = TrigPolynomial::zero();
        let spec = CocycleSpec::schrodinger(v, c(0.0, 0.0), golden(), 0.0).unwrap();
        let m = iterate(&spec, 0.123, 4).unwrap();
        let id = CMatrix::identity(2, 2);
        assert!((m - id).norm() < 1e-14);
    }

    #[test]
    fn zero_steps_is_identity() {
        let v = TrigPolynomial::cosine(2.0);
        let spec = CocycleSpec::schrodinger(v, c(0.5, 0.0), golden(), 0.0).unwrap();
        let m = iterate(&spec, 0.4, 0).unwrap();
        assert!((m - CMatrix::identity(2, 2)).norm() == 0.0);
    }

    #[test]
    fn constant_cocycle_powers() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = c(2.0, 0.0);
        m[(1, 1)] = c(0.5, 0.0);
        let spec = CocycleSpec::constant(m, golden()).unwrap();
        let p = iterate(&spec, 0.0, 10).unwrap();
        assert_abs_diff_eq!(p[(0, 0)].re, 1024.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p[(1, 1)].re, 2.0f64.powi(-10), epsilon = 1e-12);
    }

    #[test]
    fn inverse_iterates_cancel_forward() {
        let v = TrigPolynomial::cosine(0.8);
        let spec = CocycleSpec::schrodinger(v, c(0.3, 0.0), golden(), 0.0).unwrap();
        let k = 7i64;
        let x0 = 0.37;
        let back = iterate(&spec, x0, -k).unwrap();
        let shifted = frac(x0 - k as f64 * spec.rotation());
        let fwd = iterate(&spec, shifted, k).unwrap();
        let prod = back * fwd;
        assert!((prod - CMatrix::identity(2, 2)).norm() < 1e-11);
    }

    #[test]
    fn cocycle_composition_law() {
        let v = TrigPolynomial::cosine(0.5);
        let spec = CocycleSpec::schrodinger(v, c(0.2, 0.0), golden(), 0.0).unwrap();
        let (a, b) = (23i64, 31i64);
        let x0 = 0.111;
        let whole = iterate(&spec, x0, a + b).unwrap();
        let first = iterate(&spec, x0, b).unwrap();
        let second = iterate(&spec, frac(x0 + b as f64 * spec.rotation()), a).unwrap();
        let composed = second * first;
        let rel = (&whole - &composed).norm() / whole.norm();
        assert!(rel < 1e-10, "relative error {rel:.3e}");
    }

    #[test]
    fn constant_cocycle_exponent_is_log_spectral_radius() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = c(3.0, 0.0);
        m[(0, 1)] = c(-1.0, 0.0);
        m[(1, 0)] = c(1.0, 0.0);
        let spec = CocycleSpec::constant(m, golden()).unwrap();
        // The alignment transient enters as O(1)/n, so a long product is
        // needed for the 1e-6 target (each step is a 2×2 multiply).
        let est = lyapunov_spectrum(&spec, 4_000_000, &[0.0], 1).unwrap();
        let expected = ((3.0 + 5.0f64.sqrt()) / 2.0).ln();
        assert_abs_diff_eq!(est.exponents[0], expected, epsilon = 1e-6);
    }

    #[test]
    fn free_cocycle_exponent_vanishes_inside_band() {
        let v = TrigPolynomial::zero();
        let spec = CocycleSpec::schrodinger(v, c(1.0, 0.0), golden(), 0.0).unwrap();
        let est = lyapunov_spectrum(&spec, 10_000, &phase_lattice(4, 1), 1).unwrap();
        assert!(est.exponents[0].abs() < 2e-3);
    }

    #[test]
    fn determinant_one_exponents_sum_to_zero() {
        let v = TrigPolynomial::cosine(2.0);
        let spec = CocycleSpec::schrodinger(v, c(0.7, 0.0), golden(), 0.0).unwrap();
        let est = lyapunov_spectrum(&spec, 2000, &phase_lattice(8, 3), 2).unwrap();
        let total = est.exponents[0] + est.exponents[1];
        let noise = 3.0 * (est.stderr[0] + est.stderr[1]) + 1e-10;
        assert!(total.abs() <= noise, "sum {total:.3e} exceeds {noise:.3e}");
    }

    #[test]
    fn profile_even_in_eps() {
        let v = TrigPolynomial::cosine(0.5);
        let phases = phase_lattice(8, 5);
        let plus = lyapunov_spectrum(
            &CocycleSpec::schrodinger(v.clone(), c(0.3, 0.0), golden(), 0.25).unwrap(),
            4000,
            &phases,
            1,
        )
        .unwrap();
        let minus = lyapunov_spectrum(
            &CocycleSpec::schrodinger(v, c(0.3, 0.0), golden(), -0.25).unwrap(),
            4000,
            &phases,
            1,
        )
        .unwrap();
        let diff = (plus.exponents[0] - minus.exponents[0]).abs();
        let noise = 3.0 * (plus.stderr[0] + minus.stderr[0]) + 5e-4;
        assert!(diff <= noise, "evenness violated: {diff:.3e} > {noise:.3e}");
    }

    #[test]
    fn small_n_flags_unreliable() {
        let v = TrigPolynomial::cosine(1.0);
        let spec = CocycleSpec::schrodinger(v, c(0.0, 0.0), golden(), 0.0).unwrap();
        let est = lyapunov_spectrum(&spec, 50, &[0.1], 1).unwrap();
        assert!(!est.reliable);
    }

    #[test]
    fn symplectic_defect_identity_is_zero() {
        let s = CMatrix::from_fn(4, 4, |i, j| {
            if i == j + 2 {
                c(1.0, 0.0)
            } else if j == i + 2 {
                c(-1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let id = CMatrix::identity(4, 4);
        assert_abs_diff_eq!(symplectic_defect(&id, &s).unwrap(), 0.0, epsilon = 1e-15);
    }
}
