//! Aubry-dual objects: the dual finite-range cocycle and its block form, the
//! symplectic form they preserve, dual Lyapunov spectra with the simplicity
//! test, dominated-splitting detection, the spectrum cross-check under
//! duality, and the symplectic-orthogonality conservation law.

use crate::arithmetic::Frequency;
use crate::cocycles::{
    hopping_upper_triangular, lyapunov_spectrum, orbit_log_sigmas, symplectic_defect, CocycleSpec,
    Family, Stepper, TrigPolynomial,
};
use crate::linalg::BandedHermitian;
use crate::numeric::{frac, hausdorff_sorted, ScaledComplex};
use crate::parallel::par_map_idx;
use crate::{C64, CMatrix, CVector, QpError, Result};

/// Default simplicity floor in nats per step; gaps below it are undecided.
pub const SIMPLICITY_FLOOR: f64 = 0.01;

// ═══════════════════════════════════════════════════════════════════
//  Symplectic form
// ═══════════════════════════════════════════════════════════════════

/// The complex symplectic form `S = [[0, −C*], [C, 0]]` with `C` the
/// upper-triangular Toeplitz matrix of hopping coefficients `v̂_d … v̂_1`.
#[derive(Debug, Clone)]
pub struct SymplecticForm {
    d: usize,
    c: CMatrix,
    s: CMatrix,
}

impl SymplecticForm {
    pub fn from_potential(v: &TrigPolynomial) -> Result<Self> {
        let d = v.degree();
        if d == 0 || v.is_constant() {
            return Err(QpError::Domain(
                "symplectic form needs a non-constant hopping polynomial".into(),
            ));
        }
        let c = hopping_upper_triangular(v);
        let mut s = CMatrix::zeros(2 * d, 2 * d);
        let cstar = c.adjoint();
        s.view_mut((0, d), (d, d)).copy_from(&(-&cstar));
        s.view_mut((d, 0), (d, d)).copy_from(&c);
        Ok(Self { d, c, s })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn hopping(&self) -> &CMatrix {
        &self.c
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.s
    }

    /// `‖MᴴSM − S‖`.
    pub fn defect(&self, m: &CMatrix) -> Result<f64> {
        symplectic_defect(m, &self.s)
    }
}

// ═══════════════════════════════════════════════════════════════════
//  Step matrices
// ═══════════════════════════════════════════════════════════════════

/// One step of the dual finite-range cocycle at phase `theta + iε`.
pub fn dual_step(
    v: &TrigPolynomial,
    w: &TrigPolynomial,
    energy: C64,
    theta: f64,
    eps: f64,
) -> Result<CMatrix> {
    let spec = CocycleSpec::dual(
        v.clone(),
        w.clone(),
        energy,
        Frequency::golden(), // rotation is irrelevant for a single step
        eps,
    )?;
    let mut stepper = Stepper::new(&spec)?;
    let mut out = CMatrix::zeros(spec.dim(), spec.dim());
    stepper.write(theta, &mut out);
    Ok(out)
}

/// One step of the block cocycle; equals the ordered product of `d`
/// consecutive dual steps starting at `theta`.
pub fn dual_block_step(
    v: &TrigPolynomial,
    w: &TrigPolynomial,
    energy: C64,
    alpha: &Frequency,
    theta: f64,
    eps: f64,
) -> Result<CMatrix> {
    let spec = CocycleSpec::dual_block(v.clone(), w.clone(), energy, alpha.clone(), eps)?;
    let mut stepper = Stepper::new(&spec)?;
    let mut out = CMatrix::zeros(spec.dim(), spec.dim());
    stepper.write(theta, &mut out);
    Ok(out)
}

// ═══════════════════════════════════════════════════════════════════
//  Dual Lyapunov spectrum
// ═══════════════════════════════════════════════════════════════════

/// Nonnegative half of the dual Lyapunov spectrum at one energy.
#[derive(Debug, Clone)]
pub struct DualSpectrumRecord {
    pub energy: f64,
    /// `γ_1 ≤ … ≤ γ_d`, folded from the symmetric `2d` spectrum.
    pub gammas: Vec<f64>,
    pub stderr: Vec<f64>,
    /// `γ_2 − γ_1` when `d ≥ 2`.
    pub gap12: Option<f64>,
    /// `Some(true)` when the bottom gap clears both the simplicity floor and
    /// the noise; `Some(false)` when it resolves below the floor; `None`
    /// when undecided.
    pub simple: Option<bool>,
    /// Worst pairing-symmetry violation `max |λ_j + λ_{2d+1−j}|`.
    pub pairing_defect: f64,
    pub reliable: bool,
}

/// Runs the dual cocycle with `w = 2cos` and folds the `2d` exponents into
/// the nonnegative half by pairing symmetrization.
pub fn dual_lyapunov(
    v: &TrigPolynomial,
    alpha: &Frequency,
    energy: f64,
    n: usize,
    phases: &[f64],
    floor: f64,
) -> Result<DualSpectrumRecord> {
    let d = v.degree();
    let spec = CocycleSpec::dual(
        v.clone(),
        TrigPolynomial::cosine(1.0),
        C64::new(energy, 0.0),
        alpha.clone(),
        0.0,
    )?;
    let est = lyapunov_spectrum(&spec, n, phases, 2 * d)?;
    let lam = &est.exponents;
    let se = &est.stderr;
    let reliable = est.n_steps >= 1000;
    let mut pairing_defect = 0.0f64;
    for j in 0..d {
        let viol = (lam[j] + lam[2 * d - 1 - j]).abs();
        pairing_defect = pairing_defect.max(viol);
        // Phase scatter plus an O(1/n) alignment-transient allowance: the
        // finite-volume pairing bias of a hyperbolic product decays like the
        // condition number of the Oseledets alignment over n.
        let allowance = 5.0 * (se[j] + se[2 * d - 1 - j]) + 4.0 / n as f64 + 1e-6;
        // Below the volume floor the record is only flagged, not rejected;
        // pairing symmetry is an asymptotic statement.
        if reliable && viol > allowance {
            return Err(QpError::NumericalQuality(format!(
                "pairing symmetry violated at E = {energy}: |λ_{}+λ_{}| = {viol:.3e} > {allowance:.3e}",
                j + 1,
                2 * d - j
            )));
        }
    }
    let mut gammas = Vec::with_capacity(d);
    let mut gse = Vec::with_capacity(d);
    for i in 1..=d {
        gammas.push(0.5 * (lam[d - i] - lam[d - 1 + i]));
        gse.push(0.5 * (se[d - i] + se[d - 1 + i]));
    }
    let gap12 = if d >= 2 { Some(gammas[1] - gammas[0]) } else { None };
    let simple = if d == 1 {
        Some(true)
    } else {
        let gap = gap12.unwrap();
        let noise = 6.0 * (gse[0] + gse[1]);
        if gap > floor.max(noise) {
            Some(true)
        } else if gap <= floor && noise <= floor {
            Some(false)
        } else {
            None
        }
    };
    Ok(DualSpectrumRecord {
        energy,
        gammas,
        stderr: gse,
        gap12,
        simple,
        pairing_defect,
        reliable,
    })
}

// ═══════════════════════════════════════════════════════════════════
//  Dominated splitting
// ═══════════════════════════════════════════════════════════════════

/// Verdict of the singular-value-gap domination probe.
#[derive(Debug, Clone)]
pub struct DominationVerdict {
    /// `Some(true)` when the per-step gap rate stabilizes positive with the
    /// raw gap growing; `Some(false)` when the ratio stays bounded; `None`
    /// when the trend is flat within noise.
    pub dominated: Option<bool>,
    /// Fitted per-step rate `ln(σ_k/σ_{k+1})/n` at the largest n.
    pub growth_rate: f64,
    /// Min over phases of the gap rate at each checkpoint.
    pub per_n: Vec<(usize, f64)>,
}

/// Checks `k`-domination by tracking `min_phases ln(σ_k/σ_{k+1})/n` over a
/// ladder of volumes.
pub fn domination_check(
    spec: &CocycleSpec,
    k: usize,
    n_list: &[usize],
    phases: &[f64],
) -> Result<DominationVerdict> {
    let m = spec.dim();
    if k == 0 || k >= m {
        return Err(QpError::Domain(format!("k = {k} outside 1..={}", m - 1)));
    }
    if n_list.is_empty() || phases.is_empty() {
        return Err(QpError::Domain("need checkpoints and phases".into()));
    }
    let per_phase: Vec<Result<Vec<f64>>> = par_map_idx(phases.len(), |j| {
        let logs = orbit_log_sigmas(spec, phases[j], n_list)?;
        Ok(logs.iter().map(|row| row[k - 1] - row[k]).collect())
    });
    let mut gaps = Vec::with_capacity(phases.len());
    for r in per_phase {
        gaps.push(r?);
    }
    let mut per_n = Vec::with_capacity(n_list.len());
    for (i, &n) in n_list.iter().enumerate() {
        let min_gap = gaps
            .iter()
            .map(|g| g[i])
            .fold(f64::INFINITY, f64::min);
        per_n.push((n, min_gap / n as f64));
    }
    let first_raw = per_n.first().map(|&(n, r)| r * n as f64).unwrap();
    let last_raw = per_n.last().map(|&(n, r)| r * n as f64).unwrap();
    let rate = per_n.last().unwrap().1;
    let grew = last_raw - first_raw >= std::f64::consts::LN_2;
    let dominated = if rate >= 0.01 && grew {
        Some(true)
    } else if rate < 0.004 || !grew {
        Some(false)
    } else {
        None
    };
    Ok(DominationVerdict {
        dominated,
        growth_rate: rate,
        per_n,
    })
}

// ═══════════════════════════════════════════════════════════════════
//  Spectrum cross-check under duality
// ═══════════════════════════════════════════════════════════════════

#[derive(Debug, Clone)]
pub struct DualityCrosscheck {
    /// Two-sided Hausdorff distance between the trimmed truncation clouds.
    pub distance: f64,
    pub reliable: bool,
}

/// Compares the spectrum of `N×N` truncations of the Schrödinger operator
/// with potential `v` against truncations of its dual finite-range operator
/// (hopping `v̂`, diagonal `2cos`), over a shared phase lattice.
///
/// Each cloud is trimmed by `2d` index extremes per phase and then filtered
/// by phase persistence: the spectrum does not depend on the phase, so a
/// truncation eigenvalue with no counterpart in every other phase cloud is a
/// Dirichlet surface state sweeping a gap, not spectrum. Without this filter
/// the wide-gap surface branches dominate the Hausdorff distance.
pub fn duality_spectrum_crosscheck(
    v: &TrigPolynomial,
    alpha: &Frequency,
    size: usize,
    phases: &[f64],
) -> Result<DualityCrosscheck> {
    if size < 8 {
        return Err(QpError::Domain("truncation size too small".into()));
    }
    let d = v.degree().max(1);
    let trim = 2 * d;
    let h_points = persistence_filter(&schrodinger_truncation_cloud(
        v, alpha, size, phases, trim,
    )?);
    let l_points = persistence_filter(&dual_truncation_cloud(v, alpha, size, phases, trim)?);
    Ok(DualityCrosscheck {
        distance: hausdorff_sorted(&h_points, &l_points),
        reliable: size >= 100,
    })
}

pub(crate) fn schrodinger_truncation_cloud(
    v: &TrigPolynomial,
    alpha: &Frequency,
    size: usize,
    phases: &[f64],
    trim: usize,
) -> Result<Vec<Vec<f64>>> {
    let rows: Vec<Vec<f64>> = par_map_idx(phases.len(), |j| {
        let x0 = phases[j];
        let diag: Vec<f64> = (0..size)
            .map(|n| v.eval(frac(x0 + n as f64 * alpha.value()), 0.0).re)
            .collect();
        let off = vec![1.0; size - 1];
        let mut eig = crate::linalg::tridiag_eigenvalues(&diag, &off);
        trim_edges(&mut eig, trim);
        eig
    });
    Ok(rows)
}

pub(crate) fn dual_truncation_cloud(
    v: &TrigPolynomial,
    alpha: &Frequency,
    size: usize,
    phases: &[f64],
    trim: usize,
) -> Result<Vec<Vec<f64>>> {
    let d = v.degree();
    if d == 0 {
        return Err(QpError::Domain("dual truncation needs degree ≥ 1".into()));
    }
    let rows: Vec<Vec<f64>> = par_map_idx(phases.len(), |j| {
        let theta0 = phases[j];
        let mut banded = BandedHermitian::new(size, d);
        for i in 0..size {
            let diag = 2.0 * (std::f64::consts::TAU * frac(theta0 + i as f64 * alpha.value())).cos()
                + v.coeff(0).re;
            banded.bands[0][i] = C64::new(diag, 0.0);
        }
        for k in 1..=d {
            for i in 0..size - k {
                banded.bands[k][i] = v.coeff(-(k as i64));
            }
        }
        let mut eig = banded.eigenvalues();
        trim_edges(&mut eig, trim);
        eig
    });
    Ok(rows)
}

fn trim_edges(sorted: &mut Vec<f64>, trim: usize) {
    if sorted.len() > 2 * trim {
        sorted.drain(..trim);
        sorted.truncate(sorted.len() - trim);
    }
}

/// Keeps the points that have a counterpart within a spacing-scaled
/// tolerance in every other phase cloud; returns the merged survivors.
fn persistence_filter(per_phase: &[Vec<f64>]) -> Vec<f64> {
    let p = per_phase.len();
    let mut merged: Vec<f64> = per_phase.iter().flatten().copied().collect();
    merged.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if p <= 1 || merged.len() < 8 {
        return merged;
    }
    let mut spacings: Vec<f64> = merged.windows(2).map(|w| w[1] - w[0]).collect();
    spacings.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = spacings[spacings.len() / 2];
    let tol = (10.0 * p as f64 * median).max(1e-3);
    let near = |cloud: &[f64], x: f64| -> bool {
        let idx = cloud.partition_point(|&y| y < x);
        let mut best = f64::INFINITY;
        if idx < cloud.len() {
            best = best.min((cloud[idx] - x).abs());
        }
        if idx > 0 {
            best = best.min((cloud[idx - 1] - x).abs());
        }
        best <= tol
    };
    let mut out = Vec::with_capacity(merged.len());
    for (i, cloud) in per_phase.iter().enumerate() {
        for &x in cloud {
            let persistent = per_phase
                .iter()
                .enumerate()
                .all(|(j, other)| j == i || near(other, x));
            if persistent {
                out.push(x);
            }
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

// ═══════════════════════════════════════════════════════════════════
//  Symplectic pairing conservation
// ═══════════════════════════════════════════════════════════════════

/// Iterates two vectors by a dual (block) cocycle with per-step
/// renormalization and returns the pairing sequence `⟨u_j, S v_j⟩`, scaled
/// by the product of the two normalization factors. Exact conservation of
/// `MᴴSM = S` makes the sequence constant at real energies.
pub fn symplectic_pairing(
    spec: &CocycleSpec,
    u0: &CVector,
    v0: &CVector,
    x0: f64,
    n: usize,
) -> Result<Vec<ScaledComplex>> {
    let hopping = match spec.family() {
        Family::DualFiniteRange { v, .. } | Family::DualBlock { v, .. } => v,
        _ => {
            return Err(QpError::Domain(
                "symplectic pairing needs a dual cocycle".into(),
            ))
        }
    };
    let form = SymplecticForm::from_potential(hopping)?;
    let m = spec.dim();
    if u0.len() != m || v0.len() != m {
        return Err(QpError::Shape(format!(
            "vectors must have length {m}, got {} and {}",
            u0.len(),
            v0.len()
        )));
    }
    let s = form.matrix();
    let mut stepper = Stepper::new(spec)?;
    let mut buf = CMatrix::zeros(m, m);
    let rot = spec.rotation();
    let mut u = u0.clone();
    let mut vv = v0.clone();
    let mut log_scale = 0.0f64;
    let mut out = Vec::with_capacity(n + 1);
    let pairing = |a: &CVector, b: &CVector| -> C64 { a.dotc(&(s * b)) };
    out.push(ScaledComplex::new(pairing(&u, &vv), 0.0));
    for t in 0..n {
        let x = frac(x0 + t as f64 * rot);
        stepper.write(x, &mut buf);
        u = &buf * &u;
        vv = &buf * &vv;
        let su = u.norm();
        let sv = vv.norm();
        if su == 0.0 || sv == 0.0 {
            return Err(QpError::NumericalQuality(
                "pairing orbit collapsed to zero".into(),
            ));
        }
        u.unscale_mut(su);
        vv.unscale_mut(sv);
        log_scale += su.ln() + sv.ln();
        out.push(ScaledComplex::new(pairing(&u, &vv), log_scale));
    }
    Ok(out)
}
