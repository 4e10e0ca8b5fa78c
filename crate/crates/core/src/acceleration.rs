//! The convex piecewise-affine profile `ε ↦ L_ε`: sampling, fitting with
//! integer-quantized slopes, extraction of the acceleration `ω`, the
//! T-acceleration `ω̄` and the first turning point `ε₁`, and type-I
//! classification of energy sets.

use crate::arithmetic::Frequency;
use crate::cocycles::{lyapunov_spectrum, phase_lattice, CocycleSpec, TrigPolynomial};
use crate::parallel::par_map_idx;
use crate::{C64, QpError, Result};

use std::f64::consts::TAU;

/// Sampling knobs for profile work.
#[derive(Debug, Clone)]
pub struct ProfileConfig {
    pub n: usize,
    pub phases: usize,
    pub slope_tol: f64,
    /// Largest admissible integer slope (in units of 2π).
    pub max_slope: usize,
    pub seed: u64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            n: 4000,
            phases: 16,
            slope_tol: 0.1,
            max_slope: 3,
            seed: 0,
        }
    }
}

/// Default ε grid: 24 points, geometric near zero to localize the first
/// turning point, then uniform out to `0.6·h`.
pub fn default_eps_grid(strip: f64) -> Vec<f64> {
    let reach = 0.6 * strip.min(1.0);
    let mut grid = vec![0.0];
    let geo_top = 0.15 * reach;
    let mut g = 0.01 * reach;
    while g < geo_top && grid.len() < 9 {
        grid.push(g);
        g *= 1.55;
    }
    let uniform_from = *grid.last().unwrap();
    let remaining = 24 - grid.len();
    for i in 1..=remaining {
        grid.push(uniform_from + (reach - uniform_from) * i as f64 / remaining as f64);
    }
    grid
}

/// Sampled (and optionally fitted) profile of `ε ↦ L_ε` at one energy.
#[derive(Debug, Clone)]
pub struct EpsilonProfile {
    pub energy: f64,
    pub eps: Vec<f64>,
    pub l: Vec<f64>,
    pub stderr: Vec<f64>,
    pub fit: Option<ProfileFit>,
}

/// Result of the quantized convex piecewise-affine fit.
#[derive(Debug, Clone)]
pub struct ProfileFit {
    /// Interior turning points, one fewer than the pieces.
    pub breakpoints: Vec<f64>,
    /// Unconstrained least-squares slope of each piece.
    pub slopes_raw: Vec<f64>,
    /// Quantized slopes, units of 2π, strictly increasing.
    pub slopes_quantized: Vec<i64>,
    pub omega: i64,
    pub omega_bar: i64,
    pub eps1: Option<f64>,
    /// False when some raw slope strays farther than `slope_tol·2π` from its
    /// quantized value; such fits are rejected for classification.
    pub quantization_ok: bool,
    pub ssr: f64,
}

/// Samples `L_ε` on the grid through the Lyapunov machinery.
pub fn sample_profile(
    v: &TrigPolynomial,
    alpha: &Frequency,
    energy: f64,
    eps_grid: &[f64],
    n: usize,
    phases: usize,
    seed: u64,
) -> Result<EpsilonProfile> {
    if eps_grid.len() < 8 {
        return Err(QpError::Domain("eps grid needs at least 8 points".into()));
    }
    if eps_grid.windows(2).any(|w| w[0] >= w[1]) || eps_grid[0] < 0.0 {
        return Err(QpError::Domain("eps grid must be increasing and start ≥ 0".into()));
    }
    if *eps_grid.last().unwrap() >= v.strip() {
        return Err(QpError::Domain(format!(
            "eps grid exceeds the strip of width {}",
            v.strip()
        )));
    }
    let lattice = phase_lattice(phases, seed);
    let rows: Vec<Result<(f64, f64)>> = par_map_idx(eps_grid.len(), |i| {
        let spec = CocycleSpec::schrodinger(
            v.clone(),
            C64::new(energy, 0.0),
            alpha.clone(),
            eps_grid[i],
        )?;
        let est = lyapunov_spectrum(&spec, n, &lattice, 1)?;
        Ok((est.exponents[0], est.stderr[0]))
    });
    let mut l = Vec::with_capacity(eps_grid.len());
    let mut stderr = Vec::with_capacity(eps_grid.len());
    for r in rows {
        let (li, si) = r?;
        l.push(li);
        stderr.push(si);
    }
    Ok(EpsilonProfile {
        energy,
        eps: eps_grid.to_vec(),
        l,
        stderr,
        fit: None,
    })
}

/// Fits a convex piecewise-affine profile with slopes in `2π·{0,…,max_slope}`
/// by enumerating piece structures and minimizing the squared residual of the
/// max-of-affine model.
pub fn fit_profile(
    profile: &EpsilonProfile,
    slope_tol: f64,
    max_slope: usize,
) -> Result<EpsilonProfile> {
    let eps = &profile.eps;
    let l = &profile.l;
    let se = &profile.stderr;
    let s = eps.len();
    if s < 4 {
        return Err(QpError::InsufficientData("profile too short to fit".into()));
    }
    check_convexity(eps, l, se)?;

    let noise2 = se.iter().map(|x| x * x).sum::<f64>() / s as f64;
    let penalty = 2.0 * noise2 * s as f64 + 1e-12;

    let mut best: Option<(f64, Vec<usize>, Vec<i64>)> = None; // (score, bounds, slopes)
    let max_pieces = 3usize.min(s / 2);
    for pieces in 1..=max_pieces {
        let mut bounds = vec![0usize; pieces + 1];
        bounds[pieces] = s;
        enumerate_splits(s, pieces, &mut bounds, 1, &mut |bounds| {
            for slopes in increasing_slope_tuples(pieces, max_slope) {
                if let Some(cost) = max_affine_ssr(eps, l, bounds, &slopes) {
                    let score = cost + penalty * pieces as f64;
                    if best.as_ref().map_or(true, |(b, _, _)| score < *b) {
                        best = Some((score, bounds.to_vec(), slopes));
                    }
                }
            }
        });
    }
    let (_, bounds, slopes) = best.ok_or_else(|| {
        QpError::DataQuality("no admissible convex piecewise-affine fit".into())
    })?;

    // Final intercepts and diagnostics for the winning structure.
    let pieces = slopes.len();
    let mut intercepts = Vec::with_capacity(pieces);
    for j in 0..pieces {
        let (b0, b1) = (bounds[j], bounds[j + 1]);
        let c = (b0..b1)
            .map(|i| l[i] - TAU * slopes[j] as f64 * eps[i])
            .sum::<f64>()
            / (b1 - b0) as f64;
        intercepts.push(c);
    }
    let ssr = (0..s)
        .map(|i| {
            let f = model_value(eps[i], &intercepts, &slopes);
            (l[i] - f) * (l[i] - f)
        })
        .sum::<f64>();
    let mut breakpoints = Vec::new();
    for j in 0..pieces.saturating_sub(1) {
        let x = (intercepts[j] - intercepts[j + 1])
            / (TAU * (slopes[j + 1] - slopes[j]) as f64);
        breakpoints.push(x);
    }
    let mut slopes_raw = Vec::with_capacity(pieces);
    let mut quantization_ok = true;
    for j in 0..pieces {
        let raw = ls_slope(&eps[bounds[j]..bounds[j + 1]], &l[bounds[j]..bounds[j + 1]]);
        if (raw - TAU * slopes[j] as f64).abs() > slope_tol * TAU {
            quantization_ok = false;
        }
        slopes_raw.push(raw);
    }

    let omega = slopes[0];
    let (omega_bar, eps1) = if omega >= 1 {
        (omega, Some(0.0))
    } else if pieces >= 2 {
        (slopes[1], Some(breakpoints[0]))
    } else {
        // Identically flat profile: no turning point, T-acceleration one by
        // convention.
        (1, None)
    };

    let mut out = profile.clone();
    out.fit = Some(ProfileFit {
        breakpoints,
        slopes_raw,
        slopes_quantized: slopes,
        omega,
        omega_bar,
        eps1,
        quantization_ok,
        ssr,
    });
    Ok(out)
}

fn model_value(x: f64, intercepts: &[f64], slopes: &[i64]) -> f64 {
    intercepts
        .iter()
        .zip(slopes)
        .map(|(c, &k)| c + TAU * k as f64 * x)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// SSR of the max-of-affine model for a fixed structure; `None` when the
/// breakpoints come out unordered (non-realizable convex configuration).
fn max_affine_ssr(eps: &[f64], l: &[f64], bounds: &[usize], slopes: &[i64]) -> Option<f64> {
    let pieces = slopes.len();
    let mut intercepts = Vec::with_capacity(pieces);
    for j in 0..pieces {
        let (b0, b1) = (bounds[j], bounds[j + 1]);
        let c = (b0..b1)
            .map(|i| l[i] - TAU * slopes[j] as f64 * eps[i])
            .sum::<f64>()
            / (b1 - b0) as f64;
        intercepts.push(c);
    }
    let mut prev = f64::NEG_INFINITY;
    for j in 0..pieces.saturating_sub(1) {
        let x = (intercepts[j] - intercepts[j + 1]) / (TAU * (slopes[j + 1] - slopes[j]) as f64);
        if x < prev || x < eps[0] - (eps[eps.len() - 1] - eps[0]) || x > eps[eps.len() - 1] {
            return None;
        }
        prev = x;
    }
    Some(
        (0..eps.len())
            .map(|i| {
                let f = model_value(eps[i], &intercepts, slopes);
                (l[i] - f) * (l[i] - f)
            })
            .sum(),
    )
}

fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..x.len() {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Recursively enumerates split bounds with at least two samples per piece.
fn enumerate_splits(
    s: usize,
    pieces: usize,
    bounds: &mut Vec<usize>,
    level: usize,
    visit: &mut impl FnMut(&[usize]),
) {
    if level == pieces {
        visit(bounds);
        return;
    }
    let lo = bounds[level - 1] + 2;
    let hi = s - 2 * (pieces - level);
    for b in lo..=hi {
        bounds[level] = b;
        enumerate_splits(s, pieces, bounds, level + 1, visit);
    }
}

fn increasing_slope_tuples(pieces: usize, max_slope: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(pieces);
    fn rec(out: &mut Vec<Vec<i64>>, cur: &mut Vec<i64>, pieces: usize, from: i64, max: i64) {
        if cur.len() == pieces {
            out.push(cur.clone());
            return;
        }
        for k in from..=max {
            cur.push(k);
            rec(out, cur, pieces, k + 1, max);
            cur.pop();
        }
    }
    rec(&mut out, &mut cur, pieces, 0, max_slope as i64);
    out
}

fn check_convexity(eps: &[f64], l: &[f64], se: &[f64]) -> Result<()> {
    for i in 1..eps.len() - 1 {
        let dl = eps[i] - eps[i - 1];
        let dr = eps[i + 1] - eps[i];
        let slope_left = (l[i] - l[i - 1]) / dl;
        let slope_right = (l[i + 1] - l[i]) / dr;
        let noise = 3.0
            * ((se[i + 1] * se[i + 1] + se[i] * se[i]) / (dr * dr)
                + (se[i] * se[i] + se[i - 1] * se[i - 1]) / (dl * dl))
                .sqrt()
            + 1e-9;
        if slope_right - slope_left < -noise {
            return Err(QpError::DataQuality(format!(
                "convexity violated at eps = {}: slope drops by {:.3e} (noise allowance {:.3e})",
                eps[i],
                slope_left - slope_right,
                noise
            )));
        }
    }
    Ok(())
}

/// `sample_profile` followed by `fit_profile`.
pub fn accelerations(
    v: &TrigPolynomial,
    alpha: &Frequency,
    energy: f64,
    eps_grid: &[f64],
    cfg: &ProfileConfig,
) -> Result<EpsilonProfile> {
    let profile = sample_profile(v, alpha, energy, eps_grid, cfg.n, cfg.phases, cfg.seed)?;
    fit_profile(&profile, cfg.slope_tol, cfg.max_slope)
}

/// Per-energy type-I record.
#[derive(Debug, Clone)]
pub struct TypeOneRecord {
    pub energy: f64,
    pub omega: Option<i64>,
    pub omega_bar: Option<i64>,
    /// False when the fit's quantization flag tripped; such energies are
    /// "undecided", never silently type I.
    pub decided: bool,
    pub is_type1: Option<bool>,
}

/// Operator-level verdict.
#[derive(Debug, Clone)]
pub struct TypeOneOutcome {
    pub records: Vec<TypeOneRecord>,
    /// True when every decided energy is type I; `None` for an empty sample.
    pub all_type1: Option<bool>,
    pub undecided: usize,
    pub failures: Vec<f64>,
}

/// Classifies a set of energies; `is_type1 ⇔ ω̄ = 1` per decided energy.
pub fn classify_type1(
    v: &TrigPolynomial,
    alpha: &Frequency,
    energies: &[f64],
    eps_grid: &[f64],
    cfg: &ProfileConfig,
) -> Result<TypeOneOutcome> {
    let rows: Vec<TypeOneRecord> = par_map_idx(energies.len(), |i| {
        let energy = energies[i];
        match accelerations(v, alpha, energy, eps_grid, cfg) {
            Ok(p) => {
                let fit = p.fit.expect("accelerations always fits");
                if fit.quantization_ok {
                    TypeOneRecord {
                        energy,
                        omega: Some(fit.omega),
                        omega_bar: Some(fit.omega_bar),
                        decided: true,
                        is_type1: Some(fit.omega_bar == 1),
                    }
                } else {
                    TypeOneRecord {
                        energy,
                        omega: Some(fit.omega),
                        omega_bar: Some(fit.omega_bar),
                        decided: false,
                        is_type1: None,
                    }
                }
            }
            Err(_) => TypeOneRecord {
                energy,
                omega: None,
                omega_bar: None,
                decided: false,
                is_type1: None,
            },
        }
    });
    let undecided = rows.iter().filter(|r| !r.decided).count();
    let failures: Vec<f64> = rows
        .iter()
        .filter(|r| r.is_type1 == Some(false))
        .map(|r| r.energy)
        .collect();
    let all_type1 = if rows.is_empty() {
        None
    } else {
        Some(failures.is_empty())
    };
    Ok(TypeOneOutcome {
        records: rows,
        all_type1,
        undecided,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn synthetic_profile(f: impl Fn(f64) -> f64) -> EpsilonProfile {
        let eps: Vec<f64> = (0..24).map(|i| i as f64 * 0.5 / 23.0).collect();
        let l: Vec<f64> = eps
            .iter()
            .enumerate()
            .map(|(i, &e)| f(e) + 1e-5 * ((i * 37 % 11) as f64 - 5.0) / 5.0)
            .collect();
        let stderr = vec![1e-4; eps.len()];
        EpsilonProfile {
            energy: 0.0,
            eps,
            l,
            stderr,
            fit: None,
        }
    }

    #[test]
    fn flat_profile_uses_no_turning_point_convention() {
        let p = synthetic_profile(|_| 0.0);
        let fitted = fit_profile(&p, 0.1, 3).unwrap();
        let fit = fitted.fit.unwrap();
        assert_eq!(fit.slopes_quantized, vec![0]);
        assert_eq!(fit.omega, 0);
        assert_eq!(fit.omega_bar, 1);
        assert!(fit.eps1.is_none());
        assert!(fit.quantization_ok);
    }

    #[test]
    fn subcritical_shape_recovers_breakpoint() {
        // max(0, 2πε − ln 2): turning point at ln2/2π ≈ 0.1103.
        let p = synthetic_profile(|e| (TAU * e - 2.0f64.ln()).max(0.0));
        let fitted = fit_profile(&p, 0.1, 3).unwrap();
        let fit = fitted.fit.unwrap();
        assert_eq!(fit.slopes_quantized, vec![0, 1]);
        assert_eq!(fit.omega, 0);
        assert_eq!(fit.omega_bar, 1);
        let eps1 = fit.eps1.unwrap();
        assert_abs_diff_eq!(eps1, 2.0f64.ln() / TAU, epsilon = 5e-3);
        assert!(fit.quantization_ok);
    }

    #[test]
    fn supercritical_shape_has_zero_turning_point() {
        let p = synthetic_profile(|e| TAU * e + 0.3);
        let fitted = fit_profile(&p, 0.1, 3).unwrap();
        let fit = fitted.fit.unwrap();
        assert_eq!(fit.slopes_quantized, vec![1]);
        assert_eq!(fit.omega, 1);
        assert_eq!(fit.omega_bar, 1);
        assert_eq!(fit.eps1, Some(0.0));
    }

    #[test]
    fn three_piece_synthetic_profile() {
        let p = synthetic_profile(|e| (TAU * e - 0.4)
            .max(2.0 * TAU * e - 1.2)
            .max(0.1));
        let fitted = fit_profile(&p, 0.1, 3).unwrap();
        let fit = fitted.fit.unwrap();
        assert_eq!(fit.slopes_quantized, vec![0, 1, 2]);
        assert_eq!(fit.omega, 0);
        assert_eq!(fit.omega_bar, 1);
        let b0 = fit.breakpoints[0];
        let b1 = fit.breakpoints[1];
        assert_abs_diff_eq!(b0, 0.5 / TAU, epsilon = 2e-2);
        assert_abs_diff_eq!(b1, 0.8 / TAU, epsilon = 2e-2);
    }

    #[test]
    fn non_convex_samples_rejected() {
        let p = synthetic_profile(|e| -4.0 * (e - 0.25) * (e - 0.25) + 0.25);
        assert!(matches!(
            fit_profile(&p, 0.1, 3),
            Err(QpError::DataQuality(_))
        ));
    }

    #[test]
    fn quantization_failure_flagged() {
        // Slope 0.5·2π sits squarely between integers.
        let p = synthetic_profile(|e| 0.5 * TAU * e);
        if let Ok(fitted) = fit_profile(&p, 0.1, 3) {
            assert!(!fitted.fit.unwrap().quantization_ok);
        }
    }

    #[test]
    fn empty_energy_set_is_vacuous() {
        let v = TrigPolynomial::cosine(2.0);
        let alpha = Frequency::golden();
        let grid = default_eps_grid(v.strip());
        let out = classify_type1(&v, &alpha, &[], &grid, &ProfileConfig::default()).unwrap();
        assert!(out.all_type1.is_none());
        assert!(out.records.is_empty());
    }

    #[test]
    fn grid_validation() {
        let v = TrigPolynomial::cosine(1.0);
        let alpha = Frequency::golden();
        let bad = vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4];
        assert!(matches!(
            sample_profile(&v, &alpha, 0.0, &bad, 200, 2, 0),
            Err(QpError::Domain(_))
        ));
    }

    #[test]
    fn default_grid_shape() {
        let g = default_eps_grid(1.0);
        assert_eq!(g.len(), 24);
        assert_eq!(g[0], 0.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(*g.last().unwrap() <= 0.6 + 1e-12);
    }

    #[test]
    fn amo_subcritical_profile_end_to_end() {
        // λ = 1/2 at E = 0: flat then slope 2π with ε₁ = ln2/2π.
        let v = TrigPolynomial::cosine(0.5);
        let alpha = Frequency::golden();
        let grid = default_eps_grid(1.0);
        let cfg = ProfileConfig {
            n: 3000,
            phases: 12,
            ..ProfileConfig::default()
        };
        let fitted = accelerations(&v, &alpha, 0.0, &grid, &cfg).unwrap();
        let fit = fitted.fit.unwrap();
        assert!(fit.quantization_ok);
        assert_eq!(fit.omega, 0);
        assert_eq!(fit.omega_bar, 1);
        let eps1 = fit.eps1.unwrap();
        assert_abs_diff_eq!(eps1, 2.0f64.ln() / TAU, epsilon = 0.01);
    }
}
