//! Spectrum approximation: banded self-adjoint truncations, band spectra of
//! rational approximants through the Bloch criterion, the integrated density
//! of states, fibered rotation numbers, and gap detection with integer
//! labels.

use crate::arithmetic::Frequency;
use crate::cocycles::TrigPolynomial;
use crate::linalg::{tridiag_eigenvalues, BandedHermitian};
use crate::numeric::frac;
use crate::parallel::par_map_idx;
use crate::{C64, QpError, Result};

/// Operator whose truncations are assembled.
#[derive(Debug, Clone)]
pub enum OperatorKind {
    /// `(Hu)_n = u_{n+1} + u_{n-1} + v(x + nα) u_n`.
    Schrodinger(TrigPolynomial),
    /// `(Lu)_n = Σ_k v̂_k u_{n+k} + w(θ + nα) u_n`.
    DualFiniteRange(TrigPolynomial, TrigPolynomial),
}

impl OperatorKind {
    fn bandwidth(&self) -> usize {
        match self {
            OperatorKind::Schrodinger(_) => 1,
            OperatorKind::DualFiniteRange(v, _) => v.degree().max(1),
        }
    }
}

/// A detected spectral gap.
#[derive(Debug, Clone)]
pub struct GapInfo {
    pub left: f64,
    pub right: f64,
    /// IDS value on the gap.
    pub ids: f64,
    /// Integer label `k` with `ids ≈ kα mod 1`, when one matches.
    pub label: Option<i64>,
    /// Circular distance between `ids` and the matched `kα mod 1`.
    pub residual: f64,
}

/// Band/point approximation of a spectrum.
#[derive(Debug, Clone)]
pub struct SpectrumApprox {
    /// Sorted truncation eigenvalues, merged over phases, multiplicity kept.
    pub points: Vec<f64>,
    /// Disjoint closed bands (periodic-approximant mode only).
    pub bands: Vec<(f64, f64)>,
    pub gaps: Vec<GapInfo>,
    pub reliable: bool,
    pub bandwidth: usize,
    pub phase_count: usize,
}

// ═══════════════════════════════════════════════════════════════════
//  Truncations
// ═══════════════════════════════════════════════════════════════════

/// Eigenvalues of the `N×N` Dirichlet truncation for each sampled phase,
/// merged and sorted.
pub fn truncated_spectrum(
    op: &OperatorKind,
    alpha: &Frequency,
    size: usize,
    phases: &[f64],
) -> Result<SpectrumApprox> {
    if size < 2 {
        return Err(QpError::Domain("truncation size too small".into()));
    }
    if phases.is_empty() {
        return Err(QpError::Domain("need at least one phase".into()));
    }
    let rows: Vec<Vec<f64>> = par_map_idx(phases.len(), |j| {
        truncation_eigenvalues(op, alpha, size, phases[j])
    });
    let mut points: Vec<f64> = rows.into_iter().flatten().collect();
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(SpectrumApprox {
        points,
        bands: Vec::new(),
        gaps: Vec::new(),
        reliable: size >= 50,
        bandwidth: op.bandwidth(),
        phase_count: phases.len(),
    })
}

fn truncation_eigenvalues(op: &OperatorKind, alpha: &Frequency, size: usize, x0: f64) -> Vec<f64> {
    match op {
        OperatorKind::Schrodinger(v) => {
            let diag: Vec<f64> = (0..size)
                .map(|n| v.eval(frac(x0 + n as f64 * alpha.value()), 0.0).re)
                .collect();
            let off = vec![1.0; size - 1];
            tridiag_eigenvalues(&diag, &off)
        }
        OperatorKind::DualFiniteRange(v, w) => {
            let d = v.degree().max(1);
            let mut banded = BandedHermitian::new(size, d);
            for i in 0..size {
                let diag = w.eval(frac(x0 + i as f64 * alpha.value()), 0.0).re + v.coeff(0).re;
                banded.bands[0][i] = C64::new(diag, 0.0);
            }
            for k in 1..=d {
                let coeff = v.coeff(-(k as i64));
                for i in 0..size - k {
                    banded.bands[k][i] = coeff;
                }
            }
            banded.eigenvalues()
        }
    }
}

// ═══════════════════════════════════════════════════════════════════
//  Band spectra of rational approximants
// ═══════════════════════════════════════════════════════════════════

/// Trace of the period-`q` transfer product at rational frequency `p/q`.
pub fn transfer_trace(v: &TrigPolynomial, p: u64, q: u64, x: f64, energy: f64) -> f64 {
    let alpha = p as f64 / q as f64;
    let mut m = [1.0f64, 0.0, 0.0, 1.0]; // row-major 2×2
    let mut log_scale = 0.0f64;
    for j in 0..q {
        let vx = v.eval(frac(x + j as f64 * alpha), 0.0).re;
        let a = energy - vx;
        // [[a, -1], [1, 0]] · m
        let m00 = a * m[0] - m[2];
        let m01 = a * m[1] - m[3];
        let (m10, m11) = (m[0], m[1]);
        m = [m00, m01, m10, m11];
        let scale = m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        if scale > 1e100 {
            for e in &mut m {
                *e /= scale;
            }
            log_scale += scale.ln();
        }
    }
    (m[0] + m[3]) * log_scale.exp()
}

/// Band spectrum of the Schrödinger operator at rational frequency `p/q`.
///
/// Band edges satisfy `tr A_q(x; E) = ±2`; they are located as eigenvalues
/// of the periodic and antiperiodic `q×q` restrictions (the numerically
/// stable form of the criterion) and, for small `q`, refined by sign-change
/// bisection on the discriminant itself. Bands are unioned over the sampled
/// phases.
pub fn schrodinger_bands(
    v: &TrigPolynomial,
    p: u64,
    q: u64,
    bloch_phases: usize,
) -> Result<SpectrumApprox> {
    if q == 0 || q > 2000 {
        return Err(QpError::Size { largest_safe: 2000 });
    }
    if p >= q && !(p == 0 && q == 1) {
        return Err(QpError::Domain(format!("p/q = {p}/{q} not in [0,1)")));
    }
    let (p, q) = reduce_fraction(p, q);
    let phases = bloch_phases.max(1);
    let per_phase: Vec<Vec<(f64, f64)>> = par_map_idx(phases, |i| {
        let x = i as f64 / phases as f64;
        phase_bands(v, p, q, x)
    });
    // Union per band index, then merge overlaps.
    let qs = q as usize;
    let mut bands: Vec<(f64, f64)> = Vec::with_capacity(qs);
    for j in 0..qs {
        let mut left = f64::INFINITY;
        let mut right = f64::NEG_INFINITY;
        for row in &per_phase {
            left = left.min(row[j].0);
            right = right.max(row[j].1);
        }
        bands.push((left, right));
    }
    let bands = merge_intervals(bands);
    let points: Vec<f64> = bands.iter().flat_map(|&(l, r)| [l, r]).collect();
    Ok(SpectrumApprox {
        points,
        bands,
        gaps: Vec::new(),
        reliable: true,
        bandwidth: 1,
        phase_count: phases,
    })
}

fn phase_bands(v: &TrigPolynomial, p: u64, q: u64, x: f64) -> Vec<(f64, f64)> {
    let qs = q as usize;
    let alpha = p as f64 / q as f64;
    let diag: Vec<f64> = (0..qs)
        .map(|n| v.eval(frac(x + n as f64 * alpha), 0.0).re)
        .collect();
    let mut edges: Vec<(f64, f64)> = Vec::with_capacity(2 * qs); // (E, target trace)
    for (corner, target) in [(1.0, 2.0), (-1.0, -2.0)] {
        for e in floquet_eigenvalues(&diag, corner) {
            edges.push((e, target));
        }
    }
    // Refine by sign-change bisection on the discriminant where the transfer
    // product is numerically trustworthy.
    if q <= 40 {
        let span = edges
            .iter()
            .map(|&(e, _)| e)
            .fold(f64::NEG_INFINITY, f64::max)
            - edges.iter().map(|&(e, _)| e).fold(f64::INFINITY, f64::min);
        let h = (span * 1e-4).max(1e-9);
        for (e, target) in &mut edges {
            let f = |en: f64| transfer_trace(v, p, q, x, en) - *target;
            let (mut lo, mut hi) = (*e - h, *e + h);
            if f(lo).signum() != f(hi).signum() {
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if f(lo).signum() == f(mid).signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                *e = 0.5 * (lo + hi);
            }
        }
    }
    edges.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    edges
        .chunks(2)
        .map(|pair| (pair[0].0, pair[1].0))
        .collect()
}

/// Eigenvalues of the `q×q` restriction with (anti)periodic closure.
fn floquet_eigenvalues(diag: &[f64], corner: f64) -> Vec<f64> {
    let q = diag.len();
    if q == 1 {
        // Period one: u_{n±1} = e^{±iκ} u_n gives E = v + 2cos κ.
        return vec![diag[0] + 2.0 * corner];
    }
    let mut m = nalgebra::DMatrix::<f64>::zeros(q, q);
    for i in 0..q {
        m[(i, i)] = diag[i];
    }
    for i in 0..q - 1 {
        m[(i, i + 1)] = 1.0;
        m[(i + 1, i)] = 1.0;
    }
    m[(0, q - 1)] += corner;
    m[(q - 1, 0)] += corner;
    let eig = nalgebra::SymmetricEigen::new(m);
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

fn reduce_fraction(p: u64, q: u64) -> (u64, u64) {
    if p == 0 {
        return (0, 1);
    }
    let (mut a, mut b) = (p, q);
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    (p / a, q / a)
}

fn merge_intervals(mut bands: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    bands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let span = bands
        .last()
        .map(|&(_, r)| r - bands[0].0)
        .unwrap_or(1.0)
        .max(1.0);
    // Bands touching at a point (closed gaps of critical couplings) stay
    // separate; only genuine overlap merges.
    let tol = 1e-9 * span;
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(bands.len());
    for (l, r) in bands {
        if let Some(last) = out.last_mut() {
            if l < last.1 - tol {
                last.1 = last.1.max(r);
                continue;
            }
        }
        out.push((l, r));
    }
    out
}

/// Sampled points covering a band union, for Hausdorff comparisons.
pub fn bands_to_grid(bands: &[(f64, f64)], step: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for &(l, r) in bands {
        let n = ((r - l) / step).ceil() as usize;
        for i in 0..=n.max(1) {
            out.push(l + (r - l) * i as f64 / n.max(1) as f64);
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

// ═══════════════════════════════════════════════════════════════════
//  IDS and rotation number
// ═══════════════════════════════════════════════════════════════════

/// Fraction of points at or below `energy`.
pub fn ids_from_points(points: &[f64], energy: f64) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let count = points.partition_point(|&x| x <= energy);
    count as f64 / points.len() as f64
}

/// Integrated density of states from phase-averaged truncations.
pub fn ids(
    op: &OperatorKind,
    alpha: &Frequency,
    energy: f64,
    size: usize,
    phases: &[f64],
) -> Result<f64> {
    let approx = truncated_spectrum(op, alpha, size, phases)?;
    Ok(ids_from_points(&approx.points, energy))
}

/// Fibered rotation number and the IDS at one energy.
#[derive(Debug, Clone)]
pub struct RotationData {
    pub energy: f64,
    /// Dynamical estimate in `[0, 1/2]`.
    pub rho: f64,
    /// IDS estimate in `[0, 1]`.
    pub n: f64,
    /// `|N − (1 − 2ρ)|`, the consistency of the two estimators.
    pub discrepancy: f64,
}

/// Rotation number through vertical crossings of the solution line (sign
/// flips of the Dirichlet solution), phase-averaged; `N` from the truncation
/// IDS with the relation `N = 1 − 2ρ` as the consistency check.
pub fn rotation_number(
    v: &TrigPolynomial,
    alpha: &Frequency,
    energy: f64,
    n: usize,
    phases: &[f64],
    ids_size: usize,
) -> Result<RotationData> {
    if n == 0 {
        return Err(QpError::Domain("n must be positive".into()));
    }
    let flips: Vec<f64> = par_map_idx(phases.len(), |j| {
        let x0 = phases[j];
        let mut prev = 0.0f64; // u_{-1}
        let mut cur = 1.0f64; // u_0
        // Sign changes are counted between consecutive nonzero values, so
        // exact zeros (the free operator on resonant energies) pass through.
        let mut last_sign = 1.0f64;
        let mut count = 0usize;
        for t in 0..n {
            let vx = v.eval(frac(x0 + t as f64 * alpha.value()), 0.0).re;
            let next = (energy - vx) * cur - prev;
            if next != 0.0 {
                let s = next.signum();
                if s != last_sign {
                    count += 1;
                }
                last_sign = s;
            }
            prev = cur;
            cur = next;
            let scale = cur.abs().max(prev.abs());
            if scale > 1e100 {
                cur /= scale;
                prev /= scale;
            }
        }
        count as f64 / n as f64
    });
    let density = flips.iter().sum::<f64>() / flips.len() as f64;
    let rho = 0.5 * density;
    let ids_value = ids(&OperatorKind::Schrodinger(v.clone()), alpha, energy, ids_size, phases)?;
    let discrepancy = (ids_value - (1.0 - 2.0 * rho)).abs();
    Ok(RotationData {
        energy,
        rho,
        n: ids_value,
        discrepancy,
    })
}

// ═══════════════════════════════════════════════════════════════════
//  Gap detection and labeling
// ═══════════════════════════════════════════════════════════════════

/// Detects gaps in the point cloud and matches each gap's IDS value against
/// the candidate set `{kα mod 1 : |k| ≤ k_max}`.
pub fn detect_and_label_gaps(
    approx: &SpectrumApprox,
    alpha: &Frequency,
    k_max: i64,
    min_gap: f64,
    label_tol: f64,
) -> SpectrumApprox {
    let mut out = approx.clone();
    let trim = 2 * approx.bandwidth * approx.phase_count;
    let pts = &approx.points;
    if pts.len() <= 2 * trim + 4 {
        return out;
    }
    let interior = &pts[trim..pts.len() - trim];
    let window = 24usize;
    let mut gaps = Vec::new();
    for i in 0..interior.len() - 1 {
        let width = interior[i + 1] - interior[i];
        let lo = i.saturating_sub(window / 2);
        let hi = (i + window / 2).min(interior.len() - 1);
        let local_spacing = (interior[hi] - interior[lo]) / (hi - lo).max(1) as f64;
        let threshold = min_gap.max(10.0 * local_spacing);
        if width > threshold {
            let mid = 0.5 * (interior[i] + interior[i + 1]);
            let ids_value = ids_from_points(pts, mid);
            let (label, residual) = best_gap_label(ids_value, alpha.value(), k_max, label_tol);
            gaps.push(GapInfo {
                left: interior[i],
                right: interior[i + 1],
                ids: ids_value,
                label,
                residual,
            });
        }
    }
    out.gaps = gaps;
    out
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = frac(a - b);
    d.min(1.0 - d)
}

fn best_gap_label(ids_value: f64, alpha: f64, k_max: i64, label_tol: f64) -> (Option<i64>, f64) {
    let mut best_k = 0i64;
    let mut best = circular_distance(ids_value, 0.0);
    for mag in 1..=k_max {
        for k in [mag, -mag] {
            let r = circular_distance(ids_value, frac(k as f64 * alpha));
            if r < best {
                best = r;
                best_k = k;
            }
        }
    }
    if best <= label_tol {
        (Some(best_k), best)
    } else {
        (None, best)
    }
}

/// Samples `count` energies from the trimmed interior of a point cloud.
pub fn sample_energies(approx: &SpectrumApprox, count: usize) -> Vec<f64> {
    let trim = 2 * approx.bandwidth * approx.phase_count;
    let pts = &approx.points;
    if pts.len() <= 2 * trim + 2 || count == 0 {
        return Vec::new();
    }
    let interior = &pts[trim..pts.len() - trim];
    if count == 1 {
        return vec![interior[interior.len() / 2]];
    }
    (0..count)
        .map(|i| interior[i * (interior.len() - 1) / (count - 1)])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycles::phase_lattice;
    use approx::assert_abs_diff_eq;

    fn golden() -> Frequency {
        Frequency::golden()
    }

    #[test]
    fn free_truncation_fills_band() {
        let op = OperatorKind::Schrodinger(TrigPolynomial::zero());
        let approx = truncated_spectrum(&op, &golden(), 200, &[0.0]).unwrap();
        let lo = *approx.points.first().unwrap();
        let hi = *approx.points.last().unwrap();
        assert!(lo > -2.0 && lo < -1.999);
        assert!(hi < 2.0 && hi > 1.999);
    }

    #[test]
    fn amo_truncation_respects_norm_bound() {
        let op = OperatorKind::Schrodinger(TrigPolynomial::cosine(2.0));
        let approx = truncated_spectrum(&op, &golden(), 300, &phase_lattice(4, 0)).unwrap();
        assert!(*approx.points.first().unwrap() >= -6.01);
        assert!(*approx.points.last().unwrap() <= 6.01);
    }

    #[test]
    fn tiny_truncation_flagged() {
        let op = OperatorKind::Schrodinger(TrigPolynomial::cosine(1.0));
        let approx = truncated_spectrum(&op, &golden(), 10, &[0.1]).unwrap();
        assert!(!approx.reliable);
    }

    #[test]
    fn free_band_is_minus_two_two() {
        let approx = schrodinger_bands(&TrigPolynomial::zero(), 0, 1, 4).unwrap();
        assert_eq!(approx.bands.len(), 1);
        let (l, r) = approx.bands[0];
        assert_abs_diff_eq!(l, -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn period_two_bands_match_truncation() {
        let v = TrigPolynomial::cosine(1.0);
        let approx = schrodinger_bands(&v, 1, 2, 16).unwrap();
        let alpha = Frequency::rational(1, 2).unwrap();
        let cloud = truncated_spectrum(&OperatorKind::Schrodinger(v), &alpha, 400, &phase_lattice(8, 1))
            .unwrap();
        // Every truncation point (boundary modes trimmed) lies within 0.02 of
        // the band union.
        let pts = &cloud.points[16..cloud.points.len() - 16];
        for &e in pts {
            let dist = approx
                .bands
                .iter()
                .map(|&(l, r)| {
                    if e < l {
                        l - e
                    } else if e > r {
                        e - r
                    } else {
                        0.0
                    }
                })
                .fold(f64::INFINITY, f64::min);
            assert!(dist <= 0.02, "point {e} at distance {dist} from bands");
        }
    }

    #[test]
    fn band_count_matches_denominator() {
        let v = TrigPolynomial::cosine(1.0);
        for (p, q) in [(1u64, 3u64), (2, 5), (3, 8)] {
            let approx = schrodinger_bands(&v, p, q, 8).unwrap();
            assert_eq!(approx.bands.len(), q as usize, "q = {q}");
        }
    }

    #[test]
    fn oversized_denominator_rejected() {
        let v = TrigPolynomial::cosine(1.0);
        assert!(matches!(
            schrodinger_bands(&v, 1, 4000, 2),
            Err(QpError::Size { .. })
        ));
    }

    #[test]
    fn free_ids_examples() {
        let op = OperatorKind::Schrodinger(TrigPolynomial::zero());
        let phases = phase_lattice(4, 0);
        let n0 = ids(&op, &golden(), 0.0, 400, &phases).unwrap();
        assert_abs_diff_eq!(n0, 0.5, epsilon = 0.01);
        let n2 = ids(&op, &golden(), 2.0, 400, &phases).unwrap();
        assert_abs_diff_eq!(n2, 1.0, epsilon = 0.01);
        let n1 = ids(&op, &golden(), 1.0, 400, &phases).unwrap();
        let expected = 1.0 - (0.5f64).acos() / std::f64::consts::PI;
        assert_abs_diff_eq!(n1, expected, epsilon = 0.01);
    }

    #[test]
    fn rotation_number_free_quarter_turn() {
        let v = TrigPolynomial::zero();
        let data = rotation_number(&v, &golden(), 0.0, 4000, &phase_lattice(4, 2), 300).unwrap();
        assert_abs_diff_eq!(data.rho, 0.25, epsilon = 2e-3);
        assert!(data.discrepancy <= 0.01);
    }

    #[test]
    fn rotation_number_free_sixth() {
        let v = TrigPolynomial::zero();
        let data = rotation_number(&v, &golden(), 1.0, 6000, &phase_lattice(4, 2), 300).unwrap();
        assert_abs_diff_eq!(data.rho, 1.0 / 6.0, epsilon = 5e-3);
    }

    #[test]
    fn rotation_number_below_spectrum() {
        let v = TrigPolynomial::cosine(2.0);
        let data = rotation_number(&v, &golden(), -7.0, 2000, &phase_lattice(4, 2), 200).unwrap();
        assert_abs_diff_eq!(data.rho, 0.5, epsilon = 1e-9);
        assert!(data.n <= 0.01);
    }

    #[test]
    fn free_spectrum_has_no_gaps() {
        let op = OperatorKind::Schrodinger(TrigPolynomial::zero());
        let approx = truncated_spectrum(&op, &golden(), 300, &phase_lattice(4, 3)).unwrap();
        let labeled = detect_and_label_gaps(&approx, &golden(), 30, 1e-3, 5e-3);
        assert!(labeled.gaps.is_empty());
    }

    #[test]
    fn amo_gaps_get_labels() {
        let op = OperatorKind::Schrodinger(TrigPolynomial::cosine(2.0));
        let approx = truncated_spectrum(&op, &golden(), 400, &phase_lattice(8, 5)).unwrap();
        let labeled = detect_and_label_gaps(&approx, &golden(), 30, 1e-3, 5e-3);
        assert!(
            labeled.gaps.len() >= 4,
            "expected several gaps, found {}",
            labeled.gaps.len()
        );
        for gap in &labeled.gaps {
            assert!(
                gap.label.is_some(),
                "unlabeled gap at [{}, {}] with ids {} (residual {:.2e})",
                gap.left,
                gap.right,
                gap.ids,
                gap.residual
            );
        }
    }

    #[test]
    fn zero_kmax_only_matches_edges() {
        let op = OperatorKind::Schrodinger(TrigPolynomial::cosine(2.0));
        let approx = truncated_spectrum(&op, &golden(), 400, &phase_lattice(8, 5)).unwrap();
        let labeled = detect_and_label_gaps(&approx, &golden(), 0, 1e-3, 5e-3);
        for gap in &labeled.gaps {
            if gap.ids > 0.01 && gap.ids < 0.99 {
                assert!(gap.label.is_none());
            }
        }
    }

    #[test]
    fn refined_edges_match_discriminant() {
        // At small q the bisection-refined edges satisfy |tr| = 2 tightly.
        let v = TrigPolynomial::cosine(1.0);
        let approx = schrodinger_bands(&v, 1, 5, 1).unwrap();
        for &(l, r) in &approx.bands {
            for e in [l, r] {
                let t = transfer_trace(&v, 1, 5, 0.0, e).abs();
                assert!((t - 2.0).abs() < 1e-6, "edge {e}: |tr| = {t}");
            }
        }
    }
}
