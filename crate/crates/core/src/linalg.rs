//! Linear-algebra kernels: the re-orthonormalized transfer-product chain, a
//! cyclic Jacobi eigensolver for small Hermitian matrices, Sturm bisection for
//! symmetric tridiagonal truncations, and an LDLᴴ inertia eigensolver for
//! Hermitian banded truncations.

use crate::numeric::KahanSum;
use crate::{C64, CMatrix};

// ═══════════════════════════════════════════════════════════════════
//  QR product chain
// ═══════════════════════════════════════════════════════════════════

/// Accumulates `ln σ_k` of an ordered matrix product through per-step
/// modified Gram–Schmidt re-orthonormalization with the positive-diagonal
/// convention. The product itself is never formed, so exponents of order
/// `L·n ≈ 700` and beyond stay finite.
pub struct QrChain {
    dim: usize,
    q: CMatrix,
    work: CMatrix,
    logs: Vec<KahanSum>,
    steps: usize,
}

impl QrChain {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            q: CMatrix::identity(dim, dim),
            work: CMatrix::zeros(dim, dim),
            logs: vec![KahanSum::new(); dim],
            steps: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Applies one step matrix: `Q ← orth(A·Q)`, accumulating `ln r_kk`.
    pub fn step(&mut self, a: &CMatrix) {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        self.work.gemm(one, a, &self.q, zero);
        for j in 0..self.dim {
            // Two projection passes keep Q orthonormal even when the step
            // matrix is badly conditioned (large imaginary phase shifts).
            for _ in 0..2 {
                for i in 0..j {
                    let proj = self.q.column(i).dotc(&self.work.column(j));
                    let qi = self.q.column(i).clone_owned();
                    self.work.column_mut(j).axpy(-proj, &qi, one);
                }
            }
            let r = self.work.column(j).norm();
            if r > 0.0 {
                self.logs[j].add(r.ln());
                self.q.column_mut(j).copy_from(&self.work.column(j));
                self.q.column_mut(j).unscale_mut(r);
            } else {
                // Singular step; keep the chain alive with a basis vector.
                self.logs[j].add(f64::MIN_POSITIVE.ln());
                self.q.column_mut(j).fill(zero);
                self.q[(j, j)] = one;
            }
        }
        self.steps += 1;
    }

    /// Accumulated `ln σ_k` estimates (descending in k by construction).
    pub fn log_sigmas(&self) -> Vec<f64> {
        self.logs.iter().map(|k| k.value()).collect()
    }

    /// Per-step exponents `ln σ_k / n`.
    pub fn exponents(&self) -> Vec<f64> {
        let n = self.steps.max(1) as f64;
        self.logs.iter().map(|k| k.value() / n).collect()
    }

    /// Current orthonormal frame.
    pub fn frame(&self) -> &CMatrix {
        &self.q
    }
}

// ═══════════════════════════════════════════════════════════════════
//  Hermitian Jacobi eigensolver (small dense matrices)
// ═══════════════════════════════════════════════════════════════════

/// Eigenvalues (ascending) and eigenvectors of a small Hermitian matrix via
/// cyclic Jacobi with complex rotations. Intended for fiber dimensions
/// (`2d ≤ 10` or so), not for truncations.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "hermitian_eigen needs a square matrix");
    let mut m = a.clone();
    let mut v = CMatrix::identity(n, n);
    let scale: f64 = m.iter().map(|x| x.norm()).fold(0.0, f64::max).max(1.0);
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(m[(p, q)].norm());
            }
        }
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let g = apq.norm();
                if g <= 1e-17 * scale {
                    continue;
                }
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let phase = apq / C64::new(g, 0.0);
                let theta = 0.5 * (2.0 * g).atan2(app - aqq);
                let (s, c) = theta.sin_cos();
                // U restricted to (p,q): [[c, -s·phase], [s·conj(phase), c]]
                let upp = C64::new(c, 0.0);
                let upq = -phase * C64::new(s, 0.0);
                let uqp = phase.conj() * C64::new(s, 0.0);
                let uqq = C64::new(c, 0.0);
                // m ← Uᴴ m U, applied as column then row updates.
                for i in 0..n {
                    let mip = m[(i, p)];
                    let miq = m[(i, q)];
                    m[(i, p)] = mip * upp + miq * uqp;
                    m[(i, q)] = mip * upq + miq * uqq;
                }
                for j in 0..n {
                    let mpj = m[(p, j)];
                    let mqj = m[(q, j)];
                    m[(p, j)] = upp.conj() * mpj + uqp.conj() * mqj;
                    m[(q, j)] = upq.conj() * mpj + uqq.conj() * mqj;
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * upp + viq * uqp;
                    v[(i, q)] = vip * upq + viq * uqq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let vals: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    order.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap());
    let sorted_vals: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
    let mut sorted_vecs = CMatrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        sorted_vecs.column_mut(new).copy_from(&v.column(old));
    }
    (sorted_vals, sorted_vecs)
}

/// Orthonormalizes the columns of a (possibly rectangular) matrix in place
/// by two-pass modified Gram–Schmidt.
pub fn orthonormalize_columns(m: &mut CMatrix) {
    let one = C64::new(1.0, 0.0);
    for j in 0..m.ncols() {
        for _ in 0..2 {
            for i in 0..j {
                let proj = m.column(i).dotc(&m.column(j));
                let qi = m.column(i).clone_owned();
                m.column_mut(j).axpy(-proj, &qi, one);
            }
        }
        let r = m.column(j).norm();
        if r > 0.0 {
            m.column_mut(j).unscale_mut(r);
        } else {
            m.column_mut(j).fill(C64::new(0.0, 0.0));
            if j < m.nrows() {
                m[(j, j)] = one;
            }
        }
    }
}

/// Spectral norm of a small matrix, `σ_max = sqrt(λ_max(MᴴM))`.
pub fn opnorm_small(m: &CMatrix) -> f64 {
    let g = m.adjoint() * m;
    let (vals, _) = hermitian_eigen(&g);
    vals.last().copied().unwrap_or(0.0).max(0.0).sqrt()
}

/// Condition number of a small matrix through its singular values.
pub fn cond_small(m: &CMatrix) -> f64 {
    let g = m.adjoint() * m;
    let (vals, _) = hermitian_eigen(&g);
    let hi = vals.last().copied().unwrap_or(0.0).max(0.0).sqrt();
    let lo = vals.first().copied().unwrap_or(0.0).max(0.0).sqrt();
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

// ═══════════════════════════════════════════════════════════════════
//  Symmetric tridiagonal eigenvalues (Sturm bisection)
// ═══════════════════════════════════════════════════════════════════

const PIVOT_GUARD: f64 = 1e-300;

/// Count of eigenvalues strictly below `lambda` via the Sturm sequence of
/// the LDLᵀ factorization.
pub fn sturm_count(diag: &[f64], off: &[f64], lambda: f64) -> usize {
    let n = diag.len();
    if n == 0 {
        return 0;
    }
    let mut count = 0usize;
    let mut q = diag[0] - lambda;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..n {
        let q_safe = if q.abs() < PIVOT_GUARD {
            if q >= 0.0 {
                PIVOT_GUARD
            } else {
                -PIVOT_GUARD
            }
        } else {
            q
        };
        q = (diag[i] - lambda) - off[i - 1] * off[i - 1] / q_safe;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// All eigenvalues of a symmetric tridiagonal matrix, ascending.
pub fn tridiag_eigenvalues(diag: &[f64], off: &[f64]) -> Vec<f64> {
    let n = diag.len();
    if n == 0 {
        return Vec::new();
    }
    let mut lo = f64::MAX;
    let mut hi = f64::MIN;
    for i in 0..n {
        let el = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let er = if i < n - 1 { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - el - er);
        hi = hi.max(diag[i] + el + er);
    }
    lo -= 1.0;
    hi += 1.0;
    bisect_all(n, lo, hi, |lambda| sturm_count(diag, off, lambda))
}

fn bisect_all(n: usize, lo: f64, hi: f64, count: impl Fn(f64) -> usize) -> Vec<f64> {
    let scale = hi.abs().max(lo.abs()).max(1.0);
    let tol = 1e-13 * scale;
    let mut out = Vec::with_capacity(n);
    for idx in 0..n {
        let mut a = lo;
        let mut b = hi;
        while b - a > tol {
            let mid = 0.5 * (a + b);
            if count(mid) > idx {
                b = mid;
            } else {
                a = mid;
            }
        }
        out.push(0.5 * (a + b));
    }
    out
}

// ═══════════════════════════════════════════════════════════════════
//  Hermitian banded eigenvalues (LDLᴴ inertia bisection)
// ═══════════════════════════════════════════════════════════════════

/// Hermitian banded matrix stored by lower bands: `bands[k][j] = A[j+k, j]`
/// for `k = 0..=bw`. The diagonal band must be real.
pub struct BandedHermitian {
    pub n: usize,
    pub bw: usize,
    pub bands: Vec<Vec<C64>>,
}

impl BandedHermitian {
    pub fn new(n: usize, bw: usize) -> Self {
        let bands = (0..=bw).map(|k| vec![C64::new(0.0, 0.0); n - k]).collect();
        Self { n, bw, bands }
    }

    /// Number of eigenvalues strictly below `lambda` (Sylvester inertia of
    /// the shifted LDLᴴ factorization).
    pub fn inertia_below(&self, lambda: f64) -> usize {
        let n = self.n;
        let bw = self.bw;
        let mut d = vec![0.0f64; n];
        // l[i*bw + (k-1)] = L[i, i-k]
        let mut l = vec![C64::new(0.0, 0.0); n * bw];
        let mut count = 0usize;
        for j in 0..n {
            let mut dj = self.bands[0][j].re - lambda;
            for k in 1..=bw.min(j) {
                let lj = l[j * bw + (k - 1)];
                dj -= lj.norm_sqr() * d[j - k];
            }
            if dj.abs() < PIVOT_GUARD {
                dj = if dj >= 0.0 { PIVOT_GUARD } else { -PIVOT_GUARD };
            }
            if dj < 0.0 {
                count += 1;
            }
            d[j] = dj;
            let imax = (j + bw).min(n - 1);
            for i in (j + 1)..=imax {
                let mut s = self.bands[i - j][j];
                let kmin = i.saturating_sub(bw);
                for k in kmin..j {
                    let lik = l[i * bw + (i - k - 1)];
                    let ljk = l[j * bw + (j - k - 1)];
                    s -= lik * ljk.conj() * C64::new(d[k], 0.0);
                }
                l[i * bw + (i - j - 1)] = s / C64::new(dj, 0.0);
            }
        }
        count
    }

    /// All eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.n;
        if n == 0 {
            return Vec::new();
        }
        let mut lo = f64::MAX;
        let mut hi = f64::MIN;
        for i in 0..n {
            let mut radius = 0.0;
            for k in 1..=self.bw {
                if i >= k {
                    radius += self.bands[k][i - k].norm();
                }
                if i + k < n {
                    radius += self.bands[k][i].norm();
                }
            }
            lo = lo.min(self.bands[0][i].re - radius);
            hi = hi.max(self.bands[0][i].re + radius);
        }
        lo -= 1.0;
        hi += 1.0;
        bisect_all(n, lo, hi, |lambda| self.inertia_below(lambda))
    }
}
