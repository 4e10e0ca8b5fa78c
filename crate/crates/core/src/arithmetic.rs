//! Continued-fraction arithmetic of the frequency: expansion, convergents,
//! the Liouville exponent `β(α) = limsup ln q_{n+1} / q_n`, small-divisor
//! quality checks, and construction of frequencies with prescribed `β`.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};

use crate::numeric::torus_norm_kalpha;
use crate::{QpError, Result};

const LN2: f64 = std::f64::consts::LN_2;

/// Quotient streams larger than this many bits are refused by
/// [`make_liouville`]; beyond it the subsequent denominator is not even
/// representable as a big integer of reasonable size.
const MAX_Q_BITS: f64 = 1.0e6;

/// Trustworthiness cap for sampled irrationals: stop once the running
/// remainder has lost 40 of its 53 bits.
const REMAINDER_PRECISION_FLOOR: f64 = 1.1102230246251565e-16 * 1.0995116e12; // eps/2 · 2^40

/// A frequency in `(0, 1)`.
#[derive(Debug, Clone)]
pub struct Frequency {
    value: f64,
    kind: FrequencyKind,
}

#[derive(Debug, Clone)]
pub enum FrequencyKind {
    /// Double-precision sample of an irrational; quotients carry a
    /// trustworthiness cap.
    Sample,
    /// Exact rational `p/q` in lowest terms.
    Rational { p: u64, q: u64 },
    /// Symbolic quotient stream (golden, silver, Liouville constructions);
    /// bypasses the precision cap.
    Quotients(Vec<BigUint>),
}

impl Frequency {
    pub fn irrational(value: f64) -> Result<Self> {
        if !(value > 0.0 && value < 1.0) {
            return Err(QpError::Domain(format!(
                "frequency value {value} outside (0,1)"
            )));
        }
        Ok(Self {
            value,
            kind: FrequencyKind::Sample,
        })
    }

    pub fn rational(p: u64, q: u64) -> Result<Self> {
        if q == 0 || p == 0 || p >= q {
            return Err(QpError::Domain(format!("p/q = {p}/{q} outside (0,1)")));
        }
        let g = gcd(p, q);
        let (p, q) = (p / g, q / g);
        Ok(Self {
            value: p as f64 / q as f64,
            kind: FrequencyKind::Rational { p, q },
        })
    }

    /// `(√5 − 1)/2`, the golden mean, with its exact all-ones quotient stream.
    pub fn golden() -> Self {
        let quotients = vec![BigUint::one(); 64];
        Self {
            value: (5.0f64.sqrt() - 1.0) / 2.0,
            kind: FrequencyKind::Quotients(quotients),
        }
    }

    /// `√2 − 1`, the silver mean, quotient stream all twos.
    pub fn silver() -> Self {
        let quotients = vec![BigUint::from(2u32); 48];
        Self {
            value: 2.0f64.sqrt() - 1.0,
            kind: FrequencyKind::Quotients(quotients),
        }
    }

    /// Frequency defined by an explicit quotient stream.
    pub fn from_quotients(quotients: &[u64]) -> Result<Self> {
        if quotients.is_empty() || quotients.iter().any(|&a| a == 0) {
            return Err(QpError::Domain(
                "quotients must be a nonempty list of positive integers".into(),
            ));
        }
        let big: Vec<BigUint> = quotients.iter().map(|&a| BigUint::from(a)).collect();
        let value = fold_quotients_f64(&big, 0.0);
        Ok(Self {
            value,
            kind: FrequencyKind::Quotients(big),
        })
    }

    pub(crate) fn from_big_quotients(quotients: Vec<BigUint>) -> Self {
        let value = fold_quotients_f64(&quotients, 0.0);
        Self {
            value,
            kind: FrequencyKind::Quotients(quotients),
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn kind(&self) -> &FrequencyKind {
        &self.kind
    }

    pub fn as_rational(&self) -> Option<(u64, u64)> {
        match self.kind {
            FrequencyKind::Rational { p, q } => Some((p, q)),
            _ => None,
        }
    }

    /// `‖k·α‖_{R/Z}`, exact for rationals and in double-double precision
    /// otherwise.
    pub fn torus_norm_multiple(&self, k: i64) -> f64 {
        match self.kind {
            FrequencyKind::Rational { p, q } => {
                let km = (k.rem_euclid(q as i64)) as u64;
                let r = (km as u128 * p as u128 % q as u128) as u64;
                let d = r.min(q - r);
                d as f64 / q as f64
            }
            _ => torus_norm_kalpha(k, self.value),
        }
    }
}

/// Continued-fraction expansion with convergents `p_k/q_k`.
#[derive(Debug, Clone)]
pub struct CFExpansion {
    quotients: Vec<BigUint>,
    p: Vec<BigInt>,
    q: Vec<BigInt>,
    /// Number of leading quotients that are trustworthy.
    trustworthy: usize,
    /// Remainder after the last emitted quotient; zero for exact expansions.
    tail: f64,
}

impl CFExpansion {
    pub fn quotients(&self) -> &[BigUint] {
        &self.quotients
    }

    /// Number of stored convergent pairs `(p_k, q_k)`, `k = 0..len-1`.
    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn trustworthy_terms(&self) -> usize {
        self.trustworthy
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn convergent(&self, k: usize) -> (&BigInt, &BigInt) {
        (&self.p[k], &self.q[k])
    }

    pub fn denominators(&self) -> &[BigInt] {
        &self.q
    }

    pub fn q_f64(&self, k: usize) -> f64 {
        self.q[k].to_f64().unwrap_or(f64::INFINITY)
    }

    pub fn q_u64(&self, k: usize) -> Option<u64> {
        self.q[k].to_u64()
    }

    pub fn ln_q(&self, k: usize) -> f64 {
        ln_bigint(&self.q[k])
    }

    /// `ln q_{n+1} / q_n` for `n = 1 .. len-2`, indexed from that same `n`.
    pub fn ratios(&self) -> Vec<(usize, f64)> {
        (1..self.len().saturating_sub(1))
            .map(|n| (n, self.ln_q(n + 1) / self.q_f64(n)))
            .collect()
    }

    /// Exact integer check of `p_k q_{k-1} − p_{k-1} q_k = (−1)^{k-1}`.
    pub fn determinant_identity_holds(&self) -> bool {
        (1..self.len()).all(|k| {
            let det = &self.p[k] * &self.q[k - 1] - &self.p[k - 1] * &self.q[k];
            let expect = if (k - 1) % 2 == 0 {
                BigInt::one()
            } else {
                -BigInt::one()
            };
            det == expect
        })
    }

    /// Folds the quotients (and stored remainder) back into a real number.
    pub fn reconstruct(&self) -> f64 {
        fold_quotients_f64(&self.quotients, self.tail)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn fold_quotients_f64(quotients: &[BigUint], tail: f64) -> f64 {
    let mut x = tail;
    for a in quotients.iter().rev() {
        let af = a.to_f64().unwrap_or(f64::INFINITY);
        x = 1.0 / (af + x);
    }
    x
}

fn ln_bigint(x: &BigInt) -> f64 {
    let mag = x.magnitude();
    ln_biguint(mag)
}

fn ln_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 53 {
        return x.to_f64().map(f64::ln).unwrap_or(f64::NEG_INFINITY);
    }
    let shift = bits - 53;
    let top = (x >> shift).to_f64().unwrap_or(f64::INFINITY);
    top.ln() + shift as f64 * LN2
}

fn push_convergent(p: &mut Vec<BigInt>, q: &mut Vec<BigInt>, a: &BigUint) {
    let k = p.len();
    let ab = BigInt::from(a.clone());
    if k == 1 {
        p.push(BigInt::one());
        q.push(ab);
    } else {
        let pn = &ab * &p[k - 1] + &p[k - 2];
        let qn = &ab * &q[k - 1] + &q[k - 2];
        p.push(pn);
        q.push(qn);
    }
}

/// Continued-fraction expansion of `alpha`.
///
/// Rational inputs terminate at the exact finite expansion. Sampled
/// irrational inputs stop at `max_terms` or when floating precision is
/// exhausted, whichever comes first; the trustworthy prefix length is
/// reported on the expansion. Symbolic quotient streams are exact.
pub fn cf_expand(alpha: &Frequency, max_terms: usize) -> Result<CFExpansion> {
    if max_terms == 0 {
        return Err(QpError::Domain("max_terms must be positive".into()));
    }
    if !(alpha.value() > 0.0 && alpha.value() < 1.0) {
        return Err(QpError::Domain(format!(
            "frequency value {} outside (0,1)",
            alpha.value()
        )));
    }
    let mut p = vec![BigInt::zero()];
    let mut q = vec![BigInt::one()];
    match alpha.kind() {
        FrequencyKind::Rational { p: pr, q: qr } => {
            let mut quotients = Vec::new();
            let (mut num, mut den) = (*pr, *qr);
            while num != 0 && quotients.len() < max_terms {
                let a = den / num;
                let rem = den - a * num;
                quotients.push(BigUint::from(a));
                den = num;
                num = rem;
            }
            for a in &quotients {
                push_convergent(&mut p, &mut q, a);
            }
            let trustworthy = quotients.len();
            Ok(CFExpansion {
                quotients,
                p,
                q,
                trustworthy,
                tail: 0.0,
            })
        }
        FrequencyKind::Quotients(stream) => {
            let used = stream.len().min(max_terms);
            let quotients: Vec<BigUint> = stream[..used].to_vec();
            let tail = if used < stream.len() {
                fold_quotients_f64(&stream[used..], 0.0)
            } else {
                0.0
            };
            for a in &quotients {
                push_convergent(&mut p, &mut q, a);
            }
            Ok(CFExpansion {
                trustworthy: used,
                quotients,
                p,
                q,
                tail,
            })
        }
        FrequencyKind::Sample => {
            let mut quotients = Vec::new();
            let mut r = alpha.value();
            // Absolute error of the running remainder; each inversion
            // multiplies it by roughly 1/r².
            let mut err = f64::EPSILON * 0.5;
            let mut tail = r;
            while quotients.len() < max_terms {
                if r <= 2.0 * err || r <= 0.0 {
                    // Remainder indistinguishable from zero.
                    tail = 0.0;
                    break;
                }
                if err > REMAINDER_PRECISION_FLOOR {
                    break;
                }
                let inv = 1.0 / r;
                let a = inv.floor();
                err *= inv * inv;
                let next = inv - a;
                quotients.push(BigUint::from(a as u64));
                r = next;
                tail = r;
            }
            for a in &quotients {
                push_convergent(&mut p, &mut q, a);
            }
            let trustworthy = quotients.len();
            Ok(CFExpansion {
                quotients,
                p,
                q,
                trustworthy,
                tail,
            })
        }
    }
}

/// Finite-sample upper envelope of `β(α) = limsup ln q_{n+1}/q_n`.
#[derive(Debug, Clone)]
pub struct BetaEstimate {
    /// Max of `ln q_{n+1}/q_n` over the tail window of the trustworthy prefix.
    pub value: f64,
    /// Index `n` attaining the max.
    pub witness: usize,
    /// All sampled ratios `(n, ln q_{n+1}/q_n)`.
    pub ratios: Vec<(usize, f64)>,
}

/// Estimates `β(α)` from an expansion.
///
/// Early quotients say nothing about the limsup, so the estimator maxes the
/// ratio over the upper half of the trustworthy prefix; on the golden mean
/// the estimate decays to zero as more terms are supplied.
pub fn beta_estimate(cf: &CFExpansion) -> Result<BetaEstimate> {
    let usable = (cf.trustworthy_terms() + 1).min(cf.len());
    if usable < 3 {
        return Err(QpError::InsufficientData(format!(
            "need at least 3 convergents, have {usable}"
        )));
    }
    let ratios: Vec<(usize, f64)> = (1..usable - 1)
        .map(|n| (n, cf.ln_q(n + 1) / cf.q_f64(n)))
        .collect();
    let start = ((usable - 1) / 2).max(1);
    let (witness, value) = ratios
        .iter()
        .filter(|(n, _)| *n >= start)
        .fold((start, f64::NEG_INFINITY), |acc, &(n, r)| {
            if r > acc.1 {
                (n, r)
            } else {
                acc
            }
        });
    Ok(BetaEstimate {
        value,
        witness,
        ratios,
    })
}

/// Outcome of `qn_quality_check`.
#[derive(Debug, Clone)]
pub struct QnQualityReport {
    pub n: usize,
    /// `‖q_n α‖`.
    pub dist: f64,
    pub lower: f64,
    pub upper: f64,
    pub two_sided_ok: bool,
    /// Worst slack among the two-sided inequalities.
    pub margin: f64,
    pub naaa1_applicable: bool,
    pub naaa1_ok: bool,
    /// `(k, ‖kα‖ − 1/(4 q_n))` at the tightest scanned `k`.
    pub naaa1_worst: Option<(u64, f64)>,
    pub scanned: u64,
}

/// Verifies the two-sided bound `1/(2q_{n+1}) ≤ ‖q_n α‖ ≤ 1/q_{n+1}` and,
/// when `q_{n+1} > 100 q_n`, the lower bound `‖kα‖ ≥ 1/(4q_n)` for
/// `0 < k < q_{n+1}/6` away from multiples of `q_n`, by direct evaluation.
pub fn qn_quality_check(alpha: &Frequency, cf: &CFExpansion, n: usize) -> Result<QnQualityReport> {
    let usable = (cf.trustworthy_terms() + 1).min(cf.len());
    if n + 1 >= usable {
        return Err(QpError::Index {
            index: n,
            limit: usable.saturating_sub(2),
        });
    }
    let qn = cf.q_u64(n).ok_or_else(|| {
        QpError::Domain("q_n exceeds the exactly scannable integer range".into())
    })?;
    let qn1 = cf.q_u64(n + 1).ok_or_else(|| {
        QpError::Domain("q_{n+1} exceeds the exactly scannable integer range".into())
    })?;
    if qn1 / 6 > 60_000_000 {
        return Err(QpError::Domain(format!(
            "scan over {} divisors is beyond desk scale",
            qn1 / 6
        )));
    }
    let dist = alpha.torus_norm_multiple(qn as i64);
    let lower = 1.0 / (2.0 * qn1 as f64);
    let upper = 1.0 / qn1 as f64;
    let margin = (dist - lower).min(upper - dist);
    let two_sided_ok = margin >= -1e-15;

    let naaa1_applicable = qn1 > 100 * qn;
    let mut naaa1_ok = true;
    let mut naaa1_worst: Option<(u64, f64)> = None;
    let mut scanned = 0u64;
    if naaa1_applicable {
        let bound = 1.0 / (4.0 * qn as f64);
        let kmax = qn1 / 6;
        for k in 1..kmax {
            if k % qn == 0 {
                continue;
            }
            scanned += 1;
            let d = alpha.torus_norm_multiple(k as i64);
            let slack = d - bound;
            if naaa1_worst.map_or(true, |(_, w)| slack < w) {
                naaa1_worst = Some((k, slack));
            }
            if slack < 0.0 {
                naaa1_ok = false;
            }
        }
    }
    Ok(QnQualityReport {
        n,
        dist,
        lower,
        upper,
        two_sided_ok,
        margin,
        naaa1_applicable,
        naaa1_ok,
        naaa1_worst,
        scanned,
    })
}

/// Result of [`make_liouville`].
#[derive(Debug, Clone)]
pub struct LiouvilleFrequency {
    pub frequency: Frequency,
    pub cf: CFExpansion,
    /// Realized `(n, ln q_{n+1}/q_n)` recomputed from the emitted quotients.
    pub realized_ratios: Vec<(usize, f64)>,
}

/// Builds a frequency with `ln q_{n+1}/q_n ≈ beta_target` by prescribing
/// `a_{n+1} = ⌈exp(β q_n)/q_n⌉` for every term past the seed.
///
/// The seed quotient `a_1` is not pinned down by the prescription, but it
/// controls how soon the ratios settle into the target band and how many
/// terms fit before the doubly exponential growth leaves the representable
/// range. We scan a short geometric list of seeds and keep the first one
/// whose realized ratios sit within `±45%` of the target from `n = 3` on.
/// When no seed yields the requested number of terms, a size error reports
/// the largest count any seed achieved.
pub fn make_liouville(beta_target: f64, terms: usize) -> Result<LiouvilleFrequency> {
    if !(beta_target > 0.0) {
        return Err(QpError::Domain(format!(
            "beta_target {beta_target} must be positive"
        )));
    }
    if terms == 0 {
        return Err(QpError::Domain("terms must be positive".into()));
    }
    let mut largest_safe = 0usize;
    let mut fallback: Option<Vec<BigUint>> = None;
    let mut seed = 2u64;
    let seed_cap = ((1000.0 / beta_target).ceil() as u64).max(4);
    while seed <= seed_cap {
        match try_build_liouville(seed, beta_target, terms) {
            Ok(quotients) => {
                let freq = Frequency::from_big_quotients(quotients.clone());
                let cf = cf_expand(&freq, terms)?;
                let in_band = cf
                    .ratios()
                    .iter()
                    .filter(|(n, _)| *n >= 3)
                    .all(|(_, r)| (r - beta_target).abs() <= 0.45 * beta_target);
                if in_band {
                    let realized_ratios = cf.ratios();
                    return Ok(LiouvilleFrequency {
                        frequency: freq,
                        cf,
                        realized_ratios,
                    });
                }
                largest_safe = largest_safe.max(terms);
                fallback.get_or_insert(quotients);
            }
            Err(reached) => largest_safe = largest_safe.max(reached),
        }
        // Geometric sweep, roughly √2 steps.
        seed = (seed + 1).max(seed * 3 / 2);
    }
    if let Some(quotients) = fallback {
        // All requested terms exist but the early ratios never settled;
        // ship the best stream rather than failing.
        let freq = Frequency::from_big_quotients(quotients);
        let cf = cf_expand(&freq, terms)?;
        let realized_ratios = cf.ratios();
        return Ok(LiouvilleFrequency {
            frequency: freq,
            cf,
            realized_ratios,
        });
    }
    Err(QpError::Size { largest_safe })
}

/// Emits `terms` quotients from seed `a_1`, or the achievable count as `Err`.
fn try_build_liouville(
    a1: u64,
    beta: f64,
    terms: usize,
) -> std::result::Result<Vec<BigUint>, usize> {
    let mut quotients: Vec<BigUint> = vec![BigUint::from(a1)];
    let mut q_prev = BigInt::one(); // q_0
    let mut q_cur = BigInt::from(a1); // q_1
    while quotients.len() < terms {
        let qe = q_cur.to_f64().unwrap_or(f64::INFINITY);
        let next_bits = beta * qe / LN2;
        if !next_bits.is_finite() || next_bits > MAX_Q_BITS {
            return Err(quotients.len());
        }
        let ln_a = beta * qe - qe.ln();
        let a: BigUint = if ln_a <= 0.0 {
            BigUint::one()
        } else if ln_a < 700.0 {
            let af = ln_a.exp();
            if af < 9.0e15 {
                BigUint::from(af.ceil() as u64)
            } else {
                big_from_log2(ln_a / LN2)
            }
        } else {
            big_from_log2(ln_a / LN2)
        };
        let a = if a.is_zero() { BigUint::one() } else { a };
        let q_next = BigInt::from(a.clone()) * &q_cur + &q_prev;
        quotients.push(a);
        q_prev = q_cur;
        q_cur = q_next;
    }
    Ok(quotients)
}

/// Big integer approximately `2^log2` (53-bit mantissa).
fn big_from_log2(log2: f64) -> BigUint {
    let shift = log2.floor();
    let mant = (log2 - shift).exp2();
    if shift <= 52.0 {
        return BigUint::from((mant * shift.exp2()).ceil() as u64);
    }
    let m53 = (mant * (1u64 << 52) as f64).round() as u64;
    BigUint::from(m53) << ((shift as u64) - 52)
}
