//! JSON run configuration: strict schema (unknown keys rejected), defaults
//! documented on each knob, and a resolved echo written next to the outputs.

use serde::{Deserialize, Serialize};

use qplab_core::arithmetic::{make_liouville, Frequency};
use qplab_core::cocycles::TrigPolynomial;
use qplab_core::cohomology::AnalyticObservable;
use qplab_core::C64;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialSpec,
    pub frequency: FrequencySpec,

    /// Cocycle volume per phase.
    #[serde(default = "defaults::n")]
    pub n: usize,
    /// Phase-lattice size.
    #[serde(default = "defaults::phases")]
    pub phases: usize,
    /// Truncation size for spectra and the IDS.
    #[serde(default = "defaults::trunc_size")]
    pub trunc_size: usize,
    /// Governs only the phase-lattice offset.
    #[serde(default)]
    pub seed: u64,

    /// Top of the ε grid for profiles.
    #[serde(default = "defaults::eps_max")]
    pub eps_max: f64,
    #[serde(default = "defaults::eps_points")]
    pub eps_points: usize,
    #[serde(default = "defaults::slope_tol")]
    pub slope_tol: f64,
    #[serde(default = "defaults::max_slope")]
    pub max_slope: usize,

    #[serde(default)]
    pub energies: EnergySpec,

    /// Butterfly sweep: all reduced p/q with q up to this.
    #[serde(default = "defaults::q_max")]
    pub q_max: u64,
    #[serde(default = "defaults::bloch_phases")]
    pub bloch_phases: usize,

    #[serde(default = "defaults::k_max")]
    pub k_max: i64,
    #[serde(default = "defaults::min_gap")]
    pub min_gap: f64,
    #[serde(default = "defaults::label_tol")]
    pub label_tol: f64,

    #[serde(default = "defaults::im_z")]
    pub im_z: f64,
    #[serde(default = "defaults::d_eps")]
    pub d_eps: f64,
    #[serde(default = "defaults::deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "defaults::n_tail")]
    pub n_tail: usize,
    #[serde(default)]
    pub kotani_task: KotaniTask,

    /// Continued-fraction depth for the cohomology solver.
    #[serde(default = "defaults::cf_terms")]
    pub cf_terms: usize,
    /// Convergent pair index; all valid pairs are reported when absent.
    #[serde(default)]
    pub k_index: Option<usize>,
    #[serde(default)]
    pub observable: ObservableSpec,
}

mod defaults {
    pub fn n() -> usize {
        4000
    }
    pub fn phases() -> usize {
        16
    }
    pub fn trunc_size() -> usize {
        400
    }
    pub fn eps_max() -> f64 {
        0.5
    }
    pub fn eps_points() -> usize {
        16
    }
    pub fn slope_tol() -> f64 {
        0.1
    }
    pub fn max_slope() -> usize {
        3
    }
    pub fn q_max() -> u64 {
        30
    }
    pub fn bloch_phases() -> usize {
        8
    }
    pub fn k_max() -> i64 {
        30
    }
    pub fn min_gap() -> f64 {
        1e-3
    }
    pub fn label_tol() -> f64 {
        5e-3
    }
    pub fn im_z() -> f64 {
        0.1
    }
    pub fn d_eps() -> f64 {
        0.01
    }
    pub fn deltas() -> Vec<f64> {
        vec![1e-3]
    }
    pub fn n_tail() -> usize {
        400
    }
    pub fn cf_terms() -> usize {
        30
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Free,
    Amo {
        lambda: f64,
        #[serde(default)]
        strip: Option<f64>,
    },
    EvenPair {
        a: f64,
        b: f64,
        #[serde(default)]
        strip: Option<f64>,
    },
    /// Explicit Fourier coefficients `[re, im]` indexed `k = -d..=d`.
    Fourier { coeffs: Vec<[f64; 2]>, strip: f64 },
}

impl PotentialSpec {
    pub fn build(&self) -> Result<TrigPolynomial, String> {
        match self {
            PotentialSpec::Free => Ok(TrigPolynomial::zero()),
            PotentialSpec::Amo { lambda, strip } => {
                let v = TrigPolynomial::cosine(*lambda);
                Ok(match strip {
                    Some(h) => v.with_strip(*h),
                    None => v,
                })
            }
            PotentialSpec::EvenPair { a, b, strip } => {
                let v = TrigPolynomial::even_pair(*a, *b)
                    .map_err(|e| format!("potential: {e}"))?;
                Ok(match strip {
                    Some(h) => v.with_strip(*h),
                    None => v,
                })
            }
            PotentialSpec::Fourier { coeffs, strip } => {
                let c: Vec<C64> = coeffs.iter().map(|&[re, im]| C64::new(re, im)).collect();
                TrigPolynomial::from_coeffs(c, *strip).map_err(|e| format!("potential: {e}"))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FrequencySpec {
    Golden,
    Silver,
    Value { value: f64 },
    Rational { p: u64, q: u64 },
    Liouville { beta: f64, terms: usize },
    Quotients { quotients: Vec<u64> },
}

impl FrequencySpec {
    pub fn build(&self) -> Result<Frequency, String> {
        match self {
            FrequencySpec::Golden => Ok(Frequency::golden()),
            FrequencySpec::Silver => Ok(Frequency::silver()),
            FrequencySpec::Value { value } => {
                Frequency::irrational(*value).map_err(|e| format!("frequency: {e}"))
            }
            FrequencySpec::Rational { p, q } => {
                Frequency::rational(*p, *q).map_err(|e| format!("frequency: {e}"))
            }
            FrequencySpec::Liouville { beta, terms } => Ok(make_liouville(*beta, *terms)
                .map_err(|e| format!("frequency: {e}"))?
                .frequency),
            FrequencySpec::Quotients { quotients } => {
                Frequency::from_quotients(quotients).map_err(|e| format!("frequency: {e}"))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnergySpec {
    /// Quantile samples of the trimmed truncation spectrum.
    Spectrum { count: usize },
    List { values: Vec<f64> },
    Linspace { min: f64, max: f64, count: usize },
}

impl Default for EnergySpec {
    fn default() -> Self {
        EnergySpec::Spectrum { count: 20 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KotaniTask {
    #[default]
    Mfunctions,
    JohnsonMoser,
    Reflectionless,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableSpec {
    Cosine { amplitude: f64, strip: f64 },
    Geometric { ratio: f64, strip: f64 },
    BoundaryDecay { strip: f64 },
}

impl Default for ObservableSpec {
    fn default() -> Self {
        ObservableSpec::Cosine {
            amplitude: 1.0,
            strip: 1.0,
        }
    }
}

impl ObservableSpec {
    pub fn build(&self) -> Result<AnalyticObservable, String> {
        match self {
            ObservableSpec::Cosine { amplitude, strip } => {
                Ok(AnalyticObservable::cosine(*amplitude, *strip))
            }
            ObservableSpec::Geometric { ratio, strip } => {
                AnalyticObservable::geometric(*ratio, *strip)
                    .map_err(|e| format!("observable: {e}"))
            }
            ObservableSpec::BoundaryDecay { strip } => {
                AnalyticObservable::strip_boundary_decay(*strip)
                    .map_err(|e| format!("observable: {e}"))
            }
        }
    }
}

/// Range checks that serde cannot express; returns the offending key path.
pub fn validate(config: &RunConfig) -> Result<(), String> {
    let v = config.potential.build()?;
    config.frequency.build()?;
    if config.n < 100 {
        return Err("n: must be at least 100".into());
    }
    if config.phases == 0 || config.phases > 4096 {
        return Err("phases: must be in 1..=4096".into());
    }
    if config.trunc_size < 50 || config.trunc_size > 5000 {
        return Err("trunc_size: must be in 50..=5000".into());
    }
    if config.eps_points < 8 || config.eps_points > 256 {
        return Err("eps_points: must be in 8..=256".into());
    }
    if !(config.eps_max > 0.0) || config.eps_max >= v.strip() {
        return Err(format!(
            "eps_max: {} not inside the strip_width {} of the potential",
            config.eps_max,
            v.strip()
        ));
    }
    if !(config.slope_tol > 0.0 && config.slope_tol < 0.5) {
        return Err("slope_tol: must be in (0, 0.5)".into());
    }
    if config.q_max == 0 || config.q_max > 2000 {
        return Err("q_max: must be in 1..=2000".into());
    }
    if config.k_max < 0 {
        return Err("k_max: must be nonnegative".into());
    }
    if config.im_z <= 0.0 {
        return Err("im_z: must be positive".into());
    }
    if config.d_eps <= 0.0 {
        return Err("d_eps: must be positive".into());
    }
    if config.deltas.is_empty() || config.deltas.iter().any(|&d| d <= 0.0) {
        return Err("deltas: must be a nonempty list of positive values".into());
    }
    if config.n_tail < 40 {
        return Err("n_tail: must be at least 40".into());
    }
    if config.cf_terms < 2 {
        return Err("cf_terms: must be at least 2".into());
    }
    Ok(())
}
