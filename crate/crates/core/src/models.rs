//! Concrete correlation models and their reduction to tables and measures.

use serde::{Deserialize, Serialize};

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};
use crate::spaces::{Angle, BellMeasure, BellSpace, LambdaSupport, Settings, Space1Outcome, Space2Outcome, Space3Outcome, SpaceId};
use crate::table::{CorrelationTable, ExactTable, Provenance, PAIRS};

/// Hypotheses a model commits to. They are recorded, never inferred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisFlags {
    pub locality: bool,
    pub lambda_independence: bool,
}

impl HypothesisFlags {
    pub const BOTH: HypothesisFlags = HypothesisFlags { locality: true, lambda_independence: true };
}

/// Local hidden-variable model with finite λ support.
///
/// `a_response[i][k]` is `P(A=1 | α_i, λ_k)`, likewise for B.
#[derive(Debug, Clone, PartialEq)]
pub struct LhvModel {
    pub settings: Settings,
    pub lambda: LambdaSupport,
    pub a_response: [Vec<Rational>; 2],
    pub b_response: [Vec<Rational>; 2],
    pub flags: HypothesisFlags,
    /// Hidden polarization angle (degrees) per λ, for photon models.
    pub polarization: Option<Vec<f64>>,
}

impl LhvModel {
    pub fn new(
        settings: Settings,
        lambda: LambdaSupport,
        a_response: [Vec<Rational>; 2],
        b_response: [Vec<Rational>; 2],
        flags: HypothesisFlags,
    ) -> Result<Self> {
        settings.validate()?;
        let n = lambda.len();
        for r in a_response.iter().chain(b_response.iter()) {
            if r.len() != n {
                return Err(Error::InvalidInput(format!("response has {} entries for {} λ values", r.len(), n)));
            }
            if let Some(bad) = r.iter().find(|p| !rational::in_unit_interval(p)) {
                return Err(Error::DomainError(format!("response {} outside [0,1]", rational::format(bad))));
            }
        }
        Ok(LhvModel { settings, lambda, a_response, b_response, flags, polarization: None })
    }

    pub fn prior(&self) -> &[Rational] {
        &self.lambda.prior
    }

    fn response(&self, side: usize, setting: usize, k: usize, value: bool) -> Rational {
        let p = if side == 0 { &self.a_response[setting][k] } else { &self.b_response[setting][k] };
        if value {
            p.clone()
        } else {
            Rational::one() - p
        }
    }

    /// `P(λ) Π P(X_s = x | s, λ)` over the four counterfactual slots.
    fn counterfactual_weight(&self, a: [bool; 2], b: [bool; 2], k: usize) -> Rational {
        &self.lambda.prior[k]
            * self.response(0, 0, k, a[0])
            * self.response(0, 1, k, a[1])
            * self.response(1, 0, k, b[0])
            * self.response(1, 1, k, b[1])
    }

    /// The λ-averaged table `P(A=1,B=1|α,β) = Σ_λ P(A=1|α,λ) P(B=1|β,λ) P(λ)`.
    pub fn table(&self) -> ExactTable {
        let prior = self.prior();
        let avg = |f: &dyn Fn(usize) -> Rational| -> Rational { (0..prior.len()).map(|k| &prior[k] * f(k)).sum() };
        CorrelationTable {
            settings: self.settings,
            p11: [0, 1].map(|i| [0, 1].map(|j| avg(&|k| &self.a_response[i][k] * &self.b_response[j][k]))),
            pa: [0, 1].map(|i| avg(&|k| self.a_response[i][k].clone())),
            pb: [0, 1].map(|j| avg(&|k| self.b_response[j][k].clone())),
            provenance: Provenance::Analytic,
            stderr: None,
        }
    }

    /// Space-1 measure `P(α,β) P(λ) P(A|α,λ) P(B|β,λ)`.
    pub fn to_space1(&self, settings_dist: &SettingDistribution) -> Result<BellMeasure> {
        let space = BellSpace::build(SpaceId::One, self.settings, self.lambda.clone())?;
        let weights = (0..space.len())
            .map(|idx| {
                let o = space.outcome1(idx);
                &settings_dist.weights[o.alpha][o.beta]
                    * &self.lambda.prior[o.lambda]
                    * self.response(0, o.alpha, o.lambda, o.a)
                    * self.response(1, o.beta, o.lambda, o.b)
            })
            .collect();
        BellMeasure::new(space, weights)
    }

    /// Space-2 measure with counterfactual values independent given λ.
    pub fn to_space2(&self) -> Result<BellMeasure> {
        let space = BellSpace::build(SpaceId::Two, self.settings, self.lambda.clone())?;
        let weights = (0..space.len())
            .map(|idx| {
                let Space2Outcome { a, b, lambda } = space.outcome2(idx);
                self.counterfactual_weight(a, b, lambda)
            })
            .collect();
        BellMeasure::new(space, weights)
    }

    /// Space-3 measure with settings drawn independently of everything else.
    pub fn to_space3(&self, settings_dist: &SettingDistribution) -> Result<BellMeasure> {
        let space = BellSpace::build(SpaceId::Three, self.settings, self.lambda.clone())?;
        let weights = (0..space.len())
            .map(|idx| {
                let Space3Outcome { a, alpha, b, beta, lambda } = space.outcome3(idx);
                &settings_dist.weights[alpha][beta] * self.counterfactual_weight(a, b, lambda)
            })
            .collect();
        BellMeasure::new(space, weights)
    }

    /// Deterministic-strategy decomposition, summed over λ.
    pub fn to_mixture(&self) -> DeterministicMixture {
        let mut weights: [Rational; 16] = std::array::from_fn(|_| Rational::zero());
        for (s, w) in weights.iter_mut().enumerate() {
            let [a0, a1, b0, b1] = DeterministicMixture::assignment(s);
            *w = (0..self.lambda.len()).map(|k| self.counterfactual_weight([a0, a1], [b0, b1], k)).sum();
        }
        DeterministicMixture { settings: self.settings, weights }
    }
}

/// Whether `cos²(a - λ) > 1/2` for `λ = 180° k / n`, decided in exact
/// integer arithmetic: the difference must lie strictly within 45° of a
/// multiple of 180°.
fn threshold_response(a: Angle, k: usize, n: usize) -> bool {
    let n = n as i128;
    let period = 180_000 * n;
    let d = (a.millidegrees() as i128 * n - 180_000 * k as i128).rem_euclid(period);
    d < 45_000 * n || d > 135_000 * n
}

/// Classical polarization model: λ is a hidden polarization angle uniform on
/// an `n`-point grid over `[0°, 180°)`, and each side outputs 1 exactly when
/// `cos²(setting - λ) > 1/2`.
pub fn threshold_photon_lhv(n: usize, settings: Settings) -> Result<LhvModel> {
    if n == 0 {
        return Err(Error::InvalidInput("threshold model needs at least one λ value".into()));
    }
    let lambda = LambdaSupport::new(
        (0..n).map(|k| format!("{}", 180.0 * k as f64 / n as f64)).collect(),
        vec![rational::ratio(1, n as i64); n],
    )?;
    let resp = |angle: Angle| -> Vec<Rational> {
        (0..n).map(|k| if threshold_response(angle, k, n) { rational::one() } else { rational::zero() }).collect()
    };
    let mut m = LhvModel::new(
        settings,
        lambda,
        [resp(settings.alice[0]), resp(settings.alice[1])],
        [resp(settings.bob[0]), resp(settings.bob[1])],
        HypothesisFlags::BOTH,
    )?;
    m.polarization = Some((0..n).map(|k| 180.0 * k as f64 / n as f64).collect());
    Ok(m)
}

/// Joint distribution of the setting choices `(α_i, β_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SettingDistribution {
    pub weights: [[Rational; 2]; 2],
}

impl SettingDistribution {
    pub fn new(weights: [[Rational; 2]; 2]) -> Result<Self> {
        if weights.iter().flatten().any(|w| !w.is_positive()) {
            return Err(Error::InsufficientCoverage("every setting pair needs positive probability".into()));
        }
        if !weights.iter().flatten().sum::<Rational>().is_one() {
            return Err(Error::NotAMeasure("setting distribution does not sum to 1".into()));
        }
        Ok(SettingDistribution { weights })
    }

    pub fn uniform() -> Self {
        let q = rational::ratio(1, 4);
        SettingDistribution { weights: [[q.clone(), q.clone()], [q.clone(), q]] }
    }
}

/// Mixture of the 16 deterministic assignments `(A_α, A_α', B_β, B_β')`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicMixture {
    pub settings: Settings,
    pub weights: [Rational; 16],
}

impl DeterministicMixture {
    pub fn new(settings: Settings, weights: [Rational; 16]) -> Result<Self> {
        if let Some((k, w)) = weights.iter().enumerate().find(|(_, w)| w.is_negative()) {
            return Err(Error::NotAMeasure(format!(
                "assignment {k} has negative weight {}",
                rational::format(w)
            )));
        }
        if !weights.iter().sum::<Rational>().is_one() {
            return Err(Error::NotAMeasure("mixture weights do not sum to 1".into()));
        }
        Ok(DeterministicMixture { settings, weights })
    }

    /// Index `s` in lexicographic order, `A_α` most significant.
    pub fn assignment(s: usize) -> [bool; 4] {
        [s >> 3 & 1 == 1, s >> 2 & 1 == 1, s >> 1 & 1 == 1, s & 1 == 1]
    }

    pub fn index(a: [bool; 2], b: [bool; 2]) -> usize {
        (a[0] as usize) << 3 | (a[1] as usize) << 2 | (b[0] as usize) << 1 | b[1] as usize
    }

    /// Measure on space 2 with a single (inert) λ value.
    pub fn to_space2(&self) -> Result<BellMeasure> {
        let space = BellSpace::build(SpaceId::Two, self.settings, LambdaSupport::uniform(1)?)?;
        BellMeasure::new(space, self.weights.to_vec())
    }

    pub fn table(&self) -> ExactTable {
        table_from_assignments(self.settings, &self.weights)
    }
}

/// Marginal table of any signed weighting of the 16 assignments.
pub fn table_from_assignments(settings: Settings, weights: &[Rational; 16]) -> ExactTable {
    let sum = |pred: &dyn Fn([bool; 4]) -> bool| -> Rational {
        (0..16).filter(|&s| pred(DeterministicMixture::assignment(s))).map(|s| &weights[s]).sum()
    };
    CorrelationTable {
        settings,
        p11: [0, 1].map(|i| [0, 1].map(|j| sum(&|x| x[i] && x[2 + j]))),
        pa: [0, 1].map(|i| sum(&|x| x[i])),
        pb: [0, 1].map(|j| sum(&|x| x[2 + j])),
        provenance: Provenance::Analytic,
        stderr: None,
    }
}

pub fn mixture_to_space2(d: &DeterministicMixture) -> Result<BellMeasure> {
    d.to_space2()
}

/// Maximally entangled polarization pair measured at the given angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumPairModel {
    pub settings: Settings,
}

/// `P(A=1, B=1) = ½ cos²(a - b)`.
pub fn quantum_p11(a: Angle, b: Angle) -> f64 {
    let c = (a.radians() - b.radians()).cos();
    0.5 * c * c
}

impl QuantumPairModel {
    pub fn table(&self) -> CorrelationTable<f64> {
        let s = self.settings;
        CorrelationTable {
            settings: s,
            p11: [0, 1].map(|i| [0, 1].map(|j| quantum_p11(s.alice[i], s.bob[j]))),
            pa: [0.5, 0.5],
            pb: [0.5, 0.5],
            provenance: Provenance::Analytic,
            stderr: None,
        }
    }

    /// Correlator `E(a, b) = cos 2(a - b)`.
    pub fn correlators(&self) -> [[f64; 2]; 2] {
        let s = self.settings;
        [0, 1].map(|i| [0, 1].map(|j| (2.0 * (s.alice[i].radians() - s.bob[j].radians())).cos()))
    }
}

pub fn quantum_table(q: &QuantumPairModel) -> CorrelationTable<f64> {
    q.table()
}

/// Popescu–Rohrlich box: perfectly correlated on three pairs,
/// anticorrelated on `(α', β')`, all marginals ½.
pub fn pr_table(settings: Settings) -> ExactTable {
    let h = rational::ratio(1, 2);
    CorrelationTable {
        settings,
        p11: [[h.clone(), h.clone()], [h.clone(), rational::zero()]],
        pa: [h.clone(), h.clone()],
        pb: [h.clone(), h],
        provenance: Provenance::Analytic,
        stderr: None,
    }
}

/// Correlation table read off a measure on any of the three spaces:
/// conditional on the settings in spaces 1 and 3, joint in space 2.
pub fn table_of(m: &BellMeasure) -> Result<ExactTable> {
    let space = m.space();
    let settings = *space.settings();
    let t = match space.id() {
        SpaceId::Two => {
            let joint = |pred: &dyn Fn(Space2Outcome) -> bool| m.probability(&m.event(|k| pred(space.outcome2(k))));
            CorrelationTable {
                settings,
                p11: [
                    [joint(&|o| o.a[0] && o.b[0])?, joint(&|o| o.a[0] && o.b[1])?],
                    [joint(&|o| o.a[1] && o.b[0])?, joint(&|o| o.a[1] && o.b[1])?],
                ],
                pa: [joint(&|o| o.a[0])?, joint(&|o| o.a[1])?],
                pb: [joint(&|o| o.b[0])?, joint(&|o| o.b[1])?],
                provenance: Provenance::Analytic,
                stderr: None,
            }
        }
        SpaceId::Three => return table_of(&m.project(SpaceId::One)?),
        SpaceId::One => {
            let cond = |pred: &dyn Fn(Space1Outcome) -> bool, given: &dyn Fn(Space1Outcome) -> bool| {
                m.measure().conditional(&m.event(|k| pred(space.outcome1(k))), &m.event(|k| given(space.outcome1(k))))
            };
            let mut p11: [[Rational; 2]; 2] = Default::default();
            for (i, j) in PAIRS {
                p11[i][j] = cond(&|o| o.a && o.b, &|o| o.alpha == i && o.beta == j)?;
            }
            CorrelationTable {
                settings,
                p11,
                pa: [0, 1].map(|i| cond(&|o| o.a, &|o| o.alpha == i)).into_iter().collect::<Result<Vec<_>>>()?.try_into().expect("two"),
                pb: [0, 1].map(|j| cond(&|o| o.b, &|o| o.beta == j)).into_iter().collect::<Result<Vec<_>>>()?.try_into().expect("two"),
                provenance: Provenance::Analytic,
                stderr: None,
            }
        }
    };
    t.validate()?;
    Ok(t)
}

/// Best grid point of the quantum 0/1 CHSH value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleScan {
    pub step: Angle,
    pub points: usize,
    pub max: f64,
    pub argmax: Settings,
}

/// Sweeps `(α', β, β')` over multiples of `step` in `[0°, 180°)` with
/// `α = 0°` (the quantum law depends only on angle differences and has
/// period 180°), keeping the first grid point that attains the maximum.
pub fn scan_quantum_angles(step: Angle) -> Result<AngleScan> {
    let s = step.millidegrees();
    if s <= 0 || 360_000 % s != 0 {
        return Err(Error::InvalidInput(format!("step {step}° must be positive and divide 360")));
    }
    let grid: Vec<Angle> = (0..).map(|k| k * s).take_while(|&m| m < 180_000).map(Angle::from_millidegrees).collect();
    let zero = Angle::from_degrees(0);
    let mut best: Option<(f64, Settings)> = None;
    let mut points = 0;
    for &ap in &grid {
        for &b in &grid {
            for &bp in &grid {
                let Ok(settings) = Settings::new(zero, ap, b, bp) else { continue };
                points += 1;
                let t = QuantumPairModel { settings }.table();
                let v = t.p11[0][0] + t.p11[1][0] + t.p11[0][1] - t.p11[1][1] - t.pa[0] - t.pb[0];
                if best.as_ref().is_none_or(|(m, _)| v > m + crate::table::ANALYTIC_TOLERANCE) {
                    best = Some((v, settings));
                }
            }
        }
    }
    let (max, argmax) = best.ok_or_else(|| Error::InvalidInput(format!("step {step}° leaves no distinct settings")))?;
    Ok(AngleScan { step, points, max, argmax })
}

/// A resolved model ready for evaluation or simulation.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Model {
    Lhv(LhvModel),
    Mixture(DeterministicMixture),
    Quantum(QuantumPairModel),
    PrBox(Settings),
}

impl Model {
    pub fn settings(&self) -> &Settings {
        match self {
            Model::Lhv(m) => &m.settings,
            Model::Mixture(m) => &m.settings,
            Model::Quantum(m) => &m.settings,
            Model::PrBox(s) => s,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Model::Lhv(_) => "lhv",
            Model::Mixture(_) => "mixture",
            Model::Quantum(_) => "quantum",
            Model::PrBox(_) => "prbox",
        }
    }

    /// Exact table where the model admits one.
    pub fn exact_table(&self) -> Option<ExactTable> {
        match self {
            Model::Lhv(m) => Some(m.table()),
            Model::Mixture(m) => Some(m.table()),
            Model::PrBox(s) => Some(pr_table(*s)),
            Model::Quantum(_) => None,
        }
    }

    pub fn table_f64(&self) -> CorrelationTable<f64> {
        match self {
            Model::Quantum(q) => q.table(),
            other => other.exact_table().expect("exact model").to_f64(),
        }
    }
}

/// JSON model description, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Lhv {
        #[serde(default)]
        settings: Settings,
        /// Builds the threshold photon model on this many λ values.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        threshold_grid: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<LambdaSupport>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a_response: Option<[Vec<String>; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b_response: Option<[Vec<String>; 2]>,
        locality: bool,
        lambda_independence: bool,
    },
    Mixture {
        #[serde(default)]
        settings: Settings,
        weights: Vec<String>,
    },
    Quantum {
        #[serde(default = "Settings::tsirelson")]
        settings: Settings,
    },
    Prbox {
        #[serde(default)]
        settings: Settings,
    },
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<Model> {
        match self {
            ModelSpec::Lhv { settings, threshold_grid, lambda, a_response, b_response, locality, lambda_independence } => {
                let flags = HypothesisFlags { locality: *locality, lambda_independence: *lambda_independence };
                if let Some(n) = threshold_grid {
                    let mut m = threshold_photon_lhv(*n, *settings)?;
                    m.flags = flags;
                    return Ok(Model::Lhv(m));
                }
                let missing = || Error::InvalidInput("lhv model needs `threshold_grid` or `lambda` with responses".into());
                let lambda = lambda.clone().ok_or_else(missing)?;
                let lambda = LambdaSupport::new(lambda.labels, lambda.prior)?;
                let parse = |v: &[Vec<String>; 2]| -> Result<[Vec<Rational>; 2]> {
                    let p = |row: &Vec<String>| row.iter().map(|s| rational::parse(s)).collect::<Result<Vec<_>>>();
                    Ok([p(&v[0])?, p(&v[1])?])
                };
                let a = parse(a_response.as_ref().ok_or_else(missing)?)?;
                let b = parse(b_response.as_ref().ok_or_else(missing)?)?;
                Ok(Model::Lhv(LhvModel::new(*settings, lambda, a, b, flags)?))
            }
            ModelSpec::Mixture { settings, weights } => {
                if weights.len() != 16 {
                    return Err(Error::InvalidInput(format!("mixture needs 16 weights, got {}", weights.len())));
                }
                let w: Vec<Rational> = weights.iter().map(|s| rational::parse(s)).collect::<Result<_>>()?;
                let w: [Rational; 16] = w.try_into().expect("16 weights");
                Ok(Model::Mixture(DeterministicMixture::new(*settings, w)?))
            }
            ModelSpec::Quantum { settings } => {
                settings.validate()?;
                Ok(Model::Quantum(QuantumPairModel { settings: *settings }))
            }
            ModelSpec::Prbox { settings } => {
                settings.validate()?;
                Ok(Model::PrBox(*settings))
            }
        }
    }
}
