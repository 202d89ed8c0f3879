//! The three sample spaces of a two-setting Bell experiment.
//!
//! * space 1: `(A, α, B, β, λ)`, the observed result and chosen setting per side;
//! * space 2: `(A_α, A_α', B_β, B_β', λ)`, definite values for both settings per side;
//! * space 3: `(A_α, A_α', α, B_β, B_β', β, λ)`, both of the above.
//!
//! All spaces use the biggest event space (singleton atoms).

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::prob::{relative_frequency, Event, Measure, SampleSpace};
use crate::rational::{self, Rational};

/// A polarizer angle in exact thousandths of a degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Angle(i64);

impl Angle {
    pub const fn from_millidegrees(m: i64) -> Self {
        Angle(m)
    }

    pub const fn from_degrees(d: i64) -> Self {
        Angle(d * 1000)
    }

    pub fn from_f64(deg: f64) -> Result<Self> {
        let m = deg * 1000.0;
        if !m.is_finite() || (m - m.round()).abs() > 1e-6 || m.abs() > 1e15 {
            return Err(Error::InvalidInput(format!("angle {deg} is not a multiple of 0.001°")));
        }
        Ok(Angle(m.round() as i64))
    }

    pub fn millidegrees(self) -> i64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn radians(self) -> f64 {
        self.degrees().to_radians()
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let (whole, frac) = (abs / 1000, abs % 1000);
        if frac == 0 {
            write!(f, "{sign}{whole}")
        } else {
            let digits = format!("{frac:03}");
            write!(f, "{sign}{whole}.{}", digits.trim_end_matches('0'))
        }
    }
}

impl FromStr for Angle {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().trim_end_matches('°');
        let r = rational::parse(s)?;
        let milli = r * rational::int(1000);
        if !milli.is_integer() {
            return Err(Error::InvalidInput(format!("angle `{s}` is not a multiple of 0.001°")));
        }
        let m: i64 = milli
            .to_integer()
            .try_into()
            .map_err(|_| Error::InvalidInput(format!("angle `{s}` out of range")))?;
        Ok(Angle(m))
    }
}

impl Serialize for Angle {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0 % 1000 == 0 {
            s.serialize_i64(self.0 / 1000)
        } else {
            s.serialize_f64(self.degrees())
        }
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        Angle::from_f64(v).map_err(serde::de::Error::custom)
    }
}

/// The two analyzer settings on each side: `(α, α')` and `(β, β')`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Settings {
    pub alice: [Angle; 2],
    pub bob: [Angle; 2],
}

impl Default for Settings {
    fn default() -> Self {
        let pair = [Angle::from_degrees(0), Angle::from_degrees(45)];
        Settings { alice: pair, bob: pair }
    }
}

impl Settings {
    pub fn new(alpha: Angle, alpha_p: Angle, beta: Angle, beta_p: Angle) -> Result<Self> {
        let s = Settings { alice: [alpha, alpha_p], bob: [beta, beta_p] };
        s.validate()?;
        Ok(s)
    }

    /// The standard maximal-violation angles `(0°, 45°; 22.5°, -22.5°)`.
    pub fn tsirelson() -> Self {
        Settings {
            alice: [Angle::from_degrees(0), Angle::from_degrees(45)],
            bob: [Angle::from_millidegrees(22_500), Angle::from_millidegrees(-22_500)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alice[0] == self.alice[1] || self.bob[0] == self.bob[1] {
            return Err(Error::InvalidInput("the two settings on a side must differ".into()));
        }
        Ok(())
    }

    pub fn alice_index(&self, a: Angle) -> Result<usize> {
        self.alice
            .iter()
            .position(|&x| x == a)
            .ok_or_else(|| Error::InvalidInput(format!("angle {a} is not an A-side setting")))
    }

    pub fn bob_index(&self, b: Angle) -> Result<usize> {
        self.bob
            .iter()
            .position(|&x| x == b)
            .ok_or_else(|| Error::InvalidInput(format!("angle {b} is not a B-side setting")))
    }

    pub fn as_array(&self) -> [Angle; 4] {
        [self.alice[0], self.alice[1], self.bob[0], self.bob[1]]
    }
}

/// Finite hidden-variable support with a prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSupport {
    pub labels: Vec<String>,
    #[serde(with = "crate::rational::serde_rational_vec")]
    pub prior: Vec<Rational>,
}

impl LambdaSupport {
    pub fn new(labels: Vec<String>, prior: Vec<Rational>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidSpace("empty hidden-variable support".into()));
        }
        if labels.len() != prior.len() {
            return Err(Error::InvalidSpace("one prior weight per λ value required".into()));
        }
        if prior.iter().any(Signed::is_negative) {
            return Err(Error::NotAMeasure("negative λ prior weight".into()));
        }
        if !prior.iter().sum::<Rational>().is_one() {
            return Err(Error::NotAMeasure("λ prior does not sum to 1".into()));
        }
        Ok(LambdaSupport { labels, prior })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        let labels = (0..n).map(|k| format!("l{k}")).collect();
        let prior = vec![rational::ratio(1, n.max(1) as i64); n];
        Self::new(labels, prior)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpaceId {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "3")]
    Three,
}

impl fmt::Display for SpaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceId::One => f.write_str("(A,α,B,β,λ)"),
            SpaceId::Two => f.write_str("(A_α,A_α',B_β,B_β',λ)"),
            SpaceId::Three => f.write_str("(A_α,A_α',α,B_β,B_β',β,λ)"),
        }
    }
}

impl TryFrom<u8> for SpaceId {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(SpaceId::One),
            2 => Ok(SpaceId::Two),
            3 => Ok(SpaceId::Three),
            _ => Err(Error::InvalidInput(format!("no probability space {v}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Space1Outcome {
    pub a: bool,
    pub alpha: usize,
    pub b: bool,
    pub beta: usize,
    pub lambda: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Space2Outcome {
    pub a: [bool; 2],
    pub b: [bool; 2],
    pub lambda: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Space3Outcome {
    pub a: [bool; 2],
    pub alpha: usize,
    pub b: [bool; 2],
    pub beta: usize,
    pub lambda: usize,
}

impl Space3Outcome {
    /// The space-1 quintuple this outcome induces.
    pub fn observed(&self) -> Space1Outcome {
        Space1Outcome {
            a: self.a[self.alpha],
            alpha: self.alpha,
            b: self.b[self.beta],
            beta: self.beta,
            lambda: self.lambda,
        }
    }

    pub fn counterfactuals(&self) -> Space2Outcome {
        Space2Outcome { a: self.a, b: self.b, lambda: self.lambda }
    }
}

/// One experimental observation: a result and a setting per side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub a: bool,
    pub alpha: Angle,
    pub b: bool,
    pub beta: Angle,
}

const BIT: [&str; 2] = ["0", "1"];

/// One of the three sample spaces with its settings and λ support.
#[derive(Debug, Clone, PartialEq)]
pub struct BellSpace {
    id: SpaceId,
    settings: Settings,
    lambda: LambdaSupport,
    space: Arc<SampleSpace>,
}

impl BellSpace {
    pub fn build(id: SpaceId, settings: Settings, lambda: LambdaSupport) -> Result<Self> {
        settings.validate()?;
        if lambda.is_empty() {
            return Err(Error::InvalidSpace("empty hidden-variable support".into()));
        }
        let bits = || BIT.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let alice: Vec<String> = settings.alice.iter().map(Angle::to_string).collect();
        let bob: Vec<String> = settings.bob.iter().map(Angle::to_string).collect();
        let mut vars: Vec<(String, Vec<String>)> = Vec::new();
        match id {
            SpaceId::One => {
                vars.push(("A".into(), bits()));
                vars.push(("alpha".into(), alice));
                vars.push(("B".into(), bits()));
                vars.push(("beta".into(), bob));
            }
            SpaceId::Two => {
                vars.push((format!("A_{}", alice[0]), bits()));
                vars.push((format!("A_{}", alice[1]), bits()));
                vars.push((format!("B_{}", bob[0]), bits()));
                vars.push((format!("B_{}", bob[1]), bits()));
            }
            SpaceId::Three => {
                vars.push((format!("A_{}", alice[0]), bits()));
                vars.push((format!("A_{}", alice[1]), bits()));
                vars.push(("alpha".into(), alice));
                vars.push((format!("B_{}", bob[0]), bits()));
                vars.push((format!("B_{}", bob[1]), bits()));
                vars.push(("beta".into(), bob));
            }
        }
        vars.push(("lambda".into(), lambda.labels.clone()));
        let space = Arc::new(SampleSpace::new(vars)?);
        Ok(BellSpace { id, settings, lambda, space })
    }

    pub fn id(&self) -> SpaceId {
        self.id
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    pub fn lambda(&self) -> &LambdaSupport {
        &self.lambda
    }

    pub fn sample_space(&self) -> &Arc<SampleSpace> {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    pub fn outcome1(&self, i: usize) -> Space1Outcome {
        debug_assert_eq!(self.id, SpaceId::One);
        let s = &self.space;
        Space1Outcome {
            a: s.value(i, 0) == 1,
            alpha: s.value(i, 1),
            b: s.value(i, 2) == 1,
            beta: s.value(i, 3),
            lambda: s.value(i, 4),
        }
    }

    pub fn outcome2(&self, i: usize) -> Space2Outcome {
        debug_assert_eq!(self.id, SpaceId::Two);
        let s = &self.space;
        Space2Outcome {
            a: [s.value(i, 0) == 1, s.value(i, 1) == 1],
            b: [s.value(i, 2) == 1, s.value(i, 3) == 1],
            lambda: s.value(i, 4),
        }
    }

    pub fn outcome3(&self, i: usize) -> Space3Outcome {
        debug_assert_eq!(self.id, SpaceId::Three);
        let s = &self.space;
        Space3Outcome {
            a: [s.value(i, 0) == 1, s.value(i, 1) == 1],
            alpha: s.value(i, 2),
            b: [s.value(i, 3) == 1, s.value(i, 4) == 1],
            beta: s.value(i, 5),
            lambda: s.value(i, 6),
        }
    }

    pub fn index1(&self, o: &Space1Outcome) -> usize {
        self.space.index_of(&[o.a as usize, o.alpha, o.b as usize, o.beta, o.lambda])
    }

    pub fn index2(&self, o: &Space2Outcome) -> usize {
        self.space.index_of(&[o.a[0] as usize, o.a[1] as usize, o.b[0] as usize, o.b[1] as usize, o.lambda])
    }

    pub fn index3(&self, o: &Space3Outcome) -> usize {
        self.space.index_of(&[
            o.a[0] as usize,
            o.a[1] as usize,
            o.alpha,
            o.b[0] as usize,
            o.b[1] as usize,
            o.beta,
            o.lambda,
        ])
    }

    /// The event a single observation corresponds to in this space.
    pub fn event_of(&self, obs: &Observation) -> Result<Event> {
        let i = self.settings.alice_index(obs.alpha)?;
        let j = self.settings.bob_index(obs.beta)?;
        Ok(match self.id {
            SpaceId::One => {
                let n = self.len();
                let idx = (0..n).filter(|&k| {
                    let o = self.outcome1(k);
                    o.a == obs.a && o.alpha == i && o.b == obs.b && o.beta == j
                });
                Event::from_indices(n, idx.collect::<Vec<_>>())
            }
            SpaceId::Two => {
                let n = self.len();
                let idx = (0..n).filter(|&k| {
                    let o = self.outcome2(k);
                    o.a[i] == obs.a && o.b[j] == obs.b
                });
                Event::from_indices(n, idx.collect::<Vec<_>>())
            }
            SpaceId::Three => {
                let n = self.len();
                let idx = (0..n).filter(|&k| {
                    let o = self.outcome3(k);
                    o.alpha == i && o.beta == j && o.a[i] == obs.a && o.b[j] == obs.b
                });
                Event::from_indices(n, idx.collect::<Vec<_>>())
            }
        })
    }

    /// Whether a conjunction of `variable = value` constraints names only
    /// variables present in this space.
    pub fn representable(&self, constraints: &[(&str, &str)]) -> bool {
        constraints.iter().all(|(name, _)| self.space.has_variable(name))
    }

    /// Variable name of the counterfactual slot for side A (`side = 0`) or
    /// B (`side = 1`) at setting index `k`. Spaces 2 and 3 only.
    pub fn slot_name(&self, side: usize, k: usize) -> String {
        match side {
            0 => format!("A_{}", self.settings.alice[k]),
            _ => format!("B_{}", self.settings.bob[k]),
        }
    }
}

pub fn build_space1(lambda: LambdaSupport) -> Result<BellSpace> {
    BellSpace::build(SpaceId::One, Settings::default(), lambda)
}

pub fn build_space2(lambda: LambdaSupport) -> Result<BellSpace> {
    BellSpace::build(SpaceId::Two, Settings::default(), lambda)
}

pub fn build_space3(lambda: LambdaSupport) -> Result<BellSpace> {
    BellSpace::build(SpaceId::Three, Settings::default(), lambda)
}

/// A measure on one of the Bell spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct BellMeasure {
    space: BellSpace,
    measure: Measure,
}

impl BellMeasure {
    pub fn new(space: BellSpace, weights: Vec<Rational>) -> Result<Self> {
        let measure = Measure::from_outcome_weights(space.sample_space().clone(), weights)?;
        Ok(BellMeasure { space, measure })
    }

    pub fn uniform(space: BellSpace) -> Self {
        let measure = Measure::uniform(space.sample_space().clone());
        BellMeasure { space, measure }
    }

    pub fn space(&self) -> &BellSpace {
        &self.space
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn weights(&self) -> &[Rational] {
        self.measure.weights()
    }

    pub fn probability(&self, e: &Event) -> Result<Rational> {
        self.measure.probability(e)
    }

    pub fn event<F: Fn(usize) -> bool>(&self, pred: F) -> Event {
        let n = self.space.len();
        Event::from_indices(n, (0..n).filter(|&k| pred(k)).collect::<Vec<_>>())
    }

    /// Projects a space-3 measure onto space 2 (forgetting the settings) or
    /// onto space 1 (keeping only the counterfactual value of the chosen
    /// setting on each side).
    pub fn project(&self, target: SpaceId) -> Result<BellMeasure> {
        if self.space.id != SpaceId::Three {
            return Err(Error::InvalidInput("projection is defined from space 3 only".into()));
        }
        let to = BellSpace::build(target, self.space.settings, self.space.lambda.clone())?;
        let mut weights = vec![Rational::zero(); to.len()];
        for (k, w) in self.weights().iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            let o = self.space.outcome3(k);
            let idx = match target {
                SpaceId::One => to.index1(&o.observed()),
                SpaceId::Two => to.index2(&o.counterfactuals()),
                SpaceId::Three => k,
            };
            weights[idx] += w;
        }
        BellMeasure::new(to, weights)
    }
}

/// JSON form of a Bell measure: weights listed in the space's outcome order
/// (first variable slowest), as `p/q` strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BellMeasureDocument {
    pub space: SpaceId,
    #[serde(default)]
    pub settings: Settings,
    pub lambda: LambdaSupport,
    #[serde(with = "crate::rational::serde_rational_vec")]
    pub weights: Vec<Rational>,
}

impl BellMeasure {
    pub fn to_document(&self) -> BellMeasureDocument {
        BellMeasureDocument {
            space: self.space.id,
            settings: self.space.settings,
            lambda: self.space.lambda.clone(),
            weights: self.weights().to_vec(),
        }
    }

    pub fn from_document(doc: BellMeasureDocument) -> Result<Self> {
        let lambda = LambdaSupport::new(doc.lambda.labels, doc.lambda.prior)?;
        let space = BellSpace::build(doc.space, doc.settings, lambda)?;
        if doc.weights.len() != space.len() {
            return Err(Error::InvalidInput(format!(
                "{} weights for a space of {} outcomes",
                doc.weights.len(),
                space.len()
            )));
        }
        BellMeasure::new(space, doc.weights)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(text)?)
    }
}

pub fn project_space3(m3: &BellMeasure, target: SpaceId) -> Result<BellMeasure> {
    m3.project(target)
}

/// One row of the six-run worked example: the observed pair `(A, α)` and the
/// definite values `(A_0, A_45)` assumed in the counterfactual picture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table1Run {
    pub run: usize,
    pub a: u8,
    pub alpha: Angle,
    pub a_0: u8,
    pub a_45: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkedExample {
    pub runs: Vec<Table1Run>,
    /// `P(A=1, α=0°)` in space 1.
    #[serde(with = "crate::rational::serde_rational")]
    pub joint: Rational,
    /// `P(A=1 | α=0°)` in space 1.
    #[serde(with = "crate::rational::serde_rational")]
    pub conditional: Rational,
    /// `P(A_0=1)` in space 2.
    #[serde(with = "crate::rational::serde_rational")]
    pub counterfactual: Rational,
    /// `P(A_0=1) = P(A=1 | α=0°)`.
    pub bridge_holds: bool,
}

pub const TABLE1_RUNS: [Table1Run; 6] = {
    const fn run(run: usize, a: u8, alpha: i64, a_0: u8, a_45: u8) -> Table1Run {
        Table1Run { run, a, alpha: Angle::from_degrees(alpha), a_0, a_45 }
    }
    [
        run(1, 1, 0, 1, 0),
        run(2, 1, 45, 0, 1),
        run(3, 1, 45, 1, 1),
        run(4, 1, 0, 1, 0),
        run(5, 0, 0, 0, 1),
        run(6, 1, 45, 1, 1),
    ]
};

/// Builds the empirical single-side measures of the six-run log in both
/// pictures and evaluates the three quantities and their bridge identity.
pub fn table1_demo() -> Result<WorkedExample> {
    let runs = TABLE1_RUNS.to_vec();
    let n = runs.len() as i64;

    let side1 = Arc::new(SampleSpace::new([("A", vec!["0", "1"]), ("alpha", vec!["0", "45"])])?);
    let mut w1 = vec![Rational::zero(); side1.len()];
    for r in &runs {
        let alpha = if r.alpha == Angle::from_degrees(0) { 0 } else { 1 };
        w1[side1.index_of(&[r.a as usize, alpha])] += rational::ratio(1, n);
    }
    let m1 = Measure::from_outcome_weights(side1.clone(), w1)?;

    let side2 = Arc::new(SampleSpace::new([("A_0", vec!["0", "1"]), ("A_45", vec!["0", "1"])])?);
    let mut w2 = vec![Rational::zero(); side2.len()];
    for r in &runs {
        w2[side2.index_of(&[r.a_0 as usize, r.a_45 as usize])] += rational::ratio(1, n);
    }
    let m2 = Measure::from_outcome_weights(side2.clone(), w2)?;

    let a1 = side1.event_where(&[("A", "1")])?;
    let alpha0 = side1.event_where(&[("alpha", "0")])?;
    let joint = m1.probability(&a1.intersection(&alpha0))?;
    let conditional = m1.conditional(&a1, &alpha0)?;
    let counterfactual = m2.probability(&side2.event_where(&[("A_0", "1")])?)?;

    debug_assert_eq!(joint, relative_frequency(&runs, |r| r.a == 1 && r.alpha == Angle::from_degrees(0))?);
    debug_assert_eq!(counterfactual, relative_frequency(&runs, |r| r.a_0 == 1)?);

    Ok(WorkedExample { bridge_holds: counterfactual == conditional, runs, joint, conditional, counterfactual })
}

/// Writes observations as CSV with header `run,index,A,alpha,B,beta`.
pub fn write_observations_csv<W: Write>(out: W, run: u64, observations: &[Observation]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["run", "index", "A", "alpha", "B", "beta"])?;
    for (k, o) in observations.iter().enumerate() {
        w.write_record([
            run.to_string(),
            k.to_string(),
            (o.a as u8).to_string(),
            o.alpha.to_string(),
            (o.b as u8).to_string(),
            o.beta.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(())
}

pub fn read_observations_csv<R: Read>(input: R) -> Result<Vec<Observation>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["run", "index", "A", "alpha", "B", "beta"] {
        return Err(Error::InvalidInput(format!("unexpected observation header {headers:?}")));
    }
    let bit = |s: &str| match s.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::InvalidInput(format!("`{other}` is not a bit"))),
    };
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok(Observation { a: bit(&rec[2])?, alpha: rec[3].parse()?, b: bit(&rec[4])?, beta: rec[5].parse()? })
        })
        .collect()
}
