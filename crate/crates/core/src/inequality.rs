//! Bell-CHSH inequalities: the four-number core bound, CHSH in the ±1 and
//! 0/1 conventions, the three probability-space inequalities with their
//! hypothesis ledgers, and the frequency form on complete counterfactual data.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{HypothesisFlags, LhvModel};
use crate::rational::{self, Rational};
use crate::spaces::{Angle, BellMeasure, SpaceId};
use crate::table::{CorrelationTable, Scalar, ANALYTIC_TOLERANCE, SIGMA_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InequalityId {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "3")]
    Three,
    #[serde(rename = "freq")]
    Freq,
    #[serde(rename = "chsh_pm1")]
    ChshPm1,
    #[serde(rename = "chsh_01")]
    Chsh01,
}

impl InequalityId {
    pub fn as_str(self) -> &'static str {
        match self {
            InequalityId::One => "1",
            InequalityId::Two => "2",
            InequalityId::Three => "3",
            InequalityId::Freq => "freq",
            InequalityId::ChshPm1 => "chsh_pm1",
            InequalityId::Chsh01 => "chsh_01",
        }
    }
}

impl fmt::Display for InequalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InequalityId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(InequalityId::One),
            "2" => Ok(InequalityId::Two),
            "3" => Ok(InequalityId::Three),
            "freq" => Ok(InequalityId::Freq),
            "chsh_pm1" => Ok(InequalityId::ChshPm1),
            "chsh_01" => Ok(InequalityId::Chsh01),
            other => Err(Error::UnknownInequality(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Hypothesis {
    SampleSpace(SpaceId),
    Kolmogorov,
    Locality,
    LambdaIndependence,
    /// All four outputs carry values in every run, measured or not.
    DefiniteValues,
    /// Observed subsets share the statistics of the whole run set.
    FairSampling,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hypothesis::SampleSpace(id) => write!(f, "sample space {id}"),
            Hypothesis::Kolmogorov => f.write_str("Kolmogorov axioms"),
            Hypothesis::Locality => f.write_str("locality"),
            Hypothesis::LambdaIndependence => f.write_str("λ-independence"),
            Hypothesis::DefiniteValues => f.write_str("definite values for unmeasured outputs"),
            Hypothesis::FairSampling => f.write_str("fair sampling"),
        }
    }
}

impl From<Hypothesis> for String {
    fn from(h: Hypothesis) -> String {
        h.to_string()
    }
}

impl TryFrom<String> for Hypothesis {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        let all = [
            Hypothesis::SampleSpace(SpaceId::One),
            Hypothesis::SampleSpace(SpaceId::Two),
            Hypothesis::SampleSpace(SpaceId::Three),
            Hypothesis::Kolmogorov,
            Hypothesis::Locality,
            Hypothesis::LambdaIndependence,
            Hypothesis::DefiniteValues,
            Hypothesis::FairSampling,
        ];
        all.into_iter().find(|h| h.to_string() == s).ok_or_else(|| format!("unknown hypothesis `{s}`"))
    }
}

/// Hypotheses each inequality's derivation commits to.
pub fn ledger(id: InequalityId) -> Result<Vec<Hypothesis>> {
    use Hypothesis::*;
    match id {
        InequalityId::One => Ok(vec![SampleSpace(SpaceId::One), Kolmogorov, Locality, LambdaIndependence]),
        InequalityId::Two => Ok(vec![SampleSpace(SpaceId::Two), Kolmogorov]),
        InequalityId::Three => Ok(vec![SampleSpace(SpaceId::Three), Kolmogorov, Locality, LambdaIndependence]),
        InequalityId::Freq => Ok(vec![DefiniteValues, FairSampling]),
        other => Err(Error::UnknownInequality(format!("{other} has no hypothesis ledger"))),
    }
}

pub fn hypothesis_ledger(id: &str) -> Result<Vec<Hypothesis>> {
    ledger(id.parse()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub id: InequalityId,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
    pub lo: f64,
    pub hi: f64,
    pub violated: bool,
    pub hypotheses: Vec<Hypothesis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    pub tolerance: f64,
    pub terms: Vec<Term>,
}

impl InequalityReport {
    fn build<T: Scalar>(
        id: InequalityId,
        value: T,
        (lo, hi): (i64, i64),
        terms: Vec<(&str, T)>,
        stderr: Option<f64>,
        hypotheses: Vec<Hypothesis>,
    ) -> Self {
        let tolerance = match stderr {
            _ if T::EXACT => 0.0,
            Some(se) => SIGMA_THRESHOLD * se,
            None => ANALYTIC_TOLERANCE,
        };
        let violated = if T::EXACT {
            value < T::from_i64(lo) || value > T::from_i64(hi)
        } else {
            let v = value.to_f64();
            v < lo as f64 - tolerance || v > hi as f64 + tolerance
        };
        InequalityReport {
            id,
            value: value.to_f64(),
            exact: value.as_rational().map(|r| rational::format(&r)),
            lo: lo as f64,
            hi: hi as f64,
            violated,
            hypotheses,
            stderr,
            tolerance,
            terms: terms
                .into_iter()
                .map(|(name, v)| Term {
                    name: name.to_string(),
                    value: v.to_f64(),
                    exact: v.as_rational().map(|r| rational::format(&r)),
                })
                .collect(),
        }
    }

    pub fn exact_value(&self) -> Option<Rational> {
        self.exact.as_deref().and_then(|s| rational::parse(s).ok())
    }

    /// Term-by-term CSV breakdown: `term,value,exact`.
    pub fn write_terms_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["term", "value", "exact"])?;
        for t in &self.terms {
            w.write_record([t.name.clone(), t.value.to_string(), t.exact.clone().unwrap_or_default()])?;
        }
        w.flush().map_err(|e| Error::InvalidInput(e.to_string()))?;
        Ok(())
    }
}

/// `ab + a'b + ab' - a'b' - a - b` with its bound check.
#[derive(Debug, Clone, PartialEq)]
pub struct CoreValue<T> {
    pub value: T,
    pub within_bounds: bool,
}

fn check_unit<T: Scalar>(name: &str, v: &T) -> Result<()> {
    let ok = if T::EXACT {
        *v >= T::zero() && *v <= T::one()
    } else {
        let x = v.to_f64();
        (-ANALYTIC_TOLERANCE..=1.0 + ANALYTIC_TOLERANCE).contains(&x)
    };
    if ok {
        Ok(())
    } else {
        Err(Error::DomainError(format!("{name} = {v:?} outside [0,1]")))
    }
}

/// The four-number inequality `-1 <= ab + a'b + ab' - a'b' - a - b <= 0`
/// for `a, b, a', b'` in `[0, 1]`.
pub fn core_inequality<T: Scalar>(a: T, b: T, a_p: T, b_p: T) -> Result<CoreValue<T>> {
    check_unit("a", &a)?;
    check_unit("b", &b)?;
    check_unit("a'", &a_p)?;
    check_unit("b'", &b_p)?;
    let value = a.clone() * b.clone() + a_p.clone() * b.clone() + a.clone() * b_p.clone() - a_p * b_p - a - b;
    let within_bounds = if T::EXACT {
        value >= T::from_i64(-1) && value <= T::zero()
    } else {
        let v = value.to_f64();
        (-1.0 - ANALYTIC_TOLERANCE..=ANALYTIC_TOLERANCE).contains(&v)
    };
    Ok(CoreValue { value, within_bounds })
}

/// `S = <XY> + <X'Y> + <XY'> - <X'Y'>` for ±1-valued outputs, bounded by ±2.
/// `e[i][j]` is the correlator of A-setting `i` with B-setting `j`.
pub fn chsh_pm1<T: Scalar>(e: &[[T; 2]; 2]) -> Result<InequalityReport> {
    chsh_pm1_with_stderr(e, None)
}

pub fn chsh_pm1_with_stderr<T: Scalar>(e: &[[T; 2]; 2], stderr: Option<f64>) -> Result<InequalityReport> {
    let slack = ANALYTIC_TOLERANCE + stderr.map_or(0.0, |se| SIGMA_THRESHOLD * se);
    for x in e.iter().flatten() {
        let ok = if T::EXACT {
            *x >= T::from_i64(-1) && *x <= T::one()
        } else {
            x.to_f64().abs() <= 1.0 + slack
        };
        if !ok {
            return Err(Error::DomainError(format!("correlator {x:?} outside [-1,1]")));
        }
    }
    let s = e[0][0].clone() + e[1][0].clone() + e[0][1].clone() - e[1][1].clone();
    let terms = vec![
        ("<XY>", e[0][0].clone()),
        ("<X'Y>", e[1][0].clone()),
        ("<XY'>", e[0][1].clone()),
        ("-<X'Y'>", T::zero() - e[1][1].clone()),
    ];
    Ok(InequalityReport::build(InequalityId::ChshPm1, s, (-2, 2), terms, stderr, vec![]))
}

/// ±1-convention CHSH on a table's correlators, with propagated error.
pub fn chsh_pm1_table<T: Scalar>(t: &CorrelationTable<T>) -> Result<InequalityReport> {
    t.validate()?;
    // S = 4 v + 2 with v the 0/1 value, so the error scales by 4.
    let stderr = table_stderr(t).map(|se| 4.0 * se);
    chsh_pm1_with_stderr(&t.correlators(), stderr)
}

/// Value of the 0/1 CHSH expression and its six terms.
fn chsh01_terms<T: Scalar>(p11: &[[T; 2]; 2], pa: &T, pb: &T) -> (T, Vec<(&'static str, T)>) {
    let v = p11[0][0].clone() + p11[1][0].clone() + p11[0][1].clone() - p11[1][1].clone() - pa.clone() - pb.clone();
    let terms = vec![
        ("P(A_α=1,B_β=1)", p11[0][0].clone()),
        ("P(A_α'=1,B_β=1)", p11[1][0].clone()),
        ("P(A_α=1,B_β'=1)", p11[0][1].clone()),
        ("-P(A_α'=1,B_β'=1)", T::zero() - p11[1][1].clone()),
        ("-P(A_α=1)", T::zero() - pa.clone()),
        ("-P(B_β=1)", T::zero() - pb.clone()),
    ];
    (v, terms)
}

fn table_stderr<T>(t: &CorrelationTable<T>) -> Option<f64> {
    t.stderr.map(|e| {
        (e.p11.iter().flatten().map(|s| s * s).sum::<f64>() + e.pa[0].powi(2) + e.pb[0].powi(2)).sqrt()
    })
}

/// `<AB> + <A'B> + <AB'> - <A'B'> - <A> - <B>` for 0/1 outputs, bounded by
/// `[-1, 0]`.
pub fn chsh_01<T: Scalar>(t: &CorrelationTable<T>) -> Result<InequalityReport> {
    evaluate_table(t, InequalityId::Chsh01)
}

/// The ±1 value equivalent to a 0/1 value: `S = 4 v + 2`.
pub fn pm1_from_01<T: Scalar>(v: T) -> T {
    T::from_i64(4) * v + T::from_i64(2)
}

/// Evaluates the 0/1 CHSH expression on a table under the ledger of
/// inequality `id`. A violation means the ledger's hypotheses cannot all hold
/// for the process that produced the table.
pub fn evaluate_table<T: Scalar>(t: &CorrelationTable<T>, id: InequalityId) -> Result<InequalityReport> {
    t.validate()?;
    let hypotheses = match id {
        InequalityId::Chsh01 => vec![],
        InequalityId::One | InequalityId::Two | InequalityId::Three => ledger(id)?,
        other => {
            return Err(Error::HypothesisViolation(format!(
                "inequality {other} cannot be evaluated from a correlation table"
            )))
        }
    };
    let (v, terms) = chsh01_terms(&t.p11, &t.pa[0], &t.pb[0]);
    Ok(InequalityReport::build(id, v, (-1, 0), terms, table_stderr(t), hypotheses))
}

fn require_flags(flags: HypothesisFlags, what: &str) -> Result<()> {
    let mut missing = Vec::new();
    if !flags.locality {
        missing.push("locality");
    }
    if !flags.lambda_independence {
        missing.push("λ-independence");
    }
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::HypothesisViolation(format!("{what} requires {}", missing.join(" and "))))
    }
}

/// Inequality 1, computed from the λ-averaged factorized conditionals.
pub fn inequality1(model: &LhvModel) -> Result<InequalityReport> {
    require_flags(model.flags, "inequality 1")?;
    let t = model.table();
    let (v, terms) = chsh01_terms(&t.p11, &t.pa[0], &t.pb[0]);
    let report = InequalityReport::build(InequalityId::One, v, (-1, 0), terms, None, ledger(InequalityId::One)?);
    debug_assert!(!report.violated);
    Ok(report)
}

/// Inequality 2 on a Kolmogorov measure over space 2, by event summation.
pub fn inequality2(m2: &BellMeasure) -> Result<InequalityReport> {
    let space = m2.space();
    if space.id() != SpaceId::Two {
        return Err(Error::HypothesisViolation(format!(
            "inequality 2 needs a measure on sample space {}, got {}",
            SpaceId::Two,
            space.id()
        )));
    }
    let p = |pred: &dyn Fn([bool; 2], [bool; 2]) -> bool| {
        m2.probability(&m2.event(|k| {
            let o = space.outcome2(k);
            pred(o.a, o.b)
        }))
    };
    let p11 = [
        [p(&|a, b| a[0] && b[0])?, p(&|a, b| a[0] && b[1])?],
        [p(&|a, b| a[1] && b[0])?, p(&|a, b| a[1] && b[1])?],
    ];
    let (v, terms) = chsh01_terms(&p11, &p(&|a, _| a[0])?, &p(&|_, b| b[0])?);
    Ok(InequalityReport::build(InequalityId::Two, v, (-1, 0), terms, None, ledger(InequalityId::Two)?))
}

/// Checks on a space-3 measure that the settings are independent of the
/// counterfactual values and λ, and that given the settings and λ the two
/// sides' counterfactual values factorize with each side depending only on
/// its own setting.
pub fn verify_space3_hypotheses(m3: &BellMeasure) -> Result<()> {
    let space = m3.space();
    if space.id() != SpaceId::Three {
        return Err(Error::HypothesisViolation("not a space-3 measure".into()));
    }
    let nl = space.lambda().len();
    let w = m3.weights();
    // P(α, β) and P(cf, λ) marginals.
    let mut p_settings = [[rational::zero(), rational::zero()], [rational::zero(), rational::zero()]];
    let mut p_hidden = vec![rational::zero(); 16 * nl];
    let hidden_index = |a: [bool; 2], b: [bool; 2], l: usize| {
        ((a[0] as usize) << 3 | (a[1] as usize) << 2 | (b[0] as usize) << 1 | b[1] as usize) * nl + l
    };
    for (k, wk) in w.iter().enumerate() {
        let o = space.outcome3(k);
        p_settings[o.alpha][o.beta] += wk;
        p_hidden[hidden_index(o.a, o.b, o.lambda)] += wk;
    }
    for (k, wk) in w.iter().enumerate() {
        let o = space.outcome3(k);
        if *wk != &p_settings[o.alpha][o.beta] * &p_hidden[hidden_index(o.a, o.b, o.lambda)] {
            return Err(Error::HypothesisViolation(
                "λ-independence: the settings are not independent of λ and the counterfactual values".into(),
            ));
        }
    }
    // Locality: P(a, b | α, β, λ) = P(a | α, λ) P(b | β, λ), the side
    // marginals pooled over the other side's setting.
    let zero4 = || -> [Rational; 4] { std::array::from_fn(|_| rational::zero()) };
    for l in 0..nl {
        let mut joint: [[[[Rational; 4]; 4]; 2]; 2] =
            std::array::from_fn(|_| std::array::from_fn(|_| std::array::from_fn(|_| zero4())));
        let mut total: [[Rational; 2]; 2] = std::array::from_fn(|_| std::array::from_fn(|_| rational::zero()));
        let mut rows: [[[Rational; 4]; 2]; 2] = std::array::from_fn(|_| std::array::from_fn(|_| zero4()));
        let mut cols: [[[Rational; 4]; 2]; 2] = std::array::from_fn(|_| std::array::from_fn(|_| zero4()));
        for alpha in 0..2 {
            for beta in 0..2 {
                for a in 0..4 {
                    for b in 0..4 {
                        let o = crate::spaces::Space3Outcome {
                            a: [a >> 1 == 1, a & 1 == 1],
                            alpha,
                            b: [b >> 1 == 1, b & 1 == 1],
                            beta,
                            lambda: l,
                        };
                        let x = &w[space.index3(&o)];
                        total[alpha][beta] += x;
                        rows[alpha][beta][a] += x;
                        cols[alpha][beta][b] += x;
                        joint[alpha][beta][a][b] = x.clone();
                    }
                }
            }
        }
        let pooled = |num: &[Rational; 4], num2: &[Rational; 4], den: Rational| -> [Rational; 4] {
            if den.is_zero() {
                return zero4();
            }
            std::array::from_fn(|x| (&num[x] + &num2[x]) / &den)
        };
        let side_a: [[Rational; 4]; 2] =
            std::array::from_fn(|s| pooled(&rows[s][0], &rows[s][1], &total[s][0] + &total[s][1]));
        let side_b: [[Rational; 4]; 2] =
            std::array::from_fn(|s| pooled(&cols[0][s], &cols[1][s], &total[0][s] + &total[1][s]));
        for alpha in 0..2 {
            for beta in 0..2 {
                let t = &total[alpha][beta];
                if t.is_zero() {
                    continue;
                }
                for a in 0..4 {
                    for b in 0..4 {
                        if joint[alpha][beta][a][b] != (t * &side_a[alpha][a] * &side_b[beta][b]) {
                            return Err(Error::HypothesisViolation(
                                "locality: counterfactual values do not factorize given the settings and λ".into(),
                            ));
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Inequality 3 on a space-3 measure, conditioning each term on the setting
/// pair `(θ, θ', ω, ω')` as the inequality prescribes.
pub fn inequality3(
    m3: &BellMeasure,
    flags: HypothesisFlags,
    theta: Angle,
    theta_p: Angle,
    omega: Angle,
    omega_p: Angle,
) -> Result<InequalityReport> {
    let space = m3.space();
    if space.id() != SpaceId::Three {
        return Err(Error::HypothesisViolation(format!(
            "inequality 3 needs a measure on sample space {}, got {}",
            SpaceId::Three,
            space.id()
        )));
    }
    require_flags(flags, "inequality 3")?;
    let s = space.settings();
    let (t, tp) = (s.alice_index(theta)?, s.alice_index(theta_p)?);
    let (w, wp) = (s.bob_index(omega)?, s.bob_index(omega_p)?);

    let cond = |target: &dyn Fn(&crate::spaces::Space3Outcome) -> bool,
                given: &dyn Fn(&crate::spaces::Space3Outcome) -> bool| {
        m3.measure().conditional(
            &m3.event(|k| target(&space.outcome3(k))),
            &m3.event(|k| given(&space.outcome3(k))),
        )
    };
    let t1 = cond(&|o| o.a[0] && o.b[0], &|o| o.alpha == t && o.beta == w)?;
    let t2 = cond(&|o| o.a[0] && o.b[1], &|o| o.alpha == tp && o.beta == w)?;
    let t3 = cond(&|o| o.a[1] && o.b[0], &|o| o.alpha == t && o.beta == wp)?;
    let t4 = cond(&|o| o.a[1] && o.b[1], &|o| o.alpha == tp && o.beta == wp)?;
    let t5 = cond(&|o| o.a[0], &|o| o.alpha == t)?;
    let t6 = cond(&|o| o.b[0], &|o| o.beta == w)?;

    verify_space3_hypotheses(m3)?;

    let v = &t1 + &t2 + &t3 - &t4 - &t5 - &t6;
    let terms = vec![
        ("P(A_α=1,B_β=1|θ,ω)", t1),
        ("P(A_α=1,B_β'=1|θ',ω)", t2),
        ("P(A_α'=1,B_β=1|θ,ω')", t3),
        ("-P(A_α'=1,B_β'=1|θ',ω')", -t4),
        ("-P(A_α=1|θ)", -t5),
        ("-P(B_β=1|ω)", -t6),
    ];
    Ok(InequalityReport::build(InequalityId::Three, v, (-1, 0), terms, None, ledger(InequalityId::Three)?))
}

/// One run's values `(A_α, A_α', B_β, B_β')`; `None` marks a missing value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterfactualRow(pub [Option<bool>; 4]);

impl CounterfactualRow {
    pub fn complete(a: bool, a_p: bool, b: bool, b_p: bool) -> Self {
        CounterfactualRow([Some(a), Some(a_p), Some(b), Some(b_p)])
    }

    pub fn values(&self) -> Option<[bool; 4]> {
        let [a, b, c, d] = self.0;
        Some([a?, b?, c?, d?])
    }

    fn a(&self, i: usize) -> bool {
        self.0[i].unwrap_or(false)
    }

    fn b(&self, j: usize) -> bool {
        self.0[2 + j].unwrap_or(false)
    }
}

fn complete_rows(rows: &[CounterfactualRow]) -> Result<Vec<[bool; 4]>> {
    if rows.is_empty() {
        return Err(Error::EmptyLog);
    }
    rows.iter()
        .enumerate()
        .map(|(k, r)| r.values().ok_or(Error::IncompleteCounterfactuals(k)))
        .collect()
}

fn count_ratio(hits: usize, n: usize) -> Rational {
    rational::ratio(hits as i64, n as i64)
}

/// Frequency form of inequality 2 on complete per-run data.
pub fn frequency_inequality(rows: &[CounterfactualRow]) -> Result<InequalityReport> {
    let rows = complete_rows(rows)?;
    let n = rows.len();
    let freq = |f: &dyn Fn(&[bool; 4]) -> bool| count_ratio(rows.iter().filter(|r| f(r)).count(), n);
    let p11 = [
        [freq(&|r| r[0] && r[2]), freq(&|r| r[0] && r[3])],
        [freq(&|r| r[1] && r[2]), freq(&|r| r[1] && r[3])],
    ];
    let (v, terms) = chsh01_terms(&p11, &freq(&|r| r[0]), &freq(&|r| r[2]));
    Ok(InequalityReport::build(InequalityId::Freq, v, (-1, 0), terms, None, ledger(InequalityId::Freq)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermGap {
    pub term: String,
    /// Average over the runs where the term's settings were selected.
    #[serde(with = "crate::rational::serde_rational")]
    pub observed: Rational,
    /// Average over all runs.
    #[serde(with = "crate::rational::serde_rational")]
    pub full: Rational,
    pub gap: f64,
    pub observed_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub terms: Vec<TermGap>,
    #[serde(with = "crate::rational::serde_rational")]
    pub observed_value: Rational,
    #[serde(with = "crate::rational::serde_rational")]
    pub full_value: Rational,
    pub observed_within: bool,
    pub full_within: bool,
    pub max_gap: f64,
}

/// Compares each term of the frequency inequality computed on the selected
/// subsets (what an experiment observes) with the same term over all runs.
/// `selection[k]` is the setting pair `(i, j)` observed in run `k`.
pub fn fair_sampling_gap(rows: &[CounterfactualRow], selection: &[(usize, usize)]) -> Result<GapReport> {
    let full_rows = complete_rows(rows)?;
    if selection.len() != rows.len() {
        return Err(Error::InvalidInput(format!("{} selections for {} runs", selection.len(), rows.len())));
    }
    if selection.iter().any(|&(i, j)| i > 1 || j > 1) {
        return Err(Error::InvalidInput("setting indices must be 0 or 1".into()));
    }
    let n = full_rows.len();
    let subset_mean = |name: &str, pick: &dyn Fn(usize) -> bool, f: &dyn Fn(&CounterfactualRow) -> bool| {
        let idx: Vec<usize> = (0..n).filter(|&k| pick(k)).collect();
        if idx.is_empty() {
            return Err(Error::InsufficientCoverage(format!("no run observed {name}")));
        }
        let hits = idx.iter().filter(|&&k| f(&rows[k])).count();
        Ok((count_ratio(hits, idx.len()), idx.len()))
    };
    let full_mean = |f: &dyn Fn(&CounterfactualRow) -> bool| count_ratio(rows.iter().filter(|r| f(r)).count(), n);

    let mut terms = Vec::new();
    let mut push = |name: &str, sign: i64, pick: &dyn Fn(usize) -> bool, f: &dyn Fn(&CounterfactualRow) -> bool| {
        let (obs, count) = subset_mean(name, pick, f)?;
        let full = full_mean(f);
        let gap = rational::to_f64(&(&obs - &full)).abs();
        terms.push((sign, TermGap { term: name.to_string(), observed: obs, full, gap, observed_runs: count }));
        Ok::<(), Error>(())
    };
    for (sign, i, j, name) in [(1, 0, 0, "A_α B_β"), (1, 0, 1, "A_α B_β'"), (1, 1, 0, "A_α' B_β"), (-1, 1, 1, "A_α' B_β'")] {
        push(name, sign, &|k| selection[k] == (i, j), &|r| r.a(i) && r.b(j))?;
    }
    push("A_α", -1, &|k| selection[k].0 == 0, &|r| r.a(0))?;
    push("B_β", -1, &|k| selection[k].1 == 0, &|r| r.b(0))?;

    let combine = |pick: &dyn Fn(&TermGap) -> &Rational| -> Rational {
        terms.iter().map(|(s, t)| rational::int(*s) * pick(t)).sum()
    };
    let observed_value = combine(&|t| &t.observed);
    let full_value = combine(&|t| &t.full);
    let within = |v: &Rational| *v >= rational::int(-1) && *v <= rational::zero();
    let terms: Vec<TermGap> = terms.into_iter().map(|(_, t)| t).collect();
    Ok(GapReport {
        max_gap: terms.iter().map(|t| t.gap).fold(0.0, f64::max),
        observed_within: within(&observed_value),
        full_within: within(&full_value),
        observed_value,
        full_value,
        terms,
    })
}

/// Settings chosen uniformly and independently of the data.
pub fn uniform_selection(n: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (rng.gen_range(0..2), rng.gen_range(0..2))).collect()
}

/// A selection that looks at the data: each run reports the first of
/// `(α,β)`, `(α,β')`, `(α',β)` whose product is 1, and `(α',β')` otherwise.
pub fn adversarial_selection(rows: &[CounterfactualRow]) -> Vec<(usize, usize)> {
    rows.iter()
        .map(|r| {
            [(0, 0), (0, 1), (1, 0)]
                .into_iter()
                .find(|&(i, j)| r.a(i) && r.b(j))
                .unwrap_or((1, 1))
        })
        .collect()
}

pub fn write_counterfactual_csv<W: Write>(out: W, rows: &[CounterfactualRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COUNTERFACTUAL_HEADER)?;
    for r in rows {
        w.write_record(r.0.map(|v| v.map(|b| (b as u8).to_string()).unwrap_or_default()))?;
    }
    w.flush().map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(())
}

pub const COUNTERFACTUAL_HEADER: [&str; 4] = ["A_alpha", "A_alpha'", "B_beta", "B_beta'"];

/// Reads rows with header `A_alpha,A_alpha',B_beta,B_beta'`; empty cells
/// are missing values.
pub fn read_counterfactual_csv<R: Read>(input: R) -> Result<Vec<CounterfactualRow>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != COUNTERFACTUAL_HEADER {
        return Err(Error::InvalidInput(format!("unexpected header {headers:?}")));
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            let cell = |k: usize| match rec[k].trim() {
                "" => Ok(None),
                "0" => Ok(Some(false)),
                "1" => Ok(Some(true)),
                other => Err(Error::InvalidInput(format!("`{other}` is not a bit"))),
            };
            Ok(CounterfactualRow([cell(0)?, cell(1)?, cell(2)?, cell(3)?]))
        })
        .collect()
}

/// Quick float check of a report value against its bounds.
pub fn report_value_within(report: &InequalityReport) -> bool {
    match report.exact_value() {
        Some(v) => v >= rational::int(report.lo as i64) && v <= rational::int(report.hi as i64),
        None => report.value >= report.lo - report.tolerance && report.value <= report.hi + report.tolerance,
    }
}
