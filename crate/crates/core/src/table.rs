//! Pairwise correlation tables for two settings per side.
//!
//! Pair `(i, j)` means A-side setting `i` (0 = α, 1 = α') with B-side
//! setting `j` (0 = β, 1 = β'). Entries are either exact rationals or
//! floating point values (analytic trigonometry or Monte Carlo estimates).

use std::fmt::Debug;
use std::io::{Read, Write};
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};
use crate::spaces::{Angle, Settings};

/// Tolerance applied to floating point values produced by trigonometry.
pub const ANALYTIC_TOLERANCE: f64 = 1e-12;

/// Number of standard errors separating a statistical violation from noise.
pub const SIGMA_THRESHOLD: f64 = 3.0;

pub const PAIRS: [(usize, usize); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

pub trait Scalar:
    Clone + Debug + PartialOrd + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self>
{
    const EXACT: bool;
    fn from_i64(n: i64) -> Self;
    fn to_f64(&self) -> f64;
    fn as_rational(&self) -> Option<Rational>;

    fn zero() -> Self {
        Self::from_i64(0)
    }
    fn one() -> Self {
        Self::from_i64(1)
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;
    fn from_i64(n: i64) -> Self {
        rational::int(n)
    }
    fn to_f64(&self) -> f64 {
        rational::to_f64(self)
    }
    fn as_rational(&self) -> Option<Rational> {
        Some(self.clone())
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;
    fn from_i64(n: i64) -> Self {
        n as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn as_rational(&self) -> Option<Rational> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Analytic,
    Estimated { runs: u64 },
}

/// Standard errors of an estimated table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableErrors {
    pub p11: [[f64; 2]; 2],
    pub pa: [f64; 2],
    pub pb: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable<T> {
    pub settings: Settings,
    /// `P(A=1, B=1)` for each setting pair.
    pub p11: [[T; 2]; 2],
    pub pa: [T; 2],
    pub pb: [T; 2],
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<TableErrors>,
}

pub type ExactTable = CorrelationTable<Rational>;

impl<T: Scalar> CorrelationTable<T> {
    pub fn analytic(settings: Settings, p11: [[T; 2]; 2], pa: [T; 2], pb: [T; 2]) -> Result<Self> {
        let t = CorrelationTable { settings, p11, pa, pb, provenance: Provenance::Analytic, stderr: None };
        t.validate()?;
        Ok(t)
    }

    /// Independent sides with the given marginals.
    pub fn product(settings: Settings, pa: [T; 2], pb: [T; 2]) -> Result<Self> {
        let p11 = [0, 1].map(|i| [0, 1].map(|j| pa[i].clone() * pb[j].clone()));
        Self::analytic(settings, p11, pa, pb)
    }

    fn tolerance_for(&self, i: usize, j: usize) -> f64 {
        if T::EXACT {
            return 0.0;
        }
        match &self.stderr {
            Some(e) => SIGMA_THRESHOLD * (e.p11[i][j] + e.pa[i] + e.pb[j]),
            None => ANALYTIC_TOLERANCE,
        }
    }

    /// Entries in `[0,1]` and the Fréchet bounds
    /// `max(0, pA + pB - 1) <= p11 <= min(pA, pB)` for every pair.
    pub fn validate(&self) -> Result<()> {
        let zero = T::zero();
        let one = T::one();
        let unit = |name: &str, v: &T, tol: f64| -> Result<()> {
            let ok = if T::EXACT { *v >= zero && *v <= one } else { v.to_f64() >= -tol && v.to_f64() <= 1.0 + tol };
            if ok {
                Ok(())
            } else {
                Err(Error::InconsistentTable(format!("{name} = {v:?} outside [0,1]")))
            }
        };
        for i in 0..2 {
            unit("pA", &self.pa[i], self.tolerance_for(i, 0))?;
            unit("pB", &self.pb[i], self.tolerance_for(0, i))?;
        }
        for (i, j) in PAIRS {
            let tol = self.tolerance_for(i, j);
            let p = &self.p11[i][j];
            unit("p11", p, tol)?;
            let (a, b) = (&self.pa[i], &self.pb[j]);
            let upper = if a < b { a } else { b };
            let lower = a.clone() + b.clone() - one.clone();
            let (too_big, too_small) = if T::EXACT {
                (p > upper, *p < lower)
            } else {
                (p.to_f64() > upper.to_f64() + tol, p.to_f64() < lower.to_f64() - tol)
            };
            if too_big || too_small {
                return Err(Error::InconsistentTable(format!(
                    "pair ({},{}) p11 = {:?} violates the Fréchet bounds for pA = {:?}, pB = {:?}",
                    self.settings.alice[i], self.settings.bob[j], p, a, b
                )));
            }
        }
        Ok(())
    }

    /// Correlators in the ±1 convention: `E = 4 p11 - 2 pA - 2 pB + 1`.
    pub fn correlators(&self) -> [[T; 2]; 2] {
        [0, 1].map(|i| {
            [0, 1].map(|j| {
                T::from_i64(4) * self.p11[i][j].clone() - T::from_i64(2) * self.pa[i].clone()
                    - T::from_i64(2) * self.pb[j].clone()
                    + T::one()
            })
        })
    }

    pub fn to_f64(&self) -> CorrelationTable<f64> {
        CorrelationTable {
            settings: self.settings,
            p11: [0, 1].map(|i| [0, 1].map(|j| self.p11[i][j].to_f64())),
            pa: [0, 1].map(|i| self.pa[i].to_f64()),
            pb: [0, 1].map(|i| self.pb[i].to_f64()),
            provenance: self.provenance,
            stderr: self.stderr,
        }
    }

    /// Convex combination `(1 - t) self + t other`.
    pub fn mix(&self, other: &Self, t: &T) -> Self {
        let s = T::one() - t.clone();
        let lerp = |x: &T, y: &T| s.clone() * x.clone() + t.clone() * y.clone();
        CorrelationTable {
            settings: self.settings,
            p11: [0, 1].map(|i| [0, 1].map(|j| lerp(&self.p11[i][j], &other.p11[i][j]))),
            pa: [0, 1].map(|i| lerp(&self.pa[i], &other.pa[i])),
            pb: [0, 1].map(|i| lerp(&self.pb[i], &other.pb[i])),
            provenance: Provenance::Analytic,
            stderr: None,
        }
    }
}

impl CorrelationTable<f64> {
    /// Rounds every entry to the nearest multiple of `precision`.
    pub fn rationalize(&self, precision: f64) -> Result<ExactTable> {
        let r = |x: f64| rational::rationalize(x, precision);
        let t = CorrelationTable {
            settings: self.settings,
            p11: [[r(self.p11[0][0])?, r(self.p11[0][1])?], [r(self.p11[1][0])?, r(self.p11[1][1])?]],
            pa: [r(self.pa[0])?, r(self.pa[1])?],
            pb: [r(self.pb[0])?, r(self.pb[1])?],
            provenance: self.provenance,
            stderr: None,
        };
        t.validate()?;
        Ok(t)
    }
}

/// Table in either numeric kind, as read from a file.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum AnyTable {
    Exact(ExactTable),
    Float(CorrelationTable<f64>),
}

impl AnyTable {
    pub fn to_f64(&self) -> CorrelationTable<f64> {
        match self {
            AnyTable::Exact(t) => t.to_f64(),
            AnyTable::Float(t) => t.clone(),
        }
    }

    pub fn settings(&self) -> &Settings {
        match self {
            AnyTable::Exact(t) => &t.settings,
            AnyTable::Float(t) => &t.settings,
        }
    }
}

fn pair_label(settings: &Settings, i: usize, j: usize) -> String {
    format!("{}:{}", settings.alice[i], settings.bob[j])
}

/// CSV with columns `pair,p11,pA,pB,stderr`. Exact tables print `p/q`
/// strings and leave `stderr` empty.
pub fn write_table_csv<T: Scalar, W: Write>(out: W, t: &CorrelationTable<T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["pair", "p11", "pA", "pB", "stderr"])?;
    let fmt = |v: &T| match v.as_rational() {
        Some(r) => rational::format(&r),
        None => format!("{}", v.to_f64()),
    };
    for (i, j) in PAIRS {
        let se = t.stderr.map(|e| e.p11[i][j].to_string()).unwrap_or_default();
        w.write_record([pair_label(&t.settings, i, j), fmt(&t.p11[i][j]), fmt(&t.pa[i]), fmt(&t.pb[j]), se])?;
    }
    w.flush().map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(())
}

/// Reads a table CSV. Without standard errors the entries are parsed exactly
/// (decimals included); with them the table is an estimate.
pub fn read_table_csv<R: Read>(input: R) -> Result<AnyTable> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.len() < 4 || cols[..4] != ["pair", "p11", "pA", "pB"] {
        return Err(Error::InvalidInput(format!("unexpected table header {cols:?}")));
    }
    let rows: Vec<csv::StringRecord> = r.records().collect::<std::result::Result<_, _>>()?;
    if rows.len() != 4 {
        return Err(Error::InvalidInput(format!("expected 4 setting pairs, found {}", rows.len())));
    }
    let mut alice: Vec<Angle> = Vec::new();
    let mut bob: Vec<Angle> = Vec::new();
    let mut keyed = Vec::new();
    for row in &rows {
        let (a, b) = row[0]
            .split_once(':')
            .ok_or_else(|| Error::InvalidInput(format!("pair `{}` is not `alpha:beta`", &row[0])))?;
        let (a, b): (Angle, Angle) = (a.parse()?, b.parse()?);
        if !alice.contains(&a) {
            alice.push(a);
        }
        if !bob.contains(&b) {
            bob.push(b);
        }
        keyed.push((a, b, row));
    }
    if alice.len() != 2 || bob.len() != 2 {
        return Err(Error::InvalidInput("table must cover two settings per side".into()));
    }
    let settings = Settings::new(alice[0], alice[1], bob[0], bob[1])?;
    let estimated = rows.iter().any(|row| row.get(4).is_some_and(|s| !s.trim().is_empty()));

    let mut seen = [[false; 2]; 2];
    let mut p11: [[Option<Rational>; 2]; 2] = Default::default();
    let mut pa: [Option<Rational>; 2] = Default::default();
    let mut pb: [Option<Rational>; 2] = Default::default();
    let mut se = [[0.0f64; 2]; 2];
    for (a, b, row) in keyed {
        let i = settings.alice_index(a)?;
        let j = settings.bob_index(b)?;
        if seen[i][j] {
            return Err(Error::InvalidInput(format!("pair {a}:{b} listed twice")));
        }
        seen[i][j] = true;
        let num = |s: &str| -> Result<Rational> {
            rational::parse(s).or_else(|_| {
                let x: f64 = s.trim().parse().map_err(|_| Error::InvalidInput(format!("not a number: `{s}`")))?;
                rational::rationalize(x, 1e-15)
            })
        };
        p11[i][j] = Some(num(&row[1])?);
        let consistent = |slot: &mut Option<Rational>, v: Rational, what: &str| -> Result<()> {
            match slot {
                Some(prev) if *prev != v => Err(Error::InconsistentTable(format!(
                    "{what} differs between pairs sharing a setting"
                ))),
                _ => {
                    *slot = Some(v);
                    Ok(())
                }
            }
        };
        consistent(&mut pa[i], num(&row[2])?, "pA")?;
        consistent(&mut pb[j], num(&row[3])?, "pB")?;
        if estimated {
            se[i][j] = row
                .get(4)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput("missing stderr".into()))?;
        }
    }
    let take = |o: &Option<Rational>| o.clone().expect("all pairs seen");
    let exact = CorrelationTable {
        settings,
        p11: [0, 1].map(|i| [0, 1].map(|j| take(&p11[i][j]))),
        pa: [0, 1].map(|i| take(&pa[i])),
        pb: [0, 1].map(|i| take(&pb[i])),
        provenance: Provenance::Analytic,
        stderr: None,
    };
    if estimated {
        let mut t = exact.to_f64();
        t.stderr = Some(TableErrors { p11: se, pa: [0.0; 2], pb: [0.0; 2] });
        t.provenance = Provenance::Estimated { runs: 0 };
        t.validate()?;
        Ok(AnyTable::Float(t))
    } else {
        exact.validate()?;
        Ok(AnyTable::Exact(exact))
    }
}
