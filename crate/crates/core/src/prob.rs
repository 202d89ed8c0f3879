//! Finite Kolmogorov probability spaces.
//!
//! A [`SampleSpace`] is the Cartesian product of finitely many named
//! variables, enumerated in lexicographic order of declaration (the first
//! declared variable varies slowest). Event spaces are atom partitions of the
//! outcome set: every event of the induced σ-algebra is a union of atoms, so
//! closure under complement, union and intersection reduces to the partition
//! being valid. Measures assign an exact rational weight to each atom.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use bitvec::prelude::*;
use num_bigint::BigUint;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSpace {
    variables: Vec<Variable>,
    strides: Vec<usize>,
    len: usize,
}

impl SampleSpace {
    /// Full Cartesian product of the declared variables.
    pub fn new<N, V, I>(variables: I) -> Result<Self>
    where
        I: IntoIterator<Item = (N, Vec<V>)>,
        N: Into<String>,
        V: Into<String>,
    {
        let variables: Vec<Variable> = variables
            .into_iter()
            .map(|(n, vs)| Variable { name: n.into(), values: vs.into_iter().map(Into::into).collect() })
            .collect();
        Self::from_variables(variables)
    }

    pub fn from_variables(variables: Vec<Variable>) -> Result<Self> {
        let mut names = HashSet::new();
        for v in &variables {
            if !names.insert(v.name.as_str()) {
                return Err(Error::InvalidSpace(format!("duplicate variable `{}`", v.name)));
            }
            if v.values.is_empty() {
                return Err(Error::InvalidSpace(format!("variable `{}` has no values", v.name)));
            }
            let distinct: HashSet<_> = v.values.iter().collect();
            if distinct.len() != v.values.len() {
                return Err(Error::InvalidSpace(format!("variable `{}` has repeated values", v.name)));
            }
        }
        let mut strides = vec![0; variables.len()];
        let mut len = 1usize;
        for (i, v) in variables.iter().enumerate().rev() {
            strides[i] = len;
            len = len
                .checked_mul(v.values.len())
                .ok_or_else(|| Error::InvalidSpace("sample space too large".into()))?;
        }
        Ok(SampleSpace { variables, strides, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn has_variable(&self, name: &str) -> bool {
        self.variables.iter().any(|v| v.name == name)
    }

    pub fn variable_index(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn value_index(&self, var: usize, label: &str) -> Result<usize> {
        let v = &self.variables[var];
        v.values.iter().position(|x| x == label).ok_or_else(|| Error::UnknownValue {
            variable: v.name.clone(),
            value: label.to_string(),
        })
    }

    /// Value index of variable `var` in outcome `outcome`.
    #[inline]
    pub fn value(&self, outcome: usize, var: usize) -> usize {
        (outcome / self.strides[var]) % self.variables[var].values.len()
    }

    pub fn outcome(&self, index: usize) -> Vec<usize> {
        (0..self.variables.len()).map(|v| self.value(index, v)).collect()
    }

    pub fn index_of(&self, values: &[usize]) -> usize {
        values.iter().zip(&self.strides).map(|(v, s)| v * s).sum()
    }

    pub fn outcome_label(&self, index: usize) -> String {
        self.variables
            .iter()
            .enumerate()
            .map(|(i, v)| format!("{}={}", v.name, v.values[self.value(index, i)]))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn event<F: Fn(&[usize]) -> bool>(&self, pred: F) -> Event {
        let mut bits = bitvec![0; self.len];
        let mut buf = vec![0usize; self.variables.len()];
        for i in 0..self.len {
            for (v, slot) in buf.iter_mut().enumerate() {
                *slot = self.value(i, v);
            }
            if pred(&buf) {
                bits.set(i, true);
            }
        }
        Event { bits }
    }

    /// Conjunction of `variable = value` constraints.
    pub fn event_where(&self, constraints: &[(&str, &str)]) -> Result<Event> {
        let resolved = constraints
            .iter()
            .map(|(name, label)| {
                let v = self.variable_index(name)?;
                Ok((v, self.value_index(v, label)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.event(|o| resolved.iter().all(|&(v, x)| o[v] == x)))
    }
}

impl fmt::Display for SampleSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.variables.iter().map(|v| v.name.as_str()).collect();
        write!(f, "({}) [{} outcomes]", names.join(","), self.len)
    }
}

/// A set of outcomes, stored as a bitset over outcome indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Event {
    bits: BitVec,
}

impl Event {
    pub fn empty(len: usize) -> Self {
        Event { bits: bitvec![0; len] }
    }

    pub fn full(len: usize) -> Self {
        Event { bits: bitvec![1; len] }
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut e = Self::empty(len);
        for i in indices {
            e.bits.set(i, true);
        }
        e
    }

    pub fn contains(&self, outcome: usize) -> bool {
        self.bits[outcome]
    }

    pub fn count(&self) -> usize {
        self.bits.count_ones()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.not_any()
    }

    pub fn universe_len(&self) -> usize {
        self.bits.len()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter_ones()
    }

    pub fn complement(&self) -> Event {
        Event { bits: !self.bits.clone() }
    }

    pub fn union(&self, other: &Event) -> Event {
        Event { bits: self.bits.clone() | &other.bits }
    }

    pub fn intersection(&self, other: &Event) -> Event {
        Event { bits: self.bits.clone() & &other.bits }
    }

    pub fn is_subset(&self, other: &Event) -> bool {
        self.indices().all(|i| other.contains(i))
    }
}

/// Atom partition of a sample space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventSpace {
    space: Arc<SampleSpace>,
    atoms: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub valid: bool,
    pub failures: Vec<String>,
    /// `2^atoms` when valid.
    pub induced_events: Option<String>,
}

impl EventSpace {
    /// Unchecked; run [`EventSpace::verify`] to validate.
    pub fn new(space: Arc<SampleSpace>, atoms: Vec<Vec<usize>>) -> Self {
        EventSpace { space, atoms }
    }

    /// The biggest event space: every outcome is its own atom.
    pub fn singletons(space: Arc<SampleSpace>) -> Self {
        let atoms = (0..space.len()).map(|i| vec![i]).collect();
        EventSpace { space, atoms }
    }

    /// The smallest event space, `{∅, Ω}`.
    pub fn trivial(space: Arc<SampleSpace>) -> Self {
        let atoms = vec![(0..space.len()).collect()];
        EventSpace { space, atoms }
    }

    pub fn space(&self) -> &Arc<SampleSpace> {
        &self.space
    }

    pub fn atoms(&self) -> &[Vec<usize>] {
        &self.atoms
    }

    pub fn is_singletons(&self) -> bool {
        self.atoms.len() == self.space.len() && self.atoms.iter().enumerate().all(|(i, a)| a.as_slice() == [i])
    }

    pub fn verify(&self) -> VerificationReport {
        let n = self.space.len();
        let mut failures = Vec::new();
        let mut seen = vec![false; n];
        for (k, atom) in self.atoms.iter().enumerate() {
            if atom.is_empty() {
                failures.push(format!("atom {k} is empty"));
            }
            for &o in atom {
                if o >= n {
                    failures.push(format!("atom {k} references outcome {o} outside the sample space"));
                } else if seen[o] {
                    failures.push(format!("atoms overlap at outcome {o}: complement not closed"));
                } else {
                    seen[o] = true;
                }
            }
        }
        let missing: Vec<_> = (0..n).filter(|&o| !seen[o]).collect();
        if !missing.is_empty() {
            failures.push(format!("not a cover: outcomes {missing:?} belong to no atom, Ω not an event"));
        }
        let valid = failures.is_empty();
        VerificationReport {
            valid,
            failures,
            induced_events: valid.then(|| (BigUint::one() << self.atoms.len()).to_string()),
        }
    }

    /// Indices of the atoms making up `e`, or `EventNotMeasurable`.
    pub fn decompose(&self, e: &Event) -> Result<Vec<usize>> {
        if e.universe_len() != self.space.len() {
            return Err(Error::EventNotMeasurable);
        }
        let mut out = Vec::new();
        for (k, atom) in self.atoms.iter().enumerate() {
            let inside = atom.iter().filter(|&&o| e.contains(o)).count();
            if inside == atom.len() {
                out.push(k);
            } else if inside != 0 {
                return Err(Error::EventNotMeasurable);
            }
        }
        Ok(out)
    }

    /// Every induced event; only practical for a handful of atoms.
    pub fn induced_events(&self) -> Vec<Event> {
        assert!(self.atoms.len() <= 16, "too many atoms to enumerate");
        let n = self.space.len();
        (0u32..(1 << self.atoms.len()))
            .map(|mask| {
                let idx = self
                    .atoms
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| mask >> k & 1 == 1)
                    .flat_map(|(_, a)| a.iter().copied());
                Event::from_indices(n, idx)
            })
            .collect()
    }
}

/// Probability measure given by atom weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    events: EventSpace,
    weights: Vec<Rational>,
}

impl Measure {
    pub fn new(events: EventSpace, weights: Vec<Rational>) -> Result<Self> {
        let report = events.verify();
        if !report.valid {
            return Err(Error::InvalidSpace(report.failures.join("; ")));
        }
        if weights.len() != events.atoms.len() {
            return Err(Error::NotAMeasure(format!(
                "{} weights for {} atoms",
                weights.len(),
                events.atoms.len()
            )));
        }
        if let Some((k, w)) = weights.iter().enumerate().find(|(_, w)| w.is_negative()) {
            return Err(Error::NotAMeasure(format!("atom {k} has negative weight {}", rational::format(w))));
        }
        let total: Rational = weights.iter().sum();
        if !total.is_one() {
            return Err(Error::NotAMeasure(format!("weights sum to {}", rational::format(&total))));
        }
        Ok(Measure { events, weights })
    }

    /// Measure on the singleton partition.
    pub fn from_outcome_weights(space: Arc<SampleSpace>, weights: Vec<Rational>) -> Result<Self> {
        Self::new(EventSpace::singletons(space), weights)
    }

    pub fn uniform(space: Arc<SampleSpace>) -> Self {
        let n = space.len() as i64;
        let weights = vec![rational::ratio(1, n); space.len()];
        Measure { events: EventSpace::singletons(space), weights }
    }

    pub fn space(&self) -> &Arc<SampleSpace> {
        self.events.space()
    }

    pub fn event_space(&self) -> &EventSpace {
        &self.events
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    /// Per-outcome weights; requires the singleton partition.
    pub fn outcome_weights(&self) -> Result<&[Rational]> {
        if self.events.is_singletons() {
            Ok(&self.weights)
        } else {
            Err(Error::EventNotMeasurable)
        }
    }

    pub fn probability(&self, e: &Event) -> Result<Rational> {
        if self.events.is_singletons() {
            if e.universe_len() != self.weights.len() {
                return Err(Error::EventNotMeasurable);
            }
            return Ok(e.indices().map(|i| &self.weights[i]).sum());
        }
        Ok(self.events.decompose(e)?.into_iter().map(|k| &self.weights[k]).sum())
    }

    pub fn conditional(&self, e1: &Event, e2: &Event) -> Result<Rational> {
        let p2 = self.probability(e2)?;
        if p2.is_zero() {
            return Err(Error::ConditionOnNull);
        }
        Ok(self.probability(&e1.intersection(e2))? / p2)
    }

    /// Marginal on the kept variables, which stay in declaration order.
    pub fn marginal(&self, keep: &[&str]) -> Result<Measure> {
        let space = self.space();
        let mut kept = keep.iter().map(|n| space.variable_index(n)).collect::<Result<Vec<_>>>()?;
        kept.sort_unstable();
        kept.dedup();
        let reduced = Arc::new(SampleSpace::from_variables(
            kept.iter().map(|&v| space.variables()[v].clone()).collect(),
        )?);
        let project = |o: usize| -> usize {
            let vals: Vec<usize> = kept.iter().map(|&v| space.value(o, v)).collect();
            reduced.index_of(&vals)
        };
        let mut weights = vec![Rational::zero(); reduced.len()];
        for (k, atom) in self.events.atoms.iter().enumerate() {
            let target = project(atom[0]);
            if atom.iter().any(|&o| project(o) != target) {
                return Err(Error::EventNotMeasurable);
            }
            weights[target] += &self.weights[k];
        }
        Ok(Measure { events: EventSpace::singletons(reduced), weights })
    }

    pub fn expectation(&self, f: &RandomVariable) -> Result<Rational> {
        if f.values.len() != self.space().len() {
            return Err(Error::InvalidInput(format!("random variable `{}` is not defined on this space", f.name)));
        }
        let mut total = Rational::zero();
        for (k, atom) in self.events.atoms.iter().enumerate() {
            let v = &f.values[atom[0]];
            if atom.iter().any(|&o| &f.values[o] != v) {
                return Err(Error::EventNotMeasurable);
            }
            total += v * &self.weights[k];
        }
        Ok(total)
    }

    pub fn to_document(&self) -> MeasureDocument {
        MeasureDocument {
            variables: self.space().variables().to_vec(),
            atoms: self.events.atoms.clone(),
            weights: self.weights.iter().map(rational::format).collect(),
        }
    }

    pub fn from_document(doc: &MeasureDocument) -> Result<Self> {
        let space = Arc::new(SampleSpace::from_variables(doc.variables.clone())?);
        let weights = doc.weights.iter().map(|w| rational::parse(w)).collect::<Result<Vec<_>>>()?;
        Measure::new(EventSpace::new(space, doc.atoms.clone()), weights)
    }
}

/// JSON form of a measure. Rationals are `"p/q"` strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasureDocument {
    pub variables: Vec<Variable>,
    pub atoms: Vec<Vec<usize>>,
    pub weights: Vec<String>,
}

/// A total map from outcomes to rationals.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomVariable {
    pub name: String,
    values: Vec<Rational>,
}

impl RandomVariable {
    pub fn new(name: impl Into<String>, values: Vec<Rational>) -> Self {
        RandomVariable { name: name.into(), values }
    }

    pub fn from_fn<F: Fn(&[usize]) -> Rational>(space: &SampleSpace, name: impl Into<String>, f: F) -> Self {
        let values = (0..space.len()).map(|i| f(&space.outcome(i))).collect();
        RandomVariable { name: name.into(), values }
    }

    pub fn constant(space: &SampleSpace, c: Rational) -> Self {
        RandomVariable { name: rational::format(&c), values: vec![c; space.len()] }
    }

    /// Indicator of `variable = label`.
    pub fn indicator(space: &SampleSpace, variable: &str, label: &str) -> Result<Self> {
        let v = space.variable_index(variable)?;
        let x = space.value_index(v, label)?;
        Ok(Self::from_fn(space, format!("1[{variable}={label}]"), |o| {
            if o[v] == x {
                Rational::one()
            } else {
                Rational::zero()
            }
        }))
    }

    /// The variable's value labels read as rationals (e.g. a 0/1 bit).
    pub fn numeric(space: &SampleSpace, variable: &str) -> Result<Self> {
        let v = space.variable_index(variable)?;
        let parsed = space.variables()[v]
            .values
            .iter()
            .map(|s| rational::parse(s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_fn(space, variable, |o| parsed[o[v]].clone()))
    }

    pub fn product(factors: &[&RandomVariable]) -> Result<Self> {
        let first = factors.first().ok_or_else(|| Error::InvalidInput("empty product".into()))?;
        let mut values = first.values.clone();
        for f in &factors[1..] {
            if f.values.len() != values.len() {
                return Err(Error::InvalidInput("factors live on different spaces".into()));
            }
            for (v, w) in values.iter_mut().zip(&f.values) {
                *v *= w;
            }
        }
        let name = factors.iter().map(|f| f.name.as_str()).collect::<Vec<_>>().join("·");
        Ok(RandomVariable { name, values })
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }
}

/// Relative frequency `N_E / M` of the rows satisfying `pred`.
pub fn relative_frequency<T>(rows: &[T], pred: impl Fn(&T) -> bool) -> Result<Rational> {
    if rows.is_empty() {
        return Err(Error::EmptyLog);
    }
    let hits = rows.iter().filter(|r| pred(r)).count();
    Ok(rational::ratio(hits as i64, rows.len() as i64))
}
