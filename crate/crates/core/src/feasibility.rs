//! Joint-distribution existence for a correlation table: exact LP feasibility
//! over the 16 deterministic assignments, the CHSH-orientation oracle, and
//! minimal-negativity signed joints.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{table_from_assignments, DeterministicMixture};
use crate::rational::{self, Rational, RATIONALIZE_PRECISION};
use crate::simplex::{minimize, LpOutcome};
use crate::table::{AnyTable, ExactTable, Scalar, PAIRS};

/// The CHSH expression with the minus sign on `minus = (i, j)`:
/// `Σ p11 - 2 p11[i][j] - pA[1-i] - pB[1-j]`, which lies in `[-1, 0]` for
/// every local table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineOrientation {
    pub minus: (usize, usize),
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

impl FineOrientation {
    pub fn holds(&self) -> bool {
        self.lower_ok && self.upper_ok
    }
}

pub fn orientation_value<T: Scalar>(t: &crate::table::CorrelationTable<T>, (i, j): (usize, usize)) -> T {
    let mut v = T::zero();
    for (a, b) in PAIRS {
        v = v + t.p11[a][b].clone();
    }
    v - T::from_i64(2) * t.p11[i][j].clone() - t.pa[1 - i].clone() - t.pb[1 - j].clone()
}

/// The four orientations, each checked against both bounds.
pub fn fine_orientations<T: Scalar>(t: &crate::table::CorrelationTable<T>) -> Vec<FineOrientation> {
    PAIRS
        .into_iter()
        .map(|minus| {
            let v = orientation_value(t, minus);
            let (lower_ok, upper_ok) = if T::EXACT {
                (v >= T::from_i64(-1), v <= T::zero())
            } else {
                let x = v.to_f64();
                (x >= -1.0 - crate::table::ANALYTIC_TOLERANCE, x <= crate::table::ANALYTIC_TOLERANCE)
            };
            FineOrientation {
                minus,
                value: v.to_f64(),
                exact: v.as_rational().map(|r| rational::format(&r)),
                lower_ok,
                upper_ok,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityCertificate {
    pub feasible: bool,
    /// Set when the input was a float table rounded before solving.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    /// Weights of the 16 assignments, `A_α` most significant.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_weights")]
    pub witness: Option<Vec<Rational>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violated: Option<FineOrientation>,
    pub orientations: Vec<FineOrientation>,
}

mod opt_weights {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<Rational>>, s: S) -> std::result::Result<S::Ok, S::Error> {
        v.as_ref().map(|w| w.iter().map(rational::format).collect::<Vec<_>>()).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Vec<Rational>>, D::Error> {
        let raw: Option<Vec<String>> = Option::deserialize(d)?;
        raw.map(|v| v.iter().map(|s| rational::parse(s).map_err(serde::de::Error::custom)).collect())
            .transpose()
    }
}

impl FeasibilityCertificate {
    pub fn mixture(&self, t: &ExactTable) -> Option<DeterministicMixture> {
        let w = self.witness.as_ref()?;
        DeterministicMixture::new(t.settings, w.clone().try_into().ok()?).ok()
    }
}

/// Rows of the 9 equalities: 4 joints, 4 marginals, normalization.
fn constraints(t: &ExactTable) -> (Vec<Vec<Rational>>, Vec<Rational>) {
    let row = |pred: &dyn Fn([bool; 4]) -> bool| -> Vec<Rational> {
        (0..16)
            .map(|s| if pred(DeterministicMixture::assignment(s)) { rational::one() } else { rational::zero() })
            .collect()
    };
    let mut a = Vec::with_capacity(9);
    let mut b = Vec::with_capacity(9);
    for (i, j) in PAIRS {
        a.push(row(&|x| x[i] && x[2 + j]));
        b.push(t.p11[i][j].clone());
    }
    for i in 0..2 {
        a.push(row(&|x| x[i]));
        b.push(t.pa[i].clone());
    }
    for j in 0..2 {
        a.push(row(&|x| x[2 + j]));
        b.push(t.pb[j].clone());
    }
    a.push(row(&|_| true));
    b.push(rational::one());
    (a, b)
}

fn reproduces(t: &ExactTable, weights: &[Rational; 16]) -> bool {
    let r = table_from_assignments(t.settings, weights);
    r.p11 == t.p11 && r.pa == t.pa && r.pb == t.pb && weights.iter().sum::<Rational>() == rational::one()
}

/// Decides whether the table is a mixture of deterministic assignments.
pub fn fine_feasible(t: &ExactTable) -> Result<FeasibilityCertificate> {
    t.validate()?;
    let (a, b) = constraints(t);
    let orientations = fine_orientations(t);
    match minimize(&vec![rational::zero(); 16], &a, &b)? {
        LpOutcome::Optimal { x, .. } => {
            let w: [Rational; 16] = x.try_into().map_err(|_| Error::Solver("wrong witness length".into()))?;
            if !reproduces(t, &w) {
                return Err(Error::Solver("witness does not reproduce the table".into()));
            }
            if let Some(o) = orientations.iter().find(|o| !o.holds()) {
                return Err(Error::Solver(format!("feasible LP but orientation {:?} is violated", o.minus)));
            }
            Ok(FeasibilityCertificate { feasible: true, precision: None, witness: Some(w.to_vec()), violated: None, orientations })
        }
        LpOutcome::Infeasible => {
            let violated = orientations
                .iter()
                .filter(|o| !o.holds())
                .max_by(|x, y| excess(x).total_cmp(&excess(y)))
                .cloned()
                .ok_or_else(|| Error::Solver("infeasible LP but every orientation holds".into()))?;
            Ok(FeasibilityCertificate { feasible: false, precision: None, witness: None, violated: Some(violated), orientations })
        }
        LpOutcome::Unbounded => Err(Error::Solver("zero objective reported unbounded".into())),
    }
}

fn excess(o: &FineOrientation) -> f64 {
    (o.value).max(-1.0 - o.value)
}

/// As `fine_feasible`, rounding float tables at `RATIONALIZE_PRECISION`
/// first and recording the precision in the certificate.
pub fn fine_feasible_any(t: &AnyTable) -> Result<FeasibilityCertificate> {
    match t {
        AnyTable::Exact(t) => fine_feasible(t),
        AnyTable::Float(f) => {
            let mut c = fine_feasible(&f.rationalize(RATIONALIZE_PRECISION)?)?;
            c.precision = Some(RATIONALIZE_PRECISION);
            Ok(c)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedJoint {
    #[serde(with = "crate::rational::serde_rational_vec")]
    pub weights: Vec<Rational>,
    /// `Σ max(0, -w)`.
    #[serde(with = "crate::rational::serde_rational")]
    pub negativity: Rational,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
}

/// Signed weights on the 16 assignments reproducing the table with the least
/// total negative mass. Solved with `w = w⁺ - w⁻`, minimizing `Σ w⁻`.
pub fn min_negativity_joint(t: &ExactTable) -> Result<SignedJoint> {
    t.validate()?;
    let (a, b) = constraints(t);
    let split: Vec<Vec<Rational>> =
        a.iter().map(|row| row.iter().cloned().chain(row.iter().map(|v| -v)).collect()).collect();
    let c: Vec<Rational> = (0..32).map(|k| if k < 16 { rational::zero() } else { rational::one() }).collect();
    let LpOutcome::Optimal { x, value } = minimize(&c, &split, &b)? else {
        return Err(Error::Solver("signed reproduction LP has no optimum".into()));
    };
    let weights: Vec<Rational> = (0..16).map(|k| &x[k] - &x[16 + k]).collect();
    let negativity: Rational = weights.iter().filter(|w| w.is_negative()).map(|w| -w).sum();
    let w16: [Rational; 16] = weights.clone().try_into().expect("16 weights");
    if !reproduces(t, &w16) || negativity != value {
        return Err(Error::Solver("signed joint does not reproduce the table".into()));
    }
    Ok(SignedJoint { weights, negativity, precision: None })
}

pub fn min_negativity_any(t: &AnyTable) -> Result<SignedJoint> {
    match t {
        AnyTable::Exact(t) => min_negativity_joint(t),
        AnyTable::Float(f) => {
            let mut j = min_negativity_joint(&f.rationalize(RATIONALIZE_PRECISION)?)?;
            j.precision = Some(RATIONALIZE_PRECISION);
            Ok(j)
        }
    }
}

impl SignedJoint {
    pub fn is_measure(&self) -> bool {
        self.negativity.is_zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{pr_table, QuantumPairModel};
    use crate::rational::{int, ratio};
    use crate::spaces::Settings;
    use crate::table::CorrelationTable;

    fn coins() -> ExactTable {
        let h = ratio(1, 2);
        CorrelationTable::product(Settings::default(), [h.clone(), h.clone()], [h.clone(), h]).unwrap()
    }

    #[test]
    fn coins_are_feasible() {
        let c = fine_feasible(&coins()).unwrap();
        assert!(c.feasible);
        assert!(c.orientations.iter().all(FineOrientation::holds));
        assert!(c.mixture(&coins()).is_some());
        // The uniform weighting is also a witness.
        let uniform: [Rational; 16] = std::array::from_fn(|_| ratio(1, 16));
        assert!(reproduces(&coins(), &uniform));
    }

    #[test]
    fn pr_box_is_infeasible() {
        let c = fine_feasible(&pr_table(Settings::default())).unwrap();
        assert!(!c.feasible);
        let v = c.violated.unwrap();
        assert_eq!(v.exact.as_deref(), Some("1/2"));
        assert_eq!(v.minus, (1, 1));
    }

    #[test]
    fn quantum_optimum_is_infeasible() {
        let q = QuantumPairModel { settings: Settings::tsirelson() }.table();
        let c = fine_feasible_any(&AnyTable::Float(q)).unwrap();
        assert!(!c.feasible);
        assert_eq!(c.precision, Some(1e-9));
        let v = c.violated.unwrap();
        assert!((v.value - 0.207_106_781_2).abs() < 1e-8);
        let upper: Vec<_> = c.orientations.iter().filter(|o| !o.upper_ok).map(|o| o.minus).collect();
        assert_eq!(upper, vec![(1, 1)]);
    }

    #[test]
    fn negativity_examples() {
        assert_eq!(min_negativity_joint(&coins()).unwrap().negativity, int(0));
        assert_eq!(min_negativity_joint(&pr_table(Settings::default())).unwrap().negativity, ratio(1, 2));
    }

    #[test]
    fn certificate_json_uses_fraction_strings() {
        let c = fine_feasible(&coins()).unwrap();
        let json = serde_json::to_value(&c).unwrap();
        assert!(json["witness"].as_array().unwrap().iter().all(|w| w.is_string()));
        let back: FeasibilityCertificate = serde_json::from_value(json).unwrap();
        assert_eq!(back.witness, c.witness);
    }
}
