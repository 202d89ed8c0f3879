//! Monte Carlo Bell runs: random settings, outcome sampling, per-side
//! detection, coincidence selection and frequency estimation.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Model;
use crate::rational;
use crate::spaces::{Angle, Settings};
use crate::table::{CorrelationTable, Provenance, TableErrors, PAIRS};

/// Minimum number of rows per setting pair before a table is reported.
pub const MIN_PAIR_COUNT: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionMode {
    /// Each side detected with probability η, independently of everything.
    Independent,
    /// Detection depends on λ: a side fires only when the hidden polarization
    /// is within reach of its analyzer, `|cos 2(s - λ)| >= 1 - η`.
    Conspiratorial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRow {
    pub run: u64,
    pub alpha: usize,
    pub beta: usize,
    pub a: bool,
    pub b: bool,
    pub det_a: bool,
    pub det_b: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub seed: u64,
    pub model: String,
    pub settings: Settings,
    pub eta: f64,
    pub mode: DetectionMode,
    pub rows: Vec<RunRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub runs: u64,
    pub seed: u64,
    /// Weights of the setting pairs in `PAIRS` order.
    pub policy: [f64; 4],
    pub eta: f64,
    pub mode: DetectionMode,
}

impl RunConfig {
    pub fn new(runs: u64, seed: u64) -> Self {
        RunConfig { runs, seed, policy: [0.25; 4], eta: 1.0, mode: DetectionMode::Independent }
    }
}

/// Outcome law per setting pair, `[p00, p01, p10, p11]`.
enum Sampler {
    Table([[[f64; 4]; 2]; 2]),
    Lhv { cumulative: Vec<f64>, a: [Vec<f64>; 2], b: [Vec<f64>; 2] },
}

impl Sampler {
    fn new(model: &Model) -> Self {
        match model {
            Model::Lhv(m) => {
                let prior: Vec<f64> = m.prior().iter().map(rational::to_f64).collect();
                let cumulative = prior
                    .iter()
                    .scan(0.0, |acc, p| {
                        *acc += p;
                        Some(*acc)
                    })
                    .collect();
                let conv = |r: &[Vec<crate::rational::Rational>; 2]| r.clone().map(|v| v.iter().map(rational::to_f64).collect());
                Sampler::Lhv { cumulative, a: conv(&m.a_response), b: conv(&m.b_response) }
            }
            other => {
                let t = other.table_f64();
                Sampler::Table([0, 1].map(|i| {
                    [0, 1].map(|j| {
                        let p11 = t.p11[i][j];
                        let p10 = t.pa[i] - p11;
                        let p01 = t.pb[j] - p11;
                        [(1.0 - p11 - p10 - p01).max(0.0), p01.max(0.0), p10.max(0.0), p11]
                    })
                }))
            }
        }
    }

    /// Draws `(A, B, λ index)`.
    fn draw(&self, rng: &mut ChaCha8Rng, i: usize, j: usize) -> (bool, bool, Option<usize>) {
        match self {
            Sampler::Table(law) => {
                let u: f64 = rng.gen();
                let p = &law[i][j];
                let mut acc = 0.0;
                let mut k = 3;
                for (idx, q) in p.iter().enumerate() {
                    acc += q;
                    if u < acc {
                        k = idx;
                        break;
                    }
                }
                (k & 2 != 0, k & 1 != 0, None)
            }
            Sampler::Lhv { cumulative, a, b, .. } => {
                let u: f64 = rng.gen();
                let l = cumulative.iter().position(|c| u < *c).unwrap_or(cumulative.len() - 1);
                let x = rng.gen::<f64>() < a[i][l];
                let y = rng.gen::<f64>() < b[j][l];
                (x, y, Some(l))
            }
        }
    }
}

fn pick_pair(cumulative: &[f64; 4], u: f64) -> (usize, usize) {
    PAIRS[cumulative.iter().position(|c| u < *c).unwrap_or(3)]
}

/// Samples `cfg.runs` i.i.d. rows. Row `k` draws only from its own ChaCha8
/// stream `k`, so the log does not depend on thread scheduling.
pub fn run_experiment(model: &Model, cfg: &RunConfig) -> Result<RunLog> {
    if cfg.runs == 0 {
        return Err(Error::InvalidInput("at least one run is required".into()));
    }
    if !(cfg.eta > 0.0 && cfg.eta <= 1.0) {
        return Err(Error::DomainError(format!("efficiency {} outside (0,1]", cfg.eta)));
    }
    if cfg.policy.iter().any(|p| !p.is_finite() || *p <= 0.0) {
        return Err(Error::InsufficientCoverage(format!(
            "setting policy {:?} must be strictly positive on all four pairs",
            cfg.policy
        )));
    }
    let total: f64 = cfg.policy.iter().sum();
    let mut cumulative = [0.0; 4];
    let mut acc = 0.0;
    for (c, p) in cumulative.iter_mut().zip(cfg.policy) {
        acc += p / total;
        *c = acc;
    }
    let polarization = match (cfg.mode, model) {
        (DetectionMode::Independent, _) => None,
        (DetectionMode::Conspiratorial, Model::Lhv(m)) => Some(m.polarization.clone().ok_or_else(|| {
            Error::InvalidInput("conspiratorial detection needs an LHV model with a hidden polarization".into())
        })?),
        (DetectionMode::Conspiratorial, _) => {
            return Err(Error::InvalidInput("conspiratorial detection needs an LHV model".into()))
        }
    };
    let settings = *model.settings();
    let sampler = Sampler::new(model);
    let reach = |s: Angle, l: f64| (2.0 * (s.radians() - l.to_radians())).cos().abs() >= 1.0 - cfg.eta;

    let rows = (0..cfg.runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(run);
            let (alpha, beta) = pick_pair(&cumulative, rng.gen());
            let (a, b, l) = sampler.draw(&mut rng, alpha, beta);
            let (det_a, det_b) = match (&polarization, l) {
                (Some(pol), Some(l)) => (reach(settings.alice[alpha], pol[l]), reach(settings.bob[beta], pol[l])),
                _ => (rng.gen::<f64>() < cfg.eta, rng.gen::<f64>() < cfg.eta),
            };
            RunRow { run, alpha, beta, a, b, det_a, det_b }
        })
        .collect();
    Ok(RunLog { seed: cfg.seed, model: model.kind().to_string(), settings, eta: cfg.eta, mode: cfg.mode, rows })
}

impl RunLog {
    pub fn counts(&self) -> [[usize; 2]; 2] {
        let mut c = [[0; 2]; 2];
        for r in &self.rows {
            c[r.alpha][r.beta] += 1;
        }
        c
    }

    /// CSV with header `run,alpha,beta,A,B,detA,detB`; angles in degrees.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(RUNLOG_HEADER)?;
        let bit = |b: bool| if b { "1" } else { "0" };
        for r in &self.rows {
            w.write_record([
                r.run.to_string().as_str(),
                &self.settings.alice[r.alpha].to_string(),
                &self.settings.bob[r.beta].to_string(),
                bit(r.a),
                bit(r.b),
                bit(r.det_a),
                bit(r.det_b),
            ])?;
        }
        w.flush().map_err(|e| Error::InvalidInput(e.to_string()))?;
        Ok(())
    }

    /// Reads a CSV log, mapping angles back to setting indices.
    pub fn read_csv<R: Read>(input: R, settings: Settings) -> Result<Vec<RunRow>> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != RUNLOG_HEADER {
            return Err(Error::InvalidInput(format!("unexpected run log header {headers:?}")));
        }
        let bit = |s: &str| match s.trim() {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(Error::InvalidInput(format!("`{other}` is not a bit"))),
        };
        r.records()
            .map(|rec| {
                let rec = rec?;
                Ok(RunRow {
                    run: rec[0].trim().parse().map_err(|_| Error::InvalidInput(format!("bad run index `{}`", &rec[0])))?,
                    alpha: settings.alice_index(rec[1].parse()?)?,
                    beta: settings.bob_index(rec[2].parse()?)?,
                    a: bit(&rec[3])?,
                    b: bit(&rec[4])?,
                    det_a: bit(&rec[5])?,
                    det_b: bit(&rec[6])?,
                })
            })
            .collect()
    }
}

pub const RUNLOG_HEADER: [&str; 7] = ["run", "alpha", "beta", "A", "B", "detA", "detB"];

/// Keeps the rows where both sides fired.
pub fn coincidence_filter(log: &RunLog) -> Result<RunLog> {
    let rows: Vec<RunRow> = log.rows.iter().filter(|r| r.det_a && r.det_b).copied().collect();
    if rows.is_empty() {
        return Err(Error::EmptyLog);
    }
    Ok(RunLog { rows, ..log.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub n: usize,
    pub p: f64,
    pub stderr: f64,
}

impl Frequency {
    fn of(hits: usize, n: usize) -> Self {
        let p = hits as f64 / n as f64;
        Frequency { n, p, stderr: (p * (1.0 - p) / n as f64).sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimator {
    pub p11: [[Frequency; 2]; 2],
    /// `P(A=1 | α_i)` pooled over β.
    pub pa: [Frequency; 2],
    pub pb: [Frequency; 2],
    /// `P(A=1 | α_i, β_j)`, for nonsignaling checks.
    pub pa_given: [[Frequency; 2]; 2],
    /// `P(B=1 | α_i, β_j)`.
    pub pb_given: [[Frequency; 2]; 2],
    pub runs: u64,
}

/// Frequency estimates from a log. Every pair needs `MIN_PAIR_COUNT` rows.
pub fn estimate(log: &RunLog) -> Result<Estimator> {
    if log.rows.is_empty() {
        return Err(Error::EmptyLog);
    }
    let counts = log.counts();
    for (i, j) in PAIRS {
        if counts[i][j] < MIN_PAIR_COUNT {
            return Err(Error::InsufficientCoverage(format!(
                "pair ({},{}) observed {} times, need {MIN_PAIR_COUNT}",
                log.settings.alice[i], log.settings.bob[j], counts[i][j]
            )));
        }
    }
    let mut hits11 = [[0usize; 2]; 2];
    let mut hits_a = [[0usize; 2]; 2];
    let mut hits_b = [[0usize; 2]; 2];
    for r in &log.rows {
        hits11[r.alpha][r.beta] += (r.a && r.b) as usize;
        hits_a[r.alpha][r.beta] += r.a as usize;
        hits_b[r.alpha][r.beta] += r.b as usize;
    }
    let grid = |h: &[[usize; 2]; 2]| [0, 1].map(|i| [0, 1].map(|j| Frequency::of(h[i][j], counts[i][j])));
    Ok(Estimator {
        p11: grid(&hits11),
        pa: [0, 1].map(|i| Frequency::of(hits_a[i][0] + hits_a[i][1], counts[i][0] + counts[i][1])),
        pb: [0, 1].map(|j| Frequency::of(hits_b[0][j] + hits_b[1][j], counts[0][j] + counts[1][j])),
        pa_given: grid(&hits_a),
        pb_given: grid(&hits_b),
        runs: log.rows.len() as u64,
    })
}

/// Estimated table with standard errors attached.
pub fn estimate_table(log: &RunLog) -> Result<CorrelationTable<f64>> {
    let e = estimate(log)?;
    Ok(e.table(log.settings))
}

impl Estimator {
    pub fn table(&self, settings: Settings) -> CorrelationTable<f64> {
        CorrelationTable {
            settings,
            p11: self.p11.map(|r| r.map(|f| f.p)),
            pa: self.pa.map(|f| f.p),
            pb: self.pb.map(|f| f.p),
            provenance: Provenance::Estimated { runs: self.runs },
            stderr: Some(TableErrors {
                p11: self.p11.map(|r| r.map(|f| f.stderr)),
                pa: self.pa.map(|f| f.stderr),
                pb: self.pb.map(|f| f.stderr),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{threshold_photon_lhv, QuantumPairModel};

    fn quantum() -> Model {
        Model::Quantum(QuantumPairModel { settings: Settings::tsirelson() })
    }

    #[test]
    fn full_efficiency_detects_everything() {
        let log = run_experiment(&quantum(), &RunConfig::new(2000, 1)).unwrap();
        assert!(log.rows.iter().all(|r| r.det_a && r.det_b));
        assert_eq!(coincidence_filter(&log).unwrap(), log);
    }

    #[test]
    fn same_seed_same_log() {
        let a = run_experiment(&quantum(), &RunConfig::new(5000, 9)).unwrap();
        let b = run_experiment(&quantum(), &RunConfig::new(5000, 9)).unwrap();
        assert_eq!(a, b);
        let c = run_experiment(&quantum(), &RunConfig::new(5000, 10)).unwrap();
        assert_ne!(a.rows, c.rows);
    }

    #[test]
    fn bad_config() {
        let mut cfg = RunConfig::new(10, 0);
        cfg.policy = [1.0, 1.0, 1.0, 0.0];
        assert!(matches!(run_experiment(&quantum(), &cfg), Err(Error::InsufficientCoverage(_))));
        let mut cfg = RunConfig::new(10, 0);
        cfg.eta = 0.0;
        assert!(matches!(run_experiment(&quantum(), &cfg), Err(Error::DomainError(_))));
        assert!(run_experiment(&quantum(), &RunConfig::new(0, 0)).is_err());
        let mut cfg = RunConfig::new(10, 0);
        cfg.mode = DetectionMode::Conspiratorial;
        assert!(run_experiment(&quantum(), &cfg).is_err());
    }

    #[test]
    fn coverage_threshold() {
        let log = run_experiment(&quantum(), &RunConfig::new(40, 3)).unwrap();
        assert!(matches!(estimate_table(&log), Err(Error::InsufficientCoverage(_))));
    }

    #[test]
    fn csv_round_trip() {
        let log = run_experiment(&quantum(), &RunConfig::new(50, 4)).unwrap();
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("run,alpha,beta,A,B,detA,detB\n0,"));
        assert_eq!(RunLog::read_csv(buf.as_slice(), log.settings).unwrap(), log.rows);
    }

    #[test]
    fn conspiratorial_mode_runs_on_threshold_model() {
        let m = Model::Lhv(threshold_photon_lhv(36, Settings::tsirelson()).unwrap());
        let mut cfg = RunConfig::new(1000, 5);
        cfg.mode = DetectionMode::Conspiratorial;
        cfg.eta = 0.5;
        let log = run_experiment(&m, &cfg).unwrap();
        let kept = coincidence_filter(&log).unwrap();
        assert!(kept.rows.len() < log.rows.len());
    }
}
