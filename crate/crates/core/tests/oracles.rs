//! Independent oracles for the analytic and LP results.

use bellspace_core::feasibility::{fine_feasible, fine_orientations, min_negativity_joint};
use bellspace_core::models::{pr_table, quantum_p11, table_from_assignments, DeterministicMixture, QuantumPairModel};
use bellspace_core::rational::{self, int, ratio, Rational, RATIONALIZE_PRECISION};
use bellspace_core::spaces::{Angle, Settings};
use bellspace_core::table::{CorrelationTable, ExactTable, PAIRS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Detection probability of `|Φ+⟩ = (|HH⟩ + |VV⟩)/√2` behind analyzers at
/// `a` and `b`, by explicit amplitudes in the `{HH, HV, VH, VV}` basis.
fn state_vector_p11(a: f64, b: f64) -> f64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let phi = [s, 0.0, 0.0, s];
    let pa = [a.cos(), a.sin()];
    let pb = [b.cos(), b.sin()];
    let amp: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| pa[i] * pb[j] * phi[2 * i + j]).sum();
    amp * amp
}

fn state_vector_pa(a: f64) -> f64 {
    // Sum over B's two orthogonal outcomes.
    state_vector_p11(a, 0.0) + state_vector_p11(a, std::f64::consts::FRAC_PI_2)
}

#[test]
fn quantum_law_matches_state_vector() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        let a = Angle::from_millidegrees(rng.gen_range(-180_000..180_000));
        let b = Angle::from_millidegrees(rng.gen_range(-180_000..180_000));
        assert!((quantum_p11(a, b) - state_vector_p11(a.radians(), b.radians())).abs() < 1e-12);
        assert!((state_vector_pa(a.radians()) - 0.5).abs() < 1e-12);
    }
}

#[test]
fn quantum_optimum_values() {
    let q = QuantumPairModel { settings: Settings::tsirelson() };
    let e = q.correlators();
    let s = e[0][0] + e[1][0] + e[0][1] - e[1][1];
    assert!((s - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-12);
    let t = q.table();
    let v = t.p11[0][0] + t.p11[1][0] + t.p11[0][1] - t.p11[1][1] - t.pa[0] - t.pb[0];
    assert!((v - (std::f64::consts::SQRT_2 - 1.0) / 2.0).abs() < 1e-12);
    for (i, j) in PAIRS {
        let ev = 4.0 * t.p11[i][j] - 2.0 * t.pa[i] - 2.0 * t.pb[j] + 1.0;
        assert!((ev - e[i][j]).abs() < 1e-12);
    }
}

/// `χ_S(x) = Π_{v ∈ S} (-1)^{x_v}` over the assignment bits `(a, a', b, b')`.
fn parity(mask: usize, s: usize) -> f64 {
    let x = DeterministicMixture::assignment(s);
    let ones = (0..4).filter(|&k| mask >> (3 - k) & 1 == 1 && x[k]).count();
    if ones % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

// Bits a=8, a'=4, b=2, b'=1.
const NULL_DIRECTIONS: [usize; 7] = [0b1100, 0b0011, 0b1110, 0b1101, 0b1011, 0b0111, 0b1111];

/// Negativity by brute force: every signed solution is
/// `w = (1/16) Σ_S m_S χ_S` with the nine observable moments fixed and seven
/// free moments `t`. The convex piecewise-linear negativity attains its
/// minimum at a vertex where 7 of the 16 weights vanish, so enumerating all
/// 11440 such 7-subsets finds it.
fn negativity_by_vertices(t: &CorrelationTable<f64>) -> f64 {
    let e = |i: usize, j: usize| 4.0 * t.p11[i][j] - 2.0 * t.pa[i] - 2.0 * t.pb[j] + 1.0;
    let known: Vec<(usize, f64)> = vec![
        (0, 1.0),
        (0b1000, 1.0 - 2.0 * t.pa[0]),
        (0b0100, 1.0 - 2.0 * t.pa[1]),
        (0b0010, 1.0 - 2.0 * t.pb[0]),
        (0b0001, 1.0 - 2.0 * t.pb[1]),
        (0b1010, e(0, 0)),
        (0b1001, e(0, 1)),
        (0b0110, e(1, 0)),
        (0b0101, e(1, 1)),
    ];
    let base: Vec<f64> = (0..16).map(|s| known.iter().map(|(m, v)| v * parity(*m, s)).sum::<f64>() / 16.0).collect();
    let dir: Vec<[f64; 7]> =
        (0..16).map(|s| std::array::from_fn(|k| parity(NULL_DIRECTIONS[k], s) / 16.0)).collect();
    let negativity = |tv: &[f64; 7]| -> f64 {
        (0..16)
            .map(|s| base[s] + (0..7).map(|k| dir[s][k] * tv[k]).sum::<f64>())
            .filter(|w| *w < 0.0)
            .map(|w| -w)
            .sum()
    };
    let mut best = f64::INFINITY;
    let mut subset = [0usize; 7];
    fn next(subset: &mut [usize; 7], n: usize) -> bool {
        let k = subset.len();
        for i in (0..k).rev() {
            if subset[i] < n - k + i {
                subset[i] += 1;
                for j in i + 1..k {
                    subset[j] = subset[j - 1] + 1;
                }
                return true;
            }
        }
        false
    }
    for (i, v) in subset.iter_mut().enumerate() {
        *v = i;
    }
    loop {
        // Solve dir[s]·t = -base[s] for s in the subset.
        let mut m: Vec<[f64; 8]> = subset
            .iter()
            .map(|&s| {
                let mut row = [0.0; 8];
                row[..7].copy_from_slice(&dir[s]);
                row[7] = -base[s];
                row
            })
            .collect();
        let mut singular = false;
        for c in 0..7 {
            let p = (c..7).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())).unwrap();
            if m[p][c].abs() < 1e-12 {
                singular = true;
                break;
            }
            m.swap(c, p);
            let pivot = m[c];
            for (r, row) in m.iter_mut().enumerate() {
                if r != c {
                    let f = row[c] / pivot[c];
                    for (x, y) in row[c..].iter_mut().zip(&pivot[c..]) {
                        *x -= f * y;
                    }
                }
            }
        }
        if !singular {
            let tv: [f64; 7] = std::array::from_fn(|k| m[k][7] / m[k][k]);
            best = best.min(negativity(&tv));
        }
        if !next(&mut subset, 16) {
            break;
        }
    }
    best
}

fn coins() -> ExactTable {
    let h = ratio(1, 2);
    CorrelationTable::product(Settings::default(), [h.clone(), h.clone()], [h.clone(), h]).unwrap()
}

fn quantum_exact() -> ExactTable {
    QuantumPairModel { settings: Settings::tsirelson() }.table().rationalize(RATIONALIZE_PRECISION).unwrap()
}

#[test]
fn negativity_matches_vertex_enumeration() {
    let pr = pr_table(Settings::default());
    for (t, pinned) in [
        (quantum_exact(), 0.207_106_781_2),
        (pr.clone(), 0.5),
        (coins(), 0.0),
        (coins().mix(&pr, &ratio(3, 4)), 0.25),
    ] {
        let lp = rational::to_f64(&min_negativity_joint(&t).unwrap().negativity);
        let brute = negativity_by_vertices(&t.to_f64());
        assert!((lp - brute).abs() < 1e-9, "lp {lp} brute {brute}");
        // Six entries each rounded to 1e-9 move the value by at most 3e-9.
        assert!((lp - pinned).abs() < 3e-9, "lp {lp} pinned {pinned}");
    }
    assert_eq!(min_negativity_joint(&quantum_exact()).unwrap().negativity, ratio(20_710_678, 100_000_000));
}

#[test]
fn quantum_negativity_below_pr_box() {
    let q = min_negativity_joint(&quantum_exact()).unwrap().negativity;
    let pr = min_negativity_joint(&pr_table(Settings::default())).unwrap().negativity;
    assert!(q > int(0));
    assert!(pr > q);
}

fn random_mixture(rng: &mut ChaCha8Rng) -> [Rational; 16] {
    let raw: Vec<i64> = (0..16).map(|_| if rng.gen_bool(0.4) { 0 } else { rng.gen_range(1..50) }).collect();
    let total: i64 = raw.iter().sum::<i64>().max(1);
    let mut w: [Rational; 16] = std::array::from_fn(|k| ratio(raw[k], total));
    if total == 1 && raw.iter().all(|&x| x == 0) {
        w[0] = int(1);
    }
    w
}

#[test]
fn lp_agrees_with_orientations_on_random_tables() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pr = pr_table(Settings::default());
    for _ in 0..300 {
        let local = table_from_assignments(Settings::default(), &random_mixture(&mut rng));
        let c = fine_feasible(&local).unwrap();
        assert!(c.feasible);
        assert!(fine_orientations(&local).iter().all(|o| o.holds()));
        // Push towards the PR box; feasibility must track the orientations.
        let t = ratio(rng.gen_range(0..=20), 20);
        let pushed = local.mix(&pr, &t);
        let c = fine_feasible(&pushed).unwrap();
        let all_hold = fine_orientations(&pushed).iter().all(|o| o.holds());
        assert_eq!(c.feasible, all_hold);
        let neg = min_negativity_joint(&pushed).unwrap().negativity;
        assert_eq!(neg == int(0), c.feasible);
    }
}

#[test]
fn quantum_orientation_violations() {
    let c = fine_feasible(&quantum_exact()).unwrap();
    assert!(!c.feasible);
    let upper: Vec<_> = c.orientations.iter().filter(|o| !o.upper_ok).map(|o| o.minus).collect();
    let lower: Vec<_> = c.orientations.iter().filter(|o| !o.lower_ok).map(|o| o.minus).collect();
    assert_eq!(upper, vec![(1, 1)]);
    assert!(lower.is_empty());
    // The mirrored angle set puts the minus sign elsewhere.
    let s = Settings::new(
        Angle::from_degrees(0),
        Angle::from_degrees(45),
        Angle::from_millidegrees(-22_500),
        Angle::from_millidegrees(22_500),
    )
    .unwrap();
    let t = QuantumPairModel { settings: s }.table().rationalize(RATIONALIZE_PRECISION).unwrap();
    let upper: Vec<_> = fine_orientations(&t).into_iter().filter(|o| !o.upper_ok).map(|o| o.minus).collect();
    assert_eq!(upper, vec![(1, 0)]);
}
