//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::{Duration, Instant};

use perturbdp::accounting::{directional_delta, Direction};
use perturbdp::audit::keysize_sweep;
use perturbdp::calibration::{calibrated_delta, calibrated_pmf};
use perturbdp::cellkey::{generate_record_keys, CellKeyConfig};
use perturbdp::grid::linear_grid;
use perturbdp::noise::variance_bound;
use perturbdp::*;
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use statrs::distribution::{ChiSquared, ContinuousCDF};

const C1_DELTA: f64 = 9.9129808160e-5;
const C1_DELTA_TOL: f64 = 1e-9;
const C1_VARIANCE: f64 = 49.00;
const C1_VARIANCE_TOL: f64 = 0.01;
const C1_MASS_TOL: f64 = 1e-12;
const C1_MASSES: [(i64, f64); 6] = [
    (0, 0.056895481243871),
    (1, 0.056320120792644),
    (2, 0.054628714970934),
    (12, 0.016632589297126),
    (24, 0.000163117271714),
    (25, 0.000099129808160),
];
const C1_RUNTIME: Duration = Duration::from_secs(1);

const C3_VARIANCE: f64 = 49.002167175291106;
const C3_VARIANCE_TOL: f64 = 1e-9;
const C3_BIAS: f64 = -5.820766091346741e-9;
const C3_BIAS_TOL: f64 = 1e-12;
const C3_EPSILON: f64 = 0.498037038323823;
const C3_EPSILON_TOL: f64 = 1e-9;

const C4_TOL: f64 = 1e-12;
const C4_DIRECTION_TOL: f64 = 1e-15;
const C4_RUNTIME: Duration = Duration::from_secs(10);

const C5_CASES: [(u32, f64); 4] = [(11, 0.125), (15, 0.125), (11, 0.0498), (15, 0.0498)];

const C6_MAX_REL_GAP: f64 = 0.05;
const C6_RUNTIME: Duration = Duration::from_secs(60);

const C7_DECADE: f64 = 1.0;
const C7_EPSILON_GAP: f64 = 0.02;

const C9_CELLS: usize = 10_000;
const C9_P_MIN: f64 = 0.001;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(failures: Vec<String>, summary: String) -> Outcome {
    if failures.is_empty() {
        Outcome {
            pass: true,
            detail: summary,
        }
    } else {
        Outcome {
            pass: false,
            detail: format!("{summary}; {}", failures.join("; ")),
        }
    }
}

fn example_pmf() -> CalibrationResult {
    design_noise(&CalibrationInput::new(0.5, 1e-4)).expect("design succeeds")
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let r = example_pmf();
    let elapsed = start.elapsed();
    let mut failures = Vec::new();
    if r.d_star != 25 {
        failures.push(format!("D* = {}", r.d_star));
    }
    if (r.delta_achieved - C1_DELTA).abs() > C1_DELTA_TOL {
        failures.push(format!("delta = {:e}", r.delta_achieved));
    }
    if (r.variance - C1_VARIANCE).abs() > C1_VARIANCE_TOL {
        failures.push(format!("V = {}", r.variance));
    }
    for (z, expected) in C1_MASSES {
        for s in [z, -z] {
            let got = r.pmf.mass(s);
            if (got - expected).abs() > C1_MASS_TOL {
                failures.push(format!(
                    "p({s}) = {got:.15} vs {expected:.15} (diff {:.1e})",
                    got - expected
                ));
            }
        }
    }
    if elapsed >= C1_RUNTIME {
        failures.push(format!("runtime {elapsed:?}"));
    }
    outcome(
        failures,
        format!(
            "D*={} delta={:.10e} V={:.6} in {elapsed:?}",
            r.d_star, r.delta_achieved, r.variance
        ),
    )
}

fn criterion_2() -> Outcome {
    let pmf = example_pmf().pmf;
    let mut failures = Vec::new();
    let fine = build_lookup(&pmf, 32).unwrap();
    let head: Vec<u64> = (-25..=-23).map(|z| fine.cumulative_at(z)).collect();
    if head != [425_760, 1_126_343, 2_255_949] {
        failures.push(format!("entries at -25..-23 = {head:?}"));
    }
    if fine.cumulative_at(25) != 1 << 32 {
        failures.push(format!("entry at 25 = {}", fine.cumulative_at(25)));
    }
    for (key, expected) in [(2552u64, -25i64), (1_200_124, -23)] {
        let got = sample(&fine, CellKey::new(key, 32).unwrap()).map(|s| s.0);
        if got != Ok(expected) {
            failures.push(format!("sample({key}) = {got:?}"));
        }
    }
    let coarse = build_lookup(&pmf, 8).unwrap();
    let low: Vec<u64> = (-25..=-23).map(|z| coarse.cumulative_at(z)).collect();
    if coarse.full_support() {
        failures.push("2^8 table flagged full support".into());
    }
    if !(low[0] == low[1] && low[1] == low[2]) {
        failures.push(format!("2^8 entries at -25..-23 = {low:?}"));
    }
    outcome(failures, format!("2^32 head {head:?}, 2^8 head {low:?}"))
}

fn criterion_3() -> Outcome {
    let pmf = example_pmf().pmf;
    let q = quantized_pmf(&build_lookup(&pmf, 32).unwrap());
    let (b, v) = bias_variance(&q);
    let eps = epsilon_q(&q).unwrap().forward;
    let dq = delta_q(&q);
    let mut failures = Vec::new();
    if (v - C3_VARIANCE).abs() > C3_VARIANCE_TOL {
        failures.push(format!("V^Q = {v}"));
    }
    if (b - C3_BIAS).abs() > C3_BIAS_TOL {
        failures.push(format!("B^Q = {b:e}"));
    }
    if (eps - C3_EPSILON).abs() > C3_EPSILON_TOL {
        failures.push(format!("eps^Q = {eps}"));
    }
    if dq != 425_760.0 / 4_294_967_296.0 {
        failures.push(format!("delta^Q = {dq:e}"));
    }
    outcome(
        failures,
        format!("B^Q={b:e} V^Q={v} eps^Q={eps} delta^Q={dq:e}"),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let epsilons = linear_grid(0.05, 3.0, 0.05).unwrap();
    let mut failures = Vec::new();
    let (mut worst, mut worst_dir, mut checked) = (0.0f64, 0.0f64, 0usize);
    for d in 1..=6u32 {
        let bound = variance_bound(d).unwrap().upper;
        for _ in 0..20 {
            let u = ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
            let v = u * bound;
            let pmf = match NoisePmf::from_variance(d, v) {
                Ok(p) => p,
                Err(e) => {
                    failures.push(format!("D={d} V={v}: {e}"));
                    continue;
                }
            };
            let fwd = directional_delta(pmf.masses(), 1.0, Direction::Forward);
            let bwd = directional_delta(pmf.masses(), 1.0, Direction::Backward);
            worst_dir = worst_dir.max((fwd - bwd).abs());
            for &eps in &epsilons {
                let a = delta_of_epsilon(&pmf, eps).unwrap().delta;
                let o = delta_oracle(&pmf, eps).unwrap().delta;
                let f = directional_delta(pmf.masses(), eps, Direction::Forward);
                let b = directional_delta(pmf.masses(), eps, Direction::Backward);
                worst = worst.max((a - o).abs());
                worst_dir = worst_dir.max((f - b).abs());
                checked += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    if worst > C4_TOL {
        failures.push(format!("max |closed form - oracle| = {worst:e}"));
    }
    if worst_dir > C4_DIRECTION_TOL {
        failures.push(format!("max direction gap = {worst_dir:e}"));
    }
    if elapsed >= C4_RUNTIME {
        failures.push(format!("runtime {elapsed:?}"));
    }
    outcome(
        failures,
        format!("{checked} cases, max gap {worst:.1e}, direction gap {worst_dir:.1e}, {elapsed:?}"),
    )
}

fn criterion_5() -> Outcome {
    let epsilons = linear_grid(0.01, 5.0, 0.01).unwrap();
    let mut failures = Vec::new();
    for (d, gamma) in C5_CASES {
        let pmf = pmf_from_gamma(d, gamma).unwrap();
        let plateau = pmf.normaliser() * (-gamma * f64::from(d * d)).exp();
        let threshold = gamma * f64::from(2 * d - 1);
        let deltas: Vec<f64> = epsilons
            .iter()
            .map(|&e| delta_of_epsilon(&pmf, e).unwrap().delta)
            .collect();
        for (i, &e) in epsilons.iter().enumerate() {
            if e > threshold && deltas[i] != plateau {
                failures.push(format!(
                    "D={d} gamma={gamma} eps={e}: {:e} != {:e}",
                    deltas[i], plateau
                ));
                break;
            }
            if e < threshold && i + 1 < deltas.len() && deltas[i + 1] >= deltas[i] {
                failures.push(format!("D={d} gamma={gamma}: not decreasing at eps={e}"));
                break;
            }
        }
    }
    outcome(
        failures,
        format!(
            "{} (D, gamma) curves on {} points",
            C5_CASES.len(),
            epsilons.len()
        ),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let epsilons = linear_grid(0.1, 3.0, 0.1).unwrap();
    let grid = GammaGrid::default();
    let mut failures = Vec::new();
    let mut max_gap = 0.0f64;
    let mut dominance = true;
    for d in [11u32, 15] {
        for &eps in &epsilons {
            let kappa = KappaRule::default().kappa(eps, d).unwrap();
            let analytical = calibrated_delta(eps, d, kappa).unwrap();
            let numeric = best_delta_numeric(d, eps, &grid).unwrap().point.delta;
            if numeric > analytical {
                dominance = false;
                failures.push(format!(
                    "D={d} eps={eps}: numeric {numeric:e} > analytical {analytical:e}"
                ));
            }
            max_gap = max_gap.max((analytical - numeric) / analytical);
        }
    }
    let elapsed = start.elapsed();
    if max_gap > C6_MAX_REL_GAP {
        failures.push(format!("max relative gap {max_gap:.4}"));
    }
    if elapsed >= C6_RUNTIME {
        failures.push(format!("runtime {elapsed:?}"));
    }
    outcome(
        failures,
        format!(
            "dominance {}, max relative gap {max_gap:.4}, {elapsed:?}",
            if dominance { "holds" } else { "broken" }
        ),
    )
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn within_decade(x: f64, target: f64) -> bool {
    (x.log10() - target.log10()).abs() <= C7_DECADE
}

fn criterion_7() -> Outcome {
    let rows = keysize_sweep(&KeysizeSweep::default()).unwrap();
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    // (log2, first failing epsilon, typical |B^Q|, variance error check)
    let expectations: [(u8, Option<f64>, f64); 3] = [
        (8, Some(0.7), 1e-2),
        (16, Some(1.8), 1e-4),
        (32, None, 1e-9),
    ];
    for (log2, first_fail, bias_order) in expectations {
        let cells: Vec<&QuantAudit> = rows.iter().filter(|r| r.keysize_log2 == log2).collect();
        let observed_fail = cells
            .iter()
            .find(|r| !r.full_support)
            .map(|r| r.epsilon_design);
        let all_fail_after = cells
            .iter()
            .skip_while(|r| r.full_support)
            .all(|r| !r.full_support);
        if observed_fail != first_fail || !all_fail_after {
            failures.push(format!("2^{log2}: first failure at {observed_fail:?}"));
        }
        let valid: Vec<&&QuantAudit> = cells.iter().filter(|r| r.full_support).collect();
        let bias = median(valid.iter().map(|r| r.bias_q.abs()).collect());
        let rel_v: Vec<f64> = valid.iter().map(|r| r.var_rel_err.abs()).collect();
        let (v_med, v_max) = (
            median(rel_v.clone()),
            rel_v.iter().cloned().fold(0.0, f64::max),
        );
        if !within_decade(bias, bias_order) {
            failures.push(format!(
                "2^{log2}: median |B^Q| {bias:.2e} vs ~{bias_order:e}"
            ));
        }
        let variance_ok = match log2 {
            8 => v_max <= 1e-2 * 10f64.powf(C7_DECADE),
            16 => within_decade(v_med, 1e-10),
            _ => v_med >= 1e-11 / 10f64.powf(C7_DECADE) && v_med <= 1e-10 * 10f64.powf(C7_DECADE),
        };
        if !variance_ok {
            failures.push(format!(
                "2^{log2}: |V^Q - V|/V median {v_med:.2e} max {v_max:.2e}"
            ));
        }
        summary.push(format!(
            "2^{log2}: fail@{observed_fail:?} |B^Q|~{bias:.1e} relV~{v_med:.1e}"
        ));
        if log2 == 8 {
            for r in &valid {
                if r.epsilon_q <= r.epsilon_design {
                    failures.push(format!(
                        "2^8 eps={}: eps^Q {} <= eps",
                        r.epsilon_design, r.epsilon_q
                    ));
                }
            }
        }
        if log2 == 32 {
            for r in &valid {
                let gap = (r.epsilon_q - r.epsilon_design).abs();
                if gap > C7_EPSILON_GAP {
                    failures.push(format!(
                        "2^32 eps={}: |eps^Q - eps| = {gap:.4}",
                        r.epsilon_design
                    ));
                }
            }
        }
    }
    outcome(failures, summary.join(", "))
}

fn criterion_8() -> Outcome {
    let kappa = KappaRule::default().kappa(0.5, 5).unwrap();
    let pmf = calibrated_pmf(0.5, 5, kappa).unwrap();
    let table = build_lookup(&pmf, 10).unwrap();
    let mut failures = Vec::new();
    if !table.full_support() {
        failures.push("table lacks full support".into());
        return outcome(failures, String::new());
    }
    let mut counts = vec![0u64; 11];
    for k in 0..1024 {
        let z = sample(&table, CellKey::new(k, 10).unwrap()).unwrap().0;
        counts[(z + 5) as usize] += 1;
    }
    let q = quantized_pmf(&table);
    if counts != q.numerators() {
        failures.push(format!(
            "histogram {counts:?} != numerators {:?}",
            q.numerators()
        ));
    }
    outcome(failures, format!("histogram {counts:?}"))
}

fn criterion_9() -> Outcome {
    let config = CellKeyConfig::new(8).unwrap();
    let keys = generate_record_keys(C9_CELLS, 9).unwrap();
    let mut buckets = [0u64; 256];
    for key in &keys {
        buckets[aggregate_cell_key(&[*key], &config).unwrap().value() as usize] += 1;
    }
    let expected = C9_CELLS as f64 / 256.0;
    let stat: f64 = buckets
        .iter()
        .map(|&o| (o as f64 - expected).powi(2) / expected)
        .sum();
    let p = 1.0 - ChiSquared::new(255.0).unwrap().cdf(stat);
    let mut failures = Vec::new();
    if p <= C9_P_MIN {
        failures.push(format!("chi-square p = {p:e}"));
    }
    let mut order_ok = true;
    for cell in keys.chunks(7).take(200) {
        let base = aggregate_cell_key(cell, &config).unwrap();
        let mut reversed = cell.to_vec();
        reversed.reverse();
        let mut rotated = cell.to_vec();
        rotated.rotate_left(3);
        for perm in [reversed, rotated] {
            if aggregate_cell_key(&perm, &config).unwrap() != base {
                order_ok = false;
            }
        }
    }
    if !order_ok {
        failures.push("permuted cells changed key".into());
    }
    outcome(
        failures,
        format!("chi2={stat:.1} p={p:.3}, order independence {order_ok}"),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("design golden values", criterion_1),
        ("lookup table golden values", criterion_2),
        ("quantized metrics golden values", criterion_3),
        ("closed form matches oracle", criterion_4),
        ("delta plateau", criterion_5),
        ("numeric minimum vs calibrated delta", criterion_6),
        ("key size sweep", criterion_7),
        ("exhaustive sampling", criterion_8),
        ("cell key uniformity and order independence", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {} {}: {name}: {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
