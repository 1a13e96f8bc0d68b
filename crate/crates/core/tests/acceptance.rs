//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report is always printed. The
//! process exits non-zero if any criterion fails.

use std::cell::RefCell;
use std::time::Instant;

use lambda_cavity::analytic::{c3_vacuum, Reading, Readings, Suspect};
use lambda_cavity::delays::{delay_c3, delay_c3_closed_form, delay_c3_first_order, delay_field_intensity, limit_extrapolation};
use lambda_cavity::oracle::{fit_exponent_prefactors, Amplitude, BasisTerm, TimeSeries};
use lambda_cavity::semiclassical::{
    classical_scattered_pulse, classical_transmit_fft, exponential_turn_on, group_delay_shape, transmit_thin_slab,
    FftGrid, SlabForm, SlabMedium,
};
use lambda_cavity::{integrate, AmplitudeState, CoefficientTable, IntegratorConfig, SystemParams, Trajectory, C64};
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, n: usize, pass: bool, what: &str, detail: String) {
        if !pass {
            self.failed += 1;
        }
        println!("criterion {n:>2}: {}  {what}  [{detail}]", if pass { "PASS" } else { "FAIL" });
    }
}

fn run_modes(p: &SystemParams, t_end: f64, dt: f64) -> (Trajectory, f64) {
    let start = Instant::now();
    let cfg = IntegratorConfig::new(t_end).with_sample_interval(dt);
    let traj = integrate(p, &cfg, &AmplitudeState::initial(p.n_modes)).expect("integration");
    (traj, start.elapsed().as_secs_f64())
}

/// Sup over `t < t_max` of the largest `||oracle| − |analytic||`.
fn sup_deviation(traj: &Trajectory, table: &CoefficientTable, t_max: f64) -> f64 {
    let mut worst = 0.0f64;
    for (t, v) in traj.t.iter().zip(&traj.atoms) {
        if *t > t_max {
            break;
        }
        let e = table.atoms(*t).unwrap();
        for j in 0..4 {
            worst = worst.max((v[j].norm() - e[j].norm()).abs());
        }
    }
    worst
}

fn criteria_1_2(r: &mut Report) {
    let p = SystemParams::reference_case();
    let table = CoefficientTable::new(&p).unwrap();
    let (fine, secs_fine) = run_modes(&p, 0.95, 2.5e-4);
    let half = p.with_modes(1024).unwrap();
    let (coarse, secs_coarse) = run_modes(&half, 0.95, 2.5e-4);

    let d2048 = sup_deviation(&fine, &table, 0.95);
    let d1024 = sup_deviation(&coarse, &table, 0.95);
    let growth = d1024 / d2048;
    let early = (sup_deviation(&fine, &table, 0.74), sup_deviation(&coarse, &table, 0.74));
    let pass = d2048 < 1e-2 && growth >= 1.5 && secs_fine < 60.0 && secs_coarse < 60.0;
    r.line(
        1,
        pass,
        "oracle vs analytic |c1|,|c2|,|c3|,|d| on [0, 0.95]: K=2048 < 1e-2, K=1024 grows >= 1.5x, < 60 s",
        format!(
            "K=2048 dev {d2048:.3e} ({secs_fine:.1} s), K=1024 dev {d1024:.3e} ({secs_coarse:.1} s), growth {growth:.2}; \
             on [0, 0.74]: {:.3e} vs {:.3e}, growth {:.2}",
            early.0,
            early.1,
            early.1 / early.0
        ),
    );

    let k = p.n_modes as f64;
    let (mut pre_c2d, mut pre_c3) = (0.0f64, 0.0f64);
    for (t, v) in fine.t.iter().zip(&fine.atoms) {
        if *t < 0.25 - 2.0 / k {
            pre_c2d = pre_c2d.max(v[1].norm()).max(v[3].norm());
        }
        if *t < 0.5 - 2.0 / k {
            pre_c3 = pre_c3.max(v[2].norm());
        }
    }
    let mut analytic_zero = true;
    for i in 0..20_000 {
        let t = 0.5 * i as f64 / 20_000.0;
        let a = table.atoms(t).unwrap();
        if t < 0.25 && (a[1] != C64::default() || a[3] != C64::default()) {
            analytic_zero = false;
        }
        if a[2] != C64::default() {
            analytic_zero = false;
        }
    }
    let cont = integrate(&p, &IntegratorConfig::continuum(0.5).with_sample_interval(2.5e-4), &AmplitudeState::initial(p.n_modes))
        .unwrap();
    let cont_pre = cont
        .t
        .iter()
        .zip(&cont.atoms)
        .filter(|(t, _)| **t < 0.5 - 2.0 / k)
        .map(|(t, v)| if *t < 0.25 - 2.0 / k { v[1].norm().max(v[2].norm()).max(v[3].norm()) } else { v[2].norm() })
        .fold(0.0f64, f64::max);
    r.line(
        2,
        pre_c2d < 1e-6 && pre_c3 < 1e-6 && analytic_zero,
        "causality: oracle |c2|,|d| < 1e-6 before 0.25-2/K, |c3| < 1e-6 before 0.5-2/K; analytic exactly 0",
        format!(
            "K=2048 max |c2|,|d| {pre_c2d:.3e}, max |c3| {pre_c3:.3e}; analytic zero {analytic_zero}; continuum limit max {cont_pre:.1e}"
        ),
    );
}

fn criterion_3(r: &mut Report) {
    let p = SystemParams::reference_case();
    let (traj, secs) = run_modes(&p, 2.0, 1e-3);
    let dev = traj.max_norm_deviation();
    r.line(3, dev < 1e-8, "unitarity: |norm - 1| < 1e-8 on [0, 2]", format!("max {dev:.3e}, step {:.3e}, {secs:.1} s", traj.step));
}

fn criterion_4(r: &mut Report) {
    let p = SystemParams::new(4.0, 0.0, 0.0, 32.0, 0.0).unwrap();
    let (traj, _) = run_modes(&p, 0.5, 1e-3);
    let pts: Vec<(f64, f64)> = traj
        .t
        .iter()
        .zip(&traj.atoms)
        .filter(|(t, _)| **t > 0.05 && **t < 0.45)
        .map(|(t, v)| (*t, v[0].norm().ln()))
        .collect();
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    let slope = sxy / sxx;
    let rel = (slope + p.gamma1 / 2.0).abs() / (p.gamma1 / 2.0);
    r.line(4, rel < 5e-3, "pre-echo decay: slope of ln|c1| on (0.05, 0.45) = -gamma1/2 within 0.5%", format!("slope {slope:.6}, rel {rel:.2e}"));
}

fn criterion_5(r: &mut Report) {
    let mut exact = true;
    for (xi, g, w) in [(0.1, 64.0, 32.0), (1.0, 3.0, 0.7), (0.37, 500.0, 90.0)] {
        let m = SlabMedium::new(xi, g, w).unwrap();
        for e in [C64::new(1.0, 0.0), C64::new(-0.3, 2.5), C64::new(1e-7, -4e3)] {
            for form in [SlabForm::Exact, SlabForm::FirstOrder] {
                exact &= transmit_thin_slab(e, &m, 0.0, form).unwrap().norm() == e.norm();
            }
        }
    }
    let p = SystemParams::reference_case();
    let table = CoefficientTable::new(&p).unwrap();
    let late = |f: f64| {
        let mut worst = 0.0f64;
        let mut t = 0.5 + 10.0 / p.gamma2;
        while t < 1.0 {
            let v = c3_vacuum(&p, t);
            let with = (v + table.c3_scattered(t).unwrap() * f).norm_sqr();
            worst = worst.max((with / v.norm_sqr() - 1.0).abs());
            t += 1e-4;
        }
        worst
    };
    let (small, unit) = (late(1e-2), late(1.0));
    r.line(
        5,
        exact && small < 0.03,
        "transparency: exact |T| at delta=0; delta=0 detector trace within 3% of baseline for t-1/2 > 10/gamma2 (f=1e-2)",
        format!("exact {exact}; max rel dev {small:.3e} at f=1e-2 ({unit:.3} at f=1)"),
    );
}

fn criterion_6(r: &mut Report) {
    let f = 1e-2;
    let ratios = [1e-3, 5e-4, 2.5e-4];
    let base = SystemParams::reference_case();
    let (g2, wr) = (base.gamma2, base.omega_r);
    let (mut worst_full, mut worst_first, mut rows, mut skipped) = (0.0f64, 0.0f64, 0, 0);
    let mut worst_at = 0.0;
    for i in 0..20 {
        let x = -1.0 + 2.0 * i as f64 / 19.0;
        let q = base.with_delta(x * g2).unwrap();
        let shape = match group_delay_shape(g2, wr, q.delta) {
            Ok(s) => s,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        let classical = 2.0 * f * g2 * shape;
        let full = limit_extrapolation(|pp, ff| Ok(delay_c3(&CoefficientTable::new(pp)?, ff)?.delay), &q, f, &ratios);
        let first =
            limit_extrapolation(|pp, ff| Ok(delay_c3_first_order(&CoefficientTable::new(pp)?, ff)?.delay), &q, f, &ratios);
        match (full, first) {
            (Ok(a), Ok(b)) => {
                rows += 1;
                let ea = (a.value / classical - 2.0).abs() / 2.0;
                if ea > worst_full {
                    worst_full = ea;
                    worst_at = x;
                }
                worst_first = worst_first.max((b.value / classical - 2.0).abs() / 2.0);
            }
            _ => skipped += 1,
        }
    }
    let zero = delay_c3_closed_form(64.0, 32.0, 0.0, f).unwrap();
    let exact_zero = (zero - f / 4.0).abs() <= f64::EPSILON * f / 4.0 && (zero - 4.0 * f * 64.0 / (32.0f64 * 32.0)).abs() == 0.0;
    r.line(
        6,
        worst_full < 0.02 && exact_zero && rows + skipped == 20,
        "factor of two: extrapolated delay / classical shape = 2 within 2% on 20 detunings; closed form f/4 at delta=0",
        format!(
            "{rows} rows, {skipped} singular; worst {:.2}% at delta/gamma2 = {worst_at:.3} (first-order-in-f delay: {:.3}%); closed form {zero:e}",
            100.0 * worst_full,
            100.0 * worst_first
        ),
    );
}

fn criterion_7(r: &mut Report) {
    let mut runner = TestRunner::new_with_rng(Config::default(), TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let strat = (0.1..50.0f64, 0.0..200.0f64, 1.0..2000.0f64, 0.0..100.0f64, -100.0..100.0f64, 0.0..1.0f64);
    let worst = RefCell::new(0.0f64);
    let (mut draws, mut tried) = (0, 0);
    while draws < 10_000 && tried < 100_000 {
        tried += 1;
        let (g1, g2, g3, wr, dl, t) = strat.new_tree(&mut runner).unwrap().current();
        let Ok(p) = SystemParams::new(g1, g2, g3, wr, dl) else { continue };
        let Ok(table) = CoefficientTable::new(&p) else { continue };
        draws += 1;
        let total = table.amp_c3(t).unwrap();
        let vac = c3_vacuum(&p, t);
        let sc = table.c3_scattered(t).unwrap();
        let scale = total.norm().max(vac.norm()).max(sc.norm());
        if scale > 0.0 {
            let mut w = worst.borrow_mut();
            *w = w.max((total - vac - sc).norm() / scale);
        }
    }
    let w = *worst.borrow();
    r.line(7, w < 1e-12 && draws == 10_000, "decomposition: c3 = c3^0 + c3^s to 1e-12 relative on 1e4 draws", format!("{draws} draws, worst {w:.3e}"));
}

fn criterion_8(r: &mut Report) {
    let g1 = 4.0;
    let (mut worst_l2, mut worst_pre) = (0.0f64, 0.0f64);
    let mut residue_causal = true;
    for (w, dl) in [(20.0, 0.0), (20.0, 10.0), (32.0, 0.0), (32.0, 40.0)] {
        let m = SlabMedium::new(0.1, 64.0, w).unwrap();
        let grid = FftGrid::resolving(g1, &m, dl);
        let env = exponential_turn_on(&grid, g1);
        let out = classical_transmit_fft(&m, dl, &env, &grid).unwrap();
        let (mut num, mut den, mut peak) = (0.0, 0.0, 0.0f64);
        let mut pre = 0.0f64;
        for (i, t) in grid.times().into_iter().enumerate() {
            let fft_s = out[i] - env[i];
            let res = classical_scattered_pulse(&m, g1, dl, t).unwrap();
            peak = peak.max(res.norm());
            if t < -0.5 * grid.dt {
                pre = pre.max(fft_s.norm());
                residue_causal &= res == C64::default();
            } else if t > 0.5 * grid.dt {
                num += (fft_s - res).norm_sqr();
                den += res.norm_sqr();
            }
        }
        worst_l2 = worst_l2.max((num / den).sqrt());
        worst_pre = worst_pre.max(pre / peak);
    }
    r.line(
        8,
        worst_l2 < 1e-3 && residue_causal && worst_pre < 1e-3,
        "classical cross-check: FFT vs residue form < 1e-3 relative L2; both vanish for t - z/c < 0",
        format!("worst L2 {worst_l2:.3e}; residue zero before turn-on {residue_causal}; FFT pre-turn-on max {worst_pre:.1e} of peak"),
    );
}

fn criterion_9(r: &mut Report) {
    let f = 1e-2;
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for x in [0.0, 0.25, 0.5, 1.0] {
        let p = SystemParams::new(4.0, 64.0, 64_000.0, 32.0, x * 64.0).unwrap();
        let t = CoefficientTable::new(&p).unwrap();
        let a = delay_c3(&t, f).unwrap().delay;
        let b = delay_field_intensity(&t, f).unwrap().delay;
        let rel = (a - b).abs() / a.abs();
        worst = worst.max(rel);
        detail.push(format!("{x}: {rel:.2e}"));
    }
    r.line(9, worst < 0.02, "field delay matches detector delay within 2% (gamma3 = 1e3 gamma2)", detail.join(", "));
}

struct FitCase {
    name: &'static str,
    basis: Vec<BasisTerm>,
    /// Coefficient extractor under a given reading set.
    coeffs: Box<dyn Fn(&Readings) -> Vec<C64>>,
    data: TimeSeries,
}

fn criterion_10(r: &mut Report) {
    let mut detail = Vec::new();
    let mut pass = true;
    for dl in [0.0, 19.2] {
        let p = SystemParams::new(4.0, 64.0, 1024.0, 20.0, dl).unwrap();
        let cfg = IntegratorConfig::continuum(0.999).with_step(1.0 / 32_000.0).with_sample_interval(1e-3);
        let traj = integrate(&p, &cfg, &AmplitudeState::initial(p.n_modes)).unwrap();
        let q = p.with_rates(4.0, 64.0, 0.0).unwrap();
        let fcfg = cfg.clone().with_probes(&[0.75]);
        let ftraj = integrate(&q, &fcfg, &AmplitudeState::initial(q.n_modes)).unwrap();

        let corrected = CoefficientTable::new(&p).unwrap();
        let ex = corrected.exponents();
        let e1 = ex[0];
        let after = |series: TimeSeries, sub: &dyn Fn(f64) -> C64| TimeSeries {
            values: series.t.iter().zip(&series.values).map(|(t, v)| *v - sub(*t)).collect(),
            t: series.t,
        };
        let c1 = after(traj.series(Amplitude::C1), &|t| C64::from((-p.gamma1 * t / 2.0).exp()));
        let c3s = after(traj.series(Amplitude::C3), &|t| c3_vacuum(&p, t));
        let g1 = q.gamma1;
        let field = TimeSeries {
            t: ftraj.t.clone(),
            values: ftraj.t.iter().zip(&ftraj.field[0]).map(|(t, s)| {
                let e = s * 2f64.sqrt() / (-C64::i() * (g1 / 2.0).sqrt());
                e - if *t >= 0.5 { (e1 * (t - 0.5)).exp() } else { C64::default() }
            }).collect(),
        };
        let pp = p;
        let qq = q;
        let cases = vec![
            FitCase {
                name: "c1 echo (F1, F2)",
                basis: vec![BasisTerm::exp(ex[0]), BasisTerm { exponent: ex[0], power: 1 }, BasisTerm::exp(ex[1]), BasisTerm::exp(ex[2])],
                coeffs: Box::new(move |rd| {
                    let t = CoefficientTable::with_readings(&pp, *rd).unwrap();
                    (1..=4).map(|i| t.coefficient(i).unwrap()).collect()
                }),
                data: c1,
            },
            FitCase {
                name: "c3 scattered (F20..F23)",
                basis: ex.iter().map(|&e| BasisTerm::exp(e)).collect(),
                coeffs: Box::new(move |rd| {
                    let t = CoefficientTable::with_readings(&pp, *rd).unwrap();
                    (20..=23).map(|i| t.coefficient(i).unwrap()).collect()
                }),
                data: c3s,
            },
            FitCase {
                name: "c3 total (F8..F11)",
                basis: ex.iter().map(|&e| BasisTerm::exp(e)).collect(),
                coeffs: Box::new(move |rd| {
                    let t = CoefficientTable::with_readings(&pp, *rd).unwrap();
                    (8..=11).map(|i| t.coefficient(i).unwrap()).collect()
                }),
                data: traj.series(Amplitude::C3),
            },
            FitCase {
                name: "field at 3/4 (fast term)",
                basis: ex[..3].iter().map(|&e| BasisTerm::exp(e)).collect(),
                coeffs: Box::new(move |rd| CoefficientTable::with_readings(&qq, *rd).unwrap().field_coefficients().unwrap().to_vec()),
                data: field,
            },
        ];
        let mut fits = Vec::new();
        for c in &cases {
            let fit = fit_exponent_prefactors(&c.data, &c.basis, 0.5, (0.5, 0.999)).unwrap();
            fits.push(fit.prefactors);
        }
        let rel = |a: &[C64], b: &[C64]| -> f64 {
            a.iter().zip(b).map(|(x, y)| (x - y).norm() / y.norm().max(1e-300)).fold(0.0, f64::max)
        };
        let sel = Readings::default();
        for (c, fit) in cases.iter().zip(&fits) {
            let d = rel(&(c.coeffs)(&sel), fit);
            pass &= d < 1e-6;
            detail.push(format!("delta={dl}: {} selected {d:.1e}", c.name));
        }
        for s in Suspect::ALL {
            let alts: &[Reading] = if s.has_alternate() { &[Reading::AsPrinted, Reading::Alternate] } else { &[Reading::AsPrinted] };
            for &alt in alts {
                let rd = sel.with(s, alt);
                let mut best = f64::INFINITY;
                let mut differs = false;
                // the rejected reading must miss the fit wherever it changes a coefficient
                for (c, fit) in cases.iter().zip(&fits) {
                    let a = (c.coeffs)(&rd);
                    let b = (c.coeffs)(&sel);
                    if rel(&a, &b) > 0.0 {
                        differs = true;
                        best = best.min(rel(&a, fit));
                    }
                }
                if differs {
                    pass &= best > 1e-3;
                    detail.push(format!("delta={dl}: {s:?} {alt:?} rejected by {best:.1e}"));
                } else {
                    detail.push(format!("delta={dl}: {s:?} {alt:?} coincides with selected"));
                }
            }
        }
    }
    r.line(10, pass, "errata: selected readings fit the oracle prefactors < 1e-6, rejected readings miss by > 1e-3", detail.join("; "));
}

fn main() {
    let mut r = Report { failed: 0 };
    let start = Instant::now();
    criteria_1_2(&mut r);
    criterion_3(&mut r);
    criterion_4(&mut r);
    criterion_5(&mut r);
    criterion_6(&mut r);
    criterion_7(&mut r);
    criterion_8(&mut r);
    criterion_9(&mut r);
    criterion_10(&mut r);
    println!("acceptance: {} of 10 criteria failed ({:.0} s)", r.failed, start.elapsed().as_secs_f64());
    if r.failed > 0 {
        std::process::exit(1);
    }
}
