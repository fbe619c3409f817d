//! One function per experiment; each returns the tables it emits.

use std::collections::BTreeMap;

use anyhow::{bail, Context};
use purity_core::haar_sim::mc_purity_series;
use purity_core::markov::full_cut_series;
use purity_core::spectra::{
    deviation_rates, deviation_series, lambda_phantom, pseudospectrum_sample, sample_symbol_curve,
    transition_time, PseudospectrumCloud,
};
use purity_core::toeplitz::{
    closed_eigenvectors, closed_spectrum, cut_series, eigenvector_angle, lambda2, propagate_reduced,
    reduced_cuts, SpectralPropagator,
};
use purity_core::{
    lubkin_purity, lubkin_purity_f64, to_f64, CircuitConfig, NumericMode, Protocol, Rational, Scalar,
};
use serde_json::Value;

use crate::output::{Cell, Report, Table};
use crate::spec::{Experiment, ExperimentSpec};
use crate::validate::{fig4_sizes, mc_feasible, validate};

const SYMBOL_GRID: usize = 1024;

struct Ctx {
    spec: ExperimentSpec,
    notes: Vec<String>,
}

impl Ctx {
    fn d(&self) -> u32 {
        self.spec.d.unwrap_or(3)
    }

    fn n(&self) -> usize {
        self.spec.n.unwrap_or(20)
    }

    fn t_max(&self) -> usize {
        self.spec.t_max.unwrap_or(0)
    }

    fn config(&self, n: usize) -> anyhow::Result<CircuitConfig> {
        Ok(CircuitConfig::new(self.d(), n)?
            .with_protocol(self.spec.protocol())
            .with_gate_policy(self.spec.gate_policy())
            .with_t_max(self.t_max())
            .with_seed(self.spec.seed()))
    }
}

fn exact_cell(q: &Rational) -> Cell {
    Cell::Exact(format!("{}/{}", q.numer(), q.denom()))
}

pub fn metadata(spec: &ExperimentSpec) -> anyhow::Result<BTreeMap<String, Value>> {
    let mut recorded = spec.clone();
    recorded.out = None;
    let mut m = BTreeMap::new();
    m.insert("experiment".into(), Value::from(spec.experiment()?.id()));
    m.insert("version".into(), Value::from(env!("CARGO_PKG_VERSION")));
    m.insert("d".into(), spec.d.map_or(Value::Null, Value::from));
    m.insert("n".into(), spec.n.map_or(Value::Null, Value::from));
    m.insert("seed".into(), Value::from(spec.seed()));
    m.insert("spec".into(), serde_json::to_value(&recorded)?);
    Ok(m)
}

/// Validates, then computes every table; nothing is written here.
pub fn run_experiment(spec: &ExperimentSpec) -> anyhow::Result<Report> {
    let report = validate(spec)?;
    if !report.ok() {
        bail!("refusing to run {}: {}", report.experiment, report.problems().join("; "));
    }
    let spec = spec.resolved()?;
    let mut ctx = Ctx { spec, notes: Vec::new() };
    let tables = match ctx.spec.experiment()? {
        Experiment::Fig1 => fig1(&mut ctx)?,
        Experiment::Fig3 => fig3(&mut ctx)?,
        Experiment::Fig4a => fig4a(&mut ctx)?,
        Experiment::Fig4b => fig4b(&mut ctx)?,
        Experiment::Fig4c => fig4c(&mut ctx)?,
        Experiment::LambdaEff => lambda_eff(&mut ctx)?,
        Experiment::PurityD234 => purity_d234(&mut ctx)?,
        Experiment::JordanWindow => jordan_window(&mut ctx)?,
        Experiment::Sweep => sweep(&mut ctx)?,
    };
    Ok(Report { metadata: metadata(&ctx.spec)?, notes: ctx.notes, tables })
}

fn lph(d: u32) -> anyhow::Result<f64> {
    Ok(to_f64(&lambda_phantom(d)?))
}

fn fig1(ctx: &mut Ctx) -> anyhow::Result<Vec<Table>> {
    let (d, n, t_max) = (ctx.d(), ctx.n(), ctx.t_max());
    let protocol = ctx.spec.protocol();
    let k = ctx.spec.cuts.as_ref().and_then(|c| c.first().copied()).unwrap_or(n / 2);
    let exact = cut_series::<f64>(n, d, k, t_max, protocol)?;
    let inf = lubkin_purity_f64(d, n, k)?;
    let lph = lph(d)?;
    let l2 = if n % 2 == 0 && n >= 4 { Some(lambda2(n, d)?) } else { None };
    if l2.is_none() {
        ctx.notes.push(format!("lambda2_asymptote left empty: no closed λ2 for odd n = {n}"));
    }
    ctx.notes.push(format!(
        "cut k = {k}; lambda2_asymptote = I_inf + (I(t_max) - I_inf) λ2^(t - t_max) with I_inf = {inf:?}"
    ));
    let mc = if ctx.spec.realizations.is_some() || mc_feasible(d, n) {
        let r = ctx.spec.realizations.unwrap_or(1);
        ctx.notes.push(format!("I_mc_single holds the mean over {r} circuit realization(s)"));
        Some(mc_purity_series(&ctx.config(n)?, &[k], r)?)
    } else {
        ctx.notes.push(format!(
            "Monte Carlo skipped: {d}^{n} amplitudes exceed the state-vector limit; try --n 12"
        ));
        None
    };
    let anchor = exact[t_max] - inf;
    let mut table = Table::new("purity", &["t", "I_mc_single", "I_mc_stderr", "I_exact", "phantom", "lambda2_asymptote"]);
    for (t, i) in exact.iter().enumerate() {
        let (m, se) = match &mc {
            Some(s) => {
                let (m, se) = s.get(t, k).context("Monte Carlo cut")?;
                (Cell::Float(m), Cell::Float(se))
            }
            None => (Cell::Missing, Cell::Missing),
        };
        let asym = l2.map(|l| inf + anchor * l.powi(t as i32 - t_max as i32));
        table.push(vec![t.into(), m, se, (*i).into(), lph.powi(t as i32).into(), asym.into()]);
    }
    Ok(vec![table])
}

fn fig3(ctx: &mut Ctx) -> anyhow::Result<Vec<Table>> {
    let (d, n) = (ctx.d(), ctx.n());
    let jmax = (n / 2 - 1).min(3);
    let mut vecs = Table::new("eigenvectors", &["j", "k", "R", "L"]);
    for j in 1..=jmax {
        let (r, l) = closed_eigenvectors(n, d, j)?;
        let scale = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let (sr, sl) = (scale(&r), scale(&l));
        for (i, (rv, lv)) in r.iter().zip(&l).enumerate() {
            vecs.push(vec![j.into(), (i + 1).into(), (rv / sr).into(), (lv / sl).into()]);
        }
    }
    ctx.notes.push("eigenvectors scaled to unit max-norm".into());
    let mut angles = Table::new("angles", &["n", "j", "angle"]);
    for p in 0..5 {
        let m = n << p;
        let (r1, _) = closed_eigenvectors(m, d, 1)?;
        for j in 2..=(m / 2 - 1).min(4) {
            let (rj, _) = closed_eigenvectors(m, d, j)?;
            angles.push(vec![m.into(), j.into(), eigenvector_angle(&r1, &rj).into()]);
        }
    }
    Ok(vec![vecs, angles])
}

fn symbol_table(d: u32) -> anyhow::Result<Table> {
    let curve = sample_symbol_curve(d, SYMBOL_GRID)?;
    let mut t = Table::new("symbol", &["theta", "re", "im"]);
    for (th, z) in curve.thetas.iter().zip(&curve.values) {
        t.push(vec![(*th).into(), z.re.into(), z.im.into()]);
    }
    Ok(t)
}

fn spectrum_table(n: usize, d: u32) -> anyhow::Result<Table> {
    let s = closed_spectrum(n, d)?;
    let mut t = Table::new("spectrum", &["j", "re", "im", "multiplicity"]);
    t.push(vec![0usize.into(), 0.0.into(), 0.0.into(), s.zero_algebraic.into()]);
    for (j, l) in s.eigenvalues.iter().enumerate() {
        t.push(vec![(j + 1).into(), (*l).into(), 0.0.into(), 1usize.into()]);
    }
    Ok(t)
}

fn fig4a(ctx: &mut Ctx) -> anyhow::Result<Vec<Table>> {
    ctx.notes.push("spectrum row j = 0 is the zero eigenvalue with its algebraic multiplicity".into());
    Ok(vec![symbol_table(ctx.d())?, spectrum_table(ctx.n(), ctx.d())?])
}

fn cloud_table(ctx: &mut Ctx) -> anyhow::Result<Table> {
    let d = ctx.d();
    let trials = ctx.spec.trials.unwrap_or(1);
    let eps = ctx.spec.epsilon.clone().unwrap_or_default();
    let mut t = Table::new("cloud", &["n", "epsilon", "trial", "re", "im", "perturbation_norm"]);
    for n in fig4_sizes(&ctx.spec) {
        for &e in &eps {
            let cloud: PseudospectrumCloud = pseudospectrum_sample(n, d, e, trials, ctx.spec.seed())?;
            for (trial, err) in &cloud.failures {
                ctx.notes.push(format!("n = {n}, ε = {e:?}, trial {trial} failed: {err}"));
            }
            for tr in &cloud.trials {
                for z in &tr.eigenvalues {
                    t.push(vec![
                        n.into(),
                        e.into(),
                        Cell::Int(tr.trial as i64),
                        z.re.into(),
                        z.im.into(),
                        tr.perturbation_norm.into(),
                    ]);
                }
            }
        }
    }
    ctx.notes.push("E has i.i.d. standard normal entries; perturbation_norm is the Frobenius norm of εE".into());
    Ok(t)
}

fn fig4b(ctx: &mut Ctx) -> anyhow::Result<Vec<Table>> {
    Ok(vec![cloud_table(ctx)?, symbol_table(ctx.d())?])
}

fn fig4c(ctx: &mut Ctx) -> anyhow::Result<Vec<Table>> {
    let n = fig4_sizes(&ctx.spec)[0];
    Ok(vec![cloud_table(ctx)?, spectrum_table(n, ctx.d())?])
}

fn lambda_eff(ctx: &mut Ctx) -> anyhow::Result<Vec<Table>> {
    let d = ctx.d();
    let protocol = ctx.spec.protocol();
    let lph = lph(d)?;
    let ns = ctx.spec.n.map_or(vec![20, 40, 80], |n| vec![n]);
    let mut rates_t = Table::new("rates", &["n", "k", "t", "lambda_eff"]);
    let mut trans = Table::new("transition", &["n", "k", "lambda_ph", "lambda2", "t_star"]);
    for n in ns {
        let t_max = ctx.spec.t_max.unwrap_or(6 * n);
        let l2 = lambda2(n, d)?;
        for k in ctx.spec.cuts.clone().unwrap_or_else(|| vec![n / 2]) {
            let r = deviation_rates(n, d, k, t_max, protocol)?;
            for (t, x) in r.times.iter().zip(&r.rates) {
                rates_t.push(vec![n.into(), k.into(), (*t).into(), (*x).into()]);
            }
            trans.push(vec![n.into(), k.into(), lph.into(), l2.into(), transition_time(&r, lph, l2).into()]);
        }
    }
    ctx.notes.push(
        "lambda_eff(t + 1/2) = (I(t+1) - I_inf)/(I(t) - I_inf); t_star is the first crossing of (λ_ph + λ2)/2, empty if none"
            .into(),
    );
    Ok(vec![rates_t, trans])
}

fn purity_d234(ctx: &mut Ctx) -> anyhow::Result<Vec<Table>> {
    let (n, t_max) = (ctx.n(), ctx.t_max());
    let protocol = ctx.spec.protocol();
    let k = n / 2;
    let mut t = Table::new("purity", &["d", "t", "I", "I_minus_inf", "phantom", "lambda2_power"]);
    for d in 2..=4u32 {
        let lph = lph(d)?;
        let l2 = lambda2(n, d)?;
        let (i_col, dev_col): (Vec<Cell>, Vec<Cell>) = match ctx.spec.mode() {
            NumericMode::Float => {
                let i = cut_series::<f64>(n, d, k, t_max, protocol)?;
                let dev = deviation_series(n, d, k, t_max, protocol)?;
                (i.into_iter().map(Cell::from).collect(), dev.into_iter().map(Cell::from).collect())
            }
            NumericMode::Rational => {
                let i = cut_series::<Rational>(n, d, k, t_max, protocol)?;
                let inf = lubkin_purity(d, n, k)?;
                let dev: Vec<Cell> = i.iter().map(|x| exact_cell(&(x - &inf))).collect();
                (i.iter().map(exact_cell).collect(), dev)
            }
        };
        for (step, (i, dv)) in i_col.into_iter().zip(dev_col).enumerate() {
            t.push(vec![
                (d as usize).into(),
                step.into(),
                i,
                dv,
                lph.powi(step as i32).into(),
                l2.powi(step as i32).into(),
            ]);
        }
    }
    ctx.notes.push(format!("cut k = {k}; d runs over 2, 3, 4 regardless of --d"));
    Ok(vec![t])
}

fn jordan_window(ctx: &mut Ctx) -> anyhow::Result<Vec<Table>> {
    let (d, n, t_max) = (ctx.d(), ctx.n(), ctx.t_max());
    let (k, q) = (n / 2, n / 4);
    let half = cut_series::<f64>(n, d, k, t_max, Protocol::Staircase)?;
    let quarter = cut_series::<f64>(n, d, q, t_max, Protocol::Staircase)?;
    let prop = SpectralPropagator::new(n, d)?;
    let mut t = Table::new(
        "purity",
        &["t", "I_exact", "I_spectral_only", "I_quarter_cut", "I_quarter_spectral_only"],
    );
    for step in 0..=t_max {
        let sp = prop.purity(step, false);
        t.push(vec![
            step.into(),
            half[step].into(),
            sp.get(k).copied().into(),
            quarter[step].into(),
            sp.get(q).copied().into(),
        ]);
    }
    ctx.notes.push(format!(
        "half cut k = {k}, quarter cut k = {q}; spectral_only drops the Jordan kernel of A"
    ));
    Ok(vec![t])
}

fn sweep_values<S: Scalar>(ctx: &Ctx, cuts: &[usize]) -> anyhow::Result<Vec<Vec<S>>> {
    let (d, n, t_max) = (ctx.d(), ctx.n(), ctx.t_max());
    let protocol = ctx.spec.protocol();
    let tracked = reduced_cuts(n, protocol);
    if cuts.iter().all(|k| tracked.contains(k)) {
        let series = propagate_reduced::<S>(n, d, t_max, protocol)?;
        Ok(series
            .iter()
            .map(|s| cuts.iter().map(|&k| s.get(k).expect("tracked cut").clone()).collect())
            .collect())
    } else {
        let full = full_cut_series::<S>(&ctx.config(n)?, t_max)?;
        Ok(full.into_iter().map(|row| cuts.iter().map(|&k| row[k].clone()).collect()).collect())
    }
}

fn sweep(ctx: &mut Ctx) -> anyhow::Result<Vec<Table>> {
    let n = ctx.n();
    let protocol = ctx.spec.protocol();
    let cuts = ctx.spec.cuts.clone().unwrap_or_else(|| reduced_cuts(n, protocol));
    let values: Vec<Vec<Cell>> = match ctx.spec.mode() {
        NumericMode::Float => sweep_values::<f64>(ctx, &cuts)?
            .into_iter()
            .map(|r| r.into_iter().map(Cell::from).collect())
            .collect(),
        NumericMode::Rational => sweep_values::<Rational>(ctx, &cuts)?
            .into_iter()
            .map(|r| r.iter().map(exact_cell).collect())
            .collect(),
    };
    let mc = match ctx.spec.realizations {
        Some(r) => Some(mc_purity_series(&ctx.config(n)?, &cuts, r)?),
        None => None,
    };
    let mut t = Table::new("purity", &["t", "k", "I", "I_mc", "I_mc_stderr"]);
    for (step, row) in values.into_iter().enumerate() {
        for (c, i) in row.into_iter().enumerate() {
            let (m, se) = match &mc {
                Some(s) => (Cell::Float(s.mean[step][c]), Cell::Float(s.stderr[step][c])),
                None => (Cell::Missing, Cell::Missing),
            };
            t.push(vec![step.into(), cuts[c].into(), i, m, se]);
        }
    }
    Ok(vec![t])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(e: Experiment) -> ExperimentSpec {
        ExperimentSpec { experiment: Some(e), ..Default::default() }
    }

    #[test]
    fn sweep_t0_is_one() {
        let s = ExperimentSpec { n: Some(8), t_max: Some(0), ..spec(Experiment::Sweep) };
        let r = run_experiment(&s).unwrap();
        let t = &r.tables[0];
        assert_eq!(t.rows.len(), 6);
        assert!(t.rows.iter().all(|row| row[2] == Cell::Float(1.0)));
    }

    #[test]
    fn sweep_rational_and_full_fallback() {
        let s = ExperimentSpec {
            n: Some(6),
            d: Some(2),
            t_max: Some(2),
            cuts: Some(vec![1, 3]),
            mode: Some(NumericMode::Rational),
            ..spec(Experiment::Sweep)
        };
        let r = run_experiment(&s).unwrap();
        let rows = &r.tables[0].rows;
        assert_eq!(rows[0][2], Cell::Exact("1/1".into()));
        // one gate across a single-site cut: I_1(1) = 2α = 4/5
        assert_eq!(rows[2][2], Cell::Exact("4/5".into()));
    }

    #[test]
    fn fig1_small_has_mc_and_phantom() {
        let s = ExperimentSpec { n: Some(8), d: Some(2), t_max: Some(4), ..spec(Experiment::Fig1) };
        let r = run_experiment(&s).unwrap();
        let row = &r.tables[0].rows[0];
        assert_eq!(row[1], Cell::Float(1.0));
        assert_eq!(row[4], Cell::Float(1.0));
        let s = spec(Experiment::Fig1);
        let r = run_experiment(&s).unwrap();
        assert_eq!(r.tables[0].rows[3][1], Cell::Missing);
        assert!(r.notes.iter().any(|n| n.contains("skipped")));
    }

    #[test]
    fn refusal_before_compute() {
        let s = ExperimentSpec { n: Some(40), realizations: Some(4), ..spec(Experiment::Sweep) };
        let e = run_experiment(&s).unwrap_err().to_string();
        assert!(e.contains("3^40"), "{e}");
    }

    #[test]
    fn lambda_eff_single_n() {
        let s = ExperimentSpec { n: Some(20), ..spec(Experiment::LambdaEff) };
        let r = run_experiment(&s).unwrap();
        assert_eq!(r.tables[1].rows.len(), 1);
        assert!(matches!(r.tables[1].rows[0][4], Cell::Float(t) if t > 5.0 && t < 20.0));
    }
}
