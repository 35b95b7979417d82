use corrdyn::combinatorics::{binomial, reduce_unchecked, FullTensor};
use corrdyn::linalg::{r, C64, ONE};
use corrdyn::model::FermionChainModel;
use corrdyn::oracle::{build_liouvillian, exact_corr, initial_density, DenseLiouvillian};
use corrdyn::quad_dynamics::{self as qd, initial_corr, QuadPropagator};
use corrdyn::quartic_dynamics::{
    build_sector_generators, covariance_grid, steady_state_with_frozen, QuarticCore, ReducedPropagator,
    SparseReducedPropagator,
};
use corrdyn::spectrum::{match_spectra, quadratic_spectrum, quartic_spectrum, Source};
use corrdyn::structure::{rapid_spectrum, to_json};
use corrdyn::{CMat, GaussianMixture, InitialState, ParityFilter, ReducedTensor, StructureMatrices};

use crate::config::{self, Config, Observable, ObservableKind};
use crate::output::{emit, fmt, fmt_c, Csv};
use crate::{CliError, Global, Method};

/// Reduced systems up to this size evolve through one dense exponential.
const REDUCED_DENSE_MAX_DIM: usize = 4096;
/// Larger ones use sparse Taylor stepping, up to this size.
const REDUCED_SPARSE_MAX_DIM: usize = 400_000;
/// |Cov| at or below this counts as zero in sign summaries.
const COV_ZERO_TOL: f64 = 1e-10;

/// A command's table plus the outcome of any oracle comparison.
pub struct Run {
    csv: Csv,
    check: Result<(), CliError>,
}

impl Run {
    fn plain(csv: Csv) -> Self {
        Self { csv, check: Ok(()) }
    }
}

fn load(g: &Global) -> Result<Vec<(Option<String>, Config)>, CliError> {
    let path = g.config.as_ref().ok_or_else(|| CliError::config("--config is required"))?;
    config::load(path)
}

fn load_single(g: &Global) -> Result<Config, CliError> {
    let mut cases = load(g)?;
    if cases.len() != 1 || cases[0].0.is_some() {
        return Err(CliError::config("this command takes a config without cases"));
    }
    Ok(cases.remove(0).1)
}

/// Runs a table command once per case. Output is written before any oracle
/// comparison failure is reported.
pub fn run_table(g: &Global, cmd: &dyn Fn(&Global, &Config) -> Result<Run, CliError>) -> Result<(), CliError> {
    let cases = load(g)?;
    let single = cases.len() == 1 && cases[0].0.is_none();
    let mut parts = Vec::with_capacity(cases.len());
    let mut failure = None;
    for (name, cfg) in cases {
        if let (Some(n), true) = (&name, g.compare_oracle) {
            eprintln!("case {n}");
        }
        let run = cmd(g, &cfg)?;
        if let Err(e) = run.check {
            failure.get_or_insert(e);
        }
        parts.push((name.unwrap_or_default(), run.csv));
    }
    let csv = if single { parts.pop().expect("one case").1 } else { Csv::by_case(parts)? };
    emit(&csv.render(), g.out.as_deref())?;
    failure.map_or(Ok(()), Err)
}

fn model_of(cfg: &Config) -> Result<(FermionChainModel, StructureMatrices), CliError> {
    let spec = cfg.model.as_ref().ok_or_else(|| CliError::config("config has no model"))?;
    let (model, _) = spec.build()?;
    let sm = StructureMatrices::build(&model);
    Ok((model, sm))
}

fn method_of(g: &Global, cfg: &Config, model: &FermionChainModel) -> Result<Method, CliError> {
    if let Some(m) = g.method {
        return Ok(m);
    }
    if let Some(s) = &cfg.method {
        return s.parse();
    }
    Ok(if model.has_quadratic() { Method::Reduced } else { Method::Recursion })
}

fn require_quadratic_class(model: &FermionChainModel) -> Result<(), CliError> {
    if model.has_quadratic() {
        return Err(CliError::refused(
            "recursion method refused: quadratic dissipators present (use --method reduced)",
        ));
    }
    Ok(())
}

fn observables(cfg: &Config, l: usize) -> Result<Vec<(Observable, Vec<usize>)>, CliError> {
    let list = if cfg.observables.is_empty() { Observable::default_set(l) } else { cfg.observables.clone() };
    list.into_iter()
        .map(|o| {
            let idx = o.resolve(l)?;
            Ok((o, idx))
        })
        .collect()
}

fn needs_order_four(obs: &[(Observable, Vec<usize>)]) -> bool {
    obs.iter().any(|(o, idx)| match o.kind {
        ObservableKind::Nn | ObservableKind::Cov => true,
        ObservableKind::Corr => idx.len() == 4,
        ObservableKind::N | ObservableKind::NnWick | ObservableKind::CovWick => false,
    })
}

/// Evaluates one observable from an accessor for sorted distinct tuples.
fn evaluate(o: &Observable, idx: &[usize], l: usize, get: &dyn Fn(&[usize]) -> C64) -> C64 {
    match o.kind {
        ObservableKind::N => qd::density(|a, b| qd::signed_lookup(get, &[a, b]), l, idx[0]),
        ObservableKind::Nn | ObservableKind::NnWick => qd::density_density(get, l, idx[0], idx[1]),
        ObservableKind::Cov | ObservableKind::CovWick => qd::covariance(get, l, idx[0], idx[1]),
        ObservableKind::Corr => qd::signed_lookup(get, idx),
    }
}

/// Wick observables see every order through pairings of the order-2 tensor.
fn eval_all(obs: &[(Observable, Vec<usize>)], l: usize, get: &dyn Fn(&[usize]) -> C64) -> Vec<C64> {
    let t2 = obs
        .iter()
        .any(|(o, _)| o.kind.is_wick())
        .then(|| CMat::from_fn(2 * l, 2 * l, |i, j| qd::signed_lookup(get, &[i, j])));
    obs.iter()
        .map(|(o, idx)| match (&t2, o.kind.is_wick()) {
            (Some(t2), true) => evaluate(o, idx, l, &|ix: &[usize]| qd::wick_entry(t2, ix)),
            _ => evaluate(o, idx, l, get),
        })
        .collect()
}

fn full_get<'a>(t2: &'a CMat, t4: Option<&'a FullTensor>) -> impl Fn(&[usize]) -> C64 + 'a {
    move |idx: &[usize]| match idx.len() {
        0 => ONE,
        2 => t2[(idx[0], idx[1])],
        4 => t4.expect("order-4 tensor computed").get(idx),
        n => panic!("order {n} not available"),
    }
}

fn reduced_get(ts: &[ReducedTensor]) -> impl Fn(&[usize]) -> C64 + '_ {
    move |idx: &[usize]| ts[idx.len() / 2].get(idx)
}

fn oracle_get<'a>(lv: &'a DenseLiouvillian, rho: &'a CMat) -> impl Fn(&[usize]) -> C64 + 'a {
    move |idx: &[usize]| exact_corr(&lv.fock, rho, idx)
}

fn reduced_init(state: &InitialState, l: usize, max_order: usize) -> Result<Vec<ReducedTensor>, CliError> {
    Ok(initial_corr(state, l, max_order)?.iter().map(reduce_unchecked).collect())
}

fn sector_orders(dim: usize, max: usize) -> Vec<usize> {
    (0..=max.min(dim)).step_by(2).collect()
}

/// Reports max |Δ| per column on stderr and fails when it exceeds `tol`.
fn report_deviation(names: &[String], ours: &[Vec<C64>], exact: &[Vec<C64>], tol: f64) -> Result<(), CliError> {
    let mut worst: f64 = 0.0;
    for (k, name) in names.iter().enumerate() {
        let d = ours.iter().zip(exact).map(|(a, b)| (a[k] - b[k]).norm()).fold(0.0, f64::max);
        eprintln!("compare-oracle {name}: max_abs_diff={}", fmt(d));
        worst = worst.max(d);
    }
    let pass = worst <= tol;
    eprintln!("compare-oracle: {} (max {} vs tol {})", if pass { "PASS" } else { "FAIL" }, fmt(worst), fmt(tol));
    if pass {
        Ok(())
    } else {
        Err(CliError::failed("oracle comparison exceeded the tolerance"))
    }
}

pub fn evolve(g: &Global, cfg: &Config) -> Result<Run, CliError> {
    let times = cfg
        .times
        .as_ref()
        .ok_or_else(|| CliError::config("config has no time grid"))?
        .points()?;
    let (model, sm) = model_of(cfg)?;
    let l = model.l;
    let obs = observables(cfg, l)?;
    let state = cfg.initial.to_state(l)?;
    let method = method_of(g, cfg, &model)?;
    let order = if needs_order_four(&obs) { 4 } else { 2 };

    let values = match method {
        Method::Recursion => evolve_recursion(&model, &sm, &state, &obs, &times, order)?,
        Method::Reduced => evolve_reduced(&model, &sm, &state, &obs, &times, order)?,
        Method::Oracle => evolve_oracle(&model, &state, &obs, &times)?,
    };

    let names: Vec<String> = obs.iter().map(|(o, _)| o.name.clone()).collect();
    let mut header = vec!["t".to_string()];
    for n in &names {
        header.push(format!("{n}_re"));
        header.push(format!("{n}_im"));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&header_refs);
    for (t, row) in times.iter().zip(&values) {
        let mut cells = vec![fmt(*t)];
        for z in row {
            cells.extend(fmt_c(*z));
        }
        csv.row(cells);
    }
    let check = if g.compare_oracle && method != Method::Oracle {
        let exact = evolve_oracle(&model, &state, &obs, &times)?;
        report_deviation(&names, &values, &exact, g.tol.unwrap_or(1e-8))
    } else {
        Ok(())
    };
    Ok(Run { csv, check })
}

fn evolve_recursion(
    model: &FermionChainModel,
    sm: &StructureMatrices,
    state: &InitialState,
    obs: &[(Observable, Vec<usize>)],
    times: &[f64],
    order: usize,
) -> Result<Vec<Vec<C64>>, CliError> {
    require_quadratic_class(model)?;
    let prop = QuadPropagator::new(sm)?;
    if let Some(mix) = GaussianMixture::of(state, model.l).filter(|m| m.exact_below > order) {
        return times
            .iter()
            .map(|&t| {
                let at = prop.entries_at(&mix, t);
                let get = |idx: &[usize]| at.entry(idx).expect("order below the mixture bound");
                let vals = eval_all(obs, model.l, &get);
                Ok(vals)
            })
            .collect();
    }
    let init = initial_corr(state, model.l, order)?;
    let t2_0 = init[1].to_matrix();
    times
        .iter()
        .map(|&t| {
            let t2 = prop.evolve_t2(&t2_0, t);
            let t4 = if order >= 4 { Some(prop.high_order(&init, 2, t)?) } else { None };
            let vals = eval_all(obs, model.l, &full_get(&t2, t4.as_ref()));
            Ok(vals)
        })
        .collect()
}

fn evolve_reduced(
    model: &FermionChainModel,
    sm: &StructureMatrices,
    state: &InitialState,
    obs: &[(Observable, Vec<usize>)],
    times: &[f64],
    order: usize,
) -> Result<Vec<Vec<C64>>, CliError> {
    let core = QuarticCore::new(model, sm)?;
    let orders = sector_orders(core.dim, order);
    let total: usize = orders.iter().map(|&n| binomial(core.dim, n)).sum();
    if total > REDUCED_SPARSE_MAX_DIM {
        return Err(CliError {
            code: 4,
            msg: format!("reduced system of dimension {total} exceeds the evolution limit {REDUCED_SPARSE_MAX_DIM}"),
        });
    }
    let gens = build_sector_generators(&core, &orders)?;
    let init = reduced_init(state, model.l, order)?;
    if total <= REDUCED_DENSE_MAX_DIM {
        let prop = ReducedPropagator::new(gens)?;
        return times
            .iter()
            .map(|&t| {
                let ts = prop.evolve(&init, t)?;
                let vals = eval_all(obs, model.l, &reduced_get(&ts));
                Ok(vals)
            })
            .collect();
    }
    // Stepping needs ascending times; results are put back in grid order.
    let mut order_idx: Vec<usize> = (0..times.len()).collect();
    order_idx.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let sorted: Vec<f64> = order_idx.iter().map(|&k| times[k]).collect();
    let traj = SparseReducedPropagator::new(gens)?.trajectory(&init, &sorted)?;
    let mut out = vec![Vec::new(); times.len()];
    for (k, ts) in order_idx.into_iter().zip(&traj) {
        out[k] = eval_all(obs, model.l, &reduced_get(ts));
    }
    Ok(out)
}

fn evolve_oracle(
    model: &FermionChainModel,
    state: &InitialState,
    obs: &[(Observable, Vec<usize>)],
    times: &[f64],
) -> Result<Vec<Vec<C64>>, CliError> {
    let lv = build_liouvillian(model)?;
    let rho0 = initial_density(state, &lv.fock)?;
    let prop = lv.propagator();
    Ok(times
        .iter()
        .map(|&t| {
            let rho = prop.evolve(&rho0, t);
            let vals = eval_all(obs, model.l, &oracle_get(&lv, &rho));
            vals
        })
        .collect())
}

#[derive(Clone, Debug, Default)]
pub struct SpectrumArgs {
    pub parity: Option<String>,
    pub max_order: Option<usize>,
    pub keep: Option<usize>,
}

pub fn spectrum(g: &Global, cfg: &Config, args: &SpectrumArgs) -> Result<Run, CliError> {
    let (parity, max_order, keep) = (args.parity.clone(), args.max_order, args.keep);
    let (model, sm) = model_of(cfg)?;
    let parity: ParityFilter = parity
        .or_else(|| cfg.parity.clone())
        .unwrap_or_else(|| "even".into())
        .parse()?;
    let dim = sm.dim();
    let max_order = max_order.or(cfg.max_order).unwrap_or(dim);
    if max_order > dim {
        return Err(CliError::config(format!("max order {max_order} exceeds 2L = {dim}")));
    }
    let method = method_of(g, cfg, &model)?;

    let mut csv = Csv::new(&["re", "im", "parity", "sector", "multiplicity", "conjectured"]);
    let values: Vec<C64> = match method {
        Method::Recursion => {
            require_quadratic_class(&model)?;
            let res = quadratic_spectrum(&rapid_spectrum(&sm)?, parity, keep)?;
            if res.truncated {
                eprintln!("note: analytic spectrum truncated to the slowest modes");
            }
            for e in &res.entries {
                let sector = match e.source {
                    Source::Analytic(nu) => nu.count_ones() as usize,
                    Source::Sector(n) => n,
                };
                spectrum_row(&mut csv, e.eigenvalue(), parity_name(e.parity), sector, e.multiplicity, e.conjectured);
            }
            res.values()
        }
        Method::Reduced => {
            let core = QuarticCore::new(&model, &sm)?;
            let orders: Vec<usize> = (0..=max_order)
                .filter(|n| match parity {
                    ParityFilter::Even => n % 2 == 0,
                    ParityFilter::Odd => n % 2 == 1,
                    ParityFilter::All => true,
                })
                .collect();
            let res = quartic_spectrum(&core, &orders)?;
            for e in &res.entries {
                let Source::Sector(n) = e.source else { unreachable!() };
                spectrum_row(&mut csv, e.eigenvalue(), parity_name(e.parity), n, e.multiplicity, e.conjectured);
            }
            res.values()
        }
        Method::Oracle => {
            let vals = oracle_parity_values(&model, parity)?;
            for (z, p) in &vals {
                csv.row([fmt(z.re), fmt(z.im), p.to_string(), String::new(), "1".into(), "false".into()]);
            }
            vals.into_iter().map(|(z, _)| z).collect()
        }
    };
    if !g.compare_oracle || method == Method::Oracle {
        return Ok(Run::plain(csv));
    }
    let check = spectrum_check(g, &model, parity, &values)?;
    Ok(Run { csv, check })
}

/// Outer error: the oracle could not run. Inner: the comparison failed.
fn spectrum_check(
    g: &Global,
    model: &FermionChainModel,
    parity: ParityFilter,
    values: &[C64],
) -> Result<Result<(), CliError>, CliError> {
    let exact: Vec<C64> = oracle_parity_values(model, parity)?.into_iter().map(|(z, _)| z).collect();
    if exact.len() != values.len() {
        return Ok(Err(CliError::failed(format!(
            "spectrum has {} values, oracle {}; use the full order range",
            values.len(),
            exact.len()
        ))));
    }
    let rep = match_spectra(values, &exact)?;
    let tol = g.tol.unwrap_or(1e-6);
    let pass = rep.max_distance <= tol;
    eprintln!(
        "{}",
        serde_json::json!({
            "count": rep.count,
            "max_distance": rep.max_distance,
            "mean_distance": rep.mean_distance,
            "hausdorff": rep.hausdorff,
            "tol": tol,
            "pass": pass,
        })
    );
    Ok(if pass { Ok(()) } else { Err(CliError::failed("spectrum deviates from the oracle")) })
}

fn parity_name(p: corrdyn::Parity) -> &'static str {
    match p {
        corrdyn::Parity::Even => "even",
        corrdyn::Parity::Odd => "odd",
    }
}

fn spectrum_row(csv: &mut Csv, z: C64, parity: &str, sector: usize, mult: usize, conj: bool) {
    csv.row([fmt(z.re), fmt(z.im), parity.into(), sector.to_string(), mult.to_string(), conj.to_string()]);
}

fn oracle_parity_values(model: &FermionChainModel, parity: ParityFilter) -> Result<Vec<(C64, &'static str)>, CliError> {
    let lv = build_liouvillian(model)?;
    let (even, odd) = lv.parity_eigenvalues()?;
    let mut out = Vec::new();
    if parity != ParityFilter::Odd {
        out.extend(even.into_iter().map(|z| (z, "even")));
    }
    if parity != ParityFilter::Even {
        out.extend(odd.into_iter().map(|z| (z, "odd")));
    }
    out.sort_by(|a, b| b.0.re.total_cmp(&a.0.re).then(a.0.im.total_cmp(&b.0.im)));
    Ok(out)
}

pub fn steady(g: &Global, cfg: &Config) -> Result<Run, CliError> {
    let (model, sm) = model_of(cfg)?;
    let l = model.l;
    let obs = observables(cfg, l)?;
    let state = cfg.initial.to_state(l)?;
    let method = method_of(g, cfg, &model)?;
    let values = steady_values(method, &model, &sm, &state, &obs)?;
    let mut csv = Csv::new(&["quantity", "re", "im"]);
    for ((o, _), z) in obs.iter().zip(&values) {
        let [re, im] = fmt_c(*z);
        csv.row([o.name.clone(), re, im]);
    }
    let check = if g.compare_oracle && method != Method::Oracle {
        let exact = steady_values(Method::Oracle, &model, &sm, &state, &obs)?;
        let names: Vec<String> = obs.iter().map(|(o, _)| o.name.clone()).collect();
        report_deviation(&names, &[values], &[exact], g.tol.unwrap_or(1e-7))
    } else {
        Ok(())
    };
    Ok(Run { csv, check })
}

fn steady_values(
    method: Method,
    model: &FermionChainModel,
    sm: &StructureMatrices,
    state: &InitialState,
    obs: &[(Observable, Vec<usize>)],
) -> Result<Vec<C64>, CliError> {
    let l = model.l;
    match method {
        Method::Recursion => {
            require_quadratic_class(model)?;
            let ss = qd::steady_state_t2(sm)?;
            if ss.non_unique {
                eprintln!("note: steady state is not unique; minimum-norm solution reported");
            }
            let t4 = if needs_order_four(obs) { Some(qd::wick(&ss.t2, 4)?) } else { None };
            let vals = eval_all(obs, l, &full_get(&ss.t2, t4.as_ref()));
            Ok(vals)
        }
        Method::Reduced => {
            let core = QuarticCore::new(model, sm)?;
            let init = reduced_init(state, l, 4)?;
            let ss = steady_state_with_frozen(&core, 4.min(core.dim), &init)?;
            let vals = eval_all(obs, l, &reduced_get(&ss.tensors));
            Ok(vals)
        }
        Method::Oracle => {
            let lv = build_liouvillian(model)?;
            let rho = lv.steady_state()?;
            let vals = eval_all(obs, l, &oracle_get(&lv, &rho));
            Ok(vals)
        }
    }
}

/// ln⟨exp(c Σ n_j)⟩ at `fcs.time`, on the `times` grid when that is absent
/// and a grid is given, and in the steady state otherwise.
pub fn fcs(g: &Global, cfg: &Config) -> Result<Run, CliError> {
    let (model, sm) = model_of(cfg)?;
    let l = model.l;
    let spec = cfg.fcs.clone().unwrap_or(config::FcsSpec { sites: None, coef: None, time: None });
    let sites: Vec<usize> = match &spec.sites {
        Some(s) => {
            if s.iter().any(|&j| j == 0 || j > l) {
                return Err(CliError::config(format!("fcs site outside 1..={l}")));
            }
            s.iter().map(|j| j - 1).collect()
        }
        None => (0..l / 2).collect(),
    };
    let coef = spec.coef.unwrap_or(2.0 / l as f64);
    let state = cfg.initial.to_state(l)?;
    let method = method_of(g, cfg, &model)?;
    let grid: Option<Vec<f64>> = match (spec.time, &cfg.times) {
        (Some(t), _) => Some(vec![t]),
        (None, Some(tg)) => Some(tg.points()?),
        (None, None) => None,
    };
    let values = match method {
        Method::Recursion => fcs_recursion(&model, &sm, &state, &sites, coef, grid.as_deref())?,
        Method::Reduced => return Err(CliError::refused("fcs needs a Gaussian state (use --method recursion)")),
        Method::Oracle => fcs_oracle(&model, &state, &sites, coef, grid.as_deref())?,
    };
    let csv = match (&grid, spec.time) {
        (Some(ts), None) => {
            let mut csv = Csv::new(&["t", "ln_fcs_re", "ln_fcs_im"]);
            for (t, z) in ts.iter().zip(&values) {
                let [re, im] = fmt_c(*z);
                csv.row([fmt(*t), re, im]);
            }
            csv
        }
        _ => {
            let mut csv = Csv::new(&["quantity", "re", "im"]);
            let [re, im] = fmt_c(values[0]);
            csv.row(["ln_fcs".to_string(), re, im]);
            csv
        }
    };
    let check = if g.compare_oracle && method != Method::Oracle {
        let exact = fcs_oracle(&model, &state, &sites, coef, grid.as_deref())?;
        let ours: Vec<Vec<C64>> = values.iter().map(|z| vec![*z]).collect();
        let exact: Vec<Vec<C64>> = exact.iter().map(|z| vec![*z]).collect();
        report_deviation(&["ln_fcs".into()], &ours, &exact, g.tol.unwrap_or(1e-8))
    } else {
        Ok(())
    };
    Ok(Run { csv, check })
}

fn fcs_recursion(
    model: &FermionChainModel,
    sm: &StructureMatrices,
    state: &InitialState,
    sites: &[usize],
    coef: f64,
    times: Option<&[f64]>,
) -> Result<Vec<C64>, CliError> {
    require_quadratic_class(model)?;
    let (w, pref) = qd::number_weight(model.l, sites, coef);
    let value = |t2: &CMat| -> Result<C64, CliError> { Ok(qd::fcs(t2, std::slice::from_ref(&w))?.ln() + pref) };
    let Some(times) = times else {
        return Ok(vec![value(&qd::steady_state_t2(sm)?.t2)?]);
    };
    if matches!(state, InitialState::Ghz) {
        return Err(CliError::refused("fcs needs a Gaussian state; the GHZ state is not Gaussian"));
    }
    let t2_0 = initial_corr(state, model.l, 2)?[1].to_matrix();
    let prop = QuadPropagator::new(sm)?;
    times.iter().map(|&t| value(&prop.evolve_t2(&t2_0, t))).collect()
}

fn fcs_oracle(
    model: &FermionChainModel,
    state: &InitialState,
    sites: &[usize],
    coef: f64,
    times: Option<&[f64]>,
) -> Result<Vec<C64>, CliError> {
    let lv = build_liouvillian(model)?;
    let n = lv.hilbert_dim();
    let mut number = corrdyn::linalg::zeros(n, n);
    for &j in sites {
        let a = lv.fock.annihilator(j);
        number += corrdyn::linalg::adjoint(&a) * &a;
    }
    let weight = corrdyn::linalg::expm(&corrdyn::linalg::scale(&number, r(coef)));
    let value = |rho: CMat| corrdyn::linalg::trace(&(rho * &weight)).ln();
    let Some(times) = times else {
        return Ok(vec![value(lv.steady_state()?)]);
    };
    let rho0 = initial_density(state, &lv.fock)?;
    let prop = lv.propagator();
    Ok(times.iter().map(|&t| value(prop.evolve(&rho0, t))).collect())
}

pub fn cov_study(_g: &Global, cfg: &Config) -> Result<Run, CliError> {
    let spec = cfg.cov_study.as_ref().ok_or_else(|| CliError::config("config has no cov_study block"))?;
    let sweep = spec.points()?;
    let rates: Vec<[f64; 3]> = sweep.iter().map(|p| p.rates).collect();
    let pts = covariance_grid(spec.l, spec.j, &rates)?;
    let mut csv = Csv::new(&["delta", "gamma_l", "gamma_g", "gamma_t", "cov_re"]);
    let (mut pos, mut neg, mut zero) = (0, 0, 0);
    for (p, s) in pts.iter().zip(&sweep) {
        csv.row([fmt(s.delta.unwrap_or(p.delta)), fmt(p.gamma_l), fmt(p.gamma_g), fmt(p.gamma_t), fmt(p.cov_re)]);
        match p.cov_re {
            c if c.abs() <= COV_ZERO_TOL => zero += 1,
            c if c > 0.0 => pos += 1,
            _ => neg += 1,
        }
    }
    eprintln!("cov signs: positive={pos} negative={neg} zero={zero} (|cov| <= {})", fmt(COV_ZERO_TOL));
    Ok(Run::plain(csv))
}

/// One JSON report per case; exits 2 if any model is invalid.
pub fn validate(g: &Global) -> Result<(), CliError> {
    let cases = load(g)?;
    let single = cases.len() == 1 && cases[0].0.is_none();
    let mut reports = Vec::with_capacity(cases.len());
    let mut failure = None;
    for (name, cfg) in &cases {
        let spec = cfg.model.as_ref().ok_or_else(|| CliError::config("config has no model"))?;
        let mut body = match spec.build() {
            Ok((model, rep)) => serde_json::json!({
                "valid": true,
                "report": rep,
                "closure": corrdyn::quartic_dynamics::check_closure(&model),
                "has_quadratic": model.has_quadratic(),
            }),
            Err(e) => {
                let body = serde_json::json!({ "valid": false, "error": e.to_string() });
                failure.get_or_insert(CliError::from(e));
                body
            }
        };
        if let Some(n) = name {
            body["case"] = serde_json::json!(n);
        }
        reports.push(body);
    }
    let doc = if single { reports.pop().expect("one case") } else { serde_json::Value::Array(reports) };
    emit(&format!("{}\n", serde_json::to_string_pretty(&doc).expect("json")), g.out.as_deref())?;
    failure.map_or(Ok(()), Err)
}

pub fn dump_structure(g: &Global) -> Result<(), CliError> {
    let cfg = load_single(g)?;
    let (_, sm) = model_of(&cfg)?;
    let text = serde_json::to_string_pretty(&to_json(&sm)).expect("json");
    emit(&format!("{text}\n"), g.out.as_deref())
}

