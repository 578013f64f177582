use std::io::Write;
use std::path::Path;

use decaybound::bounds::{
    bound_report, fmt_sig, BoundKind, BoundReport, Growth, Objective, OptimizeOptions,
};
use decaybound::harness::{
    make_scenario_with, scenario_generator, verify_bound, write_certification_csv, ScenarioOptions,
};
use decaybound::koperator::{default_frequency_grid, duality_gap, estimate_k, resolvent_sup, write_trace_csv};
use decaybound::riccati::{solve_riccati, solve_to_critical, CriticalLength, RiccatiOptions};
use decaybound::{BoundParams, SemigroupSystem, WeightSpec};
use rayon::prelude::*;

use crate::config::{parse_kinds, parse_scenario, Command, Config, ParamsConfig};
use crate::output::Artifacts;
use crate::{CliError, Outcome};

pub fn execute(cfg: &Config, out_dir: &Path) -> Result<Outcome, CliError> {
    let mut art = Artifacts::new(out_dir, cfg);
    art.run_toml()?;
    match cfg.command {
        Command::Bound => bound(cfg, &mut art)?,
        Command::Riccati => riccati(cfg, &mut art)?,
        Command::Koperator => koperator(cfg, &mut art)?,
        Command::Certify => return certify(cfg, art),
        Command::Sweep => sweep(cfg, &mut art)?,
        Command::Wei => wei(cfg, &mut art)?,
    }
    Ok(art.finish())
}

fn bound_params(pc: &ParamsConfig) -> Result<BoundParams, CliError> {
    let mut params = BoundParams::new(pc.omega, pc.p)?;
    if let Some(k) = pc.k {
        params = params.with_k(k)?;
    }
    if let Some(r) = pc.r {
        params = params.with_r(r)?;
    }
    Ok(params)
}

fn growth(g: Option<[f64; 2]>) -> Growth {
    Growth {
        exponential: g.map(|[l, lambda]| (l, lambda)),
    }
}

/// Bound values at fixed `(a, b)`; fails with the violated condition when
/// `t < a + b`.
fn fixed_report(
    kind: BoundKind,
    m: &WeightSpec,
    params: &BoundParams,
    times: &[f64],
    a: f64,
    b: f64,
) -> Result<BoundReport, CliError> {
    let obj = Objective::new(kind, m, params)?;
    let mut rep = BoundReport::new(kind, params.clone());
    for &t in times {
        rep.push(t, obj.eval(t, a, b)?, Some((a, b)))?;
    }
    Ok(rep)
}

fn write_report(art: &mut Artifacts, stem: &str, rep: &BoundReport) -> Result<(), CliError> {
    art.table(&format!("{stem}.csv"), &notes(rep), |buf| Ok(rep.write_csv(buf)?))?;
    art.table(&format!("{stem}.dat"), &[], |buf| Ok(rep.write_plot(buf)?))
}

fn notes(rep: &BoundReport) -> Vec<String> {
    rep.notes.iter().map(|n| format!("note: {n}")).collect()
}

fn bound(cfg: &Config, art: &mut Artifacts) -> Result<(), CliError> {
    let bc = cfg.bound.as_ref().expect("checked");
    let m = cfg.weight_spec()?;
    let params = bound_params(cfg.params.as_ref().expect("checked"))?;
    let times = cfg.time_grid()?;
    for kind in parse_kinds(&bc.kinds)? {
        let rep = match (bc.a, bc.b) {
            (Some(a), Some(b)) => fixed_report(kind, &m, &params, &times, a, b)?,
            _ => bound_report(kind, &m, &params, growth(bc.growth), &times, &OptimizeOptions::default())?,
        };
        let last = rep.values.last().copied().unwrap_or(f64::NAN);
        art.say(format!("{kind}: {} values, last = {}", rep.values.len(), fmt_sig(last)));
        write_report(art, &format!("bound-{kind}"), &rep)?;
    }
    Ok(())
}

fn wei(cfg: &Config, art: &mut Artifacts) -> Result<(), CliError> {
    let rhat = cfg.wei.as_ref().expect("checked").rhat;
    let params = BoundParams::new(0.0, 2.0)?.with_k(1.0 / rhat)?;
    let rep = bound_report(
        BoundKind::Wei,
        &WeightSpec::unit(),
        &params,
        Growth::default(),
        &cfg.time_grid()?,
        &OptimizeOptions::default(),
    )?;
    art.say(format!("wei: {} values with rhat = {}", rep.values.len(), fmt_sig(rhat)));
    write_report(art, "wei", &rep)
}

fn riccati(cfg: &Config, art: &mut Artifacts) -> Result<(), CliError> {
    let rc = cfg.riccati.as_ref().expect("checked");
    let m = cfg.weight_spec()?;
    let (critical, a_star) = solve_to_critical(&m, rc.p, &RiccatiOptions::default())?;
    let (sol, end) = match rc.s_max {
        Some(s) => {
            let sol = solve_riccati(&m, rc.p, s)?;
            let end = s.min(sol.horizon());
            (sol, end)
        }
        None => {
            let end = match a_star {
                CriticalLength::Finite(a) => a,
                CriticalLength::Infinite => critical.horizon(),
            };
            (critical, end)
        }
    };
    let a_text = match a_star {
        CriticalLength::Finite(a) => fmt_sig(a),
        CriticalLength::Infinite => "inf".to_string(),
    };
    art.say(format!("a* = {a_text}"));
    let s: Vec<f64> = (1..=rc.samples).map(|i| end * i as f64 / rc.samples as f64).collect();
    let rows = s
        .iter()
        .map(|&x| Ok((x, sol.w(x)?, sol.psi(x)?)))
        .collect::<Result<Vec<_>, decaybound::Error>>()?;
    let mut extra = vec![format!("a_star = {a_text}"), format!("p = {}", fmt_sig(rc.p))];
    extra.extend(sol.diagnostics().iter().map(|d| format!("diagnostic: {d}")));
    art.table("psi.csv", &extra, |buf| {
        writeln!(buf, "s,w,psi")?;
        for (x, w, psi) in &rows {
            writeln!(buf, "{},{},{}", fmt_sig(*x), fmt_sig(*w), fmt_sig(*psi))?;
        }
        Ok(())
    })?;
    art.table("psi.dat", &[], |buf| {
        writeln!(buf, "# s psi")?;
        for (x, _, psi) in &rows {
            writeln!(buf, "{} {}", fmt_sig(*x), fmt_sig(*psi))?;
        }
        Ok(())
    })
}

fn system(cfg: &Config) -> Result<SemigroupSystem, CliError> {
    let sc = cfg.system.as_ref().expect("checked");
    match (&sc.scenario, &sc.matrix) {
        (Some(name), _) => Ok(scenario_generator(parse_scenario(name)?, sc.dim.unwrap_or(2), cfg.seed)?),
        (None, Some(rows)) => Ok(SemigroupSystem::from_real_rows(rows, "matrix")?),
        (None, None) => unreachable!("checked"),
    }
}

fn koperator(cfg: &Config, art: &mut Artifacts) -> Result<(), CliError> {
    let kc = cfg.koperator.as_ref().expect("checked");
    let sys = system(cfg)?;
    let est = estimate_k(&sys, kc.omega, kc.p, kc.horizon, kc.nodes)?;
    let kind = est.kind.as_str();
    let mut rows = vec![
        ("k".to_string(), fmt_sig(est.value), kind.to_string()),
        ("rhat".to_string(), fmt_sig(1.0 / est.value), kind.to_string()),
        ("iterations".to_string(), est.iterations.to_string(), if est.stagnated { "stagnated" } else { "converged" }.to_string()),
    ];
    art.say(format!("K = {} ({kind})", fmt_sig(est.value)));
    if kc.resolvent {
        let sup = resolvent_sup(&sys, kc.omega, &default_frequency_grid(&sys, kc.omega))?;
        let detail = if sup.tail_certified { "tail-certified" } else { "grid-only" };
        rows.push(("resolvent-sup".into(), fmt_sig(sup.value), detail.into()));
        rows.push(("resolvent-argmax".into(), fmt_sig(sup.argmax), detail.into()));
        rows.push(("r".into(), fmt_sig(1.0 / sup.value), detail.into()));
    }
    if kc.duality {
        let gap = duality_gap(&sys, kc.omega, kc.p, kc.horizon, kc.nodes)?;
        rows.push(("duality-gap".into(), fmt_sig(gap), kind.into()));
    }
    let extra = vec![format!("system = {} (dim {})", sys.label(), sys.dim())];
    art.table("koperator.csv", &extra, |buf| {
        writeln!(buf, "quantity,value,detail")?;
        for (q, v, d) in &rows {
            writeln!(buf, "{q},{v},{d}")?;
        }
        Ok(())
    })?;
    art.table("koperator-trace.csv", &[], |buf| Ok(write_trace_csv(&est, &mut *buf)?))
}

fn certify(cfg: &Config, mut art: Artifacts) -> Result<Outcome, CliError> {
    let cc = cfg.certify.as_ref().expect("checked");
    let mut opts = ScenarioOptions {
        p: cc.p,
        ..ScenarioOptions::default()
    };
    if cfg.times.is_some() {
        opts.t_grid = cfg.time_grid()?;
    }
    let scenario = make_scenario_with(parse_scenario(&cc.scenario)?, cc.dim, cfg.seed, &opts)?;
    let kinds = parse_kinds(&cc.kinds)?;
    let reports = kinds
        .par_iter()
        .map(|&k| verify_bound(&scenario, k).map(|r| (scenario.label.clone(), r)))
        .collect::<Result<Vec<_>, _>>()?;
    let (mut failed, mut total) = (0, 0);
    let mut extra = vec![format!("scenario = {} (K {})", scenario.label, scenario.k_kind.as_str())];
    for (_, rep) in &reports {
        let rows = rep.certification.as_deref().unwrap_or(&[]);
        let bad = rows.iter().filter(|c| !c.verdict.passed()).count();
        failed += bad;
        total += rows.len();
        art.say(format!("{}: {} of {} rows pass", rep.kind, rows.len() - bad, rows.len()));
        extra.extend(rep.notes.iter().map(|n| format!("note: {}: {n}", rep.kind)));
    }
    art.table("certification.csv", &extra, |buf| Ok(write_certification_csv(&reports, buf)?))?;
    if failed > 0 {
        return Err(CliError::CertificationFailed { failed, total });
    }
    Ok(art.finish())
}

struct Cell {
    p: f64,
    omega: f64,
    k: Option<f64>,
}

fn sweep(cfg: &Config, art: &mut Artifacts) -> Result<(), CliError> {
    let sc = cfg.sweep.as_ref().expect("checked");
    let pc = cfg.params.as_ref().expect("checked");
    let kind = parse_kinds(std::slice::from_ref(&sc.kind))?[0];
    let m = cfg.weight_spec()?;
    let times = match &sc.t {
        Some(t) => t.clone(),
        None => cfg.time_grid()?,
    };
    let ps = sc.p.clone().unwrap_or_else(|| vec![pc.p]);
    let omegas = sc.omega.clone().unwrap_or_else(|| vec![pc.omega]);
    let ks: Vec<Option<f64>> = match &sc.k {
        Some(ks) => ks.iter().copied().map(Some).collect(),
        None => vec![pc.k],
    };
    let mut cells = Vec::new();
    for &p in &ps {
        for &omega in &omegas {
            for &k in &ks {
                cells.push(Cell { p, omega, k });
            }
        }
    }
    let reports = cells
        .par_iter()
        .map(|c| {
            let params = bound_params(&ParamsConfig {
                omega: c.omega,
                p: c.p,
                k: c.k,
                r: pc.r,
            })?;
            Ok(bound_report(kind, &m, &params, growth(sc.growth), &times, &OptimizeOptions::default())?)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    art.say(format!("{kind}: {} cells x {} times", cells.len(), times.len()));
    let extra = vec![format!("kind = {kind}")];
    art.table("sweep.csv", &extra, |buf| {
        writeln!(buf, "p,omega,k,t,value,a,b")?;
        for (c, rep) in cells.iter().zip(&reports) {
            let k = c.k.map_or_else(String::new, fmt_sig);
            for i in 0..rep.t_grid.len() {
                let (a, b) = rep.argmin[i].map_or((String::new(), String::new()), |(a, b)| (fmt_sig(a), fmt_sig(b)));
                writeln!(
                    buf,
                    "{},{},{k},{},{},{a},{b}",
                    fmt_sig(c.p),
                    fmt_sig(c.omega),
                    fmt_sig(rep.t_grid[i]),
                    fmt_sig(rep.values[i])
                )?;
            }
        }
        Ok(())
    })
}
