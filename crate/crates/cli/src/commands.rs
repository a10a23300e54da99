use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde_json::{json, Value};

use effc_core::dynamics::{descent_replicas, simulate_path_into, CsvSink};
use effc_core::excursions::{
    box_dimension, log_scales, reach_tail_exponent, sample_excursion, speed_estimate, ExcursionCollector, ZeroSet,
};
use effc_core::oracle::{absorption_times, build_generator, exact_hitting_times, stationary_solve};
use effc_core::par::{map_replicas, Execution};
use effc_core::rng::replica_rng;
use effc_core::stats::{mean_and_se, tv_distance};
use effc_core::validation::{run_suite, Suite};
use effc_core::{analytic, Error, Result, SCHEMA_VERSION};

use crate::config::RunConfig;

pub const EXIT_ACCEPTANCE: i32 = 3;

/// JSON document for stdout plus the exit status.
pub struct Outcome {
    pub json: Option<Value>,
    pub exit: i32,
}

impl Outcome {
    fn ok(json: Value) -> Self {
        Self { json: Some(json), exit: 0 }
    }
}

fn header(command: &str, cfg: &RunConfig) -> Result<Value> {
    let params = cfg.params()?;
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "params": params,
        "regime": format!("{:?}", params.regime()),
    }))
}

fn with(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(b), Value::Object(e)) = (&mut base, extra) {
        b.extend(e);
    }
    base
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn opt<T>(r: Result<T>) -> Option<T> {
    r.ok()
}

pub fn analytic(cfg: &RunConfig, out: Option<&Path>) -> Result<Outcome> {
    let params = cfg.params()?;
    let k_max = u64::from(cfg.k_max.unwrap_or(20));
    let mut rows = Vec::new();
    for k in 1..=k_max {
        rows.push(json!({
            "k": k,
            "stationary_pmf": opt(analytic::stationary_pmf(&params, k)),
            "hitting_time_from_zero": opt(analytic::hitting_time_from_zero(&params, k)),
            "holding_time": opt(analytic::holding_time(&params, k)),
            "p_descend_to_1": analytic::p_descend(&params, k, 1)?,
            "excursion_reach_weight": analytic::excursion_reach_weight(&params, k)?,
        }));
    }
    if let Some(path) = out {
        let mut w = create(path)?;
        writeln!(w, "k,stationary_pmf,hitting_time_from_zero,holding_time,p_descend_to_1,excursion_reach_weight")?;
        let cell = |v: &Value| v.as_f64().map(|x| x.to_string()).unwrap_or_default();
        for r in &rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r["k"],
                cell(&r["stationary_pmf"]),
                cell(&r["hitting_time_from_zero"]),
                cell(&r["holding_time"]),
                cell(&r["p_descend_to_1"]),
                cell(&r["excursion_reach_weight"])
            )?;
        }
        w.flush()?;
    }
    Ok(Outcome::ok(with(
        header("analytic", cfg)?,
        json!({
            "rho_1": opt(analytic::stationary_pmf(&params, 1)),
            "stationary_tail_beyond_k_max": opt(analytic::stationary_tail(&params, k_max)),
            "mean_time_to_frag_from_k_max": opt(analytic::mean_time_to_frag(&params, k_max)),
            "table": rows,
        }),
    )))
}

pub fn simulate(cfg: &RunConfig, out: Option<&Path>) -> Result<Outcome> {
    let params = cfg.params()?;
    let n_max = cfg.need("n_max", cfg.n_max)?;
    let t_end = cfg.need("t_end", cfg.t_end)?;
    let initial = cfg.initial.unwrap_or(n_max);
    let mut rng = replica_rng(cfg.seed(), 0);
    let summary = match out {
        Some(path) => {
            let mut sink = CsvSink::new(create(path)?, initial)?;
            let s = simulate_path_into(&params, n_max, t_end, initial, cfg.max_events, &mut rng, &mut sink)?;
            sink.finish()?;
            s
        }
        None => {
            let stdout = io::stdout();
            let mut sink = CsvSink::new(BufWriter::new(stdout.lock()), initial)?;
            let s = simulate_path_into(&params, n_max, t_end, initial, cfg.max_events, &mut rng, &mut sink)?;
            match sink.finish() {
                // The reader went away (`effc simulate | head`): nothing left to report.
                Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => {
                    return Ok(Outcome { json: None, exit: 0 })
                }
                r => r?,
            }
            return Ok(Outcome { json: None, exit: if s.truncated { 2 } else { 0 } });
        }
    };
    Ok(Outcome::ok(with(
        header("simulate", cfg)?,
        json!({
            "n_max": n_max,
            "t_end": t_end,
            "initial": initial,
            "seed": cfg.seed(),
            "events": summary.events,
            "covered_until": summary.covered_until,
            "truncated": summary.truncated,
        }),
    )))
}

pub fn excursions(cfg: &RunConfig, out: Option<&Path>) -> Result<Outcome> {
    let params = cfg.params()?;
    let n_max = cfg.need("n_max", cfg.n_max)?;
    let t_end = cfg.need("t_end", cfg.t_end)?;
    let mut collector = ExcursionCollector::new(n_max);
    let mut rng = replica_rng(cfg.seed(), 0);
    let summary = simulate_path_into(&params, n_max, t_end, n_max, cfg.max_events, &mut rng, &mut collector)?;
    let seg = collector.finish(summary.covered_until)?;
    if let Some(path) = out {
        let mut w = create(path)?;
        seg.write_csv(&mut w)?;
        w.flush()?;
    }
    let complete: Vec<f64> = seg.excursions.iter().filter(|e| !e.is_clipped()).map(|e| e.duration()).collect();
    let (mean_duration, mean_duration_se) = mean_and_se(&complete);
    let mins: Vec<u32> = seg.excursions.iter().map(|e| e.min_state).collect();
    let reach = match reach_tail_exponent(&mins, 10, 1000.min(n_max.saturating_sub(1)).max(11), 21) {
        Ok(fit) => {
            json!({ "slope": fit.fit.slope, "slope_se": fit.fit.slope_se, "r2": fit.fit.r2, "counts": fit.counts })
        }
        Err(e) => json!({ "error": e.to_string() }),
    };
    let speed = match (&cfg.j_window, cfg.replicas) {
        (Some(levels), Some(replicas)) => {
            let mut levels = levels.clone();
            levels.sort_unstable_by(|a, b| b.cmp(a));
            levels.dedup();
            let stop = *levels.last().ok_or_else(|| Error::Domain("empty j-window".into()))?;
            let seed = effc_core::rng::derive_seed(cfg.seed(), 1);
            let samples = map_replicas(replicas, |i| {
                sample_excursion(&params, n_max, &levels, stop, &mut replica_rng(seed, i as u64))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            serde_json::to_value(speed_estimate(&samples, &levels, params.c())?).expect("serializable")
        }
        _ => Value::Null,
    };
    Ok(Outcome::ok(with(
        header("excursions", cfg)?,
        json!({
            "n_max": n_max,
            "t_end": t_end,
            "seed": cfg.seed(),
            "events": summary.events,
            "truncated": summary.truncated,
            "excursions": seg.excursions.len(),
            "clipped": seg.excursions.len() - complete.len(),
            "ceiling_time": seg.ceiling_time,
            "excursion_time": seg.excursion_time(),
            "mean_duration": mean_duration,
            "mean_duration_se": mean_duration_se,
            "reach_fit": reach,
            "speed": speed,
        }),
    )))
}

pub fn dimension(cfg: &RunConfig, out: Option<&Path>) -> Result<Outcome> {
    let params = cfg.params()?;
    let n_max = cfg.need("n_max", cfg.n_max)?;
    let t_end = cfg.need("t_end", cfg.t_end)?;
    let scales = cfg.scales.clone().unwrap_or_else(|| log_scales(t_end, t_end * 1e-8, 33));
    let mut zero = ZeroSet::new(n_max);
    let mut rng = replica_rng(cfg.seed(), 0);
    let summary = simulate_path_into(&params, n_max, t_end, n_max, cfg.max_events, &mut rng, &mut zero)?;
    let floor = if params.lambda() > 0.0 { 1.0 / (params.lambda() * f64::from(n_max)) } else { 0.0 };
    let est = box_dimension(&zero, summary.covered_until, &scales, floor)?;
    if let Some(path) = out {
        let mut w = create(path)?;
        est.write_csv(&mut w)?;
        w.flush()?;
    }
    Ok(Outcome::ok(with(
        header("dimension", cfg)?,
        json!({
            "n_max": n_max,
            "t_end": t_end,
            "seed": cfg.seed(),
            "events": summary.events,
            "truncated": summary.truncated,
            "ceiling_time": zero.total_time(),
            "truncation_floor": floor,
            "estimate": est,
        }),
    )))
}

pub fn hitting(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.params()?;
    let n_max = cfg.need("n_max", cfg.n_max)?;
    let k = cfg.need("k", cfg.k)?;
    let replicas = cfg.replicas.unwrap_or(1000);
    let outs = descent_replicas(&params, n_max, k, n_max, cfg.max_events, replicas, cfg.seed(), Execution::Parallel)?;
    let times: Vec<f64> = outs.iter().filter_map(|o| o.reached().map(|r| r.total_time)).collect();
    let frags: Vec<f64> = outs.iter().filter_map(|o| o.reached().map(|r| r.frag_count as f64)).collect();
    let (mean, se) = mean_and_se(&times);
    let (frag_mean, frag_se) = mean_and_se(&frags);
    let oracle = if n_max <= 1_000_000 {
        exact_hitting_times(&build_generator(&params, n_max as usize)?, k as usize)?.last().copied()
    } else {
        None
    };
    Ok(Outcome::ok(with(
        header("hitting", cfg)?,
        json!({
            "n_max": n_max,
            "k": k,
            "replicas": replicas,
            "seed": cfg.seed(),
            "reached": times.len(),
            "budget_exhausted": replicas - times.len(),
            "mean_time": mean,
            "mean_time_se": se,
            "mean_frag_count": frag_mean,
            "mean_frag_count_se": frag_se,
            "analytic_from_infinity": opt(analytic::hitting_time_from_zero(&params, u64::from(k))),
            "oracle_from_ceiling": oracle,
        }),
    )))
}

pub fn oracle(cfg: &RunConfig, out: Option<&Path>) -> Result<Outcome> {
    let params = cfg.params()?;
    let k_max = cfg.need("k_max", cfg.k_max)? as usize;
    let gen = build_generator(&params, k_max)?;
    let pi = stationary_solve(&gen)?;
    let tv = analytic::stationary_table(&params, k_max as u64).ok().map(|t| {
        let z: f64 = t.pmf.iter().sum();
        let renorm: Vec<f64> = t.pmf.iter().map(|r| r / z).collect();
        tv_distance(&pi, &renorm)
    });
    let hitting = match cfg.k {
        Some(k) => exact_hitting_times(&gen, k as usize)?.last().copied(),
        None => None,
    };
    let absorption = absorption_times(&gen).ok().and_then(|m| m.last().copied());
    if let Some(path) = out {
        let mut w = create(path)?;
        writeln!(w, "k,pi")?;
        for (i, p) in pi.iter().enumerate() {
            writeln!(w, "{},{p}", i + 1)?;
        }
        w.flush()?;
    }
    Ok(Outcome::ok(with(
        header("oracle", cfg)?,
        json!({
            "k_max": k_max,
            "mass_at_1": pi[0],
            "mass_at_ceiling": pi[k_max - 1],
            "tv_to_renormalized_law": tv,
            "target": cfg.k,
            "hitting_time_from_ceiling": hitting,
            "time_to_first_frag_from_ceiling": absorption,
        }),
    )))
}

pub fn validate(cfg: &RunConfig) -> Result<Outcome> {
    let suite: Suite = cfg.suite.as_deref().unwrap_or("quick").parse()?;
    let seed = cfg.seed.unwrap_or(42);
    let reports = run_suite(suite, seed)?;
    let mut stderr = io::stderr().lock();
    for r in &reports {
        writeln!(stderr, "{r}")?;
    }
    let passed = reports.iter().all(|r| r.passed);
    // Wall-clock times go to stderr only, so the JSON is reproducible.
    let mut criteria = serde_json::to_value(&reports).expect("serializable");
    if let Value::Array(items) = &mut criteria {
        for item in items {
            if let Value::Object(m) = item {
                m.remove("elapsed_secs");
            }
        }
    }
    let json = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "validate",
        "suite": suite,
        "seed": seed,
        "passed": passed,
        "criteria": criteria,
    });
    Ok(Outcome { json: Some(json), exit: if passed { 0 } else { EXIT_ACCEPTANCE } })
}
