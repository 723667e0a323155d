use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use semdisc::eval::{
    generate_bump_series, generate_concat_series, overlapping_rate, parse_series, random_walk,
    run_concat_protocol, BumpParams, InstancePool, Interval, LabeledSeries, SeriesMetadata,
};
use semdisc::search::{
    brute_force_distance_calls, brute_force_pair_count, default_target_len, search, Algorithm,
    SearchConfig,
};
use semdisc::TimeSeries;

use crate::{
    BenchArgs, CliError, DetectArgs, DetectionRecord, EvaluateArgs, GenerateArgs, Generator,
    PoolArgs, ProtocolArgs,
};

type CmdResult<T = ()> = Result<T, CliError>;

fn read_series(path: &Path) -> CmdResult<TimeSeries> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    parse_series(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("plain data serializes") + "\n"
}

pub fn detect(a: &DetectArgs) -> CmdResult {
    let ts = read_series(&a.input)?;
    let mut cfg = SearchConfig::new(a.context_len)
        .with_target_len(a.target_len.unwrap_or_else(|| default_target_len(a.context_len)))
        .with_epsilon(a.epsilon.policy(a.seed))
        .with_algorithm(a.algorithm);
    cfg.threads = a.threads.map(usize::from);

    let start = Instant::now();
    let out = search(&ts, &cfg)?;
    let elapsed = start.elapsed().as_secs_f64();

    let rec = DetectionRecord::new(&out, a.algorithm, ts.len(), (!a.omit_timing).then_some(elapsed));
    let text = rec.to_json();
    print!("{text}");
    if let Some(path) = &a.output {
        write_file(path, &text)?;
    }
    Ok(())
}

fn load_pool(path: &Path) -> CmdResult<InstancePool> {
    InstancePool::load(path).map_err(|e| CliError::input(e.to_string()))
}

/// Normal and anomalous pools selected by file and class.
fn select_pools(p: &PoolArgs) -> CmdResult<(InstancePool, InstancePool)> {
    let path = p
        .pool
        .as_deref()
        .ok_or_else(|| CliError::input("--pool is required for the concatenation generator"))?;
    let pool = load_pool(path)?;
    let normal_class = match &p.normal_class {
        Some(c) => c.clone(),
        None => pool
            .classes()
            .into_iter()
            .next()
            .ok_or_else(|| CliError::input(format!("{}: no instances", path.display())))?,
    };
    let normal = pool.with_class(&normal_class);
    let source = match &p.anomaly_pool {
        Some(other) => load_pool(other)?,
        None => pool,
    };
    let anomaly = match &p.anomaly_class {
        Some(c) => source.with_class(c),
        None if p.anomaly_pool.is_some() => source,
        None => source.without_class(&normal_class),
    };
    if normal.is_empty() || anomaly.is_empty() {
        return Err(CliError::input(format!(
            "empty pool: {} normal and {} anomalous instances",
            normal.len(),
            anomaly.len()
        )));
    }
    Ok((normal, anomaly))
}

pub fn generate(a: &GenerateArgs) -> CmdResult {
    fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(format!("{}: {e}", a.out_dir.display())))?;
    let pools = match a.generator {
        Generator::Concat => Some(select_pools(&a.pool)?),
        _ => None,
    };
    let bump = BumpParams {
        cycles: a.bump.cycles,
        cycle_len: a.bump.cycle_len,
        plateau_height: a.bump.plateau_height,
        ramp_len: a.bump.ramp_len,
        ramp_jitter: a.bump.ramp_jitter,
        amplitude_jitter: a.bump.amplitude_jitter,
        bump_width: a.bump.bump_width,
        bump_height: a.bump.bump_height,
    };
    if a.generator == Generator::Randomwalk && a.length == 0 {
        return Err(CliError::input("--length must be positive"));
    }

    println!("{:<16} {:>8} {:>20} {:>8}", "series", "length", "truth", "seed");
    for k in 0..a.count {
        let seed = a.seed.wrapping_add(k as u64);
        let stem = format!("{}_{k:03}", a.prefix);
        let (values, meta) = match (a.generator, &pools) {
            (Generator::Concat, Some((normal, anomaly))) => {
                let s = generate_concat_series(normal, anomaly, a.pool.normal_count, seed)?;
                (s.series, s.metadata)
            }
            (Generator::Bump, _) => {
                let s = generate_bump_series(&bump, seed)?;
                (s.series, s.metadata)
            }
            _ => {
                let series = random_walk(a.length, seed);
                let meta = SeriesMetadata {
                    generator: "randomwalk".into(),
                    seed,
                    length: series.len(),
                    truth: None,
                    negative_control: false,
                    params: serde_json::json!({ "length": a.length }),
                };
                (series, meta)
            }
        };
        write_file(
            &LabeledSeries::csv_path(&a.out_dir, &stem),
            &semdisc::eval::values_to_csv(values.values()),
        )?;
        write_file(&LabeledSeries::meta_path(&a.out_dir, &stem), &to_json(&meta))?;
        let truth = meta
            .truth
            .map_or_else(|| "-".to_string(), |t| format!("[{}, {}]", t.start, t.end));
        println!("{stem:<16} {:>8} {truth:>20} {seed:>8}", values.len());
    }
    Ok(())
}

#[derive(Deserialize)]
struct DetectedPart {
    target: Interval,
}

#[derive(Deserialize)]
struct TruthPart {
    truth: Option<Interval>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub detection: String,
    pub truth_file: String,
    pub detected: Interval,
    pub truth: Interval,
    pub overlap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub rows: Vec<EvaluationRow>,
    pub mean_overlap: f64,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CmdResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn evaluate(a: &EvaluateArgs) -> CmdResult {
    if a.detections.is_empty() {
        return Err(CliError::input("no detections given"));
    }
    if a.detections.len() != a.truth.len() {
        return Err(CliError::input(format!(
            "{} detection files but {} truth files",
            a.detections.len(),
            a.truth.len()
        )));
    }
    let mut rows = Vec::with_capacity(a.detections.len());
    for (dp, tp) in a.detections.iter().zip(&a.truth) {
        let det: DetectedPart = read_json(dp)?;
        let truth = read_json::<TruthPart>(tp)?
            .truth
            .ok_or_else(|| CliError::input(format!("{}: no truth interval", tp.display())))?;
        let overlap = overlapping_rate(det.target, truth)?;
        rows.push(EvaluationRow {
            detection: dp.display().to_string(),
            truth_file: tp.display().to_string(),
            detected: det.target,
            truth,
            overlap,
        });
    }
    let mean_overlap = rows.iter().map(|r| r.overlap).sum::<f64>() / rows.len() as f64;

    println!("{:<32} {:>16} {:>16} {:>8}", "detection", "detected", "truth", "overlap");
    for r in &rows {
        println!(
            "{:<32} {:>16} {:>16} {:>8.4}",
            r.detection,
            format!("[{}, {}]", r.detected.start, r.detected.end),
            format!("[{}, {}]", r.truth.start, r.truth.end),
            r.overlap
        );
    }
    println!("mean overlap {mean_overlap:.4}");
    let summary = EvaluationSummary { rows, mean_overlap };
    if let Some(path) = &a.output {
        write_file(path, &to_json(&summary))?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub size: usize,
    pub algorithm: Algorithm,
    pub distance_calls: u64,
    pub candidate_pairs: u64,
    pub pruning_rate: f64,
    /// Seconds; absent for closed-form rows.
    pub wall_time: Option<f64>,
    /// Counted in closed form instead of run.
    pub analytic: bool,
    /// Exhaustive distance calls divided by this row's calls.
    pub call_ratio: f64,
}

pub fn bench(a: &BenchArgs) -> CmdResult {
    if a.sizes.is_empty() || a.algorithms.is_empty() {
        return Err(CliError::input("need at least one size and one algorithm"));
    }
    let largest = *a.sizes.iter().max().expect("non-empty");
    let full = match &a.input {
        Some(path) => read_series(path)?,
        None => random_walk(largest, a.seed),
    };
    if largest > full.len() {
        return Err(CliError::input(format!(
            "size {largest} exceeds the series length {}",
            full.len()
        )));
    }
    let (big, small) = (a.context_len, a.target_len);

    let mut rows = Vec::new();
    println!(
        "{:>8} {:<12} {:>18} {:>10} {:>10} {:>10} {:>9}",
        "size", "algorithm", "distance_calls", "pruning", "seconds", "ratio", "mode"
    );
    for &size in &a.sizes {
        let ts = TimeSeries::new(full.values()[..size].to_vec())?;
        let brute_calls = brute_force_distance_calls(size, big, small);
        for &alg in &a.algorithms {
            let exhaustive = alg != Algorithm::Pruned;
            let row = if exhaustive && size > a.analytic_above {
                SearchConfig::new(big).with_target_len(small).validate(size)?;
                BenchRow {
                    size,
                    algorithm: alg,
                    distance_calls: brute_calls,
                    candidate_pairs: brute_force_pair_count(size, big, small),
                    pruning_rate: 0.0,
                    wall_time: None,
                    analytic: true,
                    call_ratio: 1.0,
                }
            } else {
                let mut cfg = SearchConfig::new(big)
                    .with_target_len(small)
                    .with_epsilon(a.epsilon.policy(a.seed))
                    .with_algorithm(alg);
                cfg.threads = a.threads.map(usize::from);
                let start = Instant::now();
                let out = search(&ts, &cfg)?;
                let m = out.metrics;
                BenchRow {
                    size,
                    algorithm: alg,
                    distance_calls: m.distance_calls,
                    candidate_pairs: m.candidate_pairs,
                    pruning_rate: m.pruning_rate(),
                    wall_time: Some(start.elapsed().as_secs_f64()),
                    analytic: false,
                    call_ratio: brute_calls as f64 / m.distance_calls.max(1) as f64,
                }
            };
            println!(
                "{:>8} {:<12} {:>18} {:>10.5} {:>10} {:>10.1} {:>9}",
                row.size,
                row.algorithm.name(),
                row.distance_calls,
                row.pruning_rate,
                row.wall_time.map_or_else(|| "-".to_string(), |t| format!("{t:.3}")),
                row.call_ratio,
                if row.analytic { "analytic" } else { "measured" }
            );
            rows.push(row);
        }
    }
    if let Some(path) = &a.output {
        write_file(path, &to_json(&rows))?;
    }
    Ok(())
}

pub fn protocol(a: &ProtocolArgs) -> CmdResult {
    let (normal, anomaly) = select_pools(&a.pool)?;
    let summary = run_concat_protocol(
        &normal,
        &anomaly,
        a.pool.normal_count,
        a.count,
        a.seed,
        a.context_len,
        a.threads.map(usize::from),
    )?;
    println!(
        "context length {}, target length {}",
        summary.context_len, summary.target_len
    );
    println!("{:>8} {:>16} {:>16} {:>9} {:>16} {:>9}", "seed", "truth", "semantic", "overlap", "classic", "overlap");
    let iv = |i: Interval| format!("[{}, {}]", i.start, i.end);
    for r in &summary.runs {
        println!(
            "{:>8} {:>16} {:>16} {:>9.4} {:>16} {:>9.4}",
            r.seed,
            iv(r.truth),
            iv(r.semantic),
            r.semantic_overlap,
            iv(r.classic),
            r.classic_overlap
        );
    }
    println!(
        "mean overlap: semantic {:.4}, classic {:.4}",
        summary.mean_semantic_overlap, summary.mean_classic_overlap
    );
    if let Some(path) = &a.output {
        write_file(path, &to_json(&summary))?;
    }
    Ok(())
}
