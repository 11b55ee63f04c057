use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use fmeanshift::experiments::{fpca_kmeans, generate, GeneratorKind, GeneratorSpec, KMeansInit};
use fmeanshift::inference::{SplitRule, Statistic, TestConfig};
use fmeanshift::io::{
    format_curves_csv, read_curves_csv, read_signature, tangential_acceleration, write_atomic, write_atomic_all, ModeTable,
    Provenance, RunReport, TestTable,
};
use fmeanshift::{
    builtin_pair, cluster, scan, test_modes, BandwidthSpec, DensityModel, DerivativeMethod, DistanceSpec,
    Error, FunctionalSample, Grid, MeanShiftConfig, Normalization, Result, ScanSpec,
};

use crate::args::*;

type Sample = FunctionalSample<f64>;

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Cluster(a) => run_cluster(a, cli.seed),
        Command::Scan(a) => run_scan(a, cli.seed),
        Command::TestModes(a) => run_test(a, cli.seed),
        Command::Simulate(a) => run_simulate(a, cli.seed),
        Command::Baseline(a) => run_baseline(a, cli.seed),
    }
}

struct Loaded {
    sample: Sample,
    inputs: Vec<PathBuf>,
    warnings: Vec<String>,
}

fn load(data: &DataArgs) -> Result<Loaded> {
    if let Some(path) = &data.curves {
        return Ok(Loaded {
            sample: read_curves_csv(path)?,
            inputs: vec![path.clone()],
            warnings: Vec::new(),
        });
    }
    let dir = data
        .signatures
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("give --curves or --signatures".into()))?;
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.is_file());
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidConfig(format!("no signature files in {}", dir.display())));
    }
    let grid = Arc::new(Grid::uniform(0.0, 1.0, data.grid_points)?);
    let method = DerivativeMethod::LocalPoly {
        degree: 2,
        bandwidth: data.smoothing_bandwidth,
    };
    let mut curves = Vec::new();
    let mut labels = Vec::new();
    let mut warnings = Vec::new();
    for f in &files {
        let sig = read_signature(f)?;
        let name = f.file_stem().map_or_else(|| f.display().to_string(), |s| s.to_string_lossy().into_owned());
        if sig.duplicate_timestamps > 0 {
            warnings.push(format!("{name}: {} repeated timestamps", sig.duplicate_timestamps));
        }
        let feat = tangential_acceleration(&sig, grid.clone(), &method)?;
        warnings.extend(feat.warnings.into_iter().map(|w| format!("{name}: {w}")));
        curves.push(feat.curve);
        labels.push(name);
    }
    Ok(Loaded {
        sample: FunctionalSample::new(curves, Some(labels))?,
        inputs: files,
        warnings,
    })
}

fn distance_spec(m: &ModelArgs) -> Result<DistanceSpec<f64>> {
    let method = match m.derivative {
        DerivativeArg::FiniteDifference => DerivativeMethod::FiniteDifference,
        DerivativeArg::LocalPoly => DerivativeMethod::LocalPoly {
            degree: m.derivative_degree,
            bandwidth: m.derivative_bandwidth,
        },
    };
    let spec = match m.distance {
        DistanceArg::L2 => DistanceSpec::l2(),
        DistanceArg::SobolevH1 => DistanceSpec::sobolev_h1(method),
        DistanceArg::DerivativeL2 => DistanceSpec::derivative_l2(m.order, method),
    };
    spec.validate()?;
    Ok(spec)
}

fn bandwidth_spec(b: &BandwidthArgs, fallback: Option<BandwidthSpec<f64>>) -> Result<BandwidthSpec<f64>> {
    if let Some(h) = b.bandwidth {
        return Ok(BandwidthSpec::Absolute(h));
    }
    if let Some(f) = b.bandwidth_frac {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::InvalidConfig(format!("--bandwidth-frac must lie in (0, 1], got {f}")));
        }
        return Ok(BandwidthSpec::FractionOfMax(f));
    }
    if let Some(q) = b.bandwidth_quantile {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::InvalidConfig(format!("--bandwidth-quantile must lie in (0, 1], got {q}")));
        }
        return Ok(BandwidthSpec::Quantile(q));
    }
    fallback.ok_or_else(|| {
        Error::InvalidConfig("give one of --bandwidth, --bandwidth-frac or --bandwidth-quantile".into())
    })
}

fn engine_config(e: &EngineArgs, seed: u64) -> MeanShiftConfig<f64> {
    MeanShiftConfig {
        max_iters: e.max_iters,
        step_tolerance: e.tolerance,
        merge_radius_factor: e.merge_factor,
        perturbation_scale: None,
        seed,
    }
}

fn normalization(m: &ModelArgs) -> Normalization {
    if m.normalized {
        Normalization::Pairwise
    } else {
        Normalization::Numerator
    }
}

fn model_config(m: &ModelArgs, e: &EngineArgs) -> BTreeMap<String, String> {
    let mut c = BTreeMap::new();
    c.insert("kernel".into(), m.kernel.clone());
    c.insert("distance".into(), format!("{:?}", m.distance));
    if m.distance != DistanceArg::L2 {
        c.insert("derivative".into(), format!("{:?}", m.derivative));
        if m.derivative == DerivativeArg::LocalPoly {
            c.insert("derivative_degree".into(), m.derivative_degree.to_string());
            c.insert("derivative_bandwidth".into(), m.derivative_bandwidth.to_string());
        }
    }
    if m.distance == DistanceArg::DerivativeL2 {
        c.insert("order".into(), m.order.to_string());
    }
    c.insert("normalization".into(), format!("{:?}", normalization(m)));
    c.insert("max_iters".into(), e.max_iters.to_string());
    if let Some(t) = e.tolerance {
        c.insert("tolerance".into(), t.to_string());
    }
    c.insert("merge_factor".into(), e.merge_factor.to_string());
    c
}

fn run_cluster(a: &ClusterArgs, seed: u64) -> Result<()> {
    let data = load(&a.data)?;
    let spec = distance_spec(&a.model)?;
    let pair = builtin_pair(&a.model.kernel)?;
    let bw = bandwidth_spec(&a.bandwidth, None)?;
    let rule = bw.resolve(&data.sample, &spec)?;
    let model = DensityModel::new(data.sample.clone(), pair, spec, rule.clone())?.with_normalization(normalization(&a.model));
    let cfg = engine_config(&a.engine, seed);
    let ms = cluster(&model, &cfg, None)?;

    let mut config = model_config(&a.model, &a.engine);
    config.insert("bandwidth_request".into(), format!("{bw:?}"));
    config.insert("bandwidth".into(), format!("{:?}", rule));
    let table = ModeTable::from_mode_set(&ms, data.sample.grid());
    let report = RunReport {
        command: "cluster".into(),
        config,
        provenance: Provenance::new(seed, &data.inputs)?,
        warnings: data.warnings,
        clusters: Some(table),
        scan: None,
        test: None,
    };
    // build every output before touching the filesystem
    let modes_text = a.modes_csv.as_ref().map(|_| {
        let labels = (0..ms.len()).map(|m| format!("mode{m}")).collect();
        FunctionalSample::new(ms.modes.clone(), Some(labels)).map(|s| format_curves_csv(&s))
    });
    let modes_text = modes_text.transpose()?;
    let report_text = report.to_toml()?;
    let mut files: Vec<(&Path, &[u8])> = Vec::new();
    if let (Some(p), Some(t)) = (&a.modes_csv, &modes_text) {
        files.push((p, t.as_bytes()));
    }
    if let Some(p) = &a.out {
        files.push((p, report_text.as_bytes()));
    }
    write_atomic_all(&files)?;
    if a.out.is_none() {
        print!("{report_text}");
    }
    eprintln!(
        "{} curves, {} modes, sizes {:?}, atomic {:?}",
        data.sample.len(),
        ms.len(),
        ms.sizes,
        ms.atomic_flags
    );
    Ok(())
}

fn run_scan(a: &ScanArgs, seed: u64) -> Result<()> {
    let data = load(&a.data)?;
    let spec = distance_spec(&a.model)?;
    let pair = builtin_pair(&a.model.kernel)?;
    let model = DensityModel::new(data.sample.clone(), pair, spec, fmeanshift::BandwidthRule::Fixed(1.0))?
        .with_normalization(normalization(&a.model));
    let sspec = ScanSpec {
        n_values: a.values,
        lo_frac: a.lo,
        hi_frac: a.hi,
        min_plateau_len: a.min_plateau,
    };
    let result = scan(&model, &sspec, &engine_config(&a.engine, seed))?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| Error::InvalidConfig(e.to_string());
    w.write_record(["bandwidth", "fraction", "nonatomic_clusters", "clustered_curves", "modes"])
        .map_err(io_err)?;
    for (i, h) in result.bandwidths.iter().enumerate() {
        w.write_record([
            h.to_string(),
            (h / result.max_distance).to_string(),
            result.nonatomic_counts[i].to_string(),
            result.clustered_counts[i].to_string(),
            result.mode_counts[i].to_string(),
        ])
        .map_err(io_err)?;
    }
    let table = w.into_inner().map_err(|e| Error::InvalidConfig(e.to_string()))?;

    let mut config = model_config(&a.model, &a.engine);
    config.insert("values".into(), a.values.to_string());
    config.insert("lo".into(), a.lo.to_string());
    config.insert("hi".into(), a.hi.to_string());
    config.insert("min_plateau".into(), a.min_plateau.to_string());
    let report = RunReport {
        command: "scan".into(),
        config,
        provenance: Provenance::new(seed, &data.inputs)?,
        warnings: data.warnings,
        clusters: None,
        scan: Some(result),
        test: None,
    };
    let report_text = report.to_toml()?;
    let mut files: Vec<(&Path, &[u8])> = Vec::new();
    if let Some(p) = &a.table {
        files.push((p, &table));
    }
    if let Some(p) = &a.out {
        files.push((p, report_text.as_bytes()));
    }
    write_atomic_all(&files)?;
    match (&a.table, &a.out) {
        (None, None) => print!("{}", String::from_utf8_lossy(&table)),
        (Some(_), None) => print!("{report_text}"),
        _ => {}
    }
    Ok(())
}

fn run_test(a: &TestArgs, seed: u64) -> Result<()> {
    let data = load(&a.data)?;
    let spec = distance_spec(&a.model)?;
    let pair = builtin_pair(&a.model.kernel)?;
    let bw = bandwidth_spec(&a.bandwidth, Some(BandwidthSpec::Quantile(0.41)))?;
    let t_cfg = TestConfig {
        alpha: a.alpha,
        n_boot: a.boot,
        statistic: match a.statistic {
            StatisticArg::Eigen => Statistic::LambdaEigen,
            StatisticArg::Paper => Statistic::LambdaPaper,
        },
        split: if a.random_split {
            SplitRule::Random { seed }
        } else {
            SplitRule::FirstHalf
        },
        ..TestConfig::default()
    };
    let rep = test_modes(&data.sample, &pair, &spec, &bw, &engine_config(&a.engine, seed), &t_cfg, seed)?;
    let table = TestTable::from_report(&rep, data.sample.grid());

    let mut w = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| Error::InvalidConfig(e.to_string());
    w.write_record([
        "mode",
        "cluster_size",
        "atomic",
        "lambda_eigen",
        "lambda_paper",
        "ci_lo",
        "ci_hi",
        "significant",
    ])
    .map_err(io_err)?;
    for r in &table.rows {
        w.write_record([
            r.mode.to_string(),
            r.cluster_size.to_string(),
            r.atomic.to_string(),
            r.lambda_eigen.to_string(),
            r.lambda_paper.map_or_else(|| "undefined".into(), |v| v.to_string()),
            r.ci_lo.to_string(),
            r.ci_hi.to_string(),
            r.significant.to_string(),
        ])
        .map_err(io_err)?;
    }
    let csv_table = w.into_inner().map_err(|e| Error::InvalidConfig(e.to_string()))?;

    let mut config = model_config(&a.model, &a.engine);
    config.insert("bandwidth_request".into(), format!("{bw:?}"));
    config.insert("bandwidth".into(), format!("{:?}", rep.bandwidth));
    config.insert("alpha".into(), a.alpha.to_string());
    config.insert("boot".into(), a.boot.to_string());
    config.insert("statistic".into(), format!("{:?}", t_cfg.statistic));
    config.insert("split".into(), format!("{:?}", t_cfg.split));
    let summary = format!(
        "{} candidates, significant {:?}",
        table.rows.len(),
        table.significant_modes
    );
    let report = RunReport {
        command: "test-modes".into(),
        config,
        provenance: Provenance::new(seed, &data.inputs)?,
        warnings: data.warnings,
        clusters: None,
        scan: None,
        test: Some(table),
    };
    let report_text = report.to_toml()?;
    let mut files: Vec<(&Path, &[u8])> = Vec::new();
    if let Some(p) = &a.table {
        files.push((p, &csv_table));
    }
    if let Some(p) = &a.out {
        files.push((p, report_text.as_bytes()));
    }
    write_atomic_all(&files)?;
    if a.out.is_none() {
        print!("{report_text}");
    }
    eprintln!("{summary}");
    Ok(())
}

fn run_simulate(a: &SimulateArgs, seed: u64) -> Result<()> {
    let kind = GeneratorKind::by_name(&a.kind)?;
    let n = a.n.unwrap_or_else(|| kind.default_n());
    let grid = Arc::new(Grid::uniform(0.0, 1.0, a.grid_points)?);
    let g = generate::<f64>(&GeneratorSpec::new(kind.clone(), n, seed), grid)?;
    write_atomic(&a.out, format_curves_csv(&g.sample).as_bytes())?;
    if matches!(kind, GeneratorKind::CircularSincos { .. }) {
        eprintln!("note: ring radii and noise level are this tool's own choice, not taken from a published setup");
    }
    Ok(())
}

fn run_baseline(a: &BaselineArgs, seed: u64) -> Result<()> {
    let data = load(&a.data)?;
    let res = fpca_kmeans(&data.sample, a.components, a.k, &KMeansInit::Seeded(seed))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| Error::InvalidConfig(e.to_string());
    let mut head = vec!["label".to_string()];
    head.extend((1..=a.components).map(|c| format!("pc{c}")));
    head.push("cluster".into());
    w.write_record(&head).map_err(io_err)?;
    for (i, s) in res.pc_scores.iter().enumerate() {
        let label = data
            .sample
            .labels()
            .map_or_else(|| i.to_string(), |l| l[i].clone());
        let mut row = vec![label];
        row.extend(s.iter().map(|v| v.to_string()));
        row.push(res.km_assignments[i].to_string());
        w.write_record(&row).map_err(io_err)?;
    }
    let table = w.into_inner().map_err(|e| Error::InvalidConfig(e.to_string()))?;
    match &a.out {
        Some(p) => write_atomic(p, &table)?,
        None => print!("{}", String::from_utf8_lossy(&table)),
    }
    eprintln!(
        "explained variance {:?}, {} k-means iterations",
        res.explained_variance, res.iterations
    );
    Ok(())
}
