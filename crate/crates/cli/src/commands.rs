use std::sync::Arc;
use std::time::Instant;

use graphconv::data::{filter_features, Standardizer};
use graphconv::graph::{
    expected_visits, grid_graph, select_neighbors, sparse_neighbors_bfs, stationary_ratio_check,
    transition_from_similarity, ConvVariant, NeighborTable, StationaryDiagnostic, TableJson,
    TieBreak, TransitionMatrix,
};
use graphconv::nn::{load_checkpoint, parse_architecture, save_checkpoint, NetworkConfig};
use graphconv::pipeline::{correlation_graph, GraphConfig};
use graphconv::train::{
    evaluate as eval_metrics, train_with, write_jsonl, EvalMetrics, TrainConfig,
};
use graphconv::{Error, Result};
use serde::Serialize;

use crate::inputs::{
    create_dir, load_standardizer, read_json, write_json, FeatureMap, GraphDir, FEATURES_FILE,
    STANDARDIZER_FILE, TABLE_FILE,
};
use crate::manifest::Manifest;
use crate::{BuildGraphArgs, EvaluateArgs, InspectArgs, TrainArgs};

const CHECKPOINT_FILE: &str = "checkpoint.gnck";
const LOG_FILE: &str = "train_log.jsonl";
const SUMMARY_FILE: &str = "summary.json";
const METRICS_FILE: &str = "metrics.json";

/// Writes a line to stdout. A closed pipe (`| head`) is not an error.
fn emit(text: impl std::fmt::Display) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn parse_tie_break(s: &str) -> Result<TieBreak> {
    if s == "deterministic" {
        return Ok(TieBreak::Deterministic);
    }
    s.strip_prefix("seeded:")
        .and_then(|seed| seed.parse().ok())
        .map(TieBreak::Seeded)
        .ok_or_else(|| {
            Error::Config(format!(
                "tie break must be deterministic or seeded:<u64>, got {s:?}"
            ))
        })
}

fn parse_variant(s: &str) -> ConvVariant {
    if s == "conv2" {
        ConvVariant::Conv2
    } else {
        ConvVariant::Conv1
    }
}

#[derive(Debug, Serialize)]
struct GraphSummary {
    source: String,
    n_nodes: usize,
    p: usize,
    k: u32,
    variant: ConvVariant,
    tie_break: TieBreak,
    pad_count: usize,
    table_hash: String,
    wall_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostic: Option<StationaryDiagnostic>,
}

pub fn build_graph(args: &BuildGraphArgs, workers: usize) -> Result<()> {
    let start = Instant::now();
    if args.p == 0 {
        return Err(Error::Config("--p must be at least 1".into()));
    }
    let cfg = GraphConfig {
        k: args.k,
        p: args.p,
        variant: parse_variant(&args.variant),
        tie_break: parse_tie_break(&args.tie_break)?,
    };
    let mut manifest = Manifest::new("build-graph", args, workers);

    let (source, table, transition, features): (
        String,
        NeighborTable,
        Option<TransitionMatrix>,
        FeatureMap,
    ) = if let Some(path) = &args.table {
        let table = if path.extension().is_some_and(|e| e == "json") {
            NeighborTable::try_from(read_json::<TableJson>(path)?)?
        } else {
            NeighborTable::read_file(path)?
        };
        manifest.input(path)?;
        let n = table.n_nodes();
        let features = FeatureMap {
            original_width: n,
            kept_columns: (0..n).collect(),
        };
        (format!("table {}", path.display()), table, None, features)
    } else if let Some((h, w)) = args.grid {
        if cfg.variant == ConvVariant::Conv2 {
            return Err(Error::Config(
                "conv2 needs correlations; grid graphs only support conv1".into(),
            ));
        }
        let grid = grid_graph(h, w)?;
        let transition = transition_from_similarity(&grid);
        let table = if cfg.k == 0 {
            let q = expected_visits(&transition, 0);
            select_neighbors(&q, cfg.p, cfg.variant, None, cfg.tie_break)?
        } else {
            sparse_neighbors_bfs(&grid, cfg.k, cfg.p, cfg.variant, None, cfg.tie_break)?
        };
        let n = h * w;
        let features = FeatureMap {
            original_width: n,
            kept_columns: (0..n).collect(),
        };
        (format!("grid {h}x{w}"), table, Some(transition), features)
    } else {
        let train = args.data.load_train()?;
        manifest.inputs(&args.data.files())?;
        let filtered = filter_features(&train, args.min_active, !args.keep_constant)?;
        log::info!(
            "{} training rows, {} of {} features kept",
            filtered.n_obs(),
            filtered.n_features(),
            train.n_features()
        );
        let graph = correlation_graph(&filtered, &cfg)?;
        let features = FeatureMap {
            original_width: train.n_features(),
            kept_columns: filtered.feature_index_map().to_vec(),
        };
        (
            "correlation".to_string(),
            graph.table,
            Some(graph.transition),
            features,
        )
    };

    let diagnostic = if args.diagnostic {
        if cfg.k == 0 {
            return Err(Error::Config("--diagnostic needs --k >= 1".into()));
        }
        let transition = transition.expect("--diagnostic conflicts with --table");
        Some(stationary_ratio_check(&transition, cfg.k)?)
    } else {
        None
    };

    create_dir(&args.out)?;
    let table_path = args.out.join(TABLE_FILE);
    table.write_file(&table_path)?;
    let features_path = args.out.join(FEATURES_FILE);
    write_json(&features_path, &features)?;
    let mut outputs = vec![table_path, features_path];
    if args.json {
        let json_path = args.out.join("table.json");
        write_json(&json_path, &table.to_json())?;
        outputs.push(json_path);
    }
    let summary = GraphSummary {
        source,
        n_nodes: table.n_nodes(),
        p: table.p(),
        k: table.k(),
        variant: table.variant(),
        tie_break: table.tie_break(),
        pad_count: table.pad_count(),
        table_hash: table.content_hash(),
        wall_ms: start.elapsed().as_millis() as u64,
        diagnostic,
    };
    write_json(&args.out.join(SUMMARY_FILE), &summary)?;
    for path in &outputs {
        manifest.output(path)?;
    }
    manifest.write(&args.out)?;
    emit(serde_json::to_string_pretty(&summary)?);
    Ok(())
}

pub fn train(args: &TrainArgs, workers: usize) -> Result<()> {
    let task = args.data.task()?;
    let graph = GraphDir::load(&args.graph)?;
    let mut train_data = graph.select(&args.data.load_train()?)?;
    let mut test_data = match args.data.load_test()? {
        Some(d) => Some(graph.select(&d)?),
        None => None,
    };
    let standardizer = if args.data.standardized() {
        let s = Standardizer::fit(&train_data)?;
        train_data = s.apply(&train_data)?;
        test_data = test_data.map(|d| s.apply(&d)).transpose()?;
        Some(s)
    } else {
        None
    };

    let net_cfg = NetworkConfig {
        n_nodes: train_data.n_features(),
        d_input: 1,
        task,
        dropout_rate: args.dropout,
        seed: args.seed,
    };
    let mut net = parse_architecture(&args.arch, &net_cfg, Some(Arc::new(graph.table)))?;
    emit(format_args!("parameters: {}", net.parameter_count()));

    let cfg = TrainConfig {
        learning_rate: args.lr,
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed: args.seed,
        dropout_rate: args.dropout,
        task,
        ..TrainConfig::default()
    };
    let history = train_with(&mut net, &train_data, test_data.as_ref(), &cfg, |r| {
        log::info!(
            "epoch {}/{}: train loss {:.6}, held-out {:?} ({} ms)",
            r.epoch,
            cfg.epochs,
            r.train_loss,
            r.eval_metric,
            r.wall_ms
        );
    })?;

    create_dir(&args.out)?;
    let checkpoint = args.out.join(CHECKPOINT_FILE);
    save_checkpoint(&net, &checkpoint)?;
    let log_path = args.out.join(LOG_FILE);
    write_jsonl(&history, &log_path)?;
    let mut outputs = vec![checkpoint, log_path];
    if let Some(s) = &standardizer {
        let path = args.out.join(STANDARDIZER_FILE);
        write_json(&path, s)?;
        outputs.push(path);
    }

    #[derive(Serialize)]
    struct Resolved<'a> {
        args: &'a TrainArgs,
        train: &'a TrainConfig,
        network: &'a NetworkConfig,
    }
    let resolved = Resolved {
        args,
        train: &cfg,
        network: &net_cfg,
    };
    let mut manifest = Manifest::new("train", &resolved, workers);
    manifest.inputs(&args.data.files())?;
    manifest.input(&args.graph.join(TABLE_FILE))?;
    manifest.input(&args.graph.join(FEATURES_FILE))?;
    for path in &outputs {
        manifest.output(path)?;
    }
    manifest.write(&args.out)?;
    if let Some(last) = history.records.last() {
        emit(format_args!(
            "final train loss {:.6}, held-out metric {}",
            last.train_loss,
            last.eval_metric
                .map_or("n/a".to_string(), |m| format!("{m:.6}"))
        ));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvalReport {
    #[serde(flatten)]
    metrics: EvalMetrics,
    parameters: usize,
    architecture: String,
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let task = args.data.task()?;
    let graph = GraphDir::load(&args.graph)?;
    let n_nodes = graph.table.n_nodes();
    let table = Arc::new(graph.table.clone());

    let net = match (&args.checkpoint, &args.arch) {
        (Some(path), _) => {
            let (net, _) = load_checkpoint(path, Some(table))?;
            if net.task() != task {
                return Err(Error::Config(
                    "checkpoint task does not match the data".into(),
                ));
            }
            net
        }
        (None, Some(arch)) => {
            let cfg = NetworkConfig {
                n_nodes,
                d_input: 1,
                task,
                dropout_rate: 0.0,
                seed: args.seed,
            };
            parse_architecture(arch, &cfg, Some(table))?
        }
        (None, None) => return Err(Error::Config("give --checkpoint or --arch".into())),
    };

    let data = match args.data.load_test()? {
        Some(d) => d,
        None => args.data.load_train()?,
    };
    let mut data = graph.select(&data)?;
    if args.data.standardized() {
        let sibling = args
            .checkpoint
            .as_ref()
            .and_then(|c| c.parent())
            .map(|dir| dir.join(STANDARDIZER_FILE))
            .filter(|p| p.exists());
        let s = match sibling {
            Some(path) => load_standardizer(&path)?,
            None => Standardizer::fit(&graph.select(&args.data.load_train()?)?)?,
        };
        data = s.apply(&data)?;
    }

    let report = EvalReport {
        metrics: eval_metrics(&net, &data)?,
        parameters: net.parameter_count(),
        architecture: net.architecture().to_string(),
    };
    let text = serde_json::to_string_pretty(&report)?;
    if let Some(out) = &args.out {
        create_dir(out)?;
        write_json(&out.join(METRICS_FILE), &report)?;
    }
    emit(text);
    Ok(())
}

pub fn inspect(args: &InspectArgs) -> Result<()> {
    let path = if args.table.is_dir() {
        args.table.join(TABLE_FILE)
    } else {
        args.table.clone()
    };
    let table = NeighborTable::read_file(&path)?;
    if args.node >= table.n_nodes() {
        return Err(Error::Config(format!(
            "node {} out of range for {} nodes",
            args.node,
            table.n_nodes()
        )));
    }
    if args.json {
        #[derive(Serialize)]
        struct Slot {
            index: usize,
            multiplier: f64,
            padded: bool,
        }
        let base = args.node * table.p();
        let slots: Vec<Slot> = (0..table.p())
            .map(|j| Slot {
                index: table.indices()[base + j],
                multiplier: table.multiplier(base + j),
                padded: table.is_padded(args.node, j),
            })
            .collect();
        let value = serde_json::json!({
            "node": args.node,
            "neighbors": table.neighbors(args.node),
            "slots": slots,
        });
        emit(serde_json::to_string_pretty(&value)?);
    } else {
        emit(format_args!("{:?}", table.neighbors(args.node)));
    }
    Ok(())
}
