use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};

use zonetrack::benchmark::{Benchmark, DataSpec, Recipe};
use zonetrack::building::{self, BuildingSpec};
use zonetrack::dataset::Normalization;
use zonetrack::eval::{self, SweepPoint, SweepResult};
use zonetrack::net::{self, ModelFile, NetConfig, NetParams};
use zonetrack::records::{self, Recording, StreamReader, TaggedFrame};
use zonetrack::tracker::{TagTrackers, TrackerConfig};
use zonetrack::{ConstraintParams, PropagationParams, SensorLayout, ZoneGraph, STEP_SECONDS};

use crate::files::{self, DataDir, Manifest, Provenance};
use crate::{
    AblateArgs, Axis, Cli, Command, EvaluateArgs, GenBuildingArgs, GenDataArgs, Preset, RecipeArgs, TrackArgs,
    TrainArgs,
};

pub fn run(cli: &Cli) -> Result<()> {
    let prov = Provenance::new(cli.seed, cli);
    match &cli.command {
        Command::GenBuilding(a) => gen_building(cli, a, &prov),
        Command::GenData(a) => gen_data(cli, a, &prov),
        Command::Train(a) => train(cli, a, &prov),
        Command::Track(a) => track(cli, a, &prov),
        Command::Evaluate(a) => evaluate(cli, a, &prov),
        Command::Ablate(a) => ablate(cli, a, &prov),
    }
}

fn gen_building(cli: &Cli, a: &GenBuildingArgs, prov: &Provenance) -> Result<()> {
    let preset = match a.preset {
        Preset::Desk => BuildingSpec::desk(),
        Preset::Paper => BuildingSpec::paper(),
    };
    let spec = BuildingSpec {
        zones: a.zones.unwrap_or(preset.zones),
        sensors: a.sensors.unwrap_or(preset.sensors),
        floors: a.floors.unwrap_or(preset.floors),
        edges: a.edges.or(if a.zones.is_none() { preset.edges } else { None }),
    };
    let (g, layout) = building::generate(&spec, cli.seed)?;
    files::write_json(&cli.building, &g.to_config(), prov)?;
    files::write_json(&cli.layout, &layout, prov)?;
    println!(
        "{} zones, {} adjacent pairs, {} sensors (density {:.3})",
        g.zone_count(),
        g.connected_pairs().len(),
        layout.sensor_count(),
        layout.density()
    );
    Ok(())
}

fn session_recording(sessions: &[zonetrack::signal_sim::ZoneSession]) -> Recording {
    let mut rec = Recording::default();
    for s in sessions {
        rec.frames.extend(s.frames.iter().cloned());
        rec.zones.extend(std::iter::repeat_n(s.zone, s.frames.len()));
    }
    rec
}

fn gen_data(cli: &Cli, a: &GenDataArgs, prov: &Provenance) -> Result<()> {
    let (g, layout) = files::load_building(&cli.building, &cli.layout)?;
    let propagation = match &a.propagation {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => PropagationParams::default(),
    };
    let spec =
        DataSpec { tags: a.tags, session_seconds: a.session_seconds, walks: a.walks, walk_seconds: a.walk_seconds, dwell_mean: a.dwell };
    let manifest = Manifest {
        tags: a.tags,
        walks: a.walks,
        session_seconds: a.session_seconds,
        walk_seconds: a.walk_seconds,
        dwell: a.dwell,
        sensors: layout.sensor_count(),
        zones: g.zone_count(),
        propagation,
    };
    let bench = Benchmark::simulate(g, layout, propagation, &spec, cli.seed)?;
    let dir = DataDir(a.out.clone());
    for (t, sessions) in bench.sessions.iter().enumerate() {
        files::write_recording(&dir.train_tag(t), prov, &session_recording(sessions))?;
    }
    files::write_recording(&dir.test_tag(), prov, &session_recording(&bench.test_sessions))?;
    let mut stream = Vec::new();
    for (w, walk) in bench.walks.iter().enumerate() {
        files::write_recording(&dir.walk(w), prov, &walk.recording())?;
        stream.extend(walk.frames.iter().map(|f| TaggedFrame { tag: format!("walk{w}"), frame: f.clone() }));
    }
    stream.sort_by(|x, y| x.frame.timestamp.total_cmp(&y.frame.timestamp));
    let mut out = files::create(&dir.stream())?;
    records::write_stream(&mut out, &prov.meta(), &stream)?;
    out.flush()?;
    files::write_json(&dir.manifest_path(), &manifest, prov)?;
    let crossings: Vec<_> = bench.walks.iter().map(|w| w.truth.crossings()).collect();
    println!(
        "{} training tags, 1 test tag, {} walks (zone crossings {:?}) in {}",
        a.tags,
        a.walks,
        crossings,
        a.out.display()
    );
    Ok(())
}

fn recipe(r: &RecipeArgs, lookback: usize, seed: u64) -> Recipe {
    Recipe {
        net: NetConfig {
            input_dim: 0,
            hidden_dim: r.hidden,
            class_dim: 0,
            dense_dim: r.dense,
            layers: r.layers,
            lookback,
            dropout_rate: r.dropout,
            learning_rate: r.learning_rate,
            epochs: r.epochs,
            seed,
        },
        half_len: r.half_len,
        per_pair: r.per_pair,
        norm: Normalization::default(),
        dt: STEP_SECONDS,
    }
}

/// Benchmark rebuilt from a data directory; walks are read separately.
fn load_bench(cli: &Cli, data: &Path, with_training: bool) -> Result<(Benchmark, Manifest)> {
    let (graph, layout) = files::load_building(&cli.building, &cli.layout)?;
    let dir = DataDir(data.to_path_buf());
    let m = dir.manifest_for(&graph, &layout)?;
    let sensors = layout.sensor_count();
    let sessions = if with_training {
        (0..m.tags).map(|t| files::read_sessions(&dir.train_tag(t), &graph, sensors)).collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let test_sessions = files::read_sessions(&dir.test_tag(), &graph, sensors)?;
    let bench =
        Benchmark { seed: cli.seed, graph, layout, propagation: m.propagation, sessions, test_sessions, walks: Vec::new() };
    Ok((bench, m))
}

fn load_walks(data: &Path, m: &Manifest) -> Result<Vec<Recording>> {
    let dir = DataDir(data.to_path_buf());
    (0..m.walks).map(|w| files::read_recording(&dir.walk(w))).collect()
}

fn load_model(path: &Path, g: &ZoneGraph, layout: &SensorLayout) -> Result<NetParams> {
    Ok(net::load_params_for(path, layout.sensor_count(), g.zone_count())?.params)
}

fn train(cli: &Cli, a: &TrainArgs, prov: &Provenance) -> Result<()> {
    if a.recipe.epochs == 0 {
        bail!("--epochs must be at least 1");
    }
    let (bench, _) = load_bench(cli, &a.data, true)?;
    let recipe = recipe(&a.recipe, a.lookback, cli.seed);
    let model = bench.train_with(&bench.all_sensors(), &recipe, |e| {
        println!("epoch {:>3}  train {:.5}  validation {:.5}", e.epoch, e.train_loss, e.validation_loss)
    })?;
    let file = ModelFile { params: model.params().clone(), seed: cli.seed, digest: prov.digest_bytes() };
    net::save_params(&file, &a.model).with_context(|| format!("writing {}", a.model.display()))?;

    let mut csv = prov.comment_lines();
    csv.push_str("epoch,train_loss,validation_loss,selected\n");
    for e in model.report.epochs() {
        let selected = u8::from(e.epoch == model.report.selected_epoch);
        csv.push_str(&format!("{},{},{},{selected}\n", e.epoch, e.train_loss, e.validation_loss));
    }
    let loss_path = a.loss_csv.clone().unwrap_or_else(|| a.model.with_extension("loss.csv"));
    files::write_text(&loss_path, &csv)?;

    let report = eval::zone_accuracy_report(model.params(), &model.test, &bench.graph, a.lookback, a.lookback - 1)?;
    println!("selected epoch {} of {}", model.report.selected_epoch, a.recipe.epochs);
    println!("test per-zone accuracy at lookback {}: {:.4}", a.lookback, report.accuracy);
    Ok(())
}

fn track(cli: &Cli, a: &TrackArgs, prov: &Provenance) -> Result<()> {
    let (g, layout) = files::load_building(&cli.building, &cli.layout)?;
    let params = load_model(&a.model, &g, &layout)?;
    let config = TrackerConfig {
        constraint: ConstraintParams::new(a.k, STEP_SECONDS)?,
        lookback: a.lookback,
        norm: Normalization::default(),
    };
    let mut trackers = TagTrackers::new(Arc::new(params), Arc::new(g), config)?;

    let input: Box<dyn io::Read> = match &a.input {
        Some(p) if p.as_os_str() != "-" => Box::new(files::open(p)?),
        _ => Box::new(io::stdin().lock()),
    };
    let reader = StreamReader::new(input)?;
    if reader.sensor_count() != layout.sensor_count() {
        bail!("stream has {} sensor columns, layout has {} sensors", reader.sensor_count(), layout.sensor_count());
    }
    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(files::create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    out.write_all(prov.comment_lines().as_bytes())?;
    writeln!(out, "timestamp,tag,zone,z1,p1,z2,p2,z3,p3")?;
    for frame in reader {
        let TaggedFrame { tag, frame } = frame?;
        for d in trackers.ingest(&tag, frame) {
            let mut line = format!("{},{tag},{}", d.timestamp, d.zone);
            let top = d.top(3);
            for i in 0..3 {
                match top.get(i) {
                    Some((z, p)) => line.push_str(&format!(",{z},{p:.6}")),
                    None => line.push_str(",,"),
                }
            }
            writeln!(out, "{line}")?;
        }
        out.flush()?;
    }
    if trackers.dropped() > 0 {
        eprintln!("dropped {} out-of-order frames", trackers.dropped());
    }
    Ok(())
}

fn write_csv(path: &Option<std::path::PathBuf>, prov: &Provenance, body: &str) -> Result<()> {
    if let Some(p) = path {
        files::write_text(p, &(prov.comment_lines() + body))?;
    }
    Ok(())
}

fn evaluate(cli: &Cli, a: &EvaluateArgs, prov: &Provenance) -> Result<()> {
    let (bench, m) = load_bench(cli, &a.data, false)?;
    let params = load_model(&a.model, &bench.graph, &bench.layout)?;
    let recipe = Recipe::desk(cli.seed);
    let test = bench.test_set(&bench.all_sensors(), &recipe)?;
    let zone = eval::zone_accuracy_report(&params, &test, &bench.graph, a.lookback, a.lookback.saturating_sub(1))?;
    let walks = load_walks(&a.data, &m)?;
    let base = TrackerConfig { lookback: a.lookback, ..TrackerConfig::default() };
    let sweep = eval::sweep_k(&Arc::new(params), &Arc::new(bench.graph), base, &walks, &a.k, &[a.lookback])?;

    println!("test tag, per-zone accuracy at lookback {}: {:.4}", a.lookback, zone.accuracy);
    println!("walks ({}):", walks.len());
    print!("{}", sweep.table());
    let zone_row = SweepPoint { value: a.lookback as f64, lookback: a.lookback, report: zone };
    let csv = sweep.to_csv() + &zone_row.csv_row("zone");
    write_csv(&a.out, prov, &csv)
}

fn ablate(cli: &Cli, a: &AblateArgs, prov: &Provenance) -> Result<()> {
    let sweep: SweepResult = match a.axis {
        Axis::Lookback => {
            let (bench, _) = load_bench(cli, &a.data, false)?;
            let params = load_model(&a.model, &bench.graph, &bench.layout)?;
            let lengths = if a.values.is_empty() {
                vec![1, 2, 5, 10, 20]
            } else {
                a.values.iter().map(|&v| as_count(v)).collect::<Result<_>>()?
            };
            let test = bench.test_set(&bench.all_sensors(), &Recipe::desk(cli.seed))?;
            eval::sweep_history_length(&params, &test, &bench.graph, &lengths)?
        }
        Axis::K => {
            let (bench, m) = load_bench(cli, &a.data, false)?;
            let params = load_model(&a.model, &bench.graph, &bench.layout)?;
            let ks = if a.values.is_empty() { vec![1.0, 5.0, 10.0, 40.0] } else { a.values.clone() };
            let walks = load_walks(&a.data, &m)?;
            let g = Arc::new(bench.graph);
            eval::sweep_k(&Arc::new(params), &g, TrackerConfig::default(), &walks, &ks, &a.lookbacks)?
        }
        Axis::Density => {
            let (bench, _) = load_bench(cli, &a.data, true)?;
            let full = bench.layout.density();
            let densities = if a.values.is_empty() {
                let mut d: Vec<f64> = [0.25, 0.5, 0.75, 1.0].into_iter().filter(|&d| d < full).collect();
                d.push(full);
                d
            } else {
                a.values.clone()
            };
            let lookback = *a.lookbacks.first().context("--lookbacks is empty")?;
            eval::sweep_sensor_density(&bench, &recipe(&a.recipe, lookback, cli.seed), &densities, cli.seed)?
        }
    };
    print!("{}", sweep.table());
    write_csv(&a.out, prov, &sweep.to_csv())
}

fn as_count(v: f64) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        bail!("lookback {v} is not a positive integer")
    }
}
