//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so the lines come out in order. Exits nonzero if
//! any criterion fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use zonetrack::benchmark::{Benchmark, Recipe, TrainedModel};
use zonetrack::building::{self, BuildingSpec};
use zonetrack::dataset::{self, Normalization};
use zonetrack::eval::{self, SweepResult};
use zonetrack::net::{self, CellState, ModelFile, NetParams, Shape};
use zonetrack::posterior::{apply_constraint, ConstraintParams};
use zonetrack::records::TaggedFrame;
use zonetrack::rng::{self, Stream};
use zonetrack::signal_sim::{self, PropagationParams};
use zonetrack::tracker::{TagTrackers, TrackerConfig};
use zonetrack::zone_graph::ZoneDef;
use zonetrack::{RecurrentState, ZoneGraph, ZoneId};

/// Seed of the end-to-end benchmark.
const SEED: u64 = 1;
const WINDOW: f64 = eval::DEFAULT_WINDOW_S;

type Check = Result<String, String>;

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, r: Check, took: Duration| {
        let (tag, detail) = match r {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {n} {name}: {detail} [{:.1}s]", took.as_secs_f64());
    };

    let quick: [(&str, fn() -> Check); 5] = [
        ("gradient oracle", gradient_oracle),
        ("posterior oracle", posterior_oracle),
        ("lstm scalar oracle", lstm_scalar_oracle),
        ("metric oracle", metric_oracle),
        ("augmentation count", augmentation_count),
    ];
    for (i, (name, check)) in quick.into_iter().enumerate() {
        let t = Instant::now();
        let r = check();
        report(i + 1, name, r, t.elapsed());
    }

    let t = Instant::now();
    let first = run_pipeline(SEED);
    let took = t.elapsed();
    match &first {
        Ok(run) => {
            report(6, "end-to-end benchmark", end_to_end(run, took), took);
            report(7, "trend reproduction", trends(run), Duration::ZERO);
            let t = Instant::now();
            let r = determinism(run);
            report(8, "determinism", r, t.elapsed());
        }
        Err(e) => {
            for (n, name) in [(6, "end-to-end benchmark"), (7, "trend reproduction"), (8, "determinism")] {
                report(n, name, Err(format!("pipeline failed: {e}")), took);
            }
        }
    }

    println!("{} of 8 criteria passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 1

fn gradient_oracle() -> Check {
    let t = Instant::now();
    let shape = Shape { input_dim: 5, hidden_dim: 4, class_dim: 3, dense_dim: 4, layers: 1 };
    let steps = 3;
    let step = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let p = NetParams::init(shape, &mut rng);
    let inputs: Vec<Vec<f64>> = (0..steps).map(|_| (0..5).map(|_| rng.random::<f64>()).collect()).collect();
    let labels: Vec<ZoneId> = (0..steps).map(|_| ZoneId(rng.random_range(0..3))).collect();

    let g = net::backward(&p, &inputs, &labels, 0.0, &mut rng);
    let analytic: Vec<f64> = g.grad.blocks().into_iter().flat_map(|(_, b)| b.to_vec()).collect();

    let mut q = p.clone();
    let sizes: Vec<usize> = p.blocks().iter().map(|(_, b)| b.len()).collect();
    let mut numeric = Vec::with_capacity(analytic.len());
    for (b, &n) in sizes.iter().enumerate() {
        for i in 0..n {
            let orig = q.blocks_mut()[b][i];
            q.blocks_mut()[b][i] = orig + step;
            let up = net::sequence_loss(&q, &inputs, &labels);
            q.blocks_mut()[b][i] = orig - step;
            let down = net::sequence_loss(&q, &inputs, &labels);
            q.blocks_mut()[b][i] = orig;
            numeric.push((up - down) / (2.0 * step));
        }
    }

    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for (k, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
        let err = if a.abs() < 1e-8 { (a - n).abs() } else { (a - n).abs() / a.abs() };
        worst = worst.max(err);
        if err >= 1e-4 {
            bad.push(format!("entry {k}: {a:e} vs {n:e}"));
        }
    }
    let elapsed = t.elapsed();
    let detail = format!("{} entries, worst error {worst:.2e}, {elapsed:.2?}", analytic.len());
    ensure(bad.is_empty() && elapsed < Duration::from_secs(10), format!("{detail} {}", bad.join("; ")))
}

// 2

fn graph(n: usize, edges: &[(usize, usize)]) -> ZoneGraph {
    let defs: Vec<_> = (0..n).map(|i| ZoneDef { name: format!("z{i}"), floor: 0 }).collect();
    ZoneGraph::build(&defs, edges).unwrap()
}

fn posterior_oracle() -> Check {
    let g2 = graph(2, &[(0, 1)]);
    let d = apply_constraint(&[0.6, 0.4], ZoneId(0), &g2, &ConstraintParams::new(2.0, 1.0).unwrap());
    let hand = (d.constrained[0] - 0.75).abs().max((d.constrained[1] - 0.25).abs());
    if hand >= 1e-12 {
        return Err(format!("hand example gives {:?}", d.constrained));
    }

    let g = graph(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (1, 5)]);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_sum = 0.0f64;
    for i in 0..1000 {
        let raw: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let prev = ZoneId(rng.random_range(0..6));
        let d = apply_constraint(&probs, prev, &g, &ConstraintParams::disabled());
        if d.chosen.0 != net::argmax(&probs) {
            return Err(format!("k = 1 moved the argmax on vector {i}"));
        }
        for k in [1.0, 2.0, 40.0, 1e6] {
            let c = apply_constraint(&probs, prev, &g, &ConstraintParams::new(k, 1.0).unwrap());
            worst_sum = worst_sum.max((c.constrained.iter().sum::<f64>() - 1.0).abs());
        }
    }
    ensure(
        worst_sum <= 1e-12,
        format!("hand example off by {hand:.1e}, argmax kept on 1000 vectors, worst sum error {worst_sum:.1e}"),
    )
}

// 3

fn lstm_scalar_oracle() -> Check {
    let shape = Shape { input_dim: 1, hidden_dim: 1, class_dim: 1, dense_dim: 1, layers: 1 };
    let mut p = NetParams::zeros(shape);
    let l = &mut p.lstm[0];
    for (m, v) in [
        (&mut l.w_xi, 0.5),
        (&mut l.w_hi, -0.3),
        (&mut l.w_ci, 0.2),
        (&mut l.w_xf, -0.4),
        (&mut l.w_hf, 0.6),
        (&mut l.w_cf, 0.3),
        (&mut l.w_xc, 0.7),
        (&mut l.w_hc, -0.5),
        (&mut l.w_xo, 0.3),
        (&mut l.w_ho, 0.8),
        (&mut l.w_co, -0.6),
    ] {
        m.data[0] = v;
    }
    l.b_i[0] = 0.1;
    l.b_f[0] = 0.2;
    l.b_c[0] = -0.1;
    l.b_o[0] = 0.05;

    let (x, h0, c0) = (0.9, 0.4, -0.7);
    let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
    let i = sig(0.5 * x - 0.3 * h0 + 0.2 * c0 + 0.1);
    let f = sig(-0.4 * x + 0.6 * h0 + 0.3 * c0 + 0.2);
    let c = f * c0 + i * (0.7 * x - 0.5 * h0 - 0.1).tanh();
    let o = sig(0.3 * x + 0.8 * h0 - 0.6 * c + 0.05);
    let h = o * c.tanh();

    let prev = RecurrentState { layers: vec![CellState { h: vec![h0], c: vec![c0] }] };
    let s = net::lstm_step(&p, &[x], &prev);
    let err = (s.c()[0] - c).abs().max((s.h()[0] - h).abs());
    let fixed = (c - -0.14508933288214895).abs().max((h - -0.09713256669280924).abs());
    ensure(err < 1e-12 && fixed < 1e-12, format!("C = {}, h = {}, error {err:.1e}", s.c()[0], s.h()[0]))
}

// 4

type Labeled = (f64, ZoneId);

fn seq(zones: &[usize]) -> Vec<Labeled> {
    zones.iter().enumerate().map(|(i, &q)| ((i + 1) as f64, ZoneId(q))).collect()
}

fn brute_accuracy(pred: &[Labeled], truth: &[Labeled], w: f64) -> f64 {
    let hits = pred.iter().filter(|p| truth.iter().any(|t| (t.0 - p.0).abs() <= w + 1e-9 && t.1 == p.1)).count();
    hits as f64 / pred.len() as f64
}

fn brute_incorrect(pred: &[Labeled], truth: &[Labeled], w: f64) -> (usize, usize) {
    let mut claimed = vec![false; truth.len()];
    let (mut incorrect, mut total) = (0, 0);
    for i in 1..pred.len() {
        if pred[i].1 == pred[i - 1].1 {
            continue;
        }
        total += 1;
        let hit = (1..truth.len()).find(|&j| {
            !claimed[j]
                && truth[j - 1].1 == pred[i - 1].1
                && truth[j].1 == pred[i].1
                && (truth[j].0 - pred[i].0).abs() <= w + 1e-9
        });
        match hit {
            Some(j) => claimed[j] = true,
            None => incorrect += 1,
        }
    }
    (incorrect, total)
}

fn random_run<R: Rng>(rng: &mut R, len: usize, zones: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(len);
    let mut z = rng.random_range(0..zones);
    while out.len() < len {
        let run = rng.random_range(1..=15);
        out.extend(std::iter::repeat_n(z, run.min(len - out.len())));
        z = rng.random_range(0..zones);
    }
    out
}

fn metric_oracle() -> Check {
    let flip = |truth: &[usize], pred: &[usize]| -> Result<(f64, (usize, usize)), String> {
        let (p, t) = (seq(pred), seq(truth));
        let a = eval::accuracy_star(&p, &t, WINDOW).map_err(|e| e.to_string())?;
        let c = eval::incorrect_zone_changes(&p, &t, WINDOW).map_err(|e| e.to_string())?;
        Ok((a, c))
    };
    let path: Vec<usize> = (0..40).map(|i| usize::from(i >= 20)).collect();
    let delayed: Vec<usize> = (0..40).map(|i| usize::from(i >= 25)).collect();
    let mut flicker = vec![0; 10];
    flicker[3] = 1;
    let hand = [
        ("exact", flip(&path, &path)?, (1.0, (0, 1))),
        ("5 s delay", flip(&path, &delayed)?, (1.0, (0, 1))),
        ("flicker", flip(&[0; 10], &flicker)?, (0.9, (2, 2))),
    ];
    for (name, got, want) in hand {
        if got != want {
            return Err(format!("{name}: got {got:?}, want {want:?}"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in 0..200 {
        let len = rng.random_range(1..=100);
        let zones = rng.random_range(1..=6);
        let truth = seq(&random_run(&mut rng, len, zones));
        let pred = seq(&random_run(&mut rng, len, zones));
        let w = [0.0, 1.0, 5.0, 10.0][n % 4];
        let a = eval::accuracy_star(&pred, &truth, w).map_err(|e| e.to_string())?;
        let c = eval::incorrect_zone_changes(&pred, &truth, w).map_err(|e| e.to_string())?;
        if a != brute_accuracy(&pred, &truth, w) || c != brute_incorrect(&pred, &truth, w) {
            return Err(format!("trajectory {n} (len {len}, {zones} zones, window {w}) disagrees"));
        }
    }
    Ok("3 hand cases and 200 random trajectories agree exactly".into())
}

// 5

fn augmentation_count() -> Check {
    let seed = 3;
    let (g, layout) = building::generate(&BuildingSpec::paper(), seed).map_err(|e| e.to_string())?;
    let prop = PropagationParams::default();
    let norm = Normalization::default();
    let sensors = layout.sensor_count();
    let mut recordings = Vec::new();
    for tag in 0..6 {
        let mut rng = rng::substream(seed, Stream::Data, tag);
        let mut per_zone = Vec::new();
        for z in g.zones() {
            let s = signal_sim::record_zone_session(&g, &layout, &prop, z, 30.0, z.0 as f64 * 30.0, &mut rng)
                .map_err(|e| e.to_string())?;
            per_zone.push(dataset::steps_from_frames(&s.frames, sensors, 1.0, &norm, Some(z)));
        }
        recordings.push(per_zone);
    }
    let mut rng = rng::stream(seed, Stream::Augment);
    let trajs = dataset::augment_cross_zone(&recordings, &g, 25, 3, 1.0, &mut rng).map_err(|e| e.to_string())?;
    let pairs = g.connected_pairs().len();
    for (i, t) in trajs.iter().enumerate() {
        let labels = t.labels();
        let changes: Vec<_> = labels.windows(2).filter(|w| w[0] != w[1]).collect();
        if t.len() != 50 || changes.len() != 1 || !g.is_adjacent(changes[0][0], changes[0][1]) {
            return Err(format!("trajectory {i}: {} steps, {} label changes", t.len(), changes.len()));
        }
    }
    ensure(
        trajs.len() == 3870 && pairs == 215,
        format!("{} zones, {pairs} pairs, {} trajectories of 50 steps, one adjacent change each", g.zone_count(), trajs.len()),
    )
}

// 6 to 8

struct Run {
    bench: Benchmark,
    model: TrainedModel,
    model_bytes: Vec<u8>,
    history: SweepResult,
    ks: SweepResult,
    density: SweepResult,
    zone_accuracy: f64,
}

fn run_pipeline(seed: u64) -> Result<Run, String> {
    let bench = Benchmark::desk(seed).map_err(|e| e.to_string())?;
    let recipe = Recipe::desk(seed);
    let model = bench.train(&bench.all_sensors(), &recipe).map_err(|e| e.to_string())?;
    let file = ModelFile { params: model.params().clone(), seed, digest: [0; 32] };
    let lookback = recipe.net.lookback;
    let g = &bench.graph;
    let zone = eval::zone_accuracy_report(model.params(), &model.test, g, lookback, lookback - 1).map_err(|e| e.to_string())?;
    let history = eval::sweep_history_length(model.params(), &model.test, g, &[1, 2, 5, 10]).map_err(|e| e.to_string())?;
    let walks: Vec<_> = bench.walks.iter().map(|w| w.recording()).collect();
    let params = Arc::new(model.params().clone());
    let graph = Arc::new(g.clone());
    let ks = eval::sweep_k(&params, &graph, TrackerConfig::default(), &walks, &[1.0, 10.0, 40.0], &[lookback])
        .map_err(|e| e.to_string())?;
    let density = eval::sweep_sensor_density(&bench, &recipe, &[0.5, bench.layout.density()], seed).map_err(|e| e.to_string())?;
    Ok(Run { model_bytes: file.to_bytes(), zone_accuracy: zone.accuracy, bench, model, history, ks, density })
}

fn end_to_end(run: &Run, took: Duration) -> Check {
    let r = &run.model.report;
    let v = &r.validation_loss;
    let argmin = (0..v.len()).fold(0, |best, i| if v[i] < v[best] { i } else { best }) + 1;
    let converged = r.selected_epoch == argmin && v[argmin - 1] < v[0];

    let at = |k: f64| run.ks.point(k, 10).map(|p| &p.report);
    let base = at(1.0).ok_or("no k = 1 point")?;
    let mut best = None;
    for k in [10.0, 40.0] {
        let rep = at(k).ok_or("missing k point")?;
        let ok = 2 * rep.incorrect_zone_changes <= base.incorrect_zone_changes && rep.accuracy_star >= base.accuracy_star;
        if ok && best.is_none() {
            best = Some((k, rep));
        }
    }
    let ks: Vec<String> = [1.0, 10.0, 40.0]
        .iter()
        .filter_map(|&k| at(k).map(|p| format!("k={k}: {} incorrect, accuracy* {:.4}", p.incorrect_zone_changes, p.accuracy_star)))
        .collect();
    let detail = format!(
        "selected epoch {} of {} (validation {:.4} -> {:.4}); single-zone accuracy {:.4}; {}; {:.0}s",
        r.selected_epoch,
        v.len(),
        v[0],
        v[r.selected_epoch - 1],
        run.zone_accuracy,
        ks.join(", "),
        took.as_secs_f64()
    );
    ensure(converged && run.zone_accuracy >= 0.9 && best.is_some() && took <= Duration::from_secs(900), detail)
}

fn trends(run: &Run) -> Check {
    let acc: Vec<f64> = run.history.points.iter().map(|p| p.report.accuracy).collect();
    let monotone = acc.windows(2).all(|w| w[1] >= w[0] - 0.02);
    let peak = acc.iter().cloned().fold(f64::MIN, f64::max);
    let saturated = acc[acc.len() - 1] >= peak - 0.02;
    let half = run.density.points[0].report.accuracy;
    let full = run.density.points[1].report.accuracy;
    let detail = format!(
        "lookback 1/2/5/10 accuracy {}; density 0.5 {half:.4} vs {} {full:.4}",
        acc.iter().map(|a| format!("{a:.4}")).collect::<Vec<_>>().join("/"),
        run.density.points[1].value
    );
    ensure(monotone && saturated && half < full, detail)
}

fn determinism(run: &Run) -> Check {
    let again = run_pipeline(SEED)?;
    let same_model = again.model_bytes == run.model_bytes;
    let csvs = |r: &Run| [r.history.to_csv(), r.ks.to_csv(), r.density.to_csv()];
    let same_csv = csvs(&again) == csvs(run);

    // Online: every walk interleaved into one multi-tag stream, one frame at a time.
    let bench = &run.bench;
    let params = Arc::new(run.model.params().clone());
    let graph = Arc::new(bench.graph.clone());
    let config = TrackerConfig::default();
    let mut stream: Vec<TaggedFrame> = Vec::new();
    for (w, walk) in bench.walks.iter().enumerate() {
        stream.extend(walk.frames.iter().map(|f| TaggedFrame { tag: format!("walk{w}"), frame: f.clone() }));
    }
    stream.sort_by(|a, b| a.frame.timestamp.total_cmp(&b.frame.timestamp));
    let mut trackers = TagTrackers::new(params.clone(), graph.clone(), config).map_err(|e| e.to_string())?;
    let mut online = vec![Vec::new(); bench.walks.len()];
    for f in stream {
        let w: usize = f.tag[4..].parse().unwrap();
        online[w].extend(trackers.ingest(&f.tag, f.frame));
    }

    // Offline: the whole recording averaged first, then each decision from its lookback slice.
    let mut mismatches = 0;
    let mut decisions = 0;
    for (w, walk) in bench.walks.iter().enumerate() {
        let steps = dataset::steps_from_frames(&walk.frames, bench.sensor_count(), 1.0, &config.norm, None);
        let mut prev: Option<ZoneId> = None;
        if steps.len() != online[w].len() {
            return Err(format!("walk {w}: {} offline steps, {} online decisions", steps.len(), online[w].len()));
        }
        for (t, d) in online[w].iter().enumerate() {
            let start = (t + 1).saturating_sub(config.lookback);
            let xs: Vec<&[f64]> = steps[start..=t].iter().map(|s| s.x.as_slice()).collect();
            let raw = net::predict_last(&params, &xs);
            let (constrained, zone) = match prev {
                None => (raw.clone(), ZoneId(net::argmax(&raw))),
                Some(p) => {
                    let c = apply_constraint(&raw, p, &graph, &config.constraint);
                    (c.constrained, c.chosen)
                }
            };
            prev = Some(zone);
            decisions += 1;
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            if d.timestamp.to_bits() != steps[t].timestamp.to_bits()
                || d.zone != zone
                || bits(&d.raw_probs) != bits(&raw)
                || bits(&d.constrained_probs) != bits(&constrained)
            {
                mismatches += 1;
            }
        }
    }
    let detail = format!(
        "second run: model {}, metric CSVs {}; online vs offline: {mismatches} of {decisions} decisions differ",
        if same_model { "identical" } else { "differs" },
        if same_csv { "identical" } else { "differ" },
    );
    ensure(same_model && same_csv && mismatches == 0, detail)
}
