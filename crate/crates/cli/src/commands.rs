use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use vehreid_core::arch::{build, ArchSpec, Head, InceptionVariant, COLOR_CLASSES};
use vehreid_core::dataset::{
    degrade, load_labeled, record_id, split, synth_generate, BBox, DegradeConfig, Image,
    LabelSpace, Manifest, Quality, SynthSpec, Task, View,
};
use vehreid_core::eval::{
    compute_centroids, evaluate, evaluate_scores, fuse_tensors, plot_sphere, predict, FusionConfig, FusionReport,
};
use vehreid_core::hash::hex64;
use vehreid_core::reid::{
    index_build, query, rerank_by_descriptor, BestShotRecord, Classifier, Index, IndexInput, QuerySpec,
    COMBINED_SCORE,
};
use vehreid_core::train::{fit, write_atomic, Checkpoint, TrainConfig};
use vehreid_core::Error;

use crate::output::Table;
use crate::*;

type Result<T> = std::result::Result<T, CliError>;

pub fn dispatch(cli: &Cli) -> Result<Table> {
    let seed = cli.seed;
    match &cli.command {
        Command::Synth(a) => synth(a, seed),
        Command::Degrade(a) => degrade_cmd(a),
        Command::Split(a) => split_cmd(a, seed),
        Command::Train(a) => train(a, seed),
        Command::Eval(a) => eval(a),
        Command::FuseEval(a) => fuse_eval(a),
        Command::Classify(a) => classify(a),
        Command::Index(a) => index(a),
        Command::Query(a) => query_cmd(a),
        Command::PlotCentroids(a) => plot(a),
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn synth(a: &SynthArgs, seed: u64) -> Result<Table> {
    let mut spec = SynthSpec::new(a.classes, seed);
    spec.per_combination = a.per;
    spec.image_size = a.size;
    if !a.colors.is_empty() {
        spec.colors = a.colors.clone();
    }
    spec.views = a.views.iter().map(|v| v.parse::<View>()).collect::<vehreid_core::Result<_>>()?;
    let manifest = synth_generate(&spec, &a.out)?;
    let mut t = Table::new(&["manifest", "records", "classes", "colors", "views"]);
    t.push(vec![
        json!(a.out.join("manifest.jsonl").display().to_string()),
        json!(manifest.records.len()),
        json!(spec.classes),
        json!(spec.colors.len()),
        json!(spec.views.len()),
    ]);
    Ok(t)
}

fn degrade_cmd(a: &DegradeArgs) -> Result<Table> {
    let cfg = DegradeConfig {
        sigma: a.settings.sigma,
        factor: a.settings.factor,
    };
    cfg.validate()?;
    let mut t = Table::new(&["input", "output", "records"]);
    if let (Some(image), Some(output)) = (&a.image, &a.output) {
        degrade(&Image::load(image)?, &cfg)?.save_png(output)?;
        t.push(vec![json!(image.display().to_string()), json!(output.display().to_string()), json!(1)]);
        return Ok(t);
    }
    let (Some(path), Some(out)) = (&a.manifest, &a.out) else {
        return Err(usage("degrade needs --manifest with --out, or --image with --output"));
    };
    let manifest = Manifest::load(path)?;
    let images = out.join("images");
    std::fs::create_dir_all(&images).map_err(|e| io_error(&images, e))?;
    let mut records = Vec::new();
    let mut written = std::collections::BTreeMap::new();
    for r in &manifest.records {
        let stem = Path::new(&r.image).file_stem().and_then(|s| s.to_str()).unwrap_or("image").to_string();
        let src = manifest.image_path(r);
        // Records sharing one image file (several regions) share its outputs.
        let (orig, bad) = match written.get(&src) {
            Some(names) => Clone::clone(names),
            None => {
                let n = written.len();
                let orig = format!("images/{n:05}_{stem}.png");
                let bad = format!("images/{n:05}_{stem}_bad.png");
                let img = Image::load(&src)?;
                degrade(&img, &cfg)?.save_png(&out.join(&bad))?;
                if a.keep_originals {
                    std::fs::copy(&src, out.join(&orig)).map_err(|e| io_error(&src, e))?;
                }
                written.insert(src.clone(), (orig.clone(), bad.clone()));
                (orig, bad)
            }
        };
        if a.keep_originals {
            let mut keep = r.clone();
            keep.image = orig;
            records.push(keep);
        }
        let mut d = r.clone();
        d.image = bad;
        d.quality = Quality::Bad;
        records.push(d);
    }
    let result = Manifest::new(manifest.header.clone(), records);
    let target = out.join("manifest.jsonl");
    result.save(&target)?;
    t.push(vec![
        json!(path.display().to_string()),
        json!(target.display().to_string()),
        json!(result.records.len()),
    ]);
    Ok(t)
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Domain(Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn relocate(m: &Manifest, target: &Path) -> Result<Manifest> {
    let dir = target.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let same = match (&m.base_dir, dir.canonicalize()) {
        (Some(b), Ok(d)) => b.canonicalize().ok().as_deref() == Some(d.as_path()),
        _ => false,
    };
    if same {
        return Ok(m.clone());
    }
    // Images stay where they are; paths are rewritten to absolute ones.
    let mut out = m.clone();
    for r in &mut out.records {
        let p = m.image_path(r);
        let abs = p.canonicalize().map_err(|e| io_error(&p, e))?;
        r.image = abs.display().to_string();
    }
    Ok(out)
}

fn split_cmd(a: &SplitArgs, seed: u64) -> Result<Table> {
    let manifest = Manifest::load(&a.manifest)?;
    let s = split(&manifest, a.test_fraction, seed)?;
    relocate(&s.train, &a.train_out)?.save(&a.train_out)?;
    relocate(&s.test, &a.test_out)?.save(&a.test_out)?;
    let mut t = Table::new(&["part", "manifest", "records"]);
    t.push(vec![json!("train"), json!(a.train_out.display().to_string()), json!(s.train.records.len())]);
    t.push(vec![json!("test"), json!(a.test_out.display().to_string()), json!(s.test.records.len())]);
    for w in s.warnings {
        t.note(w);
    }
    Ok(t)
}

fn train(a: &TrainArgs, seed: u64) -> Result<Table> {
    let manifest = Manifest::load(&a.manifest)?;
    let (task, head) = match a.task {
        TaskArg::MakeModel => (
            Task::MakeModel,
            Head::MakeModel {
                classes: manifest.header.classes.len(),
            },
        ),
        TaskArg::Color => {
            if manifest.header.palette.len() != COLOR_CLASSES {
                return Err(Error::Data(format!(
                    "the color head has {COLOR_CLASSES} classes, the manifest palette {}",
                    manifest.header.palette.len()
                ))
                .into());
            }
            (Task::Color, Head::Color)
        }
    };
    let arch = match &a.arch_file {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_error(p, e))?;
            let arch = ArchSpec::from_text(&text)?;
            if arch.head != head {
                return Err(Error::Incompatible {
                    expected: format!("{head:?} head for this manifest"),
                    found: format!("{:?} in {}", arch.head, p.display()),
                }
                .into());
            }
            arch
        }
        None => match a.arch {
            ArchArg::Residual => ArchSpec::residual_default(head),
            ArchArg::Inception => ArchSpec::inception_default(head, InceptionVariant::Modified),
            ArchArg::InceptionOriginal => ArchSpec::inception_default(head, InceptionVariant::Original),
        },
    };
    arch.validate()?;
    let data = load_labeled(&manifest, task, arch.input.width, arch.input.height)?;
    let mut config = TrainConfig {
        batch_size: a.batch_size,
        epochs: a.epochs,
        seed,
        ..TrainConfig::default()
    };
    config.adam.lr = a.lr;
    let mut params = build(&arch, seed)?;
    let report = fit(&arch, &mut params, &data, &config)?;
    let ck = Checkpoint {
        arch,
        params,
        labels: task.label_space(&manifest.header),
        seed,
        step: report.steps as u64,
        config_hash: config.hash(),
    };
    ck.save(&a.out)?;
    if let Some(trace) = &a.trace {
        write_atomic(trace, report.trace_csv().as_bytes())?;
    }
    let mut t = Table::new(&["checkpoint", "samples", "epochs", "steps", "final_epoch_loss"]);
    t.push(vec![
        json!(a.out.display().to_string()),
        json!(data.len()),
        json!(a.epochs),
        json!(report.steps),
        report.final_epoch_loss().map_or(Value::Null, |l| json!(l)),
    ]);
    Ok(t)
}

fn task_of(ck: &Checkpoint) -> Result<Task> {
    match ck.labels {
        LabelSpace::MakeModel { .. } => Ok(Task::MakeModel),
        LabelSpace::Color { .. } => Ok(Task::Color),
        LabelSpace::Unnamed { .. } => Err(Error::InvalidArgument("checkpoint has no named label space".into()).into()),
    }
}

/// Loads the manifest for a checkpoint, requiring the same label space.
fn load_for(ck: &Checkpoint, path: &Path) -> Result<(Task, vehreid_core::dataset::LabeledImages)> {
    let manifest = Manifest::load(path)?;
    let task = task_of(ck)?;
    let expected = task.label_space(&manifest.header);
    if expected != ck.labels {
        return Err(Error::Incompatible {
            expected: format!("label space {} of {}", hex64(hash_labels(&expected)), path.display()),
            found: format!("{} in the checkpoint", hex64(ck.label_hash())),
        }
        .into());
    }
    let data = load_labeled(&manifest, task, ck.arch.input.width, ck.arch.input.height)?;
    Ok((task, data))
}

fn hash_labels(l: &LabelSpace) -> u64 {
    vehreid_core::hash::hash64(l.to_json().as_bytes())
}

fn accuracy_table(report: &vehreid_core::eval::AccuracyReport) -> Table {
    let mut t = Table::new(&["subset", "samples", "correct", "top1", "top5"]);
    t.push(vec![
        json!("all"),
        json!(report.samples),
        json!(report.correct),
        json!(report.top1),
        report.top5.map_or(Value::Null, |v| json!(v)),
    ]);
    for (q, s) in &report.per_quality {
        t.push(vec![json!(q), json!(s.samples), json!(s.correct), json!(s.top1), Value::Null]);
    }
    t
}

fn eval(a: &EvalArgs) -> Result<Table> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let (_, data) = load_for(&ck, &a.manifest)?;
    let (report, cm, _) = evaluate(&ck.params, &ck.arch, &data, &ck.labels.names())?;
    if let Some(p) = &a.confusion {
        write_atomic(p, cm.to_csv().as_bytes())?;
    }
    Ok(accuracy_table(&report))
}

fn fuse_eval(a: &FuseEvalArgs) -> Result<Table> {
    let c1 = Checkpoint::load(&a.net1)?;
    let c2 = Checkpoint::load(&a.net2)?;
    if c1.label_hash() != c2.label_hash() || c1.arch.input != c2.arch.input {
        return Err(Error::Incompatible {
            expected: format!("{} (net1)", hex64(c1.label_hash())),
            found: format!("{} (net2)", hex64(c2.label_hash())),
        }
        .into());
    }
    let cfg = FusionConfig::new(a.weights.w1, a.weights.w2)?;
    let (_, data) = load_for(&c1, &a.manifest)?;
    let names = c1.labels.names();
    let p1 = predict(&c1.params, &c1.arch, &data, 64, 1)?;
    let p2 = predict(&c2.params, &c2.arch, &data, 64, 1)?;
    let fused = fuse_tensors(&p1.probs, &p2.probs, &cfg)?;
    let (r1, _) = evaluate_scores(&p1.probs, &data.labels, &data.qualities, &names)?;
    let (r2, _) = evaluate_scores(&p2.probs, &data.labels, &data.qualities, &names)?;
    let (rf, _) = evaluate_scores(&fused, &data.labels, &data.qualities, &names)?;
    let report = FusionReport::new(&cfg, r1, r2, rf);
    if let Some(p) = &a.report {
        write_atomic(p, report.to_json().as_bytes())?;
    }
    let mut t = Table::new(&[
        "subset",
        "net1",
        "net2",
        "fused",
        "absolute_improvement",
        "residual_error_reduction",
    ]);
    let subset_acc = |r: &vehreid_core::eval::AccuracyReport, s: &str| {
        if s == "all" {
            r.top1
        } else {
            r.per_quality.get(s).map_or(0.0, |q| q.top1)
        }
    };
    for g in &report.gains {
        t.push(vec![
            json!(g.subset),
            json!(subset_acc(&report.net1, &g.subset)),
            json!(subset_acc(&report.net2, &g.subset)),
            json!(g.fused),
            json!(g.absolute_improvement),
            g.residual_error_reduction.map_or(Value::Null, |v| json!(v)),
        ]);
    }
    t.note(format!("fusion: {} with weights {:?}", report.method, report.weights));
    Ok(t)
}

fn classifier(m: &Models) -> Result<Classifier> {
    if m.makemodel.len() > 2 {
        return Err(usage("at most two --makemodel checkpoints"));
    }
    let nets = m.makemodel.iter().map(|p| Checkpoint::load(p)).collect::<vehreid_core::Result<Vec<_>>>()?;
    let color = Checkpoint::load(&m.color)?;
    let fusion = FusionConfig::new(m.weights.w1, m.weights.w2)?;
    Ok(Classifier::new(nets, color, fusion, m.top_k)?)
}

fn parse_bbox(s: &str) -> Result<BBox> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| usage(format!("--bbox expects x,y,width,height, got {s:?}")))?;
    let [x, y, width, height] = parts[..] else {
        return Err(usage(format!("--bbox expects four values, got {s:?}")));
    };
    Ok(BBox { x, y, width, height })
}

fn classify(a: &ClassifyArgs) -> Result<Table> {
    let bbox = a.bbox.as_deref().map(parse_bbox).transpose()?;
    let c = classifier(&a.models)?;
    let img = Image::load(&a.image)?;
    let id = a.image.display().to_string();
    let rec = c.classify_image(&img, bbox, &id, &id)?;
    let mut t = Table::new(&["id", "rank", "classid", "make", "model", "score", "color", "color_score"]);
    for (rank, m) in rec.makemodel.iter().enumerate() {
        t.push(vec![
            json!(rec.id),
            json!(rank + 1),
            json!(m.classid),
            json!(m.make),
            json!(m.model),
            json!(m.score),
            json!(rec.color.color),
            json!(rec.color.score),
        ]);
    }
    Ok(t)
}

fn png_inputs(dir: &Path) -> Result<Vec<IndexInput>> {
    let entries = std::fs::read_dir(dir).map_err(|e| io_error(dir, e))?;
    let mut paths: Vec<PathBuf> = Vec::new();
    for e in entries {
        let p = e.map_err(|e| io_error(dir, e))?.path();
        if p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")) {
            paths.push(p);
        }
    }
    paths.sort();
    Ok(paths
        .into_iter()
        .map(|path| IndexInput {
            id: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
            path,
            bbox: None,
        })
        .collect())
}

fn index(a: &IndexArgs) -> Result<Table> {
    let c = classifier(&a.models)?;
    let inputs = match (&a.manifest, &a.images) {
        (Some(m), _) => {
            let manifest = Manifest::load(m)?;
            manifest
                .records
                .iter()
                .map(|r| IndexInput {
                    id: record_id(r),
                    path: manifest.image_path(r),
                    bbox: r.bbox,
                })
                .collect()
        }
        (None, Some(dir)) => png_inputs(dir)?,
        (None, None) => return Err(usage("index needs --manifest or --images")),
    };
    let idx = index_build(&c, &inputs)?;
    idx.save(&a.out)?;
    let mut t = Table::new(&["index", "records", "label_hash"]);
    t.push(vec![json!(a.out.display().to_string()), json!(idx.len()), json!(hex64(idx.label_hash()))]);
    Ok(t)
}

fn query_cmd(a: &QueryArgs) -> Result<Table> {
    if a.classids.is_empty() && a.make.is_none() && a.model.is_none() && a.colors.is_empty() {
        return Err(usage("query needs at least one of --classid, --make, --model, --color"));
    }
    let probe_net = a.makemodel.as_deref().map(Checkpoint::load).transpose()?;
    let idx = Index::load(&a.index, probe_net.as_ref().map(Checkpoint::label_hash))?;
    let spec = QuerySpec {
        classids: a.classids.clone(),
        make: a.make.clone(),
        model: a.model.clone(),
        colors: a.colors.clone(),
        min_shape_score: a.min_shape_score,
        min_color_score: a.min_color_score,
        top_k: None,
    };
    let q = spec.resolve(idx.labels())?;
    let mut hits = query(&idx, &q);
    let mut t = Table::new(&["id", "source", "score", "classid", "make", "model", "color"]);
    match (&a.by_descriptor, &probe_net) {
        (Some(probe), Some(net)) => {
            let img = Image::load(probe)?;
            let input = net.arch.input;
            let batch = vehreid_core::dataset::prepare(&img, &BBox::full(&img), input.width, input.height)?;
            let out = vehreid_core::arch::forward(&net.params, &net.arch, &batch.to_tensor())?;
            hits = rerank_by_descriptor(hits, out.descriptor.data())?;
            t.note("score: cosine between record and probe descriptors");
        }
        (Some(_), None) => return Err(usage("--by-descriptor needs --makemodel")),
        _ => t.note(format!("score: {COMBINED_SCORE}")),
    }
    if let Some(k) = a.top_k {
        hits.truncate(k);
    }
    for h in hits {
        t.push(record_row(h.record, h.score));
    }
    Ok(t)
}

fn record_row(r: &BestShotRecord, score: f64) -> Vec<Value> {
    let top = r.top_class();
    vec![
        json!(r.id),
        json!(r.source),
        json!(score),
        json!(top.classid),
        json!(top.make),
        json!(top.model),
        json!(r.color.color),
    ]
}

fn plot(a: &PlotArgs) -> Result<Table> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let (_, data) = load_for(&ck, &a.manifest)?;
    let names = ck.labels.names();
    let pred = predict(&ck.params, &ck.arch, &data, 64, 1)?;
    let set = compute_centroids(&pred.descriptors, &data.labels, names.clone())?;
    let d = set.dim();
    let mut counts = vec![0usize; names.len()];
    let mut samples = Vec::new();
    for (i, &l) in data.labels.iter().enumerate() {
        if counts[l] < a.samples {
            counts[l] += 1;
            samples.push((l, pred.descriptors.data()[i * d..(i + 1) * d].to_vec()));
        }
    }
    let colors: Option<Vec<[f64; 3]>> = match &ck.labels {
        LabelSpace::Color { palette } => Some(palette.iter().map(|c| c.rgb).collect()),
        _ => None,
    };
    let svg = plot_sphere(&set, &samples, colors.as_deref())?;
    write_atomic(&a.out, svg.as_bytes())?;
    let mut t = Table::new(&["class", "name", "samples", "plotted"]);
    let mut per_class = vec![0usize; names.len()];
    for &l in &data.labels {
        per_class[l] += 1;
    }
    for (c, n) in names.iter().enumerate() {
        t.push(vec![json!(c), json!(n), json!(per_class[c]), json!(counts[c])]);
    }
    t.note(format!("wrote {}", a.out.display()));
    Ok(t)
}
