use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use kbc_core::eval::{evaluate, FilterSet, RankingReport};
use kbc_core::kg::{
    load_dictionary, load_split, EntityId, Interner, Split, TripleStore, UnseenPolicy, VocabMode,
    Vocabulary,
};
use kbc_core::model::{read_checkpoint, write_checkpoint, write_text_export};
use kbc_core::trainer::{fit, EpochReport, FitObserver, TrainingData};
use kbc_core::Embeddings;

use crate::config::{DataConfig, RunConfig};
use crate::CliError;

pub const CONFIG_FILE: &str = "config.toml";
pub const EPOCHS_FILE: &str = "epochs.jsonl";
pub const TIMING_FILE: &str = "timing.tsv";
pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const LAST_CHECKPOINT: &str = "last.ckpt";
pub const ENTITY_DICT: &str = "entities.dict";
pub const RELATION_DICT: &str = "relations.dict";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const TEST_METRICS_FILE: &str = "test_metrics.txt";
pub const TEST_RANKS_FILE: &str = "test_ranks.tsv";

pub struct Dataset {
    pub vocab: Vocabulary,
    pub train: TripleStore,
    pub valid: TripleStore,
    pub test: TripleStore,
}

impl Dataset {
    pub fn filter(&self) -> FilterSet {
        FilterSet::new([&self.train, &self.valid, &self.test])
    }
}

/// Loads the splits named in `data`. With both dictionaries given the
/// vocabulary is fixed up front; otherwise it grows from the training file.
pub fn load_dataset(data: &DataConfig) -> Result<Dataset, CliError> {
    data.check_paths()?;
    let mut vocab = Vocabulary::new();
    if let Some(p) = &data.entity_dict {
        vocab.entities = load_dictionary(p)?;
    }
    if let Some(p) = &data.relation_dict {
        vocab.relations = load_dictionary(p)?;
    }
    let unseen: UnseenPolicy = data.unseen.into();
    let train_mode = if data.entity_dict.is_some() && data.relation_dict.is_some() {
        VocabMode::Frozen(unseen)
    } else {
        VocabMode::Extend
    };
    let train = load_split(&data.train, Split::Train, &mut vocab, train_mode)?;
    let mut optional = |p: &Option<PathBuf>, split| -> Result<TripleStore, CliError> {
        Ok(match p {
            Some(p) => load_split(p, split, &mut vocab, VocabMode::for_split(split, unseen))?,
            None => TripleStore::from_triples(split, []),
        })
    };
    let valid = optional(&data.valid, Split::Valid)?;
    let test = optional(&data.test, Split::Test)?;
    for s in [&train, &valid, &test] {
        if s.duplicates() > 0 || s.skipped() > 0 {
            log::warn!(
                "{}: {} duplicate and {} skipped lines",
                s.split().as_str(),
                s.duplicates(),
                s.skipped()
            );
        }
    }
    if train.is_empty() {
        return Err(CliError::Data(format!("{}: no training triples", data.train.display())));
    }
    Ok(Dataset {
        vocab,
        train,
        valid,
        test,
    })
}

fn data_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(data_err(path))
}

fn write_dictionary(path: &Path, names: &Interner) -> Result<(), CliError> {
    let mut s = String::new();
    for (i, n) in names.names().iter().enumerate() {
        let _ = writeln!(s, "{n}\t{i}");
    }
    write_file(path, &s)
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, Default)]
pub struct TrainArgs {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub max_epochs: Option<usize>,
    pub threads: Option<usize>,
    /// Raw `section.key=value` overrides, applied after the flags above.
    pub set: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub run_dir: PathBuf,
    pub best_epoch: usize,
    pub best_valid_mrr: Option<f64>,
    pub epochs: usize,
    pub stopped_early: bool,
    pub test: Option<RankingReport>,
}

struct RunWriter {
    dir: PathBuf,
    epochs: BufWriter<File>,
    timing: BufWriter<File>,
}

impl FitObserver<f64> for RunWriter {
    fn on_epoch(&mut self, r: &EpochReport) -> std::io::Result<()> {
        serde_json::to_writer(&mut self.epochs, r)?;
        self.epochs.write_all(b"\n")?;
        self.epochs.flush()?;
        writeln!(self.timing, "{}\t{:.3}", r.epoch, r.wall_time)?;
        self.timing.flush()?;
        match &r.valid {
            Some(v) => log::info!(
                "epoch {}: loss {:.4}, valid MRR {:.1}, Hits@10 {:.1}",
                r.epoch,
                r.mean_loss,
                100.0 * v.mrr,
                100.0 * v.hits_at_10
            ),
            None => log::info!("epoch {}: loss {:.4}", r.epoch, r.mean_loss),
        }
        Ok(())
    }

    fn on_improvement(&mut self, epoch: usize, emb: &Embeddings) -> std::io::Result<()> {
        log::debug!("epoch {epoch}: new best, writing checkpoint");
        write_checkpoint(self.dir.join(BEST_CHECKPOINT), emb).map_err(std::io::Error::other)
    }
}

pub fn train(args: &TrainArgs) -> Result<TrainSummary, CliError> {
    let mut overrides = Vec::new();
    if let Some(s) = args.seed {
        overrides.push(format!("train.seed={s}"));
    }
    if let Some(m) = args.max_epochs {
        overrides.push(format!("train.max_epochs={m}"));
    }
    if let Some(t) = args.threads {
        overrides.push(format!("train.threads={t}"));
    }
    overrides.extend(args.set.iter().cloned());
    let mut cfg = RunConfig::load(&args.config, &overrides)?;
    if let Some(o) = &args.out {
        cfg.output.dir = o.clone();
    }
    let cfg = cfg.resolved()?;
    let tc = cfg.train_config()?;
    let data = load_dataset(&cfg.data)?;
    log::info!(
        "{} entities, {} relations; {} train / {} valid / {} test triples",
        data.vocab.num_entities(),
        data.vocab.num_relations(),
        data.train.len(),
        data.valid.len(),
        data.test.len()
    );

    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir).map_err(data_err(&dir))?;
    write_file(&dir.join(CONFIG_FILE), &cfg.to_toml())?;
    write_dictionary(&dir.join(ENTITY_DICT), &data.vocab.entities)?;
    write_dictionary(&dir.join(RELATION_DICT), &data.vocab.relations)?;
    let create = |name: &str| {
        let p = dir.join(name);
        File::create(&p).map(BufWriter::new).map_err(data_err(&p))
    };
    let mut writer = RunWriter {
        dir: dir.clone(),
        epochs: create(EPOCHS_FILE)?,
        timing: create(TIMING_FILE)?,
    };

    let filter = data.filter();
    let training = TrainingData {
        train: &data.train,
        valid: &data.valid,
        filter: &filter,
        num_entities: data.vocab.num_entities(),
        num_relations: data.vocab.num_relations(),
    };
    let result = with_threads(cfg.train.threads, || fit(&training, &tc, &mut writer))??;

    if result.best_mrr.is_none() {
        // No validation split: the final parameters are the result.
        write_checkpoint(dir.join(BEST_CHECKPOINT), &result.best)?;
    }
    write_checkpoint(dir.join(LAST_CHECKPOINT), &result.last)?;
    let epochs = result.reports.len();
    let mut summary = format!(
        "best_epoch = {}\nepochs = {epochs}\nstopped_early = {}\n",
        result.best_epoch, result.stopped_early
    );
    if let Some(m) = result.best_mrr {
        let _ = writeln!(summary, "best_valid_mrr = {:.1}", 100.0 * m);
    }
    write_file(&dir.join(SUMMARY_FILE), &summary)?;

    let test = if data.test.is_empty() {
        None
    } else {
        let report = with_threads(cfg.train.threads, || {
            evaluate(&result.best, data.test.triples(), &filter)
        })?;
        write_file(&dir.join(TEST_METRICS_FILE), &report.to_key_value())?;
        write_file(&dir.join(TEST_RANKS_FILE), &report.ranks_tsv())?;
        Some(report)
    };
    Ok(TrainSummary {
        run_dir: dir,
        best_epoch: result.best_epoch,
        best_valid_mrr: result.best_mrr,
        epochs,
        stopped_early: result.stopped_early,
        test,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalSplit {
    Valid,
    #[default]
    Test,
}

#[derive(Debug, Clone, Default)]
pub struct EvalArgs {
    pub config: PathBuf,
    /// Defaults to `best.ckpt` in the configured output directory.
    pub checkpoint: Option<PathBuf>,
    pub split: EvalSplit,
    pub out: Option<PathBuf>,
    pub set: Vec<String>,
}

pub fn eval(args: &EvalArgs) -> Result<RankingReport, CliError> {
    let cfg = RunConfig::load(&args.config, &args.set)?;
    let data = load_dataset(&cfg.data)?;
    let ckpt = args
        .checkpoint
        .clone()
        .unwrap_or_else(|| cfg.output.dir.join(BEST_CHECKPOINT));
    let emb: Embeddings = read_checkpoint(&ckpt)?;
    if emb.num_entities() != data.vocab.num_entities()
        || emb.num_relations() != data.vocab.num_relations()
    {
        return Err(CliError::Data(format!(
            "{} has {} entities and {} relations but the data has {} and {}",
            ckpt.display(),
            emb.num_entities(),
            emb.num_relations(),
            data.vocab.num_entities(),
            data.vocab.num_relations()
        )));
    }
    let split = match args.split {
        EvalSplit::Valid => &data.valid,
        EvalSplit::Test => &data.test,
    };
    let filter = data.filter();
    let report = with_threads(cfg.train.threads, || evaluate(&emb, split.triples(), &filter))?;
    if let Some(out) = &args.out {
        write_file(out, &report.to_key_value())?;
    }
    Ok(report)
}

/// Checkpoint plus the entity names stored next to it.
pub struct LoadedModel {
    pub emb: Embeddings,
    pub names: Interner,
}

impl LoadedModel {
    /// `dict` defaults to `entities.dict` beside the checkpoint; without one,
    /// entities are named by their ids.
    pub fn open(checkpoint: &Path, dict: Option<&Path>) -> Result<Self, CliError> {
        let emb: Embeddings = read_checkpoint(checkpoint)?;
        let default = checkpoint.with_file_name(ENTITY_DICT);
        let names = match dict {
            Some(p) => load_dictionary(p)?,
            None if default.is_file() => load_dictionary(&default)?,
            None => Interner::from_names((0..emb.num_entities()).map(|i| i.to_string()))
                .map_err(CliError::Data)?,
        };
        if names.len() != emb.num_entities() {
            return Err(CliError::Data(format!(
                "dictionary has {} entities, checkpoint {}",
                names.len(),
                emb.num_entities()
            )));
        }
        Ok(Self { emb, names })
    }

    pub fn lookup(&self, name: &str) -> Result<EntityId, CliError> {
        if let Some(id) = self.names.get(name) {
            return Ok(EntityId(id));
        }
        let mut close: Vec<(f64, &str)> = self
            .names
            .names()
            .iter()
            .map(|n| (strsim::normalized_levenshtein(name, n), n.as_str()))
            .collect();
        close.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
        let list: Vec<&str> = close.iter().take(5).map(|c| c.1).collect();
        Err(CliError::Data(format!(
            "unknown entity `{name}`; closest: {}",
            list.join(", ")
        )))
    }

    fn cosines(&self, e: EntityId) -> Result<Vec<f64>, CliError> {
        self.emb.cosine_row(e).map_err(|err| {
            CliError::Numeric(format!("{}: {err}", self.names.name(e.0).unwrap_or("?")))
        })
    }

    /// The `k` most cosine-similar entities, the query excluded; ties by id.
    pub fn neighbors(&self, name: &str, k: usize) -> Result<Vec<(String, f64)>, CliError> {
        let q = self.lookup(name)?;
        let sims = self.cosines(q)?;
        let mut order: Vec<usize> = (0..sims.len()).filter(|&i| i != q.index()).collect();
        order.sort_by(|&a, &b| sims[b].total_cmp(&sims[a]).then(a.cmp(&b)));
        Ok(order
            .into_iter()
            .take(k)
            .map(|i| (self.names.name(i as u32).unwrap_or("?").to_owned(), sims[i]))
            .collect())
    }

    /// Softmax weight of `candidate` over cosine similarities to `query`,
    /// normalized over every entity including the query itself.
    pub fn probe_odds(&self, query: &str, candidate: &str) -> Result<ProbeOdds, CliError> {
        let q = self.lookup(query)?;
        let c = self.lookup(candidate)?;
        if q == c {
            return Err(CliError::Usage(format!(
                "query and candidate are the same entity `{query}`"
            )));
        }
        let sims = self.cosines(q)?;
        let max = sims.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = sims.iter().map(|s| (s - max).exp()).sum();
        let weight = (sims[c.index()] - max).exp() / z;
        let uniform = 1.0 / sims.len() as f64;
        Ok(ProbeOdds {
            cosine: sims[c.index()],
            weight,
            uniform,
            ratio: weight / uniform,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOdds {
    pub cosine: f64,
    pub weight: f64,
    pub uniform: f64,
    pub ratio: f64,
}

impl ProbeOdds {
    pub fn render(&self) -> String {
        format!(
            "cosine = {:.4}\nsoftmax_weight = {:.3e}\nuniform_weight = {:.3e}\nratio = {:.3}\n",
            self.cosine, self.weight, self.uniform, self.ratio
        )
    }
}

pub fn render_neighbors(list: &[(String, f64)]) -> String {
    list.iter().map(|(n, s)| format!("{n}({s:.2})\n")).collect()
}

/// Merges per-run `epochs.jsonl` files into `epoch,run,mrr,hits_at_10`
/// rows. Epochs without validation metrics are skipped.
pub fn curves(files: &[PathBuf], labels: &[String]) -> Result<String, CliError> {
    if !labels.is_empty() && labels.len() != files.len() {
        return Err(CliError::Usage(format!(
            "{} labels for {} files",
            labels.len(),
            files.len()
        )));
    }
    let mut used: Vec<String> = Vec::new();
    let mut csv = String::from("epoch,run,mrr,hits_at_10\n");
    for (i, path) in files.iter().enumerate() {
        let base = labels.get(i).cloned().unwrap_or_else(|| run_label(path));
        let mut label = base.clone();
        let mut n = 2;
        while used.contains(&label) {
            label = format!("{base}#{n}");
            n += 1;
        }
        used.push(label.clone());
        let file = File::open(path).map_err(data_err(path))?;
        for (line_no, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(data_err(path))?;
            if line.trim().is_empty() {
                continue;
            }
            let r: EpochReport = serde_json::from_str(&line).map_err(|e| {
                CliError::Data(format!("{}:{}: not an epoch report: {e}", path.display(), line_no + 1))
            })?;
            if let Some(v) = r.valid {
                let _ = writeln!(csv, "{},{label},{},{}", r.epoch, v.mrr, v.hits_at_10);
            }
        }
    }
    Ok(csv)
}

fn run_label(path: &Path) -> String {
    path.parent()
        .and_then(Path::file_name)
        .or_else(|| path.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".to_owned())
}

pub fn export(model: &LoadedModel, out: &mut dyn Write) -> Result<(), CliError> {
    write_text_export(&mut *out, &model.emb, &model.names)
        .map_err(|e| CliError::Data(format!("export failed: {e}")))
}
