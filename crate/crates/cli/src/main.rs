use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use sceneparse::context::debug_report;
use sceneparse::corpus::{decode_pgm, decode_ppm, load_dataset, save_dataset, synth_corpus, Corpus, ImageRaster, LabelRaster, SynthSpec};
use sceneparse::pipeline::{
    evaluate, evaluate_variant, load_bundle, parse_all, save_bundle, train_pipeline_traced, Config, ImageParse, Metrics, Variant,
};

#[derive(Parser)]
#[command(name = "sceneparse", version, about = "Superpixel scene parsing with fused classifiers and global label costs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Generator spec file; the built-in benchmark when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Print the built-in spec and exit.
        #[arg(long)]
        print_spec: bool,
    },
    /// Train a model bundle from a dataset's training split.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Label images with a bundle and write 16-bit PGM label maps.
    Parse {
        #[arg(long)]
        bundle: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "full")]
        variant: String,
        /// Also write per-image neighbor and label-cost dumps.
        #[arg(long)]
        debug: bool,
    },
    /// Score predicted label maps against ground truth.
    Eval {
        #[command(flatten)]
        truth: TruthArgs,
        /// Per-class CSV output.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Per-class table sorted by frequency, plus a confusion matrix CSV.
    Report {
        #[command(flatten)]
        truth: TruthArgs,
        #[arg(long)]
        confusion: Option<PathBuf>,
    },
    /// Train once and evaluate every variant on the test split.
    Bench {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from the synthetic benchmark settings instead of the defaults.
    #[arg(long)]
    benchmark: bool,
    /// Override one key, e.g. `--set lambda=0.05`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct InputArgs {
    /// Dataset directory whose split is parsed.
    #[arg(long, conflicts_with = "image")]
    data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    split: Split,
    /// Individual PPM files; the id is the file stem.
    #[arg(long)]
    image: Vec<PathBuf>,
}

#[derive(Args)]
struct TruthArgs {
    /// Directory of predicted `<id>.pgm` files.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    split: Split,
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    Train,
    Test,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            out,
            spec,
            seed,
            print_spec,
        } => {
            if print_spec {
                print!("{}", SynthSpec::standard().to_text());
                return Ok(());
            }
            let spec = match spec {
                Some(p) => SynthSpec::parse(&read_text(&p)?).with_context(|| format!("spec {}", p.display()))?,
                None => SynthSpec::standard(),
            };
            let corpus = synth_corpus(&spec, seed)?;
            save_dataset(&corpus, &out)?;
            println!(
                "wrote {} train / {} test images, {} classes to {}",
                corpus.train.len(),
                corpus.test.len(),
                corpus.num_classes(),
                out.display()
            );
        }
        Command::Train { data, out, config } => {
            let config = config.resolve()?;
            let corpus = load_dataset(&data)?;
            let (bundle, report) = train_pipeline_traced(&corpus, &config)?;
            save_bundle(&bundle, &out)?;
            println!(
                "{} training superpixels, {} usable for classifiers",
                report.superpixels, report.training_rows
            );
            for r in &report.regimes {
                match &r.skipped {
                    Some(why) => println!("regime {}: skipped ({why})", r.regime.tag()),
                    None => println!("regime {}: {} classes, {} rows", r.regime.tag(), r.classes.len(), r.rows),
                }
            }
            let bad = report.loss_increases();
            if bad > 0 {
                bail!("training loss increased in {bad} boosting rounds");
            }
            println!("bundle written to {}", out.display());
        }
        Command::Parse {
            bundle,
            input,
            out,
            variant,
            debug,
        } => {
            let variant = parse_variant(&variant)?;
            let bundle = load_bundle(&bundle)?;
            let images = input.load()?;
            let refs: Vec<(&str, &ImageRaster)> = images.iter().map(|(id, im)| (id.as_str(), im)).collect();
            let parses = parse_all(&refs, &bundle, variant)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let mut report = String::from("id pass data smoothness label_cost total unique\n");
            for ((id, _), p) in images.iter().zip(&parses) {
                write_file(&out.join(format!("{id}.pgm")), &p.raster().to_pgm())?;
                energy_lines(&mut report, id, p);
                if let (true, Some(q)) = (debug, &p.pass2) {
                    let dump = debug_report(&bundle.index, &q.neighbors, &q.label_costs, &bundle.classes);
                    write_file(&out.join(format!("{id}.context.txt")), dump.as_bytes())?;
                }
            }
            write_file(&out.join("energy.txt"), report.as_bytes())?;
            println!("labeled {} images into {}", parses.len(), out.display());
        }
        Command::Eval { truth, csv } => {
            let (corpus, metrics) = truth.evaluate()?;
            println!("per-pixel accuracy {:.4}", metrics.per_pixel);
            println!("per-class accuracy {:.4}", metrics.per_class);
            if let Some(path) = csv {
                write_file(&path, metrics.class_csv(&corpus.classes).as_bytes())?;
            }
        }
        Command::Report { truth, confusion } => {
            let (corpus, metrics) = truth.evaluate()?;
            print!("{}", metrics.table(&corpus.classes));
            if let Some(path) = confusion {
                write_file(&path, metrics.confusion_csv(&corpus.classes).as_bytes())?;
            }
        }
        Command::Bench { data, config } => {
            let config = config.resolve()?;
            let corpus = load_dataset(&data)?;
            let (bundle, _) = train_pipeline_traced(&corpus, &config)?;
            println!("{:<12} {:>9} {:>9} {:>8} {:>8}", "variant", "per-pixel", "per-class", "labels1", "labels2");
            for v in Variant::ALL {
                let r = evaluate_variant(&corpus, &bundle, v)?;
                println!(
                    "{:<12} {:>9.2} {:>9.2} {:>8.2} {:>8.2}",
                    v.name(),
                    100.0 * r.metrics.per_pixel,
                    100.0 * r.metrics.per_class,
                    r.mean_unique_pass1,
                    r.mean_unique_final
                );
            }
        }
    }
    Ok(())
}

impl ConfigArgs {
    fn resolve(&self) -> Result<Config> {
        let mut text = if self.benchmark { Config::benchmark().to_text() } else { String::new() };
        if let Some(p) = &self.config {
            text.push_str(&read_text(p)?);
            text.push('\n');
        }
        for kv in &self.overrides {
            if !kv.contains('=') {
                bail!("--set expects KEY=VALUE, got {kv:?}");
            }
            text.push_str(kv);
            text.push('\n');
        }
        Ok(Config::parse(&text)?)
    }
}

impl InputArgs {
    fn load(&self) -> Result<Vec<(String, ImageRaster)>> {
        if let Some(dir) = &self.data {
            let corpus = load_dataset(dir)?;
            return Ok(split(&corpus, self.split).iter().map(|e| (e.id.clone(), e.image.clone())).collect());
        }
        if self.image.is_empty() {
            bail!("give --data DIR or at least one --image FILE");
        }
        self.image
            .iter()
            .map(|p| {
                let id = p
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .with_context(|| format!("no file name in {}", p.display()))?;
                let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
                Ok((id.to_string(), decode_ppm(&bytes, id)?))
            })
            .collect()
    }
}

impl TruthArgs {
    fn evaluate(&self) -> Result<(Corpus, Metrics)> {
        let corpus = load_dataset(&self.data)?;
        let entries = split(&corpus, self.split);
        let mut preds = Vec::with_capacity(entries.len());
        for e in entries {
            let path = self.pred.join(format!("{}.pgm", e.id));
            let bytes = fs::read(&path).with_context(|| format!("reading prediction {}", path.display()))?;
            preds.push(decode_pgm(&bytes, &e.id)?);
        }
        let gt: Vec<LabelRaster> = entries.iter().map(|e| e.labels.clone()).collect();
        let metrics = evaluate(&preds, &gt, corpus.num_classes())?;
        Ok((corpus, metrics))
    }
}

fn split(corpus: &Corpus, which: Split) -> &[sceneparse::corpus::Entry] {
    match which {
        Split::Train => &corpus.train,
        Split::Test => &corpus.test,
    }
}

fn parse_variant(s: &str) -> Result<Variant> {
    Variant::parse(s).with_context(|| {
        let names: Vec<&str> = Variant::ALL.iter().map(|v| v.name()).collect();
        format!("unknown variant {s:?}; expected one of {}", names.join(", "))
    })
}

fn energy_lines(out: &mut String, id: &str, p: &ImageParse) {
    let mut line = |pass: &str, r: &sceneparse::mrf::ParseResult| {
        let e = &r.energy;
        let _ = writeln!(
            out,
            "{id} {pass} {:.9} {:.9} {:.9} {:.9} {}",
            e.data,
            e.smoothness,
            e.label_cost,
            e.total(),
            r.unique.len()
        );
    };
    line("1", &p.pass1);
    if let Some(q) = &p.pass2 {
        line("2", &q.result);
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}
