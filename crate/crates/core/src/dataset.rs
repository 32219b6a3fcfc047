//! Logged evaluations and their CSV representation.
//!
//! A dataset file starts with a comment header
//! `# instance=<name> n_features=<k> n_alleles=<R>` followed by one row per
//! evaluation: the `k` genes, the integer fitness and the label `F`/`NF`.
//! Files ending in `.gz` are written gzip-compressed; compressed input is
//! detected from its magic bytes.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::evaluation::{Label, Stage};
use crate::ga::EvaluationSink;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("expected {expected} features, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("dataset is empty")]
    Empty,
    #[error("fraction {0} is outside (0, 1)")]
    InvalidFraction(f64),
    #[error("batch size must be positive")]
    InvalidBatchSize,
}

/// One logged evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub features: Vec<u32>,
    pub fitness: u64,
    pub label: Label,
}

impl Example {
    pub fn from_genes(genes: &[usize], fitness: u64, label: Label) -> Self {
        Self {
            features: genes.iter().map(|&g| g as u32).collect(),
            fitness,
            label,
        }
    }

    pub fn to_row(&self) -> String {
        let mut row = String::with_capacity(self.features.len() * 4 + 8);
        for f in &self.features {
            row.push_str(&f.to_string());
            row.push(',');
        }
        row.push_str(&self.fitness.to_string());
        row.push(',');
        row.push_str(self.label.token());
        row
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetHeader {
    pub instance: String,
    pub n_features: usize,
    /// Number of possible allele values, when known.
    pub n_alleles: Option<usize>,
}

impl DatasetHeader {
    pub fn to_line(&self) -> String {
        let mut line = format!(
            "# instance={} n_features={}",
            self.instance, self.n_features
        );
        if let Some(r) = self.n_alleles {
            line.push_str(&format!(" n_alleles={r}"));
        }
        line
    }

    fn parse(line: &str) -> Result<Self, DatasetError> {
        let bad = |message: String| DatasetError::Malformed { line: 1, message };
        let body = line
            .strip_prefix('#')
            .ok_or_else(|| bad("missing '#' header".into()))?;
        let mut instance = None;
        let mut n_features = None;
        let mut n_alleles = None;
        for field in body.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| bad(format!("header field '{field}' is not key=value")))?;
            let number = || {
                value
                    .parse::<usize>()
                    .map_err(|_| bad(format!("header field '{key}' is not a number")))
            };
            match key {
                "instance" => instance = Some(value.to_owned()),
                "n_features" => n_features = Some(number()?),
                "n_alleles" => n_alleles = Some(number()?),
                _ => {}
            }
        }
        Ok(Self {
            instance: instance.ok_or_else(|| bad("header lacks instance".into()))?,
            n_features: n_features.ok_or_else(|| bad("header lacks n_features".into()))?,
            n_alleles,
        })
    }
}

/// In-memory log of soft-stage evaluations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetLog {
    header: DatasetHeader,
    examples: Vec<Example>,
}

impl DatasetLog {
    pub fn new(instance: impl Into<String>, n_features: usize, n_alleles: Option<usize>) -> Self {
        Self {
            header: DatasetHeader {
                instance: instance.into(),
                n_features,
                n_alleles,
            },
            examples: Vec::new(),
        }
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }

    pub fn instance_name(&self) -> &str {
        &self.header.instance
    }

    pub fn n_features(&self) -> usize {
        self.header.n_features
    }

    /// Allele count from the header, or one more than the largest feature.
    pub fn n_alleles(&self) -> usize {
        self.header.n_alleles.unwrap_or_else(|| {
            self.examples
                .iter()
                .flat_map(|e| e.features.iter())
                .max()
                .map_or(1, |&m| m as usize + 1)
        })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn push(&mut self, example: Example) -> Result<(), DatasetError> {
        if example.features.len() != self.header.n_features {
            return Err(DatasetError::LengthMismatch {
                expected: self.header.n_features,
                found: example.features.len(),
            });
        }
        self.examples.push(example);
        Ok(())
    }

    pub fn record_evaluation(
        &mut self,
        genes: &[usize],
        fitness: u64,
        label: Label,
    ) -> Result<(), DatasetError> {
        self.push(Example::from_genes(genes, fitness, label))
    }

    /// Fractions of feasible and non-feasible examples.
    pub fn class_balance(&self) -> Result<(f64, f64), DatasetError> {
        class_balance(&self.examples)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DatasetError> {
        let mut writer = DatasetWriter::new(out, self.header.clone())?;
        for e in &self.examples {
            writer.write(e)?;
        }
        writer.finish()?;
        Ok(())
    }

    /// Writes to `path`, compressed when the name ends in `.gz`.
    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        let mut writer = DatasetWriter::create(path, self.header.clone())?;
        for e in &self.examples {
            writer.write(e)?;
        }
        writer.close()
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, DatasetError> {
        let mut reader = BufReader::new(input);
        let compressed = reader.fill_buf()?.starts_with(&[0x1f, 0x8b]);
        if compressed {
            parse_rows(BufReader::new(MultiGzDecoder::new(reader)))
        } else {
            parse_rows(reader)
        }
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        Self::read_csv(File::open(path)?)
    }
}

fn parse_rows<R: BufRead>(reader: R) -> Result<DatasetLog, DatasetError> {
    let mut lines = reader.lines();
    let first = lines.next().ok_or(DatasetError::Malformed {
        line: 1,
        message: "missing header".into(),
    })??;
    let header = DatasetHeader::parse(first.trim_end())?;
    let k = header.n_features;
    let mut log = DatasetLog {
        header,
        examples: Vec::new(),
    };
    for (i, line) in lines.enumerate() {
        let line = line?;
        let number = i + 2;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let bad = |message: String| DatasetError::Malformed {
            line: number,
            message,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != k + 2 {
            return Err(bad(format!(
                "expected {} fields, found {}",
                k + 2,
                fields.len()
            )));
        }
        let features = fields[..k]
            .iter()
            .map(|f| {
                f.parse::<u32>()
                    .map_err(|_| bad(format!("bad feature '{f}'")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let fitness = fields[k]
            .parse::<u64>()
            .map_err(|_| bad(format!("bad fitness '{}'", fields[k])))?;
        let label = Label::from_token(fields[k + 1])
            .ok_or_else(|| bad(format!("bad label '{}'", fields[k + 1])))?;
        log.examples.push(Example {
            features,
            fitness,
            label,
        });
    }
    Ok(log)
}

/// Streams rows to a writer as they arrive.
pub struct DatasetWriter<W: Write> {
    out: W,
    n_features: usize,
    rows: u64,
}

impl<W: Write> DatasetWriter<W> {
    pub fn new(mut out: W, header: DatasetHeader) -> Result<Self, DatasetError> {
        writeln!(out, "{}", header.to_line())?;
        Ok(Self {
            out,
            n_features: header.n_features,
            rows: 0,
        })
    }

    pub fn write(&mut self, example: &Example) -> Result<(), DatasetError> {
        if example.features.len() != self.n_features {
            return Err(DatasetError::LengthMismatch {
                expected: self.n_features,
                found: example.features.len(),
            });
        }
        writeln!(self.out, "{}", example.to_row())?;
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> u64 {
        self.rows
    }

    pub fn finish(mut self) -> Result<W, DatasetError> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Plain or gzip file output.
pub enum FileSink {
    Plain(BufWriter<File>),
    Gzip(GzEncoder<BufWriter<File>>),
}

impl Write for FileSink {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        match self {
            Self::Plain(w) => w.write(buf),
            Self::Gzip(w) => w.write(buf),
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        match self {
            Self::Plain(w) => w.flush(),
            Self::Gzip(w) => w.flush(),
        }
    }
}

impl FileSink {
    pub fn create(path: &Path) -> io::Result<Self> {
        let file = BufWriter::new(File::create(path)?);
        Ok(if path.extension().is_some_and(|e| e == "gz") {
            Self::Gzip(GzEncoder::new(file, Compression::default()))
        } else {
            Self::Plain(file)
        })
    }

    pub fn close(self) -> io::Result<()> {
        match self {
            Self::Plain(mut w) => w.flush(),
            Self::Gzip(w) => w.finish()?.flush(),
        }
    }
}

impl DatasetWriter<FileSink> {
    pub fn create(path: &Path, header: DatasetHeader) -> Result<Self, DatasetError> {
        Self::new(FileSink::create(path)?, header)
    }

    pub fn close(self) -> Result<(), DatasetError> {
        self.finish()?.close()?;
        Ok(())
    }
}

impl EvaluationSink for DatasetLog {
    fn record(
        &mut self,
        stage: Stage,
        genes: &[usize],
        fitness: u64,
        label: Label,
    ) -> Result<(), DatasetError> {
        if stage == Stage::Soft {
            self.record_evaluation(genes, fitness, label)?;
        }
        Ok(())
    }
}

impl<W: Write> EvaluationSink for DatasetWriter<W> {
    fn record(
        &mut self,
        stage: Stage,
        genes: &[usize],
        fitness: u64,
        label: Label,
    ) -> Result<(), DatasetError> {
        if stage == Stage::Soft {
            self.write(&Example::from_genes(genes, fitness, label))?;
        }
        Ok(())
    }
}

/// Fractions of feasible and non-feasible examples.
pub fn class_balance(examples: &[Example]) -> Result<(f64, f64), DatasetError> {
    if examples.is_empty() {
        return Err(DatasetError::Empty);
    }
    let feasible = examples
        .iter()
        .filter(|e| e.label == Label::Feasible)
        .count() as f64;
    let n = examples.len() as f64;
    Ok((feasible / n, 1.0 - feasible / n))
}

/// Training and test parts of a shuffled split. Each part keeps the original
/// order of its examples.
#[derive(Debug, Clone)]
pub struct Split<'a> {
    pub train: Vec<&'a Example>,
    pub test: Vec<&'a Example>,
}

/// Random split with `round(n * fraction)` training examples.
pub fn split(examples: &[Example], fraction: f64, seed: u64) -> Result<Split<'_>, DatasetError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DatasetError::InvalidFraction(fraction));
    }
    let n = examples.len();
    let n_train = ((n as f64) * fraction).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, test) = order.split_at_mut(n_train.min(n));
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split {
        train: train.iter().map(|&i| &examples[i]).collect(),
        test: test.iter().map(|&i| &examples[i]).collect(),
    })
}

/// Consecutive blocks of `batch_size` examples; the last may be shorter.
pub fn batches(
    examples: &[Example],
    batch_size: usize,
) -> Result<std::slice::Chunks<'_, Example>, DatasetError> {
    if batch_size == 0 {
        return Err(DatasetError::InvalidBatchSize);
    }
    Ok(examples.chunks(batch_size))
}
