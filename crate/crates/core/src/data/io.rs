//! On-disk dataset layout.
//!
//! A dataset directory holds:
//!
//! | file | contents |
//! |------|----------|
//! | `edges.tsv` | `u<TAB>v` per line, 0-based, each undirected edge once |
//! | `features.bin` or `features.csv` | the `n x d` feature matrix (binary preferred when both exist) |
//! | `labels.tsv` | `id<TAB>class`, or `id<TAB>b0,b1,...` with `{0,1}` bits for multi-label data |
//! | `splits.json` | `{"train":[..],"val":[..],"test":[..]}` or `{"seed":s,"protocol":"stratified-60-20-20"}` |
//! | `meta.json` | optional: `name`, `metric`, `pipeline_override`, `num_classes` |
//!
//! `features.bin` is the magic `CFG1`, then `n` and `d` as little-endian
//! `u64`, then `n*d` little-endian `f64` values in row-major order.
//! `features.csv` starts with a header line `n d` followed by `n` comma-separated rows.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Labels, Metric, Pipeline, SplitSpec};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeSet};
use crate::numerics::Mat;

const MAGIC: &[u8; 4] = b"CFG1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureFormat {
    Binary,
    Text,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metric: Option<Metric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pipeline_override: Option<Pipeline>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    num_classes: Option<usize>,
}

fn open(path: &Path) -> Result<File> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    Ok(File::open(path)?)
}

fn tsv_reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(false)
        .comment(Some(b'#'))
        .from_reader(open(path)?))
}

fn parse_field<T: std::str::FromStr>(s: &str, path: &Path, line: u64) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("{}:{line}: cannot parse {s:?}", path.display())))
}

fn record_line(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn read_edges(path: &Path) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for rec in tsv_reader(path)?.records() {
        let rec = rec.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let line = record_line(&rec);
        if rec.len() != 2 {
            return Err(Error::Parse(format!("{}:{line}: expected 2 fields", path.display())));
        }
        out.push((parse_field(&rec[0], path, line)?, parse_field(&rec[1], path, line)?));
    }
    Ok(out)
}

fn read_features_bin(path: &Path) -> Result<Mat> {
    let mut r = BufReader::new(open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("{}: bad magic {magic:?}", path.display())));
    }
    let n = r.read_u64::<LittleEndian>()? as usize;
    let d = r.read_u64::<LittleEndian>()? as usize;
    let len = n
        .checked_mul(d)
        .ok_or_else(|| Error::Format(format!("{}: header {n}x{d} overflows", path.display())))?;
    let mut data = vec![0.0; len];
    r.read_f64_into::<LittleEndian>(&mut data)
        .map_err(|_| Error::ShapeMismatch(format!("{}: fewer than {n}x{d} values", path.display())))?;
    if r.read(&mut [0u8])? != 0 {
        return Err(Error::ShapeMismatch(format!("{}: trailing bytes after {n}x{d} values", path.display())));
    }
    Mat::from_vec(n, d, data)
}

fn read_features_csv(path: &Path) -> Result<Mat> {
    let mut r = BufReader::new(open(path)?);
    let mut header = String::new();
    r.read_line(&mut header)?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(Error::Parse(format!("{}: header must be `n d`", path.display())));
    }
    let n: usize = parse_field(dims[0], path, 1)?;
    let d: usize = parse_field(dims[1], path, 1)?;
    let mut data = Vec::with_capacity(n * d);
    let mut rows = 0usize;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let line = record_line(&rec) + 1;
        if rec.len() != d {
            return Err(Error::ShapeMismatch(format!(
                "{}:{line}: {} values, header says {d}",
                path.display(),
                rec.len()
            )));
        }
        for f in rec.iter() {
            data.push(parse_field(f, path, line)?);
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::ShapeMismatch(format!("{}: {rows} rows, header says {n}", path.display())));
    }
    Mat::from_vec(n, d, data)
}

fn read_labels(path: &Path, n: usize, num_classes: Option<usize>) -> Result<Labels> {
    let mut single: Vec<Option<usize>> = vec![None; n];
    let mut multi: Vec<Option<Vec<bool>>> = vec![None; n];
    let (mut saw_single, mut saw_multi) = (false, false);
    for rec in tsv_reader(path)?.records() {
        let rec = rec.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let line = record_line(&rec);
        if rec.len() != 2 {
            return Err(Error::Parse(format!("{}:{line}: expected 2 fields", path.display())));
        }
        let v: usize = parse_field(&rec[0], path, line)?;
        if v >= n {
            return Err(Error::ShapeMismatch(format!("{}:{line}: node {v} but n = {n}", path.display())));
        }
        if single[v].is_some() || multi[v].is_some() {
            return Err(Error::Parse(format!("{}:{line}: duplicate label for node {v}", path.display())));
        }
        let field = rec[1].trim();
        if field.contains(',') {
            saw_multi = true;
            let bits = field
                .split(',')
                .map(|b| match b.trim() {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(Error::Parse(format!("{}:{line}: bit {other:?}", path.display()))),
                })
                .collect::<Result<Vec<bool>>>()?;
            multi[v] = Some(bits);
        } else {
            saw_single = true;
            single[v] = Some(parse_field(field, path, line)?);
        }
    }
    match (saw_single, saw_multi) {
        (true, true) => Err(Error::Parse(format!("{}: mixes single and multi-label rows", path.display()))),
        (_, true) => {
            let num_tasks = multi.iter().flatten().map(Vec::len).next().unwrap_or(0);
            Ok(Labels::Multi { rows: multi, num_tasks })
        }
        _ => {
            let observed = single.iter().flatten().max().map_or(0, |&c| c + 1);
            let num_classes = num_classes.unwrap_or(observed);
            Ok(Labels::Single {
                classes: single,
                num_classes,
            })
        }
    }
}

/// Reads and validates a dataset directory.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let meta: Meta = match dir.join("meta.json") {
        p if p.is_file() => serde_json::from_reader(BufReader::new(File::open(p)?))?,
        _ => Meta::default(),
    };
    let bin = dir.join("features.bin");
    let features = if bin.is_file() {
        read_features_bin(&bin)?
    } else {
        read_features_csv(&dir.join("features.csv"))?
    };
    let n = features.rows();
    let edges = read_edges(&dir.join("edges.tsv"))?;
    let graph = Graph::from_edges(n, edges).map_err(|e| match e {
        Error::NodeOutOfRange { id, n } => {
            Error::ShapeMismatch(format!("edges.tsv mentions node {id}, features have {n} rows"))
        }
        e => e,
    })?;
    let labels = read_labels(&dir.join("labels.tsv"), n, meta.num_classes)?;
    let splits: SplitSpec = serde_json::from_reader(BufReader::new(open(&dir.join("splits.json"))?))?;
    let strata: Vec<Option<usize>> = match &labels {
        Labels::Single { classes, .. } => classes.clone(),
        Labels::Multi { rows, .. } => rows.iter().map(|r| r.as_ref().map(|_| 0)).collect(),
    };
    let (train, val, test) = splits.masks(&strata)?;
    let metric = meta.metric.unwrap_or(match labels {
        Labels::Single { .. } => Metric::Accuracy,
        Labels::Multi { .. } => Metric::RocAuc,
    });
    let ds = Dataset {
        name: meta.name.unwrap_or_else(|| dir_name(dir)),
        graph,
        features,
        labels,
        train,
        val,
        test,
        metric,
        pipeline_override: meta.pipeline_override,
    };
    ds.validate()?;
    Ok(ds)
}

fn dir_name(dir: &Path) -> String {
    dir.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

fn create(path: PathBuf) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes `ds` in the directory layout read by [`load_dataset`].
pub fn save_dataset(ds: &Dataset, dir: &Path, format: FeatureFormat) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = create(dir.join("edges.tsv"))?;
    for &(u, v) in ds.graph.edges() {
        writeln!(w, "{u}\t{v}")?;
    }
    w.flush()?;

    let x = &ds.features;
    let (stale, fresh) = match format {
        FeatureFormat::Binary => ("features.csv", "features.bin"),
        FeatureFormat::Text => ("features.bin", "features.csv"),
    };
    let stale = dir.join(stale);
    if stale.is_file() {
        std::fs::remove_file(stale)?;
    }
    let mut w = create(dir.join(fresh))?;
    match format {
        FeatureFormat::Binary => {
            w.write_all(MAGIC)?;
            w.write_u64::<LittleEndian>(x.rows() as u64)?;
            w.write_u64::<LittleEndian>(x.cols() as u64)?;
            for &v in x.as_slice() {
                w.write_f64::<LittleEndian>(v)?;
            }
        }
        FeatureFormat::Text => {
            writeln!(w, "{} {}", x.rows(), x.cols())?;
            for i in 0..x.rows() {
                let row: Vec<String> = x.row(i).iter().map(|v| format!("{v:?}")).collect();
                writeln!(w, "{}", row.join(","))?;
            }
        }
    }
    w.flush()?;

    let mut w = create(dir.join("labels.tsv"))?;
    for v in 0..ds.n() {
        match &ds.labels {
            Labels::Single { classes, .. } => {
                if let Some(c) = classes[v] {
                    writeln!(w, "{v}\t{c}")?;
                }
            }
            Labels::Multi { rows, .. } => {
                if let Some(bits) = &rows[v] {
                    let s: Vec<&str> = bits.iter().map(|&b| if b { "1" } else { "0" }).collect();
                    writeln!(w, "{v}\t{}", s.join(","))?;
                }
            }
        }
    }
    w.flush()?;

    let splits = SplitSpec::Explicit {
        train: NodeSet::from_mask(&ds.train).into_vec(),
        val: NodeSet::from_mask(&ds.val).into_vec(),
        test: NodeSet::from_mask(&ds.test).into_vec(),
    };
    serde_json::to_writer(create(dir.join("splits.json"))?, &splits)?;

    let meta = Meta {
        name: Some(ds.name.clone()),
        metric: Some(ds.metric),
        pipeline_override: ds.pipeline_override,
        num_classes: match ds.labels {
            Labels::Single { num_classes, .. } => Some(num_classes),
            Labels::Multi { .. } => None,
        },
    };
    serde_json::to_writer_pretty(create(dir.join("meta.json"))?, &meta)?;
    Ok(())
}
