//! Text and binary file formats.
//!
//! Text formats are meant for diffing and hand-written fixtures: edge lists
//! are whitespace-separated pairs, everything tabular is CSV keyed by
//! `node_id`, and `#` starts a comment. Floats are written with Rust's
//! shortest round-trip formatting, so save/load is bit-exact.
//!
//! Binary formats are little-endian and start with an 8-byte magic.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use gck_core::mlp::{Layer, Mlp};
use gck_core::{
    AttributeSet, CentralityScores, Graph, Matrix, MergeMap, NodeRemap, QuantizedBlock, SignTensor,
    Split, TaskKind,
};
use serde::Serialize;

use crate::error::{Error, Result};

const SIGN_MAGIC: &[u8; 8] = b"GCKSIGN1";
const MODEL_MAGIC: &[u8; 8] = b"GCKMLP01";

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<BufReader<File>>> {
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(open(path)?))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.position() {
        Some(pos) => Error::at_line(path, pos.line() as usize, &e),
        None => Error::data(format!("{}: {e}", path.display())),
    }
}

fn line_of(record: &csv::StringRecord) -> usize {
    record.position().map_or(0, |p| p.line() as usize)
}

fn parse_field<T: std::str::FromStr>(path: &Path, record: &csv::StringRecord, i: usize, what: &str) -> Result<T> {
    let raw = record.get(i).unwrap_or("");
    raw.parse()
        .map_err(|_| Error::at_line(path, line_of(record), format!("bad {what} `{raw}`")))
}

/// Reads the header, checking the first column is `node_id`.
fn header(path: &Path, reader: &mut csv::Reader<BufReader<File>>) -> Result<Vec<String>> {
    let h = reader.headers().map_err(|e| csv_error(path, e))?;
    if h.get(0) != Some("node_id") {
        return Err(Error::at_line(path, 1, "header must start with `node_id`"));
    }
    Ok(h.iter().map(str::to_string).collect())
}

/// Places rows keyed by node id, insisting that ids cover `0..rows` once.
fn keyed_rows<T: Clone>(path: &Path, rows: Vec<(usize, usize, T)>) -> Result<Vec<T>> {
    let n = rows.len();
    let mut out: Vec<Option<T>> = vec![None; n];
    for (line, id, row) in rows {
        if id >= n {
            return Err(Error::at_line(path, line, format!("node id {id} out of range for {n} rows")));
        }
        if out[id].is_some() {
            return Err(Error::at_line(path, line, format!("node id {id} appears twice")));
        }
        out[id] = Some(row);
    }
    Ok(out.into_iter().map(|r| r.expect("ids are a permutation")).collect())
}

// ---------------------------------------------------------------- edge lists

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeList {
    /// Node count from a `# nodes=N` header, if present.
    pub declared_nodes: Option<usize>,
    pub edges: Vec<(usize, usize)>,
}

impl EdgeList {
    /// Declared count, else one past the largest id.
    pub fn inferred_nodes(&self) -> usize {
        self.declared_nodes.unwrap_or_else(|| {
            self.edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0)
        })
    }
}

pub fn read_edges(path: &Path) -> Result<EdgeList> {
    let reader = open(path)?;
    let mut declared_nodes = None;
    let mut edges = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if let Some(comment) = line.strip_prefix('#') {
            for token in comment.split_whitespace() {
                if let Some(n) = token.strip_prefix("nodes=") {
                    let n = n
                        .parse()
                        .map_err(|_| Error::at_line(path, line_no, format!("bad node count `{n}`")))?;
                    declared_nodes = Some(n);
                }
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let id = |part: Option<&str>| -> Result<usize> {
            let raw = part.ok_or_else(|| Error::at_line(path, line_no, "expected two node ids"))?;
            raw.parse()
                .map_err(|_| Error::at_line(path, line_no, format!("bad node id `{raw}`")))
        };
        let (u, v) = (id(parts.next())?, id(parts.next())?);
        if parts.next().is_some() {
            return Err(Error::at_line(path, line_no, "expected exactly two node ids"));
        }
        if let Some(n) = declared_nodes {
            if u >= n || v >= n {
                return Err(Error::at_line(path, line_no, format!("node id out of range for nodes={n}")));
            }
        }
        edges.push((u, v));
    }
    Ok(EdgeList { declared_nodes, edges })
}

/// Writes `# nodes=N edges=M` and one `u v` line per edge (`u < v`),
/// over alive nodes renumbered compactly.
pub fn write_edges(path: &Path, graph: &Graph) -> Result<()> {
    let (g, _) = graph.compact();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "# nodes={} edges={}", g.num_nodes(), g.edge_count()).map_err(io)?;
    for (u, v) in g.edges() {
        writeln!(w, "{u} {v}").map_err(io)?;
    }
    finish(path, w)
}

// ------------------------------------------------------------------ features

pub fn read_features(path: &Path) -> Result<Matrix> {
    let mut reader = csv_reader(path)?;
    let cols = header(path, &mut reader)?.len() - 1;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let id = parse_field(path, &record, 0, "node id")?;
        let values = (1..=cols)
            .map(|i| parse_field::<f64>(path, &record, i, "feature value"))
            .collect::<Result<Vec<_>>>()?;
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::at_line(path, line_of(&record), format!("non-finite feature {bad}")));
        }
        rows.push((line_of(&record), id, values));
    }
    let rows = keyed_rows(path, rows)?;
    let n = rows.len();
    Matrix::from_vec(n, cols, rows.concat()).map_err(Error::from)
}

pub fn write_features(path: &Path, x: &Matrix) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    write!(w, "node_id").map_err(io)?;
    for c in 0..x.cols() {
        write!(w, ",f{c}").map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    for (r, row) in x.row_iter().enumerate() {
        write!(w, "{r}").map_err(io)?;
        for v in row {
            write!(w, ",{v}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    finish(path, w)
}

// -------------------------------------------------------------------- labels

/// Label matrix plus the task it implies.
///
/// `node_id,label` files hold one class index per node (multi-class); the
/// class count comes from a `# classes=L` comment or the largest index.
/// Any other header lists one 0/1 column per label (multi-label).
pub fn read_labels(path: &Path) -> Result<(Matrix, TaskKind)> {
    let declared = {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut found = None;
        for (i, line) in text.lines().enumerate() {
            if let Some(v) = line.trim().strip_prefix('#').and_then(|c| c.trim().strip_prefix("classes=")) {
                found = Some(
                    v.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::at_line(path, i + 1, format!("bad class count `{v}`")))?,
                );
            }
        }
        found
    };
    let mut reader = csv_reader(path)?;
    let head = header(path, &mut reader)?;
    if head.len() == 2 && head[1] == "label" {
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| csv_error(path, e))?;
            let id = parse_field(path, &record, 0, "node id")?;
            let class: usize = parse_field(path, &record, 1, "class index")?;
            if declared.is_some_and(|l| class >= l) {
                return Err(Error::at_line(
                    path,
                    line_of(&record),
                    format!("class {class} outside classes={}", declared.unwrap_or(0)),
                ));
            }
            rows.push((line_of(&record), id, class));
        }
        let classes = keyed_rows(path, rows)?;
        let count = declared.unwrap_or_else(|| classes.iter().max().map_or(1, |m| m + 1));
        Ok((AttributeSet::one_hot(&classes, count)?, TaskKind::MultiClass))
    } else {
        let cols = head.len() - 1;
        if cols == 0 {
            return Err(Error::at_line(path, 1, "no label columns"));
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| csv_error(path, e))?;
            let id = parse_field(path, &record, 0, "node id")?;
            let values = (1..=cols)
                .map(|i| match record.get(i) {
                    Some("0") => Ok(0.0),
                    Some("1") => Ok(1.0),
                    other => Err(Error::at_line(
                        path,
                        line_of(&record),
                        format!("label must be 0 or 1, got `{}`", other.unwrap_or("")),
                    )),
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push((line_of(&record), id, values));
        }
        let rows = keyed_rows(path, rows)?;
        let n = rows.len();
        Ok((Matrix::from_vec(n, cols, rows.concat())?, TaskKind::MultiLabel))
    }
}

pub fn write_labels(path: &Path, y: &Matrix, task: TaskKind) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    match task {
        TaskKind::MultiClass => {
            writeln!(w, "# classes={}", y.cols()).map_err(io)?;
            writeln!(w, "node_id,label").map_err(io)?;
            for (r, row) in y.row_iter().enumerate() {
                let class = row.iter().position(|&v| v == 1.0).unwrap_or(0);
                writeln!(w, "{r},{class}").map_err(io)?;
            }
        }
        TaskKind::MultiLabel => {
            write!(w, "node_id").map_err(io)?;
            for c in 0..y.cols() {
                write!(w, ",l{c}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
            for (r, row) in y.row_iter().enumerate() {
                write!(w, "{r}").map_err(io)?;
                for v in row {
                    write!(w, ",{}", *v as u8).map_err(io)?;
                }
                writeln!(w).map_err(io)?;
            }
        }
    }
    finish(path, w)
}

// --------------------------------------------------------------------- masks

fn split_name(s: Split) -> &'static str {
    match s {
        Split::Train => "train",
        Split::Val => "val",
        Split::Test => "test",
        Split::Unassigned => "none",
    }
}

/// `node_id,split` rows; unlisted nodes stay unassigned. Listing a node
/// twice is a mask overlap and rejected.
pub fn read_masks(path: &Path, num_nodes: usize) -> Result<Vec<Split>> {
    let mut reader = csv_reader(path)?;
    let head = header(path, &mut reader)?;
    if head.len() != 2 {
        return Err(Error::at_line(path, 1, "expected header `node_id,split`"));
    }
    let mut split = vec![None; num_nodes];
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = line_of(&record);
        let id: usize = parse_field(path, &record, 0, "node id")?;
        let which = match record.get(1).unwrap_or("") {
            "train" => Split::Train,
            "val" => Split::Val,
            "test" => Split::Test,
            other => return Err(Error::at_line(path, line, format!("unknown split `{other}`"))),
        };
        let slot = split
            .get_mut(id)
            .ok_or_else(|| Error::at_line(path, line, format!("node id {id} out of range for {num_nodes} nodes")))?;
        if let Some(prev) = *slot {
            return Err(Error::at_line(
                path,
                line,
                format!("masks overlap: node {id} is in both {} and {}", split_name(prev), split_name(which)),
            ));
        }
        *slot = Some(which);
    }
    Ok(split.into_iter().map(|s| s.unwrap_or_default()).collect())
}

pub fn write_masks(path: &Path, split: &[Split]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "node_id,split").map_err(io)?;
    for (v, &s) in split.iter().enumerate() {
        if s != Split::Unassigned {
            writeln!(w, "{v},{}", split_name(s)).map_err(io)?;
        }
    }
    finish(path, w)
}

// ------------------------------------------------------ per-node result CSVs

/// `node_id,score` with the measure and its settings in a header comment.
/// Ids are mapped through `remap` back to dataset numbering.
pub fn write_scores(path: &Path, scores: &CentralityScores, remap: &NodeRemap) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "# measure={}", scores.describe()).map_err(io)?;
    writeln!(w, "node_id,score").map_err(io)?;
    for (&v, s) in scores.nodes.iter().zip(&scores.values) {
        writeln!(w, "{},{s}", remap.to_original(v)).map_err(io)?;
    }
    finish(path, w)
}

/// Two-column integer CSV in file order, e.g. `node_id,cluster`.
fn read_pairs<T: std::str::FromStr>(path: &Path, second: &str) -> Result<Vec<(usize, T)>> {
    let mut reader = csv_reader(path)?;
    let head = header(path, &mut reader)?;
    if head.len() != 2 || head[1] != second {
        return Err(Error::at_line(path, 1, format!("expected header `node_id,{second}`")));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        out.push((
            parse_field(path, &record, 0, "node id")?,
            parse_field(path, &record, 1, second)?,
        ));
    }
    Ok(out)
}

pub fn read_scores(path: &Path) -> Result<Vec<(usize, f64)>> {
    read_pairs(path, "score")
}

pub fn write_clusters(path: &Path, cluster_of: &[usize], remap: &NodeRemap) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "node_id,cluster").map_err(io)?;
    for (v, c) in cluster_of.iter().enumerate() {
        writeln!(w, "{},{c}", remap.to_original(v)).map_err(io)?;
    }
    finish(path, w)
}

pub fn read_clusters(path: &Path) -> Result<Vec<(usize, usize)>> {
    read_pairs(path, "cluster")
}

/// `node_id,survivor`; the survivor is blank for nodes dropped outright.
pub fn write_merge_map(path: &Path, map: &MergeMap, remap: &NodeRemap) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "node_id,survivor").map_err(io)?;
    for (v, s) in map.as_slice().iter().enumerate() {
        match s {
            Some(s) => writeln!(w, "{},{}", remap.to_original(v), remap.to_original(*s)),
            None => writeln!(w, "{},", remap.to_original(v)),
        }
        .map_err(io)?;
    }
    finish(path, w)
}

/// `node_id,original`: compact collapsed id to dataset id.
pub fn write_survivors(path: &Path, originals: &[usize]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "node_id,original").map_err(io)?;
    for (v, o) in originals.iter().enumerate() {
        writeln!(w, "{v},{o}").map_err(io)?;
    }
    finish(path, w)
}

pub fn read_survivors(path: &Path) -> Result<Vec<(usize, usize)>> {
    read_pairs(path, "original")
}

pub fn read_merge_map(path: &Path) -> Result<Vec<(usize, Option<usize>)>> {
    let mut reader = csv_reader(path)?;
    header(path, &mut reader)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let id = parse_field(path, &record, 0, "node id")?;
        let survivor = match record.get(1) {
            None | Some("") => None,
            Some(_) => Some(parse_field(path, &record, 1, "survivor id")?),
        };
        out.push((id, survivor));
    }
    Ok(out)
}

// ------------------------------------------------------------------- binary

fn put_u64(buf: &mut Vec<u8>, v: usize) {
    buf.extend_from_slice(&(v as u64).to_le_bytes());
}

fn put_f64s(buf: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

/// Cursor over a binary file with bounds-checked reads.
struct Bytes<'a> {
    path: &'a Path,
    data: &'a [u8],
    at: usize,
}

impl<'a> Bytes<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.data.len()).ok_or_else(|| {
            Error::data(format!("{}: truncated at byte {}", self.path.display(), self.at))
        })?;
        let out = &self.data[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn magic(&mut self, magic: &[u8; 8]) -> Result<()> {
        if self.take(8)? != magic {
            return Err(Error::data(format!(
                "{}: not a {} file",
                self.path.display(),
                String::from_utf8_lossy(magic)
            )));
        }
        Ok(())
    }

    fn u64(&mut self) -> Result<usize> {
        let raw = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(raw).map_err(|_| Error::data(format!("{}: size {raw} too large", self.path.display())))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::data("size overflow"))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn end(&self) -> Result<()> {
        if self.at != self.data.len() {
            return Err(Error::data(format!(
                "{}: {} trailing bytes",
                self.path.display(),
                self.data.len() - self.at
            )));
        }
        Ok(())
    }
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut data = Vec::new();
    open(path)?.read_to_end(&mut data).map_err(|e| Error::io(path, e))?;
    Ok(data)
}

fn write_all(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(bytes).map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

/// Magic, then `|V|`, `F`, `hops` as u64, then the row-major f64 data.
pub fn write_sign(path: &Path, z: &SignTensor) -> Result<()> {
    let mut buf = Vec::with_capacity(32 + 8 * z.z.as_slice().len());
    buf.extend_from_slice(SIGN_MAGIC);
    put_u64(&mut buf, z.z.rows());
    put_u64(&mut buf, z.feature_dim);
    put_u64(&mut buf, z.hops);
    put_f64s(&mut buf, z.z.as_slice());
    write_all(path, &buf)
}

pub fn read_sign(path: &Path) -> Result<SignTensor> {
    let data = read_all(path)?;
    let mut b = Bytes { path, data: &data, at: 0 };
    b.magic(SIGN_MAGIC)?;
    let (rows, f, hops) = (b.u64()?, b.u64()?, b.u64()?);
    let cols = hops
        .checked_add(1)
        .and_then(|h| h.checked_mul(f))
        .ok_or_else(|| Error::data("header sizes overflow"))?;
    let values = b.f64s(rows.checked_mul(cols).ok_or_else(|| Error::data("header sizes overflow"))?)?;
    b.end()?;
    Ok(SignTensor {
        z: Matrix::from_vec(rows, cols, values)?,
        hops,
        feature_dim: f,
    })
}

pub fn write_sign_csv(path: &Path, z: &SignTensor) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    write!(w, "node_id").map_err(io)?;
    for k in 0..=z.hops {
        for c in 0..z.feature_dim {
            write!(w, ",h{k}_f{c}").map_err(io)?;
        }
    }
    writeln!(w).map_err(io)?;
    for (r, row) in z.z.row_iter().enumerate() {
        write!(w, "{r}").map_err(io)?;
        for v in row {
            write!(w, ",{v}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    finish(path, w)
}

/// Magic, task (0 multi-class, 1 multi-label), layer count, then per layer
/// `in`, `out`, the `in x out` weights row-major and `out` biases.
pub fn write_model(path: &Path, model: &Mlp) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MODEL_MAGIC);
    put_u64(&mut buf, matches!(model.task(), TaskKind::MultiLabel) as usize);
    put_u64(&mut buf, model.layers().len());
    for layer in model.layers() {
        put_u64(&mut buf, layer.weights.rows());
        put_u64(&mut buf, layer.weights.cols());
        put_f64s(&mut buf, layer.weights.as_slice());
        put_f64s(&mut buf, &layer.bias);
    }
    write_all(path, &buf)
}

pub fn read_model(path: &Path) -> Result<Mlp> {
    let data = read_all(path)?;
    let mut b = Bytes { path, data: &data, at: 0 };
    b.magic(MODEL_MAGIC)?;
    let task = match b.u64()? {
        0 => TaskKind::MultiClass,
        1 => TaskKind::MultiLabel,
        t => return Err(Error::data(format!("{}: unknown task tag {t}", path.display()))),
    };
    let count = b.u64()?;
    let mut layers = Vec::new();
    for _ in 0..count {
        let (rows, cols) = (b.u64()?, b.u64()?);
        let n = rows.checked_mul(cols).ok_or_else(|| Error::data("layer size overflow"))?;
        let weights = Matrix::from_vec(rows, cols, b.f64s(n)?)?;
        let bias = b.f64s(cols)?;
        layers.push(Layer { weights, bias });
    }
    b.end()?;
    Ok(Mlp::from_layers(layers, task)?)
}

pub fn write_history(path: &Path, history: &[gck_core::mlp::EpochRecord]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "epoch,train_loss,val_accuracy").map_err(io)?;
    for r in history {
        match r.val_accuracy {
            Some(a) => writeln!(w, "{},{},{a}", r.epoch, r.train_loss),
            None => writeln!(w, "{},{},", r.epoch, r.train_loss),
        }
        .map_err(io)?;
    }
    finish(path, w)
}

#[derive(Serialize)]
struct QuantGroup {
    min: f64,
    range: f64,
    codes: String,
}

#[derive(Serialize)]
struct QuantDump {
    bits: u8,
    group_size: usize,
    rows: usize,
    cols: usize,
    groups: Vec<QuantGroup>,
}

/// Debug view of a quantized block: per-group statistics and codes as hex.
pub fn quant_debug_json(q: &QuantizedBlock) -> Result<String> {
    let codes = q.codes();
    let groups = q
        .mins()
        .iter()
        .zip(q.ranges())
        .zip(codes.chunks(q.group_size().max(1)))
        .map(|((&min, &range), chunk)| QuantGroup {
            min,
            range,
            codes: chunk.iter().map(|c| format!("{c:02x}")).collect(),
        })
        .collect();
    let (rows, cols) = q.shape();
    let dump = QuantDump {
        bits: q.bits(),
        group_size: q.group_size(),
        rows,
        cols,
        groups,
    };
    serde_json::to_string_pretty(&dump).map_err(|e| Error::runtime(e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::runtime(e.to_string()))?;
    text.push('\n');
    write_all(path, text.as_bytes())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_all(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn edges_parse_with_comments_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "e.txt", "# nodes=4 edges=2\n0 1\n\n# note\n 2   3 \n");
        let e = read_edges(&p).unwrap();
        assert_eq!(e.declared_nodes, Some(4));
        assert_eq!(e.edges, [(0, 1), (2, 3)]);
    }

    #[test]
    fn edge_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "e.txt", "0 1\n1 x\n");
        let msg = read_edges(&p).unwrap_err().to_string();
        assert!(msg.ends_with("e.txt:2: bad node id `x`"), "{msg}");
        let p = write(dir.path(), "e.txt", "# nodes=2\n0 5\n");
        assert!(read_edges(&p).unwrap_err().to_string().contains(":2:"));
    }

    #[test]
    fn features_reorder_by_id() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "f.csv", "node_id,a,b\n1,3,4\n0,1.5,-2\n");
        let x = read_features(&p).unwrap();
        assert_eq!(x.as_slice(), [1.5, -2.0, 3.0, 4.0]);
        let p = write(dir.path(), "f.csv", "node_id,a\n0,1\n0,2\n");
        assert!(read_features(&p).unwrap_err().to_string().contains("appears twice"));
    }

    #[test]
    fn labels_both_forms() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "l.csv", "# classes=3\nnode_id,label\n0,1\n1,0\n");
        let (y, task) = read_labels(&p).unwrap();
        assert_eq!(task, TaskKind::MultiClass);
        assert_eq!(y.shape(), (2, 3));
        let p = write(dir.path(), "l.csv", "node_id,a,b\n0,1,1\n1,0,0\n");
        let (y, task) = read_labels(&p).unwrap();
        assert_eq!(task, TaskKind::MultiLabel);
        assert_eq!(y.as_slice(), [1.0, 1.0, 0.0, 0.0]);
        let p = write(dir.path(), "l.csv", "node_id,a\n0,2\n");
        assert!(read_labels(&p).unwrap_err().to_string().contains(":2:"));
    }

    #[test]
    fn mask_overlap_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "m.csv", "node_id,split\n0,train\n1,val\n0,test\n");
        let msg = read_masks(&p, 2).unwrap_err().to_string();
        assert!(msg.contains("overlap") && msg.contains(":4:"), "{msg}");
        let p = write(dir.path(), "m.csv", "node_id,split\n0,train\n");
        assert_eq!(read_masks(&p, 2).unwrap(), [Split::Train, Split::Unassigned]);
    }

    #[test]
    fn binary_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let z = SignTensor {
            z: Matrix::from_vec(2, 4, vec![1.0, -0.0, 1e-300, 3.5, 0.1, 0.2, 0.3, f64::MAX]).unwrap(),
            hops: 1,
            feature_dim: 2,
        };
        let p = dir.path().join("z.bin");
        write_sign(&p, &z).unwrap();
        assert_eq!(read_sign(&p).unwrap(), z);
        assert_eq!(std::fs::metadata(&p).unwrap().len(), 32 + 64);

        let model = Mlp::new(&[3, 4, 2], TaskKind::MultiLabel, 9).unwrap();
        let p = dir.path().join("m.bin");
        write_model(&p, &model).unwrap();
        assert_eq!(read_model(&p).unwrap(), model);

        let mut bytes = std::fs::read(&p).unwrap();
        bytes.pop();
        std::fs::write(&p, &bytes).unwrap();
        assert!(read_model(&p).unwrap_err().to_string().contains("truncated"));
    }

    #[test]
    fn quant_dump_lists_groups() {
        let h = Matrix::from_vec(2, 2, vec![0.0, 3.0, 1.0, 1.0]).unwrap();
        let q = gck_core::quant::quantize(&h, 2, 2).unwrap();
        let v: serde_json::Value = serde_json::from_str(&quant_debug_json(&q).unwrap()).unwrap();
        assert_eq!(v["groups"][0]["codes"], "0003");
        assert_eq!(v["groups"][1]["range"], 0.0);
    }
}
