//! Readers and writers for every on-disk format.
//!
//! Binary layouts are little-endian throughout:
//!
//! * `fvecs` / `dvecs`: per vector, an `i32` dim followed by `dim` `f32`/`f64` values.
//! * `bvecs-packed`: per code, an `i32` byte count `b = bits / 8` followed by
//!   `b` bytes; bit `j` of the code is bit `j % 8` of byte `j / 8`.
//! * `ficosim`: `"FICOSIM1"`, `u64` rows, `u64` cols, `rows * cols` `f32`
//!   scores row-major, then row IDs and column IDs as `u64`.
//!
//! Text formats are JSON Lines (labels, groups, ranked results), JSON
//! (split) and canonical JSON (reports). ID sidecars are plain text, one decimal ID per line.
//!
//! Readers reject malformed input; they never repair it.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{FicoError, Result};
use crate::model::{
    words_for_bits, BinaryCodeSet, Dtype, EmbeddingSet, EvalReport, InstanceGroups, LabelMatrix,
    RankedRetrieval, SimilarityMatrix, Split, Values, MISSING,
};

pub const FICOSIM_MAGIC: &[u8; 8] = b"FICOSIM1";

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(|f| BufReader::with_capacity(1 << 20, f))
        .map_err(|e| FicoError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(|f| BufWriter::with_capacity(1 << 20, f))
        .map_err(|e| FicoError::io(path, e))
}

/// Reads exactly `buf.len()` bytes. `Ok(false)` on clean EOF before the
/// first byte; a short read after that is a truncation error.
fn read_record(r: &mut impl Read, buf: &mut [u8], path: &Path, what: &str) -> Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(FicoError::io(path, e)),
        }
    }
    if filled == 0 && !buf.is_empty() {
        return Ok(false);
    }
    if filled < buf.len() {
        return Err(FicoError::format(format!("truncated {what}")));
    }
    Ok(true)
}

pub fn read_ids(path: &Path) -> Result<Vec<u64>> {
    let r = open(path)?;
    let mut ids = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| FicoError::io(path, e))?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        ids.push(t.parse::<u64>().map_err(|_| {
            FicoError::format(format!("malformed id {t:?} at line {}", i + 1))
        })?);
    }
    Ok(ids)
}

pub fn write_ids(ids: &[u64], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    for id in ids {
        writeln!(w, "{id}").map_err(|e| FicoError::io(path, e))?;
    }
    w.flush().map_err(|e| FicoError::io(path, e))
}

/// Conventional sidecar location for a data file's IDs: `<path>.ids`.
pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".ids");
    s.into()
}

fn is_sequential(ids: &[u64]) -> bool {
    ids.iter().enumerate().all(|(i, &id)| id == i as u64)
}

/// Reads fvecs (`Dtype::F32`) or dvecs (`Dtype::F64`).
pub fn read_vectors(path: &Path, dtype: Dtype, ids: Option<&[u64]>) -> Result<EmbeddingSet> {
    let mut r = open(path)?;
    let elem = dtype.size_bytes();
    let mut header = [0u8; 4];
    let mut dim: Option<usize> = None;
    let mut raw = Vec::new();
    let mut buf = Vec::new();
    let mut record = 0usize;
    while read_record(&mut r, &mut header, path, &format!("header at record {record}"))? {
        let d = i32::from_le_bytes(header);
        if d <= 0 {
            return Err(FicoError::format(format!(
                "non-positive dim {d} at record {record}"
            )));
        }
        let d = d as usize;
        match dim {
            None => dim = Some(d),
            Some(prev) if prev != d => {
                return Err(FicoError::format(format!(
                    "inconsistent dim at record {record}: {d} after {prev}"
                )))
            }
            _ => {}
        }
        buf.resize(d * elem, 0);
        if !read_record(&mut r, &mut buf, path, &format!("record {record}"))? {
            return Err(FicoError::format(format!("truncated record {record}")));
        }
        raw.extend_from_slice(&buf);
        record += 1;
    }
    let Some(dim) = dim else {
        log::warn!("{}: empty vector file", path.display());
        let values = match dtype {
            Dtype::F32 => Values::F32(Vec::new()),
            Dtype::F64 => Values::F64(Vec::new()),
        };
        return EmbeddingSet::new(Vec::new(), 1, values);
    };
    let values = match dtype {
        Dtype::F32 => Values::F32(
            raw.chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect(),
        ),
        Dtype::F64 => Values::F64(
            raw.chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect(),
        ),
    };
    let ids = match ids {
        Some(ids) if ids.len() != record => {
            return Err(FicoError::format(format!(
                "{} ids for {record} vectors",
                ids.len()
            )))
        }
        Some(ids) => ids.to_vec(),
        None => (0..record as u64).collect(),
    };
    let set = EmbeddingSet::new(ids, dim, values)?;
    set.validate().into_result()?;
    Ok(set)
}

/// Writes fvecs or dvecs according to the set's dtype. Non-sequential IDs
/// are written to the `<path>.ids` sidecar.
pub fn write_vectors(set: &EmbeddingSet, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let d = set.dim();
    let dim_bytes = (d as i32).to_le_bytes();
    let io = |e| FicoError::io(path, e);
    for i in 0..set.len() {
        w.write_all(&dim_bytes).map_err(io)?;
        match set.values() {
            Values::F32(v) => {
                for x in &v[i * d..(i + 1) * d] {
                    w.write_all(&x.to_le_bytes()).map_err(io)?;
                }
            }
            Values::F64(v) => {
                for x in &v[i * d..(i + 1) * d] {
                    w.write_all(&x.to_le_bytes()).map_err(io)?;
                }
            }
        }
    }
    w.flush().map_err(io)?;
    if !is_sequential(set.ids()) {
        write_ids(set.ids(), &sidecar_path(path))?;
    }
    Ok(())
}

pub fn read_codes(path: &Path, code_bits: usize, ids: Option<&[u64]>) -> Result<BinaryCodeSet> {
    if code_bits == 0 || !code_bits.is_multiple_of(8) {
        return Err(FicoError::invalid(format!(
            "code_bits must be a positive multiple of 8, got {code_bits}"
        )));
    }
    let bytes = code_bits / 8;
    let per = words_for_bits(code_bits);
    let mut r = open(path)?;
    let mut header = [0u8; 4];
    let mut buf = vec![0u8; bytes];
    let mut words = Vec::new();
    let mut record = 0usize;
    while read_record(&mut r, &mut header, path, &format!("header at record {record}"))? {
        let b = i32::from_le_bytes(header);
        if b as i64 * 8 != code_bits as i64 {
            return Err(FicoError::format(format!(
                "code width mismatch at record {record}: {b} bytes, expected {bytes}"
            )));
        }
        if !read_record(&mut r, &mut buf, path, &format!("record {record}"))? {
            return Err(FicoError::format(format!("truncated record {record}")));
        }
        let start = words.len();
        words.resize(start + per, 0u64);
        for (j, &byte) in buf.iter().enumerate() {
            words[start + j / 8] |= (byte as u64) << (8 * (j % 8));
        }
        record += 1;
    }
    let ids = match ids {
        Some(ids) if ids.len() != record => {
            return Err(FicoError::format(format!(
                "{} ids for {record} codes",
                ids.len()
            )))
        }
        Some(ids) => ids.to_vec(),
        None => (0..record as u64).collect(),
    };
    let set = BinaryCodeSet::new(ids, code_bits, words)?;
    set.validate().into_result()?;
    Ok(set)
}

pub fn write_codes(codes: &BinaryCodeSet, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let bytes = codes.code_bits() / 8;
    let io = |e| FicoError::io(path, e);
    let header = (bytes as i32).to_le_bytes();
    let mut buf = vec![0u8; bytes];
    for i in 0..codes.len() {
        let code = codes.code(i);
        for (j, b) in buf.iter_mut().enumerate() {
            *b = (code[j / 8] >> (8 * (j % 8))) as u8;
        }
        w.write_all(&header).map_err(io)?;
        w.write_all(&buf).map_err(io)?;
    }
    w.flush().map_err(io)?;
    if !is_sequential(codes.ids()) {
        write_ids(codes.ids(), &sidecar_path(path))?;
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelLine {
    id: u64,
    labels: Vec<i64>,
}

/// Reads labels-jsonl. `C` defaults to `1 + max label`.
pub fn read_labels(path: &Path, num_categories: Option<u32>) -> Result<LabelMatrix> {
    let r = open(path)?;
    let mut entries = BTreeMap::new();
    for (i, line) in r.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| FicoError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: LabelLine = serde_json::from_str(&line)
            .map_err(|e| FicoError::format(format!("malformed line {lineno}: {e}")))?;
        let mut labels = Vec::with_capacity(parsed.labels.len());
        for l in parsed.labels {
            if l < 0 {
                return Err(FicoError::format(format!(
                    "negative label {l} at line {lineno}"
                )));
            }
            labels.push(u32::try_from(l).map_err(|_| {
                FicoError::format(format!("label {l} too large at line {lineno}"))
            })?);
        }
        if entries.insert(parsed.id, labels).is_some() {
            return Err(FicoError::format(format!(
                "duplicate id {} at line {lineno}",
                parsed.id
            )));
        }
    }
    let m = match num_categories {
        Some(c) => LabelMatrix::new(entries, c),
        None => LabelMatrix::with_inferred_categories(entries),
    };
    for w in m.validate().into_result()? {
        log::warn!("{}: {w}", path.display());
    }
    Ok(m)
}

pub fn write_labels(labels: &LabelMatrix, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| FicoError::io(path, e);
    for (id, l) in labels.entries() {
        let line = serde_json::json!({"id": id, "labels": l});
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupLine {
    image_id: u64,
    caption_ids: Vec<u64>,
}

pub fn read_groups(path: &Path) -> Result<InstanceGroups> {
    let r = open(path)?;
    let mut entries = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| FicoError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let g: GroupLine = serde_json::from_str(&line)
            .map_err(|e| FicoError::format(format!("malformed line {}: {e}", i + 1)))?;
        entries.push((g.image_id, g.caption_ids));
    }
    let groups = InstanceGroups::from_entries(entries);
    groups.validate().into_result()?;
    Ok(groups)
}

pub fn write_groups(groups: &InstanceGroups, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| FicoError::io(path, e);
    for (img, caps) in groups.groups() {
        let line = serde_json::json!({"image_id": img, "caption_ids": caps});
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Top-k results by candidate ID, as read back from ranked JSON Lines.
/// Unfilled slots hold `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedFile {
    pub k: usize,
    pub query_ids: Vec<u64>,
    pub ids: Vec<Option<u64>>,
    pub scores: Vec<Option<f32>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RankedLine {
    query: u64,
    ids: Vec<Option<u64>>,
    scores: Vec<Option<f64>>,
}

/// One line per query: `{"ids":[..],"query":q,"scores":[..]}` with
/// candidate IDs resolved through `candidate_ids`; unfilled slots are null.
pub fn write_ranked(r: &RankedRetrieval, candidate_ids: &[u64], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| FicoError::io(path, e);
    for q in 0..r.n_queries() {
        let ids: Vec<Value> = r
            .row(q)
            .iter()
            .map(|&c| if c == MISSING { Value::Null } else { Value::from(candidate_ids[c as usize]) })
            .collect();
        let scores: Vec<Value> = r
            .row(q)
            .iter()
            .zip(r.row_scores(q))
            .map(|(&c, &s)| if c == MISSING { Value::Null } else { Value::from(s as f64) })
            .collect();
        let line = serde_json::json!({"query": r.query_ids()[q], "ids": ids, "scores": scores});
        writeln!(w, "{}", canonical_json(&line)?).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_ranked(path: &Path) -> Result<RankedFile> {
    let r = open(path)?;
    let mut out = RankedFile { k: 0, query_ids: Vec::new(), ids: Vec::new(), scores: Vec::new() };
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| FicoError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let l: RankedLine = serde_json::from_str(&line)
            .map_err(|e| FicoError::format(format!("malformed line {}: {e}", i + 1)))?;
        if out.query_ids.is_empty() {
            out.k = l.ids.len();
        }
        if l.ids.len() != out.k || l.scores.len() != out.k {
            return Err(FicoError::format(format!("line {} has depth {}, expected {}", i + 1, l.ids.len(), out.k)));
        }
        out.query_ids.push(l.query);
        out.ids.extend(l.ids);
        out.scores.extend(l.scores.into_iter().map(|s| s.map(|x| x as f32)));
    }
    Ok(out)
}

pub fn read_split(path: &Path) -> Result<Split> {
    let r = open(path)?;
    let split: Split = serde_json::from_reader(r)
        .map_err(|e| FicoError::format(format!("malformed split-json: {e}")))?;
    split.validate(None).into_result()?;
    Ok(split)
}

pub fn write_split(split: &Split, path: &Path) -> Result<()> {
    let v = serde_json::to_value(split).expect("split serializes");
    write_text(path, &canonical_json(&v)?)
}

pub fn read_sim(path: &Path) -> Result<SimilarityMatrix> {
    let mut r = open(path)?;
    let mut header = [0u8; 24];
    if !read_record(&mut r, &mut header, path, "header")? {
        return Err(FicoError::format("truncated header"));
    }
    if &header[..8] != FICOSIM_MAGIC {
        return Err(FicoError::format("bad magic"));
    }
    let rows = u64::from_le_bytes(header[8..16].try_into().unwrap());
    let cols = u64::from_le_bytes(header[16..24].try_into().unwrap());
    let payload = rows
        .checked_mul(cols)
        .and_then(|rc| rc.checked_mul(4))
        .and_then(|s| s.checked_add(8 * (rows + cols)))
        .ok_or_else(|| FicoError::format("header dimensions overflow"))?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest).map_err(|e| FicoError::io(path, e))?;
    if (rest.len() as u64) < payload {
        return Err(FicoError::format("truncated payload"));
    }
    if rest.len() as u64 > payload {
        return Err(FicoError::format("trailing bytes after payload"));
    }
    let (rows, cols) = (rows as usize, cols as usize);
    let n = rows * cols;
    let scores = rest[..4 * n]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let mut ids = rest[4 * n..]
        .chunks_exact(8)
        .map(|b| u64::from_le_bytes(b.try_into().unwrap()));
    let query_ids = ids.by_ref().take(rows).collect();
    let candidate_ids = ids.collect();
    let m = SimilarityMatrix::new(query_ids, candidate_ids, scores, "ficosim")?;
    m.validate().into_result()?;
    Ok(m)
}

pub fn write_sim(m: &SimilarityMatrix, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| FicoError::io(path, e);
    w.write_all(FICOSIM_MAGIC).map_err(io)?;
    w.write_all(&(m.n_queries() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&(m.n_candidates() as u64).to_le_bytes()).map_err(io)?;
    for s in m.scores() {
        w.write_all(&s.to_le_bytes()).map_err(io)?;
    }
    for id in m.query_ids().iter().chain(m.candidate_ids()) {
        w.write_all(&id.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Renders a finite real with 17 significant digits, trailing zeros trimmed
/// but at least one fractional digit kept (`1.0`, `0.33333333333333331`).
pub fn format_real(x: f64) -> String {
    debug_assert!(x.is_finite());
    if x == 0.0 {
        return if x.is_sign_negative() { "-0.0" } else { "0.0" }.to_owned();
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    if (-7..17).contains(&exp) {
        if exp >= 0 {
            let int_len = exp as usize + 1;
            if digits.len() > int_len {
                out.push_str(&digits[..int_len]);
                out.push('.');
                out.push_str(&digits[int_len..]);
            } else {
                out.push_str(digits);
                out.extend(std::iter::repeat_n('0', int_len - digits.len()));
                out.push_str(".0");
            }
        } else {
            out.push_str("0.");
            out.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
            out.push_str(digits);
        }
    } else {
        out.push_str(&digits[..1]);
        out.push('.');
        out.push_str(if digits.len() > 1 { &digits[1..] } else { "0" });
        out.push_str(&format!("e{exp}"));
    }
    out
}

/// Compact JSON with sorted object keys and [`format_real`] for
/// floating-point numbers.
pub fn canonical_json(v: &Value) -> Result<String> {
    let mut out = String::new();
    render(v, &mut out)?;
    Ok(out)
}

fn render(v: &Value, out: &mut String) -> Result<()> {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else {
                let f = n.as_f64().expect("json number");
                if !f.is_finite() {
                    return Err(FicoError::invalid("non-finite number in report"));
                }
                out.push_str(&format_real(f));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string encodes")),
        Value::Array(a) => {
            out.push('[');
            for (i, x) in a.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                render(x, out)?;
            }
            out.push(']');
        }
        Value::Object(o) => {
            let mut keys: Vec<&String> = o.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("string encodes"));
                out.push(':');
                render(&o[k], out)?;
            }
            out.push('}');
        }
    }
    Ok(())
}

pub fn report_to_json(report: &EvalReport) -> Result<String> {
    report.validate().into_result()?;
    let v = serde_json::to_value(report).expect("report serializes");
    canonical_json(&v)
}

pub fn write_report(report: &EvalReport, path: &Path) -> Result<()> {
    let mut s = report_to_json(report)?;
    s.push('\n');
    write_text(path, &s)
}

pub fn read_report(path: &Path) -> Result<EvalReport> {
    let r = open(path)?;
    serde_json::from_reader(r).map_err(|e| FicoError::format(format!("malformed report: {e}")))
}

pub fn write_text(path: &Path, s: &str) -> Result<()> {
    std::fs::write(path, s).map_err(|e| FicoError::io(path, e))
}

/// SHA-256 of a file's bytes, hex encoded.
pub fn file_digest(path: &Path) -> Result<String> {
    let mut r = open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = r.read(&mut buf).map_err(|e| FicoError::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn f(x: f32) -> [u8; 4] {
        x.to_le_bytes()
    }

    #[test]
    fn reads_identity_fvecs() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("a.fvecs");
        let mut bytes = Vec::new();
        for row in [[1.0f32, 0.0], [0.0, 1.0]] {
            bytes.extend(2i32.to_le_bytes());
            bytes.extend(f(row[0]));
            bytes.extend(f(row[1]));
        }
        std::fs::write(&p, bytes).unwrap();
        let set = read_vectors(&p, Dtype::F32, None).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.values(), &Values::F32(vec![1.0, 0.0, 0.0, 1.0]));
        assert_eq!(set.ids(), &[0, 1]);
    }

    #[test]
    fn inconsistent_dim_is_rejected() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("a.fvecs");
        let mut bytes = Vec::new();
        bytes.extend(2i32.to_le_bytes());
        bytes.extend(f(1.0));
        bytes.extend(f(2.0));
        bytes.extend(3i32.to_le_bytes());
        for _ in 0..3 {
            bytes.extend(f(0.0));
        }
        std::fs::write(&p, bytes).unwrap();
        let err = read_vectors(&p, Dtype::F32, None).unwrap_err().to_string();
        assert!(err.contains("inconsistent dim at record 1"), "{err}");
    }

    #[test]
    fn truncated_and_nonpositive_vectors() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("a.fvecs");
        let mut bytes = 2i32.to_le_bytes().to_vec();
        bytes.extend(f(1.0));
        std::fs::write(&p, &bytes).unwrap();
        assert!(read_vectors(&p, Dtype::F32, None).unwrap_err().to_string().contains("truncated"));
        std::fs::write(&p, 0i32.to_le_bytes()).unwrap();
        assert!(read_vectors(&p, Dtype::F32, None).is_err());
        let mut bytes = 1i32.to_le_bytes().to_vec();
        bytes.extend(f(f32::INFINITY));
        std::fs::write(&p, &bytes).unwrap();
        let err = read_vectors(&p, Dtype::F32, None).unwrap_err().to_string();
        assert!(err.contains("non-finite value, id=0"), "{err}");
    }

    #[test]
    fn single_vector_layout() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("a.fvecs");
        let set = EmbeddingSet::with_sequential_ids(1, Values::F32(vec![2.5])).unwrap();
        write_vectors(&set, &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(bytes, [1, 0, 0, 0, 0x00, 0x00, 0x20, 0x40]);
    }

    #[test]
    fn empty_set_writes_zero_bytes() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("a.fvecs");
        let set = EmbeddingSet::new(vec![], 4, Values::F32(vec![])).unwrap();
        write_vectors(&set, &p).unwrap();
        assert_eq!(std::fs::metadata(&p).unwrap().len(), 0);
        assert_eq!(read_vectors(&p, Dtype::F32, None).unwrap().len(), 0);
    }

    #[test]
    fn dvecs_round_trip_with_sidecar_ids() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("a.dvecs");
        let set = EmbeddingSet::new(vec![10, 3], 3, Values::F64(vec![0.1, -2.0, 1e-300, 4.0, 5.5, -0.0])).unwrap();
        write_vectors(&set, &p).unwrap();
        let ids = read_ids(&sidecar_path(&p)).unwrap();
        let back = read_vectors(&p, Dtype::F64, Some(&ids)).unwrap();
        assert_eq!(back, set);
        assert_eq!(std::fs::metadata(&p).unwrap().len(), 2 * (4 + 3 * 8));
    }

    #[test]
    fn packed_code_layout() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("c.bvecs");
        let mut bytes = 8i32.to_le_bytes().to_vec();
        bytes.extend([0xFF, 0, 0, 0, 0, 0, 0, 0]);
        bytes.extend(8i32.to_le_bytes());
        bytes.extend([0u8; 8]);
        std::fs::write(&p, &bytes).unwrap();
        let codes = read_codes(&p, 64, None).unwrap();
        assert_eq!(codes.code(0), &[0xFF]);
        assert_eq!(codes.code(0)[0].count_ones(), 8);
        assert_eq!(codes.code(1)[0].count_ones(), 0);
        let q = dir.path().join("d.bvecs");
        write_codes(&codes, &q).unwrap();
        assert_eq!(std::fs::read(&q).unwrap(), bytes);
    }

    #[test]
    fn code_width_mismatch() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("c.bvecs");
        let mut bytes = 4i32.to_le_bytes().to_vec();
        bytes.extend([0u8; 4]);
        std::fs::write(&p, &bytes).unwrap();
        let err = read_codes(&p, 64, None).unwrap_err().to_string();
        assert!(err.contains("code width mismatch"), "{err}");
    }

    #[test]
    fn labels_parse_and_infer_categories() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("l.jsonl");
        std::fs::write(&p, "{\"id\":0,\"labels\":[1,3]}\n{\"id\":1,\"labels\":[]}\n").unwrap();
        let l = read_labels(&p, None).unwrap();
        assert_eq!(l.len(), 2);
        assert_eq!(l.num_categories(), 4);
    }

    #[test]
    fn label_errors_carry_line_numbers() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("l.jsonl");
        let mut s = String::new();
        for i in 0..4 {
            s.push_str(&format!("{{\"id\":{},\"labels\":[0]}}\n", i + 1));
        }
        s.push_str("{\"id\":0,\"labels\":[1]}\n{\"id\":0,\"labels\":[2]}\n");
        std::fs::write(&p, &s).unwrap();
        let err = read_labels(&p, None).unwrap_err().to_string();
        assert_eq!(err, "duplicate id 0 at line 6");
        std::fs::write(&p, "{\"id\":0,\"labels\":[-1]}\n").unwrap();
        assert!(read_labels(&p, None).unwrap_err().to_string().contains("negative label"));
        std::fs::write(&p, "{\"id\":0}\nnot json\n").unwrap();
        assert!(read_labels(&p, None).unwrap_err().to_string().contains("line 1"));
    }

    #[test]
    fn eighty_categories() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("l.jsonl");
        let mut s = String::new();
        for i in 0..5000u32 {
            s.push_str(&format!("{{\"id\":{i},\"labels\":[{},{}]}}\n", i % 80, (i * 7) % 80));
        }
        std::fs::write(&p, &s).unwrap();
        assert_eq!(read_labels(&p, None).unwrap().num_categories(), 80);
    }

    #[test]
    fn groups_read_and_reject_overlap() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("g.jsonl");
        std::fs::write(
            &p,
            "{\"image_id\":0,\"caption_ids\":[0,1,2,3,4]}\n{\"image_id\":1,\"caption_ids\":[5,6,7,8,9]}\n",
        )
        .unwrap();
        let g = read_groups(&p).unwrap();
        assert_eq!(g.captions_of(1).unwrap().len(), 5);
        assert_eq!(g.num_captions(), 10);
        std::fs::write(&p, "{\"image_id\":7,\"caption_ids\":[9]}\n").unwrap();
        assert_eq!(read_groups(&p).unwrap().image_of(9), Some(7));
        std::fs::write(
            &p,
            "{\"image_id\":0,\"caption_ids\":[1]}\n{\"image_id\":1,\"caption_ids\":[1]}\n",
        )
        .unwrap();
        assert!(read_groups(&p).unwrap_err().to_string().contains("not a partition"));
        std::fs::write(&p, "{\"image_id\":0,\"caption_ids\":[]}\n").unwrap();
        assert!(read_groups(&p).is_err());
    }

    #[test]
    fn ficosim_layout_and_errors() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("s.ficosim");
        let m = SimilarityMatrix::new(vec![4], vec![9], vec![0.5], "ip").unwrap();
        write_sim(&m, &p).unwrap();
        assert_eq!(std::fs::metadata(&p).unwrap().len(), 44);
        let back = read_sim(&p).unwrap();
        assert_eq!(back.scores(), &[0.5]);
        assert_eq!(back.query_ids(), &[4]);

        let mut bytes = FICOSIM_MAGIC.to_vec();
        bytes.extend(2u64.to_le_bytes());
        bytes.extend(2u64.to_le_bytes());
        for _ in 0..3 {
            bytes.extend(1.0f32.to_le_bytes());
        }
        std::fs::write(&p, &bytes).unwrap();
        assert_eq!(read_sim(&p).unwrap_err().to_string(), "truncated payload");
        bytes[0] = b'X';
        std::fs::write(&p, &bytes).unwrap();
        assert_eq!(read_sim(&p).unwrap_err().to_string(), "bad magic");
    }

    #[test]
    fn real_rendering() {
        assert_eq!(format_real(1.0), "1.0");
        assert_eq!(format_real(1.0 / 3.0), "0.33333333333333331");
        assert_eq!(format_real(0.5), "0.5");
        assert_eq!(format_real(0.1), "0.10000000000000001");
        assert_eq!(format_real(-2.25), "-2.25");
        assert_eq!(format_real(123.0), "123.0");
        assert_eq!(format_real(1e-9), "1.0000000000000001e-9");
        assert_eq!(format_real(0.001), "0.001");
        assert_eq!(format_real(1e20), "1.0e20");
        for x in [1.0 / 3.0, 0.1, 2.0f64.sqrt(), 1e-9, 12345.678, 5e-324] {
            assert_eq!(format_real(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn canonical_report_json() {
        let mut r = EvalReport::new(crate::model::Task::Instance, crate::model::Direction::I2T);
        r.metrics.insert("R@1".into(), 1.0);
        r.meta.clear();
        let s = report_to_json(&r).unwrap();
        assert!(s.contains("\"metrics\":{\"R@1\":1.0}"), "{s}");
        assert_eq!(s, "{\"direction\":\"i2t\",\"meta\":{},\"metrics\":{\"R@1\":1.0},\"task\":\"instance\"}");
    }

    #[test]
    fn ranked_round_trip_with_missing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.jsonl");
        let r = RankedRetrieval::new(2, vec![7, 3], vec![1, MISSING, 0, 1], vec![-1.0, f32::NEG_INFINITY, 0.5, 0.25]).unwrap();
        write_ranked(&r, &[100, 200], &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().next().unwrap(), "{\"ids\":[200,null],\"query\":7,\"scores\":[-1.0,null]}");
        let back = read_ranked(&p).unwrap();
        assert_eq!(back.k, 2);
        assert_eq!(back.query_ids, vec![7, 3]);
        assert_eq!(back.ids, vec![Some(200), None, Some(100), Some(200)]);
        assert_eq!(back.scores[2], Some(0.5));
    }
}
