//! Embedding and label files.
//!
//! Binary embeddings are a flat little-endian float32 array with a JSON
//! sidecar `{n, d, row_meta}`. Small tables can also be CSV with columns
//! `example_id, block_id, [magnification], [split], f0, f1, ...`.

use super::{EmbeddingTable, LabelTable, ProbeError, RowMeta};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingSidecar {
    pub n: usize,
    pub d: usize,
    pub row_meta: Vec<RowMeta>,
}

fn io_err(e: impl std::fmt::Display) -> ProbeError {
    ProbeError::Invalid(e.to_string())
}

pub fn read_embeddings_bin(data: &Path, sidecar: &Path) -> Result<EmbeddingTable, ProbeError> {
    let meta: EmbeddingSidecar = serde_json::from_slice(&std::fs::read(sidecar).map_err(io_err)?).map_err(io_err)?;
    let bytes = std::fs::read(data).map_err(io_err)?;
    if bytes.len() != meta.n * meta.d * 4 {
        return Err(ProbeError::ShapeMismatch(format!(
            "{} bytes for {}x{} float32",
            bytes.len(),
            meta.n,
            meta.d
        )));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    EmbeddingTable::new(meta.n, meta.d, values, meta.row_meta)
}

pub fn write_embeddings_bin(table: &EmbeddingTable, data: &Path, sidecar: &Path) -> Result<(), ProbeError> {
    let bytes: Vec<u8> = table.values.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
    std::fs::write(data, bytes).map_err(io_err)?;
    let meta = EmbeddingSidecar {
        n: table.n,
        d: table.d,
        row_meta: table.row_meta.clone(),
    };
    std::fs::write(sidecar, serde_json::to_vec_pretty(&meta).map_err(io_err)?).map_err(io_err)
}

pub fn read_embeddings_csv<R: std::io::Read>(input: R) -> Result<EmbeddingTable, ProbeError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers().map_err(io_err)?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let id_col = col("example_id").ok_or_else(|| ProbeError::Invalid("missing example_id column".into()))?;
    let block_col = col("block_id");
    let mag_col = col("magnification");
    let split_col = col("split");
    let meta_cols = [Some(id_col), block_col, mag_col, split_col];
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|i| !meta_cols.contains(&Some(*i))).collect();
    let mut values = Vec::new();
    let mut meta = Vec::new();
    for record in reader.records() {
        let record = record.map_err(io_err)?;
        let opt = |c: Option<usize>| c.and_then(|c| record.get(c)).filter(|s| !s.is_empty()).map(str::to_string);
        let example_id = record[id_col].to_string();
        meta.push(RowMeta {
            block_id: opt(block_col).unwrap_or_else(|| example_id.clone()),
            example_id,
            magnification: opt(mag_col),
            split: opt(split_col),
        });
        for &c in &feature_cols {
            values.push(record[c].parse::<f64>().map_err(|e| ProbeError::Invalid(format!("{}: {e}", &record[c])))?);
        }
    }
    EmbeddingTable::new(meta.len(), feature_cols.len(), values, meta)
}

/// Labels CSV `example_id,label`, aligned to `table` rows. Class names are
/// the distinct label strings in sorted order unless `classes` is given.
pub fn read_labels<R: std::io::Read>(input: R, table: &EmbeddingTable, classes: Option<&[String]>) -> Result<LabelTable, ProbeError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut by_id: HashMap<String, String> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(io_err)?;
        if record.len() < 2 {
            return Err(ProbeError::Invalid("label rows need example_id,label".into()));
        }
        by_id.insert(record[0].to_string(), record[1].to_string());
    }
    let class_names: Vec<String> = match classes {
        Some(c) => c.to_vec(),
        None => {
            let mut names: Vec<String> = by_id.values().cloned().collect();
            names.sort();
            names.dedup();
            names
        }
    };
    let index: HashMap<&str, usize> = class_names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let labels = table
        .row_meta
        .iter()
        .map(|m| {
            let name = by_id
                .get(&m.example_id)
                .ok_or_else(|| ProbeError::Invalid(format!("no label for {}", m.example_id)))?;
            index
                .get(name.as_str())
                .copied()
                .ok_or_else(|| ProbeError::Invalid(format!("unknown class {name}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    LabelTable::new(labels, class_names)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_binary_round_trip() {
        let csv = "example_id,block_id,split,f0,f1\na,s1,train,0.5,1\nb,s1,train,-2,0.25\nc,s2,test,3,4\n";
        let table = read_embeddings_csv(csv.as_bytes()).unwrap();
        assert_eq!((table.n, table.d), (3, 2));
        assert_eq!(table.row_meta[1].block_id, "s1");
        assert_eq!(table.row_meta[2].split.as_deref(), Some("test"));
        let dir = tempfile::tempdir().unwrap();
        let (d, j) = (dir.path().join("e.f32"), dir.path().join("e.json"));
        write_embeddings_bin(&table, &d, &j).unwrap();
        assert_eq!(read_embeddings_bin(&d, &j).unwrap(), table);
        let labels = read_labels("example_id,label\nc,pos\na,neg\nb,pos\n".as_bytes(), &table, None).unwrap();
        assert_eq!(labels.labels, vec![0, 1, 1]);
        assert_eq!(labels.class_names, vec!["neg", "pos"]);
    }
}
