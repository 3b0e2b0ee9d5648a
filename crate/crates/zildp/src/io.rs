//! File formats: CSV datasets, support JSON, release bundles, curve CSVs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use zildp_core::mechanism::{diam_attribute, diam_individual, ReleaseBundle, SupportBox};
use zildp_core::tradeoff::TradeoffCurve;
use zildp_core::{NoiseParams, RowMatrix};

use crate::error::{AppError, Result};

pub(crate) fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e)),
        _ => Ok(()),
    }
}

fn parse_f64(path: &Path, line: usize, field: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| AppError::format(path, format!("line {line}: `{field}` is not a number")))
}

/// Reads a CSV file with a header row and one numeric column per attribute.
pub fn read_matrix_csv(path: &Path) -> Result<(Vec<String>, RowMatrix)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| AppError::format(path, e))?;
    let names: Vec<String> = rdr
        .headers()
        .map_err(|e| AppError::format(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if names.is_empty() {
        return Err(AppError::format(path, "missing header row"));
    }
    let mut rows = 0;
    let mut data = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| AppError::format(path, e))?;
        if rec.len() != names.len() {
            return Err(AppError::format(path, format!("line {}: expected {} fields, found {}", i + 2, names.len(), rec.len())));
        }
        for field in rec.iter() {
            data.push(parse_f64(path, i + 2, field)?);
        }
        rows += 1;
    }
    let m = RowMatrix::from_vec(rows, names.len(), data)?;
    Ok((names, m))
}

pub fn write_matrix_csv(path: &Path, names: &[String], m: &RowMatrix) -> Result<()> {
    create_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| AppError::format(path, e))?;
    w.write_record(names).map_err(|e| AppError::format(path, e))?;
    let mut rec = Vec::with_capacity(m.ncols());
    for row in m.rows_iter() {
        rec.clear();
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| AppError::format(path, e))?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

/// Support file contents. A `null` bound stands for an unbounded side and
/// is only accepted for public columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportFile {
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
    pub private_mask: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column_names: Option<Vec<String>>,
}

impl SupportFile {
    pub fn from_support(support: &SupportBox, column_names: Option<Vec<String>>) -> Self {
        let opt = |v: &[f64]| v.iter().map(|x| x.is_finite().then_some(*x)).collect();
        SupportFile {
            lower: opt(&support.lower),
            upper: opt(&support.upper),
            private_mask: support.private_mask.clone(),
            column_names,
        }
    }

    pub fn to_support(&self) -> zildp_core::Result<SupportBox> {
        SupportBox::new(
            self.lower.iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)).collect(),
            self.upper.iter().map(|v| v.unwrap_or(f64::INFINITY)).collect(),
            self.private_mask.clone(),
        )
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| AppError::format(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    create_parent(path)?;
    let mut text = serde_json::to_string_pretty(value).map_err(|e| AppError::format(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

pub fn read_support(path: &Path) -> Result<(SupportBox, Option<Vec<String>>)> {
    let file: SupportFile = read_json(path)?;
    let support = file.to_support()?;
    if let Some(names) = &file.column_names {
        if names.len() != support.dim() {
            return Err(AppError::format(path, format!("{} column names for {} columns", names.len(), support.dim())));
        }
    }
    Ok((support, file.column_names))
}

/// `<prefix>.meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub zero_mass: f64,
    pub lambda: f64,
    pub seed: u64,
    pub stream_id: u64,
    pub generator: String,
    pub support: SupportFile,
    pub c_attribute: f64,
    pub c_individual: f64,
    pub created_at: Option<String>,
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Paths of the three bundle files for `prefix`.
pub fn bundle_paths(prefix: &Path) -> [PathBuf; 3] {
    [
        with_suffix(prefix, ".x1.csv"),
        with_suffix(prefix, ".x2.csv"),
        with_suffix(prefix, ".meta.json"),
    ]
}

/// Writes `<prefix>.x1.csv`, `<prefix>.x2.csv` and `<prefix>.meta.json`.
pub fn write_bundle(prefix: &Path, bundle: &ReleaseBundle) -> Result<[PathBuf; 3]> {
    let paths = bundle_paths(prefix);
    write_matrix_csv(&paths[0], &bundle.column_names, &bundle.x1)?;
    write_matrix_csv(&paths[1], &bundle.column_names, &bundle.x2)?;
    let meta = BundleMeta {
        zero_mass: bundle.params.zero_mass,
        lambda: bundle.params.scale,
        seed: bundle.seed,
        stream_id: bundle.stream_id,
        generator: bundle.generator.clone(),
        support: SupportFile::from_support(&bundle.support, Some(bundle.column_names.clone())),
        c_attribute: diam_attribute(&bundle.support)? / bundle.params.scale,
        c_individual: diam_individual(&bundle.support)? / bundle.params.scale,
        created_at: bundle.created_at.clone(),
    };
    write_json(&paths[2], &meta)?;
    Ok(paths)
}

pub fn read_bundle(prefix: &Path) -> Result<ReleaseBundle> {
    let [p1, p2, pm] = bundle_paths(prefix);
    let meta: BundleMeta = read_json(&pm)?;
    let (names1, x1) = read_matrix_csv(&p1)?;
    let (names2, x2) = read_matrix_csv(&p2)?;
    if names1 != names2 || x1.nrows() != x2.nrows() {
        return Err(AppError::format(&p2, "x1 and x2 files do not line up"));
    }
    let support = meta.support.to_support()?;
    if support.dim() != names1.len() {
        return Err(AppError::format(&pm, "support does not match the data columns"));
    }
    Ok(ReleaseBundle {
        x1,
        x2,
        column_names: names1,
        params: NoiseParams::new(meta.zero_mass, meta.lambda)?,
        support,
        seed: meta.seed,
        stream_id: meta.stream_id,
        generator: meta.generator,
        created_at: meta.created_at,
    })
}

/// Curves as rows `alpha,beta,stderr,label`; an absent standard error is
/// an empty field.
pub fn write_curves_csv(path: &Path, curves: &[&TradeoffCurve]) -> Result<()> {
    create_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| AppError::format(path, e))?;
    w.write_record(["alpha", "beta", "stderr", "label"])
        .map_err(|e| AppError::format(path, e))?;
    for c in curves {
        for (k, (a, b)) in c.alphas.iter().zip(&c.betas).enumerate() {
            let se = c.stderr.as_ref().map(|s| s[k].to_string()).unwrap_or_default();
            w.write_record([a.to_string(), b.to_string(), se, c.label.clone()])
                .map_err(|e| AppError::format(path, e))?;
        }
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

/// Label, alphas, betas and standard errors of one curve being read.
type CurveColumns = (String, Vec<f64>, Vec<f64>, Vec<Option<f64>>);

/// Reads curves back, one per distinct label in order of appearance.
pub fn read_curves_csv(path: &Path) -> Result<Vec<TradeoffCurve>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| AppError::format(path, e))?;
    let mut out: Vec<CurveColumns> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| AppError::format(path, e))?;
        if rec.len() != 4 {
            return Err(AppError::format(path, format!("line {}: expected 4 fields", i + 2)));
        }
        let label = rec[3].to_string();
        if out.last().is_none_or(|c| c.0 != label) {
            out.push((label, Vec::new(), Vec::new(), Vec::new()));
        }
        let cur = out.last_mut().expect("pushed above");
        cur.1.push(parse_f64(path, i + 2, &rec[0])?);
        cur.2.push(parse_f64(path, i + 2, &rec[1])?);
        cur.3.push(if rec[2].is_empty() { None } else { Some(parse_f64(path, i + 2, &rec[2])?) });
    }
    out.into_iter()
        .map(|(label, a, b, se)| {
            let mut c = TradeoffCurve::new(a, b, label)?;
            c.stderr = se.into_iter().collect();
            Ok(c)
        })
        .collect()
}

/// `created_at` for release metadata: set only when `SOURCE_DATE_EPOCH`
/// is, so that repeated runs stay byte-identical.
pub fn created_at_from_env() -> Option<String> {
    let secs: i64 = std::env::var("SOURCE_DATE_EPOCH").ok()?.trim().parse().ok()?;
    chrono::DateTime::from_timestamp(secs, 0).map(|t| t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
}

/// Writes `text` to `path`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    create_parent(path)?;
    let mut f = fs::File::create(path).map_err(|e| AppError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| AppError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use zildp_core::mechanism::{drdp_release, Dataset};
    use zildp_core::tradeoff::{alpha_grid, beta_c_curve};
    use zildp_core::RngStream;

    #[test]
    fn matrix_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let m = RowMatrix::from_vec(2, 2, vec![0.1, -1e-300, 1.0 / 3.0, 7.0]).unwrap();
        let names = vec!["a".to_string(), "b".to_string()];
        write_matrix_csv(&p, &names, &m).unwrap();
        let (n2, m2) = read_matrix_csv(&p).unwrap();
        assert_eq!(n2, names);
        assert_eq!(m2, m);
    }

    #[test]
    fn malformed_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "a,b\n1,2\n3,x\n").unwrap();
        let e = read_matrix_csv(&p).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("line 3"), "{e}");
    }

    #[test]
    fn support_with_open_public_column() {
        let f: SupportFile =
            serde_json::from_str(r#"{"lower":[0,null],"upper":[1,null],"private_mask":[true,false]}"#).unwrap();
        let s = f.to_support().unwrap();
        assert_eq!(s.upper[1], f64::INFINITY);
        assert_eq!(SupportFile::from_support(&s, None), f);
        let bad: SupportFile =
            serde_json::from_str(r#"{"lower":[null],"upper":[1],"private_mask":[true]}"#).unwrap();
        assert!(bad.to_support().is_err());
    }

    #[test]
    fn bundle_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = RowMatrix::from_vec(3, 2, vec![0.1, 5.0, 0.2, 6.0, 0.9, 7.0]).unwrap();
        let s = SupportBox::new(vec![0.0, f64::NEG_INFINITY], vec![1.0, f64::INFINITY], vec![true, false]).unwrap();
        let ds = Dataset::with_default_names(m, s).unwrap();
        let b = drdp_release(&ds, &NoiseParams::new(0.2, 0.5).unwrap(), &RngStream::new(3, 0)).unwrap();
        let prefix = dir.path().join("sub/run");
        write_bundle(&prefix, &b).unwrap();
        assert_eq!(read_bundle(&prefix).unwrap(), b);
        let meta: BundleMeta = read_json(&bundle_paths(&prefix)[2]).unwrap();
        assert_eq!(meta.c_attribute, 2.0);
    }

    #[test]
    fn curves_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        let a = beta_c_curve(0.5, alpha_grid(11)).unwrap();
        let mut b = beta_c_curve(1.0, alpha_grid(5)).unwrap();
        b.label = "other".into();
        b.stderr = Some(vec![0.01; 5]);
        write_curves_csv(&p, &[&a, &b]).unwrap();
        assert_eq!(read_curves_csv(&p).unwrap(), vec![a, b]);
    }
}
