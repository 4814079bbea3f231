use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cybersick_core::{Error, Result};

use crate::commands::write_text;

const METRICS_HEADER: &str = "fold,epoch,train_loss,train_acc,val_loss,val_acc";
const IMPORTANCE_HEADER: &str = "step,importance";

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Load(format!("{}: empty file", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let row: Vec<String> = line.split(',').map(str::to_string).collect();
        if row.len() != header.len() {
            return Err(Error::Load(format!(
                "{}: row {} has {} fields, header has {}",
                path.display(),
                n + 2,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "series".into(), |s| s.to_string_lossy().into_owned())
}

fn index(field: &str, path: &Path) -> Result<usize> {
    field
        .parse()
        .map_err(|_| Error::Load(format!("{}: {field:?} is not an index", path.display())))
}

/// One row per epoch, one column group per fold; folds that stopped early
/// leave empty cells.
fn widen_metrics(table: &Table, path: &Path) -> Result<String> {
    let mut cells: BTreeMap<usize, BTreeMap<usize, &[String]>> = BTreeMap::new();
    let mut folds = std::collections::BTreeSet::new();
    for row in &table.rows {
        let (fold, epoch) = (index(&row[0], path)?, index(&row[1], path)?);
        folds.insert(fold);
        cells.entry(epoch).or_default().insert(fold, &row[2..]);
    }
    let mut out = String::from("epoch");
    for f in &folds {
        for name in &table.header[2..] {
            write!(out, ",fold{f}_{name}").unwrap();
        }
    }
    out.push('\n');
    for (epoch, by_fold) in &cells {
        write!(out, "{epoch}").unwrap();
        for f in &folds {
            match by_fold.get(f) {
                Some(values) => values.iter().for_each(|v| write!(out, ",{v}").unwrap()),
                None => (2..table.header.len()).for_each(|_| out.push(',')),
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// `step` plus one column per input curve.
fn widen_importance(curves: &[(String, Table)], paths: &[&PathBuf]) -> Result<String> {
    let mut by_step: BTreeMap<usize, Vec<Option<&str>>> = BTreeMap::new();
    for (k, ((_, table), path)) in curves.iter().zip(paths).enumerate() {
        for row in &table.rows {
            let slot = by_step
                .entry(index(&row[0], path)?)
                .or_insert_with(|| vec![None; curves.len()]);
            slot[k] = Some(&row[1]);
        }
    }
    let mut out = String::from("step");
    for (name, _) in curves {
        write!(out, ",{name}").unwrap();
    }
    out.push('\n');
    for (step, values) in by_step {
        write!(out, "{step}").unwrap();
        for v in values {
            write!(out, ",{}", v.unwrap_or("")).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn export(inputs: &[PathBuf], out_dir: &Path) -> Result<()> {
    let mut curves = Vec::new();
    let mut curve_paths = Vec::new();
    for path in inputs {
        let table = read_table(path)?;
        match table.header.join(",").as_str() {
            METRICS_HEADER => {
                let target = out_dir.join(format!("{}_wide.csv", stem(path)));
                write_text(&target, &widen_metrics(&table, path)?)?;
                println!("{}", target.display());
            }
            IMPORTANCE_HEADER => {
                curves.push((stem(path), table));
                curve_paths.push(path);
            }
            other => {
                return Err(Error::Load(format!(
                    "{}: unrecognized header {other:?}; expected {METRICS_HEADER:?} or {IMPORTANCE_HEADER:?}",
                    path.display()
                )))
            }
        }
    }
    if !curves.is_empty() {
        let target = out_dir.join("importance_wide.csv");
        write_text(&target, &widen_importance(&curves, &curve_paths)?)?;
        println!("{}", target.display());
    }
    Ok(())
}
