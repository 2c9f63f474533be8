//! CSV persistence of sweep records with a fixed header.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use super::record::{sanitize, SweepRecord, SCHEMA};
use crate::error::{Error, Result};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

fn row(r: &SweepRecord) -> String {
    let cols = [
        sanitize(&r.experiment_id),
        r.seed.to_string(),
        r.n.to_string(),
        r.d.to_string(),
        r.s.to_string(),
        sanitize(&r.target_kind),
        fmt_f64(r.a),
        fmt_f64(r.sigma),
        sanitize(&r.selector_kind),
        fmt_f64(r.p),
        fmt_f64(r.alpha),
        fmt_f64(r.lr),
        fmt_f64(r.r),
        fmt_f64(r.norm_emp),
        fmt_f64(r.norm_pred),
        fmt_f64(r.slope_pred),
        sanitize(&r.regime_pred),
        fmt_f64(r.t_star_pred),
        fmt_f64(r.n_star_pred),
        fmt_f64(r.r_star),
        fmt_f64(r.test_mse),
        fmt_f64(r.feas_residual),
        r.solver_iters.to_string(),
        sanitize(&r.status),
    ];
    cols.join(",")
}

fn header() -> String {
    SCHEMA.join(",")
}

/// Append-only writer: the header goes out on creation, each batch is flushed.
pub struct CsvAppender {
    out: BufWriter<File>,
}

impl CsvAppender {
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).write(true).truncate(true).open(path)?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{}", header())?;
        out.flush()?;
        Ok(Self { out })
    }

    pub fn append(&mut self, records: &[SweepRecord]) -> Result<()> {
        for r in records {
            writeln!(self.out, "{}", row(r))?;
        }
        self.out.flush()?;
        Ok(())
    }
}

/// Write all records, replacing `path` atomically through a sibling temporary file.
pub fn write_csv(records: &[SweepRecord], path: &Path) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = CsvAppender::create(&tmp)?;
        w.append(records)?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(i).ok_or_else(|| Error::SchemaMismatch(format!("line {line}: missing column {}", SCHEMA[i])))?;
    raw.parse::<T>().map_err(|e| Error::SchemaMismatch(format!("line {line}, column {}: {raw:?}: {e}", SCHEMA[i])))
}

pub fn read_csv(path: &Path) -> Result<Vec<SweepRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let head = rdr.headers()?.clone();
    if head.iter().ne(SCHEMA.iter().copied()) {
        return Err(Error::SchemaMismatch(format!("header {:?} differs from the schema", head.iter().collect::<Vec<_>>())));
    }
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        if rec.len() != SCHEMA.len() {
            return Err(Error::SchemaMismatch(format!("line {line} has {} columns", rec.len())));
        }
        out.push(SweepRecord {
            experiment_id: field(&rec, 0, line)?,
            seed: field(&rec, 1, line)?,
            n: field(&rec, 2, line)?,
            d: field(&rec, 3, line)?,
            s: field(&rec, 4, line)?,
            target_kind: field(&rec, 5, line)?,
            a: field(&rec, 6, line)?,
            sigma: field(&rec, 7, line)?,
            selector_kind: field(&rec, 8, line)?,
            p: field(&rec, 9, line)?,
            alpha: field(&rec, 10, line)?,
            lr: field(&rec, 11, line)?,
            r: field(&rec, 12, line)?,
            norm_emp: field(&rec, 13, line)?,
            norm_pred: field(&rec, 14, line)?,
            slope_pred: field(&rec, 15, line)?,
            regime_pred: field(&rec, 16, line)?,
            t_star_pred: field(&rec, 17, line)?,
            n_star_pred: field(&rec, 18, line)?,
            r_star: field(&rec, 19, line)?,
            test_mse: field(&rec, 20, line)?,
            feas_residual: field(&rec, 21, line)?,
            solver_iters: field(&rec, 22, line)?,
            status: field(&rec, 23, line)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::rng::{rng_from_seed, standard_normal};
    use rand::Rng as _;

    fn random_record(rng: &mut crate::model::rng::Rng) -> SweepRecord {
        let (seed, n, d, s, iters) = (rng.random(), rng.random_range(1..100_000), rng.random_range(1..100_000), rng.random_range(1..100), rng.random());
        let mut f = || {
            let v = standard_normal(rng) * 10f64.powi(rng.random_range(-300..300));
            if rng.random_bool(0.05) {
                f64::NAN
            } else {
                v
            }
        };
        SweepRecord {
            experiment_id: "e1-fig".into(),
            seed,
            n,
            d,
            s,
            target_kind: "flat".into(),
            a: f(),
            sigma: f(),
            selector_kind: "explicit_p".into(),
            p: f(),
            alpha: f(),
            lr: f(),
            r: f(),
            norm_emp: f(),
            norm_pred: f(),
            slope_pred: f(),
            regime_pred: "bulk".into(),
            t_star_pred: f(),
            n_star_pred: f64::INFINITY,
            r_star: f(),
            test_mse: f(),
            feas_residual: f(),
            solver_iters: iters,
            status: "failed: x;y".into(),
        }
    }

    fn same(a: &SweepRecord, b: &SweepRecord) -> bool {
        let fa = [a.a, a.sigma, a.p, a.alpha, a.lr, a.r, a.norm_emp, a.norm_pred, a.slope_pred, a.t_star_pred, a.n_star_pred, a.r_star, a.test_mse, a.feas_residual];
        let fb = [b.a, b.sigma, b.p, b.alpha, b.lr, b.r, b.norm_emp, b.norm_pred, b.slope_pred, b.t_star_pred, b.n_star_pred, b.r_star, b.test_mse, b.feas_residual];
        fa.iter().zip(&fb).all(|(x, y)| x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()))
            && (a.experiment_id == b.experiment_id && a.seed == b.seed && a.n == b.n && a.d == b.d && a.s == b.s)
            && (a.target_kind == b.target_kind && a.selector_kind == b.selector_kind && a.regime_pred == b.regime_pred)
            && (a.solver_iters == b.solver_iters && a.status == b.status)
    }

    #[test]
    fn round_trip_random_records() {
        let mut rng = rng_from_seed(17);
        let recs: Vec<SweepRecord> = (0..1000).map(|_| random_record(&mut rng)).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_csv(&recs, &path).unwrap();
        let back = read_csv(&path).unwrap();
        assert_eq!(back.len(), recs.len());
        assert!(recs.iter().zip(&back).all(|(a, b)| same(a, b)));
    }

    #[test]
    fn empty_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        write_csv(&[], &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), format!("{}\n", SCHEMA.join(",")));
        assert!(read_csv(&path).unwrap().is_empty());
    }

    #[test]
    fn reordered_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        let mut cols = SCHEMA.to_vec();
        cols.swap(0, 1);
        std::fs::write(&path, format!("{}\n", cols.join(","))).unwrap();
        assert!(matches!(read_csv(&path), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn sanitized_status() {
        assert_eq!(sanitize("a,b\"c\nd"), "a;b;c;d");
    }
}
