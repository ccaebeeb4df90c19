//! CSV ingestion and dataset preprocessing.

use std::path::Path;

use symtest_core::groups::so_inversion;
use symtest_core::Points;

use crate::config::{DatasetConfig, Preprocess};
use crate::error::{CliError, Result};

/// What a CSV column is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Feature,
    Response,
    /// A feature column belonging to a numbered block of a product group.
    GroupBlock(usize),
}

/// Column names and their roles, in output order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Schema {
    pub columns: Vec<(String, Role)>,
}

impl Schema {
    pub fn features<S: AsRef<str>>(names: &[S]) -> Self {
        Self {
            columns: names.iter().map(|n| (n.as_ref().to_string(), Role::Feature)).collect(),
        }
    }

    pub fn with(mut self, name: &str, role: Role) -> Self {
        self.columns.push((name.to_string(), role));
        self
    }
}

/// Numeric data read from a file: features, optional responses, and the block
/// index of each feature column (`None` for plain features).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Points,
    pub y: Option<Points>,
    pub blocks: Vec<Option<usize>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            x: self.x.select(idx),
            y: self.y.as_ref().map(|y| y.select(idx)),
            blocks: self.blocks.clone(),
        }
    }
}

/// Reads a headered CSV. Lines starting with `#` are ignored. Errors name
/// the offending 1-based data row.
pub fn ingest_csv(path: &Path, schema: &Schema) -> Result<Dataset> {
    if !path.exists() {
        return Err(CliError::DataFileMissing(path.to_path_buf()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    let header = rdr.headers().map_err(|e| CliError::io(path, e))?.clone();
    let mut pick = Vec::with_capacity(schema.columns.len());
    for (name, role) in &schema.columns {
        let idx = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::SchemaMismatch(format!("missing column '{name}'")))?;
        pick.push((idx, name.as_str(), *role));
    }
    if pick.iter().all(|(_, _, r)| *r == Role::Response) {
        return Err(CliError::SchemaMismatch("schema declares no feature columns".into()));
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { .. } => CliError::SchemaMismatch(format!("row {row} has the wrong number of fields")),
            _ => CliError::io(path, e),
        })?;
        for &(idx, name, role) in &pick {
            let v: f64 = rec
                .get(idx)
                .and_then(|s| s.parse().ok())
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| CliError::ParseError {
                    row,
                    column: name.to_string(),
                })?;
            match role {
                Role::Response => ys.push(v),
                _ => xs.push(v),
            }
        }
        rows += 1;
    }
    let nx = pick.iter().filter(|(_, _, r)| *r != Role::Response).count();
    let ny = pick.len() - nx;
    let blocks = pick
        .iter()
        .filter_map(|(_, _, r)| match r {
            Role::Response => None,
            Role::Feature => Some(None),
            Role::GroupBlock(b) => Some(Some(*b)),
        })
        .collect();
    Ok(Dataset {
        x: if rows == 0 { Points::zeros(0, nx) } else { Points::new(xs, nx)? },
        y: match (ny, rows) {
            (0, _) => None,
            (_, 0) => Some(Points::zeros(0, ny)),
            _ => Some(Points::new(ys, ny)?),
        },
        blocks,
    })
}

/// One satellite measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwarmRecord {
    pub lat: f64,
    pub lon: f64,
    pub radius: f64,
    pub field: f64,
}

/// Cartesian positions `r(cos φ cos λ, cos φ sin λ, sin φ)` scaled so the
/// largest norm is one.
pub fn swarm_positions(records: &[SwarmRecord]) -> Result<Points> {
    if records.is_empty() {
        return Err(CliError::TooFewValues { needed: 1, got: 0 });
    }
    let mut x = Points::zeros(records.len(), 3);
    let mut max = 0.0f64;
    for (i, r) in records.iter().enumerate() {
        if !(r.radius > 0.0) {
            return Err(CliError::RangeError(format!("radius {} at record {}", r.radius, i + 1)));
        }
        if !(-90.0..=90.0).contains(&r.lat) {
            return Err(CliError::RangeError(format!("latitude {} at record {}", r.lat, i + 1)));
        }
        if !(-180.0..360.0).contains(&r.lon) {
            return Err(CliError::RangeError(format!("longitude {} at record {}", r.lon, i + 1)));
        }
        let (lat, lon) = (r.lat.to_radians(), r.lon.to_radians());
        let row = x.row_mut(i);
        row[0] = r.radius * lat.cos() * lon.cos();
        row[1] = r.radius * lat.cos() * lon.sin();
        row[2] = r.radius * lat.sin();
        max = max.max(r.radius);
    }
    let x = Points::new(x.into_vec().into_iter().map(|v| v / max).collect(), 3)?;
    Ok(x)
}

/// Centers to mean zero and scales to unit (population) variance.
pub fn standardize(values: &[f64]) -> Result<Vec<f64>> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(CliError::DegenerateVariance);
    }
    let sd = var.sqrt();
    Ok(values.iter().map(|v| (v - mean) / sd).collect())
}

/// Rotates every row so that the unit vector along `axis` becomes `e₃`.
/// Data already aligned with `e₃` is returned unchanged.
pub fn align_axis(x: &Points, axis: [f64; 3]) -> Result<Points> {
    let r = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    if r > 0.0 && axis[0] == 0.0 && axis[1] == 0.0 && axis[2] > 0.0 {
        return Ok(x.clone());
    }
    let tau = so_inversion(&axis)?;
    // τ maps e₁ to the axis; the cyclic shift then sends e₁ to e₃.
    let inv = tau.transpose();
    let mut out = Points::zeros(x.len(), 3);
    let mut tmp = [0.0; 3];
    for i in 0..x.len() {
        inv.apply_into(x.row(i), &mut tmp);
        out.row_mut(i).copy_from_slice(&[tmp[1], tmp[2], tmp[0]]);
    }
    Ok(out)
}

/// Positions and standardized field values.
pub fn preprocess_swarm(records: &[SwarmRecord], axis: [f64; 3]) -> Result<Dataset> {
    let x = align_axis(&swarm_positions(records)?, axis)?;
    let field: Vec<f64> = records.iter().map(|r| r.field).collect();
    let y = Points::new(standardize(&field)?, 1)?;
    Ok(Dataset {
        x,
        y: Some(y),
        blocks: vec![None; 3],
    })
}

/// Leading constituent pair of one jet event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DijetRecord {
    pub pt1: f64,
    pub phi1: f64,
    pub pt2: f64,
    pub phi2: f64,
}

/// `(p₁ₓ, p₁ᵧ, p₂ₓ, p₂ᵧ)` with `pₓ = p_T cos φ`, `pᵧ = p_T sin φ`.
pub fn preprocess_dijet(records: &[DijetRecord]) -> Result<Dataset> {
    let mut x = Points::zeros(records.len(), 4);
    for (i, r) in records.iter().enumerate() {
        if r.pt1 < 0.0 || r.pt2 < 0.0 || r.pt1.is_nan() || r.pt2.is_nan() {
            return Err(CliError::RangeError(format!("negative transverse momentum at record {}", i + 1)));
        }
        let (s1, c1) = r.phi1.sin_cos();
        let (s2, c2) = r.phi2.sin_cos();
        x.row_mut(i).copy_from_slice(&[r.pt1 * c1, r.pt1 * s1, r.pt2 * c2, r.pt2 * s2]);
    }
    Ok(Dataset {
        x,
        y: None,
        blocks: vec![Some(0), Some(0), Some(1), Some(1)],
    })
}

/// Loads and preprocesses the configured dataset.
pub fn load_dataset(cfg: &DatasetConfig) -> Result<Dataset> {
    let need = |k: usize, what: &str| {
        if cfg.features.len() == k {
            Ok(())
        } else {
            Err(CliError::config(format!("{what} preprocessing expects {k} feature columns")))
        }
    };
    match &cfg.preprocess {
        Preprocess::None => {
            let mut schema = Schema::features(&cfg.features);
            for r in &cfg.responses {
                schema = schema.with(r, Role::Response);
            }
            ingest_csv(&cfg.path, &schema)
        }
        Preprocess::Swarm { axis } => {
            need(4, "swarm")?;
            let raw = ingest_csv(&cfg.path, &Schema::features(&cfg.features))?;
            let recs: Vec<SwarmRecord> = raw
                .x
                .rows()
                .map(|r| SwarmRecord {
                    lat: r[0],
                    lon: r[1],
                    radius: r[2],
                    field: r[3],
                })
                .collect();
            preprocess_swarm(&recs, *axis)
        }
        Preprocess::Dijet => {
            need(4, "dijet")?;
            let mut schema = Schema::features(&cfg.features);
            for r in &cfg.responses {
                schema = schema.with(r, Role::Response);
            }
            let raw = ingest_csv(&cfg.path, &schema)?;
            let recs: Vec<DijetRecord> = raw
                .x
                .rows()
                .map(|r| DijetRecord {
                    pt1: r[0],
                    phi1: r[1],
                    pt2: r[2],
                    phi2: r[3],
                })
                .collect();
            let mut d = preprocess_dijet(&recs)?;
            d.y = raw.y;
            Ok(d)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn pole_and_equator() {
        let pole = swarm_positions(&[SwarmRecord { lat: 90.0, lon: 0.0, radius: 1.0, field: 0.0 }]).unwrap();
        assert!(close(pole.row(0), &[0.0, 0.0, 1.0]));
        let two = swarm_positions(&[
            SwarmRecord { lat: 0.0, lon: 0.0, radius: 2.0, field: 1.0 },
            SwarmRecord { lat: 10.0, lon: 20.0, radius: 1.0, field: 2.0 },
        ])
        .unwrap();
        assert!(close(two.row(0), &[1.0, 0.0, 0.0]));
    }

    #[test]
    fn swarm_ranges() {
        let bad = |lat, lon, radius| swarm_positions(&[SwarmRecord { lat, lon, radius, field: 0.0 }]);
        assert!(matches!(bad(91.0, 0.0, 1.0), Err(CliError::RangeError(_))));
        assert!(matches!(bad(0.0, 360.0, 1.0), Err(CliError::RangeError(_))));
        assert!(matches!(bad(0.0, 0.0, 0.0), Err(CliError::RangeError(_))));
        assert!(bad(0.0, -180.0, 1.0).is_ok());
    }

    #[test]
    fn constant_field_is_degenerate() {
        let recs = [
            SwarmRecord { lat: 0.0, lon: 0.0, radius: 1.0, field: 3.0 },
            SwarmRecord { lat: 5.0, lon: 0.0, radius: 1.0, field: 3.0 },
        ];
        assert!(matches!(preprocess_swarm(&recs, [0.0, 0.0, 1.0]), Err(CliError::DegenerateVariance)));
        let z = standardize(&[1.0, 2.0, 3.0, 6.0]).unwrap();
        assert!(z.iter().sum::<f64>().abs() < 1e-12);
        assert!((z.iter().map(|v| v * v).sum::<f64>() / 4.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn axis_alignment() {
        let axis = [1.0, 1.0, 0.0];
        let x = Points::from_rows(&[[1.0, 1.0, 0.0], [0.0, 0.0, 2.0]]).unwrap();
        let a = align_axis(&x, axis).unwrap();
        assert!(close(a.row(0), &[0.0, 0.0, 2f64.sqrt()]));
        assert!((a.row(1)[2]).abs() < 1e-12);
        assert!((a.row(1).iter().map(|v| v * v).sum::<f64>() - 4.0).abs() < 1e-12);
        let id = align_axis(&x, [0.0, 0.0, 1.0]).unwrap();
        assert!(close(id.row(1), &[0.0, 0.0, 2.0]));
    }

    #[test]
    fn dijet_examples() {
        let d = preprocess_dijet(&[
            DijetRecord { pt1: 1.0, phi1: 0.0, pt2: 2.0, phi2: std::f64::consts::FRAC_PI_2 },
            DijetRecord { pt1: 0.0, phi1: 1.3, pt2: 0.0, phi2: -2.0 },
        ])
        .unwrap();
        assert!(close(d.x.row(0), &[1.0, 0.0, 0.0, 2.0]));
        assert!(close(d.x.row(1), &[0.0; 4]));
        let neg = preprocess_dijet(&[DijetRecord { pt1: -1.0, phi1: 0.0, pt2: 0.0, phi2: 0.0 }]);
        assert!(matches!(neg, Err(CliError::RangeError(_))));
    }
}
