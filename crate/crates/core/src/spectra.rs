//! Spectra containers, wavenumber regions and the CSV exchange format.
//!
//! A spectra CSV holds the wavenumber axis (cm⁻¹) on its first row and one
//! spectrum per subsequent row. Class labels are not stored in the file; they
//! are attached when a file is loaded.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raman-shift axis shared by every spectrum of a set. Strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavenumberAxis(Vec<f64>);

impl WavenumberAxis {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidAxis(format!(
                "need at least 2 wavenumbers, found {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidAxis(format!("non-finite wavenumber at index {i}")));
        }
        for i in 1..values.len() {
            if values[i] <= values[i - 1] {
                return Err(Error::NonIncreasingAxis {
                    index: i,
                    previous: values[i - 1],
                    value: values[i],
                });
            }
        }
        Ok(Self(values))
    }

    /// Uniform grid of `n` points from `lo` to `hi`, both endpoints exact.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(lo < hi) {
            return Err(Error::InvalidAxis(format!(
                "uniform grid needs lo < hi and n >= 2 (lo={lo}, hi={hi}, n={n})"
            )));
        }
        let step = (hi - lo) / (n - 1) as f64;
        let mut values: Vec<f64> = (0..n).map(|k| lo + k as f64 * step).collect();
        values[n - 1] = hi;
        Self::new(values)
    }

    /// The bundled reference axis: a uniform 1700-point grid over
    /// 125.25–3399.83 cm⁻¹ whose LW window holds 221 points and HW window 570.
    pub fn reference() -> Self {
        Self::uniform(125.25, 3399.83, REFERENCE_AXIS_LEN).expect("reference axis is valid")
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.0[0]
    }

    pub fn last(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    /// Index range of the points lying in `[lo, hi]`.
    pub fn select(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let start = self.0.partition_point(|&w| w < lo);
        let end = self.0.partition_point(|&w| w <= hi);
        start..end.max(start)
    }
}

pub const REFERENCE_AXIS_LEN: usize = 1700;

/// A named, inclusive wavenumber window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

impl RegionSpec {
    pub fn new(name: impl Into<String>, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "region bounds must satisfy lo < hi (lo={lo}, hi={hi})"
            )));
        }
        Ok(Self {
            name: name.into(),
            lo,
            hi,
        })
    }

    /// Low-wavenumber window, 125.25–549.27 cm⁻¹.
    pub fn lw() -> Self {
        Self {
            name: "LW".into(),
            lo: 125.25,
            hi: 549.27,
        }
    }

    /// High-wavenumber window, 2303.16–3399.83 cm⁻¹.
    pub fn hw() -> Self {
        Self {
            name: "HW".into(),
            lo: 2303.16,
            hi: 3399.83,
        }
    }

    /// Looks up one of the declared regions (`LW`, `HW`), case-insensitively.
    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_uppercase().as_str() {
            "LW" => Ok(Self::lw()),
            "HW" => Ok(Self::hw()),
            _ => Err(Error::Unknown {
                kind: "region",
                name: name.to_string(),
            }),
        }
    }
}

/// N spectra on a shared axis with binary labels (1 = first sample).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectraSet {
    axis: WavenumberAxis,
    /// Row-major N×p intensities.
    data: Vec<f64>,
    labels: Vec<u8>,
    pub sample_names: [String; 2],
}

impl SpectraSet {
    pub fn new(axis: WavenumberAxis, rows: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        let p = axis.len();
        let mut data = Vec::with_capacity(rows.len() * p);
        for row in &rows {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(axis, data, labels)
    }

    pub fn from_flat(axis: WavenumberAxis, data: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        let p = axis.len();
        if data.len() != labels.len() * p {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * p,
                found: data.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidArgument(format!("label {bad} is not 0 or 1")));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite intensity at row {}, column {}",
                i / p,
                i % p
            )));
        }
        Ok(Self {
            axis,
            data,
            labels,
            sample_names: ["first".into(), "second".into()],
        })
    }

    pub fn with_names(mut self, first: impl Into<String>, second: impl Into<String>) -> Self {
        self.sample_names = [first.into(), second.into()];
        self
    }

    pub fn axis(&self) -> &WavenumberAxis {
        &self.axis
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn n_spectra(&self) -> usize {
        self.labels.len()
    }

    pub fn n_points(&self) -> usize {
        self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_points();
        &self.data[i * p..(i + 1) * p]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.n_points())
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.labels.len() - ones, ones]
    }

    /// Fails unless both classes are present.
    pub fn require_both_classes(&self) -> Result<()> {
        let [zeros, ones] = self.class_counts();
        if zeros == 0 || ones == 0 {
            return Err(Error::SingleClass(format!("{ones} of label 1, {zeros} of label 0")));
        }
        Ok(())
    }

    /// New set made of the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> SpectraSet {
        let p = self.n_points();
        let mut data = Vec::with_capacity(indices.len() * p);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        SpectraSet {
            axis: self.axis.clone(),
            data,
            labels,
            sample_names: self.sample_names.clone(),
        }
    }

    /// Rows carrying `label`, in their original order.
    pub fn class_subset(&self, label: u8) -> SpectraSet {
        let idx: Vec<usize> = (0..self.n_spectra())
            .filter(|&i| self.labels[i] == label)
            .collect();
        self.subset(&idx)
    }

    /// Keeps the columns `lo ≤ wavenumber ≤ hi`.
    pub fn extract_region(&self, region: &RegionSpec) -> Result<SpectraSet> {
        let range = self.axis.select(region.lo, region.hi);
        if range.is_empty() {
            return Err(Error::EmptyRegion {
                name: region.name.clone(),
                lo: region.lo,
                hi: region.hi,
            });
        }
        let axis_values = self.axis.values()[range.clone()].to_vec();
        // A single selected point is a legal column subset even though it is
        // not a usable axis on its own.
        let axis = if axis_values.len() >= 2 {
            WavenumberAxis::new(axis_values)?
        } else {
            WavenumberAxis(axis_values)
        };
        let mut data = Vec::with_capacity(self.n_spectra() * range.len());
        for row in self.rows() {
            data.extend_from_slice(&row[range.clone()]);
        }
        Ok(SpectraSet {
            axis,
            data,
            labels: self.labels.clone(),
            sample_names: self.sample_names.clone(),
        })
    }

    /// Copy with every intensity mapped through `f(column, value)`.
    pub fn map_values(&self, mut f: impl FnMut(usize, f64) -> f64) -> SpectraSet {
        let p = self.n_points();
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(i, &v)| f(i % p, v))
            .collect();
        SpectraSet {
            axis: self.axis.clone(),
            data,
            labels: self.labels.clone(),
            sample_names: self.sample_names.clone(),
        }
    }

    pub(crate) fn replace_data(&self, data: Vec<f64>) -> SpectraSet {
        debug_assert_eq!(data.len(), self.data.len());
        SpectraSet {
            axis: self.axis.clone(),
            data,
            labels: self.labels.clone(),
            sample_names: self.sample_names.clone(),
        }
    }

    /// Copy with replaced labels (used by permutation-null checks).
    pub fn with_labels(&self, labels: Vec<u8>) -> Result<SpectraSet> {
        SpectraSet::from_flat(self.axis.clone(), self.data.clone(), labels)
            .map(|s| s.with_names(self.sample_names[0].clone(), self.sample_names[1].clone()))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let write_row = |out: &mut BufWriter<fs::File>, row: &[f64]| -> std::io::Result<()> {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.write_all(b",")?;
                }
                // `Display` for f64 is the shortest representation that parses back exactly.
                write!(out, "{v}")?;
            }
            out.write_all(b"\n")
        };
        write_row(&mut out, self.axis.values()).map_err(|e| Error::io(path, e))?;
        for row in self.rows() {
            write_row(&mut out, row).map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

/// Reads a spectra CSV and attaches `label` to every spectrum.
pub fn load_spectra(path: impl AsRef<Path>, label: u8) -> Result<SpectraSet> {
    let path = path.as_ref();
    if label > 1 {
        return Err(Error::InvalidArgument(format!("label {label} is not 0 or 1")));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());

    let parse_line = |row: usize, line: &str| -> Result<Vec<f64>> {
        line.split(',')
            .enumerate()
            .map(|(col, field)| {
                let field = field.trim();
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    row,
                    column: col + 1,
                    message: format!("`{field}` is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        row,
                        column: col + 1,
                        message: format!("non-finite value `{field}`"),
                    });
                }
                Ok(v)
            })
            .collect()
    };

    let (header_idx, header) = lines.next().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        row: 1,
        column: 1,
        message: "empty file".into(),
    })?;
    let axis = WavenumberAxis::new(parse_line(header_idx + 1, header)?)?;
    let p = axis.len();

    let mut data = Vec::new();
    let mut n = 0;
    for (idx, line) in lines {
        let row = parse_line(idx + 1, line)?;
        if row.len() != p {
            return Err(Error::RaggedRow {
                path: path.to_path_buf(),
                row: idx + 1,
                found: row.len(),
                expected: p,
            });
        }
        data.extend_from_slice(&row);
        n += 1;
    }
    SpectraSet::from_flat(axis, data, vec![label; n])
}

/// Row-stacks `a` (label 1) on top of `b` (label 0).
pub fn merge(a: &SpectraSet, b: &SpectraSet) -> Result<SpectraSet> {
    if a.axis.len() != b.axis.len() {
        return Err(Error::AxisMismatch {
            index: a.axis.len().min(b.axis.len()),
        });
    }
    if let Some(index) = a
        .axis
        .values()
        .iter()
        .zip(b.axis.values())
        .position(|(x, y)| x != y)
    {
        return Err(Error::AxisMismatch { index });
    }
    if a.labels.iter().any(|&l| l != 1) || b.labels.iter().any(|&l| l != 0) {
        return Err(Error::InvalidArgument(
            "merge expects the first set labelled 1 and the second labelled 0".into(),
        ));
    }
    let mut data = a.data.clone();
    data.extend_from_slice(&b.data);
    let mut labels = a.labels.clone();
    labels.extend_from_slice(&b.labels);
    Ok(SpectraSet {
        axis: a.axis.clone(),
        data,
        labels,
        sample_names: [a.sample_names[0].clone(), b.sample_names[0].clone()],
    })
}
