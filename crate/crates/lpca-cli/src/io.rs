//! File formats: CSV matrices and the JSON model document.

use std::fs::File;
use std::path::Path;

use lpca::baselines::{LsvdModel, PcaModel};
use lpca::fantope::FantopeModel;
use lpca::mm::{FitReport, LpcaModel};
use lpca::{BinaryMatrix, Family, LpcaError, Matrix64, Vector64};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

/// Row-major dense matrix payload inside a model file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MatrixData {
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries; length = rows * cols.
    pub data: Vec<f64>,
}

impl MatrixData {
    pub fn from_matrix(m: &Matrix64) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    pub fn to_matrix(&self) -> Result<Matrix64, CliError> {
        if self.data.len() != self.rows * self.cols {
            return Err(CliError::validation(format!(
                "model matrix payload has {} entries, expected {}x{}",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        Ok(Matrix64::from_fn(self.rows, self.cols, |i, j| {
            self.data[i * self.cols + j]
        }))
    }
}

/// On-disk model document. Numbers pass through serde_json's f64 encoding,
/// which is exact under round-trip.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub method: String,
    pub family: String,
    pub m: f64,
    pub k: f64,
    pub mu: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<MatrixData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<MatrixData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<MatrixData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<MatrixData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_report: Option<FitReport<f64>>,
}

/// The in-memory form a model file decodes to.
pub enum LoadedModel {
    Lpca(LpcaModel<f64>),
    Lsvd(LsvdModel<f64>),
    Fantope(FantopeModel<f64>),
    Pca(PcaModel<f64>),
}

fn family_name(family: Family) -> &'static str {
    match family {
        Family::Bernoulli => "bernoulli",
        Family::Gaussian => "gaussian",
        Family::Poisson => "poisson",
    }
}

fn family_from_name(name: &str) -> Result<Family, CliError> {
    match name {
        "bernoulli" => Ok(Family::Bernoulli),
        "gaussian" => Ok(Family::Gaussian),
        "poisson" => Ok(Family::Poisson),
        other => Err(CliError::validation(format!("unknown family '{other}'"))),
    }
}

impl ModelFile {
    pub fn from_lpca(model: &LpcaModel<f64>, report: Option<FitReport<f64>>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            method: "lpca".into(),
            family: family_name(model.family).into(),
            m: model.m,
            k: model.k as f64,
            mu: model.mu.iter().copied().collect(),
            u: Some(MatrixData::from_matrix(&model.u)),
            a: None,
            b: None,
            h: None,
            fit_report: report,
        }
    }

    pub fn from_lsvd(model: &LsvdModel<f64>, report: Option<FitReport<f64>>, m: f64) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            method: "lsvd".into(),
            family: "bernoulli".into(),
            m,
            k: model.k as f64,
            mu: model.mu.iter().copied().collect(),
            u: None,
            a: Some(MatrixData::from_matrix(&model.a)),
            b: Some(MatrixData::from_matrix(&model.b)),
            h: None,
            fit_report: report,
        }
    }

    pub fn from_fantope(model: &FantopeModel<f64>, report: Option<FitReport<f64>>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            method: "fantope".into(),
            family: "bernoulli".into(),
            m: model.m,
            k: model.k,
            mu: model.mu.iter().copied().collect(),
            u: None,
            a: None,
            b: None,
            h: Some(MatrixData::from_matrix(&model.h)),
            fit_report: report,
        }
    }

    pub fn from_pca(model: &PcaModel<f64>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            method: "pca".into(),
            family: "gaussian".into(),
            m: 0.0,
            k: model.k as f64,
            mu: model.mu.iter().copied().collect(),
            u: Some(MatrixData::from_matrix(&model.u)),
            a: None,
            b: None,
            h: None,
            fit_report: None,
        }
    }

    pub fn decode(&self) -> Result<LoadedModel, CliError> {
        if self.format_version != FORMAT_VERSION {
            return Err(CliError::validation(format!(
                "unsupported model format version {}",
                self.format_version
            )));
        }
        let mu = Vector64::from_vec(self.mu.clone());
        let need = |field: &Option<MatrixData>, name: &str| -> Result<Matrix64, CliError> {
            field
                .as_ref()
                .ok_or_else(|| {
                    CliError::validation(format!(
                        "model file missing '{name}' for method {}",
                        self.method
                    ))
                })?
                .to_matrix()
        };
        match self.method.as_str() {
            "lpca" => Ok(LoadedModel::Lpca(LpcaModel {
                u: need(&self.u, "U")?,
                mu,
                m: self.m,
                k: self.k as usize,
                family: family_from_name(&self.family)?,
            })),
            "lsvd" => Ok(LoadedModel::Lsvd(LsvdModel {
                a: need(&self.a, "A")?,
                b: need(&self.b, "B")?,
                mu,
                k: self.k as usize,
            })),
            "fantope" => Ok(LoadedModel::Fantope(FantopeModel {
                h: need(&self.h, "H")?,
                mu,
                m: self.m,
                k: self.k,
            })),
            "pca" => Ok(LoadedModel::Pca(PcaModel {
                u: need(&self.u, "U")?,
                mu,
                k: self.k as usize,
            })),
            other => Err(CliError::validation(format!("unknown method '{other}'"))),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let file = File::create(path)
            .map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))?;
        serde_json::to_writer_pretty(file, self)
            .map_err(|e| CliError::validation(format!("cannot encode model: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let file = File::open(path)
            .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_reader(file)
            .map_err(|e| CliError::validation(format!("cannot parse {}: {e}", path.display())))
    }
}

/// Reads a CSV of 0/1 entries. A single leading header row of non-numeric
/// labels is tolerated and skipped; any other non-binary cell is an error
/// naming the offending row.
pub fn read_binary_csv(path: &Path) -> Result<BinaryMatrix, CliError> {
    let rows = read_rows(path)?;
    let mut parsed: Vec<Vec<u8>> = Vec::with_capacity(rows.len());
    for (idx, row) in rows.iter().enumerate() {
        let mut out = Vec::with_capacity(row.len());
        let mut ok = true;
        for cell in row {
            match cell.trim() {
                "0" => out.push(0),
                "1" => out.push(1),
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            parsed.push(out);
        } else if idx == 0 {
            // header row
            continue;
        } else {
            return Err(CliError::validation(format!(
                "{}: row {} contains a non-binary entry",
                path.display(),
                idx + 1
            )));
        }
    }
    matrix_from_rows(path, &parsed, |v| *v)
        .and_then(|m| BinaryMatrix::new(m).map_err(CliError::from))
}

fn read_rows(path: &Path) -> Result<Vec<Vec<String>>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record =
            record.map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        rows.push(record.iter().map(str::to_owned).collect());
    }
    if rows.is_empty() {
        return Err(CliError::validation(format!(
            "{}: empty input",
            path.display()
        )));
    }
    Ok(rows)
}

fn matrix_from_rows<T: Copy, U: nalgebra::Scalar>(
    path: &Path,
    rows: &[Vec<T>],
    convert: impl Fn(&T) -> U,
) -> Result<nalgebra::DMatrix<U>, CliError> {
    if rows.is_empty() {
        return Err(CliError::validation(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    let d = rows[0].len();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != d {
            return Err(CliError::validation(format!(
                "{}: row {} has {} entries, expected {d}",
                path.display(),
                i + 1,
                row.len()
            )));
        }
    }
    Ok(nalgebra::DMatrix::from_fn(rows.len(), d, |i, j| {
        convert(&rows[i][j])
    }))
}

/// Writes a real-valued matrix as headerless CSV.
pub fn write_real_csv(path: &Path, m: &Matrix64) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        writer
            .write_record(&row)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    }
    writer
        .flush()
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

/// Writes a binary matrix as headerless CSV of 0/1 entries.
pub fn write_binary_csv(path: &Path, m: &BinaryMatrix) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m.get(i, j).to_string()).collect();
        writer
            .write_record(&row)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    }
    writer
        .flush()
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

impl From<LpcaError> for CliError {
    fn from(e: LpcaError) -> Self {
        match e {
            LpcaError::Numerical(_) | LpcaError::NotOrthonormal { .. } => CliError {
                message: e.to_string(),
                code: 3,
            },
            _ => CliError {
                message: e.to_string(),
                code: 2,
            },
        }
    }
}
