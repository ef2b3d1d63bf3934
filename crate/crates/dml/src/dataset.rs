//! Data backend: an observation matrix plus the causal role of each column.
//!
//! A [`Dataset`] holds a dense numeric matrix and declares, per column,
//! whether it is the outcome, a treatment, a covariate, or an instrument.
//! Estimators never touch raw matrices directly; they work through
//! [`TreatmentView`]s, which present the data from the perspective of one
//! active treatment (all other treatments join the covariates).

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Causal role of a data column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariableRole {
    Outcome,
    Treatment,
    Covariate,
    Instrument,
}

/// Role assignment used when loading data from disk.
///
/// Serialized as a flat key/value file:
///
/// ```toml
/// y_col = "y"
/// d_cols = ["d"]
/// x_cols = ["x1", "x2"]   # optional; defaults to all remaining columns
/// z_cols = ["z"]          # optional
/// ```
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoleConfig {
    pub y_col: String,
    pub d_cols: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_cols: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_cols: Option<Vec<String>>,
}

impl RoleConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::ParseError {
            row: 0,
            col: 0,
            msg: format!("role config: {e}"),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let s = toml::to_string(self).expect("role config serializes");
        std::fs::write(path, s)?;
        Ok(())
    }
}

/// Immutable observation matrix with declared variable roles.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Array2<f64>,
    column_names: Vec<String>,
    roles: Vec<VariableRole>,
    y_idx: usize,
    d_idx: Vec<usize>,
    x_idx: Vec<usize>,
    z_idx: Vec<usize>,
}

/// The data as seen when estimating the effect of one treatment.
///
/// With multiple declared treatments, `x` holds the declared covariates
/// first, then the remaining treatments in declaration order. The column
/// order is deterministic: learners can be order-sensitive in tie cases.
#[derive(Debug, Clone)]
pub struct TreatmentView {
    pub y: Array1<f64>,
    pub d: Array1<f64>,
    pub x: Array2<f64>,
    pub z: Option<Array2<f64>>,
    pub treatment_name: String,
}

fn find_col(names: &[String], name: &str) -> Result<usize> {
    names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| Error::UnknownColumn(name.to_string()))
}

impl Dataset {
    /// Builds a dataset from a dense matrix and explicit role assignments.
    ///
    /// When `x_cols` is `None`, every column not named in another role
    /// becomes a covariate. Column names must be unique, every named column
    /// must exist, the role sets must be disjoint, and all entries must be
    /// finite.
    pub fn from_matrix(
        values: Array2<f64>,
        names: Vec<String>,
        y_col: &str,
        d_cols: &[String],
        x_cols: Option<&[String]>,
        z_cols: Option<&[String]>,
    ) -> Result<Self> {
        if names.len() != values.ncols() {
            return Err(Error::LengthMismatch(format!(
                "{} column names for {} columns",
                names.len(),
                values.ncols()
            )));
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(Error::DuplicateRole(format!("duplicate column name `{a}`")));
            }
        }
        if d_cols.is_empty() {
            return Err(Error::InvalidConfig("at least one treatment column is required".into()));
        }

        let y_idx = find_col(&names, y_col)?;
        let d_idx = d_cols.iter().map(|c| find_col(&names, c)).collect::<Result<Vec<_>>>()?;
        let z_idx = match z_cols {
            Some(cols) => cols.iter().map(|c| find_col(&names, c)).collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };

        let mut roles = vec![None::<VariableRole>; names.len()];
        let mut assign = |idx: usize, role: VariableRole| -> Result<()> {
            if roles[idx].is_some() {
                return Err(Error::DuplicateRole(names[idx].clone()));
            }
            roles[idx] = Some(role);
            Ok(())
        };
        assign(y_idx, VariableRole::Outcome)?;
        for &i in &d_idx {
            assign(i, VariableRole::Treatment)?;
        }
        for &i in &z_idx {
            assign(i, VariableRole::Instrument)?;
        }

        let x_idx = match x_cols {
            Some(cols) => {
                let idx = cols.iter().map(|c| find_col(&names, c)).collect::<Result<Vec<_>>>()?;
                for &i in &idx {
                    assign(i, VariableRole::Covariate)?;
                }
                idx
            }
            None => {
                let mut idx = Vec::new();
                for i in 0..names.len() {
                    if roles[i].is_none() {
                        roles[i] = Some(VariableRole::Covariate);
                        idx.push(i);
                    }
                }
                idx
            }
        };

        let roles: Vec<VariableRole> =
            roles.into_iter().map(|r| r.unwrap_or(VariableRole::Covariate)).collect();

        for (j, name) in names.iter().enumerate() {
            for (i, v) in values.column(j).iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFiniteValue { column: name.clone(), row: i });
                }
            }
        }

        Ok(Dataset { values, column_names: names, roles, y_idx, d_idx, x_idx, z_idx })
    }

    /// Builds a dataset from a role configuration (the CSV sidecar format).
    pub fn from_matrix_with_roles(
        values: Array2<f64>,
        names: Vec<String>,
        roles: &RoleConfig,
    ) -> Result<Self> {
        Self::from_matrix(
            values,
            names,
            &roles.y_col,
            &roles.d_cols,
            roles.x_cols.as_deref(),
            roles.z_cols.as_deref(),
        )
    }

    /// Parses a rectangular numeric CSV (header row mandatory) into a dataset.
    pub fn load_csv(path: impl AsRef<Path>, roles: &RoleConfig) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv_str(&text, roles)
    }

    pub fn from_csv_str(text: &str, roles: &RoleConfig) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::ParseError {
            row: 0,
            col: 0,
            msg: "empty file".into(),
        })?;
        let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let ncols = names.len();

        let mut data = Vec::new();
        let mut nrows = 0usize;
        for (r, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != ncols {
                return Err(Error::ParseError {
                    row: r + 1,
                    col: fields.len(),
                    msg: format!("expected {ncols} fields, found {}", fields.len()),
                });
            }
            for (c, f) in fields.iter().enumerate() {
                let v: f64 = f.trim().parse().map_err(|_| Error::ParseError {
                    row: r + 1,
                    col: c + 1,
                    msg: format!("`{}` is not a number", f.trim()),
                })?;
                data.push(v);
            }
            nrows += 1;
        }
        let values = Array2::from_shape_vec((nrows, ncols), data).expect("rectangular by construction");
        Self::from_matrix_with_roles(values, names, roles)
    }

    /// Writes the dataset as CSV with 17 significant digits per value, so
    /// that `load_csv(write_csv(ds))` reproduces `ds` bit-exactly.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.column_names.join(","));
        out.push('\n');
        for row in self.values.rows() {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(',');
                }
                let _ = write!(out, "{v:.16e}");
                first = false;
            }
            out.push('\n');
        }
        out
    }

    /// The role configuration that reproduces this dataset's assignment.
    pub fn role_config(&self) -> RoleConfig {
        RoleConfig {
            y_col: self.column_names[self.y_idx].clone(),
            d_cols: self.d_idx.iter().map(|&i| self.column_names[i].clone()).collect(),
            x_cols: Some(self.x_idx.iter().map(|&i| self.column_names[i].clone()).collect()),
            z_cols: if self.z_idx.is_empty() {
                None
            } else {
                Some(self.z_idx.iter().map(|&i| self.column_names[i].clone()).collect())
            },
        }
    }

    pub fn n_obs(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_treat(&self) -> usize {
        self.d_idx.len()
    }

    pub fn n_instruments(&self) -> usize {
        self.z_idx.len()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn roles(&self) -> &[VariableRole] {
        &self.roles
    }

    pub fn treatment_names(&self) -> Vec<&str> {
        self.d_idx.iter().map(|&i| self.column_names[i].as_str()).collect()
    }

    pub fn outcome(&self) -> Array1<f64> {
        self.values.column(self.y_idx).to_owned()
    }

    /// The data from the perspective of treatment `treatment_index`.
    ///
    /// The active treatment becomes `d`; all other treatments are appended
    /// after the declared covariates in declaration order.
    pub fn treatment_view(&self, treatment_index: usize) -> Result<TreatmentView> {
        if treatment_index >= self.d_idx.len() {
            return Err(Error::TreatmentIndexOutOfRange {
                index: treatment_index,
                n_treat: self.d_idx.len(),
            });
        }
        let active = self.d_idx[treatment_index];
        let mut x_cols: Vec<usize> = self.x_idx.clone();
        x_cols.extend(self.d_idx.iter().copied().filter(|&i| i != active));

        let n = self.n_obs();
        let mut x = Array2::zeros((n, x_cols.len()));
        for (j, &c) in x_cols.iter().enumerate() {
            x.column_mut(j).assign(&self.values.column(c));
        }
        let z = if self.z_idx.is_empty() {
            None
        } else {
            let mut z = Array2::zeros((n, self.z_idx.len()));
            for (j, &c) in self.z_idx.iter().enumerate() {
                z.column_mut(j).assign(&self.values.column(c));
            }
            Some(z)
        };

        Ok(TreatmentView {
            y: self.values.column(self.y_idx).to_owned(),
            d: self.values.column(active).to_owned(),
            x,
            z,
            treatment_name: self.column_names[active].clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn from_matrix_assigns_roles() {
        let values = array![[1.0, 0.0, 2.0], [0.0, 1.0, 3.0], [2.0, 0.0, 4.0]];
        let ds = Dataset::from_matrix(
            values,
            names(&["y", "d", "x1"]),
            "y",
            &names(&["d"]),
            None,
            None,
        )
        .unwrap();
        assert_eq!(ds.roles()[0], VariableRole::Outcome);
        assert_eq!(ds.roles()[1], VariableRole::Treatment);
        assert_eq!(ds.roles()[2], VariableRole::Covariate);
        assert_eq!(ds.n_treat(), 1);
    }

    #[test]
    fn explicit_covariates() {
        let values = Array2::zeros((3, 4));
        let ds = Dataset::from_matrix(
            values,
            names(&["y", "d", "x1", "x2"]),
            "y",
            &names(&["d"]),
            Some(&names(&["x1", "x2"])),
            None,
        )
        .unwrap();
        assert_eq!(ds.roles()[2], VariableRole::Covariate);
        assert_eq!(ds.roles()[3], VariableRole::Covariate);
    }

    #[test]
    fn duplicate_role_rejected() {
        let values = Array2::zeros((2, 2));
        let err = Dataset::from_matrix(
            values,
            names(&["y", "d"]),
            "y",
            &names(&["y"]),
            None,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateRole(_)));
    }

    #[test]
    fn non_finite_rejected() {
        let values = array![[1.0, f64::NAN], [0.0, 1.0]];
        let err = Dataset::from_matrix(values, names(&["y", "d"]), "y", &names(&["d"]), None, None)
            .unwrap_err();
        assert!(matches!(err, Error::NonFiniteValue { row: 0, .. }));
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let values = array![
            [1.0 / 3.0, -2.75, 1e-17],
            [std::f64::consts::PI, 0.1, 7.0],
        ];
        let roles = RoleConfig {
            y_col: "y".into(),
            d_cols: vec!["d".into()],
            x_cols: None,
            z_cols: None,
        };
        let ds = Dataset::from_matrix_with_roles(values, names(&["y", "d", "x"]), &roles).unwrap();
        let text = ds.to_csv_string();
        let ds2 = Dataset::from_csv_str(&text, &roles).unwrap();
        assert_eq!(ds, ds2);
    }

    #[test]
    fn csv_parse_errors_carry_location() {
        let roles = RoleConfig {
            y_col: "y".into(),
            d_cols: vec!["d".into()],
            x_cols: None,
            z_cols: None,
        };
        let ds = Dataset::from_csv_str("y,d,x\n1,0,2\n0,1,3\n", &roles).unwrap();
        assert_eq!(ds.n_obs(), 2);

        let err = Dataset::from_csv_str("y,d,x\n1,abc,2\n", &roles).unwrap_err();
        match err {
            Error::ParseError { row, col, .. } => {
                assert_eq!((row, col), (1, 2));
            }
            other => panic!("unexpected error {other:?}"),
        }

        let roles_z = RoleConfig {
            y_col: "y".into(),
            d_cols: vec!["d".into()],
            x_cols: None,
            z_cols: Some(vec!["z".into()]),
        };
        let err = Dataset::from_csv_str("y,d,x\n1,0,2\n", &roles_z).unwrap_err();
        assert!(matches!(err, Error::UnknownColumn(c) if c == "z"));
    }

    #[test]
    fn view_appends_other_treatments_after_covariates() {
        let values = array![[1.0, 2.0, 3.0, 4.0], [5.0, 6.0, 7.0, 8.0]];
        let ds = Dataset::from_matrix(
            values,
            names(&["y", "d1", "d2", "x1"]),
            "y",
            &names(&["d1", "d2"]),
            Some(&names(&["x1"])),
            None,
        )
        .unwrap();
        let v = ds.treatment_view(0).unwrap();
        assert_eq!(v.treatment_name, "d1");
        assert_eq!(v.d, array![2.0, 6.0]);
        // x = [x1, d2]
        assert_eq!(v.x, array![[4.0, 3.0], [8.0, 7.0]]);

        let err = ds.treatment_view(2).unwrap_err();
        assert!(matches!(err, Error::TreatmentIndexOutOfRange { .. }));
    }

    #[test]
    fn single_treatment_view_is_declared_covariates() {
        let values = Array2::zeros((2, 3));
        let ds =
            Dataset::from_matrix(values, names(&["y", "d", "x1"]), "y", &names(&["d"]), None, None)
                .unwrap();
        let v = ds.treatment_view(0).unwrap();
        assert_eq!(v.x.ncols(), 1);
        assert!(v.z.is_none());
    }

    /// Ten treatments X1..X10 among 100 columns: view(3) must expose 99
    /// regressors ordered declared-covariates-first (X11..X100), then the
    /// remaining treatments in declaration order (X1,X2,X3,X5..X10).
    #[test]
    fn multi_treatment_frame_ordering() {
        let n_vars = 100;
        let mut cols: Vec<String> = vec!["y".into()];
        cols.extend((1..=n_vars).map(|i| format!("X{i}")));
        let mut values = Array2::zeros((4, n_vars + 1));
        for j in 0..=n_vars {
            values.column_mut(j).fill(j as f64);
        }
        let d_cols: Vec<String> = (1..=10).map(|i| format!("X{i}")).collect();
        let ds = Dataset::from_matrix(values, cols, "y", &d_cols, None, None).unwrap();
        assert_eq!(ds.n_treat(), 10);
        assert_eq!(
            ds.roles().iter().filter(|r| **r == VariableRole::Covariate).count(),
            90
        );

        let v = ds.treatment_view(3).unwrap();
        assert_eq!(v.treatment_name, "X4");
        assert_eq!(v.x.ncols(), 99);
        // declared covariates X11..X100 occupy the first 90 slots
        assert_eq!(v.x[[0, 0]], 11.0);
        assert_eq!(v.x[[0, 89]], 100.0);
        // then X1,X2,X3,X5,...,X10
        let tail: Vec<f64> = (90..99).map(|j| v.x[[0, j]]).collect();
        assert_eq!(tail, vec![1.0, 2.0, 3.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]);
    }
}
