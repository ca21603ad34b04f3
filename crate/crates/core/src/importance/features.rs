use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::ImportanceError;
use crate::evaluation::EvaluationRecord;
use crate::search_space::{Gene, ParamKind, SearchSpace, SEED};

/// Row-major feature table with named columns.
///
/// Columns built from a search space follow parameter order: each integer or real parameter
/// except `seed` is one column named after the parameter; each token of a prompt parameter is
/// a 0/1 column named `param:token`. Every column also carries a group name: the parameter it
/// came from.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    names: Vec<String>,
    groups: Vec<String>,
    data: Vec<f64>,
}

impl FeatureMatrix {
    /// Builds a matrix from explicit columns; each column is its own group.
    pub fn new(names: Vec<String>, data: Vec<f64>) -> Result<Self, ImportanceError> {
        let groups = names.clone();
        Self::with_groups(names, groups, data)
    }

    pub fn with_groups(names: Vec<String>, groups: Vec<String>, data: Vec<f64>) -> Result<Self, ImportanceError> {
        if names.is_empty() || groups.len() != names.len() || !data.len().is_multiple_of(names.len()) {
            return Err(ImportanceError::Other(format!(
                "{} values do not fill rows of {} columns",
                data.len(),
                names.len()
            )));
        }
        Ok(Self { names, groups, data })
    }

    /// Column layout for `space`.
    pub fn columns_for(space: &SearchSpace) -> (Vec<String>, Vec<String>) {
        let mut names = Vec::new();
        let mut groups = Vec::new();
        for p in space.params().iter().filter(|p| p.name != SEED) {
            match &p.kind {
                ParamKind::Integer { .. } | ParamKind::Real { .. } => {
                    names.push(p.name.clone());
                    groups.push(p.name.clone());
                }
                ParamKind::TokenSubset { vocabulary } => {
                    for t in vocabulary {
                        names.push(format!("{}:{}", p.name, t));
                        groups.push(p.name.clone());
                    }
                }
            }
        }
        (names, groups)
    }

    /// One row per record; records must validate against `space`.
    pub fn from_records<'a>(
        space: &SearchSpace,
        records: impl IntoIterator<Item = &'a EvaluationRecord>,
    ) -> Result<Self, ImportanceError> {
        let (names, groups) = Self::columns_for(space);
        let mut data = Vec::new();
        for r in records {
            space
                .validate(&r.candidate)
                .map_err(|e| ImportanceError::Other(format!("record does not fit the space: {e}")))?;
            for (p, g) in space.params().iter().zip(&r.candidate.genes) {
                if p.name == SEED {
                    continue;
                }
                match g {
                    Gene::Int(v) => data.push(*v as f64),
                    Gene::Real(v) => data.push(*v),
                    Gene::Mask(m) => data.extend(m.iter().map(|&b| if b { 1.0 } else { 0.0 })),
                }
            }
        }
        if names.is_empty() {
            return Err(ImportanceError::Other("search space has no feature columns".into()));
        }
        Ok(Self { names, groups, data })
    }

    pub fn n_rows(&self) -> usize {
        self.data.len() / self.names.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.names.len() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let d = self.names.len();
        &self.data[row * d..(row + 1) * d]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    /// Distinct group names in column order.
    pub fn group_names(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for g in &self.groups {
            if !out.contains(g) {
                out.push(g.clone());
            }
        }
        out
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// A copy with rows reordered by `order`.
    pub fn select_rows(&self, order: &[usize]) -> Self {
        let mut data = Vec::with_capacity(order.len() * self.n_cols());
        for &r in order {
            data.extend_from_slice(self.row(r));
        }
        Self { names: self.names.clone(), groups: self.groups.clone(), data }
    }
}
