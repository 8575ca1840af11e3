use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NORM_TOL: f64 = 1e-9;

/// Unit vectors on the sphere with optional group labels.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SphericalData {
    points: Vec<Vector3<f64>>,
    groups: Option<Vec<u8>>,
}

/// `n`, `sum_i y_i` and `sum_i y_i y_i^T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SufficientStats {
    pub n: usize,
    pub sum: Vector3<f64>,
    pub scatter: Matrix3<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    x: f64,
    y: f64,
    z: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    group: Option<u8>,
}

impl SphericalData {
    pub fn new(points: Vec<Vector3<f64>>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if (p.norm() - 1.0).abs() > NORM_TOL {
                return Err(Error::Data(format!("row {i} has norm {}, expected 1", p.norm())));
            }
        }
        Ok(Self { points, groups: None })
    }

    pub fn with_groups(points: Vec<Vector3<f64>>, groups: Vec<u8>) -> Result<Self> {
        if groups.len() != points.len() {
            return Err(Error::Data(format!("{} points but {} group labels", points.len(), groups.len())));
        }
        if let Some(g) = groups.iter().find(|g| !matches!(g, 1 | 2)) {
            return Err(Error::Data(format!("group labels must be 1 or 2, got {g}")));
        }
        let mut data = Self::new(points)?;
        data.groups = Some(groups);
        Ok(data)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn groups(&self) -> Option<&[u8]> {
        self.groups.as_deref()
    }

    /// Rows at `indices`, keeping labels.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            groups: self.groups.as_ref().map(|g| indices.iter().map(|&i| g[i]).collect()),
        }
    }

    /// Rows labelled `group`, without labels.
    pub fn group(&self, group: u8) -> Self {
        let points = match &self.groups {
            Some(g) => self.points.iter().zip(g).filter(|(_, &l)| l == group).map(|(p, _)| *p).collect(),
            None => Vec::new(),
        };
        Self { points, groups: None }
    }

    pub fn stats(&self) -> SufficientStats {
        let mut sum = Vector3::zeros();
        let mut scatter = Matrix3::zeros();
        for p in &self.points {
            sum += p;
            scatter += p * p.transpose();
        }
        SufficientStats { n: self.points.len(), sum, scatter }
    }

    /// Reads `x,y,z[,group]` columns with a header row.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let mut points = Vec::new();
        let mut groups = Vec::new();
        for row in reader.deserialize() {
            let row: Row = row?;
            points.push(Vector3::new(row.x, row.y, row.z));
            groups.push(row.group);
        }
        match groups.iter().filter(|g| g.is_some()).count() {
            0 => Self::new(points),
            n if n == points.len() => Self::with_groups(points, groups.into_iter().flatten().collect()),
            _ => Err(Error::Data("group column is only partly filled".into())),
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        for (i, p) in self.points.iter().enumerate() {
            writer.serialize(Row { x: p.x, y: p.y, z: p.z, group: self.groups.as_ref().map(|g| g[i]) })?;
        }
        writer.flush()?;
        Ok(())
    }
}
