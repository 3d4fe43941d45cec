//! JSON graph files.
//!
//! ```json
//! { "n": 3,
//!   "edges": [ { "i": 0, "j": 1, "r": [9 floats, column-major] } ],
//!   "ground_truth": [ [9 floats], ... ] }
//! ```
//!
//! Floats are written in shortest round-trip form, so a save/load cycle is
//! bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CameraGraph, Edge};
use crate::error::{Error, Result};
use crate::so3::RotationMatrix;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<EdgeRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<Vec<[f64; 9]>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub i: usize,
    pub j: usize,
    pub r: [f64; 9],
}

impl From<&CameraGraph> for GraphFile {
    fn from(g: &CameraGraph) -> Self {
        GraphFile {
            n: g.n(),
            edges: g
                .edges()
                .iter()
                .map(|e| EdgeRecord {
                    i: e.i,
                    j: e.j,
                    r: e.rel.to_vec9(),
                })
                .collect(),
            ground_truth: g
                .ground_truth()
                .map(|gt| gt.iter().map(RotationMatrix::to_vec9).collect()),
        }
    }
}

impl TryFrom<GraphFile> for CameraGraph {
    type Error = Error;

    fn try_from(file: GraphFile) -> Result<Self> {
        let edges = file
            .edges
            .into_iter()
            .map(|e| Edge {
                i: e.i,
                j: e.j,
                rel: RotationMatrix::from_column_slice(&e.r),
            })
            .collect();
        let gt = file.ground_truth.map(|gt| {
            gt.iter()
                .map(|r| RotationMatrix::from_column_slice(r))
                .collect()
        });
        CameraGraph::new(file.n, edges, gt)
    }
}

impl CameraGraph {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GraphFile::from(self)).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GraphFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            context: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        CameraGraph::try_from(file).map_err(|e| Error::Parse {
            context: "graph contents".into(),
            message: e.to_string(),
        })
    }
}

pub fn save_graph(graph: &CameraGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, graph.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<CameraGraph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    CameraGraph::from_json(&text).map_err(|e| match e {
        Error::Parse { context, message } => Error::Parse {
            context: format!("{}: {context}", path.display()),
            message,
        },
        other => other,
    })
}
