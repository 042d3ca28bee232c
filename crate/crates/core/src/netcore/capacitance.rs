use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Charge-voltage capacitance matrix over named nodes, in farads.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxwellCapacitance {
    pub matrix: DMatrix<f64>,
    pub node_names: Vec<String>,
}

/// Physical pairwise capacitances: ground capacitances on the diagonal,
/// node-to-node capacitors off the diagonal (may be negative).
#[derive(Debug, Clone, PartialEq)]
pub struct MutualCapacitance {
    pub matrix: DMatrix<f64>,
    pub node_names: Vec<String>,
}

fn check_names(n: usize, names: &[String]) -> Result<()> {
    if names.len() != n {
        return Err(Error::Shape(format!("{} node names for a {n}x{n} matrix", names.len())));
    }
    let mut sorted: Vec<&String> = names.iter().collect();
    sorted.sort();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Invalid(format!("duplicate node name `{}`", w[0])));
    }
    Ok(())
}

impl MaxwellCapacitance {
    /// Validated constructor: symmetric and positive definite.
    pub fn new(matrix: DMatrix<f64>, node_names: Vec<String>) -> Result<Self> {
        let c = Self::new_unchecked(matrix, node_names)?;
        if c.matrix.nrows() > 0 && c.matrix.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite {
                what: "Maxwell capacitance".into(),
                min_eigenvalue: linalg::min_eigenvalue(&c.matrix),
            });
        }
        Ok(c)
    }

    /// Symmetry-checked constructor that defers the definiteness check.
    pub fn new_unchecked(matrix: DMatrix<f64>, node_names: Vec<String>) -> Result<Self> {
        linalg::check_symmetric(&matrix, "Maxwell capacitance")?;
        check_names(matrix.nrows(), &node_names)?;
        Ok(MaxwellCapacitance { matrix: linalg::symmetrize(&matrix), node_names })
    }

    pub fn with_default_names(matrix: DMatrix<f64>) -> Result<Self> {
        let names = (1..=matrix.nrows()).map(|i| format!("n{i}")).collect();
        Self::new(matrix, names)
    }

    pub fn len(&self) -> usize {
        self.node_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.node_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::unknown(name, &self.node_names))
    }

    pub fn is_positive_definite(&self) -> bool {
        self.matrix.clone().cholesky().is_some()
    }
}

impl MutualCapacitance {
    pub fn new(matrix: DMatrix<f64>, node_names: Vec<String>) -> Result<Self> {
        linalg::check_symmetric(&matrix, "mutual capacitance")?;
        check_names(matrix.nrows(), &node_names)?;
        Ok(MutualCapacitance { matrix: linalg::symmetrize(&matrix), node_names })
    }
}

/// Diagonal becomes the row sums, off-diagonals flip sign.
pub fn maxwell_to_mutual(c: &MaxwellCapacitance) -> Result<MutualCapacitance> {
    linalg::check_symmetric(&c.matrix, "Maxwell capacitance")?;
    let n = c.matrix.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            c.matrix.row(i).sum()
        } else {
            -c.matrix[(i, j)]
        }
    });
    MutualCapacitance::new(m, c.node_names.clone())
}

pub fn mutual_to_maxwell(c: &MutualCapacitance) -> Result<MaxwellCapacitance> {
    linalg::check_symmetric(&c.matrix, "mutual capacitance")?;
    let n = c.matrix.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            let couplings: f64 = (0..n).filter(|&k| k != i).map(|k| c.matrix[(i, k)]).sum();
            c.matrix[(i, i)] + couplings
        } else {
            -c.matrix[(i, j)]
        }
    });
    MaxwellCapacitance::new_unchecked(m, c.node_names.clone())
}

/// Nearest-neighbour `rows × cols` grid.
///
/// Nodes are numbered with the shorter grid dimension varying fastest (row-major when
/// `rows >= cols`), which makes the matrix banded with bandwidth `min(rows, cols)`.
pub fn grid_capacitance(rows: usize, cols: usize, c_shunt: f64, c_couple: f64) -> Result<MaxwellCapacitance> {
    if rows == 0 || cols == 0 {
        return Err(Error::Invalid("grid needs at least one row and one column".into()));
    }
    if !(c_shunt > 0.0 && c_couple > 0.0) {
        return Err(Error::Invalid("grid capacitances must be positive".into()));
    }
    let n = rows * cols;
    let mut m = DMatrix::zeros(n, n);
    let idx = |r: usize, c: usize| if rows >= cols { r * cols + c } else { c * rows + r };
    for r in 0..rows {
        for c in 0..cols {
            let i = idx(r, c);
            m[(i, i)] += c_shunt;
            let mut neighbours = Vec::new();
            if r + 1 < rows {
                neighbours.push(idx(r + 1, c));
            }
            if c + 1 < cols {
                neighbours.push(idx(r, c + 1));
            }
            for j in neighbours {
                m[(i, i)] += c_couple;
                m[(j, j)] += c_couple;
                m[(i, j)] -= c_couple;
                m[(j, i)] -= c_couple;
            }
        }
    }
    let mut names = vec![String::new(); n];
    for r in 0..rows {
        for c in 0..cols {
            names[idx(r, c)] = format!("g{r}_{c}");
        }
    }
    MaxwellCapacitance::new(m, names)
}

/// `maxwell.v1` file layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaxwellJson {
    #[serde(default = "maxwell_schema")]
    pub schema: String,
    pub nodes: Vec<String>,
    /// Row-major, farads.
    pub matrix: Vec<f64>,
}

fn maxwell_schema() -> String {
    "maxwell.v1".into()
}

impl From<&MaxwellCapacitance> for MaxwellJson {
    fn from(c: &MaxwellCapacitance) -> Self {
        let n = c.len();
        MaxwellJson {
            schema: maxwell_schema(),
            nodes: c.node_names.clone(),
            matrix: (0..n * n).map(|k| c.matrix[(k / n, k % n)]).collect(),
        }
    }
}

impl TryFrom<MaxwellJson> for MaxwellCapacitance {
    type Error = Error;
    fn try_from(j: MaxwellJson) -> Result<Self> {
        let n = j.nodes.len();
        if j.matrix.len() != n * n {
            return Err(Error::Shape(format!("maxwell.v1: {} entries for {n} nodes", j.matrix.len())));
        }
        MaxwellCapacitance::new_unchecked(DMatrix::from_row_slice(n, n, &j.matrix), j.nodes)
    }
}
