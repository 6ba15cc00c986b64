//! Partial matchings between input and output ports.
//!
//! A schedule is a 0/1 matrix with row and column sums at most one. We store
//! it as a row-to-column map, which makes the matching property structural on
//! the row side; column uniqueness is validated where it matters.

/// A partial matching of inputs (rows) to outputs (columns).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Matching {
    cols: Vec<Option<usize>>,
}

impl Matching {
    /// The empty schedule on `n` ports.
    pub fn empty(n: usize) -> Self {
        Matching {
            cols: vec![None; n],
        }
    }

    /// Build from a row-to-column map. Returns `None` if a column repeats.
    pub fn from_rows(cols: Vec<Option<usize>>) -> Option<Self> {
        let n = cols.len();
        let mut seen = vec![false; n];
        for &c in cols.iter().flatten() {
            if c >= n || seen[c] {
                return None;
            }
            seen[c] = true;
        }
        Some(Matching { cols })
    }

    pub fn n_ports(&self) -> usize {
        self.cols.len()
    }

    /// Number of matched pairs.
    pub fn size(&self) -> usize {
        self.cols.iter().flatten().count()
    }

    pub fn col_of(&self, row: usize) -> Option<usize> {
        self.cols[row]
    }

    pub fn row_of(&self, col: usize) -> Option<usize> {
        self.cols.iter().position(|&c| c == Some(col))
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.cols[row] == Some(col)
    }

    pub fn set(&mut self, row: usize, col: Option<usize>) {
        self.cols[row] = col;
    }

    /// Matched (row, col) pairs in row order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cols
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| c.map(|j| (i, j)))
    }

    /// Total weight of the schedule under an n x n weight matrix (row-major).
    pub fn weight(&self, weights: &[f64]) -> f64 {
        let n = self.n_ports();
        self.pairs().map(|(i, j)| weights[i * n + j]).sum()
    }

    /// True when some matched pair shares a row or column with (row, col),
    /// the pair itself excluded.
    pub fn blocks(&self, row: usize, col: usize) -> bool {
        match self.cols[row] {
            Some(c) if c != col => true,
            Some(_) => false, // (row, col) itself is matched
            None => self.row_of(col).is_some(),
        }
    }

    /// Row map view.
    pub fn rows(&self) -> &[Option<usize>] {
        &self.cols
    }

    /// Column-sum validity (each column used at most once).
    pub fn is_valid(&self) -> bool {
        let n = self.n_ports();
        let mut seen = vec![false; n];
        for &c in self.cols.iter().flatten() {
            if c >= n || seen[c] {
                return false;
            }
            seen[c] = true;
        }
        true
    }
}
