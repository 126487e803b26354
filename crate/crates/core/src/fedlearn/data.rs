use std::io::Read;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::FedError;
use crate::he::FixedPointParams;

/// One party's feature columns for the shared, aligned set of individuals.
#[derive(Clone, Debug, PartialEq)]
pub struct PartyDataset {
    pub party: String,
    pub columns: Vec<String>,
    rows: usize,
    /// Row-major, `rows * columns.len()` entries.
    values: Vec<f64>,
}

/// Column means and population standard deviations removed at ingestion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl PartyDataset {
    pub fn new(party: &str, columns: Vec<String>, rows: &[Vec<f64>]) -> Result<Self, FedError> {
        let n = columns.len();
        if n == 0 {
            return Err(FedError::Data(format!("party {party} has no feature columns")));
        }
        let mut values = Vec::with_capacity(rows.len() * n);
        for (l, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(FedError::Dimension(format!(
                    "party {party} row {l} has {} values, expected {n}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(FedError::Data(format!("party {party} row {l} holds non-finite value {v}")));
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            party: party.into(),
            columns,
            rows: rows.len(),
            values,
        })
    }

    /// Reads a CSV whose header names the columns and whose rows are numbers.
    pub fn from_csv<R: Read>(party: &str, reader: R) -> Result<Self, FedError> {
        let (columns, rows) = read_numeric_csv(reader)?;
        Self::new(party, columns, &rows)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, l: usize) -> &[f64] {
        let n = self.cols();
        &self.values[l * n..(l + 1) * n]
    }

    pub fn get(&self, l: usize, j: usize) -> f64 {
        self.values[l * self.cols() + j]
    }

    /// Copies out the columns in `range` as a new party's dataset.
    pub fn select_columns(&self, party: &str, range: std::ops::Range<usize>) -> Result<Self, FedError> {
        if range.is_empty() || range.end > self.cols() {
            return Err(FedError::Dimension(format!(
                "column range {range:?} outside 0..{}",
                self.cols()
            )));
        }
        let rows: Vec<Vec<f64>> = (0..self.rows).map(|l| self.row(l)[range.clone()].to_vec()).collect();
        Self::new(party, self.columns[range.clone()].to_vec(), &rows)
    }

    /// Rescales every column to zero mean and unit population variance.
    pub fn standardize(&mut self) -> Result<Standardization, FedError> {
        let (m, n) = (self.rows as f64, self.cols());
        let mut mean = vec![0.0; n];
        let mut std = vec![0.0; n];
        for j in 0..n {
            let col = (0..self.rows).map(|l| self.get(l, j));
            mean[j] = col.clone().sum::<f64>() / m;
            std[j] = (col.map(|v| (v - mean[j]).powi(2)).sum::<f64>() / m).sqrt();
            if !(std[j] > 0.0) {
                return Err(FedError::Data(format!(
                    "party {} column {} is constant and cannot be standardized",
                    self.party, self.columns[j]
                )));
            }
        }
        for l in 0..self.rows {
            for j in 0..n {
                let v = &mut self.values[l * n + j];
                *v = (*v - mean[j]) / std[j];
            }
        }
        Ok(Standardization { mean, std })
    }
}

/// Regression targets, held by the FIU only.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelSet {
    pub values: Vec<f64>,
}

impl LabelSet {
    pub fn new(values: Vec<f64>) -> Result<Self, FedError> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(FedError::Data(format!("non-finite label {v}")));
        }
        Ok(Self { values })
    }

    /// Reads a one-column CSV with a header.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, FedError> {
        let (columns, rows) = read_numeric_csv(reader)?;
        if columns.len() != 1 {
            return Err(FedError::Data(format!("label file has {} columns, expected 1", columns.len())));
        }
        Self::new(rows.into_iter().map(|r| r[0]).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn read_numeric_csv<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<f64>>), FedError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let columns = rdr
        .headers()
        .map_err(|e| FedError::Data(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| FedError::Data(e.to_string()))?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| FedError::Data(format!("row {}: {f:?} is not a number", i + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok((columns, rows))
}

/// A party's private slice of the model.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightsPartition {
    pub party: String,
    pub weights: Vec<f64>,
    pub learning_rate: f64,
    pub fixed_point: FixedPointParams,
}

impl WeightsPartition {
    /// Weights drawn uniformly from `[-0.01, 0.01]`.
    pub fn random<R: Rng>(party: &str, n: usize, learning_rate: f64, fixed_point: FixedPointParams, rng: &mut R) -> Self {
        Self {
            party: party.into(),
            weights: (0..n).map(|_| rng.gen_range(-0.01..=0.01)).collect(),
            learning_rate,
            fixed_point,
        }
    }

    fn check(&self, data: &PartyDataset) -> Result<(), FedError> {
        if data.cols() != self.weights.len() {
            return Err(FedError::Dimension(format!(
                "party {} has {} weights for {} columns",
                self.party,
                self.weights.len(),
                data.cols()
            )));
        }
        Ok(())
    }

    /// `<x_l, w>` for every row `l`.
    pub fn partial_predictions(&self, data: &PartyDataset) -> Result<Vec<f64>, FedError> {
        self.check(data)?;
        Ok((0..data.rows())
            .map(|l| data.row(l).iter().zip(&self.weights).map(|(x, w)| x * w).sum())
            .collect())
    }

    /// `(1/m) Σ_l E_l x_lj`: this party's slice of the mean-squared-error gradient
    /// (up to the factor 2 absorbed into the learning rate).
    pub fn gradient(&self, data: &PartyDataset, residuals: &[f64]) -> Result<Vec<f64>, FedError> {
        self.check(data)?;
        if residuals.len() != data.rows() {
            return Err(FedError::Dimension(format!(
                "{} residuals for {} rows",
                residuals.len(),
                data.rows()
            )));
        }
        let m = data.rows() as f64;
        let mut g = vec![0.0; self.weights.len()];
        for (l, e) in residuals.iter().enumerate() {
            for (gj, x) in g.iter_mut().zip(data.row(l)) {
                *gj += e * x;
            }
        }
        g.iter_mut().for_each(|gj| *gj /= m);
        Ok(g)
    }

    /// One gradient step; returns the largest absolute weight change.
    pub fn update(&mut self, data: &PartyDataset, residuals: &[f64]) -> Result<f64, FedError> {
        let g = self.gradient(data, residuals)?;
        let mut max_step: f64 = 0.0;
        for (w, gj) in self.weights.iter_mut().zip(g) {
            let step = self.learning_rate * gj;
            *w -= step;
            max_step = max_step.max(step.abs());
        }
        Ok(max_step)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn dataset(rows: &[Vec<f64>]) -> PartyDataset {
        let cols = (0..rows[0].len()).map(|j| format!("x{j}")).collect();
        PartyDataset::new("p", cols, rows).unwrap()
    }

    fn partition(weights: Vec<f64>, alpha: f64) -> WeightsPartition {
        WeightsPartition {
            party: "p".into(),
            weights,
            learning_rate: alpha,
            fixed_point: FixedPointParams::default(),
        }
    }

    #[test]
    fn partial_predictions_small_cases() {
        let d = dataset(&[vec![1.0, 2.0], vec![3.0, -1.0]]);
        assert_eq!(partition(vec![0.0, 0.0], 0.1).partial_predictions(&d).unwrap(), vec![0.0, 0.0]);
        let ones = dataset(&[vec![1.0], vec![1.0], vec![1.0]]);
        assert_eq!(partition(vec![2.0], 0.1).partial_predictions(&ones).unwrap(), vec![2.0; 3]);
        assert!(matches!(
            partition(vec![1.0], 0.1).partial_predictions(&d),
            Err(FedError::Dimension(_))
        ));
    }

    #[test]
    fn partial_predictions_match_matrix_vector_product() {
        let mut r = rng::seeded(3);
        let rows: Vec<Vec<f64>> = (0..5).map(|_| (0..3).map(|_| r.gen_range(-5.0..5.0)).collect()).collect();
        let w: Vec<f64> = (0..3).map(|_| r.gen_range(-1.0..1.0)).collect();
        let x = nalgebra::DMatrix::from_fn(5, 3, |i, j| rows[i][j]);
        let expected = &x * nalgebra::DVector::from_vec(w.clone());
        let got = partition(w, 0.1).partial_predictions(&dataset(&rows)).unwrap();
        for (g, e) in got.iter().zip(expected.iter()) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn update_steps() {
        let d = dataset(&[vec![1.0]]);
        let mut w = partition(vec![0.3], 0.5);
        assert_eq!(w.update(&d, &[0.0]).unwrap(), 0.0);
        assert_eq!(w.weights, vec![0.3]);
        let step = w.update(&d, &[2.0]).unwrap();
        assert!((step - 1.0).abs() < 1e-15);
        assert!((w.weights[0] - (0.3 - 1.0)).abs() < 1e-15);
        assert!(w.update(&d, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut r = rng::seeded(9);
        for _ in 0..20 {
            let rows: Vec<Vec<f64>> = (0..6).map(|_| (0..2).map(|_| r.gen_range(-2.0..2.0)).collect()).collect();
            let y: Vec<f64> = (0..6).map(|_| r.gen_range(-3.0..3.0)).collect();
            let d = dataset(&rows);
            let w = partition(vec![r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)], 0.1);
            // Loss with the gradient's normalisation: (1 / 2m) Σ (pred - y)².
            let loss = |w: &WeightsPartition| {
                let p = w.partial_predictions(&d).unwrap();
                p.iter().zip(&y).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / 12.0
            };
            let e: Vec<f64> = w.partial_predictions(&d).unwrap().iter().zip(&y).map(|(p, y)| p - y).collect();
            let g = w.gradient(&d, &e).unwrap();
            for j in 0..2 {
                let h = 1e-6;
                let mut plus = w.clone();
                plus.weights[j] += h;
                let mut minus = w.clone();
                minus.weights[j] -= h;
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                assert!((fd - g[j]).abs() <= 1e-5 * g[j].abs().max(1e-3), "{fd} vs {}", g[j]);
            }
        }
    }

    #[test]
    fn standardize_and_csv() {
        let csv = "age, income\n30, 100\n40, 300\n50, 200\n";
        let mut d = PartyDataset::from_csv("bank", csv.as_bytes()).unwrap();
        assert_eq!(d.columns, vec!["age", "income"]);
        let s = d.standardize().unwrap();
        assert_eq!(s.mean, vec![40.0, 200.0]);
        for j in 0..2 {
            let col: Vec<f64> = (0..3).map(|l| d.get(l, j)).collect();
            assert!(col.iter().sum::<f64>().abs() < 1e-12);
            assert!((col.iter().map(|v| v * v).sum::<f64>() / 3.0 - 1.0).abs() < 1e-12);
        }
        let mut constant = PartyDataset::from_csv("bank", "a\n1\n1\n".as_bytes()).unwrap();
        assert!(constant.standardize().is_err());
        assert!(PartyDataset::from_csv("bank", "a\nx\n".as_bytes()).is_err());
        assert!(LabelSet::from_csv("y,z\n1,2\n".as_bytes()).is_err());
        assert_eq!(LabelSet::from_csv("y\n1.5\n-2\n".as_bytes()).unwrap().values, vec![1.5, -2.0]);
    }

    #[test]
    fn random_init_is_small() {
        let w = WeightsPartition::random("p", 1000, 0.1, FixedPointParams::default(), &mut rng::seeded(1));
        assert!(w.weights.iter().all(|v| v.abs() <= 0.01));
        assert!(w.weights.iter().any(|v| *v < 0.0) && w.weights.iter().any(|v| *v > 0.0));
    }
}
