use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridSpec, Window};

/// Windowed mass observations `y_{jk}` at times `t_j` over windows `Q_k`,
/// with Gaussian noise covariance `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ObservationFile", into = "ObservationFile")]
pub struct ObservationSet {
    windows: Vec<Window>,
    times: Vec<f64>,
    y: Vec<f64>,
    sigma: Vec<f64>,
    /// Lower Cholesky factor of `sigma`.
    chol: DMatrix<f64>,
}

/// On-disk form. `sigma` is dense row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationFile {
    pub windows: Vec<Vec<f64>>,
    pub times: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl TryFrom<ObservationFile> for ObservationSet {
    type Error = Error;

    fn try_from(f: ObservationFile) -> Result<Self> {
        let windows = f.windows.iter().map(|w| Window::from_flat(w)).collect::<Result<Vec<_>>>()?;
        ObservationSet::new(windows, f.times, f.y, f.sigma)
    }
}

impl From<ObservationSet> for ObservationFile {
    fn from(o: ObservationSet) -> Self {
        ObservationFile {
            windows: o.windows.iter().map(Window::to_flat).collect(),
            times: o.times,
            y: o.y,
            sigma: o.sigma,
        }
    }
}

impl ObservationSet {
    pub fn new(windows: Vec<Window>, times: Vec<f64>, y: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if windows.is_empty() || times.is_empty() {
            return Err(Error::input("observations need at least one window and one time"));
        }
        for (i, a) in windows.iter().enumerate() {
            for b in &windows[i + 1..] {
                if a.overlaps(b) {
                    return Err(Error::input(format!(
                        "observation windows {:?} and {:?} overlap",
                        a.to_flat(),
                        b.to_flat()
                    )));
                }
            }
        }
        if times.iter().any(|t| !(t.is_finite() && *t > 0.0)) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::input("observation times must be positive and strictly increasing"));
        }
        let m = windows.len() * times.len();
        if y.len() != m {
            return Err(Error::input(format!("expected {m} observations, got {}", y.len())));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("observations must be finite"));
        }
        if sigma.len() != m * m {
            return Err(Error::input(format!("sigma must be {m}x{m} row-major, got {} entries", sigma.len())));
        }
        let mat = DMatrix::from_row_slice(m, m, &sigma);
        if (&mat - mat.transpose()).amax() > 1e-12 * mat.amax() {
            return Err(Error::input("sigma is not symmetric"));
        }
        let chol = mat
            .cholesky()
            .ok_or_else(|| Error::input("sigma is not positive definite"))?
            .l();
        Ok(ObservationSet { windows, times, y, sigma, chol })
    }

    /// Independent noise with common standard deviation `std`.
    pub fn with_iid_noise(windows: Vec<Window>, times: Vec<f64>, y: Vec<f64>, std: f64) -> Result<Self> {
        let m = y.len();
        let mut sigma = vec![0.0; m * m];
        for i in 0..m {
            sigma[i * m + i] = std * std;
        }
        ObservationSet::new(windows, times, y, sigma)
    }

    pub fn windows(&self) -> &[Window] {
        &self.windows
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Checks every window against the grid.
    pub fn check_grid(&self, spec: &GridSpec) -> Result<()> {
        for w in &self.windows {
            w.cell_ranges(spec)?;
        }
        Ok(())
    }

    /// `r^T sigma^{-1} r`.
    pub fn weighted_sq(&self, r: &[f64]) -> Result<f64> {
        if r.len() != self.y.len() {
            return Err(Error::input(format!("residual has length {}, expected {}", r.len(), self.y.len())));
        }
        let z = self
            .chol
            .solve_lower_triangular(&DVector::from_column_slice(r))
            .ok_or_else(|| Error::input("singular covariance factor"))?;
        Ok(z.norm_squared())
    }

    /// `|y - prediction|^2_sigma`.
    pub fn misfit(&self, prediction: &[f64]) -> Result<f64> {
        let r: Vec<f64> = self.y.iter().zip(prediction).map(|(a, b)| a - b).collect();
        self.weighted_sq(&r)
    }

    pub fn with_y(&self, y: Vec<f64>) -> Result<Self> {
        ObservationSet::new(self.windows.clone(), self.times.clone(), y, self.sigma.clone())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
