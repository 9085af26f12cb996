use crate::error::{Error, Result};

/// Axis-aligned box `[lower_1, upper_1] x ... x [lower_d, upper_d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidArgument(format!(
                "box bounds must be non-empty and of equal length (got {} and {})",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (a, b)) in lower.iter().zip(&upper).enumerate() {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::InvalidArgument(format!("degenerate box along axis {}: [{a}, {b}]", i + 1)));
            }
        }
        Ok(BoxDomain { lower, upper })
    }

    /// The cube `[-half_width, half_width]^dim`.
    pub fn symmetric(half_width: f64, dim: usize) -> Result<Self> {
        Self::new(vec![-half_width; dim], vec![half_width; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    pub fn contains_origin(&self) -> bool {
        self.contains(&vec![0.0; self.dim()])
    }

    /// Coordinates of `n` equispaced samples along `axis`, endpoints included.
    pub fn axis_samples(&self, axis: usize, n: usize) -> Vec<f64> {
        let (a, b) = (self.lower[axis], self.upper[axis]);
        if n == 1 {
            return vec![0.5 * (a + b)];
        }
        (0..n)
            .map(|k| if k + 1 == n { b } else { a + (b - a) * k as f64 / (n - 1) as f64 })
            .collect()
    }

    /// Tensor grid with `n` points per axis, first coordinate varying fastest.
    pub fn grid(&self, n: usize) -> Vec<Vec<f64>> {
        let d = self.dim();
        let axes: Vec<Vec<f64>> = (0..d).map(|i| self.axis_samples(i, n)).collect();
        let total = n.pow(d as u32);
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            out.push(idx.iter().enumerate().map(|(i, &k)| axes[i][k]).collect());
            for slot in idx.iter_mut() {
                *slot += 1;
                if *slot < n {
                    break;
                }
                *slot = 0;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_row_major_with_endpoints() {
        let b = BoxDomain::new(vec![-1.0, 0.0], vec![1.0, 2.0]).unwrap();
        let g = b.grid(3);
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], vec![-1.0, 0.0]);
        assert_eq!(g[1], vec![0.0, 0.0]);
        assert_eq!(g[3], vec![-1.0, 1.0]);
        assert_eq!(g[8], vec![1.0, 2.0]);
    }

    #[test]
    fn rejects_degenerate_boxes() {
        assert!(BoxDomain::new(vec![1.0], vec![1.0]).is_err());
        assert!(BoxDomain::new(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(BoxDomain::new(vec![], vec![]).is_err());
    }
}
