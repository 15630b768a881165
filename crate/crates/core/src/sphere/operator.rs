use crate::grid::MaturityGrid;

const HALF: usize = 2;
const WIDTH: usize = 2 * HALF + 1;

/// Square matrix with entries only on the five central diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    /// `bands[i][k] = M[i, i + k − 2]`.
    bands: Vec<[f64; WIDTH]>,
}

impl BandedMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            bands: vec![[0.0; WIDTH]; n],
        }
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    fn slot(i: usize, j: usize) -> Option<usize> {
        let k = j as isize - i as isize + HALF as isize;
        (0..WIDTH as isize).contains(&k).then_some(k as usize)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        Self::slot(i, j).map_or(0.0, |k| self.bands[i][k])
    }

    /// Adds `v` to entry `(i, j)`, which must lie inside the band.
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        let k = Self::slot(i, j).expect("entry outside the band");
        self.bands[i][k] += v;
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let lo = i.saturating_sub(HALF);
                let hi = (i + HALF).min(n - 1);
                (lo..=hi).map(|j| self.bands[i][j + HALF - i] * x[j]).sum()
            })
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let n = self.len();
        let mut t = Self::zeros(n);
        for i in 0..n {
            for j in i.saturating_sub(HALF)..=(i + HALF).min(n - 1) {
                t.add_to(j, i, self.get(i, j));
            }
        }
        t
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        Self {
            bands: self
                .bands
                .iter()
                .zip(&other.bands)
                .map(|(p, q)| std::array::from_fn(|k| a * p[k] + b * q[k]))
                .collect(),
        }
    }
}

/// `∂ₓ` on the grid with the bilinear form `B = WD` split as `B = S + A`,
/// `S` symmetric and `A` antisymmetric.
#[derive(Debug, Clone)]
pub struct DiscretizedOperator {
    grid: MaturityGrid,
    weights: Vec<f64>,
    d: BandedMatrix,
    sym: BandedMatrix,
    anti: BandedMatrix,
}

impl DiscretizedOperator {
    pub fn new(grid: &MaturityGrid) -> Self {
        let n = grid.len();
        let weights = grid.weights();
        let mut d = BandedMatrix::zeros(n);
        let mut b = BandedMatrix::zeros(n);
        for i in 0..n {
            for (j, c) in grid.upwind_row(i) {
                d.add_to(i, j, c);
                b.add_to(i, j, weights[i] * c);
            }
        }
        let bt = b.transpose();
        Self {
            grid: grid.clone(),
            weights,
            sym: b.combine(0.5, &bt, 0.5),
            anti: b.combine(0.5, &bt, -0.5),
            d,
        }
    }

    pub fn grid(&self) -> &MaturityGrid {
        &self.grid
    }

    pub fn derivative(&self) -> &BandedMatrix {
        &self.d
    }

    /// `S`, as a bilinear form.
    pub fn symmetric(&self) -> &BandedMatrix {
        &self.sym
    }

    /// `A`, as a bilinear form.
    pub fn antisymmetric(&self) -> &BandedMatrix {
        &self.anti
    }

    /// `Dx`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.d.apply(x)
    }

    /// `xᵀWDx = xᵀSx`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let dx = self.d.apply(x);
        x.iter()
            .zip(&dx)
            .zip(&self.weights)
            .map(|((a, b), w)| w * a * b)
            .sum()
    }

    /// `W⁻¹Sx`.
    pub fn symmetric_action(&self, x: &[f64]) -> Vec<f64> {
        self.sym
            .apply(x)
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| v / w)
            .collect()
    }

    /// `W⁻¹Ax`.
    pub fn antisymmetric_action(&self, x: &[f64]) -> Vec<f64> {
        self.anti
            .apply(x)
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| v / w)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_reassembles_the_form() {
        let g = MaturityGrid::uniform(10.0, 64).unwrap();
        let op = DiscretizedOperator::new(&g);
        let w = g.weights();
        let n = g.len();
        for i in 0..n {
            for j in i.saturating_sub(2)..=(i + 2).min(n - 1) {
                let b = w[i] * op.derivative().get(i, j);
                let s = op.symmetric().get(i, j);
                let a = op.antisymmetric().get(i, j);
                assert!((s + a - b).abs() < 1e-15);
                assert_eq!(s, op.symmetric().get(j, i));
                assert_eq!(a, -op.antisymmetric().get(j, i));
            }
        }
    }

    #[test]
    fn derivative_is_second_order() {
        let err = |n: usize| {
            let g = MaturityGrid::uniform(5.0, n).unwrap();
            let op = DiscretizedOperator::new(&g);
            let f: Vec<f64> = g.nodes().iter().map(|x| (0.7 * x).sin()).collect();
            op.apply(&f)
                .iter()
                .zip(g.nodes())
                .map(|(d, x)| (d - 0.7 * (0.7 * x).cos()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(201) / err(401);
        assert!((ratio - 4.0).abs() < 0.3, "{ratio}");
    }
}
