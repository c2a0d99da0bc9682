// Dense helpers for the small systems that appear in Newton and eigen solves.

pub(crate) type Matrix = Vec<Vec<f64>>;

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn norm_inf_mat(a: &Matrix) -> f64 {
    a.iter()
        .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub(crate) fn norm_one_mat(a: &Matrix) -> f64 {
    let n = a.first().map_or(0, Vec::len);
    (0..n)
        .map(|j| a.iter().map(|row| row[j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub(crate) struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    /// Partial-pivoting factorization; `None` if a pivot is exactly zero.
    pub(crate) fn new(a: &Matrix) -> Option<Lu> {
        let n = a.len();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| lu[i][k].abs().total_cmp(&lu[j][k].abs()))?;
            if lu[p][k] == 0.0 || !lu[p][k].is_finite() {
                return None;
            }
            lu.swap(k, p);
            perm.swap(k, p);
            for i in k + 1..n {
                let m = lu[i][k] / lu[k][k];
                lu[i][k] = m;
                for j in k + 1..n {
                    lu[i][j] -= m * lu[k][j];
                }
            }
        }
        Some(Lu { lu, perm })
    }

    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.len();
        let mut x: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[i][j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[i][j] * x[j];
            }
            x[i] /= self.lu[i][i];
        }
        x
    }

    pub(crate) fn inverse(&self) -> Matrix {
        let n = self.lu.len();
        let mut inv = vec![vec![0.0; n]; n];
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[i][j] = col[i];
            }
        }
        inv
    }
}

/// 1-norm condition number, infinite for an exactly singular matrix.
pub(crate) fn condition(a: &Matrix) -> f64 {
    match Lu::new(a) {
        Some(lu) => norm_one_mat(a) * norm_one_mat(&lu.inverse()),
        None => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_and_condition() {
        let a = vec![vec![4.0, 1.0], vec![2.0, 3.0]];
        let lu = Lu::new(&a).unwrap();
        let x = lu.solve(&[1.0, 2.0]);
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-14);
        assert!((2.0 * x[0] + 3.0 * x[1] - 2.0).abs() < 1e-14);
        assert!(condition(&vec![vec![1.0, 2.0], vec![2.0, 4.0]]) > 1e12);
    }
}
