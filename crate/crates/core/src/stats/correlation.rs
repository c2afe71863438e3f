use crate::error::{Error, Result};

use super::{check_finite, mean};

/// Pearson product-moment correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput(format!(
            "series lengths differ: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::InsufficientData("correlation needs at least 3 pairs".into()));
    }
    check_finite(xs)?;
    check_finite(ys)?;
    let mx = mean(xs);
    let my = mean(ys);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("correlation of a constant series".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties given the mean of the ranks they span.
pub fn midranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = 0.5 * ((i + 1) + (j + 1)) as f64;
        for &idx in &order[i..=j] {
            ranks[idx] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson on midranks (exact, no sampling).
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput("series lengths differ".into()));
    }
    check_finite(xs)?;
    check_finite(ys)?;
    pearson(&midranks(xs), &midranks(ys))
}

/// Pairwise correlations among named series of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub n: usize,
    pub pearson: Vec<Vec<f64>>,
    pub spearman: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    /// Square table with Pearson's r below the diagonal and Spearman's rho
    /// above it.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("variable");
        for name in &self.names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (i, name) in self.names.iter().enumerate() {
            out.push_str(name);
            for j in 0..self.names.len() {
                let v = match i.cmp(&j) {
                    std::cmp::Ordering::Greater => self.pearson[i][j],
                    std::cmp::Ordering::Less => self.spearman[i][j],
                    std::cmp::Ordering::Equal => 1.0,
                };
                out.push(',');
                out.push_str(&crate::fixed6(v));
            }
            out.push('\n');
        }
        out
    }
}

pub fn correlation_matrix(columns: &[(&str, &[f64])]) -> Result<CorrelationMatrix> {
    let k = columns.len();
    if k < 2 {
        return Err(Error::InsufficientData("correlation matrix needs 2 series".into()));
    }
    let n = columns[0].1.len();
    let mut pearson_m = vec![vec![1.0; k]; k];
    let mut spearman_m = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let r = pearson(columns[i].1, columns[j].1)?;
            let rho = spearman(columns[i].1, columns[j].1)?;
            pearson_m[i][j] = r;
            pearson_m[j][i] = r;
            spearman_m[i][j] = rho;
            spearman_m[j][i] = rho;
        }
    }
    Ok(CorrelationMatrix {
        names: columns.iter().map(|(n, _)| n.to_string()).collect(),
        n,
        pearson: pearson_m,
        spearman: spearman_m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_linear() {
        let xs = [1.0, 2.0, 4.0, 7.0, 11.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((pearson(&xs, &ys).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson(&xs, &neg).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(pearson(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn midrank_ties() {
        assert_eq!(midranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
        assert_eq!(midranks(&[5.0, 5.0, 5.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn spearman_monotone() {
        let xs = [0.3, 1.2, -4.0, 8.0, 2.2, 2.3];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| x.exp()).collect();
        assert_eq!(spearman(&xs, &ys).unwrap(), 1.0);
        let rev: Vec<f64> = xs.iter().map(|x| -x * x * x).collect();
        assert_eq!(spearman(&xs, &rev).unwrap(), -1.0);
    }

    #[test]
    fn spearman_with_ties_matches_hand_midranks() {
        let xs = [1.0, 2.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 2.0, 2.0];
        // midranks: x = 1, 2.5, 2.5, 4 ; y = 1, 4, 2.5, 2.5
        let expected = pearson(&[1.0, 2.5, 2.5, 4.0], &[1.0, 4.0, 2.5, 2.5]).unwrap();
        assert_eq!(spearman(&xs, &ys).unwrap(), expected);
    }

    #[test]
    fn matrix_layout() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [1.0, 4.0, 9.0, 15.0];
        let m = correlation_matrix(&[("a", &a), ("b", &b)]).unwrap();
        let csv = m.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "variable,a,b");
        assert_eq!(lines[1], "a,1.000000,1.000000");
        // r = 23.5 / sqrt(5 * 112.75)
        assert_eq!(lines[2], "b,0.989748,1.000000");
        assert!((m.pearson[1][0] - 23.5 / (5.0f64 * 112.75).sqrt()).abs() < 1e-15);
    }
}
