/// k-nearest-neighbour regression under Euclidean distance. Distance ties
/// go to the earlier training row.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Knn {
    pub k: usize,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl Knn {
    pub fn fit(x: &[Vec<f64>], y: &[f64], k: usize) -> Knn {
        Knn {
            k,
            x: x.to_vec(),
            y: y.to_vec(),
        }
    }

    pub fn predict(&self, q: &[f64]) -> f64 {
        let mut dist: Vec<(f64, usize)> = self
            .x
            .iter()
            .enumerate()
            .map(|(i, r)| {
                (
                    r.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
                    i,
                )
            })
            .collect();
        let k = self.k.clamp(1, dist.len());
        let by = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        dist.select_nth_unstable_by(k - 1, by);
        dist[..k].iter().map(|&(_, i)| self.y[i]).sum::<f64>() / k as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_of_equidistant_neighbours() {
        let x = vec![
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![-1.0, 0.0],
            vec![5.0, 5.0],
        ];
        let m = Knn::fit(&x, &[0.2, 0.4, 0.9, 0.0], 3);
        assert!((m.predict(&[0.0, 0.0]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn k_larger_than_rows_uses_all() {
        let m = Knn::fit(&[vec![0.0], vec![1.0]], &[0.0, 1.0], 9);
        assert_eq!(m.predict(&[0.0]), 0.5);
    }

    #[test]
    fn ties_prefer_earlier_rows() {
        let m = Knn::fit(&[vec![-1.0], vec![1.0]], &[0.25, 0.75], 1);
        assert_eq!(m.predict(&[0.0]), 0.25);
    }
}
