use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{MctnError, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmbeddingPoint {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub label: f64,
}

/// Mean-pools each `L x h` representation over time and projects the pooled
/// vectors onto their top two principal components.
///
/// Components are ordered by decreasing variance (lower index first on ties)
/// and each is signed so that its largest-magnitude loading is positive.
pub fn export_embeddings_2d(reps: &[(String, Vec<Vec<f64>>)], labels: &[f64]) -> Result<Vec<EmbeddingPoint>> {
    if reps.len() < 2 {
        return Err(MctnError::Metric("embedding export needs at least 2 samples".into()));
    }
    if reps.len() != labels.len() {
        return Err(MctnError::Metric(format!("{} representations, {} labels", reps.len(), labels.len())));
    }
    let pooled = reps
        .iter()
        .map(|(id, rows)| {
            let first = rows.first().ok_or(MctnError::EmptySequence)?;
            let mut mean = vec![0.0; first.len()];
            for r in rows {
                if r.len() != mean.len() {
                    return Err(MctnError::Dimension {
                        context: format!("representation '{id}'"),
                        expected: mean.len(),
                        actual: r.len(),
                    });
                }
                mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
            }
            mean.iter_mut().for_each(|m| *m /= rows.len() as f64);
            Ok(mean)
        })
        .collect::<Result<Vec<_>>>()?;
    let coords = pca_2d(&pooled)?;
    Ok(reps
        .iter()
        .zip(coords)
        .zip(labels)
        .map(|(((id, _), (x, y)), &label)| EmbeddingPoint { id: id.clone(), x, y, label })
        .collect())
}

/// Projects row vectors onto their top two principal components.
pub fn pca_2d(points: &[Vec<f64>]) -> Result<Vec<(f64, f64)>> {
    let n = points.len();
    let d = points[0].len();
    if points.iter().any(|p| p.len() != d) {
        return Err(MctnError::Metric("points differ in dimension".into()));
    }
    let x = DMatrix::from_fn(n, d, |r, c| points[r][c]);
    let mean = x.row_mean();
    let centered = DMatrix::from_fn(n, d, |r, c| x[(r, c)] - mean[c]);
    let cov = centered.transpose() * &centered / n as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut axes = Vec::with_capacity(2);
    for &k in order.iter().take(2) {
        let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let mut lead = 0;
        for i in 1..d {
            if v[i].abs() > v[lead].abs() {
                lead = i;
            }
        }
        if v[lead] < 0.0 {
            v.iter_mut().for_each(|e| *e = -*e);
        }
        axes.push(v);
    }
    Ok((0..n)
        .map(|r| {
            let proj = |axis: &Vec<f64>| (0..d).map(|c| centered[(r, c)] * axis[c]).sum::<f64>();
            (proj(&axes[0]), axes.get(1).map(proj).unwrap_or(0.0))
        })
        .collect())
}

/// Distance between the two class centroids divided by the mean distance of
/// points to their own class centroid.
pub fn separation_ratio(points: &[(f64, f64)], classes: &[usize]) -> Result<f64> {
    let mut sums = [(0.0, 0.0, 0usize); 2];
    for (&(x, y), &c) in points.iter().zip(classes) {
        if c > 1 {
            return Err(MctnError::Metric(format!("separation expects 2 classes, found {c}")));
        }
        sums[c].0 += x;
        sums[c].1 += y;
        sums[c].2 += 1;
    }
    if sums.iter().any(|s| s.2 == 0) {
        return Err(MctnError::Metric("separation needs both classes present".into()));
    }
    let centroids: Vec<(f64, f64)> = sums.iter().map(|s| (s.0 / s.2 as f64, s.1 / s.2 as f64)).collect();
    let between = ((centroids[0].0 - centroids[1].0).powi(2) + (centroids[0].1 - centroids[1].1).powi(2)).sqrt();
    let within = points
        .iter()
        .zip(classes)
        .map(|(&(x, y), &c)| ((x - centroids[c].0).powi(2) + (y - centroids[c].1).powi(2)).sqrt())
        .sum::<f64>()
        / points.len() as f64;
    if within == 0.0 {
        return Ok(if between > 0.0 { f64::INFINITY } else { 0.0 });
    }
    Ok(between / within)
}

/// Writes points as CSV with header `id,x,y,label`.
pub fn write_embeddings_csv(points: &[EmbeddingPoint], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_reps_map_to_identical_points() {
        let r = vec![vec![1.0, 2.0, 3.0], vec![0.0, 1.0, 0.0]];
        let reps = vec![("a".to_string(), r.clone()), ("b".to_string(), r), ("c".to_string(), vec![vec![5.0, 0.0, 1.0]])];
        let pts = export_embeddings_2d(&reps, &[0.0, 0.0, 1.0]).unwrap();
        assert_eq!((pts[0].x, pts[0].y), (pts[1].x, pts[1].y));
    }

    #[test]
    fn centered_2d_points_keep_distances() {
        let pts = vec![vec![1.0, 0.5], vec![-1.0, 0.2], vec![0.3, -0.4], vec![-0.3, -0.3]];
        let out = pca_2d(&pts).unwrap();
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                let d0 = ((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt();
                let d1 = ((out[i].0 - out[j].0).powi(2) + (out[i].1 - out[j].1).powi(2)).sqrt();
                assert!((d0 - d1).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn csv_header() {
        let p = vec![EmbeddingPoint { id: "a".into(), x: 1.0, y: 2.0, label: -1.0 }];
        let mut buf = Vec::new();
        write_embeddings_csv(&p, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "id,x,y,label\na,1.0,2.0,-1.0\n");
    }
}
