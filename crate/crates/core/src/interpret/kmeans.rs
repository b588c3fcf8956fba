//! Lloyd's algorithm with k-means++ seeding, empty-cluster repair, and
//! deterministic multi-restart selection.

use rand::Rng;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::seeds;

#[derive(Debug, Clone)]
pub struct KMeansResult {
    /// [k, n] centroid matrix.
    pub centroids: Tensor,
    /// Cluster id per data row; each row maps to its nearest centroid
    /// (ties to the lowest id).
    pub assignment: Vec<usize>,
    /// Total within-cluster squared distance.
    pub inertia: f64,
    pub iterations_run: usize,
    /// Inertia after each Lloyd iteration; non-increasing.
    pub inertia_history: Vec<f64>,
    pub seed: u64,
}

pub const KMEANS_MAX_ITER: usize = 100;
pub const KMEANS_TOL: f64 = 1e-6;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &Tensor, point: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.shape[0] {
        let d = sq_dist(centroids.row(c), point);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding: first centroid uniform, the rest weighted by squared
/// distance to the nearest chosen centroid.
fn seed_centroids(data: &Tensor, k: usize, rng: &mut impl Rng) -> Tensor {
    let (rows, dim) = (data.shape[0], data.shape[1]);
    let mut centroids = Tensor::zeros(&[k, dim]);
    let first = rng.gen_range(0..rows);
    centroids.row_mut(0).copy_from_slice(data.row(first));
    let mut min_d: Vec<f64> = (0..rows).map(|r| sq_dist(data.row(r), data.row(first))).collect();
    for c in 1..k {
        let total: f64 = min_d.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen_range(0.0..total);
            let mut chosen = rows - 1;
            for (r, &d) in min_d.iter().enumerate() {
                if target < d {
                    chosen = r;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.gen_range(0..rows)
        };
        centroids.row_mut(c).copy_from_slice(data.row(pick));
        for r in 0..rows {
            let d = sq_dist(data.row(r), data.row(pick));
            if d < min_d[r] {
                min_d[r] = d;
            }
        }
    }
    centroids
}

pub fn kmeans(
    data: &Tensor,
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<KMeansResult> {
    if data.shape.len() != 2 {
        return Err(Error::Shape(format!("kmeans expects a matrix, got {:?}", data.shape)));
    }
    let (rows, dim) = (data.shape[0], data.shape[1]);
    if k == 0 || k > rows {
        return Err(Error::Precondition(format!("k must be in 1..={rows}, got {k}")));
    }
    let mut rng = seeds::substream(seed, "kmeans");
    let mut centroids = seed_centroids(data, k, &mut rng);
    let mut assignment = vec![0usize; rows];
    let mut inertia_history = Vec::new();
    let mut iterations_run = 0;

    for _ in 0..max_iter {
        iterations_run += 1;
        let mut inertia = 0.0;
        for r in 0..rows {
            let (c, d) = nearest(&centroids, data.row(r));
            assignment[r] = c;
            inertia += d;
        }
        inertia_history.push(inertia);

        let mut next = Tensor::zeros(&[k, dim]);
        let mut counts = vec![0usize; k];
        for r in 0..rows {
            counts[assignment[r]] += 1;
            let row = next.row_mut(assignment[r]);
            for (a, &b) in row.iter_mut().zip(data.row(r)) {
                *a += b;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for v in next.row_mut(c) {
                    *v /= counts[c] as f64;
                }
            } else {
                // repair: seize the point farthest from its own centroid
                let far = (0..rows)
                    .max_by(|&a, &b| {
                        let da = sq_dist(data.row(a), centroids.row(assignment[a]));
                        let db = sq_dist(data.row(b), centroids.row(assignment[b]));
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                next.row_mut(c).copy_from_slice(data.row(far));
            }
        }

        let shift = (0..k)
            .map(|c| sq_dist(centroids.row(c), next.row(c)).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        if shift < tol {
            break;
        }
    }

    for r in 0..rows {
        assignment[r] = nearest(&centroids, data.row(r)).0;
    }
    hartigan_refine(data, k, &mut assignment);

    // centroids as exact cluster means of the final assignment
    centroids = Tensor::zeros(&[k, dim]);
    let mut counts = vec![0usize; k];
    for r in 0..rows {
        counts[assignment[r]] += 1;
        for (a, &b) in centroids.row_mut(assignment[r]).iter_mut().zip(data.row(r)) {
            *a += b;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            for v in centroids.row_mut(c) {
                *v /= counts[c] as f64;
            }
        }
    }
    let inertia = (0..rows).map(|r| sq_dist(data.row(r), centroids.row(assignment[r]))).sum();
    inertia_history.push(inertia);
    Ok(KMeansResult { centroids, assignment, inertia, iterations_run, inertia_history, seed })
}

/// Single-point improvement passes. A move of row i from cluster a to b
/// changes the total within-cluster sum by
/// n_b/(n_b+1)·d(i,c_b)² − n_a/(n_a−1)·d(i,c_a)²; apply improving moves
/// until none remain. Fixed points of this rule also satisfy the
/// nearest-centroid property, and it escapes Lloyd fixed points that are
/// not single-swap optimal.
fn hartigan_refine(data: &Tensor, k: usize, assignment: &mut [usize]) {
    let (rows, dim) = (data.shape[0], data.shape[1]);
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (r, &c) in assignment.iter().enumerate() {
        counts[c] += 1;
        for d in 0..dim {
            sums[c][d] += data.row(r)[d];
        }
    }
    let dist_to_mean = |sums: &[Vec<f64>], counts: &[usize], c: usize, row: &[f64]| -> f64 {
        let n = counts[c] as f64;
        row.iter()
            .zip(&sums[c])
            .map(|(&x, &s)| (x - s / n) * (x - s / n))
            .sum()
    };
    for _pass in 0..100 {
        let mut improved = false;
        for r in 0..rows {
            let a = assignment[r];
            if counts[a] <= 1 {
                continue;
            }
            let na = counts[a] as f64;
            let cost_out = na / (na - 1.0) * dist_to_mean(&sums, &counts, a, data.row(r));
            let mut best: Option<(usize, f64)> = None;
            for b in 0..k {
                if b == a {
                    continue;
                }
                let nb = counts[b] as f64;
                let cost_in = nb / (nb + 1.0) * dist_to_mean(&sums, &counts, b, data.row(r));
                let delta = cost_in - cost_out;
                if delta < -1e-12 && best.map_or(true, |(_, d)| delta < d) {
                    best = Some((b, delta));
                }
            }
            if let Some((b, _)) = best {
                counts[a] -= 1;
                counts[b] += 1;
                for d in 0..dim {
                    sums[a][d] -= data.row(r)[d];
                    sums[b][d] += data.row(r)[d];
                }
                assignment[r] = b;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
}

/// Best of `restarts` seeded runs by inertia; ties keep the lowest seed.
pub fn kmeans_restarts(
    data: &Tensor,
    k: usize,
    base_seed: u64,
    restarts: usize,
    max_iter: usize,
    tol: f64,
) -> Result<KMeansResult> {
    if restarts == 0 {
        return Err(Error::Config("restarts must be >= 1".into()));
    }
    let mut best: Option<KMeansResult> = None;
    for s in 0..restarts as u64 {
        let run = kmeans(data, k, base_seed + s, max_iter, tol)?;
        if best.as_ref().map_or(true, |b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.unwrap())
}

/// Adjusted Rand index between two labelings of the same rows.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ka = a.iter().max().map_or(0, |&m| m + 1);
    let kb = b.iter().max().map_or(0, |&m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let comb2 = |n: u64| (n * n.saturating_sub(1) / 2) as f64;
    let sum_cells: f64 = table.iter().flatten().map(|&n| comb2(n)).sum();
    let sum_a: f64 = table.iter().map(|row| comb2(row.iter().sum())).sum();
    let sum_b: f64 = (0..kb)
        .map(|j| comb2(table.iter().map(|row| row[j]).sum()))
        .sum();
    let total = comb2(a.len() as u64);
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if (max - expected).abs() < 1e-12 {
        return 1.0;
    }
    (sum_cells - expected) / (max - expected)
}
