//! K-means on binary click vectors, for choosing the cluster count by the
//! elbow of the within-cluster sum of squares.

use crate::clicks::ClickData;
use crate::error::{BmcdError, Result};
use crate::rng::{domain, stream_rng};
use rand::{Rng, RngExt};

/// Within-cluster sum of squares achieved for one candidate cluster count.
#[derive(Debug, Clone, PartialEq)]
pub struct KmeansCell {
    pub n_clusters: usize,
    pub wcss: f64,
}

/// Lloyd's algorithm with k-means++ seeding on the users' binary item
/// vectors, best of `restarts` runs per candidate count.
pub fn kmeans_select(
    data: &ClickData,
    c_candidates: &[usize],
    restarts: usize,
    seed: u64,
) -> Result<Vec<KmeansCell>> {
    if data.n_users() == 0 {
        return Err(BmcdError::EmptyInput("no users".into()));
    }
    if c_candidates.is_empty() {
        return Err(BmcdError::invalid("c_candidates", "empty candidate list"));
    }
    if restarts == 0 {
        return Err(BmcdError::invalid("restarts", "must be >= 1"));
    }
    for &c in c_candidates {
        if c == 0 || c > data.n_users() {
            return Err(BmcdError::invalid(
                "c_candidates",
                format!("cluster count {c} outside 1..={}", data.n_users()),
            ));
        }
    }
    let mut out = Vec::with_capacity(c_candidates.len());
    for (ci, &c) in c_candidates.iter().enumerate() {
        let mut best = f64::INFINITY;
        for r in 0..restarts {
            let mut rng = stream_rng(seed, domain::KMEANS, (ci * restarts + r) as u64);
            let wcss = lloyd(data, c, &mut rng);
            if wcss < best {
                best = wcss;
            }
        }
        out.push(KmeansCell {
            n_clusters: c,
            wcss: best,
        });
    }
    Ok(out)
}

/// Squared Euclidean distance from a binary vector (given by its support)
/// to a dense center: |x|^2 - 2 x.mu + |mu|^2.
fn sq_dist(items: &[u32], center: &[f64], center_norm2: f64) -> f64 {
    let mut cross = 0.0;
    for &i in items {
        cross += center[i as usize];
    }
    (items.len() as f64 - 2.0 * cross + center_norm2).max(0.0)
}

fn lloyd(data: &ClickData, n_clusters: usize, rng: &mut impl Rng) -> f64 {
    let n_users = data.n_users();
    let n_items = data.n_items();

    // k-means++ seeding.
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(n_clusters);
    let first = rng.random_range(0..n_users);
    centers.push(binary_vector(data, first, n_items));
    let mut d2: Vec<f64> = (0..n_users)
        .map(|j| sq_dist(data.user(j).items(), &centers[0], norm2(&centers[0])))
        .collect();
    while centers.len() < n_clusters {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n_users - 1;
            for (j, &w) in d2.iter().enumerate() {
                acc += w;
                if u < acc {
                    chosen = j;
                    break;
                }
            }
            chosen
        } else {
            // Every point coincides with a center; any point works.
            rng.random_range(0..n_users)
        };
        let center = binary_vector(data, pick, n_items);
        let cn = norm2(&center);
        for j in 0..n_users {
            let d = sq_dist(data.user(j).items(), &center, cn);
            if d < d2[j] {
                d2[j] = d;
            }
        }
        centers.push(center);
    }

    let mut assign = vec![0usize; n_users];
    let max_iters = 100;
    for _ in 0..max_iters {
        let norms: Vec<f64> = centers.iter().map(|c| norm2(c)).collect();
        let mut changed = false;
        for j in 0..n_users {
            let items = data.user(j).items();
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = sq_dist(items, center, norms[c]);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assign[j] != best {
                assign[j] = best;
                changed = true;
            }
        }

        // Means per cluster; an empty cluster takes the point farthest
        // from its current center.
        let mut counts = vec![0usize; n_clusters];
        let mut sums = vec![vec![0.0; n_items]; n_clusters];
        for j in 0..n_users {
            counts[assign[j]] += 1;
            for &i in data.user(j).items() {
                sums[assign[j]][i as usize] += 1.0;
            }
        }
        for c in 0..n_clusters {
            if counts[c] == 0 {
                let norms: Vec<f64> = centers.iter().map(|x| norm2(x)).collect();
                let far = (0..n_users)
                    .max_by(|&a, &b| {
                        let da = sq_dist(data.user(a).items(), &centers[assign[a]], norms[assign[a]]);
                        let db = sq_dist(data.user(b).items(), &centers[assign[b]], norms[assign[b]]);
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                centers[c] = binary_vector(data, far, n_items);
                assign[far] = c;
                changed = true;
            } else {
                for i in 0..n_items {
                    centers[c][i] = sums[c][i] / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let norms: Vec<f64> = centers.iter().map(|c| norm2(c)).collect();
    (0..n_users)
        .map(|j| sq_dist(data.user(j).items(), &centers[assign[j]], norms[assign[j]]))
        .sum()
}

fn binary_vector(data: &ClickData, user: usize, n_items: usize) -> Vec<f64> {
    let mut v = vec![0.0; n_items];
    for &i in data.user(user).items() {
        v[i as usize] = 1.0;
    }
    v
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}
