//! Affinity Propagation: exemplar-based clustering by responsibility and
//! availability message passing over a similarity matrix.
//!
//! The input diagonal is replaced by a scalar preference (the self-similarity
//! that controls cluster count) and a tiny index-dependent jitter is added so
//! exact ties resolve reproducibly instead of oscillating. Convergence is
//! declared when the candidate exemplar set is unchanged for
//! `convergence_window` consecutive iterations.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Clustering result: one exemplar per point, exemplars own themselves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApOutcome {
    /// Cluster index per point, in order of ascending exemplar index.
    pub labels: Vec<usize>,
    /// Point indices of the exemplars, ascending.
    pub exemplars: Vec<usize>,
    pub converged: bool,
    pub iterations: usize,
}

const TIE_JITTER: f64 = 1e-12;

/// Runs Affinity Propagation on a square similarity matrix (higher = more
/// similar). Deterministic: no randomness, ties broken by the fixed jitter.
pub fn affinity_propagation(
    similarity: &Array2<f64>,
    preference: f64,
    damping: f64,
    max_iterations: usize,
    convergence_window: usize,
) -> Result<ApOutcome> {
    let n = similarity.nrows();
    if similarity.ncols() != n {
        return Err(Error::Data(format!(
            "similarity matrix must be square, got {}x{}",
            n,
            similarity.ncols()
        )));
    }
    if n == 0 {
        return Err(Error::Data("similarity matrix is empty".into()));
    }
    if similarity.iter().any(|v| !v.is_finite()) || !preference.is_finite() {
        return Err(Error::Numerical(
            "similarity matrix and preference must be finite".into(),
        ));
    }
    if !(0.5..1.0).contains(&damping) {
        return Err(Error::Config(format!(
            "damping must lie in [0.5, 1), got {damping}"
        )));
    }
    if n == 1 {
        return Ok(ApOutcome {
            labels: vec![0],
            exemplars: vec![0],
            converged: true,
            iterations: 0,
        });
    }

    // working similarity: preference on the diagonal, jitter everywhere
    let mut s = similarity.clone();
    for i in 0..n {
        s[[i, i]] = preference;
        for j in 0..n {
            s[[i, j]] += TIE_JITTER * (i + j * n) as f64;
        }
    }

    let mut r = Array2::<f64>::zeros((n, n));
    let mut a = Array2::<f64>::zeros((n, n));
    let mut prev_candidates = vec![false; n];
    let mut stable = 0usize;
    let mut converged = false;
    let mut iterations = 0usize;

    for iter in 0..max_iterations {
        iterations = iter + 1;

        // responsibilities: r(i,k) <- s(i,k) - max_{k' != k} (a(i,k') + s(i,k'))
        for i in 0..n {
            let mut max1 = f64::NEG_INFINITY;
            let mut max2 = f64::NEG_INFINITY;
            let mut arg1 = 0usize;
            for k in 0..n {
                let v = a[[i, k]] + s[[i, k]];
                if v > max1 {
                    max2 = max1;
                    max1 = v;
                    arg1 = k;
                } else if v > max2 {
                    max2 = v;
                }
            }
            for k in 0..n {
                let bound = if k == arg1 { max2 } else { max1 };
                let updated = s[[i, k]] - bound;
                r[[i, k]] = damping * r[[i, k]] + (1.0 - damping) * updated;
            }
        }

        // availabilities: a(i,k) <- min(0, r(k,k) + sum_{i' != i,k} max(0, r(i',k)))
        //                 a(k,k) <- sum_{i' != k} max(0, r(i',k))
        for k in 0..n {
            let mut pos_sum = 0.0;
            for i in 0..n {
                if i != k {
                    pos_sum += r[[i, k]].max(0.0);
                }
            }
            for i in 0..n {
                let updated = if i == k {
                    pos_sum
                } else {
                    (r[[k, k]] + pos_sum - r[[i, k]].max(0.0)).min(0.0)
                };
                a[[i, k]] = damping * a[[i, k]] + (1.0 - damping) * updated;
            }
        }

        let candidates: Vec<bool> = (0..n).map(|k| a[[k, k]] + r[[k, k]] > 0.0).collect();
        let count = candidates.iter().filter(|&&c| c).count();
        if candidates == prev_candidates && count > 0 {
            stable += 1;
            if stable >= convergence_window {
                converged = true;
                break;
            }
        } else {
            stable = 0;
        }
        prev_candidates = candidates;
    }

    // exemplar extraction with one refinement pass: within each provisional
    // cluster, the member with the largest summed similarity to the cluster
    // becomes its exemplar
    let mut exemplars: Vec<usize> = (0..n).filter(|&k| a[[k, k]] + r[[k, k]] > 0.0).collect();
    if exemplars.is_empty() {
        let best = (0..n)
            .max_by(|&x, &y| {
                (a[[x, x]] + r[[x, x]])
                    .partial_cmp(&(a[[y, y]] + r[[y, y]]))
                    .expect("finite criteria")
            })
            .expect("n >= 1");
        exemplars.push(best);
    }

    let assign = |exemplars: &[usize]| -> Vec<usize> {
        (0..n)
            .map(|i| {
                if let Some(pos) = exemplars.iter().position(|&k| k == i) {
                    return pos;
                }
                let mut best = 0usize;
                let mut best_sim = f64::NEG_INFINITY;
                for (pos, &k) in exemplars.iter().enumerate() {
                    if s[[i, k]] > best_sim {
                        best_sim = s[[i, k]];
                        best = pos;
                    }
                }
                best
            })
            .collect()
    };

    let provisional = assign(&exemplars);
    for (pos, exemplar) in exemplars.iter_mut().enumerate() {
        let members: Vec<usize> = (0..n).filter(|&i| provisional[i] == pos).collect();
        let mut best = *exemplar;
        let mut best_total = f64::NEG_INFINITY;
        for &candidate in &members {
            let total: f64 = members.iter().map(|&i| s[[i, candidate]]).sum();
            if total > best_total {
                best_total = total;
                best = candidate;
            }
        }
        *exemplar = best;
    }
    exemplars.sort_unstable();
    exemplars.dedup();
    let labels = assign(&exemplars);

    Ok(ApOutcome {
        labels,
        exemplars,
        converged,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Net similarity of an exemplar choice: exemplars contribute the
    /// preference, every other point its similarity to its best exemplar.
    fn net_similarity(similarity: &Array2<f64>, preference: f64, exemplars: &[usize]) -> f64 {
        let n = similarity.nrows();
        (0..n)
            .map(|i| {
                if exemplars.contains(&i) {
                    preference
                } else {
                    exemplars
                        .iter()
                        .map(|&k| similarity[[i, k]])
                        .fold(f64::NEG_INFINITY, f64::max)
                }
            })
            .sum()
    }

    /// Exhaustive search over all non-empty exemplar subsets.
    fn brute_force_optimum(similarity: &Array2<f64>, preference: f64) -> f64 {
        let n = similarity.nrows();
        assert!(n <= 16);
        let mut best = f64::NEG_INFINITY;
        for mask in 1u32..(1 << n) {
            let exemplars: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
            best = best.max(net_similarity(similarity, preference, &exemplars));
        }
        best
    }

    /// Two planted groups with within-similarity well above cross-similarity.
    fn planted_instance(rng: &mut ChaCha8Rng, n: usize) -> (Array2<f64>, Vec<usize>) {
        let split = rng.gen_range(1..n);
        let groups: Vec<usize> = (0..n).map(|i| usize::from(i >= split)).collect();
        let mut s = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..i {
                let v = if groups[i] == groups[j] {
                    rng.gen_range(0.80..0.95)
                } else {
                    rng.gen_range(0.05..0.20)
                };
                s[[i, j]] = v;
                s[[j, i]] = v;
            }
            s[[i, i]] = 1.0;
        }
        (s, groups)
    }

    fn partition(labels: &[usize]) -> Vec<Vec<usize>> {
        let k = labels.iter().max().map(|m| m + 1).unwrap_or(0);
        let mut clusters = vec![Vec::new(); k];
        for (i, &l) in labels.iter().enumerate() {
            clusters[l].push(i);
        }
        clusters.sort();
        clusters
    }

    #[test]
    fn single_point_is_one_cluster() {
        let s = Array2::from_elem((1, 1), 1.0);
        let out = affinity_propagation(&s, -1.0, 0.5, 200, 15).unwrap();
        assert_eq!(out.labels, vec![0]);
        assert_eq!(out.exemplars, vec![0]);
        assert!(out.converged);
    }

    #[test]
    fn two_tight_groups_are_recovered() {
        // 3 + 3 points, crisp block structure
        let mut s = Array2::<f64>::zeros((6, 6));
        for i in 0..6 {
            for j in 0..6 {
                s[[i, j]] = if (i < 3) == (j < 3) { 0.9 } else { 0.1 };
            }
            s[[i, i]] = 1.0;
        }
        let out = affinity_propagation(&s, 0.3, 0.5, 200, 15).unwrap();
        assert!(out.converged);
        assert_eq!(out.exemplars.len(), 2);
        assert_eq!(partition(&out.labels), vec![vec![0, 1, 2], vec![3, 4, 5]]);
    }

    #[test]
    fn huge_preference_makes_singletons() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (s, _) = planted_instance(&mut rng, 7);
        let out = affinity_propagation(&s, 10.0, 0.5, 200, 15).unwrap();
        assert_eq!(out.exemplars.len(), 7);
        assert_eq!(out.labels, vec![0, 1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn matches_brute_force_on_planted_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..40 {
            let n = rng.gen_range(2..=8);
            let (s, _) = planted_instance(&mut rng, n);
            let preference = rng.gen_range(0.2..0.6);
            let out = affinity_propagation(&s, preference, 0.5, 500, 15).unwrap();
            let achieved = net_similarity(&s, preference, &out.exemplars);
            let best = brute_force_optimum(&s, preference);
            assert!(
                achieved >= best - 1e-9,
                "ap reached {achieved}, below brute-force optimum {best} (n={n})"
            );
        }
    }

    #[test]
    fn partition_is_permutation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let n = rng.gen_range(4..=8);
            let (s, _) = planted_instance(&mut rng, n);
            let out = affinity_propagation(&s, 0.4, 0.5, 500, 15).unwrap();

            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.gen_range(0..=i));
            }
            let mut sp = Array2::<f64>::zeros((n, n));
            for i in 0..n {
                for j in 0..n {
                    sp[[i, j]] = s[[perm[i], perm[j]]];
                }
            }
            let out_p = affinity_propagation(&sp, 0.4, 0.5, 500, 15).unwrap();

            // map the permuted labels back to original indices and compare partitions
            let mut back = vec![0usize; n];
            for (new_i, &old_i) in perm.iter().enumerate() {
                back[old_i] = out_p.labels[new_i];
            }
            assert_eq!(partition(&out.labels), partition(&back));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = Array2::<f64>::zeros((2, 3));
        assert!(affinity_propagation(&s, 0.0, 0.5, 10, 5).is_err());
        let mut s = Array2::<f64>::zeros((2, 2));
        s[[0, 1]] = f64::NAN;
        assert!(matches!(
            affinity_propagation(&s, 0.0, 0.5, 10, 5),
            Err(Error::Numerical(_))
        ));
        let s = Array2::<f64>::zeros((2, 2));
        assert!(matches!(
            affinity_propagation(&s, 0.0, 0.4, 10, 5),
            Err(Error::Config(_))
        ));
    }
}
