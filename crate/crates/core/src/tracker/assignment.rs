//! Gated GNN cost matrix and its minimum-cost assignment.
//!
//! The matrix has one row per track and `m + n` columns: the left `m`
//! columns hold association costs, the right `n` columns hold each track's
//! misdetection cost on the diagonal and infinity elsewhere. Minimizing the
//! total cost assigns every track either a detection or its misdetection
//! column; detections left over are candidates for track birth.

/// Cost matrix in the `n x (m + n)` block layout.
#[derive(Clone, Debug)]
pub struct CostMatrix {
    pub num_tracks: usize,
    pub num_detections: usize,
    /// Row-major `n x (m + n)`; gated pairs are `f64::INFINITY`.
    entries: Vec<f64>,
    /// Track/detection pairs whose innovation covariance was singular.
    pub singular_pairs: Vec<(usize, usize)>,
}

impl CostMatrix {
    /// Builds the block layout with all association entries gated and the
    /// given per-track misdetection cost on the right-block diagonal.
    pub fn new(num_tracks: usize, num_detections: usize, misdetection_cost: f64) -> Self {
        let cols = num_detections + num_tracks;
        let mut entries = vec![f64::INFINITY; num_tracks * cols];
        for track in 0..num_tracks {
            entries[track * cols + num_detections + track] = misdetection_cost;
        }
        CostMatrix {
            num_tracks,
            num_detections,
            entries,
            singular_pairs: Vec::new(),
        }
    }

    fn cols(&self) -> usize {
        self.num_detections + self.num_tracks
    }

    pub fn set_association(&mut self, track: usize, detection: usize, cost: f64) {
        assert!(detection < self.num_detections);
        let cols = self.cols();
        self.entries[track * cols + detection] = cost;
    }

    pub fn association(&self, track: usize, detection: usize) -> f64 {
        self.entries[track * self.cols() + detection]
    }

    pub fn misdetection(&self, track: usize) -> f64 {
        self.entries[track * self.cols() + self.num_detections + track]
    }

    fn entry(&self, track: usize, col: usize) -> f64 {
        self.entries[track * self.cols() + col]
    }
}

/// Result of solving the assignment problem.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    /// Per track: `Some(detection index)` or `None` for misdetection.
    pub track_to_detection: Vec<Option<usize>>,
    /// Detections not assigned to any track, in ascending order.
    pub unassigned_detections: Vec<usize>,
    /// Sum of the chosen matrix entries.
    pub total_cost: f64,
}

// Infinite entries are mapped to this for the potentials arithmetic. Any
// assignment using one would cost more than n tracks' worth of finite
// entries, so it is never chosen while a finite solution exists.
const GATED: f64 = 1e12;

/// Minimum-total-cost assignment via the Hungarian algorithm
/// (Jonker-Volgenant style shortest augmenting paths with potentials).
///
/// Every row always has a finite misdetection column, so a finite solution
/// exists for any input.
pub fn solve_assignment(matrix: &CostMatrix) -> Assignment {
    let n = matrix.num_tracks;
    let m = matrix.num_detections;
    let cols = m + n;
    if n == 0 {
        return Assignment {
            track_to_detection: Vec::new(),
            unassigned_detections: (0..m).collect(),
            total_cost: 0.0,
        };
    }

    let cost = |row: usize, col: usize| -> f64 {
        let c = matrix.entry(row, col);
        if c.is_finite() {
            c
        } else {
            GATED
        }
    };

    // 1-indexed potentials; col_owner[j] = row matched to column j.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; cols + 1];
    let mut col_owner = vec![0usize; cols + 1];
    let mut path = vec![0usize; cols + 1];

    for row in 1..=n {
        col_owner[0] = row;
        let mut j0 = 0usize;
        let mut min_slack = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let current = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if current < min_slack[j] {
                    min_slack[j] = current;
                    path[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = path[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut track_to_detection = vec![None; n];
    let mut total_cost = 0.0;
    for (j, &row) in col_owner.iter().enumerate().take(cols + 1).skip(1) {
        if row == 0 {
            continue;
        }
        let col = j - 1;
        if col < m {
            track_to_detection[row - 1] = Some(col);
        }
        total_cost += matrix.entry(row - 1, col).min(GATED);
    }
    let unassigned_detections = (0..m)
        .filter(|d| !track_to_detection.contains(&Some(*d)))
        .collect();
    Assignment {
        track_to_detection,
        unassigned_detections,
        total_cost,
    }
}

/// Exhaustive minimum-cost assignment, for small problems only.
///
/// Kept as an independent check of [`solve_assignment`]; used by the test
/// suites, never by the pipeline.
pub fn brute_force_assignment(matrix: &CostMatrix) -> Assignment {
    let n = matrix.num_tracks;
    let m = matrix.num_detections;
    let mut best: Option<(f64, Vec<Option<usize>>)> = None;
    let mut current = vec![None; n];
    let mut taken = vec![false; m];

    fn recurse(
        matrix: &CostMatrix,
        row: usize,
        cost_so_far: f64,
        current: &mut Vec<Option<usize>>,
        taken: &mut Vec<bool>,
        best: &mut Option<(f64, Vec<Option<usize>>)>,
    ) {
        let n = matrix.num_tracks;
        if row == n {
            if best.as_ref().map(|(c, _)| cost_so_far < *c).unwrap_or(true) {
                *best = Some((cost_so_far, current.clone()));
            }
            return;
        }
        for det in 0..matrix.num_detections {
            let c = matrix.association(row, det);
            if taken[det] || !c.is_finite() {
                continue;
            }
            taken[det] = true;
            current[row] = Some(det);
            recurse(matrix, row + 1, cost_so_far + c, current, taken, best);
            current[row] = None;
            taken[det] = false;
        }
        recurse(
            matrix,
            row + 1,
            cost_so_far + matrix.misdetection(row),
            current,
            taken,
            best,
        );
    }

    recurse(matrix, 0, 0.0, &mut current, &mut taken, &mut best);
    let (total_cost, track_to_detection) = best.expect("misdetection path always feasible");
    let unassigned_detections = (0..m)
        .filter(|d| !track_to_detection.contains(&Some(*d)))
        .collect();
    Assignment {
        track_to_detection,
        unassigned_detections,
        total_cost,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn prefers_cheap_diagonal() {
        let mut matrix = CostMatrix::new(2, 2, 10.0);
        matrix.set_association(0, 0, 1.0);
        matrix.set_association(0, 1, 2.0);
        matrix.set_association(1, 0, 3.0);
        matrix.set_association(1, 1, 1.0);
        let assignment = solve_assignment(&matrix);
        assert_eq!(assignment.track_to_detection, vec![Some(0), Some(1)]);
        assert_eq!(assignment.total_cost, 2.0);
        assert!(assignment.unassigned_detections.is_empty());
    }

    #[test]
    fn all_gated_forces_misdetection() {
        let matrix = CostMatrix::new(3, 2, 2.0);
        let assignment = solve_assignment(&matrix);
        assert_eq!(assignment.track_to_detection, vec![None, None, None]);
        assert_eq!(assignment.unassigned_detections, vec![0, 1]);
        assert_eq!(assignment.total_cost, 6.0);
    }

    #[test]
    fn expensive_association_loses_to_misdetection() {
        let mut matrix = CostMatrix::new(1, 1, 2.3);
        matrix.set_association(0, 0, 5.0);
        let assignment = solve_assignment(&matrix);
        assert_eq!(assignment.track_to_detection, vec![None]);
        assert_eq!(assignment.unassigned_detections, vec![0]);
        assert_eq!(assignment.total_cost, 2.3);
    }

    #[test]
    fn gated_pair_never_assigned() {
        let mut matrix = CostMatrix::new(2, 1, 1.0);
        matrix.set_association(1, 0, 0.5);
        // Track 0 stays gated against detection 0.
        let assignment = solve_assignment(&matrix);
        assert_eq!(assignment.track_to_detection[0], None);
        assert_eq!(assignment.track_to_detection[1], Some(0));
    }

    #[test]
    fn matches_brute_force_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let n = rng.gen_range(1..=5);
            let m = rng.gen_range(0..=5);
            let mut matrix = CostMatrix::new(n, m, rng.gen_range(0.1..10.0));
            for track in 0..n {
                for det in 0..m {
                    if rng.gen_bool(0.8) {
                        matrix.set_association(track, det, rng.gen_range(0.0..20.0));
                    }
                }
            }
            let fast = solve_assignment(&matrix);
            let slow = brute_force_assignment(&matrix);
            assert!(
                (fast.total_cost - slow.total_cost).abs() < 1e-9,
                "hungarian {} vs brute force {}",
                fast.total_cost,
                slow.total_cost
            );
        }
    }
}
