//! Grid search for the per-ring code densities.

use rayon::prelude::*;
use serde::Serialize;

use super::{plan_objective, AnalyticError, CellModel, RingPlan};

/// Joint searches larger than this fall back to ring-by-ring ascent.
pub const JOINT_LIMIT: usize = 200_000;
/// Per-ring simplex grids larger than this are rejected.
pub const RING_LIMIT: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMethod {
    /// Only one feasible plan exists.
    Trivial,
    /// Every combination of per-ring grid points was scored.
    JointGrid,
    /// Rings were re-optimized one at a time until nothing improved.
    CoordinateAscent { sweeps: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Optimized {
    pub plan: RingPlan,
    pub objective: f64,
    pub method: SearchMethod,
    pub evaluated: usize,
}

/// All share vectors of length `dims` on the simplex whose entries are
/// multiples of `1 / steps`, in lexicographic order of the integer parts.
pub fn simplex_grid(dims: usize, steps: usize) -> Vec<Vec<f64>> {
    fn fill(dims: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() + 1 == dims {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            fill(dims, left - k, prefix, out);
            prefix.pop();
        }
    }
    if dims == 0 {
        return Vec::new();
    }
    let mut raw = Vec::new();
    fill(dims, steps, &mut Vec::with_capacity(dims), &mut raw);
    raw.into_iter()
        .map(|v| v.into_iter().map(|k| k as f64 / steps as f64).collect())
        .collect()
}

fn binomial(n: usize, k: usize) -> Option<usize> {
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// Scores `candidates` and returns the best `(objective, index)`; ties go to the lowest index.
fn best_of<F>(count: usize, score: F) -> Result<(f64, usize), AnalyticError>
where
    F: Fn(usize) -> Result<f64, AnalyticError> + Sync,
{
    let scored: Vec<Result<f64, AnalyticError>> = (0..count).into_par_iter().map(&score).collect();
    let mut best: Option<(f64, usize)> = None;
    for (i, r) in scored.into_iter().enumerate() {
        let v = r?;
        if best.is_none_or(|(b, _)| v > b) {
            best = Some((v, i));
        }
    }
    Ok(best.expect("at least one candidate"))
}

/// Maximizes [`plan_objective`] over per-ring share vectors on a grid of
/// resolution `step`.
pub fn optimize_ring_densities(model: &CellModel, beta: f64, edges: &[f64], step: f64) -> Result<Optimized, AnalyticError> {
    if model.codes.is_empty() {
        return Err(AnalyticError::EmptyCodeSet);
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(AnalyticError::Invalid {
            field: "beta",
            message: "must be in [0, 1]".into(),
        });
    }
    let steps = (1.0 / step).round();
    if !(step > 0.0 && step <= 1.0 && (steps * step - 1.0).abs() < 1e-9) {
        return Err(AnalyticError::Invalid {
            field: "grid_step",
            message: "must divide 1 evenly".into(),
        });
    }
    let steps = steps as usize;
    let rings = edges.len();
    let dims = model.codes.len();

    if dims == 1 {
        let plan = RingPlan::uniform(model, edges, &[1.0])?;
        let objective = plan_objective(&plan, beta, model)?;
        return Ok(Optimized {
            plan,
            objective,
            method: SearchMethod::Trivial,
            evaluated: 1,
        });
    }

    let per_ring = binomial(steps + dims - 1, dims - 1).unwrap_or(usize::MAX);
    if per_ring > RING_LIMIT {
        return Err(AnalyticError::GridTooLarge { points: per_ring });
    }
    let grid = simplex_grid(dims, steps);
    let joint = u32::try_from(rings).ok().and_then(|r| per_ring.checked_pow(r));

    let score = |shares: &[Vec<f64>]| -> Result<f64, AnalyticError> {
        plan_objective(&RingPlan::from_shares(model, edges, shares)?, beta, model)
    };

    if let Some(total) = joint.filter(|&t| t <= JOINT_LIMIT) {
        let decode = |mut flat: usize| -> Vec<Vec<f64>> {
            let mut shares = vec![Vec::new(); rings];
            for j in (0..rings).rev() {
                shares[j] = grid[flat % per_ring].clone();
                flat /= per_ring;
            }
            shares
        };
        let (objective, idx) = best_of(total, |i| score(&decode(i)))?;
        return Ok(Optimized {
            plan: RingPlan::from_shares(model, edges, &decode(idx))?,
            objective,
            method: SearchMethod::JointGrid,
            evaluated: total,
        });
    }

    let (mut objective, start) = best_of(per_ring, |i| score(&vec![grid[i].clone(); rings]))?;
    let mut choice = vec![start; rings];
    let mut evaluated = per_ring;
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut improved = false;
        for j in 0..rings {
            let (value, idx) = best_of(per_ring, |i| {
                let shares: Vec<Vec<f64>> = (0..rings)
                    .map(|r| grid[if r == j { i } else { choice[r] }].clone())
                    .collect();
                score(&shares)
            })?;
            evaluated += per_ring;
            if value > objective {
                objective = value;
                choice[j] = idx;
                improved = true;
            }
        }
        if !improved || sweeps >= 100 {
            break;
        }
    }
    let shares: Vec<Vec<f64>> = choice.iter().map(|&i| grid[i].clone()).collect();
    Ok(Optimized {
        plan: RingPlan::from_shares(model, edges, &shares)?,
        objective,
        method: SearchMethod::CoordinateAscent { sweeps },
        evaluated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_grid_counts_and_sums() {
        let g = simplex_grid(3, 4);
        assert_eq!(g.len(), 15);
        assert!(g.iter().all(|v| (v.iter().sum::<f64>() - 1.0).abs() < 1e-12));
        assert_eq!(simplex_grid(2, 100).len(), 101);
        assert_eq!(simplex_grid(1, 100), vec![vec![1.0]]);
        assert_eq!(binomial(102, 2), Some(5151));
    }
}
