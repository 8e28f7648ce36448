use crate::error::{Error, Result};

/// Per-action probability floor `gamma / (n + 1)` of the exploration simplex.
pub fn exploration_lower_bound(gamma: f64, num_actions: usize) -> f64 {
    gamma / (num_actions as f64 + 1.0)
}

/// Euclidean projection of `x` onto `{y : sum(y) = 1, y_i >= lower_bound}`.
///
/// Shifts by the bound, projects onto the simplex of mass `1 - n * lb` with
/// the usual sort-and-threshold rule, then shifts back.
pub fn project_to_exploration_simplex(x: &[f64], lower_bound: f64) -> Result<Vec<f64>> {
    let n = x.len();
    if n == 0 {
        return Err(Error::invalid("cannot project an empty vector"));
    }
    let mass = 1.0 - n as f64 * lower_bound;
    if lower_bound < 0.0 || mass < 0.0 {
        return Err(Error::invalid(format!(
            "lower bound {lower_bound} is infeasible for {n} actions"
        )));
    }
    let shifted: Vec<f64> = x.iter().map(|&v| v - lower_bound).collect();
    let mut sorted = shifted.clone();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));

    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        cumulative += v;
        let candidate = (cumulative - mass) / (i + 1) as f64;
        if v - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    Ok(shifted
        .iter()
        .map(|&v| (v - theta).max(0.0) + lower_bound)
        .collect())
}
