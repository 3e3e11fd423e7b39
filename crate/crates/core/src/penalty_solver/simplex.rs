//! Euclidean projection onto the probability simplex.

/// Projects `v` onto `{u : u ≥ 0, Σu = 1}` with the sort-and-threshold rule.
///
/// Runs in `O(m log m)`. An empty input returns an empty vector.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    let mut scratch = Vec::with_capacity(v.len());
    project_simplex_into(v, &mut out, &mut scratch);
    out
}

/// Allocation-free variant used in the solver loop. `scratch` is reused as
/// the sort buffer.
pub fn project_simplex_into(v: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) {
    debug_assert_eq!(v.len(), out.len());
    if v.is_empty() {
        return;
    }
    scratch.clear();
    scratch.extend_from_slice(v);
    scratch.sort_unstable_by(|a, b| b.total_cmp(a));

    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in scratch.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    for (o, &x) in out.iter_mut().zip(v) {
        *o = (x - theta).max(0.0);
    }
}
