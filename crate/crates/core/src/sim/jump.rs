//! The cancel-on-completion jump of the particles selected by one job.

use crate::error::{Error, Result};

/// New locations of `d` selected particles at `w` with component sizes `xi`
/// when the job completes after `k` components: every particle advances to
/// its potential `w_i + xi_i` but no further than the `k`-th smallest
/// potential, then is clamped at `right_bound`.
pub fn coc_jump(w: &[f64], xi: &[f64], k: usize, right_bound: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; w.len()];
    let mut scratch = Vec::with_capacity(w.len());
    coc_jump_into(w, xi, k, right_bound, &mut scratch, &mut out)?;
    Ok(out)
}

/// Allocation-free form of [`coc_jump`].
pub fn coc_jump_into(
    w: &[f64],
    xi: &[f64],
    k: usize,
    right_bound: f64,
    scratch: &mut Vec<f64>,
    out: &mut [f64],
) -> Result<()> {
    let d = w.len();
    if xi.len() != d || out.len() != d {
        return Err(Error::ParamRange(format!(
            "{d} locations but {} sizes and {} outputs",
            xi.len(),
            out.len()
        )));
    }
    if k == 0 || k > d {
        return Err(Error::ParamRange(format!(
            "need 1 <= k <= d, got k = {k}, d = {d}"
        )));
    }
    if let Some(bad) = xi.iter().find(|x| !(**x >= 0.0)) {
        return Err(Error::NegativeSize(*bad));
    }
    scratch.clear();
    scratch.extend(w.iter().zip(xi).map(|(a, b)| a + b));
    let (_, t_star, _) = scratch.select_nth_unstable_by(k - 1, f64::total_cmp);
    let t_star = *t_star;
    for i in 0..d {
        let p = w[i] + xi[i];
        out[i] = w[i].max(p.min(t_star)).min(right_bound);
    }
    Ok(())
}
