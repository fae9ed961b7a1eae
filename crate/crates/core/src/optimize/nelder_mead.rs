//! Nelder–Mead maximization with the standard coefficients.

pub(crate) struct NmResult {
    pub x: Vec<f64>,
    pub value: f64,
}

/// Maximizes `f` from the axis simplex `x0, x0 + side e_j`. Stops when the
/// simplex diameter (∞-norm from the best vertex) drops below `xtol`, the
/// value spread below `ftol`, or after `max_evals` evaluations.
pub(crate) fn maximize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    side: f64,
    xtol: f64,
    ftol: f64,
    max_evals: usize,
) -> NmResult {
    let d = x0.len();
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    if d == 0 {
        let value = eval(x0, &mut evals);
        return NmResult { x: vec![], value };
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((x0.to_vec(), eval(x0, &mut evals)));
    for j in 0..d {
        let mut x = x0.to_vec();
        x[j] += side;
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }
    let along = |c: &[f64], w: &[f64], t: f64| -> Vec<f64> {
        c.iter().zip(w).map(|(ci, wi)| ci + t * (wi - ci)).collect()
    };
    while evals < max_evals {
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        let best = &simplex[0];
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| crate::numeric::max_abs_diff(x, &best.0))
            .fold(0.0, f64::max);
        let spread = best.1 - simplex[d].1;
        if diameter < xtol || (spread.is_finite() && spread.abs() < ftol && diameter < xtol.sqrt()) {
            break;
        }
        let mut centroid = vec![0.0; d];
        for (x, _) in &simplex[..d] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / d as f64;
            }
        }
        let (worst_x, worst_v) = simplex[d].clone();
        let reflected = along(&centroid, &worst_x, -1.0);
        let fr = eval(&reflected, &mut evals);
        if fr > simplex[0].1 {
            let expanded = along(&centroid, &worst_x, -2.0);
            let fe = eval(&expanded, &mut evals);
            simplex[d] = if fe > fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr > simplex[d - 1].1 {
            simplex[d] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr > worst_v {
            let x = along(&centroid, &worst_x, -0.5);
            let v = eval(&x, &mut evals);
            (x, v)
        } else {
            let x = along(&centroid, &worst_x, 0.5);
            let v = eval(&x, &mut evals);
            (x, v)
        };
        if fc > fr.max(worst_v) {
            simplex[d] = (contracted, fc);
            continue;
        }
        let best_x = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x = along(&best_x, &vertex.0, 0.5);
            let v = eval(&x, &mut evals);
            *vertex = (x, v);
        }
    }
    simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
    let (x, value) = simplex.swap_remove(0);
    NmResult { x, value }
}
