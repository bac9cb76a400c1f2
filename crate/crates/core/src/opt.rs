//! One-dimensional maximization on a closed interval.
//!
//! Every node-wise supremum in the solvers is the maximum of a function
//! that is concave on each side of at most a few known kink points (the
//! upwind switch makes the PDE objective only piecewise concave). The
//! search scans a coarse uniform candidate grid, then golden-section
//! refines the winning bracket of every piece separately so a kink can
//! never hide the true maximizer. Ties prefer the smallest |argument|.

#[derive(Debug, Clone, Copy)]
pub struct Maximum {
    pub arg: f64,
    pub value: f64,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

fn better(candidate: Maximum, incumbent: Maximum) -> Maximum {
    if candidate.value > incumbent.value
        || (candidate.value == incumbent.value && candidate.arg.abs() < incumbent.arg.abs())
    {
        candidate
    } else {
        incumbent
    }
}

/// Golden-section search for the maximum of a unimodal function on
/// [lo, hi]; returns the best point actually evaluated.
fn golden_section(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Maximum {
    let mut a = lo;
    let mut b = hi;
    let mut best = Maximum {
        arg: lo,
        value: f(lo),
    };
    best = better(
        Maximum {
            arg: hi,
            value: f(hi),
        },
        best,
    );
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
            best = better(Maximum { arg: x2, value: f2 }, best);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
            best = better(Maximum { arg: x1, value: f1 }, best);
        }
    }
    best
}

/// Maximize `f` over [lo, hi]: coarse scan of `n_grid` uniform candidates,
/// then golden-section refinement within each concavity piece delimited by
/// `kinks` (interior kink abscissae, any order).
pub fn maximize(
    f: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    kinks: &[f64],
    n_grid: usize,
    tol: f64,
) -> Maximum {
    debug_assert!(lo < hi);
    let n = n_grid.max(2);
    let mut boundaries: Vec<f64> = vec![lo];
    let mut interior: Vec<f64> = kinks
        .iter()
        .copied()
        .filter(|k| *k > lo && *k < hi)
        .collect();
    interior.sort_by(|x, y| x.partial_cmp(y).unwrap());
    boundaries.extend(interior);
    boundaries.push(hi);

    let step = (hi - lo) / (n - 1) as f64;
    let mut overall: Option<Maximum> = None;

    for w in boundaries.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a <= 0.0 {
            continue;
        }
        // Uniform candidates falling inside this piece, plus its endpoints.
        let mut cands: Vec<f64> = vec![a];
        let first = ((a - lo) / step).ceil() as usize;
        let mut j = first;
        loop {
            let x = lo + j as f64 * step;
            if x >= b {
                break;
            }
            if x > a {
                cands.push(x);
            }
            j += 1;
        }
        cands.push(b);

        let mut best_idx = 0;
        let mut best = Maximum {
            arg: cands[0],
            value: f(cands[0]),
        };
        for (i, &x) in cands.iter().enumerate().skip(1) {
            let v = f(x);
            if v > best.value || (v == best.value && x.abs() < best.arg.abs()) {
                best = Maximum { arg: x, value: v };
                best_idx = i;
            }
        }
        // Concave piece: the true maximizer lies in the bracket around the
        // grid winner.
        let bl = if best_idx > 0 { cands[best_idx - 1] } else { a };
        let br = if best_idx + 1 < cands.len() {
            cands[best_idx + 1]
        } else {
            b
        };
        let refined = if br - bl > tol {
            better(golden_section(f, bl, br, tol), best)
        } else {
            best
        };
        overall = Some(match overall {
            None => refined,
            Some(cur) => better(refined, cur),
        });
    }
    overall.expect("nonempty interval")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_maximum() {
        let f = |x: f64| -(x - 1.25).powi(2);
        let m = maximize(&f, -10.0, 10.0, &[], 101, 1e-9);
        assert!((m.arg - 1.25).abs() < 1e-7);
        assert!(m.value > -1e-13);
    }

    #[test]
    fn tie_break_prefers_smallest_magnitude() {
        // Flat function: every candidate ties; expect an argument at (or
        // refined toward) zero magnitude rather than an endpoint.
        let f = |_: f64| 1.0;
        let m = maximize(&f, -3.0, 5.0, &[], 81, 1e-9);
        assert!(m.arg.abs() < 0.11);
        assert_eq!(m.value, 1.0);
    }

    #[test]
    fn kink_split_finds_maximum_on_the_losing_side() {
        // Piecewise concave with a convex kink at 0; the right piece has a
        // sharp interior maximum a coarse grid straddles.
        let f = |x: f64| {
            if x < 0.0 {
                -0.1 * (x + 2.0).powi(2) + 0.3
            } else {
                -30.0 * (x - 0.42).powi(2) + 0.32
            }
        };
        let m = maximize(&f, -4.0, 4.0, &[0.0], 9, 1e-10);
        assert!((m.arg - 0.42).abs() < 1e-6, "arg = {}", m.arg);
        assert!((m.value - 0.32).abs() < 1e-9);
    }

    #[test]
    fn boundary_maximum_is_returned() {
        let f = |x: f64| x;
        let m = maximize(&f, -1.0, 2.0, &[], 11, 1e-9);
        assert!((m.arg - 2.0).abs() < 1e-12);
    }
}
