//! Euclidean projection onto the probability simplex.

use nalgebra::DVector;

/// Projects `v` onto {l : l ⪰ 0, Σl = 1}, minimizing ‖l − v‖₂.
///
/// Sort-based threshold construction: find the largest support size r for
/// which shifting the top r entries by a common θ keeps them positive, then
/// clamp everything else to zero. O(c log c); equivariant under permutation
/// and idempotent up to roundoff.
pub fn project_simplex(v: &DVector<f64>) -> DVector<f64> {
    debug_assert!(v.iter().all(|x| x.is_finite()), "projection input must be finite");
    let c = v.len();
    if c == 0 {
        return v.clone();
    }
    let mut sorted: Vec<f64> = v.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));

    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (i + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.map(|x| (x - theta).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn argmax(v: &DVector<f64>) -> usize {
        let mut best = 0;
        for i in 1..v.len() {
            if v[i] > v[best] {
                best = i;
            }
        }
        best
    }

    #[test]
    fn feasible_input_is_unchanged() {
        let v = DVector::from_column_slice(&[0.2, 0.3, 0.5]);
        let l = project_simplex(&v);
        assert!((l - v).amax() < 1e-15);
    }

    #[test]
    fn vertex_projection() {
        let v = DVector::from_column_slice(&[2.0, 0.0, 0.0]);
        let l = project_simplex(&v);
        assert_eq!(l.as_slice(), &[1.0, 0.0, 0.0]);
    }

    // Oracle: dense scan over the 3-simplex at resolution 1e-3.
    #[test]
    fn matches_grid_search_at_three_classes() {
        for v in [
            DVector::from_column_slice(&[0.5, 0.4, -0.3]),
            DVector::from_column_slice(&[1.2, 0.9, 0.1]),
            DVector::from_column_slice(&[-1.0, -2.0, 0.5]),
        ] {
            let l = project_simplex(&v);
            let mut best = (f64::INFINITY, [0.0; 3]);
            let steps = 1000usize;
            for i in 0..=steps {
                for j in 0..=(steps - i) {
                    let a = i as f64 * 1e-3;
                    let b = j as f64 * 1e-3;
                    let c = 1.0 - a - b;
                    let d = (a - v[0]).powi(2) + (b - v[1]).powi(2) + (c - v[2]).powi(2);
                    if d < best.0 {
                        best = (d, [a, b, c]);
                    }
                }
            }
            for k in 0..3 {
                assert!(
                    (l[k] - best.1[k]).abs() <= 2e-3,
                    "component {k}: {} vs grid {}",
                    l[k],
                    best.1[k]
                );
            }
        }
    }

    proptest! {
        #[test]
        fn projection_invariants(raw in proptest::collection::vec(-10.0..10.0f64, 2..8)) {
            let v = DVector::from_vec(raw);
            let l = project_simplex(&v);
            prop_assert!(l.iter().all(|&x| x >= 0.0));
            prop_assert!((l.sum() - 1.0).abs() <= 1e-12);

            // idempotence
            let twice = project_simplex(&l);
            prop_assert!((&twice - &l).amax() <= 1e-12);

            // permutation equivariance (reversal as the probe permutation)
            let rev = DVector::from_iterator(v.len(), v.iter().rev().copied());
            let l_rev = project_simplex(&rev);
            let rev_l = DVector::from_iterator(l.len(), l.iter().rev().copied());
            prop_assert!((&l_rev - &rev_l).amax() <= 1e-12);

            // argmax preservation when the max is unique
            let m = argmax(&v);
            let unique = (0..v.len()).all(|i| i == m || v[i] < v[m]);
            if unique {
                prop_assert_eq!(argmax(&l), m);
            }
        }
    }
}
