/// Non-dominated mask under maximization of both coordinates. Equal points do
/// not dominate each other.
pub fn pareto_mask(points: &[[f64; 2]]) -> Vec<bool> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[b][0].total_cmp(&points[a][0]).then(a.cmp(&b)));
    let mut mask = vec![false; points.len()];
    // Best second coordinate among strictly larger first coordinates.
    let mut best_prev = f64::NEG_INFINITY;
    let mut i = 0;
    while i < order.len() {
        let x = points[order[i]][0];
        let mut j = i;
        let mut group_max = f64::NEG_INFINITY;
        while j < order.len() && points[order[j]][0] == x {
            group_max = group_max.max(points[order[j]][1]);
            j += 1;
        }
        for &k in &order[i..j] {
            let y = points[k][1];
            mask[k] = y > best_prev && y == group_max;
        }
        best_prev = best_prev.max(group_max);
        i = j;
    }
    mask
}

/// Members within `d_near` (Euclidean) of any Pareto member.
pub fn near_optimal_mask(points: &[[f64; 2]], pareto: &[bool], d_near: f64) -> Vec<bool> {
    let front: Vec<[f64; 2]> = points.iter().zip(pareto).filter(|(_, &m)| m).map(|(p, _)| *p).collect();
    points
        .iter()
        .map(|p| front.iter().any(|q| (p[0] - q[0]).hypot(p[1] - q[1]) <= d_near))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dominates(a: &[f64; 2], b: &[f64; 2]) -> bool {
        a[0] >= b[0] && a[1] >= b[1] && (a[0] > b[0] || a[1] > b[1])
    }

    proptest! {
        #[test]
        fn mask_matches_pairwise_oracle(pts in prop::collection::vec((0u8..6, 0u8..6), 1..60)) {
            // Small integer grid so ties and duplicates are common.
            let v: Vec<[f64; 2]> = pts.iter().map(|p| [p.0 as f64, p.1 as f64]).collect();
            let mask = pareto_mask(&v);
            for (i, p) in v.iter().enumerate() {
                let dominated = v.iter().any(|q| dominates(q, p));
                prop_assert_eq!(mask[i], !dominated);
            }
        }
    }

    #[test]
    fn dominated_far_point_is_not_near_optimal() {
        let pts = [[1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
        let m = pareto_mask(&pts);
        assert_eq!(m, vec![true, true, false]);
        assert_eq!(near_optimal_mask(&pts, &m, 0.3), vec![true, true, false]);
    }
}
