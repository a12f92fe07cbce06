//! 2-D hypervolume under maximization.

/// Area of the union of rectangles spanned by `reference` and each point.
/// Points that do not strictly dominate the reference add nothing.
pub fn hypervolume_2d(points: &[[f64; 2]], reference: [f64; 2]) -> f64 {
    let mut pts: Vec<[f64; 2]> = points.iter().copied().filter(|p| p[0] > reference[0] && p[1] > reference[1]).collect();
    pts.sort_by(|a, b| b[0].total_cmp(&a[0]).then(b[1].total_cmp(&a[1])));
    let mut area = 0.0;
    let mut best_y = reference[1];
    for p in pts {
        if p[1] > best_y {
            area += (p[0] - reference[0]) * (p[1] - best_y);
            best_y = p[1];
        }
    }
    area
}

/// Negated hypervolume gain of adding each candidate alone to `archive`.
pub fn hypervolume_loss(archive: &[[f64; 2]], candidates: &[[f64; 2]], reference: [f64; 2]) -> Vec<f64> {
    let base = hypervolume_2d(archive, reference);
    let mut buf = archive.to_vec();
    candidates
        .iter()
        .map(|c| {
            buf.push(*c);
            let hv = hypervolume_2d(&buf, reference);
            buf.pop();
            -(hv - base)
        })
        .collect()
}

/// Componentwise minimum minus 10% of the span (a unit margin on a flat axis).
pub fn reference_point(points: &[[f64; 2]]) -> [f64; 2] {
    let mut r = [0.0; 2];
    for (k, rk) in r.iter_mut().enumerate() {
        let lo = points.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        *rk = lo - if span > 0.0 { 0.1 * span } else { 1.0 };
    }
    r
}
