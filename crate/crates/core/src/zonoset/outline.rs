use nalgebra::Vector2;

use super::Zonotope;

/// Counter-clockwise vertex polygon of the projection onto the first two
/// coordinates. The first vertex is repeated at the end so the ring is closed.
pub fn outline_2d(z: &Zonotope) -> Vec<Vector2<f64>> {
    assert!(z.dim() >= 2, "outline needs at least two coordinates");
    let center = Vector2::new(z.center()[0], z.center()[1]);

    // Orient every generator into the upper half plane, then merge parallel ones.
    let mut gens: Vec<Vector2<f64>> = z
        .generators()
        .column_iter()
        .map(|c| Vector2::new(c[0], c[1]))
        .filter(|g| g.x != 0.0 || g.y != 0.0)
        .map(|g| if g.y < 0.0 || (g.y == 0.0 && g.x < 0.0) { -g } else { g })
        .collect();
    gens.sort_by(|a, b| a.y.atan2(a.x).total_cmp(&b.y.atan2(b.x)));
    let mut merged: Vec<Vector2<f64>> = Vec::with_capacity(gens.len());
    for g in gens {
        match merged.last_mut() {
            Some(last) if (last.x * g.y - last.y * g.x).abs() <= 1e-12 * last.norm() * g.norm() => {
                *last += g;
            }
            _ => merged.push(g),
        }
    }

    if merged.is_empty() {
        return vec![center, center];
    }
    let sum: Vector2<f64> = merged.iter().sum();
    let mut vertex = center - sum;
    let mut ring = Vec::with_capacity(2 * merged.len() + 1);
    ring.push(vertex);
    for g in &merged {
        vertex += 2.0 * g;
        ring.push(vertex);
    }
    for g in &merged[..merged.len() - 1] {
        vertex -= 2.0 * g;
        ring.push(vertex);
    }
    ring.push(ring[0]);
    ring
}

/// Shoelace area of a closed ring.
#[cfg(test)]
pub(crate) fn ring_area(ring: &[Vector2<f64>]) -> f64 {
    ring.windows(2).map(|w| w[0].x * w[1].y - w[1].x * w[0].y).sum::<f64>() / 2.0
}
