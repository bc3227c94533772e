use crate::components::label_8;
use crate::error::{Error, Result};
use crate::label::{ClassKind, IndexedLabelImage, BACKGROUND};

/// Bridges whose endpoints sit this close to the segment axis are accepted
/// even when the bridge direction itself is quantized away from it.
const LATERAL_SLACK_PX: f64 = 1.5;

#[derive(Debug, Clone)]
struct Segment {
    /// Axis orientation in degrees, `[0, 180)`; `None` for a single pixel.
    angle: Option<f64>,
    ends: [(i64, i64); 2],
}

fn describe(pixels: &[usize], width: u32) -> Segment {
    let pts: Vec<(f64, f64)> = pixels
        .iter()
        .map(|&p| ((p as u32 % width) as f64, (p as u32 / width) as f64))
        .collect();
    let n = pts.len() as f64;
    let (mx, my) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in &pts {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx + syy == 0.0 {
        let p = (pts[0].0 as i64, pts[0].1 as i64);
        return Segment {
            angle: None,
            ends: [p, p],
        };
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let (ux, uy) = (theta.cos(), theta.sin());
    let proj = |p: &(f64, f64)| p.0 * ux + p.1 * uy;
    let mut lo = 0;
    let mut hi = 0;
    for (i, p) in pts.iter().enumerate() {
        if proj(p) < proj(&pts[lo]) {
            lo = i;
        }
        if proj(p) > proj(&pts[hi]) {
            hi = i;
        }
    }
    let to_i = |p: (f64, f64)| (p.0 as i64, p.1 as i64);
    Segment {
        angle: Some(theta.to_degrees().rem_euclid(180.0)),
        ends: [to_i(pts[lo]), to_i(pts[hi])],
    }
}

fn axis_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d)
}

/// Pixels of the 8-connected line from `a` to `b`, inclusive.
fn line(a: (i64, i64), b: (i64, i64)) -> Vec<(i64, i64)> {
    let (mut x, mut y) = a;
    let dx = (b.0 - a.0).abs();
    let dy = -(b.1 - a.1).abs();
    let sx = if a.0 < b.0 { 1 } else { -1 };
    let sy = if a.1 < b.1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = vec![(x, y)];
    while (x, y) != b {
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
        out.push((x, y));
    }
    out
}

/// Closest endpoint pair of two segments, if they qualify for a bridge.
fn bridge(a: &Segment, b: &Segment, max_gap: f64, angle_tol: f64) -> Option<((i64, i64), (i64, i64))> {
    if let (Some(x), Some(y)) = (a.angle, b.angle) {
        if axis_difference(x, y) > angle_tol {
            return None;
        }
    }
    let mut best: Option<(f64, (i64, i64), (i64, i64))> = None;
    for &p in &a.ends {
        for &q in &b.ends {
            let d = (((p.0 - q.0).pow(2) + (p.1 - q.1).pow(2)) as f64).sqrt();
            if best.is_none_or(|(bd, _, _)| d < bd) {
                best = Some((d, p, q));
            }
        }
    }
    let (dist, p, q) = best?;
    if dist > max_gap {
        return None;
    }
    // the bridge must continue the lines, not join parallel neighbours
    let axis = match (a.angle, b.angle) {
        (Some(x), Some(y)) => {
            let y = if (x - y).abs() > 90.0 { y + 180.0 * (x - y).signum() } else { y };
            Some((x + y) / 2.0)
        }
        (Some(x), None) | (None, Some(x)) => Some(x),
        (None, None) => None,
    };
    if let Some(axis) = axis {
        let (vx, vy) = ((q.0 - p.0) as f64, (q.1 - p.1) as f64);
        let bridge_angle = vy.atan2(vx).to_degrees().rem_euclid(180.0);
        let (ux, uy) = (axis.to_radians().cos(), axis.to_radians().sin());
        let lateral = (vx * uy - vy * ux).abs();
        if axis_difference(bridge_angle, axis) > angle_tol && lateral > LATERAL_SLACK_PX {
            return None;
        }
    }
    Some((p, q))
}

/// Reconnects broken separator lines of one class.
///
/// Two components are bridged by a 1-px line of the same class when their
/// closest endpoints are at most `max_gap` apart, their principal directions
/// differ by at most `angle_tol_deg`, and the bridge continues that direction.
/// Bridges only overwrite BACKGROUND. Repeats until nothing changes.
pub fn reconnect_separators(
    img: &IndexedLabelImage,
    class_idx: u8,
    max_gap: f64,
    angle_tol_deg: f64,
) -> Result<IndexedLabelImage> {
    let class = img
        .schema()
        .class(class_idx)
        .ok_or_else(|| Error::NotASeparatorClass(format!("#{class_idx}")))?;
    if class.kind() != ClassKind::Separator {
        return Err(Error::NotASeparatorClass(class.name.clone()));
    }
    let (w, h) = (img.width(), img.height());
    let mut labels = img.labels().to_vec();
    loop {
        let mask: Vec<bool> = labels.iter().map(|&l| l == class_idx).collect();
        let comps = label_8(&mask, w, h);
        let segments: Vec<Segment> = comps.members().iter().map(|px| describe(px, w)).collect();
        let mut changed = false;
        for i in 0..segments.len() {
            for j in i + 1..segments.len() {
                let Some((p, q)) = bridge(&segments[i], &segments[j], max_gap, angle_tol_deg) else {
                    continue;
                };
                for (x, y) in line(p, q) {
                    if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
                        continue;
                    }
                    let idx = y as usize * w as usize + x as usize;
                    if labels[idx] == BACKGROUND {
                        labels[idx] = class_idx;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    IndexedLabelImage::new(w, h, labels, img.schema().clone())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::label::{LabelSchema, Task};

    const H: u8 = 1;
    const V: u8 = 2;

    fn sep() -> Arc<LabelSchema> {
        Arc::new(LabelSchema::builtin(Task::Sep))
    }

    fn count(img: &IndexedLabelImage, class: u8) -> usize {
        let m: Vec<bool> = img.labels().iter().map(|&l| l == class).collect();
        label_8(&m, img.width(), img.height()).count
    }

    fn broken_vertical(gap: u32) -> IndexedLabelImage {
        IndexedLabelImage::from_fn(20, 60, sep(), |x, y| {
            if x == 10 && (5..20).contains(&y) || x == 10 && (20 + gap..50).contains(&y) {
                V
            } else {
                0
            }
        })
        .unwrap()
    }

    #[test]
    fn short_break_is_bridged() {
        let img = broken_vertical(3);
        assert_eq!(count(&img, V), 2);
        let out = reconnect_separators(&img, V, 10.0, 10.0).unwrap();
        assert_eq!(count(&out, V), 1);
        assert_eq!(out.histogram()[V as usize], 45);
    }

    #[test]
    fn long_break_is_kept() {
        let img = broken_vertical(20);
        let out = reconnect_separators(&img, V, 10.0, 10.0).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn perpendicular_lines_are_not_joined() {
        // horizontal V-class stroke ending 3 px left of a vertical stroke
        let img = IndexedLabelImage::from_fn(40, 40, sep(), |x, y| {
            if (y == 20 && (2..15).contains(&x)) || (x == 18 && (10..35).contains(&y)) {
                V
            } else {
                0
            }
        })
        .unwrap();
        let out = reconnect_separators(&img, V, 10.0, 10.0).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn parallel_neighbours_are_not_joined() {
        let img = IndexedLabelImage::from_fn(20, 40, sep(), |x, y| {
            if (x == 5 || x == 9) && (5..35).contains(&y) {
                V
            } else {
                0
            }
        })
        .unwrap();
        assert_eq!(reconnect_separators(&img, V, 10.0, 10.0).unwrap(), img);
    }

    #[test]
    fn other_classes_are_untouched() {
        let mut labels = broken_vertical(3).into_labels();
        labels[21 * 20 + 10] = H;
        let img = IndexedLabelImage::new(20, 60, labels, sep()).unwrap();
        let out = reconnect_separators(&img, V, 10.0, 10.0).unwrap();
        assert_eq!(out.get(10, 21), H);
        assert_eq!(out.histogram()[H as usize], 1);
    }

    #[test]
    fn only_separator_classes() {
        let blk = Arc::new(LabelSchema::builtin(Task::Blk));
        let img = IndexedLabelImage::filled(4, 4, 0, blk).unwrap();
        assert!(matches!(
            reconnect_separators(&img, 1, 5.0, 10.0),
            Err(Error::NotASeparatorClass(_))
        ));
    }

    #[test]
    fn bresenham_is_connected() {
        let pts = line((0, 0), (7, 3));
        assert_eq!(pts.first(), Some(&(0, 0)));
        assert_eq!(pts.last(), Some(&(7, 3)));
        for w in pts.windows(2) {
            assert!((w[0].0 - w[1].0).abs() <= 1 && (w[0].1 - w[1].1).abs() <= 1);
        }
    }
}
