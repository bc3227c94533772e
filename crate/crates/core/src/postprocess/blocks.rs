use crate::components::label_8;
use crate::error::{Error, Result};
use crate::label::{ClassKind, IndexedLabelImage, BACKGROUND};
use crate::postprocess::morph::close;
use crate::postprocess::stats::BlockStats;

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut root = i;
    while parent[root] != root {
        root = parent[root];
    }
    let mut cur = i;
    while parent[cur] != root {
        let next = parent[cur];
        parent[cur] = root;
        cur = next;
    }
    root
}

/// The stats record covering the most pixels of a component, if any.
fn assign_stats<'a>(pixels: &[usize], width: u32, stats: &'a [BlockStats]) -> Option<&'a BlockStats> {
    stats
        .iter()
        .map(|s| {
            let hits = pixels
                .iter()
                .filter(|&&p| s.contains(p as u32 % width, p as u32 / width))
                .count();
            (hits, s)
        })
        .filter(|(hits, _)| *hits > 0)
        // most hits, then lowest block id
        .max_by(|a, b| a.0.cmp(&b.0).then(b.1.block_id.cmp(&a.1.block_id)))
        .map(|(_, s)| s)
}

fn heights_compatible(a: Option<&BlockStats>, b: Option<&BlockStats>, limit: f64) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => {
            let (lo, hi) = if a.line_height_px <= b.line_height_px {
                (a.line_height_px, b.line_height_px)
            } else {
                (b.line_height_px, a.line_height_px)
            };
            hi / lo <= limit
        }
        _ => false,
    }
}

/// Morphologically closes one region class into solid shapes.
///
/// Closing only fills BACKGROUND pixels. Where the closing joins blocks that
/// were separate before, the join is kept only if every joined block can be
/// chained through pairs whose line-height ratio is within
/// `height_ratio_limit`; otherwise that whole merged area keeps its
/// pre-closing mask. Blocks without stats never merge.
pub fn close_blocks(
    img: &IndexedLabelImage,
    class_idx: u8,
    radius: u32,
    stats: &[BlockStats],
    height_ratio_limit: f64,
) -> Result<IndexedLabelImage> {
    let class = img
        .schema()
        .class(class_idx)
        .ok_or_else(|| Error::NotARegionClass(format!("#{class_idx}")))?;
    if class.kind() != ClassKind::Region {
        return Err(Error::NotARegionClass(class.name.clone()));
    }
    if radius == 0 {
        return Err(Error::Config("closing radius must be at least 1".into()));
    }
    let (w, h) = (img.width(), img.height());
    let labels = img.labels();
    let mask: Vec<bool> = labels.iter().map(|&l| l == class_idx).collect();
    let closed = close(&mask, w, h, radius);
    let added: Vec<bool> = (0..mask.len())
        .map(|i| closed[i] && !mask[i] && labels[i] == BACKGROUND)
        .collect();
    if !added.iter().any(|&a| a) {
        return Ok(img.clone());
    }
    let grown: Vec<bool> = mask.iter().zip(&added).map(|(m, a)| *m || *a).collect();

    let before = label_8(&mask, w, h);
    let members = before.members();
    let block_stats: Vec<Option<&BlockStats>> =
        members.iter().map(|px| assign_stats(px, w, stats)).collect();

    let after = label_8(&grown, w, h);
    // original components inside each grown component
    let mut inside: Vec<Vec<usize>> = vec![Vec::new(); after.count];
    for (i, px) in members.iter().enumerate() {
        let k = after.ids[px[0]] as usize - 1;
        inside[k].push(i);
    }
    let keep: Vec<bool> = inside
        .iter()
        .map(|blocks| match blocks.len() {
            0 => false,
            1 => true,
            n => {
                let mut parent: Vec<usize> = (0..n).collect();
                for a in 0..n {
                    for b in a + 1..n {
                        if heights_compatible(
                            block_stats[blocks[a]],
                            block_stats[blocks[b]],
                            height_ratio_limit,
                        ) {
                            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                            parent[ra] = rb;
                        }
                    }
                }
                let root = find(&mut parent, 0);
                (1..n).all(|i| find(&mut parent, i) == root)
            }
        })
        .collect();

    let out: Vec<u8> = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            if added[i] && keep[after.ids[i] as usize - 1] {
                class_idx
            } else {
                l
            }
        })
        .collect();
    IndexedLabelImage::new(w, h, out, img.schema().clone())
}
