//! 8-connected component labeling on binary masks.

/// Component id per pixel: 0 for background, `1..=count` for foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Components {
    pub ids: Vec<u32>,
    pub count: usize,
}

impl Components {
    /// Pixel indices of each component, in scan order. Entry `i` is component `i + 1`.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count];
        for (i, &id) in self.ids.iter().enumerate() {
            if id > 0 {
                out[id as usize - 1].push(i);
            }
        }
        out
    }
}

pub fn label_8(mask: &[bool], width: u32, height: u32) -> Components {
    let (w, h) = (width as i64, height as i64);
    let mut ids = vec![0u32; mask.len()];
    let mut count = 0u32;
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || ids[start] != 0 {
            continue;
        }
        count += 1;
        ids[start] = count;
        stack.push(start);
        while let Some(p) = stack.pop() {
            let (x, y) = ((p as i64) % w, (p as i64) / w);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let q = (ny * w + nx) as usize;
                    if mask[q] && ids[q] == 0 {
                        ids[q] = count;
                        stack.push(q);
                    }
                }
            }
        }
    }
    Components {
        ids,
        count: count as usize,
    }
}
