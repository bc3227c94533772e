//! Binary dilation and erosion with a square structuring element.
//!
//! Both are separable: a row pass followed by a column pass. Pixels outside the
//! image count as background for dilation and as foreground for erosion, which
//! keeps closing extensive at the borders.

fn pass(src: &[bool], w: usize, h: usize, r: usize, horizontal: bool, dilate: bool) -> Vec<bool> {
    let mut out = vec![false; src.len()];
    let (lines, len) = if horizontal { (h, w) } else { (w, h) };
    let at = |line: usize, i: usize| if horizontal { line * w + i } else { i * w + line };
    let mut prefix = vec![0u32; len + 1];
    for line in 0..lines {
        for i in 0..len {
            prefix[i + 1] = prefix[i] + src[at(line, i)] as u32;
        }
        for i in 0..len {
            let lo = i.saturating_sub(r);
            let hi = (i + r + 1).min(len);
            let set = prefix[hi] - prefix[lo];
            out[at(line, i)] = if dilate {
                set > 0
            } else {
                set as usize == hi - lo
            };
        }
    }
    out
}

pub(crate) fn dilate(mask: &[bool], w: u32, h: u32, r: u32) -> Vec<bool> {
    let (w, h, r) = (w as usize, h as usize, r as usize);
    let rows = pass(mask, w, h, r, true, true);
    pass(&rows, w, h, r, false, true)
}

pub(crate) fn erode(mask: &[bool], w: u32, h: u32, r: u32) -> Vec<bool> {
    let (w, h, r) = (w as usize, h as usize, r as usize);
    let rows = pass(mask, w, h, r, true, false);
    pass(&rows, w, h, r, false, false)
}

pub(crate) fn close(mask: &[bool], w: u32, h: u32, r: u32) -> Vec<bool> {
    erode(&dilate(mask, w, h, r), w, h, r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(mask: &[bool], w: i64, h: i64, r: i64, dilate: bool) -> Vec<bool> {
        let mut out = vec![false; mask.len()];
        for y in 0..h {
            for x in 0..w {
                let mut any = false;
                let mut all = true;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= w || ny >= h {
                            continue;
                        }
                        let v = mask[(ny * w + nx) as usize];
                        any |= v;
                        all &= v;
                    }
                }
                out[(y * w + x) as usize] = if dilate { any } else { all };
            }
        }
        out
    }

    #[test]
    fn separable_matches_brute_force() {
        let (w, h) = (13u32, 9u32);
        let mask: Vec<bool> = (0..w * h).map(|i| (i * 7919 % 11) < 4).collect();
        for r in 1..3 {
            assert_eq!(dilate(&mask, w, h, r), brute(&mask, w as i64, h as i64, r as i64, true));
            assert_eq!(erode(&mask, w, h, r), brute(&mask, w as i64, h as i64, r as i64, false));
        }
    }

    #[test]
    fn closing_is_extensive() {
        let (w, h) = (10u32, 7u32);
        let mask: Vec<bool> = (0..w * h).map(|i| i % 3 == 0 || i % 7 == 1).collect();
        let closed = close(&mask, w, h, 2);
        assert!(mask.iter().zip(&closed).all(|(m, c)| !m || *c));
    }
}
