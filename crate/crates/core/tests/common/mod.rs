#![allow(dead_code)]

use std::sync::Arc;

use newsseg::harness::Page;
use newsseg::label::{IndexedLabelImage, LabelSchema, ScanImage, Task};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy)]
struct Rect {
    x0: u32,
    y0: u32,
    x1: u32,
    y1: u32,
}

impl Rect {
    fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }
}

/// Layout of a synthetic newspaper page: a masthead rule, text columns
/// divided by vertical rules, one ruled table and one illustration.
pub struct Layout {
    w: u32,
    h: u32,
    text: Vec<Rect>,
    table: Rect,
    table_cols: Vec<u32>,
    picture: Rect,
    h_rule: u32,
    v_rules: Vec<u32>,
    rule_px: u32,
    line_px: u32,
}

impl Layout {
    pub fn new(w: u32, h: u32, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols = rng.gen_range(2..=4u32);
        let margin = w / 20;
        let col_w = (w - 2 * margin) / cols;
        let h_rule = h / 10 + rng.gen_range(0..h / 40);
        let v_rules: Vec<u32> = (1..cols).map(|c| margin + c * col_w).collect();
        let mut text = Vec::new();
        // the table spans the lower part of the first column
        let table_top = h / 2 + rng.gen_range(0..h / 10);
        let table = Rect {
            x0: margin + col_w / 10,
            y0: table_top,
            x1: margin + col_w - col_w / 10,
            y1: table_top + h / 5,
        };
        let picture_col = cols - 1;
        let picture = Rect {
            x0: margin + picture_col * col_w + col_w / 10,
            y0: h_rule + h / 20,
            x1: margin + (picture_col + 1) * col_w - col_w / 10,
            y1: h_rule + h / 20 + h / 6,
        };
        for c in 0..cols {
            let x0 = margin + c * col_w + col_w / 12;
            let x1 = margin + (c + 1) * col_w - col_w / 12;
            let mut y = h_rule + h / 40;
            if c == picture_col {
                y = picture.y1 + h / 40;
            }
            while y + h / 12 < h - h / 20 {
                let bh = rng.gen_range(h / 14..h / 6).min(h - h / 20 - y);
                let block = Rect { x0, y0: y, x1, y1: y + bh };
                let hits_table = c == 0 && block.y1 > table.y0 - h / 80 && block.y0 < table.y1 + h / 80;
                if !hits_table {
                    text.push(block);
                }
                y += bh + h / 60;
                if c == 0 && y > table.y0 - h / 80 && y < table.y1 {
                    y = table.y1 + h / 60;
                }
            }
        }
        // a headline block above the rule
        text.push(Rect {
            x0: margin,
            y0: h / 30,
            x1: w - margin,
            y1: h_rule - h / 60,
        });
        let table_cols = (1..3).map(|i| table.x0 + i * (table.x1 - table.x0) / 3).collect();
        Layout {
            w,
            h,
            text,
            table,
            table_cols,
            picture,
            h_rule,
            v_rules,
            rule_px: (w / 800).max(1),
            line_px: (h / 300).max(2),
        }
    }

    fn in_text(&self, x: u32, y: u32) -> bool {
        self.text.iter().any(|r| r.contains(x, y))
    }

    fn on_h_rule(&self, x: u32, y: u32) -> bool {
        let margin = self.w / 20;
        y >= self.h_rule && y < self.h_rule + self.rule_px && x >= margin && x < self.w - margin
    }

    fn on_v_rule(&self, x: u32, y: u32) -> bool {
        y > self.h_rule + self.h / 80
            && y < self.h - self.h / 20
            && self.v_rules.iter().any(|&v| x >= v && x < v + self.rule_px)
    }

    fn on_table_rule(&self, x: u32, y: u32) -> bool {
        self.table.contains(x, y) && self.table_cols.iter().any(|&c| x >= c && x < c + self.rule_px)
    }

    pub fn scan(&self) -> ScanImage {
        ScanImage::from_fn(self.w, self.h, |x, y| {
            let ink = self.on_h_rule(x, y)
                || self.on_v_rule(x, y)
                || self.on_table_rule(x, y)
                || (self.in_text(x, y) || self.table.contains(x, y)) && (y / self.line_px) % 3 == 0
                || self.picture.contains(x, y) && (x + y) % 4 < 2;
            if ink {
                0
            } else {
                255
            }
        })
        .unwrap()
    }

    pub fn labels(&self, task: Task) -> IndexedLabelImage {
        let schema = Arc::new(LabelSchema::builtin(task));
        IndexedLabelImage::from_fn(self.w, self.h, schema, |x, y| match task {
            Task::Sep => {
                if self.on_table_rule(x, y) {
                    3
                } else if self.on_v_rule(x, y) {
                    2
                } else if self.on_h_rule(x, y) {
                    1
                } else {
                    0
                }
            }
            Task::Blk | Task::Blkx => {
                if task == Task::Blkx && self.picture.contains(x, y) {
                    3
                } else if self.table.contains(x, y) {
                    2
                } else if self.in_text(x, y) {
                    1
                } else {
                    0
                }
            }
        })
        .unwrap()
    }
}

pub fn synthetic_pages(n: usize, w: u32, h: u32, task: Task, seed: u64) -> Vec<Page> {
    (0..n)
        .map(|i| {
            let layout = Layout::new(w, h, seed.wrapping_add(i as u64));
            Page::new(format!("page{i:02}"), layout.scan(), layout.labels(task)).unwrap()
        })
        .collect()
}

pub fn page_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("page{i:02}")).collect()
}
