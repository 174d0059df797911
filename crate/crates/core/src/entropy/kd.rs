//! Incremental radius-query index: a forest of static kd-trees of doubling
//! sizes (logarithmic method) plus a small linear buffer.

const LEAF: usize = 16;
const BUFFER: usize = 32;

struct KdTree {
    dim: usize,
    pts: Vec<f64>,
    ids: Vec<u32>,
    split_dim: Vec<u8>,
    split_val: Vec<f64>,
}

impl KdTree {
    fn build(dim: usize, mut items: Vec<(u32, Vec<f64>)>) -> Self {
        let n = items.len();
        let nodes = 4 * (n / LEAF + 1);
        let mut split_dim = vec![0u8; nodes];
        let mut split_val = vec![0.0; nodes];
        Self::build_rec(&mut items, 0, &mut split_dim, &mut split_val);
        let mut pts = Vec::with_capacity(n * dim);
        let mut ids = Vec::with_capacity(n);
        for (id, p) in items {
            ids.push(id);
            pts.extend(p);
        }
        KdTree {
            dim,
            pts,
            ids,
            split_dim,
            split_val,
        }
    }

    fn build_rec(items: &mut [(u32, Vec<f64>)], node: usize, sd: &mut [u8], sv: &mut [f64]) {
        if items.len() <= LEAF {
            return;
        }
        let dim = items[0].1.len();
        let spread = |d: usize| {
            let (lo, hi) = items
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| {
                    (l.min(p.1[d]), h.max(p.1[d]))
                });
            hi - lo
        };
        let d = (0..dim)
            .max_by(|&a, &b| spread(a).total_cmp(&spread(b)))
            .unwrap();
        let mid = items.len() / 2;
        items.select_nth_unstable_by(mid, |a, b| a.1[d].total_cmp(&b.1[d]));
        sd[node] = d as u8;
        sv[node] = items[mid].1[d];
        let (left, right) = items.split_at_mut(mid);
        Self::build_rec(left, 2 * node + 1, sd, sv);
        Self::build_rec(right, 2 * node + 2, sd, sv);
    }

    fn query(&self, c: &[f64], r: f64, out: &mut Vec<u32>) {
        self.query_rec(0, 0, self.ids.len(), c, r, out);
    }

    fn query_rec(&self, node: usize, lo: usize, hi: usize, c: &[f64], r: f64, out: &mut Vec<u32>) {
        if hi - lo <= LEAF {
            let r2 = r * r;
            for i in lo..hi {
                let p = &self.pts[i * self.dim..(i + 1) * self.dim];
                let d2: f64 = p.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                if d2 < r2 {
                    out.push(self.ids[i]);
                }
            }
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let diff = c[self.split_dim[node] as usize] - self.split_val[node];
        let (near, far) = if diff < 0.0 {
            ((lo, mid, 2 * node + 1), (mid, hi, 2 * node + 2))
        } else {
            ((mid, hi, 2 * node + 2), (lo, mid, 2 * node + 1))
        };
        self.query_rec(near.2, near.0, near.1, c, r, out);
        if diff.abs() <= r {
            self.query_rec(far.2, far.0, far.1, c, r, out);
        }
    }

    fn drain(self) -> Vec<(u32, Vec<f64>)> {
        let dim = self.dim;
        self.ids
            .into_iter()
            .enumerate()
            .map(|(i, id)| (id, self.pts[i * dim..(i + 1) * dim].to_vec()))
            .collect()
    }
}

pub(crate) struct KdForest {
    dim: usize,
    buffer: Vec<(u32, Vec<f64>)>,
    levels: Vec<Option<KdTree>>,
}

impl KdForest {
    pub(crate) fn new(dim: usize) -> Self {
        KdForest {
            dim,
            buffer: Vec::with_capacity(BUFFER),
            levels: Vec::new(),
        }
    }

    pub(crate) fn insert(&mut self, id: u32, p: Vec<f64>) {
        debug_assert_eq!(p.len(), self.dim);
        self.buffer.push((id, p));
        if self.buffer.len() < BUFFER {
            return;
        }
        let mut carry = std::mem::take(&mut self.buffer);
        for level in 0.. {
            if level == self.levels.len() {
                self.levels.push(None);
            }
            match self.levels[level].take() {
                None => {
                    self.levels[level] = Some(KdTree::build(self.dim, carry));
                    break;
                }
                Some(t) => carry.extend(t.drain()),
            }
        }
    }

    /// Ids of points strictly closer than `r` to `c`.
    pub(crate) fn query(&self, c: &[f64], r: f64, out: &mut Vec<u32>) {
        let r2 = r * r;
        for (id, p) in &self.buffer {
            let d2: f64 = p.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 < r2 {
                out.push(*id);
            }
        }
        for t in self.levels.iter().flatten() {
            t.query(c, r, out);
        }
    }
}
