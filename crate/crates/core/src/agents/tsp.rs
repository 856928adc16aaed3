//! Open-path traveling salesman heuristics: nearest neighbor construction
//! improved by 2-opt and Or-opt.

/// Dense symmetric distance matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DistMatrix {
    n: usize,
    d: Vec<f64>,
}

impl DistMatrix {
    pub fn new(n: usize, dist: impl Fn(usize, usize) -> f64) -> Self {
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] = dist(i, j);
            }
        }
        Self { n, d }
    }

    pub fn euclidean(points: &[(f64, f64)]) -> Self {
        Self::new(points.len(), |i, j| {
            (points[i].0 - points[j].0).hypot(points[i].1 - points[j].1)
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }
}

/// Length of the open path visiting `order` in sequence.
pub fn path_length(m: &DistMatrix, order: &[usize]) -> f64 {
    order.windows(2).map(|w| m.get(w[0], w[1])).sum()
}

/// Greedy path from `start`; ties go to the lowest index.
pub fn nearest_neighbor(m: &DistMatrix, start: usize) -> Vec<usize> {
    let mut used = vec![false; m.len()];
    let mut order = Vec::with_capacity(m.len());
    let mut cur = start;
    used[cur] = true;
    order.push(cur);
    for _ in 1..m.len() {
        let mut best: Option<usize> = None;
        for j in 0..m.len() {
            if !used[j] && best.is_none_or(|b| m.get(cur, j) < m.get(cur, b)) {
                best = Some(j);
            }
        }
        let b = best.expect("unvisited node remains");
        used[b] = true;
        order.push(b);
        cur = b;
    }
    order
}

/// Segment reversals until no single reversal shortens the path. With
/// `fixed_start` the first node stays in place; otherwise both ends are
/// free. Returns the number of applied improvements.
pub fn two_opt(m: &DistMatrix, order: &mut [usize], fixed_start: bool) -> usize {
    let n = order.len();
    let mut applied = 0;
    let first = usize::from(fixed_start);
    loop {
        let mut improved = false;
        for i in first..n {
            for j in i + 1..n {
                let mut before = 0.0;
                let mut after = 0.0;
                if i > 0 {
                    before += m.get(order[i - 1], order[i]);
                    after += m.get(order[i - 1], order[j]);
                }
                if j + 1 < n {
                    before += m.get(order[j], order[j + 1]);
                    after += m.get(order[i], order[j + 1]);
                }
                if after < before - 1e-12 {
                    order[i..=j].reverse();
                    applied += 1;
                    improved = true;
                }
            }
        }
        if !improved {
            return applied;
        }
    }
}

/// Moves of one to three consecutive nodes to another place in the path,
/// optionally reversed, until none shortens it. Returns the number of
/// applied improvements.
pub fn or_opt(m: &DistMatrix, order: &mut Vec<usize>, fixed_start: bool) -> usize {
    let n = order.len();
    let first = usize::from(fixed_start);
    let mut applied = 0;
    let mut candidate = Vec::with_capacity(n);
    'restart: loop {
        let current = path_length(m, order);
        for seg in 1..=3.min(n) {
            for i in first..=n - seg {
                let segment: Vec<usize> = order[i..i + seg].to_vec();
                let rest: Vec<usize> = order[..i]
                    .iter()
                    .chain(&order[i + seg..])
                    .copied()
                    .collect();
                for p in first..=rest.len() {
                    for reversed in [false, true] {
                        candidate.clear();
                        candidate.extend_from_slice(&rest[..p]);
                        if reversed {
                            candidate.extend(segment.iter().rev());
                        } else {
                            candidate.extend_from_slice(&segment);
                        }
                        candidate.extend_from_slice(&rest[p..]);
                        if path_length(m, &candidate) < current - 1e-12 {
                            order.copy_from_slice(&candidate);
                            applied += 1;
                            continue 'restart;
                        }
                    }
                }
            }
        }
        return applied;
    }
}

/// 2-opt and Or-opt alternated until neither improves.
pub fn improve(m: &DistMatrix, order: &mut Vec<usize>, fixed_start: bool) {
    loop {
        two_opt(m, order, fixed_start);
        if or_opt(m, order, fixed_start) == 0 {
            return;
        }
    }
}

/// Nearest neighbor from `start` then local search. Without a start, every node is
/// tried as the seed of the construction and the shortest result is kept.
pub fn solve_open_path(m: &DistMatrix, start: Option<usize>) -> Vec<usize> {
    if m.is_empty() {
        return Vec::new();
    }
    let seeds: Vec<usize> = match start {
        Some(s) => vec![s],
        None => (0..m.len()).collect(),
    };
    let mut best: Option<(Vec<usize>, f64)> = None;
    for s in seeds {
        let mut order = nearest_neighbor(m, s);
        improve(m, &mut order, start.is_some());
        let len = path_length(m, &order);
        if best.as_ref().is_none_or(|(_, b)| len < *b - 1e-12) {
            best = Some((order, len));
        }
    }
    best.map(|(o, _)| o).unwrap_or_default()
}
